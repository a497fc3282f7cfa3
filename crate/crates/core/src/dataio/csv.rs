//! CSV reports: comma-separated with a header row, `.` decimals, and empty
//! fields for missing values.

use std::fmt::Write as _;

/// One FD measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdRow {
    pub class: u8,
    pub iteration: Option<usize>,
    pub n_real: usize,
    pub n_gen: usize,
    pub fd: f64,
}

pub const FD_HEADER: &str = "class,iteration,n_real,n_gen,fd";

pub fn optional<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn fd_csv(rows: &[FdRow]) -> String {
    let mut out = format!("{FD_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.class,
            optional(r.iteration),
            r.n_real,
            r.n_gen,
            r.fd
        );
    }
    out
}

/// Per-epoch autoencoder loss as `epoch,loss`, epochs counted from 1.
pub fn loss_curve_csv(losses: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in losses.iter().enumerate() {
        let _ = writeln!(out, "{},{l}", i + 1);
    }
    out
}
