//! Fréchet distance between Gaussian fits of two sample sets.
//!
//! `FD = |mu_r - mu_g|^2 + Tr(S_r) + Tr(S_g) - 2 Tr((S_r S_g)^(1/2))`, with
//! the cross term evaluated as `Tr(sqrt(sqrt(S_r) S_g sqrt(S_r)))`, which has
//! the same spectrum but stays symmetric.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ridge added to every fitted covariance diagonal.
pub const COVARIANCE_RIDGE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianStats {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Column means and unbiased covariance (divisor `n - 1`) plus
/// [`COVARIANCE_RIDGE`] on the diagonal.
pub fn fit_gaussian<S: AsRef<[f64]>>(samples: &[S]) -> Result<GaussianStats> {
    fit_gaussian_with_ridge(samples, COVARIANCE_RIDGE)
}

pub fn fit_gaussian_with_ridge<S: AsRef<[f64]>>(samples: &[S], ridge: f64) -> Result<GaussianStats> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::SampleSize(format!("need at least 2 samples, got {n}")));
    }
    let d = samples[0].as_ref().len();
    if d == 0 {
        return Err(Error::Shape("samples have no features".into()));
    }
    let mut x = DMatrix::<f64>::zeros(n, d);
    for (i, s) in samples.iter().enumerate() {
        let s = s.as_ref();
        if s.len() != d {
            return Err(Error::Shape(format!("sample {i} has {} features, expected {d}", s.len())));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("sample {i} has a non-finite feature")));
        }
        x.row_mut(i).copy_from_slice(s);
    }
    let mu = DVector::from_iterator(d, x.column_iter().map(|c| c.sum() / n as f64));
    for mut row in x.row_iter_mut() {
        row -= mu.transpose();
    }
    let mut sigma = x.tr_mul(&x) / (n as f64 - 1.0);
    symmetrize(&mut sigma);
    for i in 0..d {
        sigma[(i, i)] += ridge;
    }
    Ok(GaussianStats { mu, sigma })
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

fn check_square_finite(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Shape(format!("matrix is {}x{}, not square", a.nrows(), a.ncols())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Principal square root of a symmetric PSD matrix via eigendecomposition.
/// Negative eigenvalues (round-off) are clamped to zero.
pub fn sqrtm_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square_finite(a)?;
    let mut sym = a.clone();
    symmetrize(&mut sym);
    let eig = sym.symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let scaled = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
    let mut root = scaled * eig.eigenvectors.transpose();
    symmetrize(&mut root);
    Ok(root)
}

/// `Tr(sqrt(A))` for symmetric PSD `A`, from eigenvalues only.
fn trace_sqrt_psd(mut a: DMatrix<f64>) -> Result<f64> {
    check_square_finite(&a)?;
    symmetrize(&mut a);
    Ok(a.symmetric_eigenvalues().iter().map(|l| l.max(0.0).sqrt()).sum())
}

/// Precomputed real-side statistics for repeated distance evaluation.
#[derive(Clone, Debug)]
pub struct FrechetReference {
    stats: GaussianStats,
    sigma_sqrt: DMatrix<f64>,
}

impl FrechetReference {
    pub fn new(stats: GaussianStats) -> Result<Self> {
        let sigma_sqrt = sqrtm_psd(&stats.sigma)?;
        Ok(Self { stats, sigma_sqrt })
    }

    pub fn stats(&self) -> &GaussianStats {
        &self.stats
    }

    pub fn distance(&self, other: &GaussianStats) -> Result<f64> {
        let real = &self.stats;
        if real.dim() != other.dim() || other.sigma.nrows() != other.dim() {
            return Err(Error::Shape(format!(
                "cannot compare {}-D and {}-D statistics",
                real.dim(),
                other.dim()
            )));
        }
        let mean_term = (&real.mu - &other.mu).norm_squared();
        let inner = &self.sigma_sqrt * &other.sigma * &self.sigma_sqrt;
        let cross = trace_sqrt_psd(inner)?;
        let fd = mean_term + real.sigma.trace() + other.sigma.trace() - 2.0 * cross;
        Ok(fd.max(0.0))
    }
}

pub fn frechet_distance(real: &GaussianStats, generated: &GaussianStats) -> Result<f64> {
    if real.dim() != generated.dim() {
        return Err(Error::Shape(format!(
            "cannot compare {}-D and {}-D statistics",
            real.dim(),
            generated.dim()
        )));
    }
    FrechetReference::new(real.clone())?.distance(generated)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdReport {
    pub fd: f64,
    pub n_real: usize,
    pub n_gen: usize,
}

/// FD between two image sets in raw pixel space.
pub fn fd_pixels<S: AsRef<[f64]>, T: AsRef<[f64]>>(real: &[S], generated: &[T]) -> Result<FdReport> {
    if real.is_empty() || generated.is_empty() {
        return Err(Error::SampleSize("both image sets must be non-empty".into()));
    }
    let fd = frechet_distance(&fit_gaussian(real)?, &fit_gaussian(generated)?)?;
    Ok(FdReport {
        fd,
        n_real: real.len(),
        n_gen: generated.len(),
    })
}
