use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use latentqgan::dataio::{load_checkpoint, save_checkpoint};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-subset")
}

fn latentqgan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latentqgan")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = latentqgan(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let out = latentqgan(&[]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stderr).to_string() + &String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Usage"), "{text}");
    assert_eq!(latentqgan(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = latentqgan(&[
        "baseline",
        "random-decoder",
        "--ae",
        s(&dir.path().join("absent.ckpt")),
        "--count",
        "2",
        "--out",
        s(&dir.path().join("x.pgm")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn short_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let data = data_dir();

    ok(&[
        "train-ae", "--data", s(&data), "--out", s(&p("ae.ckpt")), "--epochs", "1", "--limit", "100",
        "--curve", s(&p("curve.csv")),
    ]);
    let curve = std::fs::read_to_string(p("curve.csv")).unwrap();
    assert!(curve.starts_with("epoch,loss\n1,"));

    let summary = ok(&[
        "train-qgan", "--data", s(&data), "--ae", s(&p("ae.ckpt")), "--class", "0", "--out", s(&p("gen.ckpt")),
        "--trace", s(&p("trace.csv")), "--iters", "4", "--eval-every", "2", "--fd-samples", "20",
    ]);
    assert!(summary.contains("4 iterations"), "{summary}");
    let trace = std::fs::read_to_string(p("trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines[0], "iter,loss_d,loss_g,fd");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("0,,,") && lines[2].ends_with(',') && !lines[3].ends_with(','));

    // A barely trained decoder ignores the small latent differences that
    // shot noise produces; amplifying its first layer makes them visible.
    let (ae, gen) = (p("sensitive-ae.ckpt"), p("gen.ckpt"));
    let mut ckpt = load_checkpoint(&p("ae.ckpt")).unwrap();
    let block = ckpt.blocks.iter_mut().find(|b| b.name == "decoder.0.weight").unwrap();
    block.values.iter_mut().for_each(|v| *v *= 200.0);
    save_checkpoint(&ckpt, &ae).unwrap();
    let generate = |out: &str, extra: &[&str]| {
        let mut args = vec!["generate", "--ae", s(&ae), "--gen", s(&gen), "--count", "6"];
        args.extend_from_slice(&["--cols", "3", "--seed", "5", "--out"]);
        let out = p(out);
        args.push(s(&out));
        args.extend_from_slice(extra);
        ok(&args);
        std::fs::read(out).unwrap()
    };
    let analytic = generate("analytic.pgm", &[]);
    let shots = generate("shots.pgm", &["--shots", "2048"]);
    let again = generate("shots2.pgm", &["--shots", "2048"]);
    assert!(analytic.starts_with(b"P5\n# images 6\n88 58\n255\n"));
    assert_ne!(analytic, shots, "shot mode must sample rather than reuse the analytic pass");
    assert_eq!(shots, again);

    ok(&[
        "baseline", "random-decoder", "--ae", s(&p("ae.ckpt")), "--count", "6", "--out", s(&p("random.pgm")),
    ]);
    ok(&[
        "fd", "--data", s(&data), "--real-class", "0", "--gen-images", s(&p("analytic.pgm")), s(&p("random.pgm")),
        "--out", s(&p("fd.csv")), "--iteration", "4",
    ]);
    let report = std::fs::read_to_string(p("fd.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "class,iteration,n_real,n_gen,fd");
    assert!(lines[1].starts_with("0,4,500,12,"), "{report}");

    ok(&[
        "train-qgan", "--data", s(&data), "--ae", s(&p("ae.ckpt")), "--class", "1", "--out", s(&p("classical.ckpt")),
        "--trace", s(&p("classical.csv")), "--iters", "2", "--fd-samples", "10", "--generator", "classical",
    ]);
    let out = latentqgan(&[
        "generate", "--ae", s(&p("ae.ckpt")), "--gen", s(&p("classical.ckpt")), "--count", "2", "--out",
        s(&p("c.pgm")), "--shots", "100",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--shots needs a quantum generator"));
}
