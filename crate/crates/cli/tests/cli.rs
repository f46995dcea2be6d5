use std::path::Path;
use std::process::{Command, Output};

const TINY: &[&str] = &[
    "--set", "arch.hidden_layers=1", "--set", "arch.hidden_width=4",
    "--set", "data.ic=8", "--set", "data.bc=4", "--set", "data.pde=16",
    "--set", "pretrain.epochs=20", "--set", "sampler.samples=4", "--set", "sampler.burnin=6",
    "--set", "sampler.leapfrog=4", "--set", "sampler.chains=1", "--set", "sampler.initial_step=1e-4",
    "--set", "eval.points=50", "--set", "eval.field_nx=8", "--set", "eval.field_nt=5",
    "--iterations", "2",
];

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bpl-pinn"))
}

fn run_tiny(out: &Path, extra: &[&str]) -> Output {
    bin()
        .args(["run", "--system", "reaction", "--rho", "3", "--method", "bayes-pl", "--seed", "4"])
        .args(TINY)
        .args(extra)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn strip_timing(summary: &str) -> String {
    summary.lines().filter(|l| !l.starts_with("seconds_")).collect::<Vec<_>>().join("\n")
}

#[test]
fn unknown_system_is_a_config_error() {
    let out = bin().args(["run", "--system", "heat"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("system"), "{err}");
}

#[test]
fn unknown_key_is_named() {
    let out = bin().args(["run", "--set", "sampler.leapfrogs=3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sampler.leapfrogs"));
}

#[test]
fn tiny_run_is_deterministic_and_echo_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let ra = run_tiny(&a, &[]);
    assert!(ra.status.success(), "{}", String::from_utf8_lossy(&ra.stderr));
    let rb = run_tiny(&b, &[]);
    assert!(rb.status.success());
    for f in ["fields.csv", "checkpoint.bin", "data.csv", "loss.csv", "checkpoints/iter-0001.bin"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let sa = std::fs::read_to_string(a.join("summary.txt")).unwrap();
    assert_eq!(strip_timing(&sa), strip_timing(&std::fs::read_to_string(b.join("summary.txt")).unwrap()));

    // the echoed configuration alone reproduces the run
    let rc = bin()
        .args(["run", "--config"])
        .arg(a.join("effective.conf"))
        .arg("--out")
        .arg(&c)
        .output()
        .unwrap();
    assert!(rc.status.success(), "{}", String::from_utf8_lossy(&rc.stderr));
    assert_eq!(std::fs::read(a.join("fields.csv")).unwrap(), std::fs::read(c.join("fields.csv")).unwrap());
}

#[test]
fn suite_records_each_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["suite", "--systems", "reaction:3", "--methods", "vanilla,bayes-nopl"])
        .args(TINY)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(table.lines().count(), 3, "{table}");
    assert!(table.lines().skip(1).all(|l| l.contains(",ok,")), "{table}");
}
