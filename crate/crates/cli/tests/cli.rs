//! End-to-end tests of the `lifted-mcmc` binary: exit codes, config
//! validation messages, CSV output shape, and run determinism.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lifted-mcmc"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn validate_passes_and_exits_zero() {
    let out = bin().args(["validate", "--seed", "2"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout.contains("PASS stationarity"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn missing_config_exits_two() {
    let out = bin().args(["run", "/nonexistent/config.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("cannot read config"));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "experiment = \"ising-sweep-eta\"\nbogus = 1\n",
    );
    let out = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus"), "stderr: {}", stderr(&out));
}

#[test]
fn invalid_lambda_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "experiment = \"ising-sweep-eta\"\n[ising]\nlambda = -1.0\n",
    );
    let out = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("ising.lambda"), "stderr: {}", stderr(&out));
}

#[test]
fn unknown_sampler_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "experiment = \"ising-sweep-eta\"\nsamplers = [\"gibbs\"]\n",
    );
    let out = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("gibbs"));
}

/// Rows of a summary CSV with the wall-clock column removed, since it is the
/// only column allowed to differ across identical runs.
fn rows_without_seconds(path: &Path) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let mut rows: Vec<Vec<String>> = vec![reader
        .headers()
        .unwrap()
        .iter()
        .map(str::to_owned)
        .collect()];
    for rec in reader.records() {
        rows.push(rec.unwrap().iter().map(str::to_owned).collect());
    }
    for row in &mut rows {
        assert_eq!(row.len(), 11);
        row.pop();
    }
    rows
}

#[test]
fn identical_configs_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "run.toml",
        "experiment = \"ising-sweep-eta\"\niters = 1500\nreplicates = 2\nseed = 7\n\
         samplers = [\"mh\", \"lifted1\"]\nproposals = [\"barker\"]\n[ising]\neta = [6]\n",
    );
    for sub in ["a", "b"] {
        let out = bin()
            .arg("--out")
            .arg(dir.path().join(sub))
            .arg("run")
            .arg(&cfg)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    }
    let a = rows_without_seconds(&dir.path().join("a/ising_sweep_eta.csv"));
    let b = rows_without_seconds(&dir.path().join("b/ising_sweep_eta.csv"));
    assert_eq!(a, b);
    // 2 samplers x 1 proposal x 2 replicates, plus mean/stderr per group.
    assert_eq!(a.len(), 1 + 4 + 4);
    assert_eq!(a[0][0], "replicate");
}

#[test]
fn transdim_demo_emits_both_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "td.toml",
        "experiment = \"transdim-demo\"\niters = 3000\nreplicates = 1\n",
    );
    let out = bin()
        .arg("--out")
        .arg(dir.path())
        .arg("run")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let rows = rows_without_seconds(&dir.path().join("transdim_demo.csv"));
    let samplers: Vec<&str> = rows[1..].iter().map(|r| r[1].as_str()).collect();
    assert!(samplers.contains(&"lifted-rj"));
    assert!(samplers.contains(&"rj"));
}

/// The lifted one-stage sampler evaluates at most as many target log-ratios
/// per iteration as the reversible sampler: each step touches one directed
/// neighborhood (plus the reverse one) instead of two full neighborhoods.
#[test]
fn lifted_cost_is_at_most_reversible_cost() {
    use lifted_mcmc::samplers::{run_chain, SamplerKind};
    use lifted_mcmc::targets::TabularTarget;
    use lifted_mcmc::{BinaryState, ProposalSpec};

    let target = TabularTarget::random(8, 11);
    let iters = 4000;
    let cost = |kind: SamplerKind| {
        run_chain(
            &kind,
            ProposalSpec::barker(),
            &target,
            BinaryState::spin_sum,
            iters,
            0,
            5,
            None,
        )
        .ratio_evals
    };
    let mh = cost(SamplerKind::MetropolisHastings);
    let lifted = cost(SamplerKind::Lifted1);
    assert!(mh > 0 && lifted > 0);
    assert!(
        lifted <= mh,
        "lifted evaluations {lifted} exceed reversible evaluations {mh}"
    );
}
