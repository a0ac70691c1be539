use std::process::{Command, Output};

fn spikelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikelab")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn ground_state_writes_table_summary_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gs.csv");
    let o = spikelab(&["ground-state", "--dim", "1", "--p", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# N=1"));
    assert_eq!(lines.next(), Some("r,u,du"));
    let resolved = std::fs::read_to_string(dir.path().join("gs.resolved.toml")).unwrap();
    assert!(resolved.starts_with("# spikelab "));
    let summary = std::fs::read_to_string(dir.path().join("gs.summary.txt")).unwrap();
    assert!(summary.lines().all(|l| l.contains('=')));
    assert!(summary.contains("moment_identity_pass=true"));
    assert_eq!(String::from_utf8_lossy(&o.stdout), summary);
}

#[test]
fn bad_ladders_are_config_errors_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let out = out.to_str().unwrap();
    for args in [
        vec!["solve", "--eps-ladder", "0.1,0.2", "--out", out],
        vec!["solve", "--eps-ladder", "0.1,x", "--out", out],
        vec!["solve", "--override", "numerics.eps_ladder=\"abc\"", "--out", out],
        vec!["solve", "--override", "numerics.eps_ladder=[0.2, -0.1]", "--out", out],
    ] {
        let o = spikelab(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).contains("eps_ladder"), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn unknown_keys_and_bad_overrides_exit_2() {
    for args in [
        vec!["gamma-scan", "--override", "numerics.bogus=1"],
        vec!["gamma-scan", "--override", "novalue"],
        vec!["gamma-scan", "--jobs", "0"],
        vec!["reduce", "--q", "2.0,0.5"],
    ] {
        let o = spikelab(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn numerical_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = spikelab(&["ground-state", "--dim", "3", "--p", "6", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn flat_gamma_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.csv");
    let o = spikelab(&[
        "gamma-scan",
        "--override",
        "problem.v={kind=\"constant\",value=2.0}",
        "--lattice",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("gamma_constant=true"));
    let header = std::fs::read_to_string(&out).unwrap();
    assert!(header.starts_with("Q1,Q2,gamma\n"));
}
