use std::path::Path;
use std::process::{Command, Output};

fn ctmc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctmc")).args(args).current_dir(dir).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = ctmc(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// A 4-unit model with a fitted base under `dir/fit/system.json`.
fn fitted_system(dir: &Path) {
    ok(dir, &["bmgen", "--dim", "4", "--seed", "1", "--out", "model"]);
    ok(dir, &["fitbase", "--model", "model/bm.json", "--seed", "1", "--out", "fit"]);
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["--version"], &["sample", "--help"]] {
        let out = ctmc(dir.path(), args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn usage_errors_exit_one_with_help() {
    let dir = tempfile::tempdir().unwrap();
    let out = ctmc(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");

    let out = ctmc(dir.path(), &["bmgen", "--dim", "many"]);
    assert_eq!(out.status.code(), Some(1));

    let out = ctmc(dir.path(), &["oracle", "--model", "missing.json"]);
    assert_eq!(out.status.code(), Some(1));

    fitted_system(dir.path());
    // plain HMC has no settings in the relaxation defaults
    let out = ctmc(dir.path(), &["sample", "--system", "fit/system.json", "--sampler", "hmc", "--out", "s"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ctmc(dir.path(), &["sample", "--system", "fit/system.json", "--sampler", "tempering", "--out", "s"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    fitted_system(dir.path());
    ok(dir.path(), &["sample", "--system", "fit/system.json", "--sampler", "joint_ct", "--n-samples", "200", "--out", "s"]);
    let trace = std::fs::read_to_string(dir.path().join("s/trace.csv")).unwrap();
    let mut lines = trace.lines();
    let header = lines.next().unwrap();
    let col = header.split(',').position(|h| h == "delta").unwrap();
    let mut corrupted = vec![header.to_string()];
    for line in lines {
        let mut fields: Vec<&str> = line.split(',').collect();
        fields[col] = "NaN";
        corrupted.push(fields.join(","));
    }
    std::fs::write(dir.path().join("s/bad.csv"), corrupted.join("\n") + "\n").unwrap();
    let out = ctmc(dir.path(), &["estimate", "--trace", "s/bad.csv"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn estimate_reproduces_the_sampling_report() {
    let dir = tempfile::tempdir().unwrap();
    fitted_system(dir.path());
    for sampler in ["joint_ct", "gibbs_ct", "st", "ais"] {
        let out_dir = format!("s_{sampler}");
        ok(
            dir.path(),
            &[
                "sample", "--system", "fit/system.json", "--sampler", sampler, "--n-samples", "1000", "--levels", "10",
                "--seed", "4", "--out", &out_dir,
            ],
        );
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(&out_dir).join("summary.json")).unwrap())
                .unwrap();
        let out = ok(dir.path(), &["estimate", "--trace", &format!("{out_dir}/trace.csv")]);
        let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report, summary["report"], "{sampler}");
    }
}

#[test]
fn bmgen_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(dir.path(), &["bmgen", "--dim", "6", "--seed", "9"]).stdout;
    let b = ok(dir.path(), &["bmgen", "--dim", "6", "--seed", "9"]).stdout;
    let c = ok(dir.path(), &["bmgen", "--dim", "6", "--seed", "10"]).stdout;
    assert_eq!(a, b);
    assert_ne!(a, c);
    ok(dir.path(), &["bmgen", "--dim", "6", "--seed", "9", "--out", "m"]);
    assert_eq!(std::fs::read(dir.path().join("m/bm.json")).unwrap(), a);
}

#[test]
fn oracle_output_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["bmgen", "--dim", "5", "--seed", "2", "--out", "m"]);
    let out = ok(dir.path(), &["oracle", "--model", "m/bm.json"]);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let bm = ctmc::model::generate_bm_params(2, 5, 6.0, 2.0, 0.1).unwrap();
    let exact = ctmc::model::bm_exhaustive_oracle(&bm).unwrap();
    assert_eq!(doc["log_Z_B"].as_f64().unwrap(), exact.log_z_b);
}
