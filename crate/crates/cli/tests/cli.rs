use serde_json::Value;
use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_anderson-lab");
const POINT: &str = r#"{"kind":"atoms","flavor":"real","atoms":[{"v":0,"w":1}]}"#;
const BERNOULLI: &str = r#"{"kind":"atoms","flavor":"real","atoms":[{"v":0,"w":0.5},{"v":3,"w":0.5}]}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn lab(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("ANDERSON_LAB_WORKERS").output().unwrap()
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

#[test]
fn single_atom_le_curve_has_33_rows_of_bounded_growth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(r#"{{"command":"le-curve","distribution":{POINT},"params":{{"n":1000,"samples":3}},"seed":1}}"#);
    let c = write_config(dir.path(), "c.json", &cfg);
    let o = lab(&["run", &c, "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("le-curve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("E,n,samples,mean,stderr"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 33);
    assert_eq!(rows[0][0], -2.0);
    assert_eq!(rows[32][0], 2.0);
    for r in &rows {
        assert_eq!((r[1], r[2]), (1000.0, 3.0));
        // every window is the free word, so the samples agree up to rounding in the mean
        assert!(r[4] <= 1e-14 * r[3].abs().max(1e-300), "{r:?}");
        // entries of the free n-step matrix are Chebyshev values bounded by n + 1 on [−2, 2],
        // so the Frobenius bound gives ‖M^n‖ ≤ 2(n + 1)
        assert!(r[3] >= 0.0 && r[3] * 1000.0 <= (2002f64).ln() + 1e-9, "{r:?}");
    }
}

#[test]
fn reruns_reproduce_checksums_and_manifest_covers_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"command":"dos","distribution":{BERNOULLI},"params":{{"sites":200,"realizations":4,"grid_points":21}},"seed":5}}"#
    );
    let c = write_config(dir.path(), "c.json", &cfg);
    let mut manifests = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = lab(&["run", &c, "--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success());
        let m = json_file(&out.join("dos.manifest.json"));
        let listed: BTreeSet<String> = m["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["path"].as_str().unwrap().to_string())
            .collect();
        assert_eq!(listed.len(), m["outputs"].as_array().unwrap().len());
        let on_disk: BTreeSet<String> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n != "dos.manifest.json")
            .collect();
        assert_eq!(listed, on_disk);
        for e in m["outputs"].as_array().unwrap() {
            let bytes = std::fs::read(out.join(e["path"].as_str().unwrap())).unwrap();
            let digest = sha256(&bytes);
            assert_eq!(e["sha256"].as_str().unwrap(), digest);
        }
        manifests.push(m);
    }
    assert_eq!(manifests[0]["outputs"], manifests[1]["outputs"]);
    assert_eq!(manifests[0]["config_sha256"], manifests[1]["config_sha256"]);
    assert_eq!(manifests[0]["version"], env!("CARGO_PKG_VERSION"));
    assert!(manifests[0]["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

fn sha256(bytes: &[u8]) -> String {
    // independent of the binary under test
    let tmp = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(tmp.path(), bytes).unwrap();
    match Command::new("sha256sum").arg(tmp.path()).output() {
        Ok(o) if o.status.success() => String::from_utf8_lossy(&o.stdout).split_whitespace().next().unwrap().to_string(),
        _ => panic!("sha256sum unavailable"),
    }
}

#[test]
fn ldt_bytes_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"command":"ldt","distribution":{BERNOULLI},"params":{{"energy":1.5,"epsilon":0.1,"n_list":[20,40,80],"samples":300}},"seed":11}}"#
    );
    let c = write_config(dir.path(), "c.json", &cfg);
    let mut tables = Vec::new();
    for w in ["1", "8"] {
        let out = dir.path().join(w);
        let o = lab(&["run", &c, "--workers", w, "--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success());
        tables.push((
            std::fs::read(out.join("ldt.csv")).unwrap(),
            std::fs::read(out.join("ldt.summary.json")).unwrap(),
        ));
        assert_eq!(json_file(&out.join("ldt.manifest.json"))["workers"], w.parse::<u64>().unwrap());
    }
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn workers_fall_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(r#"{{"command":"le-curve","distribution":{POINT},"params":{{"n":10,"samples":1,"grid":{{"points":2}}}}}}"#);
    let c = write_config(dir.path(), "c.json", &cfg);
    let out = dir.path().join("o");
    let o = Command::new(BIN)
        .args(["run", &c, "--out-dir", out.to_str().unwrap()])
        .env("ANDERSON_LAB_WORKERS", "3")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(json_file(&out.join("le-curve.manifest.json"))["workers"], 3);

    let bad = Command::new(BIN)
        .args(["run", &c, "--out-dir", out.to_str().unwrap()])
        .env("ANDERSON_LAB_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"command":"ldt","distribution":{BERNOULLI},"params":{{"energy":1.5,"n_list":[10],"samples":50}},"seed":1}}"#
    );
    let c = write_config(dir.path(), "c.json", &cfg);
    let hash = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let mut args = vec!["run", c.as_str(), "--out-dir", out.to_str().unwrap()];
        if !seed.is_empty() {
            args.extend(["--seed", seed]);
        }
        assert!(lab(&args).status.success());
        let m = json_file(&out.join("ldt.manifest.json"));
        (m["seed"].as_u64().unwrap(), m["config_sha256"].as_str().unwrap().to_string())
    };
    let (s0, h0) = hash("", "a");
    let (s1, h1) = hash("1", "b");
    let (s2, h2) = hash("2", "c");
    assert_eq!((s0, s1, s2), (1, 1, 2));
    assert_eq!(h0, h1);
    assert_ne!(h0, h2);
}

#[test]
fn validate_lists_every_problem_and_sets_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write_config(
        dir.path(),
        "ok.json",
        &format!(r#"{{"command":"ldt","distribution":{BERNOULLI},"params":{{"epsilon":0.1}}}}"#),
    );
    let o = lab(&["validate", &ok]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["valid"], true);

    let bad = write_config(
        dir.path(),
        "bad.json",
        &format!(r#"{{"command":"double-res","distribution":{POINT},"params":{{"epsilon":0,"samples":0}}}}"#),
    );
    let o = lab(&["validate", &bad]);
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let kinds: Vec<(String, String)> = v["diagnostics"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| (d["field"].as_str().unwrap().into(), d["level"].as_str().unwrap().into()))
        .collect();
    assert!(kinds.contains(&("params.epsilon".into(), "error".into())));
    assert!(kinds.contains(&("params.samples".into(), "error".into())));
    assert!(kinds.contains(&("distribution".into(), "warning".into())));

    // the single-atom warning alone does not invalidate a config
    let warn = write_config(
        dir.path(),
        "warn.json",
        &format!(r#"{{"command":"double-res","distribution":{POINT},"params":{{}}}}"#),
    );
    let o = lab(&["validate", &warn]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["diagnostics"][0]["message"], "trivial support: scan degenerate");

    let flavor = write_config(
        dir.path(),
        "flavor.json",
        &format!(r#"{{"command":"cmv-le","distribution":{BERNOULLI}}}"#),
    );
    let o = lab(&["validate", &flavor]);
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["diagnostics"][0]["kind"], "WrongFlavor");

    let unknown = write_config(
        dir.path(),
        "unknown.json",
        &format!(r#"{{"command":"ldt","distribution":{BERNOULLI},"extra":1}}"#),
    );
    assert_eq!(lab(&["validate", &unknown]).status.code(), Some(2));
    let unknown_param = write_config(
        dir.path(),
        "unknown_param.json",
        &format!(r#"{{"command":"ldt","distribution":{BERNOULLI},"params":{{"eps":1}}}}"#),
    );
    assert_eq!(lab(&["validate", &unknown_param]).status.code(), Some(2));

    // run refuses invalid configs with the same code and writes nothing
    let out = dir.path().join("never");
    let o = lab(&["run", &bad, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "InvalidConfig");
    assert!(!out.exists());
}

#[test]
fn numerical_failures_exit_3_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let on_eigenvalue = write_config(
        dir.path(),
        "g.json",
        &format!(r#"{{"command":"green-check","distribution":{POINT},"params":{{"sites":1,"energy":0}}}}"#),
    );
    let o = lab(&["run", &on_eigenvalue, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "NearEigenvalue");

    let huge = write_config(
        dir.path(),
        "d.json",
        &format!(r#"{{"command":"double-res","distribution":{BERNOULLI},"params":{{"k_list":[10],"asymptotic_scales":true,"samples":1}}}}"#),
    );
    let o = lab(&["run", &huge, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "ScaleOverflow");
}

#[test]
fn green_tables_are_listed_and_match_the_free_inverse() {
    let dir = tempfile::tempdir().unwrap();
    // free 2-site box at E = 0.5: H − E = [[−0.5, 1], [1, −0.5]], inverse = [[−0.5, −1], [−1, −0.5]] / (0.25 − 1)
    let c = write_config(
        dir.path(),
        "g.json",
        &format!(r#"{{"command":"green-check","distribution":{POINT},"params":{{"sites":2,"energy":0.5,"samples":2,"tables":true}}}}"#),
    );
    let o = lab(&["run", &c, "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("green-check.tables.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("sample,j,k,value"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 8);
    for r in &rows {
        let want = if r[1] == r[2] { -0.5 / -0.75 } else { -1.0 / -0.75 };
        assert!((r[3] - want).abs() <= 1e-15, "{r:?}");
    }
    let m = json_file(&dir.path().join("green-check.manifest.json"));
    let paths: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|e| e["path"].as_str().unwrap()).collect();
    assert_eq!(paths, ["green-check.csv", "green-check.summary.json", "green-check.tables.csv"]);
    assert_eq!(m["schema_version"], 1);
}
