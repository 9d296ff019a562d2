use std::path::PathBuf;
use std::process::{Command, Output};

fn mtlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtlab"))
        .args(args)
        .env("MTLAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mtlab-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn sweep_writes_identical_csv_and_a_sidecar() {
    let args = [
        "sweep",
        "--ineq",
        "cor35",
        "--n",
        "2",
        "--R",
        "32,64,128",
        "--seed",
        "3",
    ];
    let a = mtlab(&args);
    let b = mtlab(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "inequality_id,n,R,lhs,rhs,ratio");
    assert_eq!(lines.len(), 4);

    let dir = scratch("sweep");
    let d = dir.to_str().unwrap();
    let mut with_out = args.to_vec();
    with_out.extend(["--out", d]);
    assert!(mtlab(&with_out).status.success());
    let csv = std::fs::read_to_string(dir.join("cor35_n2.csv")).unwrap();
    assert_eq!(csv, text);
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("cor35_n2.json")).unwrap()).unwrap();
    assert_eq!(side["inequality_id"], "cor35");
    assert_eq!(side["seed"], 3);
    assert!(side["slope"].is_number());
    assert_eq!(side["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(side["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn config_file_and_flag_overrides() {
    let dir = scratch("config");
    let cfg = dir.join("c.json");
    std::fs::write(
        &cfg,
        r#"{"kind": "sweep", "ineq": "cor33", "n": 2, "R": [32, 64, 128], "seed": 5}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let from_file = mtlab(&["--config", c, "sweep"]);
    assert!(
        from_file.status.success(),
        "{}",
        String::from_utf8_lossy(&from_file.stderr)
    );
    let text = String::from_utf8(from_file.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("cor33,2,32,"));
    let overridden = mtlab(&["--config", c, "sweep", "--ineq", "cor34"]);
    let text = String::from_utf8(overridden.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("cor34,2,32,"));
}

#[test]
fn schema_errors_exit_with_two() {
    let dir = scratch("schema");
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"kind": "sweep", "colour": 3}"#).unwrap();
    let empty = dir.join("empty.json");
    std::fs::write(
        &empty,
        r#"{"kind": "sweep", "ineq": "cor35", "n": 2, "R": []}"#,
    )
    .unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["sweep", "--ineq", "cor99", "--n", "2", "--R", "32,64,128"],
        vec!["sweep", "--ineq", "cor35", "--n", "2", "--R", ""],
        vec!["--config", bad.to_str().unwrap(), "sweep"],
        vec!["--config", empty.to_str().unwrap(), "sweep"],
        vec!["example", "--example", "unicorn", "--n", "2", "--R", "64"],
        vec![
            "refined-check",
            "--n",
            "2",
            "--R",
            "64",
            "--mode",
            "sideways",
        ],
    ];
    for args in cases {
        let out = mtlab(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn numeric_failures_exit_with_three() {
    // far more separated points than fit in B_R
    let out = mtlab(&[
        "points", "--n", "2", "--N", "5000", "--mu", "6", "--R", "16",
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn points_certificate_is_reported() {
    let out = mtlab(&[
        "points",
        "--n",
        "2",
        "--N",
        "20",
        "--mu",
        "6",
        "--R",
        "32",
        "--verify",
        "exhaustive",
    ]);
    let v = json(&out);
    assert_eq!(v["kind"], "points");
    let r = &v["result"];
    assert_eq!(r["points"].as_array().unwrap().len(), 20);
    assert!(r["certified_volume"].as_f64().unwrap() > 0.0);
    assert!(r["constant"].as_f64().unwrap() > 0.0);
}

#[test]
fn multibush_plan_replays() {
    let dir = scratch("replay");
    let out = mtlab(&[
        "example",
        "--example",
        "multibush",
        "--variant",
        "S",
        "--n",
        "2",
        "--R",
        "128",
        "--samples",
        "4096",
    ]);
    let v = json(&out);
    let plan_path = dir.join("plan.json");
    std::fs::write(&plan_path, serde_json::to_string(&v).unwrap()).unwrap();
    let again = json(&mtlab(&[
        "replay",
        "--plan",
        plan_path.to_str().unwrap(),
        "--samples",
        "4096",
    ]));
    let a = &v["result"]["report"];
    let b = &again["result"];
    let b = if b.get("report").is_some() {
        &b["report"]
    } else {
        b
    };
    assert_eq!(a["balls"], b["balls"]);
    assert_eq!(a["min_alignment"], b["min_alignment"]);
}

#[test]
fn axioms_and_refined_check_emit_envelopes() {
    let v = json(&mtlab(&[
        "axioms",
        "--structure",
        "packets",
        "--n",
        "2",
        "--R",
        "128",
        "--seed",
        "2",
    ]));
    assert_eq!(v["kind"], "axioms");
    assert!(v["result"]["da1"]["pass"].as_bool().unwrap());
    let v = json(&mtlab(&[
        "refined-check",
        "--n",
        "2",
        "--R",
        "64",
        "--p",
        "6",
    ]));
    assert!(v["result"]["ratio"].as_f64().unwrap() > 0.0);
}
