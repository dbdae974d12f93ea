use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unirate-lab")).args(args).env_remove("UNIRATELAB_CAP").output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn dims_full_2x2() {
    let out = lab(&["dims", "--class", data("full_2x2.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for k in ["natarajan", "graph", "ds", "littlestone"] {
        assert_eq!(v[k], 2, "{k}");
    }
}

#[test]
fn verify_pseudocube_suite_exits_zero() {
    let out = lab(&["verify", "--suite", "pseudocube"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("[PASS] pseudocube /")).count() >= 3);
    assert!(!text.contains("[FAIL]"));
}

#[test]
fn missing_config_is_usage_error() {
    let out = lab(&["curve", "--config", "missing.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));
}

#[test]
fn bad_arguments_exit_two() {
    assert_eq!(lab(&["bogus"]).status.code(), Some(2));
    assert_eq!(lab(&["verify", "--suite", "nope"]).status.code(), Some(2));
    assert_eq!(lab(&["construct", "counterexample", "--depth", "4"]).status.code(), Some(2));
}

#[test]
fn domain_and_resource_errors() {
    assert_eq!(lab(&["construct", "block", "--d", "2", "--k", "2"]).status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_unirate-lab"))
        .args(["cube", "--class", data("full_3x3.json").to_str().unwrap(), "--points", "0,1,2"])
        .env("UNIRATELAB_CAP", "5")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_config_keys_rejected() {
    let dir = std::env::temp_dir().join(format!("unirate-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("bad.json");
    std::fs::write(&p, r#"{"class": {"singleton": {"points": 2, "label": 0}}, "dist": {"atoms": {"atoms": [[0,0,1.0]]}}, "learner": "erm", "reps": 5, "seed": 1, "colour": 3}"#).unwrap();
    assert_eq!(lab(&["curve", "--config", p.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn curve_is_deterministic() {
    let cfg = data("curve_erm.json");
    let a = lab(&["curve", "--config", cfg.to_str().unwrap(), "--threads", "1"]);
    let b = lab(&["curve", "--config", cfg.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("n,mean_error,stderr,reps\n1,"));
}

#[test]
fn tree_round_trip_verifies() {
    let class = data("six_cube.json");
    let dir = std::env::temp_dir().join(format!("unirate-tree-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let t = dir.join("t.json");
    for kind in ["littlestone", "dsl", "nl", "gl"] {
        let out = lab(&["tree", "--class", class.to_str().unwrap(), "--kind", kind, "--out", t.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{kind}");
        let out = lab(&["tree", "--class", class.to_str().unwrap(), "--kind", kind, "--verify", t.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{kind}");
        assert_eq!(json(&out)["ok"], true);
    }
    // a tree for a bigger class does not verify against a smaller one
    let big = data("full_2x2.json");
    lab(&["tree", "--class", big.to_str().unwrap(), "--kind", "littlestone", "--out", t.to_str().unwrap()]);
    let out = lab(&["tree", "--class", class.to_str().unwrap(), "--kind", "littlestone", "--verify", t.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn game_and_learn() {
    let class = data("thresholds_13.json");
    let sample = data("thresholds_sample.csv");
    let out = lab(&["game", "--class", class.to_str().unwrap(), "--kind", "b", "--sample", sample.to_str().unwrap()]);
    let v = json(&out);
    assert_eq!(v["root_value"], 3);
    assert!(v["online"]["mistakes"].as_u64().unwrap() <= 3);
    // thresholds carry no 2-dimensional pseudo-cube, so DSL trees stop at depth 1
    let out = lab(&["game", "--class", class.to_str().unwrap(), "--kind", "dsl"]);
    assert_eq!(json(&out)["root_value"], 1);
    let out = lab(&["tree", "--class", class.to_str().unwrap(), "--kind", "dsl"]);
    assert_eq!(json(&out)["depth"], 1);

    let dist = data("thresholds_dist.json");
    let args = ["learn", "--algo", "near-linear", "--class", class.to_str().unwrap(), "--dist", dist.to_str().unwrap(), "--n", "64", "--seed", "4"];
    let (a, b) = (lab(&args), lab(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    for algo in ["exp", "erm"] {
        let out = lab(&["learn", "--algo", algo, "--class", class.to_str().unwrap(), "--sample", sample.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{algo}");
        let table = json(&out)["rule"]["table"].clone();
        assert_eq!(table[0], 0, "{algo}");
        assert_eq!(table[3], 1, "{algo}");
    }
    // min-Y rule: every seen point dominates the label-1 hull here
    let out = lab(&["learn", "--algo", "example1", "--class", class.to_str().unwrap(), "--sample", sample.to_str().unwrap()]);
    assert_eq!(json(&out)["rule"]["table"], serde_json::Value::from(vec![0; 13]));
}

#[test]
fn construct_outputs() {
    let v = json(&lab(&["construct", "schedule", "--rate", "inv-log", "--cap", "8"]));
    assert_eq!(v["check"]["ok"], true);
    let v = json(&lab(&["construct", "block", "--d", "2", "--k", "3"]));
    assert_eq!(v["size"], 6);
    let v = json(&lab(&["construct", "counterexample", "--depth", "2"]));
    assert_eq!(v["check"]["natarajan"], 1);
    assert_eq!(v["check"]["dsl_depth"], 2);
    let out = lab(&["construct", "dsl-dist", "--depth", "2", "--branch", "0,1"]);
    let v = json(&out);
    let total: f64 = v["atoms"].as_array().unwrap().iter().map(|a| a[2].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let out = lab(&["construct", "lattice", "--d", "1", "--k", "2", "--bound", "3", "--weights", "1", "--biases", "1,2,3,4"]);
    assert_eq!(json(&out)["hypotheses"].as_array().unwrap().len(), 4);
}
