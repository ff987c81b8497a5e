use std::process::{Command, Output};

use serde_json::Value;

fn pisupport(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pisupport")).args(args).output().expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = pisupport(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

const E12: &str = r#"{"rows":2,"cols":2,"entries":[[0,1],[0,0]]}"#;

fn tuple(tag: &str) -> String {
    format!(r#"{{"p":3,"N":2,"r":1,"tag":"{tag}","B":[{E12}]}}"#)
}

#[test]
fn jordan_examples() {
    for (module, tag, want, stable) in [
        ("std2", "gl", "[2]^1", true),
        ("trivial", "gl", "[1]^1", true),
        ("regular_p3_r1", "ga", "[3]^1", false),
    ] {
        let t = tuple(tag);
        let v = json_ok(&["jordan", "--module", module, "--tuple", &t, "--verify", "cross-oracle"]);
        assert_eq!(v["result"]["verdict"]["jordan_type"], want, "{module}");
        assert_eq!(v["result"]["verdict"]["in_support"], stable, "{module}");
        assert_eq!(v["config"]["seed"], 0);
        assert_eq!(v["config"]["tower"], serde_json::json!(["F_3", "F_9", "F_27"]));
    }
}

#[test]
fn invalid_input_gives_structured_error_and_exit_2() {
    let cases: [&[&str]; 5] = [
        &["jordan", "--module", "std2", "--tuple", r#"{"p":3,"#],
        &["jordan", "--module", "no_such_module", "--tuple", "{}"],
        &["support", "--module", "std2", "--field", "F_8"],
        &["axioms", "--r", "0"],
        &["examples", "nonsense"],
    ];
    for args in cases {
        let out = pisupport(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty(), "partial report for {args:?}");
        let err: Value = serde_json::from_slice(&out.stderr).expect("error object");
        assert_eq!(err["error"]["exit_code"], 2);
        assert!(err["error"]["kind"].is_string());
    }
}

#[test]
fn worked_examples_pass() {
    for name in ["ga-LS", "sl2-steinberg", "u3"] {
        let v = json_ok(&["examples", name]);
        assert_eq!(v["status"], "ok");
        for e in v["result"]["examples"].as_array().unwrap() {
            assert_eq!(e["pass"], true, "{e}");
        }
    }
    let v = json_ok(&["examples", "sl2-steinberg", "--p", "5", "--r", "1..2", "--samples", "16"]);
    assert_eq!(v["result"]["examples"].as_array().unwrap().len(), 2);
}

#[test]
fn failing_example_exits_3_with_full_report() {
    // Keeping the top monomial T^{p^3} puts every point in the support.
    let out = pisupport(&["examples", "ga-ls", "--degree", "27", "--samples", "16"]);
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "fail");
    assert_eq!(v["result"]["examples"][0]["pass"], false);
}

#[test]
fn axioms_on_corpus_have_no_violations() {
    let v = json_ok(&["axioms", "--seed", "0"]);
    assert_eq!(v["result"]["total_violations"], 0);
    assert!(v["corpus"]["sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn output_is_byte_identical_across_runs() {
    for args in [
        &["fingerprint", "--module", "gl2_adjoint", "--r", "1..2", "--samples", "12"][..],
        &["support", "--module", "sym2_std3", "--format", "csv", "--samples", "12"],
        &["axioms", "--p", "2", "--samples", "8", "--format", "csv"],
    ] {
        let (a, b) = (pisupport(args), pisupport(args));
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
    let a = pisupport(&["fingerprint", "--module", "std2", "--seed", "1"]).stdout;
    let b = pisupport(&["fingerprint", "--module", "std2", "--seed", "2"]).stdout;
    assert_ne!(a, b);
}

#[test]
fn csv_report_echoes_seed_tower_and_hashes() {
    let out = pisupport(&["support", "--module", "std2", "--samples", "3", "--seed", "7", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("seed=7"));
    assert!(text.contains("tower=F_3;F_9;F_27"));
    assert!(text.contains("corpus_sha256="));
    assert!(text.contains("sha256="));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "module,r,index,field,zero_tuple,jordan_type,in_support");
    assert_eq!(rows.len(), 4);
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = std::env::temp_dir().join(format!("pisupport-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, "p = 5\nseed = 3\nsamples = 4\nfield = [\"prime\", \"ext2\"]\nverify = \"cross-oracle\"\n").unwrap();
    let path = cfg.to_str().unwrap();
    let v = json_ok(&["support", "--module", "std2", "--config", path, "--seed", "11"]);
    assert_eq!(v["config"]["p"], 5);
    assert_eq!(v["config"]["seed"], 11);
    assert_eq!(v["config"]["samples"], 4);
    assert_eq!(v["config"]["verify"], "cross-oracle");
    assert_eq!(v["config"]["tower"], serde_json::json!(["F_5", "F_25"]));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn complex_support_of_short_exact_sequence_piece() {
    let ses = r#"{"degrees":[-1,0],
        "layers":[{"op":"sub","basis":[[0,1,-1,0]],"of":{"op":"tensor","of":[{"op":"std","n":2},{"op":"std","n":2}]}},
                  {"op":"tensor","of":[{"op":"std","n":2},{"op":"std","n":2}]}],
        "differentials":[{"rows":4,"cols":1,"entries":[[0],[1],[-1],[0]]}]}"#;
    // The cone of det -> std2 ⊗ std2 is Sym^2, which is projective for p = 3.
    let v = json_ok(&["complex", "--complex", ses, "--samples", "6", "--verify", "cross-oracle"]);
    for verdict in v["result"]["runs"][0]["verdicts"].as_array().unwrap() {
        assert_eq!(verdict["in_support"], verdict["zero_tuple"]);
    }
    let single = json_ok(&["complex", "--complex", "std2", "--tuple", &tuple("gl")]);
    assert_eq!(single["result"]["runs"][0]["verdicts"][0]["stable_jordan_type"], "[2]^1");
}

#[test]
fn corpus_validates() {
    let v = json_ok(&["corpus-validate"]);
    assert!(v["result"]["modules"].as_array().unwrap().len() >= 12);
}
