//! End-to-end checks of the binary: exit-code discipline, JSON stability,
//! seed independence, and fixture resolution.

use std::process::Command;

fn clonelab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_clonelab"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).to_string(),
        String::from_utf8_lossy(&out.stderr).to_string(),
    )
}

#[test]
fn exit_codes_follow_the_contract() {
    // pass -> 0
    let (code, _, _) = clonelab(&["check", "sigma_p", "--p", "2", "--ops", "@and"]);
    assert_eq!(code, 0);
    // counterexample -> 1
    let (code, stdout, _) = clonelab(&["check", "quasi_malcev", "--ops", "@dd", "--json"]);
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["satisfied"], false);
    assert!(v["counterexample"].is_object());
    // usage error -> 2
    let (code, _, stderr) = clonelab(&["verify", "no-such-verifier"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("unknown verifier"));
    let (code, _, _) = clonelab(&["nonsense-command"]);
    assert_eq!(code, 2);
}

#[test]
fn definitive_negative_witness_search_exits_one() {
    let (code, stdout, _) = clonelab(&[
        "check",
        "sigma_p",
        "--p",
        "3",
        "--structure",
        "c3",
        "--symmetry",
        "cyclic",
        "--json",
    ]);
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["definitive"], true);
    assert!(v["witness"].is_null());
    assert_eq!(v["candidates_tried"], 177_147);
}

#[test]
fn json_output_round_trips_byte_identically() {
    let commands: Vec<Vec<&str>> = vec![
        vec!["op", "project", "--domain", "3", "--arity", "3", "--coord", "1", "--json"],
        vec!["pol", "--structure", "c2", "--arity", "2", "--json"],
        vec!["core", "--structure", "b2", "--json"],
        vec!["construct", "polyrep", "--op", "@maj", "--json"],
        vec!["free", "malcev", "--fixture", "b2", "--json"],
        vec!["verify", "block-structure", "--json"],
    ];
    for args in commands {
        let (code, stdout, stderr) = clonelab(&args);
        assert_eq!(code, 0, "{args:?} failed: {stderr}");
        let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
        let reserialized = serde_json::to_string(&v).unwrap();
        assert_eq!(reserialized, stdout.trim(), "round trip for {args:?}");
    }
}

#[test]
fn verdicts_are_seed_independent() {
    let (_, first, _) = clonelab(&["verify", "baker-pixley-sample", "--seed", "1", "--json"]);
    let (_, second, _) = clonelab(&["verify", "baker-pixley-sample", "--seed", "99", "--json"]);
    let a: serde_json::Value = serde_json::from_str(first.trim()).unwrap();
    let b: serde_json::Value = serde_json::from_str(second.trim()).unwrap();
    assert_eq!(a["verdict"], "pass");
    assert_eq!(a["verdict"], b["verdict"]);
    let (_, one, _) = clonelab(&["verify", "majority-search", "--seed", "7", "--json"]);
    let (_, two, _) = clonelab(&["verify", "majority-search", "--seed", "8", "--json"]);
    let one: serde_json::Value = serde_json::from_str(one.trim()).unwrap();
    let two: serde_json::Value = serde_json::from_str(two.trim()).unwrap();
    assert_eq!(one["verdict"], "pass");
    assert_eq!(one["details"]["majority"], two["details"]["majority"]);
}

#[test]
fn fixtures_directory_flag_is_honored() {
    let (code, stdout, _) = clonelab(&[
        "--fixtures",
        concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures"),
        "hom",
        "--from",
        "c4",
        "--to",
        "c2",
        "--json",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["map"], serde_json::json!([0, 1, 0, 1]));
    // a bad directory is an error, not a silent fallback
    let (code, _, _) = clonelab(&[
        "--fixtures",
        "/nonexistent-dir",
        "hom",
        "--from",
        "c4",
        "--to",
        "c2",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn fixture_files_match_embedded_copies() {
    for name in clonelab_core::catalog::STRUCTURE_NAMES {
        let path = format!(
            "{}/../../fixtures/{name}.json",
            env!("CARGO_MANIFEST_DIR")
        );
        let on_disk = std::fs::read_to_string(&path).expect("fixture file exists");
        let parsed: clonelab_core::rel::Structure =
            serde_json::from_str(on_disk.trim()).unwrap();
        let canonical = clonelab_core::catalog::structure_by_name(name).unwrap();
        assert_eq!(parsed, canonical, "fixture {name} drifted");
        assert_eq!(
            serde_json::to_string(&canonical).unwrap(),
            on_disk.trim(),
            "fixture {name} serialization drifted"
        );
    }
}

#[test]
fn construct_term_trees_have_the_documented_shape() {
    let (code, stdout, _) = clonelab(&["construct", "min", "--json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["term"]["op"], "compose");
    assert!(v["term"]["head"].is_string());
    assert!(v["term"]["args"].is_array());
    assert_eq!(v["term"]["args"][0]["op"], "compose");
}

#[test]
fn invclosure_blocks_and_pppower_commands() {
    let (code, stdout, _) = clonelab(&[
        "invclosure",
        "--ops",
        "@xor3",
        "--relation",
        r#"{"domain":2,"arity":2,"tuples":[[0,0],[0,1],[1,0]]}"#,
        "--json",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["tuples"].as_array().unwrap().len(), 4);

    let (code, stdout, _) = clonelab(&[
        "blocks",
        "--relation",
        r#"{"domain":2,"arity":3,"tuples":[[0,0,0],[0,1,1],[1,0,1],[1,1,0]]}"#,
        "--json",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(v[0]["trivial"], false);
    assert_eq!(v[0]["group"]["name"], "Z2");

    let (code, stdout, _) = clonelab(&[
        "pppower",
        "--structure",
        "i2",
        "--power",
        "2",
        "--defs",
        r#"{"diag":{"free":2,"exists":0,"atoms":[],"eq":[[0,1]]}}"#,
        "--json",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    // pairs with equal coordinates: elements 0 and 3 of the squared domain
    assert_eq!(
        v["relations"]["diag"]["tuples"],
        serde_json::json!([[0], [3]])
    );
}

#[test]
fn condition_files_and_multi_symbol_assignments() {
    let dir = std::env::temp_dir().join("clonelab-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("same_unary.json");
    std::fs::write(
        &path,
        r#"{"symbols":{"f":1,"g":1},"identities":[{"lhs":["f",[0]],"rhs":["g",[0]]}]}"#,
    )
    .unwrap();
    let path = path.to_str().unwrap();
    let (code, _, _) = clonelab(&["check", path, "--ops", "@not", "@not"]);
    assert_eq!(code, 0);
    let (code, stdout, _) = clonelab(&["check", path, "--ops", "@not", "@id", "--json"]);
    // @id is not a catalog name: usage error
    assert_eq!(code, 2, "{stdout}");
    let identity = r#"{"domain":2,"arity":1,"table":[0,1]}"#;
    let (code, stdout, _) = clonelab(&["check", path, "--ops", "@not", identity, "--json"]);
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(v["satisfied"], false);
}

#[test]
fn thread_override_is_accepted() {
    let out = Command::new(env!("CARGO_BIN_EXE_clonelab"))
        .env("CLONELAB_THREADS", "2")
        .args(["verify", "remark-cycles", "--p", "3", "--json"])
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).unwrap();
    assert_eq!(v["verdict"], "pass");
}
