use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value as Json;

use maskgate::samples;
use maskgate::value::Relation;

fn maskgate(ws: &Path, args: &[&str]) -> (i32, Json) {
    let out = Command::new(env!("CARGO_BIN_EXE_maskgate"))
        .current_dir(ws)
        .arg("--workspace")
        .arg(ws)
        .arg("--json")
        .args(args)
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let json = serde_json::from_str(stdout.trim()).unwrap_or_else(|e| panic!("{e}: {stdout}"));
    (out.status.code().unwrap(), json)
}

fn member_workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::create_dir(root.join("schemas")).unwrap();
    fs::write(
        root.join("schemas/member_profiles.json"),
        serde_json::to_string(&samples::member_profiles_schema()).unwrap(),
    )
    .unwrap();
    let (catalog, labels) = samples::member_catalog();
    fs::write(root.join("policies.json"), catalog.to_json()).unwrap();
    fs::write(root.join("labels.json"), labels.to_json()).unwrap();
    let mut csv = String::from("subject_id,consent,value\n");
    for r in samples::member_settings() {
        csv.push_str(&format!("{},{},{}\n", r.subject_id, r.consent, r.value));
    }
    fs::write(root.join("settings.csv"), csv).unwrap();
    let mut rows = Vec::new();
    samples::member_profiles().write_jsonl(&mut rows).unwrap();
    fs::write(root.join("profiles.jsonl"), rows).unwrap();
    dir
}

#[test]
fn full_workflow() {
    let dir = member_workspace();
    let ws = dir.path();

    let (code, v) = maskgate(ws, &["validate"]);
    assert_eq!((code, v["relations"].as_u64(), v["policies"].as_u64()), (0, Some(1), Some(4)));

    let (code, v) = maskgate(ws, &["bitmap-build", "settings.csv", "--as-of", "2024-01-01T00:00:00Z"]);
    assert_eq!(code, 0, "{v}");
    // 3 members per consent; the minority side is stored.
    for s in v["snapshots"].as_array().unwrap() {
        assert!(s["stored_ids"].as_u64().unwrap() <= 1, "{s}");
    }

    let (code, v) = maskgate(ws, &["compile"]);
    assert_eq!(code, 0, "{v}");
    let views = v["views"].as_array().unwrap();
    assert_eq!(views.len(), 2);
    assert!(views.iter().all(|v| v["column_masks"] == 2 && v["row_filters"] == 0));
    assert!(ws.join("views/ads/member_profiles/1.0.0.sql").is_file());

    let (code, v) = maskgate(ws, &["compile"]);
    assert_eq!(code, 0);
    assert!(v["views"].as_array().unwrap().iter().all(|v| v["updated"] == false));

    let (code, v) = maskgate(
        ws,
        &[
            "apply",
            "ads.member_profiles",
            "profiles.jsonl",
            "-o",
            "masked.jsonl",
            "--access-time",
            "2024-02-01T00:00:00Z",
            "--oracle",
        ],
    );
    assert_eq!(code, 0, "{v}");
    assert_eq!((v["rows_in"].as_u64(), v["rows_out"].as_u64()), (Some(3), Some(3)));
    assert_eq!(v["oracle_equal"], true);
    let text = fs::read_to_string(ws.join("masked.jsonl")).unwrap();
    let masked = Relation::read_jsonl(samples::member_profiles_schema(), text.as_bytes()).unwrap();
    assert!(masked.rows[0][1].is_null() && !masked.rows[0][2].is_null());
    assert!(!masked.rows[1][1].is_null() && masked.rows[1][2].is_null());

    let (code, v) = maskgate(ws, &["route", "member_profiles", "--purpose", "jobs"]);
    assert_eq!((code, v["view"].as_str()), (0, Some("jobs.member_profiles@1.0.0")));
    let (code, v) = maskgate(ws, &["route", "member_profiles", "--purpose", "jobs", "--pin", "1.0.0"]);
    assert_eq!((code, v["pinned"].as_bool()), (0, Some(true)));
    let (code, v) = maskgate(ws, &["route", "member_profiles", "--purpose", "hr"]);
    assert_eq!(code, 2, "{v}");
    let log = fs::read_to_string(ws.join("access.log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 3);

    let (code, v) = maskgate(ws, &["maintain"]);
    assert_eq!((code, v["updated"].as_u64()), (0, Some(0)));

    let (code, v) = maskgate(ws, &["gc"]);
    assert_eq!(code, 0);
    assert!(v["views_removed"].as_array().unwrap().is_empty());
}

#[test]
fn passthrough_view_leaves_data_unchanged() {
    let dir = member_workspace();
    let ws = dir.path();
    assert_eq!(maskgate(ws, &["compile"]).0, 0);
    // With every label removed the next version masks nothing.
    fs::write(ws.join("labels.json"), "[]").unwrap();
    let (code, v) = maskgate(ws, &["compile"]);
    assert_eq!(code, 0, "{v}");
    assert!(v["views"].as_array().unwrap().iter().all(|v| v["column_masks"] == 0 && v["version"] == "2.0.0"));
    let (code, v) = maskgate(ws, &["apply", "jobs.member_profiles", "profiles.jsonl", "-o", "out.jsonl"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(
        fs::read_to_string(ws.join("out.jsonl")).unwrap(),
        fs::read_to_string(ws.join("profiles.jsonl")).unwrap()
    );
}

#[test]
fn empty_workspace_compiles_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v) = maskgate(dir.path(), &["compile"]);
    assert_eq!((code, v["views"].as_array().map(Vec::len)), (0, Some(0)));
}

#[test]
fn exit_codes_separate_validation_from_runtime_errors() {
    let dir = member_workspace();
    let ws = dir.path();
    fs::write(
        ws.join("labels.json"),
        r#"[{"relation": "member_profiles", "path": "$.address.city", "label": "education"}]"#,
    )
    .unwrap();
    let (code, v) = maskgate(ws, &["validate"]);
    assert_eq!((code, v["kind"].as_str()), (1, Some("validation")));
    let msg = v["error"].as_str().unwrap();
    assert!(msg.contains("member_profiles") && msg.contains("$.address.city"), "{msg}");

    let dir = member_workspace();
    let ws = dir.path();
    assert_eq!(maskgate(ws, &["compile"]).0, 0);
    // No consent snapshots have been built: a runtime failure.
    let (code, v) = maskgate(ws, &["apply", "ads.member_profiles", "profiles.jsonl"]);
    assert_eq!((code, v["kind"].as_str()), (2, Some("runtime")), "{v}");
}

#[test]
fn bench_reports_raw_repetitions_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v) = maskgate(
        dir.path(),
        &["--seed", "7", "bench", "depth", "--rows", "300", "--points", "1,2"],
    );
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["config"]["seed"], 7);
    let points = v["series"][0]["points"].as_array().unwrap();
    assert_eq!(points.len(), 2);
    assert!(points.iter().all(|p| p["baseline_ns"].as_array().unwrap().len() >= 5));
}
