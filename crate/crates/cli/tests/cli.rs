use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn sacode(data: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sacode"))
        .args(args)
        .env("SACODE_DATA_DIR", data)
        .output()
        .unwrap()
}

fn sacode_stdin(data: &Path, args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_sacode"))
        .args(args)
        .env("SACODE_DATA_DIR", data)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn replay_all(data: &Path) {
    for d in ["dcms-full", "dcms-sub", "etsi"] {
        ok(sacode(data, &["replay", d, &format!("appendix-{d}-codes")]));
    }
}

#[test]
fn replay_then_report_etsi() {
    let dir = tempfile::tempdir().unwrap();
    ok(sacode(dir.path(), &["replay", "etsi", "appendix-etsi-codes"]));
    let out = ok(sacode(dir.path(), &["report", "etsi"]));
    let total = out.lines().find(|l| l.starts_with("Total (67)")).expect("totals row");
    assert_eq!(
        total.split_whitespace().skip(2).collect::<Vec<_>>(),
        ["23", "7", "1", "28", "5", "2", "1"]
    );
    assert!(out.contains("Actionable: 29 of 67 (43.3%)"), "{out}");
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    replay_all(dir.path());
    for format in ["table", "csv", "json", "chart"] {
        let a = ok(sacode(dir.path(), &["compare", "dcms-full", "dcms-sub", "etsi", "--format", format]));
        let b = ok(sacode(dir.path(), &["compare", "dcms-full", "dcms-sub", "etsi", "--format", format]));
        assert_eq!(a, b, "{format}");
        let a = ok(sacode(dir.path(), &["report", "dcms-sub", "--format", format]));
        let b = ok(sacode(dir.path(), &["report", "dcms-sub", "--format", format]));
        assert_eq!(a, b, "{format}");
    }
}

#[test]
fn compare_chart_data_shape() {
    let dir = tempfile::tempdir().unwrap();
    replay_all(dir.path());
    let out = ok(sacode(dir.path(), &["compare", "dcms-full", "dcms-sub", "etsi", "--format", "chart-data"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["kind"], "grouped-bar");
    assert_eq!(v["groups"].as_array().unwrap().len(), 12);
    let series = v["series"].as_array().unwrap();
    let names: Vec<&str> = series.iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["dcms-full", "dcms-sub", "etsi"]);
    for s in series {
        assert_eq!(s["values"].as_array().unwrap().len(), 12);
    }
    // Actionable group: 1/13, 7/28, 29/67.
    let act: Vec<u64> = series.iter().map(|s| s["counts"][11].as_u64().unwrap()).collect();
    assert_eq!(act, [1, 7, 29]);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    ok(sacode(dir.path(), &["replay", "dcms-sub", "appendix-dcms-sub-codes"]));
    let file = dir.path().join("r.csv");
    let printed = ok(sacode(dir.path(), &["report", "dcms-sub", "--format", "csv", "--out", file.to_str().unwrap()]));
    assert!(printed.is_empty());
    let text = std::fs::read_to_string(file).unwrap();
    assert!(text.starts_with("scope,code,count,total,percent\n"));
    assert!(text.contains("total,P1,11,28,39.3\n"), "{text}");
}

#[test]
fn flow_inferred_notes_published_discrepancy() {
    let dir = tempfile::tempdir().unwrap();
    ok(sacode(dir.path(), &["replay", "dcms-sub", "appendix-dcms-sub-codes"]));
    let out = ok(sacode(dir.path(), &["flow", "dcms-sub"]));
    assert!(out.contains("note: Q4 yes: inferred 18 of 28 (64.3%); published 17 of 28 (61%); DIFFERS"), "{out}");
    let o = sacode(dir.path(), &["flow", "dcms-sub", "--mode", "recorded"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn replay_refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    ok(sacode(dir.path(), &["replay", "etsi", "appendix-etsi-codes"]));
    let o = sacode(dir.path(), &["replay", "etsi", "appendix-etsi-codes"]);
    assert_eq!(o.status.code(), Some(1));
    ok(sacode(dir.path(), &["replay", "etsi", "appendix-etsi-codes", "--force"]));
    ok(sacode(dir.path(), &["replay", "etsi", "appendix-etsi-codes", "--name", "second"]));
    let agree = ok(sacode(dir.path(), &["agree", "etsi", "second"]));
    assert!(agree.contains("Agreement: 67 of 67 (100.0%)"), "{agree}");
}

#[test]
fn replay_from_codes_file() {
    let dir = tempfile::tempdir().unwrap();
    let codes = dir.path().join("codes.csv");
    std::fs::write(&codes, "item_id,code\n1-1,P5\n3-4,M1\n").unwrap();
    let out = ok(sacode(dir.path(), &["replay", "etsi", codes.to_str().unwrap(), "--name", "mine"]));
    assert!(out.contains("2 of 67"), "{out}");
    let report = ok(sacode(dir.path(), &["report", "mine"]));
    assert!(report.contains("Coverage: 2 of 67 items coded"), "{report}");

    std::fs::write(&codes, "item_id,code\n1-1,P9\n").unwrap();
    let o = sacode(dir.path(), &["replay", "etsi", codes.to_str().unwrap(), "--name", "bad"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("P9"));
}

#[test]
fn validate_tree_reports_first_violation() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(&good, sacode_core::CodingTree::default_definition_json()).unwrap();
    let out = ok(sacode(dir.path(), &["validate-tree", good.to_str().unwrap()]));
    assert!(out.starts_with("ok: 11 questions, 12 leaves, 12 root-to-leaf paths"), "{out}");

    let broken = dir.path().join("broken.tree");
    let text = sacode_core::CodingTree::default_definition_json().replacen("\"yes\": \"Q2\"", "\"yes\": \"Q42\"", 1);
    std::fs::write(&broken, text).unwrap();
    let o = sacode(dir.path(), &["validate-tree", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("Q42"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sacode(dir.path(), &["bogus"]).status.code(), Some(2));
    assert_eq!(sacode(dir.path(), &["report"]).status.code(), Some(2));
    assert_eq!(sacode(dir.path(), &["report", "x", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(sacode(dir.path(), &["compare"]).status.code(), Some(2));
    assert_eq!(sacode(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn ingest_csv_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("mini.csv");
    std::fs::write(
        &file,
        "# dataset_id: mini\n# title: Mini set\n# category: A | Accounts\nitem_id,category_id,text,notes\nA-1,A,\"Use long, unique passwords.\",\n",
    )
    .unwrap();
    let out = ok(sacode(dir.path(), &["ingest", file.to_str().unwrap()]));
    assert_eq!(out, "stored dataset `mini`: 1 items in 1 categories\n");

    std::fs::write(&file, "# dataset_id: bad\nitem_id,category_id,text\nA-1,Z,text\nA-1,Z,again\n").unwrap();
    let o = sacode(dir.path(), &["ingest", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn terminal_coding_persists_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    // DCMS-1: no at Q1 -> M1, tag it; DCMS-2: yes x3, then undo, then no -> Q4 ... quit.
    let out = ok(sacode_stdin(
        dir.path(),
        &["code", "dcms-full", "--coder", "me"],
        "n\nt Unfocused\ny\ny\ny\nu\nmaybe\nq\n",
    ));
    assert!(out.contains("=> DCMS-1 M1"), "{out}");
    assert!(out.contains("DCMS-1 tags: [Unfocused]"));
    assert!(out.contains("! unknown command `maybe`"));

    let exported = ok(sacode(dir.path(), &["export", "dcms-full-me", "--format", "csv"]));
    assert_eq!(exported, "item_id,code,path,tags\nDCMS-1,M1,Q1:n,Unfocused\n");

    // Resume: DCMS-2 is at Q3 after two yes answers.
    let out = ok(sacode_stdin(dir.path(), &["code", "dcms-full", "--coder", "me"], "n\ny\ny\ny\nn\nn\n"));
    assert!(out.contains("session `dcms-full-me`: 1 of 13 items coded"), "{out}");
    assert!(out.contains("=> DCMS-2 P5"), "{out}");
    let exported = ok(sacode(dir.path(), &["export", "dcms-full-me", "--format", "table"]));
    assert!(exported.contains("DCMS-2  P5      Q1:y Q2:y Q3:n Q4:y Q5:y Q6:y Q7:n Q8:n"), "{exported}");
}

#[test]
fn terminal_and_checkpoint_agree() {
    let dir = tempfile::tempdir().unwrap();
    ok(sacode_stdin(dir.path(), &["code", "etsi", "--coder", "a"], "y\ny\ny\ny\nn\nq\n"));
    let json = ok(sacode(dir.path(), &["export", "etsi-a", "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["schema"], "sacode.session/1");
    assert_eq!(v["decisions"][0]["code"], "T");
    assert_eq!(v["decisions"][0]["item_id"], "ETSI-1-1");
}
