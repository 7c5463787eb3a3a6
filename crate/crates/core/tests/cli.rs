//! End-to-end checks of the `oalab` binary: exit codes, file outputs,
//! and run-to-run determinism.

use std::path::Path;
use std::process::{Command, Output};

fn oalab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oalab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn gen_writes_collection_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kdist.oa");
    let out = oalab(&[
        "gen", "--family", "kdist", "--n", "3", "--q", "9", "--k", "2", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(stdout(&out).contains("3 arrays"));
    assert!(stdout(&out).contains("|T_S| = 9"));
    assert!(stdout(&out).contains("consistent"));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("oa n=3 q=9 k=2 d=1\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with('S')).count(), 3);
    assert_eq!(text.lines().count(), 1 + 3 + 3 * 9);

    let verify = oalab(&["verify", path.to_str().unwrap()]);
    assert_eq!(code(&verify), 0, "{verify:?}");
    assert!(stdout(&verify).contains("collection is consistent"));
}

#[test]
fn gen_ddegree_and_ksum_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("deg.oa");
    let out = oalab(&[
        "gen", "--family", "ddegree", "--n", "5", "--q", "7", "--k", "3", "--deg", "1",
        "--out", p1.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("d=2"));
    assert!(stdout(&out).contains("consistent"));

    let p2 = dir.path().join("ksum.oa");
    let out = oalab(&[
        "gen", "--family", "ksum", "--n", "4", "--q", "16", "--k", "2", "--t", "0",
        "--out", p2.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&p2).unwrap();
    assert!(text.starts_with("oa n=4 q=16 k=2 d=1\n"));
}

#[test]
fn verify_flags_corrupted_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.oa");
    let out = oalab(&[
        "gen", "--family", "kdist", "--n", "3", "--q", "3", "--k", "2", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    // Break one row without creating a duplicate.
    let broken = text.replacen("0 0\n", "0 1\n", 1);
    assert_ne!(text, broken);
    std::fs::write(&path, broken).unwrap();

    let verify = oalab(&["verify", path.to_str().unwrap()]);
    assert_eq!(code(&verify), 1, "{verify:?}");
    assert!(stdout(&verify).contains("FAILS"));
    assert!(stdout(&verify).contains("rows match, expected"));
}

#[test]
fn verify_reports_rank_indexed_inconsistency() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rank.oa");
    std::fs::write(&path, "gen ddegree q=7 deg=1 k=4 n=5 points=rank\n").unwrap();
    let verify = oalab(&["verify", path.to_str().unwrap()]);
    assert_eq!(code(&verify), 0, "{verify:?}");
    assert!(stdout(&verify).contains("inconsistent"));
    assert!(stdout(&verify).contains("disagree"));
}

#[test]
fn verify_rejects_malformed_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("garbage.oa");
    std::fs::write(&path, "oa n=3 q=3 k=2 d=1\nS 0 1\n0 0\nwat\n").unwrap();
    let verify = oalab(&["verify", path.to_str().unwrap()]);
    assert_eq!(code(&verify), 2);
    assert!(String::from_utf8_lossy(&verify.stderr).contains("line 4"));
}

#[test]
fn lemmas_writes_report_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("r1.json");
    let p2 = dir.path().join("r2.json");
    let args = |p: &Path| {
        vec![
            "lemmas".to_string(),
            "--family".into(),
            "ksum".into(),
            "--n".into(),
            "4".into(),
            "--q".into(),
            "4".into(),
            "--k".into(),
            "1".into(),
            "--t".into(),
            "0".into(),
            "--seed".into(),
            "11".into(),
            "--out".into(),
            p.to_str().unwrap().into(),
        ]
    };
    let run1 = Command::new(env!("CARGO_BIN_EXE_oalab"))
        .args(args(&p1))
        .output()
        .unwrap();
    assert_eq!(run1.status.code(), Some(0), "{run1:?}");
    assert!(stdout(&run1).contains("L7: pass"));
    let run2 = Command::new(env!("CARGO_BIN_EXE_oalab"))
        .args(args(&p2))
        .output()
        .unwrap();
    assert_eq!(run2.status.code(), Some(0));
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&p1).unwrap()).unwrap();
    assert_eq!(report["schema"], 1);
    assert_eq!(report["meta"]["n"], 4);
    assert_eq!(report["meta"]["seed"], 11);
    assert!(report["ratio"].as_f64().unwrap() > 1.0);
    assert_eq!(report["delta_norms"].as_array().unwrap().len(), 4);
}

#[test]
fn lemmas_nonconvergence_exits_3() {
    let out = oalab(&[
        "lemmas", "--family", "ksum", "--n", "3", "--q", "3", "--k", "1", "--t", "0",
        "--tolerance", "1e-15", "--max-iter", "10",
    ]);
    assert_eq!(code(&out), 3, "{out:?}");
}

#[test]
fn lemmas_cap_exceeded_exits_2() {
    let out = oalab(&[
        "lemmas", "--family", "ksum", "--n", "4", "--q", "16", "--k", "2", "--qn-cap", "100",
    ]);
    assert_eq!(code(&out), 2, "{out:?}");
}

#[test]
fn scaling_single_point_has_null_slope() {
    let out = oalab(&[
        "scaling", "--family", "ksum", "--k", "1", "--d", "0", "--n-list", "3",
        "--q-rule", "strict",
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("# slope=null"));
    assert!(text.lines().next().unwrap().starts_with("n,q,"));
}

#[test]
fn scaling_csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = oalab(&[
        "scaling", "--family", "ksum", "--k", "1", "--d", "0", "--n-list", "2,3,4",
        "--q-rule", "strict", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 + 1); // header, rows, slope comment
    assert!(text.contains("# slope="));
    assert!(stdout(&out).contains("fitted slope"));
}

#[test]
fn scaling_skips_capped_rows_with_marker() {
    // q = n for this rule, so n = 4 needs q^n = 256 > 100 and is skipped;
    // the slope is fitted over the remaining rows.
    let out = oalab(&[
        "scaling", "--family", "ksum", "--k", "1", "--d", "0", "--n-list", "2,3,4",
        "--q-rule", "strict", "--qn-cap", "100",
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    let text = stdout(&out);
    let skipped: Vec<&str> = text.lines().filter(|l| l.ends_with("skipped_cap")).collect();
    assert_eq!(skipped.len(), 1);
    assert!(skipped[0].starts_with("4,"));
    assert!(!text.contains("# slope=null"));
}

#[test]
fn reports_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for threads in ["1", "2"] {
        let path = dir.path().join(format!("t{threads}.json"));
        let out = Command::new(env!("CARGO_BIN_EXE_oalab"))
            .env("OA_LAB_THREADS", threads)
            .args([
                "lemmas", "--family", "kdist", "--n", "3", "--q", "4", "--k", "2",
                "--seed", "9", "--out", path.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{out:?}");
        paths.push(path);
    }
    assert_eq!(
        std::fs::read(&paths[0]).unwrap(),
        std::fs::read(&paths[1]).unwrap()
    );
}

#[test]
fn pattern_family_through_cli() {
    let out = oalab(&[
        "gen", "--family", "pattern", "--n", "4", "--q", "3", "--k", "2",
        "--pattern-global", "0,1,2,0",
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(stdout(&out).contains("oa n=4 q=3 k=2 d=0"));
    assert!(stdout(&out).contains("consistent"));
}

#[test]
fn dump_writes_dense_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("op.txt");
    let out = oalab(&[
        "dump", "--family", "ksum", "--n", "3", "--q", "3", "--k", "2", "--t", "0",
        "--variant", "delta", "--coordinate", "0", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "27 27");
    assert_eq!(text.lines().count(), 28);
    // 17 significant digits per cell.
    let cell = lines.next().unwrap().split_whitespace().next().unwrap();
    assert!(cell.contains('e'));
    cell.parse::<f64>().unwrap();
}

#[test]
fn usage_error_exits_2() {
    let out = oalab(&["gen", "--family", "ddegree", "--n", "4", "--q", "9", "--k", "3"]);
    assert_eq!(code(&out), 2, "{out:?}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("not prime"));
}
