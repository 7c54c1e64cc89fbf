use std::path::Path;
use std::process::Command;

fn pvlens(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pvlens")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn run_then_export_and_exit_codes() {
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let dir = tempfile::tempdir().unwrap();
    let repo = dir.path().join("r.sqlite");
    let (labels, terms, srlc) = (fx.join("labels"), fx.join("terms"), fx.join("srlc.jsonl"));
    let base = |workers: &'static str| {
        vec![
            "run".to_string(),
            "--input".into(),
            labels.display().to_string(),
            "--terms".into(),
            terms.display().to_string(),
            "--repo".into(),
            repo.display().to_string(),
            "--srlc".into(),
            srlc.display().to_string(),
            "--run-date".into(),
            "2024-06-01".into(),
            "--workers".into(),
            workers.into(),
        ]
    };
    let args = base("2");
    let (code, out, _) = pvlens(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, 0);
    assert!(out.starts_with("3 labels: 3 processed, 0 skipped; 2 substances, 5 PTs, 11 events"), "{out}");

    let (code, out, _) = pvlens(&["export", "--repo", repo.to_str().unwrap(), "--format", "jsonl"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 11);

    let args = base("0");
    let (code, _, err) = pvlens(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, 2, "{err}");
    let (code, _, _) = pvlens(&["export", "--repo", dir.path().join("none").to_str().unwrap()]);
    assert_eq!(code, 2);

    let (code, out, _) = pvlens(&["match", "--terms", terms.to_str().unwrap(), "--text", "Queasiness and blood pressure"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 1);
    assert!(out.contains("\"pt_code\":\"10028813\""), "{out}");
}
