use std::path::{Path, PathBuf};
use std::process::Command;

use diarasr_core::formats::{parse_seglst, serialize_rttm};
use diarasr_core::metrics::{der, tcpwer, Tokenizer};
use diarasr_core::{Segment, SegmentList};
use serde_json::Value;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("diarasr").chain(args.iter().copied());
    let code = diarasr_cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn run_json(args: &[&str]) -> Value {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "stderr: {err}");
    serde_json::from_str(&out).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn tcpwer_identity_fixture_scores_zero() {
    let r = fixture("mandarin_ref.seglst.json");
    let report = run_json(&[
        "score",
        "tcpwer",
        "-r",
        &r,
        "-h",
        &r,
        "--collar",
        "5",
        "--tokenizer",
        "char",
    ]);
    assert_eq!(report["aggregate"]["rate"], 0.0);
    assert_eq!(report["aggregate"]["ref_tokens"], 19);
    assert_eq!(report["parameters"]["tokenizer"], "char");
    let r = fixture("meeting_ref.seglst.json");
    let h = fixture("meeting_hyp_identity.seglst.json");
    assert_eq!(
        run_json(&["score", "tcpwer", "-r", &r, "-h", &h])["aggregate"]["rate"],
        0.0
    );
}

#[test]
fn der_self_score_is_zero() {
    let r = fixture("meeting.rttm");
    let report = run_json(&["score", "der", "-r", &r, "-h", &r, "--collar", "0.25"]);
    assert_eq!(report["aggregate"]["der"], 0.0);
    assert_eq!(report["parameters"]["collar"], 0.25);
    let with_uem = run_json(&[
        "score",
        "der",
        "-r",
        &r,
        "-h",
        &r,
        "--uem",
        &fixture("meeting.uem"),
    ]);
    assert_eq!(with_uem["aggregate"]["der"], 0.0);
}

#[test]
fn default_collars() {
    let r = fixture("meeting_ref.seglst.json");
    let h = fixture("meeting_hyp.seglst.json");
    assert_eq!(
        run_json(&["score", "tcpwer", "-r", &r, "-h", &h])["parameters"]["collar"],
        5.0
    );
    assert_eq!(
        run_json(&["score", "der", "-r", &r, "-h", &h])["parameters"]["collar"],
        0.25
    );
    let inf = run_json(&["score", "tcpwer", "-r", &r, "-h", &h, "--collar", "inf"]);
    let cp = run_json(&["score", "cpwer", "-r", &r, "-h", &h]);
    assert_eq!(inf["parameters"]["collar"], "inf");
    assert_eq!(inf["sessions"], cp["sessions"]);
}

#[test]
fn reports_match_library_calls() {
    let r_path = fixture("meeting_ref.seglst.json");
    let h_path = fixture("meeting_hyp.seglst.json");
    let report = run_json(&[
        "score", "tcpwer", "-r", &r_path, "-h", &h_path, "--collar", "1",
    ]);
    let reference = parse_seglst(&std::fs::read_to_string(&r_path).unwrap()).unwrap();
    let hypothesis = parse_seglst(&std::fs::read_to_string(&h_path).unwrap()).unwrap();
    let mut hyp_sessions = hypothesis.by_session();
    let mut total_errors = 0;
    let mut total_tokens = 0;
    for (i, (id, r)) in reference.by_session().into_iter().enumerate() {
        let direct = tcpwer(&r, &hyp_sessions.remove(&id).unwrap(), 1.0, Tokenizer::Word).unwrap();
        let s = &report["sessions"][i];
        assert_eq!(s["session_id"], id.as_str());
        assert_eq!(s["errors"], direct.counts.errors());
        assert_eq!(s["rate"], direct.rate.unwrap());
        total_errors += direct.counts.errors();
        total_tokens += direct.counts.ref_tokens;
    }
    // Counts are summed before the rate is taken.
    assert_eq!(report["aggregate"]["errors"], total_errors);
    assert_eq!(
        report["aggregate"]["rate"],
        total_errors as f64 / total_tokens as f64
    );

    let der_report = run_json(&["score", "der", "-r", &r_path, "-h", &h_path]);
    let s01 = reference.by_session().remove("S01").unwrap();
    let h01 = hypothesis.by_session().remove("S01").unwrap();
    let direct = der(&s01, &h01, 0.25, None).unwrap();
    assert_eq!(der_report["sessions"][0]["der"], direct.der.unwrap());
}

#[test]
fn by_num_speakers_groups_sessions() {
    let r = fixture("meeting_ref.seglst.json");
    let h = fixture("meeting_hyp.seglst.json");
    let report = run_json(&["score", "cpwer", "-r", &r, "-h", &h, "--by-num-speakers"]);
    let groups = report["by_num_speakers"].as_object().unwrap();
    assert_eq!(groups.keys().collect::<Vec<_>>(), ["2", "3"]);
    assert_eq!(groups["2"]["sessions"], 1);
}

#[test]
fn reports_are_deterministic() {
    let r = fixture("meeting_ref.seglst.json");
    let h = fixture("meeting_hyp.seglst.json");
    let args = ["score", "tcpwer", "-r", &r, "-h", &h, "--by-num-speakers"];
    assert_eq!(run(&args).1, run(&args).1);
    let sim = [
        "simulate",
        "--n-speakers",
        "3",
        "--count",
        "4",
        "--seed",
        "11",
    ];
    assert_eq!(run(&sim).1, run(&sim).1);
}

fn long_meeting() -> SegmentList {
    let mut segs = Vec::new();
    for k in 0..60 {
        let start = k as f64 * 2.5;
        let spk = ["A", "B", "C"][k % 3];
        segs.push(Segment::new("long", spk, start, start + 3.0, None).unwrap());
    }
    segs.push(Segment::new("long", "D", 160.0, 235.0, None).unwrap());
    SegmentList::new(segs)
}

#[test]
fn plan_chunks_honours_alimeeting_limits() {
    let dir = tempfile::tempdir().unwrap();
    let rttm = write(dir.path(), "diar.rttm", &serialize_rttm(&long_meeting()));
    let rttm = rttm.to_str().unwrap();
    let (code, out, err) = run(&[
        "plan-chunks",
        "-i",
        rttm,
        "--max-dur",
        "30",
        "--max-segments",
        "10",
        "--max-per-speaker",
        "4",
    ]);
    assert_eq!(code, 0);
    assert!(err.contains("one-hot"));
    let plan: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(plan["coverage"]["covered"], true);
    for chunk in plan["chunks"].as_array().unwrap() {
        let segs = chunk["segments"].as_array().unwrap();
        assert!(segs.len() <= 10);
        for spk in ["A", "B", "C", "D"] {
            assert!(segs.iter().filter(|s| s["speaker"] == spk).count() <= 4);
        }
        let w = &chunk["window"];
        assert!(w["end"].as_f64().unwrap() - w["start"].as_f64().unwrap() <= 30.0 + 1e-9);
    }
}

#[test]
fn plan_chunks_with_embeddings_and_prompts() {
    let dir = tempfile::tempdir().unwrap();
    let emb = write(
        dir.path(),
        "emb.json",
        r#"{"alice": [1, 0], "bob": [0, 1], "carol": [1, 1]}"#,
    );
    let prompts = dir.path().join("prompts.jsonl");
    let r = fixture("meeting_ref.seglst.json");
    let (code, _, err) = run(&[
        "plan-chunks",
        "-i",
        &r,
        "--embeddings",
        emb.to_str().unwrap(),
        "--prompts-out",
        prompts.to_str().unwrap(),
    ]);
    // S02 speakers have no embedding.
    assert_eq!(code, 1);
    assert!(err.contains("dan"), "{err}");

    let emb = write(
        dir.path(),
        "emb.json",
        r#"{"alice": [1, 0], "bob": [0, 1], "carol": [1, 1], "dan": [2, 0], "erin": [0, 2]}"#,
    );
    let (code, _, err) = run(&[
        "plan-chunks",
        "-i",
        &r,
        "--embeddings",
        emb.to_str().unwrap(),
        "--prompts-out",
        prompts.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(err.is_empty());
    let text = std::fs::read_to_string(&prompts).unwrap();
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["labels"][0], "so the budget for next quarter");

    // p = 0 leaves every record unchanged.
    let (code, out, _) = run(&[
        "augment",
        "-i",
        prompts.to_str().unwrap(),
        "--p-replace",
        "0",
        "--p-drop",
        "0",
        "--p-shuffle",
        "0",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out, text);
    let (code, out, _) = run(&["augment", "-i", prompts.to_str().unwrap(), "--p-drop", "1"]);
    assert_eq!(code, 0);
    for line in out.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["triplet_slots"].as_array().unwrap().is_empty());
    }
}

#[test]
fn simulate_then_score_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("ref.json");
    let report = run_json(&[
        "simulate",
        "--n-speakers",
        "3",
        "--count",
        "5",
        "--seed",
        "2",
        "--reference-out",
        refs.to_str().unwrap(),
    ]);
    assert_eq!(report["sessions"].as_array().unwrap().len(), 5);
    let r = refs.to_str().unwrap();
    let score = run_json(&["score", "tcpwer", "-r", r, "-h", r, "--collar", "0"]);
    assert_eq!(score["aggregate"]["rate"], 0.0);
    assert_eq!(score["aggregate"]["sessions"], 5);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let r = fixture("meeting.rttm");
    let (code, stdout, _) = run(&[
        "score",
        "der",
        "-r",
        &r,
        "-h",
        &r,
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["metric"], "der");
}

#[test]
fn usage_errors_exit_two() {
    let r = fixture("meeting.rttm");
    for args in [
        vec!["score", "der", "-r", &r, "-h", &r, "--bogus"],
        vec!["score", "tcpwer", "-r", &r, "-h", &r, "--collar", "-1"],
        vec!["score", "cpwer", "-r", &r, "-h", &r, "--tokenizer", "bpe"],
        vec!["score", "cpwer", "-r", &r],
        vec!["frobnicate"],
    ] {
        let (code, out, err) = run(&args);
        assert_eq!(code, 2, "{args:?}");
        assert!(out.is_empty());
        assert_eq!(err.lines().count(), 1, "{err}");
    }
}

#[test]
fn data_errors_exit_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.rttm",
        "SPEAKER s 1 0.0 1.0 <NA> <NA> A <NA> <NA>\nSPEAKER s 1 2.0 -1 <NA> <NA> A <NA> <NA>\n",
    );
    let bad = bad.to_str().unwrap();
    let (code, _, err) = run(&["score", "der", "-r", bad, "-h", bad]);
    assert_eq!(code, 1);
    assert_eq!(err.lines().count(), 1);
    assert!(
        err.contains("bad.rttm") && err.contains("line 2") && err.contains("field 5"),
        "{err}"
    );

    let (code, _, err) = run(&["score", "der", "-r", "/nonexistent/ref.rttm", "-h", bad]);
    assert_eq!(code, 1);
    assert!(err.contains("/nonexistent/ref.rttm"));

    let seglst = write(
        dir.path(),
        "bad.json",
        r#"[{"session_id": "s", "speaker": "A", "start_time": 1}]"#,
    );
    let (code, _, err) = run(&[
        "score",
        "cpwer",
        "-r",
        seglst.to_str().unwrap(),
        "-h",
        seglst.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(
        err.contains("record 0") && err.contains("end_time"),
        "{err}"
    );

    // RTTM carries no words.
    let r = fixture("meeting.rttm");
    let (code, _, err) = run(&["score", "cpwer", "-r", &r, "-h", &r]);
    assert_eq!(code, 1);
    assert!(err.contains("no transcript words"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_diarasr");
    let r = fixture("meeting.rttm");
    let ok = Command::new(bin)
        .args(["score", "der", "-r", &r, "-h", &r])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let usage = Command::new(bin)
        .args(["score", "der", "--nope"])
        .output()
        .unwrap();
    assert_eq!(usage.status.code(), Some(2));
    let data = Command::new(bin)
        .args(["score", "der", "-r", "missing.rttm", "-h", &r])
        .output()
        .unwrap();
    assert_eq!(data.status.code(), Some(1));
    let help = Command::new(bin)
        .args(["score", "der", "--help"])
        .output()
        .unwrap();
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("--collar"));
}

#[test]
fn simulated_prompts_carry_every_reference_word() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("ref.json");
    let prompts = dir.path().join("prompts.jsonl");
    run_json(&[
        "simulate",
        "--n-speakers",
        "3",
        "--count",
        "4",
        "--seed",
        "9",
        "--max-dur",
        "90",
        "--reference-out",
        refs.to_str().unwrap(),
        "--prompts-out",
        prompts.to_str().unwrap(),
    ]);
    let reference = parse_seglst(&std::fs::read_to_string(refs).unwrap()).unwrap();
    let mut expected: Vec<String> = reference
        .iter()
        .flat_map(|s| s.words.as_deref().unwrap_or("").split_whitespace())
        .map(String::from)
        .collect();
    let records =
        diarasr_core::enrollment::read_records(&std::fs::read_to_string(prompts).unwrap()).unwrap();
    assert!(records.len() > 4);
    let mut got: Vec<String> = records
        .iter()
        .flat_map(|p| p.labels.iter().flat_map(|l| l.split_whitespace()))
        .map(String::from)
        .collect();
    expected.sort();
    got.sort();
    assert_eq!(got, expected);
}
