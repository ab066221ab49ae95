use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn qualm(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_qualm"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let input = stdin.unwrap_or("").to_string();
    let mut pipe = child.stdin.take().unwrap();
    let writer = std::thread::spawn(move || pipe.write_all(input.as_bytes()));
    let out = child.wait_with_output().unwrap();
    writer.join().unwrap().unwrap();
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const RECORDS: &str = r#"{"id":"join","language":"python","context":"import os\n","samples":["x = os.path.join(a, b)\nprint(x)\n","x = os.path.join(a, c)\nprint(x)\n","x = os.path.split(a)\nprint(x)\n"],"ground_truth":"x = os.path.join(a, c)\nprint(x)\n","holdout_sample":"x = os.path.join(a, b)\n"}
{"id":"grid","language":"python","prototype":"a b c","samples":["a c b d"]}
{"id":"java","language":"java","samples":[{"text":"int n = list.size();\n","logprobs":[{"text":"int n","logprob":-0.1},{"text":" = list","logprob":-0.4},{"text":".size();\n","logprob":-1.5}]},"int n = items.length;\n"],"ground_truth":"int n = items.length;\n"}
"#;

fn write_temp(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&v).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:?}\n{doc}");
}

#[test]
fn annotate_json_keeps_input_order_for_every_task() {
    for task in ["regions", "prefix", "prefix_plus_regions", "api_calls"] {
        let out = qualm(&["annotate", "--task", task, "--no-timings", "--jobs", "3"], Some(RECORDS));
        assert_eq!(out.status.code(), Some(0), "{task}: {}", String::from_utf8_lossy(&out.stderr));
        let ids: Vec<String> = stdout(&out)
            .lines()
            .map(|l| serde_json::from_str::<Value>(l).unwrap()["id"].as_str().unwrap().to_string())
            .collect();
        assert_eq!(ids, ["join", "grid", "java"]);
    }
}

#[test]
fn annotate_without_timings_is_reproducible() {
    let a = qualm(&["annotate", "--no-timings"], Some(RECORDS));
    let b = qualm(&["annotate", "--no-timings", "--jobs", "1"], Some(RECORDS));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(!stdout(&a).contains("solve_ms"));
}

#[test]
fn records_match_the_schemas() {
    let input = schema("example_record.schema.json");
    for line in RECORDS.lines() {
        assert_valid(&input, &serde_json::from_str(line).unwrap());
    }
    assert!(!input.is_valid(&serde_json::json!({ "id": "x", "language": "python" })));
    assert!(!input.is_valid(&serde_json::json!({ "id": "x", "language": "rust", "samples": [] })));
    let output = schema("output_record.schema.json");
    let dir = tempfile::tempdir().unwrap();
    let inp = write_temp(dir.path(), "in.jsonl", RECORDS);
    let rec = dir.path().join("out.jsonl");
    for task in ["regions", "prefix_plus_regions", "api_calls"] {
        let out = qualm(
            &["evaluate", inp.to_str().unwrap(), "--task", task, "--csv", "/dev/null", "--records", rec.to_str().unwrap()],
            None,
        );
        assert_eq!(out.status.code(), Some(0));
        for line in std::fs::read_to_string(&rec).unwrap().lines() {
            assert_valid(&output, &serde_json::from_str(line).unwrap());
        }
    }
}

#[test]
fn evaluate_writes_one_csv_row_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let inp = write_temp(dir.path(), "in.jsonl", RECORDS);
    let csv_path = dir.path().join("summary.csv");
    let out = qualm(&["evaluate", inp.to_str().unwrap(), "--task", "prefix_plus_regions", "--csv", csv_path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "example_id",
            "method",
            "utility",
            "est_utility",
            "loo_utility",
            "sensitivity",
            "specificity",
            "f1",
            "correct_chars",
            "incorrect_chars"
        ]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let solver: Vec<_> = rows.iter().filter(|r| &r[1] == "solver").collect();
    assert_eq!(solver.len(), 3);
    assert!(rows.iter().any(|r| &r[0] == "java" && r[1].starts_with("token_prob")));
    // a record without ground truth leaves the truth columns empty
    let grid = solver.iter().find(|r| &r[0] == "grid").unwrap();
    assert_eq!(&grid[2], "");
    assert!(!grid[3].is_empty());
}

#[test]
fn a_bad_record_gives_exit_code_one_and_keeps_the_rest() {
    let input = format!("{RECORDS}{}\n", r#"{"id":"empty","language":"cpp","samples":[]}"#);
    let out = qualm(&["annotate", "--no-timings"], Some(&input));
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout(&out).lines().count(), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty_samples"));
}

#[test]
fn fatal_errors_give_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_config = write_temp(dir.path(), "c.json", r#"{"region_switch_penalty": -1}"#);
    let unknown_field = write_temp(dir.path(), "u.json", r#"{"no_such_field": 1}"#);
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["annotate", "--config", bad_config.to_str().unwrap()], RECORDS),
        (vec!["annotate", "--config", unknown_field.to_str().unwrap()], RECORDS),
        (vec!["annotate", "/definitely/not/here.jsonl"], ""),
        (vec!["annotate"], "{not json}\n"),
        (vec!["annotate", "--task", "nonsense"], RECORDS),
        (vec!["dump-diagram", "--index", "99"], RECORDS),
    ];
    for (args, input) in cases {
        let out = qualm(&args, Some(input));
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn oracle_check_on_random_instances() {
    let out = qualm(&["oracle-check", "--random", "40", "--seed", "7", "--task", "prefix_plus_regions"], None);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.lines().count() > 0);
    assert!(text.lines().all(|l| l.contains("\tok\t")));
}

#[test]
fn oracle_check_skips_large_instances() {
    let out = qualm(&["oracle-check", "--max-vars", "4"], Some(RECORDS));
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped"));
}

#[test]
fn html_and_ansi_rendering() {
    let html = qualm(&["annotate", "--format", "html"], Some(RECORDS));
    assert_eq!(html.status.code(), Some(0));
    assert_eq!(stdout(&html).matches("<pre class=\"qualm-suggestion\">").count(), 3);
    let ansi = qualm(&["annotate", "--format", "ansi"], Some(RECORDS));
    assert!(stdout(&ansi).contains("== grid"));
}

#[test]
fn dump_diagram_lists_every_member() {
    let out = qualm(&["dump-diagram", "--id", "grid"], Some(RECORDS));
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("# ")).count(), 2);
    let one = qualm(&["dump-diagram", "--id", "grid", "--index", "0"], Some(RECORDS));
    assert_eq!(stdout(&one).lines().filter(|l| l.starts_with("# ")).count(), 1);
}
