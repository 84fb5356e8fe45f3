use std::process::{Command, Output};

fn hcq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcq"))
        .args(args)
        .env_remove("HC_THREADS")
        .output()
        .expect("spawn hcq")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn count_exact_prints_one_json_line() {
    let o = hcq(&["count-exact", "--d", "2", "--p", "1", "--seed", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "{\"count\":\"7\"}\n");
}

#[test]
fn no_arguments_is_a_usage_error() {
    let o = hcq(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = hcq(&["estimate", "--d", "5", "--p", "0.5", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thresholds_are_named() {
    let o = hcq(&["thresholds"]);
    assert_eq!(o.status.code(), Some(0));
    let last: serde_json::Value = serde_json::from_str(stdout(&o).lines().last().unwrap()).unwrap();
    let c = last["constants"].as_object().unwrap();
    for name in ["p_1", "p_2", "p_3", "worst_case", "gamma", "mu1_fourth_term"] {
        assert!(c.contains_key(name), "{name}");
    }
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let args = ["verify-moments", "--d", "8", "--p", "0.7", "--trials", "300", "--seed", "5"];
    let one = hcq(&[&args[..], &["--threads", "1"]].concat());
    let four = Command::new(env!("CARGO_BIN_EXE_hcq"))
        .args(args)
        .env("HC_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(one.stdout, hcq(&[&args[..], &["--threads", "1"]].concat()).stdout);
}

#[test]
fn sample_emits_sorted_independent_sets() {
    let o = hcq(&["sample", "--d", "6", "--p", "0.9", "--trials", "50", "--seed", "2", "--emit-sets"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 51);
    for l in &lines[..50] {
        if l["status"] == "success" {
            let set: Vec<u64> = serde_json::from_value(l["set"].clone()).unwrap();
            assert!(set.windows(2).all(|w| w[0] < w[1]));
        } else {
            assert!(l["step"] == 3 || l["step"] == 5);
        }
    }
    assert_eq!(lines[50]["invalid_outputs"], 0);
}

#[test]
fn spec_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("approx.json");
    let out = dir.path().join("approx.csv");
    std::fs::write(
        &spec,
        format!(r#"{{"kind":"approx","d":[3,4],"p":0.0,"trials":3,"seed":1,"format":"csv","out":{:?}}}"#, out),
    )
    .unwrap();
    let o = hcq(&["approx", "--spec", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(csv.lines().next().unwrap().contains("gap"));
}
