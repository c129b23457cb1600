use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decayrnn"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn param_count_matches_reference_size() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["param-count", "--kind", "grud", "--vars", "33", "--hidden", "49", "--outputs", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "18838");
}

#[test]
fn param_budget_picks_largest_fitting_size() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["param-count", "--kind", "gru-d", "--vars", "33", "--param-budget", "18900"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("hidden 49: 18838"), "{}", stdout(&o));
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let files = ["data.csv", "labels.csv", "synthetic.json"];
    let mut first = Vec::new();
    for round in 0..2 {
        let o = run(
            &["generate", "--correlation", "0.6", "--samples", "40", "--seed", "7", "--out-dir", "g"],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let bytes: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(dir.path().join("g").join(f)).unwrap()).collect();
        if round == 0 {
            first = bytes;
        } else {
            assert!(first == bytes, "regenerated files differ");
        }
    }
}

#[test]
fn grad_check_passes_for_grud() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["grad-check", "--kind", "grud", "--seed", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("max relative error"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["param-count", "--no-such-flag"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["param-count", "--kind", "nope", "--vars", "3", "--hidden", "2"], dir.path()).status.code(), Some(1));
    std::fs::write(dir.path().join("bad.json"), "{\"bogus\": 1}").unwrap();
    assert_eq!(run(&["suite", "--config", "bad.json"], dir.path()).status.code(), Some(1));
}

#[test]
fn missing_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["stats", "--data", "absent.csv", "--labels", "absent_labels.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_evaluate_and_decay_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(
        run(&["generate", "--samples", "40", "--steps", "8", "--correlation", "0.9"], p).status.code(),
        Some(0)
    );
    let data = ["--data", "data.csv", "--labels", "labels.csv"];
    let mut args = vec!["train"];
    args.extend(data);
    args.extend(["--kind", "gru-d", "--hidden", "4", "--seed", "3"]);
    let o = run(&args, p);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(p.join("model.json").exists() && p.join("history.jsonl").exists());

    let mut args = vec!["evaluate"];
    args.extend(data);
    args.extend(["--model", "model.json", "--out-dir", "eval"]);
    assert_eq!(run(&args, p).status.code(), Some(0));
    assert!(p.join("eval/evaluation.json").exists());

    let o = run(&["decay-report", "--model", "model.json", "--out-dir", "decay"], p);
    assert_eq!(o.status.code(), Some(0));
    let curves = std::fs::read_to_string(p.join("decay/decay_curves.csv")).unwrap();
    assert!(curves.starts_with("# {"));
    assert!(curves.contains("variable,delta,gamma"));
}

#[test]
fn suite_rerun_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("suite.json"),
        r#"{"kinds":["gru-mean"],"correlations":[0.9],"seeds":[0],"hidden":3,"folds":2,
            "synthetic":{"n_samples":24,"n_steps":4,"n_variables":3},
            "train":{"max_epochs":3}}"#,
    )
    .unwrap();
    let first = run(&["suite", "--config", "suite.json", "--out-dir", "out"], p);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let table = std::fs::read(p.join("out/table.csv")).unwrap();
    let second = run(&["suite", "--config", "suite.json", "--out-dir", "out"], p);
    assert_eq!(second.status.code(), Some(0));
    assert!(stdout(&second).contains("already complete"));
    assert_eq!(std::fs::read(p.join("out/table.csv")).unwrap(), table);
}
