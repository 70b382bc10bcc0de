use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deltahedge"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn deltahedge")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn synth(dir: &Path, days: &str) {
    let out = run(dir, &["--seed", "11", "--out", "data", "synth", "--days", days]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn write_config(dir: &Path, name: &str, strategy: &str, extra: &str) {
    let text = format!("[data]\ndir = \"data\"\n\n[rl]\ntimesteps = 200\n\n[run]\nstrategy = \"{strategy}\"\n{extra}");
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(tmp.path(), &["frobnicate"])), 1);
    assert_eq!(code(&run(tmp.path(), &[])), 1);
    assert_eq!(code(&run(tmp.path(), &["--help"])), 0);
    assert_eq!(code(&run(tmp.path(), &["--version"])), 0);
}

#[test]
fn synth_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "300");
    let first: Vec<Vec<u8>> = ["bars", "options", "sentiment", "vix"]
        .iter()
        .map(|f| fs::read(tmp.path().join(format!("data/{f}.csv"))).unwrap())
        .collect();
    synth(tmp.path(), "300");
    for (i, f) in ["bars", "options", "sentiment", "vix"].iter().enumerate() {
        assert_eq!(
            first[i],
            fs::read(tmp.path().join(format!("data/{f}.csv"))).unwrap(),
            "{f}"
        );
    }
    let bars = String::from_utf8(first[0].clone()).unwrap();
    assert_eq!(bars.lines().next(), Some("date,open,high,low,close,volume"));
    assert_eq!(bars.lines().count(), 301);
}

#[test]
fn synth_rejects_single_day() {
    let tmp = tempfile::tempdir().unwrap();
    assert_ne!(code(&run(tmp.path(), &["synth", "--days", "1", "--out", "d"])), 0);
}

#[test]
fn shock_flag_is_validated() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(tmp.path(), &["synth", "--shock", "10:5:x", "--out", "d"])), 1);
    let ok = run(
        tmp.path(),
        &["synth", "--days", "200", "--shock", "100:20:-0.8:0.6", "--out", "d"],
    );
    assert_eq!(code(&ok), 0);
}

#[test]
fn unknown_config_key_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "bad.toml", "buy_and_hold", "colour = \"red\"\n");
    let out = run(tmp.path(), &["--config", "bad.toml", "backtest"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn missing_data_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "run.toml", "buy_and_hold", "");
    assert_eq!(code(&run(tmp.path(), &["--config", "run.toml", "backtest"])), 2);
}

#[test]
fn corrupt_csv_names_file_and_line() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "200");
    let path = tmp.path().join("data/bars.csv");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("2099-01-01,abc,1,1,1,1\n");
    fs::write(&path, text).unwrap();
    write_config(tmp.path(), "run.toml", "buy_and_hold", "");
    let out = run(tmp.path(), &["--config", "run.toml", "backtest"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bars.csv") && err.contains("202"), "{err}");
}

#[test]
fn buy_and_hold_backtest_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "260");
    write_config(tmp.path(), "bh.toml", "buy_and_hold", "");
    let out = run(tmp.path(), &["--config", "bh.toml", "--out", "rep", "backtest"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "report.json",
        "equity.csv",
        "trades.csv",
        "selections.csv",
        "equity.svg",
    ] {
        assert!(tmp.path().join("rep").join(f).exists(), "{f}");
    }
    let selections = fs::read_to_string(tmp.path().join("rep/selections.csv")).unwrap();
    assert_eq!(selections.lines().count(), 1, "header only");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("rep/report.json")).unwrap()).unwrap();
    assert_eq!(report["strategy"], "buy_and_hold");

    let again = run(tmp.path(), &["report", "rep"]);
    assert_eq!(code(&again), 0);
    let metrics = fs::read_to_string(tmp.path().join("rep/metrics.csv")).unwrap();
    assert!(metrics.starts_with("strategy,SR,SoR,CR,TR(%),MDD(%),Vol(%)"));
}

#[test]
fn train_writes_four_checkpoint_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "260");
    write_config(tmp.path(), "run.toml", "deltahedge", "");
    let out = run(tmp.path(), &["--config", "run.toml", "--out", "ck", "train"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "trading",
        "hedging_clipped_pg",
        "hedging_advantage_ac",
        "hedging_deterministic_ac",
    ] {
        assert!(tmp.path().join(format!("ck/{name}.json")).exists(), "{name}");
        assert!(tmp.path().join(format!("ck/{name}.bin")).exists(), "{name}");
    }
    let log = fs::read_to_string(tmp.path().join("ck/training_log.csv")).unwrap();
    assert!(log.starts_with("agent,step,episode,reward,SR"));
}

#[test]
fn compare_three_reports() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "260");
    for s in ["buy_and_hold", "kdj_rsi", "no_hedge"] {
        write_config(tmp.path(), &format!("{s}.toml"), s, "");
        let out = run(tmp.path(), &["--config", &format!("{s}.toml"), "--out", s, "backtest"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let out = run(
        tmp.path(),
        &[
            "--out",
            "cmp",
            "compare",
            "buy_and_hold",
            "kdj_rsi",
            "no_hedge",
            "--reference",
            "buy_and_hold",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(tmp.path().join("cmp/table.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert_eq!(table.lines().next(), Some("strategy,SR,SoR,CR,TR(%),MDD(%),Vol(%)"));
    let p = fs::read_to_string(tmp.path().join("cmp/p_values.csv")).unwrap();
    assert_eq!(p.lines().count(), 3);
}

#[test]
fn compare_identical_reports_gives_high_p() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "260");
    write_config(tmp.path(), "bh.toml", "buy_and_hold", "bootstrap_resamples = 1000\n");
    for dir in ["a", "b"] {
        assert_eq!(
            code(&run(tmp.path(), &["--config", "bh.toml", "--out", dir, "backtest"])),
            0
        );
    }
    let out = run(
        tmp.path(),
        &["--config", "bh.toml", "--out", "cmp", "compare", "a", "b"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("cmp/comparison.json")).unwrap()).unwrap();
    let pv = &json["p_values"][0];
    assert!(pv["mean_excess"].as_f64().unwrap() >= 0.9);
    assert_eq!(json["rows"][0]["metrics"], json["rows"][1]["metrics"]);
}

#[test]
fn compare_mismatched_dates_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path(), "260");
    write_config(tmp.path(), "a.toml", "buy_and_hold", "");
    write_config(tmp.path(), "b.toml", "buy_and_hold", "test_end = \"2016-09-30\"\n");
    assert_eq!(
        code(&run(tmp.path(), &["--config", "a.toml", "--out", "a", "backtest"])),
        0
    );
    assert_eq!(
        code(&run(tmp.path(), &["--config", "b.toml", "--out", "b", "backtest"])),
        0
    );
    assert_eq!(code(&run(tmp.path(), &["compare", "a", "b"])), 2);
}
