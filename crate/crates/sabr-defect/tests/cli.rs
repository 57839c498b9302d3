//! End-to-end tests of the command-line binary: exit codes, output files,
//! and determinism of the batch artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sabr_defect::market::{RateCurvePoint, Tenor};
use sabr_defect::pipeline::{quote_rows_to_csv, synth_from_spec, SynthSpecRow};
use sabr_defect::sabr::SabrParams;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sabr-defect"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

/// Two clean synthetic rows the pipeline can calibrate quickly.
fn write_quotes(dir: &Path) -> PathBuf {
    let spec = [
        SynthSpecRow {
            date: "2019-03-04".parse().unwrap(),
            tenor: "6M".parse::<Tenor>().unwrap(),
            expiry: None,
            spot: 1.10,
            rates: RateCurvePoint { r_dom: 0.02, r_for: 0.0 },
            truth: SabrParams::new(0.09, 0.8, 0.30).unwrap(),
        },
        SynthSpecRow {
            date: "2019-06-03".parse().unwrap(),
            tenor: "6M".parse::<Tenor>().unwrap(),
            expiry: None,
            spot: 1.12,
            rates: RateCurvePoint { r_dom: 0.02, r_for: 0.0 },
            truth: SabrParams::new(0.11, 0.9, 0.55).unwrap(),
        },
    ];
    let rows = synth_from_spec(&spec, 0.001, [0.010, 0.005, 0.003, 0.005, 0.010], 7).unwrap();
    let path = dir.join("quotes.csv");
    fs::write(&path, quote_rows_to_csv(&rows).unwrap()).unwrap();
    path
}

// --- fever ---

#[test]
fn fever_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let quotes = write_quotes(dir.path());
    let out = dir.path().join("out");
    let output = run(&[
        "fever",
        "--quotes",
        quotes.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--samples",
        "2000",
    ]);
    assert_exit(&output, 0);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("wrote 2 of 2 slices"), "{stdout}");
    assert!(out.join("fever_curve.csv").exists());
    assert!(out.join("posterior_2019-03-04.json").exists());
    assert!(out.join("posterior_2019-06-03.json").exists());
    assert!(out.join("run_report.json").exists());
}

#[test]
fn fever_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let quotes = write_quotes(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let output = run(&[
            "fever",
            "--quotes",
            quotes.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--samples",
            "2000",
        ]);
        assert_exit(&output, 0);
    }
    for name in ["fever_curve.csv", "posterior_2019-03-04.json", "run_report.json"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn fever_missing_quotes_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(&[
        "fever",
        "--quotes",
        dir.path().join("nope.csv").to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_exit(&output, 1);
}

#[test]
fn fever_unmatched_schedule_entry_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let quotes = write_quotes(dir.path());
    let schedule = dir.path().join("schedule.csv");
    fs::write(&schedule, "date,tenor\n2019-03-04,6M\n2030-01-01,1M\n").unwrap();
    let output = run(&[
        "fever",
        "--quotes",
        quotes.to_str().unwrap(),
        "--schedule",
        schedule.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
        "--samples",
        "2000",
    ]);
    assert_exit(&output, 1);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("no matching quote row"), "{stderr}");
}

#[test]
fn fever_malformed_number_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let quotes = write_quotes(dir.path());
    let mut text = fs::read_to_string(&quotes).unwrap();
    text = text.replacen("0.0", "abc", 1);
    fs::write(&quotes, text).unwrap();
    let output = run(&[
        "fever",
        "--quotes",
        quotes.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_exit(&output, 2);
}

#[test]
fn fever_crossed_quote_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let quotes = dir.path().join("quotes.csv");
    fs::write(
        &quotes,
        "date,tenor,T,spot,r_dom,r_for,\
         vol_10p_bid,vol_10p_ask,vol_25p_bid,vol_25p_ask,vol_atm_bid,vol_atm_ask,\
         vol_25c_bid,vol_25c_ask,vol_10c_bid,vol_10c_ask\n\
         2019-03-04,6M,,1.0,0,0,0.11,0.10,0.095,0.10,0.09,0.095,0.095,0.10,0.10,0.11\n",
    )
    .unwrap();
    let output = run(&[
        "fever",
        "--quotes",
        quotes.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_exit(&output, 2);
}

#[test]
fn fever_partial_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let quotes = write_quotes(dir.path());
    // Append a parseable row whose V-shaped smile no parameter point can
    // match inside hair-thin bands.
    let mut text = fs::read_to_string(&quotes).unwrap();
    text.push_str(
        "2019-07-01,6M,,1.0,0,0,0.30,0.3000001,0.10,0.1000001,0.10,0.1000001,0.10,0.1000001,0.30,0.3000001\n",
    );
    fs::write(&quotes, text).unwrap();
    let out = dir.path().join("out");
    let output = run(&[
        "fever",
        "--quotes",
        quotes.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--samples",
        "2000",
    ]);
    assert_exit(&output, 3);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("FAILED"), "{stdout}");
    // The good slices still produced output.
    let csv_text = fs::read_to_string(out.join("fever_curve.csv")).unwrap();
    assert_eq!(csv_text.lines().count(), 3);
}

#[test]
fn fever_empty_quote_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let quotes = dir.path().join("quotes.csv");
    fs::write(
        &quotes,
        "date,tenor,T,spot,r_dom,r_for,\
         vol_10p_bid,vol_10p_ask,vol_25p_bid,vol_25p_ask,vol_atm_bid,vol_atm_ask,\
         vol_25c_bid,vol_25c_ask,vol_10c_bid,vol_10c_ask\n",
    )
    .unwrap();
    let output = run(&[
        "fever",
        "--quotes",
        quotes.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_exit(&output, 1);
}

// --- slice ---

#[test]
fn slice_prints_posterior_json() {
    let dir = tempfile::tempdir().unwrap();
    let quotes = write_quotes(dir.path());
    let output = run(&[
        "slice",
        "--quotes",
        quotes.to_str().unwrap(),
        "--date",
        "2019-06-03",
        "--tenor",
        "6M",
        "--samples",
        "2000",
    ]);
    assert_exit(&output, 0);
    let v: serde_json::Value =
        serde_json::from_slice(&output.stdout).expect("stdout is a JSON document");
    assert_eq!(v["date"], "2019-06-03");
    assert_eq!(v["tenor"], "6M");
    assert!(v["map"]["rho"].as_f64().unwrap() > 0.0);
    assert!(v["mean_defect"].as_f64().unwrap() > 0.0);
}

#[test]
fn slice_unknown_date_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let quotes = write_quotes(dir.path());
    let output = run(&[
        "slice",
        "--quotes",
        quotes.to_str().unwrap(),
        "--date",
        "2028-01-01",
        "--tenor",
        "6M",
    ]);
    assert_exit(&output, 1);
}

// --- synth ---

#[test]
fn synth_generates_readable_quotes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.csv");
    fs::write(
        &spec,
        "date,tenor,T,spot,r_dom,r_for,alpha,nu,rho\n2019-01-02,1Y,,1.0,0.02,0.01,0.1,0.9,0.45\n",
    )
    .unwrap();
    let out = dir.path().join("quotes.csv");
    let output = run(&[
        "synth",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert_exit(&output, 0);
    let rows = sabr_defect::market::read_quote_rows(&out).unwrap();
    assert_eq!(rows.len(), 1);
}

#[test]
fn synth_bad_spreads_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.csv");
    fs::write(
        &spec,
        "date,tenor,T,spot,r_dom,r_for,alpha,nu,rho\n2019-01-02,1Y,,1.0,0.02,0.01,0.1,0.9,0.45\n",
    )
    .unwrap();
    let output = run(&[
        "synth",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        dir.path().join("q.csv").to_str().unwrap(),
        "--spreads",
        "1.0,0.5",
    ]);
    assert_exit(&output, 2);
}

// --- validate ---

#[test]
fn validate_passes_with_reduced_paths() {
    let output = run(&["validate", "--paths", "4000"]);
    assert_exit(&output, 0);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("all checks passed"), "{stdout}");
    assert_eq!(stdout.matches("PASS").count(), 5, "{stdout}");
}
