use std::fs;
use std::path::{Path, PathBuf};

use hsic_minimax::cli::{self, io, EstimateRecord, MinimaxRow, EXIT_CERTIFICATE, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use hsic_minimax::gaussian::make_adversarial_cov;
use hsic_minimax::lecam::Certificate;
use hsic_minimax::{BlockStructure, GaussianMeasure};
use nalgebra::DVector;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["hsic"];
    full.extend_from_slice(args);
    cli::run(full)
}

fn write_sample(dir: &Path, n: usize, rho: f64) -> PathBuf {
    let block = BlockStructure::pair(1, 1).unwrap();
    let g = GaussianMeasure::new(DVector::zeros(2), make_adversarial_cov(&block, rho).unwrap()).unwrap();
    let path = dir.join(format!("sample_{n}.csv"));
    let mut f = fs::File::create(&path).unwrap();
    io::write_matrix(&mut f, &g.sample(n, 3).unwrap()).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn estimate_json_has_report_shape() {
    let dir = TempDir::new().unwrap();
    let input = write_sample(dir.path(), 120, 0.6);
    let out = dir.path().join("est.json");
    let code = run(&[
        "estimate",
        "--input",
        s(&input),
        "--blocks",
        "1,1",
        "--est",
        "v",
        "--est",
        "u",
        "--est",
        "nystrom",
        "--output",
        s(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let v = json(&out);
    for key in ["config", "records", "certificates", "rate_fits", "lecam_value"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let records = v["records"].as_array().unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(records[0]["estimator"], "v");
    assert_eq!(records[0]["n"], 120);
    assert!(records[2]["value_hsic2"].is_null());
    // Landmarks default to min(n, 100), so Nyström is close to the V value.
    let hv = records[0]["value_hsic"].as_f64().unwrap();
    let hn = records[2]["value_hsic"].as_f64().unwrap();
    assert!((hv - hn).abs() < 0.05 * hv, "{hv} vs {hn}");
}

#[test]
fn estimate_csv_columns_and_thread_independence() {
    let dir = TempDir::new().unwrap();
    let input = write_sample(dir.path(), 60, 0.3);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let code = run(&[
            "estimate",
            "--input",
            s(&input),
            "--blocks",
            "1,1",
            "--est",
            "v",
            "--est",
            "u",
            "--format",
            "csv",
            "--threads",
            threads,
            "--output",
            s(out),
        ]);
        assert_eq!(code, EXIT_OK);
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "estimator,value_hsic2,value_hsic,n,d,blocks,gamma,seed"
    );
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let rows: Vec<EstimateRecord> = csv::Reader::from_path(&a)
        .unwrap()
        .deserialize()
        .map(|r| r.unwrap())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].blocks, "1,1");
}

#[test]
fn estimate_header_flag_skips_first_line() {
    let dir = TempDir::new().unwrap();
    let input = write_sample(dir.path(), 30, 0.0);
    let with_header = dir.path().join("h.csv");
    fs::write(&with_header, format!("x,y\n{}", fs::read_to_string(&input).unwrap())).unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert_eq!(
        run(&["estimate", "--input", s(&input), "--blocks", "1,1", "--output", s(&a)]),
        EXIT_OK
    );
    assert_eq!(
        run(&[
            "estimate",
            "--input",
            s(&with_header),
            "--header",
            "--blocks",
            "1,1",
            "--output",
            s(&b)
        ]),
        EXIT_OK
    );
    assert_eq!(json(&a)["records"], json(&b)["records"]);
    assert_eq!(
        run(&[
            "estimate",
            "--input",
            s(&with_header),
            "--blocks",
            "1,1",
            "--output",
            s(&b)
        ]),
        EXIT_DATA
    );
}

#[test]
fn estimate_error_codes() {
    let dir = TempDir::new().unwrap();
    let tiny = write_sample(dir.path(), 3, 0.2);
    assert_eq!(
        run(&["estimate", "--input", s(&tiny), "--blocks", "1,1", "--est", "u"]),
        EXIT_USAGE
    );
    let input = write_sample(dir.path(), 20, 0.2);
    assert_eq!(run(&["estimate", "--input", s(&input), "--blocks", "1,2"]), EXIT_USAGE);
    assert_eq!(
        run(&["estimate", "--input", s(&input), "--blocks", "1,1", "--gamma", "0"]),
        EXIT_USAGE
    );
    let broken = dir.path().join("broken.csv");
    fs::write(&broken, "0.1,0.2\n0.3,abc\n").unwrap();
    assert_eq!(run(&["estimate", "--input", s(&broken), "--blocks", "1,1"]), EXIT_DATA);
    let missing = dir.path().join("missing.csv");
    assert_eq!(run(&["estimate", "--input", s(&missing), "--blocks", "1,1"]), EXIT_DATA);
    assert_eq!(run(&["estimate", "--blocks", "1,1"]), EXIT_USAGE);
}

#[test]
fn analytic_reports_closed_form() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("a.json");
    assert_eq!(
        run(&[
            "analytic",
            "--blocks",
            "1,1",
            "--gamma",
            "1",
            "--rho",
            "0.6",
            "--output",
            s(&out)
        ]),
        EXIT_OK
    );
    let v = json(&out);
    let h2 = v["records"][0]["hsic2"].as_f64().unwrap();
    assert!((h2 - 0.016_615_999_620_215_65).abs() < 1e-15);
    assert_eq!(run(&["analytic", "--blocks", "1,1", "--rho", "-1.5"]), EXIT_DATA);
    let cov = dir.path().join("cov.csv");
    fs::write(&cov, "1,2\n2,1\n").unwrap();
    assert_eq!(run(&["analytic", "--blocks", "1,1", "--input", s(&cov)]), EXIT_DATA);
}

#[test]
fn minimax_csv_writes_rows_and_summary() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("mm.csv");
    let code = run(&[
        "minimax",
        "--n-grid",
        "16,32,64",
        "--reps",
        "10",
        "--format",
        "csv",
        "--output",
        s(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let rows: Vec<MinimaxRow> = csv::Reader::from_path(&out)
        .unwrap()
        .deserialize()
        .map(|r| r.unwrap())
        .collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.slope.is_some()));
    let summary = json(&cli::summary_path(&out));
    assert_eq!(summary["config"]["summary"]["all_pass"], true);
    assert!((summary["lecam_value"].as_f64().unwrap() - 0.104_715_292_478_952_56).abs() < 1e-12);
}

#[test]
fn minimax_json_is_seed_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        let code = run(&[
            "minimax",
            "--n-grid",
            "8..10",
            "--reps",
            "6",
            "--seed",
            "4",
            "--threads",
            threads,
            "--output",
            s(out),
        ]);
        assert_eq!(code, EXIT_OK);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(json(&a)["records"].as_array().unwrap().len(), 3);
}

#[test]
fn minimax_usage_errors() {
    assert_eq!(run(&["minimax", "--n-grid", "2"]), EXIT_USAGE);
    assert_eq!(run(&["minimax", "--n-grid", "8,9,x"]), EXIT_USAGE);
    assert_eq!(
        run(&["minimax", "--n-grid", "8..10", "--gamma", "1", "--gamma", "2"]),
        EXIT_USAGE
    );
}

#[test]
fn certify_passes_and_excludes_small_n() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("c.json");
    let code = run(&[
        "certify",
        "--blocks",
        "1,1",
        "--n-grid",
        "1..50",
        "--spectral-samples",
        "20000",
        "--output",
        s(&out),
    ]);
    assert_eq!(code, EXIT_OK);
    let v = json(&out);
    assert_eq!(v["config"]["excluded"], serde_json::json!([1]));
    assert_eq!(v["records"].as_array().unwrap().len(), 49);
    assert!(v["records"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["kl_verdict"] == "PASS" && r["gap_verdict"] == "PASS"));
}

#[test]
fn violated_certificate_maps_to_exit_1() {
    let ok = Certificate {
        name: "kl_bound <= 5/4".into(),
        n: 4,
        lhs: 0.79,
        rhs: 1.25,
        pass: true,
    };
    assert!(cli::check_certificates(std::slice::from_ref(&ok)).is_ok());
    let bad = Certificate {
        name: "hsic gap >= 2c/sqrt(n)".into(),
        n: 9,
        lhs: 0.01,
        rhs: 0.02,
        pass: false,
    };
    let err = cli::check_certificates(&[ok, bad]).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_CERTIFICATE);
    assert!(
        err.message().contains("n = 9") || err.message().contains("hsic gap"),
        "{}",
        err.message()
    );
}
