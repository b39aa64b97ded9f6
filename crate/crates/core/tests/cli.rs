use std::io::Write;
use std::process::Command;

use hankel_indet::cli;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("hankel-indet").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect();
    (header, rows)
}

fn moment_file(lines: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(lines.as_bytes()).unwrap();
    f
}

#[test]
fn lambda_csv_has_one_row_per_order_plus_extrapolation() {
    let (code, out, _) = run(&["lambda", "--family", "stieltjes-wigert", "--q", "0.5", "--N-max", "6"]);
    assert_eq!(code, 0);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["kind", "N", "value", "err", "precision_bits"]);
    assert_eq!(rows.len(), 8);
    assert!(rows[..7].iter().all(|r| r[0] == "lambda"));
    assert_eq!(rows[7][0], "extrapolated");
    let l0: f64 = rows[0][2].parse().unwrap();
    assert!((l0 - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn lambda_json_keeps_full_precision_strings() {
    let (code, out, _) =
        run(&["lambda", "--family", "stieltjes-wigert", "--q", "0.5", "--N-max", "5", "--output", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 6);
    let value = entries[3]["value"].as_str().unwrap();
    assert!(value.len() > 60, "{value}");
    assert!(v["extrapolated"]["s"].is_string());
}

#[test]
fn k_weight_is_an_alternative_to_q() {
    // k = 1/sqrt(2 ln 2) gives q = 1/2.
    let k = (1.0 / (2.0 * 2f64.ln()).sqrt()).to_string();
    let (code, out, _) = run(&["lambda", "--family", "stieltjes-wigert", "--k-weight", &k, "--N-max", "0"]);
    assert_eq!(code, 0);
    let (_, rows) = csv_rows(&out);
    let l0: f64 = rows[0][2].parse().unwrap();
    assert!((l0 - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn moment_file_family() {
    // Lebesgue measure on [0, 1], to 40 digits.
    let text: String = (0..9).map(|n| format!("{n} {:.40}\n", 1.0 / (n as f64 + 1.0))).collect();
    let f = moment_file(&format!("# precision-bits: 192\n{text}"));
    let (code, out, err) = run(&["lambda", "--family", "file", "--path", f.path().to_str().unwrap(), "--N-max", "3"]);
    assert_eq!(code, 0, "{err}");
    let (_, rows) = csv_rows(&out);
    let rows: Vec<_> = rows.into_iter().filter(|r| r[0] == "lambda").collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[4] == "192"));
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn indefinite_moments_exit_four() {
    let f = moment_file("0 1\n1 1\n2 0.5\n");
    let (code, _, err) = run(&["lambda", "--family", "file", "--path", f.path().to_str().unwrap(), "--N-max", "1"]);
    assert_eq!(code, 4, "{err}");
    assert!(err.contains("positive definite"));
}

#[test]
fn configuration_errors_exit_two() {
    assert_eq!(run(&["lambda", "--family", "stieltjes-wigert"]).0, 2);
    assert_eq!(run(&["lambda", "--family", "stieltjes-wigert", "--q", "1.5"]).0, 2);
    assert_eq!(run(&["rho0", "--family", "al-salam-carlitz", "--q", "0.5"]).0, 2);
    assert_eq!(run(&["rho0", "--family", "al-salam-carlitz", "--q", "0.5", "--a", "3"]).0, 2);
    assert_eq!(run(&["lambda", "--family", "file"]).0, 2);
    assert_eq!(run(&["lambda", "--family", "file", "--path", "/nonexistent/moments.txt"]).0, 2);
    assert_eq!(run(&["verify", "--suite", "no-such-suite"]).0, 2);
    assert_eq!(run(&["figure1", "--q-grid", "0.5:0.1"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["lambda", "--family", "stieltjes-wigert", "--q", "0.5", "--k-weight", "1"]).0, 2);
}

#[test]
fn unreachable_tolerance_exits_three() {
    let (code, _, err) = run(&["verify", "--tol", "1e-40", "--prec-bits", "64"]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("precision exhausted"));
}

#[test]
fn rho0_reports_both_routes_and_bound() {
    let (code, out, _) = run(&["rho0", "--family", "stieltjes-wigert", "--q", "0.5"]);
    assert_eq!(code, 0);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["family", "quantity", "value", "err"]);
    let quantities: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(quantities, ["rho0:sw-fast", "rho0:sw-direct", "route-gap", "l"]);
    let l: f64 = rows[3][2].parse().unwrap();
    assert!((0.3430..=0.3440).contains(&l));
}

#[test]
fn rho0_freud_includes_k0() {
    let (code, out, _) = run(&["rho0", "--family", "freud-quartic", "--output", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["routes_agree"], true);
    let k0: f64 = v["K0"].as_str().unwrap().parse().unwrap();
    assert!((k0 - 1.854074677301372).abs() < 1e-14);
}

#[test]
fn figure1_writes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig.csv");
    let (code, out, _) =
        run(&["figure1", "--q-grid", "0.4:0.1:0.6", "--N-max", "12", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let (header, rows) = csv_rows(&std::fs::read_to_string(&path).unwrap());
    assert_eq!(header, ["q", "N_max", "lambda_last", "s", "s_err", "l", "pct_error", "error"]);
    let qs: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(qs, ["0.4", "0.5", "0.6"]);
    for r in &rows {
        assert!(r[7].is_empty());
        assert!(r[6].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn verify_selected_suite_passes() {
    let (code, out, _) = run(&["verify", "--suite", "sw-dual-route", "--suite", "beta-closed-form", "--N-max", "8"]);
    assert_eq!(code, 0);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["suite", "check", "status", "detail"]);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[2] == "pass"));
}

#[test]
fn binary_honours_precision_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_hankel-indet"))
        .args(["lambda", "--family", "stieltjes-wigert", "--q", "0.5", "--N-max", "2"])
        .env("HANKEL_INDET_PREC_BITS", "320")
        .output()
        .unwrap();
    assert!(out.status.success());
    let (_, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert!(rows.iter().filter(|r| r[0] == "lambda").all(|r| r[4].parse::<u32>().unwrap() >= 320));

    let bad = Command::new(env!("CARGO_BIN_EXE_hankel-indet")).arg("--no-such-flag").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
