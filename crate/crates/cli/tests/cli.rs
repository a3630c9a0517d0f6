use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const REFERENCE: [&str; 12] = [
    "--u", "2", "--c", "1", "--r-low", "0.8", "--r-high", "0.9", "--k", "1.4", "--n", "100",
];

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repricing"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn with_params<'a>(sub: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![sub];
    v.extend(REFERENCE);
    v.extend(extra);
    v
}

#[test]
fn equilibrium_csv_spans_both_supports() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &with_params("equilibrium", &["--format", "csv"]),
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.path().join("cdf.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let prices: Vec<f64> = rows
        .records()
        .map(|r| r.unwrap()[0].parse().unwrap())
        .collect();
    assert!((prices[0] - 1.323077).abs() < 5e-7);
    assert!((prices[prices.len() - 1] - 1.8).abs() < 1e-12);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["subcommand"], "equilibrium");
    for file in manifest["outputs"].as_array().unwrap() {
        assert!(dir.path().join(file["path"].as_str().unwrap()).exists());
    }
}

#[test]
fn verify_passes_for_competition_game() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &with_params("verify", &["--model", "competition"]),
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert!(report.to_string().contains("\"certified\":true"));
}

#[test]
fn verify_exits_three_on_a_bad_law() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&with_params("verify", &["--move-mass", "1.46"]), dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invalid_parameters_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = with_params("equilibrium", &[]);
    args[10] = "2.5"; // k above u
    assert_eq!(run(&args, dir.path()).status.code(), Some(2));
}

#[test]
fn missing_params_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = run(
        &["threshold", "--params", missing.to_str().unwrap()],
        &dir.path().join("o"),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_without_rating_column_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    fs::write(
        &input,
        "category,product,seller_id,sales,comments,price\ntv,A,s,1,1,9\n",
    )
    .unwrap();
    let out = run(
        &["analyze", "--input", input.to_str().unwrap()],
        &dir.path().join("o"),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn params_file_and_flags_agree() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.json");
    fs::write(
        &params,
        r#"{"u": 2, "c": 1, "r_L": 0.8, "r_H": 0.9, "k": 1.4}"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(
        run(&["threshold", "--params", params.to_str().unwrap()], &a)
            .status
            .success()
    );
    assert!(run(&with_params("threshold", &[]), &b).status.success());
    assert_eq!(
        fs::read(a.join("threshold.json")).unwrap(),
        fs::read(b.join("threshold.json")).unwrap()
    );
}
