use std::path::{Path, PathBuf};
use std::process::Command;

use gridopt::{Design, DesignRecord};
use gridopt_cli::{main_with, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["gridopt"];
    full.extend_from_slice(args);
    let code = main_with(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn field<'a>(line: &'a str, key: &str) -> &'a str {
    let mut it = line.split_whitespace();
    while let Some(w) = it.next() {
        if w == key {
            return it.next().unwrap();
        }
    }
    panic!("no `{key}` in `{line}`")
}

fn summary(out: &str) -> &str {
    out.lines().find(|l| l.starts_with("problem ")).expect("summary line")
}

const LINEAR_MODEL: &str = "k = 1\nm = 2\nfamily = linear\nfactor 1: {-1, 0, 1}\nh1 = 1\nh2 = x1\n";

#[test]
fn list_shows_the_ten_problems() {
    let (code, out, _) = run(&["list"]);
    assert_eq!(code, EXIT_OK);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 10);
    assert!(rows[0].contains("5001 × 1001"));
    assert!(rows[5].contains("4001^5") && rows[5].contains("1.03e18"));
    let p9: Vec<&str> = rows[8].split_whitespace().collect();
    assert_eq!(&p9[..3], &["9", "10", "11"]);
}

#[test]
fn toy_model_file_gives_the_known_optimum() {
    let path = models_dir().join("toy_quadratic.model");
    let (code, out, err) = run(&["run", "--model", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let exact = (4.0f64 / 27.0).cbrt();
    assert_eq!(field(summary(&out), "phi"), gridopt_cli::sig6(exact));
    let json: String = out.lines().skip(1).take_while(|l| !l.starts_with("problem ")).collect::<Vec<_>>().join("\n");
    let rec: DesignRecord = serde_json::from_str(&json).unwrap();
    assert!((rec.criterion - exact).abs() <= 1e-6 * exact);
    assert_eq!(rec.m, 3);
    assert_eq!(rec.points, vec![vec![-1.0], vec![0.0], vec![1.0]]);
}

#[test]
fn csv_output_round_trips_and_matches_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("p3.csv");
    let (code, out, err) = run(&[
        "run", "--problem", "3", "--seed", "7", "--format", "csv", "--out", out_path.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let design = Design::from_csv(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("p3.report.json")).unwrap()).unwrap();
    let rec: DesignRecord = serde_json::from_value(report["final"]["design"].clone()).unwrap();
    let reported = rec.into_design().unwrap();
    assert_eq!(design.points(), reported.points());
    for (a, b) in design.weights().iter().zip(reported.weights()) {
        assert!((a - b).abs() < 1e-12);
    }
    let p = gridopt::benchmark(3).unwrap();
    let phi = gridopt::design_criterion(&design, &p.model).unwrap();
    let summary_phi: f64 = field(summary(&out), "phi").parse().unwrap();
    let run_phi = report["final"]["phi"].as_f64().unwrap();
    assert!((phi - run_phi).abs() <= 1e-9 * run_phi);
    assert_eq!(gridopt_cli::sig6(phi), gridopt_cli::sig6(summary_phi));
    assert_eq!(field(summary(&out), "phi"), "0.221567");
    // The optimum of this additive model is the product of the one-factor optima.
    assert!(design.len() <= 7 * 7);
}

#[test]
fn repeats_write_one_file_pair_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("toy.json");
    let model = models_dir().join("toy_quadratic.model");
    let (code, out, err) = run(&[
        "run", "--model", model.to_str().unwrap(), "--repeat", "3", "--seed", "5", "--format", "json",
        "--out", out_path.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    for i in 1..=3 {
        assert!(dir.path().join(format!("toy-run{i}.json")).exists());
        assert!(dir.path().join(format!("toy-run{i}.report.json")).exists());
    }
    let seeds: Vec<&str> = out.lines().filter(|l| l.starts_with("run ")).map(|l| field(l, "seed")).collect();
    assert_eq!(seeds, vec!["5", "6", "7"]);
    assert_eq!(field(summary(&out), "consistent"), "yes");
    assert_eq!(field(summary(&out), "runs"), "3");
}

#[test]
fn verify_an_exhaustively_probed_design() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("line.model");
    std::fs::write(&model, LINEAR_MODEL).unwrap();
    let design = dir.path().join("d.csv");
    std::fs::write(&design, "i,x1,weight\n1,-1,0.5\n2,1,0.5\n").unwrap();
    let (code, out, err) = run(&["verify", design.to_str().unwrap(), "--model", model.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(out.lines().find(|l| l.starts_with("bound")).unwrap(), "bound m/max d 1.000000000");
    assert!(out.contains("probed points only"));
}

#[test]
fn verify_a_known_problem_six_design() {
    let (code, out, err) = run(&["verify", &data("problem06_design.csv"), "--problem", "6", "--probes", "500"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let bound: f64 = out.lines().find(|l| l.starts_with("bound")).unwrap()[14..].trim().parse().unwrap();
    assert!(bound >= 0.99999, "{bound}");
    assert!(bound <= 1.0 + 1e-9);
}

#[test]
fn verify_flags_a_suboptimal_design() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("corners.json");
    let levels = [-1.0, -0.5, 0.5, 1.0];
    let points: Vec<Vec<f64>> = levels.iter().flat_map(|&a| levels.iter().map(move |&b| vec![a, b])).collect();
    let corners = DesignRecord {
        weights: vec![1.0 / 16.0; 16],
        points,
        criterion: 0.0,
        m: 7,
    };
    std::fs::write(&design, serde_json::to_string(&corners).unwrap()).unwrap();
    let (code, out, err) = run(&["verify", design.to_str().unwrap(), "--problem", "3", "--probes", "50"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let max_d: f64 = out.lines().find(|l| l.starts_with("max d")).unwrap()[6..].trim().parse().unwrap();
    assert!(max_d > 7.0);
    let bound: f64 = out.lines().find(|l| l.starts_with("bound")).unwrap()[14..].trim().parse().unwrap();
    assert!(bound < 1.0);
}

#[test]
fn usage_errors_exit_with_one() {
    let model = models_dir().join("toy_quadratic.model");
    let m = model.to_str().unwrap();
    for args in [
        vec!["run"],
        vec!["run", "--problem", "2", "--model", m],
        vec!["run", "--problem", "0"],
        vec!["run", "--problem", "1", "--format", "xml"],
        vec!["run", "--problem", "1", "--repeat", "0"],
        vec!["run", "--model", m, "--eff-opt", "1.5"],
        vec!["run", "--model", "/nonexistent/file.model"],
        vec!["frobnicate"],
    ] {
        let (code, _, err) = run(&args);
        assert_eq!(code, EXIT_USAGE, "{args:?}");
        assert!(!err.is_empty());
    }
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("verify"));
}

#[test]
fn off_grid_and_singular_designs() {
    let dir = tempfile::tempdir().unwrap();
    let model = models_dir().join("toy_quadratic.model");
    let m = model.to_str().unwrap();
    let off = dir.path().join("off.csv");
    std::fs::write(&off, "i,x1,weight\n1,-1,0.5\n2,0.5,0.5\n").unwrap();
    let (code, _, err) = run(&["verify", off.to_str().unwrap(), "--model", m]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("not a level"), "{err}");
    let singular = dir.path().join("one.csv");
    std::fs::write(&singular, "i,x1,weight\n1,1,1\n").unwrap();
    let (code, _, err) = run(&["verify", singular.to_str().unwrap(), "--model", m]);
    assert_eq!(code, EXIT_NUMERICAL, "{err}");
}

#[test]
fn binary_honours_the_thread_cap_and_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_gridopt");
    let ok = Command::new(bin).args(["list"]).env("GRIDOPT_THREADS", "1").output().unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    let bad = Command::new(bin).args(["list"]).env("GRIDOPT_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
    let usage = Command::new(bin).args(["run"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(EXIT_USAGE));
}

#[test]
fn table_format_lists_index_coordinates_and_weight() {
    let model = models_dir().join("toy_quadratic.model");
    let (code, out, _) = run(&["run", "--model", model.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let header: Vec<&str> = out.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(header, vec!["i", "x_i1", "weight"]);
    assert!(out.lines().nth(2).unwrap().ends_with("0.333333"));
}
