use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirdepth")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "dirdepth {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Dir(TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }
}

fn simulate(dir: &Dir, name: &str, args: &[&str]) -> PathBuf {
    let out = dir.path(name);
    let mut all = vec!["simulate", "--out", s(&out)];
    all.extend_from_slice(args);
    ok(&all);
    out
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn median_of_identical_points() {
    let dir = Dir::new();
    let data = dir.write("pole.csv", "# x,y,z\n0,0,1\n0,0,1\n0,0,1\n");
    let out = dir.path("median.json");
    ok(&["median", s(&data), "--out", s(&out)]);
    let doc = json(&out);
    assert_eq!(doc["command"], "median");
    let mu: Vec<f64> = doc["mu_hat"].as_array().unwrap().iter().map(f).collect();
    assert_eq!(mu, vec![0.0, 0.0, 1.0]);
}

#[test]
fn fold_gives_non_negative_projections() {
    let dir = Dir::new();
    let data = dir.write("axial.csv", "0,0.6,0.8\n0,-0.6,-0.8\n0.6,0,-0.8\n-0.28,0.96,0\n0.6,0,0.8\n");
    let out = dir.path("median.json");
    ok(&["median", s(&data), "--fold", "0,0,1", "--out", s(&out)]);
    let doc = json(&out);
    assert!(doc["projections"].as_array().unwrap().iter().all(|p| f(p) >= 0.0));
}

#[test]
fn vmf_median_near_generator() {
    let dir = Dir::new();
    let data = simulate(&dir, "vmf.csv", &["--dist", "vmf", "--kappa", "7", "--n", "2000", "--seed", "3"]);
    let out = dir.path("median.json");
    ok(&["median", s(&data), "--out", s(&out)]);
    let z = f(&json(&out)["mu_hat"][2]);
    assert!(z.clamp(-1.0, 1.0).acos() < 0.05);
}

#[test]
fn analyze_document_schema() {
    let dir = Dir::new();
    let data = simulate(&dir, "kent.csv", &["--dist", "kent", "--kappa", "12", "--beta", "5", "--n", "200", "--seed", "4"]);
    let out = dir.path("analyze.json");
    ok(&["analyze", s(&data), "--contour-points", "50", "--out", s(&out)]);
    let doc = json(&out);
    for key in [
        "command", "parameters", "n", "mu_hat", "objective", "projections", "transform", "quantiles",
        "ellipticity", "depths", "tests", "contours", "trim",
    ] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert_eq!(doc["n"], 200);
    let quantiles = doc["quantiles"].as_array().unwrap();
    assert_eq!(quantiles.len(), 3);
    for q in quantiles {
        let (c, minor, major) = (f(&q["c"]), f(&q["minor"]), f(&q["major"]));
        assert!(major <= minor && (f(&q["c_g"]) - minor).abs() < 1e-9);
        assert!(c > major - 0.05 && c < minor + 0.05);
    }
    let contours = doc["contours"].as_array().unwrap();
    assert_eq!(contours.len(), 6);
    for c in contours {
        let pts = c["points"].as_array().unwrap();
        assert_eq!(pts.len(), 51);
        assert_eq!(pts.first(), pts.last());
        assert!(pts.iter().all(|p| p.as_array().unwrap().len() == 3));
    }
    assert_eq!(doc["depths"]["amhd"].as_array().unwrap().len(), 200);
    assert_eq!(doc["depths"]["emhd"].as_array().unwrap().len(), 200);
    assert!(f(&doc["ellipticity"]["eigenvalue_ratio"]) > 1.5);
    let text = std::fs::read_to_string(&out).unwrap();
    // Floats carry 17 significant digits.
    let mantissa = text.split("\"objective\": ").nth(1).unwrap().split('e').next().unwrap();
    assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 17, "{mantissa}");
}

#[test]
fn isotropic_data_has_coinciding_semiaxes() {
    let dir = Dir::new();
    // Eight points on a small circle: exactly isotropic tangent covariance.
    let rows: String = (0..8)
        .map(|k| {
            let phi = k as f64 * std::f64::consts::FRAC_PI_4;
            let t = 0.3f64;
            format!("{:.17e},{:.17e},{:.17e}\n", t.sin() * phi.cos(), t.sin() * phi.sin(), t.cos())
        })
        .collect::<String>()
        + "0,0,1\n";
    let data = dir.write("iso.csv", &rows);
    let out = dir.path("analyze.json");
    ok(&["analyze", s(&data), "--out", s(&out)]);
    for q in json(&out)["quantiles"].as_array().unwrap() {
        let (c_g, minor, major) = (f(&q["c_g"]), f(&q["minor"]), f(&q["major"]));
        assert!((minor - c_g).abs() < 1e-9 && (major - c_g).abs() < 1e-9);
    }
}

#[test]
fn trim_counts_and_kept_file() {
    let dir = Dir::new();
    let data = simulate(&dir, "vmf.csv", &["--dist", "vmf", "--kappa", "9", "--n", "598", "--seed", "5"]);
    let out = dir.path("trim.json");
    let kept = dir.path("kept.csv");
    ok(&["trim", s(&data), "--tau", "0.15", "--kept", s(&kept), "--out", s(&out)]);
    let doc = json(&out);
    let removed = doc["trim"]["removed"].as_array().unwrap().len();
    assert!(removed.abs_diff(90) <= 1, "{removed}");
    let kept_rows = std::fs::read_to_string(&kept).unwrap().lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(kept_rows + removed, 598);

    ok(&["trim", s(&data), "--tau", "0.0001", "--kept", s(&kept), "--out", s(&out)]);
    assert!(json(&out)["trim"]["removed"].as_array().unwrap().is_empty());
}

#[test]
fn elliptical_trim_differs_from_circular() {
    let dir = Dir::new();
    let data = simulate(&dir, "kent.csv", &["--dist", "kent", "--kappa", "12", "--beta", "5", "--n", "300", "--seed", "6"]);
    let kept = dir.path("kept.csv");
    let mut removed = Vec::new();
    for kind in ["circular", "elliptical"] {
        let out = dir.path(&format!("{kind}.json"));
        ok(&["trim", s(&data), "--tau", "0.25", "--kind", kind, "--kept", s(&kept), "--out", s(&out)]);
        removed.push(json(&out)["trim"]["removed"].clone());
    }
    assert_ne!(removed[0], removed[1]);
}

#[test]
fn test_command_reports() {
    let dir = Dir::new();
    let kent = simulate(&dir, "kent.csv", &["--dist", "kent", "--kappa", "12", "--beta", "5", "--n", "400", "--seed", "7"]);
    let out = dir.path("test.json");
    ok(&["test", s(&kent), "--watson", "--transformed", "--out", s(&out)]);
    let tests = json(&out)["tests"].clone();
    assert_eq!(tests[0]["method"], "watson_u2");
    assert!(f(&tests[0]["p_value"]) < 0.01);
    assert!(f(&tests[1]["p_value"]) > 0.01);

    let vmf = simulate(&dir, "vmf.csv", &["--dist", "vmf", "--kappa", "7", "--n", "100000", "--seed", "8"]);
    ok(&["test", s(&vmf), "--gof", "7", "--exptail", "7", "--pole", "0,0,1", "--out", s(&out)]);
    let tests = json(&out)["tests"].clone();
    assert_eq!(tests[0]["method"], "gof_quartile");
    assert!(f(&tests[0]["p_value"]) > 0.05);
    assert_eq!(tests[1]["method"], "exp_tail_ks");
    assert_eq!(tests[1]["approximate"], true);

    let uniform = simulate(&dir, "unif.csv", &["--dist", "uniform", "--n", "500", "--seed", "9"]);
    ok(&["test", s(&uniform), "--watson", "--pole", "0,0,1", "--out", s(&out)]);
    assert!(f(&json(&out)["tests"][0]["p_value"]) > 0.05);
}

#[test]
fn simulate_analyze_trim_matrix() {
    let dir = Dir::new();
    let matrix: [&[&str]; 6] = [
        &["--dist", "vmf", "--kappa", "3"],
        &["--dist", "vmf", "--kappa", "12"],
        &["--dist", "kent", "--kappa", "5", "--beta", "2"],
        &["--dist", "kent", "--kappa", "12", "--beta", "5"],
        &["--dist", "kent", "--kappa", "10", "--beta", "0"],
        &["--dist", "vmf", "--kappa", "8", "--dim", "4"],
    ];
    for (i, params) in matrix.iter().enumerate() {
        let mut args = params.to_vec();
        args.extend(["--n", "150", "--seed", "10"]);
        let data = simulate(&dir, &format!("d{i}.csv"), &args);
        let out = dir.path("out.json");
        ok(&["analyze", s(&data), "--out", s(&out)]);
        for kind in ["circular", "elliptical"] {
            ok(&["trim", s(&data), "--kind", kind, "--kept", s(&dir.path("kept.csv")), "--out", s(&out)]);
            ok(&["analyze", s(&dir.path("kept.csv")), "--out", s(&out)]);
        }
    }
}

#[test]
fn simulate_is_reproducible() {
    let dir = Dir::new();
    let a = simulate(&dir, "a.csv", &["--dist", "uniform", "--n", "5", "--seed", "1"]);
    let b = simulate(&dir, "b.csv", &["--dist", "uniform", "--n", "5", "--seed", "1"]);
    let c = simulate(&dir, "c.csv", &["--dist", "uniform", "--n", "5", "--seed", "2"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn replicate_writes_json_and_csv() {
    let dir = Dir::new();
    let config = dir.write("design.json", r#"{"id": "l1", "replications": 4}"#);
    let prefix = dir.path("l1");
    ok(&["replicate", s(&config), "--out", s(&prefix), "--threads", "2"]);
    let report = json(&dir.path("l1.json"));
    assert_eq!(report["records"].as_array().unwrap().len(), 4);
    let csv = std::fs::read_to_string(dir.path("l1.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    for tau in ["0.25", "0.5", "0.75"] {
        for col in ["c", "c_g", "minor", "major"] {
            assert!(header.split(',').any(|h| h == format!("{col}_{tau}")));
        }
    }
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn exit_codes() {
    let dir = Dir::new();
    let code = |args: &[&str]| run(args).status.code().unwrap();

    let bad = dir.write("bad.csv", "0,0,1\n0,0,3\n");
    let out = run(&["median", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(code(&["simulate", "--dist", "kent", "--kappa", "4", "--beta", "3", "--n", "10"]), 2);
    assert_eq!(code(&["replicate", s(&dir.write("c.cfg", "id = l7\n")), "--out", s(&dir.path("x"))]), 2);

    let antipodal = dir.write("anti.csv", "0,0,1\n0,0,-1\n");
    assert_eq!(code(&["median", s(&antipodal)]), 3);

    // All points on one great circle through the median: flat tangent covariance.
    let flat = dir.write("flat.csv", "0,0,1\n0.6,0,0.8\n-0.6,0,0.8\n0.28,0,0.96\n-0.28,0,0.96\n");
    assert_eq!(code(&["analyze", s(&flat), "--kind", "elliptical"]), 4);

    let pole = dir.write("pole.csv", &"0,0,1\n".repeat(10));
    assert_eq!(code(&["test", s(&pole), "--watson"]), 5);
    let few = dir.write("few.csv", "0.6,0,0.8\n-0.6,0,0.8\n0,0.6,0.8\n");
    assert_eq!(code(&["test", s(&few), "--watson", "--pole", "0,0,1"]), 5);
}
