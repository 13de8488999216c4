//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input error, 3 estimator failure, 4 rank
//! deficiency, 5 test precondition failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::depth::{
    amhd, circular_contour, elliptical_contour, emhd_with, transformed_projections, trim, ContourPolyline,
    DepthReference, EmpiricalCdf, QuantileKind, QuantileSummary,
};
use crate::distributions::{kent_sample, uniform_sphere_sample, vmf_sample, KentParams, ProjectionLaw, VmfParams};
use crate::error::Error;
use crate::estimation::{fisher_median_fit, fit_transform, hemisphere_fold, transform_sample, MahalanobisTransform};
use crate::hypothesis::{exp_tail_check, gof_quartile_test, longitudes, watson_u2, TestReport};
use crate::io::{
    parse_config, read_dataset, to_json_string, write_dataset, write_dataset_file, write_text_file, DatasetFormat,
};
use crate::replication::{design_csv, experiment_from_config, gof_csv, run_design, run_gof_workflow, ExperimentConfig};
use crate::rng::random_stream;
use crate::sample::DirectionalSample;
use crate::sphere::UnitVector;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ESTIMATOR: i32 = 3;
pub const EXIT_RANK: i32 = 4;
pub const EXIT_TEST: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "dirdepth", version, about = "Quantiles, depth contours and trimming for directional data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fisher spherical median.
    Median(MedianArgs),
    /// Circular and elliptical quantiles, depths and contour polylines.
    Analyze(AnalyzeArgs),
    /// Remove the points below a depth contour.
    Trim(TrimArgs),
    /// Watson, quartile goodness-of-fit and exponential tail tests.
    Test(TestArgs),
    /// Write a synthetic dataset.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo experiment described by a config file.
    Replicate(ReplicateArgs),
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// CSV dataset, one observation per row.
    pub input: PathBuf,
    /// Rows are `theta,phi` in radians instead of Cartesian coordinates.
    #[arg(long)]
    pub spherical: bool,
    /// Fold axial data onto the hemisphere around this direction first.
    #[arg(long, value_name = "X,Y,Z", value_delimiter = ',', allow_hyphen_values = true)]
    pub fold: Option<Vec<f64>>,
    /// JSON output path (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MedianArgs {
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Circular,
    Elliptical,
    Both,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
    pub taus: Vec<f64>,
    #[arg(long, value_enum, default_value = "both")]
    pub kind: KindArg,
    /// Points per contour polyline (0 disables polylines).
    #[arg(long, default_value_t = 100)]
    pub contour_points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TrimKind {
    Circular,
    Elliptical,
}

#[derive(Args, Debug)]
pub struct TrimArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.15)]
    pub tau: f64,
    #[arg(long, value_enum, default_value = "circular")]
    pub kind: TrimKind,
    /// CSV path for the kept observations.
    #[arg(long)]
    pub kept: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NullFamily {
    Vmf,
}

#[derive(Args, Debug)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Watson U² test on the longitudes about the pole.
    #[arg(long)]
    pub watson: bool,
    /// Apply the Watson test to Mahalanobis-transformed longitudes as well.
    #[arg(long)]
    pub transformed: bool,
    /// Quartile goodness-of-fit test against this concentration.
    #[arg(long, value_name = "KAPPA0")]
    pub gof: Option<f64>,
    #[arg(long, value_enum, default_value = "vmf")]
    pub dist: NullFamily,
    /// Kolmogorov distance of 1 - cos(theta) to Exp(KAPPA).
    #[arg(long, value_name = "KAPPA")]
    pub exptail: Option<f64>,
    /// Pole of the tests (default: the Fisher median).
    #[arg(long, value_name = "X,Y,Z", value_delimiter = ',', allow_hyphen_values = true)]
    pub pole: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SimDist {
    Vmf,
    Kent,
    Uniform,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub dist: SimDist,
    #[arg(long, default_value_t = 10.0)]
    pub kappa: f64,
    /// Kent ovalness; needs 2 beta < kappa.
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Ambient dimension (vmf and uniform).
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReplicateArgs {
    /// `key = value` or JSON experiment description.
    pub config: PathBuf,
    /// Output prefix; writes PREFIX.json and PREFIX.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

/// Error tagged with the stage that produced it.
#[derive(Debug)]
pub enum Failure {
    Input(Error),
    Estimator(Error),
    Test(Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        let (err, stage_code) = match self {
            Failure::Input(e) => (e, EXIT_INPUT),
            Failure::Estimator(e) => (e, EXIT_ESTIMATOR),
            Failure::Test(e) => (e, EXIT_TEST),
        };
        match err.root() {
            Error::RankDeficient { .. } => EXIT_RANK,
            Error::Parse { .. } | Error::Io(_) => EXIT_INPUT,
            _ => stage_code,
        }
    }

    fn error(&self) -> &Error {
        match self {
            Failure::Input(e) | Failure::Estimator(e) | Failure::Test(e) => e,
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn input<T>(r: crate::Result<T>) -> CliResult<T> {
    r.map_err(Failure::Input)
}

fn estimator<T>(r: crate::Result<T>) -> CliResult<T> {
    r.map_err(Failure::Estimator)
}

fn test<T>(r: crate::Result<T>) -> CliResult<T> {
    r.map_err(Failure::Test)
}

#[derive(Clone, Debug, Serialize)]
pub struct TransformDiagnostics {
    pub tangent_eigenvalues: Vec<f64>,
    pub inverse_singular_values: Vec<f64>,
    pub anisotropy: f64,
}

impl TransformDiagnostics {
    fn of(t: &MahalanobisTransform) -> Self {
        TransformDiagnostics {
            tangent_eigenvalues: t.tangent_eigenvalues().to_vec(),
            inverse_singular_values: t.inverse_singular_values(),
            anisotropy: t.anisotropy(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuantileEntry {
    pub tau: f64,
    pub c: Option<f64>,
    pub c_g: Option<f64>,
    pub minor: Option<f64>,
    pub major: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Ellipticity {
    /// Largest over smallest tangent eigenvalue.
    pub eigenvalue_ratio: f64,
    /// `minor - major` per quantile level.
    pub gaps: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DepthValues {
    pub amhd: Option<Vec<f64>>,
    pub emhd: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrimIndices {
    pub kind: QuantileKind,
    pub tau: f64,
    pub threshold: f64,
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
    pub kept_file: String,
}

/// JSON document written by the analysis commands. Every key is always
/// present; unused ones are `null` or empty.
#[derive(Clone, Debug, Serialize)]
pub struct ResultDocument {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub n: usize,
    pub mu_hat: Option<UnitVector>,
    pub objective: Option<f64>,
    pub projections: Option<Vec<f64>>,
    pub transform: Option<TransformDiagnostics>,
    pub quantiles: Vec<QuantileEntry>,
    pub ellipticity: Option<Ellipticity>,
    pub depths: DepthValues,
    pub tests: Vec<TestReport>,
    pub contours: Vec<ContourPolyline>,
    pub trim: Option<TrimIndices>,
}

impl ResultDocument {
    fn new(command: &str, n: usize) -> Self {
        ResultDocument {
            command: command.to_string(),
            parameters: BTreeMap::new(),
            n,
            mu_hat: None,
            objective: None,
            projections: None,
            transform: None,
            quantiles: Vec::new(),
            ellipticity: None,
            depths: DepthValues::default(),
            tests: Vec::new(),
            contours: Vec::new(),
            trim: None,
        }
    }

    fn param(&mut self, key: &str, value: Value) {
        self.parameters.insert(key.to_string(), value);
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.error());
            f.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> CliResult<()> {
    match command {
        Command::Median(a) => emit(&cmd_median(a)?, a.data.out.as_deref()),
        Command::Analyze(a) => emit(&cmd_analyze(a)?, a.data.out.as_deref()),
        Command::Trim(a) => emit(&cmd_trim(a)?, a.data.out.as_deref()),
        Command::Test(a) => emit(&cmd_test(a)?, a.data.out.as_deref()),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Replicate(a) => cmd_replicate(a),
    }
}

fn emit(doc: &ResultDocument, out: Option<&Path>) -> CliResult<()> {
    let text = input(to_json_string(doc))?;
    match out {
        Some(path) => input(write_text_file(path, &text)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn unit_arg(name: &str, v: &[f64]) -> CliResult<UnitVector> {
    input(UnitVector::normalize(nalgebra::DVector::from_column_slice(v)))
        .map_err(|_| Failure::Input(Error::InvalidParameter(format!("--{name} must be a non-zero vector"))))
}

fn load(data: &DataArgs, doc_params: &mut BTreeMap<String, Value>) -> CliResult<DirectionalSample> {
    let format = if data.spherical {
        DatasetFormat::Spherical
    } else {
        DatasetFormat::Cartesian
    };
    let sample = input(read_dataset(&data.input, format))?;
    doc_params.insert("input".into(), json!(data.input.display().to_string()));
    doc_params.insert("spherical".into(), json!(data.spherical));
    match &data.fold {
        Some(v) => {
            let pole = unit_arg("fold", v)?;
            doc_params.insert("fold".into(), json!(pole.as_slice()));
            input(hemisphere_fold(&sample, &pole))
        }
        None => {
            doc_params.insert("fold".into(), Value::Null);
            Ok(sample)
        }
    }
}

pub fn cmd_median(a: &MedianArgs) -> CliResult<ResultDocument> {
    let mut params = BTreeMap::new();
    let sample = load(&a.data, &mut params)?;
    let fit = estimator(fisher_median_fit(&sample))?;
    let mut doc = ResultDocument::new("median", sample.len());
    doc.parameters = params;
    if let Some(v) = &a.data.fold {
        let pole = unit_arg("fold", v)?;
        doc.projections = Some(input(sample.projections(&pole))?);
    }
    doc.param("iterations", json!(fit.iterations));
    doc.objective = Some(fit.objective);
    doc.mu_hat = Some(fit.median);
    Ok(doc)
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> CliResult<ResultDocument> {
    let mut params = BTreeMap::new();
    let sample = load(&a.data, &mut params)?;
    for &tau in &a.taus {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Failure::Input(Error::InvalidParameter(format!("tau {tau} outside (0, 1)"))));
        }
    }
    let mut doc = ResultDocument::new("analyze", sample.len());
    doc.parameters = params;
    doc.param("taus", json!(a.taus));
    doc.param("kind", json!(format!("{:?}", a.kind).to_lowercase()));
    doc.param("contour_points", json!(a.contour_points));
    let fit = estimator(fisher_median_fit(&sample))?;
    doc.objective = Some(fit.objective);
    let mu = fit.median;
    let circular = a.kind != KindArg::Elliptical;
    let elliptical = a.kind != KindArg::Circular;
    let polylines = a.contour_points > 0 && sample.dim() == 3;

    let projections = input(sample.projections(&mu))?;
    doc.projections = Some(projections.clone());
    let circ_cdf = input(EmpiricalCdf::new(projections))?;
    let mut entries: Vec<QuantileEntry> = a
        .taus
        .iter()
        .map(|&tau| QuantileEntry {
            tau,
            c: None,
            c_g: None,
            minor: None,
            major: None,
        })
        .collect();
    if circular {
        for e in entries.iter_mut() {
            let c = input(circ_cdf.quantile(e.tau))?;
            e.c = Some(c);
            if polylines {
                doc.contours.push(estimator(circular_contour(&mu, c, a.contour_points))?.with_tau(e.tau).close());
            }
        }
        doc.depths.amhd = Some(
            sample
                .points()
                .iter()
                .map(|x| amhd(DepthReference::Sample(&sample), &mu, x))
                .collect::<crate::Result<Vec<_>>>()
                .map_err(Failure::Estimator)?,
        );
    }
    if elliptical {
        let t = estimator(fit_transform(&sample, &mu))?;
        let tp = estimator(transformed_projections(&sample, &t))?;
        let cdf = input(EmpiricalCdf::new(tp.clone()))?;
        let mut gaps = Vec::new();
        for e in entries.iter_mut() {
            let s = estimator(crate::depth::elliptical_summary_from_projections(&tp, &t, e.tau))?;
            e.c_g = Some(s.c);
            e.minor = s.minor_c;
            e.major = s.major_c;
            gaps.push(s.minor_c.unwrap_or(s.c) - s.major_c.unwrap_or(s.c));
            if polylines {
                doc.contours.push(estimator(elliptical_contour(&t, s.c, a.contour_points))?.with_tau(e.tau).close());
            }
        }
        let ev = t.tangent_eigenvalues();
        doc.ellipticity = Some(Ellipticity {
            eigenvalue_ratio: ev.first().copied().unwrap_or(1.0) / ev.last().copied().unwrap_or(1.0),
            gaps,
        });
        doc.depths.emhd = Some(
            sample
                .points()
                .iter()
                .map(|y| emhd_with(&cdf, &t, y))
                .collect::<crate::Result<Vec<_>>>()
                .map_err(Failure::Estimator)?,
        );
        doc.transform = Some(TransformDiagnostics::of(&t));
    }
    doc.quantiles = entries;
    doc.mu_hat = Some(mu);
    Ok(doc)
}

pub fn cmd_trim(a: &TrimArgs) -> CliResult<ResultDocument> {
    let mut params = BTreeMap::new();
    let sample = load(&a.data, &mut params)?;
    if !(a.tau > 0.0 && a.tau < 1.0) {
        return Err(Failure::Input(Error::InvalidParameter(format!("tau {} outside (0, 1)", a.tau))));
    }
    let mut doc = ResultDocument::new("trim", sample.len());
    doc.parameters = params;
    doc.param("tau", json!(a.tau));
    doc.param("kind", json!(format!("{:?}", a.kind).to_lowercase()));
    let mu = estimator(fisher_median_fit(&sample))?.median;
    let summary = match a.kind {
        TrimKind::Circular => estimator(QuantileSummary::circular(&sample, &mu, a.tau))?,
        TrimKind::Elliptical => {
            let t = estimator(fit_transform(&sample, &mu))?;
            doc.transform = Some(TransformDiagnostics::of(&t));
            estimator(crate::depth::elliptical_projection_quantile(&sample, &t, a.tau))?
        }
    };
    let result = estimator(trim(&sample, &summary))?;
    input(write_dataset_file(&a.kept, &result.kept))?;
    doc.quantiles.push(QuantileEntry {
        tau: a.tau,
        c: (summary.kind == QuantileKind::Circular).then_some(summary.c),
        c_g: (summary.kind == QuantileKind::Elliptical).then_some(summary.c),
        minor: summary.minor_c,
        major: summary.major_c,
    });
    doc.trim = Some(TrimIndices {
        kind: summary.kind,
        tau: a.tau,
        threshold: summary.c,
        kept: result.kept_indices,
        removed: result.removed_indices,
        kept_file: a.kept.display().to_string(),
    });
    doc.mu_hat = Some(mu);
    Ok(doc)
}

pub fn cmd_test(a: &TestArgs) -> CliResult<ResultDocument> {
    let mut params = BTreeMap::new();
    let sample = load(&a.data, &mut params)?;
    if !a.watson && a.gof.is_none() && a.exptail.is_none() {
        return Err(Failure::Input(Error::InvalidParameter(
            "select at least one of --watson, --gof, --exptail".into(),
        )));
    }
    let mut doc = ResultDocument::new("test", sample.len());
    doc.parameters = params;
    doc.param("watson", json!(a.watson));
    doc.param("transformed", json!(a.transformed));
    doc.param("gof", json!(a.gof));
    doc.param("dist", json!(format!("{:?}", a.dist).to_lowercase()));
    doc.param("exptail", json!(a.exptail));
    let mu_hat = estimator(fisher_median_fit(&sample))?.median;
    let pole = match &a.pole {
        Some(v) => unit_arg("pole", v)?,
        None => mu_hat.clone(),
    };
    doc.param("pole", json!(pole.as_slice()));
    if a.watson {
        doc.tests.push(test(longitudes(&sample, &pole).and_then(|l| watson_u2(&l)))?);
        if a.transformed {
            let t = estimator(fit_transform(&sample, &pole))?;
            let moved = estimator(transform_sample(&t, &sample))?;
            doc.tests.push(test(longitudes(&moved, &pole).and_then(|l| watson_u2(&l)))?);
            doc.transform = Some(TransformDiagnostics::of(&t));
        }
    }
    if let Some(kappa0) = a.gof {
        let law = input(ProjectionLaw::vmf(kappa0, sample.dim()))?;
        doc.tests.push(test(gof_quartile_test(&sample, &pole, &law))?);
    }
    if let Some(kappa) = a.exptail {
        doc.tests.push(test(exp_tail_check(&sample, &pole, kappa))?);
    }
    doc.mu_hat = Some(mu_hat);
    Ok(doc)
}

/// Draws the dataset of `simulate`; identical arguments give identical
/// samples.
pub fn simulate_sample(a: &SimulateArgs) -> crate::Result<DirectionalSample> {
    let mut rng = random_stream(a.seed);
    match a.dist {
        SimDist::Vmf => vmf_sample(&VmfParams::new(UnitVector::north_pole(a.dim), a.kappa)?, a.n, &mut rng),
        SimDist::Kent => {
            if a.dim != 3 {
                return Err(Error::UnsupportedDimension {
                    what: "Kent sampling",
                    required: 3,
                    found: a.dim,
                });
            }
            Ok(kent_sample(&KentParams::canonical(a.kappa, a.beta)?, a.n, &mut rng)?.sample)
        }
        SimDist::Uniform => uniform_sphere_sample(a.dim, a.n, &mut rng),
    }
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let sample = input(simulate_sample(a))?;
    match &a.out {
        Some(path) => input(write_dataset_file(path, &sample)),
        None => {
            let mut buf = Vec::new();
            input(write_dataset(&mut buf, &sample))?;
            print!("{}", String::from_utf8_lossy(&buf));
            Ok(())
        }
    }
}

fn cmd_replicate(a: &ReplicateArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| Failure::Input(Error::Io(format!("{}: {e}", a.config.display()))))?;
    let config = input(parse_config(&text).and_then(|m| experiment_from_config(&m)))?;
    let (json, csv) = match config {
        ExperimentConfig::Design(d) => {
            let report = estimator(run_design(&d, a.threads))?;
            (input(to_json_string(&report))?, design_csv(&report))
        }
        ExperimentConfig::Gof(g) => {
            let report = estimator(run_gof_workflow(&g, a.threads))?;
            (input(to_json_string(&report))?, gof_csv(&report))
        }
    };
    let with_ext = |ext: &str| {
        let mut p = a.out.clone().into_os_string();
        p.push(ext);
        PathBuf::from(p)
    };
    input(write_text_file(&with_ext(".json"), &json))?;
    input(write_text_file(&with_ext(".csv"), &csv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_root_cause() {
        let rank = Error::RankDeficient {
            eigenvalue: 0.0,
            tolerance: 1e-12,
        };
        assert_eq!(Failure::Estimator(rank.clone().at(3)).exit_code(), EXIT_RANK);
        assert_eq!(Failure::Test(rank).exit_code(), EXIT_RANK);
        assert_eq!(Failure::Estimator(Error::DegenerateSample("x".into())).exit_code(), EXIT_ESTIMATOR);
        assert_eq!(Failure::Test(Error::PoleDegenerate.at(0)).exit_code(), EXIT_TEST);
        let parse = Error::Parse {
            line: 2,
            message: "x".into(),
        };
        assert_eq!(Failure::Estimator(parse).exit_code(), EXIT_INPUT);
    }

    #[test]
    fn bad_arguments_exit_with_input_code() {
        assert_eq!(run(["dirdepth", "median"]), EXIT_INPUT);
        assert_eq!(run(["dirdepth", "frobnicate"]), EXIT_INPUT);
        assert_eq!(run(["dirdepth", "median", "/nonexistent/file.csv"]), EXIT_INPUT);
    }
}
