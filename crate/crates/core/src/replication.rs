//! Seeded Monte Carlo experiments: the Kent designs with their quartile,
//! Watson and trimming summaries, and a goodness-of-fit workflow on
//! contaminated von Mises-Fisher samples.
//!
//! Replication `r` draws from its own stream seeded with
//! `splitmix64(base_seed ^ r)`, so results do not depend on the number of
//! worker threads.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::depth::{elliptical_summary_from_projections, transformed_projections, trim, QuantileSummary};
use crate::distributions::{kent_sample, vmf_sample, KentParams, ProjectionLaw, VmfParams};
use crate::error::{Error, Result};
use crate::estimation::{fisher_median, fit_transform, transform_sample};
use crate::hypothesis::{exp_tail_check, gof_quartile_test, longitudes, watson_u2};
use crate::io::format_f64;
use crate::rng::{random_stream, replication_seed, RandomStream};
use crate::sample::DirectionalSample;
use crate::sphere::UnitVector;

/// Nominal level of every rejection rate in the reports.
pub const NOMINAL_LEVEL: f64 = 0.05;

/// Level used for trimming in [`run_design`].
pub const DESIGN_TRIM_TAU: f64 = 0.25;

const LONGITUDE_BINS: usize = 36;
const TAIL_BINS: usize = 40;

/// Generating law of a design; the pole is always `(0, ..., 0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub enum DesignDistribution {
    Kent(KentParams),
    Vmf(VmfParams),
}

impl DesignDistribution {
    fn draw(&self, n: usize, rng: &mut RandomStream) -> Result<DirectionalSample> {
        match self {
            DesignDistribution::Kent(p) => Ok(kent_sample(p, n, rng)?.sample),
            DesignDistribution::Vmf(p) => vmf_sample(p, n, rng),
        }
    }

    fn summary(&self) -> DistributionSummary {
        match self {
            DesignDistribution::Kent(p) => DistributionSummary {
                family: "kent",
                kappa: p.kappa(),
                beta: p.shape()[(0, 0)],
                mu: p.mu().clone(),
            },
            DesignDistribution::Vmf(p) => DistributionSummary {
                family: "vmf",
                kappa: p.kappa(),
                beta: 0.0,
                mu: p.mu().clone(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributionSummary {
    pub family: &'static str,
    pub kappa: f64,
    pub beta: f64,
    pub mu: UnitVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentDesign {
    pub id: String,
    pub distribution: DesignDistribution,
    pub n: usize,
    pub replications: usize,
    pub base_seed: u64,
    pub taus: Vec<f64>,
}

/// `(kappa, beta)` of the four Kent designs.
pub const KENT_DESIGNS: [(f64, f64); 4] = [(5.0, 2.0), (7.0, 3.0), (10.0, 4.0), (12.0, 5.0)];

/// Fixed base seed of the preset design `l` (1-based).
pub fn default_design_seed(l: usize) -> u64 {
    0x00d1_7d07_0000_0000 + l as u64
}

impl ExperimentDesign {
    /// Kent design `l` in 1..=4 with n = 200 and the quartile levels.
    pub fn kent_preset(l: usize, replications: usize) -> Result<Self> {
        let &(kappa, beta) = KENT_DESIGNS.get(l.wrapping_sub(1)).ok_or_else(|| {
            Error::InvalidParameter(format!("design l={l} does not exist (1..=4)"))
        })?;
        Ok(ExperimentDesign {
            id: format!("l{l}"),
            distribution: DesignDistribution::Kent(KentParams::canonical(kappa, beta)?),
            n: 200,
            replications,
            base_seed: default_design_seed(l),
            taus: vec![0.25, 0.5, 0.75],
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replications must be at least 1".into()));
        }
        if self.n < 8 {
            return Err(Error::InvalidParameter(format!("n = {} is below 8", self.n)));
        }
        if self.taus.is_empty() || self.taus.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::InvalidParameter("taus must be non-empty and inside (0, 1)".into()));
        }
        Ok(())
    }
}

/// Quantile summary of one replication at one level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuartileRecord {
    pub tau: f64,
    /// Circular quantile `c_tau` about `mu_hat`.
    pub c: f64,
    /// Quantile of the transformed sample.
    pub c_g: f64,
    pub minor: f64,
    pub major: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    pub mu_hat: UnitVector,
    pub tangent_eigenvalues: Vec<f64>,
    pub quartiles: Vec<QuartileRecord>,
    pub watson_raw_p: f64,
    pub watson_transformed_p: f64,
    pub trim_removed_circular: usize,
    pub trim_removed_elliptical: usize,
    #[serde(skip)]
    raw_longitudes: Vec<f64>,
    #[serde(skip)]
    transformed_longitudes: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
    /// Monte Carlo standard error of the mean.
    pub se: f64,
}

impl Moments {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Moments { mean, sd, se: sd / n.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuartileAggregate {
    pub tau: f64,
    pub c: Moments,
    pub c_g: Moments,
    pub minor: Moments,
    pub major: Moments,
    /// `minor - major`.
    pub gap: Moments,
    /// Share of replications with `major <= c <= minor`.
    pub sandwich_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DesignAggregates {
    pub quartiles: Vec<QuartileAggregate>,
    pub watson_raw_rejection_rate: f64,
    pub watson_transformed_rejection_rate: f64,
    pub trim_removed_circular: Moments,
    pub trim_removed_elliptical: Moments,
}

/// Equal-width bin counts over `[lo, hi)`; values outside are clamped into
/// the end bins.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Histogram {
            lo,
            hi,
            counts: vec![0; bins],
        }
    }

    pub fn add(&mut self, x: f64) {
        let bins = self.counts.len();
        let k = ((x - self.lo) / (self.hi - self.lo) * bins as f64).floor();
        let k = if k.is_nan() { 0 } else { (k.max(0.0) as usize).min(bins - 1) };
        self.counts[k] += 1;
    }

    pub fn extend(&mut self, xs: impl IntoIterator<Item = f64>) {
        for x in xs {
            self.add(x);
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DesignHistograms {
    pub raw_longitudes: Histogram,
    pub transformed_longitudes: Histogram,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationReport {
    pub id: String,
    pub distribution: DistributionSummary,
    pub n: usize,
    pub replications: usize,
    pub base_seed: u64,
    pub taus: Vec<f64>,
    pub nominal_level: f64,
    pub trim_tau: f64,
    pub records: Vec<ReplicationRecord>,
    pub aggregates: DesignAggregates,
    pub histograms: DesignHistograms,
}

fn run_parallel<T, F>(replications: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let job = || {
        (0..replications)
            .into_par_iter()
            .map(|r| f(r).map_err(|e| e.in_replication(r)))
            .collect::<Result<Vec<T>>>()
    };
    if threads == 0 {
        return job();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
        .install(job)
}

fn run_replication(design: &ExperimentDesign, r: usize) -> Result<ReplicationRecord> {
    let seed = replication_seed(design.base_seed, r as u64);
    let mut rng = random_stream(seed);
    let sample = design.distribution.draw(design.n, &mut rng)?;
    let mu_hat = fisher_median(&sample)?;
    let t = fit_transform(&sample, &mu_hat)?;
    let projections = sample.projections(&mu_hat)?;
    let transformed = transformed_projections(&sample, &t)?;
    let quartiles = design
        .taus
        .iter()
        .map(|&tau| {
            let e = elliptical_summary_from_projections(&transformed, &t, tau)?;
            Ok(QuartileRecord {
                tau,
                c: crate::depth::projection_quantile(&projections, tau)?,
                c_g: e.c,
                minor: e.minor_c.unwrap_or(e.c),
                major: e.major_c.unwrap_or(e.c),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let raw_longitudes = longitudes(&sample, &mu_hat)?;
    let transformed_longitudes = longitudes(&transform_sample(&t, &sample)?, &mu_hat)?;
    let circular = QuantileSummary::circular(&sample, &mu_hat, DESIGN_TRIM_TAU)?;
    let elliptical = elliptical_summary_from_projections(&transformed, &t, DESIGN_TRIM_TAU)?;
    Ok(ReplicationRecord {
        replication: r,
        seed,
        tangent_eigenvalues: t.tangent_eigenvalues().to_vec(),
        mu_hat,
        quartiles,
        watson_raw_p: watson_u2(&raw_longitudes)?.p_value,
        watson_transformed_p: watson_u2(&transformed_longitudes)?.p_value,
        trim_removed_circular: trim(&sample, &circular)?.removed.len(),
        trim_removed_elliptical: trim(&sample, &elliptical)?.removed.len(),
        raw_longitudes,
        transformed_longitudes,
    })
}

fn rate(flags: impl Iterator<Item = bool>) -> f64 {
    let (hits, total) = flags.fold((0usize, 0usize), |(h, t), f| (h + f as usize, t + 1));
    hits as f64 / total as f64
}

/// Aggregates recomputed from the per-replication records.
pub fn aggregate_design(taus: &[f64], records: &[ReplicationRecord]) -> DesignAggregates {
    let quartiles = taus
        .iter()
        .enumerate()
        .map(|(j, &tau)| {
            let q = || records.iter().map(move |r| &r.quartiles[j]);
            QuartileAggregate {
                tau,
                c: Moments::of(q().map(|x| x.c)),
                c_g: Moments::of(q().map(|x| x.c_g)),
                minor: Moments::of(q().map(|x| x.minor)),
                major: Moments::of(q().map(|x| x.major)),
                gap: Moments::of(q().map(|x| x.minor - x.major)),
                sandwich_rate: rate(q().map(|x| x.major <= x.c && x.c <= x.minor)),
            }
        })
        .collect();
    DesignAggregates {
        quartiles,
        watson_raw_rejection_rate: rate(records.iter().map(|r| r.watson_raw_p < NOMINAL_LEVEL)),
        watson_transformed_rejection_rate: rate(records.iter().map(|r| r.watson_transformed_p < NOMINAL_LEVEL)),
        trim_removed_circular: Moments::of(records.iter().map(|r| r.trim_removed_circular as f64)),
        trim_removed_elliptical: Moments::of(records.iter().map(|r| r.trim_removed_elliptical as f64)),
    }
}

/// Runs every replication of `design` on `threads` workers (0 uses the
/// global pool). The report does not depend on `threads`.
pub fn run_design(design: &ExperimentDesign, threads: usize) -> Result<ReplicationReport> {
    design.validate()?;
    let records = run_parallel(design.replications, threads, |r| run_replication(design, r))?;
    let mut histograms = DesignHistograms {
        raw_longitudes: Histogram::new(0.0, TAU, LONGITUDE_BINS),
        transformed_longitudes: Histogram::new(0.0, TAU, LONGITUDE_BINS),
    };
    for r in &records {
        histograms.raw_longitudes.extend(r.raw_longitudes.iter().copied());
        histograms.transformed_longitudes.extend(r.transformed_longitudes.iter().copied());
    }
    Ok(ReplicationReport {
        id: design.id.clone(),
        distribution: design.distribution.summary(),
        n: design.n,
        replications: design.replications,
        base_seed: design.base_seed,
        taus: design.taus.clone(),
        nominal_level: NOMINAL_LEVEL,
        trim_tau: DESIGN_TRIM_TAU,
        aggregates: aggregate_design(&design.taus, &records),
        records,
        histograms,
    })
}

/// Per-replication CSV: four quantile columns per level, then the Watson
/// p-values and trim counts.
pub fn design_csv(report: &ReplicationReport) -> String {
    let mut header = vec!["replication".to_string(), "seed".into()];
    header.extend(["mu_hat_x", "mu_hat_y", "mu_hat_z"].map(String::from));
    for tau in &report.taus {
        for col in ["c", "c_g", "minor", "major"] {
            header.push(format!("{col}_{tau}"));
        }
    }
    header.extend(
        ["watson_raw_p", "watson_transformed_p", "trim_removed_circular", "trim_removed_elliptical"]
            .map(String::from),
    );
    let mut out = header.join(",") + "\n";
    for r in &report.records {
        let mut row = vec![r.replication.to_string(), r.seed.to_string()];
        row.extend(r.mu_hat.as_slice().iter().take(3).map(|&v| format_f64(v)));
        for q in &r.quartiles {
            row.extend([q.c, q.c_g, q.minor, q.major].map(format_f64));
        }
        row.push(format_f64(r.watson_raw_p));
        row.push(format_f64(r.watson_transformed_p));
        row.push(r.trim_removed_circular.to_string());
        row.push(r.trim_removed_elliptical.to_string());
        out += &(row.join(",") + "\n");
    }
    out
}

/// Synthetic stand-in for testing a fitted rotationally symmetric law on
/// data with a heavy tail: vMF(kappa0) about `(0,0,1)` where a fixed share
/// of the points is replaced by draws uniform on the cap
/// `theta in [pi/3, pi/2]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GofWorkflowConfig {
    pub n: usize,
    pub kappa0: f64,
    pub contamination: f64,
    pub trim_tau: f64,
    pub replications: usize,
    pub base_seed: u64,
}

impl GofWorkflowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.contamination) {
            return Err(Error::InvalidParameter(format!(
                "contamination {} must lie in [0, 0.5)",
                self.contamination
            )));
        }
        if !(self.kappa0 > 0.0 && self.kappa0.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa0 = {} must be positive", self.kappa0)));
        }
        if !(self.trim_tau > 0.0 && self.trim_tau < 1.0) {
            return Err(Error::InvalidParameter(format!("trim_tau = {} must lie in (0, 1)", self.trim_tau)));
        }
        if self.replications == 0 || self.n < 8 {
            return Err(Error::InvalidParameter("need replications >= 1 and n >= 8".into()));
        }
        Ok(())
    }

    /// Number of contaminating points, `round(contamination * n)`.
    pub fn contaminated_count(&self) -> usize {
        (self.contamination * self.n as f64).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GofRecord {
    pub replication: usize,
    pub seed: u64,
    pub pre_trim_p: f64,
    pub post_trim_p: f64,
    pub removed: usize,
    pub pre_trim_tail_distance: f64,
    pub post_trim_tail_distance: f64,
    #[serde(skip)]
    pre_tail: Vec<f64>,
    #[serde(skip)]
    post_tail: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GofAggregates {
    pub pre_trim_rejection_rate: f64,
    pub post_trim_rejection_rate: f64,
    pub removed: Moments,
    pub removed_min: usize,
    pub removed_max: usize,
    pub pre_trim_tail_distance: Moments,
    pub post_trim_tail_distance: Moments,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GofHistograms {
    /// Pooled `1 - cos(theta)` before trimming.
    pub pre_trim_tail: Histogram,
    pub post_trim_tail: Histogram,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GofWorkflowReport {
    pub config: GofWorkflowConfig,
    pub nominal_level: f64,
    pub records: Vec<GofRecord>,
    pub aggregates: GofAggregates,
    pub histograms: GofHistograms,
}

/// One contaminated sample; the cap points come last.
pub fn contaminated_sample(config: &GofWorkflowConfig, rng: &mut RandomStream) -> Result<DirectionalSample> {
    let m = config.contaminated_count();
    let p = VmfParams::new(UnitVector::north_pole(3), config.kappa0)?;
    let mut points = if m < config.n {
        vmf_sample(&p, config.n - m, rng)?.into_points()
    } else {
        Vec::new()
    };
    for _ in 0..m {
        let cos_theta: f64 = 0.5 * rng.random::<f64>();
        let phi: f64 = TAU * rng.random::<f64>();
        points.push(UnitVector::from_spherical(cos_theta.acos(), phi));
    }
    DirectionalSample::new(points, format!("vmf(kappa={}) + {m} cap points", config.kappa0))
}

/// Tests the vMF(kappa0) hypothesis about the design pole before and after
/// trimming the points below the `trim_tau` contour.
pub fn run_gof_workflow(config: &GofWorkflowConfig, threads: usize) -> Result<GofWorkflowReport> {
    config.validate()?;
    let mu0 = UnitVector::north_pole(3);
    let law0 = ProjectionLaw::vmf(config.kappa0, 3)?;
    let records = run_parallel(config.replications, threads, |r| {
        let seed = replication_seed(config.base_seed, r as u64);
        let sample = contaminated_sample(config, &mut random_stream(seed))?;
        let summary = QuantileSummary::circular(&sample, &mu0, config.trim_tau)?;
        let trimmed = trim(&sample, &summary)?;
        let pre_tail = exp_tail_check(&sample, &mu0, config.kappa0)?;
        let post_tail = exp_tail_check(&trimmed.kept, &mu0, config.kappa0)?;
        Ok(GofRecord {
            replication: r,
            seed,
            pre_trim_p: gof_quartile_test(&sample, &mu0, &law0)?.p_value,
            post_trim_p: gof_quartile_test(&trimmed.kept, &mu0, &law0)?.p_value,
            removed: trimmed.removed.len(),
            pre_trim_tail_distance: pre_tail.statistic,
            post_trim_tail_distance: post_tail.statistic,
            pre_tail: sample.projections(&mu0)?.iter().map(|p| 1.0 - p).collect(),
            post_tail: trimmed.kept.projections(&mu0)?.iter().map(|p| 1.0 - p).collect(),
        })
    })?;
    let mut histograms = GofHistograms {
        pre_trim_tail: Histogram::new(0.0, 2.0, TAIL_BINS),
        post_trim_tail: Histogram::new(0.0, 2.0, TAIL_BINS),
    };
    for r in &records {
        histograms.pre_trim_tail.extend(r.pre_tail.iter().copied());
        histograms.post_trim_tail.extend(r.post_tail.iter().copied());
    }
    Ok(GofWorkflowReport {
        config: config.clone(),
        nominal_level: NOMINAL_LEVEL,
        aggregates: aggregate_gof(&records),
        records,
        histograms,
    })
}

pub fn aggregate_gof(records: &[GofRecord]) -> GofAggregates {
    GofAggregates {
        pre_trim_rejection_rate: rate(records.iter().map(|r| r.pre_trim_p < NOMINAL_LEVEL)),
        post_trim_rejection_rate: rate(records.iter().map(|r| r.post_trim_p < NOMINAL_LEVEL)),
        removed: Moments::of(records.iter().map(|r| r.removed as f64)),
        removed_min: records.iter().map(|r| r.removed).min().unwrap_or(0),
        removed_max: records.iter().map(|r| r.removed).max().unwrap_or(0),
        pre_trim_tail_distance: Moments::of(records.iter().map(|r| r.pre_trim_tail_distance)),
        post_trim_tail_distance: Moments::of(records.iter().map(|r| r.post_trim_tail_distance)),
    }
}

pub fn gof_csv(report: &GofWorkflowReport) -> String {
    let mut out = String::from(
        "replication,seed,pre_trim_p,post_trim_p,removed,pre_trim_tail_distance,post_trim_tail_distance\n",
    );
    for r in &report.records {
        out += &format!(
            "{},{},{},{},{},{},{}\n",
            r.replication,
            r.seed,
            format_f64(r.pre_trim_p),
            format_f64(r.post_trim_p),
            r.removed,
            format_f64(r.pre_trim_tail_distance),
            format_f64(r.post_trim_tail_distance)
        );
    }
    out
}

/// An experiment read from a configuration file.
#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentConfig {
    Design(ExperimentDesign),
    Gof(GofWorkflowConfig),
}

fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    map.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| Error::InvalidParameter(format!("cannot parse {key} = {v:?}")))
        })
        .transpose()
}

fn parse_seed(map: &BTreeMap<String, String>) -> Result<Option<u64>> {
    match map.get("base_seed") {
        None => Ok(None),
        Some(v) => {
            let parsed = match v.strip_prefix("0x") {
                Some(hex) => u64::from_str_radix(hex, 16),
                None => v.parse(),
            };
            parsed
                .map(Some)
                .map_err(|_| Error::InvalidParameter(format!("cannot parse base_seed = {v:?}")))
        }
    }
}

const DESIGN_KEYS: [&str; 9] = ["experiment", "id", "family", "kappa", "beta", "n", "replications", "base_seed", "taus"];
const GOF_KEYS: [&str; 7] = ["experiment", "n", "kappa0", "contamination", "trim_tau", "replications", "base_seed"];

/// Builds an experiment from a flat key map (see `io::parse_config`).
///
/// `experiment = design` (default) takes `id`, `family` (kent or vmf),
/// `kappa`, `beta`, `n`, `replications`, `base_seed` and `taus`; ids `l1` to
/// `l4` preset the Kent parameters, n = 200 and the quartile levels.
/// `experiment = gof` takes `n`, `kappa0`, `contamination`, `trim_tau`,
/// `replications` and `base_seed`.
pub fn experiment_from_config(map: &BTreeMap<String, String>) -> Result<ExperimentConfig> {
    let kind = map.get("experiment").map(String::as_str).unwrap_or("design");
    let allowed: &[&str] = match kind {
        "design" => &DESIGN_KEYS,
        "gof" => &GOF_KEYS,
        other => return Err(Error::InvalidParameter(format!("unknown experiment {other:?}"))),
    };
    if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::InvalidParameter(format!("unknown key {k:?} for a {kind} experiment")));
    }
    let replications = get::<usize>(map, "replications")?.unwrap_or(1);
    if kind == "gof" {
        let config = GofWorkflowConfig {
            n: get(map, "n")?.unwrap_or(500),
            kappa0: get(map, "kappa0")?.unwrap_or(9.0),
            contamination: get(map, "contamination")?.unwrap_or(0.15),
            trim_tau: get(map, "trim_tau")?.unwrap_or(0.15),
            replications,
            base_seed: parse_seed(map)?.unwrap_or(0),
        };
        config.validate()?;
        return Ok(ExperimentConfig::Gof(config));
    }
    let id = map.get("id").cloned().unwrap_or_else(|| "custom".into());
    let preset = match id.strip_prefix('l').and_then(|l| l.parse::<usize>().ok()) {
        Some(l) if (1..=4).contains(&l) => Some((l, KENT_DESIGNS[l - 1])),
        _ => None,
    };
    let family = map.get("family").map(String::as_str).unwrap_or("kent");
    let kappa = get::<f64>(map, "kappa")?
        .or(preset.map(|p| p.1 .0))
        .ok_or_else(|| Error::InvalidParameter("kappa is required".into()))?;
    let beta = get::<f64>(map, "beta")?.or(preset.map(|p| p.1 .1)).unwrap_or(0.0);
    let distribution = match family {
        "kent" => DesignDistribution::Kent(KentParams::canonical(kappa, beta)?),
        "vmf" => DesignDistribution::Vmf(VmfParams::new(UnitVector::north_pole(3), kappa)?),
        other => return Err(Error::InvalidParameter(format!("unknown family {other:?}"))),
    };
    let taus = match map.get("taus") {
        Some(list) => list
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("cannot parse tau {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?,
        None => vec![0.25, 0.5, 0.75],
    };
    let design = ExperimentDesign {
        id,
        distribution,
        n: get(map, "n")?.unwrap_or(200),
        replications,
        base_seed: parse_seed(map)?.or(preset.map(|p| default_design_seed(p.0))).unwrap_or(0),
        taus,
    };
    design.validate()?;
    Ok(ExperimentConfig::Design(design))
}
