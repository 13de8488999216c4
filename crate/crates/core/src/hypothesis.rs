//! Watson's U² test for uniform longitudes, a Wald test on projection
//! quartiles, and a Kolmogorov check of the exponential tail approximation.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::depth::projection_quantile;
use crate::distributions::ProjectionLaw;
use crate::error::{Error, Result};
use crate::sample::DirectionalSample;
use crate::sphere::{check_same_dim, log_raw, tangent_basis, UnitVector};

/// Quantile levels of the quartile test.
pub const QUARTILES: [f64; 3] = [0.25, 0.5, 0.75];

/// Distance from the pole below which a longitude is undefined.
pub const POLE_TOLERANCE: f64 = 1e-12;

/// Smallest sample for the asymptotic Watson p-value.
pub const WATSON_MIN_N: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    WatsonU2,
    GofQuartile,
    ExpTailKs,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    pub n: usize,
    pub nominal_details: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    /// Set when the reference law is itself an approximation.
    pub approximate: bool,
}

impl TestReport {
    fn new(method: TestMethod, statistic: f64, p_value: f64, n: usize) -> Self {
        TestReport {
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            method,
            n,
            nominal_details: BTreeMap::new(),
            warnings: Vec::new(),
            approximate: false,
        }
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.nominal_details.insert(key.to_string(), value);
        self
    }

    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Longitudes in `[0, 2pi)` of the points around `mu`, measured in the
/// deterministic tangent basis at `mu`.
pub fn longitudes(sample: &DirectionalSample, mu: &UnitVector) -> Result<Vec<f64>> {
    if mu.dim() != 3 {
        return Err(Error::UnsupportedDimension {
            what: "longitudes",
            required: 3,
            found: mu.dim(),
        });
    }
    check_same_dim(3, sample.dim())?;
    let basis = tangent_basis(mu);
    sample
        .points()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            if (x.coords() - mu.coords()).norm() < POLE_TOLERANCE {
                return Err(Error::PoleDegenerate.at(i));
            }
            let v = log_raw(mu, x).map_err(|e| e.at(i))?;
            let c = basis.coordinates(&v);
            let phi = c[1].atan2(c[0]).rem_euclid(TAU);
            Ok(if phi >= TAU { 0.0 } else { phi })
        })
        .collect()
}

/// Upper tail of the asymptotic U² law,
/// `2 sum_{m>=1} (-1)^{m-1} exp(-2 m^2 pi^2 u2)`.
pub fn watson_u2_sf(u2: f64) -> f64 {
    let a = 2.0 * PI * PI * u2;
    let mut sum = 0.0;
    let mut m = 1.0f64;
    loop {
        let term = (-a * m * m).exp();
        if term < 1e-10 {
            break;
        }
        sum += if (m as u64) % 2 == 1 { term } else { -term };
        m += 1.0;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Watson's U² test of circular uniformity.
pub fn watson_u2(angles: &[f64]) -> Result<TestReport> {
    let n = angles.len();
    if n < WATSON_MIN_N {
        return Err(Error::TooFewPoints {
            needed: WATSON_MIN_N,
            found: n,
        });
    }
    let nf = n as f64;
    let mut u: Vec<f64> = angles.iter().map(|a| a.rem_euclid(TAU) / TAU).collect();
    u.sort_by(f64::total_cmp);
    let mean = u.iter().sum::<f64>() / nf;
    let ss: f64 = u
        .iter()
        .enumerate()
        .map(|(i, &ui)| {
            let e = ui - (2 * i + 1) as f64 / (2.0 * nf);
            e * e
        })
        .sum();
    let u2 = ss + 1.0 / (12.0 * nf) - nf * (mean - 0.5).powi(2);
    Ok(TestReport::new(TestMethod::WatsonU2, u2, watson_u2_sf(u2), n))
}

/// Asymptotic covariance of `sqrt(n)` times the quantile estimates at
/// `taus`, given the projection densities there.
pub fn quantile_covariance(taus: &[f64], densities: &[f64]) -> DMatrix<f64> {
    let k = taus.len();
    DMatrix::from_fn(k, k, |i, j| {
        (taus[i].min(taus[j]) - taus[i] * taus[j]) / (densities[i] * densities[j])
    })
}

/// `n (c_hat - c0)' V^{-1} (c_hat - c0)` for the quartile levels.
pub fn wald_statistic(n: usize, empirical: &DVector<f64>, theoretical: &DVector<f64>, densities: &[f64]) -> Result<f64> {
    for (&tau, &f) in QUARTILES.iter().zip(densities) {
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::SingularCovariance(format!(
                "projection density {f} at the {tau} quantile"
            )));
        }
    }
    let v = quantile_covariance(&QUARTILES, densities);
    let chol = Cholesky::new(v).ok_or_else(|| {
        Error::SingularCovariance("quartile covariance is not positive definite".into())
    })?;
    let diff = empirical - theoretical;
    let q = n as f64 * diff.dot(&chol.solve(&diff));
    if q.is_finite() {
        Ok(q)
    } else {
        Err(Error::SingularCovariance(format!("Wald statistic {q}")))
    }
}

/// Wald test of `H0: X . mu0 ~ law0` based on the three projection
/// quartiles; chi-square with 3 degrees of freedom.
pub fn gof_quartile_test(sample: &DirectionalSample, mu0: &UnitVector, law0: &ProjectionLaw) -> Result<TestReport> {
    check_same_dim(mu0.dim(), sample.dim())?;
    check_same_dim(law0.dim(), sample.dim())?;
    let projections = sample.projections(mu0)?;
    let n = projections.len();
    let mut empirical = DVector::zeros(3);
    let mut theoretical = DVector::zeros(3);
    let mut densities = [0.0; 3];
    for (j, &tau) in QUARTILES.iter().enumerate() {
        empirical[j] = projection_quantile(&projections, tau)?;
        theoretical[j] = law0.quantile(tau)?;
        densities[j] = law0.density(theoretical[j]);
    }
    let q = wald_statistic(n, &empirical, &theoretical, &densities)?;
    let chi2 = ChiSquared::new(3.0).expect("3 degrees of freedom");
    let mut report = TestReport::new(TestMethod::GofQuartile, q, chi2.sf(q), n);
    for (j, tau) in ["q25", "q50", "q75"].iter().enumerate() {
        report = report
            .detail(&format!("c0_{tau}"), theoretical[j])
            .detail(&format!("c_hat_{tau}"), empirical[j]);
    }
    Ok(report)
}

/// Kolmogorov distance `sup |F_n - F|` of `values` to a continuous CDF.
pub fn ks_distance(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Upper tail of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form, fast for small lambda.
        let c = PI * PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|k| {
                let j = (2 * k - 1) as f64;
                (-j * j * c).exp()
            })
            .sum();
        (1.0 - (TAU).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let k = k as f64;
                let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * k * k * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// One-sample Kolmogorov-Smirnov test; returns `(distance, p-value)`.
pub fn ks_test(values: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let d = ks_distance(values, cdf);
    (d, kolmogorov_sf((values.len() as f64).sqrt() * d))
}

/// Compares `1 - x . mu` with the `Exp(kappa)` law that approximates it for
/// large concentrations.
pub fn exp_tail_check(sample: &DirectionalSample, mu: &UnitVector, kappa: f64) -> Result<TestReport> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
    }
    if mu.dim() != 3 {
        return Err(Error::UnsupportedDimension {
            what: "the exponential tail check",
            required: 3,
            found: mu.dim(),
        });
    }
    let v: Vec<f64> = sample.projections(mu)?.into_iter().map(|p| 1.0 - p).collect();
    let (d, p) = ks_test(&v, |x| if x <= 0.0 { 0.0 } else { -(-kappa * x).exp_m1() });
    let mut report = TestReport::new(TestMethod::ExpTailKs, d, p, v.len()).detail("kappa", kappa);
    report.approximate = true;
    if kappa < 5.0 {
        report
            .warnings
            .push(format!("kappa = {kappa} < 5: the exponential approximation is unreliable"));
    }
    Ok(report)
}
