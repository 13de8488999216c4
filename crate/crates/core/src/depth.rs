//! Projection quantiles, depth contours, angular and elliptical Mahalanobis
//! depth, and depth-based trimming.
//!
//! The circular `tau`-depth contour is the small circle `x . mu = c_tau`. The
//! elliptical contour is the image of the circular contour of the
//! Mahalanobis-transformed data under `G^{-1}`; its extent along `mu` is
//! summarised by `minor_c = max x . mu` and `major_c = min x . mu` over the
//! contour.

use std::f64::consts::{PI, TAU};

use nalgebra::DVector;
use serde::Serialize;

use crate::distributions::ProjectionLaw;
use crate::error::{Error, Result};
use crate::estimation::{apply_forward, apply_inverse, MahalanobisTransform};
use crate::linalg::SpdShape;
use crate::sample::DirectionalSample;
use crate::sphere::{check_same_dim, exp_raw, tangent_basis, UnitVector};

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "quantile level tau = {tau} must lie strictly between 0 and 1"
        )))
    }
}

/// `ceil(tau * n)` computed exactly for the binary value of `tau`, clamped
/// to `1..=n`.
pub fn order_statistic_rank(tau: f64, n: usize) -> usize {
    let nf = n as f64;
    let mut k = (tau * nf).ceil();
    // tau * n may have rounded up across an integer; the fused product is
    // exact in sign.
    if k >= 1.0 && tau.mul_add(nf, -(k - 1.0)) <= 0.0 {
        k -= 1.0;
    }
    (k as usize).clamp(1, n)
}

/// Check loss `rho_tau(z) = z (tau - 1[z <= 0])`.
pub fn check_loss(tau: f64, z: f64) -> f64 {
    z * (tau - if z <= 0.0 { 1.0 } else { 0.0 })
}

/// Lowest minimiser of `c -> sum rho_tau(p_i - c)`: the `ceil(tau n)`-th
/// order statistic.
pub fn projection_quantile(projections: &[f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if projections.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, found: 0 });
    }
    let mut sorted = projections.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[order_statistic_rank(tau, sorted.len()) - 1])
}

/// Same as [`projection_quantile`] on already sorted data.
fn sorted_quantile(sorted: &[f64], tau: f64) -> f64 {
    sorted[order_statistic_rank(tau, sorted.len()) - 1]
}

/// Empirical projection quantile `c^_tau` of `x_i . mu`.
pub fn empirical_projection_quantile(sample: &DirectionalSample, mu: &UnitVector, tau: f64) -> Result<f64> {
    projection_quantile(&sample.projections(mu)?, tau)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantileKind {
    Circular,
    Elliptical,
}

/// A projection quantile together with the contour it defines.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileSummary {
    pub tau: f64,
    /// `c_tau` (circular) or `c^G_tau` (elliptical).
    pub c: f64,
    pub kind: QuantileKind,
    /// `max x . mu` over the elliptical contour.
    pub minor_c: Option<f64>,
    /// `min x . mu` over the elliptical contour.
    pub major_c: Option<f64>,
    pub mu: UnitVector,
    pub transform: Option<MahalanobisTransform>,
}

impl QuantileSummary {
    pub fn circular(sample: &DirectionalSample, mu: &UnitVector, tau: f64) -> Result<Self> {
        Ok(QuantileSummary {
            tau,
            c: empirical_projection_quantile(sample, mu, tau)?,
            kind: QuantileKind::Circular,
            minor_c: None,
            major_c: None,
            mu: mu.clone(),
            transform: None,
        })
    }

    /// Intrinsic semi-minor and semi-major axes, `arccos(minor_c)` and
    /// `arccos(major_c)`.
    pub fn intrinsic_axes(&self) -> Option<(f64, f64)> {
        Some((self.minor_c?.clamp(-1.0, 1.0).acos(), self.major_c?.clamp(-1.0, 1.0).acos()))
    }
}

/// `G(y_i) . mu_hat` for every point.
pub fn transformed_projections(sample: &DirectionalSample, t: &MahalanobisTransform) -> Result<Vec<f64>> {
    check_same_dim(sample.dim(), t.mu_hat().dim())?;
    sample
        .points()
        .iter()
        .enumerate()
        .map(|(i, y)| apply_forward(t, y).map(|x| x.dot(t.mu_hat())).map_err(|e| e.at(i)))
        .collect()
}

/// Elliptical projection quantile `c^G_tau` with its contour semi-axes.
pub fn elliptical_projection_quantile(
    sample: &DirectionalSample,
    t: &MahalanobisTransform,
    tau: f64,
) -> Result<QuantileSummary> {
    let projections = transformed_projections(sample, t)?;
    elliptical_summary_from_projections(&projections, t, tau)
}

/// As [`elliptical_projection_quantile`], reusing precomputed transformed
/// projections.
pub fn elliptical_summary_from_projections(
    projections: &[f64],
    t: &MahalanobisTransform,
    tau: f64,
) -> Result<QuantileSummary> {
    let c = projection_quantile(projections, tau)?;
    let (minor, major) = contour_semiaxes(t, c)?;
    Ok(QuantileSummary {
        tau,
        c,
        kind: QuantileKind::Elliptical,
        minor_c: Some(minor),
        major_c: Some(major),
        mu: t.mu_hat().clone(),
        transform: Some(t.clone()),
    })
}

/// Closed-form extent of the elliptical contour along `mu_hat`:
/// `(cos(r s_min), cos(r s_max))` with `r = arccos(c_g)` and `s` the tangent
/// singular values of the inverse operator.
pub fn contour_semiaxes(t: &MahalanobisTransform, c_g: f64) -> Result<(f64, f64)> {
    let r = c_g.clamp(-1.0, 1.0).acos();
    let s = t.inverse_singular_values();
    let s_min = s.first().copied().unwrap_or(1.0);
    let s_max = s.last().copied().unwrap_or(1.0);
    if !(r * s_max < PI) {
        return Err(Error::CutLocus(format!(
            "elliptical contour radius {} reaches pi",
            r * s_max
        )));
    }
    Ok(((r * s_min).cos(), (r * s_max).cos()))
}

/// Ordered points along a closed contour on S^2.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContourPolyline {
    pub tau: Option<f64>,
    pub kind: QuantileKind,
    pub points: Vec<UnitVector>,
    /// Whether the first point is repeated at the end.
    pub closed: bool,
}

impl ContourPolyline {
    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = Some(tau);
        self
    }

    /// Repeats the first point at the end.
    pub fn close(mut self) -> Self {
        if !self.closed {
            if let Some(first) = self.points.first().cloned() {
                self.points.push(first);
            }
            self.closed = true;
        }
        self
    }

    /// `(max, min)` of `x . mu` over the points.
    pub fn projection_range(&self, mu: &UnitVector) -> (f64, f64) {
        self.points.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), p| {
            let v = p.dot(mu);
            (hi.max(v), lo.min(v))
        })
    }
}

/// Dimension-free description of a contour: the image under `Exp_base` of the
/// ellipsoid `{ operator * v : |v| = radius }` in the tangent space.
#[derive(Clone, Debug, PartialEq)]
pub struct ContourGenerator {
    pub base: UnitVector,
    pub radius: f64,
    /// `None` for circular contours.
    pub operator: Option<SpdShape>,
}

pub fn circular_contour_generator(mu: &UnitVector, c: f64) -> ContourGenerator {
    ContourGenerator {
        base: mu.clone(),
        radius: c.clamp(-1.0, 1.0).acos(),
        operator: None,
    }
}

pub fn elliptical_contour_generator(t: &MahalanobisTransform, c_g: f64) -> ContourGenerator {
    ContourGenerator {
        base: t.mu_hat().clone(),
        radius: c_g.clamp(-1.0, 1.0).acos(),
        operator: Some(t.inverse_op().clone()),
    }
}

fn check_contour_level(c: f64) -> Result<()> {
    if c > -1.0 && c <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "contour level c = {c} must lie in (-1, 1]"
        )))
    }
}

/// `n_points` points of the small circle `x . mu = c` on S^2, equally spaced
/// in longitude starting on the first tangent axis.
pub fn circular_contour(mu: &UnitVector, c: f64, n_points: usize) -> Result<ContourPolyline> {
    if mu.dim() != 3 {
        return Err(Error::UnsupportedDimension {
            what: "contour polylines",
            required: 3,
            found: mu.dim(),
        });
    }
    check_contour_level(c)?;
    let r = c.acos();
    let basis = tangent_basis(mu);
    let e1 = basis.axis(0);
    let e2 = basis.axis(1);
    let points = (0..n_points)
        .map(|k| {
            let phi = TAU * k as f64 / n_points as f64;
            let (s, co) = phi.sin_cos();
            let v: DVector<f64> = (&e1 * co + &e2 * s) * r;
            exp_raw(mu, &v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContourPolyline {
        tau: None,
        kind: QuantileKind::Circular,
        points,
        closed: false,
    })
}

/// Elliptical contour: the circular contour at level `c_g` around `mu_hat`
/// mapped through `G^{-1}`.
pub fn elliptical_contour(t: &MahalanobisTransform, c_g: f64, n_points: usize) -> Result<ContourPolyline> {
    contour_semiaxes(t, c_g)?;
    let circle = circular_contour(t.mu_hat(), c_g, n_points)?;
    let points = circle
        .points
        .iter()
        .enumerate()
        .map(|(i, y)| apply_inverse(t, y).map_err(|e| e.at(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ContourPolyline {
        tau: None,
        kind: QuantileKind::Elliptical,
        points,
        closed: false,
    })
}

/// Right-continuous empirical CDF of projections.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooFewPoints { needed: 1, found: 0 });
        }
        values.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted: values })
    }

    /// `#{p_i <= t} / n`
    pub fn eval(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&p| p <= t) as f64 / self.sorted.len() as f64
    }

    pub fn quantile(&self, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        Ok(sorted_quantile(&self.sorted, tau))
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }
}

/// `D / (1 + D)`, with `D = 0` giving depth 0.
pub fn depth_from_level(d: f64) -> f64 {
    if d <= 0.0 {
        0.0
    } else {
        d / (1.0 + d)
    }
}

/// Reference distribution for the angular Mahalanobis depth.
#[derive(Clone, Copy, Debug)]
pub enum DepthReference<'a> {
    Sample(&'a DirectionalSample),
    Law(&'a ProjectionLaw),
}

/// Angular Mahalanobis depth of `x`: `D / (1 + D)` where `D` is the
/// projection CDF at `x . mu`.
pub fn amhd(reference: DepthReference<'_>, mu: &UnitVector, x: &UnitVector) -> Result<f64> {
    check_same_dim(mu.dim(), x.dim())?;
    let t = x.dot(mu);
    let level = match reference {
        DepthReference::Sample(sample) => EmpiricalCdf::new(sample.projections(mu)?)?.eval(t),
        DepthReference::Law(law) => law.cdf(t),
    };
    Ok(depth_from_level(level))
}

/// Elliptical Mahalanobis depth: AMHD of `G(y)` against the transformed
/// sample.
pub fn emhd(sample: &DirectionalSample, t: &MahalanobisTransform, y: &UnitVector) -> Result<f64> {
    let cdf = EmpiricalCdf::new(transformed_projections(sample, t)?)?;
    emhd_with(&cdf, t, y)
}

/// EMHD against a precomputed CDF of transformed projections.
pub fn emhd_with(cdf: &EmpiricalCdf, t: &MahalanobisTransform, y: &UnitVector) -> Result<f64> {
    let g = apply_forward(t, y)?;
    Ok(depth_from_level(cdf.eval(g.dot(t.mu_hat()))))
}

/// Outcome of [`trim`]. Both halves keep the original order.
#[derive(Clone, Debug, PartialEq)]
pub struct TrimResult {
    pub kept: DirectionalSample,
    pub removed: DirectionalSample,
    pub kept_indices: Vec<usize>,
    pub removed_indices: Vec<usize>,
}

/// Removes the points strictly below the contour of `summary`: projection
/// `x . mu < c` (circular) or `G(y) . mu_hat < c^G` (elliptical). Points on
/// the contour are kept.
pub fn trim(sample: &DirectionalSample, summary: &QuantileSummary) -> Result<TrimResult> {
    let projections = match summary.kind {
        QuantileKind::Circular => sample.projections(&summary.mu)?,
        QuantileKind::Elliptical => {
            let t = summary.transform.as_ref().ok_or_else(|| {
                Error::InvalidParameter("elliptical trimming needs the fitted transform".into())
            })?;
            transformed_projections(sample, t)?
        }
    };
    let (removed_indices, kept_indices): (Vec<usize>, Vec<usize>) =
        (0..sample.len()).partition(|&i| projections[i] < summary.c);
    let mut kept = sample.select(&kept_indices);
    let mut removed = sample.select(&removed_indices);
    kept = kept.with_source(format!("{} (trimmed, tau={})", sample.source(), summary.tau));
    removed = removed.with_source(format!("{} (removed, tau={})", sample.source(), summary.tau));
    Ok(TrimResult {
        kept,
        removed,
        kept_indices,
        removed_indices,
    })
}
