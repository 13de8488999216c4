//! Location and shape estimators: the Fisher spherical median, the
//! tangent-space covariance, and the spherical Mahalanobis transformation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{tangent_identity, tangent_roots, SpdShape};
use crate::sample::DirectionalSample;
use crate::sphere::{check_same_dim, exp_raw, log_raw, tangent_basis, tangent_projection, UnitVector};

const MEDIAN_MAX_ITERATIONS: usize = 500;
const MEDIAN_GRADIENT_TOLERANCE: f64 = 1e-9;
/// Terms with `|x . gamma| > 1 - MEDIAN_SINGULAR` are left out of the gradient.
const MEDIAN_SINGULAR: f64 = 1e-12;

/// Normalised coordinate-wise mean.
pub fn spherical_mean(sample: &DirectionalSample) -> Result<UnitVector> {
    let d = sample.dim();
    let sum = sample
        .points()
        .iter()
        .fold(DVector::zeros(d), |acc, p| acc + p.coords());
    let resultant = sum.norm() / sample.len() as f64;
    if resultant < 1e-12 {
        return Err(Error::DegenerateSample(format!(
            "mean resultant length {resultant:e} is too small to define a mean direction"
        )));
    }
    UnitVector::normalize(sum)
}

/// Result of the median descent.
#[derive(Clone, Debug, PartialEq)]
pub struct MedianFit {
    pub median: UnitVector,
    /// Mean geodesic distance `(1/n) sum arccos(x_i . median)`.
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Empirical Fisher spherical median, started from the spherical mean.
pub fn fisher_median(sample: &DirectionalSample) -> Result<UnitVector> {
    fisher_median_fit(sample).map(|f| f.median)
}

pub fn fisher_median_fit(sample: &DirectionalSample) -> Result<MedianFit> {
    if sample.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            found: sample.len(),
        });
    }
    let init = spherical_mean(sample)?;
    fisher_median_from(sample, init)
}

fn mean_distance(points: &[UnitVector], gamma: &UnitVector) -> f64 {
    points
        .iter()
        .map(|x| x.dot(gamma).clamp(-1.0, 1.0).acos())
        .sum::<f64>()
        / points.len() as f64
}

fn median_gradient(points: &[UnitVector], gamma: &UnitVector) -> DVector<f64> {
    let mut g = DVector::zeros(gamma.dim());
    for x in points {
        let c = x.dot(gamma);
        if c.abs() > 1.0 - MEDIAN_SINGULAR {
            continue;
        }
        g -= x.coords() / (1.0 - c * c).sqrt();
    }
    tangent_projection(gamma, &g) / points.len() as f64
}

/// Riemannian gradient descent on the mean geodesic distance from a given
/// starting direction, with Armijo backtracking from a unit step.
pub fn fisher_median_from(sample: &DirectionalSample, init: UnitVector) -> Result<MedianFit> {
    check_same_dim(sample.dim(), init.dim())?;
    let points = sample.points();
    let mut gamma = init;
    let initial_objective = mean_distance(points, &gamma);
    let mut objective = initial_objective;
    let mut grad = median_gradient(points, &gamma);
    let mut iterations = 0;
    while iterations < MEDIAN_MAX_ITERATIONS {
        let gnorm = grad.norm();
        if gnorm < MEDIAN_GRADIENT_TOLERANCE {
            break;
        }
        let mut step = 1.0;
        let mut accepted = None;
        while step * gnorm > 1e-17 {
            if step * gnorm < std::f64::consts::PI {
                let candidate = exp_raw(&gamma, &(&grad * -step))?;
                let value = mean_distance(points, &candidate);
                if value <= objective - 1e-4 * step * gnorm * gnorm {
                    accepted = Some((candidate, value));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((next, value)) = accepted else {
            // No representable decrease left.
            break;
        };
        gamma = next;
        objective = value;
        grad = median_gradient(points, &gamma);
        iterations += 1;
    }
    Ok(MedianFit {
        gradient_norm: grad.norm(),
        median: gamma,
        objective,
        initial_objective,
        iterations,
    })
}

/// `(1/n) sum Log_mu(y_i) Log_mu(y_i)^T`, uncentred, with `mu` in the null
/// space.
pub fn tangent_covariance(sample: &DirectionalSample, mu: &UnitVector) -> Result<SpdShape> {
    check_same_dim(sample.dim(), mu.dim())?;
    let d = mu.dim();
    let mut cov = DMatrix::zeros(d, d);
    for (i, y) in sample.points().iter().enumerate() {
        let v = log_raw(mu, y).map_err(|e| e.at(i))?;
        cov.ger(1.0, &v, &v, 1.0);
    }
    cov /= sample.len() as f64;
    let p = tangent_identity(mu);
    Ok(SpdShape::from_parts(&p * cov * &p, Some(mu.clone())))
}

/// Spherical Mahalanobis transformation `G(y) = Exp(F Log(y))` and its inverse
/// `G^{-1}(x) = Exp(S Log(x))`, with `F = Sigma^{-1/2} / |Sigma^{-1/2}|_2` and
/// `S = F^{-1}` on the tangent space at `mu_hat`.
#[derive(Clone, Debug, PartialEq)]
pub struct MahalanobisTransform {
    mu_hat: UnitVector,
    forward_op: SpdShape,
    inverse_op: SpdShape,
    tangent_eigenvalues: Vec<f64>,
}

impl MahalanobisTransform {
    /// The identity map, `Sigma* = I`.
    pub fn identity(mu: UnitVector) -> Self {
        let p = tangent_identity(&mu);
        let d = mu.dim();
        MahalanobisTransform {
            forward_op: SpdShape::from_parts(p.clone(), Some(mu.clone())),
            inverse_op: SpdShape::from_parts(p, Some(mu.clone())),
            tangent_eigenvalues: vec![1.0; d - 1],
            mu_hat: mu,
        }
    }

    /// Builds the transform from a tangent covariance at `mu`.
    pub fn from_covariance(cov: &SpdShape, mu: &UnitVector) -> Result<Self> {
        let roots = tangent_roots(cov, mu)?;
        Ok(MahalanobisTransform {
            mu_hat: mu.clone(),
            forward_op: roots.inv_sqrt,
            inverse_op: roots.sqrt,
            tangent_eigenvalues: roots.eigenvalues,
        })
    }

    pub fn mu_hat(&self) -> &UnitVector {
        &self.mu_hat
    }

    pub fn forward_op(&self) -> &SpdShape {
        &self.forward_op
    }

    pub fn inverse_op(&self) -> &SpdShape {
        &self.inverse_op
    }

    /// Tangent eigenvalues of the covariance the transform was fitted to,
    /// descending.
    pub fn tangent_eigenvalues(&self) -> &[f64] {
        &self.tangent_eigenvalues
    }

    /// Tangent singular values of the inverse operator, ascending. With
    /// spectral-norm normalisation the first one is 1.
    pub fn inverse_singular_values(&self) -> Vec<f64> {
        let smallest = *self.tangent_eigenvalues.last().unwrap_or(&1.0);
        let mut s: Vec<f64> = self
            .tangent_eigenvalues
            .iter()
            .map(|&l| (l / smallest).sqrt())
            .collect();
        s.reverse();
        s
    }

    /// Ratio of the largest to the smallest tangent eigenvalue.
    pub fn anisotropy(&self) -> f64 {
        let first = self.tangent_eigenvalues.first().copied().unwrap_or(1.0);
        let last = self.tangent_eigenvalues.last().copied().unwrap_or(1.0);
        first / last
    }
}

/// Fits the transform to `sample` at base point `mu`.
pub fn fit_transform(sample: &DirectionalSample, mu: &UnitVector) -> Result<MahalanobisTransform> {
    let cov = tangent_covariance(sample, mu)?;
    MahalanobisTransform::from_covariance(&cov, mu)
}

/// `G(y)`
pub fn apply_forward(t: &MahalanobisTransform, y: &UnitVector) -> Result<UnitVector> {
    let v = log_raw(&t.mu_hat, y)?;
    let w = t.forward_op.apply(&v);
    exp_raw(&t.mu_hat, &w)
}

/// `G^{-1}(x)`; fails when the expanded tangent vector reaches length pi.
pub fn apply_inverse(t: &MahalanobisTransform, x: &UnitVector) -> Result<UnitVector> {
    let v = log_raw(&t.mu_hat, x)?;
    let w = t.inverse_op.apply(&v);
    exp_raw(&t.mu_hat, &w)
}

/// Applies `G` to every point.
pub fn transform_sample(t: &MahalanobisTransform, sample: &DirectionalSample) -> Result<DirectionalSample> {
    let points = sample
        .points()
        .iter()
        .enumerate()
        .map(|(i, y)| apply_forward(t, y).map_err(|e| e.at(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DirectionalSample::from_parts(
        points,
        sample.hemisphere_folded(),
        format!("{} (transformed)", sample.source()),
    ))
}

/// Reflects points with `x . pole < 0` to `-x`. Points on the equator are
/// kept as they are.
pub fn hemisphere_fold(sample: &DirectionalSample, pole: &UnitVector) -> Result<DirectionalSample> {
    check_same_dim(sample.dim(), pole.dim())?;
    let points = sample
        .points()
        .iter()
        .map(|x| if x.dot(pole) < 0.0 { x.antipode() } else { x.clone() })
        .collect();
    Ok(DirectionalSample::from_parts(points, true, sample.source().to_string()))
}

/// Tangent coordinates of `Log_mu(y)` in the basis of [`tangent_basis`].
pub fn tangent_coordinates(mu: &UnitVector, y: &UnitVector) -> Result<DVector<f64>> {
    let v = log_raw(mu, y)?;
    Ok(tangent_basis(mu).coordinates(&v))
}
