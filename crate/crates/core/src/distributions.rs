//! Uniform, von Mises-Fisher and Kent distributions on S^{d-1}, and the law
//! of the projection `T = X . mu` for rotationally symmetric distributions.
//!
//! Samplers take an explicit random stream; nothing here touches ambient
//! randomness. See [`crate::rng`] for the stream type used throughout the
//! crate.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::quadrature::{adaptive_simpson, periodic_trapezoid};
use crate::sample::DirectionalSample;
use crate::sphere::{check_same_dim, tangent_basis, UnitVector};

/// Consecutive envelope rejections tolerated by [`kent_sample`].
pub const KENT_STALL_LIMIT: usize = 1_000_000;

/// Surface area of S^{k}.
pub fn sphere_area(k: usize) -> f64 {
    let h = (k as f64 + 1.0) / 2.0;
    2.0 * PI.powf(h) / ln_gamma(h).exp()
}

/// `ln(sinh(k))` without overflow.
fn ln_sinh(k: f64) -> f64 {
    if k > 20.0 {
        k + (-(-2.0 * k).exp()).ln_1p() - std::f64::consts::LN_2
    } else {
        k.sinh().ln()
    }
}

/// von Mises-Fisher parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct VmfParams {
    mu: UnitVector,
    kappa: f64,
    log_norm: f64,
}

impl VmfParams {
    pub fn new(mu: UnitVector, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "concentration must be finite and non-negative, got {kappa}"
            )));
        }
        let d = mu.dim();
        let log_norm = if d == 3 {
            if kappa < 1e-12 {
                -(4.0 * PI).ln()
            } else {
                kappa.ln() - (4.0 * PI).ln() - ln_sinh(kappa)
            }
        } else {
            // c_d = 1 / (omega_{d-1} * int (1-t^2)^{(d-3)/2} e^{kappa t} dt)
            let law = ProjectionLaw::vmf_quadrature(kappa, d)?;
            -(sphere_area(d - 2).ln() + law.log_total_mass)
        };
        Ok(VmfParams { mu, kappa, log_norm })
    }

    pub fn mu(&self) -> &UnitVector {
        &self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    /// `ln c_d(kappa)`.
    pub fn log_normalizer(&self) -> f64 {
        self.log_norm
    }

    pub fn projection_law(&self) -> Result<ProjectionLaw> {
        ProjectionLaw::vmf(self.kappa, self.dim())
    }
}

/// Normalised vMF density with respect to surface measure.
pub fn vmf_density(p: &VmfParams, x: &UnitVector) -> Result<f64> {
    check_same_dim(p.dim(), x.dim())?;
    Ok((p.log_norm + p.kappa * x.dot(&p.mu)).exp())
}

/// Draws `n` points from vMF(mu, kappa).
///
/// For d = 3 the projection is drawn by exact CDF inversion; otherwise by
/// numerical inversion of the projection law. The remaining direction is
/// uniform on the sphere orthogonal to `mu`.
pub fn vmf_sample<R: Rng + ?Sized>(p: &VmfParams, n: usize, rng: &mut R) -> Result<DirectionalSample> {
    if n == 0 {
        return Err(Error::TooFewPoints { needed: 1, found: 0 });
    }
    let d = p.dim();
    let points = if d == 3 {
        let sampler = Vmf3Sampler::new(&p.mu, p.kappa);
        (0..n)
            .map(|_| UnitVector::from_dvector(DVector::from_row_slice(&sampler.draw(rng))))
            .collect::<Result<Vec<_>>>()?
    } else {
        let law = p.projection_law()?;
        let basis = tangent_basis(&p.mu);
        (0..n)
            .map(|_| {
                let t = law.quantile(rng.random::<f64>())?;
                let dir = random_tangent_direction(d - 1, rng);
                let x = p.mu.coords() * t + basis.lift(&dir) * (1.0 - t * t).max(0.0).sqrt();
                UnitVector::normalize(x)
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(DirectionalSample::from_parts(
        points,
        false,
        format!("vmf(kappa={})", p.kappa),
    ))
}

/// Uniform direction in R^k.
fn random_tangent_direction<R: Rng + ?Sized>(k: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 1e-300 {
            return g / norm;
        }
    }
}

/// Exact vMF sampler on S^2 working on plain arrays.
pub(crate) struct Vmf3Sampler {
    mu: [f64; 3],
    e1: [f64; 3],
    e2: [f64; 3],
    kappa: f64,
    /// `1 - exp(-2 kappa)`
    span: f64,
}

impl Vmf3Sampler {
    pub(crate) fn new(mu: &UnitVector, kappa: f64) -> Self {
        let basis = tangent_basis(mu);
        let arr = |v: &DVector<f64>| [v[0], v[1], v[2]];
        Vmf3Sampler {
            mu: arr(mu.coords()),
            e1: arr(&basis.axis(0)),
            e2: arr(&basis.axis(1)),
            kappa,
            span: -(-2.0 * kappa).exp_m1(),
        }
    }

    /// `T = 1 + ln(u + (1 - u) e^{-2 kappa}) / kappa`
    pub(crate) fn projection<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        if self.kappa == 0.0 {
            2.0 * u - 1.0
        } else {
            (1.0 + (-(1.0 - u) * self.span).ln_1p() / self.kappa).clamp(-1.0, 1.0)
        }
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 3] {
        let t = self.projection(rng);
        let phi = TAU * rng.random::<f64>();
        let s = (1.0 - t * t).max(0.0).sqrt();
        let (sp, cp) = phi.sin_cos();
        let mut x = [0.0; 3];
        for k in 0..3 {
            x[k] = t * self.mu[k] + s * (cp * self.e1[k] + sp * self.e2[k]);
        }
        x
    }
}

/// Kent parameters on S^2: density `c exp(kappa x.mu + x^T A x)` with
/// `A mu = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct KentParams {
    mu: UnitVector,
    kappa: f64,
    shape: DMatrix<f64>,
    lambda_max: f64,
    log_norm: f64,
}

impl KentParams {
    /// General constructor. The normalising constant is computed here by
    /// quadrature and cached.
    pub fn new(mu: UnitVector, kappa: f64, shape: DMatrix<f64>) -> Result<Self> {
        if mu.dim() != 3 {
            return Err(Error::UnsupportedDimension {
                what: "Kent distribution",
                required: 3,
                found: mu.dim(),
            });
        }
        if shape.nrows() != 3 || shape.ncols() != 3 {
            return Err(Error::InvalidParameter("Kent shape must be 3x3".into()));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "concentration must be finite and non-negative, got {kappa}"
            )));
        }
        let scale = shape.amax().max(1.0);
        let asym = (&shape - shape.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let residual = (&shape * mu.coords()).amax();
        if residual > 1e-10 * scale {
            return Err(Error::InvalidParameter(format!(
                "Kent shape must annihilate mu (|A mu| = {residual:e})"
            )));
        }
        let lambda_max = sym_eigen(&shape)?.values[0];
        let log_norm = kent_log_normalizer(&mu, kappa, &shape, lambda_max)?;
        Ok(KentParams {
            mu,
            kappa,
            shape,
            lambda_max,
            log_norm,
        })
    }

    /// `mu = e_3`, `A = diag(beta, -beta, 0)`, restricted to the unimodal
    /// regime `0 <= 2 beta < kappa`.
    pub fn canonical(kappa: f64, beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !(2.0 * beta < kappa) {
            return Err(Error::InvalidParameter(format!(
                "canonical Kent parameters need 0 <= 2 beta < kappa, got kappa={kappa}, beta={beta}"
            )));
        }
        let shape = DMatrix::from_diagonal(&DVector::from_vec(vec![beta, -beta, 0.0]));
        Self::new(UnitVector::north_pole(3), kappa, shape)
    }

    pub fn mu(&self) -> &UnitVector {
        &self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_norm
    }

    pub fn quadratic(&self, x: &UnitVector) -> f64 {
        x.coords().dot(&(&self.shape * x.coords()))
    }

    /// vMF part, used for the envelope and the rotational projection law.
    pub fn rotational_part(&self) -> Result<VmfParams> {
        VmfParams::new(self.mu.clone(), self.kappa)
    }
}

/// `ln c` for the Kent density, from the double integral over co-latitude and
/// longitude in the frame of `mu`. Since `A mu = 0`,
/// `x^T A x = sin^2(theta) u(phi)^T A u(phi)`; the periodic longitude integral
/// uses the trapezoid rule and the co-latitude integral adaptive Simpson.
fn kent_log_normalizer(mu: &UnitVector, kappa: f64, a: &DMatrix<f64>, lambda_max: f64) -> Result<f64> {
    let basis = tangent_basis(mu);
    let e1 = basis.axis(0);
    let e2 = basis.axis(1);
    let a11 = e1.dot(&(a * &e1));
    let a12 = e1.dot(&(a * &e2));
    let a22 = e2.dot(&(a * &e2));
    let inner = |theta: f64| -> Result<f64> {
        let s2 = theta.sin().powi(2);
        periodic_trapezoid(
            |phi| {
                let (sp, cp) = phi.sin_cos();
                let q = a11 * cp * cp + 2.0 * a12 * cp * sp + a22 * sp * sp;
                (s2 * q - lambda_max).exp()
            },
            1e-14,
        )
    };
    // Scaled integrand: exp(kappa (cos theta - 1) + x^T A x - lambda_max) sin theta.
    let failure = std::cell::Cell::new(None);
    let integrand = |theta: f64| match inner(theta) {
        Ok(v) => (kappa * (theta.cos() - 1.0)).exp() * theta.sin() * v,
        Err(e) => {
            failure.set(Some(e));
            0.0
        }
    };
    let rough = adaptive_simpson(&integrand, 0.0, PI, 1e-6, 64)?;
    let total = adaptive_simpson(&integrand, 0.0, PI, 1e-13 * rough, 64)
        .map_err(|e| Error::NormalizationFailure(e.to_string()))?;
    if let Some(e) = failure.take() {
        return Err(Error::NormalizationFailure(e.to_string()));
    }
    if !(total > 0.0) {
        return Err(Error::NormalizationFailure(format!(
            "non-positive mass {total}"
        )));
    }
    Ok(-(total.ln() + kappa + lambda_max))
}

/// Normalised Kent density.
pub fn kent_density(p: &KentParams, x: &UnitVector) -> Result<f64> {
    check_same_dim(3, x.dim())?;
    Ok((p.log_norm + p.kappa * x.dot(&p.mu) + p.quadratic(x)).exp())
}

/// Output of [`kent_sample`].
#[derive(Clone, Debug)]
pub struct KentDraws {
    pub sample: DirectionalSample,
    /// Accepted / proposed envelope draws.
    pub acceptance_rate: f64,
}

/// Exact Kent sampling by rejection from the vMF(mu, kappa) envelope; a
/// proposal `x` is accepted with probability `exp(x^T A x - lambda_max(A))`.
pub fn kent_sample<R: Rng + ?Sized>(p: &KentParams, n: usize, rng: &mut R) -> Result<KentDraws> {
    if n == 0 {
        return Err(Error::TooFewPoints { needed: 1, found: 0 });
    }
    let envelope = Vmf3Sampler::new(&p.mu, p.kappa);
    let a = &p.shape;
    let a = [
        [a[(0, 0)], a[(0, 1)], a[(0, 2)]],
        [a[(1, 0)], a[(1, 1)], a[(1, 2)]],
        [a[(2, 0)], a[(2, 1)], a[(2, 2)]],
    ];
    let mut points = Vec::with_capacity(n);
    let mut proposed = 0usize;
    while points.len() < n {
        let mut streak = 0usize;
        loop {
            let x = envelope.draw(rng);
            proposed += 1;
            let mut q = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    q += x[i] * a[i][j] * x[j];
                }
            }
            let u: f64 = rng.random();
            if u < (q - p.lambda_max).exp() {
                points.push(UnitVector::from_dvector(DVector::from_row_slice(&x))?);
                break;
            }
            streak += 1;
            if streak >= KENT_STALL_LIMIT {
                return Err(Error::SamplerStall(streak));
            }
        }
    }
    Ok(KentDraws {
        sample: DirectionalSample::from_parts(points, false, format!("kent(kappa={})", p.kappa)),
        acceptance_rate: n as f64 / proposed as f64,
    })
}

/// Uniform sample on S^{d-1} from normalised Gaussian vectors.
pub fn uniform_sphere_sample<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Result<DirectionalSample> {
    if d < 2 {
        return Err(Error::DimensionTooSmall(d));
    }
    if n == 0 {
        return Err(Error::TooFewPoints { needed: 1, found: 0 });
    }
    let points = (0..n)
        .map(|_| UnitVector::normalize(random_tangent_direction(d, rng)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DirectionalSample::from_parts(points, false, "uniform".into()))
}

/// Number of equal co-latitude panels holding cached partial integrals.
const LAW_PANELS: usize = 64;

#[derive(Clone)]
enum LawKind {
    /// vMF on S^2: `f(t) = kappa e^{kappa t} / (2 sinh kappa)`.
    Vmf3 { kappa: f64 },
    /// Arbitrary profile, tabulated by quadrature.
    Tabulated(Arc<Tabulated>),
}

struct Tabulated {
    /// Unnormalised profile `f(t)`.
    profile: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `ln` of the scale the profile was divided by (vMF profiles are stored
    /// as `exp(kappa (t - 1))`).
    log_scale: f64,
    /// `int_0^pi sin^{d-2}(theta) f(cos theta) d theta`
    total: f64,
    /// `upper[k] = int_{theta_k}^{pi} ...` at the panel nodes.
    upper: Vec<f64>,
    dim: usize,
}

impl Tabulated {
    fn weight(&self, theta: f64) -> f64 {
        let s = theta.sin();
        let jac = if self.dim == 2 { 1.0 } else { s.powi(self.dim as i32 - 2) };
        jac * (self.profile)(theta.cos())
    }

    fn node(k: usize) -> f64 {
        PI * k as f64 / LAW_PANELS as f64
    }

    /// `int_theta^pi weight`, unnormalised.
    fn upper_mass(&self, theta: f64) -> f64 {
        let theta = theta.clamp(0.0, PI);
        let k = ((theta / PI * LAW_PANELS as f64) as usize).min(LAW_PANELS - 1);
        let next = Self::node(k + 1);
        let tol = 1e-15 * self.total;
        let partial = adaptive_simpson(|th| self.weight(th), theta, next, tol, 1).unwrap_or_else(|_| {
            // Fall back to a fine composite rule; the integrand is smooth.
            adaptive_simpson(|th| self.weight(th), theta, next, 1e-10 * self.total, 64).unwrap_or(0.0)
        });
        self.upper[k + 1] + partial
    }
}

/// Law of `T = X . mu` on [-1, 1] for a rotationally symmetric distribution
/// on S^{d-1}: density `f~(t) ∝ (1 - t^2)^{(d-3)/2} f(t)` and its CDF.
#[derive(Clone)]
pub struct ProjectionLaw {
    dim: usize,
    kind: LawKind,
    log_total_mass: f64,
}

impl fmt::Debug for ProjectionLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            LawKind::Vmf3 { kappa } => format!("Vmf3 {{ kappa: {kappa} }}"),
            LawKind::Tabulated(_) => "Tabulated".to_string(),
        };
        f.debug_struct("ProjectionLaw")
            .field("dim", &self.dim)
            .field("kind", &kind)
            .finish()
    }
}

impl ProjectionLaw {
    /// Projection law of vMF(kappa) on S^{d-1}; closed form for d = 3.
    pub fn vmf(kappa: f64, d: usize) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid concentration {kappa}")));
        }
        if d == 3 {
            let log_total_mass = if kappa < 1e-12 {
                std::f64::consts::LN_2
            } else {
                // int e^{kappa t} dt = 2 sinh(kappa) / kappa
                std::f64::consts::LN_2 + ln_sinh(kappa) - kappa.ln()
            };
            Ok(ProjectionLaw {
                dim: 3,
                kind: LawKind::Vmf3 { kappa },
                log_total_mass,
            })
        } else {
            Self::vmf_quadrature(kappa, d)
        }
    }

    /// vMF projection law through the general quadrature path, in any
    /// dimension.
    pub fn vmf_quadrature(kappa: f64, d: usize) -> Result<Self> {
        Self::tabulate(Box::new(move |t: f64| (kappa * (t - 1.0)).exp()), kappa, d)
    }

    /// Projection law for the density profile `f` (up to a constant) of a
    /// rotationally symmetric distribution on S^{d-1}.
    pub fn from_profile<F>(f: F, d: usize) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::tabulate(Box::new(f), 0.0, d)
    }

    fn tabulate(profile: Box<dyn Fn(f64) -> f64 + Send + Sync>, log_scale: f64, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::DimensionTooSmall(d));
        }
        let mut tab = Tabulated {
            profile,
            log_scale,
            total: 0.0,
            upper: vec![0.0; LAW_PANELS + 1],
            dim: d,
        };
        let rough = adaptive_simpson(|th| tab.weight(th), 0.0, PI, 1e-8, LAW_PANELS)?;
        if !(rough > 0.0) {
            return Err(Error::QuadratureFailure(format!(
                "profile has non-positive mass {rough}"
            )));
        }
        let tol = 1e-14 * rough;
        for k in (0..LAW_PANELS).rev() {
            let piece = adaptive_simpson(
                |th| tab.weight(th),
                Tabulated::node(k),
                Tabulated::node(k + 1),
                tol / LAW_PANELS as f64,
                1,
            )?;
            if piece < 0.0 {
                return Err(Error::QuadratureFailure("profile is negative".into()));
            }
            tab.upper[k] = tab.upper[k + 1] + piece;
        }
        tab.total = tab.upper[0];
        let log_total_mass = tab.total.ln() + tab.log_scale;
        Ok(ProjectionLaw {
            dim: d,
            kind: LawKind::Tabulated(Arc::new(tab)),
            log_total_mass,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `ln int_{-1}^{1} (1 - t^2)^{(d-3)/2} f(t) dt` for the profile as given.
    pub fn log_total_mass(&self) -> f64 {
        self.log_total_mass
    }

    /// Density `f~(t)`; zero outside [-1, 1].
    pub fn density(&self, t: f64) -> f64 {
        if !(-1.0..=1.0).contains(&t) {
            return 0.0;
        }
        match &self.kind {
            LawKind::Vmf3 { kappa } => vmf3_density(*kappa, t),
            LawKind::Tabulated(tab) => {
                let radial = if tab.dim == 3 {
                    1.0
                } else {
                    (1.0 - t * t).powf((tab.dim as f64 - 3.0) / 2.0)
                };
                radial * (tab.profile)(t) / tab.total
            }
        }
    }

    /// CDF `F~(t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= -1.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        match &self.kind {
            LawKind::Vmf3 { kappa } => vmf3_cdf(*kappa, t),
            LawKind::Tabulated(tab) => (tab.upper_mass(t.acos()) / tab.total).clamp(0.0, 1.0),
        }
    }

    /// The `tau`-quantile by bisection on the CDF.
    pub fn quantile(&self, tau: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidParameter(format!("tau = {tau} outside [0, 1]")));
        }
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < tau {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }
}

fn vmf3_density(kappa: f64, t: f64) -> f64 {
    if kappa == 0.0 {
        0.5
    } else if kappa < 1.0 {
        kappa * (kappa * (t + 1.0)).exp() / (2.0 * kappa).exp_m1()
    } else {
        kappa * (kappa * (t - 1.0)).exp() / -(-2.0 * kappa).exp_m1()
    }
}

fn vmf3_cdf(kappa: f64, t: f64) -> f64 {
    if kappa == 0.0 {
        0.5 * (t + 1.0)
    } else if kappa < 1.0 {
        (kappa * (t + 1.0)).exp_m1() / (2.0 * kappa).exp_m1()
    } else {
        ((kappa * (t - 1.0)).exp() - (-2.0 * kappa).exp()) / -(-2.0 * kappa).exp_m1()
    }
}

/// Projection law of a vMF or of the rotational part of a Kent law.
pub fn projection_law(dist: &VmfParams) -> Result<ProjectionLaw> {
    dist.projection_law()
}

/// The unique `c` with `F~(c) = tau`, the minimiser of `E rho_tau(T - c)`.
pub fn theoretical_quantile(law: &ProjectionLaw, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tau = {tau} must lie strictly between 0 and 1"
        )));
    }
    law.quantile(tau)
}
