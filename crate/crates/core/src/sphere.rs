//! Geometry of the unit sphere S^{d-1} with the round metric.
//!
//! Points are [`UnitVector`]s; tangent vectors carry their base point so that
//! the exponential map never needs a second argument. All maps are the closed
//! forms
//!
//! ```text
//! Exp_mu(v) = cos(|v|) mu + sin(|v|) v / |v|
//! Log_mu(x) = theta / sin(theta) * (I - mu mu^T) x,   theta = arccos(x . mu)
//! ```
//!
//! valid in any dimension d >= 2. `Log_mu` is undefined at the antipode `-mu`.

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest deviation from unit norm accepted before renormalisation.
pub const UNIT_INPUT_TOLERANCE: f64 = 1e-6;

/// `x . mu <= -1 + CUT_LOCUS_MARGIN` is treated as the antipode.
pub const CUT_LOCUS_MARGIN: f64 = 1e-9;

/// Below this angle `theta / sin(theta)` is replaced by its series.
const SMALL_ANGLE: f64 = 1e-8;

/// A point on S^{d-1}.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitVector(DVector<f64>);

impl UnitVector {
    /// Builds a unit vector from coordinates that are already (nearly) unit
    /// norm. The input is renormalised; a norm off by more than 1e-6 is an
    /// error.
    pub fn new(coords: impl Into<Vec<f64>>) -> Result<Self> {
        let v = DVector::from_vec(coords.into());
        Self::from_dvector(v)
    }

    pub fn from_dvector(v: DVector<f64>) -> Result<Self> {
        check_dim(v.len())?;
        let norm = v.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_INPUT_TOLERANCE {
            return Err(Error::NotUnit { norm });
        }
        Ok(UnitVector(v / norm))
    }

    /// Projects an arbitrary nonzero vector onto the sphere.
    pub fn normalize(v: DVector<f64>) -> Result<Self> {
        check_dim(v.len())?;
        let norm = v.norm();
        if !norm.is_finite() || norm <= f64::MIN_POSITIVE {
            return Err(Error::NotUnit { norm });
        }
        Ok(UnitVector(v / norm))
    }

    /// Point with co-latitude `theta` and longitude `phi` on S^2.
    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        UnitVector(DVector::from_vec(vec![st * cp, st * sp, ct]))
    }

    /// Canonical basis vector `e_axis` in dimension `d`.
    pub fn axis(d: usize, axis: usize) -> Self {
        assert!(d >= 2 && axis < d, "axis {axis} out of range for d = {d}");
        let mut v = DVector::zeros(d);
        v[axis] = 1.0;
        UnitVector(v)
    }

    /// The north pole `e_d`.
    pub fn north_pole(d: usize) -> Self {
        Self::axis(d, d - 1)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn antipode(&self) -> UnitVector {
        UnitVector(-&self.0)
    }

    /// Applies an orthogonal matrix. The result is renormalised to absorb
    /// rounding in `rotation`.
    pub fn rotate(&self, rotation: &DMatrix<f64>) -> Result<UnitVector> {
        if rotation.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rotation.ncols(),
            });
        }
        UnitVector::from_dvector(rotation * &self.0)
    }
}

impl Serialize for UnitVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(serializer)
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::DimensionTooSmall(d))
    } else {
        Ok(())
    }
}

pub(crate) fn check_same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        })
    } else {
        Ok(())
    }
}

/// An element of the tangent space at `base`. Its norm is a geodesic length
/// in radians.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    base: UnitVector,
    vec: DVector<f64>,
}

impl TangentVector {
    /// Wraps `vec` as a tangent vector at `base`, rejecting vectors with a
    /// normal component larger than `1e-9 * |vec|`.
    pub fn new(base: UnitVector, vec: DVector<f64>) -> Result<Self> {
        check_same_dim(base.dim(), vec.len())?;
        let residual = vec.dot(base.coords()).abs();
        let bound = (1e-9 * vec.norm()).max(1e-12);
        if residual > bound {
            return Err(Error::NotTangent { residual });
        }
        Ok(TangentVector { base, vec })
    }

    /// Orthogonal projection of an ambient vector onto the tangent space.
    pub fn project(base: UnitVector, v: DVector<f64>) -> Result<Self> {
        check_same_dim(base.dim(), v.len())?;
        let vec = tangent_projection(&base, &v);
        Ok(TangentVector { base, vec })
    }

    pub fn zero(base: UnitVector) -> Self {
        let d = base.dim();
        TangentVector {
            base,
            vec: DVector::zeros(d),
        }
    }

    pub fn base(&self) -> &UnitVector {
        &self.base
    }

    pub fn vec(&self) -> &DVector<f64> {
        &self.vec
    }

    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }

    pub fn scale(&self, t: f64) -> TangentVector {
        TangentVector {
            base: self.base.clone(),
            vec: &self.vec * t,
        }
    }

    pub fn into_parts(self) -> (UnitVector, DVector<f64>) {
        (self.base, self.vec)
    }
}

/// `(I - mu mu^T) v`
pub(crate) fn tangent_projection(mu: &UnitVector, v: &DVector<f64>) -> DVector<f64> {
    v - mu.coords() * mu.coords().dot(v)
}

/// Riemannian exponential map at `v.base()`.
pub fn exp_map(v: &TangentVector) -> Result<UnitVector> {
    exp_raw(v.base(), v.vec())
}

/// Exponential map on a raw ambient vector assumed tangent at `mu`.
pub(crate) fn exp_raw(mu: &UnitVector, v: &DVector<f64>) -> Result<UnitVector> {
    let r = v.norm();
    if !(r < std::f64::consts::PI) {
        return Err(Error::CutLocus(format!(
            "tangent vector of length {r} reaches the injectivity radius pi"
        )));
    }
    if r == 0.0 {
        return Ok(mu.clone());
    }
    let (s, c) = r.sin_cos();
    let x = mu.coords() * c + v * (s / r);
    let norm = x.norm();
    Ok(UnitVector(x / norm))
}

/// Riemannian logarithmic map: the tangent vector at `mu` pointing along the
/// shortest geodesic to `x`, with length equal to the geodesic distance.
pub fn log_map(mu: &UnitVector, x: &UnitVector) -> Result<TangentVector> {
    let vec = log_raw(mu, x)?;
    Ok(TangentVector {
        base: mu.clone(),
        vec,
    })
}

pub(crate) fn log_raw(mu: &UnitVector, x: &UnitVector) -> Result<DVector<f64>> {
    check_same_dim(mu.dim(), x.dim())?;
    let c = mu.dot(x);
    if c <= -1.0 + CUT_LOCUS_MARGIN {
        return Err(Error::CutLocus(format!(
            "log map undefined at the antipode (x.mu = {c})"
        )));
    }
    let z = x.coords() - mu.coords() * c;
    let s = z.norm();
    // atan2 keeps full precision at both ends of [0, pi).
    let theta = s.atan2(c);
    if theta < SMALL_ANGLE {
        Ok(z * (1.0 + theta * theta / 6.0))
    } else {
        Ok(z * (theta / s))
    }
}

/// Great-circle distance in `[0, pi]`.
pub fn geodesic_distance(mu: &UnitVector, x: &UnitVector) -> f64 {
    mu.dot(x).clamp(-1.0, 1.0).acos()
}

/// Point `c(t) = Exp_mu(t v)` on the geodesic leaving `mu` with velocity `v`.
pub fn geodesic_point(mu: &UnitVector, v: &TangentVector, t: f64) -> Result<UnitVector> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!(
            "geodesic parameter t = {t} outside [0, 1]"
        )));
    }
    if mu != v.base() {
        return Err(Error::InvalidParameter(
            "tangent vector is based at a different point".into(),
        ));
    }
    if !(v.norm() < std::f64::consts::PI) {
        return Err(Error::CutLocus(format!(
            "tangent vector of length {} reaches the injectivity radius pi",
            v.norm()
        )));
    }
    exp_map(&v.scale(t))
}

/// Orthonormal coordinates for the tangent space at `base`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentBasis {
    base: UnitVector,
    /// d x (d-1), columns are the axes.
    axes: DMatrix<f64>,
}

impl TangentBasis {
    pub fn base(&self) -> &UnitVector {
        &self.base
    }

    /// The axes as columns of a d x (d-1) matrix.
    pub fn axes(&self) -> &DMatrix<f64> {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> DVector<f64> {
        self.axes.column(i).into_owned()
    }

    /// (d-1) coordinates of an ambient vector's tangential part.
    pub fn coordinates(&self, v: &DVector<f64>) -> DVector<f64> {
        self.axes.tr_mul(v)
    }

    pub fn lift(&self, coords: &DVector<f64>) -> DVector<f64> {
        &self.axes * coords
    }
}

/// Deterministic basis of `mu`'s orthogonal complement: the first d-1
/// columns of the rotation that carries `e_d` to `mu` along the great circle
/// through both. The frame `(axes, mu)` is right-handed and depends
/// continuously on `mu` away from `-e_d`.
pub fn tangent_basis(mu: &UnitVector) -> TangentBasis {
    let d = mu.dim();
    let m = mu.coords();
    let last = m[d - 1];
    let rest_sq: f64 = m.rows(0, d - 1).norm_squared();
    let mut axes = DMatrix::zeros(d, d - 1);
    if last < 0.0 && rest_sq == 0.0 {
        // mu = -e_d: half turn about e_1.
        axes[(0, 0)] = 1.0;
        for i in 1..d - 1 {
            axes[(i, i)] = -1.0;
        }
        return TangentBasis {
            base: mu.clone(),
            axes,
        };
    }
    // 1 / (1 + m_d), written without cancellation for m_d near -1.
    let inv = if last >= 0.0 {
        1.0 / (1.0 + last)
    } else {
        (1.0 - last) / rest_sq
    };
    for i in 0..d - 1 {
        for j in 0..d - 1 {
            axes[(j, i)] = if i == j { 1.0 } else { 0.0 } - m[i] * m[j] * inv;
        }
        axes[(d - 1, i)] = -m[i];
    }
    TangentBasis {
        base: mu.clone(),
        axes,
    }
}
