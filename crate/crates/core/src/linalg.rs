//! Small dense symmetric linear algebra: a cyclic Jacobi eigensolver and the
//! tangent-restricted square roots used by the spherical Mahalanobis
//! transformation.
//!
//! A covariance of tangent vectors at `mu` is a d x d matrix with `mu` in its
//! null space, so `Sigma^{-1/2}` only makes sense on the tangent subspace.
//! Roots are therefore taken in the (d-1)-dimensional coordinates of
//! [`tangent_basis`] and lifted back; the lifted operators annihilate `mu`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sphere::{check_same_dim, tangent_basis, UnitVector};

/// Sweep budget for the Jacobi iteration.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Tangent eigenvalues at or below `RANK_TOLERANCE * largest` count as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Symmetric positive semi-definite operator, optionally with a known null
/// direction.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdShape {
    entries: DMatrix<f64>,
    null_direction: Option<UnitVector>,
}

impl SpdShape {
    /// Validates symmetry and positive semi-definiteness.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidParameter(format!(
                "shape matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let scale = entries.amax().max(f64::MIN_POSITIVE);
        let asym = (&entries - entries.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let entries = symmetrize(entries);
        let eig = sym_eigen(&entries)?;
        let norm = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let smallest = eig.values.last().copied().unwrap_or(0.0);
        if smallest < -1e-10 * norm {
            return Err(Error::InvalidParameter(format!(
                "shape matrix is not positive semi-definite (eigenvalue {smallest:e})"
            )));
        }
        Ok(SpdShape {
            entries,
            null_direction: None,
        })
    }

    /// Like [`SpdShape::new`], additionally checking `|M mu| <= 1e-9 |M|`.
    pub fn with_null_direction(entries: DMatrix<f64>, mu: UnitVector) -> Result<Self> {
        check_same_dim(entries.nrows(), mu.dim())?;
        let mut shape = Self::new(entries)?;
        let residual = (&shape.entries * mu.coords()).norm();
        let norm = spectral_norm(&shape);
        if residual > 1e-9 * norm.max(f64::MIN_POSITIVE) && residual > 0.0 {
            return Err(Error::InvalidParameter(format!(
                "base direction is not in the null space (|M mu| = {residual:e})"
            )));
        }
        shape.null_direction = Some(mu);
        Ok(shape)
    }

    /// Internal constructor for operators that are symmetric PSD by
    /// construction.
    pub(crate) fn from_parts(entries: DMatrix<f64>, null_direction: Option<UnitVector>) -> Self {
        SpdShape {
            entries: symmetrize(entries),
            null_direction,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn null_direction(&self) -> Option<&UnitVector> {
        self.null_direction.as_ref()
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.entries * v
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SymEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`. Each
    /// column's largest-magnitude entry is positive.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lambda = DMatrix::from_diagonal(&DVector::from_vec(self.values.clone()));
        &self.vectors * lambda * self.vectors.transpose()
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<SymEigen> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::InvalidParameter("matrix must be square".into()));
    }
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let total = a.norm();

    let mut converged = n <= 1 || total == 0.0;
    let mut sweep = 0;
    while !converged {
        if sweep == JACOBI_MAX_SWEEPS {
            return Err(Error::ConvergenceFailure {
                sweeps: JACOBI_MAX_SWEEPS,
            });
        }
        sweep += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-18 * total {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        let mut off = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    off += a[(p, q)] * a[(p, q)];
                }
            }
        }
        converged = off.sqrt() <= 1e-15 * total;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut vec = v.column(i).into_owned();
        let lead = vec.iter().copied().fold(0.0f64, |best, x| {
            if x.abs() > best.abs() {
                x
            } else {
                best
            }
        });
        if lead < 0.0 {
            vec = -vec;
        }
        vectors.set_column(col, &vec);
    }
    Ok(SymEigen { values, vectors })
}

/// Largest eigenvalue magnitude.
pub fn spectral_norm(m: &SpdShape) -> f64 {
    match sym_eigen(m.entries()) {
        Ok(eig) => eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        // Jacobi on a symmetric matrix of this size does not fail in
        // practice; fall back to the Frobenius bound.
        Err(_) => m.entries().norm(),
    }
}

/// Both normalised tangent roots of a tangent covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentRoots {
    /// `Sigma^{-1/2} / |Sigma^{-1/2}|_2`, spectral norm 1.
    pub inv_sqrt: SpdShape,
    /// `|Sigma^{-1/2}|_2 * Sigma^{1/2}`, smallest tangent singular value 1.
    pub sqrt: SpdShape,
    /// Tangent eigenvalues of the covariance, descending.
    pub eigenvalues: Vec<f64>,
}

/// Computes the normalised pseudo-roots of `m` on the tangent space at
/// `base`.
pub fn tangent_roots(m: &SpdShape, base: &UnitVector) -> Result<TangentRoots> {
    check_same_dim(m.dim(), base.dim())?;
    let basis = tangent_basis(base);
    let axes = basis.axes();
    let reduced = symmetrize(axes.tr_mul(m.entries()) * axes);
    let eig = sym_eigen(&reduced)?;
    let largest = eig.values.first().copied().unwrap_or(0.0);
    let smallest = eig.values.last().copied().unwrap_or(0.0);
    let tolerance = RANK_TOLERANCE * largest.max(0.0);
    if !(smallest > tolerance) {
        return Err(Error::RankDeficient {
            eigenvalue: smallest,
            tolerance,
        });
    }

    let inv_diag: Vec<f64> = eig.values.iter().map(|&l| (smallest / l).sqrt()).collect();
    let sqrt_diag: Vec<f64> = eig.values.iter().map(|&l| (l / smallest).sqrt()).collect();
    let lift = |diag: Vec<f64>| {
        let core = &eig.vectors * DMatrix::from_diagonal(&DVector::from_vec(diag)) * eig.vectors.transpose();
        SpdShape::from_parts(axes * core * axes.transpose(), Some(base.clone()))
    };
    Ok(TangentRoots {
        inv_sqrt: lift(inv_diag),
        sqrt: lift(sqrt_diag),
        eigenvalues: eig.values,
    })
}

/// Tangent pseudo-inverse square root of `m`, scaled to spectral norm 1.
pub fn normalized_inv_sqrt(m: &SpdShape, base: &UnitVector) -> Result<SpdShape> {
    tangent_roots(m, base).map(|r| r.inv_sqrt)
}

/// Inverse of [`normalized_inv_sqrt`] on the tangent space.
pub fn normalized_sqrt(m: &SpdShape, base: &UnitVector) -> Result<SpdShape> {
    tangent_roots(m, base).map(|r| r.sqrt)
}

/// Projection `I - mu mu^T` onto the tangent space.
pub fn tangent_identity(mu: &UnitVector) -> DMatrix<f64> {
    let d = mu.dim();
    DMatrix::identity(d, d) - mu.coords() * mu.coords().transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a + a.transpose()
    }

    /// Tangent covariance at `mu` with prescribed eigenvalues along the
    /// tangent basis axes.
    fn tangent_cov(mu: &UnitVector, eigenvalues: &[f64]) -> SpdShape {
        let b = tangent_basis(mu);
        let m = b.axes() * diag(eigenvalues) * b.axes().transpose();
        SpdShape::with_null_direction(m, mu.clone()).unwrap()
    }

    fn tangent_eigs(s: &SpdShape, mu: &UnitVector) -> Vec<f64> {
        let b = tangent_basis(mu);
        sym_eigen(&(b.axes().tr_mul(s.entries()) * b.axes())).unwrap().values
    }

    #[test]
    fn eigen_of_identity_and_diagonal() {
        let e = sym_eigen(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let e = sym_eigen(&diag(&[1.0, 4.0])).unwrap();
        assert_eq!(e.values, vec![4.0, 1.0]);
        assert_eq!(e.vectors, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn eigen_reconstructs_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..8 {
            for _ in 0..50 {
                let m = random_symmetric(&mut rng, n);
                let e = sym_eigen(&m).unwrap();
                let residual = sym_eigen(&(e.reconstruct() - &m)).unwrap().values[0].abs();
                let norm = e.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                assert!(residual <= 1e-10 * norm, "n={n}, residual {residual}");
                let gram = e.vectors.tr_mul(&e.vectors);
                assert!((gram - DMatrix::identity(n, n)).amax() < 1e-12);
                assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
                for col in e.vectors.column_iter() {
                    let lead = col.iter().copied().fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
                    assert!(lead > 0.0);
                }
            }
        }
    }

    #[test]
    fn eigen_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_symmetric(&mut rng, 5);
        let a = sym_eigen(&m).unwrap();
        let b = sym_eigen(&m.clone()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spectral_norm_examples() {
        assert_eq!(spectral_norm(&SpdShape::new(DMatrix::identity(3, 3)).unwrap()), 1.0);
        assert_eq!(spectral_norm(&SpdShape::new(diag(&[3.0, 0.5, 0.0])).unwrap()), 3.0);
    }

    #[test]
    fn spectral_norm_matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
            let m = &a * a.transpose();
            let mut v = DVector::from_element(4, 1.0);
            let mut lambda = 0.0;
            for _ in 0..5000 {
                let w = &m * &v;
                lambda = w.norm();
                v = w / lambda;
            }
            let norm = spectral_norm(&SpdShape::new(m).unwrap());
            assert!((norm - lambda).abs() <= 1e-10 * lambda);
        }
    }

    #[test]
    fn spd_shape_rejects_asymmetric_and_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(SpdShape::new(m), Err(Error::NotSymmetric(_))));
        assert!(SpdShape::new(diag(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn inv_sqrt_of_tangent_identity_is_itself() {
        let mu = UnitVector::new(vec![0.0, 0.6, 0.8]).unwrap();
        let m = SpdShape::with_null_direction(tangent_identity(&mu), mu.clone()).unwrap();
        let r = normalized_inv_sqrt(&m, &mu).unwrap();
        assert!((r.entries() - tangent_identity(&mu)).amax() < 1e-15);
        let s = normalized_sqrt(&m, &mu).unwrap();
        assert!((s.entries() - tangent_identity(&mu)).amax() < 1e-15);
    }

    #[test]
    fn inv_sqrt_hand_computed_cases() {
        let mu = UnitVector::north_pole(3);
        let r = normalized_inv_sqrt(&tangent_cov(&mu, &[4.0, 1.0]), &mu).unwrap();
        let e = tangent_eigs(&r, &mu);
        assert!((e[0] - 1.0).abs() < 1e-15 && (e[1] - 0.5).abs() < 1e-15);

        let r = normalized_inv_sqrt(&tangent_cov(&mu, &[0.25, 0.0625]), &mu).unwrap();
        let e = tangent_eigs(&r, &mu);
        assert!((e[0] - 1.0).abs() < 1e-15 && (e[1] - 0.5).abs() < 1e-15);

        let s = normalized_sqrt(&tangent_cov(&mu, &[4.0, 1.0]), &mu).unwrap();
        let e = tangent_eigs(&s, &mu);
        assert!((e[0] - 2.0).abs() < 1e-15 && (e[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn roots_compose_to_tangent_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 3..7 {
            for _ in 0..20 {
                let raw = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
                let mu = UnitVector::normalize(raw).unwrap();
                let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
                let p = tangent_identity(&mu);
                let m = &p * (&a * a.transpose()) * &p;
                let m = SpdShape::with_null_direction(m, mu.clone()).unwrap();
                let roots = tangent_roots(&m, &mu).unwrap();
                let comp = roots.inv_sqrt.entries() * roots.sqrt.entries();
                assert!((comp - &p).amax() < 1e-10);
                assert!((spectral_norm(&roots.inv_sqrt) - 1.0).abs() < 1e-12);
                assert!((roots.inv_sqrt.entries() * mu.coords()).norm() < 1e-10);
                assert!((roots.sqrt.entries() * mu.coords()).norm() < 1e-10);
                let s = tangent_eigs(&roots.sqrt, &mu);
                assert!((s.last().unwrap() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rank_deficient_covariance_is_rejected() {
        let mu = UnitVector::north_pole(3);
        let err = normalized_inv_sqrt(&tangent_cov(&mu, &[1.0, 0.0]), &mu).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
        let zero = SpdShape::new(DMatrix::zeros(3, 3)).unwrap();
        assert!(matches!(
            normalized_sqrt(&zero, &mu),
            Err(Error::RankDeficient { .. })
        ));
    }
}
