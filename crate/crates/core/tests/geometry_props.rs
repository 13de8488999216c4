use std::f64::consts::PI;

use dirdepth::depth::{order_statistic_rank, projection_quantile};
use dirdepth::estimation::{apply_forward, apply_inverse, MahalanobisTransform};
use dirdepth::linalg::{normalized_inv_sqrt, normalized_sqrt, spectral_norm, SpdShape};
use dirdepth::sphere::{exp_map, geodesic_distance, log_map, tangent_basis, TangentVector};
use dirdepth::UnitVector;
use nalgebra::{DMatrix, DVector, Rotation3};
use proptest::prelude::*;

fn unit3() -> impl Strategy<Value = UnitVector> {
    (0.0..PI, 0.0..2.0 * PI).prop_map(|(t, p)| UnitVector::from_spherical(t, p))
}

fn unit_d() -> impl Strategy<Value = UnitVector> {
    (2usize..7)
        .prop_flat_map(|d| prop::collection::vec(-1.0f64..1.0, d))
        .prop_filter_map("non-zero", |v| UnitVector::normalize(DVector::from_vec(v)).ok())
}

fn rotation() -> impl Strategy<Value = DMatrix<f64>> {
    (-PI..PI, -PI..PI, -PI..PI).prop_map(|(a, b, c)| {
        let r = Rotation3::from_euler_angles(a, b, c);
        DMatrix::from_column_slice(3, 3, r.matrix().as_slice())
    })
}

/// Random tangent shape at `mu` with eigenvalue ratio up to 20.
fn shape_at(mu: &UnitVector, a: f64, ratio: f64) -> SpdShape {
    let b = tangent_basis(mu);
    let u = b.axis(0) * a.cos() + b.axis(1) * a.sin();
    let w = b.axis(0) * -a.sin() + b.axis(1) * a.cos();
    let m = &u * u.transpose() * ratio + &w * w.transpose();
    SpdShape::with_null_direction(m, mu.clone()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn log_then_exp_returns_the_point(mu in unit_d(), seed in prop::collection::vec(-1.0f64..1.0, 6)) {
        let d = mu.dim();
        let x = UnitVector::normalize(DVector::from_iterator(d, seed.into_iter().cycle().take(d))
            + mu.coords() * 0.5);
        prop_assume!(x.is_ok());
        let x = x.unwrap();
        prop_assume!(x.dot(&mu) > -0.99);
        let v = log_map(&mu, &x).unwrap();
        prop_assert!((exp_map(&v).unwrap().coords() - x.coords()).amax() < 1e-10);
        prop_assert!((v.norm() - geodesic_distance(&mu, &x)).abs() < 1e-12);
        prop_assert!(v.vec().dot(mu.coords()).abs() < 1e-10);
    }

    #[test]
    fn exp_then_log_returns_the_vector(mu in unit3(), len in 0.0..PI - 1e-3, phi in 0.0..2.0 * PI) {
        let b = tangent_basis(&mu);
        let v = TangentVector::new(mu.clone(), (b.axis(0) * phi.cos() + b.axis(1) * phi.sin()) * len).unwrap();
        let x = exp_map(&v).unwrap();
        prop_assert!((x.coords().norm() - 1.0).abs() < 1e-12);
        prop_assert!((log_map(&mu, &x).unwrap().vec() - v.vec()).amax() < 1e-10);
    }

    #[test]
    fn log_is_rotation_equivariant(mu in unit3(), x in unit3(), o in rotation()) {
        prop_assume!(x.dot(&mu) > -0.99);
        let v = log_map(&mu, &x).unwrap();
        let w = log_map(&mu.rotate(&o).unwrap(), &x.rotate(&o).unwrap()).unwrap();
        prop_assert!((w.vec() - &o * v.vec()).amax() < 1e-10);
    }

    #[test]
    fn normalized_roots_are_inverse_contractions(mu in unit3(), a in 0.0..PI, ratio in 1.0..20.0f64, scale in 1e-4..1e2f64) {
        let m = shape_at(&mu, a, ratio);
        let m = SpdShape::with_null_direction(m.entries() * scale, mu.clone()).unwrap();
        let inv = normalized_inv_sqrt(&m, &mu).unwrap();
        let root = normalized_sqrt(&m, &mu).unwrap();
        prop_assert!((spectral_norm(&inv) - 1.0).abs() < 1e-12);
        let p = DMatrix::identity(3, 3) - mu.coords() * mu.coords().transpose();
        prop_assert!((root.entries() * inv.entries() - &p).amax() < 1e-10);
        prop_assert!((inv.entries() * mu.coords()).norm() < 1e-10);
    }

    #[test]
    fn transform_roundtrip_and_non_expansion(mu in unit3(), a in 0.0..PI, ratio in 1.0..20.0f64, y in unit3()) {
        prop_assume!(y.dot(&mu) > -0.9);
        let t = MahalanobisTransform::from_covariance(&shape_at(&mu, a, ratio), &mu).unwrap();
        let x = apply_forward(&t, &y).unwrap();
        prop_assert!(geodesic_distance(&mu, &x) <= geodesic_distance(&mu, &y) + 1e-12);
        if let Ok(back) = apply_inverse(&t, &x) {
            prop_assert!((back.coords() - y.coords()).amax() < 1e-9);
        }
    }

    #[test]
    fn quantile_cdf_duality(ps in prop::collection::vec(-1.0f64..1.0, 1..60), tau in 0.001..0.999f64) {
        let c = projection_quantile(&ps, tau).unwrap();
        let n = ps.len() as f64;
        let below = ps.iter().filter(|&&p| p < c).count() as f64 / n;
        let at_or_below = ps.iter().filter(|&&p| p <= c).count() as f64 / n;
        prop_assert!(below < tau + 1.0 / n);
        prop_assert!(at_or_below >= tau);
        prop_assert!(order_statistic_rank(tau, ps.len()) >= 1);
    }
}
