use dirdepth::depth::{
    amhd, elliptical_projection_quantile, emhd, DepthReference, QuantileSummary,
};
use dirdepth::distributions::{kent_sample, vmf_sample, KentParams, VmfParams};
use dirdepth::estimation::{fisher_median, fit_transform};
use dirdepth::hypothesis::{kolmogorov_sf, ks_distance, ks_two_sample};
use dirdepth::replication::{run_gof_workflow, GofWorkflowConfig};
use dirdepth::rng::random_stream;
use dirdepth::UnitVector;
use nalgebra::{DMatrix, Rotation3};

fn null_gof_p_values(base_seed: u64) -> Vec<f64> {
    let config = GofWorkflowConfig {
        n: 500,
        kappa0: 9.0,
        contamination: 0.0,
        trim_tau: 0.15,
        replications: 1000,
        base_seed,
    };
    let report = run_gof_workflow(&config, 0).unwrap();
    report.records.iter().map(|r| r.pre_trim_p).collect()
}

// Replication seeds are base ^ r, so batches need bases that differ above
// the low bits to draw disjoint streams.
const BATCH_STRIDE: u64 = 1 << 32;

#[test]
fn gof_p_values_are_uniform_under_the_null() {
    let p = null_gof_p_values(BATCH_STRIDE);
    let d = ks_distance(&p, |x| x.clamp(0.0, 1.0));
    assert!(d <= 0.05, "Kolmogorov distance of p-values to uniform: {d}");
}

#[test]
fn pooled_gof_p_values_are_calibrated() {
    let p: Vec<f64> = (1..=10).flat_map(|k| null_gof_p_values(k * BATCH_STRIDE)).collect();
    let d = ks_distance(&p, |x| x.clamp(0.0, 1.0));
    let pv = kolmogorov_sf((p.len() as f64).sqrt() * d);
    assert!(pv > 0.001, "pooled D = {d}, p = {pv}");
}

#[test]
fn quantiles_and_depths_are_rotation_invariant() {
    let p = KentParams::canonical(10.0, 4.0).unwrap();
    let s = kent_sample(&p, 300, &mut random_stream(88)).unwrap().sample;
    let r = Rotation3::from_euler_angles(0.4, 1.3, -2.2);
    let o = DMatrix::from_column_slice(3, 3, r.matrix().as_slice());
    let rs = s.rotate(&o).unwrap();

    let mu = fisher_median(&s).unwrap();
    let rmu = fisher_median(&rs).unwrap();
    assert!((rmu.coords() - &o * mu.coords()).amax() < 1e-8);
    // Compare at the exactly rotated median so only the statistics differ.
    let rmu = mu.rotate(&o).unwrap();
    let t = fit_transform(&s, &mu).unwrap();
    let rt = fit_transform(&rs, &rmu).unwrap();
    for tau in [0.25, 0.5, 0.75] {
        let a = QuantileSummary::circular(&s, &mu, tau).unwrap();
        let b = QuantileSummary::circular(&rs, &rmu, tau).unwrap();
        assert!((a.c - b.c).abs() < 1e-10);
        let a = elliptical_projection_quantile(&s, &t, tau).unwrap();
        let b = elliptical_projection_quantile(&rs, &rt, tau).unwrap();
        assert!((a.c - b.c).abs() < 1e-10);
        assert!((a.minor_c.unwrap() - b.minor_c.unwrap()).abs() < 1e-10);
        assert!((a.major_c.unwrap() - b.major_c.unwrap()).abs() < 1e-10);
    }
    for (y, ry) in s.points().iter().zip(rs.points()).take(40) {
        let a = amhd(DepthReference::Sample(&s), &mu, y).unwrap();
        let b = amhd(DepthReference::Sample(&rs), &rmu, ry).unwrap();
        assert!((a - b).abs() < 1e-10);
        assert!((emhd(&s, &t, y).unwrap() - emhd(&rs, &rt, ry).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn kent_without_shape_matches_vmf_projections() {
    let kent = KentParams::canonical(6.0, 0.0).unwrap();
    let vmf = VmfParams::new(UnitVector::north_pole(3), 6.0).unwrap();
    let a = kent_sample(&kent, 10_000, &mut random_stream(89)).unwrap().sample;
    let b = vmf_sample(&vmf, 10_000, &mut random_stream(90)).unwrap();
    let d = ks_two_sample(&a.projections(vmf.mu()).unwrap(), &b.projections(vmf.mu()).unwrap());
    // Asymptotic two-sample p-value with effective size m n / (m + n).
    let p = kolmogorov_sf((5_000.0f64).sqrt() * d);
    assert!(p > 0.01, "D = {d}, p = {p}");
}
