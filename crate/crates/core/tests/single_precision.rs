use landmark_core::completeness::{classify_geodesic, Geodesic};
use landmark_core::dynamics::{integrate, IntOpts, Termination};
use landmark_core::geometry::{collision_bound, curve_length, SampledCurve};
use landmark_core::twobody::{breakdown_forecast, collision_time, TwoBodyState, Verdict};
use landmark_core::{make_kernel, Kernel32, KernelSpec, PhasePoint32};

fn kernel(spec: KernelSpec) -> Kernel32 {
    make_kernel(&spec).unwrap()
}

#[test]
fn classification_agrees_with_double_precision() {
    assert_eq!(classify_geodesic(&kernel(KernelSpec::Laplacian), 1.0).unwrap().geodesic, Geodesic::Incomplete);
    assert_eq!(classify_geodesic(&kernel(KernelSpec::Gaussian), 1.0).unwrap().geodesic, Geodesic::Complete);
}

#[test]
fn integration_conserves_energy_to_single_precision() {
    let k = kernel(KernelSpec::Gaussian);
    let s0 = PhasePoint32::new(3, 2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.5], vec![0.3, 0.1, -0.2, 0.4, 0.0, -0.5]).unwrap();
    let opts = IntOpts { rtol: 1e-5, atol: 1e-7, ..IntOpts::default() };
    let tr = integrate(&s0, &k, 5.0f32, &opts).unwrap();
    assert_eq!(tr.termination, Termination::ReachedTEnd);
    assert!(tr.conserved_drift.max() < 1e-4, "{:?}", tr.conserved_drift);
}

#[test]
fn two_body_and_geometry_in_single_precision() {
    let k = kernel(KernelSpec::Laplacian);
    let a = 2.0 * 1f32.cosh().ln();
    let t = collision_time(&k, a, 1.0).unwrap().finite().unwrap();
    assert!((t - 1.0).abs() < 1e-4, "{t}");

    let tb = TwoBodyState::new(vec![1.0f32, 0.0], vec![-0.5, 0.3], vec![0.0, 0.0], vec![0.2, 0.0]).unwrap();
    assert_eq!(breakdown_forecast(&tb, &k).unwrap().verdict, Verdict::GlobalExistence);

    let pts: Vec<Vec<f32>> = (0..=10).map(|j| vec![-1.0 + 0.05 * j as f32, 1.0 - 0.05 * j as f32]).collect();
    let c = SampledCurve::new(2, 1, (0..=10).map(|j| j as f32).collect(), pts).unwrap();
    let len = curve_length(&c, &k).unwrap();
    assert!((len - collision_bound(&c, 0, 1, &k).unwrap()).abs() < 1e-5 * len);
}
