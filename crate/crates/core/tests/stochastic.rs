use landmark_core::completeness::IntegralStatus;
use landmark_core::stochastic::{
    ce_classify, rho, rho_by_quadrature, sde_coeffs, simulate_paths, CeConclusion, RadialSde, SimOpts,
};
use landmark_core::{make_kernel, Kernel64, KernelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kernel(spec: KernelSpec) -> Kernel64 {
    make_kernel(&spec).unwrap()
}

fn builtin() -> Vec<(Kernel64, f64)> {
    vec![
        (kernel(KernelSpec::Laplacian), 1.0),
        (kernel(KernelSpec::C1Bessel), 1.0),
        (kernel(KernelSpec::Gaussian), 1.0),
        (kernel(KernelSpec::LogModified { c: 1.5 }), 0.4),
        (kernel(KernelSpec::PowerGap { d: 1.0, gamma: 1.5 }), 1.0),
    ]
}

#[test]
fn closed_form_rho_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (k, a) in builtin() {
        for d in 1..=3 {
            for _ in 0..20 {
                let r = a * 10f64.powf(rng.random_range(-6.0..0.0));
                let closed = rho(&k, d, a, r).unwrap();
                let quad = rho_by_quadrature(&k, d, a, r).unwrap();
                assert!((closed - quad).abs() <= 1e-6 * closed, "{} d={d} r={r}: {closed} vs {quad}", k.name());
            }
        }
    }
}

#[test]
fn d2_rho_reduces_to_kernel_ratio() {
    for (k, a) in builtin() {
        for r in [1e-8, 1e-3, 0.1, a] {
            let want = (k.k0() + k.eval(r)) / (k.k0() + k.eval(a));
            assert!((rho(&k, 2, a, r).unwrap() - want).abs() < 1e-14);
        }
    }
}

#[test]
fn log_modified_meets_cherny_engelbert_conditions() {
    for c in [1.1, 1.5, 2.0] {
        let rep = ce_classify(&kernel(KernelSpec::LogModified { c }), 2, 0.4).unwrap();
        assert!(rep.i_rho.status.is_convergent());
        assert!(rep.i_speed.status.is_divergent());
        assert!(rep.i_speed_s.status.is_convergent());
        assert_eq!(rep.conclusion, CeConclusion::HitsZeroPositiveProb);
        assert!(!rep.heuristic);
        // near zero the third integrand behaves like 1/(r (1 - ln r)^c)
        let tail = rep.i_speed_s.tail_model.unwrap();
        assert!((tail.exponent + 1.0).abs() < 1e-3 && (tail.log_power - c).abs() < 1e-3);
    }
}

#[test]
fn smooth_kernels_fail_the_third_condition() {
    for spec in [KernelSpec::Gaussian, KernelSpec::C1Bessel] {
        let rep = ce_classify(&kernel(spec), 2, 1.0).unwrap();
        assert_eq!(rep.i_speed_s.status, IntegralStatus::Divergent);
        assert_eq!(rep.conclusion, CeConclusion::ConditionsNotMet);
    }
}

#[test]
fn laplacian_triple() {
    let rep = ce_classify(&kernel(KernelSpec::Laplacian), 2, 1.0).unwrap();
    assert!(rep.i_rho.status.is_convergent());
    assert!(rep.i_speed.status.is_divergent());
    assert!(rep.i_speed_s.status.is_convergent());
    assert_eq!(rep.conclusion, CeConclusion::HitsZeroPositiveProb);
}

#[test]
fn power_gap_threshold_in_the_plane() {
    // (1+|b|)s/(ρσ²) ~ r^{1-γ}: convergent iff γ < 2
    for (gamma, hits) in [(1.5, true), (1.9, true), (2.5, false), (3.0, false)] {
        let rep = ce_classify(&kernel(KernelSpec::PowerGap { d: 1.0, gamma }), 2, 1.0).unwrap();
        assert_eq!(rep.conclusion == CeConclusion::HitsZeroPositiveProb, hits, "gamma={gamma}");
    }
}

#[test]
fn other_dimensions_are_flagged() {
    let rep = ce_classify(&kernel(KernelSpec::LogModified { c: 1.5 }), 1, 0.4).unwrap();
    assert!(rep.heuristic);
    assert!(rep.i_rho.status.is_divergent());
    assert_eq!(rep.conclusion, CeConclusion::ConditionsNotMet);
}

#[test]
fn identical_seeds_give_identical_estimates() {
    let k = kernel(KernelSpec::LogModified { c: 1.5 });
    let c = sde_coeffs(&k, 2).unwrap();
    let opts = SimOpts { n_paths: 200, dt: 1e-3, horizon: 1.0, ..SimOpts::default() };
    let a = simulate_paths(&c, 0.1, &opts).unwrap();
    let b = simulate_paths(&c, 0.1, &opts).unwrap();
    assert_eq!(a, b);
    let other = simulate_paths(&c, 0.1, &SimOpts { seed: 43, ..opts }).unwrap();
    assert_eq!(other.seed, 43);
    assert!(a.ci95.0 <= a.p_hat && a.p_hat <= a.ci95.1);
}

#[test]
fn estimate_is_stable_under_halving_dt() {
    let k = kernel(KernelSpec::LogModified { c: 1.5 });
    let c = sde_coeffs(&k, 2).unwrap();
    let coarse = simulate_paths(&c, 0.1, &SimOpts { n_paths: 2000, ..SimOpts::default() }).unwrap();
    let fine = simulate_paths(&c, 0.1, &SimOpts { n_paths: 2000, dt: 5e-5, ..SimOpts::default() }).unwrap();
    let width = coarse.ci95.1 - coarse.ci95.0;
    assert!((coarse.p_hat - fine.p_hat).abs() < width, "{} vs {}", coarse.p_hat, fine.p_hat);
    assert!(coarse.ci95.0 > 0.0);
}

#[test]
fn paths_stepping_below_zero_count_as_hits() {
    struct Plunge;
    impl RadialSde<f64> for Plunge {
        fn sigma(&self, _: f64) -> f64 {
            0.0
        }
        fn drift(&self, _: f64) -> f64 {
            -100.0
        }
    }
    let est = simulate_paths(&Plunge, 0.5, &SimOpts { n_paths: 10, dt: 0.01, horizon: 1.0, ..SimOpts::default() }).unwrap();
    assert_eq!(est.n_hits, 10);
}
