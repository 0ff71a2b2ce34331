use landmark_core::completeness::{
    classify_geodesic, estimate_gap_exponent, improper_integral, Geodesic, IntegralStatus, QuadOpts,
};
use landmark_core::{make_kernel, Kernel64, KernelSpec};

fn builtins() -> Vec<KernelSpec> {
    vec![
        KernelSpec::Laplacian,
        KernelSpec::C1Bessel,
        KernelSpec::Gaussian,
        KernelSpec::LogModified { c: 1.1 },
        KernelSpec::LogModified { c: 1.5 },
        KernelSpec::LogModified { c: 2.0 },
        KernelSpec::PowerGap { d: 1.0, gamma: 1.5 },
        KernelSpec::PowerGap { d: 1.0, gamma: 2.5 },
    ]
}

#[test]
fn gamma_threshold_sweep() {
    for gamma in [0.5, 1.0, 1.5, 1.9] {
        let k: Kernel64 = make_kernel(&KernelSpec::PowerGap { d: 1.0, gamma }).unwrap();
        assert_eq!(classify_geodesic(&k, 1.0).unwrap().geodesic, Geodesic::Incomplete, "gamma={gamma}");
    }
    for gamma in [2.0, 2.5, 3.0] {
        let k: Kernel64 = make_kernel(&KernelSpec::PowerGap { d: 1.0, gamma }).unwrap();
        assert_eq!(classify_geodesic(&k, 1.0).unwrap().geodesic, Geodesic::Complete, "gamma={gamma}");
    }
}

#[test]
fn verdict_does_not_depend_on_upper_limit() {
    for spec in builtins() {
        let k: Kernel64 = make_kernel(&spec).unwrap();
        let verdicts: Vec<_> = [0.1, 1.0, 5.0]
            .iter()
            .map(|&a| classify_geodesic(&k, a).unwrap().geodesic)
            .collect();
        assert!(verdicts.iter().all(|v| *v == verdicts[0]), "{spec:?}: {verdicts:?}");
        assert_ne!(verdicts[0], Geodesic::Inconclusive, "{spec:?}");
    }
}

#[test]
fn evidence_monotone_for_every_kernel() {
    for spec in builtins() {
        let k: Kernel64 = make_kernel(&spec).unwrap();
        let rep = classify_geodesic(&k, 1.0).unwrap();
        for w in rep.criterion.evidence.windows(2) {
            assert!(w[1].eps < w[0].eps && w[1].partial >= w[0].partial, "{spec:?}");
        }
    }
}

#[test]
fn log_modified_complete_despite_subquadratic_fit() {
    for c in [1.1, 1.5, 2.0] {
        let k: Kernel64 = make_kernel(&KernelSpec::LogModified { c }).unwrap();
        let fit = estimate_gap_exponent(&k).unwrap();
        // the logarithmic factor drags the apparent exponent below 2
        assert!(fit.gamma < 2.0, "c={c}: {}", fit.gamma);
        assert_eq!(classify_geodesic(&k, 1.0).unwrap().geodesic, Geodesic::Complete, "c={c}");
    }
}

#[test]
fn log_modified_gap_over_r_squared_grows() {
    for c in [1.1, 1.5, 2.0] {
        let k: Kernel64 = make_kernel(&KernelSpec::LogModified { c }).unwrap();
        let ratios: Vec<f64> = (1..=8)
            .map(|e| {
                let r = 10f64.powi(-e);
                k.gap(r) / (r * r)
            })
            .collect();
        for w in ratios.windows(2) {
            assert!(w[1] > w[0]);
        }
        let r = 0.3f64;
        assert_eq!(k.gap(r), r * r * (1.0 - r.ln()).powf(c));
    }
}

#[test]
fn log_power_closed_form() {
    // ∫_0^1 dr / (r (1 - ln r)^β) = 1/(β - 1) for β > 1, infinite otherwise
    for beta in [1.5f64, 2.0, 3.0] {
        let v = improper_integral(|r: f64| 1.0 / (r * (1.0 - r.ln()).powf(beta)), 1.0, &QuadOpts::default())
            .unwrap();
        match v.status {
            IntegralStatus::Convergent(x) => assert!((x - 1.0 / (beta - 1.0)).abs() < 1e-6, "beta={beta}: {x}"),
            s => panic!("beta={beta}: {s:?}"),
        }
    }
    for beta in [0.5f64, 1.0] {
        let v = improper_integral(|r: f64| 1.0 / (r * (1.0 - r.ln()).powf(beta)), 1.0, &QuadOpts::default())
            .unwrap();
        assert_eq!(v.status, IntegralStatus::Divergent, "beta={beta}");
    }
}

#[test]
fn tabulated_kernel_flagged_heuristic() {
    let samples: Vec<(f64, f64)> = (0..40).map(|k| (0.1 * k as f64, (-0.1 * k as f64).exp())).collect();
    let k: Kernel64 = make_kernel(&KernelSpec::Tabulated { samples }).unwrap();
    let rep = classify_geodesic(&k, 1.0).unwrap();
    assert!(rep.heuristic);
    // exp(-r) samples: power head fitted with gamma ≈ 1
    assert_eq!(rep.geodesic, Geodesic::Incomplete);
}
