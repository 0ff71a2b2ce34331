use approx::assert_relative_eq;
use landmark_core::dynamics::{conserved, hamiltonian, integrate, rhs, wedge, IntOpts, PhasePoint, Termination};
use landmark_core::{make_kernel, Kernel64, KernelSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn builtin() -> Vec<Kernel64> {
    [
        KernelSpec::Laplacian,
        KernelSpec::C1Bessel,
        KernelSpec::Gaussian,
        KernelSpec::LogModified { c: 1.5 },
        KernelSpec::PowerGap { d: 1.0, gamma: 1.5 },
        KernelSpec::PowerGap { d: 0.5, gamma: 3.0 },
    ]
    .iter()
    .map(|s| make_kernel(s).unwrap())
    .collect()
}

fn random_unit_ball(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-radius..radius)).collect();
        if v.iter().map(|a| a * a).sum::<f64>() <= radius * radius {
            return v;
        }
    }
}

/// `n` positions pairwise at least 0.5 apart and momenta with `|p_i| <= 1`.
fn random_state(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PhasePoint<f64> {
    let half_width = 0.5 * n as f64;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    while rows.len() < n {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-half_width..half_width)).collect();
        let far = rows
            .iter()
            .all(|y| y.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= 0.5);
        if far {
            rows.push(x);
        }
    }
    let p: Vec<Vec<f64>> = (0..n).map(|_| random_unit_ball(rng, d, 1.0)).collect();
    PhasePoint::from_rows(&rows, &p).unwrap()
}

#[test]
fn laplacian_head_on_collides_at_closed_form_time() {
    let k = make_kernel(&KernelSpec::Laplacian).unwrap();
    let x1 = 1f64.cosh().ln();
    let p1 = -1.0 / 1f64.tanh();
    let s0 = PhasePoint::new(2, 1, vec![x1, -x1], vec![p1, -p1]).unwrap();
    let tr = integrate(&s0, &k, 2.0, &IntOpts::default()).unwrap();
    // 2 log cosh(1 - t) = 1e-6
    let expected = 1.0 - (5e-7f64).exp().acosh();
    match tr.termination {
        Termination::Collision { pair: (0, 1), t_event } => {
            assert!((t_event - expected).abs() < 1e-6, "{t_event} vs {expected}");
            // the collision time implied by the threshold crossing
            assert!((t_event + (5e-7f64).exp().acosh() - 1.0).abs() < 1e-6);
        }
        t => panic!("{t:?}"),
    }
}

#[test]
fn c1_bessel_head_on_never_collides() {
    // gap(r) ≈ r² near 0, so the separation decays like e^{-2√E t} and only
    // reaches zero as t → ∞. The default threshold 1e-6 is crossed near t = 8.1;
    // a threshold far below that floor is never reached by t = 10.
    let k = make_kernel(&KernelSpec::C1Bessel).unwrap();
    let x1 = 1f64.cosh().ln();
    let p1 = -1.0 / 1f64.tanh();
    let s0 = PhasePoint::new(2, 1, vec![x1, -x1], vec![p1, -p1]).unwrap();
    let opts = IntOpts { collision_eps: 1e-12, ..IntOpts::default() };
    let tr = integrate(&s0, &k, 10.0, &opts).unwrap();
    assert_eq!(tr.termination, Termination::ReachedTEnd);
    let r = |t: f64| tr.state_at(t).unwrap().closest_pair().unwrap().2;
    let e = hamiltonian(&s0, &k);
    let rate = (r(6.0).ln() - r(9.0).ln()) / 3.0;
    assert_relative_eq!(rate, 2.0 * e.sqrt(), max_relative = 1e-3);
}

#[test]
fn conservation_drift_random_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for kernel in builtin() {
        for _ in 0..6 {
            let n = rng.random_range(2..=5);
            let d = rng.random_range(1..=3);
            let s0 = random_state(&mut rng, n, d);
            let tr = integrate(&s0, &kernel, 10.0, &IntOpts::default()).unwrap();
            let drift = &tr.conserved_drift;
            assert!(drift.max() < 1e-6, "{}: n={n} d={d} {drift:?} {:?}", kernel.name(), tr.termination);
        }
    }
}

#[test]
fn zero_momentum_landmarks_stay_at_rest() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kernel in builtin() {
        for _ in 0..3 {
            let n = rng.random_range(3..=5);
            let d = rng.random_range(1..=3);
            let mut s0 = random_state(&mut rng, n, d);
            let resting = rng.random_range(0..n);
            for k in 0..d {
                s0.p[resting * d + k] = 0.0;
            }
            let tr = integrate(&s0, &kernel, 5.0, &IntOpts::default()).unwrap();
            for s in &tr.states {
                assert!(s.pi(resting).iter().all(|v| v.abs() <= 1e-10));
            }
        }
    }
}

#[test]
fn antisymmetric_shooting_stays_antisymmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for kernel in builtin() {
        for _ in 0..3 {
            let n = rng.random_range(2..=4);
            let d = rng.random_range(1..=3);
            let mut s0 = random_state(&mut rng, n, d);
            for k in 0..d {
                s0.x[d + k] = -s0.x[k];
                s0.p[d + k] = -s0.p[k];
            }
            for v in &mut s0.p[2 * d..] {
                *v = 0.0;
            }
            if s0.closest_pair().unwrap().2 < 0.2 {
                continue;
            }
            let tr = integrate(&s0, &kernel, 5.0, &IntOpts::default()).unwrap();
            for s in &tr.states {
                let sx: f64 = (0..d).map(|k| (s.x[k] + s.x[d + k]).powi(2)).sum::<f64>().sqrt();
                let sp: f64 = (0..d).map(|k| (s.p[k] + s.p[d + k]).powi(2)).sum::<f64>().sqrt();
                assert!(sx <= 1e-8 && sp <= 1e-8, "{} {sx} {sp}", kernel.name());
            }
        }
    }
}

#[test]
fn rhs_matches_hamiltonian_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for kernel in builtin() {
        for _ in 0..10 {
            let n = rng.random_range(2..=4);
            let d = rng.random_range(1..=3);
            let s = random_state(&mut rng, n, d);
            let (dx, dp) = rhs(&s, &kernel).unwrap();
            let m = n * d;
            let dir: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = 1e-5;
            let shifted = |dxs: f64, dps: f64| {
                let mut t = s.clone();
                for i in 0..m {
                    t.x[i] += dxs * dir[i];
                    t.p[i] += dps * dir[i];
                }
                hamiltonian(&t, &kernel)
            };
            let grad_p = (shifted(0.0, h) - shifted(0.0, -h)) / (2.0 * h);
            let grad_x = (shifted(h, 0.0) - shifted(-h, 0.0)) / (2.0 * h);
            let want_p: f64 = dx.iter().zip(&dir).map(|(a, b)| a * b).sum();
            let want_x: f64 = -dp.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
            let scale = want_p.abs().max(want_x.abs()).max(1e-3);
            assert!((grad_p - want_p).abs() / scale < 1e-5, "{} dH/dp", kernel.name());
            assert!((grad_x - want_x).abs() / scale < 1e-5, "{} dH/dx {grad_x} {want_x}", kernel.name());
        }
    }
}

#[test]
fn time_reversal_returns_to_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let opts = IntOpts { rtol: 1e-11, atol: 1e-13, ..IntOpts::default() };
    for kernel in builtin() {
        for _ in 0..3 {
            let n = rng.random_range(2..=4);
            let d = rng.random_range(1..=3);
            let s0 = random_state(&mut rng, n, d);
            let fwd = integrate(&s0, &kernel, 2.0, &opts).unwrap();
            if fwd.termination != Termination::ReachedTEnd {
                continue;
            }
            let mut back = fwd.final_state().clone();
            back.p.iter_mut().for_each(|v| *v = -*v);
            let rev = integrate(&back, &kernel, 2.0, &opts).unwrap();
            let end = rev.final_state();
            for i in 0..n * d {
                assert!((end.x[i] - s0.x[i]).abs() < 1e-6, "{}", kernel.name());
                assert!((end.p[i] + s0.p[i]).abs() < 1e-6, "{}", kernel.name());
            }
        }
    }
}

#[test]
fn dense_output_tracks_accepted_states() {
    let k = make_kernel(&KernelSpec::Gaussian).unwrap();
    let s0 = PhasePoint::new(3, 2, vec![0.0, 0.0, 1.0, 0.2, -0.5, 1.0], vec![0.3, 0.0, -0.2, 0.1, 0.0, -0.4]).unwrap();
    let tr = integrate(&s0, &k, 3.0, &IntOpts::default()).unwrap();
    for (t, s) in tr.times.iter().zip(&tr.states) {
        let dense = tr.state_at(*t).unwrap();
        for (a, b) in dense.x.iter().zip(&s.x) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
    }
    assert!(tr.times.windows(2).all(|w| w[0] < w[1]));
    let h0 = conserved(&s0, &k).h;
    let mid = tr.state_at(1.234).unwrap();
    assert_relative_eq!(hamiltonian(&mid, &k), h0, max_relative = 1e-7);
}

fn vec_pair(d: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-10.0..10.0f64, d), prop::collection::vec(-10.0..10.0f64, d))
}

proptest! {
    #[test]
    fn wedge_identity(d in prop::sample::select(vec![1usize, 2, 3, 5]).prop_flat_map(vec_pair)) {
        let (y, z) = d;
        let w = wedge(&y, &z).unwrap();
        let w2: f64 = w.iter().map(|v| v * v).sum();
        let yz: f64 = y.iter().zip(&z).map(|(a, b)| a * b).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let zz: f64 = z.iter().map(|v| v * v).sum();
        prop_assert!((w2 + yz * yz - yy * zz).abs() <= 1e-12 * (yy * zz).max(1.0));
    }

    #[test]
    fn wedge_antisymmetric((y, z) in vec_pair(4)) {
        let a = wedge(&y, &z).unwrap();
        let b = wedge(&z, &y).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(u, v)| u == &-v));
        prop_assert!(wedge(&y, &y).unwrap().iter().all(|v| *v == 0.0));
    }
}
