use super::*;
use alloc::vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg() -> SdrConfig {
    SdrConfig::default()
}

fn random_channel(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im) * scale
        })
        .collect()
}

fn problem(channels: Vec<Vec<C64>>, gamma: Vec<f64>, noise: f64, budgets: Vec<f64>, a: usize) -> BeamformingProblem {
    BeamformingProblem::new(channels, gamma, noise, budgets, a).unwrap()
}

/// Direct evaluation with explicit loops over conj products.
fn sinr_reference(w: &[Vec<C64>], h: &[Vec<C64>], noise: f64) -> Vec<f64> {
    let dot = |x: &[C64], y: &[C64]| {
        let mut re = 0.0;
        let mut im = 0.0;
        for i in 0..x.len() {
            re += x[i].re * y[i].re + x[i].im * y[i].im;
            im += x[i].re * y[i].im - x[i].im * y[i].re;
        }
        re * re + im * im
    };
    (0..h.len())
        .map(|k| {
            let mut interf = 0.0;
            for (i, wi) in w.iter().enumerate() {
                if i != k {
                    interf += dot(&h[k], wi);
                }
            }
            dot(&h[k], &w[k]) / (interf + noise)
        })
        .collect()
}

fn assert_invariants(p: &BeamformingProblem, s: &BeamformingSolution) {
    for q in &s.covariances {
        let (vals, _) = hermitian_eigen(q);
        let tr = trace_re(q).max(1e-300);
        assert!(*vals.last().unwrap() >= -1e-9 * tr.max(1.0), "Q not PSD: {vals:?}");
    }
    for (u, b) in s.per_ru_power.iter().zip(&p.ru_budgets_w) {
        assert!(*u <= b + 1e-6);
    }
    if s.feasible {
        for (got, want) in s.achieved_sinr.iter().zip(&p.gamma_req) {
            assert!(*got >= want * (1.0 - 1e-6), "sinr {got} < {want}");
        }
    }
}

#[test]
fn sinr_mrt_single_robot() {
    let h = vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.3)];
    let p: f64 = 0.7;
    let hn = norm_sqr(&h).sqrt();
    let w = vec![h.iter().map(|c| c * (p.sqrt() / hn)).collect::<Vec<_>>()];
    let got = sinr(&w, core::slice::from_ref(&h), 0.1)[0];
    let want = p * norm_sqr(&h) / 0.1;
    assert!((got - want).abs() <= 1e-12 * want);
}

#[test]
fn sinr_zero_forcing_has_no_interference() {
    let h1 = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let h2 = vec![C64::new(0.0, 0.0), C64::new(0.0, 1.0)];
    let w1 = vec![C64::new(2.0, 0.0), C64::new(0.0, 0.0)];
    let w2 = vec![C64::new(0.0, 0.0), C64::new(3.0, 0.0)];
    let s = sinr(&[w1, w2], &[h1, h2], 1.0);
    assert!((s[0] - 4.0).abs() < 1e-12);
    assert!((s[1] - 9.0).abs() < 1e-12);
}

#[test]
fn sinr_matches_reference_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let h: Vec<Vec<C64>> = (0..3).map(|_| random_channel(&mut rng, 4, 1.0)).collect();
        let w: Vec<Vec<C64>> = (0..3).map(|_| random_channel(&mut rng, 4, 0.5)).collect();
        let a = sinr(&w, &h, 0.3);
        let b = sinr_reference(&w, &h, 0.3);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * y.max(1.0));
        }
    }
}

#[test]
fn embedding_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = random_channel(&mut rng, 3, 1.0);
    let q = outer(&h);
    let back = unembed(&embed(&q));
    assert!((back - &q).norm() < 1e-14);
    let g = random_channel(&mut rng, 3, 1.0);
    // tr(G Q) = 1/2 tr(phi(G) phi(Q))
    let lhs = (outer(&g) * &q).trace().re;
    let rhs = 0.5 * (embed(&outer(&g)) * embed(&q)).trace();
    assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
}

#[test]
fn single_robot_matches_mrt_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..30 {
        // realistic scale: gains ~1e-6 amplitude, noise ~1e-15 W
        let scale = if i % 2 == 0 { 1.0 } else { 1e-6 };
        let noise = if i % 2 == 0 { 0.5 } else { 2.5e-16 };
        let h = random_channel(&mut rng, 6, scale);
        let gamma = 0.1 + 10.0 * (i as f64) / 30.0;
        let p = problem(vec![h.clone()], vec![gamma], noise, vec![f64::INFINITY; 3], 2);
        let relaxed = solve_sdr_power_min(&p, &cfg()).unwrap();
        let closed = gamma * noise / norm_sqr(&h);
        assert!(
            (relaxed.objective - closed).abs() <= 1e-6 * closed,
            "relaxed {} vs {closed}",
            relaxed.objective
        );
        let sol = rank1_recover(&relaxed, &p, &cfg(), &mut rng);
        assert!(sol.feasible);
        assert!((sol.total_power - closed).abs() <= 1e-6 * closed);
        assert!((sol.rank1_gap - 1.0).abs() < 1e-6);
        assert_invariants(&p, &sol);
    }
}

#[test]
fn vanishing_demand_needs_vanishing_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h: Vec<Vec<C64>> = (0..2).map(|_| random_channel(&mut rng, 4, 1.0)).collect();
    let big = problem(h.clone(), vec![1.0, 1.0], 1.0, vec![f64::INFINITY; 2], 2);
    let tiny = problem(h, vec![1e-9, 1e-9], 1.0, vec![f64::INFINITY; 2], 2);
    let a = solve_sdr_power_min(&big, &cfg()).unwrap().objective;
    let b = solve_sdr_power_min(&tiny, &cfg()).unwrap().objective;
    assert!(b < 1e-8 * a);
}

#[test]
fn budget_below_closed_form_is_infeasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = random_channel(&mut rng, 2, 1.0);
    let closed = 2.0 / norm_sqr(&h);
    let p = problem(vec![h], vec![2.0], 1.0, vec![0.9 * closed], 2);
    assert_eq!(
        solve_sdr_power_min(&p, &cfg()).unwrap_err(),
        BeamformingError::Infeasible
    );
    let sol = solve_beamforming(&p, &cfg(), &mut rng).unwrap();
    assert!(!sol.feasible);
    assert!(sol.beamformers.is_empty());
}

#[test]
fn binding_budget_shifts_power_between_rus() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let h = random_channel(&mut rng, 4, 1.0);
    let free = problem(vec![h.clone()], vec![3.0], 1.0, vec![f64::INFINITY; 2], 2);
    let relaxed_free = solve_sdr_power_min(&free, &cfg()).unwrap();
    let ru0_free: f64 = (0..2).map(|a| relaxed_free.covariances[0][(a, a)].re).sum();
    let cap = 0.5 * ru0_free;
    let capped = problem(vec![h], vec![3.0], 1.0, vec![cap, f64::INFINITY], 2);
    let relaxed = solve_sdr_power_min(&capped, &cfg()).unwrap();
    assert!(relaxed.budgets_enforced);
    assert!(relaxed.objective >= relaxed_free.objective * (1.0 - 1e-7));
    let sol = rank1_recover(&relaxed, &capped, &cfg(), &mut rng);
    assert!(sol.feasible);
    assert!(sol.per_ru_power[0] <= cap + 1e-6);
    assert_invariants(&capped, &sol);
}

#[test]
fn two_robot_recovery_bounds_and_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let h: Vec<Vec<C64>> = (0..2).map(|_| random_channel(&mut rng, 6, 1.0)).collect();
        let p = problem(h, vec![2.0, 5.0], 1.0, vec![f64::INFINITY; 3], 2);
        let relaxed = solve_sdr_power_min(&p, &cfg()).unwrap();
        assert!(relaxed.duality_gap.abs() <= 1e-6 * (1.0 + relaxed.objective));
        assert!(relaxed.complementarity.abs() <= 1e-6 * (1.0 + relaxed.objective));
        let sol = rank1_recover(&relaxed, &p, &cfg(), &mut rng);
        assert!(sol.feasible);
        assert!(sol.total_power >= relaxed.objective * (1.0 - 1e-6));
        assert!(sol.rank1_gap >= 1.0 - 1e-6);
        assert_invariants(&p, &sol);
    }
}

#[test]
fn scaled_solution_matches_rescaled_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h: Vec<Vec<C64>> = (0..2).map(|_| random_channel(&mut rng, 6, 1.0)).collect();
    let unit = problem(h.clone(), vec![1.5, 1.5], 1.0, vec![f64::INFINITY; 3], 2);
    let noisy = problem(h, vec![1.5, 1.5], 3.0, vec![f64::INFINITY; 3], 2);
    let a = solve_beamforming(&unit, &cfg(), &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap()
        .scaled(3.0);
    let b = solve_beamforming(&noisy, &cfg(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!((a.total_power - b.total_power).abs() <= 1e-5 * b.total_power);
    let s = sinr(&a.beamformers, &noisy.channels, 3.0);
    for (got, want) in s.iter().zip(&noisy.gamma_req) {
        assert!(*got >= want * (1.0 - 1e-6));
    }
}

#[test]
fn rank_one_input_is_reproduced() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = random_channel(&mut rng, 2, 1.0);
    let p = problem(vec![h.clone()], vec![1.0], 1.0, vec![f64::INFINITY], 2);
    let tr = 1.0 / norm_sqr(&h);
    let q = outer(&h) * Complex::new(tr / norm_sqr(&h), 0.0);
    let relaxed = RelaxedSolution {
        covariances: vec![q],
        objective: tr,
        duality_gap: 0.0,
        complementarity: 0.0,
        iterations: 0,
        budgets_enforced: false,
    };
    let sol = rank1_recover(&relaxed, &p, &cfg(), &mut rng);
    assert!(sol.feasible);
    assert!((sol.total_power - tr).abs() <= 1e-12 * tr);
    assert!((sol.rank1_gap - 1.0).abs() < 1e-12);
}

#[test]
fn invalid_problems_are_rejected() {
    let h = vec![C64::new(1.0, 0.0); 2];
    assert!(BeamformingProblem::new(vec![h.clone()], vec![0.0], 1.0, vec![1.0], 2).is_err());
    assert!(BeamformingProblem::new(vec![h.clone()], vec![1.0], 0.0, vec![1.0], 2).is_err());
    assert!(BeamformingProblem::new(vec![h.clone()], vec![1.0], 1.0, vec![-1.0], 2).is_err());
    assert!(BeamformingProblem::new(vec![h], vec![1.0], 1.0, vec![1.0, 1.0], 2).is_err());
}

#[test]
fn power_control_rejects_overloaded_directions() {
    // identical channels and directions: interference equals signal
    let h = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    let p = problem(vec![h.clone(), h.clone()], vec![2.0, 2.0], 1.0, vec![f64::INFINITY], 2);
    assert!(power_control(&p, &[h.clone(), h]).is_none());
}
