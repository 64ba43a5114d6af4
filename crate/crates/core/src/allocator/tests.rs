use super::*;
use alloc::vec;
use alloc::vec::Vec;
use proptest::prelude::*;

use crate::channel::{mean_power_gain, ChannelSample, C64};
use crate::oracle::exhaustive_bandwidth_search;
use crate::scenario::{paper_default_scenario, EmbbSpec, IraMode, MmtcSpec, Point, SliceSpec, TiSpec, Topology};

fn ti(robots: usize, deadline_s: f64, lambda: f64) -> SliceSpec {
    SliceSpec::Ti(TiSpec {
        robot_count: robots,
        deadline_s,
        decode_error_prob: 1e-5,
        blocking_prob: 2e-8,
        arrival_rate_pkts_per_s: lambda,
        packet_bits: 160.0,
    })
}

/// One RU with two antennas, 1 MHz blocks.
fn tiny(slices: Vec<SliceSpec>, blocks: usize, samples: usize) -> (Scenario, Topology) {
    let mut sc = paper_default_scenario();
    sc.ru_positions = vec![Point::new(500.0, 500.0)];
    sc.block_width_hz = 1e6;
    sc.total_bandwidth_hz = blocks as f64 * 1e6;
    sc.saa_samples = samples;
    sc.slices = slices;
    let positions = sc
        .slices
        .iter()
        .enumerate()
        .map(|(s, spec)| {
            (0..spec.terminal_count())
                .map(|u| Point::new(300.0 + 40.0 * s as f64, 350.0 + 30.0 * u as f64))
                .collect()
        })
        .collect();
    let top = Topology::from_positions(sc.ru_positions.clone(), positions);
    (sc, top)
}

fn embb(users: usize, rate: f64) -> SliceSpec {
    SliceSpec::Embb(EmbbSpec {
        user_count: users,
        rate_req_bps: rate,
    })
}

#[test]
fn utility_examples() {
    let sc = paper_default_scenario();
    assert_eq!(slice_utility(SliceKind::Ti, 0.0, 0.0, &sc), 0.0);
    assert!((slice_utility(SliceKind::Ti, 1.0, 0.2, &sc) - 9.8).abs() < 1e-12);
    assert!(slice_utility(SliceKind::Embb, 0.5, 0.3, &sc) > slice_utility(SliceKind::Embb, 0.5, 0.31, &sc));
}

#[test]
fn admm_config_validation() {
    assert!(AdmmConfig::default().validate().is_ok());
    for bad in [
        AdmmConfig {
            rho: 0.0,
            ..Default::default()
        },
        AdmmConfig {
            primal_tol: 0.0,
            ..Default::default()
        },
        AdmmConfig {
            dual_tol: -1.0,
            ..Default::default()
        },
        AdmmConfig {
            max_iters: 0,
            ..Default::default()
        },
        AdmmConfig {
            grid_per_block: 0,
            ..Default::default()
        },
    ] {
        assert!(bad.validate().is_err());
    }
}

#[test]
fn projection_examples() {
    assert_eq!(project_capped_simplex(&[1.0, 2.0], 4.0), vec![1.0, 2.0]);
    assert_eq!(project_capped_simplex(&[-1.0, 2.0], 4.0), vec![0.0, 2.0]);
    let p = project_capped_simplex(&[3.0, 3.0], 4.0);
    assert!((p[0] - 2.0).abs() < 1e-12 && (p[1] - 2.0).abs() < 1e-12);
    let p = project_capped_simplex(&[5.0, -1.0, 0.5], 4.0);
    assert!((p[0] - 4.0).abs() < 1e-12 && p[1] == 0.0 && p[2] == 0.0);
}

proptest! {
    #[test]
    fn projection_is_feasible_and_nearest(v in prop::collection::vec(-5.0f64..15.0, 1..6), probe in prop::collection::vec(0.0f64..1.0, 6)) {
        let cap = 10.0;
        let p = project_capped_simplex(&v, cap);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        prop_assert!(p.iter().sum::<f64>() <= cap + 1e-9);
        // no feasible probe point is closer to v
        let scale: f64 = probe.iter().take(v.len()).sum::<f64>().max(1.0);
        let q: Vec<f64> = probe.iter().take(v.len()).map(|x| x / scale * cap).collect();
        let d = |a: &[f64]| a.iter().zip(&v).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        prop_assert!(d(&p) <= d(&q) + 1e-9);
        let again = project_capped_simplex(&p, cap);
        for (a, b) in again.iter().zip(&p) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn zero_blocks_deny_ti() {
    let (sc, top) = tiny(vec![ti(1, 2e-3, 100.0), embb(1, 6e6)], 4, 1);
    let p = SaaProblem::new(&sc, &top, &Sequential).unwrap();
    let r = p.solve_blocks(0, &[0, 4]);
    assert_eq!(r.slices[0].satisfied_frac, 0.0);
    assert_eq!(r.slices[0].power_w, 0.0);
    assert_eq!(r.slices[0].utility, 0.0);
    let r = p.solve_blocks(0, &[2, 2]);
    assert_eq!(r.slices[0].satisfied_frac, 1.0);
    assert!(r.slices[0].beamforming.as_ref().unwrap().feasible);
}

#[test]
fn embb_closed_form_instance_is_satisfied() {
    let (sc, top) = tiny(vec![embb(2, 2e6)], 4, 1);
    // fixed channel: each user sees a real gain g on both antennas
    let g = mean_power_gain(300.0).sqrt();
    let cs = ChannelSample::from_gains(0, 1, 2, vec![C64::new(g, 0.0); 4]);
    let r = solve_sample(&[4], &cs, &sc, &top).unwrap();
    let b_u = 2e6;
    let per_user = (2f64.powf(2e6 / b_u) - 1.0) * sc.noise_psd_w_per_hz() * b_u / (2.0 * g * g);
    assert!(2.0 * per_user <= sc.max_ru_power_w);
    assert_eq!(r.slices[0].satisfied_frac, 1.0);
    assert!((r.slices[0].power_w - 2.0 * per_user).abs() <= 1e-12 * per_user);
    assert!(solve_sample(&[5], &cs, &sc, &top).is_err());
}

#[test]
fn budget_threading_caps_every_ru() {
    let mut sc = paper_default_scenario();
    sc.saa_samples = 4;
    let top = crate::scenario::generate_topology(&sc, "topology");
    let p = SaaProblem::new(&sc, &top, &Sequential).unwrap();
    let splits: [[usize; 8]; 4] = [
        [5, 5, 5, 5, 5, 5, 5, 5],
        [0, 0, 2, 2, 2, 0, 0, 0],
        [10, 5, 8, 8, 6, 1, 1, 1],
        [1, 1, 30, 1, 1, 1, 1, 1],
    ];
    for z in splits {
        for t in 0..4 {
            let r = p.solve_blocks(t, &z);
            assert!(
                r.per_ru_power_w.iter().all(|w| *w <= sc.max_ru_power_w + 1e-6),
                "{z:?}: {:?}",
                r.per_ru_power_w
            );
            let total: f64 = r.slices.iter().map(|o| o.utility).sum();
            assert_eq!(total, r.utility);
        }
    }
}

#[test]
fn large_penalty_tracks_projection() {
    let (sc, top) = tiny(vec![ti(1, 2e-3, 100.0), embb(1, 6e6), embb(1, 1e6)], 6, 2);
    let p = SaaProblem::new(&sc, &top, &Sequential).unwrap();
    let z = [4.3, 2.9, 1.1];
    let u = [0.1, -0.2, 0.0];
    let x = p.subproblem_continuous(0, &z, &u, 1e6);
    let target: Vec<f64> = z.iter().zip(&u).map(|(a, b)| a - b).collect();
    let proj = project_capped_simplex(&target, 6.0);
    let step = 1.0 / sc.solver.admm.grid_per_block as f64;
    for (a, b) in x.iter().zip(&proj) {
        assert!((a - b).abs() <= step, "{x:?} vs {proj:?}");
    }
    assert!(x.iter().sum::<f64>() <= 6.0 + 1e-12);
}

#[test]
fn single_slice_takes_all_bandwidth() {
    for spec in [ti(1, 2e-3, 100.0), embb(2, 4e6)] {
        let (sc, top) = tiny(vec![spec], 5, 2);
        let p = SaaProblem::new(&sc, &top, &Sequential).unwrap();
        assert_eq!(p.subproblem_continuous(1, &[0.0], &[0.0], 0.0), vec![5.0]);
        let (alloc, _, _) = run_ira_admm(&p, &sc.solver.admm, &Sequential);
        assert_eq!(alloc.blocks, vec![5]);
    }
}

#[test]
fn subproblem_is_deterministic() {
    let (sc, top) = tiny(vec![ti(1, 2e-3, 100.0), embb(1, 6e6)], 6, 3);
    let a = SaaProblem::new(&sc, &top, &Sequential).unwrap();
    let b = SaaProblem::new(&sc, &top, &Sequential).unwrap();
    for t in 0..3 {
        assert_eq!(
            a.subproblem_continuous(t, &[2.0, 3.0], &[0.5, -0.5], 1.0),
            b.subproblem_continuous(t, &[2.0, 3.0], &[0.5, -0.5], 1.0)
        );
    }
}

#[test]
fn rounding_matches_exhaustive_on_concave_instance() {
    // light eMBB loads: served from the first block on, power convex in bandwidth
    let (sc, top) = tiny(vec![embb(1, 3e6), embb(2, 2e6)], 4, 2);
    let p = SaaProblem::new(&sc, &top, &Sequential).unwrap();
    let (best, best_u) = exhaustive_bandwidth_search(&p).unwrap();
    let z = relax_and_round(&p, &[0, 1], &[0.0, 0.0]);
    assert_eq!(z, best);
    assert!((p.saa_utility(&[0, 1], &z) - best_u).abs() < 1e-12);
    assert_eq!(relax_and_round(&p, &[0, 1], &[best[0] as f64, best[1] as f64]), best);
}

#[test]
fn rounding_from_continuous_point_crosses_ti_threshold() {
    let (sc, top) = tiny(vec![ti(1, 1e-3, 100.0), embb(1, 8e6)], 4, 2);
    let p = SaaProblem::new(&sc, &top, &Sequential).unwrap();
    let (best, best_u) = exhaustive_bandwidth_search(&p).unwrap();
    let z = relax_and_round(&p, &[0, 1], &[1.9, 2.1]);
    assert!((p.saa_utility(&[0, 1], &z) - best_u).abs() < 1e-12, "{z:?} vs {best:?}");
    assert_eq!(relax_and_round(&p, &[0, 1], &[best[0] as f64, best[1] as f64]), best);
}

#[test]
fn rounding_respects_the_block_total() {
    let (sc, top) = tiny(vec![ti(1, 2e-3, 100.0), embb(1, 6e6), embb(2, 1e6)], 8, 2);
    let p = SaaProblem::new(&sc, &top, &Sequential).unwrap();
    for z0 in [[0.0, 0.0, 0.0], [7.9, 0.05, 0.05], [3.5, 3.5, 3.5], [2.2, 1.7, 4.1]] {
        let z = relax_and_round(&p, &[0, 1], &z0);
        assert_eq!(z.iter().sum::<usize>(), 8);
    }
}

#[test]
fn single_sample_ira_and_admm_coincide() {
    let (sc, top) = tiny(vec![ti(1, 2e-3, 100.0), embb(1, 6e6)], 6, 1);
    let p = SaaProblem::new(&sc, &top, &Sequential).unwrap();
    let (a, ra, trace) = run_ira_admm(&p, &sc.solver.admm, &Sequential);
    let (b, rb) = run_ira(&p, IraMode::FirstSample, &Sequential);
    assert!(trace.converged && trace.rows.len() <= 2);
    assert_eq!(a.blocks, b.blocks);
    assert_eq!(ra.total_utility, rb.total_utility);
}

#[test]
fn identical_samples_make_ira_match_admm() {
    let (mut sc, top) = tiny(vec![ti(1, 2e-3, 100.0), embb(2, 6e6)], 8, 1);
    sc.saa_samples = 4;
    let cs = crate::channel::draw_sample(&top, &sc, 0);
    let copies = (0..4).map(|_| cs.clone()).collect();
    let p = SaaProblem::from_samples(&sc, &top, copies, &Sequential).unwrap();
    let (_, ra, _) = run_ira_admm(&p, &sc.solver.admm, &Sequential);
    let (_, rb) = run_ira(&p, IraMode::FirstSample, &Sequential);
    assert!((ra.total_utility - rb.total_utility).abs() <= 1e-9 * (1.0 + rb.total_utility.abs()));
}

#[test]
fn report_is_consistent_with_samples() {
    let (sc, top) = tiny(vec![ti(1, 2e-3, 100.0), embb(1, 6e6), embb(2, 2e6)], 8, 3);
    let p = SaaProblem::new(&sc, &top, &Sequential).unwrap();
    let (alloc, report, trace) = run_ira_admm(&p, &sc.solver.admm, &Sequential);
    assert!(alloc.blocks.iter().sum::<usize>() <= 8);
    let total: f64 = report.mean_utility.iter().sum();
    assert_eq!(total, report.total_utility);
    for s in 0..3 {
        let mean = alloc.per_sample.iter().map(|r| r.slices[s].utility).sum::<f64>() / 3.0;
        assert_eq!(mean, report.mean_utility[s]);
        assert!((0.0..=1.0).contains(&report.satisfied_frac[s]));
    }
    assert!(alloc.max_ru_power_w() <= sc.max_ru_power_w + 1e-6);
    if trace.converged {
        assert!(trace.rows.last().unwrap().primal_residual <= sc.solver.admm.primal_tol);
    } else {
        assert!(trace.warning.is_some());
    }
    for row in &trace.rows {
        assert!(row.primal_residual.is_finite() && row.dual_residual.is_finite());
    }
    assert!(trace.consensus.iter().sum::<f64>() <= 8.0 + 1e-9);
}

#[test]
fn runs_are_deterministic() {
    let (sc, top) = tiny(vec![ti(1, 2e-3, 100.0), embb(2, 6e6)], 6, 3);
    let run = || {
        let p = SaaProblem::new(&sc, &top, &Sequential).unwrap();
        let (a, r, t) = run_ira_admm(&p, &sc.solver.admm, &Sequential);
        (a, r, t)
    };
    assert_eq!(run(), run());
}

#[test]
fn mmtc_needs_enough_preambles() {
    let spec = SliceSpec::Mmtc(MmtcSpec {
        user_count: 600,
        ra_success_req: 0.5,
        activation_prob: 0.01,
        preamble_width_hz: 1000.0,
    });
    let (mut sc, top) = tiny(vec![spec], 1, 1);
    sc.block_width_hz = 4000.0;
    sc.total_bandwidth_hz = 12_000.0;
    let p = SaaProblem::new(&sc, &top, &Sequential).unwrap();
    // 8 preambles give 0.47, 9 give 0.51
    assert_eq!(p.solve_bandwidths(0, &[8000.0], false).slices[0].satisfied_frac, 0.0);
    assert_eq!(p.solve_bandwidths(0, &[9000.0], false).slices[0].satisfied_frac, 1.0);
    assert_eq!(p.solve_bandwidths(0, &[9000.0], false).slices[0].power_w, 0.0);
}

#[test]
fn mismatched_topology_is_rejected() {
    let (sc, _) = tiny(vec![embb(2, 1e6)], 4, 1);
    let wrong = Topology::from_positions(sc.ru_positions.clone(), vec![vec![Point::new(1.0, 1.0)]]);
    assert!(matches!(
        SaaProblem::new(&sc, &wrong, &Sequential),
        Err(AllocError::Topology(_))
    ));
}
