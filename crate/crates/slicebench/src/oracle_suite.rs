//! The `oracle` command: production formulas and solvers checked against
//! the brute-force and Monte-Carlo references.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use slicebench_core::allocator::{run_ira_admm, Executor, SaaProblem, Sequential};
use slicebench_core::channel::C64;
use slicebench_core::comp::{rank1_recover, solve_sdr_power_min, BeamformingProblem};
use slicebench_core::oracle::{exhaustive_bandwidth_search, mm1k_monte_carlo, mrt_power_closed_form, ra_monte_carlo};
use slicebench_core::qos::{blocking_probability, fb_rate, inverse_q, q_function, ra_success_probability};
use slicebench_core::scenario::{
    generate_topology, paper_default_scenario, EmbbSpec, MmtcSpec, Point, Scenario, SdrConfig, SliceSpec, StreamSeed,
    TiSpec, TOPOLOGY_STREAM,
};

/// Allowed distance between an analytic value and a Monte-Carlo estimate.
pub const SIGMA_BOUND: f64 = 3.0;
pub const DEFAULT_ORACLE_SEED: u64 = 3;
pub const MM1K_ARRIVALS: u64 = 1_000_000;
pub const RA_TRIALS: u64 = 100_000;
pub const MM1K_RHO: [f64; 5] = [0.1, 0.3, 0.5, 0.8, 0.95];
pub const MM1K_K: [u64; 4] = [1, 2, 4, 8];
/// `(preambles, users, activation probability)`.
pub const RA_CASES: [(u64, u64, f64); 6] = [
    (10, 600, 0.01),
    (4, 600, 0.01),
    (20, 600, 0.02),
    (10, 100, 0.1),
    (50, 1000, 0.05),
    (2, 50, 0.02),
];
pub const SDR_SINGLE_INSTANCES: usize = 100;
pub const SDR_PAIR_INSTANCES: usize = 50;
pub const SDR_REL_TOL: f64 = 1e-6;
pub const TINY_SEEDS: u64 = 20;
pub const TINY_REL_GAP: f64 = 0.05;

/// Formulas under test; replaced by faulty versions in negative tests.
#[derive(Clone, Copy)]
pub struct QosHooks {
    pub blocking: fn(f64, f64, u64) -> f64,
    pub ra_success: fn(f64, &MmtcSpec) -> f64,
}

impl Default for QosHooks {
    fn default() -> Self {
        Self {
            blocking: blocking_probability,
            ra_success: ra_success_probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag}  {:<18} {}", self.name, self.detail)
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

/// M/M/1/K blocking on the (rho, K) grid with mean service time 1 s.
pub fn check_mm1k<E: Executor>(hooks: &QosHooks, seed: u64, exec: &E) -> CheckResult {
    let grid: Vec<(f64, u64)> = MM1K_RHO
        .iter()
        .flat_map(|r| MM1K_K.iter().map(move |k| (*r, *k)))
        .collect();
    let sig = exec.map(grid.len(), |i| {
        let (rho, k) = grid[i];
        let mut rng = StreamSeed(seed).indexed("oracle/mm1k", i as u64);
        let est = mm1k_monte_carlo(rho, 1.0, k, MM1K_ARRIVALS, &mut rng).expect("valid mm1k input");
        est.sigmas((hooks.blocking)(rho, 1.0, k))
    });
    let worst = sig.iter().copied().fold(0.0, f64::max);
    let fails = sig.iter().filter(|s| !(**s <= SIGMA_BOUND)).count();
    check(
        "mm1k_blocking",
        fails == 0,
        format!(
            "{} cells, {fails} outside {SIGMA_BOUND} sigma, worst {worst:.2} sigma",
            grid.len()
        ),
    )
}

pub fn check_ra<E: Executor>(hooks: &QosHooks, seed: u64, exec: &E) -> CheckResult {
    let sig = exec.map(RA_CASES.len(), |i| {
        let (n, u, pa) = RA_CASES[i];
        let spec = MmtcSpec {
            user_count: u as usize,
            ra_success_req: 0.5,
            activation_prob: pa,
            preamble_width_hz: 1_000.0,
        };
        let mut rng = StreamSeed(seed).indexed("oracle/ra", i as u64);
        let est = ra_monte_carlo(n, u, pa, RA_TRIALS, &mut rng).expect("valid ra input");
        est.sigmas((hooks.ra_success)(n as f64 * spec.preamble_width_hz, &spec))
    });
    let worst = sig.iter().copied().fold(0.0, f64::max);
    let fails = sig.iter().filter(|s| !(**s <= SIGMA_BOUND)).count();
    check(
        "ra_success",
        fails == 0,
        format!(
            "{} configs, {fails} outside {SIGMA_BOUND} sigma, worst {worst:.2} sigma",
            RA_CASES.len()
        ),
    )
}

/// Q(Q^{-1}(p)) = p to 1e-9 relative over p in [1e-15, 0.49].
pub fn check_inverse_q() -> CheckResult {
    let n = 200;
    let (lo, hi) = (1e-15f64.ln(), 0.49f64.ln());
    let mut worst = 0.0f64;
    for i in 0..n {
        let p = (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp();
        let err = match inverse_q(p) {
            Ok(x) => (q_function(x) - p).abs() / p,
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(err);
    }
    check(
        "inverse_q",
        worst <= 1e-9,
        format!("{n} points, worst relative error {worst:.2e}"),
    )
}

/// At n = 1e9 the dispersion term vanishes and the rate meets log2(1 + g).
pub fn check_fb_rate() -> CheckResult {
    let mut worst = 0.0f64;
    for gamma in [0.01f64, 0.1, 1.0, 10.0, 100.0, 1e4] {
        let shannon = (1.0 + gamma).ln() / std::f64::consts::LN_2;
        let err = fb_rate(gamma, 1e9, 1e-5).map_or(f64::INFINITY, |r| (r - shannon).abs());
        worst = worst.max(err);
    }
    check(
        "fb_rate_limit",
        worst <= 1e-3,
        format!("worst gap to Shannon {worst:.2e} bit/use"),
    )
}

fn random_channel<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im) * (scale * std::f64::consts::FRAC_1_SQRT_2)
        })
        .collect()
}

/// Single robot, 1-3 RUs with 1-2 antennas, gains and noise spanning unit
/// and radio scales: relaxation plus recovery must give MRT power.
pub fn check_sdr_single(seed: u64) -> CheckResult {
    let mut rng = StreamSeed(seed).stream("oracle/sdr-single");
    let cfg = SdrConfig::default();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..SDR_SINGLE_INSTANCES {
        let rus = rng.random_range(1..=3usize);
        let a = rng.random_range(1..=2usize);
        let scale = 10f64.powf(-rng.random_range(0.0..7.0));
        let noise = 10f64.powf(-rng.random_range(0.0..16.0));
        let gamma = 10f64.powf(rng.random_range(-1.0..3.0));
        let h = random_channel(&mut rng, rus * a, scale);
        let closed = mrt_power_closed_form(&h, gamma, noise).expect("nonzero channel");
        let outcome = BeamformingProblem::new(vec![h], vec![gamma], noise, vec![f64::INFINITY; rus], a)
            .and_then(|p| solve_sdr_power_min(&p, &cfg).map(|r| rank1_recover(&r, &p, &cfg, &mut rng)));
        match outcome {
            Ok(sol) if sol.feasible => {
                let rel = (sol.total_power - closed).abs() / closed;
                worst = worst.max(rel);
                if !(rel <= SDR_REL_TOL) {
                    failures += 1;
                }
            }
            _ => failures += 1,
        }
    }
    check(
        "sdr_single_robot",
        failures == 0,
        format!("{SDR_SINGLE_INSTANCES} instances, {failures} failed, worst relative error {worst:.2e}"),
    )
}

/// Two robots on two 2-antenna RUs: recovered power is bounded below by
/// the relaxation and every SINR target is met.
pub fn check_sdr_pair(seed: u64) -> CheckResult {
    let mut rng = StreamSeed(seed).stream("oracle/sdr-pair");
    let cfg = SdrConfig::default();
    let mut failures = 0;
    let mut worst_sinr = 0.0f64;
    let mut min_ratio = f64::INFINITY;
    for _ in 0..SDR_PAIR_INSTANCES {
        let h: Vec<Vec<C64>> = (0..2).map(|_| random_channel(&mut rng, 4, 1.0)).collect();
        let gamma: Vec<f64> = (0..2).map(|_| rng.random_range(0.5..5.0)).collect();
        let outcome = BeamformingProblem::new(h, gamma.clone(), 1.0, vec![f64::INFINITY; 2], 2)
            .and_then(|p| solve_sdr_power_min(&p, &cfg).map(|r| (rank1_recover(&r, &p, &cfg, &mut rng), r)));
        let Ok((sol, relaxed)) = outcome else {
            failures += 1;
            continue;
        };
        let shortfall = sol
            .achieved_sinr
            .iter()
            .zip(&gamma)
            .map(|(s, g)| ((g - s) / g).max(0.0))
            .fold(0.0, f64::max);
        worst_sinr = worst_sinr.max(shortfall);
        let ratio = sol.total_power / relaxed.objective;
        min_ratio = min_ratio.min(ratio);
        if !sol.feasible || !(shortfall <= SDR_REL_TOL) || !(sol.total_power >= relaxed.objective) {
            failures += 1;
        }
    }
    check(
        "sdr_two_robot",
        failures == 0,
        format!(
            "{SDR_PAIR_INSTANCES} instances, {failures} failed, worst SINR shortfall {worst_sinr:.2e}, min power/relaxed {min_ratio:.9}"
        ),
    )
}

/// One RU with two antennas at the centre, 1 MHz blocks (M = 4), one TI
/// robot and one eMBB user, two SAA samples.
pub fn tiny_scenario(seed: u64) -> Scenario {
    let mut sc = paper_default_scenario();
    sc.ru_positions = vec![Point::new(500.0, 500.0)];
    sc.block_width_hz = 1e6;
    sc.saa_samples = 2;
    sc.seed = seed;
    sc.slices = vec![
        SliceSpec::Ti(TiSpec {
            robot_count: 1,
            deadline_s: 1e-3,
            decode_error_prob: 1e-5,
            blocking_prob: 2e-8,
            arrival_rate_pkts_per_s: 100.0,
            packet_bits: 160.0,
        }),
        SliceSpec::Embb(EmbbSpec {
            user_count: 1,
            rate_req_bps: 6e6,
        }),
    ];
    sc
}

/// Per seed: `(IRA-ADMM utility, exhaustive optimum)`.
pub fn tiny_allocator_gaps<E: Executor>(seed: u64, exec: &E) -> Vec<Result<(f64, f64), String>> {
    exec.map(TINY_SEEDS as usize, |i| {
        let sc = tiny_scenario(seed + i as u64);
        let top = generate_topology(&sc, TOPOLOGY_STREAM);
        let problem = SaaProblem::new(&sc, &top, &Sequential).map_err(|e| e.to_string())?;
        let (_, report, _) = run_ira_admm(&problem, &sc.solver.admm, &Sequential);
        let (_, best) = exhaustive_bandwidth_search(&problem).map_err(|e| e.to_string())?;
        Ok((report.total_utility, best))
    })
}

pub fn check_tiny_allocator<E: Executor>(seed: u64, exec: &E) -> CheckResult {
    let gaps = tiny_allocator_gaps(seed, exec);
    let mut failures = 0;
    let mut worst = 0.0f64;
    for g in &gaps {
        match g {
            Ok((u, best)) => {
                let gap = (best - u) / best.abs().max(f64::MIN_POSITIVE);
                worst = worst.max(gap);
                if !(gap <= TINY_REL_GAP) {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    check(
        "tiny_allocator",
        failures == 0,
        format!(
            "{} seeds, {failures} beyond 5% of optimum, worst gap {:.2}%",
            gaps.len(),
            100.0 * worst
        ),
    )
}

pub fn run_suite<E: Executor>(seed: u64, hooks: &QosHooks, exec: &E) -> Vec<CheckResult> {
    vec![
        check_mm1k(hooks, seed, exec),
        check_ra(hooks, seed, exec),
        check_inverse_q(),
        check_fb_rate(),
        check_sdr_single(seed),
        check_sdr_pair(seed),
        check_tiny_allocator(seed, exec),
    ]
}
