//! Brute-force and Monte-Carlo references. Each one takes its own
//! arithmetic path so it can check the production code.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::allocator::SaaProblem;
use crate::channel::C64;

pub const MAX_ORACLE_SLICES: usize = 3;
pub const MAX_ORACLE_BLOCKS: usize = 12;
pub const MM1K_BATCHES: u64 = 50;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("instance too large for enumeration ({slices} slices, {blocks} blocks)")]
    TooLarge { slices: usize, blocks: usize },
    #[error("invalid oracle input: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error of `mean`: binomial for independent trials, batch
    /// means for the queue, whose blocking events are correlated.
    pub stderr: f64,
    pub trials: u64,
}

impl Estimate {
    fn binomial(hits: u64, trials: u64) -> Self {
        let p = hits as f64 / trials as f64;
        Self {
            mean: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }

    /// z-score of the estimate against a hypothesised probability. The
    /// scale is the larger of the estimate's own standard error and the
    /// binomial one under the hypothesis, so rare events that were never
    /// observed are not judged on a zero error bar. Degenerate hypotheses
    /// (0 or 1) with a zero error bar only match an exact estimate.
    pub fn sigmas(&self, value: f64) -> f64 {
        let d = (value - self.mean).abs();
        let se = (value * (1.0 - value) / self.trials as f64).sqrt().max(self.stderr);
        if se > 0.0 {
            d / se
        } else if d <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// All integer vectors of length `n` with entries summing to at most `m`,
/// in lexicographic order.
pub fn simplex_points(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, n: usize, left: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for v in 0..=left {
            prefix.push(v);
            rec(prefix, n, left - v, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), n, m, &mut out);
    out
}

/// Enumerates every integer split and returns the one with the largest
/// SAA-mean utility; ties go to the lexicographically smallest split.
pub fn exhaustive_bandwidth_search(problem: &SaaProblem<'_>) -> Result<(Vec<usize>, f64), OracleError> {
    let n = problem.slice_count();
    let m = problem.block_count();
    if n > MAX_ORACLE_SLICES || m > MAX_ORACLE_BLOCKS {
        return Err(OracleError::TooLarge { slices: n, blocks: m });
    }
    let samples: Vec<usize> = (0..problem.sample_count()).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for z in simplex_points(n, m) {
        let total: f64 = samples.iter().map(|t| problem.solve_blocks(*t, &z).utility).sum();
        let u = total / samples.len() as f64;
        if best.as_ref().is_none_or(|(_, b)| u > *b) {
            best = Some((z, u));
        }
    }
    best.ok_or(OracleError::Invalid("no candidate splits"))
}

/// Event-driven simulation of a single-server queue holding at most `k`
/// packets (the one in service included), Poisson arrivals at `lambda`
/// and exponential service with mean `tau`. Returns the blocked fraction
/// with a standard error from `MM1K_BATCHES` consecutive batches.
pub fn mm1k_monte_carlo<R: Rng + ?Sized>(
    lambda: f64,
    tau: f64,
    k: u64,
    n_arrivals: u64,
    rng: &mut R,
) -> Result<Estimate, OracleError> {
    if !(lambda > 0.0) || !(tau > 0.0) || n_arrivals == 0 {
        return Err(OracleError::Invalid("mm1k needs lambda, tau > 0 and arrivals"));
    }
    let inter = Exp::new(lambda).map_err(|_| OracleError::Invalid("bad lambda"))?;
    let service = Exp::new(1.0 / tau).map_err(|_| OracleError::Invalid("bad tau"))?;
    let mut in_system = 0u64;
    let mut next_departure = f64::INFINITY;
    let mut now = 0.0;
    let mut blocked = 0u64;
    let batches = MM1K_BATCHES.min(n_arrivals);
    let mut batch_fracs = Vec::with_capacity(batches as usize);
    let (mut batch, mut batch_start, mut batch_blocked) = (0u64, 0u64, 0u64);
    for i in 0..n_arrivals {
        now += inter.sample(rng);
        while next_departure <= now {
            in_system -= 1;
            next_departure = if in_system > 0 {
                next_departure + service.sample(rng)
            } else {
                f64::INFINITY
            };
        }
        if in_system >= k {
            blocked += 1;
            batch_blocked += 1;
        } else {
            in_system += 1;
            if in_system == 1 {
                next_departure = now + service.sample(rng);
            }
        }
        let batch_end = (batch + 1) * n_arrivals / batches;
        if i + 1 == batch_end {
            batch_fracs.push(batch_blocked as f64 / (batch_end - batch_start) as f64);
            batch += 1;
            batch_start = batch_end;
            batch_blocked = 0;
        }
    }
    let mean = blocked as f64 / n_arrivals as f64;
    let b = batch_fracs.len() as f64;
    let stderr = if b > 1.0 {
        let m = batch_fracs.iter().sum::<f64>() / b;
        let var = batch_fracs.iter().map(|f| (f - m) * (f - m)).sum::<f64>() / (b - 1.0);
        (var / b).sqrt()
    } else {
        0.0
    };
    Ok(Estimate {
        mean,
        stderr,
        trials: n_arrivals,
    })
}

/// Random-access rounds with `users` devices and `preambles` preambles:
/// every other device activates with `p_active` and picks a preamble
/// uniformly; the always-active tagged device succeeds when nobody else
/// picked its preamble.
pub fn ra_monte_carlo<R: Rng + ?Sized>(
    preambles: u64,
    users: u64,
    p_active: f64,
    trials: u64,
    rng: &mut R,
) -> Result<Estimate, OracleError> {
    if preambles == 0 || users == 0 || trials == 0 || !(0.0..=1.0).contains(&p_active) {
        return Err(OracleError::Invalid("ra needs N, U, trials >= 1 and p in [0, 1]"));
    }
    let mut hits = 0u64;
    for _ in 0..trials {
        let tagged = rng.random_range(0..preambles);
        let mut collided = false;
        for _ in 1..users {
            if rng.random::<f64>() < p_active && rng.random_range(0..preambles) == tagged {
                collided = true;
            }
        }
        if !collided {
            hits += 1;
        }
    }
    Ok(Estimate::binomial(hits, trials))
}

/// Single-robot minimum power gamma * noise / ||h||^2.
pub fn mrt_power_closed_form(h: &[C64], gamma_req: f64, noise_w: f64) -> Result<f64, OracleError> {
    let mut g = 0.0;
    for c in h {
        g += c.re * c.re + c.im * c.im;
    }
    if !(g > 0.0) {
        return Err(OracleError::Invalid("channel must be nonzero"));
    }
    Ok(gamma_req * noise_w / g)
}
