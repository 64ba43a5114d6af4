use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::search::{project_capped_simplex, relax_and_round};
use super::{AdmmConfig, Executor, SaaProblem, SampleResult};
use crate::scenario::IraMode;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// SAA-mean utility at the consensus split of this iteration.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdmmTrace {
    pub rows: Vec<TraceRow>,
    pub converged: bool,
    /// Set when the iteration cap was hit; the best iterate was rounded.
    pub warning: Option<String>,
    /// Continuous consensus split handed to rounding.
    pub consensus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Blocks per slice, held for the long window.
    pub blocks: Vec<usize>,
    pub per_sample: Vec<SampleResult>,
}

impl Allocation {
    /// Largest instantaneous per-RU power over all samples.
    pub fn max_ru_power_w(&self) -> f64 {
        self.per_sample
            .iter()
            .flat_map(|r| r.per_ru_power_w.iter().copied())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityReport {
    /// `[slice][sample]`.
    pub per_sample: Vec<Vec<f64>>,
    pub mean_utility: Vec<f64>,
    pub total_utility: f64,
    pub satisfied_frac: Vec<f64>,
    pub mean_power_w: Vec<f64>,
}

impl UtilityReport {
    pub fn from_samples(results: &[SampleResult]) -> Self {
        let n = results.first().map_or(0, |r| r.slices.len());
        let count = results.len().max(1) as f64;
        let mean = |f: &dyn Fn(&SampleResult, usize) -> f64| -> Vec<f64> {
            (0..n)
                .map(|s| results.iter().map(|r| f(r, s)).sum::<f64>() / count)
                .collect()
        };
        let mean_utility = mean(&|r, s| r.slices[s].utility);
        Self {
            per_sample: (0..n)
                .map(|s| results.iter().map(|r| r.slices[s].utility).collect())
                .collect(),
            total_utility: mean_utility.iter().sum(),
            mean_utility,
            satisfied_frac: mean(&|r, s| r.slices[s].satisfied_frac),
            mean_power_w: mean(&|r, s| r.slices[s].power_w),
        }
    }
}

fn finalize<E: Executor>(problem: &SaaProblem<'_>, exec: &E, blocks: Vec<usize>) -> (Allocation, UtilityReport) {
    let per_sample = exec.map(problem.sample_count(), |t| problem.solve_blocks(t, &blocks));
    let report = UtilityReport::from_samples(&per_sample);
    (Allocation { blocks, per_sample }, report)
}

fn saa_objective<E: Executor>(problem: &SaaProblem<'_>, exec: &E, z: &[f64]) -> f64 {
    let vals = exec.map(problem.sample_count(), |t| problem.sample_utility(t, z));
    vals.iter().sum::<f64>() / vals.len() as f64
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// IRA-ADMM: global-consensus ADMM over the SAA samples followed by
/// rounding of the consensus split against all samples.
pub fn run_ira_admm<E: Executor>(
    problem: &SaaProblem<'_>,
    cfg: &AdmmConfig,
    exec: &E,
) -> (Allocation, UtilityReport, AdmmTrace) {
    let s_count = problem.sample_count();
    let n = problem.slice_count();
    let m = problem.block_count() as f64;
    let zero = vec![0.0; n];
    let mean_of = |vs: &[Vec<f64>]| -> Vec<f64> {
        (0..n)
            .map(|s| vs.iter().map(|v| v[s]).sum::<f64>() / vs.len() as f64)
            .collect()
    };

    // start from the mean of the per-sample optima
    let x0 = exec.map(s_count, |t| problem.subproblem_continuous(t, &zero, &zero, 0.0));
    let mut z = project_capped_simplex(&mean_of(&x0), m);
    let mut u = vec![vec![0.0; n]; s_count];
    let mut best = (saa_objective(problem, exec, &z), z.clone());
    let mut trace = AdmmTrace::default();

    for iter in 1..=cfg.max_iters {
        let x = exec.map(s_count, |t| problem.subproblem_continuous(t, &z, &u[t], cfg.rho));
        let shifted: Vec<Vec<f64>> = x
            .iter()
            .zip(&u)
            .map(|(xt, ut)| xt.iter().zip(ut).map(|(a, b)| a + b).collect())
            .collect();
        let z_new = project_capped_simplex(&mean_of(&shifted), m);
        for (ut, xt) in u.iter_mut().zip(&x) {
            for s in 0..n {
                ut[s] += xt[s] - z_new[s];
            }
        }
        let primal = x.iter().map(|xt| distance(xt, &z_new)).fold(0.0, f64::max);
        let dual = cfg.rho * distance(&z_new, &z);
        z = z_new;
        let objective = saa_objective(problem, exec, &z);
        trace.rows.push(TraceRow {
            iter,
            primal_residual: primal,
            dual_residual: dual,
            objective,
        });
        if objective > best.0 {
            best = (objective, z.clone());
        }
        if primal <= cfg.primal_tol && dual <= cfg.dual_tol {
            trace.converged = true;
            break;
        }
    }
    if !trace.converged {
        trace.warning = Some(format!(
            "ADMM stopped at the iteration cap ({}) without meeting tolerances; rounding the best iterate",
            cfg.max_iters
        ));
        z = best.1;
    }
    let all: Vec<usize> = (0..s_count).collect();
    let blocks = relax_and_round(problem, &all, &z);
    trace.consensus = z;
    let (alloc, report) = finalize(problem, exec, blocks);
    (alloc, report, trace)
}

/// Largest-remainder rounding of a non-negative vector to integers that
/// sum to at most `m`.
fn largest_remainder(x: &[f64], m: usize) -> Vec<usize> {
    let mut z: Vec<usize> = x.iter().map(|v| (v.max(0.0) + 1e-9).floor() as usize).collect();
    let target = ((x.iter().sum::<f64>() + 1e-9).floor() as usize).min(m);
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|a, b| {
        (x[*b] - x[*b].floor())
            .total_cmp(&(x[*a] - x[*a].floor()))
            .then(a.cmp(b))
    });
    for s in order {
        if z.iter().sum::<usize>() >= target {
            break;
        }
        z[s] += 1;
    }
    z
}

/// IRA baseline: per-sample optimisation without consensus. The held
/// split is the rounded optimum of the first sample (`FirstSample`) or
/// the rounded mean of all per-sample rounded optima (`SampleAverage`).
pub fn run_ira<E: Executor>(problem: &SaaProblem<'_>, mode: IraMode, exec: &E) -> (Allocation, UtilityReport) {
    let n = problem.slice_count();
    let zero = vec![0.0; n];
    let local = |t: usize| {
        let x = problem.subproblem_continuous(t, &zero, &zero, 0.0);
        relax_and_round(problem, &[t], &x)
    };
    let blocks = match mode {
        // the other samples' local solutions do not influence the result
        IraMode::FirstSample => local(0),
        IraMode::SampleAverage => {
            let zs = exec.map(problem.sample_count(), local);
            let mean: Vec<f64> = (0..n)
                .map(|s| zs.iter().map(|z| z[s] as f64).sum::<f64>() / zs.len() as f64)
                .collect();
            largest_remainder(&mean, problem.block_count())
        }
    };
    finalize(problem, exec, blocks)
}
