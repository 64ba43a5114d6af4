//! CoMP joint-transmission beamforming for TI slices and single-RU power
//! for eMBB users.
//!
//! TI robots of one slice share the slice bandwidth and are separated by
//! beamformers over the stacked array of every RU. Power minimisation under
//! SINR targets is solved through its semidefinite relaxation, then mapped
//! back to rank-one beamformers.

mod embb;
pub mod sdp;

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub use embb::{admit_embb_users, embb_power, EmbbAdmission, EmbbPower};

use crate::channel::{norm_sqr, C64};
use crate::scenario::SdrConfig;
use sdp::{Constraint, SdpError, SdpProblem, SdpSettings, SdpStatus};

/// Eigenvalue share above which a covariance is treated as rank one.
pub const RANK_ONE_RATIO: f64 = 0.999;
/// Relative SINR slack accepted on a returned feasible solution.
pub const SINR_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BeamformingError {
    #[error("SINR targets cannot be met within the per-RU power budgets")]
    Infeasible,
    #[error("SDR solver did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("SDR solver numerical failure: {0}")]
    Numerical(&'static str),
    #[error("invalid beamforming problem: {0}")]
    Invalid(&'static str),
}

impl From<SdpError> for BeamformingError {
    fn from(e: SdpError) -> Self {
        match e {
            SdpError::MaxIterations { iterations } => BeamformingError::NonConvergence { iterations },
            SdpError::Numerical(m) => BeamformingError::Numerical(m),
            SdpError::Malformed(m) => BeamformingError::Invalid(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingProblem {
    /// Stacked channel of each robot.
    pub channels: Vec<Vec<C64>>,
    pub gamma_req: Vec<f64>,
    pub noise_power_w: f64,
    /// Remaining power per RU; `f64::INFINITY` for an unconstrained RU.
    pub ru_budgets_w: Vec<f64>,
    /// Stacked-vector coordinates owned by each RU.
    pub ru_antenna_sets: Vec<Range<usize>>,
}

impl BeamformingProblem {
    pub fn new(
        channels: Vec<Vec<C64>>,
        gamma_req: Vec<f64>,
        noise_power_w: f64,
        ru_budgets_w: Vec<f64>,
        antennas_per_ru: usize,
    ) -> Result<Self, BeamformingError> {
        let ru_antenna_sets = (0..ru_budgets_w.len())
            .map(|j| j * antennas_per_ru..(j + 1) * antennas_per_ru)
            .collect();
        let p = Self {
            channels,
            gamma_req,
            noise_power_w,
            ru_budgets_w,
            ru_antenna_sets,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), BeamformingError> {
        let n = self.dim();
        if self.channels.is_empty() {
            return Err(BeamformingError::Invalid("no robots"));
        }
        if self.channels.iter().any(|h| h.len() != n) || self.gamma_req.len() != self.channels.len() {
            return Err(BeamformingError::Invalid("inconsistent dimensions"));
        }
        if self.ru_antenna_sets.len() != self.ru_budgets_w.len()
            || self.ru_antenna_sets.iter().map(|r| r.len()).sum::<usize>() != n
        {
            return Err(BeamformingError::Invalid(
                "RU antenna sets do not cover the stacked array",
            ));
        }
        if self.gamma_req.iter().any(|g| !(*g > 0.0)) {
            return Err(BeamformingError::Invalid("gamma_req must be > 0"));
        }
        if !(self.noise_power_w > 0.0) {
            return Err(BeamformingError::Invalid("noise power must be > 0"));
        }
        if self.ru_budgets_w.iter().any(|b| !(*b >= 0.0)) {
            return Err(BeamformingError::Invalid("budgets must be >= 0"));
        }
        if self.channels.iter().any(|h| !(norm_sqr(h) > 0.0)) {
            return Err(BeamformingError::Invalid("zero channel"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn robots(&self) -> usize {
        self.channels.len()
    }

    /// Per-RU transmit power of a beamformer set.
    pub fn per_ru_power(&self, beamformers: &[Vec<C64>]) -> Vec<f64> {
        self.ru_antenna_sets
            .iter()
            .map(|set| beamformers.iter().map(|w| norm_sqr(&w[set.clone()])).sum())
            .collect()
    }

    fn within_budgets(&self, per_ru: &[f64]) -> bool {
        per_ru
            .iter()
            .zip(&self.ru_budgets_w)
            .all(|(p, b)| *p <= b * (1.0 + 1e-9) + 1e-300)
    }
}

/// h^H w.
fn inner(h: &[C64], w: &[C64]) -> C64 {
    h.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

/// SINR of every robot: |h_k^H w_k|^2 over intra-slice interference plus noise.
pub fn sinr(beamformers: &[Vec<C64>], channels: &[Vec<C64>], noise_power_w: f64) -> Vec<f64> {
    channels
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let signal = inner(h, &beamformers[k]).norm_sqr();
            let interference: f64 = beamformers
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != k)
                .map(|(_, w)| inner(h, w).norm_sqr())
                .sum();
            signal / (interference + noise_power_w)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RelaxedSolution {
    /// Q_k in watts.
    pub covariances: Vec<DMatrix<C64>>,
    /// Sum of traces, watts.
    pub objective: f64,
    /// Duality gap in watts at termination.
    pub duality_gap: f64,
    /// <X, Z> in watts at termination.
    pub complementarity: f64,
    pub iterations: usize,
    /// Whether the per-RU budget rows were part of the final solve.
    pub budgets_enforced: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    pub covariances: Vec<DMatrix<C64>>,
    pub beamformers: Vec<Vec<C64>>,
    pub achieved_sinr: Vec<f64>,
    pub per_ru_power: Vec<f64>,
    pub total_power: f64,
    pub feasible: bool,
    /// Recovered power over relaxed objective (>= 1 up to solver tolerance).
    pub rank1_gap: f64,
}

impl BeamformingSolution {
    fn infeasible(p: &BeamformingProblem, covariances: Vec<DMatrix<C64>>) -> Self {
        Self {
            covariances,
            beamformers: Vec::new(),
            achieved_sinr: vec![0.0; p.robots()],
            per_ru_power: vec![0.0; p.ru_budgets_w.len()],
            total_power: 0.0,
            feasible: false,
            rank1_gap: f64::INFINITY,
        }
    }

    /// Solution of the same problem with every noise power multiplied by
    /// `factor`; exact because the problem is homogeneous in the noise.
    pub fn scaled(&self, factor: f64) -> Self {
        let amp = factor.sqrt();
        Self {
            covariances: self.covariances.iter().map(|q| q * Complex::new(factor, 0.0)).collect(),
            beamformers: self
                .beamformers
                .iter()
                .map(|w| w.iter().map(|c| c * amp).collect())
                .collect(),
            achieved_sinr: self.achieved_sinr.clone(),
            per_ru_power: self.per_ru_power.iter().map(|p| p * factor).collect(),
            total_power: self.total_power * factor,
            feasible: self.feasible,
            rank1_gap: self.rank1_gap,
        }
    }

    /// Eigenvalues of each covariance in descending order.
    pub fn covariance_eigenvalues(&self) -> Vec<Vec<f64>> {
        self.covariances.iter().map(|q| hermitian_eigen(q).0).collect()
    }
}

/// Real symmetric embedding [[Re, -Im], [Im, Re]] of a Hermitian matrix.
fn embed(m: &DMatrix<C64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let v = m[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    })
}

/// Inverse of `embed`, averaging the redundant copies.
fn unembed(x: &DMatrix<f64>) -> DMatrix<C64> {
    let n = x.nrows() / 2;
    DMatrix::from_fn(n, n, |a, b| {
        Complex::new(
            0.5 * (x[(a, b)] + x[(n + a, n + b)]),
            0.5 * (x[(n + a, b)] - x[(a, n + b)]),
        )
    })
}

fn outer(h: &[C64]) -> DMatrix<C64> {
    let n = h.len();
    DMatrix::from_fn(n, n, |a, b| h[a] * h[b].conj())
}

/// Eigenvalues (descending) and matching unit eigenvectors.
fn hermitian_eigen(q: &DMatrix<C64>) -> (Vec<f64>, Vec<Vec<C64>>) {
    let herm = (q + q.adjoint()) * Complex::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
    let values = idx.iter().map(|i| eig.eigenvalues[*i]).collect();
    let vectors = idx
        .iter()
        .map(|i| eig.eigenvectors.column(*i).iter().copied().collect())
        .collect();
    (values, vectors)
}

fn trace_re(q: &DMatrix<C64>) -> f64 {
    q.diagonal().iter().map(|c| c.re).sum()
}

/// Builds the lifted power-minimisation SDP in units where the MRT lower
/// bound on total power is one. Returns the problem and the watt scale.
fn lifted_problem(p: &BeamformingProblem, with_budgets: bool) -> (SdpProblem, f64) {
    let k_count = p.robots();
    let n = p.dim();
    let sigma2 = p.noise_power_w;
    let scale: f64 = p
        .channels
        .iter()
        .zip(&p.gamma_req)
        .map(|(h, g)| g * sigma2 / norm_sqr(h))
        .sum();
    let half = |m: DMatrix<f64>| m * 0.5;
    let budget_rows: Vec<usize> = if with_budgets {
        (0..p.ru_budgets_w.len())
            .filter(|j| p.ru_budgets_w[*j].is_finite())
            .collect()
    } else {
        Vec::new()
    };
    let lp_dim = k_count + budget_rows.len();
    let mut constraints = Vec::with_capacity(lp_dim);
    for k in 0..k_count {
        let g = p.gamma_req[k];
        let hk = half(embed(&outer(&p.channels[k]))) * (scale / (g * sigma2));
        let blocks = (0..k_count)
            .map(|i| Some(if i == k { hk.clone() } else { &hk * -g }))
            .collect();
        constraints.push(Constraint {
            blocks,
            lp: vec![(k, -1.0)],
            rhs: 1.0,
        });
    }
    for (row, j) in budget_rows.iter().enumerate() {
        let mut sel = DMatrix::zeros(2 * n, 2 * n);
        for a in p.ru_antenna_sets[*j].clone() {
            sel[(a, a)] = 0.5;
            sel[(n + a, n + a)] = 0.5;
        }
        constraints.push(Constraint {
            blocks: vec![Some(sel); k_count],
            lp: vec![(k_count + row, 1.0)],
            rhs: p.ru_budgets_w[*j] / scale,
        });
    }
    let sdp = SdpProblem {
        block_dims: vec![2 * n; k_count],
        lp_dim,
        c_blocks: vec![DMatrix::identity(2 * n, 2 * n) * 0.5; k_count],
        c_lp: vec![0.0; lp_dim],
        constraints,
    };
    (sdp, scale)
}

fn solve_lifted(
    p: &BeamformingProblem,
    cfg: &SdrConfig,
    with_budgets: bool,
) -> Result<RelaxedSolution, BeamformingError> {
    let (sdp, scale) = lifted_problem(p, with_budgets);
    let settings = SdpSettings {
        gap_tol: cfg.tolerance,
        feas_tol: 1e-9,
        max_iters: cfg.max_iters,
    };
    let sol = sdp::solve(&sdp, &settings)?;
    if sol.status != SdpStatus::Optimal {
        return Err(BeamformingError::Infeasible);
    }
    let covariances: Vec<DMatrix<C64>> = sol
        .x_blocks
        .iter()
        .map(|x| unembed(x) * Complex::new(scale, 0.0))
        .collect();
    Ok(RelaxedSolution {
        objective: covariances.iter().map(trace_re).sum(),
        covariances,
        duality_gap: sol.duality_gap() * scale,
        complementarity: sol.complementarity() * scale,
        iterations: sol.iterations,
        budgets_enforced: with_budgets,
    })
}

/// Minimises total power sum tr(Q_k) under the SINR and per-RU budget
/// constraints with the rank-one requirement dropped.
///
/// The budget rows are added only when the unconstrained optimum violates
/// them; otherwise that optimum already solves the full problem.
pub fn solve_sdr_power_min(p: &BeamformingProblem, cfg: &SdrConfig) -> Result<RelaxedSolution, BeamformingError> {
    p.validate()?;
    let free = solve_lifted(p, cfg, false)?;
    let per_ru: Vec<f64> = p
        .ru_antenna_sets
        .iter()
        .map(|set| {
            free.covariances
                .iter()
                .map(|q| set.clone().map(|a| q[(a, a)].re).sum::<f64>())
                .sum()
        })
        .collect();
    if p.within_budgets(&per_ru) {
        return Ok(free);
    }
    solve_lifted(p, cfg, true)
}

/// Minimum powers that meet every SINR target exactly for fixed unit
/// beam directions, if any exist.
pub fn power_control(p: &BeamformingProblem, directions: &[Vec<C64>]) -> Option<Vec<f64>> {
    let k_count = p.robots();
    let mut a = DMatrix::<f64>::zeros(k_count, k_count);
    let mut rhs = DVector::<f64>::zeros(k_count);
    for k in 0..k_count {
        let g = p.gamma_req[k];
        for i in 0..k_count {
            let gain = inner(&p.channels[k], &directions[i]).norm_sqr();
            a[(k, i)] = if i == k { gain } else { -g * gain };
        }
        rhs[k] = g * p.noise_power_w;
    }
    let powers = a.lu().solve(&rhs)?;
    // a Z-matrix system has a positive solution only in the feasible case
    if powers.iter().all(|v| v.is_finite() && *v > 0.0) {
        Some(powers.iter().copied().collect())
    } else {
        None
    }
}

struct Candidate {
    beamformers: Vec<Vec<C64>>,
    per_ru: Vec<f64>,
    total: f64,
}

fn candidate_from_directions(p: &BeamformingProblem, directions: &[Vec<C64>]) -> Option<Candidate> {
    let powers = power_control(p, directions)?;
    let beamformers: Vec<Vec<C64>> = directions
        .iter()
        .zip(&powers)
        .map(|(v, pw)| v.iter().map(|c| c * pw.sqrt()).collect())
        .collect();
    let per_ru = p.per_ru_power(&beamformers);
    if !p.within_budgets(&per_ru) {
        return None;
    }
    Some(Candidate {
        total: powers.iter().sum(),
        beamformers,
        per_ru,
    })
}

fn meets_targets(p: &BeamformingProblem, beamformers: &[Vec<C64>], per_ru: &[f64]) -> bool {
    let achieved = sinr(beamformers, &p.channels, p.noise_power_w);
    achieved
        .iter()
        .zip(&p.gamma_req)
        .all(|(s, g)| *s >= g * (1.0 - SINR_SLACK))
        && per_ru.iter().zip(&p.ru_budgets_w).all(|(u, b)| *u <= b + 1e-6)
}

fn unit(v: &[C64]) -> Vec<C64> {
    let n = norm_sqr(v).sqrt();
    v.iter().map(|c| c / n).collect()
}

/// Maps relaxed covariances to beamformers.
///
/// Rank-one covariances give their principal eigenvector scaled to the
/// trace. Otherwise Gaussian randomization draws candidate directions,
/// each rescaled by exact power control, and the cheapest candidate that
/// meets every SINR target within the budgets wins.
pub fn rank1_recover<R: Rng + ?Sized>(
    relaxed: &RelaxedSolution,
    p: &BeamformingProblem,
    cfg: &SdrConfig,
    rng: &mut R,
) -> BeamformingSolution {
    let eig: Vec<(Vec<f64>, Vec<Vec<C64>>)> = relaxed.covariances.iter().map(hermitian_eigen).collect();
    let traces: Vec<f64> = relaxed.covariances.iter().map(trace_re).collect();
    let principal: Vec<Vec<C64>> = eig.iter().map(|(_, v)| v[0].clone()).collect();
    let finish = |beamformers: Vec<Vec<C64>>, per_ru: Vec<f64>, total: f64| BeamformingSolution {
        achieved_sinr: sinr(&beamformers, &p.channels, p.noise_power_w),
        covariances: relaxed.covariances.clone(),
        beamformers,
        per_ru_power: per_ru,
        total_power: total,
        feasible: true,
        rank1_gap: if relaxed.objective > 0.0 {
            total / relaxed.objective
        } else {
            1.0
        },
    };

    let rank_one = eig
        .iter()
        .zip(&traces)
        .all(|((vals, _), tr)| *tr > 0.0 && vals[0] / tr >= RANK_ONE_RATIO);
    if rank_one {
        let beamformers: Vec<Vec<C64>> = principal
            .iter()
            .zip(&traces)
            .map(|(v, tr)| v.iter().map(|c| c * tr.sqrt()).collect())
            .collect();
        let per_ru = p.per_ru_power(&beamformers);
        if meets_targets(p, &beamformers, &per_ru) {
            let total = traces.iter().sum();
            return finish(beamformers, per_ru, total);
        }
    }

    let mut best = candidate_from_directions(p, &principal);
    let n = p.dim();
    for _ in 0..cfg.randomization_candidates {
        let directions: Vec<Vec<C64>> = eig
            .iter()
            .map(|(vals, vecs)| {
                let mut w = vec![C64::new(0.0, 0.0); n];
                for (lam, v) in vals.iter().zip(vecs) {
                    if *lam <= 0.0 {
                        continue;
                    }
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    let xi = C64::new(re, im) * (0.5 * lam).sqrt();
                    for (wa, va) in w.iter_mut().zip(v) {
                        *wa += va * xi;
                    }
                }
                unit(&w)
            })
            .collect();
        if directions
            .iter()
            .any(|d| d.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()))
        {
            continue;
        }
        if let Some(c) = candidate_from_directions(p, &directions) {
            if best.as_ref().is_none_or(|b| c.total < b.total) {
                best = Some(c);
            }
        }
    }
    match best {
        Some(c) => finish(c.beamformers, c.per_ru, c.total),
        None => BeamformingSolution::infeasible(p, relaxed.covariances.clone()),
    }
}

/// Relaxation followed by recovery; infeasibility is folded into the flag.
pub fn solve_beamforming<R: Rng + ?Sized>(
    p: &BeamformingProblem,
    cfg: &SdrConfig,
    rng: &mut R,
) -> Result<BeamformingSolution, BeamformingError> {
    match solve_sdr_power_min(p, cfg) {
        Ok(relaxed) => Ok(rank1_recover(&relaxed, p, cfg, rng)),
        Err(BeamformingError::Infeasible) => Ok(BeamformingSolution::infeasible(p, Vec::new())),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests;
