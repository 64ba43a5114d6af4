//! Small dense primal-dual interior-point solver for block-diagonal
//! semidefinite programs with an additional nonnegative orthant.
//!
//! Primal:  min <C, X>  s.t.  <A_i, X> = b_i,  X in S+^{n_1} x ... x R+^l
//! Dual:    max b'y     s.t.  sum_i y_i A_i + Z = C,  Z in the same cone
//!
//! Infeasible-start path following with the HKM search direction and
//! Mehrotra predictor-corrector steps. Primal infeasibility is reported
//! when the dual iterates approach a certifying ray.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

#[derive(Debug, Clone)]
pub struct Constraint {
    /// One symmetric matrix per PSD block, `None` for a zero block.
    pub blocks: Vec<Option<DMatrix<f64>>>,
    /// Sparse coefficients on the orthant variables.
    pub lp: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub lp_dim: usize,
    pub c_blocks: Vec<DMatrix<f64>>,
    pub c_lp: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpSettings {
    /// Target for |pobj - dobj| and <X,Z>, relative to 1 + |pobj|.
    pub gap_tol: f64,
    /// Target for scaled primal and dual residual norms.
    pub feas_tol: f64,
    pub max_iters: usize,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            gap_tol: 1e-7,
            feas_tol: 1e-9,
            max_iters: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub x_blocks: Vec<DMatrix<f64>>,
    pub x_lp: Vec<f64>,
    pub y: Vec<f64>,
    pub z_blocks: Vec<DMatrix<f64>>,
    pub z_lp: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl SdpSolution {
    pub fn duality_gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }

    /// <X, Z> summed over all cones.
    pub fn complementarity(&self) -> f64 {
        let sdp: f64 = self.x_blocks.iter().zip(&self.z_blocks).map(|(x, z)| x.dot(z)).sum();
        let lp: f64 = self.x_lp.iter().zip(&self.z_lp).map(|(x, z)| x * z).sum();
        sdp + lp
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SdpError {
    #[error("no convergence after {iterations} iterations")]
    MaxIterations { iterations: usize },
    #[error("numerical breakdown: {0}")]
    Numerical(&'static str),
    #[error("malformed problem: {0}")]
    Malformed(&'static str),
}

#[derive(Clone)]
struct Point {
    x: Vec<DMatrix<f64>>,
    xl: Vec<f64>,
    y: DVector<f64>,
    z: Vec<DMatrix<f64>>,
    zl: Vec<f64>,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dxl: Vec<f64>,
    dy: DVector<f64>,
    dz: Vec<DMatrix<f64>>,
    dzl: Vec<f64>,
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // tr(A B) = sum_ij A_ij B_ji
    a.component_mul(&b.transpose()).sum()
}

/// Largest step keeping `x + alpha dx` positive definite (infinite if none binds).
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let chol = Cholesky::new(x.clone())?;
    let l = chol.l();
    let linv = l.clone().try_inverse()?;
    let m = sym(&(&linv * dx * linv.transpose()));
    let eig = SymmetricEigen::new(m);
    let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    Some(if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY })
}

fn max_step_lp(x: &[f64], dx: &[f64]) -> f64 {
    x.iter()
        .zip(dx)
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

impl SdpProblem {
    fn check(&self) -> Result<(), SdpError> {
        if self.c_blocks.len() != self.block_dims.len() || self.c_lp.len() != self.lp_dim {
            return Err(SdpError::Malformed("objective dimensions"));
        }
        for c in &self.constraints {
            if c.blocks.len() != self.block_dims.len() {
                return Err(SdpError::Malformed("constraint block count"));
            }
            for (a, n) in c.blocks.iter().zip(&self.block_dims) {
                if let Some(a) = a {
                    if a.nrows() != *n || a.ncols() != *n {
                        return Err(SdpError::Malformed("constraint block size"));
                    }
                }
            }
            if c.lp.iter().any(|(i, _)| *i >= self.lp_dim) {
                return Err(SdpError::Malformed("lp index"));
            }
        }
        Ok(())
    }

    /// A(X) including the orthant part.
    fn apply(&self, x: &[DMatrix<f64>], xl: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.constraints.len(),
            self.constraints.iter().map(|c| {
                let s: f64 = c
                    .blocks
                    .iter()
                    .zip(x)
                    .filter_map(|(a, x)| a.as_ref().map(|a| a.dot(x)))
                    .sum();
                s + c.lp.iter().map(|(i, v)| v * xl[*i]).sum::<f64>()
            }),
        )
    }

    /// A^T y.
    fn adjoint(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, Vec<f64>) {
        let mut blocks: Vec<DMatrix<f64>> = self.block_dims.iter().map(|n| DMatrix::zeros(*n, *n)).collect();
        let mut lp = vec![0.0; self.lp_dim];
        for (c, yi) in self.constraints.iter().zip(y.iter()) {
            for (b, a) in c.blocks.iter().enumerate() {
                if let Some(a) = a {
                    blocks[b] += a * *yi;
                }
            }
            for (i, v) in &c.lp {
                lp[*i] += v * yi;
            }
        }
        (blocks, lp)
    }

    fn objective(&self, x: &[DMatrix<f64>], xl: &[f64]) -> f64 {
        let s: f64 = self.c_blocks.iter().zip(x).map(|(c, x)| c.dot(x)).sum();
        s + self.c_lp.iter().zip(xl).map(|(c, x)| c * x).sum::<f64>()
    }

    fn initial_point(&self) -> Point {
        let m = self.constraints.len();
        let rhs_scale = self.constraints.iter().map(|c| 1.0 + c.rhs.abs()).fold(0.0, f64::max);
        let mut x = Vec::new();
        let mut z = Vec::new();
        for (b, n) in self.block_dims.iter().enumerate() {
            let nf = *n as f64;
            let mut xi = 10f64.max(nf.sqrt());
            let mut eta = 10f64.max(nf.sqrt()).max(self.c_blocks[b].norm());
            for c in &self.constraints {
                if let Some(a) = &c.blocks[b] {
                    let an = a.norm();
                    xi = xi.max(nf * rhs_scale / (1.0 + an));
                    eta = eta.max(an);
                }
            }
            x.push(DMatrix::identity(*n, *n) * xi);
            z.push(DMatrix::identity(*n, *n) * eta);
        }
        let mut xl = vec![0.0; self.lp_dim];
        let mut zl = vec![0.0; self.lp_dim];
        for i in 0..self.lp_dim {
            let col_norm = self
                .constraints
                .iter()
                .flat_map(|c| c.lp.iter().filter(|(j, _)| *j == i).map(|(_, v)| v * v))
                .sum::<f64>()
                .sqrt();
            xl[i] = 10f64.max(rhs_scale / (1.0 + col_norm));
            zl[i] = 10f64.max(col_norm).max(self.c_lp[i].abs());
        }
        Point {
            x,
            xl,
            y: DVector::zeros(m),
            z,
            zl,
        }
    }
}

/// Solves `problem` to the accuracy in `settings`.
pub fn solve(problem: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution, SdpError> {
    problem.check()?;
    let m = problem.constraints.len();
    let nu = (problem.block_dims.iter().sum::<usize>() + problem.lp_dim) as f64;
    let b = DVector::from_iterator(m, problem.constraints.iter().map(|c| c.rhs));
    let b_norm = b.norm();
    let c_norm = (problem.c_blocks.iter().map(|c| c.norm_squared()).sum::<f64>()
        + problem.c_lp.iter().map(|v| v * v).sum::<f64>())
    .sqrt();

    let mut pt = problem.initial_point();
    for iter in 0..=settings.max_iters {
        let ax = problem.apply(&pt.x, &pt.xl);
        let rp = &b - &ax;
        let (aty, atyl) = problem.adjoint(&pt.y);
        let rd: Vec<DMatrix<f64>> = problem
            .c_blocks
            .iter()
            .zip(&aty)
            .zip(&pt.z)
            .map(|((c, a), z)| c - a - z)
            .collect();
        let rdl: Vec<f64> = (0..problem.lp_dim)
            .map(|i| problem.c_lp[i] - atyl[i] - pt.zl[i])
            .collect();
        let rd_norm =
            (rd.iter().map(|r| r.norm_squared()).sum::<f64>() + rdl.iter().map(|v| v * v).sum::<f64>()).sqrt();

        let complementarity: f64 = pt.x.iter().zip(&pt.z).map(|(x, z)| x.dot(z)).sum::<f64>()
            + pt.xl.iter().zip(&pt.zl).map(|(x, z)| x * z).sum::<f64>();
        let mu = complementarity / nu;
        let pobj = problem.objective(&pt.x, &pt.xl);
        let dobj = b.dot(&pt.y);
        let pinf = rp.norm() / (1.0 + b_norm);
        let dinf = rd_norm / (1.0 + c_norm);
        let scale = 1.0 + pobj.abs();

        if pinf <= settings.feas_tol
            && dinf <= settings.feas_tol
            && (pobj - dobj).abs() <= settings.gap_tol * scale
            && complementarity <= settings.gap_tol * scale
        {
            return Ok(finish(pt, SdpStatus::Optimal, pobj, dobj, iter, pinf, dinf));
        }
        // dual ray: A^T y + Z = C - Rd shrinks relative to b'y
        if dobj > 0.0 {
            let ray = (c_norm + rd_norm) / dobj;
            if ray <= 1e-8 && dobj > 1e6 {
                return Ok(finish(pt, SdpStatus::PrimalInfeasible, pobj, dobj, iter, pinf, dinf));
            }
        }
        if pobj < 0.0 {
            let ray = (b_norm + rp.norm()) / -pobj;
            if ray <= 1e-8 && -pobj > 1e6 {
                return Ok(finish(pt, SdpStatus::DualInfeasible, pobj, dobj, iter, pinf, dinf));
            }
        }
        if iter == settings.max_iters {
            break;
        }

        let zinv: Vec<DMatrix<f64>> =
            pt.z.iter()
                .map(|z| Cholesky::new(z.clone()).map(|c| sym(&c.inverse())))
                .collect::<Option<_>>()
                .ok_or(SdpError::Numerical("dual iterate lost definiteness"))?;
        let schur = schur_complement(problem, &pt, &zinv);
        let schur_chol = Cholesky::new(schur.clone())
            .or_else(|| {
                let eps = 1e-14 * schur.diagonal().amax().max(1e-300);
                Cholesky::new(schur + DMatrix::identity(m, m) * eps)
            })
            .ok_or(SdpError::Numerical("schur complement not positive definite"))?;

        // predictor
        let aff = direction(problem, &pt, &zinv, &schur_chol, &b, &rd, &rdl, 0.0, None);
        let (ap, ad) = step_lengths(&pt, &aff, 1.0)?;
        let mu_aff = (pt
            .x
            .iter()
            .zip(&aff.dx)
            .zip(pt.z.iter().zip(&aff.dz))
            .map(|((x, dx), (z, dz))| (x + dx * ap).dot(&(z + dz * ad)))
            .sum::<f64>()
            + (0..problem.lp_dim)
                .map(|i| (pt.xl[i] + ap * aff.dxl[i]) * (pt.zl[i] + ad * aff.dzl[i]))
                .sum::<f64>())
            / nu;
        let sigma = (mu_aff / mu).max(0.0).powi(3).min(1.0);

        // corrector
        let dir = direction(problem, &pt, &zinv, &schur_chol, &b, &rd, &rdl, sigma * mu, Some(&aff));
        let (ap, ad) = step_lengths(&pt, &dir, 0.98)?;

        for (x, dx) in pt.x.iter_mut().zip(&dir.dx) {
            *x = sym(&(&*x + dx * ap));
        }
        for (x, dx) in pt.xl.iter_mut().zip(&dir.dxl) {
            *x += ap * dx;
        }
        pt.y += &dir.dy * ad;
        for (z, dz) in pt.z.iter_mut().zip(&dir.dz) {
            *z = sym(&(&*z + dz * ad));
        }
        for (z, dz) in pt.zl.iter_mut().zip(&dir.dzl) {
            *z += ad * dz;
        }
    }
    Err(SdpError::MaxIterations {
        iterations: settings.max_iters,
    })
}

fn finish(pt: Point, status: SdpStatus, pobj: f64, dobj: f64, iterations: usize, pinf: f64, dinf: f64) -> SdpSolution {
    SdpSolution {
        status,
        x_blocks: pt.x,
        x_lp: pt.xl,
        y: pt.y.iter().copied().collect(),
        z_blocks: pt.z,
        z_lp: pt.zl,
        primal_objective: pobj,
        dual_objective: dobj,
        iterations,
        primal_residual: pinf,
        dual_residual: dinf,
    }
}

/// M_ij = sum_b tr(A_ib X_b A_jb Z_b^{-1}) + sum_l a_il a_jl x_l / z_l.
fn schur_complement(problem: &SdpProblem, pt: &Point, zinv: &[DMatrix<f64>]) -> DMatrix<f64> {
    let m = problem.constraints.len();
    let mut schur = DMatrix::zeros(m, m);
    for (b, zb) in zinv.iter().enumerate().take(problem.block_dims.len()) {
        let left: Vec<Option<DMatrix<f64>>> = problem
            .constraints
            .iter()
            .map(|c| c.blocks[b].as_ref().map(|a| a * &pt.x[b]))
            .collect();
        let right: Vec<Option<DMatrix<f64>>> = problem
            .constraints
            .iter()
            .map(|c| c.blocks[b].as_ref().map(|a| a * zb))
            .collect();
        for i in 0..m {
            let Some(li) = &left[i] else { continue };
            for j in i..m {
                let Some(rj) = &right[j] else { continue };
                let v = trace_product(li, rj);
                schur[(i, j)] += v;
                if i != j {
                    schur[(j, i)] += v;
                }
            }
        }
    }
    for (i, ci) in problem.constraints.iter().enumerate() {
        for (j, cj) in problem.constraints.iter().enumerate() {
            for (li, vi) in &ci.lp {
                for (lj, vj) in &cj.lp {
                    if li == lj {
                        schur[(i, j)] += vi * vj * pt.xl[*li] / pt.zl[*li];
                    }
                }
            }
        }
    }
    schur
}

#[allow(clippy::too_many_arguments)]
fn direction(
    problem: &SdpProblem,
    pt: &Point,
    zinv: &[DMatrix<f64>],
    schur: &Cholesky<f64, nalgebra::Dyn>,
    b: &DVector<f64>,
    rd: &[DMatrix<f64>],
    rdl: &[f64],
    sigma_mu: f64,
    second_order: Option<&Direction>,
) -> Direction {
    // H = sigma mu Z^{-1} - X - G - X Rd Z^{-1}, rhs = b - A(sigma mu Z^{-1}) + A(X Rd Z^{-1}) + A(G)
    let g: Vec<DMatrix<f64>> = match second_order {
        Some(d) => {
            d.dx.iter()
                .zip(&d.dz)
                .zip(zinv)
                .map(|((dx, dz), zi)| sym(&(dx * dz * zi)))
                .collect()
        }
        None => problem.block_dims.iter().map(|n| DMatrix::zeros(*n, *n)).collect(),
    };
    let gl: Vec<f64> = match second_order {
        Some(d) => (0..problem.lp_dim).map(|i| d.dxl[i] * d.dzl[i] / pt.zl[i]).collect(),
        None => vec![0.0; problem.lp_dim],
    };
    let xrz: Vec<DMatrix<f64>> =
        pt.x.iter()
            .zip(rd)
            .zip(zinv)
            .map(|((x, r), zi)| sym(&(x * r * zi)))
            .collect();
    let inner: Vec<DMatrix<f64>> = zinv
        .iter()
        .zip(&xrz)
        .zip(&g)
        .map(|((zi, xr), g)| xr + g - zi * sigma_mu)
        .collect();
    let inner_l: Vec<f64> = (0..problem.lp_dim)
        .map(|i| pt.xl[i] * rdl[i] / pt.zl[i] + gl[i] - sigma_mu / pt.zl[i])
        .collect();
    let rhs = b + problem.apply(&inner, &inner_l);
    let dy = schur.solve(&rhs);
    let (atdy, atdyl) = problem.adjoint(&dy);
    let dz: Vec<DMatrix<f64>> = rd.iter().zip(&atdy).map(|(r, a)| r - a).collect();
    let dzl: Vec<f64> = rdl.iter().zip(&atdyl).map(|(r, a)| r - a).collect();
    let dx: Vec<DMatrix<f64>> =
        pt.x.iter()
            .zip(zinv)
            .zip(&dz)
            .zip(&g)
            .map(|(((x, zi), dz), g)| sym(&(zi * sigma_mu - x - g - x * dz * zi)))
            .collect();
    let dxl: Vec<f64> = (0..problem.lp_dim)
        .map(|i| sigma_mu / pt.zl[i] - pt.xl[i] - gl[i] - pt.xl[i] * dzl[i] / pt.zl[i])
        .collect();
    Direction { dx, dxl, dy, dz, dzl }
}

fn step_lengths(pt: &Point, d: &Direction, fraction: f64) -> Result<(f64, f64), SdpError> {
    let mut ap = max_step_lp(&pt.xl, &d.dxl);
    for (x, dx) in pt.x.iter().zip(&d.dx) {
        ap = ap.min(max_step_psd(x, dx).ok_or(SdpError::Numerical("primal iterate lost definiteness"))?);
    }
    let mut ad = max_step_lp(&pt.zl, &d.dzl);
    for (z, dz) in pt.z.iter().zip(&d.dz) {
        ad = ad.min(max_step_psd(z, dz).ok_or(SdpError::Numerical("dual iterate lost definiteness"))?);
    }
    Ok(((fraction * ap).min(1.0), (fraction * ad).min(1.0)))
}
