use alloc::vec;
use alloc::vec::Vec;

use super::SaaProblem;

/// Cap on local-search rounds in `relax_and_round`.
pub const LOCAL_SEARCH_ROUNDS: usize = 50;

fn improves(candidate: f64, current: f64) -> bool {
    candidate > current + 1e-9 * (1.0 + current.abs())
}

/// Euclidean projection onto {x >= 0, sum x <= cap}.
pub fn project_capped_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= cap {
        return clipped;
    }
    // sum is active: shift by theta so that sum max(v - theta, 0) = cap
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        acc += x;
        let t = (acc - cap) / (i + 1) as f64;
        if *x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

impl SaaProblem<'_> {
    /// x-update of the consensus ADMM for sample `t`: maximises
    /// utility(x) - rho/2 ||x - z_ref + u||^2 over {x >= 0, sum x <= M}.
    ///
    /// Slices are scored standalone (each sees the full RU budget), which
    /// makes the objective separable; a dynamic program over the bandwidth
    /// grid then finds its maximiser on the grid. Near-ties go to the
    /// larger share of the earlier slice.
    pub fn subproblem_continuous(&self, t: usize, z_ref: &[f64], u: &[f64], rho: f64) -> Vec<f64> {
        let n = self.slice_count();
        let q = self.grid_per_block();
        let g = self.block_count() * q;
        let qf = q as f64;
        let scores: Vec<Vec<f64>> = (0..n)
            .map(|s| {
                let target = z_ref[s] - u[s];
                self.table(t, s)
                    .iter()
                    .enumerate()
                    .map(|(i, f)| {
                        let d = i as f64 / qf - target;
                        f - 0.5 * rho * d * d
                    })
                    .collect()
            })
            .collect();
        // best[s][c]: optimum of slices s.. with c grid units available
        let mut best = vec![vec![0.0; g + 1]; n + 1];
        let mut choice = vec![vec![0usize; g + 1]; n];
        for s in (0..n).rev() {
            for c in 0..=g {
                let mut top = f64::NEG_INFINITY;
                let mut arg = 0;
                for i in (0..=c).rev() {
                    let v = scores[s][i] + best[s + 1][c - i];
                    if top == f64::NEG_INFINITY || improves(v, top) {
                        top = v;
                        arg = i;
                    }
                }
                best[s][c] = top;
                choice[s][c] = arg;
            }
        }
        let mut left = g;
        let mut x = Vec::with_capacity(n);
        for row in &choice {
            let i = row[left];
            x.push(i as f64 / qf);
            left -= i;
        }
        x
    }
}

/// Integer split from a continuous one: floor, hand out the leftover
/// blocks one at a time to the slice with the largest SAA-utility gain,
/// then apply the best single-block transfer between two slices until
/// none improves.
pub fn relax_and_round(problem: &SaaProblem<'_>, samples: &[usize], z0: &[f64]) -> Vec<usize> {
    let m = problem.block_count();
    let n = problem.slice_count();
    let mut z: Vec<usize> = z0.iter().map(|x| (x.max(0.0) + 1e-9).floor() as usize).collect();
    while z.iter().sum::<usize>() > m {
        let (s, _) = z
            .iter()
            .enumerate()
            .fold((0, 0), |b, (s, v)| if *v > b.1 { (s, *v) } else { b });
        z[s] -= 1;
    }
    let mut current = problem.saa_utility(samples, &z);
    while z.iter().sum::<usize>() < m {
        let mut pick = None;
        for s in 0..n {
            z[s] += 1;
            let v = problem.saa_utility(samples, &z);
            z[s] -= 1;
            if pick.is_none_or(|(_, b)| improves(v, b)) {
                pick = Some((s, v));
            }
        }
        let (s, v) = pick.expect("at least one slice");
        z[s] += 1;
        current = v;
    }
    for _ in 0..LOCAL_SEARCH_ROUNDS {
        let mut pick = None;
        for from in 0..n {
            if z[from] == 0 {
                continue;
            }
            for to in 0..n {
                if to == from {
                    continue;
                }
                z[from] -= 1;
                z[to] += 1;
                let v = problem.saa_utility(samples, &z);
                z[to] -= 1;
                z[from] += 1;
                let bar = pick.map_or(current, |(_, _, b)| b);
                if improves(v, bar) {
                    pick = Some((from, to, v));
                }
            }
        }
        let Some((from, to, v)) = pick else { break };
        z[from] -= 1;
        z[to] += 1;
        current = v;
    }
    z
}
