//! Multi-timescale slice allocation: integer bandwidth blocks held for the
//! long window, per-sample beamforming powers, SAA over channel samples.

mod admm;
mod sample;
mod search;

use alloc::string::String;
use alloc::vec::Vec;

pub use admm::{run_ira, run_ira_admm, AdmmTrace, Allocation, TraceRow, UtilityReport};
pub use sample::{solve_sample, SaaProblem, SampleResult, SliceOutcome};
pub use search::{project_capped_simplex, relax_and_round, LOCAL_SEARCH_ROUNDS};

use crate::comp::BeamformingError;
use crate::qos::QosError;
use crate::scenario::{Scenario, ScenarioError, SliceKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    pub rho: f64,
    pub max_iters: usize,
    /// Blocks; bound on max_t ||x_t - z||.
    pub primal_tol: f64,
    /// Blocks; bound on rho ||z - z_prev||.
    pub dual_tol: f64,
    /// Resolution of the per-sample bandwidth search, points per block.
    pub grid_per_block: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iters: 50,
            primal_tol: 1e-3,
            dual_tol: 1e-3,
            grid_per_block: 4,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err("admm rho must be > 0".into());
        }
        if !(self.primal_tol > 0.0) || !(self.dual_tol > 0.0) {
            return Err("admm tolerances must be > 0".into());
        }
        if self.max_iters == 0 || self.grid_per_block == 0 {
            return Err("admm max_iters and grid_per_block must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AllocError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("QoS mapping failed: {0}")]
    Qos(#[from] QosError),
    #[error("beamforming failed: {0}")]
    Beamforming(#[from] BeamformingError),
    #[error("topology does not match scenario: {0}")]
    Topology(&'static str),
    #[error("block vector has the wrong length or exceeds the total")]
    InvalidBlocks,
}

/// w_kind * satisfied_fraction - eta * power.
pub fn slice_utility(kind: SliceKind, satisfied_fraction: f64, power_w: f64, sc: &Scenario) -> f64 {
    sc.utility_weights.weight(kind) * satisfied_fraction - sc.power_price * power_w
}

/// Runs independent per-sample jobs. Implementations must return results
/// in index order so reductions stay bit-identical.
pub trait Executor: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

#[cfg(test)]
mod tests;
