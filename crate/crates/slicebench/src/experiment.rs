//! Single runs and tactile-intensity sweeps.

use std::fmt;
use std::str::FromStr;

use slicebench_core::allocator::{
    run_ira, run_ira_admm, AdmmTrace, AllocError, Allocation, Executor, SaaProblem, Sequential, UtilityReport,
};
use slicebench_core::scenario::{generate_topology, Scenario, SliceKind, SliceSpec, TOPOLOGY_STREAM};

use crate::output::ResultRow;

/// Per-robot TI arrival rates (pkts/s) swept by default.
pub const DEFAULT_LAMBDA_GRID: [f64; 10] = [50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 400.0, 450.0, 500.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, clap::ValueEnum)]
pub enum Algo {
    #[value(name = "ira_admm")]
    IraAdmm,
    #[value(name = "ira")]
    Ira,
}

impl Algo {
    pub const ALL: [Algo; 2] = [Algo::IraAdmm, Algo::Ira];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::IraAdmm => "ira_admm",
            Algo::Ira => "ira",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ira_admm" => Ok(Algo::IraAdmm),
            "ira" => Ok(Algo::Ira),
            other => Err(format!("unknown algorithm `{other}` (expected ira_admm or ira)")),
        }
    }
}

/// Slice types removed from the scenario before solving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Variant {
    pub drop_embb: bool,
    pub drop_mmtc: bool,
}

impl Variant {
    pub fn apply(&self, sc: &Scenario) -> Scenario {
        let mut out = sc.clone();
        out.slices.retain(|s| match s.kind() {
            SliceKind::Ti => true,
            SliceKind::Embb => !self.drop_embb,
            SliceKind::Mmtc => !self.drop_mmtc,
        });
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error("invalid sweep: {0}")]
    Spec(String),
}

/// Sets every TI slice's per-robot arrival rate.
pub fn set_ti_arrival_rate(sc: &mut Scenario, lambda: f64) {
    for s in &mut sc.slices {
        if let SliceSpec::Ti(t) = s {
            t.arrival_rate_pkts_per_s = lambda;
        }
    }
}

/// Arrival rate shared by all TI slices, if there is one.
pub fn ti_arrival_rate(sc: &Scenario) -> Option<f64> {
    let mut rates = sc.slices.iter().filter_map(|s| match s {
        SliceSpec::Ti(t) => Some(t.arrival_rate_pkts_per_s),
        _ => None,
    });
    let first = rates.next()?;
    rates.all(|r| r == first).then_some(first)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub algo: Algo,
    pub seed: u64,
    pub lambda: Option<f64>,
    pub block_width_hz: f64,
    pub allocation: Allocation,
    pub report: UtilityReport,
    /// Only IRA-ADMM iterates.
    pub trace: Option<AdmmTrace>,
}

impl RunOutput {
    pub fn rows(&self) -> Vec<ResultRow> {
        let kinds = self
            .allocation
            .per_sample
            .first()
            .map(|r| r.slices.iter().map(|s| s.kind).collect::<Vec<_>>())
            .unwrap_or_default();
        self.allocation
            .blocks
            .iter()
            .enumerate()
            .map(|(s, &blocks)| ResultRow {
                algo: self.algo.to_string(),
                seed: self.seed,
                lambda_mult: self.lambda,
                slice_id: s,
                kind: kinds[s].as_str().to_string(),
                blocks,
                bandwidth_hz: blocks as f64 * self.block_width_hz,
                utility: self.report.mean_utility[s],
                power_w: self.report.mean_power_w[s],
                satisfied_frac: self.report.satisfied_frac[s],
                total_utility: self.report.total_utility,
            })
            .collect()
    }

    /// Blocks held by TI slices.
    pub fn ti_blocks(&self) -> usize {
        self.rows().iter().filter(|r| r.kind == "ti").map(|r| r.blocks).sum()
    }
}

pub fn run_algorithm<E: Executor>(problem: &SaaProblem<'_>, algo: Algo, exec: &E) -> RunOutput {
    let sc = problem.sc;
    let (allocation, report, trace) = match algo {
        Algo::IraAdmm => {
            let (a, r, t) = run_ira_admm(problem, &sc.solver.admm, exec);
            (a, r, Some(t))
        }
        Algo::Ira => {
            let (a, r) = run_ira(problem, sc.solver.ira_mode, exec);
            (a, r, None)
        }
    };
    RunOutput {
        algo,
        seed: sc.seed,
        lambda: ti_arrival_rate(sc),
        block_width_hz: sc.block_width_hz,
        allocation,
        report,
        trace,
    }
}

/// Draws topology and samples once and runs each algorithm on them.
pub fn run_algorithms<E: Executor>(sc: &Scenario, algos: &[Algo], exec: &E) -> Result<Vec<RunOutput>, AllocError> {
    let top = generate_topology(sc, TOPOLOGY_STREAM);
    let problem = SaaProblem::new(sc, &top, exec)?;
    Ok(algos.iter().map(|a| run_algorithm(&problem, *a, exec)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Per-robot TI arrival rates, ascending.
    pub values: Vec<f64>,
    pub algos: Vec<Algo>,
    /// Seeds `base_seed .. base_seed + reps`.
    pub reps: usize,
    pub base_seed: u64,
    pub variant: Variant,
}

impl SweepSpec {
    pub fn new(base_seed: u64) -> Self {
        Self {
            values: DEFAULT_LAMBDA_GRID.to_vec(),
            algos: Algo::ALL.to_vec(),
            reps: 1,
            base_seed,
            variant: Variant::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Spec(m.to_string()));
        if self.values.is_empty() {
            return bad("no sweep values");
        }
        if self.values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return bad("sweep values must be positive");
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sweep values must be strictly increasing");
        }
        if self.reps < 1 {
            return bad("reps must be >= 1");
        }
        if self.algos.is_empty() {
            return bad("no algorithm selected");
        }
        if self.base_seed.checked_add(self.reps as u64 - 1).is_none() {
            return bad("seed range overflows");
        }
        Ok(())
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.reps as u64).map(|i| self.base_seed + i)
    }

    /// `(value, seed)` pairs in output order.
    pub fn cells(&self) -> Vec<(f64, u64)> {
        self.seeds()
            .flat_map(|seed| self.values.iter().map(move |v| (*v, seed)))
            .collect()
    }
}

/// Scenario of one sweep cell.
pub fn cell_scenario(base: &Scenario, variant: Variant, lambda: f64, seed: u64) -> Scenario {
    let mut sc = variant.apply(base);
    set_ti_arrival_rate(&mut sc, lambda);
    sc.seed = seed;
    sc
}

/// Runs every cell (cells in parallel on `exec`, each cell sequential
/// inside) and hands each finished cell's rows to `on_rows` as soon as it
/// completes. Results come back sorted by algorithm, seed and value,
/// whatever order the cells finished in.
pub fn sweep<E: Executor>(
    base: &Scenario,
    spec: &SweepSpec,
    exec: &E,
    on_rows: &(dyn Fn(&[ResultRow]) + Sync),
) -> Result<Vec<RunOutput>, ExperimentError> {
    spec.validate()?;
    let cells = spec.cells();
    let results = exec.map(cells.len(), |i| {
        let (lambda, seed) = cells[i];
        let sc = cell_scenario(base, spec.variant, lambda, seed);
        sc.validate().map_err(AllocError::from)?;
        let runs = run_algorithms(&sc, &spec.algos, &Sequential)?;
        let rows: Vec<ResultRow> = runs.iter().flat_map(RunOutput::rows).collect();
        on_rows(&rows);
        Ok::<_, ExperimentError>(runs)
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    sort_runs(&mut out);
    Ok(out)
}

pub fn sort_runs(runs: &mut [RunOutput]) {
    runs.sort_by(|a, b| {
        a.algo
            .cmp(&b.algo)
            .then(a.seed.cmp(&b.seed))
            .then(a.lambda.unwrap_or(f64::NAN).total_cmp(&b.lambda.unwrap_or(f64::NAN)))
    });
}
