//! Experiment inputs: radio constants, slice specifications, geometry and
//! the deterministic random-stream derivation everything else draws from.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocator::AdmmConfig;

/// Distances below this are clamped to keep path loss finite.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Stream label used for terminal placement.
pub const TOPOLOGY_STREAM: &str = "topology";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SliceKind {
    Ti,
    Embb,
    Mmtc,
}

impl SliceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SliceKind::Ti => "ti",
            SliceKind::Embb => "embb",
            SliceKind::Mmtc => "mmtc",
        }
    }
}

/// Tactile-Internet slice: robots sharing one FCFS downlink queue.
#[derive(Debug, Clone, PartialEq)]
pub struct TiSpec {
    pub robot_count: usize,
    pub deadline_s: f64,
    pub decode_error_prob: f64,
    pub blocking_prob: f64,
    /// Per-robot Poisson packet rate.
    pub arrival_rate_pkts_per_s: f64,
    pub packet_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbbSpec {
    pub user_count: usize,
    pub rate_req_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmtcSpec {
    pub user_count: usize,
    pub ra_success_req: f64,
    pub activation_prob: f64,
    pub preamble_width_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SliceSpec {
    Ti(TiSpec),
    Embb(EmbbSpec),
    Mmtc(MmtcSpec),
}

impl SliceSpec {
    pub fn kind(&self) -> SliceKind {
        match self {
            SliceSpec::Ti(_) => SliceKind::Ti,
            SliceSpec::Embb(_) => SliceKind::Embb,
            SliceSpec::Mmtc(_) => SliceKind::Mmtc,
        }
    }

    /// Robots or users placed in the area for this slice.
    pub fn terminal_count(&self) -> usize {
        match self {
            SliceSpec::Ti(s) => s.robot_count,
            SliceSpec::Embb(s) => s.user_count,
            SliceSpec::Mmtc(s) => s.user_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityWeights {
    pub ti: f64,
    pub embb: f64,
    pub mmtc: f64,
}

impl UtilityWeights {
    pub fn weight(&self, kind: SliceKind) -> f64 {
        match kind {
            SliceKind::Ti => self.ti,
            SliceKind::Embb => self.embb,
            SliceKind::Mmtc => self.mmtc,
        }
    }
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self {
            ti: 10.0,
            embb: 5.0,
            mmtc: 3.0,
        }
    }
}

/// Knobs of the TI deadline decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosParams {
    /// Share of (D - T_coord) available for transmitting one packet.
    pub ti_tx_fraction: f64,
    /// Payload bits carried per channel use; fixes the codeword length.
    pub ti_code_rate: f64,
}

impl Default for QosParams {
    fn default() -> Self {
        Self {
            ti_tx_fraction: 0.5,
            ti_code_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdrConfig {
    /// Relative duality-gap target of the interior-point solver.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Gaussian-randomization candidates per recovery.
    pub randomization_candidates: usize,
}

impl Default for SdrConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            max_iters: 200,
            randomization_candidates: 100,
        }
    }
}

/// How the IRA baseline picks its long-timescale bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IraMode {
    /// Rounded solution of the first sample.
    #[default]
    FirstSample,
    /// Rounded mean of the per-sample rounded solutions, without consensus.
    SampleAverage,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverSettings {
    pub admm: AdmmConfig,
    pub sdr: SdrConfig,
    pub ira_mode: IraMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub area_side_m: f64,
    pub ru_positions: Vec<Point>,
    pub antennas_per_ru: usize,
    pub max_ru_power_w: f64,
    pub noise_power_dbm: f64,
    pub total_bandwidth_hz: f64,
    pub block_width_hz: f64,
    pub slices: Vec<SliceSpec>,
    pub t_long_s: f64,
    pub t_short_s: f64,
    pub saa_samples: usize,
    pub coord_latency_s: f64,
    pub utility_weights: UtilityWeights,
    /// Utility lost per watt of transmit power.
    pub power_price: f64,
    pub seed: u64,
    pub qos: QosParams,
    pub solver: SolverSettings,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

fn is_probability(p: f64) -> bool {
    p > 0.0 && p < 1.0
}

impl Scenario {
    pub const DEFAULT_BLOCK_WIDTH_HZ: f64 = 100_000.0;
    pub const DEFAULT_SAA_SAMPLES: usize = 20;
    pub const DEFAULT_COORD_LATENCY_S: f64 = 1e-4;
    pub const DEFAULT_ACTIVATION_PROB: f64 = 0.01;
    pub const DEFAULT_PREAMBLE_WIDTH_HZ: f64 = 1_000.0;

    pub fn ru_count(&self) -> usize {
        self.ru_positions.len()
    }

    /// Antennas in the joint-transmission array (all RUs stacked).
    pub fn stacked_dim(&self) -> usize {
        self.ru_count() * self.antennas_per_ru
    }

    /// Number of bandwidth blocks M.
    pub fn block_count(&self) -> usize {
        (self.total_bandwidth_hz / self.block_width_hz).round() as usize
    }

    /// Noise power spectral density N0 in W/Hz.
    pub fn noise_psd_w_per_hz(&self) -> f64 {
        dbm_to_watts(self.noise_power_dbm) / self.total_bandwidth_hz
    }

    pub fn short_windows_per_long(&self) -> usize {
        (self.t_long_s / self.t_short_s).round() as usize
    }

    pub fn total_terminals(&self) -> usize {
        self.slices.iter().map(SliceSpec::terminal_count).sum()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.area_side_m > 0.0) {
            return Err(invalid("area_side_m must be > 0"));
        }
        if self.ru_positions.is_empty() {
            return Err(invalid("at least one RU is required"));
        }
        for (j, p) in self.ru_positions.iter().enumerate() {
            if !(p.x >= 0.0 && p.x <= self.area_side_m && p.y >= 0.0 && p.y <= self.area_side_m) {
                return Err(invalid(alloc::format!("ru_positions[{j}] lies outside the area")));
            }
        }
        if self.antennas_per_ru < 1 {
            return Err(invalid("antennas_per_ru must be >= 1"));
        }
        if !(self.max_ru_power_w > 0.0) {
            return Err(invalid("max_ru_power_w must be > 0"));
        }
        if !self.noise_power_dbm.is_finite() {
            return Err(invalid("noise_power_dbm must be finite"));
        }
        if !(self.total_bandwidth_hz > 0.0) {
            return Err(invalid("total_bandwidth_hz must be > 0"));
        }
        if !(self.block_width_hz > 0.0) {
            return Err(invalid("block_width_hz must be > 0"));
        }
        let ratio = self.total_bandwidth_hz / self.block_width_hz;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(invalid(
                "total_bandwidth_hz / block_width_hz is not an integer block count",
            ));
        }
        if self.slices.is_empty() {
            return Err(invalid("at least one slice is required"));
        }
        if self.block_count() < self.slices.len() {
            return Err(invalid("block count M is smaller than the number of slices"));
        }
        if !(self.t_short_s > 0.0 && self.t_long_s > 0.0) {
            return Err(invalid("timescales must be > 0"));
        }
        let windows = self.t_long_s / self.t_short_s;
        if windows < 1.0 - 1e-9 || (windows - windows.round()).abs() > 1e-9 * windows {
            return Err(invalid("t_long/t_short not a positive integer"));
        }
        if self.saa_samples < 1 {
            return Err(invalid("saa_samples must be >= 1"));
        }
        if !(self.coord_latency_s >= 0.0) {
            return Err(invalid("coord_latency_s must be >= 0"));
        }
        let w = &self.utility_weights;
        if !(w.ti >= 0.0 && w.embb >= 0.0 && w.mmtc >= 0.0) {
            return Err(invalid("utility weights must be >= 0"));
        }
        if !(self.power_price >= 0.0) {
            return Err(invalid("power_price must be >= 0"));
        }
        if !(self.qos.ti_tx_fraction > 0.0 && self.qos.ti_tx_fraction < 1.0) {
            return Err(invalid("ti_tx_fraction must lie in (0,1)"));
        }
        if !(self.qos.ti_code_rate > 0.0) {
            return Err(invalid("ti_code_rate must be > 0"));
        }
        let sdr = &self.solver.sdr;
        if !(sdr.tolerance > 0.0) || sdr.max_iters == 0 || sdr.randomization_candidates == 0 {
            return Err(invalid("sdr tolerance, max_iters and candidates must be positive"));
        }
        self.solver.admm.validate().map_err(invalid)?;
        for (i, slice) in self.slices.iter().enumerate() {
            validate_slice(slice, self.coord_latency_s).map_err(|m| invalid(alloc::format!("slices[{i}]: {m}")))?;
        }
        Ok(())
    }

    /// Index ranges of each slice's terminals in the flattened terminal list.
    pub fn terminal_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.slices
            .iter()
            .map(|s| {
                let r = start..start + s.terminal_count();
                start = r.end;
                r
            })
            .collect()
    }
}

fn validate_slice(slice: &SliceSpec, coord_latency_s: f64) -> Result<(), &'static str> {
    match slice {
        SliceSpec::Ti(s) => {
            if s.robot_count < 1 {
                return Err("robot_count must be >= 1");
            }
            if !(s.deadline_s > 0.0) {
                return Err("deadline_s must be > 0");
            }
            if !(coord_latency_s < s.deadline_s) {
                return Err("coord_latency_s must be below every TI deadline");
            }
            if !is_probability(s.decode_error_prob) || !is_probability(s.blocking_prob) {
                return Err("probabilities must lie in (0,1)");
            }
            if !(s.arrival_rate_pkts_per_s >= 0.0) || !s.arrival_rate_pkts_per_s.is_finite() {
                return Err("arrival_rate_pkts_per_s must be >= 0");
            }
            if !(s.packet_bits > 0.0) {
                return Err("packet_bits must be > 0");
            }
        }
        SliceSpec::Embb(s) => {
            if s.user_count < 1 {
                return Err("user_count must be >= 1");
            }
            if !(s.rate_req_bps > 0.0) {
                return Err("rate_req_bps must be > 0");
            }
        }
        SliceSpec::Mmtc(s) => {
            if s.user_count < 1 {
                return Err("user_count must be >= 1");
            }
            if !is_probability(s.ra_success_req) || !is_probability(s.activation_prob) {
                return Err("probabilities must lie in (0,1)");
            }
            if !(s.preamble_width_hz > 0.0) {
                return Err("preamble_width_hz must be > 0");
            }
        }
    }
    Ok(())
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Three RUs on an equilateral triangle of circumradius 250 m centred in a
/// 1 km square, two TI, three eMBB and three mMTC slices.
pub fn paper_default_scenario() -> Scenario {
    let side = 1000.0;
    let c = side / 2.0;
    let r = 250.0;
    let ru_positions = [90.0f64, 210.0, 330.0]
        .iter()
        .map(|deg| {
            let a = deg.to_radians();
            Point::new(c + r * a.cos(), c + r * a.sin())
        })
        .collect();
    let ti = |robots, deadline| {
        SliceSpec::Ti(TiSpec {
            robot_count: robots,
            deadline_s: deadline,
            decode_error_prob: 1e-5,
            blocking_prob: 2e-8,
            arrival_rate_pkts_per_s: 100.0,
            packet_bits: 160.0,
        })
    };
    let embb = |users, rate| {
        SliceSpec::Embb(EmbbSpec {
            user_count: users,
            rate_req_bps: rate,
        })
    };
    let mmtc = || {
        SliceSpec::Mmtc(MmtcSpec {
            user_count: 600,
            ra_success_req: 0.5,
            activation_prob: Scenario::DEFAULT_ACTIVATION_PROB,
            preamble_width_hz: Scenario::DEFAULT_PREAMBLE_WIDTH_HZ,
        })
    };
    Scenario {
        area_side_m: side,
        ru_positions,
        antennas_per_ru: 2,
        max_ru_power_w: 1.0,
        noise_power_dbm: -110.0,
        total_bandwidth_hz: 4e6,
        block_width_hz: Scenario::DEFAULT_BLOCK_WIDTH_HZ,
        slices: vec![
            ti(3, 1e-3),
            ti(5, 2e-3),
            embb(4, 6e6),
            embb(6, 4e6),
            embb(8, 2e6),
            mmtc(),
            mmtc(),
            mmtc(),
        ],
        t_long_s: 600.0,
        t_short_s: 10.0,
        saa_samples: Scenario::DEFAULT_SAA_SAMPLES,
        coord_latency_s: Scenario::DEFAULT_COORD_LATENCY_S,
        utility_weights: UtilityWeights::default(),
        power_price: 1.0,
        seed: 42,
        qos: QosParams::default(),
        solver: SolverSettings::default(),
    }
}

/// Derives independent ChaCha streams from one master seed.
///
/// The key comes from the seed alone; the label (and optional index) select
/// the ChaCha stream, so every (seed, label, index) triple is reproducible
/// and distinct labels never share keystream.
#[derive(Debug, Clone, Copy)]
pub struct StreamSeed(pub u64);

impl StreamSeed {
    pub fn stream(&self, label: &str) -> ChaCha8Rng {
        self.indexed(label, 0)
    }

    pub fn indexed(&self, label: &str, index: u64) -> ChaCha8Rng {
        let mut state = self.0;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        let mut s = fnv1a(label.as_bytes()) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        rng.set_stream(splitmix64(&mut s));
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    /// Terminal positions per slice, in slice order.
    pub terminal_positions: Vec<Vec<Point>>,
    pub ru_positions: Vec<Point>,
    /// `distances[j][u]` from RU j to flattened terminal u, floored at 1 m.
    pub distances: Vec<Vec<f64>>,
    /// Flattened-index range of each slice's terminals.
    pub slice_ranges: Vec<Range<usize>>,
}

impl Topology {
    /// Builds a topology from explicit positions.
    pub fn from_positions(ru_positions: Vec<Point>, terminal_positions: Vec<Vec<Point>>) -> Self {
        let mut slice_ranges = Vec::with_capacity(terminal_positions.len());
        let mut start = 0;
        for t in &terminal_positions {
            slice_ranges.push(start..start + t.len());
            start += t.len();
        }
        let distances = ru_positions
            .iter()
            .map(|ru| {
                terminal_positions
                    .iter()
                    .flatten()
                    .map(|p| ru.distance(p).max(MIN_DISTANCE_M))
                    .collect()
            })
            .collect();
        Self {
            terminal_positions,
            ru_positions,
            distances,
            slice_ranges,
        }
    }

    pub fn terminal_count(&self) -> usize {
        self.slice_ranges.last().map_or(0, |r| r.end)
    }
}

/// Drops every terminal uniformly over the square using the stream `label`.
pub fn generate_topology(sc: &Scenario, label: &str) -> Topology {
    let mut rng = StreamSeed(sc.seed).stream(label);
    let side = sc.area_side_m;
    let terminals = sc
        .slices
        .iter()
        .map(|s| {
            (0..s.terminal_count())
                .map(|_| Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side))
                .collect()
        })
        .collect();
    Topology::from_positions(sc.ru_positions.clone(), terminals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_is_valid() {
        let sc = paper_default_scenario();
        sc.validate().unwrap();
        assert_eq!(sc.slices.len(), 8);
        assert_eq!(sc.block_count(), 40);
        assert_eq!(sc.total_bandwidth_hz, 4e6);
        assert_eq!(sc.max_ru_power_w, 1.0);
        assert_eq!(sc.antennas_per_ru, 2);
        assert_eq!(sc.noise_power_dbm, -110.0);
        assert_eq!(sc.stacked_dim(), 6);
        match &sc.slices[0] {
            SliceSpec::Ti(t) => {
                assert_eq!(t.robot_count, 3);
                assert_eq!(t.deadline_s, 1e-3);
            }
            other => panic!("expected TI, got {other:?}"),
        }
        let kinds: Vec<_> = sc.slices.iter().map(SliceSpec::kind).collect();
        assert_eq!(kinds.iter().filter(|k| **k == SliceKind::Ti).count(), 2);
        assert_eq!(kinds.iter().filter(|k| **k == SliceKind::Embb).count(), 3);
        assert_eq!(kinds.iter().filter(|k| **k == SliceKind::Mmtc).count(), 3);
    }

    #[test]
    fn rus_form_centred_triangle() {
        let sc = paper_default_scenario();
        let centre = Point::new(500.0, 500.0);
        for p in &sc.ru_positions {
            assert!((p.distance(&centre) - 250.0).abs() < 1e-9);
        }
        let d01 = sc.ru_positions[0].distance(&sc.ru_positions[1]);
        let d12 = sc.ru_positions[1].distance(&sc.ru_positions[2]);
        assert!((d01 - d12).abs() < 1e-9);
    }

    #[test]
    fn noise_psd() {
        let sc = paper_default_scenario();
        // -110 dBm = 1e-14 W over 4 MHz
        assert!((sc.noise_psd_w_per_hz() - 2.5e-21).abs() < 1e-33);
    }

    #[test]
    fn rejects_non_integer_window_ratio() {
        let mut sc = paper_default_scenario();
        sc.t_long_s = 5.0;
        sc.t_short_s = 10.0;
        let err = sc.validate().unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid(ref m) if m.contains("t_long/t_short")));
    }

    #[test]
    fn rejects_latency_above_deadline() {
        let mut sc = paper_default_scenario();
        sc.coord_latency_s = 1e-3;
        assert!(sc.validate().is_err());
    }

    #[test]
    fn rejects_fractional_block_count() {
        let mut sc = paper_default_scenario();
        sc.block_width_hz = 300_000.0;
        assert!(sc.validate().is_err());
    }

    #[test]
    fn rejects_too_few_blocks() {
        let mut sc = paper_default_scenario();
        sc.block_width_hz = 1e6;
        assert!(sc.validate().is_err());
    }

    #[test]
    fn rejects_ru_outside() {
        let mut sc = paper_default_scenario();
        sc.ru_positions[0] = Point::new(-1.0, 10.0);
        assert!(sc.validate().is_err());
    }

    #[test]
    fn topology_is_deterministic() {
        let sc = paper_default_scenario();
        let a = generate_topology(&sc, "topology");
        let b = generate_topology(&sc, "topology");
        assert_eq!(a, b);
        let c = generate_topology(&sc, "topology-b");
        assert_ne!(a, c);
    }

    #[test]
    fn terminals_inside_area_for_many_seeds() {
        let mut sc = paper_default_scenario();
        for seed in 0..20 {
            sc.seed = seed;
            let top = generate_topology(&sc, "topology");
            assert_eq!(top.terminal_count(), sc.total_terminals());
            for p in top.terminal_positions.iter().flatten() {
                assert!(p.x >= 0.0 && p.x <= 1000.0 && p.y >= 0.0 && p.y <= 1000.0);
            }
        }
    }

    #[test]
    fn distance_floor_at_ru() {
        let ru = Point::new(100.0, 200.0);
        let top = Topology::from_positions(
            vec![ru],
            vec![vec![ru, Point::new(100.0, 200.5), Point::new(103.0, 204.0)]],
        );
        assert_eq!(top.distances[0][0], 1.0);
        assert_eq!(top.distances[0][1], 1.0);
        assert!((top.distances[0][2] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_placement_mean() {
        let mut sc = paper_default_scenario();
        sc.slices = vec![SliceSpec::Embb(EmbbSpec {
            user_count: 10_000,
            rate_req_bps: 1e6,
        })];
        let top = generate_topology(&sc, "topology");
        let pts = &top.terminal_positions[0];
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.x).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.y).sum::<f64>() / n;
        assert!((mx - 500.0).abs() < 10.0, "mean x {mx}");
        assert!((my - 500.0).abs() < 10.0, "mean y {my}");
    }

    #[test]
    fn streams_differ_by_label_and_index() {
        let s = StreamSeed(7);
        let a: u64 = s.stream("topology").random();
        let b: u64 = s.stream("fading").random();
        let c: u64 = s.indexed("fading", 1).random();
        let d: u64 = s.indexed("fading", 1).random();
        assert_ne!(a, b);
        assert_ne!(b, c);
        assert_eq!(c, d);
    }

    #[test]
    fn stream_correlation_is_small() {
        let s = StreamSeed(99);
        let mut r1 = s.stream("topology");
        let mut r2 = s.indexed("fading", 3);
        let n = 20_000;
        let (mut sxy, mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x: f64 = r1.random();
            let y: f64 = r2.random();
            sxy += x * y;
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
        }
        let nf = n as f64;
        let cov = sxy / nf - sx * sy / (nf * nf);
        let corr = cov / ((sxx / nf - (sx / nf).powi(2)).sqrt() * (syy / nf - (sy / nf).powi(2)).sqrt());
        // 4 sigma for independent streams
        assert!(corr.abs() < 4.0 / nf.sqrt(), "corr {corr}");
    }
}
