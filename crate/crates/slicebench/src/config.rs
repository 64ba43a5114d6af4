//! JSON scenario documents.
//!
//! The document mirrors [`Scenario`] in five required sections (`radio`,
//! `timescales`, `utility`, `slices`, `seed`) plus optional `qos` and
//! `solver` sections. Unknown keys are rejected everywhere.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slicebench_core::allocator::AdmmConfig;
use slicebench_core::scenario::{
    EmbbSpec, IraMode, MmtcSpec, Point, QosParams, Scenario, ScenarioError, SdrConfig, SliceSpec, SolverSettings,
    TiSpec, UtilityWeights,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: parse error at line {line}, column {column} (field `{field}`): {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("{origin}: {source}")]
    Invalid {
        origin: String,
        #[source]
        source: ScenarioError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    radio: Radio,
    timescales: Timescales,
    utility: Utility,
    slices: Vec<SliceDoc>,
    seed: u64,
    #[serde(default)]
    qos: QosDoc,
    #[serde(default)]
    solver: SolverDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Radio {
    area_side_m: f64,
    /// `[x, y]` pairs in meters.
    ru_positions: Vec<[f64; 2]>,
    antennas_per_ru: usize,
    max_ru_power_w: f64,
    noise_power_dbm: f64,
    total_bandwidth_hz: f64,
    #[serde(default = "default_block_width")]
    block_width_hz: f64,
    #[serde(default = "default_coord_latency")]
    coord_latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Timescales {
    t_long_s: f64,
    t_short_s: f64,
    #[serde(default = "default_saa_samples")]
    saa_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Utility {
    #[serde(default)]
    weights: Weights,
    #[serde(default = "default_power_price")]
    power_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Weights {
    ti: f64,
    embb: f64,
    mmtc: f64,
}

impl Default for Weights {
    fn default() -> Self {
        let w = UtilityWeights::default();
        Self {
            ti: w.ti,
            embb: w.embb,
            mmtc: w.mmtc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SliceDoc {
    Ti(TiDoc),
    Embb(EmbbDoc),
    Mmtc(MmtcDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TiDoc {
    robot_count: usize,
    deadline_s: f64,
    decode_error_prob: f64,
    blocking_prob: f64,
    arrival_rate_pkts_per_s: f64,
    packet_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbbDoc {
    user_count: usize,
    rate_req_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MmtcDoc {
    user_count: usize,
    ra_success_req: f64,
    #[serde(default = "default_activation_prob")]
    activation_prob: f64,
    #[serde(default = "default_preamble_width")]
    preamble_width_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct QosDoc {
    ti_tx_fraction: f64,
    ti_code_rate: f64,
}

impl Default for QosDoc {
    fn default() -> Self {
        let q = QosParams::default();
        Self {
            ti_tx_fraction: q.ti_tx_fraction,
            ti_code_rate: q.ti_code_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct SolverDoc {
    admm: AdmmDoc,
    sdr: SdrDoc,
    ira_mode: IraModeDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct AdmmDoc {
    rho: f64,
    max_iters: usize,
    primal_tol: f64,
    dual_tol: f64,
    grid_per_block: usize,
}

impl Default for AdmmDoc {
    fn default() -> Self {
        AdmmConfig::default().into()
    }
}

impl From<AdmmConfig> for AdmmDoc {
    fn from(c: AdmmConfig) -> Self {
        Self {
            rho: c.rho,
            max_iters: c.max_iters,
            primal_tol: c.primal_tol,
            dual_tol: c.dual_tol,
            grid_per_block: c.grid_per_block,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SdrDoc {
    tolerance: f64,
    max_iters: usize,
    randomization_candidates: usize,
}

impl Default for SdrDoc {
    fn default() -> Self {
        SdrConfig::default().into()
    }
}

impl From<SdrConfig> for SdrDoc {
    fn from(c: SdrConfig) -> Self {
        Self {
            tolerance: c.tolerance,
            max_iters: c.max_iters,
            randomization_candidates: c.randomization_candidates,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
enum IraModeDoc {
    #[default]
    FirstSample,
    SampleAverage,
}

fn default_block_width() -> f64 {
    Scenario::DEFAULT_BLOCK_WIDTH_HZ
}
fn default_coord_latency() -> f64 {
    Scenario::DEFAULT_COORD_LATENCY_S
}
fn default_saa_samples() -> usize {
    Scenario::DEFAULT_SAA_SAMPLES
}
fn default_power_price() -> f64 {
    1.0
}
fn default_activation_prob() -> f64 {
    Scenario::DEFAULT_ACTIVATION_PROB
}
fn default_preamble_width() -> f64 {
    Scenario::DEFAULT_PREAMBLE_WIDTH_HZ
}

impl From<Document> for Scenario {
    fn from(d: Document) -> Self {
        let slices = d
            .slices
            .into_iter()
            .map(|s| match s {
                SliceDoc::Ti(t) => SliceSpec::Ti(TiSpec {
                    robot_count: t.robot_count,
                    deadline_s: t.deadline_s,
                    decode_error_prob: t.decode_error_prob,
                    blocking_prob: t.blocking_prob,
                    arrival_rate_pkts_per_s: t.arrival_rate_pkts_per_s,
                    packet_bits: t.packet_bits,
                }),
                SliceDoc::Embb(e) => SliceSpec::Embb(EmbbSpec {
                    user_count: e.user_count,
                    rate_req_bps: e.rate_req_bps,
                }),
                SliceDoc::Mmtc(m) => SliceSpec::Mmtc(MmtcSpec {
                    user_count: m.user_count,
                    ra_success_req: m.ra_success_req,
                    activation_prob: m.activation_prob,
                    preamble_width_hz: m.preamble_width_hz,
                }),
            })
            .collect();
        let a = d.solver.admm;
        let s = d.solver.sdr;
        Scenario {
            area_side_m: d.radio.area_side_m,
            ru_positions: d.radio.ru_positions.iter().map(|[x, y]| Point::new(*x, *y)).collect(),
            antennas_per_ru: d.radio.antennas_per_ru,
            max_ru_power_w: d.radio.max_ru_power_w,
            noise_power_dbm: d.radio.noise_power_dbm,
            total_bandwidth_hz: d.radio.total_bandwidth_hz,
            block_width_hz: d.radio.block_width_hz,
            slices,
            t_long_s: d.timescales.t_long_s,
            t_short_s: d.timescales.t_short_s,
            saa_samples: d.timescales.saa_samples,
            coord_latency_s: d.radio.coord_latency_s,
            utility_weights: UtilityWeights {
                ti: d.utility.weights.ti,
                embb: d.utility.weights.embb,
                mmtc: d.utility.weights.mmtc,
            },
            power_price: d.utility.power_price,
            seed: d.seed,
            qos: QosParams {
                ti_tx_fraction: d.qos.ti_tx_fraction,
                ti_code_rate: d.qos.ti_code_rate,
            },
            solver: SolverSettings {
                admm: AdmmConfig {
                    rho: a.rho,
                    max_iters: a.max_iters,
                    primal_tol: a.primal_tol,
                    dual_tol: a.dual_tol,
                    grid_per_block: a.grid_per_block,
                },
                sdr: SdrConfig {
                    tolerance: s.tolerance,
                    max_iters: s.max_iters,
                    randomization_candidates: s.randomization_candidates,
                },
                ira_mode: match d.solver.ira_mode {
                    IraModeDoc::FirstSample => IraMode::FirstSample,
                    IraModeDoc::SampleAverage => IraMode::SampleAverage,
                },
            },
        }
    }
}

impl From<&Scenario> for Document {
    fn from(sc: &Scenario) -> Self {
        Document {
            radio: Radio {
                area_side_m: sc.area_side_m,
                ru_positions: sc.ru_positions.iter().map(|p| [p.x, p.y]).collect(),
                antennas_per_ru: sc.antennas_per_ru,
                max_ru_power_w: sc.max_ru_power_w,
                noise_power_dbm: sc.noise_power_dbm,
                total_bandwidth_hz: sc.total_bandwidth_hz,
                block_width_hz: sc.block_width_hz,
                coord_latency_s: sc.coord_latency_s,
            },
            timescales: Timescales {
                t_long_s: sc.t_long_s,
                t_short_s: sc.t_short_s,
                saa_samples: sc.saa_samples,
            },
            utility: Utility {
                weights: Weights {
                    ti: sc.utility_weights.ti,
                    embb: sc.utility_weights.embb,
                    mmtc: sc.utility_weights.mmtc,
                },
                power_price: sc.power_price,
            },
            slices: sc
                .slices
                .iter()
                .map(|s| match s {
                    SliceSpec::Ti(t) => SliceDoc::Ti(TiDoc {
                        robot_count: t.robot_count,
                        deadline_s: t.deadline_s,
                        decode_error_prob: t.decode_error_prob,
                        blocking_prob: t.blocking_prob,
                        arrival_rate_pkts_per_s: t.arrival_rate_pkts_per_s,
                        packet_bits: t.packet_bits,
                    }),
                    SliceSpec::Embb(e) => SliceDoc::Embb(EmbbDoc {
                        user_count: e.user_count,
                        rate_req_bps: e.rate_req_bps,
                    }),
                    SliceSpec::Mmtc(m) => SliceDoc::Mmtc(MmtcDoc {
                        user_count: m.user_count,
                        ra_success_req: m.ra_success_req,
                        activation_prob: m.activation_prob,
                        preamble_width_hz: m.preamble_width_hz,
                    }),
                })
                .collect(),
            seed: sc.seed,
            qos: QosDoc {
                ti_tx_fraction: sc.qos.ti_tx_fraction,
                ti_code_rate: sc.qos.ti_code_rate,
            },
            solver: SolverDoc {
                admm: sc.solver.admm.into(),
                sdr: sc.solver.sdr.into(),
                ira_mode: match sc.solver.ira_mode {
                    IraMode::FirstSample => IraModeDoc::FirstSample,
                    IraMode::SampleAverage => IraModeDoc::SampleAverage,
                },
            },
        }
    }
}

/// Parses and validates a document. `origin` names the source in errors.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: Document = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        ConfigError::Parse {
            origin: origin.to_string(),
            line: inner.line(),
            column: inner.column(),
            field,
            message: inner.to_string(),
        }
    })?;
    let sc = Scenario::from(doc);
    sc.validate().map_err(|source| ConfigError::Invalid {
        origin: origin.to_string(),
        source,
    })?;
    Ok(sc)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}

/// Pretty JSON with every optional field written out.
pub fn scenario_to_json(sc: &Scenario) -> String {
    let mut s = serde_json::to_string_pretty(&Document::from(sc)).expect("document serialization cannot fail");
    s.push('\n');
    s
}

pub fn save_scenario(sc: &Scenario, path: &Path) -> Result<(), ConfigError> {
    fs::write(path, scenario_to_json(sc)).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use slicebench_core::scenario::paper_default_scenario;

    #[test]
    fn round_trip_default() {
        let sc = paper_default_scenario();
        let back = parse_scenario(&scenario_to_json(&sc), "mem").unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn optional_sections_take_defaults() {
        let text = r#"{
            "radio": {"area_side_m": 1000, "ru_positions": [[500, 500]], "antennas_per_ru": 2,
                      "max_ru_power_w": 1, "noise_power_dbm": -110, "total_bandwidth_hz": 4e6},
            "timescales": {"t_long_s": 600, "t_short_s": 10},
            "utility": {},
            "slices": [{"kind": "mmtc", "user_count": 600, "ra_success_req": 0.5}],
            "seed": 7
        }"#;
        let sc = parse_scenario(text, "mem").unwrap();
        assert_eq!(sc.block_width_hz, 1e5);
        assert_eq!(sc.block_count(), 40);
        assert_eq!(sc.saa_samples, 20);
        assert_eq!(sc.solver, SolverSettings::default());
        assert_eq!(sc.utility_weights, UtilityWeights::default());
    }
}
