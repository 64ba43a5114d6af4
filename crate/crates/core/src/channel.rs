//! Short-timescale channel realizations: urban-macro path loss times
//! unit-variance Rayleigh fading, one sample per power-control window.

use alloc::vec::Vec;

use nalgebra::Complex;
use rand_distr::{Distribution, StandardNormal};

use crate::scenario::{Scenario, StreamSeed, Topology, MIN_DISTANCE_M};

pub type C64 = Complex<f64>;

pub const FADING_STREAM: &str = "fading";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error("path loss undefined below {MIN_DISTANCE_M} m (got {0} m)")]
    DistanceTooSmall(f64),
}

/// 128.1 + 37.6 log10(d / 1 km).
pub fn path_loss_db(d_m: f64) -> Result<f64, ChannelError> {
    if !(d_m >= MIN_DISTANCE_M) {
        return Err(ChannelError::DistanceTooSmall(d_m));
    }
    Ok(128.1 + 37.6 * (d_m / 1000.0).log10())
}

/// Linear mean power gain for a distance already floored at 1 m.
pub fn mean_power_gain(d_m: f64) -> f64 {
    let pl = path_loss_db(d_m.max(MIN_DISTANCE_M)).unwrap_or(f64::INFINITY);
    10f64.powf(-pl / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub sample_index: u64,
    pub ru_count: usize,
    pub antennas_per_ru: usize,
    /// Layout `[terminal][ru][antenna]`.
    gains: Vec<C64>,
}

impl ChannelSample {
    /// Wraps precomputed gains laid out as `[terminal][ru][antenna]`.
    pub fn from_gains(sample_index: u64, ru_count: usize, antennas_per_ru: usize, gains: Vec<C64>) -> Self {
        assert_eq!(
            gains.len() % (ru_count * antennas_per_ru),
            0,
            "gain count not a multiple of J*A"
        );
        Self {
            sample_index,
            ru_count,
            antennas_per_ru,
            gains,
        }
    }

    pub fn terminal_count(&self) -> usize {
        self.gains.len() / self.stacked_dim()
    }

    pub fn stacked_dim(&self) -> usize {
        self.ru_count * self.antennas_per_ru
    }

    /// h_{j,u} in C^A.
    pub fn gain(&self, ru: usize, terminal: usize) -> &[C64] {
        let a = self.antennas_per_ru;
        let start = (terminal * self.ru_count + ru) * a;
        &self.gains[start..start + a]
    }

    /// Iterates `(terminal, ru, antenna, h)` in storage order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, C64)> + '_ {
        let a = self.antennas_per_ru;
        let j = self.ru_count;
        self.gains
            .iter()
            .enumerate()
            .map(move |(i, h)| (i / (j * a), (i / a) % j, i % a, *h))
    }
}

/// Concatenation [h_{1,u}; ...; h_{J,u}] in RU order.
pub fn stacked_channel(cs: &ChannelSample, terminal: usize) -> &[C64] {
    let n = cs.stacked_dim();
    &cs.gains[terminal * n..(terminal + 1) * n]
}

/// Draws sample `t` from the `fading` stream of the scenario seed.
pub fn draw_sample(top: &Topology, sc: &Scenario, t: u64) -> ChannelSample {
    let mut rng = StreamSeed(sc.seed).indexed(FADING_STREAM, t);
    let ru_count = top.ru_positions.len();
    let a = sc.antennas_per_ru;
    let terminals = top.terminal_count();
    let mut gains = Vec::with_capacity(terminals * ru_count * a);
    let half = core::f64::consts::FRAC_1_SQRT_2;
    for u in 0..terminals {
        for j in 0..ru_count {
            let amp = mean_power_gain(top.distances[j][u]).sqrt();
            for _ in 0..a {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                gains.push(C64::new(re * half, im * half) * amp);
            }
        }
    }
    ChannelSample::from_gains(t, ru_count, a, gains)
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}
