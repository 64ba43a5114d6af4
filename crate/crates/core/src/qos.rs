//! Slice QoS targets mapped to per-sample constraints: finite-blocklength
//! SINR requirements, M/M/1/K blocking, random-access success and Shannon
//! rates. Every function here is pure.

use core::f64::consts::{LOG2_E, SQRT_2};

use crate::scenario::{MmtcSpec, Scenario, TiSpec};

/// SINR ceiling used to decide that a blocklength is too short.
pub const GAMMA_CAP: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QosError {
    #[error("argument out of domain: {0}")]
    Domain(&'static str),
    #[error("blocklength too short: rate {rate} bits/use unreachable below SINR {GAMMA_CAP}")]
    BlocklengthTooShort { rate: f64 },
    #[error("deadline {deadline_s} s leaves no room for one packet of {service_s} s after coordination")]
    DeadlineTooShort { deadline_s: f64, service_s: f64 },
    #[error("payload needs {needed} channel uses, transmission budget allows {budget}")]
    PayloadExceedsBudget { needed: u64, budget: u64 },
}

/// Upper-tail standard normal probability Q(x).
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * core::f64::consts::PI).sqrt()
}

/// Q^{-1}(p) for p in (0, 0.5).
///
/// Newton iterations on ln Q(x) = ln p, safeguarded by a bisection bracket.
pub fn inverse_q(p: f64) -> Result<f64, QosError> {
    if !(p > 0.0 && p < 0.5) {
        return Err(QosError::Domain("inverse_q needs 0 < p < 0.5"));
    }
    let target = p.ln();
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    // tail asymptote as starting point
    let mut x = if p < 0.3 { (-2.0 * p.ln()).sqrt() * 0.9 } else { 0.1 };
    for _ in 0..200 {
        let q = q_function(x);
        let f = q.ln() - target;
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = f * q / normal_pdf(x);
        let mut next = x + step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

fn fb_rate_with(gamma: f64, n: f64, qinv: f64) -> f64 {
    let v = 1.0 - (1.0 + gamma).powi(-2);
    ((1.0 + gamma).log2() - (v / n).sqrt() * qinv * LOG2_E).max(0.0)
}

/// Normal-approximation achievable rate in bits per channel use.
pub fn fb_rate(gamma: f64, n: f64, eps: f64) -> Result<f64, QosError> {
    if !(gamma > 0.0) || !(n >= 1.0) {
        return Err(QosError::Domain("fb_rate needs gamma > 0 and n >= 1"));
    }
    Ok(fb_rate_with(gamma, n, inverse_q(eps)?))
}

/// Smallest SINR whose finite-blocklength rate carries `bits` in `n` uses.
pub fn gamma_required(bits: f64, n: f64, eps: f64) -> Result<f64, QosError> {
    if !(bits > 0.0) || !(n >= 1.0) {
        return Err(QosError::Domain("gamma_required needs bits > 0 and n >= 1"));
    }
    let qinv = inverse_q(eps)?;
    let rate = bits / n;
    if fb_rate_with(GAMMA_CAP, n, qinv) < rate {
        return Err(QosError::BlocklengthTooShort { rate });
    }
    let (mut lo, mut hi) = (1e-12f64, GAMMA_CAP);
    if fb_rate_with(lo, n, qinv) >= rate {
        return Ok(lo);
    }
    // geometric bisection keeps the tolerance relative
    while hi / lo - 1.0 > 1e-10 {
        let mid = (lo * hi).sqrt();
        if fb_rate_with(mid, n, qinv) >= rate {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Largest FCFS queue occupancy K such that a packet admitted behind K
/// others still leaves the system before the deadline.
pub fn queue_capacity(deadline_s: f64, service_s: f64, coord_latency_s: f64) -> Result<u64, QosError> {
    if !(service_s > 0.0) || !(deadline_s > 0.0) || !(coord_latency_s >= 0.0) {
        return Err(QosError::Domain("queue_capacity needs positive times"));
    }
    let slack = deadline_s - coord_latency_s - service_s;
    if slack <= 1e-12 * deadline_s {
        return Err(QosError::DeadlineTooShort { deadline_s, service_s });
    }
    Ok((slack / service_s + 1e-9).floor() as u64)
}

/// M/M/1/K blocking probability; K counts packets in the system,
/// the one in service included.
pub fn blocking_probability(lambda: f64, service_s: f64, k: u64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    let rho = lambda * service_s;
    let kf = k as f64;
    if (rho - 1.0).abs() < 1e-9 {
        return 1.0 / (kf + 1.0);
    }
    if rho < 1.0 {
        (1.0 - rho) * rho.powf(kf) / (1.0 - rho.powf(kf + 1.0))
    } else {
        let inv = 1.0 / rho;
        (1.0 - inv) / (1.0 - inv.powf(kf + 1.0))
    }
}

/// Probability that a tagged active mMTC user picks a preamble no other
/// active user picks. Other users are active independently with
/// `activation_prob`, so the expectation over their count is
/// (1 - p_a / N)^(U-1).
pub fn ra_success_probability(bandwidth_hz: f64, spec: &MmtcSpec) -> f64 {
    if !(bandwidth_hz > 0.0) {
        return 0.0;
    }
    let preambles = (bandwidth_hz / spec.preamble_width_hz + 1e-9).floor();
    if preambles < 1.0 {
        return 0.0;
    }
    let others = spec.user_count.saturating_sub(1) as f64;
    (1.0 - spec.activation_prob / preambles).powf(others)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiConstraint {
    /// Codeword length in channel uses.
    pub blocklength_n: u64,
    /// Channel uses that fit in the transmission share of the deadline.
    pub max_blocklength: u64,
    pub gamma_req: f64,
    pub queue_capacity_k: u64,
    pub service_time_s: f64,
    pub blocking_probability: f64,
    pub blocking_ok: bool,
    /// Fraction of time the slice transmits, λ_tot τ (1 - P_B).
    pub duty_cycle: f64,
}

/// Bandwidth-independent part of the TI link: codeword length and the
/// SINR that decodes it at the target error probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiLink {
    pub blocklength_n: u64,
    pub gamma_req: f64,
}

pub fn ti_link(spec: &TiSpec, sc: &Scenario) -> Result<TiLink, QosError> {
    let blocklength_n = (spec.packet_bits / sc.qos.ti_code_rate - 1e-9).ceil().max(1.0) as u64;
    let gamma_req = gamma_required(spec.packet_bits, blocklength_n as f64, spec.decode_error_prob)?;
    Ok(TiLink {
        blocklength_n,
        gamma_req,
    })
}

/// Maps a TI slice and its bandwidth to the per-sample SINR target and
/// the queueing verdict.
///
/// The deadline minus coordination latency is split: `ti_tx_fraction`
/// bounds the airtime of one packet, the rest absorbs queueing. The
/// codeword carries the packet at `ti_code_rate` bits per use, so wider
/// bandwidth shortens the service time and enlarges the admissible queue.
pub fn ti_constraint(spec: &TiSpec, bandwidth_hz: f64, sc: &Scenario) -> Result<TiConstraint, QosError> {
    ti_constraint_with(&ti_link(spec, sc)?, spec, bandwidth_hz, sc)
}

/// `ti_constraint` with the link part precomputed.
pub fn ti_constraint_with(
    link: &TiLink,
    spec: &TiSpec,
    bandwidth_hz: f64,
    sc: &Scenario,
) -> Result<TiConstraint, QosError> {
    if !(bandwidth_hz > 0.0) {
        return Err(QosError::Domain("ti_constraint needs bandwidth > 0"));
    }
    let tx_budget_s = sc.qos.ti_tx_fraction * (spec.deadline_s - sc.coord_latency_s);
    let max_blocklength = (bandwidth_hz * tx_budget_s + 1e-9).floor().max(0.0) as u64;
    let blocklength_n = link.blocklength_n;
    if blocklength_n > max_blocklength {
        return Err(QosError::PayloadExceedsBudget {
            needed: blocklength_n,
            budget: max_blocklength,
        });
    }
    let service_time_s = blocklength_n as f64 / bandwidth_hz;
    let queue_capacity_k = queue_capacity(spec.deadline_s, service_time_s, sc.coord_latency_s)?;
    let lambda = spec.robot_count as f64 * spec.arrival_rate_pkts_per_s;
    let p_b = blocking_probability(lambda, service_time_s, queue_capacity_k);
    Ok(TiConstraint {
        blocklength_n,
        max_blocklength,
        gamma_req: link.gamma_req,
        queue_capacity_k,
        service_time_s,
        blocking_probability: p_b,
        blocking_ok: p_b <= spec.blocking_prob,
        duty_cycle: (lambda * service_time_s * (1.0 - p_b)).min(1.0),
    })
}

pub fn shannon_rate(bandwidth_hz: f64, gamma: f64) -> f64 {
    bandwidth_hz * (1.0 + gamma).log2()
}
