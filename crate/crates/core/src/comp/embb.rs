use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::channel::{norm_sqr, ChannelSample};
use crate::scenario::{EmbbSpec, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbbPower {
    /// Required transmit power per user in watts; infinite when the rate
    /// cannot be reached at any power on the user's share.
    pub per_user_w: Vec<f64>,
    pub serving_ru: Vec<usize>,
    pub per_ru_w: Vec<f64>,
    /// Every user fits within the remaining budgets.
    pub feasible: bool,
}

/// Closed-form MRT power for each user of an eMBB slice.
///
/// Users split the slice bandwidth equally and are served by their
/// strongest RU in this sample. `terminals` is the slice's range in the
/// channel sample.
pub fn embb_power(
    spec: &EmbbSpec,
    slice_bandwidth_hz: f64,
    cs: &ChannelSample,
    sc: &Scenario,
    terminals: Range<usize>,
    budgets_w: &[f64],
) -> EmbbPower {
    let users = spec.user_count.max(1) as f64;
    let b_u = slice_bandwidth_hz / users;
    let n0 = sc.noise_psd_w_per_hz();
    let mut per_user_w = Vec::with_capacity(terminals.len());
    let mut serving_ru = Vec::with_capacity(terminals.len());
    let mut per_ru_w = vec![0.0; cs.ru_count];
    for u in terminals {
        let (ru, gain) = (0..cs.ru_count)
            .map(|j| (j, norm_sqr(cs.gain(j, u))))
            .fold((0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
        let p = if spec.rate_req_bps <= 0.0 {
            0.0
        } else if b_u <= 0.0 || gain <= 0.0 {
            f64::INFINITY
        } else {
            (2f64.powf(spec.rate_req_bps / b_u) - 1.0) * n0 * b_u / gain
        };
        per_user_w.push(p);
        serving_ru.push(ru);
        per_ru_w[ru] += p;
    }
    let feasible = per_ru_w.iter().zip(budgets_w).all(|(p, b)| *p <= *b);
    EmbbPower {
        per_user_w,
        serving_ru,
        per_ru_w,
        feasible,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbbAdmission {
    pub admitted: Vec<bool>,
    pub per_ru_w: Vec<f64>,
    pub total_w: f64,
    pub satisfied_frac: f64,
}

/// Admits users in increasing order of required power while their RU has
/// budget left. Denied users consume nothing.
pub fn admit_embb_users(power: &EmbbPower, budgets_w: &[f64]) -> EmbbAdmission {
    let n = power.per_user_w.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| power.per_user_w[*a].total_cmp(&power.per_user_w[*b]));
    let mut admitted = vec![false; n];
    let mut per_ru_w = vec![0.0; budgets_w.len()];
    for u in order {
        let p = power.per_user_w[u];
        let ru = power.serving_ru[u];
        if p.is_finite() && per_ru_w[ru] + p <= budgets_w[ru] {
            per_ru_w[ru] += p;
            admitted[u] = true;
        }
    }
    let count = admitted.iter().filter(|a| **a).count();
    EmbbAdmission {
        total_w: per_ru_w.iter().sum(),
        satisfied_frac: if n == 0 { 0.0 } else { count as f64 / n as f64 },
        admitted,
        per_ru_w,
    }
}
