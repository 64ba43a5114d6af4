use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use super::{slice_utility, AllocError, Executor, Sequential};
use crate::channel::{draw_sample, stacked_channel, ChannelSample};
use crate::comp::{admit_embb_users, embb_power, solve_beamforming, BeamformingProblem, BeamformingSolution};
use crate::qos::{ra_success_probability, ti_constraint_with, ti_link, TiLink};
use crate::scenario::{Scenario, SliceKind, SliceSpec, StreamSeed, TiSpec, Topology};

pub const RANDOMIZATION_STREAM: &str = "randomization";

#[derive(Debug, Clone, PartialEq)]
pub struct SliceOutcome {
    pub kind: SliceKind,
    pub bandwidth_hz: f64,
    pub satisfied_frac: f64,
    /// Power drawn from the RUs while the slice transmits.
    pub tx_power_w: f64,
    /// Time-averaged power charged in the utility. Equal to `tx_power_w`
    /// except for TI, which transmits only while packets are in service.
    pub power_w: f64,
    pub utility: f64,
    pub per_ru_w: Vec<f64>,
    /// Only filled when details are requested.
    pub beamforming: Option<BeamformingSolution>,
    /// eMBB per-user power, 0 for denied users.
    pub embb_user_power_w: Vec<f64>,
}

impl SliceOutcome {
    fn denied(kind: SliceKind, bandwidth_hz: f64, ru_count: usize) -> Self {
        Self {
            kind,
            bandwidth_hz,
            satisfied_frac: 0.0,
            tx_power_w: 0.0,
            power_w: 0.0,
            utility: 0.0,
            per_ru_w: vec![0.0; ru_count],
            beamforming: None,
            embb_user_power_w: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    pub sample_index: u64,
    pub slices: Vec<SliceOutcome>,
    /// Instantaneous power per RU summed over slices.
    pub per_ru_power_w: Vec<f64>,
    pub utility: f64,
}

struct SampleContext {
    channel: ChannelSample,
    /// Beamforming at unit noise with unlimited budgets, per TI slice.
    ti_unit: Vec<Option<BeamformingSolution>>,
    /// Per-slice utility on the bandwidth grid, each slice seeing the full
    /// RU budget.
    tables: Vec<Vec<f64>>,
}

/// The SAA instance: scenario, topology and the drawn channel samples
/// together with everything about them that does not depend on the
/// bandwidth split.
pub struct SaaProblem<'a> {
    pub sc: &'a Scenario,
    pub top: &'a Topology,
    ranges: Vec<Range<usize>>,
    links: Vec<Option<TiLink>>,
    samples: Vec<SampleContext>,
    grid_per_block: usize,
}

impl<'a> SaaProblem<'a> {
    /// Draws samples 0..S from the fading stream.
    pub fn new<E: Executor>(sc: &'a Scenario, top: &'a Topology, exec: &E) -> Result<Self, AllocError> {
        let channels = exec.map(sc.saa_samples, |t| draw_sample(top, sc, t as u64));
        Self::from_samples(sc, top, channels, exec)
    }

    pub fn from_samples<E: Executor>(
        sc: &'a Scenario,
        top: &'a Topology,
        channels: Vec<ChannelSample>,
        exec: &E,
    ) -> Result<Self, AllocError> {
        sc.validate()?;
        if top.terminal_count() != sc.total_terminals() || top.ru_positions.len() != sc.ru_count() {
            return Err(AllocError::Topology("terminal or RU count mismatch"));
        }
        if channels.iter().any(|c| {
            c.terminal_count() != sc.total_terminals()
                || c.ru_count != sc.ru_count()
                || c.antennas_per_ru != sc.antennas_per_ru
        }) {
            return Err(AllocError::Topology("channel sample shape mismatch"));
        }
        let links = sc
            .slices
            .iter()
            .map(|s| match s {
                SliceSpec::Ti(ti) => ti_link(ti, sc).map(Some),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut problem = Self {
            sc,
            top,
            ranges: sc.terminal_ranges(),
            links,
            samples: Vec::new(),
            grid_per_block: sc.solver.admm.grid_per_block,
        };
        let units = exec.map(channels.len(), |i| problem.unit_solutions(&channels[i]));
        let mut samples = Vec::with_capacity(channels.len());
        for (channel, unit) in channels.into_iter().zip(units) {
            samples.push(SampleContext {
                channel,
                ti_unit: unit?,
                tables: Vec::new(),
            });
        }
        problem.samples = samples;
        let tables = exec.map(problem.samples.len(), |t| problem.build_tables(t));
        for (ctx, t) in problem.samples.iter_mut().zip(tables) {
            ctx.tables = t;
        }
        Ok(problem)
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn slice_count(&self) -> usize {
        self.sc.slices.len()
    }

    pub fn block_count(&self) -> usize {
        self.sc.block_count()
    }

    pub fn grid_per_block(&self) -> usize {
        self.grid_per_block
    }

    pub fn channel(&self, t: usize) -> &ChannelSample {
        &self.samples[t].channel
    }

    /// Standalone utility of slice `s` in sample `t` at grid points
    /// 0, 1/q, ..., M blocks.
    pub(crate) fn table(&self, t: usize, s: usize) -> &[f64] {
        &self.samples[t].tables[s]
    }

    fn rng(&self, sample_index: u64, s: usize) -> rand_chacha::ChaCha8Rng {
        StreamSeed(self.sc.seed).indexed(
            RANDOMIZATION_STREAM,
            sample_index * self.slice_count() as u64 + s as u64,
        )
    }

    fn ti_problem(
        &self,
        cs: &ChannelSample,
        s: usize,
        gamma: f64,
        noise: f64,
        budgets: Vec<f64>,
    ) -> Result<BeamformingProblem, AllocError> {
        let channels = self.ranges[s]
            .clone()
            .map(|u| stacked_channel(cs, u).to_vec())
            .collect::<Vec<_>>();
        let gammas = vec![gamma; channels.len()];
        Ok(BeamformingProblem::new(
            channels,
            gammas,
            noise,
            budgets,
            self.sc.antennas_per_ru,
        )?)
    }

    fn unit_solutions(&self, cs: &ChannelSample) -> Result<Vec<Option<BeamformingSolution>>, AllocError> {
        let mut out = Vec::with_capacity(self.slice_count());
        for (s, link) in self.links.iter().enumerate() {
            let Some(link) = link else {
                out.push(None);
                continue;
            };
            let p = self.ti_problem(cs, s, link.gamma_req, 1.0, vec![f64::INFINITY; self.sc.ru_count()])?;
            let mut rng = self.rng(cs.sample_index, s);
            out.push(Some(solve_beamforming(&p, &self.sc.solver.sdr, &mut rng)?));
        }
        Ok(out)
    }

    fn build_tables(&self, t: usize) -> Vec<Vec<f64>> {
        let q = self.grid_per_block as f64;
        let points = self.block_count() * self.grid_per_block + 1;
        let full = vec![self.sc.max_ru_power_w; self.sc.ru_count()];
        (0..self.slice_count())
            .map(|s| {
                (0..points)
                    .map(|i| {
                        let b = i as f64 / q * self.sc.block_width_hz;
                        self.eval_slice(t, s, b, &full, false).utility
                    })
                    .collect()
            })
            .collect()
    }

    fn eval_ti(&self, t: usize, s: usize, spec: &TiSpec, b: f64, budgets: &[f64], detail: bool) -> SliceOutcome {
        let ru_count = self.sc.ru_count();
        let denied = SliceOutcome::denied(SliceKind::Ti, b, ru_count);
        let Some(link) = &self.links[s] else { return denied };
        let tc = match ti_constraint_with(link, spec, b, self.sc) {
            Ok(tc) if tc.blocking_ok => tc,
            _ => return denied,
        };
        let ctx = &self.samples[t];
        let noise = self.sc.noise_psd_w_per_hz() * b;
        let Some(unit) = &ctx.ti_unit[s] else { return denied };
        let fits = unit.feasible && unit.per_ru_power.iter().zip(budgets).all(|(p, cap)| p * noise <= *cap);
        let (tx_power, per_ru, solution) = if fits {
            let per_ru: Vec<f64> = unit.per_ru_power.iter().map(|p| p * noise).collect();
            (unit.total_power * noise, per_ru, detail.then(|| unit.scaled(noise)))
        } else {
            // budgets bind: re-solve with them as constraints
            let Ok(p) = self.ti_problem(&ctx.channel, s, link.gamma_req, noise, budgets.to_vec()) else {
                return denied;
            };
            let mut rng = self.rng(ctx.channel.sample_index, s);
            match solve_beamforming(&p, &self.sc.solver.sdr, &mut rng) {
                Ok(sol) if sol.feasible => (sol.total_power, sol.per_ru_power.clone(), detail.then_some(sol)),
                _ => return denied,
            }
        };
        let power = tx_power * tc.duty_cycle;
        SliceOutcome {
            kind: SliceKind::Ti,
            bandwidth_hz: b,
            satisfied_frac: 1.0,
            tx_power_w: tx_power,
            power_w: power,
            utility: slice_utility(SliceKind::Ti, 1.0, power, self.sc),
            per_ru_w: per_ru,
            beamforming: solution,
            embb_user_power_w: Vec::new(),
        }
    }

    fn eval_slice(&self, t: usize, s: usize, b: f64, budgets: &[f64], detail: bool) -> SliceOutcome {
        let sc = self.sc;
        let kind = sc.slices[s].kind();
        if !(b > 0.0) {
            return SliceOutcome::denied(kind, 0.0, sc.ru_count());
        }
        match &sc.slices[s] {
            SliceSpec::Ti(spec) => self.eval_ti(t, s, spec, b, budgets, detail),
            SliceSpec::Embb(spec) => {
                let power = embb_power(spec, b, &self.samples[t].channel, sc, self.ranges[s].clone(), budgets);
                let adm = admit_embb_users(&power, budgets);
                let users = power
                    .per_user_w
                    .iter()
                    .zip(&adm.admitted)
                    .map(|(p, a)| if *a { *p } else { 0.0 })
                    .collect();
                SliceOutcome {
                    kind,
                    bandwidth_hz: b,
                    satisfied_frac: adm.satisfied_frac,
                    tx_power_w: adm.total_w,
                    power_w: adm.total_w,
                    utility: slice_utility(kind, adm.satisfied_frac, adm.total_w, sc),
                    per_ru_w: adm.per_ru_w,
                    beamforming: None,
                    embb_user_power_w: users,
                }
            }
            SliceSpec::Mmtc(spec) => {
                let sat = if ra_success_probability(b, spec) >= spec.ra_success_req {
                    1.0
                } else {
                    0.0
                };
                SliceOutcome {
                    utility: slice_utility(kind, sat, 0.0, sc),
                    satisfied_frac: sat,
                    ..SliceOutcome::denied(kind, b, sc.ru_count())
                }
            }
        }
    }

    /// Per-sample power allocation at fixed slice bandwidths (Hz). Slices
    /// are served TI first, then eMBB, then mMTC, each drawing on what the
    /// previous ones left of every RU budget.
    pub fn solve_bandwidths(&self, t: usize, bandwidth_hz: &[f64], detail: bool) -> SampleResult {
        let sc = self.sc;
        let mut budgets = vec![sc.max_ru_power_w; sc.ru_count()];
        let mut slices: Vec<Option<SliceOutcome>> = vec![None; sc.slices.len()];
        for kind in [SliceKind::Ti, SliceKind::Embb, SliceKind::Mmtc] {
            for (s, spec) in sc.slices.iter().enumerate() {
                if spec.kind() != kind {
                    continue;
                }
                let out = self.eval_slice(t, s, bandwidth_hz[s], &budgets, detail);
                for (b, used) in budgets.iter_mut().zip(&out.per_ru_w) {
                    *b = (*b - used).max(0.0);
                }
                slices[s] = Some(out);
            }
        }
        let slices: Vec<SliceOutcome> = slices.into_iter().map(|o| o.expect("every slice has a kind")).collect();
        let per_ru_power_w = (0..sc.ru_count())
            .map(|j| slices.iter().map(|o| o.per_ru_w[j]).sum())
            .collect();
        SampleResult {
            sample_index: self.samples[t].channel.sample_index,
            utility: slices.iter().map(|o| o.utility).sum(),
            slices,
            per_ru_power_w,
        }
    }

    /// Sample utility at a possibly fractional block split.
    pub fn sample_utility(&self, t: usize, blocks: &[f64]) -> f64 {
        let b: Vec<f64> = blocks.iter().map(|x| x * self.sc.block_width_hz).collect();
        self.solve_bandwidths(t, &b, false).utility
    }

    /// Mean utility over the given samples at an integer split.
    pub fn saa_utility(&self, samples: &[usize], blocks: &[usize]) -> f64 {
        let x: Vec<f64> = blocks.iter().map(|z| *z as f64).collect();
        let sum: f64 = samples.iter().map(|t| self.sample_utility(*t, &x)).sum();
        sum / samples.len() as f64
    }

    pub fn solve_blocks(&self, t: usize, blocks: &[usize]) -> SampleResult {
        let b: Vec<f64> = blocks.iter().map(|z| *z as f64 * self.sc.block_width_hz).collect();
        self.solve_bandwidths(t, &b, true)
    }
}

/// One-off evaluation of an integer split on a single channel sample.
pub fn solve_sample(
    z: &[usize],
    cs: &ChannelSample,
    sc: &Scenario,
    top: &Topology,
) -> Result<SampleResult, AllocError> {
    if z.len() != sc.slices.len() || z.iter().sum::<usize>() > sc.block_count() {
        return Err(AllocError::InvalidBlocks);
    }
    let p = SaaProblem::from_samples(sc, top, vec![cs.clone()], &Sequential)?;
    Ok(p.solve_blocks(0, z))
}
