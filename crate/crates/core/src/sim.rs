//! Slot-based Monte Carlo simulation of the schedulers.
//!
//! Every slot draws an independent gain for each user, schedules exactly one
//! user for information decoding and lets the other `N - 1` users harvest.
//! User `n` draws from its own ChaCha stream `n` of the master seed, so a
//! user's channel sequence does not depend on how many users are simulated.

use crate::analytic::{AllowedOrderSet, PolicyKind};
use crate::channel::{GainSampler, Scenario};
use crate::error::{Error, Result};
use crate::orderstats::rank_into;

/// Smoothing factor of the moving-average throughput.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSchedule {
    /// `beta_t = 1 / t`, which makes `r_n(t)` the exact running average.
    VanishingStep,
    Constant(f64),
}

impl BetaSchedule {
    /// Smoothing factor for slot `t` (1-based).
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            BetaSchedule::VanishingStep => 1.0 / t as f64,
            BetaSchedule::Constant(b) => b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchedulerPolicy {
    RoundRobin,
    OrderNsnr {
        order_j: usize,
    },
    OrderEt {
        allowed: AllowedOrderSet,
        beta: BetaSchedule,
        initial_throughput: f64,
    },
}

impl SchedulerPolicy {
    /// ET with `beta_t = 1/t` and all throughputs starting at zero.
    pub fn order_et(allowed: AllowedOrderSet) -> Self {
        SchedulerPolicy::OrderEt {
            allowed,
            beta: BetaSchedule::VanishingStep,
            initial_throughput: 0.0,
        }
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            SchedulerPolicy::RoundRobin => PolicyKind::RoundRobin,
            SchedulerPolicy::OrderNsnr { order_j } => PolicyKind::OrderNsnr { order_j: *order_j },
            SchedulerPolicy::OrderEt { allowed, .. } => PolicyKind::OrderEt {
                allowed: allowed.clone(),
            },
        }
    }

    pub fn is_et(&self) -> bool {
        matches!(self, SchedulerPolicy::OrderEt { .. })
    }

    pub fn validate(&self, n_users: usize) -> Result<()> {
        match self {
            SchedulerPolicy::RoundRobin => Ok(()),
            SchedulerPolicy::OrderNsnr { order_j } => {
                if (1..=n_users).contains(order_j) {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!(
                        "order j = {order_j} is not in 1..={n_users}"
                    )))
                }
            }
            SchedulerPolicy::OrderEt {
                allowed,
                beta,
                initial_throughput,
            } => {
                allowed
                    .validate_for(n_users)
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?;
                if let BetaSchedule::Constant(b) = beta {
                    if !(*b > 0.0 && *b < 1.0) {
                        return Err(Error::InvalidConfig(format!(
                            "constant beta must lie in (0, 1), got {b}"
                        )));
                    }
                }
                if !(initial_throughput.is_finite() && *initial_throughput >= 0.0) {
                    return Err(Error::InvalidConfig(
                        "initial throughput must be finite and >= 0".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub n_slots: u64,
    pub seed: u64,
    /// Leading slots excluded from the reported averages (ET only).
    pub warmup_slots: u64,
}

impl SimConfig {
    /// Warmup defaults to 1% of the slots.
    pub fn new(n_slots: u64, seed: u64) -> Self {
        Self {
            n_slots,
            seed,
            warmup_slots: n_slots / 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slots == 0 {
            return Err(Error::InvalidConfig("n_slots must be at least 1".into()));
        }
        if self.warmup_slots >= self.n_slots {
            return Err(Error::InvalidConfig(
                "warmup_slots must be smaller than n_slots".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub policy: SchedulerPolicy,
    /// Slots that contributed to the averages.
    pub measured_slots: u64,
    pub per_user_capacity_mean: Vec<f64>,
    pub per_user_capacity_stderr: Vec<f64>,
    pub per_user_harvest_mean: Vec<f64>,
    pub per_user_harvest_stderr: Vec<f64>,
    pub per_user_schedule_frequency: Vec<f64>,
    /// `r_n(T)` after the last slot (ET only).
    pub final_moving_throughput: Option<Vec<f64>>,
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
    }
}

/// Picks the user with the smallest moving throughput among those whose
/// order lies in `allowed`; ties go to the lowest index.
/// `order_of_user[n]` is the 1-based ascending N-SNR order of user `n`.
pub fn select_et(throughputs: &[f64], order_of_user: &[usize], allowed: &AllowedOrderSet) -> usize {
    let mut best: Option<usize> = None;
    for (n, &order) in order_of_user.iter().enumerate() {
        if !allowed.contains(order) {
            continue;
        }
        match best {
            Some(b) if throughputs[n] >= throughputs[b] => {}
            _ => best = Some(n),
        }
    }
    best.expect("ranks are a permutation, so every allowed order has a user")
}

/// `r_n <- (1 - beta) r_n + beta C` for the scheduled user, `(1 - beta) r_n` otherwise.
pub fn update_throughputs(throughputs: &mut [f64], scheduled: usize, beta: f64, rate: f64) {
    for (n, r) in throughputs.iter_mut().enumerate() {
        *r *= 1.0 - beta;
        if n == scheduled {
            *r += beta * rate;
        }
    }
}

/// One ET decision followed by the throughput update. Returns the scheduled user.
pub fn step_et(
    throughputs: &mut [f64],
    order_of_user: &[usize],
    allowed: &AllowedOrderSet,
    beta: f64,
    rates: &[f64],
) -> usize {
    let n = select_et(throughputs, order_of_user, allowed);
    update_throughputs(throughputs, n, beta, rates[n]);
    n
}

/// Outcome of a single slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub scheduled: usize,
    pub gains: Vec<f64>,
    /// Rate of the scheduled user, bits/s/Hz.
    pub rate: f64,
    /// Per-user harvested power; zero for the scheduled user.
    pub harvest: Vec<f64>,
}

/// Slot-by-slot simulator state.
#[derive(Debug, Clone)]
pub struct Simulator {
    scenario: Scenario,
    policy: SchedulerPolicy,
    samplers: Vec<GainSampler>,
    slot: u64,
    throughputs: Vec<f64>,
    gains: Vec<f64>,
    normalized: Vec<f64>,
    slots_by_order: Vec<usize>,
    order_of_user: Vec<usize>,
}

impl Simulator {
    pub fn new(scenario: &Scenario, policy: &SchedulerPolicy, seed: u64) -> Result<Self> {
        scenario.validate()?;
        let n = scenario.n_users();
        policy.validate(n)?;
        let initial = match policy {
            SchedulerPolicy::OrderEt {
                initial_throughput, ..
            } => *initial_throughput,
            _ => 0.0,
        };
        Ok(Self {
            scenario: scenario.clone(),
            policy: policy.clone(),
            samplers: (0..n as u64)
                .map(|u| GainSampler::for_stream(seed, u))
                .collect(),
            slot: 0,
            throughputs: vec![initial; n],
            gains: vec![0.0; n],
            normalized: vec![0.0; n],
            slots_by_order: Vec::with_capacity(n),
            order_of_user: vec![0; n],
        })
    }

    pub fn throughputs(&self) -> &[f64] {
        &self.throughputs
    }

    fn rate(&self, user: usize) -> f64 {
        log2_1p(self.scenario.tx_power_w * self.gains[user] / self.scenario.noise_power_w)
    }

    /// Advances one slot and returns the scheduled user.
    fn advance(&mut self) -> usize {
        self.slot += 1;
        for (u, params) in self.scenario.users.iter().enumerate() {
            self.gains[u] = self.samplers[u].sample(params);
        }
        let n = self.scenario.n_users();
        if !matches!(self.policy, SchedulerPolicy::RoundRobin) {
            for (u, params) in self.scenario.users.iter().enumerate() {
                self.normalized[u] = self.gains[u] / params.omega;
            }
            rank_into(&self.normalized, &mut self.slots_by_order);
        }
        match &self.policy {
            SchedulerPolicy::RoundRobin => ((self.slot - 1) % n as u64) as usize,
            SchedulerPolicy::OrderNsnr { order_j } => self.slots_by_order[order_j - 1],
            SchedulerPolicy::OrderEt { allowed, beta, .. } => {
                for (i, &u) in self.slots_by_order.iter().enumerate() {
                    self.order_of_user[u] = i + 1;
                }
                let chosen = select_et(&self.throughputs, &self.order_of_user, allowed);
                let b = beta.at(self.slot);
                let rate = self.rate(chosen);
                update_throughputs(&mut self.throughputs, chosen, b, rate);
                chosen
            }
        }
    }

    pub fn step(&mut self) -> SlotRecord {
        let scheduled = self.advance();
        let scale = self.scenario.eta * self.scenario.tx_power_w;
        let harvest = self
            .gains
            .iter()
            .enumerate()
            .map(|(u, &h)| if u == scheduled { 0.0 } else { scale * h })
            .collect();
        SlotRecord {
            scheduled,
            gains: self.gains.clone(),
            rate: self.rate(scheduled),
            harvest,
        }
    }
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Runs the simulation. Deterministic for fixed inputs.
pub fn run(scenario: &Scenario, policy: &SchedulerPolicy, config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let mut sim = Simulator::new(scenario, policy, config.seed)?;
    let n = scenario.n_users();
    let warmup = if policy.is_et() {
        config.warmup_slots
    } else {
        0
    };
    let scale = scenario.eta * scenario.tx_power_w;

    let mut cap = vec![Moments::default(); n];
    let mut harv = vec![Moments::default(); n];
    let mut counts = vec![0u64; n];

    for t in 0..config.n_slots {
        let scheduled = sim.advance();
        if t < warmup {
            continue;
        }
        let rate = sim.rate(scheduled);
        counts[scheduled] += 1;
        for u in 0..n {
            if u == scheduled {
                cap[u].push(rate);
                harv[u].push(0.0);
            } else {
                cap[u].push(0.0);
                harv[u].push(scale * sim.gains[u]);
            }
        }
    }

    let measured = config.n_slots - warmup;
    Ok(SimResult {
        policy: policy.clone(),
        measured_slots: measured,
        per_user_capacity_mean: cap.iter().map(|m| m.mean).collect(),
        per_user_capacity_stderr: cap.iter().map(Moments::stderr).collect(),
        per_user_harvest_mean: harv.iter().map(|m| m.mean).collect(),
        per_user_harvest_stderr: harv.iter().map(Moments::stderr).collect(),
        per_user_schedule_frequency: counts.iter().map(|&c| c as f64 / measured as f64).collect(),
        final_moving_throughput: policy.is_et().then(|| sim.throughputs.clone()),
    })
}

/// How closely an ET run equalized the users' capacities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    pub mean_capacity: f64,
    /// `max_n |C_n - mean| / mean`.
    pub max_relative_spread: f64,
    pub analytic_r: Option<f64>,
    /// `|mean - r| / r` when an analytic throughput is supplied.
    pub relative_gap_to_analytic: Option<f64>,
}

pub fn convergence_report(
    result: &SimResult,
    analytic_r: Option<f64>,
) -> Result<ConvergenceReport> {
    if !result.policy.is_et() {
        return Err(Error::Usage(
            "convergence report applies to equal-throughput runs only".into(),
        ));
    }
    let caps = &result.per_user_capacity_mean;
    let mean = caps.iter().sum::<f64>() / caps.len() as f64;
    let spread = caps
        .iter()
        .map(|c| (c - mean).abs() / mean)
        .fold(0.0, f64::max);
    Ok(ConvergenceReport {
        mean_capacity: mean,
        max_relative_spread: spread,
        analytic_r,
        relative_gap_to_analytic: analytic_r.map(|r| (mean - r).abs() / r),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::dbm_to_watts;

    fn scenario(omegas: &[f64], k: f64) -> Scenario {
        Scenario::with_omegas(omegas, k, 1.0, dbm_to_watts(-96.0), 0.5).unwrap()
    }

    #[test]
    fn beta_one_replaces_throughput() {
        let mut r = vec![3.0, 1.0, 2.0];
        let allowed = AllowedOrderSet::full(3).unwrap();
        let chosen = step_et(&mut r, &[1, 2, 3], &allowed, 1.0, &[5.0, 7.0, 9.0]);
        assert_eq!(chosen, 1);
        assert_eq!(r, vec![0.0, 7.0, 0.0]);
    }

    #[test]
    fn singleton_allowed_set_picks_that_rank() {
        let mut r = vec![0.5; 4];
        let allowed: AllowedOrderSet = "2".parse().unwrap();
        // User 3 holds order 2.
        let chosen = step_et(&mut r, &[4, 1, 3, 2], &allowed, 0.1, &[1.0; 4]);
        assert_eq!(chosen, 3);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let allowed = AllowedOrderSet::full(3).unwrap();
        assert_eq!(select_et(&[0.0, 0.0, 0.0], &[3, 1, 2], &allowed), 0);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig {
            n_slots: 0,
            seed: 1,
            warmup_slots: 0
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            n_slots: 10,
            seed: 1,
            warmup_slots: 10
        }
        .validate()
        .is_err());
        assert_eq!(SimConfig::new(1_000_000, 0).warmup_slots, 10_000);
        let s = scenario(&[1e-5, 2e-5], 0.0);
        let bad = SchedulerPolicy::OrderNsnr { order_j: 3 };
        assert!(run(&s, &bad, &SimConfig::new(10, 0)).is_err());
        let bad_beta = SchedulerPolicy::OrderEt {
            allowed: AllowedOrderSet::full(2).unwrap(),
            beta: BetaSchedule::Constant(1.0),
            initial_throughput: 0.0,
        };
        assert!(run(&s, &bad_beta, &SimConfig::new(10, 0)).is_err());
    }

    #[test]
    fn per_slot_conservation() {
        let s = scenario(&[1e-5, 2e-5, 3e-5, 4e-5], 6.0);
        for policy in [
            SchedulerPolicy::RoundRobin,
            SchedulerPolicy::OrderNsnr { order_j: 2 },
            SchedulerPolicy::order_et("1-2".parse().unwrap()),
        ] {
            let mut sim = Simulator::new(&s, &policy, 9).unwrap();
            for _ in 0..500 {
                let rec = sim.step();
                assert_eq!(rec.harvest[rec.scheduled], 0.0);
                let total: f64 = rec.harvest.iter().sum();
                let expected: f64 = rec
                    .gains
                    .iter()
                    .enumerate()
                    .filter(|(u, _)| *u != rec.scheduled)
                    .map(|(_, h)| 0.5 * h)
                    .sum();
                assert!((total - expected).abs() <= 1e-15 * expected.max(1e-30));
                assert!(rec.harvest.iter().filter(|&&h| h > 0.0).count() == 3);
            }
        }
    }

    #[test]
    fn round_robin_frequency_is_exact() {
        let s = scenario(&[1e-5, 2e-5, 3e-5], 0.0);
        let res = run(&s, &SchedulerPolicy::RoundRobin, &SimConfig::new(3000, 5)).unwrap();
        assert!(res
            .per_user_schedule_frequency
            .iter()
            .all(|&f| f == 1.0 / 3.0));
        assert!(res.final_moving_throughput.is_none());
    }

    #[test]
    fn nsnr_schedules_requested_rank() {
        let s = scenario(&[1e-5, 5e-5, 2e-5], 6.0);
        let mut sim = Simulator::new(&s, &SchedulerPolicy::OrderNsnr { order_j: 3 }, 4).unwrap();
        for _ in 0..200 {
            let rec = sim.step();
            let norm: Vec<f64> = rec
                .gains
                .iter()
                .zip(&s.users)
                .map(|(g, p)| g / p.omega)
                .collect();
            let argmax = (0..3).max_by(|&a, &b| norm[a].total_cmp(&norm[b])).unwrap();
            assert_eq!(rec.scheduled, argmax);
        }
    }

    #[test]
    fn frequencies_sum_to_one_and_runs_are_deterministic() {
        let s = scenario(&[1e-5, 2e-5, 3e-5, 4e-5], 6.0);
        let policy = SchedulerPolicy::order_et("1-2".parse().unwrap());
        let cfg = SimConfig::new(20_000, 77);
        let a = run(&s, &policy, &cfg).unwrap();
        let b = run(&s, &policy, &cfg).unwrap();
        assert_eq!(a, b);
        assert!((a.per_user_schedule_frequency.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(a.measured_slots, 20_000 - 200);
        let c = run(&s, &policy, &SimConfig::new(20_000, 78)).unwrap();
        assert_ne!(a.per_user_capacity_mean, c.per_user_capacity_mean);
    }

    #[test]
    fn convergence_report_requires_et() {
        let s = scenario(&[1e-5, 2e-5], 0.0);
        let res = run(&s, &SchedulerPolicy::RoundRobin, &SimConfig::new(100, 1)).unwrap();
        assert!(matches!(
            convergence_report(&res, None),
            Err(Error::Usage(_))
        ));
    }
}
