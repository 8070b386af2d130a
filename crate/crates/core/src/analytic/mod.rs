//! Ergodic capacity and average harvested energy per user for round-robin,
//! order-based N-SNR and order-based equal-throughput scheduling.
//!
//! Capacities are in bits/s/Hz (unit bandwidth). Harvested energy is the
//! average harvested power in watts, i.e. energy per unit-length slot.
//! User indices are 0-based throughout the API.

mod feasibility;

use std::fmt;
use std::str::FromStr;

pub use feasibility::{
    et_feasibility, et_feasibility_exhaustive, subset_bound, ConditionId, FeasibilityVerdict,
    Violation, EXHAUSTIVE_MAX_USERS, FEASIBILITY_TOLERANCE,
};

use crate::channel::{unit_cdf_pair, unit_pdf, Scenario};
use crate::error::{domain, Error, Result};
use crate::orderstats::{
    binomial, expected_ordered_gain, expected_ordered_gain_quadrature, integrate_against_ordered,
    OrderSpec,
};
use crate::specfun::{e1_scaled_unchecked, integrate_semi_infinite, QuadratureSpec};

/// Ratio of summed term magnitudes to the result above which the Rayleigh
/// alternating sum is considered too cancellation-prone to trust.
pub const CANCELLATION_LIMIT: f64 = 1e6;

/// Allowed N-SNR orders `S_a` (1-based, ascending, no duplicates).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AllowedOrderSet {
    orders: Vec<usize>,
}

impl AllowedOrderSet {
    /// Builds the set; duplicates and order 0 are rejected.
    pub fn new(orders: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut orders: Vec<usize> = orders.into_iter().collect();
        orders.sort_unstable();
        if orders.is_empty() {
            return Err(domain("allowed order set must not be empty"));
        }
        if orders[0] == 0 {
            return Err(domain("orders are 1-based"));
        }
        if orders.windows(2).any(|w| w[0] == w[1]) {
            return Err(domain("allowed order set contains duplicates"));
        }
        Ok(Self { orders })
    }

    /// `{1, ..., n}`.
    pub fn full(n_users: usize) -> Result<Self> {
        Self::new(1..=n_users)
    }

    pub fn validate_for(&self, n_users: usize) -> Result<()> {
        match self.orders.last() {
            Some(&max) if max <= n_users => Ok(()),
            _ => Err(domain(format!(
                "allowed set {self} exceeds the number of users {n_users}"
            ))),
        }
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn contains(&self, order: usize) -> bool {
        self.orders.binary_search(&order).is_ok()
    }

    /// Orders in `1..=n_users` that are not allowed.
    pub fn complement(&self, n_users: usize) -> Vec<usize> {
        (1..=n_users).filter(|j| !self.contains(*j)).collect()
    }
}

impl fmt::Display for AllowedOrderSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.orders.iter().map(|j| j.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Parses `1-2`, `1,3,5` or mixtures such as `1-3,6`.
impl FromStr for AllowedOrderSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut orders = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let parse = |t: &str| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| domain(format!("bad order `{t}` in `{s}`")))
            };
            match part.split_once('-') {
                Some((lo, hi)) => {
                    let (lo, hi) = (parse(lo)?, parse(hi)?);
                    if lo > hi {
                        return Err(domain(format!("empty range `{part}`")));
                    }
                    orders.extend(lo..=hi);
                }
                None => orders.push(parse(part)?),
            }
        }
        Self::new(orders)
    }
}

/// Which analytic scheduler a result describes.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    RoundRobin,
    OrderNsnr { order_j: usize },
    OrderEt { allowed: AllowedOrderSet },
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::RoundRobin => write!(f, "rr"),
            PolicyKind::OrderNsnr { order_j } => write!(f, "nsnr(j={order_j})"),
            PolicyKind::OrderEt { allowed } => write!(f, "et(S_a={allowed})"),
        }
    }
}

/// One rate-energy point per user.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerAnalysis {
    pub policy: PolicyKind,
    pub per_user_capacity: Vec<f64>,
    pub per_user_harvest: Vec<f64>,
    /// Long-run probability that each user is scheduled.
    pub per_user_sched_prob: Vec<f64>,
}

/// Equal-throughput probabilities, the common throughput and the feasibility verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct EtSolution {
    pub allowed: AllowedOrderSet,
    pub equal_throughput_r: f64,
    pub probabilities: Vec<f64>,
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtAnalysis {
    pub analysis: SchedulerAnalysis,
    pub solution: EtSolution,
}

fn check_user(scenario: &Scenario, user: usize) -> Result<()> {
    if user < scenario.n_users() {
        Ok(())
    } else {
        Err(domain(format!(
            "user index {user} out of range for {} users",
            scenario.n_users()
        )))
    }
}

/// Ergodic capacity of a user with full time access to the channel.
pub fn full_access_capacity(scenario: &Scenario, user: usize) -> Result<f64> {
    check_user(scenario, user)?;
    let k = scenario.users[user].k_factor;
    let snr = scenario.average_snr(user);
    if k == 0.0 {
        Ok(rayleigh_full_access_capacity(snr))
    } else {
        let env = move |x: f64| unit_cdf_pair(k, x).0;
        integrate_semi_infinite(
            |x: f64| (snr * x).ln_1p() / std::f64::consts::LN_2 * unit_pdf(k, x),
            Some(&env),
            &QuadratureSpec::default(),
        )
    }
}

/// `e^{1/snr} E1(1/snr) / ln 2`.
pub fn rayleigh_full_access_capacity(snr: f64) -> f64 {
    e1_scaled_unchecked(1.0 / snr) / std::f64::consts::LN_2
}

pub fn rr_analysis(scenario: &Scenario) -> Result<SchedulerAnalysis> {
    scenario.validate()?;
    let n = scenario.n_users() as f64;
    let mut caps = Vec::with_capacity(scenario.n_users());
    let mut harvest = Vec::with_capacity(scenario.n_users());
    for (u, params) in scenario.users.iter().enumerate() {
        caps.push(full_access_capacity(scenario, u)? / n);
        harvest.push((1.0 - 1.0 / n) * scenario.eta * scenario.tx_power_w * params.omega);
    }
    Ok(SchedulerAnalysis {
        policy: PolicyKind::RoundRobin,
        per_user_capacity: caps,
        per_user_harvest: harvest,
        per_user_sched_prob: vec![1.0 / n; scenario.n_users()],
    })
}

/// Result of the Rayleigh closed-form N-SNR capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormCapacity {
    pub value: f64,
    /// Sum of absolute term magnitudes divided by the absolute result.
    pub cancellation_ratio: f64,
}

/// Rayleigh per-user capacity under order-`j` N-SNR scheduling:
///
/// `C(N-1, j-1)/ln 2 * sum_{l=0}^{j-1} (-1)^l C(j-1, l) / c_l * e^{c_l/snr} E1(c_l/snr)`
/// with `c_l = N - j + l + 1`. The alternating sum is accumulated with
/// Neumaier compensation.
pub fn nsnr_capacity_rayleigh_closed_form(
    n_users: usize,
    order_j: usize,
    snr: f64,
) -> Result<ClosedFormCapacity> {
    OrderSpec::new(n_users, order_j)?;
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut magnitude = 0.0_f64;
    for l in 0..order_j {
        let c = (n_users - order_j + l + 1) as f64;
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * binomial(order_j - 1, l) / c * e1_scaled_unchecked(c / snr);
        magnitude += term.abs();
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    let total = sum + comp;
    let scale = binomial(n_users - 1, order_j - 1) / std::f64::consts::LN_2;
    let value = scale * total;
    let cancellation_ratio = if total == 0.0 {
        f64::INFINITY
    } else {
        magnitude / total.abs()
    };
    Ok(ClosedFormCapacity {
        value,
        cancellation_ratio,
    })
}

/// `(1/N) * integral log2(1 + snr x) f_{X_(j)}(x) dx` by quadrature.
pub fn nsnr_capacity_quadrature(
    n_users: usize,
    order_j: usize,
    k_factor: f64,
    snr: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let spec = OrderSpec::new(n_users, order_j)?;
    let integral = integrate_against_ordered(
        spec,
        k_factor,
        |x| (snr * x).ln_1p() / std::f64::consts::LN_2,
        quad,
    )?;
    Ok(integral / n_users as f64)
}

/// Ergodic capacity of `user` when the order-`order_j` user is scheduled.
pub fn nsnr_capacity(scenario: &Scenario, order_j: usize, user: usize) -> Result<f64> {
    check_user(scenario, user)?;
    let n = scenario.n_users();
    OrderSpec::new(n, order_j)?;
    let k = scenario.shared_k()?;
    let snr = scenario.average_snr(user);
    if k == 0.0 {
        let closed = nsnr_capacity_rayleigh_closed_form(n, order_j, snr)?;
        if closed.cancellation_ratio <= CANCELLATION_LIMIT {
            return Ok(closed.value);
        }
        log::warn!(
            "closed-form N-SNR capacity (N={n}, j={order_j}) lost precision to cancellation \
             (ratio {:.3e}); falling back to quadrature",
            closed.cancellation_ratio
        );
    }
    nsnr_capacity_quadrature(n, order_j, k, snr, &QuadratureSpec::default())
}

/// Average harvested power of `user` under order-`order_j` N-SNR scheduling,
/// `eta P omega (1 - E[X_(j)] / N)`.
pub fn nsnr_harvest(scenario: &Scenario, order_j: usize, user: usize) -> Result<f64> {
    check_user(scenario, user)?;
    let n = scenario.n_users();
    let spec = OrderSpec::new(n, order_j)?;
    let k = scenario.shared_k()?;
    let mean = expected_ordered_gain(spec, k)?;
    Ok(harvest_scale(scenario, user) * (1.0 - mean / n as f64))
}

/// Same as [`nsnr_harvest`] but always integrating `x f_{X_(j)}` numerically.
pub fn nsnr_harvest_quadrature(
    scenario: &Scenario,
    order_j: usize,
    user: usize,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_user(scenario, user)?;
    let n = scenario.n_users();
    let spec = OrderSpec::new(n, order_j)?;
    let k = scenario.shared_k()?;
    let mean = expected_ordered_gain_quadrature(spec, k, quad)?;
    Ok(harvest_scale(scenario, user) * (1.0 - mean / n as f64))
}

fn harvest_scale(scenario: &Scenario, user: usize) -> f64 {
    scenario.eta * scenario.tx_power_w * scenario.users[user].omega
}

pub fn nsnr_analysis(scenario: &Scenario, order_j: usize) -> Result<SchedulerAnalysis> {
    scenario.validate()?;
    let n = scenario.n_users();
    OrderSpec::new(n, order_j)?;
    let mut caps = Vec::with_capacity(n);
    let mut harvest = Vec::with_capacity(n);
    for u in 0..n {
        caps.push(nsnr_capacity(scenario, order_j, u)?);
        harvest.push(nsnr_harvest(scenario, order_j, u)?);
    }
    Ok(SchedulerAnalysis {
        policy: PolicyKind::OrderNsnr { order_j },
        per_user_capacity: caps,
        per_user_harvest: harvest,
        per_user_sched_prob: vec![1.0 / n as f64; n],
    })
}

/// `sum_{j in S_a} E[C_{j,U_n}]` for every user.
pub fn allowed_capacity_sums(scenario: &Scenario, allowed: &AllowedOrderSet) -> Result<Vec<f64>> {
    let n = scenario.n_users();
    allowed.validate_for(n)?;
    (0..n)
        .map(|u| {
            allowed
                .orders()
                .iter()
                .map(|&j| nsnr_capacity(scenario, j, u))
                .sum::<Result<f64>>()
        })
        .collect()
}

fn probabilities_from_sums(sums: &[f64]) -> Vec<f64> {
    let inv_total: f64 = sums.iter().map(|a| 1.0 / a).sum();
    sums.iter().map(|a| 1.0 / (a * inv_total)).collect()
}

fn throughput_from_sums(sums: &[f64], allowed_size: usize) -> f64 {
    let n = sums.len() as f64;
    let s = allowed_size as f64;
    // Harmonic mean over users of the per-user mean over allowed orders.
    n / sums.iter().map(|a| s / a).sum::<f64>()
}

/// Scheduling probabilities that equalize the users' throughputs.
pub fn et_probabilities(scenario: &Scenario, allowed: &AllowedOrderSet) -> Result<Vec<f64>> {
    Ok(probabilities_from_sums(&allowed_capacity_sums(
        scenario, allowed,
    )?))
}

/// The common throughput `r` achieved by every user under ET scheduling.
pub fn et_throughput(scenario: &Scenario, allowed: &AllowedOrderSet) -> Result<f64> {
    Ok(throughput_from_sums(
        &allowed_capacity_sums(scenario, allowed)?,
        allowed.len(),
    ))
}

/// Probabilities, throughput and feasibility verdict in one pass.
pub fn et_solution(scenario: &Scenario, allowed: &AllowedOrderSet) -> Result<EtSolution> {
    let sums = allowed_capacity_sums(scenario, allowed)?;
    let probabilities = probabilities_from_sums(&sums);
    let verdict = et_feasibility(&probabilities, allowed.len(), scenario.n_users())?;
    Ok(EtSolution {
        allowed: allowed.clone(),
        equal_throughput_r: throughput_from_sums(&sums, allowed.len()),
        probabilities,
        feasible: verdict.feasible,
        violations: verdict.violations,
    })
}

/// Average harvested power of `user` under ET scheduling with scheduling
/// probability `p_user`: `eta P omega [1 - p/|S_a| * sum_{j in S_a} E[X_(j)]]`.
pub fn et_harvest(
    scenario: &Scenario,
    allowed: &AllowedOrderSet,
    p_user: f64,
    user: usize,
) -> Result<f64> {
    check_user(scenario, user)?;
    let n = scenario.n_users();
    allowed.validate_for(n)?;
    let k = scenario.shared_k()?;
    let mut sum_means = 0.0;
    for &j in allowed.orders() {
        sum_means += expected_ordered_gain(OrderSpec::new(n, j)?, k)?;
    }
    Ok(harvest_scale(scenario, user) * (1.0 - p_user / allowed.len() as f64 * sum_means))
}

/// Full ET rate-energy analysis. An infeasible allowed set yields
/// [`Error::Infeasible`] carrying the probabilities and violated conditions.
pub fn et_analysis(scenario: &Scenario, allowed: &AllowedOrderSet) -> Result<EtAnalysis> {
    scenario.validate()?;
    let solution = et_solution(scenario, allowed)?;
    if !solution.feasible {
        return Err(Error::Infeasible(Box::new(solution)));
    }
    let n = scenario.n_users();
    let mut harvest = Vec::with_capacity(n);
    for (u, &p) in solution.probabilities.iter().enumerate() {
        harvest.push(et_harvest(scenario, allowed, p, u)?);
    }
    Ok(EtAnalysis {
        analysis: SchedulerAnalysis {
            policy: PolicyKind::OrderEt {
                allowed: allowed.clone(),
            },
            per_user_capacity: vec![solution.equal_throughput_r; n],
            per_user_harvest: harvest,
            per_user_sched_prob: solution.probabilities.clone(),
        },
        solution,
    })
}
