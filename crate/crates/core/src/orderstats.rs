//! Order statistics of N i.i.d. unit-mean normalized gains.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::channel::{unit_cdf_pair, unit_pdf};
use crate::error::{domain, Result};
use crate::specfun::{integrate_semi_infinite, QuadratureSpec};

/// Largest N for which binomial coefficients are computed exactly.
const EXACT_BINOMIAL_MAX_N: usize = 62;
/// Above this N the ordered density is assembled in log space.
const LOG_SPACE_FROM_N: usize = 30;

/// Selects the `order_j`-th smallest (1-based) of `n_users` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OrderSpec {
    pub n_users: usize,
    pub order_j: usize,
}

impl OrderSpec {
    pub fn new(n_users: usize, order_j: usize) -> Result<Self> {
        if n_users == 0 || order_j == 0 || order_j > n_users {
            return Err(domain(format!(
                "order j = {order_j} is not in 1..={n_users}"
            )));
        }
        Ok(Self { n_users, order_j })
    }
}

/// `C(n, k)` as f64, exact for `n <= 62` and via log-space sums beyond.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    if n <= EXACT_BINOMIAL_MAX_N {
        binomial_exact(n as u64, k as u64) as f64
    } else {
        ln_binomial(n, k).exp()
    }
}

pub fn binomial_exact(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // Each partial product is itself a binomial coefficient, so the
        // division is exact.
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

pub fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// Density of the `j`-th ascending order statistic,
/// `N C(N-1, j-1) f(x) F(x)^{j-1} (1 - F(x))^{N-j}`.
pub fn ordered_pdf(spec: OrderSpec, k_factor: f64, x: f64) -> Result<f64> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(domain(format!("x must be finite and >= 0, got {x}")));
    }
    if !(k_factor.is_finite() && k_factor >= 0.0) {
        return Err(domain(format!("k_factor must be >= 0, got {k_factor}")));
    }
    OrderSpec::new(spec.n_users, spec.order_j)?;
    Ok(ordered_pdf_unchecked(spec, k_factor, x))
}

pub(crate) fn ordered_pdf_unchecked(spec: OrderSpec, k: f64, x: f64) -> f64 {
    let n = spec.n_users;
    let j = spec.order_j;
    let f = unit_pdf(k, x);
    let (cdf, surv) = unit_cdf_pair(k, x);
    if n > LOG_SPACE_FROM_N {
        if f == 0.0 || (j > 1 && cdf == 0.0) || (j < n && surv == 0.0) {
            return 0.0;
        }
        let mut ln = (n as f64).ln() + ln_binomial(n - 1, j - 1) + f.ln();
        if j > 1 {
            ln += (j - 1) as f64 * cdf.ln();
        }
        if j < n {
            ln += (n - j) as f64 * surv.ln();
        }
        ln.exp()
    } else {
        n as f64 * binomial(n - 1, j - 1) * f * cdf.powi((j - 1) as i32) * surv.powi((n - j) as i32)
    }
}

/// Distribution function of the `j`-th order statistic:
/// the probability that at least `j` of the `N` samples are `<= x`.
pub fn ordered_cdf(spec: OrderSpec, k_factor: f64, x: f64) -> Result<f64> {
    OrderSpec::new(spec.n_users, spec.order_j)?;
    if !(x.is_finite() && x >= 0.0) {
        return Err(domain(format!("x must be finite and >= 0, got {x}")));
    }
    let (cdf, surv) = unit_cdf_pair(k_factor, x);
    let n = spec.n_users;
    let mut total = 0.0;
    for i in spec.order_j..=n {
        total += binomial(n, i) * cdf.powi(i as i32) * surv.powi((n - i) as i32);
    }
    Ok(total.min(1.0))
}

/// Envelope used to truncate order-statistic integrals: the tail of any order
/// statistic of N samples is at most N times the tail of one sample.
pub(crate) fn order_envelope(n_users: usize, k: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| 1.0 - (n_users as f64 * unit_cdf_pair(k, x).1).min(1.0)
}

/// Integral of `weight(x) * f_{X_(j)}(x)` over the half line.
pub(crate) fn integrate_against_ordered<W: Fn(f64) -> f64>(
    spec: OrderSpec,
    k: f64,
    weight: W,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let env = order_envelope(spec.n_users, k);
    integrate_semi_infinite(
        |x: f64| {
            let d = ordered_pdf_unchecked(spec, k, x);
            if d == 0.0 {
                0.0
            } else {
                weight(x) * d
            }
        },
        Some(&env),
        quad,
    )
}

/// Harmonic partial sum `sum_{l = N-j+1}^{N} 1/l`, which is `E[X_(j)]` for
/// unit-mean exponential samples.
pub fn harmonic_partial_sum(n_users: usize, order_j: usize) -> f64 {
    (n_users - order_j + 1..=n_users)
        .map(|l| 1.0 / l as f64)
        .sum()
}

fn expectation_cache() -> &'static Mutex<HashMap<(usize, usize, u64), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize, u64), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `E[X_(j)]`: harmonic partial sum for Rayleigh, memoized quadrature otherwise.
/// A single sample is exactly unit-mean.
pub fn expected_ordered_gain(spec: OrderSpec, k_factor: f64) -> Result<f64> {
    OrderSpec::new(spec.n_users, spec.order_j)?;
    if !(k_factor.is_finite() && k_factor >= 0.0) {
        return Err(domain(format!("k_factor must be >= 0, got {k_factor}")));
    }
    if k_factor == 0.0 {
        return Ok(harmonic_partial_sum(spec.n_users, spec.order_j));
    }
    if spec.n_users == 1 {
        // Unit-mean normalization.
        return Ok(1.0);
    }
    let key = (spec.n_users, spec.order_j, k_factor.to_bits());
    if let Some(v) = expectation_cache().lock().unwrap().get(&key) {
        return Ok(*v);
    }
    // Computed outside the lock; racing fills store the same deterministic value.
    let v = expected_ordered_gain_quadrature(spec, k_factor, &QuadratureSpec::default())?;
    expectation_cache().lock().unwrap().insert(key, v);
    Ok(v)
}

/// `E[X_(j)]` by quadrature for any K, bypassing the cache.
pub fn expected_ordered_gain_quadrature(
    spec: OrderSpec,
    k_factor: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    OrderSpec::new(spec.n_users, spec.order_j)?;
    integrate_against_ordered(spec, k_factor, |x| x, quad)
}

/// For each ascending order slot, the (0-based) index of the user holding it.
/// Ties go to the lower user index first.
pub fn rank_of_users(normalized_gains: &[f64]) -> Result<Vec<usize>> {
    if let Some(bad) = normalized_gains.iter().find(|g| !g.is_finite()) {
        return Err(domain(format!("normalized gain {bad} is not finite")));
    }
    let mut slots = Vec::with_capacity(normalized_gains.len());
    rank_into(normalized_gains, &mut slots);
    Ok(slots)
}

/// Allocation-free ranking for the simulator's inner loop. Inputs must be finite.
pub(crate) fn rank_into(gains: &[f64], slots: &mut Vec<usize>) {
    slots.clear();
    slots.extend(0..gains.len());
    // Stable sort keeps lower indices first among equal gains.
    slots.sort_by(|&a, &b| gains[a].total_cmp(&gains[b]));
}
