//! Special functions and deterministic quadrature.
//!
//! Everything here is a pure function of its inputs. The hot paths used by the
//! channel and order-statistics code call the unchecked `pub(crate)` kernels;
//! the public wrappers validate arguments and return [`Error::Domain`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{domain, Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

// ---------------------------------------------------------------------------
// Modified Bessel function I0
// ---------------------------------------------------------------------------

/// Above this argument the asymptotic expansion is used for the scaled form.
const I0_ASYMPTOTIC_FROM: f64 = 20.0;

/// `I0(x)`, the modified Bessel function of the first kind and order zero.
///
/// Returns a domain error for negative or non-finite input, and also when the
/// result overflows `f64` (x above ~713); use [`bessel_i0_scaled`] there.
pub fn bessel_i0(x: f64) -> Result<f64> {
    check_nonneg("bessel_i0", x)?;
    let v = if x < I0_ASYMPTOTIC_FROM {
        i0_series(x)
    } else {
        i0e(x) * x.exp()
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(format!(
            "bessel_i0({x}) overflows; use bessel_i0_scaled"
        )))
    }
}

/// Exponentially scaled `e^{-x} I0(x)`, finite for every finite `x >= 0`.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    check_nonneg("bessel_i0_scaled", x)?;
    Ok(i0e(x))
}

pub(crate) fn i0e(x: f64) -> f64 {
    if x < I0_ASYMPTOTIC_FROM {
        i0_series(x) * (-x).exp()
    } else {
        i0e_asymptotic(x)
    }
}

/// Power series sum_k (x/2)^{2k} / (k!)^2. All terms are positive.
fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum
}

/// Hankel expansion e^{-x} I0(x) ~ (2 pi x)^{-1/2} sum_k ((2k-1)!!)^2 / (k! (8x)^k).
/// Terms shrink until k ~ 2x, so for x >= 20 the truncation error is below 1e-17.
fn i0e_asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0_f64;
    loop {
        let next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
        if next.abs() >= term.abs() || next.abs() < 1e-17 * sum {
            sum += next;
            break;
        }
        term = next;
        sum += term;
        k += 1.0;
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

// ---------------------------------------------------------------------------
// First-order Marcum Q
// ---------------------------------------------------------------------------

/// Relative size below which the Poisson-mixture series is truncated.
const MARCUM_TERM_RATIO: f64 = 1e-14;

/// First-order Marcum Q-function `Q1(a, b)`.
pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    Ok(marcum_q1_pair(a, b)?.0)
}

/// Returns `(Q1(a, b), 1 - Q1(a, b))`, each summed directly so that neither
/// loses relative precision when the other is close to one.
pub fn marcum_q1_pair(a: f64, b: f64) -> Result<(f64, f64)> {
    check_nonneg("marcum_q1 (a)", a)?;
    check_nonneg("marcum_q1 (b)", b)?;
    Ok(marcum_pair_unchecked(a, b))
}

/// Poisson mixture representation
///
/// `Q1(a,b) = sum_k Pois(k; a^2/2) * Q(k+1, b^2/2)` and
/// `1 - Q1(a,b) = sum_k Pois(k; a^2/2) * P(k+1, b^2/2)`,
///
/// where `Q(k+1, y) = sum_{m<=k} Pois(m; y)` and `P = 1 - Q` are the
/// regularized incomplete gamma functions at integer order.
pub(crate) fn marcum_pair_unchecked(a: f64, b: f64) -> (f64, f64) {
    let mu = 0.5 * a * a;
    let y = 0.5 * b * b;
    if y == 0.0 {
        return (1.0, 0.0);
    }

    // Mixing weights, truncated once past the mode and negligible.
    let weights = poisson_pmf_until(mu, |k, w, sum| {
        k as f64 > mu && (w < MARCUM_TERM_RATIO * sum || w < 1e-30)
    });
    let kmax = weights.len() - 1;

    // For y > kmax every lower sum G_k is at most about one half, so the upper
    // tail 1 - G_k is cancellation free. Otherwise extend the Poisson(y) pmf
    // well past its bulk and sum the tails backwards.
    let upper = if y > kmax as f64 {
        kmax
    } else {
        kmax.max((y + 40.0 * y.sqrt() + 40.0).ceil() as usize)
    };
    let g = poisson_pmf_until(y, |m, _, _| m >= upper);

    let mut cum = 0.0;
    let mut lower_cum = Vec::with_capacity(kmax + 1);
    for gm in g.iter().take(kmax + 1) {
        cum += gm;
        lower_cum.push(cum);
    }
    let mut tails = vec![0.0; kmax + 1];
    if y > kmax as f64 {
        for k in 0..=kmax {
            tails[k] = (1.0 - lower_cum[k]).max(0.0);
        }
    } else {
        let mut t: f64 = g[kmax + 1..].iter().rev().sum();
        for k in (0..=kmax).rev() {
            tails[k] = t;
            t += g[k];
        }
    }

    let mut q = 0.0;
    let mut p = 0.0;
    for (k, w) in weights.iter().enumerate() {
        q += w * lower_cum[k];
        p += w * tails[k];
    }
    (q.clamp(0.0, 1.0), p.clamp(0.0, 1.0))
}

/// Poisson(lambda) pmf values from k = 0 until `stop(k, pmf_k, sum)` is true
/// (the stopping entry is included). Evaluated in log space so that large
/// `lambda` does not underflow the leading `e^{-lambda}`.
fn poisson_pmf_until(lambda: f64, stop: impl Fn(usize, f64, f64) -> bool) -> Vec<f64> {
    if lambda == 0.0 {
        return vec![1.0];
    }
    let ln_lambda = lambda.ln();
    let mut out = Vec::new();
    let mut ln_fact = 0.0;
    let mut sum = 0.0;
    let mut k = 0usize;
    loop {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let w = (-lambda + k as f64 * ln_lambda - ln_fact).exp();
        sum += w;
        out.push(w);
        if stop(k, w, sum) {
            break;
        }
        k += 1;
    }
    out
}

// ---------------------------------------------------------------------------
// Exponential integral E1
// ---------------------------------------------------------------------------

const E1_SWITCH: f64 = 1.0;

/// `E1(x) = integral_1^inf e^{-t x} / t dt` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    check_positive("exp_integral_e1", x)?;
    Ok(if x < E1_SWITCH {
        e1_series(x)
    } else {
        e1_continued_fraction_scaled(x) * (-x).exp()
    })
}

/// `e^x E1(x)`, finite for any `x > 0`. This is the form that appears in the
/// Rayleigh capacity formulas, where `x = c / snr` can be very large or tiny.
pub fn exp_integral_e1_scaled(x: f64) -> Result<f64> {
    check_positive("exp_integral_e1_scaled", x)?;
    Ok(e1_scaled_unchecked(x))
}

pub(crate) fn e1_scaled_unchecked(x: f64) -> f64 {
    if x < E1_SWITCH {
        e1_series(x) * x.exp()
    } else {
        e1_continued_fraction_scaled(x)
    }
}

/// Convergent series `-gamma - ln x - sum_{k>=1} (-x)^k / (k k!)`.
pub(crate) fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut fact_term = 1.0;
    let mut k = 1.0;
    loop {
        fact_term *= -x / k;
        let term = fact_term / k;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
        k += 1.0;
    }
    -EULER_GAMMA - x.ln() - sum
}

/// Continued fraction for `e^x E1(x)`, evaluated with the modified Lentz method.
pub(crate) fn e1_continued_fraction_scaled(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 100_000;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Tolerances for the adaptive Gauss-Kronrod integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Tail probability mass of the envelope below which the domain is cut.
    pub tail_cutoff_mass: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
            tail_cutoff_mass: 1e-12,
        }
    }
}

impl QuadratureSpec {
    pub fn new(
        rel_tol: f64,
        abs_tol: f64,
        max_subdivisions: usize,
        tail_cutoff_mass: f64,
    ) -> Result<Self> {
        let spec = Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
            tail_cutoff_mass,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(domain("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(domain("max_subdivisions must be at least 1"));
        }
        if !(self.tail_cutoff_mass > 0.0 && self.tail_cutoff_mass < self.rel_tol) {
            return Err(domain("tail_cutoff_mass must lie in (0, rel_tol)"));
        }
        Ok(())
    }
}

// 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut res_k = f_center * WGK[7];
    let mut res_g = f_center * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment { a, b, value, error }
}

/// Globally adaptive Gauss-Kronrod (7/15) integration over a finite interval.
/// Returns the estimate and its error bound.
pub fn integrate_interval_with_error<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<(f64, f64)> {
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(domain("integration limits must be finite"));
    }
    if a == b {
        return Ok((0.0, 0.0));
    }
    let first = gauss_kronrod_15(&f, a, b);
    if !first.value.is_finite() {
        return Err(domain("integrand is not finite on the integration domain"));
    }
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut segments = 1usize;

    while total_err > spec.abs_tol.max(spec.rel_tol * total.abs()) {
        if segments >= spec.max_subdivisions {
            return Err(Error::Convergence {
                estimate: total,
                error_bound: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval has collapsed to machine resolution.
            return Err(Error::Convergence {
                estimate: total,
                error_bound: total_err,
            });
        }
        let left = gauss_kronrod_15(&f, worst.a, mid);
        let right = gauss_kronrod_15(&f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        segments += 1;

        // Periodically resum to shed accumulated rounding in the running totals.
        if segments % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let total: f64 = heap.iter().map(|s| s.value).sum();
    if !total.is_finite() {
        return Err(domain("integrand is not finite on the integration domain"));
    }
    Ok((total, total_err))
}

/// Integral of `f` over `[a, b]`.
pub fn integrate_interval<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    integrate_interval_with_error(f, a, b, spec).map(|(v, _)| v)
}

/// Integral of `f` over `[0, inf)`.
///
/// With an envelope cdf the domain is cut at the first power of two `U` for
/// which `1 - cdf(U) < tail_cutoff_mass`, and `[0, U]` is integrated directly.
/// Without one, the substitution `x = (1 - t) / t` maps the half line onto
/// `(0, 1]`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    envelope_cdf: Option<&dyn Fn(f64) -> f64>,
    spec: &QuadratureSpec,
) -> Result<f64> {
    spec.validate()?;
    match envelope_cdf {
        Some(cdf) => {
            let upper = tail_cutoff(cdf, spec.tail_cutoff_mass)?;
            integrate_interval(f, 0.0, upper, spec)
        }
        None => integrate_interval(
            |t: f64| {
                let x = (1.0 - t) / t;
                let v = f(x);
                if v == 0.0 {
                    0.0
                } else {
                    v / (t * t)
                }
            },
            0.0,
            1.0,
            spec,
        ),
    }
}

/// Smallest power of two (at least 1) past which the envelope mass is below `mass`.
pub(crate) fn tail_cutoff(cdf: &dyn Fn(f64) -> f64, mass: f64) -> Result<f64> {
    let mut upper = 1.0_f64;
    for _ in 0..1100 {
        if 1.0 - cdf(upper) < mass {
            return Ok(upper);
        }
        upper *= 2.0;
    }
    Err(domain("envelope cdf never reaches the tail cutoff"))
}

fn check_nonneg(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(domain(format!(
            "{name}: argument must be finite and >= 0, got {x}"
        )))
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(domain(format!(
            "{name}: argument must be finite and > 0, got {x}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tight() -> QuadratureSpec {
        QuadratureSpec::new(1e-13, 1e-15, 5000, 1e-14).unwrap()
    }

    #[test]
    fn i0_at_zero_is_one() {
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
    }

    #[test]
    fn i0_at_one_matches_series_oracle() {
        // Independent oracle: direct summation of (x/2)^{2k} / (k!)^2 with
        // factorials built up from scratch.
        let mut oracle = 0.0;
        let mut fact = 1.0;
        for k in 0..30 {
            if k > 0 {
                fact *= k as f64;
            }
            oracle += 0.5_f64.powi(2 * k) / (fact * fact);
        }
        let v = bessel_i0(1.0).unwrap();
        assert_relative_eq!(v, oracle, max_relative = 1e-14);
        assert!((v - 1.266066).abs() < 1e-6);
    }

    #[test]
    fn i0_large_argument_scaled_form_is_finite() {
        let s = bessel_i0_scaled(700.0).unwrap();
        assert!(s.is_finite() && s > 0.0);
        let bound = 1.0 / (2.0 * std::f64::consts::PI * 700.0).sqrt();
        assert!((s / bound - 1.0).abs() < 1e-3);
        assert!(bessel_i0(800.0).is_err());
    }

    #[test]
    fn i0_scaled_matches_composed_form() {
        let mut x = 0.0_f64;
        while x <= 30.0 {
            let composed = (-x).exp() * bessel_i0(x).unwrap();
            assert_relative_eq!(bessel_i0_scaled(x).unwrap(), composed, max_relative = 1e-12);
            x += 0.37;
        }
        // Continuity across the series/asymptotic switch.
        let below = i0_series(19.999_999) * (-19.999_999_f64).exp();
        let above = i0e_asymptotic(19.999_999);
        assert_relative_eq!(below, above, max_relative = 1e-13);
    }

    #[test]
    fn i0_rejects_bad_input() {
        assert!(bessel_i0(f64::NAN).is_err());
        assert!(bessel_i0(f64::INFINITY).is_err());
        assert!(bessel_i0_scaled(-1.0).is_err());
    }

    fn marcum_oracle(a: f64, b: f64) -> f64 {
        // Defining integral with the scaled Bessel to keep the integrand finite.
        integrate_semi_infinite(
            |t: f64| {
                let x = b + t;
                x * (-(x - a) * (x - a) / 2.0).exp() * i0e(a * x)
            },
            None,
            &tight(),
        )
        .unwrap()
    }

    #[test]
    fn marcum_edge_values() {
        for a in [0.0, 0.5, 3.0, 7.0] {
            assert_eq!(marcum_q1(a, 0.0).unwrap(), 1.0);
        }
        for b in [0.1, 1.0, 2.5, 6.0] {
            assert_relative_eq!(
                marcum_q1(0.0, b).unwrap(),
                (-b * b / 2.0).exp(),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn marcum_matches_quadrature_oracle() {
        assert!((marcum_q1(1.0, 1.0).unwrap() - marcum_oracle(1.0, 1.0)).abs() < 1e-10);
        for &(a, b) in &[(0.3, 2.0), (3.46, 1.0), (3.46, 5.0), (6.0, 4.0), (2.0, 8.0)] {
            let q = marcum_q1(a, b).unwrap();
            assert!((q - marcum_oracle(a, b)).abs() < 1e-10, "a={a} b={b}");
        }
    }

    #[test]
    fn marcum_pair_is_complementary() {
        for &(a, b) in &[
            (0.0, 0.01),
            (3.46, 0.05),
            (3.46, 3.0),
            (5.0, 12.0),
            (1.0, 30.0),
        ] {
            let (q, p) = marcum_q1_pair(a, b).unwrap();
            assert!((q + p - 1.0).abs() < 1e-13, "a={a} b={b}: {q} + {p}");
        }
        // Small complement keeps relative precision: 1 - e^{-b^2/2} at a = 0.
        let (_, p) = marcum_q1_pair(0.0, 1e-4).unwrap();
        assert_relative_eq!(p, -(-0.5e-8_f64).exp_m1(), max_relative = 1e-12);
    }

    #[test]
    fn marcum_is_bounded_and_nonincreasing_in_b() {
        for a in [0.0, 0.7, 2.0, 3.46, 6.0] {
            let mut prev = 1.0;
            for i in 0..200 {
                let b = i as f64 * 0.06;
                let q = marcum_q1(a, b).unwrap();
                assert!((0.0..=1.0).contains(&q));
                assert!(q <= prev + 1e-15, "a={a} b={b}");
                prev = q;
            }
        }
    }

    #[test]
    fn marcum_rejects_negative() {
        assert!(marcum_q1(-1.0, 1.0).is_err());
        assert!(marcum_q1(1.0, f64::NAN).is_err());
    }

    fn e1_oracle(x: f64) -> f64 {
        integrate_semi_infinite(|s: f64| (-(1.0 + s) * x).exp() / (1.0 + s), None, &tight())
            .unwrap()
    }

    #[test]
    fn e1_at_one_matches_quadrature() {
        let v = exp_integral_e1(1.0).unwrap();
        assert_relative_eq!(v, e1_oracle(1.0), max_relative = 1e-12);
        assert!((v - 0.2193839).abs() < 1e-7);
    }

    #[test]
    fn e1_upper_bound_for_large_x() {
        let x = 50.0;
        assert!(exp_integral_e1(x).unwrap() < (-x).exp() / x);
    }

    #[test]
    fn e1_branches_agree_at_switchover() {
        for x in [0.5, 0.8, 1.0, 1.3, 2.0] {
            let series = e1_series(x) * x.exp();
            let cf = e1_continued_fraction_scaled(x);
            assert_relative_eq!(series, cf, max_relative = 1e-11);
        }
        for x in [0.1, 1.0, 10.0] {
            assert_relative_eq!(
                exp_integral_e1_scaled(x).unwrap(),
                x.exp() * e1_oracle(x),
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn e1_log_grid_against_quadrature_and_monotone() {
        let mut prev = f64::INFINITY;
        for i in 0..=40 {
            let x = 1e-3 * (5e4_f64).powf(i as f64 / 40.0);
            let v = exp_integral_e1(x).unwrap();
            assert_relative_eq!(v, e1_oracle(x), max_relative = 1e-10);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn e1_rejects_nonpositive() {
        assert!(exp_integral_e1(0.0).is_err());
        assert!(exp_integral_e1(-2.0).is_err());
        assert!(exp_integral_e1_scaled(f64::NAN).is_err());
    }

    #[test]
    fn semi_infinite_closed_forms() {
        let spec = QuadratureSpec::default();
        let exp_cdf = |x: f64| 1.0 - (-x).exp();
        let env: &dyn Fn(f64) -> f64 = &exp_cdf;
        for envelope in [None, Some(env)] {
            let m0 = integrate_semi_infinite(|x: f64| (-x).exp(), envelope, &spec).unwrap();
            let m1 = integrate_semi_infinite(|x: f64| x * (-x).exp(), envelope, &spec).unwrap();
            assert!((m0 - 1.0).abs() < 1e-9);
            assert!((m1 - 1.0).abs() < 1e-9);
            let cap =
                integrate_semi_infinite(|x: f64| (1.0 + x).log2() * (-x).exp(), envelope, &spec)
                    .unwrap();
            let closed =
                std::f64::consts::E * exp_integral_e1(1.0).unwrap() / std::f64::consts::LN_2;
            assert_relative_eq!(cap, closed, max_relative = 1e-9);
        }
    }

    #[test]
    fn quadrature_is_deterministic() {
        let spec = QuadratureSpec::default();
        let f = |x: f64| (1.0 + 1e7 * x).ln() * (-x).exp();
        let a = integrate_semi_infinite(f, None, &spec).unwrap();
        let b = integrate_semi_infinite(f, None, &spec).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn quadrature_reports_non_convergence() {
        let spec = QuadratureSpec::new(1e-12, 1e-14, 3, 1e-13).unwrap();
        let err = integrate_interval(|x: f64| (1.0 / x.max(1e-300)).sqrt().sin(), 0.0, 1.0, &spec)
            .unwrap_err();
        match err {
            Error::Convergence {
                estimate,
                error_bound,
            } => {
                assert!(estimate.is_finite());
                assert!(error_bound > 0.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn quadrature_spec_validation() {
        assert!(QuadratureSpec::new(0.0, 1e-12, 10, 1e-13).is_err());
        assert!(QuadratureSpec::new(1e-9, 1e-12, 0, 1e-13).is_err());
        assert!(QuadratureSpec::new(1e-9, 1e-12, 10, 1e-8).is_err());
        QuadratureSpec::default().validate().unwrap();
    }
}
