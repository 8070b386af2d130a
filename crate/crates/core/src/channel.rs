//! Block-fading channel model.
//!
//! The power gain `h` of each link is non-central chi-square (Ricean amplitude)
//! with mean `omega` and Ricean factor `K`; `K = 0` is exactly the exponential
//! (Rayleigh amplitude) case. The unit-mean normalized gain `X = h / omega`
//! has a distribution that depends on `K` only, which is what the
//! order-statistics code ranks.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::specfun::{i0e, marcum_pair_unchecked};

/// Per-user fading statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingParams {
    /// Mean channel power gain (linear).
    pub omega: f64,
    /// Ricean K factor (linear). Zero selects Rayleigh fading.
    pub k_factor: f64,
}

impl FadingParams {
    pub fn new(omega: f64, k_factor: f64) -> Result<Self> {
        let p = Self { omega, k_factor };
        p.validate()?;
        Ok(p)
    }

    pub fn rayleigh(omega: f64) -> Result<Self> {
        Self::new(omega, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "omega must be finite and positive, got {}",
                self.omega
            )));
        }
        if !(self.k_factor.is_finite() && self.k_factor >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "k_factor must be finite and >= 0, got {}",
                self.k_factor
            )));
        }
        Ok(())
    }

    pub fn is_rayleigh(&self) -> bool {
        self.k_factor == 0.0
    }

    /// Rate parameter `1 / omega` of the Rayleigh power gain.
    pub fn lambda(&self) -> f64 {
        1.0 / self.omega
    }
}

/// System constants plus per-user channel statistics, all in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub users: Vec<FadingParams>,
    pub tx_power_w: f64,
    pub noise_power_w: f64,
    /// RF-to-DC conversion efficiency.
    pub eta: f64,
}

impl Scenario {
    pub fn new(
        users: Vec<FadingParams>,
        tx_power_w: f64,
        noise_power_w: f64,
        eta: f64,
    ) -> Result<Self> {
        let s = Self {
            users,
            tx_power_w,
            noise_power_w,
            eta,
        };
        s.validate()?;
        Ok(s)
    }

    /// Users with the given mean gains sharing one Ricean factor.
    pub fn with_omegas(
        omegas: &[f64],
        k_factor: f64,
        tx_power_w: f64,
        noise_power_w: f64,
        eta: f64,
    ) -> Result<Self> {
        let users = omegas
            .iter()
            .map(|&o| FadingParams::new(o, k_factor))
            .collect::<Result<Vec<_>>>()?;
        Self::new(users, tx_power_w, noise_power_w, eta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::InvalidConfig(
                "scenario needs at least one user".into(),
            ));
        }
        if !(self.tx_power_w.is_finite() && self.tx_power_w > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "transmit power must be positive, got {} W",
                self.tx_power_w
            )));
        }
        if !(self.noise_power_w.is_finite() && self.noise_power_w > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise power must be positive, got {} W",
                self.noise_power_w
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidConfig(format!(
                "eta must lie in [0, 1], got {}",
                self.eta
            )));
        }
        for (n, u) in self.users.iter().enumerate() {
            u.validate()
                .map_err(|e| Error::InvalidConfig(format!("user {}: {e}", n + 1)))?;
            let snr = self.average_snr(n);
            if !(snr.is_finite() && snr > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "user {}: average SNR {snr} is not finite and positive",
                    n + 1
                )));
            }
        }
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Average SNR `P omega_n / sigma^2` of user `n` (0-based).
    pub fn average_snr(&self, n: usize) -> f64 {
        self.tx_power_w * self.users[n].omega / self.noise_power_w
    }

    /// The common Ricean factor, required by the order-based analytics where
    /// the normalized gains must be identically distributed.
    pub fn shared_k(&self) -> Result<f64> {
        let k = self.users[0].k_factor;
        if self.users.iter().all(|u| u.k_factor == k) {
            Ok(k)
        } else {
            Err(Error::InvalidConfig(
                "order-based analysis requires every user to share one Ricean K factor".into(),
            ))
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

fn check_x(x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(domain(format!(
            "channel gain must be finite and >= 0, got {x}"
        )))
    }
}

/// Density of the power gain `h`.
pub fn pdf_gain(params: &FadingParams, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(params.lambda() * unit_pdf(params.k_factor, x * params.lambda()))
}

/// Distribution function of the power gain `h`.
pub fn cdf_gain(params: &FadingParams, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(unit_cdf_pair(params.k_factor, x * params.lambda()).0)
}

/// Density of the unit-mean normalized gain `X = h / omega`.
pub fn normalized_pdf(k_factor: f64, x: f64) -> Result<f64> {
    check_x(x)?;
    check_k(k_factor)?;
    Ok(unit_pdf(k_factor, x))
}

/// Distribution function of the unit-mean normalized gain.
pub fn normalized_cdf(k_factor: f64, x: f64) -> Result<f64> {
    check_x(x)?;
    check_k(k_factor)?;
    Ok(unit_cdf_pair(k_factor, x).0)
}

fn check_k(k: f64) -> Result<()> {
    if k.is_finite() && k >= 0.0 {
        Ok(())
    } else {
        Err(domain(format!("k_factor must be finite and >= 0, got {k}")))
    }
}

/// Unit-mean density, `(K+1) e^{-K-(K+1)x} I0(2 sqrt(K(K+1)x))`.
///
/// Evaluated with the scaled Bessel function: with `z = 2 sqrt(K(K+1)x)` the
/// exponent `-K - (K+1)x + z` is `-(sqrt(K) - sqrt((K+1)x))^2 <= 0`.
pub(crate) fn unit_pdf(k: f64, x: f64) -> f64 {
    if k == 0.0 {
        return (-x).exp();
    }
    let kp1 = k + 1.0;
    if x == 0.0 {
        return kp1 * (-k).exp();
    }
    let z = 2.0 * (k * kp1 * x).sqrt();
    kp1 * (-k - kp1 * x + z).exp() * i0e(z)
}

/// `(F_X(x), 1 - F_X(x))` for the unit-mean normalized gain, both accurate
/// in the relative sense.
pub(crate) fn unit_cdf_pair(k: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if k == 0.0 {
        return (-(-x).exp_m1(), (-x).exp());
    }
    let (q, p) = marcum_pair_unchecked((2.0 * k).sqrt(), (2.0 * (k + 1.0) * x).sqrt());
    (p, q)
}

/// Seeded generator of instantaneous power gains for one link.
#[derive(Debug, Clone)]
pub struct GainSampler {
    rng: ChaCha8Rng,
}

impl GainSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `stream` of the master `seed`.
    ///
    /// Streams share the ChaCha key derived from `seed` and differ in the
    /// ChaCha stream id, so user `n` always sees the same sequence no matter
    /// how many other users are simulated or in which order they are drawn.
    pub fn for_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn sample(&mut self, params: &FadingParams) -> f64 {
        sample_gain(params, &mut self.rng)
    }
}

/// One draw of the power gain `h = |c|^2`, with `c` circular complex Gaussian
/// of mean amplitude `sqrt(K omega / (K+1))` and scatter power `omega / (K+1)`.
pub fn sample_gain<R: Rng + ?Sized>(params: &FadingParams, rng: &mut R) -> f64 {
    if params.k_factor == 0.0 {
        let e: f64 = Exp1.sample(rng);
        return params.omega * e;
    }
    let kp1 = params.k_factor + 1.0;
    let los = (params.k_factor * params.omega / kp1).sqrt();
    let sigma = (0.5 * params.omega / kp1).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    let re = los + sigma * re;
    let im = sigma * im;
    re * re + im * im
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{bessel_i0, integrate_interval, integrate_semi_infinite, QuadratureSpec};
    use approx::assert_relative_eq;

    fn integrate_pdf(p: FadingParams, weight: impl Fn(f64) -> f64) -> f64 {
        let cdf = move |x: f64| cdf_gain(&p, x).unwrap();
        integrate_semi_infinite(
            |x: f64| weight(x) * pdf_gain(&p, x).unwrap(),
            Some(&cdf),
            &QuadratureSpec::default(),
        )
        .unwrap()
    }

    #[test]
    fn rayleigh_density_at_origin_is_lambda() {
        let p = FadingParams::rayleigh(2.0).unwrap();
        assert_eq!(pdf_gain(&p, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn ricean_formula_with_k_zero_matches_exponential() {
        // Unscaled textbook form with K -> 0: lambda e^{-lambda x} I0(0).
        let p = FadingParams::rayleigh(1.7).unwrap();
        for x in [0.1, 1.0, 5.0] {
            let k = 0.0_f64;
            let textbook = (k + 1.0) / p.omega
                * (-k - (k + 1.0) * x / p.omega).exp()
                * bessel_i0(2.0 * (k * (k + 1.0) * x / p.omega).sqrt()).unwrap();
            assert!((pdf_gain(&p, x).unwrap() - textbook).abs() < 1e-12);
        }
    }

    #[test]
    fn ricean_scaled_pdf_matches_textbook_form() {
        let p = FadingParams::new(3.0, 6.0).unwrap();
        for x in [0.0, 0.05, 0.7, 2.0, 6.5] {
            let k = p.k_factor;
            let textbook = (k + 1.0) / p.omega
                * (-k - (k + 1.0) * x / p.omega).exp()
                * bessel_i0(2.0 * (k * (k + 1.0) * x / p.omega).sqrt()).unwrap();
            assert_relative_eq!(pdf_gain(&p, x).unwrap(), textbook, max_relative = 1e-12);
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        for (omega, k) in [(1.0, 0.0), (1.0, 6.0), (3.0, 6.0)] {
            let p = FadingParams::new(omega, k).unwrap();
            let mass = integrate_pdf(p, |_| 1.0);
            assert!((mass - 1.0).abs() <= 1e-9, "omega={omega} k={k}: {mass}");
        }
    }

    #[test]
    fn cdf_limits() {
        let p = FadingParams::new(1.0, 6.0).unwrap();
        assert_eq!(cdf_gain(&p, 0.0).unwrap(), 0.0);
        assert!((cdf_gain(&p, 50.0 * p.omega).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cdf_matches_integrated_density() {
        let p = FadingParams::new(1.0, 6.0).unwrap();
        let spec = QuadratureSpec::default();
        let area = integrate_interval(|x: f64| pdf_gain(&p, x).unwrap(), 0.0, 1.0, &spec).unwrap();
        assert!((cdf_gain(&p, 1.0).unwrap() - area).abs() < 1e-9);
    }

    #[test]
    fn cdf_is_nondecreasing_and_derivative_matches_pdf() {
        for (omega, k) in [(1.0, 0.0), (2.0, 6.0), (0.5, 2.0)] {
            let p = FadingParams::new(omega, k).unwrap();
            let mut prev = 0.0;
            for i in 0..400 {
                let x = i as f64 * 0.02 * omega;
                let c = cdf_gain(&p, x).unwrap();
                assert!(c >= prev - 1e-15);
                prev = c;
                if i > 0 {
                    let h = 1e-5 * omega;
                    let d =
                        (cdf_gain(&p, x + h).unwrap() - cdf_gain(&p, x - h).unwrap()) / (2.0 * h);
                    assert!((d - pdf_gain(&p, x).unwrap()).abs() < 1e-6, "x={x}");
                }
            }
        }
    }

    #[test]
    fn normalized_rayleigh_is_unit_exponential() {
        let x = 0.7_f64;
        assert_relative_eq!(
            normalized_pdf(0.0, x).unwrap(),
            (-x).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            normalized_cdf(0.0, x).unwrap(),
            1.0 - (-x).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn normalized_equals_unit_omega() {
        let p = FadingParams::new(1.0, 6.0).unwrap();
        for x in [0.2, 1.0, 3.3] {
            assert_eq!(normalized_pdf(6.0, x).unwrap(), pdf_gain(&p, x).unwrap());
            assert_eq!(normalized_cdf(6.0, x).unwrap(), cdf_gain(&p, x).unwrap());
        }
    }

    #[test]
    fn normalized_mean_is_one() {
        for k in [0.0, 2.0, 6.0] {
            let p = FadingParams::new(1.0, k).unwrap();
            let mean = integrate_pdf(p, |x| x);
            assert!((mean - 1.0).abs() <= 1e-8, "k={k}: {mean}");
        }
    }

    #[test]
    fn ricean_density_nonnegative() {
        for i in 0..=2000 {
            let x = i as f64 * 0.01;
            assert!(normalized_pdf(6.0, x).unwrap() >= 0.0);
        }
    }

    #[test]
    fn negative_gain_rejected() {
        let p = FadingParams::new(1.0, 6.0).unwrap();
        assert!(pdf_gain(&p, -0.1).is_err());
        assert!(cdf_gain(&p, -0.1).is_err());
        assert!(normalized_cdf(-1.0, 0.5).is_err());
    }

    #[test]
    fn params_and_scenario_validation() {
        assert!(FadingParams::new(0.0, 1.0).is_err());
        assert!(FadingParams::new(1.0, -1.0).is_err());
        assert!(Scenario::with_omegas(&[], 0.0, 1.0, 1.0, 0.5).is_err());
        assert!(Scenario::with_omegas(&[1.0], 0.0, 0.0, 1.0, 0.5).is_err());
        assert!(Scenario::with_omegas(&[1.0], 0.0, 1.0, -1.0, 0.5).is_err());
        assert!(Scenario::with_omegas(&[1.0], 0.0, 1.0, 1.0, 1.5).is_err());
        let mixed = Scenario::new(
            vec![
                FadingParams::new(1.0, 0.0).unwrap(),
                FadingParams::new(1.0, 3.0).unwrap(),
            ],
            1.0,
            1.0,
            0.5,
        )
        .unwrap();
        assert!(mixed.shared_k().is_err());
    }

    #[test]
    fn dbm_conversion() {
        assert_relative_eq!(dbm_to_watts(-96.0), 10f64.powf(-12.6), max_relative = 1e-15);
        assert_relative_eq!(dbm_to_watts(30.0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(
            watts_to_dbm(dbm_to_watts(-96.0)),
            -96.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn sampler_streams_are_reproducible() {
        let p = FadingParams::new(1.0, 6.0).unwrap();
        let mut a = GainSampler::for_stream(42, 3);
        let mut b = GainSampler::for_stream(42, 3);
        let mut c = GainSampler::for_stream(42, 4);
        let xs: Vec<u64> = (0..100).map(|_| a.sample(&p).to_bits()).collect();
        let ys: Vec<u64> = (0..100).map(|_| b.sample(&p).to_bits()).collect();
        let zs: Vec<u64> = (0..100).map(|_| c.sample(&p).to_bits()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
    }
}
