use swipt_core::channel::{cdf_gain, FadingParams, GainSampler};

const DRAWS: usize = 1_000_000;

fn draws(params: &FadingParams, seed: u64) -> Vec<f64> {
    let mut s = GainSampler::new(seed);
    (0..DRAWS).map(|_| s.sample(params)).collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[test]
fn ricean_unit_mean() {
    let xs = draws(&FadingParams::new(1.0, 6.0).unwrap(), 11);
    let (mean, var) = mean_var(&xs);
    assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    let se = (var / DRAWS as f64).sqrt();
    assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn ricean_quartiles_follow_the_cdf() {
    let params = FadingParams::new(2.0, 6.0).unwrap();
    let mut xs = draws(&params, 12);
    xs.sort_by(f64::total_cmp);
    for q in [0.25, 0.5, 0.75] {
        let x = xs[(q * DRAWS as f64) as usize];
        let f = cdf_gain(&params, x).unwrap();
        assert!((f - q).abs() < 0.005, "q {q}: cdf({x}) = {f}");
    }
}

#[test]
fn exponential_median() {
    let params = FadingParams::rayleigh(1.0).unwrap();
    let xs = draws(&params, 13);
    let below = xs.iter().filter(|&&x| x <= std::f64::consts::LN_2).count();
    let frac = below as f64 / DRAWS as f64;
    assert!((frac - 0.5).abs() < 0.005, "{frac}");
}

#[test]
fn exponential_moments() {
    let omega = 3.0;
    let xs = draws(&FadingParams::rayleigh(omega).unwrap(), 14);
    let (mean, var) = mean_var(&xs);
    let n = DRAWS as f64;
    assert!((mean - omega).abs() < 3.0 * (var / n).sqrt(), "mean {mean}");
    // Var of the sample variance for an exponential: (mu4 - sigma^4) / n = 8 omega^4 / n.
    let se_var = (8.0 * omega.powi(4) / n).sqrt();
    assert!((var - omega * omega).abs() < 3.0 * se_var, "var {var}");
}

#[test]
fn distinct_streams_differ() {
    let p = FadingParams::new(1.0, 2.0).unwrap();
    let mut a = GainSampler::for_stream(5, 0);
    let mut b = GainSampler::for_stream(5, 1);
    let va: Vec<f64> = (0..8).map(|_| a.sample(&p)).collect();
    let vb: Vec<f64> = (0..8).map(|_| b.sample(&p)).collect();
    assert_ne!(va, vb);
    let mut a2 = GainSampler::for_stream(5, 0);
    let va2: Vec<f64> = (0..8).map(|_| a2.sample(&p)).collect();
    assert_eq!(va, va2);
}
