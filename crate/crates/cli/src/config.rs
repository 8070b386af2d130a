//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! n_users = 7
//! tx_power = "1 W"          # units: W, mW or dBm
//! noise_power = "-96 dBm"
//! eta = 0.5
//! omega = [1e-5, 2e-5, 3e-5, 4e-5, 5e-5, 6e-5, 7e-5]
//!
//! [fading]
//! model = "ricean"          # or "rayleigh"
//! k_factor = 6.0
//! ```
//!
//! Instead of `omega`, a `[link_budget]` table may derive the mean gains from
//! distances (see [`crate::linkbudget`]):
//!
//! ```toml
//! [link_budget]
//! frequency_hz = 915e6
//! distances_m = [2.27, 3.0, 4.6]
//! path_loss_exponent = 2.76
//! # ref_loss_db_at_1m = 31.67   (default: free space at frequency_hz)
//! # tx_antenna_gain_dbi = 0.0
//! # rx_antenna_gain_dbi = 0.0
//! ```
//!
//! Exactly one of the two must be present.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use swipt_core::channel::{dbm_to_watts, FadingParams, Scenario};
use toml::Spanned;

use crate::error::ConfigError;
use crate::linkbudget::LinkBudget;

/// Environment variable naming the directory searched for relative config paths.
pub const CONFIG_DIR_ENV: &str = "SWIPT_CONFIG_DIR";

/// File name used when no config path is given.
pub const DEFAULT_CONFIG_NAME: &str = "scenario.toml";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n_users: Spanned<usize>,
    tx_power: Spanned<String>,
    noise_power: Spanned<String>,
    eta: Spanned<f64>,
    fading: Spanned<RawFading>,
    omega: Option<Spanned<Vec<f64>>>,
    link_budget: Option<Spanned<RawLinkBudget>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFading {
    model: Spanned<String>,
    k_factor: Option<Spanned<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLinkBudget {
    frequency_hz: Spanned<f64>,
    distances_m: Spanned<Vec<f64>>,
    path_loss_exponent: Spanned<f64>,
    ref_loss_db_at_1m: Option<f64>,
    #[serde(default)]
    tx_antenna_gain_dbi: f64,
    #[serde(default)]
    rx_antenna_gain_dbi: f64,
}

struct Locator<'a> {
    origin: &'a str,
    text: &'a str,
}

impl Locator<'_> {
    fn line_of(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())]
            .bytes()
            .filter(|&b| b == b'\n')
            .count()
            + 1
    }

    fn err<T>(&self, span: &Spanned<T>, field: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            origin: self.origin.to_string(),
            line: Some(self.line_of(span.span().start)),
            field: field.to_string(),
            message: message.into(),
        }
    }
}

/// Parses a power such as `"1 W"`, `"30 mW"` or `"-96 dBm"` into watts.
pub fn parse_power(text: &str) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
        .ok_or_else(|| format!("`{text}` has no unit (expected W, mW or dBm)"))?;
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("`{}` is not a number", num.trim()))?;
    if !value.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    let watts = match unit.trim() {
        "W" => value,
        "mW" => value * 1e-3,
        "dBm" => dbm_to_watts(value),
        other => {
            return Err(format!(
                "unknown power unit `{other}` (expected W, mW or dBm)"
            ))
        }
    };
    if watts <= 0.0 {
        return Err(format!("power must be positive, got `{text}`"));
    }
    Ok(watts)
}

/// Parses scenario text. `origin` names the source in error messages.
pub fn parse_config_str(text: &str, origin: &str) -> Result<Scenario, ConfigError> {
    let loc = Locator { origin, text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        origin: origin.to_string(),
        line: e.span().map(|s| loc.line_of(s.start)),
        field: "syntax".into(),
        message: e.message().trim().to_string(),
    })?;

    let n = *raw.n_users.get_ref();
    if n == 0 {
        return Err(loc.err(&raw.n_users, "n_users", "must be at least 1"));
    }
    let tx =
        parse_power(raw.tx_power.get_ref()).map_err(|m| loc.err(&raw.tx_power, "tx_power", m))?;
    let noise = parse_power(raw.noise_power.get_ref())
        .map_err(|m| loc.err(&raw.noise_power, "noise_power", m))?;
    let eta = *raw.eta.get_ref();
    if !(0.0..=1.0).contains(&eta) {
        return Err(loc.err(&raw.eta, "eta", format!("must lie in [0, 1], got {eta}")));
    }

    let fading = raw.fading.get_ref();
    let k = match fading.model.get_ref().to_ascii_lowercase().as_str() {
        "rayleigh" => match &fading.k_factor {
            Some(k) if *k.get_ref() != 0.0 => {
                return Err(loc.err(k, "fading.k_factor", "must be 0 (or absent) for rayleigh"))
            }
            _ => 0.0,
        },
        "ricean" | "rician" => {
            let k = fading
                .k_factor
                .as_ref()
                .ok_or_else(|| loc.err(&raw.fading, "fading.k_factor", "required for ricean"))?;
            let v = *k.get_ref();
            if !(v.is_finite() && v >= 0.0) {
                return Err(loc.err(k, "fading.k_factor", format!("must be >= 0, got {v}")));
            }
            v
        }
        other => {
            return Err(loc.err(
                &fading.model,
                "fading.model",
                format!("unknown model `{other}` (expected rayleigh or ricean)"),
            ))
        }
    };

    let omegas = match (&raw.omega, &raw.link_budget) {
        (Some(_), Some(lb)) => {
            return Err(loc.err(
                lb,
                "link_budget",
                "give either omega or link_budget, not both",
            ))
        }
        (None, None) => {
            return Err(ConfigError {
                origin: origin.to_string(),
                line: None,
                field: "omega".into(),
                message: "missing: give an omega list or a [link_budget] table".into(),
            })
        }
        (Some(om), None) => {
            if om.get_ref().len() != n {
                return Err(loc.err(
                    om,
                    "omega",
                    format!("has {} entries, expected n_users = {n}", om.get_ref().len()),
                ));
            }
            if let Some(bad) = om.get_ref().iter().find(|w| !(w.is_finite() && **w > 0.0)) {
                return Err(loc.err(om, "omega", format!("entries must be positive, got {bad}")));
            }
            om.get_ref().clone()
        }
        (None, Some(lb_span)) => {
            let lb = lb_span.get_ref();
            let d = &lb.distances_m;
            if d.get_ref().len() != n {
                return Err(loc.err(
                    d,
                    "link_budget.distances_m",
                    format!("has {} entries, expected n_users = {n}", d.get_ref().len()),
                ));
            }
            let budget = LinkBudget {
                frequency_hz: *lb.frequency_hz.get_ref(),
                path_loss_exponent: *lb.path_loss_exponent.get_ref(),
                ref_loss_db_at_1m: lb.ref_loss_db_at_1m,
                tx_antenna_gain_dbi: lb.tx_antenna_gain_dbi,
                rx_antenna_gain_dbi: lb.rx_antenna_gain_dbi,
            };
            d.get_ref()
                .iter()
                .map(|&x| budget.omega(x))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| loc.err(lb_span, "link_budget", e.to_string()))?
        }
    };

    let users = omegas
        .iter()
        .map(|&w| FadingParams::new(w, k))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| loc.err(&raw.fading, "fading", e.to_string()))?;
    Scenario::new(users, tx, noise, eta).map_err(|e| ConfigError {
        origin: origin.to_string(),
        line: None,
        field: "scenario".into(),
        message: e.to_string(),
    })
}

/// Reads and parses a scenario file.
pub fn parse_config(path: &Path) -> Result<Scenario, ConfigError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        origin: origin.clone(),
        line: None,
        field: "file".into(),
        message: e.to_string(),
    })?;
    parse_config_str(&text, &origin)
}

/// Resolves a config path: as given if it exists, else relative to
/// `config_dir`. With no path, `DEFAULT_CONFIG_NAME` in `config_dir`.
pub fn resolve_config_path(path: Option<&Path>, config_dir: Option<&Path>) -> PathBuf {
    match (path, config_dir) {
        (Some(p), Some(dir)) if !p.exists() && p.is_relative() => dir.join(p),
        (Some(p), _) => p.to_path_buf(),
        (None, Some(dir)) => dir.join(DEFAULT_CONFIG_NAME),
        (None, None) => PathBuf::from(DEFAULT_CONFIG_NAME),
    }
}

/// Writes a scenario back as config text with an explicit omega list.
/// Powers are emitted in watts with round-trip precision.
///
/// Scenarios whose users carry different K factors cannot be expressed in
/// the single `[fading]` table; the first user's K is written.
pub fn emit_config(scenario: &Scenario) -> String {
    let k = scenario.users.first().map_or(0.0, |u| u.k_factor);
    let omegas: Vec<String> = scenario
        .users
        .iter()
        .map(|u| format!("{:?}", u.omega))
        .collect();
    let fading = if k == 0.0 {
        "model = \"rayleigh\"\n".to_string()
    } else {
        format!("model = \"ricean\"\nk_factor = {k:?}\n")
    };
    format!(
        "n_users = {}\ntx_power = \"{:?} W\"\nnoise_power = \"{:?} W\"\neta = {:?}\nomega = [{}]\n\n[fading]\n{}",
        scenario.n_users(),
        scenario.tx_power_w,
        scenario.noise_power_w,
        scenario.eta,
        omegas.join(", "),
        fading
    )
}
