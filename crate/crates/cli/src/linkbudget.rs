//! Log-distance path loss.
//!
//! `PL(d) = PL(d0) + 10 n log10(d / d0)` with `d0 = 1 m`, and the mean channel
//! power gain is `10^{-(PL(d) - G_tx - G_rx) / 10}`.

use crate::error::{CliError, CliResult};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Free-space loss at 1 m, `20 log10(4 pi f / c)` in dB.
pub fn free_space_ref_loss_db(frequency_hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * frequency_hz / SPEED_OF_LIGHT).log10()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub frequency_hz: f64,
    pub path_loss_exponent: f64,
    /// Loss at 1 m; free space at `frequency_hz` when `None`.
    pub ref_loss_db_at_1m: Option<f64>,
    pub tx_antenna_gain_dbi: f64,
    pub rx_antenna_gain_dbi: f64,
}

impl LinkBudget {
    pub fn new(frequency_hz: f64, path_loss_exponent: f64) -> Self {
        Self {
            frequency_hz,
            path_loss_exponent,
            ref_loss_db_at_1m: None,
            tx_antenna_gain_dbi: 0.0,
            rx_antenna_gain_dbi: 0.0,
        }
    }

    pub fn ref_loss_db(&self) -> f64 {
        self.ref_loss_db_at_1m
            .unwrap_or_else(|| free_space_ref_loss_db(self.frequency_hz))
    }

    /// Path loss minus antenna gains at `distance_m`, in dB.
    pub fn net_loss_db(&self, distance_m: f64) -> CliResult<f64> {
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return Err(CliError::Invalid(format!(
                "frequency must be positive, got {} Hz",
                self.frequency_hz
            )));
        }
        if !(distance_m.is_finite() && distance_m > 0.0) {
            return Err(CliError::Invalid(format!(
                "distance must be positive, got {distance_m} m"
            )));
        }
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent > 0.0) {
            return Err(CliError::Invalid(format!(
                "path loss exponent must be positive, got {}",
                self.path_loss_exponent
            )));
        }
        Ok(
            self.ref_loss_db() + 10.0 * self.path_loss_exponent * distance_m.log10()
                - self.tx_antenna_gain_dbi
                - self.rx_antenna_gain_dbi,
        )
    }

    /// Linear mean channel power gain at `distance_m`.
    pub fn omega(&self, distance_m: f64) -> CliResult<f64> {
        Ok(10f64.powf(-self.net_loss_db(distance_m)? / 10.0))
    }
}

/// Convenience form of [`LinkBudget::omega`].
pub fn link_budget_omega(
    frequency_hz: f64,
    distance_m: f64,
    path_loss_exponent: f64,
    ref_loss_db: Option<f64>,
    tx_antenna_gain_dbi: f64,
    rx_antenna_gain_dbi: f64,
) -> CliResult<f64> {
    LinkBudget {
        frequency_hz,
        path_loss_exponent,
        ref_loss_db_at_1m: ref_loss_db,
        tx_antenna_gain_dbi,
        rx_antenna_gain_dbi,
    }
    .omega(distance_m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_space_at_915_mhz() {
        // 20 log10(4 pi 915e6 / c) = 31.67 dB.
        assert!((free_space_ref_loss_db(915e6) - 31.67).abs() < 0.01);
    }

    #[test]
    fn doubling_distance() {
        for n in [2.0, 2.76] {
            let lb = LinkBudget::new(915e6, n);
            let ratio = lb.omega(3.0).unwrap() / lb.omega(6.0).unwrap();
            assert!((ratio - 2f64.powf(n)).abs() < 1e-9 * ratio);
        }
    }

    #[test]
    fn gains_add_in_db() {
        let a = link_budget_omega(915e6, 3.0, 2.76, None, 0.0, 0.0).unwrap();
        let b = link_budget_omega(915e6, 3.0, 2.76, None, 10.0, 2.0).unwrap();
        assert!((b / a - 10f64.powf(1.2)).abs() < 1e-9);
    }

    #[test]
    fn reference_loss_override() {
        let a = link_budget_omega(915e6, 1.0, 2.0, Some(40.0), 0.0, 0.0).unwrap();
        assert!((a - 1e-4).abs() < 1e-16);
    }

    #[test]
    fn rejects_bad_distance() {
        assert!(link_budget_omega(915e6, 0.0, 2.0, None, 0.0, 0.0).is_err());
        assert!(link_budget_omega(915e6, -1.0, 2.0, None, 0.0, 0.0).is_err());
        assert!(link_budget_omega(0.0, 1.0, 2.0, None, 0.0, 0.0).is_err());
    }
}
