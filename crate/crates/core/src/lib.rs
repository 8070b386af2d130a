//! Rate-energy analysis and simulation of downlink multi-user scheduling with
//! simultaneous wireless information and power transfer.
//!
//! In every slot one user decodes information while the others harvest the
//! RF energy of the same transmission. Three schedulers are covered: round
//! robin, order-based N-SNR (schedule the user whose normalized SNR has
//! ascending rank `j`) and order-based equal throughput (among users whose
//! rank lies in an allowed set, schedule the one with the lowest moving
//! throughput).
//!
//! - [`specfun`]: Bessel I0, Marcum Q1, E1 and adaptive quadrature.
//! - [`channel`]: Ricean/Rayleigh power-gain model and sampler.
//! - [`orderstats`]: order statistics of the normalized gains.
//! - [`analytic`]: closed-form and quadrature rate-energy points, ET
//!   probabilities and feasibility.
//! - [`sim`]: slot-level Monte Carlo engine.

pub mod analytic;
pub mod channel;
pub mod error;
pub mod orderstats;
pub mod sim;
pub mod specfun;

pub use error::{Error, Result};
