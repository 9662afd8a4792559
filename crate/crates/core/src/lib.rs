//! Achievable rates, outage probabilities and average throughput for the
//! block-Markov decode-and-forward relay channel under single-layer and
//! two-layer broadcast transmission.
//!
//! The library pairs every closed form with an independent route: analytic
//! expressions are checked against adaptive quadrature and a seeded,
//! stream-splittable Monte Carlo fading simulator. All powers and gains are
//! linear, all rates are nats/channel-use; dB conversion belongs to callers.

pub mod channel;
pub mod error;
pub mod montecarlo;
pub mod optim;
pub mod quad;
pub mod single_layer;
pub mod special;
pub mod stream;
pub mod sweeps;
pub mod two_layer;

pub use error::{Error, Result};

/// dB to linear power: 10^(x/10).
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power to dB: 10 log10(x).
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
