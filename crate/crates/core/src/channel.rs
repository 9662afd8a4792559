//! Static channel model and per-realization mutual informations.
//!
//! The source talks to the destination through a Rayleigh-faded link with
//! power `p_s`; a collocated relay hears the source through a fixed gain `q`
//! and transmits towards the destination with power `p_r` over its own
//! Rayleigh link. Noise variances are 1, powers are linear, rates are
//! nats/channel-use. Everything here is a deterministic function of the
//! channel parameters and one fading realization; randomness only enters
//! through [`sample_fading`].

use crate::error::{Error, Result};
use crate::stream::CounterRng;

/// Static scenario: source power, relay power, source-relay collocation gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub p_s: f64,
    pub p_r: f64,
    pub q: f64,
}

impl ChannelParams {
    pub fn new(p_s: f64, p_r: f64, q: f64) -> Result<Self> {
        if !(p_s.is_finite() && p_s > 0.0) {
            return Err(Error::InvalidParameter(format!("p_s must be > 0, got {p_s}")));
        }
        if !(p_r.is_finite() && p_r >= 0.0) {
            return Err(Error::InvalidParameter(format!("p_r must be >= 0, got {p_r}")));
        }
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::InvalidParameter(format!("q must be > 0, got {q}")));
        }
        Ok(ChannelParams { p_s, p_r, q })
    }

    /// Total transmit power of the pair.
    pub fn total_power(&self) -> f64 {
        self.p_s + self.p_r
    }
}

/// One fading realization: squared magnitudes of the two links and the phase
/// of h_s * conj(h_r). Individual phases are never materialized; every
/// correlation cross term only involves this one scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingDraw {
    pub nu_s: f64,
    pub nu_r: f64,
    pub phi: f64,
}

/// Unit-mean exponential fading powers, uniform relative phase.
pub fn sample_fading(rng: &mut CounterRng) -> FadingDraw {
    FadingDraw {
        nu_s: rng.exponential(),
        nu_r: rng.exponential(),
        phi: rng.phase(),
    }
}

/// Two-layer power allocation fractions: layer 1 takes `alpha * p_s` at the
/// source and `beta * p_r` at the relay; complements go to layer 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    pub alpha: f64,
    pub beta: f64,
}

impl PowerSplit {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        Ok(PowerSplit { alpha, beta })
    }

    pub fn alpha_bar(&self) -> f64 {
        1.0 - self.alpha
    }

    pub fn beta_bar(&self) -> f64 {
        1.0 - self.beta
    }

    /// Single-layer transmission (all power in layer 1).
    pub fn single_layer() -> Self {
        PowerSplit { alpha: 1.0, beta: 1.0 }
    }
}

/// Real non-negative correlation coefficients between the per-layer source
/// and relay signals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationPair {
    pub rho1: f64,
    pub rho2: f64,
}

impl CorrelationPair {
    pub fn new(rho1: f64, rho2: f64) -> Result<Self> {
        for (name, v) in [("rho1", rho1), ("rho2", rho2)] {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        Ok(CorrelationPair { rho1, rho2 })
    }

    pub fn uncorrelated() -> Self {
        CorrelationPair { rho1: 0.0, rho2: 0.0 }
    }
}

/// Single-layer decode-and-forward rate terms for one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleLayerRate {
    /// Source-relay term log(1 + p_s q (1 - rho^2)).
    pub relay: f64,
    /// Coherent-combining term at the destination.
    pub miso: f64,
    /// Achievable rate: min of the two.
    pub min: f64,
}

/// Single-layer DF rate terms for correlation `rho` in [0, 1].
pub fn df_rate_single(params: &ChannelParams, draw: &FadingDraw, rho: f64) -> SingleLayerRate {
    debug_assert!((0.0..=1.0).contains(&rho));
    let relay = (params.p_s * params.q * (1.0 - rho * rho)).ln_1p();
    let cross = 2.0
        * (params.p_s * params.p_r * draw.nu_s * draw.nu_r).sqrt()
        * rho
        * draw.phi.cos();
    let arg = draw.nu_s * params.p_s + draw.nu_r * params.p_r + cross;
    // arg >= (sqrt(nu_s p_s) - sqrt(nu_r p_r))^2 >= 0 for rho in [0,1].
    assert!(arg > -1.0, "MISO log argument fell below zero: 1 + {arg}");
    let miso = arg.ln_1p();
    SingleLayerRate { relay, miso, min: relay.min(miso) }
}

/// The four mutual informations of the two-layer scheme for one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLayerInfos {
    pub i1_relay: f64,
    pub i1_miso: f64,
    pub i2_relay: f64,
    pub i2_miso: f64,
}

/// Computes the layer-1/layer-2 source-relay and destination mutual
/// informations under a power split and a correlation pair.
///
/// At `rho1 = rho2 = 0` the expressions collapse to
/// `i1_relay = log((1 + p_s q)/(1 + q albar p_s))`,
/// `i2_relay = log(1 + q albar p_s)` and the matching destination pair, and
/// `i1_miso + i2_miso` telescopes to the full-power MISO rate.
pub fn two_layer_mutual_infos(
    params: &ChannelParams,
    draw: &FadingDraw,
    split: &PowerSplit,
    corr: &CorrelationPair,
) -> Result<TwoLayerInfos> {
    let (a, b) = (split.alpha, split.beta);
    let (ab, bb) = (split.alpha_bar(), split.beta_bar());
    let (r1, r2) = (corr.rho1, corr.rho2);

    // Source-relay side: deterministic in the fading.
    let num_quad = 1.0
        + params.p_s
            * params.q
            * (1.0 - a * b * r1 * r1 - ab * bb * r2 * r2 - 2.0 * (a * b * ab * bb).sqrt() * r1 * r2);
    if num_quad <= 0.0 {
        return Err(Error::InfeasibleCorrelation { numerator: num_quad });
    }
    let den_relay = 1.0 + params.q * ab * params.p_s * (1.0 - r2 * r2);
    let i1_relay = num_quad.ln() - den_relay.ln();
    let i2_relay = den_relay.ln();

    // Destination side: cross terms realized as sqrt(nu_s nu_r) * rho * cos(phi).
    let sc = (draw.nu_s * draw.nu_r).sqrt() * draw.phi.cos();
    let c1 = 2.0 * ((a * b * params.p_s * params.p_r).sqrt() * r1
        + (ab * bb * params.p_s * params.p_r).sqrt() * r2);
    let c2 = 2.0 * (ab * bb * params.p_s * params.p_r).sqrt() * r2;
    let num_miso = 1.0 + draw.nu_s * params.p_s + draw.nu_r * params.p_r + c1 * sc;
    let den_miso = 1.0 + draw.nu_s * ab * params.p_s + draw.nu_r * bb * params.p_r + c2 * sc;
    assert!(num_miso > 0.0 && den_miso > 0.0, "MISO log argument <= 0");
    let i1_miso = num_miso.ln() - den_miso.ln();
    let i2_miso = den_miso.ln();

    Ok(TwoLayerInfos { i1_relay, i1_miso, i2_relay, i2_miso })
}
