//! Two-layer broadcast transmission over the block-Markov relay scheme:
//! decode events, Monte Carlo and quadrature throughput, the feasibility
//! conic in the correlation plane, analytic layer decoding probabilities
//! under correlated transmission, multi-layer thresholds and the throughput
//! optimizers.
//!
//! Layer 1 is decoded first under layer-2 interference; layer 2 is decoded
//! after successive cancellation and only counted when layer 1 decoded. The
//! source-relay side of every decode event is deterministic in the fading;
//! only the destination (coherent-combining) side is random.

use rayon::prelude::*;

use crate::channel::{
    sample_fading, ChannelParams, CorrelationPair, FadingDraw, PowerSplit,
};
use crate::error::{Error, Result};
use crate::montecarlo::ThroughputEstimate;
use crate::optim::{bisect, golden_max, pattern_search_max};
use crate::quad::integrate;
use crate::single_layer::hypoexp_tail;
use crate::special::{lambert_w, WBranch};
use crate::stream::CounterRng;

/// Attempted rates of the two layers, nats/channel-use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerRates {
    pub r1: f64,
    pub r2: f64,
}

impl LayerRates {
    pub fn new(r1: f64, r2: f64) -> Result<Self> {
        for (name, v) in [("r1", r1), ("r2", r2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be a finite rate >= 0, got {v}"
                )));
            }
        }
        Ok(LayerRates { r1, r2 })
    }
}

/// Successive-decoding outcome for one realization; `layer2_ok` implies
/// `layer1_ok`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeEvents {
    pub layer1_ok: bool,
    pub layer2_ok: bool,
}

/// Draw-independent part of the decode predicate.
struct DecodePre {
    er1: f64,
    er2: f64,
    relay1_ok: bool,
    relay2_ok: bool,
    r1_zero: bool,
    r2_zero: bool,
    p_s: f64,
    p_r: f64,
    ab_ps: f64,
    bb_pr: f64,
    c1x: f64,
    c2x: f64,
}

fn prepare(
    params: &ChannelParams,
    split: &PowerSplit,
    corr: &CorrelationPair,
    rates: &LayerRates,
) -> Result<DecodePre> {
    let (a, b) = (split.alpha, split.beta);
    let (ab, bb) = (split.alpha_bar(), split.beta_bar());
    let (r1, r2) = (corr.rho1, corr.rho2);
    let num_quad = 1.0
        + params.p_s
            * params.q
            * (1.0 - a * b * r1 * r1 - ab * bb * r2 * r2 - 2.0 * (a * b * ab * bb).sqrt() * r1 * r2);
    if num_quad <= 0.0 {
        return Err(Error::InfeasibleCorrelation { numerator: num_quad });
    }
    let den_relay = 1.0 + params.q * ab * params.p_s * (1.0 - r2 * r2);
    let er1 = rates.r1.exp();
    let er2 = rates.r2.exp();
    Ok(DecodePre {
        er1,
        er2,
        relay1_ok: rates.r1 == 0.0 || num_quad > er1 * den_relay,
        relay2_ok: rates.r2 == 0.0 || den_relay > er2,
        r1_zero: rates.r1 == 0.0,
        r2_zero: rates.r2 == 0.0,
        p_s: params.p_s,
        p_r: params.p_r,
        ab_ps: ab * params.p_s,
        bb_pr: bb * params.p_r,
        c1x: 2.0
            * ((a * b * params.p_s * params.p_r).sqrt() * r1
                + (ab * bb * params.p_s * params.p_r).sqrt() * r2),
        c2x: 2.0 * (ab * bb * params.p_s * params.p_r).sqrt() * r2,
    })
}

impl DecodePre {
    #[inline]
    fn decode(&self, d: &FadingDraw) -> (bool, bool) {
        let sc = (d.nu_s * d.nu_r).sqrt() * d.phi.cos();
        let num = 1.0 + d.nu_s * self.p_s + d.nu_r * self.p_r + self.c1x * sc;
        let den = 1.0 + d.nu_s * self.ab_ps + d.nu_r * self.bb_pr + self.c2x * sc;
        let l1 = self.relay1_ok && (self.r1_zero || num > self.er1 * den);
        let l2 = l1 && self.relay2_ok && (self.r2_zero || den > self.er2);
        (l1, l2)
    }
}

/// Deterministic layer-1 source-relay test: true when the relay can decode
/// layer 1 at rate `r1` under the given correlation pair. An alternative
/// route to the sign of [`conic_indicator`].
pub fn layer1_relay_decodable(
    params: &ChannelParams,
    split: &PowerSplit,
    corr: &CorrelationPair,
    r1: f64,
) -> Result<bool> {
    let pre = prepare(params, split, corr, &LayerRates { r1, r2: 0.0 })?;
    Ok(pre.relay1_ok)
}

/// Evaluate both decode events for one realization. Zero-rate layers decode
/// unconditionally.
pub fn decode_events(
    params: &ChannelParams,
    draw: &FadingDraw,
    split: &PowerSplit,
    corr: &CorrelationPair,
    rates: &LayerRates,
) -> Result<DecodeEvents> {
    let pre = prepare(params, split, corr, rates)?;
    let (layer1_ok, layer2_ok) = pre.decode(draw);
    Ok(DecodeEvents { layer1_ok, layer2_ok })
}

/// Monte Carlo decode counts and derived estimates (half-widths are one
/// standard error). Counts are integers accumulated per fixed-size chunk, so
/// results are bit-identical for a given (seed, n) at any worker count.
#[derive(Debug, Clone, PartialEq)]
pub struct McDecodeStats {
    pub n: u64,
    pub n_layer1: u64,
    pub n_both: u64,
    pub p_layer1: ThroughputEstimate,
    pub p_both: ThroughputEstimate,
    pub throughput: ThroughputEstimate,
}

pub fn mc_decode_stats(
    params: &ChannelParams,
    split: &PowerSplit,
    corr: &CorrelationPair,
    rates: &LayerRates,
    n: u64,
    seed: u64,
) -> Result<McDecodeStats> {
    assert!(n >= 2, "mc_decode_stats needs n >= 2");
    let pre = prepare(params, split, corr, rates)?;
    let chunk = crate::montecarlo::CHUNK;
    let n_chunks = n.div_ceil(chunk);
    let counts: Vec<(u64, u64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(n);
            let mut rng = CounterRng::substream(seed, c);
            let (mut n1, mut n12) = (0u64, 0u64);
            for _ in lo..hi {
                let d = sample_fading(&mut rng);
                let (l1, l2) = pre.decode(&d);
                n1 += l1 as u64;
                n12 += l2 as u64;
            }
            (n1, n12)
        })
        .collect();
    let (n_layer1, n_both) = counts.iter().fold((0, 0), |(a, b), &(x, y)| (a + x, b + y));

    let nf = n as f64;
    let binom = |k: u64| {
        let p = k as f64 / nf;
        let se = (p * (1.0 - p) / (nf - 1.0)).sqrt();
        ThroughputEstimate::monte_carlo(p, se, n)
    };
    let mean = (rates.r1 * n_layer1 as f64 + rates.r2 * n_both as f64) / nf;
    let ex2 = (rates.r1 * rates.r1 * (n_layer1 - n_both) as f64
        + (rates.r1 + rates.r2) * (rates.r1 + rates.r2) * n_both as f64)
        / nf;
    let var = ((ex2 - mean * mean) * nf / (nf - 1.0)).max(0.0);
    let throughput = ThroughputEstimate::monte_carlo(mean, (var / nf).sqrt(), n);
    Ok(McDecodeStats {
        n,
        n_layer1,
        n_both,
        p_layer1: binom(n_layer1),
        p_both: binom(n_both),
        throughput,
    })
}

/// Monte Carlo average throughput r1 P(L1) + r2 P(L1 and L2). An infeasible
/// correlation pair nullifies the throughput rather than erroring.
pub fn average_throughput_mc(
    params: &ChannelParams,
    split: &PowerSplit,
    corr: &CorrelationPair,
    rates: &LayerRates,
    n: u64,
    seed: u64,
) -> ThroughputEstimate {
    match mc_decode_stats(params, split, corr, rates, n, seed) {
        Ok(stats) => stats.throughput,
        Err(Error::InfeasibleCorrelation { .. }) => ThroughputEstimate::monte_carlo(0.0, 0.0, n),
        Err(e) => unreachable!("unexpected error from mc_decode_stats: {e}"),
    }
}

// ---------------------------------------------------------------------------
// Uncorrelated quadrature route
// ---------------------------------------------------------------------------

/// A region of the relay fading power nu_r under the exponential measure.
#[derive(Debug, Clone, Copy)]
enum NuRegion {
    All,
    Empty,
    Ray(f64),
    Interval(f64, f64),
}

impl NuRegion {
    fn mass(&self) -> f64 {
        match *self {
            NuRegion::All => 1.0,
            NuRegion::Empty => 0.0,
            NuRegion::Ray(lo) => (-lo).exp(),
            NuRegion::Interval(lo, hi) => {
                if hi <= lo {
                    0.0
                } else {
                    (-lo).exp() - (-hi).exp()
                }
            }
        }
    }

    fn intersect_ray(&self, lo2: f64) -> NuRegion {
        match *self {
            NuRegion::All => NuRegion::Ray(lo2),
            NuRegion::Empty => NuRegion::Empty,
            NuRegion::Ray(lo) => NuRegion::Ray(lo.max(lo2)),
            NuRegion::Interval(lo, hi) => NuRegion::Interval(lo.max(lo2), hi),
        }
    }
}

/// nu_r region where the layer-1 destination term exceeds r1, given nu_s = a.
/// `aq` = p_r (1 - beta_bar e^{r1}); `g` = (e^{r1}-1) - a p_s (1 - alpha_bar e^{r1}).
fn layer1_region(aq: f64, g: f64) -> NuRegion {
    if aq > 0.0 {
        NuRegion::Ray((g / aq).max(0.0))
    } else if aq < 0.0 {
        if g >= 0.0 {
            NuRegion::Empty
        } else {
            NuRegion::Interval(0.0, g / aq)
        }
    } else if g < 0.0 {
        NuRegion::All
    } else {
        NuRegion::Empty
    }
}

fn outer_segments(breaks: &[f64], hi: f64) -> Vec<(f64, f64)> {
    let mut pts = vec![0.0, hi];
    for &b in breaks {
        if b.is_finite() && b > 0.0 && b < hi {
            pts.push(b);
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Joint probabilities (P(L1), P(L1 and L2)) of the two destination
/// threshold events at rho1 = rho2 = 0, by quadrature over the exponential
/// pair: exact exponential masses in nu_r nested inside an adaptive outer
/// integral over nu_s.
pub fn joint_miso_quad(
    params: &ChannelParams,
    split: &PowerSplit,
    rates: &LayerRates,
    tol: f64,
) -> (f64, f64) {
    let er1 = rates.r1.exp();
    let c1m = rates.r1.exp_m1();
    let c2m = rates.r2.exp_m1();
    let (ab, bb) = (split.alpha_bar(), split.beta_bar());
    let aq = params.p_r * (1.0 - bb * er1);
    let slope = params.p_s * (1.0 - ab * er1);
    let g_of = |a: f64| c1m - a * slope;
    let ab_ps = ab * params.p_s;
    let bb_pr = bb * params.p_r;

    let l2_region = |a: f64| -> NuRegion {
        if rates.r2 == 0.0 {
            NuRegion::All
        } else if bb_pr > 0.0 {
            NuRegion::Ray(((c2m - a * ab_ps) / bb_pr).max(0.0))
        } else if c2m - a * ab_ps < 0.0 {
            NuRegion::All
        } else {
            NuRegion::Empty
        }
    };

    let hi = (10.0 / tol).ln();
    let mut breaks = Vec::new();
    if slope > 0.0 && c1m > 0.0 {
        breaks.push(c1m / slope);
    }
    if ab_ps > 0.0 && c2m > 0.0 {
        breaks.push(c2m / ab_ps);
    }
    let segs = outer_segments(&breaks, hi);
    let seg_tol = 0.45 * tol / segs.len() as f64;
    let mut p1 = 0.0;
    let mut p12 = 0.0;
    for &(lo, up) in &segs {
        p1 += integrate(&|a: f64| layer1_region(aq, g_of(a)).mass() * (-a).exp(), lo, up, seg_tol);
        p12 += integrate(
            &|a: f64| {
                let l1 = layer1_region(aq, g_of(a));
                match l2_region(a) {
                    NuRegion::All => l1.mass(),
                    NuRegion::Empty => 0.0,
                    NuRegion::Ray(t) => l1.intersect_ray(t).mass(),
                    NuRegion::Interval(..) => unreachable!(),
                }
            } * (-a).exp(),
            lo,
            up,
            seg_tol,
        );
    }
    (p1.clamp(0.0, 1.0), p12.clamp(0.0, 1.0))
}

/// P(layer-1 destination term > r1) at zero correlation (also the k = 0
/// evaluation route for the analytic integral).
pub fn p_layer1_miso_quad(params: &ChannelParams, split: &PowerSplit, r1: f64, tol: f64) -> f64 {
    if r1 <= 0.0 {
        return 1.0;
    }
    let (p1, _) = joint_miso_quad(params, split, &LayerRates { r1, r2: 0.0 }, tol);
    p1
}

/// Two-layer throughput of the source alone (relay silent): the successive
/// decoding thresholds over a single exponential fading power.
pub fn direct_siso_two_layer(p_s: f64, alpha: f64, rates: &LayerRates) -> f64 {
    let c1 = rates.r1.exp_m1();
    let denom1 = p_s * (alpha - c1 * (1.0 - alpha));
    let d1 = if rates.r1 == 0.0 {
        0.0
    } else if denom1 > 0.0 {
        c1 / denom1
    } else {
        f64::INFINITY
    };
    let ap = (1.0 - alpha) * p_s;
    let c2 = rates.r2.exp_m1();
    let d2 = if rates.r2 == 0.0 {
        0.0
    } else if ap > 0.0 {
        c2 / ap
    } else {
        f64::INFINITY
    };
    let t1 = if d1.is_finite() { rates.r1 * (-d1).exp() } else { 0.0 };
    let dmax = d1.max(d2);
    let t2 = if dmax.is_finite() { rates.r2 * (-dmax).exp() } else { 0.0 };
    t1 + t2
}

/// Average throughput at rho1 = rho2 = 0 by quadrature when the source-relay
/// link supports both layers; otherwise the relay stays silent and the
/// direct-transmission value is returned.
pub fn average_throughput_uncorrelated(
    params: &ChannelParams,
    split: &PowerSplit,
    rates: &LayerRates,
    tol: f64,
) -> ThroughputEstimate {
    let ab_ps = split.alpha_bar() * params.p_s;
    let relay1 =
        rates.r1 == 0.0 || 1.0 + params.p_s * params.q > rates.r1.exp() * (1.0 + params.q * ab_ps);
    let relay2 = rates.r2 == 0.0 || 1.0 + params.q * ab_ps > rates.r2.exp();
    if relay1 && relay2 {
        let (p1, p12) = joint_miso_quad(params, split, rates, tol);
        ThroughputEstimate::quadrature(rates.r1 * p1 + rates.r2 * p12)
    } else {
        ThroughputEstimate::analytic(direct_siso_two_layer(params.p_s, split.alpha, rates))
    }
}

// ---------------------------------------------------------------------------
// Feasibility conic
// ---------------------------------------------------------------------------

/// Quadratic-form value whose positivity means the relay can decode layer 1
/// at rate r1 under correlation (rho1, rho2).
pub fn conic_indicator(
    params: &ChannelParams,
    split: &PowerSplit,
    r1: f64,
    rho1: f64,
    rho2: f64,
) -> f64 {
    let er = r1.exp();
    let (a, b) = (split.alpha, split.beta);
    let (ab, bb) = (split.alpha_bar(), split.beta_bar());
    let pq = params.p_s * params.q;
    let f_term = 1.0 + pq - er * (1.0 + params.q * ab * params.p_s);
    rho1 * rho1 * (-pq * a * b)
        + rho2 * rho2 * (params.q * ab * params.p_s * er - pq * ab * bb)
        + rho1 * rho2 * (-2.0 * pq * (a * b * ab * bb).sqrt())
        + f_term
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConicClassification {
    /// Sign of the constant term: layer 1 decodable at rho1 = rho2 = 0.
    pub feasible_at_origin: bool,
    /// Smallest infeasible rho1 along rho2 = 0; `None` when every rho1 in
    /// [0, 1] is feasible.
    pub rho1_cutoff: Option<f64>,
    /// Largest decodable layer-1 rate over all correlation pairs,
    /// log(1 + p_s q (1 - alpha_bar beta_bar)).
    pub max_r1: f64,
    /// Indicator sign at the probe point, when one was supplied.
    pub probe_feasible: Option<bool>,
}

pub fn classify_conic(
    params: &ChannelParams,
    split: &PowerSplit,
    rates: &LayerRates,
    corr_probe: Option<(f64, f64)>,
) -> ConicClassification {
    let er = rates.r1.exp();
    let ab_ps = split.alpha_bar() * params.p_s;
    let f_term = 1.0 + params.p_s * params.q - er * (1.0 + params.q * ab_ps);
    let denom = params.p_s * params.q * split.alpha * split.beta;
    let rho1_cutoff = if f_term <= 0.0 {
        Some(0.0)
    } else if denom > 0.0 {
        let r = (f_term / denom).sqrt();
        if r > 1.0 {
            None
        } else {
            Some(r)
        }
    } else {
        None
    };
    ConicClassification {
        feasible_at_origin: f_term > 0.0,
        rho1_cutoff,
        max_r1: (params.p_s * params.q * (1.0 - split.alpha_bar() * split.beta_bar())).ln_1p(),
        probe_feasible: corr_probe
            .map(|(r1, r2)| conic_indicator(params, split, rates.r1, r1, r2) > 0.0),
    }
}

// ---------------------------------------------------------------------------
// Analytic decoding probabilities under correlation
// ---------------------------------------------------------------------------

/// Window integral of 2u e^{-u^2} pphi(f(u)) with the arcsin argument clamped
/// to [-1, 1]; `sgn` distinguishes P(cos > f) from P(cos < f).
fn phase_window_integral<F: Fn(f64) -> f64>(f: F, sgn: f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let hi_c = hi.min(6.5); // beyond u = 6.5 the Rayleigh weight is ~1e-19
    if hi_c <= lo {
        return 0.0;
    }
    integrate(
        &|u: f64| {
            let v = f(u).clamp(-1.0, 1.0);
            2.0 * u * (-u * u).exp() * (0.5 - sgn * v.asin() / std::f64::consts::PI)
        },
        lo,
        hi_c,
        tol,
    )
}

/// Analytic probability that the destination decodes layer 1 at rate `r1`
/// under correlated transmission: conditional on nu_s the phase integral has
/// closed saturation masses and an arcsin window between the roots of a
/// quadratic in |h_r|; the outer nu_s integral splits at the sign change of
/// the deterministic margin and at the discriminant root a'.
///
/// Domain: p_r (1 - beta_bar e^{r1}) > 0 and beta >= alpha; other inputs
/// belong to the Monte Carlo route.
pub fn p_layer1_miso_analytic(
    params: &ChannelParams,
    split: &PowerSplit,
    corr: &CorrelationPair,
    r1: f64,
    tol: f64,
) -> Result<f64> {
    if r1 <= 0.0 {
        return Ok(1.0);
    }
    let er = r1.exp();
    let c1m = r1.exp_m1();
    let (al, be) = (split.alpha, split.beta);
    let (ab, bb) = (split.alpha_bar(), split.beta_bar());
    let aq = params.p_r * (1.0 - bb * er);
    if aq <= 0.0 {
        return Err(Error::Domain(format!(
            "analytic layer-1 integral needs p_r (1 - beta_bar e^r1) > 0, got {aq}"
        )));
    }
    if be < al {
        return Err(Error::Domain(format!(
            "analytic layer-1 integral needs beta >= alpha, got alpha={al}, beta={be}"
        )));
    }
    let kappa = 2.0
        * (params.p_s * params.p_r).sqrt()
        * (corr.rho1 * (al * be).sqrt() - corr.rho2 * c1m * (ab * bb).sqrt());
    if kappa == 0.0 {
        // Zero cross term: the phase drops out and the event is the
        // uncorrelated one.
        return Ok(p_layer1_miso_quad(params, split, r1, tol));
    }
    let slope = params.p_s * (1.0 - ab * er);
    let g_of = |a: f64| c1m - a * slope;
    let a_break = if slope > 0.0 { c1m / slope } else { f64::INFINITY };

    // a' solves k^2(a) = -4 aq g(a); the discriminant is linear in a, so a
    // bracketed bisection from 0 is exact enough. No root means the window
    // persists for all a.
    let delta_of = |a: f64| a * kappa * kappa + 4.0 * aq * g_of(a);
    let delta_slope = kappa * kappa - 4.0 * aq * slope;
    let a_prime = if delta_slope >= 0.0 {
        f64::INFINITY
    } else {
        let mut hi = 1.0;
        while delta_of(hi) > 0.0 && hi < 1e12 {
            hi *= 2.0;
        }
        if hi >= 1e12 {
            f64::INFINITY
        } else {
            bisect(delta_of, 0.0, hi, 1e-13)
        }
    };

    let tol_inner = 0.45 * tol;
    let inner = |a: f64| -> f64 {
        let g = g_of(a);
        let k = a.sqrt() * kappa;
        let delta = k * k + 4.0 * aq * g;
        if g <= 0.0 && delta <= 0.0 {
            return 1.0;
        }
        let s = delta.max(0.0).sqrt();
        let w_hi = (k.abs() + s) / (2.0 * aq);
        let w_lo = (2.0 * g.abs() / (k.abs() + s)).max(0.0);
        let sgn = k.signum();
        let f = |u: f64| {
            let num = g - aq * u * u;
            let den = u * k;
            if den.abs() < 1e-300 {
                if num > 0.0 {
                    sgn
                } else {
                    -sgn
                }
            } else {
                num / den
            }
        };
        let window = phase_window_integral(f, sgn, w_lo, w_hi, tol_inner);
        if g > 0.0 {
            (-w_hi * w_hi).exp() + window
        } else {
            1.0 - (-w_lo * w_lo).exp() + (-w_hi * w_hi).exp() + window
        }
    };

    let u_max = (10.0 / tol).ln();
    let hi_int = a_prime.min(u_max);
    let segs = outer_segments(&[a_break], hi_int);
    let seg_tol = 0.45 * tol / segs.len().max(1) as f64;
    let mut total = 0.0;
    for &(lo, up) in &segs {
        total += integrate(&|a: f64| inner(a) * (-a).exp(), lo, up, seg_tol);
    }
    if a_prime.is_finite() {
        total += (-a_prime).exp();
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Analytic probability that the destination decodes layer 2 at rate `r2`
/// after cancelling layer 1 (an upper bound on the joint decode
/// probability). rho2 = 1 collapses to a single coherent exponential;
/// rho2 = 0 to the hypoexponential tail.
pub fn p_layer2_miso_analytic(
    params: &ChannelParams,
    split: &PowerSplit,
    rho2: f64,
    r2: f64,
    tol: f64,
) -> Result<f64> {
    if !(rho2.is_finite() && (0.0..=1.0).contains(&rho2)) {
        return Err(Error::Domain(format!("rho2 must be in [0, 1], got {rho2}")));
    }
    if r2 <= 0.0 {
        return Ok(1.0);
    }
    let c2 = r2.exp_m1();
    let ap = split.alpha_bar() * params.p_s;
    let bp = split.beta_bar() * params.p_r;
    if rho2 == 1.0 {
        // Full correlation: the pair combines into one complex Gaussian of
        // power ap + bp.
        let tot = ap + bp;
        return Ok(if tot > 0.0 { (-c2 / tot).exp() } else { 0.0 });
    }
    if ap == 0.0 && bp == 0.0 {
        return Ok(0.0);
    }
    if ap == 0.0 {
        return Ok((-c2 / bp).exp());
    }
    if bp == 0.0 {
        return Ok((-c2 / ap).exp());
    }
    if rho2 == 0.0 {
        return Ok(hypoexp_tail(ap, bp, c2));
    }

    let b1 = c2 / ap;
    let b2 = c2 / ((1.0 - rho2 * rho2) * ap);
    let tol_inner = 0.45 * tol;
    let inner = |a: f64| -> f64 {
        let t2 = (c2 - a * (1.0 - rho2 * rho2) * ap) / bp;
        if t2 <= 0.0 {
            return 1.0;
        }
        let t = t2.sqrt();
        let n = rho2 * (a * ap / bp).sqrt();
        let w_lo = (t - n).abs();
        let w_hi = t + n;
        let g = |u: f64| {
            let num = c2 - a * ap - u * u * bp;
            let den = 2.0 * rho2 * (a * ap * bp).sqrt() * u;
            if den.abs() < 1e-300 {
                if num > 0.0 {
                    1.0
                } else {
                    -1.0
                }
            } else {
                num / den
            }
        };
        let window = phase_window_integral(g, 1.0, w_lo, w_hi, tol_inner);
        let below = if t >= n { 0.0 } else { 1.0 - (-w_lo * w_lo).exp() };
        below + (-w_hi * w_hi).exp() + window
    };

    let u_max = (10.0 / tol).ln();
    let segs = outer_segments(&[b1], b2.min(u_max));
    let seg_tol = 0.45 * tol / segs.len().max(1) as f64;
    let mut total = (-b2).exp();
    for &(lo, up) in &segs {
        total += integrate(&|a: f64| inner(a) * (-a).exp(), lo, up, seg_tol);
    }
    Ok(total.clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// Multi-layer thresholds over the source-only channel
// ---------------------------------------------------------------------------

/// Discrete superposition layering over a single Rayleigh channel: fading
/// thresholds, power fractions and the per-layer rates they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct SisoLayering {
    /// Non-decreasing fading thresholds, one per layer.
    pub thresholds: Vec<f64>,
    /// Power fractions, summing to 1.
    pub fractions: Vec<f64>,
    /// Per-layer rates log(1 + eta_i f_i p / (1 + eta_i p sum_{j>i} f_j)).
    pub rates: Vec<f64>,
}

impl SisoLayering {
    pub fn n_layers(&self) -> usize {
        self.thresholds.len()
    }

    /// The expected decoded rate sum_i R_i e^{-eta_i}.
    pub fn objective(&self) -> f64 {
        self.rates
            .iter()
            .zip(self.thresholds.iter())
            .map(|(r, eta)| r * (-eta).exp())
            .sum()
    }
}

/// Cumulative tail fractions T_j = sum_{i>=j} f_i from the stationarity of
/// the layering objective at fixed thresholds; clamped into monotone order.
fn tail_fractions(etas: &[f64], p: f64) -> Vec<f64> {
    let n = etas.len();
    let mut t = vec![1.0; n];
    for j in 1..n {
        let (e_prev, e_cur) = (etas[j - 1], etas[j]);
        let d = (-e_prev).exp() - (-e_cur).exp();
        t[j] = if d.abs() < 1e-15 {
            t[j - 1]
        } else {
            let num = e_cur * (-e_cur).exp() - e_prev * (-e_prev).exp();
            (num / (p * e_cur * e_prev * d)).clamp(0.0, t[j - 1])
        };
    }
    t
}

fn layering_objective(etas: &[f64], p: f64) -> f64 {
    let t = tail_fractions(etas, p);
    let n = etas.len();
    let mut obj = 0.0;
    for i in 0..n {
        let t_next = if i + 1 < n { t[i + 1] } else { 0.0 };
        let r = (etas[i] * p * t[i]).ln_1p() - (etas[i] * p * t_next).ln_1p();
        obj += r * (-etas[i]).exp();
    }
    obj
}

/// Alternating refinement: with the tail fractions held fixed the objective
/// separates per threshold, so each coordinate gets an exact 1-D search;
/// fractions are then refreshed from their stationarity form. Steps are only
/// kept when the composed objective improves, so the polish is a
/// deterministic hill climb that removes optimizer jitter.
fn polish_layering(etas: &mut Vec<f64>, p: f64, eta_max: f64) {
    let n = etas.len();
    let mut obj = layering_objective(etas, p);
    for _ in 0..200 {
        let t = tail_fractions(etas, p);
        let mut cand = etas.clone();
        for i in 0..n {
            let lo = if i == 0 { 1e-6 } else { cand[i - 1] + 1e-9 };
            let hi = if i + 1 == n { eta_max } else { cand[i + 1] - 1e-9 };
            if hi <= lo {
                continue;
            }
            let t_next = if i + 1 < n { t[i + 1] } else { 0.0 };
            if t[i] - t_next < 1e-14 {
                // Vacuous layer (zero power): park it at its lower edge so it
                // does not constrain the live thresholds.
                cand[i] = lo;
                continue;
            }
            let term = |e: f64| {
                ((e * p * t[i]).ln_1p() - (e * p * t_next).ln_1p()) * (-e).exp()
            };
            let (e_star, _) = golden_max(term, lo, hi, 1e-12);
            cand[i] = e_star;
        }
        let cand_obj = layering_objective(&cand, p);
        if cand_obj > obj + 1e-14 {
            *etas = cand;
            obj = cand_obj;
        } else {
            if cand_obj >= obj {
                *etas = cand;
            }
            break;
        }
    }
}

/// Optimize an N-layer superposition over thresholds (coordinate ascent with
/// multi-start; fractions follow from the stationarity closed form). N = 1
/// is the Lambert closed form with rate W(p_s).
pub fn optimize_siso_layering(p_s: f64, n_layers: usize) -> SisoLayering {
    assert!(n_layers >= 1 && p_s > 0.0);
    if n_layers == 1 {
        let rate = lambert_w(p_s, WBranch::Principal).expect("p_s > 0");
        return SisoLayering {
            thresholds: vec![rate.exp_m1() / p_s],
            fractions: vec![1.0],
            rates: vec![rate],
        };
    }
    let n = n_layers;
    let eta_max = 8.0f64;
    let anchor = crate::single_layer::q_min_single(p_s);
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for &(lo_f, hi_f) in &[(0.3, 1.2), (0.1, 2.5), (0.6, 4.0)] {
        let lo = (anchor * lo_f).max(1e-4);
        let hi = (anchor * hi_f).min(eta_max * 0.9);
        let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
        starts.push((0..n).map(|i| lo * ratio.powi(i as i32)).collect());
    }
    // Warm start from the (n-1)-layer solution with one extra top threshold:
    // keeps the objective nested across layer counts and the thresholds
    // smooth along power sweeps.
    {
        let prev = optimize_siso_layering(p_s, n - 1);
        let mut warm = prev.thresholds;
        let last = *warm.last().expect("n - 1 >= 1");
        warm.push((last * 1.2).max(last + 0.02).min(eta_max * 0.99));
        if warm.windows(2).all(|w| w[1] > w[0]) {
            starts.push(warm);
        }
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        let mut etas = start;
        let mut obj = layering_objective(&etas, p_s);
        for _ in 0..80 {
            let before = obj;
            for i in 0..n {
                let lo = if i == 0 { 1e-6 } else { etas[i - 1] + 1e-9 };
                let hi = if i + 1 == n { eta_max } else { etas[i + 1] - 1e-9 };
                if hi <= lo {
                    continue;
                }
                let (e_star, v) = golden_max(
                    |e| {
                        let mut cand = etas.clone();
                        cand[i] = e;
                        layering_objective(&cand, p_s)
                    },
                    lo,
                    hi,
                    1e-9,
                );
                if v > obj {
                    etas[i] = e_star;
                    obj = v;
                }
            }
            if obj - before < 1e-10 {
                break;
            }
        }
        polish_layering(&mut etas, p_s, eta_max);
        let obj = layering_objective(&etas, p_s);
        if best.as_ref().is_none_or(|(_, b)| obj > *b) {
            best = Some((etas, obj));
        }
    }
    let (mut etas, mut obj) = best.unwrap();

    // The top threshold has a Lambert closed form given its power share.
    let t = tail_fractions(&etas, p_s);
    if let Some(&f_last) = t.last() {
        if f_last > 0.0 {
            if let Ok(w) = lambert_w(f_last * p_s, WBranch::Principal) {
                let cand_eta = w.exp_m1() / (f_last * p_s);
                if cand_eta > etas[n - 2] {
                    let mut cand = etas.clone();
                    cand[n - 1] = cand_eta;
                    let v = layering_objective(&cand, p_s);
                    if v > obj {
                        etas = cand;
                        obj = v;
                    }
                }
            }
        }
    }
    let _ = obj;

    let t = tail_fractions(&etas, p_s);
    let mut fractions = Vec::with_capacity(n);
    let mut rates = Vec::with_capacity(n);
    for i in 0..n {
        let t_next = if i + 1 < n { t[i + 1] } else { 0.0 };
        fractions.push(t[i] - t_next);
        rates.push((etas[i] * p_s * t[i]).ln_1p() - (etas[i] * p_s * t_next).ln_1p());
    }
    SisoLayering { thresholds: etas, fractions, rates }
}

/// Minimal collocation gain for the relay to support every layer: the top
/// layering threshold. Always below 1.
pub fn q_min_layers(_p_s: f64, layering: &SisoLayering) -> f64 {
    *layering
        .thresholds
        .last()
        .expect("layering has at least one layer")
}

// ---------------------------------------------------------------------------
// Two-layer throughput optimization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoLayerMode {
    /// Search (alpha, beta, r1, r2) over the quadrature throughput.
    UncorrelatedAnalytic,
    /// Additionally grid the correlation plane with common random numbers.
    CorrelatedMc { seed: u64, samples: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerOptimum {
    pub split: PowerSplit,
    pub corr: CorrelationPair,
    pub rates: LayerRates,
    pub value: ThroughputEstimate,
}

fn uncorrelated_search(
    params: &ChannelParams,
    budget: u32,
) -> (PowerSplit, LayerRates, f64) {
    let search_tol = 1e-5;
    let objective = |x: &[f64]| {
        let split = PowerSplit { alpha: x[0], beta: x[1] };
        let rates = LayerRates { r1: x[2], r2: x[3] };
        average_throughput_uncorrelated(params, &split, &rates, search_tol).value
    };
    let rmax = (8.0 * params.total_power()).ln_1p();
    let lo = [0.0, 0.0, 0.0, 0.0];
    let hi = [1.0, 1.0, rmax, rmax];

    let (r_single, _) =
        crate::single_layer::maximize_throughput(params, crate::single_layer::ThroughputMode::RhoZero);
    let lay = optimize_siso_layering(params.p_s, 2);
    let starts: Vec<[f64; 4]> = vec![
        [1.0, 1.0, r_single.min(rmax), 0.0],
        [
            lay.fractions[0].clamp(0.05, 0.95),
            lay.fractions[0].clamp(0.05, 0.95),
            lay.rates[0].min(rmax),
            lay.rates[1].min(rmax),
        ],
        [0.8, 0.8, (0.7 * r_single).min(rmax), (0.5 * r_single).min(rmax)],
    ];
    let per_start = (budget / starts.len() as u32).max(50);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in starts {
        let (x, v) = pattern_search_max(objective, &s, &lo, &hi, 0.15, 1e-7, per_start);
        let better = match &best {
            None => true,
            Some((bx, bv)) => v > *bv + 1e-9 || ((v - *bv).abs() <= 1e-9 && x[3] < bx[3]),
        };
        if better {
            best = Some((x, v));
        }
    }
    let (x, _) = best.unwrap();
    let split = PowerSplit { alpha: x[0], beta: x[1] };
    let rates = LayerRates { r1: x[2], r2: x[3] };
    // Re-evaluate the winner at the reporting tolerance.
    let value = average_throughput_uncorrelated(params, &split, &rates, 1e-6).value;
    (split, rates, value)
}

/// Oblivious two-layer value: the source commits to its source-only optimal
/// layering (rates and its own split), the relay mirrors with its best power
/// split for the coherent pair. Returns the chosen configuration and the
/// uncorrelated throughput.
pub fn oblivious_two_layer_throughput(
    params: &ChannelParams,
    tol: f64,
) -> (PowerSplit, LayerRates, f64) {
    let lay = optimize_siso_layering(params.p_s, 2);
    let alpha = lay.fractions[0].clamp(0.0, 1.0);
    let rates = LayerRates { r1: lay.rates[0], r2: lay.rates[1] };
    let (beta, value) = golden_max(
        |b| {
            average_throughput_uncorrelated(
                params,
                &PowerSplit { alpha, beta: b },
                &rates,
                tol,
            )
            .value
        },
        0.0,
        1.0,
        1e-8,
    );
    (PowerSplit { alpha, beta }, rates, value)
}

/// Best-found two-layer configuration. The uncorrelated mode reports the
/// quadrature value; the correlated mode grids the feasible (rho1, rho2)
/// region with the same seed for every candidate and reports the Monte Carlo
/// value of the winner. Ties within 1e-9 prefer smaller correlations and
/// then a smaller second-layer rate.
pub fn optimize_two_layer_throughput(
    params: &ChannelParams,
    mode: TwoLayerMode,
    budget: u32,
) -> TwoLayerOptimum {
    match mode {
        TwoLayerMode::UncorrelatedAnalytic => {
            let (split, rates, value) = uncorrelated_search(params, budget);
            TwoLayerOptimum {
                split,
                corr: CorrelationPair::uncorrelated(),
                rates,
                value: ThroughputEstimate::quadrature(value),
            }
        }
        TwoLayerMode::CorrelatedMc { seed, samples } => {
            let (split, rates, _) = uncorrelated_search(params, budget / 2);
            // Relay-side cap on rho2 for the second layer to stay decodable.
            let ab_ps = split.alpha_bar() * params.p_s;
            let rho2_cap = if rates.r2 == 0.0 || ab_ps == 0.0 {
                if rates.r2 == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (1.0 - rates.r2.exp_m1() / (params.q * ab_ps)).max(0.0).sqrt().min(1.0)
            };
            let m = 11usize;
            let mut best: Option<(f64, f64, ThroughputEstimate)> = None;
            for i in 0..m {
                for j in 0..m {
                    let rho1 = i as f64 / (m - 1) as f64;
                    let rho2 = rho2_cap * j as f64 / (m - 1) as f64;
                    if (rho1, rho2) != (0.0, 0.0)
                        && conic_indicator(params, &split, rates.r1, rho1, rho2) <= 0.0
                    {
                        continue;
                    }
                    let corr = CorrelationPair { rho1, rho2 };
                    let est = average_throughput_mc(params, &split, &corr, &rates, samples, seed);
                    let better = match &best {
                        None => true,
                        Some((b1, b2, bv)) => {
                            est.value > bv.value + 1e-9
                                || ((est.value - bv.value).abs() <= 1e-9
                                    && rho1 * rho1 + rho2 * rho2 < b1 * b1 + b2 * b2)
                        }
                    };
                    if better {
                        best = Some((rho1, rho2, est));
                    }
                }
            }
            let (rho1, rho2, value) = best.expect("grid contains the origin");
            TwoLayerOptimum { split, corr: CorrelationPair { rho1, rho2 }, rates, value }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::two_layer_mutual_infos;
    use crate::montecarlo::ORACLE_SE_MULTIPLIER;

    fn params(p_s: f64, p_r: f64, q: f64) -> ChannelParams {
        ChannelParams::new(p_s, p_r, q).unwrap()
    }

    fn split(a: f64, b: f64) -> PowerSplit {
        PowerSplit::new(a, b).unwrap()
    }

    fn corr(r1: f64, r2: f64) -> CorrelationPair {
        CorrelationPair::new(r1, r2).unwrap()
    }

    fn rates(r1: f64, r2: f64) -> LayerRates {
        LayerRates::new(r1, r2).unwrap()
    }

    #[test]
    fn decode_zero_rates_always_ok() {
        let p = params(5.0, 5.0, 20.0);
        let d = FadingDraw { nu_s: 1e-9, nu_r: 1e-9, phi: 3.0 };
        let ev =
            decode_events(&p, &d, &split(0.5, 0.7), &corr(0.3, 0.2), &rates(0.0, 0.0)).unwrap();
        assert!(ev.layer1_ok && ev.layer2_ok);
    }

    #[test]
    fn decode_relay_conjunct_deterministic() {
        let p = params(5.0, 5.0, 20.0);
        let s = split(0.5, 0.5);
        // r2 above log(1 + q albar p_s) fails regardless of fading.
        let r2 = (p.q * 0.5 * p.p_s).ln_1p() + 0.1;
        let d = FadingDraw { nu_s: 100.0, nu_r: 100.0, phi: 0.0 };
        let ev = decode_events(&p, &d, &s, &corr(0.0, 0.0), &rates(0.1, r2)).unwrap();
        assert!(ev.layer1_ok);
        assert!(!ev.layer2_ok);
    }

    #[test]
    fn decode_matches_mutual_info_route() {
        let p = params(8.0, 3.0, 50.0);
        let s = split(0.6, 0.8);
        let c = corr(0.25, 0.4);
        let r = rates(0.4, 0.6);
        let mut rng = CounterRng::new(17);
        for _ in 0..2000 {
            let d = sample_fading(&mut rng);
            let ev = decode_events(&p, &d, &s, &c, &r).unwrap();
            let infos = two_layer_mutual_infos(&p, &d, &s, &c).unwrap();
            let l1 = infos.i1_relay > r.r1 && infos.i1_miso > r.r1;
            let l2 = l1 && infos.i2_relay > r.r2 && infos.i2_miso > r.r2;
            assert_eq!(ev.layer1_ok, l1);
            assert_eq!(ev.layer2_ok, l2);
        }
    }

    #[test]
    fn decode_reduces_to_miso_tests_at_huge_q() {
        let p = params(10.0, 10.0, 1e12);
        let s = split(0.8, 0.8);
        let r = rates(0.5, 0.4);
        let er1 = r.r1.exp();
        let er2 = r.r2.exp();
        let mut rng = CounterRng::new(23);
        for _ in 0..10_000 {
            let d = sample_fading(&mut rng);
            let ev = decode_events(&p, &d, &s, &corr(0.0, 0.0), &r).unwrap();
            let num = 1.0 + d.nu_s * p.p_s + d.nu_r * p.p_r;
            let den = 1.0 + d.nu_s * 0.2 * p.p_s + d.nu_r * 0.2 * p.p_r;
            assert_eq!(ev.layer1_ok, num / den > er1);
            assert_eq!(ev.layer2_ok, num / den > er1 && den > er2);
        }
    }

    #[test]
    fn mc_zero_rates() {
        let p = params(5.0, 5.0, 20.0);
        let est =
            average_throughput_mc(&p, &split(0.5, 0.5), &corr(0.0, 0.0), &rates(0.0, 0.0), 1000, 1);
        assert_eq!(est.value, 0.0);
        assert_eq!(est.half_width, 0.0);
    }

    #[test]
    fn mc_full_rho2_kills_second_layer() {
        let p = params(5.0, 5.0, 20.0);
        let stats = mc_decode_stats(
            &p,
            &split(0.5, 0.5),
            &corr(0.0, 1.0),
            &rates(0.2, 0.3),
            10_000,
            3,
        )
        .unwrap();
        assert_eq!(stats.n_both, 0);
    }

    #[test]
    fn mc_deterministic_across_worker_counts() {
        let p = params(6.0, 4.0, 30.0);
        let args = (split(0.6, 0.7), corr(0.2, 0.3), rates(0.3, 0.5));
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| mc_decode_stats(&p, &args.0, &args.1, &args.2, 50_000, 777).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn quadrature_single_layer_collapse() {
        let p = params(4.0, 3.0, 40.0);
        let r = rates(0.8, 0.0);
        let est = average_throughput_uncorrelated(&p, &split(1.0, 1.0), &r, 1e-8);
        let expect = r.r1 * crate::single_layer::success_prob_pair(r.r1, p.p_s, p.p_r);
        assert!((est.value - expect).abs() < 1e-6, "{} vs {}", est.value, expect);
    }

    #[test]
    fn quadrature_matches_mc() {
        let p = params(10.0, 10.0, 200.0);
        let s = split(0.8, 0.8);
        let r = rates(0.9, 0.7);
        let quad = average_throughput_uncorrelated(&p, &s, &r, 1e-7);
        let mc = mc_decode_stats(&p, &s, &corr(0.0, 0.0), &r, 1_000_000, 42).unwrap();
        let tol = ORACLE_SE_MULTIPLIER * mc.throughput.half_width;
        assert!(
            (quad.value - mc.throughput.value).abs() <= tol,
            "quad {} mc {} +- {}",
            quad.value,
            mc.throughput.value,
            tol
        );
    }

    #[test]
    fn quadrature_vanishes_at_huge_r1() {
        let p = params(4.0, 3.0, 1e9);
        let est = average_throughput_uncorrelated(&p, &split(0.7, 0.7), &rates(15.0, 0.0), 1e-7);
        assert!(est.value < 1e-4, "value = {}", est.value);
    }

    #[test]
    fn quadrature_falls_back_to_direct() {
        // q too small for the relay: expect the source-only value.
        let p = params(10.0, 10.0, 0.01);
        let s = split(0.8, 0.8);
        let r = rates(0.5, 0.4);
        let est = average_throughput_uncorrelated(&p, &s, &r, 1e-7);
        assert_eq!(est.value, direct_siso_two_layer(p.p_s, s.alpha, &r));
        // And the direct value agrees with Monte Carlo over the source link.
        let mc = crate::montecarlo::estimate(
            |d| {
                let sinr1 = d.nu_s * 0.8 * p.p_s / (1.0 + d.nu_s * 0.2 * p.p_s);
                let l1 = sinr1 > r.r1.exp_m1();
                let l2 = l1 && d.nu_s * 0.2 * p.p_s > r.r2.exp_m1();
                r.r1 * (l1 as u8 as f64) + r.r2 * (l2 as u8 as f64)
            },
            1_000_000,
            5,
            ORACLE_SE_MULTIPLIER,
        );
        assert!(mc.agrees_with(est.value), "{} vs {}", est.value, mc.value);
    }

    #[test]
    fn conic_examples() {
        // Indicator at the origin reduces to the sign of F.
        let p = params(5.0, 5.0, 30.0);
        let s = split(0.5, 0.5);
        let r1_ok = ((1.0 + p.p_s * p.q) / (1.0 + p.q * 0.5 * p.p_s)).ln() - 0.05;
        assert!(conic_indicator(&p, &s, r1_ok, 0.0, 0.0) > 0.0);
        // rho* example: p_s = 10, q = 1, alpha = beta = 0.5, r1 = 0.
        let p = params(10.0, 1.0, 1.0);
        let c = classify_conic(&p, &s, &rates(0.0, 0.0), None);
        assert!(c.feasible_at_origin);
        assert_eq!(c.rho1_cutoff, None); // rho*^2 = 2
        // Probe on the boundary at max_r1 with (rho1, rho2) = (0, 1).
        let p = params(5.0, 5.0, 30.0);
        let c = classify_conic(&p, &s, &rates(0.0, 0.0), None);
        let lhs = conic_indicator(&p, &s, c.max_r1, 0.0, 1.0);
        assert!(lhs.abs() < 1e-9 * (1.0 + p.p_s * p.q), "lhs = {lhs}");
        let c2 = classify_conic(&p, &s, &rates(c.max_r1 + 1e-9, 0.0), Some((0.0, 1.0)));
        assert_eq!(c2.probe_feasible, Some(false));
    }

    #[test]
    fn conic_indicator_decreasing_in_rho1() {
        let p = params(8.0, 4.0, 25.0);
        let s = split(0.6, 0.7);
        for j in 1..=5 {
            let rho2 = j as f64 / 5.0;
            let mut prev = f64::INFINITY;
            for i in 0..=10 {
                let v = conic_indicator(&p, &s, 0.3, i as f64 / 10.0, rho2);
                assert!(v < prev);
                prev = v;
            }
        }
    }

    #[test]
    fn conic_matches_relay_conjunct() {
        // Indicator sign == deterministic layer-1 relay test, cell by cell.
        let p = params(12.0, 9.0, 35.0);
        let s = split(0.55, 0.75);
        let r = rates(0.35, 0.2);
        for i in 0..=20 {
            for j in 0..=20 {
                let c = corr(i as f64 / 20.0, j as f64 / 20.0);
                let pre = prepare(&p, &s, &c, &r).unwrap();
                let ind = conic_indicator(&p, &s, r.r1, c.rho1, c.rho2) > 0.0;
                assert_eq!(pre.relay1_ok, ind, "at rho = ({}, {})", c.rho1, c.rho2);
            }
        }
    }

    #[test]
    fn p1_analytic_trivial_and_reduction() {
        let p = params(10.0, 10.0, 100.0);
        let s = split(0.3, 0.5);
        assert_eq!(
            p_layer1_miso_analytic(&p, &s, &corr(0.2, 0.3), 0.0, 1e-7).unwrap(),
            1.0
        );
        // Continuity towards the zero-correlation quadrature value.
        let quad = p_layer1_miso_quad(&p, &s, 0.5, 1e-8);
        let near = p_layer1_miso_analytic(&p, &s, &corr(1e-7, 0.0), 0.5, 1e-8).unwrap();
        assert!((quad - near).abs() < 1e-4, "{quad} vs {near}");
        let exact = p_layer1_miso_analytic(&p, &s, &corr(0.0, 0.0), 0.5, 1e-8).unwrap();
        assert!((quad - exact).abs() < 1e-12);
    }

    #[test]
    fn p1_analytic_domain_errors() {
        let p = params(10.0, 10.0, 100.0);
        // beta_bar e^{r1} >= 1.
        assert!(p_layer1_miso_analytic(&p, &split(0.1, 0.1), &corr(0.3, 0.1), 1.0, 1e-6).is_err());
        // beta < alpha.
        assert!(p_layer1_miso_analytic(&p, &split(0.8, 0.5), &corr(0.3, 0.1), 0.2, 1e-6).is_err());
    }

    fn mc_p1(p: &ChannelParams, s: &PowerSplit, c: &CorrelationPair, r1: f64, n: u64, seed: u64) -> ThroughputEstimate {
        let pre = prepare(p, s, c, &rates(r1, 0.0)).unwrap();
        crate::montecarlo::estimate(
            move |d| {
                let sc = (d.nu_s * d.nu_r).sqrt() * d.phi.cos();
                let num = 1.0 + d.nu_s * pre.p_s + d.nu_r * pre.p_r + pre.c1x * sc;
                let den = 1.0 + d.nu_s * pre.ab_ps + d.nu_r * pre.bb_pr + pre.c2x * sc;
                (num > pre.er1 * den) as u8 as f64
            },
            n,
            seed,
            ORACLE_SE_MULTIPLIER,
        )
    }

    #[test]
    fn p1_analytic_vs_mc_k_negative_a_prime_infinite() {
        // The interference-heavy configuration: k < 0 and a' = infinity.
        let p = params(10.0, 10.0, 100.0);
        let s = split(0.3, 0.5);
        let c = corr(0.2, 0.3);
        let v = p_layer1_miso_analytic(&p, &s, &c, 0.5, 1e-7).unwrap();
        let mc = mc_p1(&p, &s, &c, 0.5, 1_000_000, 91);
        assert!(mc.agrees_with(v), "analytic {v} vs mc {} +- {}", mc.value, mc.half_width);
    }

    #[test]
    fn p1_analytic_vs_mc_k_positive_a_prime_finite() {
        let p = params(10.0, 10.0, 100.0);
        let s = split(0.4, 0.6);
        let c = corr(0.6, 0.05);
        let r1 = 0.25;
        let v = p_layer1_miso_analytic(&p, &s, &c, r1, 1e-7).unwrap();
        let mc = mc_p1(&p, &s, &c, r1, 1_000_000, 92);
        assert!(mc.agrees_with(v), "analytic {v} vs mc {} +- {}", mc.value, mc.half_width);
    }

    #[test]
    fn p1_monotone_in_rate() {
        let p = params(10.0, 6.0, 80.0);
        let s = split(0.4, 0.7);
        let c = corr(0.3, 0.2);
        let mut prev = 1.0 + 1e-9;
        for i in 0..8 {
            let r1 = 0.05 + 0.05 * i as f64;
            let v = p_layer1_miso_analytic(&p, &s, &c, r1, 1e-7).unwrap();
            assert!((0.0..=1.0).contains(&v));
            assert!(v <= prev + 1e-6, "not monotone at r1={r1}: {v} > {prev}");
            prev = v;
        }
    }

    #[test]
    fn p2_reductions() {
        let p = params(10.0, 10.0, 100.0);
        let s = split(0.5, 0.5);
        assert_eq!(p_layer2_miso_analytic(&p, &s, 0.3, 0.0, 1e-7).unwrap(), 1.0);
        let v0 = p_layer2_miso_analytic(&p, &s, 0.0, 0.7, 1e-7).unwrap();
        let expect = hypoexp_tail(0.5 * p.p_s, 0.5 * p.p_r, 0.7f64.exp_m1());
        assert!((v0 - expect).abs() < 1e-12);
        // rho2 -> 1 closed form.
        let v1 = p_layer2_miso_analytic(&p, &s, 1.0, 0.7, 1e-7).unwrap();
        assert!((v1 - (-0.7f64.exp_m1() / 10.0).exp()).abs() < 1e-12);
        // Continuity near both ends.
        let ve = p_layer2_miso_analytic(&p, &s, 1e-6, 0.7, 1e-8).unwrap();
        assert!((ve - v0).abs() < 1e-4, "{ve} vs {v0}");
        assert!(p_layer2_miso_analytic(&p, &s, 1.2, 0.5, 1e-6).is_err());
        // Non-increasing in the rate argument, values in [0, 1].
        let mut prev = 1.0 + 1e-9;
        for i in 0..10 {
            let r2 = 0.1 + 0.2 * i as f64;
            let v = p_layer2_miso_analytic(&p, &s, 0.4, r2, 1e-7).unwrap();
            assert!((0.0..=1.0).contains(&v));
            assert!(v <= prev + 1e-6, "not monotone at r2={r2}");
            prev = v;
        }
    }

    #[test]
    fn p2_analytic_vs_mc() {
        let p = params(10.0, 10.0, 100.0);
        let s = split(0.5, 0.5);
        let (rho2, r2) = (0.5, 0.7);
        let v = p_layer2_miso_analytic(&p, &s, rho2, r2, 1e-7).unwrap();
        let c2 = r2.exp_m1();
        let (ap, bp) = (0.5 * p.p_s, 0.5 * p.p_r);
        let mc = crate::montecarlo::estimate(
            move |d| {
                let cross = 2.0 * rho2 * (ap * bp * d.nu_s * d.nu_r).sqrt() * d.phi.cos();
                (d.nu_s * ap + d.nu_r * bp + cross > c2) as u8 as f64
            },
            1_000_000,
            93,
            ORACLE_SE_MULTIPLIER,
        );
        assert!(mc.agrees_with(v), "analytic {v} vs mc {} +- {}", mc.value, mc.half_width);
    }

    #[test]
    fn p2_upper_bounds_joint_probability() {
        let p = params(10.0, 8.0, 60.0);
        let s = split(0.6, 0.6);
        let c = corr(0.0, 0.4);
        let r = rates(0.3, 0.5);
        let stats = mc_decode_stats(&p, &s, &c, &r, 500_000, 7).unwrap();
        let bound = p_layer2_miso_analytic(&p, &s, c.rho2, r.r2, 1e-7).unwrap();
        assert!(
            stats.p_both.value <= bound + ORACLE_SE_MULTIPLIER * stats.p_both.half_width,
            "joint {} bound {bound}",
            stats.p_both.value
        );
    }

    #[test]
    fn layering_single_layer_closed_form() {
        let lay = optimize_siso_layering(std::f64::consts::E, 1);
        assert!((lay.rates[0] - 1.0).abs() < 1e-10);
        let eta = (std::f64::consts::E - 1.0) / std::f64::consts::E;
        assert!((lay.thresholds[0] - eta).abs() < 1e-10);
        assert_eq!(lay.fractions, vec![1.0]);
    }

    #[test]
    fn layering_two_beats_one() {
        for &p in &[1.0, 10.0, 100.0] {
            let one = optimize_siso_layering(p, 1).objective();
            let two = optimize_siso_layering(p, 2).objective();
            assert!(two >= one - 1e-9, "p={p}: {two} < {one}");
        }
    }

    #[test]
    fn layering_two_matches_grid_oracle() {
        let p = 100.0;
        let lay = optimize_siso_layering(p, 2);
        // Exhaustive threshold grid with the same stationary fractions.
        let mut best = 0.0f64;
        let n = 400;
        for i in 0..n {
            let e1 = 1e-3 * (1.5f64 / 1e-3).powf(i as f64 / (n - 1) as f64);
            for j in 0..n {
                let e2 = e1 + (3.0 - e1) * j as f64 / (n - 1) as f64;
                let v = layering_objective(&[e1, e2], p);
                best = best.max(v);
            }
        }
        assert!(
            (lay.objective() - best).abs() < 1e-3,
            "optimizer {} vs grid {best}",
            lay.objective()
        );
        assert!(lay.objective() >= best - 1e-3);
    }

    #[test]
    fn q_min_layers_matches_single() {
        for &p in &[1.0, 5.0, 50.0] {
            let lay = optimize_siso_layering(p, 1);
            let q1 = q_min_layers(p, &lay);
            assert!((q1 - crate::single_layer::q_min_single(p)).abs() < 1e-9);
        }
        // Two layers need at least the single-layer gain, and stay below 1.
        for i in 0..=8 {
            let p = crate::db_to_linear(5.0 * i as f64);
            let q1 = q_min_layers(p, &optimize_siso_layering(p, 1));
            let q2 = q_min_layers(p, &optimize_siso_layering(p, 2));
            assert!(q2 >= q1 - 1e-6, "p={p}: q2={q2} q1={q1}");
            assert!(q2 < 1.0);
        }
    }

    #[test]
    fn optimizer_subset_consistency() {
        // Forcing the single-layer corner reproduces the single-layer value.
        let p = params(10.0, 10.0, 50.0);
        let (r_star, v_single) =
            crate::single_layer::maximize_throughput(&p, crate::single_layer::ThroughputMode::RhoZero);
        let v = average_throughput_uncorrelated(
            &p,
            &split(1.0, 1.0),
            &rates(r_star, 0.0),
            1e-7,
        );
        assert!((v.value - v_single).abs() < 1e-5, "{} vs {v_single}", v.value);
        // And the 4-D search can only do better.
        let opt = optimize_two_layer_throughput(&p, TwoLayerMode::UncorrelatedAnalytic, 900);
        assert!(opt.value.value >= v_single - 1e-6);
        // Same holds at high power with the gain above the layering threshold.
        let p = params(100.0, 100.0, 1.0);
        assert!(p.q > q_min_layers(p.p_s, &optimize_siso_layering(p.p_s, 2)));
        let (_, v_single) =
            crate::single_layer::maximize_throughput(&p, crate::single_layer::ThroughputMode::RhoZero);
        let opt = optimize_two_layer_throughput(&p, TwoLayerMode::UncorrelatedAnalytic, 900);
        assert!(opt.value.value >= v_single - 1e-6, "{} vs {v_single}", opt.value.value);
    }

    #[test]
    fn optimizer_correlated_prefers_origin() {
        let p = params(
            crate::db_to_linear(22.0),
            crate::db_to_linear(30.0),
            crate::db_to_linear(40.0),
        );
        let opt = optimize_two_layer_throughput(
            &p,
            TwoLayerMode::CorrelatedMc { seed: 11, samples: 20_000 },
            600,
        );
        assert!(
            opt.corr.rho1 <= 0.101 && opt.corr.rho2 <= 0.101,
            "best corr = ({}, {})",
            opt.corr.rho1,
            opt.corr.rho2
        );
    }
}
