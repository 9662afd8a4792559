//! Single-layer block-Markov quantities: success probabilities, correlated
//! and uncorrelated throughput, the correlation-region classifier, minimal
//! collocation gain, the source-power threshold, and the numeric audits
//! backing the rho = 0 optimality conjecture.
//!
//! Closed forms build on two exponential-fading primitives:
//!   su(R, p)        = exp(-(e^R - 1)/p)                  single antenna
//!   pair(R, x, y)   = P(x E1 + y E2 > e^R - 1)           two antennas
//! with E1, E2 i.i.d. unit exponentials. Maximal correlation between the
//! terminals acts as a re-allocation of the total power P into (p0, P - p0).

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::optim::golden_max;
use crate::special::{lambert_w, WBranch};

/// P(x E1 + y E2 > c) for independent unit exponentials (hypoexponential
/// tail). Continuous in (x, y) including x = y and a vanishing coordinate.
pub fn hypoexp_tail(x: f64, y: f64, c: f64) -> f64 {
    if c <= 0.0 {
        return 1.0;
    }
    if x <= 0.0 && y <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return (-c / x).exp();
    }
    if x <= 0.0 {
        return (-c / y).exp();
    }
    if (x - y).abs() <= 1e-9 * x.max(y) {
        let z = c / (0.5 * (x + y));
        (1.0 + z) * (-z).exp()
    } else {
        (x * (-c / x).exp() - y * (-c / y).exp()) / (x - y)
    }
}

/// Single-user success probability over Rayleigh fading with power `p`.
pub fn success_prob_su(rate: f64, p: f64) -> f64 {
    debug_assert!(rate >= 0.0 && p > 0.0);
    (-rate.exp_m1() / p).exp()
}

/// Success probability of the two-antenna sum with per-antenna powers x, y.
pub fn success_prob_pair(rate: f64, x: f64, y: f64) -> f64 {
    hypoexp_tail(x, y, rate.exp_m1())
}

/// gamma_0 = -W_{-1}(-e^{-1/2}/2) - 1/2, the lower edge of the correlation
/// uncertainty region (~1.2564).
pub fn gamma0() -> f64 {
    let arg = -0.5 * (-0.5f64).exp();
    -lambert_w(arg, WBranch::MinusOne).expect("argument is inside the -1 branch domain") - 0.5
}

/// x_0 = 2 * gamma_0 (~2.5128): the normalized threshold where the
/// equal-power pair and the single user with the pooled power have equal
/// success probability, i.e. (1 + x_0) e^{-x_0/2} = 1.
pub fn crossover_x0() -> f64 {
    2.0 * gamma0()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoRegionKind {
    /// Below the uncertainty region: zero correlation is optimal.
    ZeroOptimal,
    /// Inside it: the optimum is either 0 or the maximal feasible value.
    Ambiguous,
    /// Above it: maximal correlation is optimal.
    MaxOptimal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoRegion {
    pub kind: RhoRegionKind,
    pub r_low: f64,
    pub r_high: f64,
}

/// Classify an attempted rate against the correlation uncertainty region
/// [log(1 + gamma_0 P), log(1 + gamma P)].
///
/// `gamma` is the scheme-dependent upper coefficient (3/2 for equal source
/// and relay powers). With `q_infinite` the ambiguous band collapses and
/// r_low becomes the exact boundary between the two optima.
pub fn classify_rho_region(
    rate: f64,
    params: &ChannelParams,
    gamma: f64,
    q_infinite: bool,
) -> Result<RhoRegion> {
    let g0 = gamma0();
    if gamma < g0 - 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "gamma must be >= gamma0 ~ {g0:.4}, got {gamma}"
        )));
    }
    let p = params.total_power();
    let r_low = (g0 * p).ln_1p();
    let r_high = (gamma * p).ln_1p();
    let kind = if q_infinite {
        if rate <= r_low {
            RhoRegionKind::ZeroOptimal
        } else {
            RhoRegionKind::MaxOptimal
        }
    } else if rate < r_low {
        RhoRegionKind::ZeroOptimal
    } else if rate <= r_high {
        RhoRegionKind::Ambiguous
    } else {
        RhoRegionKind::MaxOptimal
    };
    Ok(RhoRegion { kind, r_low, r_high })
}

/// The equivalent power re-allocation induced by maximal correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatedAllocation {
    pub p0: f64,
    pub p0_bar: f64,
    /// (p0 - p0_bar) / P in [0, 1].
    pub skew_delta: f64,
}

/// Power re-allocation p0 = (P + sqrt(P^2 - 4 p_r (e^R - 1)/q))/2 for the
/// maximally correlated scheme at the attempted rate.
pub fn correlated_allocation(rate: f64, params: &ChannelParams) -> Result<CorrelatedAllocation> {
    let p = params.total_power();
    let c = rate.exp_m1();
    let disc = p * p - 4.0 * params.p_r * c / params.q;
    if disc < 0.0 {
        return Err(Error::InfeasibleRate { rate });
    }
    let p0 = 0.5 * (p + disc.sqrt());
    let p0_bar = p - p0;
    Ok(CorrelatedAllocation { p0, p0_bar, skew_delta: (p0 - p0_bar) / p })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThroughputMode {
    RhoZero,
    RhoMax,
}

/// Average throughput R * P(decode R) of the single-layer scheme.
pub fn throughput(rate: f64, params: &ChannelParams, mode: ThroughputMode) -> Result<f64> {
    let c = rate.exp_m1();
    let prob = match mode {
        ThroughputMode::RhoZero => hypoexp_tail(params.p_s, params.p_r, c),
        ThroughputMode::RhoMax => {
            let alloc = correlated_allocation(rate, params)?;
            hypoexp_tail(alloc.p0, alloc.p0_bar, c)
        }
    };
    Ok(rate * prob)
}

/// Locate the throughput-maximizing rate by golden-section search over
/// [1e-6, log(1 + 1000 P)] (clipped to the feasible range for RhoMax).
pub fn maximize_throughput(params: &ChannelParams, mode: ThroughputMode) -> (f64, f64) {
    let p = params.total_power();
    let mut hi = (1e3 * p).ln_1p();
    if mode == ThroughputMode::RhoMax && params.p_r > 0.0 {
        // Feasibility cap: discriminant >= 0.
        let c_max = p * p * params.q / (4.0 * params.p_r);
        hi = hi.min(c_max.ln_1p());
    }
    let lo = 1e-6;
    if hi <= lo {
        let v = throughput(hi, params, mode).unwrap_or(0.0);
        return (hi, v);
    }
    let (mut x, mut v) = golden_max(
        |r| throughput(r, params, mode).unwrap_or(0.0),
        lo,
        hi,
        1e-10,
    );
    if mode == ThroughputMode::RhoZero {
        // Golden section is noise-limited near the flat top; the stationarity
        // condition has a closed-form derivative, so polish with secant.
        let g = |r: f64| throughput_deriv_rho_zero(r, params.p_s, params.p_r);
        let (mut a, mut b) = (x - 1e-6, x + 1e-6);
        let (mut ga, mut gb) = (g(a), g(b));
        for _ in 0..40 {
            if (gb - ga).abs() < 1e-300 {
                break;
            }
            let c = b - gb * (b - a) / (gb - ga);
            if !c.is_finite() || c <= lo || c >= hi {
                break;
            }
            a = b;
            ga = gb;
            b = c;
            gb = g(c);
            if (b - a).abs() < 1e-14 {
                break;
            }
        }
        if b.is_finite() && b > lo && b < hi {
            if let Ok(vb) = throughput(b, params, mode) {
                if vb >= v - 1e-12 {
                    x = b;
                    v = vb;
                }
            }
        }
    }
    (x, v)
}

/// Rate a source oblivious to the relay attempts: the single-user
/// throughput-optimal rate W(p_s).
pub fn oblivious_su_rate(p_s: f64) -> f64 {
    lambert_w(p_s, WBranch::Principal).expect("p_s > 0 is inside the principal domain")
}

/// Best direct-transmission throughput of a lone source with power `p_s`:
/// W(p_s) e^{-(e^{W(p_s)} - 1)/p_s}.
pub fn su_opt_throughput(p_s: f64) -> f64 {
    let r = oblivious_su_rate(p_s);
    r * success_prob_su(r, p_s)
}

/// Throughput of the oblivious single-layer scheme: the source attempts its
/// single-user optimal rate; when the relay can decode it (q above the
/// minimal gain) the destination sees the coherent pair, otherwise the relay
/// stays silent and the value falls back to direct transmission.
pub fn oblivious_bm_throughput(params: &ChannelParams) -> f64 {
    let r = oblivious_su_rate(params.p_s);
    if r < (params.p_s * params.q).ln_1p() {
        r * success_prob_pair(r, params.p_s, params.p_r)
    } else {
        r * success_prob_su(r, params.p_s)
    }
}

/// Minimal collocation gain for the relay to decode the oblivious rate:
/// (e^{W(p_s)} - 1)/p_s, always in (0, 1) and decreasing in p_s.
pub fn q_min_single(p_s: f64) -> f64 {
    debug_assert!(p_s > 0.0);
    oblivious_su_rate(p_s).exp_m1() / p_s
}

/// Minimal source power making coherent-combining rates achievable at
/// collocation gain `q`; 0 for q >= 1 (unconditional).
///
/// Defined by W(P*) = log(1 + P* q); evaluated on the principal branch with
/// the negative argument -(1/q) e^{-1/q}. (The -1 branch only returns the
/// trivial root P = 0.)
pub fn p_s_star(q: f64) -> Result<f64> {
    if !(q.is_finite() && q > 0.0) {
        return Err(Error::Domain(format!("collocation gain must be > 0, got {q}")));
    }
    if q >= 1.0 {
        return Ok(0.0);
    }
    let t = 1.0 / q;
    let w = lambert_w(-t * (-t).exp(), WBranch::Principal)?;
    Ok((w + t).exp_m1() / q)
}

// ---------------------------------------------------------------------------
// Throughput derivatives and the uni-modality / conjecture audits
// ---------------------------------------------------------------------------

/// d/dR of R * pair(R, x, y) in closed form.
pub fn throughput_deriv_rho_zero(rate: f64, x: f64, y: f64) -> f64 {
    let c = rate.exp_m1();
    let er = rate.exp();
    if (x - y).abs() <= 1e-9 * x.max(y) {
        let xm = 0.5 * (x + y);
        (1.0 + c / xm - c * rate * er / (xm * xm)) * (-c / xm).exp()
    } else {
        let (ex, ey) = ((-c / x).exp(), (-c / y).exp());
        (x * ex - y * ey) / (x - y) + rate * er * (ey - ex) / (x - y)
    }
}

/// True iff the derivative of the rho = 0 throughput changes sign exactly
/// once on a log-spaced rate grid spanning (0, log(1 + 1000 P)].
pub fn unimodality_check(params: &ChannelParams) -> bool {
    let hi = (1e3 * params.total_power()).ln_1p();
    let lo: f64 = 1e-6;
    let n = 1500;
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    let mut changes = 0;
    let mut prev = 0i8;
    let mut r = lo;
    for _ in 0..n {
        let d = throughput_deriv_rho_zero(r, params.p_s, params.p_r);
        let s = if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        };
        if s != 0 {
            if prev != 0 && s != prev {
                changes += 1;
            }
            prev = s;
        }
        r *= ratio;
    }
    changes == 1
}

/// The unique source power solving the equal-power stationarity condition at
/// a given rate; strictly increasing, slope (sqrt(5)-1)/2 at 0+.
pub fn ps_of_rate(rate: f64) -> f64 {
    let c = rate.exp_m1();
    0.5 * (-c + (c * c + 4.0 * rate * c * rate.exp()).sqrt())
}

/// Left-hand side of the general derivative-sign inequality at R0: the
/// limit-safe ratio (x e^{-y/x} - y e^{-x/y}) / (e^{-y/x} - e^{-x/y}).
pub fn deriv_sign_lhs(x: f64, y: f64) -> f64 {
    if (x - y).abs() <= 1e-9 * x.max(y) {
        // (1 + c/x) x^2 / c with c = x + y -> 3x/2 at x = y.
        let xm = 0.5 * (x + y);
        let c = x + y;
        (1.0 + c / xm) * xm * xm / c
    } else {
        let (ex, ey) = ((-y / x).exp(), (-x / y).exp());
        (x * ex - y * ey) / (ex - ey)
    }
}

/// Equal-power derivative-sign inequality: 3 p_s / 2 < log(1+2p_s)(1+2p_s).
pub fn ineq21_holds(p_s: f64) -> bool {
    1.5 * p_s < (2.0 * p_s).ln_1p() * (1.0 + 2.0 * p_s)
}

/// General derivative-sign inequality at R0 = log(1 + P).
pub fn ineq23_holds(p_s: f64, p_r: f64) -> bool {
    let p = p_s + p_r;
    deriv_sign_lhs(p_s, p_r) < p.ln_1p() * (1.0 + p)
}

/// Sharper bound for a source stronger than the relay: LHS < p_s + p_r.
pub fn ineq24_holds(p_s: f64, p_r: f64) -> bool {
    deriv_sign_lhs(p_s, p_r) < p_s + p_r
}

/// Normalized maximal-correlation decoding probability at rate log(1+alpha P)
/// as a function of the reachability parameter s = P q / (2 p_r); defined for
/// 1 <= alpha <= s/2.
pub fn k_alpha(alpha: f64, s: f64) -> f64 {
    let d = if s.is_finite() { (1.0 - 2.0 * alpha / s).max(0.0).sqrt() } else { 1.0 };
    hypoexp_tail(1.0 + d, 1.0 - d, 2.0 * alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig8Row {
    pub alpha: f64,
    pub k1: f64,
    pub alpha_k_alpha: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conjecture1Report {
    /// The reference rate log(1+P) is not reachable by the maximally
    /// correlated scheme, so the conjecture holds with nothing to check.
    pub trivially_holds: bool,
    /// s = P q / (2 p_r); reachability means s >= 2.
    pub s: f64,
    pub derivative_at_r0: f64,
    pub derivative_negative: bool,
    pub ineq21_ok: bool,
    pub ineq23_ok: bool,
    /// Only checked when p_s > p_r.
    pub ineq24_ok: Option<bool>,
    pub fig8: Vec<Fig8Row>,
    pub pass: bool,
}

/// Numeric audit of the derivative-sign conditions and the alpha k(alpha)
/// throughput inequality behind the rho = 0 optimality conjecture.
pub fn audit_conjecture1(params: &ChannelParams, alpha_grid: &[f64]) -> Conjecture1Report {
    let p = params.total_power();
    let s = if params.p_r > 0.0 { p * params.q / (2.0 * params.p_r) } else { f64::INFINITY };
    let trivially_holds = s < 2.0;
    let r0 = p.ln_1p();
    let derivative_at_r0 = throughput_deriv_rho_zero(r0, params.p_s, params.p_r);
    let derivative_negative = derivative_at_r0 < 0.0;
    let ineq21_ok = ineq21_holds(params.p_s);
    let ineq23_ok = ineq23_holds(params.p_s, params.p_r);
    let ineq24_ok =
        if params.p_s > params.p_r { Some(ineq24_holds(params.p_s, params.p_r)) } else { None };
    let k1 = k_alpha(1.0, s);
    let fig8: Vec<Fig8Row> = alpha_grid
        .iter()
        .copied()
        .filter(|&a| a > 1.0 && a <= s / 2.0 + 1e-12)
        .map(|alpha| {
            let aka = alpha * k_alpha(alpha, s);
            Fig8Row { alpha, k1, alpha_k_alpha: aka, pass: aka < k1 }
        })
        .collect();
    let pass = trivially_holds
        || (derivative_negative
            && ineq23_ok
            && ineq24_ok.unwrap_or(true)
            && fig8.iter().all(|r| r.pass));
    Conjecture1Report {
        trivially_holds,
        s,
        derivative_at_r0,
        derivative_negative,
        ineq21_ok,
        ineq23_ok,
        ineq24_ok,
        fig8,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{estimate, ORACLE_SE_MULTIPLIER};

    fn params(p_s: f64, p_r: f64, q: f64) -> ChannelParams {
        ChannelParams::new(p_s, p_r, q).unwrap()
    }

    #[test]
    fn su_examples() {
        assert_eq!(success_prob_su(0.0, 3.0), 1.0);
        let p = 2.5f64;
        let r = p.ln_1p();
        assert!((success_prob_su(r, p) - (-1.0f64).exp()).abs() < 1e-14);
        let v = success_prob_su(1.0, 10.0);
        assert!((v - (-(std::f64::consts::E - 1.0) / 10.0).exp()).abs() < 1e-15);
        assert!((v - 0.8422).abs() < 1e-4);
    }

    #[test]
    fn pair_examples() {
        assert_eq!(success_prob_pair(0.0, 1.0, 2.0), 1.0);
        // c = 1, x = y = 1: (1 + 1) e^{-1}.
        let r = 2.0f64.ln();
        assert!((success_prob_pair(r, 1.0, 1.0) - 2.0 * (-1.0f64).exp()).abs() < 1e-14);
        // c = 1, x = 2, y = 1: 2 e^{-1/2} - e^{-1}.
        let v = success_prob_pair(r, 2.0, 1.0);
        assert!((v - (2.0 * (-0.5f64).exp() - (-1.0f64).exp())).abs() < 1e-14);
        assert!((v - 0.8452).abs() < 1e-4);
    }

    #[test]
    fn pair_symmetry_and_continuity() {
        for &(x, y, c) in &[(1.0, 3.0, 0.7), (0.2, 5.0, 2.0), (4.0, 4.0, 1.0)] {
            assert_eq!(hypoexp_tail(x, y, c), hypoexp_tail(y, x, c));
        }
        let eps = 1e-6;
        for &x in &[0.5, 1.0, 10.0] {
            let equal = hypoexp_tail(x, x, 1.3);
            assert!((hypoexp_tail(x, x + eps, 1.3) - equal).abs() < 1e-5);
            assert!((hypoexp_tail(x, x - eps, 1.3) - equal).abs() < 1e-5);
        }
    }

    #[test]
    fn crossover_values() {
        let x0 = crossover_x0();
        assert!((x0 - 2.5128).abs() < 1e-3);
        assert!(((1.0 + x0) * (-x0 / 2.0).exp() - 1.0).abs() < 1e-10);
        assert_eq!(x0, 2.0 * gamma0());
        // At R = log(1 + x0 p), pair(p, p) and su(2p) coincide.
        let p = 1.0;
        let r = (x0 * p).ln_1p();
        let a = success_prob_su(r, 2.0 * p);
        let b = success_prob_pair(r, p, p);
        assert!((a - b).abs() < 1e-12);
        assert!((a - 0.2847).abs() < 1e-3);
    }

    #[test]
    fn pair_vs_su_crossing_side() {
        // pair >= su iff R <= log(1 + x0 p).
        let p = 2.0;
        let rc = (crossover_x0() * p).ln_1p();
        assert!(success_prob_pair(rc - 0.3, p, p) > success_prob_su(rc - 0.3, 2.0 * p));
        assert!(success_prob_pair(rc + 0.3, p, p) < success_prob_su(rc + 0.3, 2.0 * p));
    }

    #[test]
    fn classify_examples() {
        let pr = params(1.0, 1.0, 10.0);
        let reg = classify_rho_region(0.0, &pr, 1.5, false).unwrap();
        assert_eq!(reg.kind, RhoRegionKind::ZeroOptimal);
        let mid = classify_rho_region(reg.r_low + 1e-3, &pr, 1.5, false).unwrap();
        assert_eq!(mid.kind, RhoRegionKind::Ambiguous);
        let top = classify_rho_region((1.5 * 2.0f64).ln_1p() + 1e-6, &pr, 1.5, false).unwrap();
        assert_eq!(top.kind, RhoRegionKind::MaxOptimal);
        // q -> infinity collapses the band.
        let inf = classify_rho_region(reg.r_low + 1e-3, &pr, 1.5, true).unwrap();
        assert_eq!(inf.kind, RhoRegionKind::MaxOptimal);
        assert!(classify_rho_region(1.0, &pr, 1.0, false).is_err());
    }

    #[test]
    fn allocation_examples() {
        // Q -> infinity: p0 -> P, skew -> 1.
        let pr = params(1.0, 1.0, 1e12);
        let a = correlated_allocation(1.0, &pr).unwrap();
        assert!(a.skew_delta > 1.0 - 1e-6);
        assert!((a.p0 - 2.0).abs() < 1e-6);
        // Discriminant-zero case.
        let pr = params(1.0, 1.0, 2.0);
        let a = correlated_allocation(3.0f64.ln(), &pr).unwrap();
        assert!((a.p0 - 1.0).abs() < 1e-12);
        assert!(a.skew_delta.abs() < 1e-12);
        // Identity p0 + p0_bar = P, exactly.
        for i in 1..20 {
            let rate = 0.1 * i as f64;
            let pr = params(2.0, 3.0, 8.0);
            if let Ok(al) = correlated_allocation(rate, &pr) {
                assert_eq!(al.p0 + al.p0_bar, pr.total_power());
            }
        }
        assert!(matches!(
            correlated_allocation(10.0, &params(1.0, 1.0, 0.1)),
            Err(Error::InfeasibleRate { .. })
        ));
    }

    #[test]
    fn throughput_examples() {
        let pr = params(1.0, 1.0, 5.0);
        assert_eq!(throughput(0.0, &pr, ThroughputMode::RhoZero).unwrap(), 0.0);
        assert_eq!(throughput(0.0, &pr, ThroughputMode::RhoMax).unwrap(), 0.0);
        // Huge q: RhoMax collapses to single user with the pooled power.
        let pr = params(1.0, 1.0, 1e12);
        let r = 0.7;
        let v = throughput(r, &pr, ThroughputMode::RhoMax).unwrap();
        let su = r * (-r.exp_m1() / 2.0).exp();
        assert!((v - su).abs() < 1e-6);
        // Direct evaluation: P_s = P_r = 2, rate = log(1+4).
        let pr = params(2.0, 2.0, 5.0);
        let r = 4.0f64.ln_1p();
        let v = throughput(r, &pr, ThroughputMode::RhoZero).unwrap();
        assert!((v - r * 3.0 * (-2.0f64).exp()).abs() < 1e-14);
        assert!((v - 0.6534).abs() < 1e-4);
    }

    #[test]
    fn throughput_rho_max_internal_consistency() {
        let pr = params(3.0, 1.5, 6.0);
        for i in 1..15 {
            let rate = 0.15 * i as f64;
            match correlated_allocation(rate, &pr) {
                Ok(a) => {
                    let direct = rate * hypoexp_tail(a.p0, a.p0_bar, rate.exp_m1());
                    let v = throughput(rate, &pr, ThroughputMode::RhoMax).unwrap();
                    assert!((v - direct).abs() < 1e-14);
                }
                Err(_) => {
                    assert!(throughput(rate, &pr, ThroughputMode::RhoMax).is_err());
                }
            }
        }
    }

    #[test]
    fn maximize_single_user_analog() {
        // max R e^{-(e^R-1)/p} at R = W(p); for p = e that is exactly 1.
        let (r, _) = golden_max(
            |r| r * success_prob_su(r, std::f64::consts::E),
            1e-6,
            10.0,
            1e-10,
        );
        assert!((r - 1.0).abs() < 1e-7);
    }

    #[test]
    fn maximize_stationarity_residual() {
        let pr = params(1.0, 1.0, 10.0);
        let (rs, _) = maximize_throughput(&pr, ThroughputMode::RhoZero);
        // m(R) = p^2 + p c, n(R) = R e^R c at the equal-power stationary point.
        let c = rs.exp_m1();
        let m = 1.0 + c;
        let n = rs * rs.exp() * c;
        assert!(((m - n) / m.max(n)).abs() < 1e-8, "residual {}", m - n);
        // Optimum sits below R0 = log(1 + P).
        assert!(rs < pr.total_power().ln_1p());
    }

    #[test]
    fn conjecture_holds_at_unit_powers() {
        let pr = params(1.0, 1.0, 10.0);
        let (_, v0) = maximize_throughput(&pr, ThroughputMode::RhoZero);
        let (_, vmax) = maximize_throughput(&pr, ThroughputMode::RhoMax);
        assert!(v0 >= vmax - 1e-12, "v0 = {v0}, vmax = {vmax}");
    }

    #[test]
    fn oblivious_rate_examples() {
        assert!((oblivious_su_rate(std::f64::consts::E) - 1.0).abs() < 1e-12);
        assert!((oblivious_su_rate(1.0) - 0.5671432904097838).abs() < 1e-12);
        for &p in &[0.1, 1.0, 10.0, 100.0] {
            assert!(oblivious_su_rate(p) < p.ln_1p());
        }
    }

    #[test]
    fn q_min_examples() {
        let v = q_min_single(std::f64::consts::E);
        assert!((v - (1.0 - 1.0 / std::f64::consts::E)).abs() < 1e-12);
        assert!(q_min_single(10.0) > q_min_single(100.0));
        assert!(q_min_single(1e6) < 0.1);
        for &p in &[0.01, 0.1, 1.0, 10.0, 1e4] {
            let q = q_min_single(p);
            assert!(q > 0.0 && q < 1.0, "q_min({p}) = {q}");
        }
    }

    #[test]
    fn p_s_star_examples() {
        let p = p_s_star(0.5).unwrap();
        assert!((p - 7.85).abs() < 0.1, "p* = {p}");
        assert_eq!(p_s_star(1.0).unwrap(), 0.0);
        assert_eq!(p_s_star(2.0).unwrap(), 0.0);
        assert!(p_s_star(0.0).is_err());
        for i in 1..10 {
            let q = 0.1 * i as f64;
            let ps = p_s_star(q).unwrap();
            if ps == 0.0 {
                continue;
            }
            let w = lambert_w(ps, WBranch::Principal).unwrap();
            assert!((w - (ps * q).ln_1p()).abs() < 1e-9, "q = {q}");
        }
    }

    #[test]
    fn unimodality_examples() {
        assert!(unimodality_check(&params(1.0, 1.0, 5.0)));
        assert!(unimodality_check(&params(4.0, 1.0, 5.0)));
        // Initializer slope at the origin.
        let h = 1e-7;
        let slope = (ps_of_rate(2.0 * h) - ps_of_rate(h)) / h;
        assert!((slope - (5.0f64.sqrt() - 1.0) / 2.0).abs() < 1e-3, "slope = {slope}");
    }

    #[test]
    fn audit_examples() {
        assert!(ineq21_holds(1.0));
        for i in 0..100 {
            let p = 0.01 * 10f64.powf(6.0 * i as f64 / 99.0);
            assert!(ineq21_holds(p), "p = {p}");
        }
        // alpha -> 1+ margin vanishes.
        let s = 100.0;
        let k1 = k_alpha(1.0, s);
        let margin = k1 - (1.0 + 1e-6) * k_alpha(1.0 + 1e-6, s);
        assert!(margin.abs() < 1e-4 && margin > -1e-12, "margin = {margin}");
        // Full audit at q = 100, grid over (1, 50].
        let grid: Vec<f64> = (1..=100).map(|i| 1.0 + 49.0 * i as f64 / 100.0).collect();
        let rep = audit_conjecture1(&params(1.0, 1.0, 100.0), &grid);
        assert!(!rep.trivially_holds);
        assert!((rep.s - 100.0).abs() < 1e-12);
        assert!(rep.pass, "{rep:?}");
        assert!(rep.fig8.iter().all(|r| r.pass));
    }

    #[test]
    fn audit_trivial_when_r0_unreachable() {
        let rep = audit_conjecture1(&params(1.0, 1.0, 0.5), &[1.5, 2.0]);
        assert!(rep.trivially_holds);
        assert!(rep.pass);
    }

    #[test]
    fn closed_forms_match_monte_carlo() {
        let seed = 2024;
        // su oracle: single exponential with pooled power.
        let (rate, p) = (0.9f64, 3.0);
        let mc = estimate(
            |d| if p * d.nu_s > rate.exp_m1() { 1.0 } else { 0.0 },
            1_000_000,
            seed,
            ORACLE_SE_MULTIPLIER,
        );
        assert!(mc.agrees_with(success_prob_su(rate, p)));
        // pair oracle.
        let (x, y) = (2.0, 1.0);
        let rate = 2.0f64.ln();
        let mc = estimate(
            |d| if x * d.nu_s + y * d.nu_r > rate.exp_m1() { 1.0 } else { 0.0 },
            1_000_000,
            seed + 1,
            ORACLE_SE_MULTIPLIER,
        );
        assert!(mc.agrees_with(success_prob_pair(rate, x, y)));
    }
}
