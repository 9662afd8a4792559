//! Real-valued Lambert W function on the two real branches.
//!
//! W(x) is the inverse of w -> w*exp(w). The principal branch W0 is defined
//! for x >= -1/e and returns w >= -1; the -1 branch W-1 is defined for
//! -1/e <= x < 0 and returns w <= -1. Every rate/power threshold in this
//! crate reduces to one of these two branches.

use crate::error::{Error, Result};

/// Which real branch of the Lambert W function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WBranch {
    /// W0, defined for x >= -1/e, value >= -1.
    Principal,
    /// W-1, defined for -1/e <= x < 0, value <= -1.
    MinusOne,
}

const MAX_ITER: usize = 50;
const STEP_TOL: f64 = 1e-14;
/// Arguments within this distance of -1/e are snapped to the branch point,
/// avoiding a square root of a negative number in the initial guess.
const BRANCH_POINT_SLACK: f64 = 1e-15;

fn neg_inv_e() -> f64 {
    -(-1.0f64).exp()
}

/// Evaluate the Lambert W function at `x` on the given branch.
///
/// The result w satisfies |w*exp(w) - x| <= 1e-12 * max(1, |x|).
pub fn lambert_w(x: f64, branch: WBranch) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("lambert_w argument {x} not finite")));
    }
    let bp = neg_inv_e();
    if (x - bp).abs() <= BRANCH_POINT_SLACK {
        return Ok(-1.0);
    }
    match branch {
        WBranch::Principal => {
            if x < bp {
                return Err(Error::Domain(format!(
                    "lambert_w principal branch needs x >= -1/e, got {x}"
                )));
            }
            if x == 0.0 {
                return Ok(0.0);
            }
            Ok(halley(x, guess_principal(x)))
        }
        WBranch::MinusOne => {
            if x < bp || x >= 0.0 {
                return Err(Error::Domain(format!(
                    "lambert_w -1 branch needs -1/e <= x < 0, got {x}"
                )));
            }
            Ok(halley(x, guess_minus_one(x)))
        }
    }
}

fn guess_principal(x: f64) -> f64 {
    if x > 3.0 {
        // Asymptotic: L1 - L2 + L2/L1.
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    } else if x < -0.25 {
        // Series around the branch point at -1/e.
        let p = (2.0 * (std::f64::consts::E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 * p * p * p / 72.0
    } else {
        x.ln_1p()
    }
}

fn guess_minus_one(x: f64) -> f64 {
    if x < -0.25 {
        // Branch-point series with the negative root.
        let p = -(2.0 * (std::f64::consts::E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 * p * p * p / 72.0
    } else {
        // Asymptotic near 0-: L1 - L2 + L2/L1 with L1 = ln(-x), L2 = ln(-L1).
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    }
}

fn halley(x: f64, mut w: f64) -> f64 {
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        // Halley denominator: e^w (w+1) - (w+2) f / (2w+2).
        let wp1 = w + 1.0;
        let denom = if wp1.abs() < 1e-12 {
            ew * wp1
        } else {
            ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        };
        if denom == 0.0 {
            break;
        }
        let step = f / denom;
        w -= step;
        if step.abs() <= STEP_TOL * w.abs().max(1.0) {
            break;
        }
    }
    w
}
