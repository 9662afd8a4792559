//! Derivative-free scalar and box-constrained maximization.

/// Golden-section maximization of a uni-modal function on [lo, hi].
///
/// Returns (x*, f(x*)) with the bracket narrowed to `tol_x`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol_x: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    if hi <= lo || (hi - lo).is_nan() {
        return (lo, f(lo));
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol_x {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Compass pattern search on a box, halving the step on failed polls.
///
/// Stops when the step drops below `min_step` or `max_evals` objective
/// evaluations have been spent. Deterministic for fixed inputs.
pub fn pattern_search_max<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    init_step: f64,
    min_step: f64,
    max_evals: u32,
) -> (Vec<f64>, f64) {
    let dim = x0.len();
    let mut x: Vec<f64> = x0
        .iter()
        .zip(lo.iter().zip(hi.iter()))
        .map(|(&v, (&l, &h))| v.clamp(l, h))
        .collect();
    let mut best = f(&x);
    let mut evals = 1u32;
    let mut step = init_step;
    while step > min_step && evals < max_evals {
        let mut improved = false;
        for i in 0..dim {
            if hi[i] <= lo[i] {
                continue; // pinned coordinate
            }
            let span = hi[i] - lo[i];
            for dir in [1.0, -1.0] {
                let cand = (x[i] + dir * step * span).clamp(lo[i], hi[i]);
                if cand == x[i] {
                    continue;
                }
                let old = x[i];
                x[i] = cand;
                let v = f(&x);
                evals += 1;
                if v > best {
                    best = v;
                    improved = true;
                } else {
                    x[i] = old;
                }
                if evals >= max_evals {
                    return (x, best);
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, best)
}

/// Bisection root find on [lo, hi]; requires f(lo) and f(hi) of opposite sign.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol_x: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol_x {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(|x| -(x - 1.3) * (x - 1.3), -5.0, 5.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-8);
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn pattern_search_quadratic_bowl() {
        let f = |x: &[f64]| -(x[0] - 0.4) * (x[0] - 0.4) - (x[1] - 0.7) * (x[1] - 0.7);
        let (x, _) = pattern_search_max(f, &[0.1, 0.1], &[0.0, 0.0], &[1.0, 1.0], 0.25, 1e-9, 10_000);
        assert!((x[0] - 0.4).abs() < 1e-6);
        assert!((x[1] - 0.7).abs() < 1e-6);
    }

    #[test]
    fn pattern_search_respects_pinned_bounds() {
        let f = |x: &[f64]| -(x[0] - 0.4) * (x[0] - 0.4) + x[1];
        let (x, _) = pattern_search_max(f, &[1.0, 1.0], &[0.0, 1.0], &[1.0, 1.0], 0.25, 1e-9, 1000);
        assert_eq!(x[1], 1.0);
        assert!((x[0] - 0.4).abs() < 1e-6);
    }

    #[test]
    fn bisect_log_root() {
        let r = bisect(|x| x.ln(), 0.5, 2.0, 1e-12);
        assert!((r - 1.0).abs() < 1e-10);
    }
}
