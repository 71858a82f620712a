//! Small numerical utilities shared across the engine: the `ln ln` guard,
//! golden-section line search, and monotone root bracketing.

/// Lower edge of the doubly-logarithmic domain, `e^e`.
///
/// `ln ln a` is evaluated only for `a > e^e`, so that both logs are
/// positive and every formula consuming them is total.
pub const LN_LN_FLOOR: f64 = 15.154262241479262;

/// Smallest integer round index with `ln ln n` defined (`16 > e^e`).
pub const N0: u64 = 16;

/// `ln ln a` for `a > e^e`, else `None`.
pub fn ln_ln(a: f64) -> Option<f64> {
    if a > LN_LN_FLOOR {
        Some(a.ln().ln())
    } else {
        None
    }
}

/// Truncation scale `b = sqrt(a / ln ln a)`, defined for `a > e^e`.
pub fn b_scale(a: f64) -> Option<f64> {
    ln_ln(a).map(|ll| (a / ll).sqrt())
}

/// LIL envelope `g = sqrt(2 a ln ln a)`, defined for `a > e^e`.
pub fn lil_envelope(a: f64) -> Option<f64> {
    ln_ln(a).map(|ll| (2.0 * a * ll).sqrt())
}

const INV_GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of `f` on `[lo, hi]`.
///
/// Returns `(x_min, f(x_min))`. The function is assumed unimodal on the
/// bracket; on flat regions any minimizer is acceptable.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, iters: u32) -> (f64, f64) {
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut x1 = hi - INV_GOLDEN * (hi - lo);
    let mut x2 = lo + INV_GOLDEN * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_GOLDEN * (hi - lo);
            f2 = f(x2);
        }
    }
    let xm = 0.5 * (lo + hi);
    let fm = f(xm);
    if f1 < f2 && f1 < fm {
        (x1, f1)
    } else if f2 < fm {
        (x2, f2)
    } else {
        (xm, fm)
    }
}

/// Golden-section maximization; returns `(x_max, f(x_max))`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, iters: u32) -> (f64, f64) {
    let (x, neg) = golden_min(|x| -f(x), lo, hi, iters);
    (x, -neg)
}

/// Root of a (strictly) increasing function by bisection on `[lo, hi]`,
/// where `f(lo) <= 0 <= f(hi)`.
pub fn bisect_increasing<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, iters: u32) -> f64 {
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Expands `[x0/2, x0*2]` geometrically until `f` changes sign, then returns
/// the bracket. `f` must be increasing. Returns `None` if no sign change is
/// found within `max_doublings`.
pub fn bracket_increasing<F: FnMut(f64) -> f64>(
    mut f: F,
    x0: f64,
    max_doublings: u32,
) -> Option<(f64, f64)> {
    let mut lo = x0;
    let mut hi = x0;
    let mut flo = f(lo);
    let mut fhi = flo;
    let mut n = 0;
    while flo > 0.0 {
        lo *= 0.5;
        flo = f(lo);
        n += 1;
        if n > max_doublings || lo == 0.0 {
            return None;
        }
    }
    n = 0;
    while fhi < 0.0 {
        hi *= 2.0;
        fhi = f(hi);
        n += 1;
        if n > max_doublings || !hi.is_finite() {
            return None;
        }
    }
    Some((lo, hi))
}

/// Grid-scan a function on `[lo, hi]` with `n` points and refine the best
/// bracket by golden section. Used where unimodality is not guaranteed.
pub fn grid_then_golden_max<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    n: usize,
    iters: u32,
) -> (f64, f64) {
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    let step = (hi - lo) / (n as f64 - 1.0);
    for i in 0..n {
        let x = lo + step * i as f64;
        let v = f(x);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let blo = lo + step * best_i.saturating_sub(1) as f64;
    let bhi = lo + step * (best_i + 1).min(n - 1) as f64;
    let (x, v) = golden_max(&mut f, blo, bhi, iters);
    if v >= best {
        (x, v)
    } else {
        (lo + step * best_i as f64, best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lnln_guard() {
        assert!(ln_ln(15.0).is_none());
        assert!(ln_ln(LN_LN_FLOOR).is_none());
        let v = ln_ln(16.0).unwrap();
        assert!((v - (16f64).ln().ln().abs()).abs() < 1e-15 && v > 0.0);
        assert!(b_scale(16.0).unwrap() > 0.0);
    }

    #[test]
    fn envelope_identity() {
        // g = sqrt(2) * b * lnln(a)
        for a in [20.0, 1e3, 1e8] {
            let g = lil_envelope(a).unwrap();
            let b = b_scale(a).unwrap();
            let ll = ln_ln(a).unwrap();
            assert!((g - 2f64.sqrt() * b * ll).abs() <= 1e-9 * g);
        }
    }

    #[test]
    fn golden_finds_quadratic_min() {
        let (x, v) = golden_min(|x| (x - 0.3) * (x - 0.3) + 1.0, -4.0, 9.0, 80);
        assert!((x - 0.3).abs() < 1e-9);
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bisect_root() {
        let r = bisect_increasing(|x| x * x * x - 8.0, 0.0, 10.0, 100);
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bracket_then_bisect() {
        let (lo, hi) = bracket_increasing(|x| x.ln(), 5.0, 60).unwrap();
        assert!(lo <= 1.0 && 1.0 <= hi);
    }

    #[test]
    fn grid_max_on_bimodal() {
        // Two humps; the global max is at x ~ 3.
        let f = |x: f64| (-(x - 3.0) * (x - 3.0)).exp() + 0.5 * (-(x + 2.0) * (x + 2.0)).exp();
        let (x, _) = grid_then_golden_max(f, -6.0, 6.0, 400, 60);
        assert!((x - 3.0).abs() < 1e-6);
    }
}
