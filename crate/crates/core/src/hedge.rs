//! Hedge functions: the extra payoff `h` priced alongside the quadratic
//! hedge, their admissibility checks, and the structural inequalities the
//! rest of the engine leans on.
//!
//! An admissible hedge is even, is `C^2` with `h(0) = h'(0) = h''(0) = 0`,
//! and has `h''` strictly increasing, unbounded and concave on `x >= 0`.
//! Evenness is enforced here: every evaluator takes `|x|`, so callers may
//! pass any real.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::numeric::{self, grid_then_golden_max, ln_ln, N0};

#[derive(Debug, Error)]
pub enum HedgeError {
    #[error("power hedge exponent must satisfy 2 < alpha <= 3, got {0}")]
    AlphaOutOfRange(f64),
    #[error("hedge evaluated to {value} at positive argument {x}; positive hedges required")]
    NonPositive { x: f64, value: f64 },
    #[error("unknown hedge kind {0:?} (expected \"power\" or \"logsquare\")")]
    UnknownKind(String),
}

type EvalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Power { alpha: f64 },
    LogSquare,
    Custom { h: EvalFn, d1: EvalFn, d2: EvalFn },
}

/// The extra hedge `h` with first and second derivative evaluators.
///
/// Immutable after construction; cheap to clone and safe to share across
/// threads.
#[derive(Clone)]
pub struct HedgeFunction {
    name: String,
    params: Vec<f64>,
    kind: Kind,
    /// Built-in hedges have analytically certified growth of `h''`.
    analytic: bool,
}

impl fmt::Debug for HedgeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HedgeFunction")
            .field("name", &self.name)
            .field("params", &self.params)
            .finish()
    }
}

/// `h(x) = |x|^alpha` for `2 < alpha <= 3`.
pub fn power_hedge(alpha: f64) -> Result<HedgeFunction, HedgeError> {
    if !(alpha > 2.0 && alpha <= 3.0) || !alpha.is_finite() {
        return Err(HedgeError::AlphaOutOfRange(alpha));
    }
    Ok(HedgeFunction {
        name: format!("power({alpha})"),
        params: vec![alpha],
        kind: Kind::Power { alpha },
        analytic: true,
    })
}

/// `h(x) = (1+|x|)^2 ln^2(1+|x|) - x^2`, the slowest-growing built-in.
pub fn logsquare_hedge() -> HedgeFunction {
    HedgeFunction {
        name: "logsquare".into(),
        params: vec![],
        kind: Kind::LogSquare,
        analytic: true,
    }
}

/// User-supplied hedge from closures over nonnegative arguments.
/// Admissibility is certified only on a grid horizon, via
/// [`validate_assumption1`].
pub fn custom_hedge(
    name: impl Into<String>,
    h: impl Fn(f64) -> f64 + Send + Sync + 'static,
    d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
    d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> HedgeFunction {
    HedgeFunction {
        name: name.into(),
        params: vec![],
        kind: Kind::Custom {
            h: Arc::new(h),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
        },
        analytic: false,
    }
}

// (1+x)^2 ln^2(1+x) - x^2 cancels catastrophically near 0; below this
// threshold the series x^3 (1 - x/12 + x^3/90 - x^4/90 + 47 x^5/5040) is
// accurate to < 5e-13 relative.
const LOGSQ_SERIES_CUT: f64 = 0.02;

fn logsq_eval(x: f64) -> f64 {
    if x == f64::INFINITY {
        return f64::INFINITY;
    }
    if x < LOGSQ_SERIES_CUT {
        let x2 = x * x;
        let x3 = x2 * x;
        return x3 * (1.0 - x / 12.0 + x3 / 90.0 - x3 * x / 90.0 + 47.0 * x3 * x2 / 5040.0);
    }
    // x^2 ((1 + 1/x)^2 ln^2(1+x) - 1) stays finite-friendly for huge x.
    let l = x.ln_1p();
    let t = 1.0 + 1.0 / x;
    x * x * (t * t * l * l - 1.0)
}

fn logsq_d1(x: f64) -> f64 {
    if x == f64::INFINITY {
        return f64::INFINITY;
    }
    if x < 0.01 {
        let x2 = x * x;
        let x3 = x2 * x;
        return 3.0 * x2 - x3 / 3.0 + x3 * x2 / 15.0 - 7.0 * x3 * x3 / 90.0;
    }
    let l = x.ln_1p();
    2.0 * (1.0 + x) * l * l + 2.0 * (1.0 + x) * l - 2.0 * x
}

fn logsq_d2(x: f64) -> f64 {
    let l = x.ln_1p();
    2.0 * l * l + 6.0 * l
}

impl HedgeFunction {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// `h(x)`, evaluated at `|x|`.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        match &self.kind {
            Kind::Power { alpha } => x.powf(*alpha),
            Kind::LogSquare => logsq_eval(x),
            Kind::Custom { h, .. } => h(x),
        }
    }

    /// `h'(x)` for `x >= 0` (callers handle the odd extension).
    pub fn deriv1(&self, x: f64) -> f64 {
        let x = x.abs();
        match &self.kind {
            Kind::Power { alpha } => alpha * x.powf(alpha - 1.0),
            Kind::LogSquare => logsq_d1(x),
            Kind::Custom { d1, .. } => d1(x),
        }
    }

    /// `h''(x)` for `x >= 0`.
    pub fn deriv2(&self, x: f64) -> f64 {
        let x = x.abs();
        match &self.kind {
            Kind::Power { alpha } => alpha * (alpha - 1.0) * x.powf(alpha - 2.0),
            Kind::LogSquare => logsq_d2(x),
            Kind::Custom { d2, .. } => d2(x),
        }
    }
}

/// One validation check with its worst observed violation.
#[derive(Debug, Clone)]
pub struct HedgeCheck {
    pub name: &'static str,
    pub pass: bool,
    pub worst_violation: f64,
    pub detail: String,
}

/// Report of all sampled admissibility and structural checks.
#[derive(Debug, Clone)]
pub struct HedgeValidationReport {
    pub hedge: String,
    pub checks: Vec<HedgeCheck>,
    pub grid_min: f64,
    pub grid_max: f64,
    /// For non-analytic hedges, growth of `h''` is certified only up to
    /// this horizon.
    pub unbounded_up_to: Option<f64>,
}

impl HedgeValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&HedgeCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const ORIGIN_TOL: f64 = 1e-12;
const CONCAVITY_TOL: f64 = 1e-12;

/// Samples the admissibility conditions and the small-x limits on `grid`
/// (strictly increasing, nonnegative). Non-finite evaluations become failed
/// checks, not panics.
pub fn validate_assumption1(h: &HedgeFunction, grid: &[f64]) -> HedgeValidationReport {
    assert!(!grid.is_empty(), "validation grid must be nonempty");
    assert!(
        grid.windows(2).all(|w| w[0] < w[1]) && grid[0] >= 0.0,
        "validation grid must be nonnegative and strictly increasing"
    );
    let mut checks = Vec::new();

    // Origin conditions.
    let h0 = h.eval(0.0);
    let d10 = h.deriv1(0.0);
    let d20 = h.deriv2(0.0);
    let worst = h0.abs().max(d10.abs()).max(d20.abs());
    checks.push(HedgeCheck {
        name: "origin",
        pass: worst.is_finite() && worst <= ORIGIN_TOL,
        worst_violation: worst,
        detail: format!("h(0)={h0:e} h'(0)={d10:e} h''(0)={d20:e}"),
    });

    // Evenness at the module boundary.
    let mut worst_even = 0.0f64;
    for &x in grid {
        let d = (h.eval(x) - h.eval(-x)).abs();
        worst_even = worst_even.max(d);
    }
    checks.push(HedgeCheck {
        name: "even",
        pass: worst_even == 0.0,
        worst_violation: worst_even,
        detail: "h(x) vs h(-x) on grid".into(),
    });

    // Finiteness of h, h', h'' on the grid.
    let mut nonfinite = 0usize;
    for &x in grid {
        if !(h.eval(x).is_finite() && h.deriv1(x).is_finite() && h.deriv2(x).is_finite()) {
            nonfinite += 1;
        }
    }
    checks.push(HedgeCheck {
        name: "finite",
        pass: nonfinite == 0,
        worst_violation: nonfinite as f64,
        detail: format!("{nonfinite} grid points with non-finite evaluation"),
    });

    // h'' strictly increasing.
    let mut worst_mono = f64::NEG_INFINITY;
    let mut mono_ok = true;
    for w in grid.windows(2) {
        let a = h.deriv2(w[0]);
        let b = h.deriv2(w[1]);
        if !(b > a) {
            mono_ok = false;
            worst_mono = worst_mono.max(a - b);
        }
    }
    checks.push(HedgeCheck {
        name: "d2_strictly_increasing",
        pass: mono_ok,
        worst_violation: if mono_ok { 0.0 } else { worst_mono },
        detail: "h''(x_{i+1}) > h''(x_i)".into(),
    });

    // h'' concave: midpoint value >= chord value - tol.
    let mut worst_conc = 0.0f64;
    let mut conc_ok = true;
    for w in grid.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let chord = 0.5 * (h.deriv2(w[0]) + h.deriv2(w[1]));
        let v = h.deriv2(mid);
        let viol = chord - v;
        if !(viol <= CONCAVITY_TOL) {
            conc_ok = false;
        }
        worst_conc = worst_conc.max(viol);
    }
    checks.push(HedgeCheck {
        name: "d2_concave",
        pass: conc_ok,
        worst_violation: worst_conc,
        detail: "midpoint h'' vs chord".into(),
    });

    // h'(x)/x -> 0 and h(x)/x^2 -> 0 sampled near 0: the ratios must be
    // strictly decreasing as x decreases through the sub-1 part of the grid.
    let small: Vec<f64> = grid.iter().copied().filter(|&x| x > 0.0 && x <= 1.0).collect();
    let ratio_check = |name: &'static str, f: &dyn Fn(f64) -> f64| -> HedgeCheck {
        let mut ok = small.len() >= 2;
        let mut worst = 0.0f64;
        for w in small.windows(2) {
            let lo = f(w[0]);
            let hi = f(w[1]);
            if !(lo < hi) {
                ok = false;
                worst = worst.max(lo - hi);
            }
        }
        HedgeCheck {
            name,
            pass: ok,
            worst_violation: worst,
            detail: format!(
                "ratio at x={:e} is {:e}",
                small.first().copied().unwrap_or(f64::NAN),
                small.first().map(|&x| f(x)).unwrap_or(f64::NAN)
            ),
        }
    };
    checks.push(ratio_check("limit_d1_over_x", &|x| h.deriv1(x) / x));
    checks.push(ratio_check("limit_h_over_x2", &|x| h.eval(x) / (x * x)));

    // Cross-validate analytic derivatives against central differences.
    let mut worst_fd = 0.0f64;
    let mut fd_ok = true;
    for &x in grid.iter().filter(|&&x| x >= 1e-3 && x <= 1e6) {
        let step = 1e-5 * x.abs().max(1.0);
        let fd = (h.eval(x + step) - h.eval((x - step).max(0.0))) / (step + step.min(x));
        let an = h.deriv1(x);
        if an.abs() > 1e-8 {
            let rel = (fd - an).abs() / an.abs().max(1e-300);
            worst_fd = worst_fd.max(rel);
            if rel > 1e-4 {
                fd_ok = false;
            }
        }
    }
    checks.push(HedgeCheck {
        name: "deriv1_finite_difference",
        pass: fd_ok,
        worst_violation: worst_fd,
        detail: "central difference vs analytic h'".into(),
    });

    let unbounded_up_to = if h.analytic { None } else { Some(grid[grid.len() - 1]) };
    HedgeValidationReport {
        hedge: h.name.clone(),
        checks,
        grid_min: grid[0],
        grid_max: grid[grid.len() - 1],
        unbounded_up_to,
    }
}

/// Standard validation grid: log-spaced `10^-6 .. 10^3` plus linear fill.
pub fn default_grid() -> Vec<f64> {
    let mut g = Vec::new();
    let mut x = 1e-6;
    while x <= 1.001e3 {
        g.push(x);
        x *= 1.15;
    }
    g
}

/// The scaling sandwich around `h(cx)`.
///
/// For `c <= 1` returns `(c^3 h(x), h(cx), c^2 h(x))`; for `c >= 1` the
/// mirrored `(c^2 h(x), h(cx), c^3 h(x))`. In both cases
/// `lower <= mid <= upper` for admissible hedges.
pub fn scaling_bounds(h: &HedgeFunction, c: f64, x: f64) -> (f64, f64, f64) {
    assert!(c >= 0.0 && x >= 0.0);
    let hx = h.eval(x);
    let mid = h.eval(c * x);
    let c2 = c * c * hx;
    let c3 = c * c * c * hx;
    if c <= 1.0 {
        (c3, mid, c2)
    } else {
        (c2, mid, c3)
    }
}

/// Numerically maximizes `y -> 1 + y + y^2/2 - h(by)/h(b)` over `y >= 0`.
///
/// The objective is eventually negative because `h(by)/h(b) >= min(y^2, y^3)`
/// dominates, so scanning `[0, 4]` brackets the maximum; the best grid value
/// is kept if refinement does not improve it. Admissible hedges keep the
/// value strictly below 2.
pub fn growth_gap_max(h: &HedgeFunction, b: f64) -> f64 {
    assert!(b > 0.0);
    let hb = h.eval(b);
    assert!(hb > 0.0, "h(b) must be positive");
    let obj = |y: f64| 1.0 + y + 0.5 * y * y - h.eval(b * y) / hb;
    let (_, v) = grid_then_golden_max(obj, 0.0, 4.0, 4001, 80);
    v
}

/// Partial sum of the hedge-summability series,
/// `sum_{n=N0}^{N} 1 / h(sqrt(n / ln ln n))`.
pub fn summability_partial(h: &HedgeFunction, n_max: u64) -> Result<f64, HedgeError> {
    assert!(n_max >= N0, "summability starts at n0 = {N0}");
    let mut sum = 0.0;
    for n in N0..=n_max {
        let ll = ln_ln(n as f64).expect("n >= 16 has ln ln defined");
        let x = ((n as f64) / ll).sqrt();
        let v = h.eval(x);
        if !(v > 0.0) {
            return Err(HedgeError::NonPositive { x, value: v });
        }
        sum += 1.0 / v;
    }
    Ok(sum)
}

/// Config-facing constructor: `kind` in {power, logsquare}.
pub fn hedge_from_spec(kind: &str, alpha: Option<f64>) -> Result<HedgeFunction, HedgeError> {
    match kind {
        "power" => power_hedge(alpha.unwrap_or(3.0)),
        "logsquare" => Ok(logsquare_hedge()),
        other => Err(HedgeError::UnknownKind(other.to_string())),
    }
}
