//! Selection and verification of the proof constants: the gap parameter
//! `eps`, its companion `eps*`, the slack `delta`, the block size `C`, and
//! the per-block exponential tilts `kappa_1 <= kappa_2 <= kappa_3`.
//!
//! Proof-grade `C` is astronomically large (for `eps = 0.1` the binding
//! floor already puts `ln ln C` near 4e4), so `C` is never materialized:
//! everything is carried as a [`BlockScale`] holding `(ln ln C, ln C)` with
//! IEEE saturation, and formulas that would overflow are reduced
//! algebraically (e.g. `kappa^2 C / 2 = rho^2 ln ln C`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::bisect_increasing;

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Error)]
pub enum ConstantsError {
    #[error("eps must lie in (0, 1/8), got {0}")]
    EpsOutOfRange(f64),
    #[error("delta must be positive, got {0}")]
    DeltaNotPositive(f64),
    #[error("ln ln C must exceed 1, got {0}")]
    ScaleTooSmall(f64),
    #[error("constant selection infeasible: {0}")]
    Infeasible(String),
    #[error("non-finite input: {0}")]
    NonFinite(String),
}

/// Block size carried in doubly-logarithmic form.
///
/// `ln_c` saturates to `+inf` when `exp(ln ln C)` overflows; dependent
/// small quantities then underflow to zero, which is the correct limit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BlockScale {
    pub lnln_c: f64,
    pub ln_c: f64,
}

impl BlockScale {
    pub fn from_lnln(lnln_c: f64) -> Self {
        Self { lnln_c, ln_c: lnln_c.exp() }
    }

    /// Scale of the k-th block `C = D^k` given `ln D`.
    pub fn from_ln_d_power(ln_d: f64, k: u32) -> Self {
        let ln_c = k as f64 * ln_d;
        Self { lnln_c: ln_c.ln(), ln_c }
    }

    /// `C` itself; `+inf` when not representable.
    pub fn c(&self) -> f64 {
        self.ln_c.exp()
    }

    /// `sqrt(C / ln ln C)`; `+inf` when not representable.
    pub fn sqrt_c_over_lnln(&self) -> f64 {
        (0.5 * (self.ln_c - self.lnln_c.ln())).exp()
    }

    /// `sqrt(2 C ln ln C)`; `+inf` when not representable.
    pub fn sqrt_2c_lnln(&self) -> f64 {
        (2.0 * self.lnln_c).sqrt() * (0.5 * self.ln_c).exp()
    }
}

/// One exponential tilt `kappa = rho * sqrt(2 ln ln C / C)`.
///
/// Carrying `rho` and the scale separately keeps `kappa^2 C / 2` exact even
/// when `kappa` itself underflows to zero.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Kappa {
    pub rho: f64,
    pub scale: BlockScale,
}

impl Kappa {
    pub fn new(rho: f64, scale: BlockScale) -> Self {
        Self { rho, scale }
    }

    /// `kappa` as a plain number; may underflow to 0 at proof scale.
    pub fn value(&self) -> f64 {
        self.rho * ((2.0 * self.scale.lnln_c).ln() * 0.5 - 0.5 * self.scale.ln_c).exp()
    }

    /// `1 / kappa`; `+inf` when `kappa` underflows.
    pub fn inv(&self) -> f64 {
        1.0 / self.value()
    }

    /// `kappa^2 C / 2 = rho^2 ln ln C`, computed without forming `C`.
    pub fn sq_c_half(&self) -> f64 {
        self.rho * self.rho * self.scale.lnln_c
    }
}

/// The three tilts of the combination martingale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KappaTriple {
    pub k1: Kappa,
    pub k2: Kappa,
    pub k3: Kappa,
}

impl KappaTriple {
    pub fn new(eps: f64, eps_star: f64, scale: BlockScale) -> Self {
        let r1 = 1.0 - eps;
        Self {
            k1: Kappa::new(r1, scale),
            k2: Kappa::new((1.0 + eps_star) * r1, scale),
            k3: Kappa::new((1.0 + eps_star) * (1.0 + eps_star) * r1, scale),
        }
    }

    /// Whether the largest tilt still obeys the generic admissibility
    /// `kappa <= sqrt(2 ln ln C / C)`, i.e. `rho_3 <= 1`.
    pub fn generic_bound_ok(&self) -> bool {
        self.k3.rho <= 1.0
    }
}

/// Spec-facing constructor taking the `(ln ln C, ln C)` pair.
pub fn kappas(
    eps: f64,
    eps_star: f64,
    c_lnln: f64,
    c_ln: f64,
) -> Result<KappaTriple, ConstantsError> {
    if !c_lnln.is_finite() || c_lnln <= 1.0 {
        return Err(ConstantsError::ScaleTooSmall(c_lnln));
    }
    if c_ln.is_nan() {
        return Err(ConstantsError::NonFinite(format!("ln C = {c_ln}")));
    }
    Ok(KappaTriple::new(eps, eps_star, BlockScale { lnln_c: c_lnln, ln_c: c_ln }))
}

/// The full constant choreography for one `eps`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantBundle {
    pub eps: f64,
    pub eps_star: f64,
    pub delta: f64,
    /// Binding floor for `ln ln C` (stored in this doubly-log scale).
    pub lnln_c_min: f64,
    /// `ln D` for the block strategy, `D = max(C, 1/eps^4)`; saturates to
    /// `+inf` for proof-grade `C`.
    pub d_log: f64,
    /// The composite constant that must stay below 1.
    pub c_eps: f64,
    pub demo: bool,
}

impl ConstantBundle {
    pub fn scale(&self) -> BlockScale {
        BlockScale::from_lnln(self.lnln_c_min)
    }

    pub fn kappa_triple(&self) -> KappaTriple {
        KappaTriple::new(self.eps, self.eps_star, self.scale())
    }
}

pub fn composite_c_eps(eps: f64, eps_star: f64, delta: f64) -> f64 {
    let q = (1.0 + eps_star) * (1.0 + eps_star) * (1.0 - eps) * (1.0 - eps);
    (1.0 + delta) * q * (1.0 + 2.0 * eps_star + delta) + (5.0 + 4.0 * eps_star) / eps_star * delta
}

/// Upper bounds on `delta` implied by the proof, in a fixed order:
/// `2 sqrt2 delta < 1`; `2 sqrt2 (1 + 2 sqrt2 delta) < 3`;
/// `8 delta < (eps*)^2 (1-eps)^2 / 2`; `delta ((1+eps*)^2 + 1) < (eps*)^2`;
/// and feasibility of `c_eps < 1`.
pub fn delta_upper_bounds(eps: f64, eps_star: f64) -> Vec<(String, f64)> {
    let b1 = 1.0 / (2.0 * SQRT2);
    let b2 = (3.0 / (2.0 * SQRT2) - 1.0) / (2.0 * SQRT2);
    let b3 = eps_star * eps_star * (1.0 - eps) * (1.0 - eps) / 16.0;
    let b4 = eps_star * eps_star / ((1.0 + eps_star) * (1.0 + eps_star) + 1.0);
    // c_eps(delta) is increasing in delta; c_eps(0) < 1 makes the root exist.
    let b5 = if composite_c_eps(eps, eps_star, 0.0) < 1.0 {
        bisect_increasing(|d| composite_c_eps(eps, eps_star, d) - 1.0, 0.0, 1.0, 200)
    } else {
        0.0
    };
    vec![
        ("2sqrt2_delta_lt_1".into(), b1),
        ("2sqrt2_bracket_lt_3".into(), b2),
        ("8delta_lt_half_epsstar_sq".into(), b3),
        ("nn_positive_2".into(), b4),
        ("c_eps_lt_1".into(), b5),
    ]
}

/// Lower bounds on `ln ln C` implied by the proof, in a fixed order.
pub fn lnln_c_lower_bounds(eps: f64, eps_star: f64, delta: f64, c_eps: f64) -> Vec<(String, f64)> {
    let half_q = 0.5 * eps_star * eps_star * (1.0 - eps) * (1.0 - eps);
    vec![
        ("3lnlnC_gt_delta".into(), delta * (1.0 + delta) / 3.0),
        ("lnlnC_ge_delta".into(), delta),
        ("half_q_lnlnC_gt_ln3".into(), 3f64.ln() / half_q),
        ("lnC_pow_ceps_lt_third".into(), 3f64.ln() / (1.0 - c_eps)),
        ("lnC_pow_delta_gt_9".into(), 9f64.ln() / delta),
    ]
}

/// Deterministic selection: `eps* = eps / 2`, `delta` at half the tightest
/// bound, `ln ln C` at 1.1 times the binding floor.
pub fn select_constants(eps: f64) -> Result<ConstantBundle, ConstantsError> {
    if !(eps > 0.0 && eps < 0.125) {
        return Err(ConstantsError::EpsOutOfRange(eps));
    }
    let eps_star = eps / 2.0;
    if composite_c_eps(eps, eps_star, 0.0) >= 1.0 {
        return Err(ConstantsError::Infeasible(format!(
            "c_eps at delta = 0 is already >= 1 for eps = {eps}"
        )));
    }
    let bounds = delta_upper_bounds(eps, eps_star);
    let tightest = bounds.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
    let delta = 0.5 * tightest;
    let c_eps = composite_c_eps(eps, eps_star, delta);
    let floors = lnln_c_lower_bounds(eps, eps_star, delta, c_eps);
    let binding = floors.iter().map(|b| b.1).fold(0.0, f64::max);
    let lnln_c_min = 1.1 * binding;
    let d_log = lnln_c_min.exp().max(4.0 * (1.0 / eps).ln());
    let bundle = ConstantBundle { eps, eps_star, delta, lnln_c_min, d_log, c_eps, demo: false };
    let report = verify_bundle(&bundle);
    if !report.all_pass() {
        return Err(ConstantsError::Infeasible(format!(
            "selected bundle fails its own verification: {:?}",
            report.failing_names()
        )));
    }
    Ok(bundle)
}

/// User-chosen constants for simulation-scale runs. Proof constraints are
/// not enforced; the verification report shows which ones fail.
pub fn demo_constants(eps: f64, delta: f64, lnln_c: f64) -> Result<ConstantBundle, ConstantsError> {
    if !(eps > 0.0 && eps < 0.125) {
        return Err(ConstantsError::EpsOutOfRange(eps));
    }
    if !(delta > 0.0) {
        return Err(ConstantsError::DeltaNotPositive(delta));
    }
    if !(lnln_c > 1.0) {
        return Err(ConstantsError::ScaleTooSmall(lnln_c));
    }
    let eps_star = eps / 2.0;
    Ok(ConstantBundle {
        eps,
        eps_star,
        delta,
        lnln_c_min: lnln_c,
        d_log: lnln_c.exp().max(4.0 * (1.0 / eps).ln()),
        c_eps: composite_c_eps(eps, eps_star, delta),
        demo: true,
    })
}

/// One verified predicate; `slack > 0` means it holds with that margin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Predicate {
    pub name: String,
    pub pass: bool,
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub predicates: Vec<Predicate>,
    /// `rho_3 = (1+eps*)^2 (1-eps) <= 1`, required for the generic
    /// admissibility of the largest tilt. Reported, not fatal.
    pub kappa_generic_ok: bool,
}

impl ConstraintReport {
    pub fn all_pass(&self) -> bool {
        self.predicates.iter().all(|p| p.pass)
    }

    pub fn min_slack(&self) -> f64 {
        self.predicates.iter().map(|p| p.slack).fold(f64::INFINITY, f64::min)
    }

    pub fn failing_names(&self) -> Vec<String> {
        self.predicates.iter().filter(|p| !p.pass).map(|p| p.name.clone()).collect()
    }

    pub fn predicate(&self, name: &str) -> Option<&Predicate> {
        self.predicates.iter().find(|p| p.name == name)
    }
}

const LEMMA_SAMPLES: usize = 10_000;

fn sampled_min<F: Fn(f64) -> f64>(lo: f64, hi: f64, f: F) -> f64 {
    let mut worst = f64::INFINITY;
    for i in 0..=LEMMA_SAMPLES {
        let t = lo + (hi - lo) * i as f64 / LEMMA_SAMPLES as f64;
        worst = worst.min(f(t));
    }
    worst
}

/// `ln(1+t) >= (1-delta) t` on `[0, delta]`: minimum slack over samples.
pub fn lemma_log1_slack(delta: f64) -> f64 {
    sampled_min(0.0, delta, |t| t.ln_1p() - (1.0 - delta) * t)
}

/// `ln(1-t) >= -(1 + 2 sqrt2 delta) t` on `[0, 2 sqrt2 delta]`, the form the
/// proof actually consumes.
pub fn lemma_log2_slack(delta: f64) -> f64 {
    sampled_min(0.0, 2.0 * SQRT2 * delta, |t| (-t).ln_1p() + (1.0 + 2.0 * SQRT2 * delta) * t)
}

/// `1 + t + (1+delta) t^2 / 2 >= e^t` on `[-sqrt2 delta, sqrt2 delta]`.
pub fn lemma_exp_slack(delta: f64) -> f64 {
    sampled_min(-SQRT2 * delta, SQRT2 * delta, |t| {
        t + (1.0 + delta) * t * t / 2.0 - t.exp_m1()
    })
}

/// Evaluates every proof predicate plus the three elementary-inequality
/// lemmas on their stated ranges. Report-only; never errors.
pub fn verify_bundle(b: &ConstantBundle) -> ConstraintReport {
    let (e, es, d, ll) = (b.eps, b.eps_star, b.delta, b.lnln_c_min);
    let half_q = 0.5 * es * es * (1.0 - e) * (1.0 - e);
    let c_eps = composite_c_eps(e, es, d);
    let mut predicates = vec![
        Predicate { name: "eps_lt_1_8".into(), pass: e < 0.125, slack: 0.125 - e },
        Predicate {
            name: "2sqrt2_delta_lt_1".into(),
            pass: 2.0 * SQRT2 * d < 1.0,
            slack: 1.0 - 2.0 * SQRT2 * d,
        },
        Predicate {
            name: "2sqrt2_bracket_lt_3".into(),
            pass: 2.0 * SQRT2 * (1.0 + 2.0 * SQRT2 * d) < 3.0,
            slack: 3.0 - 2.0 * SQRT2 * (1.0 + 2.0 * SQRT2 * d),
        },
        Predicate {
            name: "8delta_lt_half_epsstar_sq".into(),
            pass: 8.0 * d < half_q,
            slack: half_q - 8.0 * d,
        },
        Predicate {
            name: "nn_positive_2".into(),
            pass: -es * es + d * ((1.0 + es) * (1.0 + es) + 1.0) < 0.0,
            slack: es * es - d * ((1.0 + es) * (1.0 + es) + 1.0),
        },
        Predicate { name: "c_eps_lt_1".into(), pass: c_eps < 1.0, slack: 1.0 - c_eps },
        Predicate {
            name: "3lnlnC_gt_delta".into(),
            pass: 3.0 * ll > d * (1.0 + d),
            slack: 3.0 * ll - d * (1.0 + d),
        },
        Predicate { name: "lnlnC_ge_delta".into(), pass: ll >= d, slack: ll - d },
        Predicate {
            name: "half_q_lnlnC_gt_ln3".into(),
            pass: half_q * ll > 3f64.ln(),
            slack: half_q * ll - 3f64.ln(),
        },
        Predicate {
            name: "lnC_pow_ceps_lt_third".into(),
            pass: (c_eps - 1.0) * ll < -(3f64.ln()),
            slack: (1.0 - c_eps) * ll - 3f64.ln(),
        },
        Predicate {
            name: "lnC_pow_delta_gt_9".into(),
            pass: d * ll > 9f64.ln(),
            slack: d * ll - 9f64.ln(),
        },
    ];
    for (name, slack) in [
        ("lemma_log1", lemma_log1_slack(d)),
        ("lemma_log2", lemma_log2_slack(d)),
        ("lemma_exp", lemma_exp_slack(d)),
    ] {
        predicates.push(Predicate { name: name.into(), pass: slack >= 0.0, slack });
    }
    let rho3 = (1.0 + es) * (1.0 + es) * (1.0 - e);
    ConstraintReport { predicates, kappa_generic_ok: rho3 <= 1.0 }
}
