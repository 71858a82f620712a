//! Exponential capital processes and their certified bounds: the upper
//! process (one-round ratio capped via the hedge), the lower process (the
//! positive quadratic), their three-tilt combination `M`, the normalized
//! process `N`, stopping-time tracking, conversion of multiplicative
//! updates into protocol tickets, and replay checkers for the log-scale
//! bounds each process satisfies before the stopping times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{BlockScale, Kappa, KappaTriple};
use crate::hedge::HedgeFunction;
use crate::logdom::SignedLogValue;
use crate::protocol::{ForecasterMove, TicketStakes};

#[derive(Debug, Error)]
pub enum MartingaleError {
    #[error("upper-process denominator not positive at round {round}: {den} (tau1 precondition broken)")]
    DenominatorNotPositive { round: u64, den: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProcessKind {
    /// Ratio numerator `1 + kx + k^2x^2/2 - h(x)/h(1/k)`; bounded above.
    Upper,
    /// Ratio numerator `1 + kx + (1+delta) k^2x^2/2`; always positive.
    Lower,
}

/// State of one exponential process, value in sign/log form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpProcess {
    pub kind: ProcessKind,
    pub kappa: f64,
    /// Cached `h(1/kappa)`; `+inf` when kappa underflows (upper kind).
    pub h_kappa_inv: f64,
    /// Lower-kind quadratic inflation; also used by upper bound checkers.
    pub delta: f64,
    pub value: SignedLogValue,
    pub round: u64,
}

impl ExpProcess {
    pub fn upper(kappa: f64, hedge: &HedgeFunction) -> Self {
        Self {
            kind: ProcessKind::Upper,
            kappa,
            h_kappa_inv: hedge.eval(1.0 / kappa),
            delta: 0.0,
            value: SignedLogValue::ONE,
            round: 0,
        }
    }

    pub fn lower(kappa: f64, delta: f64) -> Self {
        Self {
            kind: ProcessKind::Lower,
            kappa,
            h_kappa_inv: f64::INFINITY,
            delta,
            value: SignedLogValue::ONE,
            round: 0,
        }
    }
}

/// Upper-process one-round ratio numerator minus 1, as additive terms.
fn upper_num_excess(kappa: f64, h_kappa_inv: f64, x: f64, hedge: &HedgeFunction) -> f64 {
    kappa * x + 0.5 * kappa * kappa * x * x - hedge.eval(x) / h_kappa_inv
}

/// One upper-process round. Errors iff the denominator is not positive,
/// which cannot happen before the price stopping time.
pub fn l_upper_update(
    s: &ExpProcess,
    x: f64,
    v: f64,
    w: f64,
    hedge: &HedgeFunction,
) -> Result<ExpProcess, MartingaleError> {
    debug_assert_eq!(s.kind, ProcessKind::Upper);
    let round = s.round + 1;
    let a_den = 0.5 * s.kappa * s.kappa * v - w / s.h_kappa_inv;
    if !(1.0 + a_den > 0.0) {
        return Err(MartingaleError::DenominatorNotPositive { round, den: 1.0 + a_den });
    }
    let a_num = upper_num_excess(s.kappa, s.h_kappa_inv, x, hedge);
    let value = if a_num > -1.0 {
        s.value.mul_exp(a_num.ln_1p() - a_den.ln_1p())
    } else if a_num == -1.0 {
        SignedLogValue::ZERO
    } else {
        // Numerator went negative: sign flips (possible only at a round
        // breaking the |x| stopping threshold).
        s.value
            .neg()
            .mul_exp((-(1.0 + a_num)).ln() - a_den.ln_1p())
    };
    Ok(ExpProcess { value, round, ..s.clone() })
}

/// One lower-process round; the ratio is positive for every real `x`.
pub fn l_lower_update(s: &ExpProcess, x: f64, v: f64) -> ExpProcess {
    debug_assert_eq!(s.kind, ProcessKind::Lower);
    let t = s.kappa * x;
    let a_num = t + 0.5 * (1.0 + s.delta) * t * t;
    let a_den = 0.5 * (1.0 + s.delta) * s.kappa * s.kappa * v;
    debug_assert!(a_num > -1.0, "positive quadratic cannot reach -1");
    ExpProcess {
        value: s.value.mul_exp(a_num.ln_1p() - a_den.ln_1p()),
        round: s.round + 1,
        ..s.clone()
    }
}

/// The combination `3 L2 - L1 - L3` (upper tilt in the middle).
pub fn combine_m(l2: &ExpProcess, l1: &ExpProcess, l3: &ExpProcess) -> SignedLogValue {
    debug_assert_eq!(l2.kind, ProcessKind::Upper);
    debug_assert_eq!(l1.kind, ProcessKind::Lower);
    debug_assert_eq!(l3.kind, ProcessKind::Lower);
    l2.value.scale(3.0).sub(l1.value).sub(l3.value)
}

/// `N = 1 + (1 - M) / ln C`; an infinite `ln C` collapses it to 1.
pub fn n_process(m: SignedLogValue, c_ln: f64) -> SignedLogValue {
    let correction = SignedLogValue::ONE.sub(m).scale(1.0 / c_ln);
    SignedLogValue::ONE.add(correction)
}

/// Decomposes one multiplicative update into protocol tickets: the returned
/// stakes satisfy `K + M x + V (x^2 - v) + W (h(x) - w) = K * ratio(x)` for
/// every `x`.
pub fn stakes_from_multiplicative(
    k_prev: SignedLogValue,
    kind: ProcessKind,
    kappa: f64,
    delta: f64,
    v: f64,
    w: f64,
    hedge: &HedgeFunction,
) -> Result<TicketStakes, MartingaleError> {
    let k = k_prev.to_f64();
    match kind {
        ProcessKind::Upper => {
            let h_inv = hedge.eval(1.0 / kappa);
            let den = 1.0 + 0.5 * kappa * kappa * v - w / h_inv;
            if !(den > 0.0) {
                return Err(MartingaleError::DenominatorNotPositive { round: 0, den });
            }
            Ok(TicketStakes {
                m_stake: k * kappa / den,
                v_stake: k * kappa * kappa / (2.0 * den),
                w_stake: -k / (h_inv * den),
            })
        }
        ProcessKind::Lower => {
            let den = 1.0 + 0.5 * (1.0 + delta) * kappa * kappa * v;
            Ok(TicketStakes {
                m_stake: k * kappa / den,
                v_stake: k * (1.0 + delta) * kappa * kappa / (2.0 * den),
                w_stake: 0.0,
            })
        }
    }
}

/// First-hit rounds of the three block-ending conditions.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StoppingFlags {
    pub tau1: Option<u64>,
    pub tau2: Option<u64>,
    pub tau3: Option<u64>,
}

impl StoppingFlags {
    pub fn tau1_hit(&self) -> bool {
        self.tau1.is_some()
    }
    pub fn tau2_hit(&self) -> bool {
        self.tau2.is_some()
    }
    pub fn tau3_hit(&self) -> bool {
        self.tau3.is_some()
    }
    pub fn any_hit(&self) -> bool {
        self.tau1.is_some() || self.tau2.is_some() || self.tau3.is_some()
    }

    pub fn bits(&self) -> u8 {
        (self.tau1.is_some() as u8) | (self.tau2.is_some() as u8) << 1 | (self.tau3.is_some() as u8) << 2
    }
}

/// Block-ending thresholds derived from `(C, delta)` and the hedge; all
/// saturate to `+inf` at proof scale, where no finite move can end a block.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BlockThresholds {
    pub v_thr: f64,
    pub w_thr: f64,
    pub wsum_thr: f64,
    pub x_thr: f64,
    pub c: f64,
}

impl BlockThresholds {
    pub fn new(scale: BlockScale, delta: f64, hedge: &HedgeFunction) -> Self {
        let root = scale.sqrt_c_over_lnln();
        let w_thr = delta * hedge.eval(root);
        Self {
            v_thr: delta * delta * root * root,
            w_thr,
            wsum_thr: w_thr * scale.lnln_c,
            x_thr: delta * root,
            c: scale.c(),
        }
    }
}

/// Running per-block bookkeeping consistent with the game's sums.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockContext {
    pub thresholds: BlockThresholds,
    pub a_n: f64,
    pub w_sum: f64,
    pub round: u64,
}

impl BlockContext {
    pub fn new(scale: BlockScale, delta: f64, hedge: &HedgeFunction) -> Self {
        Self { thresholds: BlockThresholds::new(scale, delta, hedge), a_n: 0.0, w_sum: 0.0, round: 0 }
    }

    /// Whether the incoming prices alone trigger the exclusive condition,
    /// testable before Skeptic stakes.
    pub fn tau1_would_hit(&self, f: &ForecasterMove) -> bool {
        f.v > self.thresholds.v_thr
            || f.w > self.thresholds.w_thr
            || self.w_sum + f.w > self.thresholds.wsum_thr
    }
}

/// Advances the flags for one settled round. The price condition is tested
/// on the incoming move (exclusive); the variance-budget and move-size
/// conditions are inclusive.
pub fn stopping_update(
    flags: &StoppingFlags,
    ctx: &mut BlockContext,
    f: &ForecasterMove,
    x: f64,
) -> StoppingFlags {
    let mut out = *flags;
    let n = ctx.round + 1;
    if out.tau1.is_none() && ctx.tau1_would_hit(f) {
        out.tau1 = Some(n);
    }
    ctx.round = n;
    ctx.a_n += f.v;
    ctx.w_sum += f.w;
    if out.tau2.is_none() && ctx.a_n >= ctx.thresholds.c {
        out.tau2 = Some(n);
    }
    if out.tau3.is_none() && x.abs() > ctx.thresholds.x_thr {
        out.tau3 = Some(n);
    }
    out
}

/// One stream round for the bound checkers.
#[derive(Debug, Clone, Copy)]
pub struct ProcessRound {
    pub x: f64,
    pub v: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaViolation {
    pub round: u64,
    pub lhs_log: f64,
    pub rhs_log: f64,
    pub slack: f64,
}

/// Replay report for one lemma: every applicable round, with log-scale
/// slack (nonnegative slack everywhere = pass).
///
/// The combination checker records its block-payoff comparisons separately
/// in `payoff_checks`: the payoff floor is a theorem only once the block
/// size clears its proof-grade floors, while simulation-scale blocks merely
/// gain less, so shortfalls there are measurements rather than violations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: String,
    pub rounds_checked: u64,
    pub min_slack: f64,
    pub violations: Vec<LemmaViolation>,
    pub payoff_checks: Vec<LemmaViolation>,
    pub flags: StoppingFlags,
}

impl LemmaReport {
    fn new(lemma: &str) -> Self {
        Self {
            lemma: lemma.into(),
            rounds_checked: 0,
            min_slack: f64::INFINITY,
            violations: Vec::new(),
            payoff_checks: Vec::new(),
            flags: StoppingFlags::default(),
        }
    }

    fn record(&mut self, round: u64, lhs_log: f64, rhs_log: f64) {
        self.rounds_checked += 1;
        let slack = rhs_log - lhs_log;
        self.min_slack = self.min_slack.min(slack);
        if !(slack >= 0.0) {
            self.violations.push(LemmaViolation { round, lhs_log, rhs_log, slack });
        }
    }

    fn record_payoff(&mut self, round: u64, floor_log: f64, value_log: f64) {
        self.payoff_checks.push(LemmaViolation {
            round,
            lhs_log: floor_log,
            rhs_log: value_log,
            slack: value_log - floor_log,
        });
    }

    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    /// Whether every recorded payoff comparison met the floor.
    pub fn payoff_pass(&self) -> bool {
        self.payoff_checks.iter().all(|c| c.slack >= 0.0)
    }
}

/// Upper-process bound replay: before the stopping times,
/// `ln L <= kappa S_n - (1-delta) kappa^2 A_n / 2 + 4 delta ln ln C`,
/// positivity of `L`, and at the variance-budget round the tightened
/// version with `kappa^2 C / 2`.
pub fn lemma5_bound_check(
    rounds: &[ProcessRound],
    kappa: &Kappa,
    delta: f64,
    hedge: &HedgeFunction,
) -> LemmaReport {
    let mut rep = LemmaReport::new("L_upper_bound");
    let scale = kappa.scale;
    let mut ctx = BlockContext::new(scale, delta, hedge);
    let mut flags = StoppingFlags::default();
    let mut proc = ExpProcess::upper(kappa.value(), hedge);
    let mut s_n = 0.0;
    let slack_term = 4.0 * delta * scale.lnln_c;
    for (i, r) in rounds.iter().enumerate() {
        let n = (i + 1) as u64;
        let f = ForecasterMove::new(0.0, r.v, r.w);
        if flags.tau1.is_none() && ctx.tau1_would_hit(&f) {
            flags.tau1 = Some(n);
        }
        if flags.tau1_hit() {
            break; // exclusive: the claim covers n < tau1 only
        }
        flags = stopping_update(&flags, &mut ctx, &f, r.x);
        proc = match l_upper_update(&proc, r.x, r.v, r.w, hedge) {
            Ok(p) => p,
            Err(_) => break,
        };
        s_n += r.x;
        let tau3_now = flags.tau3 == Some(n);
        if !tau3_now && !flags.tau3_hit() {
            // positivity within scope
            if !proc.value.is_positive() {
                rep.record(n, 0.0, -1.0);
                continue;
            }
            let lhs = proc.value.logmag();
            let rhs = kappa.value() * s_n
                - 0.5 * (1.0 - delta) * kappa.value() * kappa.value() * ctx.a_n
                + slack_term;
            rep.record(n, lhs, rhs);
            if flags.tau2 == Some(n) {
                let rhs_c = kappa.value() * s_n - kappa.sq_c_half() + slack_term;
                rep.record(n, lhs, rhs_c);
            }
        }
        if flags.tau2_hit() || flags.tau3_hit() {
            break;
        }
    }
    rep.flags = flags;
    rep
}

/// Lower-process bound replay: positivity always, and before the stopping
/// times `ln L >= kappa S_n - (1+delta) kappa^2 A_n / 2`, tightened at the
/// variance-budget round to `-4 delta ln ln C` below the `C`-form exponent.
pub fn lemma6_bound_check(
    rounds: &[ProcessRound],
    kappa: &Kappa,
    delta: f64,
    hedge: &HedgeFunction,
) -> LemmaReport {
    let mut rep = LemmaReport::new("L_lower_bound");
    let scale = kappa.scale;
    let mut ctx = BlockContext::new(scale, delta, hedge);
    let mut flags = StoppingFlags::default();
    let mut proc = ExpProcess::lower(kappa.value(), delta);
    let mut s_n = 0.0;
    for (i, r) in rounds.iter().enumerate() {
        let n = (i + 1) as u64;
        let f = ForecasterMove::new(0.0, r.v, r.w);
        if flags.tau1.is_none() && ctx.tau1_would_hit(&f) {
            flags.tau1 = Some(n);
        }
        if flags.tau1_hit() {
            break;
        }
        flags = stopping_update(&flags, &mut ctx, &f, r.x);
        proc = l_lower_update(&proc, r.x, r.v);
        s_n += r.x;
        // positivity holds for every move whatsoever
        if !proc.value.is_positive() {
            rep.record(n, 0.0, -1.0);
            continue;
        }
        let tau3_now = flags.tau3 == Some(n);
        if !tau3_now && !flags.tau3_hit() {
            let lhs = kappa.value() * s_n
                - 0.5 * (1.0 + delta) * kappa.value() * kappa.value() * ctx.a_n;
            rep.record(n, lhs, proc.value.logmag());
            if flags.tau2 == Some(n) {
                let floor = kappa.value() * s_n - kappa.sq_c_half() - 4.0 * delta * scale.lnln_c;
                rep.record(n, floor, proc.value.logmag());
            }
        }
        if flags.tau2_hit() || flags.tau3_hit() {
            break;
        }
    }
    rep.flags = flags;
    rep
}

/// Combination replay: `N` stays positive through the move-size round
/// (inclusive), and at a clean variance-budget round with the partial sums
/// below `(1-eps) sqrt(2 C ln ln C)` it pays `N >= 1 + 1/ln C`.
pub fn lemma7_payoff_check(
    rounds: &[ProcessRound],
    triple: &KappaTriple,
    delta: f64,
    eps: f64,
    hedge: &HedgeFunction,
) -> LemmaReport {
    let mut rep = LemmaReport::new("N_payoff");
    let scale = triple.k1.scale;
    let mut ctx = BlockContext::new(scale, delta, hedge);
    let mut flags = StoppingFlags::default();
    let mut l2 = ExpProcess::upper(triple.k2.value(), hedge);
    let mut l1 = ExpProcess::lower(triple.k1.value(), delta);
    let mut l3 = ExpProcess::lower(triple.k3.value(), delta);
    let mut s_n = 0.0;
    let payoff_floor = (1.0 / scale.ln_c).ln_1p(); // ln(1 + 1/ln C); 0 at proof scale
    for (i, r) in rounds.iter().enumerate() {
        let n = (i + 1) as u64;
        let f = ForecasterMove::new(0.0, r.v, r.w);
        if flags.tau1.is_none() && ctx.tau1_would_hit(&f) {
            flags.tau1 = Some(n);
        }
        if flags.tau1_hit() {
            break;
        }
        flags = stopping_update(&flags, &mut ctx, &f, r.x);
        l2 = match l_upper_update(&l2, r.x, r.v, r.w, hedge) {
            Ok(p) => p,
            Err(_) => break,
        };
        l1 = l_lower_update(&l1, r.x, r.v);
        l3 = l_lower_update(&l3, r.x, r.v);
        s_n += r.x;
        let m = combine_m(&l2, &l1, &l3);
        let nval = n_process(m, scale.ln_c);
        // positivity is claimed inclusive of the move-size round
        if !nval.is_positive() {
            rep.record(n, 0.0, -1.0);
        } else {
            rep.rounds_checked += 1;
        }
        if flags.tau2 == Some(n)
            && flags.tau1.is_none()
            && flags.tau3.map_or(true, |t3| t3 > n)
            && s_n <= (1.0 - eps) * scale.sqrt_2c_lnln()
            && nval.is_positive()
        {
            rep.record_payoff(n, payoff_floor, nval.logmag());
        }
        if flags.tau2_hit() || flags.tau3_hit() {
            break;
        }
    }
    rep.flags = flags;
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{demo_constants, verify_bundle};
    use crate::hedge::power_hedge;
    use crate::protocol::{
        new_game, step, ProtocolKind, ProtocolOptions,
    };

    fn cubic() -> HedgeFunction {
        power_hedge(3.0).unwrap()
    }

    #[test]
    fn upper_update_example() {
        // kappa = 0.1, x = 1, v = 1, w = 0.5, cubic: ratio = 1.104 / 1.0045.
        let h = cubic();
        let p = ExpProcess::upper(0.1, &h);
        assert_eq!(p.h_kappa_inv, 1000.0);
        let p1 = l_upper_update(&p, 1.0, 1.0, 0.5, &h).unwrap();
        let expect = (1.104f64 / 1.0045).ln();
        assert!((p1.value.logmag() - expect).abs() < 1e-14);
        assert!((p1.value.to_f64() - 1.0990542558487805).abs() < 1e-12);

        // identity round
        let p1 = l_upper_update(&p, 0.0, 0.0, 0.0, &h).unwrap();
        assert_eq!(p1.value.logmag(), 0.0);

        // denominator guard: w far beyond h(1/kappa)
        let p = ExpProcess::upper(1.0, &h);
        assert!(l_upper_update(&p, 0.0, 1.0, 3.0, &h).is_err());
    }

    #[test]
    fn upper_numerator_sign_tracking() {
        let h = cubic();
        let p = ExpProcess::upper(0.1, &h);
        // enormous |x| drives the numerator negative; sign must flip, not panic
        let p1 = l_upper_update(&p, 1e4, 1.0, 0.5, &h).unwrap();
        assert!(p1.value.is_negative());
        let p2 = l_upper_update(&p1, 1e4, 1.0, 0.5, &h).unwrap();
        assert!(p2.value.is_positive());
    }

    #[test]
    fn lower_update_example() {
        let p = ExpProcess::lower(0.1, 0.1);
        let p1 = l_lower_update(&p, 1.0, 1.0);
        let expect = 1.1055f64 / 1.0055;
        assert!((p1.value.to_f64() - expect).abs() < 1e-12);
        assert!((expect - 1.0994530084535057).abs() < 1e-12);

        let p1 = l_lower_update(&p, 0.0, 0.0);
        assert_eq!(p1.value.logmag(), 0.0);

        // positivity for wild x of both signs
        for x in [-1e8, -5.0, -1.0 / 0.11, 3.0, 1e9] {
            let p1 = l_lower_update(&p, x, 1.0);
            assert!(p1.value.is_positive(), "x={x}");
        }
    }

    #[test]
    fn combine_and_n_examples() {
        let h = cubic();
        let l2 = ExpProcess::upper(0.11, &h);
        let l1 = ExpProcess::lower(0.1, 0.05);
        let l3 = ExpProcess::lower(0.12, 0.05);
        // round 0: M = 3 - 1 - 1 = 1, N = 1
        let m = combine_m(&l2, &l1, &l3);
        assert!((m.to_f64() - 1.0).abs() < 1e-14);
        assert!((n_process(m, 100.0).to_f64() - 1.0).abs() < 1e-14);

        // equal values V: M = V
        let mut l2v = l2.clone();
        let mut l1v = l1.clone();
        let mut l3v = l3.clone();
        let v = SignedLogValue::from_f64(0.37);
        l2v.value = v;
        l1v.value = v;
        l3v.value = v;
        assert!((combine_m(&l2v, &l1v, &l3v).to_f64() - 0.37).abs() < 1e-14);

        // signed arithmetic: 3*0.5 - 1.0 - 1.2 = -0.7
        l2v.value = SignedLogValue::from_f64(0.5);
        l1v.value = SignedLogValue::from_f64(1.0);
        l3v.value = SignedLogValue::from_f64(1.2);
        let m = combine_m(&l2v, &l1v, &l3v);
        assert!((m.to_f64() + 0.7).abs() < 1e-14);

        // N formula and the payoff direction
        assert!((n_process(SignedLogValue::ZERO, 100.0).to_f64() - 1.01).abs() < 1e-14);
        let n = n_process(SignedLogValue::from_f64(-2.0), 100.0);
        assert!(n.to_f64() >= 1.01);
        // infinite ln C collapses N to 1
        assert!((n_process(SignedLogValue::from_f64(-3.0), f64::INFINITY).to_f64() - 1.0).abs() == 0.0);
    }

    #[test]
    fn stakes_decomposition_example() {
        let h = cubic();
        let stakes = stakes_from_multiplicative(
            SignedLogValue::ONE,
            ProcessKind::Upper,
            0.1,
            0.0,
            1.0,
            0.5,
            &h,
        )
        .unwrap();
        assert!((stakes.m_stake - 0.09955201592832254).abs() < 1e-12);
        assert!((stakes.v_stake - 0.004977600796416127).abs() < 1e-12);
        assert!((stakes.w_stake + 0.0009955201592832254).abs() < 1e-12);

        // zero capital, zero stakes
        let z = stakes_from_multiplicative(
            SignedLogValue::ZERO,
            ProcessKind::Upper,
            0.1,
            0.0,
            1.0,
            0.5,
            &h,
        )
        .unwrap();
        assert_eq!(z, TicketStakes::flat());

        // lower kind holds no hedge ticket
        let l = stakes_from_multiplicative(
            SignedLogValue::ONE,
            ProcessKind::Lower,
            0.1,
            0.1,
            1.0,
            0.5,
            &h,
        )
        .unwrap();
        assert_eq!(l.w_stake, 0.0);

        // the decomposition reproduces the multiplicative update at several x
        for x in [-1.0, 0.0, 1.0, 2.0] {
            let k = 1.0;
            let num = 1.0 + 0.1 * x + 0.005 * x * x - h.eval(x) / 1000.0;
            let den = 1.0 + 0.005 - 0.5 / 1000.0;
            let mult = k * num / den;
            let inc = stakes.m_stake * x
                + stakes.v_stake * (x * x - 1.0)
                + stakes.w_stake * (h.eval(x) - 0.5);
            assert!((k + inc - mult).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn stakes_replayed_through_protocol_match_process() {
        // Play the upper process as an actual symmetric game; capital must
        // track the process value exactly.
        let h = cubic();
        let opts = ProtocolOptions { coherence_gate: false, prudent: false };
        let mut game = new_game(ProtocolKind::Ufqsh, opts, 1.0).unwrap();
        let mut proc = ExpProcess::upper(0.05, &h);
        let moves = [(0.4, 1.0, 1.2), (-1.2, 0.5, 0.6), (2.0, 2.0, 3.0), (0.0, 1.0, 1.0)];
        for &(x, v, w) in &moves {
            let f = ForecasterMove::new(0.0, v, w);
            let stakes = stakes_from_multiplicative(
                game.capital,
                ProcessKind::Upper,
                proc.kappa,
                0.0,
                v,
                w,
                &h,
            )
            .unwrap();
            game = step(&game, &h, &f, &stakes, x).unwrap();
            proc = l_upper_update(&proc, x, v, w, &h).unwrap();
            let diff = (game.capital.to_f64() - proc.value.to_f64()).abs();
            assert!(diff <= 1e-12 * proc.value.to_f64().abs().max(1.0));
        }
    }

    #[test]
    fn stopping_flag_examples() {
        let h = cubic();
        // delta = 0.1 and C/lnlnC = 100 via lnln C chosen accordingly:
        // use a synthetic scale with sqrt(C/lnln C) = 10.
        let scale = BlockScale { lnln_c: 2.0, ln_c: (100.0f64 * 2.0).ln() };
        let thr = BlockThresholds::new(scale, 0.1, &h);
        assert!((thr.x_thr - 1.0).abs() < 1e-12);
        assert!((thr.v_thr - 1.0).abs() < 1e-12);

        let mut ctx = BlockContext { thresholds: thr, a_n: 0.0, w_sum: 0.0, round: 0 };
        let flags = StoppingFlags::default();
        // x = 1.5 plays through the move-size condition (inclusive)
        let f = ForecasterMove::new(0.0, 0.9, 0.1);
        let flags = stopping_update(&flags, &mut ctx, &f, 1.5);
        assert_eq!(flags.tau3, Some(1));
        assert!(flags.tau1.is_none(), "v = 0.9 <= 1 must not trip the price condition");

        // A crossing C is inclusive at the crossing round
        let mut ctx = BlockContext {
            thresholds: thr,
            a_n: thr.c - 0.1,
            w_sum: 0.0,
            round: 10,
        };
        let f = ForecasterMove::new(0.0, 0.2, 0.0);
        let flags = stopping_update(&StoppingFlags::default(), &mut ctx, &f, 0.0);
        assert_eq!(flags.tau2, Some(11));
    }

    #[test]
    fn proof_scale_stream_passes_all_checkers() {
        // Proof-grade constants: kappa underflows, thresholds saturate, and
        // the bounds hold with the 4 delta lnln C slack.
        let b = crate::constants::select_constants(0.1).unwrap();
        let h = cubic();
        let triple = b.kappa_triple();
        let rounds: Vec<ProcessRound> = (0..2000)
            .map(|i| ProcessRound {
                x: if i % 2 == 0 { 1.0 } else { -1.0 },
                v: 1.0,
                w: 1.0,
            })
            .collect();
        let r5 = lemma5_bound_check(&rounds, &triple.k2, b.delta, &h);
        assert!(r5.pass(), "violations: {:?}", r5.violations.first());
        assert_eq!(r5.flags.bits(), 0);
        let r6 = lemma6_bound_check(&rounds, &triple.k1, b.delta, &h);
        assert!(r6.pass());
        let r7 = lemma7_payoff_check(&rounds, &triple, b.delta, b.eps, &h);
        assert!(r7.pass());
    }

    #[test]
    fn demo_scale_block_completes_and_pays() {
        // lnln C = 2 makes C ~ 1619 with v = 1 per round, so the variance
        // budget fills within the stream and the payoff bound is exercised.
        let b = demo_constants(0.1, 0.05, 2.0).unwrap();
        let h = cubic();
        let triple = b.kappa_triple();
        let n_rounds = (triple.k1.scale.c().ceil() as usize) + 10;
        let rounds: Vec<ProcessRound> = (0..n_rounds)
            .map(|i| ProcessRound {
                x: if i % 2 == 0 { 1.0 } else { -1.0 },
                v: 1.0,
                w: 1.0,
            })
            .collect();
        let r5 = lemma5_bound_check(&rounds, &triple.k2, b.delta, &h);
        assert!(r5.pass(), "lemma5 violations: {:?}", r5.violations.first());
        assert!(r5.flags.tau2_hit(), "stream must reach the variance budget");
        assert!(!r5.flags.tau1_hit() && !r5.flags.tau3_hit());

        let r6 = lemma6_bound_check(&rounds, &triple.k1, b.delta, &h);
        assert!(r6.pass(), "lemma6 violations: {:?}", r6.violations.first());

        let r7 = lemma7_payoff_check(&rounds, &triple, b.delta, b.eps, &h);
        assert!(r7.pass(), "lemma7 violations: {:?}", r7.violations.first());
        assert!(r7.flags.tau2_hit());
        // The payoff round was reached: S_n stays tiny on the alternating
        // path, far below the (1-eps) envelope. At this block size the
        // combination still gains, but below the proof-grade floor, which
        // requires half (eps*)^2 (1-eps)^2 lnln C > ln 3 (a predicate this
        // demo bundle fails); so the comparison is recorded, not enforced.
        assert_eq!(r7.payoff_checks.len(), 1);
        let n_end = r7.payoff_checks[0].rhs_log.exp();
        assert!(n_end > 1.05 && n_end < 1.14, "block-end N = {n_end}");
        assert!(!verify_bundle(&b).predicate("half_q_lnlnC_gt_ln3").unwrap().pass);
    }

    #[test]
    fn tau3_round_scoping() {
        // A mid-stream |x| spike ends the scope; checks at and after the
        // spike are skipped for the L bounds but N positivity includes it.
        let b = demo_constants(0.1, 0.05, 2.0).unwrap();
        let h = cubic();
        let triple = b.kappa_triple();
        let x_thr = BlockThresholds::new(triple.k1.scale, b.delta, &h).x_thr;
        let mut rounds: Vec<ProcessRound> = (0..200)
            .map(|i| ProcessRound { x: if i % 2 == 0 { 0.5 } else { -0.5 }, v: 1.0, w: 1.0 })
            .collect();
        rounds[100] = ProcessRound { x: x_thr * 2.0, v: 1.0, w: 1.0 };
        let r5 = lemma5_bound_check(&rounds, &triple.k2, b.delta, &h);
        assert_eq!(r5.flags.tau3, Some(101));
        assert!(r5.pass());
        assert_eq!(r5.rounds_checked, 100);
        let r7 = lemma7_payoff_check(&rounds, &triple, b.delta, b.eps, &h);
        assert!(r7.pass(), "N must stay positive through the spike round");
    }

    #[test]
    fn empty_trace_is_vacuous_pass() {
        let b = demo_constants(0.1, 0.05, 2.0).unwrap();
        let h = cubic();
        let triple = b.kappa_triple();
        let r = lemma5_bound_check(&[], &triple.k2, b.delta, &h);
        assert!(r.pass());
        assert_eq!(r.rounds_checked, 0);
    }
}
