//! The betting-game state machines: UFQSH and the two quadratic-only
//! forecasting protocols, capital accounting in log domain, collateral-duty
//! enforcement, and the coherence criterion with its sup-min optimization
//! oracle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hedge::HedgeFunction;
use crate::logdom::SignedLogValue;
use crate::numeric::{bisect_increasing, bracket_increasing, golden_max};

/// Which game is being played; move validation differs per kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolKind {
    /// Quadratic + stronger hedge, unbounded moves.
    Ufqsh,
    /// Quadratic hedge only; Skeptic's quadratic stake must be nonnegative.
    UnboundedForecasting,
    /// Quadratic hedge with a per-round range bound on Reality.
    PredictablyUnboundedForecasting,
}

/// Forecaster's prices for one round.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ForecasterMove {
    /// Price of `x`.
    pub m: f64,
    /// Price of `(x - m)^2`.
    pub v: f64,
    /// Price of `h(x - m)`; meaningful in UFQSH only.
    pub w: f64,
    /// Range bound `|x - m| <= c`; predictably-unbounded kind only.
    pub c: f64,
}

impl ForecasterMove {
    pub fn new(m: f64, v: f64, w: f64) -> Self {
        Self { m, v, w, c: f64::INFINITY }
    }

    pub fn with_range(mut self, c: f64) -> Self {
        self.c = c;
        self
    }
}

/// Skeptic's ticket purchases for one round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TicketStakes {
    pub m_stake: f64,
    pub v_stake: f64,
    /// Ignored outside UFQSH.
    pub w_stake: f64,
}

impl TicketStakes {
    pub fn new(m_stake: f64, v_stake: f64, w_stake: f64) -> Self {
        Self { m_stake, v_stake, w_stake }
    }

    pub fn flat() -> Self {
        Self::default()
    }

    pub fn add(&self, o: &TicketStakes) -> TicketStakes {
        TicketStakes {
            m_stake: self.m_stake + o.m_stake,
            v_stake: self.v_stake + o.v_stake,
            w_stake: self.w_stake + o.w_stake,
        }
    }

    pub fn scaled(&self, c: f64) -> TicketStakes {
        TicketStakes {
            m_stake: self.m_stake * c,
            v_stake: self.v_stake * c,
            w_stake: self.w_stake * c,
        }
    }
}

/// Validation/enforcement switches for a game.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProtocolOptions {
    /// Reject incoherent Forecaster prices (UFQSH only). On by default.
    pub coherence_gate: bool,
    /// Prudent Skeptic: `W >= 0` and capital must stay nonnegative.
    /// Off = symmetric martingale mode (ticket selling allowed, capital may
    /// go negative).
    pub prudent: bool,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        Self { coherence_gate: true, prudent: true }
    }
}

/// Full game state after `round` settled rounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameState {
    pub kind: ProtocolKind,
    pub options: ProtocolOptions,
    pub capital: SignedLogValue,
    pub round: u64,
    /// Running sum of `x_i - m_i`.
    pub s: f64,
    /// Running sum of `v_i` (nondecreasing).
    pub a: f64,
    /// Running sum of `w_i`.
    pub w_sum: f64,
    /// Running sum of `m_i` (used to center raw sums).
    pub m_sum: f64,
}

pub const COHERENCE_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("COLLATERAL_VIOLATION at round {round}: capital became negative")]
    CollateralViolation { round: u64 },
    #[error("INCOHERENT_FORECAST at round {round}: h(sqrt(v)) = {h_sqrt_v} exceeds w = {w}")]
    IncoherentForecast { round: u64, h_sqrt_v: f64, w: f64 },
    #[error("RANGE_VIOLATION at round {round}: |x - m| = {deviation} exceeds c = {bound}")]
    RangeViolation { round: u64, deviation: f64, bound: f64 },
    #[error("INVALID_STAKES at round {round}: {reason}")]
    InvalidStakes { round: u64, reason: String },
}

impl ProtocolError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::CollateralViolation { .. } => "COLLATERAL_VIOLATION",
            ProtocolError::IncoherentForecast { .. } => "INCOHERENT_FORECAST",
            ProtocolError::RangeViolation { .. } => "RANGE_VIOLATION",
            ProtocolError::InvalidStakes { .. } => "INVALID_STAKES",
        }
    }
}

/// Fresh game with initial capital `k0 > 0`.
pub fn new_game(
    kind: ProtocolKind,
    options: ProtocolOptions,
    k0: f64,
) -> Result<GameState, ProtocolError> {
    if !(k0 > 0.0) || !k0.is_finite() {
        return Err(ProtocolError::InvalidStakes {
            round: 0,
            reason: format!("initial capital must be positive and finite, got {k0}"),
        });
    }
    Ok(GameState {
        kind,
        options,
        capital: SignedLogValue::from_f64(k0),
        round: 0,
        s: 0.0,
        a: 0.0,
        w_sum: 0.0,
        m_sum: 0.0,
    })
}

/// Coherence criterion: prices admit no sure profit iff `h(sqrt(v)) <= w`.
pub fn check_coherence(hedge: &HedgeFunction, f: &ForecasterMove) -> bool {
    let hsv = hedge.eval(f.v.sqrt());
    hsv <= f.w + COHERENCE_SLACK * hsv.abs().max(1.0)
}

/// Validates one move triple against the per-kind rules, without settling.
pub fn validate_move(
    state: &GameState,
    hedge: &HedgeFunction,
    f: &ForecasterMove,
    s: &TicketStakes,
    x: f64,
) -> Result<(), ProtocolError> {
    let round = state.round + 1;
    if !(f.v >= 0.0) || !(f.w >= 0.0) || !f.m.is_finite() {
        return Err(ProtocolError::InvalidStakes {
            round,
            reason: format!("forecaster move invalid: m={} v={} w={}", f.m, f.v, f.w),
        });
    }
    match state.kind {
        ProtocolKind::Ufqsh => {
            if state.options.coherence_gate && !check_coherence(hedge, f) {
                return Err(ProtocolError::IncoherentForecast {
                    round,
                    h_sqrt_v: hedge.eval(f.v.sqrt()),
                    w: f.w,
                });
            }
            if state.options.prudent && s.w_stake < 0.0 {
                return Err(ProtocolError::InvalidStakes {
                    round,
                    reason: format!("prudent mode requires W >= 0, got {}", s.w_stake),
                });
            }
        }
        ProtocolKind::UnboundedForecasting => {
            if s.v_stake < 0.0 {
                return Err(ProtocolError::InvalidStakes {
                    round,
                    reason: format!("unbounded forecasting requires V >= 0, got {}", s.v_stake),
                });
            }
        }
        ProtocolKind::PredictablyUnboundedForecasting => {
            let dev = (x - f.m).abs();
            if dev > f.c {
                return Err(ProtocolError::RangeViolation { round, deviation: dev, bound: f.c });
            }
        }
    }
    Ok(())
}

/// Capital increment for one round, as plain f64 terms.
pub fn round_increment(
    kind: ProtocolKind,
    hedge: &HedgeFunction,
    f: &ForecasterMove,
    s: &TicketStakes,
    x: f64,
) -> f64 {
    let y = x - f.m;
    let mut inc = s.m_stake * y + s.v_stake * (y * y - f.v);
    if kind == ProtocolKind::Ufqsh {
        inc += s.w_stake * (hedge.eval(y) - f.w);
    }
    inc
}

/// Settles one round: validates, applies the exact increment in log-domain
/// arithmetic, and advances the running sums.
///
/// Purely functional: identical inputs produce an identical successor.
pub fn step(
    state: &GameState,
    hedge: &HedgeFunction,
    f: &ForecasterMove,
    s: &TicketStakes,
    x: f64,
) -> Result<GameState, ProtocolError> {
    validate_move(state, hedge, f, s, x)?;
    let round = state.round + 1;
    let y = x - f.m;
    let mut capital = state
        .capital
        .add(SignedLogValue::from_f64(s.m_stake * y))
        .add(SignedLogValue::from_f64(s.v_stake * (y * y - f.v)));
    if state.kind == ProtocolKind::Ufqsh {
        capital = capital.add(SignedLogValue::from_f64(s.w_stake * (hedge.eval(y) - f.w)));
    }
    if state.options.prudent && capital.is_negative() {
        return Err(ProtocolError::CollateralViolation { round });
    }
    Ok(GameState {
        kind: state.kind,
        options: state.options,
        capital,
        round,
        s: state.s + y,
        a: state.a + f.v,
        w_sum: state.w_sum + f.w,
        m_sum: state.m_sum + f.m,
    })
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("could not bracket the inner minimizer for U in [{u_lo:e}, {u_hi:e}]")]
    Bracketing { u_lo: f64, u_hi: f64 },
}

/// Numerically computes `sup_{U>0} min_{x>0} [h(x) - w - U (x^2 - v)]`.
///
/// For admissible hedges the inner minimizer solves `U = h'(x) / (2x)`,
/// which is strictly increasing in `x`, and the outer objective is concave
/// in `U` with stationary point at `x(U)^2 = v`. The value equals
/// `h(sqrt(v)) - w`; the gap between this and the coherence inequality is
/// exactly what `check_coherence` tests.
pub fn coherence_supmin_oracle(
    hedge: &HedgeFunction,
    v: f64,
    w: f64,
) -> Result<f64, OracleError> {
    assert!(v > 0.0 && w > 0.0, "oracle requires v, w > 0");
    let sv = v.sqrt();
    let u_center = hedge.deriv1(sv) / (2.0 * sv);
    let u_lo_all = u_center * 1e-5;
    let u_hi_all = u_center * 1e5;

    // Inner minimizer x(U): root of h'(x)/(2x) = U (increasing in x).
    let inner_x = |u: f64| -> Option<f64> {
        let f = |x: f64| hedge.deriv1(x) / (2.0 * x) - u;
        let (lo, hi) = bracket_increasing(f, sv, 400)?;
        Some(bisect_increasing(f, lo, hi, 120))
    };
    let outer = |u: f64| -> Option<f64> {
        let x = inner_x(u)?;
        Some(hedge.eval(x) - w - u * (x * x - v))
    };

    // 64 points per decade over 10 decades centered at U*.
    let decades = 10.0f64;
    let per_decade = 64usize;
    let n = (decades * per_decade as f64) as usize;
    let log_lo = u_lo_all.ln();
    let log_step = (u_hi_all / u_lo_all).ln() / n as f64;
    let mut best = f64::NEG_INFINITY;
    let mut best_i = 0usize;
    for i in 0..=n {
        let u = (log_lo + log_step * i as f64).exp();
        match outer(u) {
            Some(val) if val > best => {
                best = val;
                best_i = i;
            }
            Some(_) => {}
            None => {
                return Err(OracleError::Bracketing { u_lo: u_lo_all, u_hi: u_hi_all });
            }
        }
    }
    let lo = (log_lo + log_step * best_i.saturating_sub(1) as f64).exp();
    let hi = (log_lo + log_step * (best_i + 1).min(n) as f64).exp();
    let (_, refined) = golden_max(
        |u| outer(u).unwrap_or(f64::NEG_INFINITY),
        lo,
        hi,
        90,
    );
    Ok(refined.max(best))
}

/// Witness that a negative hedge stake is suicidal: returns an `x` making
/// the capital negative. Exists because the hedge dominates the quadratic.
pub fn reject_negative_w_exploit(
    state: &GameState,
    hedge: &HedgeFunction,
    f: &ForecasterMove,
    s: &TicketStakes,
) -> f64 {
    assert!(s.w_stake < 0.0, "exploit requires W < 0");
    assert_eq!(state.kind, ProtocolKind::Ufqsh);
    let k_prev = state.capital.to_f64();
    let mut y = 1.0f64.max(f.v.sqrt());
    for _ in 0..2000 {
        for cand in [f.m + y, f.m - y] {
            let inc = round_increment(state.kind, hedge, f, s, cand);
            if k_prev + inc < 0.0 {
                return cand;
            }
        }
        y *= 2.0;
    }
    unreachable!("h dominates every quadratic, so doubling |x| must succeed");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hedge::{logsquare_hedge, power_hedge};

    fn cubic() -> HedgeFunction {
        power_hedge(3.0).unwrap()
    }

    fn ufqsh(k0: f64) -> GameState {
        new_game(ProtocolKind::Ufqsh, ProtocolOptions::default(), k0).unwrap()
    }

    #[test]
    fn new_game_examples() {
        let g = ufqsh(1.0);
        assert_eq!(g.round, 0);
        assert!((g.capital.to_f64() - 1.0).abs() < 1e-15);
        assert_eq!(g.s, 0.0);
        assert_eq!(g.a, 0.0);
        assert_eq!(g.w_sum, 0.0);

        let g5 = ufqsh(5.0);
        assert!((g5.capital.to_f64() - 5.0).abs() < 1e-15);

        assert!(new_game(ProtocolKind::Ufqsh, ProtocolOptions::default(), 0.0).is_err());
    }

    #[test]
    fn step_examples() {
        let h = cubic();
        // zero stakes leave capital unchanged
        let g = ufqsh(1.0);
        let f = ForecasterMove::new(0.3, 2.0, 9.0);
        let g1 = step(&g, &h, &f, &TicketStakes::flat(), 17.0).unwrap();
        assert!((g1.capital.to_f64() - 1.0).abs() < 1e-15);
        assert_eq!(g1.round, 1);
        assert!((g1.s - 16.7).abs() < 1e-12);
        assert!((g1.a - 2.0).abs() < 1e-15);

        // direct arithmetic: K' = 1 + 1*2 + 1*(4-1) = 6
        let f = ForecasterMove::new(0.0, 1.0, 2.0);
        let s = TicketStakes::new(1.0, 1.0, 0.0);
        let g1 = step(&ufqsh(1.0), &h, &f, &s, 2.0).unwrap();
        assert!((g1.capital.to_f64() - 6.0).abs() < 1e-12);

        // hedge ticket: K' = 1 + 0.001 (h(1) - 0.5) = 1.0005
        let f = ForecasterMove::new(0.0, 1.0, 0.5);
        // w = 0.5 < h(1) = 1 is incoherent; test with the gate off
        let opts = ProtocolOptions { coherence_gate: false, prudent: true };
        let g = new_game(ProtocolKind::Ufqsh, opts, 1.0).unwrap();
        let s = TicketStakes::new(0.0, 0.0, 0.001);
        let g1 = step(&g, &h, &f, &s, 1.0).unwrap();
        assert!((g1.capital.to_f64() - 1.0005).abs() < 1e-12);
    }

    #[test]
    fn step_is_purely_functional() {
        let h = cubic();
        let g = ufqsh(2.0);
        let f = ForecasterMove::new(0.1, 1.5, 4.0);
        let s = TicketStakes::new(0.2, -0.3, 0.05);
        let a = step(&g, &h, &f, &s, 0.7).unwrap();
        let b = step(&g, &h, &f, &s, 0.7).unwrap();
        assert_eq!(a.capital, b.capital);
        assert_eq!(a.s.to_bits(), b.s.to_bits());
        assert_eq!(a.a.to_bits(), b.a.to_bits());
    }

    #[test]
    fn per_kind_validation() {
        let h = cubic();
        // Unbounded forecasting rejects V < 0.
        let g = new_game(
            ProtocolKind::UnboundedForecasting,
            ProtocolOptions::default(),
            1.0,
        )
        .unwrap();
        let f = ForecasterMove::new(0.0, 1.0, 0.0);
        let err = step(&g, &h, &f, &TicketStakes::new(0.0, -0.5, 0.0), 0.0).unwrap_err();
        assert_eq!(err.code(), "INVALID_STAKES");

        // Predictably unbounded rejects out-of-range x.
        let g = new_game(
            ProtocolKind::PredictablyUnboundedForecasting,
            ProtocolOptions::default(),
            1.0,
        )
        .unwrap();
        let f = ForecasterMove::new(0.0, 1.0, 0.0).with_range(2.0);
        let err = step(&g, &h, &f, &TicketStakes::flat(), 2.5).unwrap_err();
        assert_eq!(err.code(), "RANGE_VIOLATION");
        assert!(step(&g, &h, &f, &TicketStakes::flat(), 2.0).is_ok());

        // Prudent UFQSH rejects W < 0.
        let g = ufqsh(1.0);
        let f = ForecasterMove::new(0.0, 1.0, 1.0);
        let err = step(&g, &h, &f, &TicketStakes::new(0.0, 0.0, -0.1), 0.0).unwrap_err();
        assert_eq!(err.code(), "INVALID_STAKES");

        // Collateral violation carries the offending round.
        let f = ForecasterMove::new(0.0, 1.0, 1.0);
        let err = step(&ufqsh(1.0), &h, &f, &TicketStakes::new(10.0, 0.0, 0.0), -1.0).unwrap_err();
        match err {
            ProtocolError::CollateralViolation { round } => assert_eq!(round, 1),
            other => panic!("expected collateral violation, got {other:?}"),
        }

        // Symmetric mode allows negative capital.
        let opts = ProtocolOptions { coherence_gate: true, prudent: false };
        let g = new_game(ProtocolKind::Ufqsh, opts, 1.0).unwrap();
        let g1 = step(&g, &h, &f, &TicketStakes::new(10.0, 0.0, 0.0), -1.0).unwrap();
        assert!(g1.capital.is_negative());

        // Coherence gate fires on underpriced hedge.
        let f_bad = ForecasterMove::new(0.0, 4.0, 7.0);
        let err = step(&ufqsh(1.0), &h, &f_bad, &TicketStakes::flat(), 0.0).unwrap_err();
        assert_eq!(err.code(), "INCOHERENT_FORECAST");
    }

    #[test]
    fn coherence_examples() {
        let h = cubic();
        assert!(check_coherence(&h, &ForecasterMove::new(0.0, 4.0, 8.0)));
        assert!(!check_coherence(&h, &ForecasterMove::new(0.0, 4.0, 7.0)));
        assert!(check_coherence(&h, &ForecasterMove::new(0.0, 0.0, 0.0)));
    }

    #[test]
    fn supmin_oracle_examples() {
        let h = cubic();
        // f(x) = x^3 - 7 - U(x^2 - 4): sup-min value 1 at x = 2, U = 3.
        let v = coherence_supmin_oracle(&h, 4.0, 7.0).unwrap();
        assert!((v - 1.0).abs() < 1e-7, "got {v}");

        let v = coherence_supmin_oracle(&h, 4.0, 8.0).unwrap();
        assert!(v.abs() < 1e-7, "got {v}");

        let ls = logsquare_hedge();
        let h1 = ls.eval(1.0);
        let v = coherence_supmin_oracle(&ls, 1.0, 2.0 * h1).unwrap();
        assert!((v + h1).abs() < 1e-7, "got {v}, expected {}", -h1);
    }

    #[test]
    fn negative_w_exploit_examples() {
        let h = cubic();
        let opts = ProtocolOptions { coherence_gate: false, prudent: false };
        let g = new_game(ProtocolKind::Ufqsh, opts, 1.0).unwrap();
        let f = ForecasterMove::new(0.0, 0.0, 0.0);
        let s = TicketStakes::new(0.0, 0.0, -1.0);
        let x = reject_negative_w_exploit(&g, &h, &f, &s);
        let inc = round_increment(ProtocolKind::Ufqsh, &h, &f, &s, x);
        assert!(1.0 + inc < 0.0);
        // x = 2 already works: K' = 1 - 8 = -7.
        assert!(1.0 + round_increment(ProtocolKind::Ufqsh, &h, &f, &s, 2.0) == -7.0);

        let g = new_game(ProtocolKind::Ufqsh, opts, 10.0).unwrap();
        let s = TicketStakes::new(1.0, 1.0, -0.01);
        let x = reject_negative_w_exploit(&g, &h, &f, &s);
        assert!(10.0 + round_increment(ProtocolKind::Ufqsh, &h, &f, &s, x) < 0.0);
    }
}
