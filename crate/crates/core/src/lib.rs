//! Betting-protocol engine for the law of the iterated logarithm with
//! quadratic and stronger hedges.
//!
//! The crate implements the unbounded forecasting game with quadratic and
//! stronger hedges (UFQSH) together with the machinery that makes the LIL
//! executable in it: hedge functions and their structural inequalities,
//! the coherence criterion with a sup-min oracle, proof-constant selection,
//! the exponential capital processes, Skeptic strategies forcing both sides
//! of the LIL, stochastic/adversarial/complying Reality players, and path
//! diagnostics.
//!
//! Capital is carried in sign + log-magnitude form throughout so that
//! proof-grade constants (where `ln ln C` alone is on the order of 1e4)
//! never overflow.

pub mod analysis;
pub mod constants;
pub mod engine;
pub mod hedge;
pub mod logdom;
pub mod martingale;
pub mod numeric;
pub mod players;
pub mod protocol;
pub mod strategy;

pub use hedge::HedgeFunction;
pub use logdom::SignedLogValue;
pub use protocol::{ForecasterMove, GameState, ProtocolKind, TicketStakes};
