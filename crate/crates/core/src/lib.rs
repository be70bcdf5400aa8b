//! Almost-sure energy-parity games on simple stochastic games.
//!
//! The crate decides whether Max can win `EN(k) ∩ Parity` with probability
//! one, computes minimal credits, synthesizes three-mode witness
//! strategies, and checks the certificates behind the decision procedure.

pub mod bailout;
pub mod caps;
pub mod error;
pub mod format;
pub mod gadgets;
pub mod generate;
pub mod gain;
pub mod game;
pub mod graph;
pub mod lasso;
pub mod lp;
pub mod markov;
pub mod oracle;
pub mod parity;
pub mod solver;
pub mod storage;
pub mod synthesis;

pub use caps::Caps;
pub use error::{Error, Result};
pub use format::{parse_game, to_json, to_text};
pub use game::{Edge, FdStrategy, Game, MdStrategy, Owner, Rational, State, StateId, StateSet};
