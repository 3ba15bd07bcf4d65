//! Set identification and inference for static discrete games of complete
//! information with pure-strategy Nash equilibrium and logit shocks.
//!
//! The crate evaluates closed-form bounds on outcome probabilities,
//! computes and projects the parameter sets they define, builds confidence
//! sets from simultaneous bands on choice probabilities, and provides a
//! brute-force equilibrium simulator used as ground truth.

pub mod bench;
pub mod binary;
pub mod cli;
pub mod error;
pub mod game;
pub mod identification;
pub mod inference;
pub mod io;
pub mod jet;
pub mod likelihood;
pub mod logistic;
pub mod mixing;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
pub use game::{entry2, entry_game, payoff_index, GameSpec, GameSpecBuilder, OutcomeEvent, PayoffShift};
