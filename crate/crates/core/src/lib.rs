//! Solvers for reward-uncertain Markov decision processes.

mod clock;
pub mod enumerate;
pub mod error;
pub mod geometry;
pub mod instance;
pub mod io;
pub mod lp;
pub mod mdp;
mod par;
pub mod regret;
pub mod reward;

pub use error::{Error, Result};
