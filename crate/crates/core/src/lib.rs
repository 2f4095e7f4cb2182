//! Folk-theory causal models of shadowban suspicion.
//!
//! A user's beliefs about why their content underperforms are encoded as a
//! discrete Bayesian network ([`folk::FolkTheory`]); the platform's actual
//! operation is a second network over the same events ([`sim::WorldModel`]).
//! Simulating users from the world and scoring their observations with the
//! folk theory measures how often suspicions of shadowbanning are false, and
//! [`intervention`] measures how platform actions change that.

pub mod error;
pub mod folk;
pub mod graph;
pub mod intervention;
pub mod io;
pub mod sim;

pub use error::{Error, Result};
