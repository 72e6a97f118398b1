//! Stackelberg equilibrium solvers for technology-governance models.
//!
//! The crate covers finite leader/follower games ([`game`],
//! [`equilibrium`]), continuous bi-level games ([`bilevel`]), incentive
//! games ([`incentive`]), Stackelberg MDPs ([`smdp`]) and the firm/regulator
//! scenario layer ([`governance`]).

pub mod bilevel;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod governance;
pub mod incentive;
pub mod lp;
pub mod smdp;

pub use error::{Error, Result};
pub use game::{BimatrixGame, MixedStrategy, Sense, StrategyProfile, TieBreakMode};
