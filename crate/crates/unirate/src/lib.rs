//! Finite multiclass hypothesis classes: pseudo-cubes, combinatorial
//! dimensions, tree witnesses, game-value learners, lower-bound
//! constructions and a Monte Carlo learning-curve lab.

pub mod class;
pub mod cli;
pub mod constructions;
pub mod curvelab;
pub mod dimensions;
pub mod error;
pub mod games;
pub mod learners;
pub mod pseudocube;
pub mod trees;
pub mod verify;

pub use error::{Error, Result};
