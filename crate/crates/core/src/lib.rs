//! Measure-valued graph limits: probability graphons, P-variables and their metrics.

pub mod budget;
pub mod decorated;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod generators;
pub mod graphon;
pub mod io;
pub mod measures;
pub mod partition;
pub mod profiles;
pub mod pvariable;
pub mod quotient;
pub mod realgraphon;
pub mod seed;
pub mod strategy;

pub use error::{Error, Result};
