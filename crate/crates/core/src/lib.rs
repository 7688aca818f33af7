//! Exhaustive and Monte Carlo tools for studying isolated solutions of the
//! binary perceptron at finite N: enumeration, the Gaussian resampling
//! coupling, balanced partitions with a correlation check, empirical
//! algorithm stability, and an experiment harness.

pub mod algorithms;
pub mod coupling;
pub mod enumerate;
pub mod harness;
pub mod error;
pub mod io;
pub mod model;
pub mod par;
pub mod partition;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use model::{ConstraintSpec, DisorderInstance, IntervalUnion, SpinConfig};
pub use par::Execution;
