//! Lipschitz and Teichmüller geometry of the once-punctured torus.

// Comparisons written as `!(x > 0.0)` are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod battery;
pub mod bridge;
pub mod config;
pub mod error;
pub mod experiments;
pub mod flat;
pub mod fricke;
pub mod logreal;
pub mod metrics;
pub mod slopes;

pub use config::Config;
pub use error::{Error, Result};
pub use fricke::{random_point, Trace, TracePoint};
pub use logreal::LogReal;
pub use slopes::{MappingClass, Marking, Slope};
