//! Random walks on discrete groups: convolution laws, the spectral radius
//! and convergence parameter, the associated exponential, the tilted walk
//! `R * phi * v`, and numerical certification of the identities that tie
//! them together.

pub mod error;
pub mod group;
pub mod law;
pub mod parallel;
pub mod recurrence;
pub mod spectral;
pub mod tilt;
pub mod window;
pub mod walkspec;
pub mod report;
pub mod pipeline;
pub mod cli;

pub use error::{Error, Result};
pub use group::{Element, GroupSpec};
pub use law::Law;
pub use window::{FunctionTable, Window};
