//! Case studies and experiments on top of `rbisim-core` and `rbisim-isa`:
//! exhaustive checks of the two ISA models, a gallery of small
//! counterexamples, and differential fuzzing of the proof kernel.

pub mod casestudy;
pub mod enumerate;
pub mod error;
pub mod fuzz;
pub mod gallery;
pub mod models;
pub mod report;

pub use error::{Result, WorkbenchError};
