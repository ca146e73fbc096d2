//! Stable outcomes of continuum school-choice markets.
//!
//! The crate computes fixed points of the composed interest, admissions and
//! matching maps under deterministic and Poisson vacancy, evaluates the
//! closed-form match-count and average-rank formulas, and simulates finite
//! random markets for comparison.

pub mod error;
pub mod finite;
pub mod formulas;
pub mod measures;
mod numeric;
pub mod solver;
pub mod vacancy;

pub use error::{Error, Result};
pub use vacancy::{Capacity, VacancyKind};
