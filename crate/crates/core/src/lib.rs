//! Learning treatment-assignment rules that maximize a distributional target
//! (such as Gini welfare) while penalizing outcome disparities between
//! protected groups.
//!
//! The crate is organized bottom-up:
//!
//! - [`distributions`]: weighted-atom cdfs, mixtures, sup-distances and the
//!   projection onto valid cdfs.
//! - [`functionals`]: target functionals and similarity measures.
//! - [`objective`]: decision rules, implied cdfs and the penalized objective.
//! - [`estimation`]: plug-in and inverse-propensity-weighted estimators.
//! - [`optimizer`]: Nelder-Mead over products of probability simplices.
//! - [`selection`]: preference-parameter sweeps, budget-based selection and
//!   value-function interpolation.
//! - [`oracle`]: a two-group example with closed-form objective and argmax.
//! - [`simharness`]: seeded Monte Carlo replications against that example.
//! - [`io`]: CSV and JSON formats.

pub mod distributions;
pub mod error;
pub mod estimation;
pub mod functionals;
pub mod io;
pub mod objective;
pub mod optimizer;
pub mod oracle;
pub mod selection;
pub mod simharness;

pub use error::{Error, Result};
