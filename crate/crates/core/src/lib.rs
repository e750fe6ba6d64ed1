//! Relational multilinear tensor autoregression for longitudinal directed-dyad data.
//!
//! The model regresses an `m x m x v x n` panel `Y` of dyadic relations on its
//! own one-period lag, augmented with reciprocal and transitive slices:
//!
//! ```text
//! Y = X × {B1, B2, B3} + E
//! ```
//!
//! where `B1` and `B2` (`m x m`) act on senders and receivers, and `B3`
//! (`v x 3v`) mixes the direct, reciprocal and transitive predictors.
//!
//! Modules, bottom-up: [`tensor`] (array algebra and containers), [`design`]
//! (preprocessing and the lagged design), [`estimation`] (alternating least
//! squares and Gibbs sampling), [`diagnostics`] (posterior summaries and
//! convergence), [`ingest`] (event aggregation and synthetic panels) and
//! [`pipeline`] (config-driven batch commands).

pub mod design;
pub mod diagnostics;
pub mod error;
pub mod estimation;
pub mod ingest;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
