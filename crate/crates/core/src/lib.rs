//! Statistical hypersurfaces `x_{n+1} = ln Σ_α exp f_α(x)`: pointwise geometry,
//! entropy and its first-order variations, replicator dynamics of the Gibbs
//! weights, the potential behind the weight equations, and integral identities.

pub mod deformation;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod fdcheck;
pub mod geometry;
pub mod integral;
pub mod model;
pub mod potential;
pub mod suite;
pub mod tensor;
pub mod testkit;

pub use error::{Error, Result};
pub use model::{parse_model, Evaluation, StatisticalModel};
