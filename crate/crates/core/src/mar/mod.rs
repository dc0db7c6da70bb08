//! Missing-at-random model: truth synthesis, sampling, preliminary fits and
//! the score variables of the estimators.

mod fit;
mod holder;
mod model;
mod tilde;

pub use fit::{rate, ErrorDirections, FitMode, PreliminaryFit, SyntheticSpec};
pub use holder::HolderFunction;
pub use model::{Bounds, ModelSpec, Observation, Sampler, TripletModel, CENTER_A, CENTER_B, CENTER_F};
pub use tilde::{score_triple, tilde_project, ScoreTriple, Weights};
