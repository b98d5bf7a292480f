//! Combinations of latent and graph-feature models, and score calibration.

mod additive;
mod are;
mod platt;
mod stacking;

pub use additive::{additive_score, fit_additive, neighbor_features, AdditiveConfig, AdditiveModel};
pub use are::{are_score, fit_are, pra_component, AreComponents, AreConfig, AreModel, AreReport};
pub use platt::{platt_calibrate, PlattCalibrator, MAX_SLOPE};
pub use stacking::{fit_stacker, stack_inputs, ExtraFeatures, StackedModel, StackedScorer};
