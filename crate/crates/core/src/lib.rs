//! Three-linear-pendulum (3LP) walking model.
//!
//! A torso and two legs are point masses moving in horizontal planes of
//! constant height, joined by a pelvis of fixed width. The equations are
//! linear, so each phase of a stride has a closed-form transition matrix and
//! periodic gaits are null-space vectors of a single matrix.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod gaits;
pub mod model;
pub mod oracle;
pub mod selection;
pub mod transition;

pub use dynamics::{Phase, PhaseOde, ForceSolution};
pub use error::{Error, Result};
pub use model::{AugmentedState, BodyParams, BodySize, ModelConfig, StrideTiming, STATE_DIM};
