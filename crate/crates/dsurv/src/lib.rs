//! Discrete-time survival modeling.
//!
//! Follow-up time is cut into intervals; a feed-forward network maps each
//! subject's covariates to a conditional survival probability per interval,
//! and the product of those probabilities is the survival curve. Training
//! maximizes the right-censored likelihood by minibatch RMSprop, so the loss
//! of a minibatch depends only on the subjects in it — unlike partial-
//! likelihood methods, which need the whole risk set per update.
//!
//! Two output heads are provided: a *flexible* head with one unit per
//! interval (non-proportional hazards), and a *proportional-hazards* head
//! that scales a trainable baseline by a single linear predictor. Classical
//! estimators (Kaplan-Meier, Cox with Breslow baseline) and censoring-aware
//! metrics (concordance index, censored Brier score, calibration tables)
//! round out the toolkit, plus seeded simulation and CSV ingestion with
//! imputation.
//!
//! ```
//! use dsurv::{
//!     datagen::{simulate, GroupDist, SimSpec},
//!     nnet::{layer_stack, train, HeadKind, TrainConfig},
//!     timegrid::TimeGrid,
//! };
//!
//! # fn main() -> dsurv::Result<()> {
//! let records = simulate(&SimSpec::two_group(
//!     400,
//!     GroupDist::Exponential { median_days: 200.0 },
//!     GroupDist::Exponential { median_days: 400.0 },
//!     Some(400.0),
//!     7,
//! ))?;
//! let grid = TimeGrid::uniform(90.0, 720.0)?;
//! let specs = layer_stack(1, &[], HeadKind::Flexible, grid.len());
//! let config = TrainConfig { epochs: 50, ..TrainConfig::default() };
//! let fitted = train(&records, &grid, &specs, &config)?;
//! assert_eq!(fitted.trace.len(), 50);
//! # Ok(())
//! # }
//! ```

// Argument checks are written as `!(x > 0.0)` so NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod datagen;
pub mod dataio;
mod error;
pub mod likelihood;
pub mod metrics;
pub mod model_io;
pub mod nnet;
pub mod rng;
pub mod timegrid;

pub use error::{Error, Result};
pub use likelihood::SurvivalCurve;
pub use nnet::{HeadKind, ModelParams, TrainConfig};
pub use timegrid::{EncodedTarget, SurvivalRecord, TimeGrid};
