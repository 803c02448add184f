//! Latent diffeomorphic dynamic mode decomposition.
//!
//! Learns interpretable latent rotation dynamics together with invertible
//! nonlinear maps to predict a target sequence from an input time series
//! with memory. The prediction map is
//! `y_j = g(phi^{-1}(K^j z0 - f(x_j)))` with `K` a block-diagonal
//! rotation, `phi` an additive coupling layer, `f` a small
//! polynomial-activation network and `g` a softplus readout.
//!
//! The crate is `no_std` (with `alloc`); file formats and the CLI live in
//! the companion `lddmd` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod data;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod maps;
pub mod model;
pub mod rng;
pub mod train;

pub use autodiff::{check_gradient, Scalar, Tape, Var};
pub use data::{generate_synthetic, SyntheticConfig, TimeSeriesDataset};
pub use dynamics::{spectral_init, BlockRotation};
pub use error::{Error, Result};
pub use eval::{evaluate, inspect, nse, InspectReport, NseReport};
pub use maps::{AdditiveCoupling, CouplingParity, PolyMlp, ReadoutMlp};
pub use model::{batch_loss, DdmdModel, LddmdModel, LossMode, Predictor};
pub use train::{adam_step, init_model, train, AdamState, TrainConfig};
