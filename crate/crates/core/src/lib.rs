//! Covariance-based transfer learning for BCI calibration.
//!
//! The crate covers the whole experimental chain: SPD geometry under the
//! affine-invariant metric ([`spd`]), minimum-distance-to-mean classification
//! ([`mdm`]), Riemannian Procrustes alignment of a source user to a target user
//! ([`rpa`]), the 18 pair features ([`features`]) feeding a transfer-performance
//! regressor ([`predictor`]), the source-selection strategies ([`selection`]) and
//! the evaluation harness that compares them ([`harness`]). Covariance datasets and
//! the synthetic benchmark generator live in [`dataset`].

pub mod dataset;
pub mod error;
pub mod features;
pub mod folds;
pub mod harness;
pub mod mdm;
pub mod predictor;
pub mod rpa;
pub mod selection;
pub mod spd;

pub use error::{Error, Result};
