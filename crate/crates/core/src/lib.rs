//! One-bit phase retrieval by randomized Kaczmarz projection.
//!
//! Sign-only comparisons of `|a_j^H x|` against per-sample thresholds become
//! linear inequalities on the lifted matrix `X = x x^H`. With enough samples
//! the feasible polyhedron shrinks around `X` and a Kaczmarz solver finds a
//! point in it without any rank or PSD constraint.

pub mod baselines;
pub mod bounds;
pub mod eigen;
pub mod error;
pub mod experiments;
pub mod kaczmarz;
pub mod mle;
pub mod model;
pub mod normal;
pub mod opera;
pub mod polyhedron;
pub mod sampling;

pub use error::{Error, Result};
pub use kaczmarz::{solve, OracleStop, RkaConfig, RkaResult, StopReason};
pub use model::{HermitianMatrix, LiftedMatrix, SensingEnsemble, SignalModel, SignalVector};
pub use opera::{adaptive_thresholds, extract_signal, recover, run_opera, AdaptiveConfig};
pub use polyhedron::{build_system, InequalitySystem};
pub use sampling::{gen_instance, magnitudes, quantize, NoiseSpec, OneBitRecord, Sign, ThresholdSpec};
