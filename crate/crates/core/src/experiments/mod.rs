//! Batch harness: metrics, named presets and the sweep runner.

pub mod metrics;
pub mod presets;
pub mod sweep;

pub use metrics::{distance_diagnostics, eigen_profile, hellinger, hellinger_sq, mse_spectral, nmse, snr, DistanceDiagnostics};
pub use presets::{Method, Overrides, Preset, ThresholdKind, PRESET_NAMES};
pub use sweep::{run_preset, run_sweep, run_trial, write_report, RequiredSamples, SummaryRow, SweepReport, TrialRecord};
