//! Threshold calibration, paired bootstrap significance and semantic
//! threshold sensitivity.

mod bootstrap;
mod calibration;
mod sensitivity;

pub use bootstrap::{paired_bootstrap, percentile, BootstrapError, BootstrapResult, Metric, PairedBootstrap};
pub use calibration::{
    calibrate, calibrate_iou_threshold, calibrate_semantic_threshold, f_beta, CalibrationCurve, CalibrationError,
    Criterion, CurvePoint, LabeledMatchSample, Selection, Sweep,
};
pub use sensitivity::{threshold_sensitivity, Gap, SensitivityRow, SystemScore};
