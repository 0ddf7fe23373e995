//! Personality classifier, inception score and per-class curve export.

mod classifier;
mod metrics;

pub use classifier::{train_classifier, Classifier, ClassifierConfig, ClassifierReport};
pub use metrics::{
    average_pupil, average_trajectory, curve_csv, curve_file_name, emit_plot_data, inception_from_probs,
    inception_score, ClassCurve, CurveKind,
};
