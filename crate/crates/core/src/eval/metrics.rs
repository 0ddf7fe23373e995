use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::classifier::Classifier;
use crate::dataio::{ClassLabel, GazeWindow, LabelMode, SAMPLE_RATE_HZ, BIN_NAMES, CH_PUPIL, CH_X, CH_Y, WINDOW_LEN};
use crate::error::{Error, Result};

/// `exp(mean_i KL(p_i || p_bar))` for a set of prediction rows, with the
/// marginal `p_bar` taken over the same rows.
pub fn inception_from_probs(probs: &[Vec<f64>]) -> Result<f64> {
    let first = probs.first().ok_or_else(|| Error::Empty("no predictions to score".into()))?;
    let k = first.len();
    if k == 0 || probs.iter().any(|p| p.len() != k) {
        return Err(Error::InvalidShape("prediction rows must share a positive width".into()));
    }
    let n = probs.len() as f64;
    let mut marginal = vec![0.0; k];
    for p in probs {
        for (m, &v) in marginal.iter_mut().zip(p) {
            *m += v / n;
        }
    }
    let kl_sum: f64 = probs
        .iter()
        .map(|p| {
            p.iter()
                .zip(&marginal)
                .filter(|(&v, _)| v > 0.0)
                .map(|(&v, &m)| v * (v / m).ln())
                .sum::<f64>()
        })
        .sum();
    Ok((kl_sum / n).exp())
}

/// Inception score of `windows` (device space) under `classifier`.
pub fn inception_score(classifier: &Classifier, windows: &[GazeWindow]) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::Empty("inception score needs at least one window".into()));
    }
    inception_from_probs(&classifier.predict(windows)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveKind {
    Trajectory,
    Pupil,
}

impl CurveKind {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Self::Trajectory => &["mean_x", "mean_y"],
            Self::Pupil => &["mean_pupil"],
        }
    }

    fn channels(self) -> &'static [usize] {
        match self {
            Self::Trajectory => &[CH_X, CH_Y],
            Self::Pupil => &[CH_PUPIL],
        }
    }

    fn stem(self) -> &'static str {
        match self {
            Self::Trajectory => "trajectory",
            Self::Pupil => "pupil",
        }
    }
}

/// Per-timestep class means; `values[k]` holds one entry per column.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassCurve {
    pub label: ClassLabel,
    pub kind: CurveKind,
    pub values: Vec<Vec<f64>>,
    pub count: usize,
}

fn average(windows: &[GazeWindow], kind: CurveKind) -> Result<ClassCurve> {
    let first = windows.first().ok_or_else(|| Error::Empty("no windows to average".into()))?;
    let label = first.label;
    if let Some(w) = windows.iter().find(|w| w.label != label) {
        return Err(Error::Contract(format!(
            "windows mix class {} and class {}",
            label.index, w.label.index
        )));
    }
    let chans = kind.channels();
    let mut sums = vec![vec![0.0; chans.len()]; WINDOW_LEN];
    for w in windows {
        if w.frames.len() != WINDOW_LEN {
            return Err(Error::InvalidShape(format!("window of {} frames", w.frames.len())));
        }
        for (row, frame) in sums.iter_mut().zip(&w.frames) {
            for (s, &ch) in row.iter_mut().zip(chans) {
                *s += frame[ch];
            }
        }
    }
    let n = windows.len() as f64;
    for row in &mut sums {
        for s in row.iter_mut() {
            *s /= n;
        }
    }
    Ok(ClassCurve {
        label,
        kind,
        values: sums,
        count: windows.len(),
    })
}

/// Per-timestep mean of gaze x and y over windows of one class.
pub fn average_trajectory(windows: &[GazeWindow]) -> Result<ClassCurve> {
    average(windows, CurveKind::Trajectory)
}

/// Per-timestep mean pupil diameter over windows of one class.
pub fn average_pupil(windows: &[GazeWindow]) -> Result<ClassCurve> {
    average(windows, CurveKind::Pupil)
}

/// File name for a curve: `trajectory_E_high.csv` in single-dimension
/// mode, `trajectory_class194.csv` in all-dimension mode.
pub fn curve_file_name(curve: &ClassCurve) -> String {
    match curve.label.mode {
        LabelMode::SingleDim(d) => format!(
            "{}_{}_{}.csv",
            curve.kind.stem(),
            d.letter(),
            BIN_NAMES[curve.label.index]
        ),
        LabelMode::AllDims => format!("{}_class{}.csv", curve.kind.stem(), curve.label.index),
    }
}

pub fn curve_csv(curve: &ClassCurve) -> String {
    let mut s = String::from("t");
    for c in curve.kind.columns() {
        s.push(',');
        s.push_str(c);
    }
    s.push('\n');
    for (k, row) in curve.values.iter().enumerate() {
        write!(s, "{:.16e}", k as f64 / SAMPLE_RATE_HZ).unwrap();
        for v in row {
            write!(s, ",{v:.16e}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Writes one CSV per curve into `dir` and returns the paths written.
pub fn emit_plot_data(curves: &[ClassCurve], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    curves
        .iter()
        .map(|c| {
            let path = dir.join(curve_file_name(c));
            fs::write(&path, curve_csv(c))?;
            Ok(path)
        })
        .collect()
}
