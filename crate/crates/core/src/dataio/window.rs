use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::label::{encode_label, ClassLabel, LabelMode, PersonalityProfile};
use super::recording::GazeSample;
use crate::blinkcodec::binarize;
use crate::error::{Error, Result};

/// Frames per window (5 s at 60 Hz).
pub const WINDOW_LEN: usize = 300;
/// Channel order: gaze_x, gaze_y, pupil, blink.
pub const CHANNELS: usize = 4;
pub const SAMPLE_RATE_HZ: f64 = 60.0;
pub const DEFAULT_STRIDE: usize = 60;

pub const CH_X: usize = 0;
pub const CH_Y: usize = 1;
pub const CH_PUPIL: usize = 2;
pub const CH_BLINK: usize = 3;

/// Row-major `frames x 4` matrix.
pub type Frames = Vec<[f64; CHANNELS]>;

/// A 300-frame training window with its personality label.
#[derive(Clone, Debug, PartialEq)]
pub struct GazeWindow {
    pub frames: Frames,
    pub profile: PersonalityProfile,
    pub label: ClassLabel,
    pub participant_id: String,
}

impl GazeWindow {
    pub fn new(frames: Frames, profile: PersonalityProfile, mode: LabelMode, participant_id: &str) -> Result<Self> {
        if frames.len() != WINDOW_LEN {
            return Err(Error::InvalidShape(format!(
                "window has {} frames, expected {WINDOW_LEN}",
                frames.len()
            )));
        }
        Ok(Self {
            frames,
            profile,
            label: encode_label(&profile, mode),
            participant_id: participant_id.to_string(),
        })
    }

    pub fn channel(&self, ch: usize) -> Vec<f64> {
        self.frames.iter().map(|r| r[ch]).collect()
    }

    /// Re-derives the label for a different conditioning mode.
    pub fn relabel(&mut self, mode: LabelMode) {
        self.label = encode_label(&self.profile, mode);
    }
}

/// Cuts `size`-frame windows starting every `stride` frames; a partial tail
/// is dropped.
pub fn window_stream(samples: &[GazeSample], size: usize, stride: usize) -> Vec<Frames> {
    assert!(stride >= 1, "window stride must be positive");
    if size == 0 || samples.len() < size {
        return Vec::new();
    }
    (0..=samples.len() - size)
        .step_by(stride)
        .map(|start| samples[start..start + size].iter().map(GazeSample::row).collect())
        .collect()
}

/// Analytic window count for `n` samples.
pub fn expected_window_count(n: usize, size: usize, stride: usize) -> usize {
    if n < size {
        0
    } else {
        (n - size) / stride + 1
    }
}

/// True when every row has gaze inside `[0, 1]` and a non-zero pupil.
pub fn quality_filter(frames: &[[f64; CHANNELS]]) -> bool {
    frames.iter().all(|r| {
        (0.0..=1.0).contains(&r[CH_X]) && (0.0..=1.0).contains(&r[CH_Y]) && r[CH_PUPIL] > 0.0
    })
}

/// Pupil range used to map diameters onto `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormStats {
    pub pupil_min: f64,
    pub pupil_max: f64,
}

const STATS_FORMAT_VERSION: u32 = 1;

impl NormStats {
    pub fn new(pupil_min: f64, pupil_max: f64) -> Result<Self> {
        if !(pupil_min < pupil_max) || !pupil_min.is_finite() || !pupil_max.is_finite() {
            return Err(Error::DegenerateStats {
                min: pupil_min,
                max: pupil_max,
            });
        }
        Ok(Self { pupil_min, pupil_max })
    }

    /// Pupil extent over a set of (quality-filtered, training) windows.
    pub fn from_windows<'a, I: IntoIterator<Item = &'a GazeWindow>>(windows: I) -> Result<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for w in windows {
            for r in &w.frames {
                lo = lo.min(r[CH_PUPIL]);
                hi = hi.max(r[CH_PUPIL]);
            }
        }
        if !lo.is_finite() {
            return Err(Error::Empty("no windows to compute pupil statistics from".into()));
        }
        Self::new(lo, hi)
    }

    fn check(&self) -> Result<()> {
        Self::new(self.pupil_min, self.pupil_max).map(|_| ())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "format_version={STATS_FORMAT_VERSION}").unwrap();
        writeln!(s, "pupil_min={:.16e}", self.pupil_min).unwrap();
        writeln!(s, "pupil_max={:.16e}", self.pupil_max).unwrap();
        s
    }

    pub fn from_text(path: &Path, text: &str) -> Result<Self> {
        let (mut min, mut max, mut version) = (None, None, None);
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = || v.parse::<f64>().map_err(|_| err(format!("bad number {v:?}")));
            match k {
                "pupil_min" => min = Some(num()?),
                "pupil_max" => max = Some(num()?),
                "format_version" => {
                    version = Some(v.parse::<u32>().map_err(|_| err(format!("bad version {v:?}")))?)
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Schema {
            path: path.to_path_buf(),
            msg: format!("missing {k}"),
        };
        let version = version.ok_or_else(|| missing("format_version"))?;
        if version != STATS_FORMAT_VERSION {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                msg: format!("unsupported format_version {version}"),
            });
        }
        Self::new(min.ok_or_else(|| missing("pupil_min"))?, max.ok_or_else(|| missing("pupil_max"))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(path, &fs::read_to_string(path)?)
    }
}

/// Maps gaze `v -> 2v - 1` and pupil min/max onto `[-1, 1]` (clamped);
/// the blink channel passes through.
pub fn normalize(frames: &[[f64; CHANNELS]], stats: &NormStats) -> Result<Frames> {
    stats.check()?;
    let span = stats.pupil_max - stats.pupil_min;
    Ok(frames
        .iter()
        .map(|r| {
            [
                2.0 * r[CH_X] - 1.0,
                2.0 * r[CH_Y] - 1.0,
                (2.0 * (r[CH_PUPIL] - stats.pupil_min) / span - 1.0).clamp(-1.0, 1.0),
                r[CH_BLINK],
            ]
        })
        .collect())
}

/// Inverse of [`normalize`]; the blink channel is thresholded to `{0, 1}`.
pub fn denormalize(frames: &[[f64; CHANNELS]], stats: &NormStats) -> Result<Frames> {
    stats.check()?;
    let span = stats.pupil_max - stats.pupil_min;
    let blink = binarize(&frames.iter().map(|r| r[CH_BLINK]).collect::<Vec<_>>(), 0.5);
    Ok(frames
        .iter()
        .zip(blink)
        .map(|(r, b)| {
            [
                (r[CH_X] + 1.0) / 2.0,
                (r[CH_Y] + 1.0) / 2.0,
                (r[CH_PUPIL] + 1.0) / 2.0 * span + stats.pupil_min,
                b,
            ]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize) -> Vec<GazeSample> {
        (0..n)
            .map(|i| GazeSample {
                t: i as f64 / 60.0,
                gaze_x: 0.5,
                gaze_y: 0.25,
                pupil: 3.0,
                blink: (i % 7 == 0) as u8,
            })
            .collect()
    }

    #[test]
    fn window_counts() {
        assert_eq!(window_stream(&samples(600), 300, 300).len(), 2);
        assert_eq!(window_stream(&samples(300), 300, 1).len(), 1);
        assert_eq!(window_stream(&samples(299), 300, 1).len(), 0);
        for n in [0, 299, 300, 301, 359, 360, 361, 1000] {
            for stride in [1, 7, 60, 300] {
                assert_eq!(window_stream(&samples(n), 300, stride).len(), expected_window_count(n, 300, stride));
            }
        }
    }

    #[test]
    fn windows_start_at_stride_offsets() {
        let s = samples(500);
        let w = window_stream(&s, 300, 60);
        assert_eq!(w[1][0], s[60].row());
        assert_eq!(w[3][299], s[180 + 299].row());
    }

    #[test]
    fn quality_filter_cases() {
        let good: Frames = vec![[0.5, 0.5, 3.0, 0.0]; 300];
        assert!(quality_filter(&good));
        let mut bad = good.clone();
        bad[17][CH_X] = 1.2;
        assert!(!quality_filter(&bad));
        let mut bad = good.clone();
        bad[299][CH_PUPIL] = 0.0;
        assert!(!quality_filter(&bad));
        let mut edge = good;
        edge[0][CH_Y] = 0.0;
        edge[1][CH_Y] = 1.0;
        assert!(quality_filter(&edge));
    }

    #[test]
    fn normalize_examples() {
        let stats = NormStats::new(2.0, 6.0).unwrap();
        let f: Frames = vec![[0.5, 1.0, 2.0, 1.0]];
        let n = normalize(&f, &stats).unwrap();
        assert_eq!(n[0], [0.0, 1.0, -1.0, 1.0]);
        let d = denormalize(&[[0.0, -1.0, -1.0, 0.2]], &stats).unwrap();
        assert_eq!(d[0], [0.5, 0.0, 2.0, 0.0]);
        // out-of-range pupil is clamped
        let n = normalize(&[[0.5, 0.5, 9.0, 0.0]], &stats).unwrap();
        assert_eq!(n[0][CH_PUPIL], 1.0);
    }

    #[test]
    fn degenerate_stats() {
        assert!(matches!(NormStats::new(3.0, 3.0), Err(Error::DegenerateStats { .. })));
        let bad = NormStats {
            pupil_min: 3.0,
            pupil_max: 3.0,
        };
        assert!(normalize(&[[0.5, 0.5, 3.0, 0.0]], &bad).is_err());
        assert!(denormalize(&[[0.5, 0.5, 3.0, 0.0]], &bad).is_err());
    }

    #[test]
    fn stats_text_round_trip_is_exact() {
        let stats = NormStats::new(0.1 + 0.2, std::f64::consts::PI).unwrap();
        let back = NormStats::from_text(Path::new("stats.txt"), &stats.to_text()).unwrap();
        assert_eq!(back.pupil_min.to_bits(), stats.pupil_min.to_bits());
        assert_eq!(back.pupil_max.to_bits(), stats.pupil_max.to_bits());
        assert!(NormStats::from_text(Path::new("s"), "pupil_min=1\npupil_max=2\n").is_err());
        assert!(NormStats::from_text(Path::new("s"), "format_version=1\npupil_min=1\npupil_max=2\nfoo=1\n").is_err());
    }
}
