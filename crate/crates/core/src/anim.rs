//! Device-space gaze windows to world-space animation streams.
//!
//! Each exported frame carries a look-at target for the eyes, an eyelid
//! blendshape weight, a uniform pupil scale and the blink flag. One frame
//! per line:
//!
//! ```text
//! t target_x target_y target_z eyelid_weight pupil_scale blink
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dataio::{GazeWindow, CH_BLINK, CH_PUPIL, CH_X, CH_Y, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

/// Viewer geometry: eye midpoint, viewing distance and field of view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EyeRig {
    pub eye_position: [f64; 3],
    pub viewing_distance: f64,
    /// Horizontal field of view in degrees.
    pub h_fov: f64,
    /// Vertical field of view in degrees.
    pub v_fov: f64,
}

impl Default for EyeRig {
    fn default() -> Self {
        Self {
            eye_position: [0.0; 3],
            viewing_distance: 1.0,
            h_fov: 60.0,
            v_fov: 46.0,
        }
    }
}

impl EyeRig {
    pub fn validate(&self) -> Result<()> {
        let fov_ok = |f: f64| f > 0.0 && f < 180.0;
        if !(self.viewing_distance > 0.0) || !self.viewing_distance.is_finite() {
            return Err(Error::Config(format!(
                "viewing distance must be positive, got {}",
                self.viewing_distance
            )));
        }
        if !fov_ok(self.h_fov) || !fov_ok(self.v_fov) {
            return Err(Error::Config(format!(
                "field of view must lie in (0, 180) degrees, got {} x {}",
                self.h_fov, self.v_fov
            )));
        }
        if self.eye_position.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("eye position must be finite".into()));
        }
        Ok(())
    }
}

/// World-space look-at target for normalized screen coordinates; `x` and
/// `y` are clamped to `[0, 1]`.
pub fn gaze_to_world(x: f64, y: f64, rig: &EyeRig) -> [f64; 3] {
    let x = x.clamp(0.0, 1.0);
    let y = y.clamp(0.0, 1.0);
    let d = rig.viewing_distance;
    let half_h = (rig.h_fov / 2.0).to_radians().tan().abs();
    let half_v = (rig.v_fov / 2.0).to_radians().tan().abs();
    let [ex, ey, ez] = rig.eye_position;
    [(2.0 * x - 1.0) * d * half_h + ex, (2.0 * y - 1.0) * d * half_v + ey, d + ez]
}

/// Linear eyelid map `weight = intercept + slope * y`, clamped to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EyelidMap {
    pub slope: f64,
    pub intercept: f64,
}

impl Default for EyelidMap {
    fn default() -> Self {
        Self {
            slope: -1.0,
            intercept: 1.0,
        }
    }
}

/// Eyelid blendshape weight for vertical gaze `y`; a blink frame closes
/// the lid fully.
pub fn eyelid_weight(y: f64, blink: bool, map: &EyelidMap) -> f64 {
    if blink {
        return 1.0;
    }
    (map.intercept + map.slope * y.clamp(0.0, 1.0)).clamp(0.0, 1.0)
}

/// Eyelid weights for a vertical gaze trace and its blink channel.
pub fn eyelid_weights(y: &[f64], blink: &[f64], map: &EyelidMap) -> Result<Vec<f64>> {
    if y.len() != blink.len() {
        return Err(Error::InvalidShape(format!(
            "{} gaze values but {} blink values",
            y.len(),
            blink.len()
        )));
    }
    Ok(y.iter().zip(blink).map(|(&y, &b)| eyelid_weight(y, b >= 0.5, map)).collect())
}

pub fn pupil_scale(pupil_mm: f64, baseline_mm: f64) -> Result<f64> {
    if !(pupil_mm > 0.0) || !(baseline_mm > 0.0) {
        return Err(Error::Contract(format!(
            "pupil {pupil_mm} mm and baseline {baseline_mm} mm must both be positive"
        )));
    }
    Ok(pupil_mm / baseline_mm)
}

/// Mean pupil diameter over a set of windows, the default scale baseline.
pub fn mean_pupil(windows: &[GazeWindow]) -> Result<f64> {
    let n: usize = windows.iter().map(|w| w.frames.len()).sum();
    if n == 0 {
        return Err(Error::Empty("no frames to average pupil over".into()));
    }
    Ok(windows.iter().flat_map(|w| w.frames.iter().map(|r| r[CH_PUPIL])).sum::<f64>() / n as f64)
}

/// Maximal runs of blink frames as `(start_frame, duration_frames)`.
pub fn blink_events(blink: &[f64]) -> Result<Vec<(usize, usize)>> {
    if let Some(v) = blink.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::Contract(format!("blink channel must be binary, found {v}")));
    }
    let mut events = Vec::new();
    let mut start = None;
    for (k, &v) in blink.iter().enumerate() {
        match (v == 1.0, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                events.push((s, k - s));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        events.push((s, blink.len() - s));
    }
    Ok(events)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnimFrame {
    pub t: f64,
    pub target: [f64; 3],
    pub eyelid_weight: f64,
    pub pupil_scale: f64,
    pub blink: u8,
}

/// Converts one device-space window into animation frames at `k / 60` s.
pub fn animate(window: &GazeWindow, rig: &EyeRig, eyelid: &EyelidMap, baseline_mm: f64) -> Result<Vec<AnimFrame>> {
    rig.validate()?;
    window
        .frames
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let blink = r[CH_BLINK] >= 0.5;
            Ok(AnimFrame {
                t: k as f64 / SAMPLE_RATE_HZ,
                target: gaze_to_world(r[CH_X], r[CH_Y], rig),
                eyelid_weight: eyelid_weight(r[CH_Y], blink, eyelid),
                pupil_scale: pupil_scale(r[CH_PUPIL], baseline_mm)?,
                blink: blink as u8,
            })
        })
        .collect()
}

pub fn format_animation(frames: &[AnimFrame]) -> String {
    let mut s = String::with_capacity(frames.len() * 160);
    for f in frames {
        writeln!(
            s,
            "{:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e} {}",
            f.t, f.target[0], f.target[1], f.target[2], f.eyelid_weight, f.pupil_scale, f.blink
        )
        .unwrap();
    }
    s
}

pub fn parse_animation(text: &str) -> Result<Vec<AnimFrame>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let bad = |msg: String| Error::Parse {
                path: "<animation>".into(),
                line: i + 1,
                msg,
            };
            let fields: Vec<&str> = line.split(' ').collect();
            if fields.len() != 7 {
                return Err(bad(format!("expected 7 fields, found {}", fields.len())));
            }
            let mut v = [0.0; 6];
            for (slot, f) in v.iter_mut().zip(&fields) {
                *slot = f.parse().map_err(|e| bad(format!("{f:?}: {e}")))?;
            }
            let blink = match fields[6] {
                "0" => 0,
                "1" => 1,
                other => return Err(bad(format!("blink must be 0 or 1, found {other:?}"))),
            };
            Ok(AnimFrame {
                t: v[0],
                target: [v[1], v[2], v[3]],
                eyelid_weight: v[4],
                pupil_scale: v[5],
                blink,
            })
        })
        .collect()
}

/// Writes the animation records for `window` to `path`.
pub fn export_animation(
    window: &GazeWindow,
    rig: &EyeRig,
    eyelid: &EyelidMap,
    baseline_mm: f64,
    path: &Path,
) -> Result<Vec<AnimFrame>> {
    let frames = animate(window, rig, eyelid, baseline_mm)?;
    fs::write(path, format_animation(&frames))?;
    Ok(frames)
}
