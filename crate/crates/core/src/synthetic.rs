//! Synthetic corpora with known structure, used for smoke runs and for
//! checking that training recovers what was planted.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataio::{Dimension, Frames, GazeWindow, LabelMode, PersonalityProfile, SAMPLE_RATE_HZ, WINDOW_LEN};
use crate::error::Result;

/// Blink trains with runs of `3..=10` frames at roughly `rate_hz` blink
/// onsets per second, separated by at least 6 open frames.
pub fn blink_train<R: Rng + ?Sized>(rng: &mut R, len: usize, rate_hz: f64) -> Vec<f64> {
    let p_onset = rate_hz / SAMPLE_RATE_HZ;
    let mut out = vec![0.0; len];
    let mut i = 0;
    while i < len {
        if rng.gen::<f64>() < p_onset {
            let run = rng.gen_range(3..=10);
            let end = (i + run).min(len);
            out[i..end].fill(1.0);
            i = end + 6;
        } else {
            i += 1;
        }
    }
    out
}

pub fn blink_corpus<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| blink_train(rng, WINDOW_LEN, 0.3)).collect()
}

/// Three-class toy gaze corpus in `single_dim:E` mode. Class `c` is the E
/// bin; its planted mean trajectory is [`ToyCorpus::class_mean`].
#[derive(Clone, Debug)]
pub struct ToyCorpus {
    pub frame_noise: f64,
    pub window_jitter: f64,
    pub pupil_noise: f64,
}

impl Default for ToyCorpus {
    fn default() -> Self {
        Self {
            frame_noise: 0.02,
            window_jitter: 0.02,
            pupil_noise: 0.05,
        }
    }
}

pub const TOY_DIMENSION: Dimension = Dimension::E;

impl ToyCorpus {
    pub fn mode(&self) -> LabelMode {
        LabelMode::SingleDim(TOY_DIMENSION)
    }

    /// Planted device-space `(x, y)` mean of class `c` at frame `k`.
    pub fn class_mean(&self, c: usize, k: usize) -> (f64, f64) {
        let phase = 2.0 * PI * k as f64 / WINDOW_LEN as f64;
        let off = c as f64 - 1.0;
        (0.5 + 0.2 * off + 0.05 * phase.sin(), 0.5 - 0.15 * off + 0.05 * phase.cos())
    }

    pub fn class_pupil(&self, c: usize) -> f64 {
        3.0 + 0.5 * c as f64
    }

    pub fn profile(c: usize) -> PersonalityProfile {
        let mut bins = [1u8; 5];
        bins[TOY_DIMENSION.position()] = c as u8;
        PersonalityProfile::new(bins).expect("bin below 3")
    }

    pub fn window<R: Rng + ?Sized>(&self, rng: &mut R, c: usize, participant: &str) -> Result<GazeWindow> {
        let frame = Normal::new(0.0, self.frame_noise).unwrap();
        let jitter = Normal::new(0.0, self.window_jitter).unwrap();
        let pupil = Normal::new(0.0, self.pupil_noise).unwrap();
        let (jx, jy, jp) = (jitter.sample(rng), jitter.sample(rng), pupil.sample(rng));
        let blink = blink_train(rng, WINDOW_LEN, 0.3);
        let frames: Frames = (0..WINDOW_LEN)
            .map(|k| {
                let (mx, my) = self.class_mean(c, k);
                [
                    (mx + jx + frame.sample(rng)).clamp(0.0, 1.0),
                    (my + jy + frame.sample(rng)).clamp(0.0, 1.0),
                    (self.class_pupil(c) + jp + 0.5 * pupil.sample(rng)).max(0.5),
                    blink[k],
                ]
            })
            .collect();
        GazeWindow::new(frames, Self::profile(c), self.mode(), participant)
    }

    /// `participants_per_class` participants per class, each contributing
    /// `windows_per_participant` windows.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        participants_per_class: usize,
        windows_per_participant: usize,
    ) -> Result<Vec<GazeWindow>> {
        let mut out = Vec::with_capacity(3 * participants_per_class * windows_per_participant);
        for c in 0..3 {
            for p in 0..participants_per_class {
                let pid = format!("toy{c}_{p:02}");
                for _ in 0..windows_per_participant {
                    out.push(self.window(rng, c, &pid)?);
                }
            }
        }
        Ok(out)
    }
}
