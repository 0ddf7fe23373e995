use rand::Rng;
use rand_distr::StandardNormal;

use super::model::{tensor_to_frames, Generator};
use crate::blinkcodec::BlinkCodec;
use crate::dataio::{
    decode_label, denormalize, ClassLabel, Frames, GazeWindow, LabelMode, NormStats, PersonalityProfile, CH_BLINK,
    CH_X, CH_Y,
};
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor};

const SYNTH_CHUNK: usize = 64;

/// Participant id carried by every synthesized window.
pub const SYNTHETIC_ID: &str = "synthetic";

fn check_label(g: &Generator, label: ClassLabel) -> Result<()> {
    if label.mode != g.mode {
        return Err(Error::Config(format!(
            "label is in {} mode, generator in {}",
            label.mode, g.mode
        )));
    }
    ClassLabel::new(label.mode, label.index).map(|_| ())
}

fn run_generator(g: &Generator, codec: &BlinkCodec, z: Tensor, labels: &[usize]) -> Result<Vec<Frames>> {
    let mut tape = Tape::new();
    let gv = g.params.bind(&mut tape, false);
    let dec = codec.bind_frozen_decoder(&mut tape);
    let z = tape.constant(z);
    let out = g.forward(&mut tape, &gv, codec, &dec, z, labels)?;
    Ok(tensor_to_frames(tape.value(out)))
}

/// `G(z, y)` for one latent vector; every channel of the result lies in
/// `(-1, 1)`.
pub fn generate(z: &[f64], label: ClassLabel, g: &Generator, codec: &BlinkCodec) -> Result<Frames> {
    check_label(g, label)?;
    if z.len() != g.latent_dim() {
        return Err(Error::InvalidShape(format!(
            "latent has {} values, generator expects {}",
            z.len(),
            g.latent_dim()
        )));
    }
    let z = Tensor::new(vec![1, z.len()], z.to_vec())?;
    Ok(run_generator(g, codec, z, &[label.index])?.remove(0))
}

/// Profile attached to synthesized windows. In single-dimension mode the
/// other four bins are set to medium.
pub fn label_profile(label: ClassLabel) -> Result<PersonalityProfile> {
    match label.mode {
        LabelMode::AllDims => decode_label(label.index),
        LabelMode::SingleDim(d) => {
            let mut bins = [1u8; 5];
            bins[d.position()] = label.index as u8;
            PersonalityProfile::new(bins)
        }
    }
}

/// Maps a generator output to device space: the blink channel goes from
/// `(-1, 1)` back to a probability, then everything is denormalized and
/// gaze is clamped to `[0, 1]`.
pub fn to_device_space(frames: &[[f64; 4]], stats: &NormStats) -> Result<Frames> {
    let prob: Frames = frames
        .iter()
        .map(|r| {
            let mut r = *r;
            r[CH_BLINK] = (r[CH_BLINK] + 1.0) / 2.0;
            r
        })
        .collect();
    let mut out = denormalize(&prob, stats)?;
    for r in &mut out {
        r[CH_X] = r[CH_X].clamp(0.0, 1.0);
        r[CH_Y] = r[CH_Y].clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Draws `n` latent vectors and returns device-space windows for `label`.
/// Any valid class index is accepted, including classes absent from the
/// training data.
pub fn synthesize_batch<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    label: ClassLabel,
    g: &Generator,
    codec: &BlinkCodec,
    stats: &NormStats,
) -> Result<Vec<GazeWindow>> {
    check_label(g, label)?;
    let profile = label_profile(label)?;
    let dim = g.latent_dim();
    let mut out = Vec::with_capacity(n);
    let mut left = n;
    while left > 0 {
        let k = left.min(SYNTH_CHUNK);
        let z: Vec<f64> = (0..k * dim).map(|_| rng.sample(StandardNormal)).collect();
        for frames in run_generator(g, codec, Tensor::new(vec![k, dim], z)?, &vec![label.index; k])? {
            let dev = to_device_space(&frames, stats)?;
            let mut w = GazeWindow::new(dev, profile, label.mode, SYNTHETIC_ID)?;
            w.label = label;
            out.push(w);
        }
        left -= k;
    }
    Ok(out)
}
