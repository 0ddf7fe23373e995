//! Autoencoder over the binary blink channel.
//!
//! The decoder maps a continuous latent code to a per-frame blink
//! probability curve. During GAN training the generator emits a latent
//! code and the frozen decoder turns it into a differentiable blink
//! channel.

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::WINDOW_LEN;
use crate::error::{Error, Result};
use crate::numerics::{normal_init, AdamConfig, ParamStore, Tape, Tensor, Var, LEAKY_SLOPE};

pub const DEFAULT_LATENT_DIM: usize = 30;
pub const DEFAULT_HIDDEN: usize = 128;

const ENC_W1: usize = 0;
const ENC_B1: usize = 1;
const ENC_W2: usize = 2;
const ENC_B2: usize = 3;
const DEC_W1: usize = 4;
const DEC_B1: usize = 5;
const DEC_W2: usize = 6;
const DEC_B2: usize = 7;

#[derive(Clone, Debug, PartialEq)]
pub struct CodecConfig {
    pub latent_dim: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            latent_dim: DEFAULT_LATENT_DIM,
            hidden: DEFAULT_HIDDEN,
            epochs: 60,
            batch_size: 64,
            lr: 1e-3,
            seed: 0,
        }
    }
}

/// Encoder `300 -> hidden -> L` and decoder `L -> hidden -> 300 (sigmoid)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlinkCodec {
    pub params: ParamStore,
}

/// Decoder parameters recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct DecoderVars {
    w1: Var,
    b1: Var,
    w2: Var,
    b2: Var,
}

impl BlinkCodec {
    pub fn new(latent_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        params.insert("enc.w1", normal_init(&mut rng, vec![hidden, WINDOW_LEN], he_std(WINDOW_LEN)));
        params.insert("enc.b1", Tensor::zeros(vec![hidden]));
        params.insert("enc.w2", normal_init(&mut rng, vec![latent_dim, hidden], he_std(hidden)));
        params.insert("enc.b2", Tensor::zeros(vec![latent_dim]));
        params.insert("dec.w1", normal_init(&mut rng, vec![hidden, latent_dim], he_std(latent_dim)));
        params.insert("dec.b1", Tensor::zeros(vec![hidden]));
        params.insert("dec.w2", normal_init(&mut rng, vec![WINDOW_LEN, hidden], he_std(hidden)));
        params.insert("dec.b2", Tensor::zeros(vec![WINDOW_LEN]));
        Self { params }
    }

    /// Wraps loaded parameters after checking the layer layout.
    pub fn from_params(params: ParamStore) -> Result<Self> {
        let expected = ["enc.w1", "enc.b1", "enc.w2", "enc.b2", "dec.w1", "dec.b1", "dec.w2", "dec.b2"];
        let names: Vec<&str> = params.iter().map(|(n, _)| n).collect();
        if names != expected {
            return Err(Error::Checkpoint(format!("codec parameters {names:?} do not match {expected:?}")));
        }
        let codec = Self { params };
        let (l, h) = (codec.latent_dim(), codec.hidden());
        let shapes_ok = codec.params.tensor(ENC_W1).shape() == [h, WINDOW_LEN]
            && codec.params.tensor(ENC_W2).shape() == [l, h]
            && codec.params.tensor(DEC_W1).shape() == [h, l]
            && codec.params.tensor(DEC_W2).shape() == [WINDOW_LEN, h];
        if !shapes_ok {
            return Err(Error::Checkpoint("codec parameter shapes are inconsistent".into()));
        }
        Ok(codec)
    }

    pub fn latent_dim(&self) -> usize {
        self.params.tensor(ENC_B2).len()
    }

    pub fn hidden(&self) -> usize {
        self.params.tensor(ENC_B1).len()
    }

    fn encode_vars(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        let h = tape.dense(x, vars[ENC_W1], vars[ENC_B1])?;
        let h = tape.leaky_relu(h, LEAKY_SLOPE);
        tape.dense(h, vars[ENC_W2], vars[ENC_B2])
    }

    /// Records the decoder weights as constants, so gradients reach the
    /// latent input but never the decoder itself.
    pub fn bind_frozen_decoder(&self, tape: &mut Tape) -> DecoderVars {
        let c = |tape: &mut Tape, i: usize| {
            let t = self.params.tensor(i);
            tape.constant(Tensor::new(t.shape().to_vec(), t.data().to_vec()).unwrap())
        };
        DecoderVars {
            w1: c(tape, DEC_W1),
            b1: c(tape, DEC_B1),
            w2: c(tape, DEC_W2),
            b2: c(tape, DEC_B2),
        }
    }

    /// Decodes `[L]` or `[B, L]` latents to blink probabilities on `tape`.
    pub fn decode_on_tape(&self, tape: &mut Tape, dec: &DecoderVars, latent: Var) -> Result<Var> {
        let h = tape.dense(latent, dec.w1, dec.b1)?;
        let h = tape.leaky_relu(h, LEAKY_SLOPE);
        let logits = tape.dense(h, dec.w2, dec.b2)?;
        Ok(tape.sigmoid(logits))
    }

    /// Continuous code for a binary blink channel.
    pub fn encode(&self, blink: &[f64]) -> Result<Vec<f64>> {
        check_binary(blink)?;
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape, false);
        let x = tape.constant(Tensor::from_vec(blink.to_vec()));
        let z = self.encode_vars(&mut tape, &vars, x)?;
        Ok(tape.value(z).data().to_vec())
    }

    /// Blink probability curve in `(0, 1)` for a latent code.
    pub fn decode(&self, latent: &[f64]) -> Result<Vec<f64>> {
        if latent.len() != self.latent_dim() {
            return Err(Error::InvalidShape(format!(
                "latent has {} values, codec expects {}",
                latent.len(),
                self.latent_dim()
            )));
        }
        let mut tape = Tape::new();
        let dec = self.bind_frozen_decoder(&mut tape);
        let z = tape.constant(Tensor::from_vec(latent.to_vec()));
        let p = self.decode_on_tape(&mut tape, &dec, z)?;
        Ok(tape.value(p).data().to_vec())
    }

    pub fn reconstruct(&self, blink: &[f64]) -> Result<Vec<f64>> {
        self.decode(&self.encode(blink)?)
    }
}

/// Fan-in scaled standard deviation for the dense layers.
fn he_std(fan_in: usize) -> f64 {
    (2.0 / fan_in as f64).sqrt()
}

fn check_binary(blink: &[f64]) -> Result<()> {
    if blink.len() != WINDOW_LEN {
        return Err(Error::Contract(format!(
            "blink channel has {} frames, expected {WINDOW_LEN}",
            blink.len()
        )));
    }
    if let Some(v) = blink.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::Contract(format!("blink channel must be binary, found {v}")));
    }
    Ok(())
}

/// `v >= threshold -> 1`, else 0.
pub fn binarize(continuous: &[f64], threshold: f64) -> Vec<f64> {
    continuous.iter().map(|&v| if v >= threshold { 1.0 } else { 0.0 }).collect()
}

/// Fraction of frames where the thresholded reconstruction matches.
pub fn frame_accuracy(codec: &BlinkCodec, blinks: &[Vec<f64>]) -> Result<f64> {
    let mut hits = 0usize;
    for b in blinks {
        let r = binarize(&codec.reconstruct(b)?, 0.5);
        hits += r.iter().zip(b).filter(|(x, y)| x == y).count();
    }
    Ok(hits as f64 / (blinks.len() * WINDOW_LEN) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CodecEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// Minimizes reconstruction BCE with Adam; returns the codec and its
/// per-epoch training curve.
pub fn train_autoencoder(blinks: &[Vec<f64>], cfg: &CodecConfig) -> Result<(BlinkCodec, Vec<CodecEpoch>)> {
    if blinks.is_empty() {
        return Err(Error::Empty("no blink windows to train the codec on".into()));
    }
    for b in blinks {
        check_binary(b)?;
    }
    if cfg.batch_size == 0 || cfg.latent_dim == 0 || cfg.hidden == 0 {
        return Err(Error::Config("codec sizes must be positive".into()));
    }
    let mut codec = BlinkCodec::new(cfg.latent_dim, cfg.hidden, cfg.seed);
    let mut states = codec.params.new_adam_states(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..blinks.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<f64> = chunk.iter().flat_map(|&i| blinks[i].iter().copied()).collect();
            let mut tape = Tape::new();
            let vars = codec.params.bind(&mut tape, true);
            let x = tape.constant(Tensor::new(vec![chunk.len(), WINDOW_LEN], batch.clone())?);
            let z = codec.encode_vars(&mut tape, &vars, x)?;
            let dec = DecoderVars {
                w1: vars[DEC_W1],
                b1: vars[DEC_B1],
                w2: vars[DEC_W2],
                b2: vars[DEC_B2],
            };
            let p = codec.decode_on_tape(&mut tape, &dec, z)?;
            hits += tape
                .value(p)
                .data()
                .iter()
                .zip(&batch)
                .filter(|(&q, &t)| (q >= 0.5) == (t == 1.0))
                .count();
            let loss = tape.bce_loss(p, &batch)?;
            let l = tape.value(loss).item();
            if !l.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    step: 0,
                    checkpoint: None,
                });
            }
            loss_sum += l * chunk.len() as f64;
            tape.backward(loss)?;
            codec.params.collect_grads(&tape, &vars);
            codec.params.adam_step(&mut states)?;
        }
        let rec = CodecEpoch {
            epoch,
            loss: loss_sum / blinks.len() as f64,
            accuracy: hits as f64 / (blinks.len() * WINDOW_LEN) as f64,
        };
        debug!("codec epoch {epoch}: loss {:.6} acc {:.5}", rec.loss, rec.accuracy);
        curve.push(rec);
    }
    codec.params.zero_grads();
    Ok((codec, curve))
}

/// Mean reconstruction BCE over a set of blink windows.
pub fn reconstruction_loss(codec: &BlinkCodec, blinks: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for b in blinks {
        total += crate::numerics::bce_value(&codec.reconstruct(b)?, b);
    }
    Ok(total / blinks.len() as f64)
}
