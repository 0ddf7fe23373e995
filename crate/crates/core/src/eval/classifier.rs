use std::collections::BTreeMap;
use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cgan::{batch_tensor, SYNTHETIC_ID};
use crate::checkpoint::{Component, ModelCheckpoint};
use crate::dataio::{normalize, Frames, GazeWindow, LabelMode, NormStats, CHANNELS, WINDOW_LEN};
use crate::error::{Error, Result};
use crate::numerics::{normal_init, softmax_rows, AdamConfig, ParamStore, Tape, Tensor, Var, LEAKY_SLOPE};

const KERNEL: usize = 4;
const STRIDE: usize = 2;
const PAD: usize = 1;
const PREDICT_CHUNK: usize = 64;

const C_C1_W: usize = 0;
const C_C1_B: usize = 1;
const C_C2_W: usize = 2;
const C_C2_B: usize = 3;
const C_OUT_W: usize = 4;
const C_OUT_B: usize = 5;
const C_NAMES: [&str; 6] = ["conv1.w", "conv1.b", "conv2.w", "conv2.b", "out.w", "out.b"];
/// Extra checkpoint entry holding the pupil normalization bounds.
const NORM_NAME: &str = "norm.pupil";

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierConfig {
    pub channels: (usize, usize),
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Fraction of each class held out for the accuracy report.
    pub holdout_fraction: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            channels: (32, 64),
            epochs: 20,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
            holdout_fraction: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierReport {
    /// Mean training cross-entropy per epoch.
    pub epoch_loss: Vec<f64>,
    pub holdout_accuracy: f64,
    pub holdout_size: usize,
}

/// 1D-CNN over device-space windows with a softmax head over the classes
/// seen during training.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    pub params: ParamStore,
    pub mode: LabelMode,
    /// Output slot -> class index.
    pub class_map: Vec<usize>,
    pub stats: NormStats,
}

impl Classifier {
    pub fn new(rng: &mut ChaCha8Rng, mode: LabelMode, class_map: Vec<usize>, stats: NormStats, channels: (usize, usize)) -> Self {
        let (c1, c2) = channels;
        let k = class_map.len();
        let he = |fan_in: usize| (2.0 / fan_in as f64).sqrt();
        let mut p = ParamStore::new();
        p.insert(C_NAMES[C_C1_W], normal_init(rng, vec![c1, CHANNELS, KERNEL], he(CHANNELS * KERNEL)));
        p.insert(C_NAMES[C_C1_B], Tensor::zeros(vec![c1]));
        p.insert(C_NAMES[C_C2_W], normal_init(rng, vec![c2, c1, KERNEL], he(c1 * KERNEL)));
        p.insert(C_NAMES[C_C2_B], Tensor::zeros(vec![c2]));
        let flat = c2 * WINDOW_LEN / 4;
        p.insert(C_NAMES[C_OUT_W], normal_init(rng, vec![k, flat], (1.0 / flat as f64).sqrt()));
        p.insert(C_NAMES[C_OUT_B], Tensor::zeros(vec![k]));
        Self {
            params: p,
            mode,
            class_map,
            stats,
        }
    }

    pub fn num_outputs(&self) -> usize {
        self.class_map.len()
    }

    /// Output slot for a class index, if the class was seen.
    pub fn slot_of(&self, class: usize) -> Option<usize> {
        self.class_map.iter().position(|&c| c == class)
    }

    /// Records the logits for `[B, 4, 300]` normalized model input.
    pub fn logits(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        let batch = tape.shape(x)[0];
        let h = tape.conv1d(x, vars[C_C1_W], vars[C_C1_B], STRIDE, PAD)?;
        let h = tape.leaky_relu(h, LEAKY_SLOPE);
        let h = tape.conv1d(h, vars[C_C2_W], vars[C_C2_B], STRIDE, PAD)?;
        let h = tape.leaky_relu(h, LEAKY_SLOPE);
        let flat = tape.shape(h)[1] * tape.shape(h)[2];
        let h = tape.reshape(h, vec![batch, flat])?;
        tape.dense(h, vars[C_OUT_W], vars[C_OUT_B])
    }

    fn input(&self, windows: &[&Frames]) -> Result<Tensor> {
        let normed = windows
            .iter()
            .map(|f| normalize(f, &self.stats))
            .collect::<Result<Vec<_>>>()?;
        batch_tensor(normed.iter().map(|f| f.as_slice()))
    }

    /// Softmax rows, one per device-space window, over the output slots.
    pub fn predict_frames(&self, windows: &[&Frames]) -> Result<Vec<Vec<f64>>> {
        let k = self.num_outputs();
        let mut out = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(PREDICT_CHUNK) {
            let mut tape = Tape::new();
            let vars = self.params.bind(&mut tape, false);
            let x = tape.constant(self.input(chunk)?);
            let logits = self.logits(&mut tape, &vars, x)?;
            let probs = softmax_rows(tape.value(logits).data(), k);
            out.extend(probs.chunks(k).map(<[f64]>::to_vec));
        }
        Ok(out)
    }

    pub fn predict(&self, windows: &[GazeWindow]) -> Result<Vec<Vec<f64>>> {
        let frames: Vec<&Frames> = windows.iter().map(|w| &w.frames).collect();
        self.predict_frames(&frames)
    }

    /// Fraction of windows whose arg-max slot maps to their own label.
    pub fn accuracy(&self, windows: &[GazeWindow]) -> Result<f64> {
        if windows.is_empty() {
            return Err(Error::Empty("no windows to score".into()));
        }
        let probs = self.predict(windows)?;
        let hits = probs
            .iter()
            .zip(windows)
            .filter(|(p, w)| self.class_map[argmax(p)] == w.label.index)
            .count();
        Ok(hits as f64 / windows.len() as f64)
    }

    pub fn to_checkpoint(&self) -> Result<ModelCheckpoint> {
        let mut params = self.params.clone();
        let norm = Tensor::new(vec![2], vec![self.stats.pupil_min, self.stats.pupil_max])?;
        params.insert(NORM_NAME, norm);
        let mut ck = ModelCheckpoint::new(Component::Classifier, Some(self.mode), params);
        ck.class_map = self.class_map.clone();
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &ModelCheckpoint) -> Result<Self> {
        if ck.component != Component::Classifier {
            return Err(Error::Checkpoint(format!("expected a classifier, found {}", ck.component.tag())));
        }
        let mode = ck
            .mode
            .ok_or_else(|| Error::Checkpoint("classifier checkpoint has no conditioning mode".into()))?;
        let names: Vec<&str> = ck.params.iter().map(|(n, _)| n).collect();
        if names.len() != C_NAMES.len() + 1 || names[..C_NAMES.len()] != C_NAMES || names[C_NAMES.len()] != NORM_NAME {
            return Err(Error::Checkpoint(format!("classifier parameters {names:?} are not recognised")));
        }
        let mut params = ParamStore::new();
        for (name, t) in ck.params.iter().take(C_NAMES.len()) {
            params.insert(name, t.clone());
        }
        let norm = ck.params.tensor(C_NAMES.len()).data();
        if norm.len() != 2 {
            return Err(Error::Checkpoint("classifier normalization entry must hold 2 values".into()));
        }
        let stats = NormStats::new(norm[0], norm[1])?;
        if ck.class_map.is_empty() || params.tensor(C_OUT_W).shape()[0] != ck.class_map.len() {
            return Err(Error::Checkpoint("classifier class map does not match its output layer".into()));
        }
        if let Some(&bad) = ck.class_map.iter().find(|&&c| c >= mode.num_classes()) {
            return Err(Error::InvalidIndex {
                index: bad,
                len: mode.num_classes(),
            });
        }
        Ok(Self {
            params,
            mode,
            class_map: ck.class_map.clone(),
            stats,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&ModelCheckpoint::load_expecting(path, Component::Classifier)?)
    }
}

fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Output classes for a training set: all three bins in single-dimension
/// mode, the seen classes in all-dimension mode.
fn class_map_for(mode: LabelMode, counts: &BTreeMap<usize, usize>) -> Vec<usize> {
    match mode {
        LabelMode::SingleDim(_) => (0..mode.num_classes()).collect(),
        LabelMode::AllDims => counts.keys().copied().collect(),
    }
}

/// Trains the classifier on real windows with softmax cross-entropy and
/// Adam, holding out a per-class fraction for the accuracy report.
pub fn train_classifier(windows: &[GazeWindow], cfg: &ClassifierConfig) -> Result<(Classifier, ClassifierReport)> {
    let first = windows.first().ok_or_else(|| Error::Empty("no training windows".into()))?;
    let mode = first.label.mode;
    if cfg.epochs == 0 || cfg.batch_size == 0 || cfg.channels.0 == 0 || cfg.channels.1 == 0 {
        return Err(Error::Config("classifier epochs, batch_size and channels must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.holdout_fraction) {
        return Err(Error::Config(format!(
            "holdout_fraction {} must lie in [0, 1)",
            cfg.holdout_fraction
        )));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for w in windows {
        if w.label.mode != mode {
            return Err(Error::Config("training windows mix conditioning modes".into()));
        }
        if w.participant_id == SYNTHETIC_ID {
            return Err(Error::Contract("classifier training data contains synthesized windows".into()));
        }
        *counts.entry(w.label.index).or_default() += 1;
    }
    let class_map = class_map_for(mode, &counts);
    for &c in &class_map {
        let n = counts.get(&c).copied().unwrap_or(0);
        if n < 2 {
            return Err(Error::SparseClass { class: c, count: n });
        }
    }
    let stats = NormStats::from_windows(windows)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut train_idx = Vec::new();
    let mut hold_idx = Vec::new();
    for &c in &class_map {
        let mut idx: Vec<usize> = (0..windows.len()).filter(|&i| windows[i].label.index == c).collect();
        idx.shuffle(&mut rng);
        let n_hold = ((idx.len() as f64 * cfg.holdout_fraction).floor() as usize).min(idx.len() - 1);
        hold_idx.extend_from_slice(&idx[..n_hold]);
        train_idx.extend_from_slice(&idx[n_hold..]);
    }
    hold_idx.sort_unstable();
    train_idx.sort_unstable();

    let mut clf = Classifier::new(&mut rng, mode, class_map, stats, cfg.channels);
    let slot: BTreeMap<usize, usize> = clf.class_map.iter().enumerate().map(|(s, &c)| (c, s)).collect();
    let inputs: Vec<Frames> = train_idx
        .iter()
        .map(|&i| normalize(&windows[i].frames, &clf.stats))
        .collect::<Result<_>>()?;
    let targets: Vec<usize> = train_idx.iter().map(|&i| slot[&windows[i].label.index]).collect();
    let mut adam = clf.params.new_adam_states(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });

    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut tape = Tape::new();
            let vars = clf.params.bind(&mut tape, true);
            let x = tape.constant(batch_tensor(batch.iter().map(|&i| inputs[i].as_slice()))?);
            let logits = clf.logits(&mut tape, &vars, x)?;
            let y: Vec<usize> = batch.iter().map(|&i| targets[i]).collect();
            let loss = tape.softmax_cross_entropy(logits, &y)?;
            tape.backward(loss)?;
            clf.params.collect_grads(&tape, &vars);
            clf.params.adam_step(&mut adam)?;
            total += tape.value(loss).item();
            batches += 1;
        }
        let mean = total / batches as f64;
        if !mean.is_finite() || !clf.params.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                step: batches,
                checkpoint: None,
            });
        }
        info!("classifier epoch {epoch}: loss {mean:.6}");
        epoch_loss.push(mean);
    }

    clf.params.zero_grads();
    let held: Vec<GazeWindow> = hold_idx.iter().map(|&i| windows[i].clone()).collect();
    let holdout_accuracy = if held.is_empty() { f64::NAN } else { clf.accuracy(&held)? };
    Ok((
        clf,
        ClassifierReport {
            epoch_loss,
            holdout_accuracy,
            holdout_size: held.len(),
        },
    ))
}
