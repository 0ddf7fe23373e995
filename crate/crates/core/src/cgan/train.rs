use std::fmt;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::loss::{d_loss, g_loss, GenLoss};
use super::model::{batch_tensor, Discriminator, GanArch, Generator};
use crate::blinkcodec::BlinkCodec;
use crate::checkpoint::{rng_from_bytes, rng_to_bytes, Component, ModelCheckpoint};
use crate::dataio::{normalize, Frames, GazeWindow, LabelMode, NormStats};
use crate::error::{Error, Result};
use crate::numerics::{AdamConfig, AdamState, Tape, Tensor};

/// How class labels for generated samples are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LabelSampling {
    /// Uniform over the classes present in the training set.
    #[default]
    UniformSeen,
    /// Proportional to class frequency in the training set.
    Empirical,
}

/// Learning-rate schedule across epochs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LrSchedule {
    #[default]
    Constant,
    /// `lr * (1 - epoch / epochs)`, reaching zero after the last epoch.
    Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epochs: usize,
    pub seed: u64,
    pub mode: LabelMode,
    pub arch: GanArch,
    pub gen_loss: GenLoss,
    pub label_sampling: LabelSampling,
    pub lr_schedule: LrSchedule,
    /// Write a checkpoint every this many epochs (0 disables).
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            lr_g: 1e-4,
            lr_d: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epochs: 50,
            seed: 0,
            mode: LabelMode::AllDims,
            arch: GanArch::default(),
            gen_loss: GenLoss::NonSaturating,
            label_sampling: LabelSampling::UniformSeen,
            lr_schedule: LrSchedule::Constant,
            checkpoint_every: 0,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: 1e-8,
        }
    }

    fn validate(&self) -> Result<()> {
        let a = &self.arch;
        if self.batch_size == 0
            || a.latent_dim == 0
            || a.embed_dim == 0
            || a.g_channels.0 == 0
            || a.g_channels.1 == 0
            || a.d_channels.0 == 0
            || a.d_channels.1 == 0
        {
            return Err(Error::Config("batch size and layer sizes must be positive".into()));
        }
        if !(self.lr_g > 0.0 && self.lr_d > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Normalized windows and their class indices.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    pub frames: Vec<Frames>,
    pub labels: Vec<usize>,
    pub mode: LabelMode,
}

impl TrainingSet {
    pub fn from_windows(windows: &[GazeWindow], stats: &NormStats, mode: LabelMode) -> Result<Self> {
        let mut frames = Vec::with_capacity(windows.len());
        let mut labels = Vec::with_capacity(windows.len());
        for w in windows {
            frames.push(normalize(&w.frames, stats)?);
            let mut w = w.clone();
            w.relabel(mode);
            labels.push(w.label.index);
        }
        Ok(Self { frames, labels, mode })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Sorted distinct class indices.
    pub fn seen_classes(&self) -> Vec<usize> {
        let mut s = self.labels.clone();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Per-epoch means over the optimizer steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub steps: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub d_real: f64,
    pub d_fake: f64,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {:.16e} {:.16e} {:.16e} {:.16e}",
            self.epoch, self.steps, self.d_loss, self.g_loss, self.d_real, self.d_fake
        )
    }
}

pub const LOG_HEADER: &str = "epoch steps d_loss g_loss d_real d_fake";

/// Stateful adversarial training loop; owns both networks and their
/// optimizer states.
pub struct GanTrainer<'a> {
    pub g: Generator,
    pub d: Discriminator,
    g_opt: Vec<AdamState>,
    d_opt: Vec<AdamState>,
    rng: ChaCha8Rng,
    epoch: usize,
    set: &'a TrainingSet,
    codec: &'a BlinkCodec,
    cfg: TrainConfig,
    seen: Vec<usize>,
    pub log: Vec<EpochLog>,
}

impl<'a> GanTrainer<'a> {
    pub fn new(set: &'a TrainingSet, codec: &'a BlinkCodec, cfg: TrainConfig) -> Result<Self> {
        Self::check_inputs(set, &cfg)?;
        let mut init = ChaCha8Rng::seed_from_u64(cfg.seed);
        let g = Generator::new(&mut init, cfg.mode, &cfg.arch, codec.latent_dim());
        let d = Discriminator::new(&mut init, cfg.mode, &cfg.arch);
        let g_opt = g.params.new_adam_states(cfg.adam(cfg.lr_g));
        let d_opt = d.params.new_adam_states(cfg.adam(cfg.lr_d));
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        Ok(Self {
            g,
            d,
            g_opt,
            d_opt,
            rng,
            epoch: 0,
            seen: set.seen_classes(),
            set,
            codec,
            cfg,
            log: Vec::new(),
        })
    }

    /// Continues from checkpoints written by [`GanTrainer::checkpoints`].
    pub fn resume(
        set: &'a TrainingSet,
        codec: &'a BlinkCodec,
        cfg: TrainConfig,
        g_ck: &ModelCheckpoint,
        d_ck: &ModelCheckpoint,
    ) -> Result<Self> {
        Self::check_inputs(set, &cfg)?;
        if g_ck.component != Component::Generator || d_ck.component != Component::Discriminator {
            return Err(Error::Checkpoint("expected a generator and a discriminator checkpoint".into()));
        }
        if g_ck.mode != Some(cfg.mode) || d_ck.mode != Some(cfg.mode) {
            return Err(Error::Checkpoint(format!("checkpoint mode does not match {}", cfg.mode)));
        }
        if g_ck.epoch != d_ck.epoch {
            return Err(Error::Checkpoint("generator and discriminator epochs differ".into()));
        }
        let g = Generator::from_params(g_ck.params.clone(), cfg.mode)?;
        let d = Discriminator::from_params(d_ck.params.clone(), cfg.mode)?;
        let g_opt = g_ck.optimizer_states();
        let d_opt = d_ck.optimizer_states();
        if g_opt.len() != g.params.len() || d_opt.len() != d.params.len() {
            return Err(Error::Checkpoint("optimizer state count does not match parameters".into()));
        }
        Ok(Self {
            g,
            d,
            g_opt,
            d_opt,
            rng: rng_from_bytes(&g_ck.rng_state)?,
            epoch: g_ck.epoch as usize,
            seen: set.seen_classes(),
            set,
            codec,
            cfg,
            log: Vec::new(),
        })
    }

    fn check_inputs(set: &TrainingSet, cfg: &TrainConfig) -> Result<()> {
        cfg.validate()?;
        if set.is_empty() {
            return Err(Error::Empty("training set has no windows".into()));
        }
        if set.mode != cfg.mode {
            return Err(Error::Config(format!(
                "training set labelled in {} mode, config says {}",
                set.mode, cfg.mode
            )));
        }
        if cfg.batch_size > set.len() {
            return Err(Error::Config(format!(
                "batch size {} exceeds dataset size {}",
                cfg.batch_size,
                set.len()
            )));
        }
        Ok(())
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// Snapshot of the generator and discriminator with optimizer and RNG
    /// state.
    pub fn checkpoints(&self) -> (ModelCheckpoint, ModelCheckpoint) {
        let rng = rng_to_bytes(&self.rng);
        let mut g = ModelCheckpoint::new(Component::Generator, Some(self.cfg.mode), self.g.params.clone())
            .with_optimizer(&self.g_opt);
        let mut d = ModelCheckpoint::new(Component::Discriminator, Some(self.cfg.mode), self.d.params.clone())
            .with_optimizer(&self.d_opt);
        for ck in [&mut g, &mut d] {
            ck.rng_state = rng.clone();
            ck.epoch = self.epoch as u64;
            ck.params.zero_grads();
        }
        (g, d)
    }

    pub fn save_checkpoints(&self, dir: &Path, prefix: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let (g, d) = self.checkpoints();
        let gp = dir.join(format!("{prefix}generator.ggan"));
        let dp = dir.join(format!("{prefix}discriminator.ggan"));
        g.save(&gp)?;
        d.save(&dp)?;
        Ok((gp, dp))
    }

    fn latent_batch(&mut self, n: usize) -> Result<Tensor> {
        let dim = self.g.latent_dim();
        let data: Vec<f64> = (0..n * dim).map(|_| self.rng.sample(StandardNormal)).collect();
        Tensor::new(vec![n, dim], data)
    }

    fn fake_labels(&mut self, n: usize) -> Vec<usize> {
        match self.cfg.label_sampling {
            LabelSampling::UniformSeen => (0..n).map(|_| self.seen[self.rng.gen_range(0..self.seen.len())]).collect(),
            LabelSampling::Empirical => (0..n)
                .map(|_| self.set.labels[self.rng.gen_range(0..self.set.len())])
                .collect(),
        }
    }

    /// One discriminator update followed by one generator update.
    fn step(&mut self, batch: &[usize]) -> Result<(f64, f64, f64, f64)> {
        let n = batch.len();
        let real = batch_tensor(batch.iter().map(|&i| self.set.frames[i].as_slice()))?;
        let real_labels: Vec<usize> = batch.iter().map(|&i| self.set.labels[i]).collect();

        // discriminator
        let z = self.latent_batch(n)?;
        let fake_labels = self.fake_labels(n);
        let fake = {
            let mut tape = Tape::new();
            let gv = self.g.params.bind(&mut tape, false);
            let dec = self.codec.bind_frozen_decoder(&mut tape);
            let z = tape.constant(z);
            let out = self.g.forward(&mut tape, &gv, self.codec, &dec, z, &fake_labels)?;
            tape.value(out).clone()
        };
        let mut tape = Tape::new();
        let dv = self.d.params.bind(&mut tape, true);
        let real_v = tape.constant(real);
        let fake_v = tape.constant(fake);
        let parts = d_loss(&mut tape, &self.d, &dv, real_v, &real_labels, fake_v, &fake_labels)?;
        let dl = parts.total;
        let dl_value = tape.value(dl).item();
        let mean = |v| tape.value(v).data().iter().sum::<f64>() / n as f64;
        let (d_real, d_fake) = (mean(parts.p_real), mean(parts.p_fake));
        if !dl_value.is_finite() {
            return Ok((dl_value, f64::NAN, d_real, d_fake));
        }
        tape.backward(dl)?;
        self.d.params.collect_grads(&tape, &dv);
        self.d.params.adam_step(&mut self.d_opt)?;

        // generator
        let z = self.latent_batch(n)?;
        let labels = self.fake_labels(n);
        let mut tape = Tape::new();
        let gv = self.g.params.bind(&mut tape, true);
        let dv = self.d.params.bind(&mut tape, false);
        let dec = self.codec.bind_frozen_decoder(&mut tape);
        let z = tape.constant(z);
        let gl = g_loss(
            &mut tape,
            &self.g,
            &gv,
            self.codec,
            &dec,
            &self.d,
            &dv,
            z,
            &labels,
            self.cfg.gen_loss,
        )?;
        let gl_value = tape.value(gl).item();
        if !gl_value.is_finite() {
            return Ok((dl_value, gl_value, d_real, d_fake));
        }
        tape.backward(gl)?;
        self.g.params.collect_grads(&tape, &gv);
        self.g.params.adam_step(&mut self.g_opt)?;
        Ok((dl_value, gl_value, d_real, d_fake))
    }

    /// Runs one pass over the shuffled training set (partial final batch
    /// dropped) and writes a periodic checkpoint when configured.
    pub fn run_epoch(&mut self) -> Result<EpochLog> {
        if self.cfg.lr_schedule == LrSchedule::Linear {
            let frac = 1.0 - self.epoch as f64 / self.cfg.epochs.max(1) as f64;
            let frac = frac.max(0.0);
            for s in &mut self.g_opt {
                s.lr = self.cfg.lr_g * frac;
            }
            for s in &mut self.d_opt {
                s.lr = self.cfg.lr_d * frac;
            }
        }
        let mut order: Vec<usize> = (0..self.set.len()).collect();
        order.shuffle(&mut self.rng);
        let bs = self.cfg.batch_size;
        let (mut sd, mut sg, mut sr, mut sf, mut steps) = (0.0, 0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks_exact(bs) {
            let (dl, gl, dr, df) = self.step(chunk)?;
            if !dl.is_finite() || !gl.is_finite() {
                let checkpoint = match &self.cfg.checkpoint_dir {
                    Some(dir) => Some(self.save_checkpoints(dir, "diagnostic_")?.0),
                    None => None,
                };
                warn!("non-finite loss at epoch {} step {steps}: d={dl} g={gl}", self.epoch);
                return Err(Error::NonFinite {
                    epoch: self.epoch,
                    step: steps,
                    checkpoint,
                });
            }
            sd += dl;
            sg += gl;
            sr += dr;
            sf += df;
            steps += 1;
        }
        let k = steps as f64;
        let entry = EpochLog {
            epoch: self.epoch,
            steps,
            d_loss: sd / k,
            g_loss: sg / k,
            d_real: sr / k,
            d_fake: sf / k,
        };
        info!(
            "epoch {}: d_loss {:.4} g_loss {:.4} D(real) {:.3} D(fake) {:.3}",
            entry.epoch, entry.d_loss, entry.g_loss, entry.d_real, entry.d_fake
        );
        self.epoch += 1;
        self.log.push(entry);
        if self.cfg.checkpoint_every > 0 && self.epoch % self.cfg.checkpoint_every == 0 {
            if let Some(dir) = self.cfg.checkpoint_dir.clone() {
                self.save_checkpoints(&dir, "")?;
            }
        }
        Ok(entry)
    }

    /// Trains until `cfg.epochs` epochs have completed in total.
    pub fn run(&mut self) -> Result<()> {
        while self.epoch < self.cfg.epochs {
            self.run_epoch()?;
        }
        Ok(())
    }
}

/// Trains a fresh generator/discriminator pair for `cfg.epochs` epochs.
pub fn train_gan(
    set: &TrainingSet,
    codec: &BlinkCodec,
    cfg: &TrainConfig,
) -> Result<(Generator, Discriminator, Vec<EpochLog>)> {
    let mut trainer = GanTrainer::new(set, codec, cfg.clone())?;
    trainer.run()?;
    let mut g = trainer.g;
    let mut d = trainer.d;
    g.params.zero_grads();
    d.params.zero_grads();
    Ok((g, d, trainer.log))
}

/// Training log as text, one [`EpochLog`] per line under [`LOG_HEADER`].
pub fn format_log(log: &[EpochLog]) -> String {
    let mut s = String::from(LOG_HEADER);
    s.push('\n');
    for e in log {
        s.push_str(&e.to_string());
        s.push('\n');
    }
    s
}
