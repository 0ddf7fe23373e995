use rand::Rng;

use crate::blinkcodec::{BlinkCodec, DecoderVars};
use crate::dataio::{LabelMode, CHANNELS, CH_BLINK, WINDOW_LEN};
use crate::error::{Error, Result};
use crate::numerics::{normal_init, ParamStore, Tape, Tensor, Var, LEAKY_SLOPE};

/// Time steps after the dense projection; two stride-2 stages reach 300.
pub const BASE_STEPS: usize = WINDOW_LEN / 4;
const KERNEL: usize = 4;
const STRIDE: usize = 2;
const PAD: usize = 1;
const INIT_STD: f64 = 0.02;

/// Weight initialization for dense and convolution kernels; biases start
/// at zero and label embeddings at `N(0, 1)` under either scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WeightInit {
    /// `N(0, 0.02)` everywhere.
    #[default]
    Dcgan,
    /// `N(0, gain / fan_in)`, gain 2 ahead of leaky ReLU and 1 ahead of
    /// tanh or sigmoid.
    FanIn,
}

impl WeightInit {
    fn std(self, fan_in: usize, rectified: bool) -> f64 {
        match self {
            Self::Dcgan => INIT_STD,
            Self::FanIn => {
                let gain = if rectified { 2.0 } else { 1.0 };
                (gain / fan_in as f64).sqrt()
            }
        }
    }
}

/// Layer widths. The defaults follow a DCGAN-style 128/64 generator and
/// 64/128 discriminator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GanArch {
    pub latent_dim: usize,
    pub embed_dim: usize,
    pub g_channels: (usize, usize),
    pub d_channels: (usize, usize),
    pub init: WeightInit,
}

impl Default for GanArch {
    fn default() -> Self {
        Self {
            latent_dim: 100,
            embed_dim: 50,
            g_channels: (128, 64),
            d_channels: (64, 128),
            init: WeightInit::Dcgan,
        }
    }
}

fn check_labels(mode: LabelMode, labels: &[usize]) -> Result<()> {
    let len = mode.num_classes();
    match labels.iter().find(|&&l| l >= len) {
        Some(&index) => Err(Error::InvalidIndex { index, len }),
        None => Ok(()),
    }
}

/// `G(z, y)`: label embedding concatenated with `z`, dense projection to
/// `c1 x 75`, two stride-2 transposed convolutions to `3 x 300` (tanh), and
/// a linear head emitting the blink latent for the codec decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub params: ParamStore,
    pub mode: LabelMode,
}

const G_EMBED: usize = 0;
const G_PROJ_W: usize = 1;
const G_PROJ_B: usize = 2;
const G_T1_W: usize = 3;
const G_T1_B: usize = 4;
const G_T2_W: usize = 5;
const G_T2_B: usize = 6;
const G_BLINK_W: usize = 7;
const G_BLINK_B: usize = 8;
const G_NAMES: [&str; 9] = [
    "embed", "proj.w", "proj.b", "tconv1.w", "tconv1.b", "tconv2.w", "tconv2.b", "blink.w", "blink.b",
];

impl Generator {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, mode: LabelMode, arch: &GanArch, blink_latent: usize) -> Self {
        let (c1, c2) = arch.g_channels;
        let input = arch.latent_dim + arch.embed_dim;
        let hidden = c1 * BASE_STEPS;
        let mut p = ParamStore::new();
        p.insert(G_NAMES[G_EMBED], normal_init(rng, vec![mode.num_classes(), arch.embed_dim], 1.0));
        let init = arch.init;
        // a stride-2 transposed tap pattern feeds each output from K/2 taps
        let t_fan = |c: usize| c * KERNEL / STRIDE;
        p.insert(G_NAMES[G_PROJ_W], normal_init(rng, vec![hidden, input], init.std(input, true)));
        p.insert(G_NAMES[G_PROJ_B], Tensor::zeros(vec![hidden]));
        p.insert(G_NAMES[G_T1_W], normal_init(rng, vec![c1, c2, KERNEL], init.std(t_fan(c1), true)));
        p.insert(G_NAMES[G_T1_B], Tensor::zeros(vec![c2]));
        p.insert(G_NAMES[G_T2_W], normal_init(rng, vec![c2, CHANNELS - 1, KERNEL], init.std(t_fan(c2), false)));
        p.insert(G_NAMES[G_T2_B], Tensor::zeros(vec![CHANNELS - 1]));
        p.insert(G_NAMES[G_BLINK_W], normal_init(rng, vec![blink_latent, hidden], init.std(hidden, false)));
        p.insert(G_NAMES[G_BLINK_B], Tensor::zeros(vec![blink_latent]));
        Self { params: p, mode }
    }

    pub fn from_params(params: ParamStore, mode: LabelMode) -> Result<Self> {
        let names: Vec<&str> = params.iter().map(|(n, _)| n).collect();
        if names != G_NAMES {
            return Err(Error::Checkpoint(format!("generator parameters {names:?} do not match {G_NAMES:?}")));
        }
        let g = Self { params, mode };
        let emb = g.params.tensor(G_EMBED).shape();
        if emb[0] != mode.num_classes() {
            return Err(Error::Checkpoint(format!(
                "generator embedding has {} rows, mode {mode} needs {}",
                emb[0],
                mode.num_classes()
            )));
        }
        let (c1, c2) = (g.params.tensor(G_T1_W).shape()[0], g.params.tensor(G_T1_W).shape()[1]);
        let ok = g.params.tensor(G_PROJ_W).shape() == [c1 * BASE_STEPS, g.latent_dim() + emb[1]]
            && g.params.tensor(G_T2_W).shape() == [c2, CHANNELS - 1, KERNEL]
            && g.params.tensor(G_BLINK_W).shape()[1] == c1 * BASE_STEPS;
        if !ok {
            return Err(Error::Checkpoint("generator parameter shapes are inconsistent".into()));
        }
        Ok(g)
    }

    pub fn latent_dim(&self) -> usize {
        self.params.tensor(G_PROJ_W).shape()[1] - self.params.tensor(G_EMBED).shape()[1]
    }

    pub fn blink_latent_dim(&self) -> usize {
        self.params.tensor(G_BLINK_B).len()
    }

    fn channels(&self) -> usize {
        self.params.tensor(G_T1_W).shape()[0]
    }

    /// Records `G(z, y)` for a batch; returns `[B, 4, 300]` in model space
    /// (every channel inside `(-1, 1)`).
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        codec: &BlinkCodec,
        dec: &DecoderVars,
        z: Var,
        labels: &[usize],
    ) -> Result<Var> {
        check_labels(self.mode, labels)?;
        if codec.latent_dim() != self.blink_latent_dim() {
            return Err(Error::InvalidShape(format!(
                "generator emits {}-dim blink codes, codec expects {}",
                self.blink_latent_dim(),
                codec.latent_dim()
            )));
        }
        let batch = labels.len();
        let emb = tape.embedding_batch(vars[G_EMBED], labels)?;
        let input = tape.concat(&[z, emb], 1)?;
        let h0 = tape.dense(input, vars[G_PROJ_W], vars[G_PROJ_B])?;
        let h0 = tape.leaky_relu(h0, LEAKY_SLOPE);
        let x = tape.reshape(h0, vec![batch, self.channels(), BASE_STEPS])?;
        let x = tape.conv1d_transpose(x, vars[G_T1_W], vars[G_T1_B], STRIDE, PAD)?;
        let x = tape.leaky_relu(x, LEAKY_SLOPE);
        let x = tape.conv1d_transpose(x, vars[G_T2_W], vars[G_T2_B], STRIDE, PAD)?;
        let continuous = tape.tanh(x);

        let code = tape.dense(h0, vars[G_BLINK_W], vars[G_BLINK_B])?;
        let blink = codec.decode_on_tape(tape, dec, code)?;
        let blink = tape.affine(blink, 2.0, -1.0);
        let blink = tape.reshape(blink, vec![batch, 1, WINDOW_LEN])?;
        tape.concat(&[continuous, blink], 1)
    }
}

/// `D(x, y)`: label embedding projected to a 300-step channel and stacked
/// onto the window, two stride-2 convolutions, dense head with sigmoid.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    pub params: ParamStore,
    pub mode: LabelMode,
}

const D_EMBED: usize = 0;
const D_LABEL_W: usize = 1;
const D_LABEL_B: usize = 2;
const D_C1_W: usize = 3;
const D_C1_B: usize = 4;
const D_C2_W: usize = 5;
const D_C2_B: usize = 6;
const D_OUT_W: usize = 7;
const D_OUT_B: usize = 8;
const D_NAMES: [&str; 9] = [
    "embed", "label.w", "label.b", "conv1.w", "conv1.b", "conv2.w", "conv2.b", "out.w", "out.b",
];

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, mode: LabelMode, arch: &GanArch) -> Self {
        let (c1, c2) = arch.d_channels;
        let mut p = ParamStore::new();
        p.insert(D_NAMES[D_EMBED], normal_init(rng, vec![mode.num_classes(), arch.embed_dim], 1.0));
        let init = arch.init;
        p.insert(D_NAMES[D_LABEL_W], normal_init(rng, vec![WINDOW_LEN, arch.embed_dim], init.std(arch.embed_dim, false)));
        p.insert(D_NAMES[D_LABEL_B], Tensor::zeros(vec![WINDOW_LEN]));
        p.insert(D_NAMES[D_C1_W], normal_init(rng, vec![c1, CHANNELS + 1, KERNEL], init.std((CHANNELS + 1) * KERNEL, true)));
        p.insert(D_NAMES[D_C1_B], Tensor::zeros(vec![c1]));
        p.insert(D_NAMES[D_C2_W], normal_init(rng, vec![c2, c1, KERNEL], init.std(c1 * KERNEL, true)));
        p.insert(D_NAMES[D_C2_B], Tensor::zeros(vec![c2]));
        p.insert(D_NAMES[D_OUT_W], normal_init(rng, vec![1, c2 * BASE_STEPS], init.std(c2 * BASE_STEPS, false)));
        p.insert(D_NAMES[D_OUT_B], Tensor::zeros(vec![1]));
        Self { params: p, mode }
    }

    pub fn from_params(params: ParamStore, mode: LabelMode) -> Result<Self> {
        let names: Vec<&str> = params.iter().map(|(n, _)| n).collect();
        if names != D_NAMES {
            return Err(Error::Checkpoint(format!(
                "discriminator parameters {names:?} do not match {D_NAMES:?}"
            )));
        }
        let d = Self { params, mode };
        if d.params.tensor(D_EMBED).shape()[0] != mode.num_classes() {
            return Err(Error::Checkpoint(format!("discriminator embedding does not match mode {mode}")));
        }
        let c2 = d.params.tensor(D_C2_W).shape()[0];
        if d.params.tensor(D_OUT_W).shape() != [1, c2 * BASE_STEPS]
            || d.params.tensor(D_C1_W).shape()[1] != CHANNELS + 1
        {
            return Err(Error::Checkpoint("discriminator parameter shapes are inconsistent".into()));
        }
        Ok(d)
    }

    /// Records `D(x, y)` for `[B, 4, 300]` model-space windows; returns
    /// `[B, 1]` probabilities.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var, labels: &[usize]) -> Result<Var> {
        check_labels(self.mode, labels)?;
        let batch = labels.len();
        if tape.shape(x) != [batch, CHANNELS, WINDOW_LEN] {
            return Err(Error::InvalidShape(format!(
                "discriminator input {:?}, expected [{batch}, {CHANNELS}, {WINDOW_LEN}]",
                tape.shape(x)
            )));
        }
        let emb = tape.embedding_batch(vars[D_EMBED], labels)?;
        let lab = tape.dense(emb, vars[D_LABEL_W], vars[D_LABEL_B])?;
        let lab = tape.reshape(lab, vec![batch, 1, WINDOW_LEN])?;
        let h = tape.concat(&[x, lab], 1)?;
        let h = tape.conv1d(h, vars[D_C1_W], vars[D_C1_B], STRIDE, PAD)?;
        let h = tape.leaky_relu(h, LEAKY_SLOPE);
        let h = tape.conv1d(h, vars[D_C2_W], vars[D_C2_B], STRIDE, PAD)?;
        let h = tape.leaky_relu(h, LEAKY_SLOPE);
        let flat = tape.shape(h)[1] * tape.shape(h)[2];
        let h = tape.reshape(h, vec![batch, flat])?;
        let logit = tape.dense(h, vars[D_OUT_W], vars[D_OUT_B])?;
        Ok(tape.sigmoid(logit))
    }
}

/// Channels-first model input for normalized frames; the `{0, 1}` blink
/// channel is mapped onto `{-1, 1}` to share the generator's range.
pub fn frames_to_input(frames: &[[f64; CHANNELS]], out: &mut Vec<f64>) {
    for ch in 0..CHANNELS {
        out.extend(frames.iter().map(|r| if ch == CH_BLINK { 2.0 * r[ch] - 1.0 } else { r[ch] }));
    }
}

/// Stacks normalized windows into a `[B, 4, 300]` tensor.
pub fn batch_tensor<'a, I: IntoIterator<Item = &'a [[f64; CHANNELS]]>>(windows: I) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut n = 0;
    for w in windows {
        if w.len() != WINDOW_LEN {
            return Err(Error::InvalidShape(format!("window of {} frames", w.len())));
        }
        frames_to_input(w, &mut data);
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("no windows to batch".into()));
    }
    Tensor::new(vec![n, CHANNELS, WINDOW_LEN], data)
}

/// Splits a `[B, 4, 300]` model-space tensor into per-window frames,
/// keeping every channel in model space.
pub fn tensor_to_frames(t: &Tensor) -> Vec<Vec<[f64; CHANNELS]>> {
    let per = CHANNELS * WINDOW_LEN;
    t.data()
        .chunks(per)
        .map(|w| {
            (0..WINDOW_LEN)
                .map(|k| {
                    let mut r = [0.0; CHANNELS];
                    for (ch, v) in r.iter_mut().enumerate() {
                        *v = w[ch * WINDOW_LEN + k];
                    }
                    r
                })
                .collect()
        })
        .collect()
}
