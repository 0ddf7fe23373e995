//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use gazegan::anim::{EyeRig, EyelidMap};
use gazegan::blinkcodec::CodecConfig;
use gazegan::cgan::{GanArch, GenLoss, LabelSampling, LrSchedule, TrainConfig, WeightInit};
use gazegan::checkpoint::sha256_hex;
use gazegan::dataio::LabelMode;
use gazegan::eval::ClassifierConfig;

pub const SEED_ENV: &str = "GAZE_GAN_SEED";

/// Every recognised key with its default; `None` marks the path keys,
/// which have no default.
pub const KEYS: &[(&str, Option<&str>, &str)] = &[
    ("data_dir", None, "directory of per-participant recording CSVs"),
    ("personality_file", None, "participant_id,O,C,E,A,N table"),
    ("output_dir", None, "where every artifact is written"),
    ("mode", Some("all_dims"), "all_dims or single_dim:<O|C|E|A|N>"),
    ("stride", Some("60"), "window stride in frames"),
    ("test_fraction", Some("0.2"), "share of participants held out"),
    ("seed", Some("0"), "seed for every random stream"),
    ("batch_size", Some("64"), "GAN mini-batch size"),
    ("lr_g", Some("0.0001"), "generator learning rate"),
    ("lr_d", Some("0.0001"), "discriminator learning rate"),
    ("beta1", Some("0.9"), "Adam first-moment decay"),
    ("beta2", Some("0.999"), "Adam second-moment decay"),
    ("epochs", Some("50"), "GAN epochs"),
    ("latent_dim", Some("100"), "generator noise size"),
    ("embed_dim", Some("50"), "label embedding size"),
    ("g_channels", Some("128,64"), "generator channels after projection, after first upsample"),
    ("d_channels", Some("64,128"), "discriminator conv channels"),
    ("weight_init", Some("dcgan"), "dcgan or fan_in"),
    ("gen_loss", Some("non_saturating"), "non_saturating or minimax"),
    ("label_sampling", Some("uniform_seen"), "uniform_seen or empirical"),
    ("lr_schedule", Some("constant"), "constant or linear"),
    ("checkpoint_every", Some("0"), "GAN checkpoint interval in epochs, 0 disables"),
    ("codec_latent_dim", Some("30"), "blink codec code size"),
    ("codec_hidden", Some("128"), "blink codec hidden width"),
    ("codec_epochs", Some("60"), "blink codec epochs"),
    ("codec_batch_size", Some("64"), "blink codec mini-batch size"),
    ("codec_lr", Some("0.001"), "blink codec learning rate"),
    ("classifier_channels", Some("32,64"), "classifier conv channels"),
    ("classifier_epochs", Some("20"), "classifier epochs"),
    ("classifier_batch_size", Some("32"), "classifier mini-batch size"),
    ("classifier_lr", Some("0.001"), "classifier learning rate"),
    ("classifier_holdout", Some("0.2"), "per-class held-out share for classifier accuracy"),
    ("eval_samples", Some("1000"), "synthesized windows per class in eval"),
    ("eye_position", Some("0,0,0"), "world-space eye midpoint"),
    ("viewing_distance", Some("1"), "distance to the gaze plane"),
    ("h_fov", Some("60"), "horizontal field of view, degrees"),
    ("v_fov", Some("46"), "vertical field of view, degrees"),
    ("eyelid_slope", Some("-1"), "eyelid weight per unit of gaze y"),
    ("eyelid_intercept", Some("1"), "eyelid weight at gaze y = 0"),
    ("pupil_baseline", Some("auto"), "baseline pupil in mm, or auto for the training mean"),
];

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    pub personality_file: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub mode: LabelMode,
    pub stride: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub gan: TrainConfig,
    pub codec: CodecConfig,
    pub classifier: ClassifierConfig,
    pub eval_samples: usize,
    pub rig: EyeRig,
    pub eyelid: EyelidMap,
    pub pupil_baseline: Option<f64>,
    /// Resolved `key = value` lines, one per key in [`KEYS`] order.
    pub canonical: String,
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| anyhow!("{key}: cannot parse {v:?}: {e}"))
}

fn list<T: FromStr>(key: &str, v: &str, n: usize) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = v.split(',').map(|p| parse(key, p.trim())).collect::<Result<_>>()?;
    if items.len() != n {
        bail!("{key}: expected {n} comma-separated values, got {v:?}");
    }
    Ok(items)
}

fn pair(key: &str, v: &str) -> Result<(usize, usize)> {
    let l = list(key, v, 2)?;
    Ok((l[0], l[1]))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let seed_env = std::env::var(SEED_ENV).ok();
        Self::parse(&text, seed_env.as_deref()).with_context(|| format!("config {}", path.display()))
    }

    /// Parses config text; `seed_override` replaces the `seed` key.
    pub fn parse(text: &str, seed_override: Option<&str>) -> Result<Self> {
        let mut values: Vec<Option<String>> = KEYS.iter().map(|(_, d, _)| d.map(str::to_string)).collect();
        let mut given = vec![false; KEYS.len()];
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`, got {raw:?}", n + 1))?;
            let (k, v) = (k.trim(), v.trim());
            let slot = KEYS
                .iter()
                .position(|(name, _, _)| *name == k)
                .ok_or_else(|| anyhow!("line {}: unknown key {k:?}", n + 1))?;
            if given[slot] {
                bail!("line {}: key {k:?} given twice", n + 1);
            }
            given[slot] = true;
            values[slot] = Some(v.to_string());
        }
        if let Some(s) = seed_override {
            let slot = KEYS.iter().position(|(k, _, _)| *k == "seed").unwrap();
            values[slot] = Some(s.trim().to_string());
        }

        let mut canonical = String::new();
        for ((k, _, _), v) in KEYS.iter().zip(&values) {
            if let Some(v) = v {
                writeln!(canonical, "{k} = {v}").unwrap();
            }
        }
        let get = |k: &str| -> Option<&str> {
            let i = KEYS.iter().position(|(name, _, _)| *name == k).unwrap();
            values[i].as_deref()
        };
        let req = |k: &str| get(k).unwrap();

        let output_dir = PathBuf::from(get("output_dir").ok_or_else(|| anyhow!("output_dir is required"))?);
        let mode: LabelMode = req("mode").parse().map_err(|e| anyhow!("mode: {e}"))?;
        let seed: u64 = parse("seed", req("seed"))?;
        let stride: usize = parse("stride", req("stride"))?;
        if stride == 0 {
            bail!("stride must be positive");
        }
        let test_fraction: f64 = parse("test_fraction", req("test_fraction"))?;
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            bail!("test_fraction must lie in (0, 1)");
        }

        let gan = TrainConfig {
            batch_size: parse("batch_size", req("batch_size"))?,
            lr_g: parse("lr_g", req("lr_g"))?,
            lr_d: parse("lr_d", req("lr_d"))?,
            beta1: parse("beta1", req("beta1"))?,
            beta2: parse("beta2", req("beta2"))?,
            epochs: parse("epochs", req("epochs"))?,
            seed,
            mode,
            arch: GanArch {
                latent_dim: parse("latent_dim", req("latent_dim"))?,
                embed_dim: parse("embed_dim", req("embed_dim"))?,
                g_channels: pair("g_channels", req("g_channels"))?,
                d_channels: pair("d_channels", req("d_channels"))?,
                init: match req("weight_init") {
                    "dcgan" => WeightInit::Dcgan,
                    "fan_in" => WeightInit::FanIn,
                    v => bail!("weight_init: expected dcgan or fan_in, got {v:?}"),
                },
            },
            gen_loss: match req("gen_loss") {
                "non_saturating" => GenLoss::NonSaturating,
                "minimax" => GenLoss::Minimax,
                v => bail!("gen_loss: expected non_saturating or minimax, got {v:?}"),
            },
            label_sampling: match req("label_sampling") {
                "uniform_seen" => LabelSampling::UniformSeen,
                "empirical" => LabelSampling::Empirical,
                v => bail!("label_sampling: expected uniform_seen or empirical, got {v:?}"),
            },
            lr_schedule: match req("lr_schedule") {
                "constant" => LrSchedule::Constant,
                "linear" => LrSchedule::Linear,
                v => bail!("lr_schedule: expected constant or linear, got {v:?}"),
            },
            checkpoint_every: parse("checkpoint_every", req("checkpoint_every"))?,
            checkpoint_dir: Some(output_dir.join("checkpoints")),
        };
        let codec = CodecConfig {
            latent_dim: parse("codec_latent_dim", req("codec_latent_dim"))?,
            hidden: parse("codec_hidden", req("codec_hidden"))?,
            epochs: parse("codec_epochs", req("codec_epochs"))?,
            batch_size: parse("codec_batch_size", req("codec_batch_size"))?,
            lr: parse("codec_lr", req("codec_lr"))?,
            seed,
        };
        let classifier = ClassifierConfig {
            channels: pair("classifier_channels", req("classifier_channels"))?,
            epochs: parse("classifier_epochs", req("classifier_epochs"))?,
            batch_size: parse("classifier_batch_size", req("classifier_batch_size"))?,
            lr: parse("classifier_lr", req("classifier_lr"))?,
            seed,
            holdout_fraction: parse("classifier_holdout", req("classifier_holdout"))?,
        };
        let eye: Vec<f64> = list("eye_position", req("eye_position"), 3)?;
        let rig = EyeRig {
            eye_position: [eye[0], eye[1], eye[2]],
            viewing_distance: parse("viewing_distance", req("viewing_distance"))?,
            h_fov: parse("h_fov", req("h_fov"))?,
            v_fov: parse("v_fov", req("v_fov"))?,
        };
        rig.validate().map_err(|e| anyhow!("{e}"))?;
        let eyelid = EyelidMap {
            slope: parse("eyelid_slope", req("eyelid_slope"))?,
            intercept: parse("eyelid_intercept", req("eyelid_intercept"))?,
        };
        let pupil_baseline = match req("pupil_baseline") {
            "auto" => None,
            v => {
                let b: f64 = parse("pupil_baseline", v)?;
                if !(b > 0.0) {
                    bail!("pupil_baseline must be positive");
                }
                Some(b)
            }
        };

        Ok(Self {
            data_dir: get("data_dir").map(PathBuf::from),
            personality_file: get("personality_file").map(PathBuf::from),
            output_dir,
            mode,
            stride,
            test_fraction,
            seed,
            gan,
            codec,
            classifier,
            eval_samples: parse("eval_samples", req("eval_samples"))?,
            rig,
            eyelid,
            pupil_baseline,
            canonical,
        })
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical.as_bytes())
    }
}

/// Config key reference for `--help`.
pub fn key_reference() -> String {
    let mut s = String::from("Config keys (flat `key = value`, `#` starts a comment):\n");
    for (k, d, doc) in KEYS {
        writeln!(s, "  {k:<22} {doc} [default: {}]", d.unwrap_or("none, path")).unwrap();
    }
    write!(s, "The {SEED_ENV} environment variable overrides `seed`.").unwrap();
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_every_key() {
        let c = RunConfig::parse("output_dir = out\n", None).unwrap();
        assert_eq!(c.mode, LabelMode::AllDims);
        assert_eq!(c.gan.batch_size, 64);
        assert_eq!(c.gan.lr_g, 1e-4);
        assert_eq!(c.rig, EyeRig::default());
        assert_eq!(c.canonical.lines().count(), KEYS.len() - 2);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        assert!(RunConfig::parse("output_dir = o\nlearning_rate = 1\n", None).is_err());
        assert!(RunConfig::parse("output_dir = o\nseed = 1\nseed = 2\n", None).is_err());
        assert!(RunConfig::parse("output_dir = o\nnot a pair\n", None).is_err());
        assert!(RunConfig::parse("seed = 1\n", None).is_err());
    }

    #[test]
    fn seed_override_changes_hash() {
        let a = RunConfig::parse("output_dir = o\nseed = 3\n", None).unwrap();
        let b = RunConfig::parse("output_dir = o\nseed = 3\n", Some("4")).unwrap();
        assert_eq!(b.seed, 4);
        assert_eq!(b.gan.seed, 4);
        assert_ne!(a.hash(), b.hash());
        assert!(RunConfig::parse("output_dir = o\n", Some("x")).is_err());
    }

    #[test]
    fn comments_and_whitespace() {
        let c = RunConfig::parse("# run\n\n  output_dir=o  # here\nmode = single_dim:E\n", None).unwrap();
        assert_eq!(c.mode, LabelMode::SingleDim(gazegan::dataio::Dimension::E));
    }
}
