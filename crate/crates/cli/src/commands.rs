use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use gazegan::anim::{export_animation, mean_pupil};
use gazegan::blinkcodec::{train_autoencoder, BlinkCodec};
use gazegan::cgan::{format_log, label_profile, synthesize_batch, GanTrainer, Generator, TrainingSet};
use gazegan::checkpoint::{sha256_hex, Component, ModelCheckpoint};
use gazegan::dataio::{
    encode_label, load_corpus, load_windows, parse_recording, save_windows, split_dataset, ClassLabel, Dimension,
    GazeWindow, LabelMode, NormStats, PersonalityProfile, CH_BLINK, WINDOW_LEN,
};
use gazegan::eval::{average_pupil, average_trajectory, emit_plot_data, inception_score, train_classifier, ClassCurve};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;

pub const TRAIN_WINDOWS: &str = "windows_train.bin";
pub const TEST_WINDOWS: &str = "windows_test.bin";
pub const STATS: &str = "stats.txt";
pub const CODEC: &str = "codec.ggan";
pub const GENERATOR: &str = "generator.ggan";
pub const DISCRIMINATOR: &str = "discriminator.ggan";
pub const CLASSIFIER: &str = "classifier.ggan";

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or configuration (exit 1).
    Usage(anyhow::Error),
    /// Anything that failed while running (exit 2).
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(e) | Self::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<gazegan::Error> for CliError {
    fn from(e: gazegan::Error) -> Self {
        match e {
            gazegan::Error::Config(_) => Self::Usage(e.into()),
            e => Self::Runtime(e.into()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: String) -> CliError {
    CliError::Usage(anyhow::anyhow!(msg))
}

fn runtime(msg: String) -> CliError {
    CliError::Runtime(anyhow::anyhow!(msg))
}

/// Artifacts written by one command, recorded in its manifest.
struct Manifest<'a> {
    cfg: &'a RunConfig,
    command: &'static str,
    args: String,
    artifacts: Vec<PathBuf>,
    notes: Vec<(String, String)>,
}

impl<'a> Manifest<'a> {
    fn new(cfg: &'a RunConfig, command: &'static str) -> Self {
        Self {
            cfg,
            command,
            args: String::new(),
            artifacts: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.into(), value.to_string()));
    }

    fn write(mut self) -> Result<()> {
        let root = &self.cfg.output_dir;
        let mut s = String::new();
        writeln!(s, "command = {}", self.command).unwrap();
        if !self.args.is_empty() {
            writeln!(s, "args = {}", self.args).unwrap();
        }
        writeln!(s, "config_sha256 = {}", self.cfg.hash()).unwrap();
        writeln!(s, "seed = {}", self.cfg.seed).unwrap();
        for (k, v) in &self.notes {
            writeln!(s, "{k} = {v}").unwrap();
        }
        self.artifacts.sort();
        for p in &self.artifacts {
            let rel = p.strip_prefix(root).unwrap_or(p);
            writeln!(s, "artifact {} {}", rel.display(), sha256_hex(&fs::read(p)?)).unwrap();
        }
        s.push_str("[config]\n");
        s.push_str(&self.cfg.canonical);
        fs::write(root.join(format!("manifest-{}.txt", self.command)), s)?;
        Ok(())
    }
}

fn need(path: PathBuf, producer: &str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(runtime(format!("{} not found; run `gazegan {producer}` first", path.display())))
    }
}

fn train_windows(cfg: &RunConfig) -> Result<Vec<GazeWindow>> {
    Ok(load_windows(&need(cfg.output_dir.join(TRAIN_WINDOWS), "prepare")?, cfg.mode)?)
}

fn stats(cfg: &RunConfig) -> Result<NormStats> {
    Ok(NormStats::load(&need(cfg.output_dir.join(STATS), "prepare")?)?)
}

fn codec(cfg: &RunConfig) -> Result<BlinkCodec> {
    let ck = ModelCheckpoint::load_expecting(&need(cfg.output_dir.join(CODEC), "train-ae")?, Component::Codec)?;
    Ok(BlinkCodec::from_params(ck.params)?)
}

fn generator(cfg: &RunConfig) -> Result<Generator> {
    let ck = ModelCheckpoint::load_expecting(&need(cfg.output_dir.join(GENERATOR), "train-gan")?, Component::Generator)?;
    if ck.mode.is_some_and(|m| m != cfg.mode) {
        return Err(usage(format!(
            "generator was trained in mode {} but the config says {}",
            ck.mode.unwrap(),
            cfg.mode
        )));
    }
    Ok(Generator::from_params(ck.params, cfg.mode)?)
}

pub fn prepare(cfg: &RunConfig) -> Result<()> {
    let data = cfg.data_dir.as_ref().ok_or_else(|| usage("prepare needs data_dir".into()))?;
    let personality = cfg
        .personality_file
        .as_ref()
        .ok_or_else(|| usage("prepare needs personality_file".into()))?;
    fs::create_dir_all(&cfg.output_dir)?;
    let report = load_corpus(data, personality, cfg.mode, cfg.stride)?;
    let (train, test) = split_dataset(&report.windows, cfg.test_fraction, cfg.seed)?;
    let stats = NormStats::from_windows(&train)?;
    let out = &cfg.output_dir;
    save_windows(&out.join(TRAIN_WINDOWS), &train)?;
    save_windows(&out.join(TEST_WINDOWS), &test)?;
    stats.save(&out.join(STATS))?;
    info!(
        "{} windows, {} rejected, {} kept ({} train / {} test)",
        report.total_windows,
        report.rejected,
        report.windows.len(),
        train.len(),
        test.len()
    );
    println!("windows_total = {}", report.total_windows);
    println!("windows_rejected = {}", report.rejected);
    println!("windows_train = {}", train.len());
    println!("windows_test = {}", test.len());
    let mut m = Manifest::new(cfg, "prepare");
    m.note("windows_total", report.total_windows);
    m.note("windows_rejected", report.rejected);
    m.note("windows_train", train.len());
    m.note("windows_test", test.len());
    m.artifacts = vec![out.join(TRAIN_WINDOWS), out.join(TEST_WINDOWS), out.join(STATS)];
    m.write()
}

pub fn train_ae(cfg: &RunConfig) -> Result<()> {
    let blinks: Vec<Vec<f64>> = train_windows(cfg)?.iter().map(|w| w.channel(CH_BLINK)).collect();
    let (codec, curve) = train_autoencoder(&blinks, &cfg.codec)?;
    let out = &cfg.output_dir;
    ModelCheckpoint::new(Component::Codec, None, codec.params).save(&out.join(CODEC))?;
    let mut log = String::from("epoch loss accuracy\n");
    for e in &curve {
        writeln!(log, "{} {:.16e} {:.16e}", e.epoch, e.loss, e.accuracy).unwrap();
    }
    fs::write(out.join("codec_log.txt"), log)?;
    if let Some(last) = curve.last() {
        println!("codec_train_accuracy = {}", last.accuracy);
    }
    let mut m = Manifest::new(cfg, "train-ae");
    m.artifacts = vec![out.join(CODEC), out.join("codec_log.txt")];
    m.write()
}

pub fn train_gan(cfg: &RunConfig) -> Result<()> {
    let windows = train_windows(cfg)?;
    let stats = stats(cfg)?;
    let codec = codec(cfg)?;
    let set = TrainingSet::from_windows(&windows, &stats, cfg.mode)?;
    let mut trainer = GanTrainer::new(&set, &codec, cfg.gan.clone())?;
    let mut m = Manifest::new(cfg, "train-gan");
    while trainer.epoch() < cfg.gan.epochs {
        let e = trainer.run_epoch()?;
        info!("epoch {}: d_loss {:.5} g_loss {:.5}", e.epoch, e.d_loss, e.g_loss);
        let every = cfg.gan.checkpoint_every;
        if every > 0 && (e.epoch + 1) % every == 0 {
            let dir = cfg.output_dir.join("checkpoints");
            let (g, d) = trainer.save_checkpoints(&dir, &format!("epoch{:04}_", e.epoch + 1))?;
            m.artifacts.extend([g, d]);
        }
    }
    let out = &cfg.output_dir;
    trainer.save_checkpoints(out, "")?;
    fs::write(out.join("gan_log.txt"), format_log(&trainer.log))?;
    m.artifacts.extend([out.join(GENERATOR), out.join(DISCRIMINATOR), out.join("gan_log.txt")]);
    m.write()
}

/// Resolves `--class` / `--class-index` to a label in `mode`.
pub fn resolve_class(mode: LabelMode, spec: Option<&str>, index: Option<usize>) -> Result<ClassLabel> {
    match (spec, index) {
        (_, Some(i)) => ClassLabel::new(mode, i).map_err(|e| usage(format!("--class-index: {e}"))),
        (Some(spec), None) => {
            if let LabelMode::SingleDim(d) = mode {
                if let Some((k, v)) = spec.split_once('=') {
                    if !spec.contains(',') {
                        let k: Dimension = k.trim().parse().map_err(|e| usage(format!("--class: {e}")))?;
                        if k != d {
                            return Err(usage(format!("--class names {k} but the mode is single_dim:{d}")));
                        }
                        let bin: usize = v.trim().parse().map_err(|_| usage(format!("--class: bad bin {v:?}")))?;
                        return ClassLabel::new(mode, bin).map_err(|e| usage(format!("--class: {e}")));
                    }
                }
            }
            let profile: PersonalityProfile = spec.parse().map_err(|e| usage(format!("--class: {e}")))?;
            Ok(encode_label(&profile, mode))
        }
        (None, None) => Err(usage("one of --class or --class-index is required".into())),
    }
}

/// Window CSV in the recording layout, so it reads back with the
/// recording parser.
pub fn window_csv(w: &GazeWindow) -> String {
    let mut s = String::from("t,gaze_x,gaze_y,pupil,blink\n");
    for (k, r) in w.frames.iter().enumerate() {
        writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e},{}", k as f64 / 60.0, r[0], r[1], r[2], r[3] as u8).unwrap();
    }
    s
}

pub fn synth(cfg: &RunConfig, spec: Option<&str>, index: Option<usize>, n: usize) -> Result<()> {
    let label = resolve_class(cfg.mode, spec, index)?;
    if n == 0 {
        return Err(usage("--n must be positive".into()));
    }
    let g = generator(cfg)?;
    let codec = codec(cfg)?;
    let stats = stats(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (label.index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let windows = synthesize_batch(&mut rng, n, label, &g, &codec, &stats)?;
    let dir = cfg.output_dir.join("synth").join(format!("class{}", label.index));
    fs::create_dir_all(&dir)?;
    let mut m = Manifest::new(cfg, "synth");
    m.args = format!("--class-index {} --n {n}", label.index);
    for (i, w) in windows.iter().enumerate() {
        let p = dir.join(format!("window_{i:04}.csv"));
        fs::write(&p, window_csv(w))?;
        m.artifacts.push(p);
    }
    println!("label_index = {}", label.index);
    println!("profile = {}", label_profile(label)?);
    println!("windows = {}", windows.len());
    println!("dir = {}", dir.display());
    m.note("label_index", label.index);
    m.write()
}

fn classes_of(windows: &[GazeWindow]) -> Vec<usize> {
    let mut c: Vec<usize> = windows.iter().map(|w| w.label.index).collect();
    c.sort_unstable();
    c.dedup();
    c
}

fn by_class(windows: &[GazeWindow], class: usize) -> Vec<GazeWindow> {
    windows.iter().filter(|w| w.label.index == class).cloned().collect()
}

fn curves(windows: &[GazeWindow], classes: &[usize]) -> Result<Vec<ClassCurve>> {
    let mut out = Vec::new();
    for &c in classes {
        let set = by_class(windows, c);
        if set.is_empty() {
            continue;
        }
        out.push(average_trajectory(&set)?);
        out.push(average_pupil(&set)?);
    }
    Ok(out)
}

pub fn eval(cfg: &RunConfig) -> Result<()> {
    let train = train_windows(cfg)?;
    let test = load_windows(&need(cfg.output_dir.join(TEST_WINDOWS), "prepare")?, cfg.mode)?;
    let stats = stats(cfg)?;
    let g = generator(cfg)?;
    let codec = codec(cfg)?;
    let out = &cfg.output_dir;

    // the classifier is trained on real training windows only
    let (clf, report) = train_classifier(&train, &cfg.classifier)?;
    clf.save(&out.join(CLASSIFIER))?;

    let classes = match cfg.mode {
        LabelMode::SingleDim(_) => (0..cfg.mode.num_classes()).collect(),
        LabelMode::AllDims => classes_of(&train),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut synth = Vec::new();
    for &c in &classes {
        let label = ClassLabel::new(cfg.mode, c)?;
        synth.extend(synthesize_batch(&mut rng, cfg.eval_samples, label, &g, &codec, &stats)?);
    }
    let real_is = if test.is_empty() { None } else { Some(inception_score(&clf, &test)?) };
    let synth_is = inception_score(&clf, &synth)?;

    let mut m = Manifest::new(cfg, "eval");
    m.artifacts.push(out.join(CLASSIFIER));
    m.artifacts.extend(emit_plot_data(&curves(&synth, &classes)?, &out.join("plots").join("synthetic"))?);
    m.artifacts.extend(emit_plot_data(&curves(&test, &classes_of(&test))?, &out.join("plots").join("real_test"))?);

    let mut s = String::new();
    writeln!(s, "mode = {}", cfg.mode).unwrap();
    writeln!(s, "classifier_holdout_accuracy = {}", report.holdout_accuracy).unwrap();
    writeln!(s, "classifier_holdout_size = {}", report.holdout_size).unwrap();
    match real_is {
        Some(v) => writeln!(s, "inception_real_test = {v}").unwrap(),
        None => writeln!(s, "inception_real_test = none").unwrap(),
    }
    writeln!(s, "inception_synthetic = {synth_is}").unwrap();
    writeln!(s, "synthetic_windows = {}", synth.len()).unwrap();
    print!("{s}");
    fs::write(out.join("eval.txt"), &s)?;
    m.artifacts.push(out.join("eval.txt"));
    m.write()
}

fn read_window(path: &Path) -> Result<GazeWindow> {
    let samples = parse_recording(path, "window")?;
    if samples.len() != WINDOW_LEN {
        return Err(runtime(format!("{}: {} rows, expected {WINDOW_LEN}", path.display(), samples.len())));
    }
    let frames = samples.iter().map(|s| s.row()).collect();
    // the label is irrelevant for animation
    Ok(GazeWindow::new(frames, PersonalityProfile::new([1; 5])?, LabelMode::AllDims, "window")?)
}

pub fn export_anim(cfg: &RunConfig, window: &Path, out: Option<&Path>) -> Result<()> {
    let w = read_window(window)?;
    let baseline = match cfg.pupil_baseline {
        Some(b) => b,
        None => {
            let train = cfg.output_dir.join(TRAIN_WINDOWS);
            if train.exists() {
                mean_pupil(&load_windows(&train, cfg.mode)?)?
            } else {
                mean_pupil(std::slice::from_ref(&w))?
            }
        }
    };
    let path = match out {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = window.file_stem().and_then(|s| s.to_str()).unwrap_or("window");
            cfg.output_dir.join("anim").join(format!("{stem}.anim"))
        }
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let frames = export_animation(&w, &cfg.rig, &cfg.eyelid, baseline, &path)?;
    println!("frames = {}", frames.len());
    println!("pupil_baseline = {baseline}");
    println!("out = {}", path.display());
    fs::create_dir_all(&cfg.output_dir)?;
    let mut m = Manifest::new(cfg, "export-anim");
    m.args = format!("--window {}", window.display());
    m.artifacts.push(path);
    m.write()
}
