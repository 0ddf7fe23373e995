use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_gazegan");

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut c = Command::new(BIN);
    c.args(args).env_remove("GAZE_GAN_SEED").env("RUST_LOG", "warn");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}\nstdout:\n{}\nstderr:\n{}", o.status.code(), stdout(o), stderr(o));
}

/// Six participants, two per E bin, 900 clean samples each (11 windows at
/// stride 60).
fn corpus(dir: &Path) {
    let data = dir.join("data");
    std::fs::create_dir_all(&data).unwrap();
    let mut table = String::from("participant_id,O,C,E,A,N\n");
    for p in 0..6 {
        let e = p % 3;
        writeln!(table, "p{p},{},1,{e},1,{}", p % 2, 2 - p % 3).unwrap();
        let mut s = String::from("t,gaze_x,gaze_y,pupil,blink\n");
        for i in 0..900 {
            let t = i as f64 / 60.0;
            let x = 0.2 + 0.25 * e as f64 + 0.1 * (t * (1.0 + p as f64 * 0.1)).sin();
            let y = 0.5 + 0.2 * (t * 0.7 + p as f64).cos();
            let pupil = 3.0 + 0.5 * e as f64 + 0.1 * (t * 0.3).sin();
            writeln!(s, "{t},{x},{y},{pupil},{}", u8::from(i % 120 < 5)).unwrap();
        }
        std::fs::write(data.join(format!("p{p}.csv")), s).unwrap();
    }
    std::fs::write(dir.join("personality.csv"), table).unwrap();
}

fn config(dir: &Path, mode: &str, extra: &str) -> PathBuf {
    let text = format!(
        "data_dir = {d}/data\npersonality_file = {d}/personality.csv\noutput_dir = {d}/out\nmode = {mode}\n\
         test_fraction = 0.2\nseed = 3\nbatch_size = 8\nepochs = 2\nlatent_dim = 8\nembed_dim = 4\n\
         g_channels = 4,4\nd_channels = 4,4\ncodec_latent_dim = 4\ncodec_hidden = 16\ncodec_epochs = 2\n\
         classifier_channels = 4,4\nclassifier_epochs = 2\neval_samples = 6\n{extra}",
        d = dir.display()
    );
    let path = dir.join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = run(&["frobnicate"], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).to_lowercase().contains("usage"), "{}", stderr(&o));
    assert_eq!(run(&[], &[]).status.code(), Some(1));
}

#[test]
fn help_lists_flags_and_defaults() {
    let o = run(&["--help"], &[]);
    ok(&o);
    for sub in ["prepare", "train-ae", "train-gan", "synth", "eval", "export-anim"] {
        assert!(stdout(&o).contains(sub), "{sub} missing from help");
        let h = run(&[sub, "--help"], &[]);
        ok(&h);
        assert!(stdout(&h).contains("--config"), "{sub}: {}", stdout(&h));
    }
    let synth = stdout(&run(&["synth", "--help"], &[]));
    assert!(synth.contains("--class") && synth.contains("--class-index") && synth.contains("[default: 1000]"));
    let long = stdout(&run(&["--help"], &[]));
    assert!(long.contains("GAZE_GAN_SEED") && long.contains("[default: 0.0001]"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "output_dir = x\nlearning_rate = 3\n").unwrap();
    let o = run(&["prepare", "--config", bad.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key"), "{}", stderr(&o));

    let missing = dir.path().join("nope.cfg");
    assert_eq!(run(&["prepare", "--config", missing.to_str().unwrap()], &[]).status.code(), Some(1));

    let cfg = config(dir.path(), "all_dims", "");
    let o = run(&["prepare", "--config", cfg.to_str().unwrap()], &[("GAZE_GAN_SEED", "abc")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "all_dims", "");
    let cfg = cfg.to_str().unwrap();
    // no data directory yet
    assert_eq!(run(&["prepare", "--config", cfg], &[]).status.code(), Some(2));
    // nothing trained yet
    let o = run(&["synth", "--config", cfg, "--class-index", "3", "--n", "2"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("train-gan"), "{}", stderr(&o));
    // invalid class is a usage error even before anything is trained
    let o = run(&["synth", "--config", cfg, "--class-index", "243"], &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn single_dimension_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let cfg = config(dir.path(), "single_dim:E", "");
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("out");

    let o = run(&["prepare", "--config", cfg], &[]);
    ok(&o);
    let s = stdout(&o);
    assert!(s.contains("windows_total = 66") && s.contains("windows_rejected = 0"), "{s}");
    // one of six participants is held out
    assert!(s.contains("windows_train = 55") && s.contains("windows_test = 11"), "{s}");
    assert!(out.join("stats.txt").exists());

    ok(&run(&["train-ae", "--config", cfg], &[]));
    ok(&run(&["train-gan", "--config", cfg], &[]));
    let manifest = std::fs::read_to_string(out.join("manifest-train-gan.txt")).unwrap();
    assert!(manifest.contains("config_sha256 = ") && manifest.contains("seed = 3"), "{manifest}");

    let o = run(&["synth", "--config", cfg, "--class", "E=2", "--n", "5"], &[]);
    ok(&o);
    assert!(stdout(&o).contains("label_index = 2"));
    let synth_dir = out.join("synth").join("class2");
    let files: Vec<_> = std::fs::read_dir(&synth_dir).unwrap().collect();
    assert_eq!(files.len(), 5);
    let first = synth_dir.join("window_0000.csv");
    assert_eq!(std::fs::read_to_string(&first).unwrap().lines().count(), 301);

    let o = run(&["eval", "--config", cfg], &[]);
    ok(&o);
    let report = std::fs::read_to_string(out.join("eval.txt")).unwrap();
    assert!(report.contains("inception_synthetic = ") && report.contains("inception_real_test = "), "{report}");
    for bin in ["low", "medium", "high"] {
        assert!(out.join("plots/synthetic").join(format!("trajectory_E_{bin}.csv")).exists());
        assert!(out.join("plots/synthetic").join(format!("pupil_E_{bin}.csv")).exists());
    }

    let anim = dir.path().join("w0.anim");
    let o = run(&["export-anim", "--config", cfg, "--window", first.to_str().unwrap(), "--out", anim.to_str().unwrap()], &[]);
    ok(&o);
    let text = std::fs::read_to_string(&anim).unwrap();
    assert_eq!(text.lines().count(), 300);
    assert!(text.lines().all(|l| l.split(' ').count() == 7));

    // same config and seed: identical manifests and artifacts
    let before: Vec<String> = ["train-gan", "synth"]
        .iter()
        .map(|c| std::fs::read_to_string(out.join(format!("manifest-{c}.txt"))).unwrap())
        .collect();
    ok(&run(&["train-gan", "--config", cfg], &[]));
    ok(&run(&["synth", "--config", cfg, "--class", "E=2", "--n", "5"], &[]));
    for (c, b) in ["train-gan", "synth"].iter().zip(&before) {
        assert_eq!(&std::fs::read_to_string(out.join(format!("manifest-{c}.txt"))).unwrap(), b, "{c}");
    }

    // the seed override is recorded and changes the run
    ok(&run(&["train-gan", "--config", cfg], &[("GAZE_GAN_SEED", "4")]));
    let m = std::fs::read_to_string(out.join("manifest-train-gan.txt")).unwrap();
    assert!(m.contains("seed = 4"));
    assert_ne!(m, before[0]);
}

#[test]
fn all_dimension_synthesis_by_named_bins() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let cfg = config(dir.path(), "all_dims", "");
    let cfg = cfg.to_str().unwrap();
    ok(&run(&["prepare", "--config", cfg], &[]));
    ok(&run(&["train-ae", "--config", cfg], &[]));
    ok(&run(&["train-gan", "--config", cfg], &[]));
    let o = run(&["synth", "--config", cfg, "--class", "O=2,C=1,E=0,A=1,N=2", "--n", "5"], &[]);
    ok(&o);
    assert!(stdout(&o).contains("label_index = 194"), "{}", stdout(&o));
    assert_eq!(std::fs::read_dir(dir.path().join("out/synth/class194")).unwrap().count(), 5);
    // unseen class by raw index
    ok(&run(&["synth", "--config", cfg, "--class-index", "242", "--n", "2"], &[]));
    // a single-dimension class spec is rejected in all_dims mode
    assert_eq!(run(&["synth", "--config", cfg, "--class", "E=2"], &[]).status.code(), Some(1));
}
