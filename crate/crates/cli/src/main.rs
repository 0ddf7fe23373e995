mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "gazegan", version, about = "Personality-conditioned gaze sequence synthesis", after_long_help = config::key_reference())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration file
    #[arg(short, long, value_name = "FILE")]
    config: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Window the recordings, filter them, split by participant and fit normalization stats
    Prepare(Common),
    /// Train the blink codec on the prepared training windows
    TrainAe(Common),
    /// Train the conditional GAN
    TrainGan(Common),
    /// Synthesize windows for one class
    Synth(SynthArgs),
    /// Train the classifier, score real and synthetic sets, write plot data
    Eval(Common),
    /// Convert a window CSV to an animation stream
    ExportAnim(AnimArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Class as named bins, e.g. O=2,C=1,E=0,A=1,N=2 (or E=2 in single_dim:E mode)
    #[arg(long, value_name = "SPEC", conflicts_with = "class_index", required_unless_present = "class_index")]
    class: Option<String>,
    /// Class as a raw index
    #[arg(long, value_name = "INDEX")]
    class_index: Option<usize>,
    /// Number of windows
    #[arg(long, default_value_t = 1000)]
    n: usize,
}

#[derive(Args, Debug)]
struct AnimArgs {
    #[command(flatten)]
    common: Common,
    /// Window CSV (t,gaze_x,gaze_y,pupil,blink) with 300 rows
    #[arg(long, value_name = "FILE")]
    window: PathBuf,
    /// Animation file to write [default: <output_dir>/anim/<window stem>.anim]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let path = match &cli.command {
        Command::Prepare(c) | Command::TrainAe(c) | Command::TrainGan(c) | Command::Eval(c) => &c.config,
        Command::Synth(a) => &a.common.config,
        Command::ExportAnim(a) => &a.common.config,
    };
    let cfg = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Prepare(_) => commands::prepare(&cfg),
        Command::TrainAe(_) => commands::train_ae(&cfg),
        Command::TrainGan(_) => commands::train_gan(&cfg),
        Command::Synth(a) => commands::synth(&cfg, a.class.as_deref(), a.class_index, a.n),
        Command::Eval(_) => commands::eval(&cfg),
        Command::ExportAnim(a) => commands::export_anim(&cfg, &a.window, a.out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.code())
        }
    }
}
