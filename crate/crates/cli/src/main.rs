//! `alodsim` command-line front end.

mod commands;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "alodsim", version, about = "Room impulse responses at a configurable acoustic level of detail")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a scene to a WAV impulse response plus a run manifest.
    Simulate(SimulateArgs),
    /// Compute decay and energy metrics of a WAV impulse response.
    Analyze(AnalyzeArgs),
    /// Generate a test stimulus.
    Stimulus(StimulusArgs),
    /// Convolve a mono stimulus with an impulse response.
    Render(RenderArgs),
    /// Match the average spectrum of one response to another.
    Match(MatchArgs),
    /// List built-in scenes and profiles, or print one scene as JSON.
    Presets(PresetsArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scene JSON file.
    #[arg(long, conflicts_with_all = ["preset", "replay"])]
    scene: Option<PathBuf>,
    /// Built-in scene name.
    #[arg(long, conflicts_with = "replay")]
    preset: Option<String>,
    /// Profile name or profile JSON file; the scene's own profile when absent.
    #[arg(long, conflicts_with = "replay")]
    profile: Option<String>,
    /// Overrides the scene seed.
    #[arg(long, conflicts_with = "replay")]
    seed: Option<u64>,
    #[arg(long, alias = "output", value_enum, conflicts_with = "replay")]
    output_mode: Option<Mode>,
    /// HRTF directory; the built-in spherical head when absent.
    #[arg(long, env = "ALODSIM_HRTF_DIR", conflicts_with = "replay")]
    hrtf: Option<PathBuf>,
    /// Loudspeaker layout file or `86-preset`.
    #[arg(long, conflicts_with = "replay")]
    layout: Option<String>,
    /// Seconds; 1.5 times the longest reverberation time when absent.
    #[arg(long, conflicts_with = "replay")]
    duration: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::F32)]
    format: Format,
    /// Re-run a manifest and check the output hash against it.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Output WAV; the manifest goes next to it as `<stem>.manifest.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated: t30, t30-bands, edc, ned, drr, dual-slope.
    #[arg(long, value_delimiter = ',', default_value = "t30")]
    metrics: Vec<String>,
    /// Metrics CSV; curves go to `<stem>.<metric>.csv` beside it.
    #[arg(long)]
    out: PathBuf,
    /// DRR direct-sound window in seconds.
    #[arg(long, default_value_t = 0.005)]
    direct_window: f64,
}

#[derive(Args, Debug)]
struct StimulusArgs {
    #[arg(value_enum)]
    kind: StimulusKind,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 44100)]
    sample_rate: u32,
    /// Seconds; 0.5 for pulses, 5 for sweeps.
    #[arg(long)]
    duration: Option<f64>,
    /// Ten octave offsets in dB for `pink-variant`, each -6, 0 or 6.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "random_seed")]
    levels: Option<Vec<i8>>,
    /// Draw `pink-variant` offsets from this seed.
    #[arg(long)]
    random_seed: Option<u64>,
    /// Sweep start frequency in Hz.
    #[arg(long, default_value_t = 100.0)]
    f1: f64,
    /// Sweep end frequency in Hz; defaults to Nyquist.
    #[arg(long)]
    f2: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::F32)]
    format: Format,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    ir: PathBuf,
    /// Mono stimulus WAV.
    #[arg(long)]
    stimulus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::F32)]
    format: Format,
}

#[derive(Args, Debug)]
struct MatchArgs {
    #[arg(long)]
    sim: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Report CSV; `<stem>.report.csv` beside the output when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Matching range in Hz as `low,high`.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [100.0, 16000.0])]
    range: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Format::F32)]
    format: Format,
}

#[derive(Args, Debug)]
struct PresetsArgs {
    /// Print this preset as scene JSON.
    #[arg(long)]
    dump: Option<String>,
    /// Write the dump here instead of stdout.
    #[arg(long, requires = "dump")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Binaural,
    Array,
    Diotic,
    Mono,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    F32,
    Pcm16,
    Pcm24,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StimulusKind {
    PinkPulse,
    PinkVariant,
    Ess,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: usage: {line}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Stimulus(a) => commands::stimulus(a),
        Command::Render(a) => commands::render(a),
        Command::Match(a) => commands::match_spectra(a),
        Command::Presets(a) => commands::presets(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.line());
            ExitCode::FAILURE
        }
    }
}
