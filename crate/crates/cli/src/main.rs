//! `eegcodec` command-line tool.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eegcodec::{CodecId, Error};

use commands::FlagSource;
use config::{Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "eegcodec", version, about = "Lossy multichannel EEG compression and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// key=value file; flags given on the command line take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// spiht2d, dictionary or dipole
    #[arg(long, value_parser = parse_codec)]
    codec: Option<CodecId>,
    /// Target bits per sample, in (0, 16]
    #[arg(long)]
    bps: Option<f64>,
    /// Dictionary segment length in samples
    #[arg(long)]
    epoch: Option<usize>,
    /// Dictionary match threshold
    #[arg(long)]
    tau: Option<f64>,
    /// Dictionary reference list size
    #[arg(long)]
    capacity: Option<usize>,
    /// Window in samples (dipole fit window, or the 2D SPIHT unit)
    #[arg(long)]
    window: Option<usize>,
    /// Residual smoothness above which the dipole codec uses 2D SPIHT
    #[arg(long)]
    smooth_thresh: Option<f64>,
    /// Onset threshold of the proxy detector, in multiples of the median
    #[arg(long)]
    detector_k: Option<f64>,
    /// Also write the command's CSV report here
    #[arg(long)]
    report: Option<PathBuf>,
}

fn parse_codec(s: &str) -> Result<CodecId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compress an EDF or raw recording into a container
    Compress {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct a container into a raw recording
    Decompress {
        input: PathBuf,
        output: PathBuf,
    },
    /// Compare a reconstruction (recording or container) with its original
    Evaluate {
        original: PathBuf,
        reconstructed: PathBuf,
        /// Run the detector on both files; with a path, read the reference
        /// detections from that flag file instead
        #[arg(long, num_args = 0..=1, value_name = "FLAG_FILE")]
        flags: Option<Option<PathBuf>>,
        /// Write (prd, tp_percent) plot data here
        #[arg(long)]
        plot: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compress, reconstruct and score many recordings at several rates
    Batch {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Rates to run, comma separated
        #[arg(long, value_delimiter = ',', default_values_t = [2.0, 4.0])]
        rates: Vec<f64>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn run_config(c: &Common) -> eegcodec::Result<RunConfig> {
    let flags = Overrides {
        codec: c.codec,
        bps: c.bps,
        epoch: c.epoch,
        tau: c.tau,
        capacity: c.capacity,
        window: c.window,
        smooth_thresh: c.smooth_thresh,
        detector_k: c.detector_k,
        report: c.report.clone(),
    };
    RunConfig::resolve(&Overrides::load(c.config.as_deref(), flags)?)
}

fn run(cmd: Command) -> eegcodec::Result<()> {
    match cmd {
        Command::Compress { input, output, common } => commands::compress(&run_config(&common)?, &input, &output),
        Command::Decompress { input, output } => commands::decompress(&input, &output),
        Command::Evaluate { original, reconstructed, flags, plot, common } => {
            let source = match flags {
                None => FlagSource::None,
                Some(None) => FlagSource::Detect,
                Some(Some(p)) => FlagSource::File(p),
            };
            commands::run_evaluate(&run_config(&common)?, &original, &reconstructed, &source, plot.as_deref())
        }
        Command::Batch { inputs, rates, out_dir, common } => commands::batch(&run_config(&common)?, &inputs, &rates, &out_dir),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Range(_) => 1,
        Error::Io(_) | Error::Format(_) | Error::Structure(_) => 2,
        Error::Size(_) | Error::Budget(_) | Error::Domain(_) | Error::Fit(_) => 3,
        Error::Metric(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
