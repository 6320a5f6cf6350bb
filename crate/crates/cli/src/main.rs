use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use maxinv_cli::config::{ExperimentConfig, Meshes, PRESETS};
use maxinv_cli::io::{CompletedFile, DatasetFile};
use maxinv_cli::pipeline::{self, RunLog};
use maxinv_cli::{exit_code, write_file, write_report};
use maxinv_core::Error;

#[derive(Parser)]
#[command(name = "maxinv", version, about = "Perturbation reconstruction from partial boundary data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration: table1, table2, table5, ellipse, two_ball, star.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Noise seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the fine mesh sizes (0.0138 / 0.02 / 0.0409).
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic measurements on the data mesh.
    Synth(Common),
    /// Transmit the partial data to the interior curve.
    Complete {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Localize and reconstruct the perturbation from interior traces.
    Invert {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        traces: PathBuf,
    },
    /// synth, complete and invert in one go.
    Pipeline(Common),
}

fn read(path: &PathBuf) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
}

fn load(c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match (&c.config, &c.preset) {
        (Some(_), Some(_)) => return Err(Error::InvalidParameter("give either --config or --preset".into())),
        (Some(p), None) => ExperimentConfig::from_json(&read(p)?)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => {
            return Err(Error::InvalidParameter(format!(
                "a configuration is required: --config PATH or --preset {{{}}}",
                PRESETS.join(",")
            )))
        }
    };
    if let Some(s) = c.seed {
        cfg.noise.seed = s;
    }
    if c.paper_scale {
        cfg.meshes = Meshes::paper_scale();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut log = RunLog::default();
    match cli.command {
        Command::Synth(c) => {
            let cfg = load(&c)?;
            let data = pipeline::cmd_synth(&cfg, None, &mut log)?;
            write_file(&c.out, "dataset.txt", &data.to_text())?;
            write_file(&c.out, "run.log", &log.to_text(&cfg.checksum()))
        }
        Command::Complete { common: c, dataset } => {
            let cfg = load(&c)?;
            let data = DatasetFile::from_text(&read(&dataset)?)?;
            let done = pipeline::cmd_complete(&cfg, &data, &mut log)?;
            write_file(&c.out, "completed.txt", &done.to_text())?;
            write_file(&c.out, "run.log", &log.to_text(&cfg.checksum()))
        }
        Command::Invert { common: c, traces } => {
            let cfg = load(&c)?;
            let completed = CompletedFile::from_text(&read(&traces)?)?;
            let out = pipeline::cmd_invert(&cfg, &completed, &mut log)?;
            let checksum = cfg.checksum();
            let arts = pipeline::render(&cfg, &checksum, None, completed, out, None);
            for (name, text) in arts.files() {
                write_file(&c.out, name, &text)?;
            }
            write_file(&c.out, "run.log", &log.to_text(&checksum))
        }
        Command::Pipeline(c) => {
            let cfg = load(&c)?;
            let report = pipeline::cmd_pipeline(&cfg)?;
            write_report(&c.out, &report)?;
            if let Some(s) = &report.sweep_text {
                print!("{s}");
            } else if let Some(r) = report.runs.last() {
                print!("{}", r.result_text);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
