//! Experiment configuration, text artifacts and the synth / complete /
//! invert pipeline behind the `maxinv` binary.

pub mod config;
pub mod io;
pub mod pipeline;

use std::path::Path;

use maxinv_core::Error;

pub use config::ExperimentConfig;
pub use pipeline::{cmd_complete, cmd_invert, cmd_pipeline, cmd_synth};

/// Process exit code for an error: 3 for numerical failures, 2 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

pub fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::InvalidParameter(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
}

/// Writes a pipeline report: run artifacts directly in `dir` for a single
/// run, one `run_NN` subdirectory per amplitude for a sweep.
pub fn write_report(dir: &Path, report: &pipeline::PipelineReport) -> Result<(), Error> {
    let single = report.runs.len() == 1 && report.sweep_text.is_none();
    for (i, run) in report.runs.iter().enumerate() {
        let sub = if single { dir.to_path_buf() } else { dir.join(format!("run_{i:02}")) };
        for (name, text) in run.files() {
            write_file(&sub, name, &text)?;
        }
    }
    if let Some(s) = &report.sweep_text {
        write_file(dir, "sweep.txt", s)?;
    }
    write_file(dir, "run.log", &report.log.to_text(&report.checksum))
}
