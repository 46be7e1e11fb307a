//! Driver behind the `sl3c` binary: configuration, the individual runs and
//! their machine-readable output.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::run;
pub use config::{Command, Family, Format, RunConfig, StateSpec};
pub use output::{emit_intensities, IntensityRecord, Output, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] sl3_coupler::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Numerical(sl3_coupler::Error::InvalidParameter(_)) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

/// Runs `config` and writes its output (and plot script, if requested).
/// Returns the files written; empty when printing to stdout.
pub fn execute(config: &RunConfig) -> Result<Vec<std::path::PathBuf>, CliError> {
    config.validate()?;
    let output = run(config)?;
    let Some(out) = &config.out else {
        output.write_stdout(config.format)?;
        return Ok(Vec::new());
    };
    let mut paths = output.write_files(out, config.format)?;
    if let Some(script) = &config.plot_script {
        let text = output::plot_script(&output.tables[0], out);
        if let Err(e) = std::fs::write(script, text) {
            for p in &paths {
                let _ = std::fs::remove_file(p);
            }
            return Err(CliError::Config(format!("field `plot-script`: {}: {e}", script.display())));
        }
        paths.push(script.clone());
    }
    Ok(paths)
}
