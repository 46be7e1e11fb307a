use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sl3_coupler_cli::{execute, CliError, Command, Family, Format, RunConfig};

/// Computes spectra, propagation and exceptional-point data for three-mode
/// non-Hermitian couplers. Flags override values read from `--config`.
#[derive(Debug, Parser)]
#[command(name = "sl3c", version)]
struct Args {
    /// What to compute; overrides the config's `command`.
    #[arg(value_enum)]
    command: Option<Command>,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the merged configuration to this file before running.
    #[arg(long)]
    save_config: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// First coupling (the only coupling of `chiral2`).
    #[arg(long, allow_negative_numbers = true)]
    kappa1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    kappa2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    z_max: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Excitation number of the Fock sector.
    #[arg(long)]
    n: Option<usize>,
    /// `a,b,c` field amplitudes, `occ:n1,n2,n3` or `noon:j,k`.
    #[arg(long)]
    state: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    loop_r: Option<f64>,
    #[arg(long)]
    loop_turns: Option<u32>,
    /// Loop centre as `x,y` in the (κ₁/γ, κ₂/γ) plane.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    loop_center: Option<Vec<f64>>,
    /// Relative integration tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads for `map`.
    #[arg(long)]
    jobs: Option<usize>,
    /// Relative tolerance for exceptional-point classification.
    #[arg(long)]
    eps_ep: Option<f64>,
    /// Write a gnuplot script for the CSV output.
    #[arg(long)]
    plot_script: Option<PathBuf>,
}

fn merged(args: Args) -> Result<(RunConfig, Option<PathBuf>), CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    macro_rules! apply {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field {
                cfg.$field = v;
            }
        )*};
    }
    apply!(command, family, gamma, kappa1, kappa2, z_max, samples, n, loop_r, loop_turns, tol, format, eps_ep);
    if let Some(c) = args.loop_center {
        cfg.loop_center = c
            .try_into()
            .map_err(|_| CliError::Config("--loop-center expects `x,y`".into()))?;
    }
    if args.state.is_some() {
        cfg.state = args.state;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    if args.jobs.is_some() {
        cfg.jobs = args.jobs;
    }
    if args.plot_script.is_some() {
        cfg.plot_script = args.plot_script;
    }
    Ok((cfg, args.save_config))
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let result = merged(args).and_then(|(cfg, save)| {
        cfg.validate()?;
        if let Some(path) = save {
            std::fs::write(&path, cfg.to_json())
                .map_err(|e| CliError::Config(format!("--save-config {}: {e}", path.display())))?;
        }
        execute(&cfg)
    });
    match result {
        Ok(_) => ExitCode::SUCCESS,
        // Output piped into a reader that stopped early.
        Err(CliError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sl3c: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
