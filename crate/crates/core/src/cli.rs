//! Command-line front end. [`run`] returns the process exit code so it can be
//! driven from tests without spawning a process.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::hyper_laplacian::estimate_p;
use crate::io::{
    noise_spec_to_kv, normalize_bands, read_cube, read_run_config, solver_config_to_kv, write_cube,
};
use crate::metrics::evaluate;
use crate::noise::{simulate_case, NoiseSpec};
use crate::solver::{solve, SolverConfig};
use crate::synthetic::low_rank_scene;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lrtdahl", version, about = "Hyperspectral image restoration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Degrade a clean cube with one of the simulated noise cases.
    Simulate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
        case: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional key=value file overriding the case preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Restore a noisy cube.
    Denoise {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Rescale each band of the input to [0, 1] first.
        #[arg(long)]
        normalize: bool,
    },
    /// Compare a restored cube against a reference.
    Evaluate {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the hyper-Laplacian exponents of a cube.
    FitP {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Write a synthetic low-rank scene.
    Synth {
        /// Height, width and band count.
        #[arg(long, value_parser = parse_dims, default_value = "48,48,16")]
        dims: [usize; 3],
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_dims(text: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [h, w, b] = parts[..] else {
        return Err(format!("expected three comma-separated sizes, got {text:?}"));
    };
    let num = |v: &str| v.parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok([num(h)?, num(w)?, num(b)?])
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn simulate(truth: &Path, case: u8, seed: u64, config: Option<&Path>, out_dir: &Path) -> Result<()> {
    let truth = read_cube(truth)?;
    let spec = match config {
        Some(path) => {
            let mut spec = read_run_config(path)?.noise;
            let preset = NoiseSpec::case(case, seed)?;
            if spec.case_id != case {
                spec = preset;
            }
            spec.seed = seed;
            spec
        }
        None => NoiseSpec::case(case, seed)?,
    };
    let (noisy, parts) = simulate_case(&truth, &spec)?;
    create_dir(out_dir)?;
    write_cube(out_dir.join("noisy.cube"), &noisy)?;
    write_cube(out_dir.join("gaussian.cube"), &parts.gaussian)?;
    write_cube(out_dir.join("impulse_mask.cube"), &parts.impulse_mask)?;
    write_cube(out_dir.join("stripe_field.cube"), &parts.stripe_field)?;
    write_cube(out_dir.join("deadline_mask.cube"), &parts.deadline_mask)?;
    write_text(&out_dir.join("manifest.txt"), &noise_spec_to_kv(&spec))
}

fn denoise(input: &Path, config: Option<&Path>, out_dir: &Path, normalize: bool) -> Result<()> {
    let mut y = read_cube(input)?;
    if normalize {
        y = normalize_bands(&y);
    }
    let cfg = match config {
        Some(path) => read_run_config(path)?.solver,
        None => SolverConfig::default(),
    };
    let (parts, diag) = solve(&y, &cfg)?;
    create_dir(out_dir)?;
    write_cube(out_dir.join("clean.cube"), &parts.clean)?;
    write_cube(out_dir.join("sparse.cube"), &parts.sparse)?;
    write_cube(out_dir.join("stripes.cube"), &parts.stripes)?;
    write_cube(out_dir.join("residual.cube"), &parts.residual)?;
    write_text(&out_dir.join("diagnostics.csv"), &diag.to_csv())?;
    let mut manifest = solver_config_to_kv(&cfg);
    let [ph, pw, pp] = diag.p;
    let _ = writeln!(manifest, "# p used: {ph:?},{pw:?},{pp:?}");
    let _ = writeln!(manifest, "# iterations: {} converged: {}", diag.iterations, diag.converged);
    write_text(&out_dir.join("manifest.txt"), &manifest)?;
    eprintln!("denoise: {} iterations in {:.3} s", diag.iterations, diag.wall_time.as_secs_f64());
    Ok(())
}

fn evaluate_cmd(reference: &Path, test: &Path, out: Option<&Path>) -> Result<()> {
    let report = evaluate(&read_cube(reference)?, &read_cube(test)?)?;
    let csv = report.to_csv();
    match out {
        Some(path) => write_text(path, &csv)?,
        None => print!("{csv}"),
    }
    println!("mpsnr={:.4} mssim={:.4} msam={:.4}", report.mpsnr, report.mssim, report.msam);
    Ok(())
}

fn fit_p(input: &Path) -> Result<()> {
    let fit = estimate_p(&read_cube(input)?)?;
    let mut out = String::new();
    for (name, d) in ["h", "w", "p"].iter().zip(&fit.directions) {
        let _ = writeln!(out, "p_{name}={}", d.p);
    }
    for (name, d) in ["h", "w", "p"].iter().zip(&fit.directions) {
        let _ = writeln!(out, "sigma_{name}={}", d.sigma);
    }
    for (name, d) in ["h", "w", "p"].iter().zip(&fit.directions) {
        let _ = writeln!(out, "k_{name}={}", d.k);
    }
    print!("{out}");
    Ok(())
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { truth, case, seed, config, out_dir } => {
            simulate(&truth, case, seed, config.as_deref(), &out_dir)
        }
        Command::Denoise { input, config, out_dir, normalize } => {
            denoise(&input, config.as_deref(), &out_dir, normalize)
        }
        Command::Evaluate { reference, test, out } => evaluate_cmd(&reference, &test, out.as_deref()),
        Command::FitP { input } => fit_p(&input),
        Command::Synth { dims, seed, out } => {
            let cube = low_rank_scene(dims, seed)?;
            write_cube(out, &cube)
        }
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                EXIT_FAILURE
            } else {
                EXIT_USAGE
            }
        }
    }
}
