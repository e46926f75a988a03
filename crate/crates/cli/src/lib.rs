//! Command-line front end for the five-point solver and its benchmark.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use cayley_pose::bench::{run_experiment, write_trials_csv, Scenario, SceneConfig};
use cayley_pose::{solve_relative_pose, SolutionCandidate, SolveOptions};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub mod config;
pub mod input;

pub const EXIT_OK: i32 = 0;
pub const EXIT_MALFORMED: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_UNWRITABLE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cayley-pose", version, about = "Calibrated five-point relative pose")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one five-correspondence file.
    Solve(SolveArgs),
    /// Run a synthetic benchmark scenario.
    Bench(BenchArgs),
    /// Run the benchmark over a range of noise levels.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// File with five lines `x1 y1 z1 x2 y2 z2`.
    path: PathBuf,
    #[arg(long)]
    json: bool,
    /// Keep candidates failing the consistency check.
    #[arg(long)]
    keep_all: bool,
    #[arg(long, default_value_t = 1e-3)]
    consistency_tol: f64,
    #[arg(long, allow_negative_numbers = true)]
    wtilde_lo: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    wtilde_hi: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Default,
    #[value(name = "planar_forward")]
    PlanarForward,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Default => Scenario::Default,
            ScenarioArg::PlanarForward => Scenario::PlanarForward,
        }
    }
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "default")]
    scenario: ScenarioArg,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Pixel noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes `<prefix>_trials.csv` and `<prefix>_summary.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "default")]
    scenario: ScenarioArg,
    /// `start:stop:step`, inclusive.
    #[arg(long, default_value = "0:1:0.1")]
    sigmas: String,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes `<prefix>_sweep.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run(args: Vec<OsString>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let args = match config::expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_MALFORMED;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                return EXIT_MALFORMED;
            }
            let _ = write!(stdout, "{text}");
            return EXIT_OK;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a, stdout),
        Command::Bench(a) => cmd_bench(&a, stdout),
        Command::Sweep(a) => cmd_sweep(&a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

#[derive(Debug, Serialize)]
struct CandidateRecord {
    /// Row-major.
    rotation: [f64; 9],
    translation: [f64; 3],
    u: f64,
    v: f64,
    w: f64,
    max_epipolar_residual: f64,
}

impl From<&SolutionCandidate> for CandidateRecord {
    fn from(c: &SolutionCandidate) -> Self {
        let r = c.pose.rotation.matrix();
        let t = c.pose.translation.vector();
        CandidateRecord {
            rotation: std::array::from_fn(|k| r[(k / 3, k % 3)]),
            translation: [t.x, t.y, t.z],
            u: c.cayley.u,
            v: c.cayley.v,
            w: c.cayley.w,
            max_epipolar_residual: c.max_epipolar_residual,
        }
    }
}

fn io_fail(e: io::Error) -> Failure {
    fail(EXIT_UNWRITABLE, format!("write failed: {e}"))
}

fn cmd_solve(a: &SolveArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let text = fs::read_to_string(&a.path)
        .map_err(|e| fail(EXIT_MALFORMED, format!("cannot read {}: {e}", a.path.display())))?;
    let corrs = input::parse_correspondences(&text).map_err(|e| fail(EXIT_MALFORMED, e))?;
    if a.consistency_tol.is_nan() || a.consistency_tol < 0.0 {
        return Err(fail(EXIT_MALFORMED, "--consistency-tol must be non-negative"));
    }
    let wtilde_range = match (a.wtilde_lo, a.wtilde_hi) {
        (None, None) => None,
        (lo, hi) => {
            let (lo, hi) = (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY));
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(fail(EXIT_MALFORMED, "--wtilde-lo must not exceed --wtilde-hi"));
            }
            Some((lo, hi))
        }
    };
    let opts = SolveOptions {
        consistency_tol: a.consistency_tol,
        keep_all: a.keep_all,
        wtilde_range,
        ..Default::default()
    };
    let solved = solve_relative_pose(&corrs, &opts).map_err(|e| fail(EXIT_DEGENERATE, e.to_string()))?;
    let records: Vec<CandidateRecord> = solved.candidates.iter().map(Into::into).collect();
    if a.json {
        let json = serde_json::to_string_pretty(&records).expect("finite records serialize");
        writeln!(out, "{json}").map_err(io_fail)?;
    } else {
        writeln!(out, "# r11 r12 r13 r21 r22 r23 r31 r32 r33 t1 t2 t3 u v w max_epipolar_residual")
            .map_err(io_fail)?;
        for r in &records {
            let fields: Vec<String> = r
                .rotation
                .iter()
                .chain(&r.translation)
                .chain(&[r.u, r.v, r.w, r.max_epipolar_residual])
                .map(|x| format!("{x:.16e}"))
                .collect();
            writeln!(out, "{}", fields.join(" ")).map_err(io_fail)?;
        }
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| fail(EXIT_UNWRITABLE, format!("cannot write {}: {e}", path.display())))
}

fn check_experiment(trials: usize, sigma: f64) -> Result<(), Failure> {
    if trials == 0 {
        return Err(fail(EXIT_MALFORMED, "--trials must be at least 1"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(fail(EXIT_MALFORMED, "noise sigma must be finite and non-negative"));
    }
    Ok(())
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<(), Failure> {
    check_experiment(a.trials, a.sigma)?;
    let cfg = SceneConfig {
        scenario: a.scenario.into(),
        trials: a.trials,
        noise_sigma_px: a.sigma,
        master_seed: a.seed,
        ..Default::default()
    };
    let ex = run_experiment(&cfg, &SolveOptions::default());
    let json = serde_json::to_string_pretty(&ex.summary).expect("summary serializes");
    if let Some(prefix) = &a.out {
        let csv_path = with_suffix(prefix, "_trials.csv");
        let mut csv = create(&csv_path)?;
        write_trials_csv(&ex.records, &mut csv)
            .and_then(|_| csv.flush())
            .map_err(io_fail)?;
        let mut summary = create(&with_suffix(prefix, "_summary.json"))?;
        writeln!(summary, "{json}").and_then(|_| summary.flush()).map_err(io_fail)?;
    }
    writeln!(out, "{json}").map_err(io_fail)
}

/// Inclusive `start:stop:step` grid, values rounded to 12 decimals.
pub fn parse_sigmas(range: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = range.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(format!("sigma range {range:?} is not start:stop:step"));
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("invalid number {s:?} in sigma range"));
    let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || start < 0.0 || stop < start || step <= 0.0 {
        return Err(format!("sigma range {range:?} must satisfy 0 <= start <= stop and step > 0"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

pub const SWEEP_CSV_HEADER: &str = "sigma,median_rot_err_deg,median_trans_err_deg,median_epsilon";

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let sigmas = parse_sigmas(&a.sigmas).map_err(|e| fail(EXIT_MALFORMED, e))?;
    check_experiment(a.trials, 0.0)?;
    let mut file = a.out.as_ref().map(|p| create(&with_suffix(p, "_sweep.csv"))).transpose()?;
    let mut lines = vec![SWEEP_CSV_HEADER.to_string()];
    for sigma in sigmas {
        let cfg = SceneConfig {
            scenario: a.scenario.into(),
            trials: a.trials,
            noise_sigma_px: sigma,
            master_seed: a.seed,
            ..Default::default()
        };
        let s = run_experiment(&cfg, &SolveOptions::default()).summary;
        lines.push(format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            sigma, s.median_rot_err_deg, s.median_trans_err_deg, s.median_epsilon
        ));
    }
    for line in &lines {
        writeln!(out, "{line}").map_err(io_fail)?;
        if let Some(f) = &mut file {
            writeln!(f, "{line}").map_err(io_fail)?;
        }
    }
    if let Some(f) = &mut file {
        f.flush().map_err(io_fail)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_grid() {
        let s = parse_sigmas("0:1:0.1").unwrap();
        assert_eq!(s.len(), 11);
        assert_eq!(s[3], 0.3);
        assert_eq!(s[10], 1.0);
        assert_eq!(parse_sigmas("0.5:0.5:1").unwrap(), [0.5]);
        for bad in ["0:1", "0:1:0", "1:0:0.1", "a:1:0.1", "-1:1:0.5", "0:inf:1"] {
            assert!(parse_sigmas(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn output_paths_append_suffixes() {
        assert_eq!(with_suffix(Path::new("/tmp/run.v1"), "_trials.csv"), PathBuf::from("/tmp/run.v1_trials.csv"));
    }
}
