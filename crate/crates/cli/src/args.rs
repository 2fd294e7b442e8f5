use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

#[derive(Debug, Parser)]
#[command(
    name = "elliptica",
    version,
    about = "Elliptic R-matrix identity checks, Painlevé VI runs and function tables"
)]
pub struct Cli {
    /// Print a gnuplot recipe for the command's output on stderr.
    #[arg(long, global = true)]
    pub gnuplot_hint: bool,

    /// Worker threads for sample evaluation (default: number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run identity checks and write a report.
    Check(CheckArgs),
    /// Integrate the Painlevé VI flow and monitor the monodromy residual.
    Pvi(PviArgs),
    /// Tabulate φ, E1, E2 and ℘ on a grid.
    Table(TableArgs),
    /// List registered checks.
    List(ListArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Comma-separated check ids (default: all).
    #[arg(long, value_delimiter = ',')]
    pub ids: Option<Vec<String>>,

    /// Ranks N to sample.
    #[arg(long = "n", value_delimiter = ',', default_values_t = vec![1usize, 2, 3])]
    pub n_list: Vec<usize>,

    /// Moduli τ, e.g. `0.8i,0.5+0.9i`.
    #[arg(long = "tau", value_delimiter = ',', value_parser = parse_complex, default_values = ["0.8i"])]
    pub tau_list: Vec<Complex64>,

    #[arg(long, env = "ELLIPTICA_SEED", default_value_t = 42)]
    pub seed: u64,

    #[arg(long, default_value_t = 50)]
    pub count: usize,

    #[arg(long, default_value_t = 0.05)]
    pub pole_guard: f64,

    /// Tolerance overrides `id=value`, comma-separated or repeated.
    #[arg(long = "tolerance", value_delimiter = ',', value_parser = parse_override)]
    pub tolerance: Vec<(String, f64)>,

    #[arg(long, short)]
    pub output: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

impl CheckArgs {
    pub fn overrides(&self) -> BTreeMap<String, f64> {
        self.tolerance.iter().cloned().collect()
    }
}

#[derive(Debug, Args)]
pub struct PviArgs {
    #[arg(long = "n", default_value_t = 1)]
    pub n: usize,

    /// The four constants ν₀..ν₃.
    #[arg(long, value_delimiter = ',', value_parser = parse_complex, default_values = ["0.1", "0.2", "0.3", "0.4"])]
    pub nu: Vec<Complex64>,

    #[arg(long, value_parser = parse_complex, default_value = "0.31+0.126i", allow_hyphen_values = true)]
    pub u0: Complex64,

    #[arg(long, value_parser = parse_complex, default_value = "0.05", allow_hyphen_values = true)]
    pub v0: Complex64,

    #[arg(long, value_parser = parse_complex, default_value = "0.9i")]
    pub tau0: Complex64,

    #[arg(long, value_parser = parse_complex, default_value = "1.2i")]
    pub tau1: Complex64,

    /// Spectral parameters at which the residual is monitored.
    #[arg(long, value_delimiter = ',', value_parser = parse_complex, default_values = ["0.17+0.11i", "0.31", "0.23i"])]
    pub hbar: Vec<Complex64>,

    /// Pass threshold for the maximal residual.
    #[arg(long, default_value_t = 1e-7)]
    pub threshold: f64,

    #[arg(long, default_value_t = 1e-11)]
    pub rtol: f64,

    #[arg(long, default_value_t = 1e-13)]
    pub atol: f64,

    #[arg(long, default_value_t = 0.01)]
    pub max_step: f64,

    /// Uniform step in the path parameter, disabling error control.
    #[arg(long)]
    pub fixed_step: Option<f64>,

    #[arg(long, default_value_t = 0.05)]
    pub pole_guard: f64,

    /// Trajectory CSV path (default: stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long, value_parser = parse_complex, default_value = "0.8i")]
    pub tau: Complex64,

    /// Second argument of φ.
    #[arg(long, value_parser = parse_complex, default_value = "0.3", allow_hyphen_values = true)]
    pub u: Complex64,

    /// Single point instead of a grid.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, conflicts_with = "grid")]
    pub z: Option<Complex64>,

    /// Grid `AxB` over the fundamental cell, z = j/A + k·τ/B.
    #[arg(long, value_parser = parse_grid, default_value = "10x10")]
    pub grid: (usize, usize),

    /// Rows whose z or u lies closer than this to the lattice are flagged.
    #[arg(long, default_value_t = 1e-8)]
    pub pole_eps: f64,

    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ListArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// Parses `a`, `bi`, `a+bi`, `a-bi` (also with `j`), allowing exponents.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot parse `{s}` as a complex number");
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix('i').or_else(|| t.strip_suffix('j')) else {
        return t
            .parse::<f64>()
            .map(|re| Complex64::new(re, 0.0))
            .map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("", body),
    };
    let re = if re.is_empty() {
        0.0
    } else {
        re.parse::<f64>().map_err(|_| bad())?
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => x.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(Complex64::new(re, im))
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (id, v) = s
        .split_once('=')
        .ok_or_else(|| format!("tolerance override `{s}` must look like id=value"))?;
    let v: f64 = v.parse().map_err(|_| format!("bad tolerance value in `{s}`"))?;
    if !(v > 0.0) {
        return Err(format!("tolerance in `{s}` must be positive"));
    }
    Ok((id.to_string(), v))
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid `{s}` must look like 10x10"))?;
    let a: usize = a.parse().map_err(|_| format!("bad grid `{s}`"))?;
    let b: usize = b.parse().map_err(|_| format!("bad grid `{s}`"))?;
    if a == 0 || b == 0 {
        return Err("grid sizes must be positive".into());
    }
    Ok((a, b))
}
