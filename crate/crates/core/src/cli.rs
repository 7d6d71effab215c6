//! Command-line front end.
//!
//! Exit codes: `0` success, `2` bad input (parse errors, invalid flags or
//! values), `3` degenerate data, `4` numerical failure.
//!
//! JSON results embed a [`RunManifest`]. CSV results written to a file get a
//! `<file>.manifest.json` sidecar. Set `FINPOP_THREADS` to cap the worker pool.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::edge::{edge_params, LimitingCdf, PopulationShape, DEFAULT_ETA};
use crate::eig::eigs_sym;
use crate::error::{Error, Result};
use crate::matrix::{scov, spatial_sign, spearman, DataMatrix};
use crate::pa::{self, PaConfig, PaMethod, PaVariant};
use crate::sampling::parse_seed;
use crate::tw::{sha256_hex, TW1Table};

pub const THREADS_ENV: &str = "FINPOP_THREADS";

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_DEGENERATE: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "finpop", version, about = "Edge laws and parallel analysis for finite-population covariance matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select the number of factors by parallel analysis.
    Pa(PaArgs),
    /// Percentiles of the permuted null next to Tracy-Widom quantiles.
    SimulateNull(NullArgs),
    /// Right-edge constants of the limiting spectral law.
    Edge(EdgeArgs),
    /// Tracy-Widom (beta = 1) distribution queries.
    Tw(TwArgs),
    /// Eigenvalues of a covariance-type matrix built from data.
    Spectrum(SpectrumArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Mc,
    Tw,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Raw,
    B1,
    B2,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV file, one variable per row unless --transpose.
    pub input: PathBuf,
    /// Treat columns as variables.
    #[arg(long)]
    pub transpose: bool,
}

#[derive(Debug, Args)]
pub struct PaArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "mc")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "b2")]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 0.95)]
    pub percentile: f64,
    #[arg(long, default_value_t = 1000)]
    pub perms: usize,
    /// Largest number of factors examined (default: min(p, n, 20)).
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Decimal or 0x-prefixed hexadecimal.
    #[arg(long, default_value = "0", value_parser = seed_arg)]
    pub seed: u64,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the evaluated steps as CSV.
    #[arg(long)]
    pub scree: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NullArgs {
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub perms: usize,
    #[arg(long, default_value = "0", value_parser = seed_arg)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.5,0.95")]
    pub percentiles: Vec<f64>,
    /// Write the CSV table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the JSON table with its manifest.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EdgeArgs {
    /// Population spectrum, one positive value per line (or comma separated).
    #[arg(long, conflicts_with = "identity", required_unless_present = "identity")]
    pub tvals: Option<PathBuf>,
    /// Use T = I.
    #[arg(long)]
    pub identity: bool,
    /// Ratio p/n.
    #[arg(long)]
    pub c: f64,
    /// Sampling fraction n/N.
    #[arg(long, default_value_t = 1.0)]
    pub y: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct TwArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub quantile: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub cdf: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub pvalue: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixArg {
    Scov,
    SpatialSign,
    Spearman,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "scov")]
    pub matrix: MatrixArg,
    /// Write the limiting density curve (x, density, cdf) here.
    #[arg(long)]
    pub density_overlay: Option<PathBuf>,
    /// Grid points of the density curve.
    #[arg(long, default_value_t = 2000)]
    pub overlay_points: usize,
    /// Write eigenvalues here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the run manifest here (defaults to a sidecar of --out).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn seed_arg(s: &str) -> std::result::Result<u64, String> {
    parse_seed(s).map_err(|e| e.to_string())
}

/// Provenance attached to every result.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub version: String,
    pub duration_seconds: f64,
    pub input_sha256: Option<String>,
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Value>,
}

impl RunManifest {
    fn new(command: &str, config: Value, seed: Option<u64>, input_sha256: Option<String>, start: Instant) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_seconds: start.elapsed().as_secs_f64(),
            input_sha256,
            threads: rayon::current_num_threads(),
            diagnostics: None,
        }
    }
}

/// Maps an error to its exit code.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::DegenerateInput(_) | Error::DegenerateRows { .. } => EXIT_DEGENERATE,
        Error::Numerical { .. } => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

/// Parses a numeric CSV into a matrix. A first row that does not parse as
/// numbers is taken as a header. Line and column numbers in errors are 1-based.
pub fn parse_csv(text: &str, transpose: bool) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(idx + 1, |p| p.line() as usize);
            Error::Parse {
                line,
                column: 1,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        let parsed: Vec<std::result::Result<f64, String>> = record
            .iter()
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(format!("non-finite value {v}")),
                Err(_) => Err(format!("not a number: {f:?}")),
            })
            .collect();
        let textual = record.iter().any(|f| f.parse::<f64>().is_err());
        if rows.is_empty() && width.is_none() && textual {
            width = Some(record.len());
            continue;
        }
        let mut row = Vec::with_capacity(parsed.len());
        for (col, value) in parsed.into_iter().enumerate() {
            row.push(value.map_err(|message| Error::Parse {
                line,
                column: col + 1,
                message,
            })?);
        }
        match width {
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    line,
                    column: row.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", row.len()),
                })
            }
            _ => width = Some(row.len()),
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "no numeric rows".into(),
        });
    }
    let m = DataMatrix::from_rows(&rows)?;
    Ok(if transpose { m.transpose() } else { m })
}

fn read_input(args: &InputArgs) -> Result<(DataMatrix, String)> {
    let bytes = fs::read(&args.input)
        .map_err(|e| Error::Io(format!("{}: {e}", args.input.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| Error::Parse {
            line: 1,
            column: 1,
            message: format!("input is not UTF-8: {e}"),
        })?;
    Ok((parse_csv(&text, args.transpose)?, sha256_hex(&bytes)))
}

fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn cmd_pa(args: &PaArgs) -> Result<()> {
    let start = Instant::now();
    let (b, checksum) = read_input(&args.input)?;
    let cfg = PaConfig {
        method: match args.method {
            MethodArg::Mc => PaMethod::MonteCarlo,
            MethodArg::Tw => PaMethod::TwDirect,
        },
        variant: match args.variant {
            VariantArg::Raw => PaVariant::Raw,
            VariantArg::B1 => PaVariant::CenteredB1,
            VariantArg::B2 => PaVariant::StandardizedB2,
        },
        percentile: args.percentile,
        num_permutations: args.perms,
        max_factors: args.kmax.unwrap_or_else(|| b.rows().min(b.cols()).min(20)),
        seed: args.seed,
    };
    let result = pa::run(&b, &cfg)?;
    if let Some(path) = &args.scree {
        let mut csv = String::from("factor_index,observed_eigenvalue,threshold,selected\n");
        for s in &result.steps {
            csv.push_str(&format!("{},{},{},{}\n", s.factor_index, s.observed_eigenvalue, s.threshold, s.selected));
        }
        write_output(Some(path), &csv)?;
    }
    let manifest = RunManifest::new(
        "pa",
        serde_json::to_value(&cfg).expect("serializable"),
        Some(cfg.seed),
        Some(checksum),
        start,
    );
    write_output(args.out.as_deref(), &to_json(&json!({ "result": result, "manifest": manifest })))
}

/// CSV rendering of a null table; deterministic given the inputs.
pub fn null_table_csv(t: &pa::NullTable) -> String {
    let mut csv = String::from("percentile,empirical,tw\n");
    for r in &t.rows {
        csv.push_str(&format!("{},{:.6},{:.6}\n", r.percentile, r.empirical, r.tw));
    }
    csv
}

fn cmd_simulate_null(args: &NullArgs) -> Result<()> {
    let start = Instant::now();
    let table = pa::null_percentile_table(args.p, args.n, &args.percentiles, args.perms, args.seed)?;
    let config = json!({
        "p": args.p,
        "n": args.n,
        "perms": args.perms,
        "percentiles": args.percentiles,
    });
    let manifest = RunManifest::new("simulate-null", config, Some(args.seed), None, start);
    write_output(args.out.as_deref(), &null_table_csv(&table))?;
    if let Some(path) = &args.out {
        write_output(Some(&sidecar(path)), &to_json(&manifest))?;
    }
    if let Some(path) = &args.json {
        write_output(Some(path), &to_json(&json!({ "table": table, "manifest": manifest })))?;
    }
    Ok(())
}

/// Positive values separated by newlines, commas or whitespace.
pub fn parse_tvals(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for (col, field) in line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .enumerate()
        {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                column: col + 1,
                message: format!("not a number: {field:?}"),
            })?;
            out.push(v);
        }
    }
    Ok(out)
}

fn cmd_edge(args: &EdgeArgs) -> Result<()> {
    let start = Instant::now();
    let (tvals, checksum) = match &args.tvals {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            (parse_tvals(&String::from_utf8_lossy(&bytes))?, Some(sha256_hex(&bytes)))
        }
        None => (vec![1.0], None),
    };
    let shape = PopulationShape::new(tvals, args.c, args.y)?;
    let ep = edge_params(&shape);
    let config = json!({ "identity": args.identity, "c": args.c, "y": args.y, "p_atoms": shape.tvals().len() });
    let manifest = RunManifest::new("edge", config, None, checksum, start);
    write_output(args.out.as_deref(), &to_json(&json!({ "edge": ep, "manifest": manifest })))
}

fn cmd_tw(args: &TwArgs) -> Result<()> {
    let table = TW1Table::embedded();
    let value = if let Some(q) = args.quantile {
        table.quantile(q)?
    } else if let Some(s) = args.cdf {
        table.cdf(s)
    } else if let Some(s) = args.pvalue {
        table.pvalue(s)
    } else {
        unreachable!("clap enforces one query")
    };
    write_output(None, &format!("{value}\n"))
}

fn cmd_spectrum(args: &SpectrumArgs) -> Result<()> {
    let start = Instant::now();
    let (y, checksum) = read_input(&args.input)?;
    let (p, n) = (y.rows(), y.cols());
    let matrix = match args.matrix {
        MatrixArg::Scov => scov(&y, n)?,
        MatrixArg::SpatialSign => spatial_sign(&y)?,
        MatrixArg::Spearman => spearman(&y)?,
    };
    let spectrum = eigs_sym(&matrix)?;
    let mut csv = String::from("index,eigenvalue\n");
    for (i, v) in spectrum.values().iter().enumerate() {
        csv.push_str(&format!("{},{v}\n", i + 1));
    }

    let mut diagnostics = None;
    if let Some(path) = &args.density_overlay {
        // normalized matrices have T = I; scov uses the row mean squares
        let tvals = match args.matrix {
            MatrixArg::Scov => matrix.diagonal(),
            _ => vec![1.0],
        };
        let shape = PopulationShape::new(tvals, p as f64 / n as f64, 1.0).map_err(|e| match e {
            Error::InvalidInput(m) => Error::DegenerateInput(m),
            other => other,
        })?;
        let law = LimitingCdf::new(&shape, args.overlay_points, DEFAULT_ETA)?;
        let mut curve = String::from("x,density,cdf\n");
        for (x, d, f) in law.grid() {
            curve.push_str(&format!("{x},{d},{f}\n"));
        }
        write_output(Some(path), &curve)?;
        diagnostics = Some(json!({
            "ks_distance": law.ks_distance(&spectrum),
            "limit_total_mass": law.total_mass(),
        }));
    }

    write_output(args.out.as_deref(), &csv)?;
    let manifest_path = args.manifest.clone().or_else(|| args.out.as_deref().map(sidecar));
    if let Some(path) = manifest_path {
        let config = json!({
            "matrix": args.matrix,
            "transpose": args.input.transpose,
            "p": p,
            "n": n,
            "density_overlay": args.density_overlay.is_some(),
        });
        let mut manifest = RunManifest::new("spectrum", config, None, Some(checksum), start);
        manifest.diagnostics = diagnostics;
        write_output(Some(&path), &to_json(&manifest))?;
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let threads: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        // a pool that already exists keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Pa(a) => cmd_pa(a),
        Command::SimulateNull(a) => cmd_simulate_null(a),
        Command::Edge(a) => cmd_edge(a),
        Command::Tw(a) => cmd_tw(a),
        Command::Spectrum(a) => cmd_spectrum(a),
    }
}

/// Entry point for the binary: parses `std::env::args`, reports errors on stderr.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
