//! Command-line selected inversion.
//!
//! `selinv invert` runs the pipeline and writes the selected entries of the
//! inverse plus a JSON report; `selinv check` additionally compares against
//! the dense oracle; `selinv trace` runs the worker engine and dumps the
//! message trace with a concurrency summary.
//!
//! Exit codes: 0 success, 1 accuracy failure, 2 usage or I/O error,
//! 3 numeric breakdown.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{ArgAction, Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use selinv::error::Error;
use selinv::factor::factorize;
use selinv::inverse::SelectedInverse;
use selinv::ordering::load_permutation;
use selinv::parallel::{
    build_schedule, distribute_factor, parallel_selected_inversion, EngineMode, EngineParams,
    ProcessorGrid, RunTrace,
};
use selinv::pipeline::{self, OrderingChoice, RunParams, RunReport};
use selinv::scalar::Scalar;
use selinv::sparse::{
    build_shifted, coord_to_csc, read_matrix_market, write_matrix_market, CscMatrix,
};
use selinv::symbolic::AnalyzeParams;
use selinv::verify::{
    compare_selected, dense_inverse_oracle, laplacian2d, random_spd, shifted_indefinite,
};

#[derive(Parser)]
#[command(name = "selinv", version, about = "Selected inversion of sparse symmetric matrices")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Factor a matrix and compute the selected entries of its inverse.
    Invert(RunArgs),
    /// Run the pipeline and compare against the dense inverse oracle.
    Check(CheckArgs),
    /// Run the worker engine and write its message trace.
    Trace(RunArgs),
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Input matrix (matrix market coordinate file for H).
    #[arg(long = "in", value_name = "PATH")]
    input: Option<PathBuf>,
    /// Overlap matrix S; identity when absent.
    #[arg(long = "S", value_name = "PATH")]
    s: Option<PathBuf>,
    /// Complex shift z as `re,im`; the pipeline runs on A = H - z S.
    #[arg(long, value_name = "RE,IM")]
    shift: Option<String>,
    /// Ordering: `mindeg`, `natural` or `file:<path>`.
    #[arg(long, value_name = "KIND")]
    order: Option<String>,
    /// Supernode relaxation: column cap.
    #[arg(long, value_name = "N")]
    relax_max_cols: Option<usize>,
    /// Supernode relaxation: padding ratio bound (0 = strict).
    #[arg(long, value_name = "R")]
    relax_fill_ratio: Option<f64>,
    /// Worker grid `PrxPc`; `1x1` is the sequential reference path.
    #[arg(long, value_name = "PRxPC")]
    grid: Option<String>,
    /// Fix reduction orders for bitwise-reproducible parallel results.
    #[arg(long, action = ArgAction::SetTrue)]
    deterministic: Option<bool>,
    /// Write the selected inverse as a matrix market file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write the JSON run report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Write the engine message trace here (trace subcommand).
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    /// Built-in generator instead of --in: `laplacian2d`, `random_spd`,
    /// `shifted_indefinite`.
    #[arg(long, value_name = "NAME")]
    gen: Option<String>,
    /// Generator size (grid side for laplacian2d, dimension otherwise).
    #[arg(long, value_name = "N")]
    n: Option<usize>,
    /// Generator density.
    #[arg(long, value_name = "D")]
    density: Option<f64>,
    /// Generator seed.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// JSON file with the full run configuration; exclusive with the other
    /// flags.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct CheckArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Corrupt one inverse entry before comparing (negative control).
    #[arg(long, hide = true, action = ArgAction::SetTrue)]
    corrupt: bool,
}

/// The `--config` JSON schema: same fields as the flags.
#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(rename = "in")]
    input: Option<PathBuf>,
    #[serde(rename = "S")]
    s: Option<PathBuf>,
    shift: Option<String>,
    order: Option<String>,
    relax_max_cols: Option<usize>,
    relax_fill_ratio: Option<f64>,
    grid: Option<String>,
    deterministic: Option<bool>,
    out: Option<PathBuf>,
    report: Option<PathBuf>,
    trace: Option<PathBuf>,
    gen: Option<String>,
    n: Option<usize>,
    density: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug)]
struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::PivotBreakdown { .. } => 3,
            Error::Pole { source, .. } => match **source {
                Error::PivotBreakdown { .. } => 3,
                _ => 2,
            },
            _ => 2,
        };
        CliError {
            message: e.to_string(),
            code,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Invert(args) => cmd_invert(args),
        Cmd::Check(args) => cmd_check(args),
        Cmd::Trace(args) => cmd_trace(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn merge_config(args: RunArgs) -> CliResult<RunArgs> {
    let Some(path) = args.config.clone() else {
        return Ok(args);
    };
    let explicit = args.input.is_some()
        || args.s.is_some()
        || args.shift.is_some()
        || args.order.is_some()
        || args.relax_max_cols.is_some()
        || args.relax_fill_ratio.is_some()
        || args.grid.is_some()
        || args.deterministic.is_some()
        || args.out.is_some()
        || args.report.is_some()
        || args.trace.is_some()
        || args.gen.is_some()
        || args.n.is_some()
        || args.density.is_some()
        || args.seed.is_some();
    if explicit {
        return Err(CliError::usage(
            "--config is exclusive: move the other flags into the JSON file",
        ));
    }
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: ConfigFile = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("bad config {}: {e}", path.display())))?;
    Ok(RunArgs {
        input: cfg.input,
        s: cfg.s,
        shift: cfg.shift,
        order: cfg.order,
        relax_max_cols: cfg.relax_max_cols,
        relax_fill_ratio: cfg.relax_fill_ratio,
        grid: cfg.grid,
        deterministic: cfg.deterministic,
        out: cfg.out,
        report: cfg.report,
        trace: cfg.trace,
        gen: cfg.gen,
        n: cfg.n,
        density: cfg.density,
        seed: cfg.seed,
        config: None,
    })
}

fn parse_shift(s: &str) -> CliResult<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::usage(format!("--shift expects `re,im`, got `{s}`")));
    }
    let re = parts[0]
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("bad shift real part `{}`", parts[0])))?;
    let im = parts[1]
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("bad shift imaginary part `{}`", parts[1])))?;
    Ok((re, im))
}

fn parse_grid(s: &str) -> CliResult<(usize, usize)> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    if parts.len() != 2 {
        return Err(CliError::usage(format!("--grid expects `PrxPc`, got `{s}`")));
    }
    let pr = parts[0]
        .parse()
        .map_err(|_| CliError::usage(format!("bad grid rows `{}`", parts[0])))?;
    let pc = parts[1]
        .parse()
        .map_err(|_| CliError::usage(format!("bad grid cols `{}`", parts[1])))?;
    if pr < 1 || pc < 1 {
        return Err(CliError::usage("grid dimensions must be positive"));
    }
    Ok((pr, pc))
}

fn parse_order(s: &str) -> CliResult<OrderingChoice> {
    match s {
        "mindeg" => Ok(OrderingChoice::MinimumDegree),
        "natural" => Ok(OrderingChoice::Natural),
        other => {
            if let Some(path) = other.strip_prefix("file:") {
                let p = load_permutation(path)?;
                Ok(OrderingChoice::Given(p))
            } else {
                Err(CliError::usage(format!(
                    "--order must be mindeg, natural or file:<path>, got `{other}`"
                )))
            }
        }
    }
}

/// The assembled problem: `A = H - z S` in real or complex arithmetic.
enum Problem {
    Real(CscMatrix<f64>),
    Complex(CscMatrix<Complex64>),
}

fn assemble_problem(args: &RunArgs) -> CliResult<Problem> {
    let shift = args.shift.as_deref().map(parse_shift).transpose()?;
    if let Some(gen) = &args.gen {
        if args.input.is_some() {
            return Err(CliError::usage("--gen and --in are exclusive"));
        }
        let n = args.n.unwrap_or(8);
        let density = args.density.unwrap_or(0.3);
        let seed = args.seed.unwrap_or(0);
        return match gen.as_str() {
            "laplacian2d" => Ok(Problem::Real(laplacian2d(n))),
            "random_spd" => Ok(Problem::Real(random_spd(n, density, seed))),
            "shifted_indefinite" => {
                let (re, im) = shift.unwrap_or((0.0, 1e-3));
                Ok(Problem::Complex(shifted_indefinite(
                    n,
                    density,
                    Complex64::new(re, im),
                    seed,
                )))
            }
            other => Err(CliError::usage(format!("unknown generator `{other}`"))),
        };
    }
    let Some(input) = &args.input else {
        return Err(CliError::usage("either --in or --gen is required"));
    };
    // sniff the banner to pick the arithmetic
    let complex_input = {
        let text = fs::read_to_string(input).map_err(|e| CliError {
            message: format!("cannot read {}: {e}", input.display()),
            code: 2,
        })?;
        text.lines()
            .next()
            .map(|l| l.to_lowercase().contains("complex"))
            .unwrap_or(false)
    };
    let complex_shift = shift.map(|(_, im)| im != 0.0).unwrap_or(false);
    if complex_input || complex_shift {
        let h = coord_to_csc(&read_matrix_market::<Complex64>(input)?.0);
        let s = match &args.s {
            Some(p) => Some(coord_to_csc(&read_matrix_market::<Complex64>(p)?.0)),
            None => None,
        };
        let a = match shift {
            Some((re, im)) => build_shifted(&h, s.as_ref(), Complex64::new(re, im))?,
            None => h,
        };
        Ok(Problem::Complex(a))
    } else {
        let h = coord_to_csc(&read_matrix_market::<f64>(input)?.0);
        let s = match &args.s {
            Some(p) => Some(coord_to_csc(&read_matrix_market::<f64>(p)?.0)),
            None => None,
        };
        let a = match shift {
            Some((re, _)) => build_shifted(&h, s.as_ref(), re)?,
            None => h,
        };
        Ok(Problem::Real(a))
    }
}

fn run_params(args: &RunArgs) -> CliResult<RunParams> {
    let grid = parse_grid(args.grid.as_deref().unwrap_or("1x1"))?;
    let order = parse_order(args.order.as_deref().unwrap_or("mindeg"))?;
    let defaults = AnalyzeParams::default();
    Ok(RunParams {
        ordering: order,
        analyze: AnalyzeParams {
            relax_max_cols: args.relax_max_cols.unwrap_or(defaults.relax_max_cols),
            relax_fill_ratio: args.relax_fill_ratio.unwrap_or(defaults.relax_fill_ratio),
        },
        factor: Default::default(),
        grid,
        mode: if args.deterministic.unwrap_or(false) {
            EngineMode::Deterministic
        } else {
            EngineMode::Fast
        },
        timeout: Duration::from_secs(30),
    })
}

fn emit_artifacts<T: Scalar>(
    args: &RunArgs,
    a: &CscMatrix<T>,
    out: &pipeline::RunOutput<T>,
) -> CliResult<()> {
    if let Some(path) = &args.out {
        write_matrix_market(&out.inverse.to_lower_csc(), path)?;
    }
    let report = RunReport::new(out, a)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match &args.report {
        Some(path) => fs::write(path, json.as_bytes()).map_err(|e| CliError {
            message: format!("cannot write report {}: {e}", path.display()),
            code: 2,
        })?,
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_invert(args: RunArgs) -> CliResult<u8> {
    let args = merge_config(args)?;
    let params = run_params(&args)?;
    match assemble_problem(&args)? {
        Problem::Real(a) => {
            let out = pipeline::run(&a, &params)?;
            emit_artifacts(&args, &a, &out)?;
        }
        Problem::Complex(a) => {
            let out = pipeline::run(&a, &params)?;
            emit_artifacts(&args, &a, &out)?;
        }
    }
    Ok(0)
}

fn check_one<T: Scalar>(
    args: &RunArgs,
    a: &CscMatrix<T>,
    params: &RunParams,
    corrupt: bool,
    col_tol: f64,
) -> CliResult<u8> {
    if a.n > 256 {
        return Err(CliError::usage(format!(
            "dense oracle refused for n = {} > 256",
            a.n
        )));
    }
    let out = pipeline::run(a, params)?;
    let mut inverse: SelectedInverse<T> = out.inverse.clone();
    if corrupt {
        // negative control: taint one diagonal entry
        inverse.supernodes[0].diag[0] *= T::from_re(1.0 + 1e-3);
    }
    let dense_ref = dense_inverse_oracle(&a.to_dense(), a.n)?;
    let rep = compare_selected(&inverse, &dense_ref, a.n);
    let e = inverse.accuracy_metric(&selinv::sparse::to_symmetric_lower(a))?;
    println!(
        "comparison: max column-wise relative error {:.3e}, max entrywise {:.3e}, entries {}",
        rep.max_col_relative, rep.max_entry_relative, rep.entries_compared
    );
    println!("E(z) = {e:.3e}");
    let pass = rep.max_col_relative <= col_tol && e <= 1e-10;
    if pass {
        println!("check: PASS (column tolerance {col_tol:.1e}, E tolerance 1.0e-10)");
        emit_artifacts(args, a, &out)?;
        Ok(0)
    } else {
        println!("check: FAIL (column tolerance {col_tol:.1e}, E tolerance 1.0e-10)");
        Ok(1)
    }
}

fn cmd_check(args: CheckArgs) -> CliResult<u8> {
    let run = merge_config(args.run)?;
    let params = run_params(&run)?;
    match assemble_problem(&run)? {
        Problem::Real(a) => check_one(&run, &a, &params, args.corrupt, 1e-10),
        Problem::Complex(a) => check_one(&run, &a, &params, args.corrupt, 1e-8),
    }
}

fn trace_one<T: Scalar>(args: &RunArgs, a: &CscMatrix<T>, params: &RunParams) -> CliResult<u8> {
    // always run the worker engine, even on a 1x1 grid, so a trace exists
    let prep = pipeline::prepare(a, params)?;
    let lower = selinv::sparse::to_symmetric_lower(a);
    let permuted = selinv::ordering::apply_symmetric_permutation(&lower, &prep.permutation)?;
    let factor = factorize(&permuted, &prep.symbolic, params.factor)?;
    let grid = ProcessorGrid::new(params.grid.0, params.grid.1)?;
    let schedule = Arc::new(build_schedule(
        &prep.symbolic.etree,
        &grid,
        &prep.symbolic.blocks,
    ));
    let stores = distribute_factor(&factor, &grid)?;
    let (_, trace): (SelectedInverse<T>, RunTrace) = parallel_selected_inversion(
        stores,
        &prep.symbolic,
        &schedule,
        &grid,
        EngineParams {
            mode: params.mode,
            timeout: params.timeout,
            collect_events: true,
        },
    )?;
    let lines = trace.format_lines();
    match &args.trace {
        Some(path) => fs::write(path, lines.as_bytes()).map_err(|e| CliError {
            message: format!("cannot write trace {}: {e}", path.display()),
            code: 2,
        })?,
        None => print!("{lines}"),
    }
    println!("levels (n_s) = {}", schedule.n_levels);
    for (level, count) in trace.level_summary(&schedule) {
        println!("level {level}: {count} supernode(s)");
    }
    println!(
        "overlapping same-level pairs = {}",
        trace.overlapping_same_level_pairs(&schedule)
    );
    println!("inter-rank events = {}", trace.inter_rank_count());
    Ok(0)
}

fn cmd_trace(args: RunArgs) -> CliResult<u8> {
    let args = merge_config(args)?;
    let params = run_params(&args)?;
    match assemble_problem(&args)? {
        Problem::Real(a) => trace_one(&args, &a, &params),
        Problem::Complex(a) => trace_one(&args, &a, &params),
    }
}
