//! Command-line front end.
//!
//! Exit codes: 0 success, 1 malformed input or failed evaluation, 2 shape
//! mismatch between inputs, 3 oracle disagreement.

pub mod files;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::network::{build_joint, JointModel, RelayNetworkSpec};
use crate::optimize::{self, Family, Objective, OptimizerConfig, SweepMode, SweepRow};
use crate::oracle;
use crate::rate::{self, full_report, RateReport, SubsetId};
use files::{to_json, DistributionFile, NetworkFile, OptimizationSummary, OracleCheck, ReportFile};

/// Largest engine/oracle discrepancy accepted by `eval --oracle`.
pub const ORACLE_TOL: f64 = 1e-7;

/// Environment variable supplying the default optimizer seed.
pub const SEED_ENV: &str = "CFRELAY_SEED";

/// CSV header written by `sweep`.
pub const SWEEP_HEADER: &str =
    "param,classical_rate,classical_feasible,thm1_rate,thm2_rate,thm3_rate,thm3_status";

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid input, or a failed evaluation.
    Malformed(String),
    /// Inputs whose shapes do not fit together.
    Shape(String),
    /// `--oracle` found a discrepancy.
    Oracle(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Malformed(_) => 1,
            CliError::Shape(_) => 2,
            CliError::Oracle(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Malformed(m) | CliError::Shape(m) | CliError::Oracle(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::ShapeMismatch { .. } | Error::RateVectorLength { .. } | Error::SubsetOutOfRange { .. } => {
                CliError::Shape(e.to_string())
            }
            _ => CliError::Malformed(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "cfrelay", version, about = "Compress-and-forward relay rate evaluator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every rate for a network and a coding distribution.
    Eval(EvalArgs),
    /// Search coding distributions maximizing one rate.
    Optimize(OptimizeArgs),
    /// Tabulate rates over a built-in network family.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Network file (JSON).
    pub network: PathBuf,
    /// Distribution file (JSON).
    pub distribution: PathBuf,
    /// Relay subsets whose compressed observations should be decoded, as
    /// bitmasks (bit i-1 = relay i), e.g. `3` or `0b11`. Repeatable.
    #[arg(long = "decode-set", value_parser = parse_mask)]
    pub decode_sets: Vec<SubsetId>,
    /// Cross-check against the reference oracles; exit 3 on disagreement.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Network file (JSON).
    pub network: PathBuf,
    #[arg(long, value_parser = parse_objective, default_value = "thm2")]
    pub objective: Objective,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub fd_step: f64,
    /// Exhaustive grid search with this many points per simplex axis.
    #[arg(long)]
    pub grid_steps: Option<usize>,
    /// Directory receiving `distribution.json` and `report.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Built-in family: `bsc` or `orthogonal-relay`.
    #[arg(long)]
    pub family: String,
    /// Explicit comma-separated parameter values.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["from", "to", "points"])]
    pub params: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub from: f64,
    #[arg(long, default_value_t = 0.5)]
    pub to: f64,
    #[arg(long, default_value_t = 11)]
    pub points: usize,
    /// Evaluate at uniform distributions instead of optimizing.
    #[arg(long)]
    pub fixed: bool,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub max_iterations: usize,
    /// CSV destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_mask(s: &str) -> std::result::Result<SubsetId, String> {
    let parsed = match s.strip_prefix("0b") {
        Some(bits) => u32::from_str_radix(bits, 2),
        None => s.parse::<u32>(),
    };
    parsed.map(SubsetId).map_err(|e| format!("invalid subset mask '{s}': {e}"))
}

fn parse_objective(s: &str) -> std::result::Result<Objective, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `args` (including the program name) and runs the command,
/// writing results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Optimize(a) => cmd_optimize(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))
}

fn parse_json<T: for<'de> serde::Deserialize<'de>>(bytes: &[u8], path: &Path) -> CliResult<T> {
    serde_json::from_slice(bytes).map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Malformed(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Malformed(format!("writing output: {e}")))
}

fn load_network(path: &Path) -> CliResult<(RelayNetworkSpec, Vec<u8>)> {
    let bytes = read(path)?;
    let file: NetworkFile = parse_json(&bytes, path)?;
    Ok((file.to_spec()?, bytes))
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let (spec, net_bytes) = load_network(&args.network)?;
    let dist_bytes = read(&args.distribution)?;
    let dist_file: DistributionFile = parse_json(&dist_bytes, &args.distribution)?;
    let model = build_joint(&spec, &dist_file.to_distribution())?;
    let report = full_report(&model, &args.decode_sets)?;

    let mut file = ReportFile::new(report, &net_bytes, &dist_bytes);
    let mut failed = Vec::new();
    if args.oracle {
        let checks = oracle_checks(&model, &file.report)?;
        failed = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} (discrepancy {:.3e})", c.name, c.discrepancy))
            .collect();
        file.oracle = Some(checks);
    }
    let text = match args.format {
        Format::Json => to_json(&file)?,
        Format::Text => render_text(&file),
    };
    emit(out, &text)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Oracle(format!("oracle disagreement: {}", failed.join("; "))))
    }
}

/// Recomputes the report's quantities with the reference oracles.
pub fn oracle_checks(model: &JointModel, report: &RateReport) -> CliResult<Vec<OracleCheck>> {
    let mut checks = Vec::new();
    let mut push = |name: &str, discrepancy: f64, tolerance: f64| {
        checks.push(OracleCheck {
            name: name.to_string(),
            discrepancy,
            tolerance,
            passed: discrepancy <= tolerance,
        });
    };
    let max_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    let tables = &report.subset_functions;
    let (f, g, h) = oracle::subset_functions_direct(model)?;
    push("subset function f", max_diff(&tables.f.0, &f), ORACLE_TOL);
    push("subset function g", max_diff(&tables.g.0, &g), ORACLE_TOL);
    push("subset function h", max_diff(&tables.h.0, &h), ORACLE_TOL);

    let j = model.joint();
    let ixy = oracle::mi_direct(j, &[model.x()], &[model.y()], &[])?;
    push("I(X;Y)", (report.measures.i_x_y - ixy).abs(), ORACLE_TOL);

    if let (Some(m), Some(t1)) = (report.measures.single_relay, report.thm1) {
        let (x, y, x1, y1, yh) = (model.x(), model.y(), model.x_i(1), model.y_i(1), model.yhat_i(1));
        let i_x1_y = oracle::mi_direct(j, &[x1], &[y], &[])?;
        let i_comp = oracle::mi_direct(j, &[y1], &[yh], &[x1, y])?;
        let i_rate = oracle::mi_direct(j, &[x], &[yh, y], &[x1])?;
        push("I(X1;Y)", (m.i_x1_y - i_x1_y).abs(), ORACLE_TOL);
        let thm1 = (i_rate - (i_comp - i_x1_y).max(0.0)).max(0.0);
        push("single-relay joint-decoding rate", (t1.rate - thm1).abs(), ORACLE_TOL);
    }

    let direct = rate::SubsetFunctions {
        n: tables.n,
        f: rate::SubsetFunction(f),
        g: rate::SubsetFunction(g),
        h: rate::SubsetFunction(h),
    };
    if let Ok(v) = oracle::lp_vertex_oracle(&rate::thm2_program(&direct, None)) {
        let value = v.value.map(|t| t.max(0.0)).unwrap_or(f64::INFINITY);
        push("multi-relay rate (vertex oracle)", (report.thm2.rate - value).abs(), ORACLE_TOL);
    }
    if let Ok(v) = oracle::lp_vertex_oracle(&rate::thm3_program(&direct)) {
        let value = v.value.map(|t| t.max(0.0)).unwrap_or(0.0);
        push("joint-decoding rate (vertex oracle)", (report.thm3.rate - value).abs(), ORACLE_TOL);
    }
    if model.relays() <= 2 {
        const STEPS: usize = 100;
        let brute = oracle::thm2_bruteforce(model, STEPS)?;
        let resolution: f64 = (1..=model.relays())
            .map(|i| direct.g[SubsetId::singleton(i)].max(0.0) / STEPS as f64)
            .sum();
        // Grid value must lie in [rate − resolution, rate].
        let gap = report.thm2.rate - brute;
        let excess = if gap < 0.0 { -gap } else { (gap - resolution).max(0.0) };
        push("multi-relay rate (grid oracle bracket)", excess, ORACLE_TOL);
    }
    Ok(checks)
}

fn fmt_rate(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_set(s: SubsetId) -> String {
    let members: Vec<String> = s.members().map(|i| i.to_string()).collect();
    format!("{{{}}}", members.join(","))
}

fn fmt_vector(r: &rate::RateVector) -> String {
    let parts: Vec<String> = r.0.iter().map(|v| fmt_rate(*v)).collect();
    format!("[{}]", parts.join(", "))
}

fn render_text(file: &ReportFile) -> String {
    let r = &file.report;
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", file.tool, file.version);
    let _ = writeln!(s, "relays: {}", r.relays);
    let _ = writeln!(s, "I(X;Y): {}", fmt_rate(r.measures.i_x_y));
    let _ = writeln!(s, "I(X;Yhat_N,Y|X_N): {}", fmt_rate(r.measures.i_x_yhat_y_given_xn));
    let _ = writeln!(s, "ceiling I(X;Y,Y_N|X_N): {}", fmt_rate(r.measures.ceiling));
    if let Some(c) = r.classical {
        let verdict = if c.feasible { "feasible" } else { "infeasible" };
        let _ = writeln!(s, "classical rate: {} ({verdict})", fmt_rate(c.rate));
    }
    if let Some(t) = r.thm1 {
        let verdict = if t.decodable { "yes" } else { "no" };
        let _ = writeln!(s, "thm1 rate: {} (Yhat_1 decodable: {verdict})", fmt_rate(t.rate));
    }
    let _ = writeln!(s, "thm2 rate: {} bin rates {}", fmt_rate(r.thm2.rate), fmt_vector(&r.thm2.rates));
    for d in &r.thm2_decoding {
        match &d.witness {
            Some(w) => {
                let _ = writeln!(
                    s,
                    "thm2 decode {}: yes, rate {} with bin rates {}",
                    fmt_set(d.set),
                    fmt_rate(d.rate_with_decoding),
                    fmt_vector(w)
                );
            }
            None => {
                let _ = writeln!(s, "thm2 decode {}: no", fmt_set(d.set));
            }
        }
    }
    let _ = writeln!(
        s,
        "thm3 rate: {} ({}) bin rates {}",
        fmt_rate(r.thm3.rate),
        r.thm3.status.as_str(),
        fmt_vector(&r.thm3.rates)
    );
    for d in &r.thm3_decoding {
        let verdict = match d.decodable {
            Some(true) => "yes",
            Some(false) => "no",
            None => "n/a",
        };
        let _ = writeln!(s, "thm3 decode {}: {verdict}", fmt_set(d.set));
    }
    if let Some(checks) = &file.oracle {
        for c in checks {
            let verdict = if c.passed { "ok" } else { "FAIL" };
            let _ = writeln!(s, "oracle {}: {verdict} ({:.3e})", c.name, c.discrepancy);
        }
    }
    s
}

pub fn cmd_optimize(args: &OptimizeArgs, out: &mut dyn Write) -> CliResult<()> {
    let (spec, net_bytes) = load_network(&args.network)?;
    let cfg = OptimizerConfig {
        objective: args.objective,
        restarts: args.restarts,
        max_iterations: args.max_iterations,
        tolerance: args.tolerance,
        fd_step: args.fd_step,
        seed: args.seed,
        grid_steps: args.grid_steps,
    };
    let result = optimize::optimize(&spec, &cfg)?;
    let dist_json = to_json(&DistributionFile::from_distribution(&result.best))?;

    // The emitted file is what gets reported on.
    let reread: DistributionFile = serde_json::from_str(&dist_json)
        .map_err(|e| CliError::Malformed(format!("emitted distribution: {e}")))?;
    let model = build_joint(&spec, &reread.to_distribution())?;
    let report = full_report(&model, &[])?;
    let mut file = ReportFile::new(report, &net_bytes, dist_json.as_bytes());
    file.optimization = Some(OptimizationSummary {
        objective: cfg.objective,
        seed: cfg.seed,
        restarts: cfg.restarts,
        best_rate: result.best_rate,
        traces: result.traces,
    });
    let report_json = to_json(&file)?;

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Malformed(format!("{}: {e}", dir.display())))?;
        write_file(&dir.join("distribution.json"), &dist_json)?;
        write_file(&dir.join("report.json"), &report_json)?;
    }
    emit(
        out,
        &format!("best {} rate: {} bits\n", cfg.objective, result.best_rate),
    )
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> CliResult<()> {
    let family: Family = args.family.parse()?;
    let params = if args.params.is_empty() {
        linspace(args.from, args.to, args.points)?
    } else {
        args.params.clone()
    };
    let mode = if args.fixed {
        SweepMode::Fixed
    } else {
        SweepMode::Optimize(OptimizerConfig {
            restarts: args.restarts,
            max_iterations: args.max_iterations,
            seed: args.seed,
            ..Default::default()
        })
    };
    let rows = optimize::sweep(|p| family.spec(p), &params, &mode);
    let csv = sweep_csv(&rows);
    match &args.out {
        Some(path) => write_file(path, &csv),
        None => emit(out, &csv),
    }
}

fn linspace(from: f64, to: f64, points: usize) -> CliResult<Vec<f64>> {
    match points {
        0 => Err(CliError::Malformed("--points must be at least 1".into())),
        1 => Ok(vec![from]),
        _ => Ok((0..points)
            .map(|k| from + (to - from) * k as f64 / (points - 1) as f64)
            .collect()),
    }
}

/// CSV with [`SWEEP_HEADER`], one row per grid point. Failed points carry
/// `error: <message>` in the status column and empty rate fields.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let status = match (&r.error, r.thm3_status) {
            (Some(e), _) => format!("error: {}", e.replace([',', '\n', '\r'], " ")),
            (None, Some(st)) => st.as_str().to_string(),
            (None, None) => String::new(),
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.param,
            num(r.classical_rate),
            r.classical_feasible.map(|b| b.to_string()).unwrap_or_default(),
            num(r.thm1_rate),
            num(r.thm2_rate),
            num(r.thm3_rate),
            status
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_parsing() {
        assert_eq!(parse_mask("3").unwrap(), SubsetId(3));
        assert_eq!(parse_mask("0b101").unwrap(), SubsetId(5));
        assert!(parse_mask("x").is_err());
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.0, 0.5, 3).unwrap(), vec![0.0, 0.25, 0.5]);
        assert!(linspace(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn error_exit_codes() {
        let shape: CliError = Error::ShapeMismatch {
            what: "p_x".into(),
            expected: 2,
            found: 3,
        }
        .into();
        assert_eq!(shape.exit_code(), 2);
        let bad: CliError = Error::Config("x".into()).into();
        assert_eq!(bad.exit_code(), 1);
        assert_eq!(CliError::Oracle(String::new()).exit_code(), 3);
    }
}
