//! Command-line front end. [`run`] takes the argument list and returns the
//! exit code and both output streams, so the binary stays a thin shell.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::Error;
use crate::model::QueueModel;
use crate::modelfile::{parse_number_str, ModelFile, ModelFileError};
use crate::performance::{report, PerformanceReport};
use crate::simulator::{simulate, Estimate, SimConfig, SimReport};
use crate::sojourn::{build_bound, SojournSummary};
use crate::solver::{solve, SolverConfig};
use crate::stability::{classify_model, RecurrenceClass};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID_MODEL: i32 = 2;
pub const EXIT_NOT_STABLE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Columns of a sweep CSV, in order. `theta1`, `theta2` and `status` are always present.
pub const SWEEP_MEASURES: [&str; 11] = [
    "k_star",
    "tail_mass",
    "p_no_a",
    "p_no_b",
    "p_empty",
    "mean_q_a",
    "mean_q_b",
    "mean_q_paper",
    "mean_level_diff",
    "mean_q_total_abs",
    "mean_xi",
];

#[derive(Parser, Debug)]
#[command(
    name = "matchq",
    version,
    about = "Double-ended queues with MAP arrivals and impatient customers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Model file (JSON).
    model: PathBuf,
    /// Override the abandonment rates from the file.
    #[arg(long, num_args = 2, value_names = ["THETA1", "THETA2"])]
    theta: Option<Vec<f64>>,
    /// Override the solver's tail-mass threshold.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report whether the level process is positive recurrent, null recurrent or transient.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        json: bool,
    },
    /// Solve for the stationary distribution and print the performance measures.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        json: bool,
        /// Decimals in the human-readable table.
        #[arg(long, default_value_t = 4)]
        precision: usize,
        /// Also write the measures as a one-row CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve over a grid of abandonment rates and write one CSV row per point.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `theta1=0.2:1.4:0.2` (start:stop:step) or `theta2=0.1,1,10`; at most two.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        /// Comma-separated subset of the measure columns.
        #[arg(long, value_delimiter = ',')]
        measures: Option<Vec<String>>,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the queue and report batch-means confidence intervals.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e6)]
        horizon: f64,
        #[arg(long, default_value_t = 1e4)]
        warmup: f64,
        #[arg(long, default_value_t = 20)]
        batches: usize,
        /// Also solve the model and judge agreement with the simulation.
        #[arg(long)]
        compare: bool,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = 4)]
        precision: usize,
    },
    /// Print the version.
    Version,
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Failure {
    code: i32,
    message: String,
}

impl From<ModelFileError> for Failure {
    fn from(e: ModelFileError) -> Self {
        let code = if e.is_invalid_model() {
            EXIT_INVALID_MODEL
        } else {
            EXIT_USAGE
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NotStable(_) => EXIT_NOT_STABLE,
            Error::Map(_) | Error::InvalidModel(_) | Error::NotIrreducible(_) => EXIT_INVALID_MODEL,
            Error::InvalidArgument(_) | Error::Dimension(_) => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

/// Runs one command. `args[0]` is the program name.
pub fn run<I, T>(args: I) -> CliOutput
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                CliOutput {
                    code: EXIT_USAGE,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                CliOutput {
                    code: EXIT_OK,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    let result = match cli.command {
        Command::Classify { common, json } => cmd_classify(&common, json),
        Command::Solve {
            common,
            json,
            precision,
            out,
        } => cmd_solve(&common, json, precision, out.as_deref()),
        Command::Sweep {
            common,
            axes,
            measures,
            out,
        } => cmd_sweep(&common, &axes, measures.as_deref(), out.as_deref()),
        Command::Simulate {
            common,
            seed,
            horizon,
            warmup,
            batches,
            compare,
            json,
            precision,
        } => {
            let cfg = SimConfig {
                horizon,
                warmup,
                seed,
                batches,
            };
            cmd_simulate(&common, &cfg, compare, json, precision)
        }
        Command::Version => Ok(format!("matchq {}\n", env!("CARGO_PKG_VERSION"))),
    };
    match result {
        Ok(stdout) => CliOutput {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        },
        Err(f) => CliOutput {
            code: f.code,
            stdout: String::new(),
            stderr: format!("error: {}\n", f.message),
        },
    }
}

fn load(common: &Common) -> Result<(QueueModel, SolverConfig), Failure> {
    let file = ModelFile::load(&common.model)?;
    let mut model = file.model;
    let mut solver = file.solver;
    if let Some(t) = &common.theta {
        model = QueueModel::new(model.map_a, model.map_b, t[0], t[1])?;
    }
    if let Some(eps) = common.epsilon {
        solver.epsilon = eps;
        solver.validate()?;
    }
    Ok((model, solver))
}

/// Formats with `precision` decimals and without a sign on zero.
fn fixed(x: f64, precision: usize) -> String {
    let s = format!("{x:.precision$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn cmd_classify(common: &Common, json_out: bool) -> Result<String, Failure> {
    let (model, _) = load(common)?;
    let (a, b) = model.summaries()?;
    let class = classify_model(&model)?;
    if json_out {
        return Ok(to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "classify",
            "model": common.model.display().to_string(),
            "lambda1": a.rate,
            "lambda2": b.rate,
            "theta1": model.theta1,
            "theta2": model.theta2,
            "classification": class,
        })));
    }
    let mut out = format!("{class}\n");
    writeln!(out, "  {}", class.detail).ok();
    writeln!(
        out,
        "  lambda1 = {}, lambda2 = {}, theta1 = {}, theta2 = {}",
        a.rate, b.rate, model.theta1, model.theta2
    )
    .ok();
    Ok(out)
}

/// Everything `solve` reports for one parameter point.
#[derive(Clone, Debug, Serialize)]
struct Evaluation {
    lambda1: f64,
    lambda2: f64,
    theta1: f64,
    theta2: f64,
    classification: RecurrenceClass,
    report: PerformanceReport,
    sojourn: Option<SojournSummary>,
}

fn evaluate(model: &QueueModel, cfg: &SolverConfig, with_xi: bool) -> Result<Evaluation, Error> {
    let (a, b) = model.summaries()?;
    let classification = classify_model(model)?;
    let sol = solve(model, cfg)?;
    let sojourn = if with_xi {
        Some(build_bound(model, &sol)?.summary())
    } else {
        None
    };
    Ok(Evaluation {
        lambda1: a.rate,
        lambda2: b.rate,
        theta1: model.theta1,
        theta2: model.theta2,
        classification,
        report: report(&sol),
        sojourn,
    })
}

fn measure_value(ev: &Evaluation, name: &str) -> f64 {
    let r = &ev.report;
    match name {
        "k_star" => r.k_star as f64,
        "tail_mass" => r.tail_mass,
        "p_no_a" => r.p_no_a,
        "p_no_b" => r.p_no_b,
        "p_empty" => r.p_empty,
        "mean_q_a" => r.mean_q_a,
        "mean_q_b" => r.mean_q_b,
        "mean_q_paper" => r.mean_q_paper,
        "mean_level_diff" => r.mean_level_diff,
        "mean_q_total_abs" => r.mean_q_total_abs,
        "mean_xi" => ev.sojourn.as_ref().map_or(f64::NAN, |s| s.mean_xi),
        other => unreachable!("unknown measure {other}"),
    }
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn sweep_row(theta1: f64, theta2: f64, measures: &[&str], result: &Result<Evaluation, Error>) -> Vec<String> {
    let mut row = vec![theta1.to_string(), theta2.to_string()];
    match result {
        Ok(ev) => {
            row.extend(measures.iter().map(|m| measure_value(ev, m).to_string()));
            row.push("ok".into());
        }
        Err(e) => {
            row.extend(measures.iter().map(|_| String::new()));
            row.push(format!("error: {e}"));
        }
    }
    row
}

fn cmd_solve(
    common: &Common,
    json_out: bool,
    precision: usize,
    out: Option<&Path>,
) -> Result<String, Failure> {
    let (model, cfg) = load(common)?;
    let class = classify_model(&model)?;
    if !class.is_positive_recurrent() {
        return Err(Error::NotStable(class.to_string()).into());
    }
    let ev = evaluate(&model, &cfg, true)?;
    if let Some(path) = out {
        let mut header = vec!["theta1", "theta2"];
        header.extend(SWEEP_MEASURES);
        header.push("status");
        let row = sweep_row(model.theta1, model.theta2, &SWEEP_MEASURES, &Ok(ev.clone()));
        write_file(path, &csv_text(&header, &[row]))?;
    }
    if json_out {
        return Ok(to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "solve",
            "model": common.model.display().to_string(),
            "lambda1": ev.lambda1,
            "lambda2": ev.lambda2,
            "theta1": ev.theta1,
            "theta2": ev.theta2,
            "classification": ev.classification,
            "k_star": ev.report.k_star,
            "tail_mass": ev.report.tail_mass,
            "report": ev.report,
            "sojourn": ev.sojourn,
        })));
    }
    let r = &ev.report;
    let xi = ev.sojourn.as_ref().expect("requested");
    let f = |x: f64| fixed(x, precision);
    let mut s = String::new();
    let mut line = |label: &str, value: String| {
        writeln!(s, "{label:<18}{value}").ok();
    };
    line("model", common.model.display().to_string());
    line("class", ev.classification.to_string());
    line("lambda1", f(ev.lambda1));
    line("lambda2", f(ev.lambda2));
    line("theta1", f(ev.theta1));
    line("theta2", f(ev.theta2));
    line("k_star", r.k_star.to_string());
    line("tail_mass", format!("{:.3e}", r.tail_mass));
    line("p_no_a", f(r.p_no_a));
    line("p_no_b", f(r.p_no_b));
    line("p_empty", f(r.p_empty));
    line("mean_q_a", f(r.mean_q_a));
    line("mean_q_b", f(r.mean_q_b));
    line("mean_q_paper", f(r.mean_q_paper));
    line("mean_level_diff", f(r.mean_level_diff));
    line("mean_q_total_abs", f(r.mean_q_total_abs));
    line("mean_xi", f(xi.mean_xi));
    line("p_xi_zero", f(xi.prob_immediate));
    Ok(s)
}

/// Parses `name=start:stop:step`, `name=v1,v2,...` or `name=v`.
fn parse_axis(spec: &str) -> Result<(String, Vec<f64>), Failure> {
    let (name, values) = spec
        .split_once('=')
        .ok_or_else(|| usage(format!("axis `{spec}`: expected name=values")))?;
    let name = name.trim();
    if name != "theta1" && name != "theta2" {
        return Err(usage(format!(
            "axis `{spec}`: parameter must be theta1 or theta2"
        )));
    }
    let num = |s: &str| parse_number_str(s).map_err(|m| usage(format!("axis `{spec}`: {m}")));
    let parts: Vec<&str> = values.split(':').collect();
    let list = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(usage(format!("axis `{spec}`: need step > 0 and stop >= start")));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            // Rounding to 12 decimals keeps 0.2 + 2*0.2 printing as 0.6.
            (0..=n)
                .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                .collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => {
            return Err(usage(format!(
                "axis `{spec}`: expected start:stop:step or a list"
            )))
        }
    };
    if list.is_empty() || list.iter().any(|v| !(*v > 0.0)) {
        return Err(usage(format!("axis `{spec}`: values must be positive")));
    }
    Ok((name.to_string(), list))
}

fn cmd_sweep(
    common: &Common,
    axes: &[String],
    measures: Option<&[String]>,
    out: Option<&Path>,
) -> Result<String, Failure> {
    if axes.len() > 2 {
        return Err(usage("at most two --axis options"));
    }
    let (model, cfg) = load(common)?;
    let axes: Vec<(String, Vec<f64>)> = axes.iter().map(|a| parse_axis(a)).collect::<Result<_, _>>()?;
    if axes.len() == 2 && axes[0].0 == axes[1].0 {
        return Err(usage("the two axes must vary different parameters"));
    }
    let measures: Vec<&str> = match measures {
        None => SWEEP_MEASURES.to_vec(),
        Some(list) => list
            .iter()
            .map(|m| {
                SWEEP_MEASURES
                    .iter()
                    .find(|k| **k == m.trim())
                    .copied()
                    .ok_or_else(|| {
                        usage(format!(
                            "unknown measure `{m}`; choose from {}",
                            SWEEP_MEASURES.join(",")
                        ))
                    })
            })
            .collect::<Result<_, _>>()?,
    };
    let with_xi = measures.contains(&"mean_xi");

    let mut grid: Vec<(f64, f64)> = vec![(model.theta1, model.theta2)];
    for (name, values) in &axes {
        grid = grid
            .into_iter()
            .flat_map(|(t1, t2)| {
                values
                    .iter()
                    .map(move |&v| if name == "theta1" { (v, t2) } else { (t1, v) })
            })
            .collect();
    }
    let rows: Vec<Vec<String>> = grid
        .par_iter()
        .map(|&(t1, t2)| {
            let result = QueueModel::new(model.map_a.clone(), model.map_b.clone(), t1, t2)
                .and_then(|m| evaluate(&m, &cfg, with_xi));
            sweep_row(t1, t2, &measures, &result)
        })
        .collect();

    let mut header = vec!["theta1", "theta2"];
    header.extend(&measures);
    header.push("status");
    let text = csv_text(&header, &rows);
    match out {
        Some(path) => {
            write_file(path, &text)?;
            Ok(format!("wrote {} rows to {}\n", rows.len(), path.display()))
        }
        None => Ok(text),
    }
}

fn sim_rows(r: &SimReport) -> Vec<(&'static str, Estimate)> {
    vec![
        ("p_no_a", r.p_no_a),
        ("p_no_b", r.p_no_b),
        ("p_empty", r.p_empty),
        ("mean_q_a", r.mean_q_a),
        ("mean_q_b", r.mean_q_b),
        ("mean_q_paper", r.mean_q_paper),
        ("mean_level_diff", r.mean_level_diff),
        ("mean_q_total_abs", r.mean_q_total_abs),
        ("mean_wait_a", r.mean_wait_a),
        ("mean_wait_b", r.mean_wait_b),
    ]
}

/// Widening factor applied to simulation half-widths when judging agreement.
pub const AGREEMENT_WIDENING: f64 = 3.0;

fn cmd_simulate(
    common: &Common,
    cfg: &SimConfig,
    compare: bool,
    json_out: bool,
    precision: usize,
) -> Result<String, Failure> {
    let (model, solver_cfg) = load(common)?;
    cfg.validate()?;
    let sim = simulate(&model, cfg)?;
    let solved = if compare {
        Some(evaluate(&model, &solver_cfg, true)?)
    } else {
        None
    };
    // (measure, solver value, verdict)
    let verdicts: Vec<(&str, f64, &str)> = match &solved {
        None => Vec::new(),
        Some(ev) => sim_rows(&sim)
            .into_iter()
            .filter_map(|(name, est)| {
                if name == "mean_wait_b" {
                    return None;
                }
                if name == "mean_wait_a" {
                    let xi = ev.sojourn.as_ref().expect("requested").mean_xi;
                    let ok = est.estimate <= xi + AGREEMENT_WIDENING * est.half_width;
                    return Some((name, xi, if ok { "bound holds" } else { "bound violated" }));
                }
                let v = measure_value(ev, name);
                let ok = est.covers(v, AGREEMENT_WIDENING);
                Some((name, v, if ok { "agree" } else { "disagree" }))
            })
            .collect(),
    };
    if json_out {
        let comparison: Vec<_> = verdicts
            .iter()
            .map(|(name, v, verdict)| json!({"measure": name, "solver": v, "verdict": verdict}))
            .collect();
        return Ok(to_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": "simulate",
            "model": common.model.display().to_string(),
            "theta1": model.theta1,
            "theta2": model.theta2,
            "config": cfg,
            "simulation": sim,
            "comparison": if compare { Some(comparison) } else { None },
        })));
    }
    let f = |x: f64| fixed(x, precision);
    let mut s = String::new();
    writeln!(
        s,
        "model {}  theta = ({}, {})  horizon {}  warmup {}  seed {}  batches {}",
        common.model.display(),
        model.theta1,
        model.theta2,
        cfg.horizon,
        cfg.warmup,
        cfg.seed,
        cfg.batches
    )
    .ok();
    if compare {
        writeln!(
            s,
            "{:<18}{:>14}{:>14}{:>14}  verdict",
            "measure", "estimate", "half-width", "solver"
        )
        .ok();
    } else {
        writeln!(s, "{:<18}{:>14}{:>14}", "measure", "estimate", "half-width").ok();
    }
    for (name, est) in sim_rows(&sim) {
        write!(s, "{name:<18}{:>14}{:>14}", f(est.estimate), f(est.half_width)).ok();
        if let Some((_, v, verdict)) = verdicts.iter().find(|(n, _, _)| *n == name) {
            let label = if name == "mean_wait_a" {
                format!("{} (xi)", f(*v))
            } else {
                f(*v)
            };
            write!(s, "{label:>14}  {verdict}").ok();
        }
        s.push('\n');
    }
    writeln!(s, "{:<18}{:>14}", "abandon_frac_a", f(sim.abandon_frac_a)).ok();
    writeln!(s, "{:<18}{:>14}", "abandon_frac_b", f(sim.abandon_frac_b)).ok();
    writeln!(s, "{:<18}{:>14}", "events", sim.events).ok();
    Ok(s)
}
