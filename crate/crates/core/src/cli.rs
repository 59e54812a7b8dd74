//! Command-line driver.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::eigenphase::{track_branches, TrackOptions};
use crate::error::{ErrorKind, Result};
use crate::export::{header_line, ArtifactSet};
use crate::graph::{self, Observable};
use crate::lambda;
use crate::spec_file::LoadedGraph;
use crate::stats::{self, EquivalenceStudy, StatResult, TestFunction};
use crate::torus::{self, ConstantFunction, FirstSpacing, NextCrossingFunction, SurfaceFunction, TorusPoint};
use crate::VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "qgraph", version, about = "Spectra and spectral statistics of quantum graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalues with multiplicities, eigenvectors and a Weyl-law report.
    Spectrum(Flags),
    /// Continuous eigenphase branches on a lambda grid.
    Phases(Flags),
    /// Lambda- and theta-spacing functionals with histograms.
    Spacings(Flags),
    /// Spectral, lambda-averaged and random-phase eigenvector moments.
    Moments(Flags),
    /// Spacing functionals along a family of bond lengths.
    Equivalence(Flags),
    /// Crossing averages along the torus flow against thickened averages.
    Proposition(Flags),
    /// Validates the graph and its scattering matrix.
    Check(Flags),
}

#[derive(Debug, Args, Clone)]
struct Flags {
    /// Graph spec file (TOML or JSON).
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    capital_lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Moment order(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    moment: Option<Vec<u32>>,
    #[arg(long)]
    spacing_order: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    step: Option<f64>,
    /// Test function, `name:key=val,...`.
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Direction of the length family, comma separated (equivalence).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    direction: Option<Vec<f64>>,
    /// Eigenvalue count per family member (equivalence).
    #[arg(long)]
    eigenvalues: Option<usize>,
    /// 1-based bond whose projector is the observable (moments).
    #[arg(long)]
    bond: Option<usize>,
    /// Crossings per starting point (proposition).
    #[arg(long)]
    crossings: Option<usize>,
    /// Number of random starting points (proposition).
    #[arg(long)]
    starts: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Spectrum,
    Phases,
    Spacings,
    Moments,
    Equivalence,
    Proposition,
    Check,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Spectrum => "spectrum",
            CommandKind::Phases => "phases",
            CommandKind::Spacings => "spacings",
            CommandKind::Moments => "moments",
            CommandKind::Equivalence => "equivalence",
            CommandKind::Proposition => "proposition",
            CommandKind::Check => "check",
        }
    }

    /// Flags that mean something for this command.
    fn accepts(self, flag: &str) -> bool {
        const COMMON: [&str; 3] = ["graph", "out", "workers"];
        if COMMON.contains(&flag) {
            return true;
        }
        let own: &[&str] = match self {
            CommandKind::Spectrum => &["lambda-max", "seed"],
            CommandKind::Phases => &["lambda-max", "step"],
            CommandKind::Spacings => &["lambda-max", "capital-lambda", "h", "spacing-order", "step"],
            CommandKind::Moments => &["capital-lambda", "moment", "samples", "seed", "step", "bond"],
            CommandKind::Equivalence => &["deltas", "h", "step", "direction", "eigenvalues"],
            CommandKind::Proposition => &["epsilons", "samples", "seed", "h", "crossings", "starts"],
            CommandKind::Check => &[],
        };
        own.contains(&flag)
    }
}

/// Validated settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub graph: PathBuf,
    pub out: PathBuf,
    pub lambda_max: f64,
    pub capital_lambda: Option<f64>,
    pub epsilons: Vec<f64>,
    pub deltas: Vec<f64>,
    pub moments: Vec<u32>,
    pub spacing_order: usize,
    pub samples: usize,
    pub seed: u64,
    pub step: Option<f64>,
    pub h: String,
    pub workers: Option<usize>,
    pub direction: Option<Vec<f64>>,
    pub eigenvalues: usize,
    pub bond: usize,
    pub crossings: usize,
    pub starts: usize,
}

/// A rejected command line, with the text to show and the exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub message: String,
    pub exit_code: i32,
}

fn usage(message: impl Into<String>) -> CliError {
    CliError { message: message.into(), exit_code: EXIT_USAGE }
}

/// Parses `argv` (including the program name).
pub fn parse_args<I, T>(argv: I) -> std::result::Result<ExperimentConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        let exit_code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        CliError { message: e.render().to_string(), exit_code }
    })?;
    let (kind, f) = match cli.command {
        Command::Spectrum(f) => (CommandKind::Spectrum, f),
        Command::Phases(f) => (CommandKind::Phases, f),
        Command::Spacings(f) => (CommandKind::Spacings, f),
        Command::Moments(f) => (CommandKind::Moments, f),
        Command::Equivalence(f) => (CommandKind::Equivalence, f),
        Command::Proposition(f) => (CommandKind::Proposition, f),
        Command::Check(f) => (CommandKind::Check, f),
    };
    let given = [
        ("lambda-max", f.lambda_max.is_some()),
        ("capital-lambda", f.capital_lambda.is_some()),
        ("epsilons", f.epsilons.is_some()),
        ("deltas", f.deltas.is_some()),
        ("moment", f.moment.is_some()),
        ("spacing-order", f.spacing_order.is_some()),
        ("samples", f.samples.is_some()),
        ("seed", f.seed.is_some()),
        ("step", f.step.is_some()),
        ("h", f.h.is_some()),
        ("direction", f.direction.is_some()),
        ("eigenvalues", f.eigenvalues.is_some()),
        ("bond", f.bond.is_some()),
        ("crossings", f.crossings.is_some()),
        ("starts", f.starts.is_some()),
    ];
    for (flag, present) in given {
        if present && !kind.accepts(flag) {
            return Err(usage(format!("--{flag} conflicts with command '{}'", kind.name())));
        }
    }
    let graph = f.graph.ok_or_else(|| usage(format!("'{}' needs --graph PATH", kind.name())))?;
    let config = ExperimentConfig {
        command: kind,
        graph,
        out: f.out.unwrap_or_else(|| PathBuf::from("qgraph-out")),
        lambda_max: f.lambda_max.unwrap_or(200.0),
        capital_lambda: f.capital_lambda,
        epsilons: f.epsilons.unwrap_or_else(|| vec![0.05, 0.1, 0.2]),
        deltas: f.deltas.unwrap_or_else(|| vec![0.2, 0.1, 0.05]),
        moments: f.moment.unwrap_or_else(|| vec![0, 1, 2]),
        spacing_order: f.spacing_order.unwrap_or(1),
        samples: f.samples.unwrap_or(100_000),
        seed: f.seed.unwrap_or(1),
        step: f.step,
        h: f.h.unwrap_or_else(|| "gaussian:c=1,w=0.5".into()),
        workers: f.workers,
        direction: f.direction,
        eigenvalues: f.eigenvalues.unwrap_or(5000),
        bond: f.bond.unwrap_or(1),
        crossings: f.crossings.unwrap_or(5000),
        starts: f.starts.unwrap_or(5),
    };
    validate(&config)?;
    Ok(config)
}

fn validate(c: &ExperimentConfig) -> std::result::Result<(), CliError> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(usage(format!("--{name} must be positive (got {v})")))
        }
    };
    positive("lambda-max", c.lambda_max)?;
    if let Some(v) = c.capital_lambda {
        positive("capital-lambda", v)?;
    }
    if let Some(v) = c.step {
        positive("step", v)?;
    }
    for &e in &c.epsilons {
        positive("epsilons", e)?;
    }
    if c.epsilons.is_empty() || c.deltas.is_empty() || c.moments.is_empty() {
        return Err(usage("list flags need at least one value"));
    }
    for (name, v) in [
        ("spacing-order", c.spacing_order),
        ("samples", c.samples),
        ("eigenvalues", c.eigenvalues),
        ("bond", c.bond),
        ("crossings", c.crossings),
        ("starts", c.starts),
    ] {
        if v == 0 {
            return Err(usage(format!("--{name} must be at least 1")));
        }
    }
    if c.workers == Some(0) {
        return Err(usage("--workers must be at least 1"));
    }
    c.h.parse::<TestFunction>().map_err(|e| usage(e.to_string()))?;
    Ok(())
}

fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Usage | ErrorKind::Io => EXIT_USAGE,
        ErrorKind::Validation => EXIT_VALIDATION,
        ErrorKind::Numerical => EXIT_NUMERICAL,
    }
}

/// Outcome of a run that did not fail outright.
struct Outcome {
    /// Internal checks that failed; any entry turns the exit code into 2.
    failed_checks: Vec<String>,
    summary: Vec<String>,
    warnings: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { failed_checks: Vec::new(), summary: Vec::new(), warnings: Vec::new() }
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    version: &'a str,
    command: &'a str,
    seed: u64,
    config: &'a ExperimentConfig,
    outputs: Vec<String>,
    warnings: &'a [String],
    failed_checks: &'a [String],
}

/// Runs a validated configuration, reporting to `stdout`/`stderr`.
pub fn run_with(config: &ExperimentConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(config.workers.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot start workers: {e}");
            return EXIT_USAGE;
        }
    };
    let config_json = serde_json::to_string(config).unwrap_or_default();
    let mut artifacts = match ArtifactSet::create(&config.out, header_line(config.command.name(), config.seed, &config_json)) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit_code(e.kind());
        }
    };
    let result = pool.install(|| execute(config, &mut artifacts));
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "error ({}): {e}", config.command.name());
            artifacts.discard();
            return exit_code(e.kind());
        }
    };
    let mut outputs: Vec<String> =
        artifacts.written().iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    let meta_name = format!("{}.meta.json", config.command.name());
    outputs.push(meta_name.clone());
    let meta = Metadata {
        version: VERSION,
        command: config.command.name(),
        seed: config.seed,
        config,
        outputs,
        warnings: &outcome.warnings,
        failed_checks: &outcome.failed_checks,
    };
    if let Err(e) = artifacts.json(&meta_name, &meta) {
        let _ = writeln!(stderr, "error: {e}");
        artifacts.discard();
        return exit_code(e.kind());
    }
    for w in &outcome.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    for line in &outcome.summary {
        let _ = writeln!(stdout, "{line}");
    }
    for f in &outcome.failed_checks {
        let _ = writeln!(stderr, "check failed: {f}");
    }
    if outcome.failed_checks.is_empty() {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    }
}

pub fn run(config: &ExperimentConfig) -> i32 {
    run_with(config, &mut std::io::stdout(), &mut std::io::stderr())
}

fn execute(c: &ExperimentConfig, artifacts: &mut ArtifactSet) -> Result<Outcome> {
    let loaded = LoadedGraph::from_path(&c.graph)?;
    let mut outcome = Outcome::new();
    outcome.warnings.extend(loaded.graph.warnings().iter().cloned());
    match c.command {
        CommandKind::Spectrum => spectrum(c, &loaded, artifacts, &mut outcome)?,
        CommandKind::Phases => phases(c, &loaded, artifacts, &mut outcome)?,
        CommandKind::Spacings => spacings(c, &loaded, artifacts, &mut outcome)?,
        CommandKind::Moments => moments(c, &loaded, artifacts, &mut outcome)?,
        CommandKind::Equivalence => equivalence(c, &loaded, artifacts, &mut outcome)?,
        CommandKind::Proposition => proposition(c, &loaded, artifacts, &mut outcome)?,
        CommandKind::Check => check(&loaded, artifacts, &mut outcome)?,
    }
    Ok(outcome)
}

fn spectrum(c: &ExperimentConfig, g: &LoadedGraph, artifacts: &mut ArtifactSet, o: &mut Outcome) -> Result<()> {
    let spec = lambda::solve_spectrum(&g.graph, &g.s0, c.lambda_max)?;
    artifacts.csv("spectrum.csv", |w| spec.write_csv(w))?;
    artifacts.csv("eigenvectors.csv", |w| spec.write_vectors_csv(w))?;
    o.summary.push(format!("{} eigenvalues in (0, {}]", spec.len(), c.lambda_max));
    if spec.is_empty() {
        return Ok(());
    }
    let weyl = lambda::weyl_check(&spec, &g.graph)?;
    let windows = lambda::window_count_bounds(&spec, &g.graph, 1000, c.seed).ok();
    artifacts.csv("weyl.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["capital_lambda", "count", "weyl", "ratio", "mean_normalized_spacing", "expected_spacing"])?;
        w.write_record([
            weyl.capital_lambda.to_string(),
            weyl.count.to_string(),
            format!("{:.6}", weyl.weyl),
            format!("{:.9}", weyl.ratio),
            format!("{:.9}", spec.mean_normalized_spacing()?),
            format!("{:.9}", spec.expected_mean_spacing()),
        ])?;
        w.flush()?;
        Ok(())
    })?;
    o.summary.push(format!("N(Λ)π/(𝓛Λ) = {:.6}", weyl.ratio));
    match windows {
        Some(r) => {
            artifacts.csv("windows.csv", |w| {
                let mut w = csv::Writer::from_writer(w);
                w.write_record(["trials", "long_window", "short_window", "required", "min_long_count", "max_short_count", "long_violations", "short_violations"])?;
                w.write_record([
                    r.trials.to_string(),
                    format!("{:.9}", r.long_window),
                    format!("{:.9}", r.short_window),
                    r.required.to_string(),
                    r.min_long_count.to_string(),
                    r.max_short_count.to_string(),
                    r.long_violations.to_string(),
                    r.short_violations.to_string(),
                ])?;
                w.flush()?;
                Ok(())
            })?;
            o.summary.push(format!(
                "window bounds: min count {} (long), max count {} (short), required {}",
                r.min_long_count, r.max_short_count, r.required
            ));
            if !r.passed() {
                o.failed_checks.push(format!(
                    "window counts violated ({} long, {} short)",
                    r.long_violations, r.short_violations
                ));
            }
        }
        None => o.warnings.push("range too short for window-count checks".into()),
    }
    Ok(())
}

fn phases(c: &ExperimentConfig, g: &LoadedGraph, artifacts: &mut ArtifactSet, o: &mut Outcome) -> Result<()> {
    let max_step = std::f64::consts::PI / g.graph.max_length();
    let step = c.step.unwrap_or(0.1f64.min(0.5 * max_step));
    let track = track_branches(&g.graph, &g.s0, 0.0, c.lambda_max, TrackOptions::with_step(step))?;
    artifacts.csv("phases.csv", |w| track.write_csv(w))?;
    o.summary.push(format!("{} branches on {} nodes", track.branch_count(), track.lambdas.len()));
    Ok(())
}

fn default_quadrature_step(g: &LoadedGraph, step: Option<f64>) -> f64 {
    step.unwrap_or_else(|| 0.1f64.min(std::f64::consts::PI / (4.0 * g.graph.max_length())))
}

fn stat_row(name: &str, r: &StatResult, params: &str) -> Vec<String> {
    vec![
        name.to_string(),
        format!("{:.12e}", r.estimate),
        format!("{:.3e}", r.stderr),
        r.diagnostic.map_or(String::new(), |d| format!("{d:.3e}")),
        r.samples.to_string(),
        params.to_string(),
    ]
}

fn spacings(c: &ExperimentConfig, g: &LoadedGraph, artifacts: &mut ArtifactSet, o: &mut Outcome) -> Result<()> {
    let h: TestFunction = c.h.parse()?;
    let capital_lambda = c.capital_lambda.unwrap_or(c.lambda_max);
    let step = default_quadrature_step(g, c.step);
    let spec = lambda::solve_eigenvalues(&g.graph, &g.s0, c.lambda_max)?;
    let p_lambda = stats::lambda_spacing_functional(&spec, &h, c.spacing_order)?;
    let p_theta = stats::theta_spacing_functional(&g.graph, &g.s0, &h, capital_lambda, step)?;
    artifacts.csv("spacings.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["name", "estimate", "stderr", "diagnostic", "samples", "params"])?;
        w.write_record(stat_row("P_lambda", &p_lambda, &format!("h={};r={};lambda_max={}", h.name(), c.spacing_order, c.lambda_max)))?;
        w.write_record(stat_row("P_theta", &p_theta, &format!("h={};capital_lambda={capital_lambda};step={step}", h.name())))?;
        w.flush()?;
        Ok(())
    })?;
    let hi = 4.0 * std::f64::consts::PI / g.graph.bond_count() as f64 * c.spacing_order as f64;
    let lam = stats::histogram(&stats::lambda_spacings(&spec, c.spacing_order), 60, 0.0, hi)?;
    artifacts.csv("lambda_spacings_hist.csv", |w| stats::write_histogram_csv(&lam, w))?;
    let theta = stats::histogram(&stats::theta_spacings(&g.graph, &g.s0, capital_lambda, step)?, 60, 0.0, hi)?;
    artifacts.csv("theta_spacings_hist.csv", |w| stats::write_histogram_csv(&theta, w))?;
    o.summary.push(format!("P_lambda[h] = {:.6} ({} spacings)", p_lambda.estimate, p_lambda.samples));
    o.summary.push(format!("P_theta[h]  = {:.6} (diagnostic {:.1e})", p_theta.estimate, p_theta.diagnostic.unwrap_or(0.0)));
    Ok(())
}

fn moments(c: &ExperimentConfig, g: &LoadedGraph, artifacts: &mut ArtifactSet, o: &mut Outcome) -> Result<()> {
    let a = Observable::bond_projector(&g.graph, c.bond - 1)?;
    let capital_lambda = c.capital_lambda.unwrap_or(500.0);
    let step = default_quadrature_step(g, c.step);
    let spec = lambda::solve_spectrum(&g.graph, &g.s0, capital_lambda)?;
    let spectral = stats::evec_moments_spectral(&spec, &g.graph, &a, &c.moments)?;
    let averaged = stats::evec_moments_lambda_average(&g.graph, &g.s0, &a, &c.moments, capital_lambda, step)?;
    let ensemble = stats::evec_moments_ensemble(&g.graph, &g.s0, &a, &c.moments, c.samples, c.seed)?;
    let mut rows = Vec::new();
    for (k, &m) in c.moments.iter().enumerate() {
        let trio = [spectral[k], averaged[k], ensemble[k]];
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in i + 1..3 {
                let d = (trio[i].estimate - trio[j].estimate).abs();
                let s = trio[i].combined_stderr(&trio[j]);
                worst = worst.max(if s > 0.0 { d / s } else if d > 0.0 { f64::INFINITY } else { 0.0 });
            }
        }
        rows.push((m, trio, worst));
        o.summary.push(format!(
            "m={m}: spectral {:.6} ± {:.1e} | lambda-average {:.6} ± {:.1e} | ensemble {:.6} ± {:.1e} | max |diff|/σ {:.2}",
            trio[0].estimate, trio[0].stderr, trio[1].estimate, trio[1].stderr, trio[2].estimate, trio[2].stderr, worst
        ));
    }
    artifacts.csv("moments.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record([
            "m",
            "spectral",
            "spectral_stderr",
            "lambda_average",
            "lambda_average_stderr",
            "lambda_average_diagnostic",
            "ensemble",
            "ensemble_stderr",
            "max_diff_over_sigma",
        ])?;
        for (m, t, worst) in &rows {
            w.write_record([
                m.to_string(),
                format!("{:.12e}", t[0].estimate),
                format!("{:.3e}", t[0].stderr),
                format!("{:.12e}", t[1].estimate),
                format!("{:.3e}", t[1].stderr),
                format!("{:.3e}", t[1].diagnostic.unwrap_or(0.0)),
                format!("{:.12e}", t[2].estimate),
                format!("{:.3e}", t[2].stderr),
                format!("{worst:.3}"),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(())
}

/// `(0.5, −0.3, −0.2)` for three bonds, otherwise evenly spaced values
/// summing to zero.
fn default_direction(b: usize) -> Vec<f64> {
    if b == 3 {
        return vec![0.5, -0.3, -0.2];
    }
    let mid = (b as f64 - 1.0) / 2.0;
    (0..b).map(|i| (i as f64 - mid) / b as f64).collect()
}

fn equivalence(c: &ExperimentConfig, g: &LoadedGraph, artifacts: &mut ArtifactSet, o: &mut Outcome) -> Result<()> {
    let study = EquivalenceStudy {
        base_length: g.graph.mean_length(),
        direction: c.direction.clone().unwrap_or_else(|| default_direction(g.graph.bond_count())),
        deltas: c.deltas.clone(),
        h: c.h.parse()?,
        eigenvalue_count: c.eigenvalues,
        step: default_quadrature_step(g, c.step),
    };
    let table = stats::spacing_equivalence_study(&g.graph, &g.s0, &study)?;
    artifacts.csv("equivalence.csv", |w| table.write_csv(w))?;
    for r in &table.rows {
        o.summary.push(format!(
            "delta={}: P_lambda {:.6} P_theta {:.6} |diff| {:.3e}",
            r.delta, r.p_lambda.estimate, r.p_theta.estimate, r.difference
        ));
    }
    o.summary.push(format!("differences strictly decreasing: {}", table.strictly_decreasing()));
    Ok(())
}

fn proposition(c: &ExperimentConfig, g: &LoadedGraph, artifacts: &mut ArtifactSet, o: &mut Outcome) -> Result<()> {
    let h: TestFunction = c.h.parse()?;
    let nd = NextCrossingFunction { h, mean_length: g.graph.mean_length() };
    let one = ConstantFunction(1.0);
    let phis: [&dyn SurfaceFunction; 3] = [&one, &FirstSpacing, &nd];
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let x0s: Vec<TorusPoint> = (0..c.starts).map(|_| TorusPoint::random(g.graph.bond_count(), &mut rng)).collect();
    let report = torus::proposition_residual(&phis, &g.graph, &g.s0, &x0s, &c.epsilons, c.crossings, c.samples, c.seed)?;
    artifacts.csv("proposition.csv", |w| report.write_csv(w))?;
    artifacts.csv("residuals.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["function", "x0_id", "epsilon", "residual"])?;
        for row in &report.rows {
            for (i, per_eps) in row.residuals.iter().enumerate() {
                for (eps, r) in report.epsilons.iter().zip(per_eps) {
                    w.write_record([row.function.clone(), i.to_string(), eps.to_string(), format!("{r:.6e}")])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    })?;
    for row in &report.rows {
        o.summary.push(format!(
            "{}: max relative spread {:.4}, agree within max(2%, 3σ): {}",
            row.function,
            row.max_relative_spread(),
            row.pairwise_agree(0.02, 3.0)
        ));
    }
    Ok(())
}

fn check(g: &LoadedGraph, artifacts: &mut ArtifactSet, o: &mut Outcome) -> Result<()> {
    let report = graph::validate_unitary(g.s0.matrix(), &g.graph, graph::UNITARY_TOL)?;
    let b = g.graph.bond_count();
    let relation = graph::integer_relation(g.graph.lengths(), 20, 1e-12);
    if b == 1 {
        o.warnings.push("B=1: all statistics degenerate".into());
    }
    let lengths = g.graph.lengths();
    if b > 1 && lengths.iter().all(|&l| l == lengths[0]) {
        o.warnings.push("all bond lengths equal: spacing statistics are degenerate".into());
    } else if let Some(k) = &relation {
        o.warnings.push(format!(
            "bond lengths look rationally dependent (integer relation {k:?}); the torus flow is not equidistributed"
        ));
    }
    if !report.passed() {
        o.failed_checks.push(format!(
            "scattering matrix: max deviation {:.3e}, {} mask violations",
            report.max_deviation,
            report.mask_violations.len()
        ));
    }
    let status = |ok: bool| if ok { "ok" } else { "fail" };
    artifacts.csv("check.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["item", "value", "status"])?;
        w.write_record(["bonds", &b.to_string(), "ok"])?;
        w.write_record(["vertices", &g.graph.vertices().len().to_string(), "ok"])?;
        w.write_record(["conditions", if g.kirchhoff { "kirchhoff" } else { "custom" }, "ok"])?;
        w.write_record(["unitarity_deviation", &format!("{:.3e}", report.max_deviation), status(report.max_deviation <= report.tol)])?;
        w.write_record(["mask_violations", &report.mask_violations.len().to_string(), status(report.mask_violations.is_empty())])?;
        let rel = relation.as_ref().map_or("none".to_string(), |k| format!("{k:?}").replace(',', ";"));
        w.write_record(["integer_relation", &rel, if relation.is_some() { "warn" } else { "ok" }])?;
        w.flush()?;
        Ok(())
    })?;
    o.summary.push(format!(
        "{} bonds, unitarity deviation {:.2e}: {}",
        b,
        report.max_deviation,
        if report.passed() { "unitary OK" } else { "NOT unitary" }
    ));
    Ok(())
}

/// Location of the JSON sidecar a run writes.
pub fn metadata_path(config: &ExperimentConfig) -> PathBuf {
    Path::new(&config.out).join(format!("{}.meta.json", config.command.name()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_config() {
        let c = parse_args(["qgraph", "spectrum", "--graph", "star3.spec", "--lambda-max", "200"]).unwrap();
        assert_eq!(c.command, CommandKind::Spectrum);
        assert_eq!(c.lambda_max, 200.0);
        assert_eq!(c.graph, PathBuf::from("star3.spec"));
    }

    #[test]
    fn equivalence_config() {
        let c = parse_args([
            "qgraph",
            "equivalence",
            "--graph",
            "star3.spec",
            "--deltas",
            "0.2,0.1,0.05",
            "--h",
            "gaussian:c=1,w=0.5",
        ])
        .unwrap();
        assert_eq!(c.deltas, vec![0.2, 0.1, 0.05]);
        assert_eq!(c.h, "gaussian:c=1,w=0.5");
    }

    #[test]
    fn missing_graph_is_usage_error() {
        let e = parse_args(["qgraph", "spectrum"]).unwrap_err();
        assert_eq!(e.exit_code, EXIT_USAGE);
    }

    #[test]
    fn unknown_and_conflicting_flags() {
        assert!(parse_args(["qgraph", "spectrum", "--graph", "g", "--frobnicate", "1"]).is_err());
        let e = parse_args(["qgraph", "spectrum", "--graph", "g", "--deltas", "0.1"]).unwrap_err();
        assert!(e.message.contains("conflicts"));
        assert!(parse_args(["qgraph", "spectrum", "--graph", "g", "--lambda-max", "abc"]).is_err());
        assert!(parse_args(["qgraph", "spectrum", "--graph", "g", "--lambda-max", "-1"]).is_err());
        assert!(parse_args(["qgraph", "spacings", "--graph", "g", "--h", "nope"]).is_err());
    }

    #[test]
    fn negative_direction_values_parse() {
        let c = parse_args(["qgraph", "equivalence", "--graph", "g", "--direction", "0.5,-0.3,-0.2"]).unwrap();
        assert_eq!(c.direction, Some(vec![0.5, -0.3, -0.2]));
    }

    #[test]
    fn help_is_not_an_error_exit() {
        let e = parse_args(["qgraph", "--help"]).unwrap_err();
        assert_eq!(e.exit_code, EXIT_OK);
    }
}
