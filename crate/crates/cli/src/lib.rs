//! Command implementations for the `gerber-shiu` binary.
//!
//! Every command renders its full output as a string so that it can be
//! tested in-process. CSV tables start with a single `#` provenance line
//! (tool version, command, model hash and every parameter that affects the
//! numbers), followed by a header row.

// `!(a > b)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gerber_shiu::compare::{compare, ComparisonReport, DensityKind};
use gerber_shiu::montecarlo::{estimate_densities, DensityEstimate, DEFAULT_SUB_STEP};
use gerber_shiu::{
    fixtures, CostFamily, DeficitWindow, GerberShiu, LevyModel, PreRuinWindow, ScaleFunction, SimConfig,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Parser)]
#[command(
    name = "gerber-shiu",
    version,
    about = "Gerber-Shiu functionals of spectrally negative Lévy processes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate W^(q), W^(q)' and Z^(q) over a grid.
    Scale(ScaleArgs),
    /// Tabulate the closed-form overshoot or undershoot density.
    Density(DensityArgs),
    /// Simulate binned overshoot and undershoot densities.
    Simulate(SimulateArgs),
    /// Compare simulated densities with the closed form.
    Compare(CompareArgs),
    /// Evaluate a Gerber-Shiu function for a named cost family.
    Gs(GsArgs),
    /// List the shipped fixtures.
    Fixtures,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Model JSON file.
    #[arg(long, conflicts_with = "fixture")]
    pub model: Option<PathBuf>,
    /// Shipped fixture name.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Replace the Gaussian coefficient of the model.
    #[arg(long)]
    pub sigma_override: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    /// Initial surplus.
    #[arg(long, default_value_t = 5.0)]
    pub x: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write the table here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScaleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// `lo:hi:step`.
    #[arg(long, default_value = "0:10:0.1")]
    pub grid: Grid,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Overshoot,
    Undershoot,
}

impl Kind {
    fn density_kind(self) -> DensityKind {
        match self {
            Kind::Overshoot => DensityKind::Overshoot,
            Kind::Undershoot => DensityKind::Undershoot,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = Kind::Overshoot)]
    pub kind: Kind,
    #[arg(long, default_value = "0:10:0.1")]
    pub grid: Grid,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 500_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub bin_width: f64,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Sub-grid step for paths with a Gaussian part.
    #[arg(long, default_value_t = DEFAULT_SUB_STEP)]
    pub sub_step: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Closed-form model.
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fixture to simulate; defaults to the law the closed-form fixture
    /// approximates (the model itself when given by file).
    #[arg(long)]
    pub sim_fixture: Option<String>,
    /// Restrict to one density; both by default.
    #[arg(long, value_enum)]
    pub kind: Option<Kind>,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Per-bin CSV.
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CostKind {
    /// No cost: the closed-form window measure.
    Measure,
    Indicator,
    Power,
}

#[derive(Debug, Clone, Args)]
pub struct GsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = CostKind::Measure)]
    pub cost: CostKind,
    /// Deficit window `(a_lo, a_hi)`; omit `a_hi` for an unbounded window.
    #[arg(long, default_value_t = 0.0)]
    pub a_lo: f64,
    #[arg(long)]
    pub a_hi: Option<f64>,
    /// Pre-ruin window `(b_lo, b_hi)`.
    #[arg(long, default_value_t = 0.0)]
    pub b_lo: f64,
    #[arg(long)]
    pub b_hi: Option<f64>,
    /// Power cost `|y|^p z^r e^{θy}`.
    #[arg(long, default_value_t = 0.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0.0)]
    pub r: f64,
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

/// Inclusive grid `lo:hi:step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl std::str::FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, step] = parts.as_slice() else {
            return Err(format!("grid must be lo:hi:step, got `{s}`"));
        };
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad grid value `{t}`: {e}"))
        };
        let g = Grid {
            lo: num(lo)?,
            hi: num(hi)?,
            step: num(step)?,
        };
        if !(g.step > 0.0) || !(g.hi >= g.lo) || !g.lo.is_finite() || !g.hi.is_finite() {
            return Err(format!("grid needs lo ≤ hi and step > 0, got `{s}`"));
        }
        Ok(g)
    }
}

impl std::fmt::Display for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.step)
    }
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.lo + k as f64 * self.step).collect()
    }
}

/// What a command produced: text for standard output and the exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub status: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { stdout, status: 0 }
    }
}

/// Exit status for a failed comparison.
pub const EXIT_COMPARISON_FAILED: i32 = 2;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// A model together with a label and the hash of its JSON source.
struct ResolvedModel {
    model: LevyModel,
    label: String,
    sha256: String,
}

fn load_model(args: &ModelArgs) -> Result<ResolvedModel> {
    let (text, label) = match (&args.model, &args.fixture) {
        (Some(path), _) => (
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
            path.file_name()
                .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned()),
        ),
        (None, name) => {
            let name = name.as_deref().unwrap_or("exp1");
            (fixtures::source(name)?.to_string(), name.to_string())
        }
    };
    resolve(&text, label, args.sigma_override)
}

fn resolve(text: &str, label: String, sigma: Option<f64>) -> Result<ResolvedModel> {
    let mut model = LevyModel::from_json(text).with_context(|| format!("loading model {label}"))?;
    if let Some(s) = sigma {
        model = model.with_sigma(s)?;
    }
    Ok(ResolvedModel {
        model,
        label,
        sha256: sha256_hex(text),
    })
}

fn sigma_label(s: Option<f64>) -> String {
    s.map_or_else(|| "none".to_string(), |v| v.to_string())
}

fn provenance(command: &str, model: &ResolvedModel, params: &[(&str, String)]) -> String {
    let mut line = format!(
        "# gerber-shiu {} command={command} model={} sha256={}",
        env!("CARGO_PKG_VERSION"),
        model.label,
        model.sha256
    );
    for (k, v) in params {
        let _ = write!(line, " {k}={v}");
    }
    line.push('\n');
    line
}

fn emit(table: String, output: &OutputArgs) -> Result<String> {
    match &output.out {
        Some(path) => {
            std::fs::write(path, &table).with_context(|| format!("writing {}", path.display()))?;
            Ok(String::new())
        }
        None => Ok(table),
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Scale(a) => cmd_scale(a),
        Command::Density(a) => cmd_density(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Gs(a) => cmd_gs(a),
        Command::Fixtures => cmd_fixtures(),
    }
}

fn common_params(m: &ModelArgs) -> Vec<(&'static str, String)> {
    vec![
        ("sigma_override", sigma_label(m.sigma_override)),
        ("q", m.q.to_string()),
        ("x", m.x.to_string()),
    ]
}

/// `x, w, w_prime, z, log_scale`. Rows past the overflow guard hold natural
/// logarithms and `log_scale = 1`.
pub fn cmd_scale(args: &ScaleArgs) -> Result<Outcome> {
    let model = load_model(&args.model)?;
    let sf = ScaleFunction::from_model(&model.model, args.model.q)?;
    let mut params = common_params(&args.model);
    params.retain(|(k, _)| *k != "x");
    params.push(("grid", args.grid.to_string()));
    let mut out = provenance("scale", &model, &params);
    out.push_str("x,w,w_prime,z,log_scale\n");
    for x in args.grid.points() {
        let row = match (sf.w(x), sf.w_prime(x), sf.z(x)) {
            (Ok(w), Ok(dw), Ok(z)) => [fmt(x), fmt(w), fmt(dw), fmt(z), "0".into()],
            _ => {
                let phi = sf.basis().phi();
                [
                    fmt(x),
                    fmt(sf.ln_w(x)),
                    fmt(phi * x + sf.w_prime_tilted(x).ln()),
                    fmt(sf.ln_z(x)),
                    "1".into(),
                ]
            }
        };
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(Outcome::ok(emit(out, &args.output)?))
}

/// `point, density, side`. For the undershoot density the two one-sided
/// limits at `b = x` are added as rows with `side` `left` and `right`.
pub fn cmd_density(args: &DensityArgs) -> Result<Outcome> {
    let model = load_model(&args.model)?;
    let gs = GerberShiu::from_model(&model.model, args.model.q)?;
    let x = args.model.x;
    let mut params = common_params(&args.model);
    params.push(("kind", args.kind.density_kind().name().into()));
    params.push(("grid", args.grid.to_string()));
    let mut out = provenance("density", &model, &params);
    out.push_str("point,density,side\n");
    let row = |out: &mut String, p: f64, v: f64, side: &str| {
        let _ = writeln!(out, "{},{},{side}", fmt(p), fmt(v));
    };
    let (lo, hi) = (args.grid.lo, args.grid.hi);
    let mut limits_done = false;
    for p in args.grid.points() {
        match args.kind {
            Kind::Overshoot => row(&mut out, p, gs.overshoot_density(x, p, &PreRuinWindow::full()), "none"),
            Kind::Undershoot => {
                let full = DeficitWindow::full();
                if !limits_done && p >= x && (lo..=hi).contains(&x) {
                    let (l, r) = gs.undershoot_limits(x, &full);
                    row(&mut out, x, l, "left");
                    row(&mut out, x, r, "right");
                    limits_done = true;
                    if p == x {
                        continue;
                    }
                }
                row(&mut out, p, gs.undershoot_density(x, p, &full), "none");
            }
        }
    }
    Ok(Outcome::ok(emit(out, &args.output)?))
}

fn sim_config(model: LevyModel, m: &ModelArgs, s: &SimArgs) -> SimConfig {
    SimConfig::new(model, m.x, m.q)
        .with_samples(s.samples)
        .with_seed(s.seed)
        .with_bin_width(s.bin_width)
        .with_workers(s.workers)
        .with_sub_step(s.sub_step)
}

fn sim_params(m: &ModelArgs, s: &SimArgs) -> Vec<(&'static str, String)> {
    let mut p = common_params(m);
    p.extend([
        ("samples", s.samples.to_string()),
        ("seed", s.seed.to_string()),
        ("bin_width", s.bin_width.to_string()),
        ("sub_step", s.sub_step.to_string()),
    ]);
    p
}

#[derive(Debug, Serialize)]
struct MassSummary {
    mean: f64,
    std_error: f64,
}

#[derive(Debug, Serialize)]
struct SimSummary {
    model: String,
    seed: u64,
    samples: usize,
    ruin_mass: MassSummary,
    creeping_mass: MassSummary,
    overshoot_out_of_range: f64,
    undershoot_out_of_range: f64,
    truncation_bound: f64,
}

fn density_rows(out: &mut String, kind: &str, est: &DensityEstimate) {
    for k in 0..est.centers.len() {
        let _ = writeln!(
            out,
            "{kind},{},{},{},{}",
            fmt(est.centers[k]),
            fmt(est.values[k]),
            fmt(est.std_errors[k]),
            est.hits[k]
        );
    }
}

/// CSV `kind, center, estimate, std_error, hits`. With `--out` the table goes
/// to the file and a JSON summary (ruin and creeping mass, truncation bound,
/// seed) to standard output.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Outcome> {
    let model = load_model(&args.model)?;
    let cfg = sim_config(model.model.clone(), &args.model, &args.sim);
    let (over, under) = estimate_densities(&cfg)?;
    let mut out = provenance("simulate", &model, &sim_params(&args.model, &args.sim));
    out.push_str("kind,center,estimate,std_error,hits\n");
    density_rows(&mut out, "overshoot", &over);
    density_rows(&mut out, "undershoot", &under);
    let summary = SimSummary {
        model: model.label.clone(),
        seed: args.sim.seed,
        samples: args.sim.samples,
        ruin_mass: MassSummary {
            mean: over.total.mean,
            std_error: over.total.std_error,
        },
        creeping_mass: MassSummary {
            mean: over.creeping.mean,
            std_error: over.creeping.std_error,
        },
        overshoot_out_of_range: over.out_of_range,
        undershoot_out_of_range: under.out_of_range,
        truncation_bound: cfg.truncation_bound(),
    };
    let json = serde_json::to_string_pretty(&summary)?;
    match &args.output.out {
        Some(_) => {
            emit(out, &args.output)?;
            Ok(Outcome::ok(json + "\n"))
        }
        None => Ok(Outcome::ok(out)),
    }
}

#[derive(Debug, Serialize)]
struct CompareSummary {
    analytic: String,
    simulated: String,
    sigma_override: Option<f64>,
    samples: usize,
    seed: u64,
    reports: Vec<ComparisonReport>,
    pass: bool,
}

/// JSON `{analytic, simulated, reports: [{kind, bins_checked, bins_within,
/// max_abs_z, pass}], pass}`; exit status 2 when any density fails.
pub fn cmd_compare(args: &CompareArgs) -> Result<Outcome> {
    let analytic = load_model(&args.model)?;
    let sim_name = match (&args.sim_fixture, &args.model.model, &args.model.fixture) {
        (Some(n), _, _) => Some(n.clone()),
        (None, Some(_), _) => None,
        (None, None, f) => Some(fixtures::simulation_target(f.as_deref().unwrap_or("exp1"))?.to_string()),
    };
    let simulated = match &sim_name {
        Some(n) => resolve(fixtures::source(n)?, n.clone(), args.model.sigma_override)?,
        None => load_model(&args.model)?,
    };
    let gs = GerberShiu::from_model(&analytic.model, args.model.q)?;
    let cfg = sim_config(simulated.model.clone(), &args.model, &args.sim);
    let (over, under) = estimate_densities(&cfg)?;
    let kinds: Vec<Kind> = match args.kind {
        Some(k) => vec![k],
        None => vec![Kind::Overshoot, Kind::Undershoot],
    };
    let reports: Vec<ComparisonReport> = kinds
        .iter()
        .map(|k| {
            let est = if *k == Kind::Overshoot { &over } else { &under };
            compare(&gs, args.model.x, k.density_kind(), est)
        })
        .collect();
    if args.output.out.is_some() {
        let mut params = sim_params(&args.model, &args.sim);
        params.push(("simulated", simulated.label.clone()));
        params.push(("simulated_sha256", simulated.sha256.clone()));
        let mut table = provenance("compare", &analytic, &params);
        table.push_str("kind,center,estimate,std_error,hits,analytic,z_score\n");
        for r in &reports {
            for b in &r.bins {
                let _ = writeln!(
                    table,
                    "{},{},{},{},{},{},{}",
                    r.kind.name(),
                    fmt(b.center),
                    fmt(b.estimate),
                    fmt(b.std_error),
                    b.hits,
                    fmt(b.analytic),
                    fmt(b.z_score)
                );
            }
        }
        emit(table, &args.output)?;
    }
    let pass = reports.iter().all(|r| r.pass);
    let summary = CompareSummary {
        analytic: analytic.label,
        simulated: simulated.label,
        sigma_override: args.model.sigma_override,
        samples: args.sim.samples,
        seed: args.sim.seed,
        reports,
        pass,
    };
    Ok(Outcome {
        stdout: serde_json::to_string_pretty(&summary)? + "\n",
        status: if pass { 0 } else { EXIT_COMPARISON_FAILED },
    })
}

#[derive(Debug, Serialize)]
struct GsSummary {
    model: String,
    cost: &'static str,
    x: f64,
    q: f64,
    value: f64,
    error: f64,
    /// Closed-form window measure, for the measure and indicator costs.
    closed_form: Option<f64>,
}

/// JSON `{value, error, closed_form}` for the chosen cost.
pub fn cmd_gs(args: &GsArgs) -> Result<Outcome> {
    let model = load_model(&args.model)?;
    let gs = GerberShiu::from_model(&model.model, args.model.q)?;
    let x = args.model.x;
    let a = DeficitWindow::new(args.a_lo, args.a_hi)?;
    let b = PreRuinWindow::new(args.b_lo, args.b_hi)?;
    let (name, value, error, closed) = match args.cost {
        CostKind::Measure => {
            let v = gs.joint_measure(x, &a, &b);
            ("measure", v, 0.0, Some(v))
        }
        CostKind::Indicator => {
            let cost = CostFamily::Indicator {
                deficit: a,
                pre_ruin: b,
            };
            let e = gs.gs_function(x, &cost, args.tol)?;
            ("indicator", e.value, e.error, Some(gs.joint_measure(x, &a, &b)))
        }
        CostKind::Power => {
            let cost = CostFamily::power(args.p, args.r, args.theta)?;
            let q = gerber_shiu::GerberShiuQuery::new(x, args.model.q).with_cost(cost);
            let e = gs.evaluate(&q, args.tol)?;
            ("power", e.value, e.error, None)
        }
    };
    let summary = GsSummary {
        model: model.label,
        cost: name,
        x,
        q: args.model.q,
        value,
        error,
        closed_form: closed,
    };
    Ok(Outcome::ok(serde_json::to_string_pretty(&summary)? + "\n"))
}

/// `name, law, phases, sha256, simulation_target`.
pub fn cmd_fixtures() -> Result<Outcome> {
    let mut out = String::from("name,law,phases,sha256,simulation_target\n");
    for name in fixtures::names() {
        let m = fixtures::load(name)?;
        let phases = m.hyperexp().map_or_else(|| "-".to_string(), |h| h.phases().to_string());
        let _ = writeln!(
            out,
            "{name},{},{phases},{},{}",
            m.jumps().name(),
            sha256_hex(fixtures::source(name)?),
            fixtures::simulation_target(name)?
        );
    }
    Ok(Outcome::ok(out))
}
