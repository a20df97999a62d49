//! Command-line front end: argument types, the builtin constellation
//! registry and the subcommand runners behind the `pnopt` binary.

mod output;
mod registry;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::constellation::{Constellation, SpiralParams, DEFAULT_POWER};
use crate::detectors::{DetectorKind, LikelihoodKind};
use crate::error::{Error, Result};
use crate::metrics::{
    mi_dc, mi_dc_best, sep_floor_with, sep_union_bound, transition_matrix, FloorForm, MetricReport, QuadratureGrid,
};
use crate::model::ChannelParams;
use crate::montecarlo::{
    empirical_mi_dc, empirical_mismatched_rate, empirical_sep, empirical_transition_matrix, SimConfig,
};
use crate::optimize::{
    optimize_apsk, optimize_global, write_leaderboard_csv, ApskSearch, Criterion, GridSteps, SearchConfig,
};

pub use output::{document, Emitter, FloorRow, Format, MetricRow, Provenance, Row, SimRow, TOOL_NAME, TOOL_VERSION};
pub use registry::{builtin_constellation, builtin_constellation_with, parse_composition, parse_grid, BUILTIN_NAMES};

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "PNOPT_THREADS";

/// Sweep range for mutual-information metrics when `--ebn0` is omitted.
pub const MI_SWEEP_DEFAULT: &str = "-2:2:20";
/// Sweep range for error-probability metrics when `--ebn0` is omitted.
pub const SEP_SWEEP_DEFAULT: &str = "4:2:20";

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(
    name = "pnopt",
    version,
    about = "Constellation design and evaluation for phase-noise channels"
)]
pub struct Cli {
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, env = THREADS_ENV, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Evaluate metrics at every (σ_p², Eb/N0) grid point.
    Eval(EvalArgs),
    /// High-SNR error floors.
    Floor(FloorArgs),
    /// Design a constellation.
    Optimize(OptimizeArgs),
    /// Monte Carlo estimates.
    Simulate(SimulateArgs),
    /// One metric against Eb/N0.
    Sweep(SweepArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eval(_) => "eval",
            Command::Floor(_) => "floor",
            Command::Optimize(_) => "optimize",
            Command::Simulate(_) => "simulate",
            Command::Sweep(_) => "sweep",
        }
    }
}

/// Parsed value list, see [`parse_grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl std::str::FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_grid(s).map(Grid)
    }
}

impl Serialize for Grid {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        if v.is_empty() {
            return Err(serde::de::Error::custom("empty grid"));
        }
        Ok(Grid(v))
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SourceArgs {
    /// psk, qam, spiral-qam, apsk:<n1,n2,...> or file:<path>; repeatable.
    #[arg(long = "constellation", short = 'c')]
    pub constellations: Vec<String>,

    /// Constellation size.
    #[arg(long, default_value_t = 16)]
    pub m: usize,

    /// Spiral angular increment, radians.
    #[arg(long, default_value_t = SpiralParams::default().angle_step)]
    pub spiral_step: f64,

    /// Spiral radius of the innermost point before normalization; radii grow as sqrt(inner² + k).
    #[arg(long, default_value_t = SpiralParams::default().inner_radius)]
    pub spiral_inner: f64,
}

impl SourceArgs {
    fn resolve(&mut self, default: &[&str]) {
        if self.constellations.is_empty() {
            self.constellations = default.iter().map(|s| s.to_string()).collect();
        }
    }

    fn load(&self) -> Result<Vec<(String, Constellation)>> {
        let spiral = SpiralParams {
            angle_step: self.spiral_step,
            inner_radius: self.spiral_inner,
        };
        self.constellations
            .iter()
            .map(|name| Ok((name.clone(), builtin_constellation_with(name, self.m, spiral)?)))
            .collect()
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl OutputArgs {
    fn resolve(&mut self, default: Format) {
        self.format.get_or_insert(default);
    }

    fn format(&self) -> Format {
        self.format.unwrap_or(Format::Json)
    }

    fn path(&self) -> Option<&Path> {
        self.output.as_deref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Union bound on the GAP-D symbol error probability.
    SepBound,
    /// Equal-energy error floor (ignores Eb/N0).
    SepFloor,
    /// Mutual information of the GAP-D decision channel.
    MiDd,
    /// Continuous-output mutual information under `--likelihood`.
    MiDc,
    /// The better of the two continuous-output values.
    MiDcBest,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::SepBound => "sep-bound",
            Metric::SepFloor => "sep-floor",
            Metric::MiDd => "mi-dd",
            Metric::MiDc => "mi-dc",
            Metric::MiDcBest => "mi-dc-best",
        }
    }

    fn is_mi(self) -> bool {
        matches!(self, Metric::MiDd | Metric::MiDc | Metric::MiDcBest)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MetricOptions {
    /// Likelihood for mi-dc.
    #[arg(long, default_value = "phn-likelihood")]
    pub likelihood: LikelihoodKind,

    /// Radial quadrature steps.
    #[arg(long, default_value_t = GridSteps::FULL.n_r)]
    pub grid_nr: usize,

    /// Angular quadrature steps.
    #[arg(long, default_value_t = GridSteps::FULL.n_phi)]
    pub grid_nphi: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,

    /// Phase-noise variances, e.g. `0.001,0.01` or `0:0.01:0.1`.
    #[arg(long = "sigma-p2")]
    pub sigma_p2: Grid,

    /// Eb/N0 values in dB.
    #[arg(long)]
    pub ebn0: Grid,

    /// Metric to evaluate; repeatable.
    #[arg(long = "metric", value_enum, required = true)]
    pub metrics: Vec<Metric>,

    #[command(flatten)]
    #[serde(flatten)]
    pub options: MetricOptions,

    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,

    #[arg(long = "sigma-p2")]
    pub sigma_p2: Grid,

    /// Eb/N0 grid in dB; defaults to -2:2:20 for MI metrics and 4:2:20 otherwise.
    #[arg(long)]
    pub ebn0: Option<Grid>,

    #[arg(long, value_enum)]
    pub metric: Metric,

    #[command(flatten)]
    #[serde(flatten)]
    pub options: MetricOptions,

    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FloorFormArg {
    HalfAngle,
    Literal,
}

impl From<FloorFormArg> for FloorForm {
    fn from(f: FloorFormArg) -> Self {
        match f {
            FloorFormArg::HalfAngle => FloorForm::HalfAngle,
            FloorFormArg::Literal => FloorForm::Literal,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FloorArgs {
    /// Defaults to psk, qam and spiral-qam.
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,

    #[arg(long = "sigma-p2")]
    pub sigma_p2: Grid,

    #[arg(long, value_enum, default_value_t = FloorFormArg::HalfAngle)]
    pub form: FloorFormArg,

    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Global,
    Apsk,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub criterion: Criterion,

    #[arg(long, value_enum, default_value_t = MethodArg::Global)]
    pub method: MethodArg,

    #[arg(long, default_value_t = 16)]
    pub m: usize,

    #[arg(long = "sigma-p2")]
    pub sigma_p2: f64,

    /// Eb/N0 in dB.
    #[arg(long)]
    pub ebn0: f64,

    /// Global search: random starts.
    #[arg(long, default_value_t = SearchConfig::default().n_starts)]
    pub starts: usize,

    /// Global search: iteration cap per start.
    #[arg(long, default_value_t = SearchConfig::default().max_iterations)]
    pub iterations: usize,

    #[arg(long, default_value_t = SearchConfig::default().step_tolerance)]
    pub step_tolerance: f64,

    #[arg(long, default_value_t = SearchConfig::default().objective_tolerance)]
    pub objective_tolerance: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// MiB grid used inside the descent (global) or for screening (apsk).
    #[arg(long, default_value_t = GridSteps::REDUCED.n_r)]
    pub search_nr: usize,

    #[arg(long, default_value_t = GridSteps::REDUCED.n_phi)]
    pub search_nphi: usize,

    /// MiB grid for reported values.
    #[arg(long, default_value_t = GridSteps::FULL.n_r)]
    pub final_nr: usize,

    #[arg(long, default_value_t = GridSteps::FULL.n_phi)]
    pub final_nphi: usize,

    /// APSK: screened entries re-ranked on the final grid.
    #[arg(long, default_value_t = ApskSearch::default().refine_top)]
    pub refine_top: usize,

    /// APSK: leaderboard length.
    #[arg(long, default_value_t = ApskSearch::default().leaderboard_size)]
    pub leaderboard_size: usize,

    /// APSK: also write the leaderboard CSV here.
    #[arg(long)]
    pub leaderboard: Option<PathBuf>,

    /// Also write the designed constellation here (JSON, or CSV by extension).
    #[arg(long)]
    pub save_constellation: Option<PathBuf>,

    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

impl OptimizeArgs {
    fn search(&self) -> SearchConfig {
        SearchConfig {
            n_starts: self.starts,
            max_iterations: self.iterations,
            step_tolerance: self.step_tolerance,
            objective_tolerance: self.objective_tolerance,
            seed: self.seed,
            descent_grid: self.search_grid(),
            final_grid: self.final_grid(),
        }
    }

    fn apsk_search(&self) -> ApskSearch {
        ApskSearch {
            screen_grid: self.search_grid(),
            final_grid: self.final_grid(),
            refine_top: self.refine_top,
            leaderboard_size: self.leaderboard_size,
        }
    }

    fn search_grid(&self) -> GridSteps {
        GridSteps {
            n_r: self.search_nr,
            n_phi: self.search_nphi,
        }
    }

    fn final_grid(&self) -> GridSteps {
        GridSteps {
            n_r: self.final_nr,
            n_phi: self.final_nphi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Symbol error rate of `--detector`.
    Sep,
    /// Transition matrix of `--detector`; the scalar estimate is its MI.
    Transition,
    /// Continuous-output MI, sampling the `--likelihood` model.
    MiDc,
    /// Rate of a decoder using `--likelihood` on true channel outputs.
    MismatchedRate,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Sep => "sep",
            Estimator::Transition => "transition",
            Estimator::MiDc => "mi-dc",
            Estimator::MismatchedRate => "mismatched-rate",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,

    #[arg(long = "sigma-p2")]
    pub sigma_p2: Grid,

    #[arg(long)]
    pub ebn0: Grid,

    #[arg(long, value_enum, default_value_t = Estimator::Sep)]
    pub estimator: Estimator,

    #[arg(long, default_value = "gap-d")]
    pub detector: DetectorKind,

    #[arg(long, default_value = "phn-likelihood")]
    pub likelihood: LikelihoodKind,

    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Checkpoint file; grid point `k` of a multi-point run uses `<path>.k`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,

    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

/// Fills every default that depends on other arguments, so the serialized
/// config is a complete description of the run.
pub fn resolve(cli: &mut Cli) {
    match &mut cli.command {
        Command::Eval(a) => {
            a.source.resolve(&["qam"]);
            a.output.resolve(Format::Json);
        }
        Command::Sweep(a) => {
            a.source.resolve(&["qam"]);
            a.output.resolve(Format::Csv);
            if a.ebn0.is_none() {
                let spec = if a.metric.is_mi() {
                    MI_SWEEP_DEFAULT
                } else {
                    SEP_SWEEP_DEFAULT
                };
                a.ebn0 = Some(Grid(parse_grid(spec).expect("default grid parses")));
            }
        }
        Command::Floor(a) => {
            a.source.resolve(&["psk", "qam", "spiral-qam"]);
            a.output.resolve(Format::Csv);
        }
        Command::Simulate(a) => {
            a.source.resolve(&["qam"]);
            a.output.resolve(Format::Json);
        }
        Command::Optimize(a) => a.output.resolve(Format::Json),
    }
}

/// Rebuilds the command line recorded in a provenance block.
pub fn replay(provenance: &Provenance) -> Result<Cli> {
    Ok(serde_json::from_value(provenance.config.clone())?)
}

/// Runs a parsed command line. Defaults are resolved first.
pub fn run(mut cli: Cli) -> Result<()> {
    resolve(&mut cli);
    let config = serde_json::to_value(&cli)?;
    let name = cli.command.name();
    match &cli.command {
        Command::Eval(a) => run_metrics(
            Provenance::new(name, config, None),
            &a.source,
            &a.sigma_p2.0,
            &a.ebn0.0,
            &a.metrics,
            &a.options,
            &a.output,
        ),
        Command::Sweep(a) => run_metrics(
            Provenance::new(name, config, None),
            &a.source,
            &a.sigma_p2.0,
            &a.ebn0.as_ref().expect("resolved").0,
            &[a.metric],
            &a.options,
            &a.output,
        ),
        Command::Floor(a) => run_floor(Provenance::new(name, config, None), a),
        Command::Simulate(a) => run_simulate(Provenance::new(name, config, Some(a.seed)), a),
        Command::Optimize(a) => {
            let seed = (a.method == MethodArg::Global).then_some(a.seed);
            run_optimize(Provenance::new(name, config, seed), a)
        }
    }
}

/// Evaluates `n` points in parallel and hands the results to `sink` in index
/// order. Stops at the first error after all earlier points were delivered.
pub fn ordered_parallel<T, F, S>(n: usize, compute: F, mut sink: S) -> Result<()>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
    S: FnMut(T) -> Result<()>,
{
    let cancel = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        scope.spawn(|| {
            (0..n).into_par_iter().for_each_with(tx, |tx, i| {
                if cancel.load(Ordering::Relaxed) {
                    return;
                }
                // the receiver is gone only after a failure
                let _ = tx.send((i, compute(i)));
            });
        });
        let mut pending = std::collections::BTreeMap::new();
        let mut next = 0;
        let mut outcome = Ok(());
        for (i, r) in rx.iter() {
            pending.insert(i, r);
            while let Some(r) = pending.remove(&next) {
                next += 1;
                if let Err(e) = r.and_then(&mut sink) {
                    outcome = Err(e);
                    break;
                }
            }
            if outcome.is_err() {
                cancel.store(true, Ordering::Relaxed);
                break;
            }
        }
        outcome
    })
}

/// Channel parameters for one grid point at the canonical power.
fn point_params(sigma_p2: f64, ebn0: f64, m: usize) -> Result<ChannelParams> {
    ChannelParams::from_eb_n0(sigma_p2, ebn0, m, DEFAULT_POWER)
}

/// One metric at one channel point.
pub fn evaluate_metric(
    c: &Constellation,
    params: &ChannelParams,
    metric: Metric,
    options: &MetricOptions,
) -> Result<MetricReport> {
    let grid = || QuadratureGrid::for_constellation(c, params, options.grid_nr, options.grid_nphi);
    Ok(match metric {
        Metric::SepBound => {
            let b = sep_union_bound(c, params)?;
            let mut r = MetricReport::new(c, params, metric.as_str(), b.value);
            if b.raw > b.value {
                r = r.with_flag("clipped").with_flag(format!("raw={:e}", b.raw));
            }
            if b.degenerate_pairs > 0 {
                r = r.with_flag(format!("degenerate-pairs={}", b.degenerate_pairs));
            }
            r
        }
        Metric::SepFloor => MetricReport::new(
            c,
            params,
            metric.as_str(),
            sep_floor_with(c, params.sigma_p2, FloorForm::HalfAngle)?,
        ),
        Metric::MiDd => {
            let t = transition_matrix(c, params)?;
            let clamped = t.clamped_rows().iter().filter(|&&b| b).count();
            let r = MetricReport::new(c, params, metric.as_str(), t.mutual_information());
            if clamped > 0 {
                r.with_flag(format!("clamped-rows={clamped}"))
            } else {
                r
            }
        }
        Metric::MiDc => {
            let e = mi_dc(c, params, options.likelihood, &grid()?)?;
            MetricReport::new(c, params, metric.as_str(), e.bits)
                .with_error_estimate(e.error_estimate)
                .with_flag(format!("likelihood={}", e.kind.as_str()))
        }
        Metric::MiDcBest => {
            let e = mi_dc_best(c, params, &grid()?)?;
            MetricReport::new(c, params, metric.as_str(), e.bits)
                .with_error_estimate(e.error_estimate)
                .with_flag(format!("likelihood={}", e.kind.as_str()))
        }
    })
}

fn run_metrics(
    provenance: Provenance,
    source: &SourceArgs,
    sigmas: &[f64],
    ebn0s: &[f64],
    metrics: &[Metric],
    options: &MetricOptions,
    out: &OutputArgs,
) -> Result<()> {
    let cs = source.load()?;
    let mut points = Vec::new();
    for (ci, _) in cs.iter().enumerate() {
        for &s in sigmas {
            for &e in ebn0s {
                for &metric in metrics {
                    points.push((ci, s, e, metric));
                }
            }
        }
    }
    let mut emitter = Emitter::<MetricRow>::new(provenance, out.format(), out.path())?;
    ordered_parallel(
        points.len(),
        |k| {
            let (ci, s, e, metric) = points[k];
            let (name, c) = &cs[ci];
            let params = point_params(s, e, c.len())?;
            Ok(MetricRow {
                constellation: name.clone(),
                m: c.len(),
                report: evaluate_metric(c, &params, metric, options)?,
            })
        },
        |row| emitter.push(row),
    )?;
    emitter.finish()
}

fn run_floor(provenance: Provenance, a: &FloorArgs) -> Result<()> {
    let cs = a.source.load()?;
    let mut emitter = Emitter::<FloorRow>::new(provenance, a.output.format(), a.output.path())?;
    for (name, c) in &cs {
        for &s in &a.sigma_p2.0 {
            emitter.push(FloorRow {
                constellation: name.clone(),
                m: c.len(),
                constellation_hash: c.content_hash(),
                sigma_p2: s,
                form: serde_json::to_value(a.form)?.as_str().unwrap_or_default().to_owned(),
                floor: sep_floor_with(c, s, a.form.into())?,
            })?;
        }
    }
    emitter.finish()
}

fn run_simulate(provenance: Provenance, a: &SimulateArgs) -> Result<()> {
    let cs = a.source.load()?;
    let mut points = Vec::new();
    for (ci, _) in cs.iter().enumerate() {
        for &s in &a.sigma_p2.0 {
            for &e in &a.ebn0.0 {
                points.push((ci, s, e));
            }
        }
    }
    let single = points.len() == 1;
    let mut emitter = Emitter::<SimRow>::new(provenance, a.output.format(), a.output.path())?;
    // each simulation already spreads its blocks over the pool
    for (k, &(ci, s, e)) in points.iter().enumerate() {
        let (name, c) = &cs[ci];
        let params = point_params(s, e, c.len())?;
        let mut cfg = SimConfig::new(a.samples, a.seed);
        if let Some(p) = &a.checkpoint {
            cfg = cfg.with_checkpoint(if single { p.clone() } else { indexed(p, k) });
        }
        let (report, transition) = match a.estimator {
            Estimator::Sep => (empirical_sep(c, &params, a.detector, &cfg)?, None),
            Estimator::MiDc => (empirical_mi_dc(c, &params, a.likelihood, &cfg)?, None),
            Estimator::MismatchedRate => (empirical_mismatched_rate(c, &params, a.likelihood, &cfg)?, None),
            Estimator::Transition => {
                let t = empirical_transition_matrix(c, &params, a.detector, &cfg)?;
                let report = crate::montecarlo::SimReport {
                    estimate: t.matrix.mutual_information(),
                    std_error: f64::NAN,
                    n_samples: t.n_samples,
                    seed: t.seed,
                    kind: t.kind.clone(),
                    params: t.params,
                    errors: None,
                };
                (report, Some(t))
            }
        };
        emitter.push(SimRow {
            constellation: name.clone(),
            m: c.len(),
            estimator: a.estimator.as_str().into(),
            report,
            transition,
        })?;
    }
    emitter.finish()
}

fn indexed(p: &Path, k: usize) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(format!(".{k}"));
    PathBuf::from(s)
}

fn run_optimize(provenance: Provenance, a: &OptimizeArgs) -> Result<()> {
    let params = point_params(a.sigma_p2, a.ebn0, a.m)?;
    let result = match a.method {
        MethodArg::Global => optimize_global(a.criterion, &params, a.m, &a.search())?,
        MethodArg::Apsk => optimize_apsk(a.criterion, &params, a.m, &a.apsk_search())?,
    };
    let leaderboard = |path: Option<&Path>| -> Result<()> {
        let entries = result
            .apsk
            .as_ref()
            .map(|o| o.leaderboard.as_slice())
            .unwrap_or_default();
        let mut buf = provenance.csv_comment().into_bytes();
        write_leaderboard_csv(entries, &mut buf)?;
        output::emit_bytes(path, &buf)
    };
    if let Some(path) = &a.leaderboard {
        if result.apsk.is_none() {
            return Err(Error::InvalidParameter("--leaderboard needs --method apsk".into()));
        }
        leaderboard(Some(path))?;
    }
    if let Some(path) = &a.save_constellation {
        save_constellation(&result.constellation, &provenance, path)?;
    }
    match a.output.format() {
        Format::Json => output::emit_bytes(a.output.path(), &document(&provenance, "optimization", &result)?),
        // CSV output: the leaderboard for APSK runs, the points otherwise
        Format::Csv if result.apsk.is_some() => leaderboard(a.output.path()),
        Format::Csv => {
            let mut buf = provenance.csv_comment();
            buf.push_str(&result.constellation.to_csv()?);
            output::emit_bytes(a.output.path(), buf.as_bytes())
        }
    }
}

/// Constellation file with the provenance attached: an extra key in JSON,
/// a comment line in CSV. Both still load with [`Constellation::read_from`].
fn save_constellation(c: &Constellation, provenance: &Provenance, path: &Path) -> Result<()> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let bytes = if is_csv {
        let mut s = provenance.csv_comment();
        s.push_str(&c.to_csv()?);
        s.into_bytes()
    } else {
        let mut v = serde_json::to_value(c)?;
        v["provenance"] = serde_json::to_value(provenance)?;
        let mut b = serde_json::to_vec_pretty(&v)?;
        b.push(b'\n');
        b
    };
    output::emit_bytes(Some(path), &bytes)
}
