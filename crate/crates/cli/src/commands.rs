use crate::{runtime_err, usage_err, Failure};
use anacov_core::bayes::{
    run_optimization, CoverageObjective, DbSink, ObjectiveKind, ParameterSpace, Simulator,
};
use anacov_core::coverage::evaluate;
use anacov_core::explore::explore;
use anacov_core::sim::{load_model, transient, ModelKind, SimError};
use anacov_core::space::{gap_report, persist, restore, DbLock, SpaceError, TestMeta};
use anacov_core::specfile::load_spec;
use anacov_core::trace::{load_trace, TraceFormat};
use anacov_core::{CoverageDatabase, CoverageResult, CoverageSpec, Model, Trace, Waveform};
use anyhow::{anyhow, Context};
use clap::Args;
use serde::Deserialize;
use std::path::{Path, PathBuf};

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Load a TOML config file backing a subcommand's flags.
fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(usage_err)?;
    toml::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))
        .map_err(usage_err)
}

fn require<T>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| usage_err(anyhow!("missing required option --{flag} (or config key)")))
}

fn load_spec_checked(path: &Path) -> Result<CoverageSpec, Failure> {
    load_spec(path)
        .with_context(|| format!("loading coverpoint spec {}", path.display()))
        .map_err(usage_err)
}

fn load_model_checked(path: &Path) -> Result<Model, Failure> {
    load_model(path)
        .with_context(|| format!("loading model {}", path.display()))
        .map_err(usage_err)
}

/// Restore the database when the file exists, otherwise start fresh from the
/// spec. Either way the spec's coverpoints all have records afterwards.
fn load_or_new_db(path: &Path, spec: &CoverageSpec) -> Result<CoverageDatabase, Failure> {
    let mut db = if path.exists() {
        restore(path)
            .with_context(|| format!("restoring database {}", path.display()))
            .map_err(runtime_err)?
    } else {
        CoverageDatabase::new(&spec.targets)
    };
    db.ensure_targets(&spec.targets);
    Ok(db)
}

fn write_out(dir: &Path, name: &str, content: &str) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
        .map_err(runtime_err)?;
    let path = dir.join(name);
    std::fs::write(&path, content)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(runtime_err)?;
    Ok(path)
}

/// Evaluate every coverpoint of the spec on a trace, using the database's
/// grids. Empty outcomes degrade inside `evaluate`; hard errors abort.
fn evaluate_all(
    spec: &CoverageSpec,
    db: &CoverageDatabase,
    trace: &Trace,
) -> Result<Vec<CoverageResult>, Failure> {
    let mut results = Vec::with_capacity(spec.coverpoints.len());
    for cp in &spec.coverpoints {
        let grid = *db
            .grid(&cp.id)
            .ok_or_else(|| runtime_err(anyhow!("database lacks coverpoint {}", cp.id)))?;
        let res = evaluate(cp, trace, &grid)
            .with_context(|| format!("evaluating coverpoint {}", cp.id))
            .map_err(runtime_err)?;
        results.push(res);
    }
    Ok(results)
}

fn results_hit_illegal(spec: &CoverageSpec, results: &[CoverageResult]) -> bool {
    results.iter().any(|r| {
        spec.targets
            .get(&r.coverpoint_id)
            .is_some_and(|t| !r.covered.intersect(&t.illegal).is_empty())
    })
}

fn persist_locked(db: &CoverageDatabase, path: &Path) -> Result<(), Failure> {
    let _lock = DbLock::acquire(path).map_err(|e| match e {
        SpaceError::Locked(_) => runtime_err(e),
        other => runtime_err(other),
    })?;
    persist(db, path).map_err(runtime_err)
}

// --- cover -------------------------------------------------------------------

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverOpts {
    /// TOML file supplying defaults for any option below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Coverpoint spec file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Coverage database path (created if missing).
    #[arg(long)]
    pub db: Option<PathBuf>,
    /// Trace CSV to evaluate.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Model config to simulate instead of reading a trace.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Stimulus for an LTI model: `sine:amp,freq[,phase]`, `step:amp[,at]`,
    /// `ramp:slope[,start]` or `pwl:t0:v0,t1:v1,...`
    #[arg(long)]
    pub stimulus: Option<String>,
    /// Input value for a static-map model.
    #[arg(long)]
    pub x: Option<f64>,
    /// Simulation time step in seconds.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Simulation duration in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Test id recorded in the database (defaults to `test-<n>`).
    #[arg(long)]
    pub test_id: Option<String>,
    /// Output directory for the per-run report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl CoverOpts {
    fn merge(self, file: CoverOpts) -> CoverOpts {
        CoverOpts {
            config: None,
            spec: self.spec.or(file.spec),
            db: self.db.or(file.db),
            trace: self.trace.or(file.trace),
            model: self.model.or(file.model),
            stimulus: self.stimulus.or(file.stimulus),
            x: self.x.or(file.x),
            dt: self.dt.or(file.dt),
            duration: self.duration.or(file.duration),
            test_id: self.test_id.or(file.test_id),
            out: self.out.or(file.out),
        }
    }
}

/// Produce the trace to cover: read it from a CSV, or simulate the model.
fn obtain_trace(opts: &CoverOpts) -> Result<(Trace, Vec<(String, String)>), Failure> {
    match (&opts.trace, &opts.model) {
        (Some(path), None) => {
            let trace = load_trace(path, TraceFormat::Csv)
                .with_context(|| format!("loading trace {}", path.display()))
                .map_err(usage_err)?;
            Ok((trace, vec![("trace".into(), path.display().to_string())]))
        }
        (None, Some(path)) => {
            let model = load_model_checked(path)?;
            match &model.kind {
                ModelKind::Lti(lti) => {
                    let spec = require(opts.stimulus.clone(), "stimulus")?;
                    let wave = Waveform::parse(&spec).map_err(usage_err)?;
                    let dt = require(opts.dt, "dt")?;
                    let duration = require(opts.duration, "duration")?;
                    let trace = transient(lti, &wave, dt, duration).map_err(runtime_err)?;
                    Ok((trace, vec![("stimulus".into(), spec), ("dt".into(), dt.to_string())]))
                }
                ModelKind::Static(map) => {
                    let x = require(opts.x, "x")?;
                    let dt = opts.dt.unwrap_or(1e-4);
                    let duration = opts.duration.unwrap_or(0.2);
                    let trace = map.transient_static(x, dt, duration).map_err(runtime_err)?;
                    Ok((trace, vec![("x".into(), x.to_string())]))
                }
            }
        }
        _ => Err(usage_err(anyhow!("provide exactly one of --trace or --model"))),
    }
}

pub fn cmd_cover(mut opts: CoverOpts) -> Result<u8, Failure> {
    if let Some(cfg) = opts.config.take() {
        opts = opts.merge(load_config(&cfg)?);
    }
    let spec_path = require(opts.spec.clone(), "spec")?;
    let db_path = require(opts.db.clone(), "db")?;
    let spec = load_spec_checked(&spec_path)?;
    let mut db = load_or_new_db(&db_path, &spec)?;

    let (trace, inputs) = obtain_trace(&opts)?;
    let results = evaluate_all(&spec, &db, &trace)?;
    let test_id = opts
        .test_id
        .clone()
        .unwrap_or_else(|| format!("test-{}", db.tests().len() + 1));
    let meta = TestMeta { id: test_id.clone(), timestamp: now_rfc3339(), inputs };
    db.accumulate(meta, &results).map_err(runtime_err)?;
    persist_locked(&db, &db_path)?;

    let report = gap_report(&db, &spec.targets).map_err(runtime_err)?;
    let mut text = format!("# run report: test {test_id}\n# generated: {}\n", now_rfc3339());
    for r in &results {
        text.push_str(&format!(
            "test coverpoint={} covered={} untargeted={}{}\n",
            r.coverpoint_id,
            r.covered,
            r.untargeted,
            r.empty_reason
                .as_deref()
                .map(|m| format!(" note={m:?}"))
                .unwrap_or_default()
        ));
    }
    text.push('\n');
    text.push_str(&report.render_text());
    let bug_here = results_hit_illegal(&spec, &results);
    if let Some(out) = &opts.out {
        write_out(out, "cover_report.txt", &text)?;
        write_out(out, "cover_report.kv", &report.render_kv())?;
    }
    print!("{text}");
    Ok(if bug_here { 3 } else { 0 })
}

// --- bode-explore ------------------------------------------------------------

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BodeOpts {
    /// TOML file supplying defaults for any option below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// LTI model config.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Coverpoint spec file; with --db, runs are accumulated as coverage.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Coverage database path.
    #[arg(long)]
    pub db: Option<PathBuf>,
    /// Output directory (bode.csv, explore.csv, traces, report).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Input sine amplitude.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// AC sweep lower frequency in hertz.
    #[arg(long)]
    pub f_lo: Option<f64>,
    /// AC sweep upper frequency in hertz.
    #[arg(long)]
    pub f_hi: Option<f64>,
    /// AC sweep grid density.
    #[arg(long)]
    pub points_per_decade: Option<usize>,
    /// Comparison frequencies as ratios of the detected peak.
    #[arg(long, value_delimiter = ',')]
    pub comparisons: Option<Vec<f64>>,
    /// Transient step in seconds (default: auto from the fastest mode).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Transient duration in seconds (default: auto from settling time).
    #[arg(long)]
    pub duration: Option<f64>,
    /// Test id recorded in the database.
    #[arg(long)]
    pub test_id: Option<String>,
}

impl BodeOpts {
    fn merge(self, file: BodeOpts) -> BodeOpts {
        BodeOpts {
            config: None,
            model: self.model.or(file.model),
            spec: self.spec.or(file.spec),
            db: self.db.or(file.db),
            out: self.out.or(file.out),
            amplitude: self.amplitude.or(file.amplitude),
            f_lo: self.f_lo.or(file.f_lo),
            f_hi: self.f_hi.or(file.f_hi),
            points_per_decade: self.points_per_decade.or(file.points_per_decade),
            comparisons: self.comparisons.or(file.comparisons),
            dt: self.dt.or(file.dt),
            duration: self.duration.or(file.duration),
            test_id: self.test_id.or(file.test_id),
        }
    }
}

pub fn cmd_bode_explore(mut opts: BodeOpts) -> Result<u8, Failure> {
    if let Some(cfg) = opts.config.take() {
        opts = opts.merge(load_config(&cfg)?);
    }
    let model_path = require(opts.model.clone(), "model")?;
    let model = load_model_checked(&model_path)?;
    let lti = match &model.kind {
        ModelKind::Lti(l) => l.clone(),
        ModelKind::Static(_) => {
            return Err(usage_err(anyhow!("bode-explore needs an LTI model")));
        }
    };
    let out = opts.out.clone().unwrap_or_else(|| PathBuf::from("anacov-out"));
    let amplitude = opts.amplitude.unwrap_or(1.0);
    let f_lo = opts.f_lo.unwrap_or(1.0);
    let f_hi = opts.f_hi.unwrap_or(1e6);
    let ppd = opts.points_per_decade.unwrap_or(100);
    let ratios = opts.comparisons.clone().unwrap_or_else(|| vec![0.1, 10.0]);

    // Peak first, to place the comparison frequencies and time grid.
    let plot = anacov_core::sim::ac_analysis(&lti, f_lo, f_hi, ppd).map_err(runtime_err)?;
    let peak = *anacov_core::explore::find_peaks(&plot)
        .map_err(runtime_err)?
        .global_peak();
    let comparison: Vec<f64> = ratios.iter().map(|r| r * peak.frequency).collect();
    let f_max = comparison
        .iter()
        .copied()
        .fold(peak.frequency, f64::max)
        .max(f_lo);
    let f_min = comparison
        .iter()
        .copied()
        .fold(peak.frequency, f64::min)
        .max(f_lo);
    let max_pole = lti.poles().iter().map(|p| p.norm()).fold(0.0, f64::max);
    let dt = opts.dt.unwrap_or_else(|| {
        let by_freq = 1.0 / (50.0 * f_max);
        if max_pole > 0.0 {
            by_freq.min(0.09 / max_pole)
        } else {
            by_freq
        }
    });
    let duration = opts.duration.unwrap_or_else(|| {
        let slowest = lti
            .poles()
            .iter()
            .filter(|p| p.re < 0.0)
            .map(|p| -p.re)
            .fold(f64::INFINITY, f64::min);
        let settle = if slowest.is_finite() { 10.0 / slowest } else { 0.0 };
        settle + 3.0 / f_min
    });

    let report = explore(&lti, amplitude, &comparison, f_lo, f_hi, ppd, dt, duration)
        .map_err(runtime_err)?;

    write_out(&out, "bode.csv", &report.plot.to_csv_string())?;
    write_out(&out, "explore.csv", &report.to_csv_string())?;
    for (i, (row, trace)) in report.rows.iter().zip(&report.traces).enumerate() {
        write_out(&out, &format!("tran_{i}_{:.3}hz.csv", row.frequency), &trace.to_csv_string())?;
    }

    let mut text = format!(
        "# bode-explore: model {}\n# generated: {}\n",
        model.label(),
        now_rfc3339()
    );
    text.push_str(&format!(
        "peak frequency_hz={} gain_db={} endpoint={}\n",
        report.peak.frequency, report.peak.gain_db, report.peak.endpoint
    ));
    text.push_str(&format!("settle_time_s={} dt={dt} duration={duration}\n\n", report.settle_time));
    text.push_str("frequency_hz      range                    width       peak\n");
    for row in &report.rows {
        text.push_str(&format!(
            "{:<17.6} {:<24} {:<11.6} {}\n",
            row.frequency,
            row.range.to_string(),
            row.width,
            if row.is_peak { "<- peak" } else { "" }
        ));
    }

    // Accumulate the runs as one test when a spec and database are given.
    let mut bug_here = false;
    if let (Some(spec_path), Some(db_path)) = (&opts.spec, &opts.db) {
        let spec = load_spec_checked(spec_path)?;
        let mut db = load_or_new_db(db_path, &spec)?;
        let test_id = opts.test_id.clone().unwrap_or_else(|| "bode-explore".to_string());
        for (row, trace) in report.rows.iter().zip(&report.traces) {
            let results = evaluate_all(&spec, &db, trace)?;
            bug_here |= results_hit_illegal(&spec, &results);
            let meta = TestMeta {
                id: test_id.clone(),
                timestamp: now_rfc3339(),
                inputs: vec![("frequency_hz".into(), row.frequency.to_string())],
            };
            db.accumulate(meta, &results).map_err(runtime_err)?;
        }
        persist_locked(&db, db_path)?;
        let gap = gap_report(&db, &spec.targets).map_err(runtime_err)?;
        text.push('\n');
        text.push_str(&gap.render_text());
    }

    write_out(&out, "explore_report.txt", &text)?;
    print!("{text}");
    Ok(if bug_here { 3 } else { 0 })
}

// --- bayes-opt ----------------------------------------------------------------

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BayesOpts {
    /// TOML file supplying defaults for any option below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Model config (static map or LTI).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Coverpoint spec file naming the objective's coverpoint and targets.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Coverage database path; every evaluation accumulates into it.
    #[arg(long)]
    pub db: Option<PathBuf>,
    /// Output directory (history.csv, summary.txt).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Objective: `gap-lower:<coverpoint>`, `gap-upper:<coverpoint>` or
    /// `bug:<coverpoint>[:<illegal-bin-index>]`.
    #[arg(long)]
    pub objective: Option<String>,
    /// Total evaluation budget.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Initial Latin-hypercube design size (default max(2, 2k)).
    #[arg(long)]
    pub n_init: Option<usize>,
    /// RNG seed; all run randomness flows from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulation time step in seconds.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Simulation duration in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Sine amplitude (LTI models driven at frequency x).
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Lower input bound (required for LTI models; static maps default to
    /// their declared domain).
    #[arg(long)]
    pub x_lo: Option<f64>,
    /// Upper input bound.
    #[arg(long)]
    pub x_hi: Option<f64>,
    /// Test id recorded in the database.
    #[arg(long)]
    pub test_id: Option<String>,
}

impl BayesOpts {
    fn merge(self, file: BayesOpts) -> BayesOpts {
        BayesOpts {
            config: None,
            model: self.model.or(file.model),
            spec: self.spec.or(file.spec),
            db: self.db.or(file.db),
            out: self.out.or(file.out),
            objective: self.objective.or(file.objective),
            budget: self.budget.or(file.budget),
            n_init: self.n_init.or(file.n_init),
            seed: self.seed.or(file.seed),
            dt: self.dt.or(file.dt),
            duration: self.duration.or(file.duration),
            amplitude: self.amplitude.or(file.amplitude),
            x_lo: self.x_lo.or(file.x_lo),
            x_hi: self.x_hi.or(file.x_hi),
            test_id: self.test_id.or(file.test_id),
        }
    }
}

/// Resolve `gap-lower:<cp>` / `gap-upper:<cp>` / `bug:<cp>[:<index>]` against
/// the spec targets: gap edges come from the hull of the legal bins, bug
/// bounds from the chosen illegal bin.
fn parse_objective(
    text: &str,
    spec: &CoverageSpec,
) -> Result<(ObjectiveKind<f64>, anacov_core::CoverPoint), Failure> {
    let mut parts = text.split(':');
    let kind_text = parts.next().unwrap_or_default();
    let cp_id = parts
        .next()
        .ok_or_else(|| usage_err(anyhow!("objective must name a coverpoint, e.g. gap-lower:vout")))?;
    let cp = spec
        .coverpoints
        .iter()
        .find(|c| c.id == cp_id)
        .ok_or_else(|| usage_err(anyhow!("objective names unknown coverpoint {cp_id:?}")))?;
    let target = spec
        .targets
        .get(cp_id)
        .ok_or_else(|| usage_err(anyhow!("no target for coverpoint {cp_id:?}")))?;
    let kind = match kind_text {
        "gap-lower" | "gap-upper" => {
            let hull = target
                .legal
                .hull()
                .ok_or_else(|| usage_err(anyhow!("coverpoint {cp_id:?} has no legal bins")))?;
            if kind_text == "gap-lower" {
                ObjectiveKind::GapLower { a: hull.lower() }
            } else {
                ObjectiveKind::GapUpper { b: hull.upper() }
            }
        }
        "bug" => {
            let index: usize = parts
                .next()
                .map(|s| s.parse())
                .transpose()
                .map_err(|_| usage_err(anyhow!("bad illegal-bin index in {text:?}")))?
                .unwrap_or(0);
            let bin = target.illegal.bins().get(index).ok_or_else(|| {
                usage_err(anyhow!("coverpoint {cp_id:?} has no illegal bin #{index}"))
            })?;
            ObjectiveKind::BugBin { c: bin.lower(), d: bin.upper() }
        }
        other => {
            return Err(usage_err(anyhow!(
                "objective kind must be gap-lower, gap-upper or bug, got {other:?}"
            )));
        }
    };
    Ok((kind, cp.clone()))
}

enum Binding {
    Static { model: anacov_core::StaticMapModel, dt: f64, duration: f64 },
    LtiSine { model: anacov_core::LtiModel, amplitude: f64, dt: f64, duration: f64 },
}

impl Simulator<f64> for Binding {
    fn simulate(&self, x: &[f64]) -> Result<Trace, SimError> {
        match self {
            Binding::Static { model, dt, duration } => model.transient_static(x[0], *dt, *duration),
            Binding::LtiSine { model, amplitude, dt, duration } => {
                transient(model, &Waveform::sine(*amplitude, x[0]), *dt, *duration)
            }
        }
    }
}

pub fn cmd_bayes_opt(mut opts: BayesOpts) -> Result<u8, Failure> {
    if let Some(cfg) = opts.config.take() {
        opts = opts.merge(load_config(&cfg)?);
    }
    let model_path = require(opts.model.clone(), "model")?;
    let spec_path = require(opts.spec.clone(), "spec")?;
    let db_path = require(opts.db.clone(), "db")?;
    let objective_text = require(opts.objective.clone(), "objective")?;
    let out = opts.out.clone().unwrap_or_else(|| PathBuf::from("anacov-out"));

    let model = load_model_checked(&model_path)?;
    let spec = load_spec_checked(&spec_path)?;
    let mut db = load_or_new_db(&db_path, &spec)?;
    let (kind, coverpoint) = parse_objective(&objective_text, &spec)?;

    let dt = opts.dt.unwrap_or(1e-4);
    let duration = opts.duration.unwrap_or(0.2);
    let (binding, bounds) = match &model.kind {
        ModelKind::Static(m) => {
            let lo = opts.x_lo.unwrap_or(m.domain.0);
            let hi = opts.x_hi.unwrap_or(m.domain.1);
            (Binding::Static { model: m.clone(), dt, duration }, (lo, hi))
        }
        ModelKind::Lti(l) => {
            let lo = require(opts.x_lo, "x-lo")?;
            let hi = require(opts.x_hi, "x-hi")?;
            let amplitude = opts.amplitude.unwrap_or(1.0);
            (Binding::LtiSine { model: l.clone(), amplitude, dt, duration }, (lo, hi))
        }
    };
    let space = ParameterSpace::new(vec![bounds]).map_err(usage_err)?;
    let budget = opts.budget.unwrap_or(20);
    let n_init = opts.n_init.unwrap_or_else(|| 2usize.max(2 * space.dimension()));
    let seed = opts.seed.unwrap_or(42);
    if n_init < 2 || budget < n_init {
        return Err(usage_err(anyhow!(
            "budget must be at least n_init (>= 2), got budget={budget} n_init={n_init}"
        )));
    }

    let objective = CoverageObjective { kind, coverpoint, simulator: binding };
    let test_id = opts
        .test_id
        .clone()
        .unwrap_or_else(|| format!("bayes-seed{seed}"));
    let sink = DbSink { db: &mut db, test_id: test_id.clone(), timestamp: now_rfc3339() };

    let outcome = run_optimization(&objective, &space, budget, n_init, seed, Some(sink));
    let history = match outcome {
        Ok(h) => h,
        Err(failure) => {
            // Keep the partial history on disk for diagnosis, then fail.
            let _ = write_out(&out, "history.csv", &failure.history.to_csv_string());
            return Err(runtime_err(anyhow!(
                "optimization failed after {} evaluations: {}",
                failure.history.evaluations,
                failure.error
            )));
        }
    };
    persist_locked(&db, &db_path)?;

    // A run is a bug hit when the objective stopped inside the illegal bin,
    // or when any evaluated trace covered an illegal cell along the way.
    let touched_illegal = gap_report(&db, &spec.targets)
        .map_err(runtime_err)?
        .entries
        .values()
        .any(|e| e.bug_tests.iter().any(|t| t == &test_id));
    let bug = history.bug_hit || touched_illegal;

    let mut summary = String::new();
    summary.push_str(&format!("objective = {objective_text}\n"));
    summary.push_str(&format!("model = {}\n", model.label()));
    summary.push_str(&format!("seed = {seed}\nbudget = {budget}\nn_init = {n_init}\n"));
    summary.push_str(&format!("dt = {dt}\nduration = {duration}\n"));
    summary.push_str(&format!("bounds = [{}:{}]\n", bounds.0, bounds.1));
    summary.push_str(&format!("evaluations = {}\n", history.evaluations));
    summary.push_str(&format!("best_x = {}\n", history.best_x[0]));
    summary.push_str(&format!("best_y_c = {}\n", history.best_y_raw));
    summary.push_str(&format!("best_objective = {}\n", history.best_objective));
    summary.push_str(&format!("bug_hit = {bug}\n"));
    summary.push_str(&format!("test_id = {test_id}\n"));

    write_out(&out, "history.csv", &history.to_csv_string())?;
    write_out(&out, "summary.txt", &summary)?;
    print!("{summary}");
    Ok(if bug { 3 } else { 0 })
}

// --- report -------------------------------------------------------------------

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportOpts {
    /// TOML file supplying defaults for any option below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Coverpoint spec file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Coverage database path; missing means an empty database.
    #[arg(long)]
    pub db: Option<PathBuf>,
    /// Output directory for report files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ReportOpts {
    fn merge(self, file: ReportOpts) -> ReportOpts {
        ReportOpts {
            config: None,
            spec: self.spec.or(file.spec),
            db: self.db.or(file.db),
            out: self.out.or(file.out),
        }
    }
}

pub fn cmd_report(mut opts: ReportOpts) -> Result<u8, Failure> {
    if let Some(cfg) = opts.config.take() {
        opts = opts.merge(load_config(&cfg)?);
    }
    let spec_path = require(opts.spec.clone(), "spec")?;
    let db_path = require(opts.db.clone(), "db")?;
    let spec = load_spec_checked(&spec_path)?;
    let db = load_or_new_db(&db_path, &spec)?;
    let report = gap_report(&db, &spec.targets).map_err(runtime_err)?;
    let text = report.render_text();
    if let Some(out) = &opts.out {
        write_out(out, "report.txt", &text)?;
        write_out(out, "report.kv", &report.render_kv())?;
    }
    print!("{text}");
    Ok(if report.has_bugs() { 3 } else { 0 })
}
