//! Command-line frontend.
//!
//! Every subcommand starts from a JSON config file (`--config`) or, without
//! one, from built-in defaults; flag overrides are applied afterwards in the
//! order model, m, lambda, kappa, rho, r, window, offset, flatten, samples,
//! seed. Repeating a flag keeps the last value.
//!
//! Exit codes: 0 success, 1 computation error, 2 usage or schema error,
//! 3 budget exceeded (window or site budget).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::LabError;
use crate::experiments::{
    build_pool, convergence_study, interface_probe, offset_invariance, random_offsets, sweep, ConvergenceSpec, FlattenMode,
    Glue, InterfaceSpec, OffsetSpec, PathParameter, PointSpec, Probe, SweepSpec,
};
use crate::localizer::LocalizerConfig;
use crate::operators::ModelSpec;
use crate::selfcheck;

pub const DEFAULT_OUT: &str = "localizer-lab-out";

#[derive(Debug, Parser)]
#[command(name = "localizer-lab", version, about = "Spectral-localizer indices of tight-binding models")]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Index of a single realization.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Index(Overrides),
    /// Index distribution along a mass or disorder path.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Sweep(SweepArgs),
    /// Probe localizers on a glued pair of bulk models.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Interface(Overrides),
    /// Index at many localizer centers.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Offset(OffsetArgs),
    /// Index over a κ × ρ grid and its plateau.
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Converge(ConvergeArgs),
    /// Quick run of the invariant suites.
    Selfcheck {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FlattenArg {
    Local,
    Window,
    Periodic,
    Off,
}

impl From<FlattenArg> for FlattenMode {
    fn from(f: FlattenArg) -> Self {
        match f {
            FlattenArg::Local => FlattenMode::Local,
            FlattenArg::Window => FlattenMode::Window,
            FlattenArg::Periodic => FlattenMode::Periodic,
            FlattenArg::Off => FlattenMode::Off,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ParamArg {
    Mass,
    Lambda,
}

#[derive(Clone, Debug, Default, Args)]
pub struct Overrides {
    /// JSON experiment config; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model name: aii_2d, qwz_2d, ssh_1d or trivial_reference.
    #[arg(long)]
    pub model: Option<String>,
    /// Mass parameter (fiber size for trivial_reference).
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Rescaling exponent of the Dirac operator.
    #[arg(long)]
    pub r: Option<f64>,
    /// Cubic window half width.
    #[arg(long)]
    pub window: Option<usize>,
    /// Localizer center, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub offset: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub flatten: Option<FlattenArg>,
    /// Number of disorder samples.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads, capped by LOCALIZER_LAB_THREADS.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Path parameter.
    #[arg(long, value_enum)]
    pub param: Option<ParamArg>,
    /// Grid of path values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Args)]
pub struct OffsetArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Number of random centers in (0.2, 0.8)^d.
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Clone, Debug, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub common: Overrides,
    #[arg(long, value_delimiter = ',')]
    pub kappas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub rhos: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Index,
    Sweep,
    Interface,
    Offset,
    Converge,
    Selfcheck,
}

/// Config file layout. `spec` is parsed according to `experiment`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub spec: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSpec {
    pub point: PointSpec,
    #[serde(default)]
    pub seed: u64,
    /// Disorder stream; the sample number in ensemble runs.
    #[serde(default)]
    pub stream: u64,
}

#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Lab(LabError),
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        CliError::Lab(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Lab(LabError::Budget(_) | LabError::WindowExhausted(_)) => 3,
            CliError::Lab(_) => 1,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Schema(_) => "schema",
            CliError::Lab(e) => e.class(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "{m}"),
            CliError::Lab(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Messages go to stdout, errors to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> CliResult<i32> {
    match command {
        Command::Index(o) => run_index(&o),
        Command::Sweep(a) => run_sweep(&a),
        Command::Interface(o) => run_interface(&o),
        Command::Offset(a) => run_offset(&a),
        Command::Converge(a) => run_converge(&a),
        Command::Selfcheck { out } => run_selfcheck(out.as_deref()),
    }
}

/// Reads the config file and parses its `spec` as `T`, reporting the key
/// path of the first schema violation.
pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path, kind: ExperimentKind) -> CliResult<(ExperimentConfig, T)> {
    let text = std::fs::read_to_string(path).map_err(|e| schema(format!("cannot read {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let cfg: ExperimentConfig =
        serde_path_to_error::deserialize(de).map_err(|e| schema(format!("{}: at `{}`: {}", path.display(), e.path(), e.inner())))?;
    if cfg.experiment != kind {
        return Err(schema(format!("{} holds a {:?} experiment, not {kind:?}", path.display(), cfg.experiment)));
    }
    let spec: T = serde_path_to_error::deserialize(cfg.spec.clone())
        .map_err(|e| schema(format!("{}: at `spec.{}`: {}", path.display(), e.path(), e.inner())))?;
    Ok((cfg, spec))
}

fn model_from_flags(o: &Overrides, current: Option<&ModelSpec>) -> CliResult<Option<ModelSpec>> {
    match (&o.model, o.m, current) {
        (Some(name), m, _) => {
            let params: Vec<f64> = m.into_iter().collect();
            Ok(Some(ModelSpec::from_name(name, &params).map_err(|e| schema(e.to_string()))?))
        }
        (None, Some(m), Some(cur)) => {
            if cur.mass().is_none() {
                return Err(schema(format!("--m does not apply to {cur}")));
            }
            Ok(Some(cur.with_mass(m)))
        }
        (None, Some(_), None) => Err(schema("--m needs --model")),
        (None, None, _) => Ok(None),
    }
}

/// Applies the model and localizer overrides to a point spec.
fn override_point(p: &mut PointSpec, o: &Overrides) -> CliResult<()> {
    if let Some(m) = model_from_flags(o, Some(&p.model))? {
        p.model = m;
    }
    if let Some(v) = o.lambda {
        p.lambda = v;
    }
    if let Some(v) = o.kappa {
        p.localizer.kappa = v;
    }
    if let Some(v) = o.rho {
        p.localizer.rho = v;
    }
    if let Some(v) = o.r {
        p.localizer.rescale = v;
    }
    if let Some(v) = o.window {
        p.window = Some(v);
    }
    if let Some(v) = &o.offset {
        p.localizer.offset = v.clone();
    }
    if let Some(v) = o.flatten {
        p.flatten = v.into();
    }
    Ok(())
}

/// Point spec from flags alone. Clean runs default to the infinite-volume
/// (periodic) flattening, disordered ones to the local one.
fn point_from_flags(o: &Overrides) -> CliResult<PointSpec> {
    let model = model_from_flags(o, None)?.ok_or_else(|| schema("--model is required without --config"))?;
    let dim = model.spatial_dim().or(o.offset.as_ref().map(Vec::len)).unwrap_or(1);
    let lambda = o.lambda.unwrap_or(0.0);
    let mut p = PointSpec::new(model, lambda, LocalizerConfig::new(0.3, 4.0, vec![0.5; dim]));
    p.flatten = if lambda == 0.0 { FlattenMode::Periodic } else { FlattenMode::Local };
    override_point(&mut p, &Overrides { model: None, m: None, ..o.clone() })?;
    Ok(p)
}

fn reject(kind: &str, flags: &[(&str, bool)]) -> CliResult<()> {
    match flags.iter().find(|(_, set)| *set) {
        Some((name, _)) => Err(schema(format!("--{name} does not apply to {kind}"))),
        None => Ok(()),
    }
}

fn out_dir(o: &Overrides, cfg: Option<&ExperimentConfig>) -> PathBuf {
    o.out.clone().or_else(|| cfg.and_then(|c| c.out.clone())).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn workers(o: &Overrides, cfg: Option<&ExperimentConfig>) -> Option<usize> {
    o.workers.or_else(|| cfg.and_then(|c| c.workers))
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(LabError::from)?;
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).map_err(LabError::from)?).map_err(LabError::from)?;
    Ok(path)
}

fn envelope<C: Serialize, R: Serialize>(kind: ExperimentKind, config: &C, result: &R) -> CliResult<serde_json::Value> {
    Ok(serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": kind,
        "config": serde_json::to_value(config).map_err(LabError::from)?,
        "result": serde_json::to_value(result).map_err(LabError::from)?,
    }))
}

fn run_index(o: &Overrides) -> CliResult<i32> {
    let (cfg, mut spec) = match &o.config {
        Some(path) => {
            let (cfg, spec) = load_config::<IndexSpec>(path, ExperimentKind::Index)?;
            (Some(cfg), spec)
        }
        None => (None, IndexSpec { point: point_from_flags(o)?, seed: 0, stream: 0 }),
    };
    reject("index", &[("samples", o.samples.is_some())])?;
    if cfg.is_some() {
        override_point(&mut spec.point, o)?;
    }
    if let Some(s) = o.seed {
        spec.seed = s;
    }
    let prepared = spec.point.prepare()?;
    let row = prepared.run(spec.seed, spec.stream);
    let path = write_json(&out_dir(o, cfg.as_ref()), "index.json", &envelope(ExperimentKind::Index, &spec, &row)?)?;
    let label = if prepared.reference.is_some() { "Z2" } else { "Z" };
    match row.index {
        Some(v) => {
            println!("{label} index: {v}");
            if let Some(g) = row.localizer_gap {
                println!("localizer gap: {g:.6e}");
            }
            if let Some(g) = row.flattening_gap {
                println!("flattening gap: {g:.6e}");
            }
            println!("wrote {}", path.display());
            Ok(0)
        }
        None => {
            let reason = row.reason.unwrap_or_default();
            eprintln!("error[{}]: {reason}", reason.split(':').next().unwrap_or("unknown"));
            println!("wrote {}", path.display());
            Ok(1)
        }
    }
}

fn run_sweep(a: &SweepArgs) -> CliResult<i32> {
    let o = &a.common;
    let (cfg, mut spec) = match &o.config {
        Some(path) => {
            let (cfg, spec) = load_config::<SweepSpec>(path, ExperimentKind::Sweep)?;
            (Some(cfg), spec)
        }
        None => {
            let values = a.values.clone().ok_or_else(|| schema("--values is required without --config"))?;
            let parameter = match a.param {
                Some(ParamArg::Mass) => PathParameter::Mass,
                Some(ParamArg::Lambda) => PathParameter::Lambda,
                None => return Err(schema("--param is required without --config")),
            };
            let mut base = point_from_flags(o)?;
            if o.flatten.is_none() {
                base.flatten = FlattenMode::Local;
            }
            (None, SweepSpec { base, parameter, values, samples: 1, seed: 0, max_resamples: 3 })
        }
    };
    if cfg.is_some() {
        override_point(&mut spec.base, o)?;
        if let Some(v) = &a.values {
            spec.values = v.clone();
        }
        if let Some(p) = a.param {
            spec.parameter = if p == ParamArg::Mass { PathParameter::Mass } else { PathParameter::Lambda };
        }
    }
    if let Some(v) = o.samples {
        spec.samples = v;
    }
    if let Some(v) = o.seed {
        spec.seed = v;
    }
    spec.validate().map_err(|e| schema(e.to_string()))?;
    let pool = build_pool(workers(o, cfg.as_ref()))?;
    let table = sweep(&spec, &pool)?;
    let dir = out_dir(o, cfg.as_ref());
    table.write_all(&dir, &spec)?;
    for p in &table.points {
        let shares: Vec<String> =
            p.distribution.iter().map(|s| format!("{}: {:.3} [{:.3}, {:.3}]", s.value, s.p, s.lo, s.hi)).collect();
        println!("t = {:<8} defined {}/{}  {}", p.t, p.defined, p.samples, shares.join("  "));
    }
    println!("wrote {}", dir.display());
    Ok(0)
}

/// Defaults: aii_2d m = 1 on `x₂ ≥ 0` glued to m = 3, 41 × 81 window,
/// one probe ten sites deep on each side.
pub fn default_interface() -> InterfaceSpec {
    InterfaceSpec {
        first: ModelSpec::Aii2d { m: 1.0 },
        second: ModelSpec::Aii2d { m: 3.0 },
        lambda: 0.5,
        distribution: Default::default(),
        half_widths: vec![20, 40],
        axis: 1,
        threshold: 0.0,
        glue: Glue::Hard,
        probes: vec![Probe { center: vec![0.5, 9.5], rho: None }, Probe { center: vec![0.5, -10.5], rho: None }],
        kappa: 0.3,
        rho: 4.0,
        rescale: 0.0,
        samples: (0..5).collect(),
        seed: 0,
        max_resamples: 3,
        zero_tol: crate::operators::DEFAULT_ZERO_TOL,
        gap_floor: crate::localizer::DEFAULT_GAP_FLOOR,
        spectrum: true,
        collar: 3.0,
        decay_radius: 10.0,
        decay_k: vec![1, 2, 4],
    }
}

fn run_interface(o: &Overrides) -> CliResult<i32> {
    let (cfg, mut spec) = match &o.config {
        Some(path) => {
            let (cfg, spec) = load_config::<InterfaceSpec>(path, ExperimentKind::Interface)?;
            (Some(cfg), spec)
        }
        None => (None, default_interface()),
    };
    reject(
        "interface",
        &[("window", o.window.is_some()), ("offset", o.offset.is_some()), ("flatten", o.flatten.is_some())],
    )?;
    if let Some(m) = model_from_flags(o, Some(&spec.first))? {
        spec.first = m;
    }
    if let Some(v) = o.lambda {
        spec.lambda = v;
    }
    if let Some(v) = o.kappa {
        spec.kappa = v;
    }
    if let Some(v) = o.rho {
        spec.rho = v;
    }
    if let Some(v) = o.r {
        spec.rescale = v;
    }
    if let Some(n) = o.samples {
        spec.samples = (0..n).collect();
    }
    if let Some(v) = o.seed {
        spec.seed = v;
    }
    let pool = build_pool(workers(o, cfg.as_ref()))?;
    let report = interface_probe(&spec, &pool)?;
    let path = write_json(&out_dir(o, cfg.as_ref()), "interface.json", &envelope(ExperimentKind::Interface, &spec, &report)?)?;
    for r in &report.probes {
        println!(
            "probe {} sample {}: interface {:?} bulk {:?} {}",
            r.probe,
            r.sample,
            r.interface_index,
            r.bulk_index,
            if r.matches { "match" } else { "MISMATCH" }
        );
    }
    if let Some(v) = report.min_abs_eigenvalue {
        println!("min |eigenvalue| of the glued Hamiltonian: {v:.6e}");
    }
    println!("wrote {}", path.display());
    Ok(if report.all_match { 0 } else { 1 })
}

fn run_offset(a: &OffsetArgs) -> CliResult<i32> {
    let o = &a.common;
    let (cfg, mut spec) = match &o.config {
        Some(path) => {
            let (cfg, spec) = load_config::<OffsetSpec>(path, ExperimentKind::Offset)?;
            (Some(cfg), spec)
        }
        None => {
            let mut base = point_from_flags(o)?;
            if o.flatten.is_none() && base.lambda != 0.0 {
                base.flatten = FlattenMode::Local;
            }
            let offsets = random_offsets(a.count.unwrap_or(10), base.dim(), 0.2, 0.8, o.seed.unwrap_or(0));
            (None, OffsetSpec { base, offsets, samples: vec![0], seed: 0, max_resamples: 3 })
        }
    };
    if cfg.is_some() {
        override_point(&mut spec.base, o)?;
        if let Some(n) = a.count {
            spec.offsets = random_offsets(n, spec.base.dim(), 0.2, 0.8, o.seed.unwrap_or(spec.seed));
        }
    }
    if let Some(n) = o.samples {
        spec.samples = (0..n).collect();
    }
    if let Some(v) = o.seed {
        spec.seed = v;
    }
    let pool = build_pool(workers(o, cfg.as_ref()))?;
    let report = offset_invariance(&spec, &pool)?;
    let path = write_json(&out_dir(o, cfg.as_ref()), "offset.json", &envelope(ExperimentKind::Offset, &spec, &report)?)?;
    for v in &report.verdicts {
        println!("sample {}: {:?} {}", v.sample, v.values, if v.consistent { "consistent" } else { "INCONSISTENT" });
    }
    for line in &report.violations {
        println!("violation: {line}");
    }
    println!("wrote {}", path.display());
    Ok(if report.pass { 0 } else { 1 })
}

fn run_converge(a: &ConvergeArgs) -> CliResult<i32> {
    let o = &a.common;
    let (cfg, mut spec) = match &o.config {
        Some(path) => {
            let (cfg, spec) = load_config::<ConvergenceSpec>(path, ExperimentKind::Converge)?;
            (Some(cfg), spec)
        }
        None => {
            let base = point_from_flags(o)?;
            let spec = ConvergenceSpec {
                base,
                kappas: vec![0.1, 0.2, 0.3, 0.4],
                rhos: vec![2.0, 3.0, 4.0, 5.0],
                samples: vec![0],
                seed: 0,
                gap_threshold: 0.05,
                admissibility: false,
            };
            (None, spec)
        }
    };
    if cfg.is_some() {
        override_point(&mut spec.base, o)?;
    }
    if let Some(v) = &a.kappas {
        spec.kappas = v.clone();
    }
    if let Some(v) = &a.rhos {
        spec.rhos = v.clone();
    }
    if let Some(n) = o.samples {
        spec.samples = (0..n).collect();
    }
    if let Some(v) = o.seed {
        spec.seed = v;
    }
    let pool = build_pool(workers(o, cfg.as_ref()))?;
    let report = convergence_study(&spec, &pool)?;
    let path = write_json(&out_dir(o, cfg.as_ref()), "convergence.json", &envelope(ExperimentKind::Converge, &spec, &report)?)?;
    for c in &report.cells {
        println!("κ = {:<6} ρ = {:<6} index {:?} gap {:?}", c.kappa, c.rho, c.value, c.min_gap);
    }
    match &report.plateau {
        Some(p) => println!(
            "plateau: index {} on {} cells, κ ∈ [{}, {}], ρ ∈ [{}, {}], recommended (κ, ρ) = ({}, {})",
            p.value,
            p.cells.len(),
            p.kappa_range.0,
            p.kappa_range.1,
            p.rho_range.0,
            p.rho_range.1,
            p.recommended.0,
            p.recommended.1
        ),
        None => println!("no plateau"),
    }
    println!("wrote {}", path.display());
    Ok(0)
}

fn run_selfcheck(out: Option<&Path>) -> CliResult<i32> {
    let checks = selfcheck::run_all();
    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(dir) = out {
        let value = serde_json::json!({ "version": env!("CARGO_PKG_VERSION"), "checks": checks });
        write_json(dir, "selfcheck.json", &value)?;
    }
    Ok(if checks.iter().all(|c| c.pass) { 0 } else { 1 })
}
