use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sweep::stream_for;
use crate::dirac::{euclidean_radius, exterior_distance, DiracData};
use crate::error::{LabError, Result};
use crate::lattice::{build_box_window, dist, Pattern, Region};
use crate::linalg::HermitianBand;
use crate::localizer::{assemble, evaluate_index, IndexValue, LocalizerConfig, LocalizerMatrix, DEFAULT_GAP_FLOOR};
use crate::operators::{
    apply_disorder, build_model, decay_diagnostic, spectral_flatten, AzClass, BlockOperator, DecayTable,
    DisorderDistribution, DisorderSpec, ModelSpec, DEFAULT_ZERO_TOL,
};

/// How the two bulk Hamiltonians are joined across the partition.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Glue {
    /// Blocks of the first model inside the region, of the second outside,
    /// the mean on blocks that cross.
    #[default]
    Hard,
    /// Linear ramp of the weight over a collar of this width.
    Smooth { width: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    pub center: Vec<f64>,
    /// Ball radius; the spec's `rho` when absent.
    #[serde(default)]
    pub rho: Option<f64>,
}

fn default_axis() -> usize {
    1
}
fn default_collar() -> f64 {
    3.0
}
fn default_decay_radius() -> f64 {
    10.0
}
fn default_decay_k() -> Vec<u32> {
    vec![1, 2, 4]
}
fn default_zero_tol() -> f64 {
    DEFAULT_ZERO_TOL
}
fn default_gap_floor() -> f64 {
    DEFAULT_GAP_FLOOR
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceSpec {
    /// Model on the region `x[axis] ≥ threshold`.
    pub first: ModelSpec,
    /// Model on the complement.
    pub second: ModelSpec,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub distribution: DisorderDistribution,
    /// Box window half widths per axis.
    pub half_widths: Vec<usize>,
    #[serde(default = "default_axis")]
    pub axis: usize,
    #[serde(default)]
    pub threshold: f64,
    #[serde(default)]
    pub glue: Glue,
    pub probes: Vec<Probe>,
    pub kappa: f64,
    pub rho: f64,
    #[serde(default)]
    pub rescale: f64,
    pub samples: Vec<usize>,
    pub seed: u64,
    #[serde(default)]
    pub max_resamples: u32,
    #[serde(default = "default_zero_tol")]
    pub zero_tol: f64,
    #[serde(default = "default_gap_floor")]
    pub gap_floor: f64,
    /// Smallest `|eigenvalue|` of the glued Hamiltonian on the whole window.
    #[serde(default = "default_true")]
    pub spectrum: bool,
    /// Half width of the collar whose rows enter the decay diagnostic.
    #[serde(default = "default_collar")]
    pub collar: f64,
    /// Radius of the flattening used for the decay diagnostic; 0 skips it.
    #[serde(default = "default_decay_radius")]
    pub decay_radius: f64,
    #[serde(default = "default_decay_k")]
    pub decay_k: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeResult {
    pub probe: usize,
    pub sample: usize,
    pub seed: u64,
    pub stream: u64,
    /// Whether the probe sits in the first model's region.
    pub first_side: bool,
    pub interface_index: Option<i64>,
    pub bulk_index: Option<i64>,
    pub matches: bool,
    pub localizer_gap: Option<f64>,
    pub flattening_gap: Option<f64>,
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumStat {
    pub sample: usize,
    pub stream: u64,
    pub min_abs_eigenvalue: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InterfaceReport {
    pub probes: Vec<ProbeResult>,
    pub spectra: Vec<SpectrumStat>,
    /// Decay of the flattened glued Hamiltonian on collar rows, first sample.
    pub decay: Option<DecayTable>,
    pub resamples: u32,
    pub all_match: bool,
    /// Smallest `|eigenvalue|` over all samples.
    pub min_abs_eigenvalue: Option<f64>,
}

/// Pairs of probes on both sides of the boundary plane at the given depths,
/// with radius `scale · depth^ξ`. Other coordinates sit at ½.
pub fn bulk_limit_probes(dim: usize, axis: usize, threshold: f64, depths: &[f64], scale: f64, xi: f64) -> Vec<Probe> {
    let plane = threshold - 0.5;
    let mut out = Vec::new();
    for &depth in depths {
        for sign in [1.0, -1.0] {
            let mut center = vec![0.5; dim];
            center[axis] = plane + sign * depth;
            out.push(Probe { center, rho: Some(scale * depth.powf(xi)) });
        }
    }
    out
}

/// Weight of the first model at `x`.
fn profile(glue: &Glue, x: &[f64], axis: usize, threshold: f64) -> f64 {
    match glue {
        Glue::Hard => {
            if x[axis] >= threshold {
                1.0
            } else {
                0.0
            }
        }
        Glue::Smooth { width } => (0.5 + (x[axis] - (threshold - 0.5)) / width).clamp(0.0, 1.0),
    }
}

/// `w h₁ + (1 − w) h₂` blockwise with `w = (χ(x) + χ(y))/2`.
pub fn glue(h1: &BlockOperator, h2: &BlockOperator, glue: &Glue, axis: usize, threshold: f64) -> Result<BlockOperator> {
    if !Arc::ptr_eq(h1.pattern(), h2.pattern()) && h1.pattern().len() != h2.pattern().len() {
        return Err(LabError::Dimension("bulk models live on different patterns".into()));
    }
    if h1.fiber_dim() != h2.fiber_dim() {
        return Err(LabError::Dimension("bulk models have different fibers".into()));
    }
    let p = h1.pattern().clone();
    if axis >= p.dim() {
        return Err(LabError::InvalidArgument(format!("partition axis {axis} in d = {}", p.dim())));
    }
    let chi: Vec<f64> = p.sites().map(|x| profile(glue, x, axis, threshold)).collect();
    let mut out = BlockOperator::new(p, h1.fiber_dim());
    for (x, y, b) in h1.blocks() {
        let w = 0.5 * (chi[x] + chi[y]);
        if w != 0.0 {
            out.add_block(x, y, &(b * C64::new(w, 0.0)))?;
        }
    }
    for (x, y, b) in h2.blocks() {
        let w = 1.0 - 0.5 * (chi[x] + chi[y]);
        if w != 0.0 {
            out.add_block(x, y, &(b * C64::new(w, 0.0)))?;
        }
    }
    Ok(out)
}

/// Per-probe setup shared by all samples.
struct ProbeSetup {
    first_side: bool,
    config: LocalizerConfig,
    dirac: DiracData,
    region: Region,
    reference: Option<LocalizerMatrix>,
}

impl InterfaceSpec {
    fn validate(&self) -> Result<()> {
        if self.first.class() != self.second.class() || self.first.fiber_dim() != self.second.fiber_dim() {
            return Err(LabError::InvalidArgument(format!("{} and {} are in different classes", self.first, self.second)));
        }
        if self.probes.is_empty() || self.samples.is_empty() {
            return Err(LabError::InvalidArgument("interface probing needs probes and samples".into()));
        }
        if self.axis >= self.half_widths.len() {
            return Err(LabError::InvalidArgument(format!("partition axis {} in d = {}", self.axis, self.half_widths.len())));
        }
        if let Glue::Smooth { width } = self.glue {
            if !(width > 0.0) {
                return Err(LabError::InvalidArgument("smooth glue needs a positive width".into()));
            }
        }
        Ok(())
    }

    fn disorder(&self, stream: u64) -> DisorderSpec {
        DisorderSpec { distribution: self.distribution.clone(), ..DisorderSpec::uniform(self.lambda, self.seed, stream) }
    }
}

/// Checks the collar rule: the doubled ball around each probe must stay on
/// one side of the glue and inside the window.
fn setup_probe(spec: &InterfaceSpec, p: &Arc<Pattern>, probe: &Probe) -> Result<ProbeSetup> {
    let rho = probe.rho.unwrap_or(spec.rho);
    let config = LocalizerConfig { kappa: spec.kappa, rho, offset: probe.center.clone(), rescale: spec.rescale, reference: None };
    config.validate()?;
    let dirac = config.dirac(p.clone())?;
    let reach = 2.0 * euclidean_radius(rho, spec.rescale)?;
    let side = profile(&spec.glue, &probe.center, spec.axis, spec.threshold);
    let to_other = p
        .sites()
        .filter(|x| profile(&spec.glue, x, spec.axis, spec.threshold) != side)
        .map(|x| dist(x, &probe.center))
        .fold(f64::INFINITY, f64::min);
    if to_other <= reach || (side != 0.0 && side != 1.0) {
        return Err(LabError::InvalidArgument(format!(
            "probe at {:?} is {to_other:.2} from the glue collar, needs more than 2R = {reach:.2}",
            probe.center
        )));
    }
    if exterior_distance(p, &probe.center) <= reach {
        return Err(LabError::WindowExhausted(format!("probe ball at {:?} with 2R = {reach:.2} leaves the window", probe.center)));
    }
    let region = Region::Ball { center: probe.center.clone(), radius: reach * (1.0 + 1e-12) };
    let class = spec.first.class();
    let reference = if class == AzClass::AII {
        let (r, _) = build_model(&ModelSpec::TrivialReference { fiber: spec.first.fiber_dim(), class: Some(class) }, p)?;
        let flat = spectral_flatten(&r, &region, spec.zero_tol)?;
        Some(assemble(&flat, class, &dirac, &config)?)
    } else {
        None
    };
    Ok(ProbeSetup { first_side: side == 1.0, config, dirac, region, reference })
}

fn probe_index(h: &BlockOperator, class: AzClass, s: &ProbeSetup, spec: &InterfaceSpec) -> Result<(IndexValue, f64)> {
    let flat = spectral_flatten(h, &s.region, spec.zero_tol)?;
    let l = assemble(&flat, class, &s.dirac, &s.config)?;
    Ok((evaluate_index(&l, s.reference.as_ref(), spec.gap_floor)?, flat.gap()))
}

/// Smallest `|eigenvalue|` of `h` through a banded eigensolve, with sites
/// ordered so that the longest axis varies slowest.
pub fn min_abs_eigenvalue(h: &BlockOperator) -> Result<f64> {
    let p = h.pattern();
    let n = h.fiber_dim();
    let mut axes: Vec<usize> = (0..p.dim()).collect();
    let spans: Vec<f64> = p.bounds().iter().map(|(lo, hi)| hi - lo).collect();
    axes.sort_by(|&a, &b| spans[b].total_cmp(&spans[a]));
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&i, &j| {
        let (x, y) = (p.site(i), p.site(j));
        axes.iter().map(|&a| x[a].total_cmp(&y[a])).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut rank = vec![0; p.len()];
    for (k, &i) in order.iter().enumerate() {
        rank[i] = k;
    }
    let kd = h.blocks().map(|(x, y, _)| rank[x].abs_diff(rank[y]) * n + n - 1).max().unwrap_or(0);
    let mut band = HermitianBand::new(p.len() * n, kd);
    for (x, y, b) in h.blocks() {
        for a in 0..n {
            for c in 0..n {
                let (i, j) = (rank[x] * n + a, rank[y] * n + c);
                if i >= j && b[[a, c]] != C64::new(0.0, 0.0) {
                    band.add(i, j, b[[a, c]])?;
                }
            }
        }
    }
    band.min_abs_eigenvalue()
}

struct SampleOutcome {
    probes: Vec<ProbeResult>,
    spectrum: Option<SpectrumStat>,
    decay: Option<DecayTable>,
    resamples: u32,
}

/// Runs every probe on the glued Hamiltonian and on the bulk model of its
/// side, for every sample. Zero modes in any flattening redraw the whole
/// sample, up to `max_resamples` times.
pub fn interface_probe(spec: &InterfaceSpec, pool: &rayon::ThreadPool) -> Result<InterfaceReport> {
    spec.validate()?;
    let p = Arc::new(build_box_window(&spec.half_widths)?);
    let setups: Vec<ProbeSetup> = spec.probes.iter().map(|probe| setup_probe(spec, &p, probe)).collect::<Result<_>>()?;
    let (h1, sym) = build_model(&spec.first, &p)?;
    let (h2, _) = build_model(&spec.second, &p)?;
    let class = sym.class;

    let run_sample = |k: usize, sample: usize| -> Result<SampleOutcome> {
        let mut attempt = 0;
        loop {
            let stream = stream_for(sample, attempt);
            let d1 = apply_disorder(&h1, &spec.disorder(stream), &sym)?;
            let d2 = apply_disorder(&h2, &spec.disorder(stream), &sym)?;
            let hi = glue(&d1, &d2, &spec.glue, spec.axis, spec.threshold)?;
            let mut zero_mode = false;
            let mut probes = Vec::new();
            for (j, s) in setups.iter().enumerate() {
                let bulk = if s.first_side { &d1 } else { &d2 };
                let inter = probe_index(&hi, class, s, spec);
                let alone = probe_index(bulk, class, s, spec);
                zero_mode |= [&inter, &alone].iter().any(|r| matches!(r, Err(LabError::ZeroMode { .. })));
                let reason = [&inter, &alone]
                    .iter()
                    .find_map(|r| r.as_ref().err().map(|e| format!("{}: {e}", e.class())));
                let (iv, bv) = (inter.as_ref().ok(), alone.as_ref().ok());
                probes.push(ProbeResult {
                    probe: j,
                    sample,
                    seed: spec.seed,
                    stream,
                    first_side: s.first_side,
                    interface_index: iv.map(|v| v.0.value),
                    bulk_index: bv.map(|v| v.0.value),
                    matches: iv.is_some() && iv.map(|v| v.0.value) == bv.map(|v| v.0.value),
                    localizer_gap: iv.map(|v| v.0.gap),
                    flattening_gap: iv.map(|v| v.1),
                    reason,
                });
            }
            if zero_mode && attempt < spec.max_resamples {
                attempt += 1;
                continue;
            }
            let spectrum = if spec.spectrum {
                Some(SpectrumStat { sample, stream, min_abs_eigenvalue: min_abs_eigenvalue(&hi)? })
            } else {
                None
            };
            let decay = if k == 0 && spec.decay_radius > 0.0 {
                let mut center = vec![0.5; p.dim()];
                center[spec.axis] = spec.threshold - 0.5;
                let window = Region::Ball { center, radius: spec.decay_radius };
                let plane = spec.threshold - 0.5;
                let rows: Vec<usize> =
                    (0..p.len()).filter(|&i| (p.site(i)[spec.axis] - plane).abs() <= spec.collar).collect();
                match spectral_flatten(&hi, &window, spec.zero_tol) {
                    Ok(f) => Some(decay_diagnostic(&f, &spec.decay_k, Some(&Region::Sites(rows)))),
                    Err(_) => None,
                }
            } else {
                None
            };
            return Ok(SampleOutcome { probes, spectrum, decay, resamples: attempt });
        }
    };

    let outcomes: Vec<Result<SampleOutcome>> =
        pool.install(|| spec.samples.par_iter().enumerate().map(|(k, &s)| run_sample(k, s)).collect());
    let mut report = InterfaceReport {
        probes: Vec::new(),
        spectra: Vec::new(),
        decay: None,
        resamples: 0,
        all_match: true,
        min_abs_eigenvalue: None,
    };
    for o in outcomes {
        let o = o?;
        report.all_match &= o.probes.iter().all(|r| r.matches);
        report.probes.extend(o.probes);
        report.spectra.extend(o.spectrum);
        report.resamples += o.resamples;
        if report.decay.is_none() {
            report.decay = o.decay;
        }
    }
    report.min_abs_eigenvalue = report.spectra.iter().map(|s| s.min_abs_eigenvalue).reduce(f64::min);
    Ok(report)
}
