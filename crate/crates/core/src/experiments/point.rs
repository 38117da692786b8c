use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::table::ResultRow;
use crate::dirac::{euclidean_radius, exterior_distance, DiracData};
use crate::error::{LabError, Result};
use crate::lattice::{build_cubic_window, Pattern, Region};
use crate::localizer::{
    admissible_params, assemble, evaluate_index, gap_check_value, IndexKind, LocalizerConfig, LocalizerMatrix,
    Provenance, DEFAULT_GAP_FLOOR,
};
use crate::operators::{
    apply_disorder, build_model, periodic_flatten, spectral_flatten, BlockOperator, DisorderDistribution, DisorderSpec,
    FlattenedHamiltonian, ModelSpec, SymmetryData, DEFAULT_ZERO_TOL,
};

/// How the Hamiltonian is prepared before it enters the localizer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlattenMode {
    /// `sgn(h)` on the ball of twice the localizer radius around `z`.
    #[default]
    Local,
    /// `sgn(h)` on the whole window.
    Window,
    /// `sgn(h)` of the infinite clean lattice, from a torus flattening in
    /// momentum space, restricted to the localizer ball. Needs `λ = 0`.
    Periodic,
    /// `h` itself, restricted to the localizer ball.
    Off,
}

fn default_zero_tol() -> f64 {
    DEFAULT_ZERO_TOL
}

fn default_gap_floor() -> f64 {
    DEFAULT_GAP_FLOOR
}

/// One realization pipeline: build, disorder, flatten, localize, evaluate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub model: ModelSpec,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub distribution: DisorderDistribution,
    /// On-site disorder matrix as `[re, im]` entries; identity when absent.
    #[serde(default)]
    pub coupling: Option<Vec<Vec<[f64; 2]>>>,
    /// Cubic window half width. When absent, the smallest window that holds
    /// the doubled localizer ball.
    #[serde(default)]
    pub window: Option<usize>,
    pub localizer: LocalizerConfig,
    #[serde(default)]
    pub flatten: FlattenMode,
    #[serde(default = "default_zero_tol")]
    pub zero_tol: f64,
    #[serde(default = "default_gap_floor")]
    pub gap_floor: f64,
    /// Also evaluate the κ, ρ bounds, at the price of a commutator norm.
    #[serde(default)]
    pub admissibility: bool,
}

impl PointSpec {
    pub fn new(model: ModelSpec, lambda: f64, localizer: LocalizerConfig) -> Self {
        Self {
            model,
            lambda,
            distribution: DisorderDistribution::Uniform,
            coupling: None,
            window: None,
            localizer,
            flatten: FlattenMode::Local,
            zero_tol: DEFAULT_ZERO_TOL,
            gap_floor: DEFAULT_GAP_FLOOR,
            admissibility: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.model.spatial_dim().unwrap_or(self.localizer.offset.len())
    }

    /// Euclidean radius of the localizer ball.
    pub fn ball_radius(&self) -> Result<f64> {
        euclidean_radius(self.localizer.rho, self.localizer.rescale)
    }

    /// The configured window, or the smallest one whose clearance around `z`
    /// exceeds the flattening reach: twice the ball radius for local
    /// flattening, the ball radius otherwise.
    pub fn window_half_width(&self) -> Result<usize> {
        if let Some(w) = self.window {
            return Ok(w);
        }
        let reach = match self.flatten {
            FlattenMode::Local => 2.0 * self.ball_radius()?,
            _ => self.ball_radius()?,
        };
        let zmax = self.localizer.offset.iter().map(|v| v.abs()).fold(0.0, f64::max);
        Ok((reach + zmax).floor() as usize + 1)
    }

    pub fn disorder(&self, seed: u64, stream: u64) -> DisorderSpec {
        DisorderSpec {
            distribution: self.distribution.clone(),
            coupling: self.coupling.clone(),
            ..DisorderSpec::uniform(self.lambda, seed, stream) }
    }

    /// Checks everything that does not need a realization and builds the
    /// reference localizer once.
    pub fn prepare(&self) -> Result<Prepared> {
        Prepared::new(self, None)
    }
}

/// A validated [`PointSpec`] with its pattern, Dirac data and (for ℤ₂
/// classes) reference localizer.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub spec: PointSpec,
    pub pattern: Arc<Pattern>,
    pub dirac: DiracData,
    pub region: Region,
    pub reference: Option<Arc<LocalizerMatrix>>,
}

impl Prepared {
    /// Like [`PointSpec::prepare`], reusing `other`'s reference when the
    /// layout-defining parts of the two specs agree.
    pub fn new(spec: &PointSpec, other: Option<&Prepared>) -> Result<Self> {
        spec.localizer.validate()?;
        if let Some(d) = spec.model.spatial_dim() {
            if spec.localizer.offset.len() != d {
                return Err(LabError::Dimension(format!("{} needs a {d}-dimensional offset", spec.model)));
            }
        }
        if !(spec.lambda.is_finite() && spec.zero_tol > 0.0 && spec.gap_floor > 0.0) {
            return Err(LabError::InvalidArgument("λ must be finite and the tolerances positive".into()));
        }
        let half_width = spec.window_half_width()?;
        let pattern = Arc::new(build_cubic_window(spec.dim(), half_width)?);
        let dirac = spec.localizer.dirac(pattern.clone())?;
        let radius = spec.ball_radius()?;
        let region = match spec.flatten {
            FlattenMode::Local => {
                let reach = 2.0 * radius;
                let clearance = exterior_distance(&pattern, &spec.localizer.offset);
                if clearance <= reach {
                    return Err(LabError::WindowExhausted(format!(
                        "window half width {half_width} leaves clearance {clearance:.3}, the margin rule needs more than {reach:.3}"
                    )));
                }
                Region::Ball { center: spec.localizer.offset.clone(), radius: reach * (1.0 + 1e-12) }
            }
            FlattenMode::Window | FlattenMode::Periodic | FlattenMode::Off => {
                let clearance = exterior_distance(&pattern, &spec.localizer.offset);
                if clearance <= radius {
                    return Err(LabError::WindowExhausted(format!(
                        "window half width {half_width} leaves clearance {clearance:.3} for a ball of radius {radius:.3}"
                    )));
                }
                if spec.flatten == FlattenMode::Window {
                    Region::Sites((0..pattern.len()).collect())
                } else {
                    Region::Ball { center: spec.localizer.offset.clone(), radius: radius * (1.0 + 1e-12) }
                }
            }
        };
        if spec.flatten == FlattenMode::Periodic && spec.lambda != 0.0 {
            return Err(LabError::InvalidArgument("periodic flattening needs a clean model (λ = 0)".into()));
        }
        let mut prepared = Self { spec: spec.clone(), pattern, dirac, region, reference: None };
        if let Some(o) = other {
            if o.pattern.len() == prepared.pattern.len()
                && o.spec.localizer == spec.localizer
                && o.spec.flatten == spec.flatten
                && o.spec.model.fiber_dim() == spec.model.fiber_dim()
                && o.spec.model.class() == spec.model.class()
                && o.reference.is_some()
            {
                prepared.reference = o.reference.clone();
                return Ok(prepared);
            }
        }
        if index_kind(spec.model.class()) == IndexKind::Z2 {
            prepared.reference = Some(Arc::new(prepared.reference_localizer()?));
        }
        Ok(prepared)
    }

    fn reference_localizer(&self) -> Result<LocalizerMatrix> {
        let model = self.spec.localizer.reference.clone().unwrap_or(ModelSpec::TrivialReference {
            fiber: self.spec.model.fiber_dim(),
            class: Some(self.spec.model.class()),
        });
        if model.fiber_dim() != self.spec.model.fiber_dim() || model.class() != self.spec.model.class() {
            return Err(LabError::ReferenceMismatch(format!("reference {model} does not match {}", self.spec.model)));
        }
        let (h, _) = build_model(&model, &self.pattern)?;
        let flat = self.flatten(&h)?;
        assemble(&flat, model.class(), &self.dirac, &self.spec.localizer)
    }

    /// The clean model on the prepared pattern.
    pub fn clean_model(&self) -> Result<(BlockOperator, SymmetryData)> {
        build_model(&self.spec.model, &self.pattern)
    }

    /// The disordered Hamiltonian for one realization.
    pub fn hamiltonian(&self, seed: u64, stream: u64) -> Result<BlockOperator> {
        let (h, sym) = self.clean_model()?;
        apply_disorder(&h, &self.spec.disorder(seed, stream), &sym)
    }

    pub fn flatten(&self, h: &BlockOperator) -> Result<FlattenedHamiltonian> {
        match self.spec.flatten {
            FlattenMode::Off => FlattenedHamiltonian::unflattened(h, &self.region),
            FlattenMode::Periodic => {
                let p = &self.pattern;
                let origin = vec![0.0; p.dim()];
                let anchor = p.index_of(&origin).ok_or_else(|| LabError::InvalidArgument("window has no origin".into()))?;
                let radius = self.spec.ball_radius()?;
                // the ball has to fit the torus twice over
                let size = (4.0 * (radius + 2.0)).max(64.0).ceil() as usize;
                let torus = periodic_flatten(h, anchor, size.next_power_of_two(), self.spec.zero_tol)?;
                let sites = self.region.select(p);
                let dense = torus.restrict(p, &sites)?;
                FlattenedHamiltonian::from_dense(p.clone(), h.fiber_dim(), sites, dense, torus.bloch_gap())
            }
            _ => spectral_flatten(h, &self.region, self.spec.zero_tol),
        }
    }

    /// One row. Errors of the realization are recorded in the row.
    pub fn run(&self, seed: u64, stream: u64) -> ResultRow {
        let mut row = ResultRow { seed, stream, ..ResultRow::default() };
        if let Err(e) = self.fill(&mut row) {
            row.reason = Some(format!("{}: {e}", e.class()));
        }
        row
    }

    fn fill(&self, row: &mut ResultRow) -> Result<()> {
        let h = self.hamiltonian(row.seed, row.stream)?;
        let flat = self.flatten(&h)?;
        row.flattening_gap = Some(flat.gap());
        let l = assemble(&flat, self.spec.model.class(), &self.dirac, &self.spec.localizer)?.with_provenance(
            Provenance { model: Some(self.spec.model.to_string()), seed: Some(row.seed), lambda: Some(self.spec.lambda) },
        );
        // only a truncated flattening can miss couplings beyond the ball
        row.margin_ok = l.margin_ok || matches!(self.spec.flatten, FlattenMode::Periodic | FlattenMode::Off);
        if self.spec.admissibility {
            let g = if flat.is_flattened() { 1.0 } else { flat.gap() };
            let adm = admissible_params(&flat, &self.dirac, g)?;
            row.admissible = Some(adm.admits(self.spec.localizer.kappa, self.spec.localizer.rho));
        }
        let v = evaluate_index(&l, self.reference.as_deref(), self.spec.gap_floor)?;
        let g = if flat.is_flattened() { 1.0 } else { flat.gap() };
        row.index = Some(v.value);
        row.localizer_gap = Some(v.gap);
        row.guaranteed = gap_check_value(v.gap, g).pass;
        Ok(())
    }
}

fn index_kind(class: crate::operators::AzClass) -> IndexKind {
    match class {
        crate::operators::AzClass::AII => IndexKind::Z2,
        _ => IndexKind::Z,
    }
}

/// Convenience wrapper: prepare and run a single realization.
pub fn run_point(spec: &PointSpec, seed: u64, stream: u64) -> Result<ResultRow> {
    Ok(spec.prepare()?.run(seed, stream))
}
