//! Finite windows of discrete point patterns with a canonical site order.

use std::collections::HashMap;
use std::io::Read;

use crate::error::{LabError, Result};

/// Offsets must keep every coordinate at least this far from lattice values.
pub const OFFSET_CLEARANCE: f64 = 0.1;

/// Upper bound on the number of sites a generated window may hold.
pub const DEFAULT_MAX_SITES: usize = 1 << 22;

#[derive(Clone, Debug, PartialEq)]
pub enum PatternKind {
    /// `{-w, …, w}^d ⊂ ℤ^d`.
    Cubic { half_width: usize },
    /// `∏_j {-w_j, …, w_j} ⊂ ℤ^d`.
    Box { half_widths: Vec<usize> },
    /// Arbitrary point set loaded from coordinates.
    Loaded,
}

#[derive(Clone, Debug)]
pub struct Pattern {
    dim: usize,
    coords: Vec<f64>,
    kind: PatternKind,
    min_separation: f64,
    index: HashMap<Vec<u64>, usize>,
}

impl Pattern {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn kind(&self) -> &PatternKind {
        &self.kind
    }

    /// Per-axis half widths of a generated window.
    pub fn half_widths(&self) -> Option<Vec<usize>> {
        match &self.kind {
            PatternKind::Cubic { half_width } => Some(vec![*half_width; self.dim]),
            PatternKind::Box { half_widths } => Some(half_widths.clone()),
            PatternKind::Loaded => None,
        }
    }

    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    pub fn site(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn sites(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        self.index.get(&key(x)).copied()
    }

    /// Per-axis `(min, max)` of the site coordinates.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for x in self.sites() {
            for (j, &v) in x.iter().enumerate() {
                b[j].0 = b[j].0.min(v);
                b[j].1 = b[j].1.max(v);
            }
        }
        b
    }

    /// Builds a pattern from arbitrary points; sites are sorted
    /// lexicographically and must be pairwise distinct.
    pub fn from_points(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::InvalidArgument("pattern dimension must be positive".into()));
        }
        let mut points = points;
        for p in &points {
            if p.len() != dim || p.iter().any(|v| !v.is_finite()) {
                return Err(LabError::InvalidArgument(format!(
                    "site {p:?} does not have {dim} finite coordinates"
                )));
            }
        }
        points.sort_by(|a, b| lex_cmp(a, b));
        let min_separation = min_pairwise_distance(&points);
        if points.len() > 1 && min_separation <= 0.0 {
            return Err(LabError::InvalidArgument("pattern contains duplicate sites".into()));
        }
        let coords: Vec<f64> = points.into_iter().flatten().collect();
        Ok(Self::assemble(dim, coords, PatternKind::Loaded, min_separation))
    }

    /// Reads one site per CSV row with `dim` coordinate columns and no header.
    pub fn from_csv<R: Read>(reader: R, dim: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut points = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != dim {
                return Err(LabError::InvalidArgument(format!(
                    "row {} has {} columns, expected {dim}",
                    line + 1,
                    record.len()
                )));
            }
            let row = record
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|_| {
                        LabError::InvalidArgument(format!("row {}: cannot parse {f:?}", line + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            points.push(row);
        }
        Self::from_points(dim, points)
    }

    fn assemble(dim: usize, coords: Vec<f64>, kind: PatternKind, min_separation: f64) -> Self {
        let index = coords.chunks_exact(dim).enumerate().map(|(i, x)| (key(x), i)).collect();
        Self { dim, coords, kind, min_separation, index }
    }

    /// Rejects offsets that come closer than [`OFFSET_CLEARANCE`] to the
    /// pattern: per coordinate against the integer grid for cubic windows,
    /// in Euclidean distance for loaded patterns.
    pub fn check_offset(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim {
            return Err(LabError::Dimension(format!("offset has {} coordinates, pattern has d = {}", z.len(), self.dim)));
        }
        match self.kind {
            PatternKind::Cubic { .. } | PatternKind::Box { .. } => {
                for (j, &zj) in z.iter().enumerate() {
                    let dist = (zj - zj.round()).abs();
                    if dist < OFFSET_CLEARANCE {
                        return Err(LabError::Offset(format!(
                            "coordinate {j} of z = {z:?} is {dist:.3} from a lattice value (need ≥ {OFFSET_CLEARANCE})"
                        )));
                    }
                }
            }
            PatternKind::Loaded => {
                let nearest = self.sites().map(|x| dist(x, z)).fold(f64::INFINITY, f64::min);
                if nearest < OFFSET_CLEARANCE {
                    return Err(LabError::Offset(format!(
                        "z = {z:?} is {nearest:.3} from the nearest site (need ≥ {OFFSET_CLEARANCE})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `{-half_width, …, half_width}^d` in lexicographic order.
pub fn build_cubic_window(d: usize, half_width: usize) -> Result<Pattern> {
    build_cubic_window_with_budget(d, half_width, DEFAULT_MAX_SITES)
}

pub fn build_cubic_window_with_budget(d: usize, half_width: usize, max_sites: usize) -> Result<Pattern> {
    if d == 0 {
        return Err(LabError::InvalidArgument("cubic window needs d ≥ 1 and half_width ≥ 1".into()));
    }
    let mut p = build_box_window_with_budget(&vec![half_width; d], max_sites)?;
    p.kind = PatternKind::Cubic { half_width };
    Ok(p)
}

/// `∏_j {-w_j, …, w_j}` in lexicographic order.
pub fn build_box_window(half_widths: &[usize]) -> Result<Pattern> {
    build_box_window_with_budget(half_widths, DEFAULT_MAX_SITES)
}

pub fn build_box_window_with_budget(half_widths: &[usize], max_sites: usize) -> Result<Pattern> {
    let d = half_widths.len();
    if d == 0 || half_widths.contains(&0) {
        return Err(LabError::InvalidArgument("window needs d ≥ 1 and half widths ≥ 1".into()));
    }
    let count: f64 = half_widths.iter().map(|&w| (2 * w + 1) as f64).product();
    if count > max_sites as f64 {
        return Err(LabError::Budget(format!("window with {count:e} sites exceeds the budget of {max_sites}")));
    }
    let count = count as usize;
    let w: Vec<i64> = half_widths.iter().map(|&v| v as i64).collect();
    let mut coords = Vec::with_capacity(count * d);
    let mut cur: Vec<i64> = w.iter().map(|v| -v).collect();
    for _ in 0..count {
        coords.extend(cur.iter().map(|&v| v as f64));
        // odometer, last axis fastest
        for j in (0..d).rev() {
            if cur[j] < w[j] {
                cur[j] += 1;
                break;
            }
            cur[j] = -w[j];
        }
    }
    Ok(Pattern::assemble(d, coords, PatternKind::Box { half_widths: half_widths.to_vec() }, 1.0))
}

/// Indices (in pattern order) of sites within Euclidean distance `radius`
/// of `center`.
pub fn sites_in_ball(p: &Pattern, center: &[f64], radius: f64) -> Vec<usize> {
    if radius <= 0.0 {
        return Vec::new();
    }
    let r2 = radius * radius;
    p.sites()
        .enumerate()
        .filter(|(_, x)| dist2(x, center) <= r2)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    /// Sites with `x[axis] >= threshold`.
    HalfSpace { axis: usize, threshold: f64 },
    /// Explicit set of pattern indices.
    Sites(Vec<usize>),
}

impl Region {
    pub fn contains(&self, p: &Pattern, i: usize) -> bool {
        match self {
            Region::Ball { center, radius } => dist2(p.site(i), center) <= radius * radius,
            Region::HalfSpace { axis, threshold } => p.site(i)[*axis] >= *threshold,
            Region::Sites(s) => s.binary_search(&i).is_ok(),
        }
    }

    pub fn select(&self, p: &Pattern) -> Vec<usize> {
        match self {
            Region::Ball { center, radius } => sites_in_ball(p, center, *radius),
            Region::Sites(s) => {
                let mut s = s.clone();
                s.sort_unstable();
                s.dedup();
                s.retain(|&i| i < p.len());
                s
            }
            _ => (0..p.len()).filter(|&i| self.contains(p, i)).collect(),
        }
    }

    /// Euclidean distance from `point` to the nearest site of the pattern
    /// whose membership differs from `inside`.
    pub fn distance_to_other_side(&self, p: &Pattern, point: &[f64], inside: bool) -> f64 {
        (0..p.len())
            .filter(|&i| self.contains(p, i) != inside)
            .map(|i| dist(p.site(i), point))
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

fn key(x: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 must coincide
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn min_pairwise_distance(sorted: &[Vec<f64>]) -> f64 {
    // sweep along the first axis
    let mut best = f64::INFINITY;
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            if sorted[j][0] - sorted[i][0] >= best {
                break;
            }
            best = best.min(dist(&sorted[i], &sorted[j]));
        }
    }
    best
}
