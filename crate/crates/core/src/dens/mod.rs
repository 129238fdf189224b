//! One-dimensional densities on uniform grids.
//!
//! A [`GridDensity`] stores density values at `start + i * step`. Integrals use the
//! trapezoid rule; the per-node probability masses `w_i p_i` are what convolution
//! and the spectral kernels operate on, so a grid density doubles as an exact
//! lattice law.

mod conv;
mod fisher;
mod moments;
mod spec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conv::{convolve, convolve_exact, convolve_self, convolve_self_exact, gaussian_regularize, rescale};
pub use fisher::{fisher, fisher_info, jst, score, FisherInfo};
pub use moments::{moments, MomentSet, MAX_MOMENT_ORDER};
pub use spec::{DistributionSpec, MixtureComponent};

pub(crate) use conv::convolve_masses_direct;
pub(crate) use spec::read_two_columns;

/// Zero nodes kept on each side of a clipped support.
const SUPPORT_PADDING: usize = 4;

/// Grid construction and numerical tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub node_count: usize,
    /// Half-width of the grid in units of `σ √n_hint`.
    pub half_width_sigmas: f64,
    /// Tail mass allowed outside the grid before a truncation warning is raised.
    pub mass_cutoff: f64,
    /// Density values at or below this are treated as zero in divisions.
    pub density_floor: f64,
    /// Upper bound on the node count of any convolution output.
    pub max_nodes: usize,
    /// Tail mass discarded when trimming convolution outputs.
    pub trim_mass: f64,
    /// Largest mass on which the score may be unreliable before Fisher
    /// functionals are refused.
    pub max_invalid_mass: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            node_count: 1024,
            half_width_sigmas: 12.0,
            mass_cutoff: 1e-12,
            density_floor: 1e-300,
            max_nodes: 1 << 20,
            trim_mass: 1e-18,
            max_invalid_mass: 1e-4,
        }
    }
}

impl GridConfig {
    pub fn with_nodes(mut self, node_count: usize) -> Self {
        self.node_count = node_count;
        self
    }

    pub fn with_half_width(mut self, half_width_sigmas: f64) -> Self {
        self.half_width_sigmas = half_width_sigmas;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_count < 16 {
            return Err(Error::InvalidGrid(format!(
                "node_count {} is below 16",
                self.node_count
            )));
        }
        if !(self.half_width_sigmas > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half_width_sigmas {} must be positive",
                self.half_width_sigmas
            )));
        }
        if !(self.mass_cutoff > 0.0 && self.mass_cutoff < 1e-3) {
            return Err(Error::InvalidGrid(format!(
                "mass_cutoff {} must lie in (0, 1e-3)",
                self.mass_cutoff
            )));
        }
        if !(self.density_floor >= 0.0) || !(self.trim_mass >= 0.0) {
            return Err(Error::InvalidGrid("negative floor or trim mass".into()));
        }
        if self.max_nodes < self.node_count {
            return Err(Error::InvalidGrid("max_nodes below node_count".into()));
        }
        Ok(())
    }
}

/// A normalized density sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    start: f64,
    step: f64,
    values: Vec<f64>,
    truncated_mass: f64,
    clamped_mass: f64,
    truncation_warning: bool,
}

/// Trapezoid weight of node `i` on an `len`-node grid.
#[inline]
pub(crate) fn trapezoid_weight(i: usize, len: usize, step: f64) -> f64 {
    if i == 0 || i + 1 == len {
        0.5 * step
    } else {
        step
    }
}

impl GridDensity {
    /// Builds a density from raw values, normalizing by the trapezoid rule.
    pub fn from_values(start: f64, step: f64, mut values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) || !start.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "bad grid start {start} / step {step}"
            )));
        }
        if values.len() < 2 {
            return Err(Error::InvalidGrid("need at least two nodes".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidGrid(format!(
                "density value {v} is negative or not finite"
            )));
        }
        let len = values.len();
        let total: f64 = values
            .iter()
            .enumerate()
            .map(|(i, v)| trapezoid_weight(i, len, step) * v)
            .sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Unnormalizable { mass: total });
        }
        values.iter_mut().for_each(|v| *v /= total);
        Ok(Self {
            start,
            step,
            values,
            truncated_mass: 0.0,
            clamped_mass: 0.0,
            truncation_warning: false,
        })
    }

    /// Builds a density from per-node probability masses (lattice law).
    pub fn from_masses(start: f64, step: f64, masses: &[f64]) -> Result<Self> {
        let len = masses.len();
        let values = masses
            .iter()
            .enumerate()
            .map(|(i, m)| m / trapezoid_weight(i, len.max(2), step))
            .collect();
        Self::from_values(start, step, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn end(&self) -> f64 {
        self.node(self.len() - 1)
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        trapezoid_weight(i, self.len(), self.step)
    }

    /// Probability mass `w_i p_i` of each node.
    pub fn masses(&self) -> Vec<f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| self.weight(i) * v)
            .collect()
    }

    /// Trapezoid integral of the values (1 after normalization).
    pub fn total_mass(&self) -> f64 {
        self.masses().iter().sum()
    }

    /// Trapezoid expectation of `f`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| self.weight(i) * v * f(self.node(i)))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.expect(|x| (x - mu) * (x - mu))
    }

    /// Linear interpolation; zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let t = (x - self.start) / self.step;
        if t < 0.0 || t > (self.len() - 1) as f64 {
            return 0.0;
        }
        let i = (t.floor() as usize).min(self.len() - 2);
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Mass lying outside the grid (analytic tails plus trimmed tails).
    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    /// Mass removed by clamping negative or sub-resolution convolution output.
    pub fn clamped_mass(&self) -> f64 {
        self.clamped_mass
    }

    /// Set when the truncated mass exceeded the configured cutoff.
    pub fn truncation_warning(&self) -> bool {
        self.truncation_warning
    }

    pub(crate) fn with_metadata(mut self, truncated: f64, clamped: f64, cutoff: f64) -> Self {
        self.truncated_mass = truncated;
        self.clamped_mass = clamped;
        self.truncation_warning = truncated > cutoff;
        self
    }

    pub(crate) fn with_warning(mut self, warning: bool) -> Self {
        self.truncation_warning = warning;
        self
    }

    /// Index offset of `other`'s first node on this lattice, if the lattices agree.
    pub(crate) fn lattice_offset(&self, other_start: f64, other_step: f64) -> Result<i64> {
        if ((self.step - other_step) / self.step).abs() > 1e-9 {
            return Err(Error::GridMismatch(format!(
                "steps differ: {} vs {}",
                self.step, other_step
            )));
        }
        let t = (other_start - self.start) / self.step;
        let r = t.round();
        if (t - r).abs() > 1e-6 {
            return Err(Error::GridMismatch(format!(
                "start {other_start} is off the lattice of step {} (offset {t})",
                self.step
            )));
        }
        Ok(r as i64)
    }

    /// Drops outer nodes whose cumulative mass is at most `trim_mass` from each end.
    pub fn trimmed(&self, trim_mass: f64) -> Result<Self> {
        let masses = self.masses();
        let mut lo = 0;
        let mut acc = 0.0;
        while lo + 2 < masses.len() && acc + masses[lo] <= trim_mass {
            acc += masses[lo];
            lo += 1;
        }
        let mut hi = masses.len() - 1;
        let mut acc_hi = 0.0;
        while hi > lo + 2 && acc_hi + masses[hi] <= trim_mass {
            acc_hi += masses[hi];
            hi -= 1;
        }
        if lo == 0 && hi == masses.len() - 1 {
            return Ok(self.clone());
        }
        let out = Self::from_masses(self.node(lo), self.step, &masses[lo..=hi])?;
        Ok(Self {
            truncated_mass: self.truncated_mass + acc + acc_hi,
            clamped_mass: self.clamped_mass,
            truncation_warning: self.truncation_warning,
            ..out
        })
    }

    /// Every `factor`-th node, renormalized; used to estimate resolution error.
    pub fn subsampled(&self, factor: usize) -> Result<Self> {
        let values: Vec<f64> = self.values.iter().step_by(factor.max(1)).copied().collect();
        Self::from_values(self.start, self.step * factor as f64, values)
    }

    /// Writes the two-column text form read back by `file:` specs.
    pub fn write_two_columns(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{:e} {:e}", self.node(i), v)?;
        }
        Ok(())
    }
}

/// A real function sampled on the nodes of a grid density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
    /// `false` where the value is unreliable and must be excluded from integrals.
    pub valid: Vec<bool>,
}

impl GridFunction {
    pub fn new(start: f64, step: f64, values: Vec<f64>) -> Self {
        let valid = vec![true; values.len()];
        Self {
            start,
            step,
            values,
            valid,
        }
    }

    /// Samples `f` on the nodes of `d`.
    pub fn sample(d: &GridDensity, f: impl Fn(f64) -> f64) -> Self {
        Self::new(d.start, d.step, (0..d.len()).map(|i| f(d.node(i))).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Value at lattice node `x`, or `None` if `x` is off-grid or flagged invalid.
    pub fn at(&self, x: f64) -> Option<f64> {
        let t = (x - self.start) / self.step;
        let r = t.round();
        if (t - r).abs() > 1e-6 || r < 0.0 || r as usize >= self.len() {
            return None;
        }
        let i = r as usize;
        self.valid[i].then(|| self.values[i])
    }
}

/// Samples `spec` on a grid spanning `mean ± c σ √n_hint` and normalizes it.
///
/// Bounded supports are clipped (with a few zero nodes of padding), and the grid is
/// shifted so the support edge, or the mean for unbounded laws, is a node. Discrete
/// specs are spread over the two nodes bracketing each atom, preserving the mean.
pub fn build_density(spec: &DistributionSpec, cfg: &GridConfig, n_hint: usize) -> Result<GridDensity> {
    cfg.validate()?;
    spec.validate()?;
    if n_hint == 0 {
        return Err(Error::InvalidParameter {
            name: "n_hint",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    if let DistributionSpec::File { path } = spec {
        return density_from_file(path, cfg);
    }
    let (mean, var) = spec.mean_variance().expect("analytic family");
    let half = cfg.half_width_sigmas * var.sqrt() * (n_hint as f64).sqrt();
    let (lower, upper) = spec.support();
    let mut lo = mean - half;
    let mut hi = mean + half;
    if let Some(l) = lower {
        lo = lo.max(l);
    }
    if let Some(u) = upper {
        hi = hi.min(u);
    }
    if matches!(spec, DistributionSpec::Discrete { .. }) {
        lo = lower.unwrap();
        hi = upper.unwrap();
    }
    let interior = cfg.node_count - 1 - 2 * SUPPORT_PADDING;
    let step = (hi - lo) / interior as f64;
    if !(step > 0.0) {
        return Err(Error::InvalidGrid(format!("degenerate grid span [{lo}, {hi}]")));
    }
    let anchor = lower.unwrap_or(mean);
    let nominal_start = lo - SUPPORT_PADDING as f64 * step;
    let start = anchor - ((anchor - nominal_start) / step).round() * step;
    let len = cfg.node_count;
    let node = |i: usize| start + i as f64 * step;

    if let DistributionSpec::Discrete { atoms } = spec {
        let mut masses = vec![0.0; len];
        for &(x, p) in atoms {
            let t = (x - start) / step;
            let i = (t.floor() as usize).min(len - 2);
            let frac = t - i as f64;
            if frac.abs() < 1e-9 {
                masses[i] += p;
            } else if (1.0 - frac).abs() < 1e-9 {
                masses[i + 1] += p;
            } else {
                masses[i] += p * (1.0 - frac);
                masses[i + 1] += p * frac;
            }
        }
        return GridDensity::from_masses(start, step, &masses);
    }

    let mut values: Vec<f64> = (0..len).map(|i| spec.pdf(node(i))).collect();
    if let DistributionSpec::Uniform { a, b } = spec {
        // Pin the endpoints to nodes so rounding in `start + i h` cannot move them.
        let ia = ((a - start) / step).round() as usize;
        let ib = ((b - start) / step).round() as usize;
        for (i, v) in values.iter_mut().enumerate() {
            *v = match i {
                _ if i == ia || i == ib => 0.5 / (b - a),
                _ if i > ia && i < ib => 1.0 / (b - a),
                _ => 0.0,
            };
        }
    }
    if let DistributionSpec::Gamma { beta, .. } = spec {
        // The support edge is a node; give it the half-cell average so the jump
        // (β = 1) or singularity (β < 1) is integrated consistently.
        if *beta <= 1.0 {
            let edge = ((lower.unwrap() - start) / step).round() as usize;
            values[edge] = DistributionSpec::gamma_edge_mass(*beta, 0.5 * step) / step;
        }
    }
    let truncated = spec.mass_outside(node(0), node(len - 1));
    Ok(GridDensity::from_values(start, step, values)?.with_metadata(truncated, 0.0, cfg.mass_cutoff))
}

fn density_from_file(path: &std::path::Path, cfg: &GridConfig) -> Result<GridDensity> {
    let rows = read_two_columns(path)?;
    if rows.len() < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: "need at least two rows".into(),
        });
    }
    let start = rows[0].0;
    let step = (rows[rows.len() - 1].0 - start) / (rows.len() - 1) as f64;
    if !(step > 0.0) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: "nodes must be ascending".into(),
        });
    }
    for (i, (x, v)) in rows.iter().enumerate() {
        let expected = start + i as f64 * step;
        if (x - expected).abs() > 1e-6 * step {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason: format!("node {x} breaks the uniform spacing {step}"),
            });
        }
        if *v < 0.0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason: format!("negative density {v}"),
            });
        }
    }
    let values: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let values = values
        .into_iter()
        .map(|v| if v <= cfg.density_floor { 0.0 } else { v })
        .collect();
    GridDensity::from_values(start, step, values)
}
