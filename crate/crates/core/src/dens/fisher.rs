use serde::{Deserialize, Serialize};

use super::{GridConfig, GridDensity, GridFunction};
use crate::error::{Error, Result};

/// Relative disagreement between the 3- and 5-point derivatives above which the
/// log-density is taken to jump near a node.
const JUMP_THRESHOLD: f64 = 0.25;

/// Fisher information of a grid density and its standardized form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherInfo {
    /// `J = E ρ²` over the nodes where the score is resolved.
    pub j: f64,
    /// `J_st = Var · J − 1`.
    pub jst: f64,
    pub variance: f64,
    /// Mass on which the score was not resolved.
    pub invalid_mass: f64,
    /// `|J_st − J_st(half resolution)|`, when the coarser grid is itself usable.
    pub uncertainty: Option<f64>,
}

/// Score `ρ = (ln p)'` by central differences of the log-density.
///
/// The score is computed on the window between the first and last nodes where the
/// density exceeds `cfg.density_floor`; the window edges themselves are invalid.
/// A 5-point stencil is used where it fits, a 3-point one next to the edges. Where
/// the two stencils disagree strongly the log-density jumps, and every node whose
/// stencils touch the jump is flagged invalid.
pub fn score(d: &GridDensity, cfg: &GridConfig) -> Result<GridFunction> {
    let p = d.values();
    let len = p.len();
    let positive = |i: usize| p[i] > cfg.density_floor;
    let lo = (0..len)
        .find(|&i| positive(i))
        .ok_or(Error::Unnormalizable { mass: 0.0 })?;
    let hi = (0..len).rev().find(|&i| positive(i)).expect("lo exists");
    if let Some(first) = (lo..=hi).find(|&i| !positive(i)) {
        let last = (first..=hi).find(|&i| positive(i)).expect("hi is positive") - 1;
        return Err(Error::InteriorZeros {
            start: first,
            end: last,
            x_start: d.node(first),
            x_end: d.node(last),
        });
    }
    let scale = 1.0 / d.variance().sqrt();
    let h = d.step();
    let ln: Vec<f64> = p.iter().map(|v| if *v > 0.0 { v.ln() } else { 0.0 }).collect();
    let mut out = GridFunction::new(d.start(), h, vec![0.0; len]);
    let mut jumps = Vec::new();
    for i in 0..len {
        if i <= lo || i >= hi {
            out.valid[i] = false;
            continue;
        }
        let d3 = (ln[i + 1] - ln[i - 1]) / (2.0 * h);
        if i < lo + 2 || i + 2 > hi {
            out.values[i] = d3;
            continue;
        }
        let d5 = (-ln[i + 2] + 8.0 * ln[i + 1] - 8.0 * ln[i - 1] + ln[i - 2]) / (12.0 * h);
        out.values[i] = d5;
        if (d5 - d3).abs() > JUMP_THRESHOLD * (d5.abs() + scale) {
            jumps.push(i);
        }
    }
    for i in jumps {
        for j in i.saturating_sub(2)..=(i + 2).min(len - 1) {
            out.valid[j] = false;
        }
    }
    Ok(out)
}

fn raw_fisher(d: &GridDensity, cfg: &GridConfig) -> Result<(f64, f64, f64)> {
    let rho = score(d, cfg)?;
    let masses = d.masses();
    let mut j = 0.0;
    let mut invalid = 0.0;
    for (i, m) in masses.iter().enumerate() {
        if rho.valid[i] {
            j += m * rho.values[i] * rho.values[i];
        } else {
            invalid += m;
        }
    }
    if invalid > cfg.max_invalid_mass {
        return Err(Error::ScoreUnavailable {
            invalid_mass: invalid,
            limit: cfg.max_invalid_mass,
        });
    }
    let variance = d.variance();
    Ok((j, variance * j - 1.0, invalid))
}

/// Fisher information, standardized form and a resolution-error estimate.
pub fn fisher_info(d: &GridDensity, cfg: &GridConfig) -> Result<FisherInfo> {
    let (j, jst, invalid_mass) = raw_fisher(d, cfg)?;
    let uncertainty = d
        .subsampled(2)
        .ok()
        .and_then(|coarse| raw_fisher(&coarse, cfg).ok())
        .map(|(_, coarse_jst, _)| (jst - coarse_jst).abs());
    Ok(FisherInfo {
        j,
        jst,
        variance: d.variance(),
        invalid_mass,
        uncertainty,
    })
}

/// Fisher information `J = ∫ p ρ²`.
pub fn fisher(d: &GridDensity, cfg: &GridConfig) -> Result<f64> {
    raw_fisher(d, cfg).map(|r| r.0)
}

/// Standardized Fisher information `J_st = Var · J − 1`.
pub fn jst(d: &GridDensity, cfg: &GridConfig) -> Result<f64> {
    raw_fisher(d, cfg).map(|r| r.1)
}
