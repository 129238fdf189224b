use faer::Mat;
use serde::{Deserialize, Serialize};

use super::{build_kernel, gram_matrix, GramMatrix};
use crate::dens::{GridConfig, GridDensity};
use crate::error::{Error, Result};
use crate::linalg::{gram_bbt, sym_eigen};

/// Eigenpairs kept in a [`SpectrumResult`] unless more are requested.
pub(crate) const DEFAULT_TOP_K: usize = 10;

/// Weighted correlation above which an eigenfunction is the constant or linear mode.
const TRIVIAL_CORRELATION: f64 = 0.99;

/// Eigenvalues closer than this are treated as one eigenspace during classification.
const CLUSTER_TOL: f64 = 1e-9;

/// `Θ` is reported as +∞ below this `λ₂`.
const LAMBDA2_FLOOR: f64 = 1e-12;

/// Tolerance for counting eigenvalues equal to `m/n`.
const MULTIPLICITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDiagnostics {
    pub dimension: usize,
    /// Largest amount by which an eigenvalue was moved into `[0, 1]`.
    pub clamp_magnitude: f64,
    /// Sum of all eigenvalues before clamping.
    pub eigenvalue_sum: f64,
    pub trace: f64,
    /// Weighted correlation of the constant mode with `1` (norm over its eigenspace).
    pub constant_correlation: f64,
    /// Weighted correlation of the linear mode with the standardized identity.
    pub linear_correlation: Option<f64>,
    /// Eigenvalue carried by the linear mode; `m/n` in theory.
    pub linear_eigenvalue: Option<f64>,
    /// Number of eigenvalues equal to `m/n` within 1e-8.
    pub linear_multiplicity: usize,
}

/// Leading eigenpairs of the discretized `C*C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub n: usize,
    pub m: usize,
    /// Leading eigenvalues, descending and clamped to `[0, 1]`.
    pub eigenvalues: Vec<f64>,
    pub singular_values: Vec<f64>,
    /// Nodes on which the eigenfunctions are sampled.
    pub nodes: Vec<f64>,
    pub masses: Vec<f64>,
    /// `eigenfunctions[j]` is orthonormal under the masses and belongs to `eigenvalues[j]`.
    pub eigenfunctions: Vec<Vec<f64>>,
    /// Positions of the constant and linear modes among all eigenvalues.
    pub trivial_indices: Vec<usize>,
    /// Largest eigenvalue whose eigenfunction is neither constant nor linear.
    pub lambda2: Option<f64>,
    pub diagnostics: SpectrumDiagnostics,
}

impl SpectrumResult {
    /// `node,f0,f1,...` rows.
    pub fn eigenfunctions_csv(&self) -> String {
        let mut out = String::from("node");
        for j in 0..self.eigenfunctions.len() {
            out.push_str(&format!(",f{j}"));
        }
        out.push('\n');
        for (i, x) in self.nodes.iter().enumerate() {
            out.push_str(&format!("{x:e}"));
            for f in &self.eigenfunctions {
                out.push_str(&format!(",{:e}", f[i]));
            }
            out.push('\n');
        }
        out
    }

    /// `max |⟨f_i, f_j⟩ − δ_ij|` under the masses.
    pub fn orthonormality_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, fi) in self.eigenfunctions.iter().enumerate() {
            for (j, fj) in self.eigenfunctions.iter().enumerate() {
                let ip: f64 = self
                    .masses
                    .iter()
                    .zip(fi.iter().zip(fj))
                    .map(|(w, (a, b))| w * a * b)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }
}

/// Groups of consecutive (descending) eigenvalue indices closer than `CLUSTER_TOL`.
fn clusters(values: &[f64]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (j, v) in values.iter().enumerate() {
        match out.last_mut() {
            Some(c) if (values[*c.last().unwrap()] - v).abs() <= CLUSTER_TOL * v.abs().max(1.0) => c.push(j),
            _ => out.push(vec![j]),
        }
    }
    out
}

/// First eigenspace whose projection of the test function exceeds the threshold;
/// returns the best-aligned index in it and the projection norm.
fn find_mode(groups: &[Vec<usize>], corr: &[f64], exclude: Option<usize>) -> Option<(usize, f64)> {
    for g in groups {
        let members: Vec<usize> = g.iter().copied().filter(|j| Some(*j) != exclude).collect();
        let norm = members.iter().map(|j| corr[*j] * corr[*j]).sum::<f64>().sqrt();
        if norm > TRIVIAL_CORRELATION {
            let best = *members
                .iter()
                .max_by(|a, b| corr[**a].abs().total_cmp(&corr[**b].abs()))
                .expect("non-empty cluster");
            return Some((best, norm));
        }
    }
    None
}

/// Eigen-analysis of a symmetric `S = B Bᵀ` whose rows carry `masses` at `nodes`.
pub(crate) fn analyze(
    s: &Mat<f64>,
    nodes: &[f64],
    masses: &[f64],
    n: usize,
    m: usize,
    k: usize,
) -> Result<SpectrumResult> {
    let dim = s.nrows();
    if dim < 2 {
        return Err(Error::Degenerate(format!(
            "operator on {dim} node(s); the law is a point mass"
        )));
    }
    let eig = sym_eigen(s)?;
    let total: f64 = masses.iter().sum();
    let sqrt_a: Vec<f64> = masses.iter().map(|a| (a / total).sqrt()).collect();
    let mean: f64 = nodes.iter().zip(masses).map(|(x, a)| x * a).sum::<f64>() / total;
    let var: f64 = nodes
        .iter()
        .zip(masses)
        .map(|(x, a)| a * (x - mean).powi(2))
        .sum::<f64>()
        / total;
    let sd = var.sqrt();
    let v = &eig.vectors;
    let corr_const: Vec<f64> = (0..dim)
        .map(|j| (0..dim).map(|i| sqrt_a[i] * v[(i, j)]).sum())
        .collect();
    let corr_lin: Vec<f64> = (0..dim)
        .map(|j| {
            (0..dim)
                .map(|i| sqrt_a[i] * v[(i, j)] * (nodes[i] - mean) / sd)
                .sum()
        })
        .collect();
    let groups = clusters(&eig.values);
    let describe = || {
        let top: Vec<String> = (0..dim.min(4))
            .map(|j| {
                format!(
                    "λ={:.6} const={:.3} lin={:.3}",
                    eig.values[j], corr_const[j], corr_lin[j]
                )
            })
            .collect();
        top.join("; ")
    };
    let (c_idx, c_corr) = find_mode(&groups, &corr_const, None)
        .ok_or_else(|| Error::AmbiguousTrivialModes(format!("no constant mode: {}", describe())))?;
    let (l_idx, l_corr) = find_mode(&groups, &corr_lin, Some(c_idx))
        .ok_or_else(|| Error::AmbiguousTrivialModes(format!("no linear mode: {}", describe())))?;
    let mut trivial = vec![c_idx, l_idx];
    trivial.sort_unstable();
    let lambda2_idx = (0..dim).find(|j| !trivial.contains(j));
    let dks = m as f64 / n as f64;

    let k = k.min(dim);
    let mut clamp_magnitude = 0.0f64;
    let eigenvalues: Vec<f64> = eig
        .values
        .iter()
        .map(|&x| {
            let c = x.clamp(0.0, 1.0);
            clamp_magnitude = clamp_magnitude.max((c - x).abs());
            c
        })
        .collect();
    let eigenfunctions = (0..k)
        .map(|j| {
            let col: Vec<f64> = (0..dim).map(|i| v[(i, j)]).collect();
            let pivot = col
                .iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(1.0);
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            col.iter().zip(&sqrt_a).map(|(c, r)| sign * c / r).collect()
        })
        .collect();
    let diagnostics = SpectrumDiagnostics {
        dimension: dim,
        clamp_magnitude,
        eigenvalue_sum: eig.values.iter().sum(),
        trace: (0..dim).map(|i| s[(i, i)]).sum(),
        constant_correlation: c_corr,
        linear_correlation: Some(l_corr),
        linear_eigenvalue: Some(eig.values[l_idx]),
        linear_multiplicity: eig
            .values
            .iter()
            .filter(|x| (*x - dks).abs() <= MULTIPLICITY_TOL)
            .count(),
    };
    Ok(SpectrumResult {
        n,
        m,
        singular_values: eigenvalues[..k].iter().map(|x| x.sqrt()).collect(),
        eigenvalues: eigenvalues[..k].to_vec(),
        nodes: nodes.to_vec(),
        masses: masses.iter().map(|a| a / total).collect(),
        eigenfunctions,
        trivial_indices: trivial,
        lambda2: lambda2_idx.map(|j| eigenvalues[j]),
        diagnostics,
    })
}

/// Spectrum from the weighted kernel `B[i,k] = P(i,k)/√(a_i b_k)`.
pub(crate) fn spectrum_from_b(
    b: &Mat<f64>,
    nodes: &[f64],
    masses: &[f64],
    n: usize,
    m: usize,
    k: usize,
) -> Result<SpectrumResult> {
    analyze(&gram_bbt(b), nodes, masses, n, m, k)
}

/// Top-`k` eigenpairs of the Gram matrix, with trivial-mode classification.
pub fn spectrum(g: &GramMatrix, k: usize) -> Result<SpectrumResult> {
    analyze(&g.matrix, &g.nodes, &g.masses, g.n, g.m, k)
}

/// `Θ^(n,m) = m / (n λ₂) − 1`, with the supporting spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaResult {
    pub eigenvalues: Vec<f64>,
    pub singular_values: Vec<f64>,
    pub trivial_indices: Vec<usize>,
    /// `+∞` (serialized as `"inf"`) when `λ₂` is below 1e-12 or absent.
    #[serde(with = "crate::serde_inf")]
    pub theta: f64,
    /// 0 when the operator has no non-trivial eigenvalue.
    pub lambda2: f64,
    pub n: usize,
    pub m: usize,
    pub diagnostics: SpectrumDiagnostics,
}

impl ThetaResult {
    pub fn from_spectrum(sp: &SpectrumResult) -> Self {
        let lambda2 = sp.lambda2.unwrap_or(0.0);
        let theta = if lambda2 < LAMBDA2_FLOOR {
            f64::INFINITY
        } else {
            sp.m as f64 / (sp.n as f64 * lambda2) - 1.0
        };
        Self {
            eigenvalues: sp.eigenvalues.clone(),
            singular_values: sp.singular_values.clone(),
            trivial_indices: sp.trivial_indices.clone(),
            theta,
            lambda2,
            n: sp.n,
            m: sp.m,
            diagnostics: sp.diagnostics.clone(),
        }
    }
}

/// `Θ^(n,m)` of the law `base` on its grid.
pub fn theta(base: &GridDensity, n: usize, m: usize, cfg: &GridConfig) -> Result<ThetaResult> {
    let kernel = build_kernel(base, n, m, cfg)?;
    let sp = spectrum(&gram_matrix(&kernel), DEFAULT_TOP_K)?;
    Ok(ThetaResult::from_spectrum(&sp))
}
