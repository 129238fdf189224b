//! Conditional-expectation operators between partial sums on density grids.
//!
//! With `Y ~ p_{S_m}` on the y-grid and `S ~ p_{S_n}` on the s-grid, the kernel
//! `τ(y, s) = p_{S_{n−m}}(s − y) / p_{S_n}(s)` defines
//! `(C f)(s) = E[f(S_m) | S_n = s]` and `(C* g)(y) = E[g(S_n) | S_m = y]`.
//! All grids share one lattice step and `p_{S_n}` is the exact discrete
//! convolution of the other two, so the discretized operators are themselves exact
//! conditional expectations of lattice variables.

mod spectrum;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::dens::{convolve_masses_direct, convolve_self_exact, GridConfig, GridDensity, GridFunction};
use crate::error::{Error, Result};
use crate::linalg::gram_bbt;

pub(crate) use spectrum::spectrum_from_b;
pub use spectrum::{spectrum, theta, SpectrumDiagnostics, SpectrumResult, ThetaResult};

/// The ratio `τ` on all pairs of y- and s-nodes.
#[derive(Debug, Clone)]
pub struct ConditionalKernel {
    n: usize,
    m: usize,
    y: GridDensity,
    s: GridDensity,
    complement: GridDensity,
    /// Row-major `y.len() × s.len()`.
    ratio: Vec<f64>,
    masked_mass: f64,
}

fn check_nm(n: usize, m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    if m >= n {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
            reason: "must exceed m",
        });
    }
    Ok(())
}

/// Largest dense kernel (`|y-grid| × |s-grid|` entries) that will be allocated.
const KERNEL_ENTRY_CAP: usize = 1 << 25;

/// Builds `τ` for the pair `(S_m, S_n)` of partial sums of i.i.d. copies of `base`.
pub fn build_kernel(base: &GridDensity, n: usize, m: usize, cfg: &GridConfig) -> Result<ConditionalKernel> {
    check_nm(n, m)?;
    let base = base.trimmed(cfg.trim_mass)?;
    let y = convolve_self_exact(&base, m, cfg)?;
    let complement = convolve_self_exact(&base, n - m, cfg)?;
    // Untrimmed: rows for extreme y rely on the far tails of S_n.
    let s = GridDensity::from_masses(
        y.start() + complement.start(),
        y.step(),
        &convolve_masses_direct(&y.masses(), &complement.masses()),
    )?;
    let (c_mass, b_mass) = (complement.masses(), s.masses());
    let offset = s.lattice_offset(y.start() + complement.start(), y.step())?;
    let (ny, ns, nc) = (y.len(), s.len(), complement.len());
    if ny.saturating_mul(ns) > KERNEL_ENTRY_CAP {
        return Err(Error::GridOverflow {
            requested: ny.saturating_mul(ns),
            limit: KERNEL_ENTRY_CAP,
        });
    }
    let mut ratio = vec![0.0; ny * ns];
    let mut masked_mass = 0.0;
    for k in 0..ns {
        let bk = b_mass[k];
        let masked = s.values()[k] <= cfg.density_floor;
        if masked {
            masked_mass += bk;
            continue;
        }
        // s_k = y_i + c_j with j = k - offset - i.
        let kk = k as i64 - offset;
        for i in 0..ny {
            let j = kk - i as i64;
            if j >= 0 && (j as usize) < nc {
                ratio[i * ns + k] = c_mass[j as usize] / bk;
            }
        }
    }
    Ok(ConditionalKernel {
        n,
        m,
        y,
        s,
        complement,
        ratio,
        masked_mass,
    })
}

impl ConditionalKernel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Law of `S_m` (of `Y` when `m = 1`).
    pub fn y_grid(&self) -> &GridDensity {
        &self.y
    }

    /// Law of `S_n`.
    pub fn s_grid(&self) -> &GridDensity {
        &self.s
    }

    /// Law of `S_{n−m}`.
    pub fn complement(&self) -> &GridDensity {
        &self.complement
    }

    /// Mass of `S_n` on nodes where its density fell below the floor.
    pub fn masked_mass(&self) -> f64 {
        self.masked_mass
    }

    /// `τ` at y-node `i` and s-node `k`.
    pub fn ratio(&self, i: usize, k: usize) -> f64 {
        self.ratio[i * self.s.len() + k]
    }

    /// `τ(y, s)` at lattice points; 0 off the grids.
    pub fn ratio_at(&self, y: f64, s: f64) -> f64 {
        let i = node_index(&self.y, y);
        let k = node_index(&self.s, s);
        match (i, k) {
            (Some(i), Some(k)) => self.ratio(i, k),
            _ => 0.0,
        }
    }

    /// `Σ_k w_k p_{S_n}(s_k) τ(y_i, s_k)` for each y-node; identically 1.
    pub fn row_sums(&self) -> Vec<f64> {
        let b = self.s.masses();
        (0..self.y.len())
            .map(|i| (0..self.s.len()).map(|k| b[k] * self.ratio(i, k)).sum())
            .collect()
    }

    /// `B[i,k] = √a_i τ(i,k) √b_k` over the y-nodes of positive mass.
    fn weighted(&self) -> (Mat<f64>, Vec<usize>) {
        let a = self.y.masses();
        let b = self.s.masses();
        let keep: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0.0).collect();
        let ns = self.s.len();
        let mat = Mat::from_fn(keep.len(), ns, |r, k| {
            let i = keep[r];
            a[i].sqrt() * self.ratio[i * ns + k] * b[k].sqrt()
        });
        (mat, keep)
    }
}

fn node_index(d: &GridDensity, x: f64) -> Option<usize> {
    let t = (x - d.start()) / d.step();
    let r = t.round();
    ((t - r).abs() < 1e-6 && r >= 0.0 && (r as usize) < d.len()).then_some(r as usize)
}

/// The symmetric matrix `S = B Bᵀ`, similar to the discretized `C*C`.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub(crate) matrix: Mat<f64>,
    pub(crate) nodes: Vec<f64>,
    pub(crate) masses: Vec<f64>,
    pub(crate) n: usize,
    pub(crate) m: usize,
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// Y-nodes indexing the rows, those of positive mass.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).sum()
    }

    /// `max |S − Sᵀ|`.
    pub fn symmetry_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..i {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.matrix[(i, j)]).collect())
            .collect()
    }
}

pub fn gram_matrix(k: &ConditionalKernel) -> GramMatrix {
    let (b, keep) = k.weighted();
    let a = k.y.masses();
    GramMatrix {
        matrix: gram_bbt(&b),
        nodes: keep.iter().map(|&i| k.y.node(i)).collect(),
        masses: keep.iter().map(|&i| a[i]).collect(),
        n: k.n,
        m: k.m,
    }
}

/// `T_n = ∬ p_{S_m} p_{S_n} τ²` and the χ²-divergence `T_n − 1` between the joint law
/// and the product of marginals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub t: f64,
    pub chi2: f64,
    /// Mass excluded by masking; above the configured limit `t` is only a lower bound.
    pub masked_mass: f64,
    pub lower_bound_only: bool,
}

pub fn trace_t(k: &ConditionalKernel, cfg: &GridConfig) -> TraceReport {
    let a = k.y.masses();
    let b = k.s.masses();
    let ns = k.s.len();
    let mut t = 0.0;
    for (i, ai) in a.iter().enumerate() {
        if *ai == 0.0 {
            continue;
        }
        let row = &k.ratio[i * ns..(i + 1) * ns];
        t += ai * row.iter().zip(&b).map(|(r, bk)| bk * r * r).sum::<f64>();
    }
    TraceReport {
        t,
        chi2: t - 1.0,
        masked_mass: k.masked_mass,
        lower_bound_only: k.masked_mass > cfg.max_invalid_mass,
    }
}

/// Values of `f` on the nodes of `d`; nodes that `f` lacks or flags invalid read as 0.
fn align(d: &GridDensity, f: &GridFunction) -> Result<Vec<f64>> {
    d.lattice_offset(f.start, f.step)?;
    Ok((0..d.len()).map(|i| f.at(d.node(i)).unwrap_or(0.0)).collect())
}

/// `(C f)(s) = E[f(S_m) | S_n = s]` on the s-grid.
pub fn apply_c(k: &ConditionalKernel, f: &GridFunction) -> Result<GridFunction> {
    let fv = align(&k.y, f)?;
    let a = k.y.masses();
    let ns = k.s.len();
    let mut out = vec![0.0; ns];
    for (i, (ai, fi)) in a.iter().zip(&fv).enumerate() {
        let w = ai * fi;
        if w == 0.0 {
            continue;
        }
        for (o, r) in out.iter_mut().zip(&k.ratio[i * ns..(i + 1) * ns]) {
            *o += w * r;
        }
    }
    Ok(GridFunction::new(k.s.start(), k.s.step(), out))
}

/// `(C* g)(y) = E[g(S_n) | S_m = y]` on the y-grid.
pub fn apply_cstar(k: &ConditionalKernel, g: &GridFunction) -> Result<GridFunction> {
    let gv = align(&k.s, g)?;
    let b = k.s.masses();
    let ns = k.s.len();
    let weighted: Vec<f64> = b.iter().zip(&gv).map(|(bk, gk)| bk * gk).collect();
    let out = (0..k.y.len())
        .map(|i| {
            k.ratio[i * ns..(i + 1) * ns]
                .iter()
                .zip(&weighted)
                .map(|(r, w)| r * w)
                .sum()
        })
        .collect();
    Ok(GridFunction::new(k.y.start(), k.y.step(), out))
}

/// `⟨f, g⟩` under the masses of `d`, skipping invalid nodes of either function.
pub fn inner(d: &GridDensity, f: &GridFunction, g: &GridFunction) -> Result<f64> {
    let fv = align(d, f)?;
    let gv = align(d, g)?;
    Ok(d.masses()
        .iter()
        .zip(fv.iter().zip(&gv))
        .map(|(m, (a, b))| m * a * b)
        .sum())
}
