use serde::{Deserialize, Serialize};

use super::{DiscretePMF, SUPPORT_CAP};
use crate::bounds::{BoundReport, Provenance, Relation, ReportContext, Side};
use crate::error::{Error, Result};

/// Largest `k` for which the product space is enumerated.
pub const MAX_ES_ORDER: usize = 6;
/// Largest product space `d^k` enumerated.
pub const PRODUCT_CAP: u128 = 10_000_000;
/// Cross moments are computed directly only on product spaces up to this size;
/// beyond it orthogonality rests on the degeneracy residual alone.
const CROSS_MOMENT_CAP: usize = 2_000_000;

/// ANOVA decomposition `h(Y_1 + … + Y_k) − E h = Σ_A h_A(Y_A)` over subsets `A ⊆ {1..k}`.
///
/// Because `h` acts on the sum, `h_A` depends only on `|A| = r`; `components[r-1]`
/// tabulates `h_r(u_1, …, u_r)` over atom-index tuples in row-major order
/// (`u_1` most significant).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ESDecomposition {
    pub k: usize,
    pub atoms: Vec<f64>,
    /// `E h(S_k)`, subtracted before decomposing.
    pub shift: f64,
    /// `E (h(S_k) − shift)²`.
    pub total_variance: f64,
    /// `E h_r²` for `r = 1..=k`.
    pub component_variances: Vec<f64>,
    #[serde(skip)]
    pub components: Vec<Vec<f64>>,
    /// `|total_variance − Σ_r C(k,r) E h_r²|`.
    pub variance_residual: f64,
    /// Largest cross moment between components on distinct subsets, or of a
    /// component integrated over one of its arguments.
    pub orthogonality_residual: f64,
    /// Largest change of a component table under a transposition of arguments.
    pub exchangeability_residual: f64,
    /// `h_1` against `E h(u + Y_2 + … + Y_k)` summed over the product space.
    pub h1_direct_residual: f64,
}

impl ESDecomposition {
    pub fn component(&self, r: usize) -> &[f64] {
        &self.components[r - 1]
    }

    /// `h_r` at the given atom indices.
    pub fn value(&self, r: usize, idx: &[usize]) -> f64 {
        let d = self.atoms.len();
        let flat = idx.iter().fold(0, |acc, i| acc * d + i);
        self.components[r - 1][flat]
    }
}

fn binomial(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `g_j(t) = E h̃(t + S_{k−j})` tabulated over the atoms of `S_j`, for `j = 0..=k`.
struct Projections {
    laws: Vec<DiscretePMF>,
    tables: Vec<Vec<f64>>,
}

impl Projections {
    fn new(h: &dyn Fn(f64) -> f64, p: &DiscretePMF, k: usize) -> Result<(Self, f64)> {
        let laws: Vec<DiscretePMF> = (0..=k)
            .map(|j| p.sum_law(j, SUPPORT_CAP))
            .collect::<Result<_>>()?;
        let shift = laws[k].expect(h);
        let tables = (0..=k)
            .map(|j| {
                let rest = &laws[k - j];
                laws[j]
                    .atoms()
                    .iter()
                    .map(|t| rest.expect(|s| h(t + s) - shift))
                    .collect()
            })
            .collect();
        Ok((Self { laws, tables }, shift))
    }

    fn get(&self, j: usize, t: f64) -> Option<f64> {
        self.laws[j].index_of(t).map(|i| self.tables[j][i])
    }
}

fn check_caps(d: usize, k: usize) -> Result<()> {
    if k == 0 || k > MAX_ES_ORDER {
        return Err(Error::InvalidParameter {
            name: "k",
            value: k as f64,
            reason: "need 1 <= k <= 6",
        });
    }
    let size = (d as u128).pow(k as u32);
    if size > PRODUCT_CAP {
        return Err(Error::ProductCap {
            size,
            cap: PRODUCT_CAP,
        });
    }
    Ok(())
}

fn digits(mut flat: usize, d: usize, r: usize, out: &mut [usize]) {
    for slot in out[..r].iter_mut().rev() {
        *slot = flat % d;
        flat /= d;
    }
}

/// Efron–Stein decomposition of `h(S_k)` under i.i.d. draws from `p`.
///
/// `h` is centered by subtracting `E h(S_k)`; the shift is recorded.
pub fn efron_stein(h: impl Fn(f64) -> f64, p: &DiscretePMF, k: usize) -> Result<ESDecomposition> {
    let d = p.len();
    check_caps(d, k)?;
    let (proj, shift) = Projections::new(&h, p, k)?;
    let atoms = p.atoms();
    let probs = p.probs();
    let hc = |x: f64| h(x) - shift;

    // h_r(u) = Σ_{B ⊆ [r]} (−1)^{r−|B|} g_{|B|}(Σ_{i∈B} u_i)
    let mut components = Vec::with_capacity(k);
    let mut idx = [0usize; MAX_ES_ORDER];
    for r in 1..=k {
        let len = d.pow(r as u32);
        let mut table = vec![0.0; len];
        for (flat, slot) in table.iter_mut().enumerate() {
            digits(flat, d, r, &mut idx);
            let mut acc = 0.0;
            for mask in 0u32..(1 << r) {
                let size = mask.count_ones() as usize;
                let t: f64 = (0..r).filter(|i| mask >> i & 1 == 1).map(|i| atoms[idx[i]]).sum();
                let g = proj
                    .get(size, t)
                    .unwrap_or_else(|| proj.laws[k - size].expect(|s| hc(t + s)));
                acc += if (r - size).is_multiple_of(2) { g } else { -g };
            }
            *slot = acc;
        }
        components.push(table);
    }

    let weight = |flat: usize, r: usize, idx: &mut [usize]| -> f64 {
        digits(flat, d, r, idx);
        idx[..r].iter().map(|&i| probs[i]).product()
    };

    let component_variances: Vec<f64> = components
        .iter()
        .enumerate()
        .map(|(r0, t)| {
            let mut idx = [0usize; MAX_ES_ORDER];
            t.iter()
                .enumerate()
                .map(|(flat, v)| weight(flat, r0 + 1, &mut idx) * v * v)
                .sum()
        })
        .collect();
    let total_variance = proj.laws[k].expect(|s| hc(s).powi(2));
    let decomposed: f64 = component_variances
        .iter()
        .enumerate()
        .map(|(r0, v)| binomial(k, r0 + 1) * v)
        .sum();
    let variance_residual = (total_variance - decomposed).abs();

    // Integrating any component over its last argument gives zero.
    let mut orthogonality_residual: f64 = 0.0;
    for t in &components {
        for head in 0..t.len() / d {
            let m: f64 = (0..d).map(|u| probs[u] * t[head * d + u]).sum();
            orthogonality_residual = orthogonality_residual.max(m.abs());
        }
    }
    // Direct cross moments E h_r(Y_A) h_q(Y_B), A = {0..r}, B overlapping A in `j` places.
    for r in 1..=k {
        for q in r..=k {
            for j in 0..=r.min(q) {
                let span = r + q - j;
                if span > k || (r == q && j == r) {
                    continue;
                }
                let len = d.pow(span as u32);
                if len > CROSS_MOMENT_CAP {
                    continue;
                }
                let (tr, tq) = (&components[r - 1], &components[q - 1]);
                let mut idx = [0usize; 2 * MAX_ES_ORDER];
                let mut m = 0.0;
                for flat in 0..len {
                    let w = weight(flat, span, &mut idx);
                    let a = idx[..r].iter().fold(0, |acc, i| acc * d + i);
                    let b = idx[r - j..r - j + q].iter().fold(0, |acc, i| acc * d + i);
                    m += w * tr[a] * tq[b];
                }
                orthogonality_residual = orthogonality_residual.max(m.abs());
            }
        }
    }

    let mut exchangeability_residual: f64 = 0.0;
    for (r0, t) in components.iter().enumerate() {
        let r = r0 + 1;
        for flat in 0..t.len() {
            digits(flat, d, r, &mut idx);
            for i in 0..r.saturating_sub(1) {
                let mut sw = idx;
                sw.swap(i, i + 1);
                let other = sw[..r].iter().fold(0, |acc, x| acc * d + x);
                exchangeability_residual = exchangeability_residual.max((t[flat] - t[other]).abs());
            }
        }
    }

    // h_1(u) against a brute-force sum over (Y_2, …, Y_k).
    let rest = k - 1;
    let len = d.pow(rest as u32);
    let mut ridx = [0usize; MAX_ES_ORDER];
    let h1_direct_residual = (0..d)
        .map(|u| {
            let direct: f64 = (0..len)
                .map(|flat| {
                    let w = weight(flat, rest, &mut ridx);
                    let s: f64 = ridx[..rest].iter().map(|&i| atoms[i]).sum();
                    w * hc(atoms[u] + s)
                })
                .sum();
            (direct - components[0][u]).abs()
        })
        .fold(0.0, f64::max);

    Ok(ESDecomposition {
        k,
        atoms: atoms.to_vec(),
        shift,
        total_variance,
        component_variances,
        components,
        variance_residual,
        orthogonality_residual,
        exchangeability_residual,
        h1_direct_residual,
    })
}

/// The two-level variance inequality for `k > l ≥ 2`:
/// `E h(S_k)² ≥ k E h_1² + k(k−1)/(l(l−1)) (E ĥ(S_l)² − l E h_1²)`
/// with `ĥ(v) = E h(v + Y_{l+1} + … + Y_k)`, `h` centered first.
pub fn verify_two_level(h: impl Fn(f64) -> f64, p: &DiscretePMF, k: usize, l: usize) -> Result<BoundReport> {
    if !(k > l && l >= 2) {
        return Err(Error::InvalidParameter {
            name: "l",
            value: l as f64,
            reason: "need k > l >= 2",
        });
    }
    let (proj, _) = Projections::new(&h, p, k)?;
    let lhs: f64 = proj.tables[k]
        .iter()
        .zip(proj.laws[k].probs())
        .map(|(v, w)| w * v * v)
        .sum();
    let e_h1: f64 = proj.tables[1].iter().zip(p.probs()).map(|(v, w)| w * v * v).sum();
    let e_hat: f64 = proj.tables[l]
        .iter()
        .zip(proj.laws[l].probs())
        .map(|(v, w)| w * v * v)
        .sum();
    let (kf, lf) = (k as f64, l as f64);
    let rhs = kf * e_h1 + kf * (kf - 1.0) / (lf * (lf - 1.0)) * (e_hat - lf * e_h1);
    Ok(BoundReport::new(
        "efron-stein-two-level",
        Side::new(lhs, Provenance::Exact),
        Relation::Ge,
        Side::new(rhs, Provenance::Exact),
        1e-12,
        ReportContext::new("discrete").n(k).m(l),
    ))
}
