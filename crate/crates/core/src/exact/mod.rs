//! Exact conditional-expectation operators for finite-support laws.
//!
//! Sums of i.i.d. copies are enumerated exactly (atoms closer than 1e-12 are
//! merged), so operators, spectra and Efron–Stein components carry no
//! discretization error.

mod es;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::dens::{DistributionSpec, GridDensity, MomentSet};
use crate::error::{Error, Result};
use crate::spect::{spectrum_from_b, SpectrumResult, ThetaResult};

pub use es::{efron_stein, verify_two_level, ESDecomposition};

/// Atoms closer than this (relative to `max(1, |x|)`) are one atom.
const MERGE_TOL: f64 = 1e-12;

/// Default cap on the number of atoms of any enumerated sum.
pub const SUPPORT_CAP: usize = 20_000;

/// A probability mass function on finitely many real atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePMF {
    atoms: Vec<f64>,
    probs: Vec<f64>,
}

fn same_atom(a: f64, b: f64) -> bool {
    (a - b).abs() <= MERGE_TOL * a.abs().max(b.abs()).max(1.0)
}

impl DiscretePMF {
    /// Sorts, merges coincident atoms and renormalizes; probabilities must be
    /// positive and sum to 1 within 1e-12.
    pub fn new(atoms: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if atoms.len() != probs.len() || atoms.is_empty() {
            return Err(Error::Degenerate(
                "atoms and probabilities must be non-empty and of equal length".into(),
            ));
        }
        if let Some(p) = probs.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "probability",
                value: *p,
                reason: "must be positive and finite",
            });
        }
        if let Some(x) = atoms.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "atom",
                value: *x,
                reason: "must be finite",
            });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Unnormalizable { mass: total });
        }
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(probs).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self::from_sorted(pairs))
    }

    fn from_sorted(pairs: Vec<(f64, f64)>) -> Self {
        let mut atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut probs: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, p) in pairs {
            match atoms.last() {
                Some(&last) if same_atom(last, x) => *probs.last_mut().unwrap() += p,
                _ => {
                    atoms.push(x);
                    probs.push(p);
                }
            }
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Self { atoms, probs }
    }

    /// Uniform law on the given atoms.
    pub fn uniform(atoms: &[f64]) -> Result<Self> {
        let p = 1.0 / atoms.len() as f64;
        Self::new(atoms.to_vec(), vec![p; atoms.len()])
    }

    /// From a `discrete:` or `file:` spec (two columns: atom, probability).
    pub fn from_spec(spec: &DistributionSpec) -> Result<Self> {
        match spec {
            DistributionSpec::Discrete { atoms } => {
                let (x, p): (Vec<f64>, Vec<f64>) = atoms.iter().copied().unzip();
                Self::new(x, p)
            }
            DistributionSpec::File { path } => {
                let rows = crate::dens::read_two_columns(path)?;
                let (x, p): (Vec<f64>, Vec<f64>) = rows.into_iter().filter(|r| r.1 > 0.0).unzip();
                let total: f64 = p.iter().sum();
                Self::new(x, p.iter().map(|v| v / total).collect())
            }
            other => Err(Error::InvalidSpec {
                spec: other.to_string(),
                reason: "the exact oracle needs a discrete law".into(),
            }),
        }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().zip(&self.probs).map(|(x, p)| p * f(*x)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.expect(|x| (x - mu) * (x - mu))
    }

    pub fn moments(&self, kmax: usize) -> Result<MomentSet> {
        MomentSet::from_masses(&self.atoms, &self.probs, kmax)
    }

    /// Index of the atom equal to `x` (within the merge tolerance).
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let pos = self.atoms.partition_point(|a| *a < x);
        [pos.wrapping_sub(1), pos]
            .into_iter()
            .filter(|&i| i < self.atoms.len())
            .find(|&i| same_atom(self.atoms[i], x))
    }

    /// Probability of the atom `x`; 0 if absent.
    pub fn prob_of(&self, x: f64) -> f64 {
        self.index_of(x).map_or(0.0, |i| self.probs[i])
    }

    /// Law of the sum of independent draws from `self` and `other`.
    pub fn convolve(&self, other: &Self, cap: usize) -> Result<Self> {
        let size = self.len() * other.len();
        let mut pairs = Vec::with_capacity(size);
        for (x, p) in self.atoms.iter().zip(&self.probs) {
            for (y, q) in other.atoms.iter().zip(&other.probs) {
                pairs.push((x + y, p * q));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let out = Self::from_sorted(pairs);
        if out.len() > cap {
            return Err(Error::SupportCap {
                atoms: out.len(),
                cap,
            });
        }
        Ok(out)
    }

    /// Law of `S_n`; `S_0` is the point mass at 0.
    pub fn sum_law(&self, n: usize, cap: usize) -> Result<Self> {
        let mut acc = Self {
            atoms: vec![0.0],
            probs: vec![1.0],
        };
        for _ in 0..n {
            acc = acc.convolve(self, cap)?;
        }
        Ok(acc)
    }

    /// The same law as a lattice density of step `step`; every atom must be a lattice point.
    pub fn to_lattice_density(&self, step: f64) -> Result<GridDensity> {
        if !(step > 0.0) {
            return Err(Error::InvalidGrid(format!("step {step} must be positive")));
        }
        let start = self.atoms[0];
        let last = ((self.atoms[self.len() - 1] - start) / step).round() as usize;
        let mut masses = vec![0.0; last + 3];
        for (x, p) in self.atoms.iter().zip(&self.probs) {
            let t = (x - start) / step;
            if (t - t.round()).abs() > 1e-9 {
                return Err(Error::GridMismatch(format!(
                    "atom {x} is not on the lattice of step {step}"
                )));
            }
            masses[t.round() as usize + 1] += p;
        }
        GridDensity::from_masses(start - step, step, &masses)
    }
}

/// The exact joint law of `(S_m, S_n)` and the operators it induces.
#[derive(Debug, Clone)]
pub struct ExactOperator {
    pub n: usize,
    pub m: usize,
    /// Law of `S_m`.
    pub y: DiscretePMF,
    /// Law of `S_n`.
    pub s: DiscretePMF,
    /// `joint[i][k] = P(S_m = y_i, S_n = s_k)`.
    pub joint: Vec<Vec<f64>>,
}

/// Builds the exact joint law of `(S_m, S_n)`.
pub fn exact_operator(p: &DiscretePMF, n: usize, m: usize) -> Result<ExactOperator> {
    exact_operator_capped(p, n, m, SUPPORT_CAP)
}

pub fn exact_operator_capped(p: &DiscretePMF, n: usize, m: usize, cap: usize) -> Result<ExactOperator> {
    if m == 0 || m >= n {
        return Err(Error::InvalidParameter {
            name: "m",
            value: m as f64,
            reason: "need 1 <= m < n",
        });
    }
    let y = p.sum_law(m, cap)?;
    let c = p.sum_law(n - m, cap)?;
    let s = y.convolve(&c, cap)?;
    let joint = y
        .atoms
        .iter()
        .zip(&y.probs)
        .map(|(yi, ai)| s.atoms.iter().map(|sk| ai * c.prob_of(sk - yi)).collect())
        .collect();
    Ok(ExactOperator { n, m, y, s, joint })
}

impl ExactOperator {
    /// `(C f)_k = E[f(S_m) | S_n = s_k]`.
    pub fn apply_c(&self, f: &[f64]) -> Vec<f64> {
        (0..self.s.len())
            .map(|k| {
                let num: f64 = self.joint.iter().zip(f).map(|(row, fi)| row[k] * fi).sum();
                num / self.s.probs[k]
            })
            .collect()
    }

    /// `(C* g)_i = E[g(S_n) | S_m = y_i]`.
    pub fn apply_cstar(&self, g: &[f64]) -> Vec<f64> {
        self.joint
            .iter()
            .zip(&self.y.probs)
            .map(|(row, ai)| row.iter().zip(g).map(|(pik, gk)| pik * gk).sum::<f64>() / ai)
            .collect()
    }

    /// `C` as a matrix acting on function values: `C[k][i] = P(i,k) / b_k`.
    pub fn c_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.s.len())
            .map(|k| self.joint.iter().map(|row| row[k] / self.s.probs[k]).collect())
            .collect()
    }

    /// `C*` as a matrix: `C*[i][k] = P(i,k) / a_i`.
    pub fn cstar_matrix(&self) -> Vec<Vec<f64>> {
        self.joint
            .iter()
            .zip(&self.y.probs)
            .map(|(row, ai)| row.iter().map(|p| p / ai).collect())
            .collect()
    }

    /// `C*C` acting on function values on the atoms of `S_m`.
    pub fn composed(&self) -> Vec<Vec<f64>> {
        let ny = self.y.len();
        (0..ny)
            .map(|i| {
                (0..ny)
                    .map(|j| {
                        (0..self.s.len())
                            .map(|k| self.joint[i][k] * self.joint[j][k] / self.s.probs[k])
                            .sum::<f64>()
                            / self.y.probs[i]
                    })
                    .collect()
            })
            .collect()
    }

    fn weighted(&self) -> Mat<f64> {
        Mat::from_fn(self.y.len(), self.s.len(), |i, k| {
            self.joint[i][k] / (self.y.probs[i] * self.s.probs[k]).sqrt()
        })
    }

    pub fn spectrum(&self) -> Result<SpectrumResult> {
        let dim = self.y.len();
        spectrum_from_b(
            &self.weighted(),
            &self.y.atoms,
            &self.y.probs,
            self.n,
            self.m,
            dim,
        )
    }
}

/// All eigenvalues of the exact `C*C`.
pub fn exact_spectrum(p: &DiscretePMF, n: usize, m: usize) -> Result<SpectrumResult> {
    exact_operator(p, n, m)?.spectrum()
}

/// Exact `Θ^(n,m)`.
pub fn exact_theta(p: &DiscretePMF, n: usize, m: usize) -> Result<ThetaResult> {
    if p.len() < 2 {
        return Err(Error::Degenerate(
            "a point mass has no non-trivial spectrum".into(),
        ));
    }
    Ok(ThetaResult::from_spectrum(&exact_spectrum(p, n, m)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u3() -> DiscretePMF {
        DiscretePMF::uniform(&[0.0, 1.0, 2.0]).unwrap()
    }

    #[test]
    fn composed_matrix_by_hand() {
        let op = exact_operator(&u3(), 2, 1).unwrap();
        let want = [[11.0, 5.0, 2.0], [5.0, 8.0, 5.0], [2.0, 5.0, 11.0]];
        let got = op.composed();
        for i in 0..3 {
            for j in 0..3 {
                assert!((got[i][j] - want[i][j] / 18.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn uniform_three_spectrum() {
        let sp = exact_spectrum(&u3(), 2, 1).unwrap();
        for (got, want) in sp.eigenvalues.iter().zip([1.0, 0.5, 1.0 / 6.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let t = exact_theta(&u3(), 2, 1).unwrap();
        assert!((t.theta - 2.0).abs() < 1e-12);
        assert!(exact_theta(&u3(), 3, 1).unwrap().theta >= 4.0 - 1e-10);
    }

    #[test]
    fn two_points() {
        let p = DiscretePMF::uniform(&[-1.0, 1.0]).unwrap();
        let op = exact_operator(&p, 2, 1).unwrap();
        // The only non-constant function on the atoms is linear; its C* image of
        // the quadratic h(s) = s² − 2 on {−2, 0, 2} vanishes.
        let h: Vec<f64> = op.s.atoms().iter().map(|s| s * s - 2.0).collect();
        assert!(op.apply_cstar(&h).iter().all(|v| v.abs() < 1e-15));
        assert!(exact_theta(&p, 2, 1).unwrap().theta.is_infinite());
    }

    #[test]
    fn adjointness_is_exact() {
        let p = DiscretePMF::new(vec![0.0, 1.0, 3.0], vec![0.2, 0.5, 0.3]).unwrap();
        let op = exact_operator(&p, 3, 1).unwrap();
        let f: Vec<f64> = op.y.atoms().iter().map(|x| (x * 1.3).sin()).collect();
        let g: Vec<f64> = op.s.atoms().iter().map(|x| (x * 0.7).cos()).collect();
        let lhs: f64 =
            op.s.probs()
                .iter()
                .zip(op.apply_c(&f))
                .zip(&g)
                .map(|((b, cf), g)| b * cf * g)
                .sum();
        let rhs: f64 =
            op.y.probs()
                .iter()
                .zip(op.apply_cstar(&g))
                .zip(&f)
                .map(|((a, cg), f)| a * cg * f)
                .sum();
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn merging_and_caps() {
        let p = DiscretePMF::new(vec![0.0, 1e-14, 1.0], vec![0.25, 0.25, 0.5]).unwrap();
        assert_eq!(p.len(), 2);
        let q = DiscretePMF::uniform(&[0.0, 1.0, 2f64.sqrt(), 3f64.sqrt()]).unwrap();
        assert!(matches!(
            exact_operator_capped(&q, 6, 1, 50),
            Err(Error::SupportCap { .. })
        ));
    }

    #[test]
    fn lattice_density_round_trip() {
        let d = u3().to_lattice_density(0.5).unwrap();
        assert!((d.mean() - 1.0).abs() < 1e-14);
        assert!(u3().to_lattice_density(0.3).is_err());
    }

    #[test]
    fn grid_theta_matches_exact_on_lattice() {
        let cfg = crate::GridConfig::default();
        let p = DiscretePMF::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.1, 0.4, 0.3, 0.2]).unwrap();
        let d = p.to_lattice_density(1.0).unwrap();
        for (n, m) in [(2, 1), (3, 1), (4, 2)] {
            let grid = crate::spect::theta(&d, n, m, &cfg).unwrap().theta;
            let exact = exact_theta(&p, n, m).unwrap().theta;
            assert!(
                (grid - exact).abs() < 1e-9 * (1.0 + exact),
                "{n},{m}: {grid} vs {exact}"
            );
        }
    }
}
