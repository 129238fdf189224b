//! Analytic eigenstructure for the Gaussian and gamma families.
//!
//! For Gaussian summands the singular functions of the conditional expectation are
//! scaled Hermite polynomials with `λ_k = n^{−k}`; for `Γ(β, 1)` summands they are
//! generalized Laguerre polynomials with `λ_k = C(k+β−1, k) / C(k+βn−1, k)`.

use faer::Mat;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dens::DistributionSpec;
use crate::error::{Error, Result};
use crate::linalg::sym_eigen;

/// `λ_k = n^{−k}` for Gaussian summands.
pub fn hermite_lambda(n: u32, k: u32) -> f64 {
    (n as f64).powi(-(k as i32))
}

/// `λ_k = C(k+β−1, k) / C(k+βn−1, k) = Π_{j<k} (β+j)/(βn+j)` for `Γ(β, 1)` summands.
pub fn laguerre_lambda(beta: f64, n: u32, k: u32) -> f64 {
    let bn = beta * n as f64;
    (0..k).map(|j| (beta + j as f64) / (bn + j as f64)).product()
}

/// `Θ^(n)` for the families where it is known in closed form.
pub fn closed_theta(spec: &DistributionSpec, n: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
            reason: "must be at least 2",
        });
    }
    let n = n as f64;
    match spec {
        DistributionSpec::Gaussian { .. } => Ok(n - 1.0),
        DistributionSpec::Gamma { beta, .. } => Ok(beta * (n - 1.0) / (beta + 1.0)),
        other => Err(Error::InvalidSpec {
            spec: other.to_string(),
            reason: "no closed-form Θ for this family".into(),
        }),
    }
}

/// `λ_k^(n)` for the families where it is known in closed form.
pub fn closed_lambda(spec: &DistributionSpec, n: u32, k: u32) -> Result<f64> {
    match spec {
        DistributionSpec::Gaussian { .. } => Ok(hermite_lambda(n, k)),
        DistributionSpec::Gamma { beta, .. } => Ok(laguerre_lambda(*beta, n, k)),
        other => Err(Error::InvalidSpec {
            spec: other.to_string(),
            reason: "no closed-form spectrum for this family".into(),
        }),
    }
}

/// `J_st` of `Γ(β, 1)`: `2/(β−2)`, and `+∞` for `β ≤ 2`.
pub fn gamma_jst(beta: f64) -> f64 {
    if beta <= 2.0 {
        f64::INFINITY
    } else {
        2.0 / (beta - 2.0)
    }
}

/// Orthogonal polynomial families, evaluated by three-term recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PolyFamily {
    /// `H_k^(α)(x) = He_k(x/√α)`, orthogonal under `N(0, α)`.
    Hermite { variance: f64 },
    /// `L_k^(α)`, orthogonal under `Γ(α+1, 1)`.
    Laguerre { alpha: f64 },
}

impl PolyFamily {
    /// Values of degrees `0..=kmax` at `x`.
    pub fn eval_all(&self, kmax: usize, x: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(kmax + 1);
        out.push(1.0);
        if kmax == 0 {
            return out;
        }
        match *self {
            PolyFamily::Hermite { variance } => {
                let z = x / variance.sqrt();
                out.push(z);
                for k in 1..kmax {
                    out.push(z * out[k] - k as f64 * out[k - 1]);
                }
            }
            PolyFamily::Laguerre { alpha } => {
                out.push(1.0 + alpha - x);
                for k in 1..kmax {
                    let kf = k as f64;
                    let next =
                        ((2.0 * kf + 1.0 + alpha - x) * out[k] - (kf + alpha) * out[k - 1]) / (kf + 1.0);
                    out.push(next);
                }
            }
        }
        out
    }

    pub fn eval(&self, k: usize, x: f64) -> f64 {
        self.eval_all(k, x)[k]
    }

    /// `ln ‖P_k‖²` under the normalized weight: `ln k!` or `ln C(k+α, k)`.
    pub fn ln_norm_sq(&self, k: usize) -> f64 {
        let kf = k as f64;
        match *self {
            PolyFamily::Hermite { .. } => ln_gamma(kf + 1.0),
            PolyFamily::Laguerre { alpha } => {
                ln_gamma(kf + alpha + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(alpha + 1.0)
            }
        }
    }

    /// Orthonormal polynomial of degree `k` at `x`.
    pub fn orthonormal(&self, k: usize, x: f64) -> f64 {
        self.eval(k, x) * (-0.5 * self.ln_norm_sq(k)).exp()
    }

    /// Gauss rule of `size` nodes for the normalized weight (Golub–Welsch), exact for
    /// polynomials of degree below `2 · size`.
    pub fn gauss_rule(&self, size: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let (diag, off): (Vec<f64>, Vec<f64>) = match *self {
            PolyFamily::Hermite { .. } => (vec![0.0; size], (1..size).map(|k| (k as f64).sqrt()).collect()),
            PolyFamily::Laguerre { alpha } => (
                (0..size).map(|k| 2.0 * k as f64 + alpha + 1.0).collect(),
                (1..size)
                    .map(|k| (k as f64 * (k as f64 + alpha)).sqrt())
                    .collect(),
            ),
        };
        let jacobi = Mat::from_fn(size, size, |i, j| {
            if i == j {
                diag[i]
            } else if i == j + 1 {
                off[j]
            } else if j == i + 1 {
                off[i]
            } else {
                0.0
            }
        });
        let eig = sym_eigen(&jacobi)?;
        let scale = match *self {
            PolyFamily::Hermite { variance } => variance.sqrt(),
            PolyFamily::Laguerre { .. } => 1.0,
        };
        let mut nodes: Vec<f64> = eig.values.iter().map(|v| v * scale).collect();
        nodes.sort_by(f64::total_cmp);
        // Christoffel numbers keep full relative accuracy where eigenvector
        // components underflow.
        let weights = nodes
            .iter()
            .map(|&x| {
                let p = self.eval_all(size - 1, x);
                let s: f64 = p
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * v * (-self.ln_norm_sq(k)).exp())
                    .sum();
                1.0 / s
            })
            .collect();
        Ok((nodes, weights))
    }

    /// `max |⟨P̂_i, P̂_j⟩ − δ_ij|` over degrees `≤ max_degree` under the rule `(nodes, weights)`.
    pub fn orthonormality_residual(&self, max_degree: usize, nodes: &[f64], weights: &[f64]) -> f64 {
        let scaled: Vec<Vec<f64>> = nodes
            .iter()
            .map(|&x| {
                self.eval_all(max_degree, x)
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * (-0.5 * self.ln_norm_sq(k)).exp())
                    .collect()
            })
            .collect();
        let mut worst = 0.0f64;
        for i in 0..=max_degree {
            for j in 0..=max_degree {
                let ip: f64 = scaled.iter().zip(weights).map(|(p, w)| w * p[i] * p[j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }
}

/// `|LHS − RHS|` of the Hermite addition formula
/// `H_m^(nτ²)(x+y) = Σ_k C(m,k) ((n−1)/n)^{k/2} n^{−(m−k)/2} H_{m−k}^(τ²)(x) H_k^((n−1)τ²)(y)`.
pub fn addition_check_hermite(m: usize, n: u32, tau2: f64, x: f64, y: f64) -> f64 {
    let nf = n as f64;
    let lhs = PolyFamily::Hermite { variance: nf * tau2 }.eval(m, x + y);
    let hx = PolyFamily::Hermite { variance: tau2 }.eval_all(m, x);
    let hy = PolyFamily::Hermite {
        variance: (nf - 1.0) * tau2,
    }
    .eval_all(m, y);
    let mut binom = 1.0;
    let mut rhs = 0.0;
    for k in 0..=m {
        let coeff = binom * ((nf - 1.0) / nf).powf(k as f64 / 2.0) * nf.powf(-((m - k) as f64) / 2.0);
        rhs += coeff * hx[m - k] * hy[k];
        binom = binom * (m - k) as f64 / (k + 1) as f64;
    }
    (lhs - rhs).abs()
}

/// `|LHS − RHS|` of the Laguerre addition formula
/// `L_m^(α+β+1)(x+y) = Σ_i L_i^(α)(x) L_{m−i}^(β)(y)`.
pub fn addition_check_laguerre(m: usize, alpha: f64, beta: f64, x: f64, y: f64) -> f64 {
    let lhs = PolyFamily::Laguerre {
        alpha: alpha + beta + 1.0,
    }
    .eval(m, x + y);
    let lx = PolyFamily::Laguerre { alpha }.eval_all(m, x);
    let ly = PolyFamily::Laguerre { alpha: beta }.eval_all(m, y);
    let rhs: f64 = (0..=m).map(|i| lx[i] * ly[m - i]).sum();
    (lhs - rhs).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalue_formulas() {
        assert_eq!(hermite_lambda(2, 2), 0.25);
        assert_eq!(hermite_lambda(7, 0), 1.0);
        assert!((laguerre_lambda(1.0, 2, 2) - 1.0 / 3.0).abs() < 1e-15);
        // C(k+β−1,k)/C(k+βn−1,k) with β = 2, n = 3, k = 2: C(3,2)/C(7,2) = 3/21.
        assert!((laguerre_lambda(2.0, 3, 2) - 3.0 / 21.0).abs() < 1e-15);
        let sum: f64 = (0..=40).map(|k| hermite_lambda(2, k)).sum();
        assert!((sum - 2.0).abs() < 1e-12);
    }

    #[test]
    fn theta_closed_forms() {
        let g: DistributionSpec = "gaussian:sigma=1".parse().unwrap();
        assert_eq!(closed_theta(&g, 5).unwrap(), 4.0);
        let gm: DistributionSpec = "gamma:beta=2".parse().unwrap();
        assert!((closed_theta(&gm, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let big = DistributionSpec::Gamma {
            beta: 1e9,
            centered: false,
        };
        assert!((closed_theta(&big, 2).unwrap() - 1.0).abs() < 1e-8);
        let u: DistributionSpec = "uniform:a=0,b=1".parse().unwrap();
        assert!(closed_theta(&u, 2).is_err());
        // The second eigenvalue reproduces Θ: 1/(n λ₂) − 1.
        let l2 = laguerre_lambda(2.0, 2, 2);
        assert!((1.0 / (2.0 * l2) - 1.0 - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn sigma_bound_is_tight() {
        for beta in [0.5, 1.0, 4.0, 10.0] {
            let sigma = 2.0 + 2.0 / beta;
            let g = DistributionSpec::Gamma { beta, centered: true };
            assert!((closed_theta(&g, 2).unwrap() - 2.0 / sigma).abs() < 1e-14);
        }
    }

    #[test]
    fn gamma_jst_values() {
        assert_eq!(gamma_jst(4.0), 1.0);
        assert!((gamma_jst(8.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!(gamma_jst(2.0).is_infinite());
    }

    #[test]
    fn addition_formulas() {
        assert_eq!(addition_check_hermite(0, 3, 1.0, 0.2, 0.4), 0.0);
        assert!(addition_check_hermite(3, 2, 1.0, 0.7, -0.3) < 1e-10);
        assert_eq!(addition_check_laguerre(0, 0.0, 1.0, 0.4, 1.1), 0.0);
        assert!(addition_check_laguerre(2, 0.0, 1.0, 0.4, 1.1) < 1e-10);
    }

    #[test]
    fn orthonormality() {
        for family in [
            PolyFamily::Hermite { variance: 1.0 },
            PolyFamily::Hermite { variance: 2.5 },
            PolyFamily::Laguerre { alpha: 0.0 },
            PolyFamily::Laguerre { alpha: 3.0 },
        ] {
            let (x, w) = family.gauss_rule(48).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(family.orthonormality_residual(10, &x, &w) < 1e-8, "{family:?}");
        }
    }

    #[test]
    fn hermite_matches_explicit() {
        let h = PolyFamily::Hermite { variance: 1.0 };
        let x = 0.37f64;
        assert!((h.eval(3, x) - (x.powi(3) - 3.0 * x)).abs() < 1e-15);
        let l = PolyFamily::Laguerre { alpha: 1.0 };
        // L_2^(1)(x) = (x² − 6x + 6)/2.
        assert!((l.eval(2, x) - (x * x - 6.0 * x + 6.0) / 2.0).abs() < 1e-15);
    }
}
