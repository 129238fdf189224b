//! The inequalities of the theory as plain functions and as [`BoundReport`]s.

mod chi2;
mod report;
mod suite;

use serde::{Deserialize, Serialize};

use crate::dens::{convolve_self, jst, GridConfig, GridDensity, MomentSet};
use crate::error::{Error, Result};

pub use chi2::{gauss_chi2_closed, gauss_chi2_quadrature, subgauss_chi2_bound, Chi2Method, SubGaussChi2};
pub use report::{BoundReport, Provenance, Relation, ReportContext, Side};
pub use suite::{bound_reports, exact_bound_reports, verify_all, VerifyConfig, VerifyOutcome};

/// Upper bound on `J_st(U_n)` from `Θ^(2)`: `J_st(Y) / (1 + Θ^(2) (n−1))`.
pub fn fisher_upper_theta2(jst_y: f64, theta2: f64, n: usize) -> Result<f64> {
    if !(theta2 >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "theta2",
            value: theta2,
            reason: "must be nonnegative",
        });
    }
    if n <= 1 {
        return Ok(jst_y);
    }
    Ok(jst_y / (1.0 + theta2 * (n - 1) as f64))
}

/// Lower bound on `J_st(U_n)` from the skewness: `γ₃² / (Σ + 2(n−1))`.
pub fn fisher_lower_skewness(gamma3: f64, sigma_stat: f64, n: usize) -> Result<f64> {
    if !(sigma_stat >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "Sigma",
            value: sigma_stat,
            reason: "must be nonnegative",
        });
    }
    let denom = sigma_stat + 2.0 * n.saturating_sub(1) as f64;
    if denom == 0.0 {
        return Err(Error::Degenerate("Sigma + 2(n-1) vanishes".into()));
    }
    Ok(gamma3 * gamma3 / denom)
}

/// Upper bound `Θ^(n) ≤ 2(n−1)/Σ`; `+∞` when `Σ = 0`.
pub fn theta_sigma_upper(sigma_stat: f64, n: usize) -> Result<f64> {
    if !(sigma_stat >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "Sigma",
            value: sigma_stat,
            reason: "must be nonnegative",
        });
    }
    if sigma_stat == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 * n.saturating_sub(1) as f64 / sigma_stat)
}

/// Ingredients of the degree-`k` moment bound on `Θ^(2)`.
///
/// With `h(s) = s^k − a s − M_k`, `a = M_{k+1}/(2σ²)` and `M_j = E S_2^j`
/// (centered law), `h(Y₁+Y₂) = C*h(Y₁) + C*h(Y₂) + U(Y₁,Y₂)` with orthogonal
/// pieces, so `Θ^(2) ≤ E U² / (2 E (C*h)²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub k: usize,
    #[serde(with = "crate::serde_inf")]
    pub bound: f64,
    pub e_u2: f64,
    pub e_cstar_h2: f64,
    /// `E h(S₂)²` expanded in the moments of `S₂`.
    pub e_h2: f64,
    /// `|E h(S₂)² − 2 E (C*h)² − E U²|`.
    pub identity_residual: f64,
    /// `M_{2k} − M_k² − M_{k+1}²/σ²`, the variant with the last term doubled.
    pub doubled_constant: f64,
}

fn binom(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Degree-`k` moment bound on `Θ^(2)`; needs central moments up to order `2k`.
pub fn theta_moment_upper(moments: &MomentSet, k: usize) -> Result<MomentBound> {
    if k < 2 {
        return Err(Error::InvalidParameter {
            name: "k",
            value: k as f64,
            reason: "need k >= 2",
        });
    }
    if moments.kmax() < 2 * k {
        return Err(Error::InvalidParameter {
            name: "k",
            value: k as f64,
            reason: "moments up to order 2k are required",
        });
    }
    let m = &moments.central;
    let s2 = moments.variance;
    let big = |j: usize| (0..=j).map(|l| binom(j, l) * m[l] * m[j - l]).sum::<f64>();
    let a = big(k + 1) / (2.0 * s2);

    // C*h(y) = Σ_j c_j y^j
    let mut c = vec![0.0; k + 1];
    c[k] += 1.0;
    c[1] -= a;
    c[0] -= m[k];
    for l in 1..k {
        let w = binom(k, l) * m[k - l];
        c[l] += w;
        c[0] -= w * m[l];
    }
    let e_cstar_h2: f64 = (0..=k)
        .flat_map(|i| (0..=k).map(move |j| (i, j)))
        .map(|(i, j)| c[i] * c[j] * m[i + j])
        .sum();
    let mut e_u2 = 0.0;
    for l in 1..k {
        for j in 1..k {
            e_u2 += binom(k, l)
                * binom(k, j)
                * (m[l + j] - m[l] * m[j])
                * (m[2 * k - l - j] - m[k - l] * m[k - j]);
        }
    }
    let (mk, mk1) = (big(k), big(k + 1));
    let e_h2 = big(2 * k) - mk * mk - mk1 * mk1 / (2.0 * s2);
    let identity_residual = (e_h2 - 2.0 * e_cstar_h2 - e_u2).abs();
    let scale = e_h2.abs().max(1e-300);
    if e_cstar_h2 <= 1e-12 * scale {
        return Err(Error::Degenerate(format!(
            "E (C*h)^2 = {e_cstar_h2:e} for the degree-{k} test function"
        )));
    }
    Ok(MomentBound {
        k,
        bound: e_u2 / (2.0 * e_cstar_h2),
        e_u2,
        e_cstar_h2,
        e_h2,
        identity_residual,
        doubled_constant: big(2 * k) - mk * mk - mk1 * mk1 / s2,
    })
}

/// Brute-force quadrature of the three expectations in [`MomentBound`] on a grid
/// law: `(E h(S₂)², E (C*h)², E U²)`.
pub fn moment_bound_quadrature(base: &GridDensity, k: usize) -> (f64, f64, f64) {
    let mu = base.mean();
    let nodes: Vec<f64> = base.nodes().into_iter().map(|x| x - mu).collect();
    let w = base.masses();
    let e = |f: &dyn Fn(f64) -> f64| nodes.iter().zip(&w).map(|(x, p)| p * f(*x)).sum::<f64>();
    let s2 = e(&|x| x * x);
    let mut mk2 = 0.0;
    let mut mk1_2 = 0.0;
    for (x, p) in nodes.iter().zip(&w) {
        for (y, q) in nodes.iter().zip(&w) {
            let s = x + y;
            mk2 += p * q * s.powi(k as i32);
            mk1_2 += p * q * s.powi(k as i32 + 1);
        }
    }
    let a = mk1_2 / (2.0 * s2);
    let h = |s: f64| s.powi(k as i32) - a * s - mk2;
    let cstar: Vec<f64> = nodes
        .iter()
        .map(|x| nodes.iter().zip(&w).map(|(y, q)| q * h(x + y)).sum())
        .collect();
    let mut e_h2 = 0.0;
    let mut e_u2 = 0.0;
    for (i, (x, p)) in nodes.iter().zip(&w).enumerate() {
        for (j, (y, q)) in nodes.iter().zip(&w).enumerate() {
            let v = h(x + y);
            e_h2 += p * q * v * v;
            let u = v - cstar[i] - cstar[j];
            e_u2 += p * q * u * u;
        }
    }
    let e_c2 = cstar.iter().zip(&w).map(|(c, p)| p * c * c).sum();
    (e_h2, e_c2, e_u2)
}

/// Lower bound `Θ^(2) ≥ 1/(2 J C_P)` from a Poincaré constant.
pub fn theta_poincare_lower(fisher_j: f64, poincare: f64) -> Result<f64> {
    for (name, v) in [("J", fisher_j), ("C_P", poincare)] {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter {
                name,
                value: v,
                reason: "must be positive",
            });
        }
    }
    Ok(1.0 / (2.0 * fisher_j * poincare))
}

/// Lower bound on `Θ^(n,m)` from `Θ^(2)`: `(1 + (n−1)Θ^(2)) / (1 + (m−1)Θ^(2)) − 1`.
pub fn theta_nm_chain(theta2: f64, n: usize, m: usize) -> Result<f64> {
    check_nm(n, m)?;
    if theta2.is_infinite() {
        return Ok((n - 1) as f64 / (m - 1) as f64 - 1.0);
    }
    Ok((1.0 + (n - 1) as f64 * theta2) / (1.0 + (m - 1) as f64 * theta2) - 1.0)
}

/// Lower bound on `Θ^(n,m)` from `Θ^(m)`: `((n−1)Θ^(m) + m−1) / ((m−1)(1+Θ^(m))) − 1`.
pub fn theta_nm_chain_from_m(theta_m: f64, n: usize, m: usize) -> Result<f64> {
    check_nm(n, m)?;
    let (nf, mf) = ((n - 1) as f64, (m - 1) as f64);
    if theta_m.is_infinite() {
        return Ok(nf / mf - 1.0);
    }
    Ok((nf * theta_m + mf) / (mf * (1.0 + theta_m)) - 1.0)
}

fn check_nm(n: usize, m: usize) -> Result<()> {
    if !(n > m && m >= 2) {
        return Err(Error::InvalidParameter {
            name: "m",
            value: m as f64,
            reason: "need n > m >= 2",
        });
    }
    Ok(())
}

/// `2 Var(X) / δ²`, the large-`n` ceiling on `n λ₂` after Gaussian smoothing.
pub fn unif_eigen_asymptote(var_x: f64, delta: f64) -> Result<f64> {
    if !(var_x > 0.0 && delta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "variance and delta must be positive",
        });
    }
    Ok(2.0 * var_x / (delta * delta))
}

/// `∫₀^∞ (1+τ)⁻¹ (1 + (n−1)(C + τD))⁻¹ dτ` in closed form.
pub fn debruijn_rate(c: f64, d: f64, n: usize) -> Result<f64> {
    if !(c > d && d > 0.0) {
        return Err(Error::InvalidParameter {
            name: "C",
            value: c,
            reason: "need C > D > 0",
        });
    }
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
            reason: "need n >= 2",
        });
    }
    let k = (n - 1) as f64;
    Ok((c / d + 1.0 / (d * k)).ln() / (1.0 + (c - d) * k))
}

/// The same integral by composite Simpson after `τ = u/(1−u)`.
pub fn debruijn_rate_quadrature(c: f64, d: f64, n: usize, intervals: usize) -> f64 {
    let k = (n - 1) as f64;
    let (b, e) = (1.0 + k * c, k * d);
    let f = |u: f64| 1.0 / (b * (1.0 - u) + e * u);
    let m = intervals + intervals % 2;
    let h = 1.0 / m as f64;
    let inner: f64 = (1..m)
        .map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h))
        .sum();
    h / 3.0 * (f(0.0) + inner + f(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityEntry {
    pub n: usize,
    pub jst: f64,
    /// `(1 + (n−1) Θ^(2)) J_st(U_n)`.
    pub product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicitySequence {
    pub theta2: f64,
    pub entries: Vec<MonotonicityEntry>,
    /// Largest relative increase `a_{n+1}/a_n − 1` over consecutive steps.
    pub worst_step: f64,
    /// Every step rises by at most 1%.
    pub non_increasing: bool,
}

/// Relative rise allowed per step of a monotone sequence.
pub const MONOTONE_STEP_TOL: f64 = 0.01;

/// `a_n = (1 + (n−1) Θ^(2)) J_st(U_n)` for `n = 1..=n_max`; `base` should be
/// built wide enough for `S_{n_max}`.
pub fn monotonicity_sequence(
    base: &GridDensity,
    theta2: f64,
    n_max: usize,
    cfg: &GridConfig,
) -> Result<MonotonicitySequence> {
    if !(1..=8).contains(&n_max) {
        return Err(Error::InvalidParameter {
            name: "n_max",
            value: n_max as f64,
            reason: "need 1 <= n_max <= 8",
        });
    }
    let mut entries = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let sn = convolve_self(base, n, cfg)?;
        let j = jst(&sn, cfg)?;
        entries.push(MonotonicityEntry {
            n,
            jst: j,
            product: (1.0 + (n - 1) as f64 * theta2) * j,
        });
    }
    let worst_step = entries
        .windows(2)
        .map(|w| {
            if w[0].product > 0.0 {
                w[1].product / w[0].product - 1.0
            } else if w[1].product > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let worst_step = if entries.len() < 2 { 0.0 } else { worst_step };
    // Products at the noise floor of J_st (e.g. Gaussian laws) count as constant.
    let floor = 1e-6;
    let non_increasing = entries
        .windows(2)
        .all(|w| w[1].product <= w[0].product * (1.0 + MONOTONE_STEP_TOL) || w[1].product < floor);
    Ok(MonotonicitySequence {
        theta2,
        entries,
        worst_step,
        non_increasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dens::{build_density, moments};

    #[test]
    fn scalar_bounds() {
        assert!((fisher_upper_theta2(1.0, 0.8, 2).unwrap() - 1.0 / 1.8).abs() < 1e-15);
        assert_eq!(fisher_upper_theta2(0.7, 0.3, 1).unwrap(), 0.7);
        assert_eq!(fisher_upper_theta2(0.7, 0.0, 9).unwrap(), 0.7);
        assert!((fisher_lower_skewness(1.0, 2.5, 1).unwrap() - 0.4).abs() < 1e-15);
        assert!((fisher_lower_skewness(1.0, 2.5, 2).unwrap() - 1.0 / 4.5).abs() < 1e-15);
        assert!(fisher_lower_skewness(0.0, 0.0, 1).is_err());
        assert_eq!(theta_sigma_upper(2.0, 2).unwrap(), 1.0);
        assert_eq!(theta_sigma_upper(0.0, 2).unwrap(), f64::INFINITY);
        assert_eq!(theta_poincare_lower(1.0, 1.0).unwrap(), 0.5);
        assert!(theta_poincare_lower(0.0, 1.0).is_err());
        assert_eq!(theta_nm_chain(1.0, 4, 2).unwrap(), 1.0);
        assert_eq!(theta_nm_chain(0.0, 4, 2).unwrap(), 0.0);
        assert!((theta_nm_chain(2.0, 3, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(unif_eigen_asymptote(1.0, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn chain_from_m_dominates_chain_from_two() {
        // Substituting the lower bound (m−1)Θ^(2) for Θ^(m) gives the weaker chain.
        for t2 in [0.1, 0.8, 3.0] {
            for (n, m) in [(3, 2), (5, 3), (8, 4)] {
                let tm = (m - 1) as f64 * t2;
                let a = theta_nm_chain_from_m(tm, n, m).unwrap();
                let b = theta_nm_chain(t2, n, m).unwrap();
                assert!((a - b).abs() < 1e-12, "{a} {b}");
                assert!(theta_nm_chain_from_m(tm * 1.5, n, m).unwrap() >= a);
            }
        }
    }

    #[test]
    fn debruijn() {
        let v = debruijn_rate(2.0, 1.0, 2).unwrap();
        assert!((v - 3f64.ln() / 2.0).abs() < 1e-15);
        for n in [2, 5, 40] {
            let q = debruijn_rate_quadrature(2.0, 0.5, n, 4000);
            assert!((q - debruijn_rate(2.0, 0.5, n).unwrap()).abs() < 1e-8);
        }
        assert!(debruijn_rate(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn moment_bound_reduces_to_sigma_bound_at_two() {
        let cfg = GridConfig::default();
        for (spec, want) in [("gaussian:sigma=1", 1.0), ("gamma:beta=4", 0.8)] {
            let d = build_density(&spec.parse().unwrap(), &cfg, 2).unwrap();
            let ms = moments(&d, 8).unwrap();
            let b = theta_moment_upper(&ms, 2).unwrap();
            assert!((b.bound - want).abs() < 1e-6, "{spec}: {}", b.bound);
            assert!(b.identity_residual < 1e-8 * b.e_h2);
        }
    }

    #[test]
    fn moment_bound_matches_quadrature() {
        let cfg = GridConfig::default().with_nodes(256);
        let d = build_density(&"gamma:beta=4".parse().unwrap(), &cfg, 2).unwrap();
        let ms = moments(&d, 8).unwrap();
        let b = theta_moment_upper(&ms, 3).unwrap();
        let (e_h2, e_c2, e_u2) = moment_bound_quadrature(&d, 3);
        for (x, y) in [(b.e_h2, e_h2), (b.e_cstar_h2, e_c2), (b.e_u2, e_u2)] {
            assert!((x - y).abs() < 1e-8 * y.abs().max(1.0), "{x} vs {y}");
        }
        assert!(b.bound >= 0.8);
        assert!((b.doubled_constant - b.e_h2).abs() > 1.0);
    }
}
