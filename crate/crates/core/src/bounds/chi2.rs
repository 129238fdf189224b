use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dens::{build_density, DistributionSpec, GridConfig};
use crate::error::{Error, Result};

/// `χ²(N(x, δ²R_ρ) ‖ N(y, δ²I))` with `R_ρ = [[1, ρ], [ρ, 1]]`.
pub fn gauss_chi2_closed(x: [f64; 2], y: [f64; 2], rho: f64, delta: f64) -> Result<f64> {
    check_rho_delta(rho, delta)?;
    let (d0, d1) = (x[0] - y[0], x[1] - y[1]);
    let q = d0 * d0 + 2.0 * rho * d0 * d1 + d1 * d1;
    let one = 1.0 - rho * rho;
    Ok((q / (one * delta * delta)).exp() / one - 1.0)
}

fn check_rho_delta(rho: f64, delta: f64) -> Result<()> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            value: rho,
            reason: "need |rho| < 1",
        });
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "must be positive",
        });
    }
    Ok(())
}

/// The same divergence as `∫ p²/q − 1` by a product trapezoid rule on a box
/// around the peak of `p²/q`, `nodes` points per axis.
pub fn gauss_chi2_quadrature(x: [f64; 2], y: [f64; 2], rho: f64, delta: f64, nodes: usize) -> Result<f64> {
    check_rho_delta(rho, delta)?;
    let d2 = delta * delta;
    let det = d2 * d2 * (1.0 - rho * rho);
    // Precision of p is (δ²R)⁻¹; of q, I/δ².
    let pa = [d2 / det, -rho * d2 / det, d2 / det];
    let ln_p = |u0: f64, u1: f64| {
        let (a, b) = (u0 - x[0], u1 - x[1]);
        -0.5 * (pa[0] * a * a + 2.0 * pa[1] * a * b + pa[2] * b * b)
            - (2.0 * std::f64::consts::PI).ln()
            - 0.5 * det.ln()
    };
    let ln_q = |u0: f64, u1: f64| {
        let (a, b) = (u0 - y[0], u1 - y[1]);
        -0.5 * (a * a + b * b) / d2 - (2.0 * std::f64::consts::PI * d2).ln()
    };
    // p²/q is Gaussian with precision 2P − I/δ²; centre and width come from it.
    let k = [2.0 * pa[0] - 1.0 / d2, 2.0 * pa[1], 2.0 * pa[2] - 1.0 / d2];
    let kdet = k[0] * k[2] - k[1] * k[1];
    let rhs = [
        2.0 * (pa[0] * x[0] + pa[1] * x[1]) - y[0] / d2,
        2.0 * (pa[1] * x[0] + pa[2] * x[1]) - y[1] / d2,
    ];
    let centre = [
        (k[2] * rhs[0] - k[1] * rhs[1]) / kdet,
        (k[0] * rhs[1] - k[1] * rhs[0]) / kdet,
    ];
    let sd = [(k[2] / kdet).sqrt(), (k[0] / kdet).sqrt()];
    let half = 12.0;
    let h = [
        2.0 * half * sd[0] / (nodes - 1) as f64,
        2.0 * half * sd[1] / (nodes - 1) as f64,
    ];
    let g = |i: usize, j: usize| {
        let u0 = centre[0] - half * sd[0] + i as f64 * h[0];
        let u1 = centre[1] - half * sd[1] + j as f64 * h[1];
        2.0 * ln_p(u0, u1) - ln_q(u0, u1)
    };
    let peak = g((nodes - 1) / 2, (nodes - 1) / 2).max(g(nodes / 2, nodes / 2));
    let mut sum = 0.0;
    for i in 0..nodes {
        let wi = if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
        for j in 0..nodes {
            let wj = if j == 0 || j == nodes - 1 { 0.5 } else { 1.0 };
            sum += wi * wj * (g(i, j) - peak).exp();
        }
    }
    Ok(sum * h[0] * h[1] * peak.exp() - 1.0)
}

/// How `E exp(t (X − X′)²)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Chi2Method {
    /// Exact sum over the lattice law of `X − X′` on the grid of `X`.
    Quadrature,
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubGaussChi2 {
    pub n: usize,
    pub delta: f64,
    /// `t = 1/((n−1)δ²)`.
    pub t: f64,
    /// `E exp(t (X − X′)²)`; `+∞` when divergent.
    #[serde(with = "crate::serde_inf")]
    pub expectation: f64,
    /// `n/(n−1) · expectation`.
    #[serde(with = "crate::serde_inf")]
    pub bound: f64,
    /// The integrand does not decay at the edge of the difference grid
    /// (never set for bounded laws).
    pub diverged: bool,
    pub method: Chi2Method,
}

/// Decay (in nats of the integrand) required between the two probe radii for the
/// expectation to count as convergent.
const EDGE_DECAY: f64 = 1.0;
/// Probe radii as fractions of the largest lag on the grid.
const EDGE_INNER: f64 = 0.4;
const EDGE_OUTER: f64 = 0.55;

/// Upper bound `n/(n−1) · E exp((X − X′)²/((n−1)δ²))` on the χ² divergence between
/// `(Y₁, U_n)` and its decoupled version, `Y = X + N(0, δ²)`.
pub fn subgauss_chi2_bound(
    spec: &DistributionSpec,
    delta: f64,
    n: usize,
    method: Chi2Method,
    cfg: &GridConfig,
) -> Result<SubGaussChi2> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: n as f64,
            reason: "need n >= 2",
        });
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "must be positive",
        });
    }
    let t = 1.0 / ((n - 1) as f64 * delta * delta);
    let d = build_density(spec, cfg, 1)?;
    let masses = d.masses();
    let len = masses.len();
    let step = d.step();

    // Law of X − X′ at lags −(len−1)..=(len−1).
    let mut lag = vec![0.0; 2 * len - 1];
    for (i, a) in masses.iter().enumerate() {
        if *a == 0.0 {
            continue;
        }
        for (j, b) in masses.iter().enumerate() {
            lag[i + len - 1 - j] += a * b;
        }
    }
    let ln_g: Vec<(f64, f64)> = lag
        .iter()
        .enumerate()
        .filter(|(_, q)| **q > 0.0)
        .map(|(k, q)| {
            let w = (k as f64 - (len - 1) as f64) * step;
            (w, q.ln() + t * w * w)
        })
        .collect();
    // Near the outer edge the lag law is depleted by truncation of X itself, so the
    // growth test compares two radii where it is still resolved.
    let w_edge = ln_g.iter().map(|(w, _)| w.abs()).fold(0.0, f64::max);
    let at = |frac: f64| {
        ln_g.iter()
            .filter(|(w, _)| (w.abs() - frac * w_edge).abs() <= step * 0.5)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (inner, outer) = (at(EDGE_INNER), at(EDGE_OUTER));
    // Bounded laws give a bounded integrand; otherwise the grid edge must show decay.
    let bounded = matches!(spec.support(), (Some(_), Some(_)));
    let diverged = !bounded && outer - inner > -EDGE_DECAY;

    let expectation = if diverged {
        f64::INFINITY
    } else {
        match method {
            Chi2Method::Quadrature => {
                let peak = ln_g.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
                peak.exp() * ln_g.iter().map(|(_, v)| (v - peak).exp()).sum::<f64>()
            }
            Chi2Method::MonteCarlo { samples, seed } => {
                let cdf: Vec<f64> = masses
                    .iter()
                    .scan(0.0, |acc, m| {
                        *acc += m;
                        Some(*acc)
                    })
                    .collect();
                let total = *cdf.last().unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let draw = |rng: &mut ChaCha8Rng| {
                    let u = rng.random::<f64>() * total;
                    d.node(cdf.partition_point(|c| *c < u).min(len - 1))
                };
                let mut acc = 0.0;
                for _ in 0..samples {
                    let w = draw(&mut rng) - draw(&mut rng);
                    acc += (t * w * w).exp();
                }
                acc / samples as f64
            }
        }
    };
    Ok(SubGaussChi2 {
        n,
        delta,
        t,
        expectation,
        bound: n as f64 / (n - 1) as f64 * expectation,
        diverged,
        method,
    })
}
