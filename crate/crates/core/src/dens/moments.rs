use serde::{Deserialize, Serialize};

use super::GridDensity;
use crate::error::{Error, Result};

/// Highest moment order [`moments`] will compute.
pub const MAX_MOMENT_ORDER: usize = 24;

/// Tolerance below zero allowed for `Σ` before the grid is declared inadequate.
const SIGMA_STAT_TOL: f64 = 1e-8;

/// Raw and central moments of a law, with the derived shape statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    /// `raw[k] = E Y^k` for `k = 0..=kmax` (so `raw[0] = 1`).
    pub raw: Vec<f64>,
    /// `central[k] = E (Y - mean)^k`.
    pub central: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    /// `γ₃ = E (Y - mean)³ / σ³`.
    pub skewness: f64,
    /// `Σ = μ₄/σ⁴ − γ₃² − 1`, kurtosis minus squared skewness minus one.
    pub sigma_stat: f64,
}

impl MomentSet {
    /// Moments of the discrete law putting `masses[i]` on `points[i]`.
    pub fn from_masses(points: &[f64], masses: &[f64], kmax: usize) -> Result<Self> {
        if kmax > MAX_MOMENT_ORDER {
            return Err(Error::InvalidParameter {
                name: "kmax",
                value: kmax as f64,
                reason: "exceeds the supported moment order",
            });
        }
        let order = kmax.max(4);
        let total: f64 = masses.iter().sum();
        let mean = points.iter().zip(masses).map(|(x, m)| x * m).sum::<f64>() / total;
        let mut raw = vec![0.0; order + 1];
        let mut central = vec![0.0; order + 1];
        for (&x, &m) in points.iter().zip(masses) {
            let w = m / total;
            let (mut p, mut c) = (w, w);
            for k in 0..=order {
                raw[k] += p;
                central[k] += c;
                p *= x;
                c *= x - mean;
            }
        }
        let variance = central[2];
        if !(variance > 0.0) {
            return Err(Error::NonPositiveVariance { variance });
        }
        let skewness = central[3] / variance.powf(1.5);
        let sigma_stat = central[4] / (variance * variance) - skewness * skewness - 1.0;
        if sigma_stat < -SIGMA_STAT_TOL {
            return Err(Error::GridInadequate { sigma_stat });
        }
        raw.truncate(kmax + 1);
        central.truncate(kmax + 1);
        Ok(Self {
            raw,
            central,
            mean,
            variance,
            skewness,
            sigma_stat: sigma_stat.max(0.0),
        })
    }

    pub fn kmax(&self) -> usize {
        self.raw.len() - 1
    }

    pub fn sigma(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Trapezoid-rule moments of `d` up to order `kmax` (at most [`MAX_MOMENT_ORDER`]).
pub fn moments(d: &GridDensity, kmax: usize) -> Result<MomentSet> {
    MomentSet::from_masses(&d.nodes(), &d.masses(), kmax)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dens::{build_density, convolve_self, GridConfig};

    fn m(spec: &str) -> MomentSet {
        let d = build_density(&spec.parse().unwrap(), &GridConfig::default(), 1).unwrap();
        moments(&d, 8).unwrap()
    }

    #[test]
    fn gaussian_sigma_stat() {
        let s = m("gaussian:sigma=1");
        assert!((s.sigma_stat - 2.0).abs() < 1e-9);
        assert!(s.skewness.abs() < 1e-12);
    }

    #[test]
    fn gamma_sigma_stat() {
        let s = m("gamma:beta=4");
        assert!((s.skewness - 1.0).abs() < 1e-4);
        assert!((s.sigma_stat - 2.5).abs() < 1e-3);
    }

    #[test]
    fn uniform_sigma_stat() {
        let s = m("uniform:a=-1,b=1");
        assert!(s.skewness.abs() < 1e-12);
        assert!((s.sigma_stat - 0.8).abs() < 1e-5);
    }

    #[test]
    fn second_moment_doubles() {
        let cfg = GridConfig::default();
        let d = build_density(&"gamma:beta=4,centered=true".parse().unwrap(), &cfg, 1).unwrap();
        let s = convolve_self(&d, 2, &cfg).unwrap();
        let (a, b) = (moments(&d, 2).unwrap(), moments(&s, 2).unwrap());
        assert!((b.raw[2] - 2.0 * a.raw[2]).abs() < 1e-8);
    }

    #[test]
    fn rejects_point_mass() {
        assert!(matches!(
            MomentSet::from_masses(&[1.0], &[1.0], 4),
            Err(Error::NonPositiveVariance { .. })
        ));
        assert!(MomentSet::from_masses(&[0.0, 1.0], &[0.5, 0.5], 30).is_err());
    }
}
