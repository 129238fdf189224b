use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// One Gaussian component of a mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub sigma: f64,
}

/// Law of the summands `Y_i`.
///
/// Parsed from a compact text form, e.g. `gaussian:sigma=1`,
/// `gamma:beta=4,centered=true`, `uniform:a=-1,b=1`,
/// `mixture:w=0.5,mu=-1,sigma=1;w=0.5,mu=1,sigma=1`,
/// `discrete:0=0.25,1=0.5,2=0.25` or `file:path/to/density.txt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DistributionSpec {
    Gaussian {
        sigma: f64,
    },
    /// Γ(β, 1); `centered` shifts the support to `[-β, ∞)`.
    Gamma {
        beta: f64,
        centered: bool,
    },
    Uniform {
        a: f64,
        b: f64,
    },
    GaussianMixture {
        components: Vec<MixtureComponent>,
    },
    /// Atoms with probabilities, ascending by atom.
    Discrete {
        atoms: Vec<(f64, f64)>,
    },
    File {
        path: PathBuf,
    },
}

fn invalid(spec: &str, reason: impl Into<String>) -> Error {
    Error::InvalidSpec {
        spec: spec.to_string(),
        reason: reason.into(),
    }
}

fn parse_f64(spec: &str, key: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| invalid(spec, format!("`{key}` is not a number: `{raw}`")))
}

fn parse_bool(spec: &str, key: &str, raw: &str) -> Result<bool> {
    match raw.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(invalid(spec, format!("`{key}` is not a boolean: `{other}`"))),
    }
}

/// Splits `k=v,k=v` into pairs. Keys may themselves be negative numbers, so split on
/// the last `=`.
fn key_values<'a>(spec: &str, body: &'a str) -> Result<Vec<(&'a str, &'a str)>> {
    body.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            kv.rsplit_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| invalid(spec, format!("expected key=value, found `{kv}`")))
        })
        .collect()
}

impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (family, body) = s
            .split_once(':')
            .ok_or_else(|| invalid(s, "expected `family:parameters`"))?;
        let spec = match family.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => {
                let mut sigma = None;
                for (k, v) in key_values(s, body)? {
                    match k {
                        "sigma" => sigma = Some(parse_f64(s, k, v)?),
                        other => return Err(invalid(s, format!("unknown key `{other}`"))),
                    }
                }
                DistributionSpec::Gaussian {
                    sigma: sigma.unwrap_or(1.0),
                }
            }
            "gamma" => {
                let mut beta = None;
                let mut centered = false;
                for (k, v) in key_values(s, body)? {
                    match k {
                        "beta" => beta = Some(parse_f64(s, k, v)?),
                        "centered" => centered = parse_bool(s, k, v)?,
                        other => return Err(invalid(s, format!("unknown key `{other}`"))),
                    }
                }
                DistributionSpec::Gamma {
                    beta: beta.ok_or_else(|| invalid(s, "missing `beta`"))?,
                    centered,
                }
            }
            "uniform" => {
                let (mut a, mut b) = (None, None);
                for (k, v) in key_values(s, body)? {
                    match k {
                        "a" => a = Some(parse_f64(s, k, v)?),
                        "b" => b = Some(parse_f64(s, k, v)?),
                        other => return Err(invalid(s, format!("unknown key `{other}`"))),
                    }
                }
                DistributionSpec::Uniform {
                    a: a.ok_or_else(|| invalid(s, "missing `a`"))?,
                    b: b.ok_or_else(|| invalid(s, "missing `b`"))?,
                }
            }
            "mixture" => {
                let mut components = Vec::new();
                for part in body.split(';').filter(|p| !p.trim().is_empty()) {
                    let (mut w, mut mu, mut sigma) = (None, 0.0, 1.0);
                    for (k, v) in key_values(s, part)? {
                        match k {
                            "w" | "weight" => w = Some(parse_f64(s, k, v)?),
                            "mu" | "mean" => mu = parse_f64(s, k, v)?,
                            "sigma" => sigma = parse_f64(s, k, v)?,
                            other => return Err(invalid(s, format!("unknown key `{other}`"))),
                        }
                    }
                    components.push(MixtureComponent {
                        weight: w.ok_or_else(|| invalid(s, "mixture component missing `w`"))?,
                        mean: mu,
                        sigma,
                    });
                }
                DistributionSpec::GaussianMixture { components }
            }
            "discrete" => {
                let mut atoms = key_values(s, body)?
                    .into_iter()
                    .map(|(k, v)| Ok((parse_f64(s, "atom", k)?, parse_f64(s, "prob", v)?)))
                    .collect::<Result<Vec<_>>>()?;
                atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
                DistributionSpec::Discrete { atoms }
            }
            "file" => {
                let path = body.trim();
                if path.is_empty() {
                    return Err(invalid(s, "missing path"));
                }
                DistributionSpec::File {
                    path: PathBuf::from(path),
                }
            }
            other => return Err(invalid(s, format!("unknown family `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionSpec::Gaussian { sigma } => write!(f, "gaussian:sigma={sigma}"),
            DistributionSpec::Gamma { beta, centered } => {
                write!(f, "gamma:beta={beta},centered={centered}")
            }
            DistributionSpec::Uniform { a, b } => write!(f, "uniform:a={a},b={b}"),
            DistributionSpec::GaussianMixture { components } => {
                write!(f, "mixture:")?;
                for (i, c) in components.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "w={},mu={},sigma={}", c.weight, c.mean, c.sigma)?;
                }
                Ok(())
            }
            DistributionSpec::Discrete { atoms } => {
                write!(f, "discrete:")?;
                for (i, (x, p)) in atoms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}={p}")?;
                }
                Ok(())
            }
            DistributionSpec::File { path } => write!(f, "file:{}", path.display()),
        }
    }
}

fn check_weights(spec: &DistributionSpec, weights: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    let mut count = 0;
    for w in weights {
        if !(w > 0.0 && w.is_finite()) {
            return Err(invalid(&spec.to_string(), format!("weight {w} is not positive")));
        }
        total += w;
        count += 1;
    }
    if count == 0 {
        return Err(invalid(&spec.to_string(), "no components"));
    }
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(invalid(
            &spec.to_string(),
            format!("weights sum to {total}, not 1"),
        ));
    }
    Ok(())
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::Gaussian { sigma } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "sigma",
                        value: *sigma,
                        reason: "must be positive",
                    });
                }
            }
            DistributionSpec::Gamma { beta, .. } => {
                if !(*beta > 0.0 && beta.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "beta",
                        value: *beta,
                        reason: "must be positive",
                    });
                }
            }
            DistributionSpec::Uniform { a, b } => {
                if !(a < b && a.is_finite() && b.is_finite()) {
                    return Err(invalid(&self.to_string(), "requires a < b"));
                }
            }
            DistributionSpec::GaussianMixture { components } => {
                check_weights(self, components.iter().map(|c| c.weight))?;
                if let Some(c) = components.iter().find(|c| !(c.sigma > 0.0)) {
                    return Err(Error::InvalidParameter {
                        name: "sigma",
                        value: c.sigma,
                        reason: "must be positive",
                    });
                }
            }
            DistributionSpec::Discrete { atoms } => {
                check_weights(self, atoms.iter().map(|a| a.1))?;
                if atoms.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(invalid(&self.to_string(), "atoms must be distinct"));
                }
            }
            DistributionSpec::File { .. } => {}
        }
        Ok(())
    }

    /// Short family label used in reports.
    pub fn family(&self) -> &'static str {
        match self {
            DistributionSpec::Gaussian { .. } => "gaussian",
            DistributionSpec::Gamma { .. } => "gamma",
            DistributionSpec::Uniform { .. } => "uniform",
            DistributionSpec::GaussianMixture { .. } => "mixture",
            DistributionSpec::Discrete { .. } => "discrete",
            DistributionSpec::File { .. } => "file",
        }
    }

    /// Mean and variance, where known without reading data.
    pub fn mean_variance(&self) -> Option<(f64, f64)> {
        match self {
            DistributionSpec::Gaussian { sigma } => Some((0.0, sigma * sigma)),
            DistributionSpec::Gamma { beta, centered } => Some((if *centered { 0.0 } else { *beta }, *beta)),
            DistributionSpec::Uniform { a, b } => Some(((a + b) / 2.0, (b - a).powi(2) / 12.0)),
            DistributionSpec::GaussianMixture { components } => {
                let mean: f64 = components.iter().map(|c| c.weight * c.mean).sum();
                let second: f64 = components
                    .iter()
                    .map(|c| c.weight * (c.sigma * c.sigma + c.mean * c.mean))
                    .sum();
                Some((mean, second - mean * mean))
            }
            DistributionSpec::Discrete { atoms } => {
                let mean: f64 = atoms.iter().map(|(x, p)| x * p).sum();
                let var = atoms.iter().map(|(x, p)| p * (x - mean).powi(2)).sum();
                Some((mean, var))
            }
            DistributionSpec::File { .. } => None,
        }
    }

    /// Closed support bounds `(lower, upper)`; `None` for an unbounded side.
    pub fn support(&self) -> (Option<f64>, Option<f64>) {
        match self {
            DistributionSpec::Gamma { beta, centered } => (Some(if *centered { -*beta } else { 0.0 }), None),
            DistributionSpec::Uniform { a, b } => (Some(*a), Some(*b)),
            DistributionSpec::Discrete { atoms } => (atoms.first().map(|a| a.0), atoms.last().map(|a| a.0)),
            _ => (None, None),
        }
    }

    /// Density at `x` for the continuous analytic families.
    pub(crate) fn pdf(&self, x: f64) -> f64 {
        match self {
            DistributionSpec::Gaussian { sigma } => gaussian_pdf(x, 0.0, *sigma),
            DistributionSpec::Gamma { beta, centered } => {
                let y = if *centered { x + beta } else { x };
                if y <= 0.0 {
                    0.0
                } else {
                    ((beta - 1.0) * y.ln() - y - ln_gamma(*beta)).exp()
                }
            }
            DistributionSpec::Uniform { a, b } => {
                if x > *a && x < *b {
                    1.0 / (b - a)
                } else if x == *a || x == *b {
                    0.5 / (b - a)
                } else {
                    0.0
                }
            }
            DistributionSpec::GaussianMixture { components } => components
                .iter()
                .map(|c| c.weight * gaussian_pdf(x, c.mean, c.sigma))
                .sum(),
            DistributionSpec::Discrete { .. } | DistributionSpec::File { .. } => 0.0,
        }
    }

    /// `P(X < lo) + P(X > hi)` for the continuous analytic families.
    pub(crate) fn mass_outside(&self, lo: f64, hi: f64) -> f64 {
        match self {
            DistributionSpec::Gaussian { sigma } => {
                let n = Normal::new(0.0, *sigma).expect("validated sigma");
                n.cdf(lo) + n.sf(hi)
            }
            DistributionSpec::Gamma { beta, centered } => {
                let shift = if *centered { *beta } else { 0.0 };
                let g = Gamma::new(*beta, 1.0).expect("validated beta");
                let below = if lo + shift > 0.0 { g.cdf(lo + shift) } else { 0.0 };
                below + g.sf((hi + shift).max(0.0))
            }
            DistributionSpec::Uniform { a, b } => {
                let len = b - a;
                ((lo - a).max(0.0) + (b - hi).max(0.0)).min(len) / len
            }
            DistributionSpec::GaussianMixture { components } => components
                .iter()
                .map(|c| {
                    let n = Normal::new(c.mean, c.sigma).expect("validated sigma");
                    c.weight * (n.cdf(lo) + n.sf(hi))
                })
                .sum(),
            DistributionSpec::Discrete { atoms } => atoms
                .iter()
                .filter(|(x, _)| *x < lo || *x > hi)
                .map(|(_, p)| p)
                .sum(),
            DistributionSpec::File { .. } => 0.0,
        }
    }

    /// `P(X <= x)` restricted to `[edge, edge + h]` for the gamma family; used to
    /// assign the boundary node a cell-average value when the density is singular there.
    pub(crate) fn gamma_edge_mass(beta: f64, width: f64) -> f64 {
        Gamma::new(beta, 1.0).expect("validated beta").cdf(width)
    }
}

pub(crate) fn gaussian_pdf(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Reads whitespace-separated `(x, value)` rows; `#` starts a comment.
pub(crate) fn read_two_columns(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            reason,
        };
        let mut cols = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|c| !c.is_empty());
        let (Some(x), Some(v), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(parse_err(format!("expected two columns, found `{line}`")));
        };
        let x: f64 = x.parse().map_err(|_| parse_err(format!("bad number `{x}`")))?;
        let v: f64 = v.parse().map_err(|_| parse_err(format!("bad number `{v}`")))?;
        if !x.is_finite() || !v.is_finite() {
            return Err(parse_err("non-finite value".into()));
        }
        rows.push((x, v));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: "no data rows".into(),
        });
    }
    Ok(rows)
}
