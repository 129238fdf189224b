use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{spec::gaussian_pdf, GridConfig, GridDensity};
use crate::error::{Error, Result};

/// FFT output below this fraction of the peak is indistinguishable from rounding noise.
const FFT_NOISE_FLOOR: f64 = 1e-13;

fn check_size(len: usize, cfg: &GridConfig) -> Result<()> {
    if len > cfg.max_nodes {
        return Err(Error::GridOverflow {
            requested: len,
            limit: cfg.max_nodes,
        });
    }
    Ok(())
}

/// Direct (quadratic-cost) convolution of two mass vectors.
pub(crate) fn convolve_masses_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (o, &bj) in out[i..].iter_mut().zip(b) {
            *o += ai * bj;
        }
    }
    out
}

/// Zero-padded FFT convolution. Returns the masses and the absolute mass clamped to 0.
fn convolve_masses_fft(a: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let out_len = a.len() + b.len() - 1;
    let size = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward: Arc<dyn Fft<f64>> = planner.plan_fft_forward(size);
    let inverse: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(size);
    let pad = |v: &[f64]| {
        let mut buf = vec![Complex::new(0.0, 0.0); size];
        for (b, &x) in buf.iter_mut().zip(v) {
            b.re = x;
        }
        buf
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inverse.process(&mut fa);
    let scale = 1.0 / size as f64;
    let mut out: Vec<f64> = fa[..out_len].iter().map(|c| c.re * scale).collect();
    let peak = out.iter().cloned().fold(0.0, f64::max);
    let mut clamped = 0.0;
    for v in &mut out {
        if *v < FFT_NOISE_FLOOR * peak {
            clamped += v.abs();
            *v = 0.0;
        }
    }
    (out, clamped)
}

fn assemble(
    a: &GridDensity,
    b: &GridDensity,
    masses: Vec<f64>,
    clamped: f64,
    cfg: &GridConfig,
) -> Result<GridDensity> {
    let total: f64 = masses.iter().sum();
    let start = a.start() + b.start();
    let d = GridDensity::from_masses(start, a.step(), &masses)?;
    let d = d.with_metadata(
        a.truncated_mass() + b.truncated_mass(),
        a.clamped_mass() + b.clamped_mass() + clamped / total.max(f64::MIN_POSITIVE),
        cfg.mass_cutoff,
    );
    d.trimmed(cfg.trim_mass)
}

fn check_steps(a: &GridDensity, b: &GridDensity) -> Result<()> {
    if ((a.step() - b.step()) / a.step()).abs() > 1e-9 {
        return Err(Error::GridMismatch(format!(
            "convolution needs equal steps, got {} and {}",
            a.step(),
            b.step()
        )));
    }
    Ok(())
}

/// Density of `X + Y` for independent `X ~ a`, `Y ~ b` on a common step (FFT).
pub fn convolve(a: &GridDensity, b: &GridDensity, cfg: &GridConfig) -> Result<GridDensity> {
    check_steps(a, b)?;
    check_size(a.len() + b.len() - 1, cfg)?;
    let (masses, clamped) = convolve_masses_fft(&a.masses(), &b.masses());
    assemble(a, b, masses, clamped, cfg)
}

/// As [`convolve`], by direct summation; no clamping is needed.
pub fn convolve_exact(a: &GridDensity, b: &GridDensity, cfg: &GridConfig) -> Result<GridDensity> {
    check_steps(a, b)?;
    check_size(a.len() + b.len() - 1, cfg)?;
    let masses = convolve_masses_direct(&a.masses(), &b.masses());
    assemble(a, b, masses, 0.0, cfg)
}

fn power(
    d: &GridDensity,
    n: usize,
    cfg: &GridConfig,
    op: fn(&GridDensity, &GridDensity, &GridConfig) -> Result<GridDensity>,
) -> Result<GridDensity> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let mut result: Option<GridDensity> = None;
    let mut base = d.clone();
    let mut k = n;
    loop {
        if k & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => op(&r, &base, cfg)?,
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = op(&base, &base, cfg)?;
    }
    Ok(result.expect("n >= 1"))
}

/// Density of `S_n`, the sum of `n` independent copies (FFT, binary powering).
pub fn convolve_self(d: &GridDensity, n: usize, cfg: &GridConfig) -> Result<GridDensity> {
    power(d, n, cfg, convolve)
}

/// Density of `S_n` by repeated direct convolution.
pub fn convolve_self_exact(d: &GridDensity, n: usize, cfg: &GridConfig) -> Result<GridDensity> {
    if n == 0 {
        return power(d, n, cfg, convolve_exact);
    }
    let mut acc = d.clone();
    for _ in 1..n {
        acc = convolve_exact(&acc, d, cfg)?;
    }
    Ok(acc)
}

/// Density of `c X`.
pub fn rescale(d: &GridDensity, c: f64) -> Result<GridDensity> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "c",
            value: c,
            reason: "scale factor must be positive and finite",
        });
    }
    let values = d.values().iter().map(|v| v / c).collect();
    let out = GridDensity::from_values(d.start() * c, d.step() * c, values)?;
    Ok(out
        .with_metadata(d.truncated_mass(), d.clamped_mass(), f64::INFINITY)
        .with_warning(d.truncation_warning()))
}

/// Density of `X + Z` with `Z ~ N(0, δ²)` independent of `X`.
///
/// The Gaussian is sampled on the lattice of `d` out to `half_width_sigmas · δ`; `δ`
/// must span at least two grid steps for the sampled kernel to carry the right variance.
pub fn gaussian_regularize(d: &GridDensity, delta: f64, cfg: &GridConfig) -> Result<GridDensity> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "must be positive and finite",
        });
    }
    if delta < 2.0 * d.step() {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            reason: "smaller than two grid steps; refine the grid",
        });
    }
    let half = (cfg.half_width_sigmas * delta / d.step()).ceil() as usize;
    check_size(2 * half + 1, cfg)?;
    let values: Vec<f64> = (0..=2 * half)
        .map(|i| gaussian_pdf((i as f64 - half as f64) * d.step(), 0.0, delta))
        .collect();
    let kernel = GridDensity::from_values(-(half as f64) * d.step(), d.step(), values)?;
    convolve(d, &kernel, cfg)
}
