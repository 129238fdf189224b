//! One line per acceptance criterion; the test fails if any criterion does.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use clt_spectra::bounds::{
    fisher_lower_skewness, fisher_upper_theta2, gauss_chi2_closed, gauss_chi2_quadrature,
    subgauss_chi2_bound, verify_all, Chi2Method, VerifyConfig,
};
use clt_spectra::closed::{addition_check_hermite, addition_check_laguerre, PolyFamily};
use clt_spectra::dens::{build_density, convolve_self, fisher_info, moments};
use clt_spectra::exact::{efron_stein, exact_operator, exact_theta, verify_two_level};
use clt_spectra::spect::{build_kernel, gram_matrix, spectrum, theta, trace_t};
use clt_spectra::{DiscretePMF, DistributionSpec, GridConfig};

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn spec(s: &str) -> DistributionSpec {
    s.parse().unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn pmfs() -> Vec<DiscretePMF> {
    vec![
        DiscretePMF::uniform(&[0.0, 1.0, 2.0]).unwrap(),
        DiscretePMF::new(vec![0.0, 1.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap(),
        DiscretePMF::new(vec![-1.0, 0.0, 1.0, 2.0], vec![0.1, 0.4, 0.3, 0.2]).unwrap(),
    ]
}

fn gaussian_spectrum() -> Outcome {
    let t0 = Instant::now();
    let cfg = GridConfig::default().with_nodes(1024);
    let base = build_density(&spec("gaussian:sigma=1"), &cfg, 1).unwrap();
    let sp = spectrum(&gram_matrix(&build_kernel(&base, 2, 1, &cfg).unwrap()), 5).unwrap();
    let worst = (0..5)
        .map(|k| rel(sp.eigenvalues[k], 0.5f64.powi(k as i32)))
        .fold(0.0, f64::max);
    let elapsed = t0.elapsed();
    outcome(
        worst <= 1e-3 && elapsed < Duration::from_secs(10),
        format!("max rel err {worst:.2e} over k=0..4 in {elapsed:.2?}"),
    )
}

fn theta_closed_forms() -> Outcome {
    let cfg = GridConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    let g = build_density(&spec("gaussian:sigma=1"), &cfg, 1).unwrap();
    let t2 = theta(&g, 2, 1, &cfg).unwrap().theta;
    ok &= rel(t2, 1.0) <= 0.02;
    parts.push(format!("gauss Θ2={t2:.4}"));
    let t3 = theta(&g, 3, 1, &cfg).unwrap().theta;
    ok &= rel(t3, 2.0) <= 0.03;
    parts.push(format!("gauss Θ3={t3:.4}"));
    for beta in [1.0, 2.0, 4.0] {
        let d = build_density(&spec(&format!("gamma:beta={beta}")), &cfg, 1).unwrap();
        let t = theta(&d, 2, 1, &cfg).unwrap().theta;
        let want = beta / (beta + 1.0);
        ok &= rel(t, want) <= 0.02;
        parts.push(format!("gamma{beta} Θ2={t:.4} (want {want:.4})"));
    }
    outcome(ok, parts.join(", "))
}

fn gaussian_trace() -> Outcome {
    let cfg = GridConfig::default();
    let base = build_density(&spec("gaussian:sigma=1"), &cfg, 1).unwrap();
    let k = build_kernel(&base, 2, 1, &cfg).unwrap();
    let t = trace_t(&k, &cfg).t;
    let series: f64 = (0..60).map(|j| 0.5f64.powi(j)).sum();
    outcome(
        (t - 2.0).abs() <= 1e-3 && (t - series).abs() <= 1e-3,
        format!("T2={t:.6}, Σ2^-k={series:.6}"),
    )
}

fn dks() -> Outcome {
    let cfg = GridConfig::default();
    let mut worst_grid: f64 = 0.0;
    for s in ["gaussian:sigma=1", "gamma:beta=4"] {
        let base = build_density(&spec(s), &cfg, 1).unwrap();
        for (n, m) in [(2, 1), (3, 1), (3, 2)] {
            let sp = spectrum(&gram_matrix(&build_kernel(&base, n, m, &cfg).unwrap()), 6).unwrap();
            let l = sp.diagnostics.linear_eigenvalue.unwrap_or(f64::NAN);
            worst_grid = worst_grid.max((l - m as f64 / n as f64).abs());
        }
    }
    // Exact side: C*C applied to the centred identity must return m/n times it.
    let mut worst_exact: f64 = 0.0;
    for p in pmfs() {
        for (n, m) in [(2, 1), (3, 1), (3, 2), (4, 3)] {
            let op = exact_operator(&p, n, m).unwrap();
            let mu = op.y.mean();
            let f: Vec<f64> = op.y.atoms().iter().map(|y| y - mu).collect();
            let back = op.apply_cstar(&op.apply_c(&f));
            let ratio = m as f64 / n as f64;
            for (b, fi) in back.iter().zip(&f) {
                worst_exact = worst_exact.max((b - ratio * fi).abs());
            }
            let lin = op
                .spectrum()
                .unwrap()
                .diagnostics
                .linear_eigenvalue
                .unwrap_or(f64::NAN);
            worst_exact = worst_exact.max((lin - ratio).abs());
        }
    }
    outcome(
        worst_grid <= 1e-3 && worst_exact <= 1e-12,
        format!("grid max err {worst_grid:.2e}, exact max err {worst_exact:.2e}"),
    )
}

fn exact_oracle() -> Outcome {
    let u = DiscretePMF::uniform(&[0.0, 1.0, 2.0]).unwrap();
    let op = exact_operator(&u, 2, 1).unwrap();
    // Hand-computed: S_2 on {0..4} with weights (1,2,3,2,1)/9 gives C*C = M/18.
    let hand = [[11.0, 5.0, 2.0], [5.0, 8.0, 5.0], [2.0, 5.0, 11.0]];
    let got = op.composed();
    let mut resid: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            resid = resid.max((got[i][j] - hand[i][j] / 18.0).abs());
        }
    }
    let ev = op.spectrum().unwrap().eigenvalues;
    for (e, w) in ev.iter().zip([1.0, 0.5, 1.0 / 6.0]) {
        resid = resid.max((e - w).abs());
    }
    let t2 = exact_theta(&u, 2, 1).unwrap().theta;
    resid = resid.max((t2 - 2.0).abs());
    let t3 = exact_theta(&u, 3, 1).unwrap().theta;
    outcome(
        resid <= 1e-12 && t3 >= 4.0 - 1e-12,
        format!("residual {resid:.2e}, Θ2={t2:.12}, Θ3={t3:.6}"),
    )
}

fn gamma_chain() -> Outcome {
    let cfg = GridConfig::default();
    let s = spec("gamma:beta=4");
    let base = build_density(&s, &cfg, 1).unwrap();
    let ms = moments(&base, 4).unwrap();
    let jst_y = fisher_info(&base, &cfg).unwrap().jst;
    let theta2 = 0.8;
    let mut ok = true;
    let mut worst_rel: f64 = 0.0;
    let mut min_upper = f64::INFINITY;
    let mut min_lower = f64::INFINITY;
    let mut products = Vec::new();
    for n in 1..=4 {
        let d = if n == 1 {
            base.clone()
        } else {
            convolve_self(&base, n, &cfg).unwrap()
        };
        let j = fisher_info(&d, &cfg).unwrap().jst;
        worst_rel = worst_rel.max(rel(j, 2.0 / (4.0 * n as f64 - 2.0)));
        if n >= 2 {
            min_upper = min_upper.min(fisher_upper_theta2(jst_y, theta2, n).unwrap() - j);
            min_lower = min_lower.min(j - fisher_lower_skewness(ms.skewness, ms.sigma_stat, n).unwrap());
        }
        products.push((1.0 + (n as f64 - 1.0) * theta2) * j);
    }
    ok &= worst_rel <= 0.01 && min_upper > 0.0 && min_lower > 0.0;
    let worst_step = products
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    ok &= worst_step <= 0.01;
    outcome(
        ok,
        format!(
            "J_st max rel err {worst_rel:.2e}, upper slack {min_upper:.3e}, lower slack {min_lower:.3e}, worst a_n step {worst_step:+.2e}"
        ),
    )
}

fn poly(c: Vec<f64>) -> impl Fn(f64) -> f64 {
    move |s| c.iter().rev().fold(0.0, |acc, x| acc * s + x)
}

fn efron_stein_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_identity: f64 = 0.0;
    for p in pmfs() {
        for k in 2..=5 {
            let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = poly(c);
            let es = efron_stein(&h, &p, k).unwrap();
            // Var h(S_k) straight from the law of S_k.
            let sk = p.sum_law(k, 100_000).unwrap();
            let mean = sk.expect(&h);
            let var = sk.expect(|s| (h(s) - mean).powi(2));
            let mut binom = 1.0;
            let mut pieces = 0.0;
            for r in 1..=k {
                binom = binom * (k - r + 1) as f64 / r as f64;
                pieces += binom * es.component_variances[r - 1];
            }
            worst_identity = worst_identity.max((var - pieces).abs() / var.max(1.0));
        }
    }
    let u = &pmfs()[0];
    let mut random_pass = 0;
    for i in 0..50 {
        let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = verify_two_level(poly(c), u, 3 + i % 2, 2).unwrap();
        random_pass += r.pass as usize;
    }
    let mut worst_tight: f64 = 0.0;
    for p in pmfs() {
        let r = verify_two_level(|s| s * s - 3.0 * s, &p, 3, 2).unwrap();
        worst_tight = worst_tight.max((r.lhs.value - r.rhs.value).abs());
    }
    outcome(
        worst_identity <= 1e-12 && random_pass == 50 && worst_tight <= 1e-12,
        format!("identity residual {worst_identity:.2e}, random h {random_pass}/50, quadratic gap {worst_tight:.2e}"),
    )
}

fn chi2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let y = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let rho = rng.random_range(-0.7..0.7);
        let delta = rng.random_range(0.7..2.0);
        let c = gauss_chi2_closed(x, y, rho, delta).unwrap();
        let q = gauss_chi2_quadrature(x, y, rho, delta, 301).unwrap();
        worst = worst.max((c - q).abs() / (1.0 + c));
    }
    let cfg = GridConfig::default();
    let g = spec("gaussian:sigma=1");
    let mut flags_ok = true;
    let mut worst_mgf: f64 = 0.0;
    for n in 2..=10 {
        let r = subgauss_chi2_bound(&g, 1.0, n, Chi2Method::Quadrature, &cfg).unwrap();
        let t = 1.0 / (n as f64 - 1.0);
        let divergent = 1.0 - 4.0 * t <= 0.0;
        flags_ok &= r.diverged == divergent;
        if !divergent {
            worst_mgf = worst_mgf.max(rel(r.expectation, 1.0 / (1.0 - 4.0 * t).sqrt()));
        }
    }
    outcome(
        worst <= 1e-6 && flags_ok && worst_mgf <= 0.01,
        format!(
            "closed vs quadrature {worst:.2e}, divergence flags {}, mgf rel err {worst_mgf:.2e}",
            if flags_ok { "exact" } else { "wrong" }
        ),
    )
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn binom(a: f64, k: usize) -> f64 {
    (0..k).map(|i| (a - i as f64) / (i + 1) as f64).product()
}

/// `He_k(x/√v)` from the explicit sum.
fn hermite_series(k: usize, v: f64, x: f64) -> f64 {
    let z = x / v.sqrt();
    (0..=k / 2)
        .map(|m| {
            (-1f64).powi(m as i32) * z.powi((k - 2 * m) as i32)
                / (factorial(m) * factorial(k - 2 * m) * 2f64.powi(m as i32))
        })
        .sum::<f64>()
        * factorial(k)
}

/// `L_k^(α)(x)` from the explicit sum.
fn laguerre_series(k: usize, alpha: f64, x: f64) -> f64 {
    (0..=k)
        .map(|i| (-1f64).powi(i as i32) * binom(k as f64 + alpha, k - i) * x.powi(i as i32) / factorial(i))
        .sum()
}

fn addition_formulas() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_h: f64 = 0.0;
    let mut worst_l: f64 = 0.0;
    let mut worst_eval: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.random_range(0..=6);
        let n = rng.random_range(2..=6u32);
        let tau2 = rng.random_range(0.5..2.0);
        let x = rng.random_range(-2.0..2.0);
        let y = rng.random_range(-2.0..2.0);
        worst_h = worst_h.max(addition_check_hermite(m, n, tau2, x, y));
        let lib = PolyFamily::Hermite { variance: tau2 }.eval(m, x);
        worst_eval = worst_eval.max((lib - hermite_series(m, tau2, x)).abs() / (1.0 + lib.abs()));
    }
    for _ in 0..100 {
        let m = rng.random_range(0..=6);
        let a = rng.random_range(-0.5..4.0);
        let b = rng.random_range(-0.5..4.0);
        let x = rng.random_range(0.0..6.0);
        let y = rng.random_range(0.0..6.0);
        worst_l = worst_l.max(addition_check_laguerre(m, a, b, x, y));
        // The same identity from the explicit sums alone.
        let lhs = laguerre_series(m, a + b + 1.0, x + y);
        let rhs: f64 = (0..=m)
            .map(|i| laguerre_series(i, a, x) * laguerre_series(m - i, b, y))
            .sum();
        worst_l = worst_l.max((lhs - rhs).abs());
        let lib = PolyFamily::Laguerre { alpha: a }.eval(m, x);
        worst_eval = worst_eval.max((lib - laguerre_series(m, a, x)).abs() / (1.0 + lib.abs()));
    }
    outcome(
        worst_h <= 1e-9 && worst_l <= 1e-9 && worst_eval <= 1e-9,
        format!("Hermite {worst_h:.2e}, Laguerre {worst_l:.2e}, series vs recurrence {worst_eval:.2e}"),
    )
}

fn property_suite() -> Outcome {
    let t0 = Instant::now();
    let out = verify_all(&VerifyConfig::new(spec("gamma:beta=4"))).unwrap();
    let elapsed = t0.elapsed();
    let required = [
        "cramer-rao",
        "jst-scale-invariance",
        "adjointness",
        "score-projection",
        "exact-theta-nm-chain",
    ];
    let mut missing = Vec::new();
    for name in required {
        let rs: Vec<_> = out.reports.iter().filter(|r| r.name == name).collect();
        if rs.is_empty() || rs.iter().any(|r| !r.pass) {
            missing.push(name);
        }
    }
    let failures: Vec<_> = out.failures().map(|r| r.name.clone()).collect();
    outcome(
        out.all_pass() && missing.is_empty() && elapsed < Duration::from_secs(180),
        format!(
            "{} reports, {} failing {:?}, required not green {:?}, negative control caught: {}, {elapsed:.2?}",
            out.reports.len(),
            failures.len(),
            failures,
            missing,
            !out.negative_control.pass
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, Check); 10] = [
        ("gaussian spectrum 2^-k", gaussian_spectrum),
        ("theta closed forms", theta_closed_forms),
        ("gaussian trace", gaussian_trace),
        ("linear eigenvalue m/n", dks),
        ("exact uniform{0,1,2} oracle", exact_oracle),
        ("gamma convergence chain", gamma_chain),
        ("efron-stein", efron_stein_suite),
        ("chi-square", chi2),
        ("addition formulas", addition_formulas),
        ("verify-all property suite", property_suite),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        // Straight to the handle so the lines survive the test harness's capture.
        let _ = writeln!(
            std::io::stderr(),
            "criterion {:>2} {} {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
