use proptest::prelude::*;

use clt_spectra::bounds::{
    gauss_chi2_closed, theta_sigma_upper, BoundReport, Provenance, Relation, ReportContext, Side,
};
use clt_spectra::dens::{build_density, fisher_info, rescale};
use clt_spectra::exact::{efron_stein, exact_operator, exact_theta};
use clt_spectra::{DiscretePMF, DistributionSpec, GridConfig};

/// Random law on the lattice {0, 1, …, d−1} with every atom charged.
fn lattice_pmf() -> impl Strategy<Value = DiscretePMF> {
    prop::collection::vec(0.05f64..1.0, 3..6).prop_map(|w| {
        let total: f64 = w.iter().sum();
        let atoms = (0..w.len()).map(|i| i as f64).collect();
        DiscretePMF::new(atoms, w.iter().map(|x| x / total).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_spectrum_is_a_contraction(p in lattice_pmf(), n in 2usize..5) {
        let sp = exact_operator(&p, n, 1).unwrap().spectrum().unwrap();
        prop_assert!((sp.eigenvalues[0] - 1.0).abs() < 1e-12);
        for e in &sp.eigenvalues {
            prop_assert!(*e >= -1e-12 && *e <= 1.0 + 1e-12);
        }
        prop_assert!((sp.diagnostics.trace - sp.diagnostics.eigenvalue_sum).abs() < 1e-10);
        let lin = sp.diagnostics.linear_eigenvalue.unwrap();
        prop_assert!((lin - 1.0 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn exact_adjointness(p in lattice_pmf(), seed in prop::collection::vec(-1.0f64..1.0, 64)) {
        let op = exact_operator(&p, 3, 1).unwrap();
        let f: Vec<f64> = (0..op.y.len()).map(|i| seed[i % 64]).collect();
        let g: Vec<f64> = (0..op.s.len()).map(|k| seed[(7 * k + 3) % 64]).collect();
        let cf = op.apply_c(&f);
        let csg = op.apply_cstar(&g);
        let lhs: f64 = op.s.probs().iter().zip(cf.iter().zip(&g)).map(|(b, (x, y))| b * x * y).sum();
        let rhs: f64 = op.y.probs().iter().zip(f.iter().zip(&csg)).map(|(a, (x, y))| a * x * y).sum();
        prop_assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn theta_grows_at_least_linearly(p in lattice_pmf()) {
        let t2 = exact_theta(&p, 2, 1).unwrap().theta;
        let t3 = exact_theta(&p, 3, 1).unwrap().theta;
        prop_assert!(t2 >= 0.0);
        prop_assert!(t3 >= 2.0 * t2 - 1e-10);
        let sigma = p.moments(4).unwrap().sigma_stat;
        prop_assert!(t2 <= theta_sigma_upper(sigma, 2).unwrap() + 1e-10);
    }

    #[test]
    fn efron_stein_variance_identity(p in lattice_pmf(), c in prop::collection::vec(-1.0f64..1.0, 4), k in 2usize..5) {
        let h = move |s: f64| c[0] + c[1] * s + c[2] * s * s + c[3] * (s * 0.7).cos();
        let es = efron_stein(h, &p, k).unwrap();
        prop_assert!(es.variance_residual <= 1e-12 * es.total_variance.max(1.0));
        prop_assert!(es.orthogonality_residual <= 1e-12 * es.total_variance.max(1.0));
        prop_assert!(es.component_variances.iter().all(|v| *v >= -1e-14));
    }

    #[test]
    fn chi2_closed_form_is_nonnegative(
        x in prop::array::uniform2(-2.0f64..2.0),
        y in prop::array::uniform2(-2.0f64..2.0),
        rho in -0.9f64..0.9,
        delta in 0.3f64..3.0,
    ) {
        let c = gauss_chi2_closed(x, y, rho, delta).unwrap();
        prop_assert!(c >= -1e-12);
        let swapped = gauss_chi2_closed([x[1], x[0]], [y[1], y[0]], rho, delta).unwrap();
        prop_assert!((c - swapped).abs() <= 1e-12 * (1.0 + c.abs()));
    }

    #[test]
    fn report_json_round_trip(lhs in -10.0f64..10.0, rhs in prop_oneof![Just(f64::INFINITY), -10.0f64..10.0]) {
        let r = BoundReport::new(
            "round-trip",
            Side::new(lhs, Provenance::Measured),
            Relation::Le,
            Side::new(rhs, Provenance::ClosedForm),
            0.0,
            ReportContext::new("test").n(2),
        );
        prop_assert_eq!(r.pass, rhs >= lhs);
        let back: BoundReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(back, r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn standardized_fisher_is_scale_invariant(beta in 3.0f64..8.0, c in 0.2f64..5.0) {
        let cfg = GridConfig::default().with_nodes(512);
        let spec: DistributionSpec = format!("gamma:beta={beta}").parse().unwrap();
        let d = build_density(&spec, &cfg, 1).unwrap();
        let a = fisher_info(&d, &cfg).unwrap();
        let b = fisher_info(&rescale(&d, c).unwrap(), &cfg).unwrap();
        prop_assert!((a.jst - b.jst).abs() < 1e-6);
        prop_assert!(a.j * a.variance >= 1.0 - 1e-4);
    }
}
