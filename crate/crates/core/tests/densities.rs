use std::f64::consts::PI;

use clpu_core::customer::{convolve, marginal_customer_pdf, GridSpec, Pdf1D};
use clpu_core::gmm::{fit_em, Component, EmConfig, Gmm2D};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn normal_pdf(x: f64, m: f64, sd: f64) -> f64 {
    (-(x - m).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * PI).sqrt())
}

fn gaussian_grid(m: f64, sd: f64, step: f64) -> Pdf1D {
    let lo = m - 10.0 * sd;
    let n = (20.0 * sd / step).round() as usize + 1;
    Pdf1D::new(lo, step, (0..n).map(|i| normal_pdf(lo + i as f64 * step, m, sd)).collect()).unwrap()
}

fn mixture(rho: f64) -> Gmm2D {
    let cov = |sp: f64, sc: f64| [[sp * sp, rho * sp * sc], [rho * sp * sc, sc * sc]];
    Gmm2D::new(vec![
        Component {
            weight: 0.3,
            mean: [80.0, 0.1],
            cov: cov(10.0, 0.02),
        },
        Component {
            weight: 0.7,
            mean: [140.0, 0.2],
            cov: cov(15.0, 0.03),
        },
    ])
    .unwrap()
}

#[test]
fn convolution_of_gaussians_adds_moments() {
    let a = gaussian_grid(3.0, 0.5, 0.01);
    let b = gaussian_grid(-1.0, 1.2, 0.01);
    let s = convolve(&[a, b]).unwrap();
    assert!((s.integral() - 1.0).abs() < 1e-6);
    assert!((s.mean() - 2.0).abs() < 1e-6, "mean {}", s.mean());
    assert!((s.variance() - (0.25 + 1.44)).abs() < 1e-3, "variance {}", s.variance());
    let sd = (0.25f64 + 1.44).sqrt();
    let err = (0..s.len())
        .map(|i| (s.densities()[i] - normal_pdf(s.grid(i), 2.0, sd)).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-3, "sup error {err}");
}

#[test]
fn second_marginal_matches_one_dimensional_mixture() {
    let g = mixture(0.4);
    for c in [0.0, 0.05, 0.1, 0.17, 0.3] {
        let want = 0.3 * normal_pdf(c, 0.1, 0.02) + 0.7 * normal_pdf(c, 0.2, 0.03);
        assert!((g.marginal_second_pdf(c) - want).abs() < 1e-10 * want.max(1.0));
    }
}

#[test]
fn product_density_has_product_mean() {
    // E[P·C] = Σ w (μ_P μ_C + ρ σ_P σ_C).
    let rho = 0.5;
    let g = mixture(rho);
    let (h, diag) = marginal_customer_pdf(&g, GridSpec { lo: 0.0, hi: 80.0, points: 4096 }).unwrap();
    let want = 0.3 * (80.0 * 0.1 + rho * 10.0 * 0.02) + 0.7 * (140.0 * 0.2 + rho * 15.0 * 0.03);
    assert!((h.mean() - want).abs() < 1e-3 * want, "mean {} vs {want}", h.mean());
    assert!(diag.truncation < 1e-3);
}

#[test]
fn em_matches_generating_mixture_on_large_sample() {
    let g = mixture(0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs: Vec<[f64; 2]> = (0..4000).map(|_| g.sample(&mut rng)).collect();
    let (fit, diag) = fit_em(&xs, 2, &EmConfig::default()).unwrap();
    assert!(diag.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
    let mut comps = fit.components().to_vec();
    comps.sort_by(|a, b| a.mean[0].total_cmp(&b.mean[0]));
    assert!((comps[0].weight - 0.3).abs() < 0.03);
    assert!((comps[0].mean[0] - 80.0).abs() < 1.5);
    assert!((comps[1].mean[1] - 0.2).abs() < 0.005);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cdf_and_survival_are_complementary(ds in prop::collection::vec(0.0f64..5.0, 2..60), x in -1.0f64..3.0) {
        prop_assume!(ds.iter().sum::<f64>() > 0.1);
        let p = Pdf1D::new(0.0, 0.05, ds).unwrap().normalized().unwrap();
        prop_assert!((p.cdf(x) + p.survival(x) - 1.0).abs() < 1e-12);
        let mut prev = 0.0;
        for i in 0..p.len() {
            let c = p.cdf(p.grid(i));
            prop_assert!(c >= prev - 1e-12 && c <= 1.0 + 1e-12);
            prev = c;
        }
    }

    #[test]
    fn gmm_json_round_trip_is_exact(m0 in 10.0f64..200.0, m1 in 0.01f64..0.5, rho in -0.9f64..0.9) {
        let g = Gmm2D::new(vec![Component {
            weight: 1.0,
            mean: [m0, m1],
            cov: [[25.0, rho * 5.0 * 0.05], [rho * 5.0 * 0.05, 0.0025]],
        }]).unwrap();
        let back = Gmm2D::from_json(&g.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.components(), g.components());
        prop_assert_eq!(back.pdf(&[m0, m1]), g.pdf(&[m0, m1]));
    }

    #[test]
    fn scaling_a_density_scales_its_moments(m in -5.0f64..5.0, sd in 0.2f64..2.0, c in 0.1f64..4.0) {
        let p = gaussian_grid(m, sd, sd / 50.0);
        let q = p.scaled(c).unwrap();
        prop_assert!((q.mean() - c * p.mean()).abs() < 1e-6 * (1.0 + c * m.abs()));
        prop_assert!((q.variance() - c * c * p.variance()).abs() < 1e-6 * c * c * p.variance() + 1e-9);
    }
}
