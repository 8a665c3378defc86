mod common;

use clpu_core::feeder::{RatioSurface, SurfacePoint};
use proptest::prelude::*;

/// Field outages: duration (min), temperature (°C), measured ratio.
const TABLE: &[(f64, f64, f64)] = &[
    (33.0, 38.5, 1.41),
    (91.0, 37.0, 1.63),
    (128.0, 39.0, 1.88),
    (136.0, 35.0, 2.16),
    (61.0, 31.5, 2.87),
    (83.0, 34.0, 2.69),
    (47.0, 35.5, 2.40),
    (101.0, 30.0, 3.17),
    (46.0, 25.5, 2.71),
    (77.0, 29.5, 2.88),
    (93.0, 38.5, 2.06),
    (41.0, 31.0, 2.50),
    (65.0, 36.5, 2.22),
    (48.0, 29.0, 2.88),
    (63.0, 38.0, 1.97),
    (118.0, 26.5, 3.31),
    (107.0, 32.0, 2.74),
    (85.0, 27.0, 3.43),
    (35.0, 29.5, 2.35),
];

fn points() -> Vec<SurfacePoint> {
    TABLE
        .iter()
        .map(|&(o, t, r)| SurfacePoint {
            duration_min: o,
            temp_c: t,
            ratio: r,
        })
        .collect()
}

/// Quadratic least squares through the normal equations.
fn normal_equation_fit(pts: &[SurfacePoint]) -> Vec<f64> {
    let basis = |o: f64, t: f64| vec![1.0, o, t, o * o, t * t, o * t];
    let mut ata = vec![vec![0.0; 6]; 6];
    let mut atb = vec![0.0; 6];
    for p in pts {
        let phi = basis(p.duration_min, p.temp_c);
        for i in 0..6 {
            atb[i] += phi[i] * p.ratio;
            for j in 0..6 {
                ata[i][j] += phi[i] * phi[j];
            }
        }
    }
    common::gauss_solve(ata, atb)
}

#[test]
fn quadratic_fit_of_field_outage_table() {
    let pts = points();
    let s = RatioSurface::fit(&pts, 2).unwrap();
    let oracle = normal_equation_fit(&pts);
    for p in &pts {
        let (o, t) = (p.duration_min, p.temp_c);
        let want = oracle[0] + oracle[1] * o + oracle[2] * t + oracle[3] * o * o + oracle[4] * t * t + oracle[5] * o * t;
        assert!((s.eval(o, t) - want).abs() < 1e-7, "at ({o}, {t})");
    }
    assert!((s.r_squared() - 0.8816196358717684).abs() < 1e-9, "R² {}", s.r_squared());
    let mae = pts.iter().map(|p| (s.eval(p.duration_min, p.temp_c) - p.ratio).abs()).sum::<f64>() / pts.len() as f64;
    assert!((mae - 0.14008031502636717).abs() < 1e-9, "MAE {mae}");
    assert_eq!(s.n_cases(), 19);
}

#[test]
fn json_round_trip_preserves_predictions() {
    let s = RatioSurface::fit(&points(), 2).unwrap();
    let back = RatioSurface::from_json(&s.to_json().unwrap()).unwrap();
    assert_eq!(s, back);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn exact_quadratics_are_recovered(c in prop::array::uniform6(-2.0f64..2.0)) {
        let truth = |o: f64, t: f64| {
            3.0 + c[0] * 0.01 * o + c[1] * 0.05 * t + c[2] * 1e-5 * o * o + c[3] * 1e-4 * t * t + c[4] * 1e-4 * o * t
        };
        let pts: Vec<SurfacePoint> = TABLE
            .iter()
            .map(|&(o, t, _)| SurfacePoint { duration_min: o, temp_c: t, ratio: truth(o, t) })
            .collect();
        let s = RatioSurface::fit(&pts, 2).unwrap();
        for &(o, t, _) in TABLE {
            prop_assert!((s.eval(o, t) - truth(o, t)).abs() < 1e-8);
        }
        prop_assert!(s.r_squared() > 1.0 - 1e-9);
    }
}
