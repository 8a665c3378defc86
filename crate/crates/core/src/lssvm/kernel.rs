use crate::{Error, Result};

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Gaussian kernel `exp(-‖x1 - x2‖² / σ²)`.
pub fn kernel(x1: &[f64], x2: &[f64], sigma: f64) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x1.len(),
            got: x2.len(),
        });
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidInput(format!("kernel width must be positive, got {sigma}")));
    }
    Ok((-squared_distance(x1, x2) / (sigma * sigma)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_points() {
        assert_eq!(kernel(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], 0.7).unwrap(), 1.0);
    }

    #[test]
    fn distance_equal_to_width() {
        // ‖(3,4)‖² = 25 = σ² with σ = 5.
        let k = kernel(&[0.0, 0.0], &[3.0, 4.0], 5.0).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-15);
        assert!((k - 0.3679).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            kernel(&[1.0], &[1.0, 2.0], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(kernel(&[1.0], &[1.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_bounded_and_matches_hand_distance(
            a in proptest::collection::vec(-5.0f64..5.0, 4),
            b in proptest::collection::vec(-5.0f64..5.0, 4),
            sigma in 0.1f64..10.0,
        ) {
            let k1 = kernel(&a, &b, sigma).unwrap();
            let k2 = kernel(&b, &a, sigma).unwrap();
            prop_assert_eq!(k1, k2);
            prop_assert!((0.0..=1.0).contains(&k1));
            let mut d2 = 0.0;
            for i in 0..4 {
                let diff = a[i] - b[i];
                d2 += diff * diff;
            }
            prop_assert!((k1 - (-d2 / (sigma * sigma)).exp()).abs() <= 1e-14);
        }
    }
}
