use super::SurrogateError;

fn check_lengths(actual: &[f64], predicted: &[f64], min: usize) -> Result<(), SurrogateError> {
    if actual.len() != predicted.len() {
        return Err(SurrogateError::LengthMismatch { actual: actual.len(), predicted: predicted.len() });
    }
    if actual.len() < min {
        return Err(SurrogateError::UndefinedMetric("too few values"));
    }
    Ok(())
}

/// Mean absolute percentage error, in percent.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64, SurrogateError> {
    check_lengths(actual, predicted, 1)?;
    if actual.contains(&0.0) {
        return Err(SurrogateError::UndefinedMetric("MAPE needs nonzero actual values"));
    }
    let sum: f64 = actual.iter().zip(predicted).map(|(y, yhat)| ((yhat - y) / y).abs()).sum();
    Ok(sum / actual.len() as f64 * 100.0)
}

/// Coefficient of determination.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> Result<f64, SurrogateError> {
    check_lengths(actual, predicted, 2)?;
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let total: f64 = actual.iter().map(|y| (y - mean) * (y - mean)).sum();
    if total == 0.0 {
        return Err(SurrogateError::UndefinedMetric("R² needs non-constant actual values"));
    }
    let residual: f64 = actual.iter().zip(predicted).map(|(y, yhat)| (y - yhat) * (y - yhat)).sum();
    Ok(1.0 - residual / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    #[test]
    fn mape_values() {
        assert_eq!(mape(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((mape(&[1.0, 2.0], &[1.1, 1.8]).unwrap() - 10.0).abs() < 1e-9);
        assert!(mape(&[1.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(mape(&[], &[]).is_err());
        assert!(mape(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn r2_values() {
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!((r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap() - 0.5).abs() < 1e-9);
        assert!(r_squared(&[2.0, 2.0], &[1.0, 3.0]).is_err());
    }

    proptest! {
        #[test]
        fn mape_is_paired_scale_free(
            pairs in prop::collection::vec((0.1f64..100.0, 0.1f64..100.0), 1..40),
            k in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0],
        ) {
            let (y, yhat): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ky: Vec<f64> = y.iter().map(|v| v * k).collect();
            let kyhat: Vec<f64> = yhat.iter().map(|v| v * k).collect();
            let a = mape(&y, &yhat).unwrap();
            let b = mape(&ky, &kyhat).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn r2_never_exceeds_one(
            pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..40),
        ) {
            let (y, yhat): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Ok(r2) = r_squared(&y, &yhat) {
                prop_assert!(r2 <= 1.0);
                let m = y.iter().sum::<f64>() / y.len() as f64;
                let flat = alloc::vec![m; y.len()];
                prop_assert_eq!(r_squared(&y, &flat).unwrap(), 0.0);
            }
        }
    }
}
