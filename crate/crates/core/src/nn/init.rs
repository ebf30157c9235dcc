use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{check_shape, Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitScheme {
    /// Normal(0, sqrt(2 / fan_in)); fan-in is the product of every dimension
    /// but the last, so it needs a rank ≥ 2 shape.
    He,
    /// Uniform on `[low, high)`; a degenerate range yields a constant.
    Uniform(f64, f64),
}

pub fn init_params<T: Scalar>(shape: &[usize], scheme: InitScheme, rng: &mut dyn RngCore) -> Result<Tensor<T>> {
    let len = check_shape(shape)?;
    let data: Vec<T> = match scheme {
        InitScheme::He => {
            if shape.len() < 2 {
                return Err(Error::InvalidShape(shape.to_vec()));
            }
            let fan_in: usize = shape[..shape.len() - 1].iter().product();
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).map_err(|e| Error::Config(e.to_string()))?;
            (0..len).map(|_| T::of(normal.sample(rng))).collect()
        }
        InitScheme::Uniform(low, high) => {
            if !(low.is_finite() && high.is_finite()) || high < low {
                return Err(Error::Config(format!("bad uniform range [{low}, {high})")));
            }
            (0..len)
                .map(|_| T::of(low + (high - low) * rng.random::<f64>()))
                .collect()
        }
    };
    Tensor::from_vec(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_uniform_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t: Tensor<f32> = init_params(&[3, 4], InitScheme::Uniform(0.0, 0.0), &mut rng).unwrap();
        assert!(t.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_seed_same_tensor() {
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            init_params::<f32>(&[3, 3, 2, 4], InitScheme::He, &mut rng).unwrap()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn he_std_matches_fan_in() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t: Tensor<f64> = init_params(&[100, 1000], InitScheme::He, &mut rng).unwrap();
        let n = t.len() as f64;
        let mean = t.data().iter().sum::<f64>() / n;
        let var = t.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = 0.02f64.sqrt();
        assert!((var.sqrt() - target).abs() / target < 0.05, "std {}", var.sqrt());
    }

    #[test]
    fn he_needs_fan_in() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            init_params::<f32>(&[8], InitScheme::He, &mut rng),
            Err(Error::InvalidShape(_))
        ));
        assert!(matches!(
            init_params::<f32>(&[0, 8], InitScheme::He, &mut rng),
            Err(Error::InvalidShape(_))
        ));
    }
}
