use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::scalar::Scalar;
use crate::tensor::{Shape4, Tensor4};

/// Seeded, reproducible random stream. The same seed always yields the same
/// sequence of draws on every platform.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }

    pub fn normal(&mut self, std: f64) -> f64 {
        Normal::new(0.0, std).expect("finite std").sample(&mut self.inner)
    }
}

/// He-normal weights: zero mean, variance `2 / fan_in`, where fan-in is the
/// product of the last three dims (input channels × kernel area).
pub fn he_init<T: Scalar>(shape: Shape4, rng: &mut Rng) -> Tensor4<T> {
    let fan_in = shape[1] * shape[2] * shape[3];
    he_init_with_fan_in(shape, fan_in, rng)
}

pub fn he_init_with_fan_in<T: Scalar>(shape: Shape4, fan_in: usize, rng: &mut Rng) -> Tensor4<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    let dist = Normal::new(0.0, std).expect("finite std");
    let data = (0..shape.iter().product::<usize>()).map(|_| T::from_f64(dist.sample(&mut rng.inner))).collect();
    Tensor4::from_vec(shape, data).expect("shape and data agree")
}
