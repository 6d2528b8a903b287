//! Seeded synthetic datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::matrix::DataMatrix;

/// `n` points split round-robin over `centers` isotropic Gaussian blobs in
/// `dims` dimensions. Centers sit on a scaled simplex-like lattice, 10
/// units apart along distinct axes, and each blob has standard deviation
/// `spread`.
pub fn gaussian_blobs(n: usize, centers: usize, dims: usize, spread: f64, seed: u64) -> DataMatrix {
    assert!(centers >= 1 && dims >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spread).expect("finite spread");
    let mut values = Vec::with_capacity(n * dims);
    for i in 0..n {
        let c = i % centers;
        for d in 0..dims {
            let center = if d == c % dims {
                10.0 * (1 + c / dims) as f64
            } else {
                0.0
            };
            values.push(center + noise.sample(&mut rng));
        }
    }
    DataMatrix::new(n, dims, values).expect("generated data is finite")
}

/// `n` planar points spread over `rings` concentric circles of radius
/// 1, 2, ..., with Gaussian radial noise of standard deviation `noise`.
pub fn concentric_rings(n: usize, rings: usize, noise: f64, seed: u64) -> DataMatrix {
    assert!(rings >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise).expect("finite noise");
    let mut values = Vec::with_capacity(n * 2);
    for i in 0..n {
        let radius = (1 + i % rings) as f64 + jitter.sample(&mut rng);
        let angle = rng.random::<f64>() * std::f64::consts::TAU;
        values.push(radius * angle.cos());
        values.push(radius * angle.sin());
    }
    DataMatrix::new(n, 2, values).expect("generated data is finite")
}
