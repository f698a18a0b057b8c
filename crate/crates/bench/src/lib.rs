//! Fixtures shared by the benchmarks.

use emth_core::random::{random_real_matrix, random_state};
use emth_core::{Boundary, Lattice, LaxState, Mat, Result, VacuumWave};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn state(dim: usize, sites: usize, boundary: Boundary) -> Result<LaxState> {
    let lattice = Lattice::centered(sites, 1.0, 1, boundary)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (u, v) = random_state(&mut rng, lattice, dim, 0.3);
    LaxState::new(u, v)
}

/// `n` waves with spectral roots spread over `(1.2, 2.4)`.
pub fn waves(dim: usize, n: usize, eps: f64) -> Result<Vec<VacuumWave>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..n)
        .map(|i| {
            let z = 1.2 + 1.2 * i as f64 / n as f64;
            let b = Mat::identity(dim, dim) + random_real_matrix(&mut rng, dim, 0.4);
            VacuumWave::new(1.0, eps, Complex64::new(z, 0.0), Mat::identity(dim, dim), Some(b), Vec::new())
        })
        .collect()
}
