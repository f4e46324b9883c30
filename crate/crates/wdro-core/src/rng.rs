//! Seeded, splittable randomness.
//!
//! One generator family is used repo-wide: ChaCha8 streams whose per-task
//! seeds are derived from a user seed and a task index through SplitMix64.
//! Results are therefore independent of thread count and scheduling order.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Name and version of the generator family, echoed in run reports.
pub const RNG_FAMILY: &str = "chacha8+splitmix64-derive/1";

/// SplitMix64 step, used to derive independent per-task seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed for subtask `index` of the stream identified by `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x517cc1b727220a95)))
}

/// Deterministic generator for subtask `index` of `seed`.
pub fn task_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, index))
}

/// Square-root factor `L` with `L L' = sigma`, via Cholesky when `sigma` is
/// positive definite, falling back to a symmetric eigendecomposition with
/// negative eigenvalues clamped to zero for semidefinite input.
pub fn covariance_factor(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(chol) = sigma.clone().cholesky() {
        return chol.l();
    }
    let eig = sigma.clone().symmetric_eigen();
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d)
}

/// One draw from `N(0, L L')` given the factor `L`.
pub fn gaussian_with_factor<R: Rng>(rng: &mut R, factor: &DMatrix<f64>) -> DVector<f64> {
    let z = DVector::from_fn(factor.ncols(), |_, _| rng.sample(StandardNormal));
    factor * z
}
