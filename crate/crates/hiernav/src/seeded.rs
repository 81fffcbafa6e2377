//! Deterministic RNG derivation: every random draw in the crate flows from a
//! global seed through a labeled hash, so independent subsystems never share
//! or disturb each other's streams.

use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;
use sha2::{Digest, Sha256};

/// Derive an independent RNG from the global seed and a label path.
pub fn sub_rng(global_seed: u64, parts: &[&str]) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(global_seed.to_le_bytes());
    for p in parts {
        h.update([0u8]);
        h.update(p.as_bytes());
    }
    ChaCha20Rng::from_seed(h.finalize().into())
}

/// Sample `n` standard normals and L2-normalize. Resamples in the
/// vanishingly unlikely case of a near-zero vector.
pub fn unit_gaussian_vec(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    use rand::Rng;
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
