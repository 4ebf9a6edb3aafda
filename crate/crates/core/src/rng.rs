//! Seeded random streams.
//!
//! Every stream is a ChaCha20 generator keyed by
//! `SHA-256("cascade-rng/v1" || master_le || len(label)_le || label || index_le)`.
//! Streams for different labels or indices are independent, so work split
//! across threads draws the same numbers as a serial run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha20Rng;

pub fn stream(master: u64, label: &str, index: u64) -> StreamRng {
    let mut h = Sha256::new();
    h.update(b"cascade-rng/v1");
    h.update(master.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let mut key = [0u8; 32];
    key.copy_from_slice(&h.finalize());
    ChaCha20Rng::from_seed(key)
}

/// Draws a symbol from a pmf by inversion.
pub fn sample_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, k: usize, alpha: f64) -> Vec<f64> {
    let g = Gamma::new(alpha, 1.0).expect("positive shape");
    loop {
        let v: Vec<f64> = (0..k).map(|_| g.sample(rng)).collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 && s.is_finite() {
            return v.into_iter().map(|x| x / s).collect();
        }
    }
}

pub fn vertex<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[rng.random_range(0..k)] = 1.0;
    v
}
