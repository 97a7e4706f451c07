// Seeded test signals of assorted shapes.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

/// Sequence `i` of a reproducible family: white noise, offset noise,
/// an AR(2) resonance or a noisy sinusoid, at varied scales.
pub fn sequence(seed: u64, i: u64, min_len: usize, max_len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    let n = rng.random_range(min_len..=max_len);
    let scale = 10f64.powf(rng.random_range(-3.0..3.0));
    let offset = if rng.random_bool(0.3) { rng.random_range(-5.0..5.0) * scale } else { 0.0 };
    let noise = Normal::new(0.0, scale).unwrap();
    match i % 4 {
        0 => (0..n).map(|_| noise.sample(&mut rng)).collect(),
        1 => (0..n).map(|_| offset + noise.sample(&mut rng)).collect(),
        2 => {
            // inside the stationarity triangle: |a2| < 1, a1 + a2 < 1
            let a2 = -rng.random_range(0.3..0.8);
            let a1 = rng.random_range(0.3..0.95) * (1.0 - a2);
            let mut x = vec![0.0; n];
            for t in 0..n {
                let e: f64 = StandardNormal.sample(&mut rng);
                x[t] = scale * e
                    + if t >= 1 { a1 * x[t - 1] } else { 0.0 }
                    + if t >= 2 { a2 * x[t - 2] } else { 0.0 };
            }
            x
        }
        _ => {
            let f = rng.random_range(0.01..0.4);
            (0..n)
                .map(|t| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    offset + scale * ((std::f64::consts::TAU * f * t as f64).sin() + 0.2 * e)
                })
                .collect()
        }
    }
}
