//! Brute-force check of the collective-average factorization rules.
//!
//! Draws `N` atoms per sample from the classical phase-space Gaussian and
//! compares sample means of the collective quantities with the factorized
//! expressions used in [`super::collective`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{CloudParams, ScaledGeometry};

use super::moments::TransverseMoments;

/// Sample mean, its standard error and the factorized prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledAverage {
    pub name: String,
    pub mean: f64,
    pub std_error: f64,
    pub expected: f64,
}

impl SampledAverage {
    pub fn z_score(&self) -> f64 {
        (self.mean - self.expected).abs() / self.std_error
    }
}

const QUANTITIES: [&str; 6] = [
    "<N_w>",
    "<P_w^2>",
    "<N_w P_w^2>",
    "sum_i <P_w^2 g_i^2>",
    "sum_i <P_w^2 w_i^2 g_i^2>",
    "sum_i <p_i P_w w_i g_i^2>",
];

/// Factorized predictions for the quantities in `QUANTITIES`.
fn factorized(n: f64, t: &TransverseMoments, pi: f64) -> [f64; 6] {
    [
        n * t.w2,
        n * t.w2 * pi,
        n * t.w4 * pi + n * (n - 1.0) * t.w2 * t.w2 * pi,
        n * (pi * t.w2g2 + (n - 1.0) * t.w2 * pi * t.g2),
        n * (pi * t.w4g2 + (n - 1.0) * t.w2 * pi * t.w2g2),
        n * pi * t.w2g2,
    ]
}

const CHUNK: usize = 100_000;

/// Monte Carlo estimates for `n_atoms` atoms from `draws` samples; chunk `k`
/// uses ChaCha stream `k` of `seed`, so results do not depend on thread count.
pub fn sample_collective_averages(
    geom: &ScaledGeometry<f64>,
    cloud: &CloudParams<f64>,
    transverse: &TransverseMoments,
    n_atoms: usize,
    draws: usize,
    seed: u64,
) -> Vec<SampledAverage> {
    let l = (0.5 * cloud.l_th_sq).sqrt();
    let pi = 0.5 * cloud.l_th_sq;
    let beam = geom.to_beam(l);
    let chunks = draws.div_ceil(CHUNK);
    let partial: Vec<[[f64; 2]; 6]> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let count = CHUNK.min(draws - k * CHUNK);
            let mut acc = [[0.0; 2]; 6];
            let mut atoms = vec![(0.0, 0.0, 0.0); n_atoms];
            for _ in 0..count {
                let mut nw = 0.0;
                let mut pw = 0.0;
                for a in atoms.iter_mut() {
                    let [u, v, r]: [f64; 3] =
                        std::array::from_fn(|_| StandardNormal.sample(&mut rng));
                    let (x, y, p) = (l * u, l * v, pi.sqrt() * r);
                    let (w, gx, gy) = beam.profile_and_gradient(x, y);
                    *a = (w, gx * gx + gy * gy, p);
                    nw += w * w;
                    pw += w * p;
                }
                let pw2 = pw * pw;
                let mut s4 = 0.0;
                let mut s5 = 0.0;
                let mut s6 = 0.0;
                for &(w, g2, p) in &atoms {
                    s4 += pw2 * g2;
                    s5 += pw2 * w * w * g2;
                    s6 += p * pw * w * g2;
                }
                for (slot, v) in acc.iter_mut().zip([nw, pw2, nw * pw2, s4, s5, s6]) {
                    slot[0] += v;
                    slot[1] += v * v;
                }
            }
            acc
        })
        .collect();

    let mut total = [[0.0; 2]; 6];
    for part in &partial {
        for (t, p) in total.iter_mut().zip(part) {
            t[0] += p[0];
            t[1] += p[1];
        }
    }
    let expected = factorized(n_atoms as f64, transverse, pi);
    let m = draws as f64;
    QUANTITIES
        .iter()
        .zip(total.iter().zip(expected))
        .map(|(&name, (&[sum, sum_sq], expected))| {
            let mean = sum / m;
            let var = (sum_sq / m - mean * mean) * m / (m - 1.0);
            SampledAverage {
                name: name.to_string(),
                mean,
                std_error: (var / m).sqrt(),
                expected,
            }
        })
        .collect()
}
