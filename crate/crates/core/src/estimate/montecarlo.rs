//! Thermal average of the qubit-dephasing collision rate.
//!
//! Two molecules with Maxwell–Boltzmann momenta collide with relative wave
//! vector `k = (k1 − k2)/2`. Momentum conservation fixes the centre of mass;
//! energy conservation fixes `|k'|` (equal to `k` for elastic channels). The
//! remaining integral is over outgoing directions, sampled uniformly. Identical
//! bosons scatter with `f(θ) + f(π − θ)` into half the sphere, so each sample
//! contributes
//!
//! `X = n (2ħk'/m) · 2π · ⟨|f(k, cosθ) + f(k, −cosθ)|²⟩`
//!
//! summed over `f00ᵉ − f01ᵉ`, `f00ⁱⁿ` and `f01ⁱⁿ`. For constant elastic
//! amplitudes this reduces to `8πΔa² n v̄`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::constants::*;
use super::positive;
use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 10_000;
const CHUNK: usize = 8192;

type AmplitudeFn = dyn Fn(f64, f64) -> Complex64 + Sync;

/// Scattering amplitudes (m) as functions of incoming `k` (1/m) and the
/// scattering angle cosine.
pub struct Amplitudes<'a> {
    pub elastic_00: &'a AmplitudeFn,
    pub elastic_01: &'a AmplitudeFn,
    pub inelastic_00: &'a AmplitudeFn,
    pub inelastic_01: &'a AmplitudeFn,
    /// Internal energy released in the inelastic channels (J).
    pub inelastic_release: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloRate {
    pub rate: f64,
    pub std_error: f64,
    pub samples: usize,
}

struct Moments {
    sum: f64,
    sum_sq: f64,
}

fn sample_chunk(amp: &Amplitudes, sigma_k: f64, mass: f64, seed: u64, stream: u64, count: usize) -> Result<Moments> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut m = Moments { sum: 0.0, sum_sq: 0.0 };
    let gain = mass * amp.inelastic_release / (HBAR * HBAR);
    for _ in 0..count {
        let mut rel = [0.0; 3];
        for r in &mut rel {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            *r = 0.5 * sigma_k * (a - b);
        }
        let k = (rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2]).sqrt();
        let c: f64 = rng.random_range(-1.0..=1.0);
        let sym = |f: &AmplitudeFn, kk: f64| f(kk, c) + f(kk, -c);
        let el = (sym(amp.elastic_00, k) - sym(amp.elastic_01, k)).norm_sqr();
        let k_out2 = k * k + gain;
        let inel = if k_out2 > 0.0 {
            let ko = k_out2.sqrt();
            ko * (sym(amp.inelastic_00, k).norm_sqr() + sym(amp.inelastic_01, k).norm_sqr())
        } else {
            0.0
        };
        let x = k * el + inel;
        if !x.is_finite() {
            return Err(Error::Sampling(format!("non-finite amplitude at k = {k:.6e} 1/m, cosθ = {c:.6}")));
        }
        m.sum += x;
        m.sum_sq += x * x;
    }
    Ok(m)
}

/// Seeded Monte Carlo estimate of the collisional dephasing rate (rad/s).
/// Chunks use independent ChaCha streams and are combined in order, so the
/// result depends only on the seed and sample count.
pub fn gamma10_montecarlo(
    amp: &Amplitudes,
    density: f64,
    temperature: f64,
    mass: f64,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloRate> {
    positive("density", density)?;
    positive("temperature", temperature)?;
    positive("mass", mass)?;
    if samples < MIN_SAMPLES {
        return Err(Error::param("samples", format!("need at least {MIN_SAMPLES}")));
    }
    let sigma_k = (mass * K_B * temperature).sqrt() / HBAR;
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let count = CHUNK.min(samples - i * CHUNK);
            sample_chunk(amp, sigma_k, mass, seed, i as u64, count)
        })
        .collect::<Result<_>>()?;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for p in &parts {
        sum += p.sum;
        sum_sq += p.sum_sq;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    // 2ħ/m · 2π · n
    let scale = 4.0 * std::f64::consts::PI * HBAR * density / mass;
    Ok(MonteCarloRate { rate: scale * mean, std_error: scale * (var / n).sqrt(), samples })
}
