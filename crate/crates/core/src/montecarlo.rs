//! Monte Carlo oracle: samples correlated Rayleigh channels and averages the
//! MI of the minimum or sum SNR.
//!
//! Draws are grouped in blocks of [`BLOCK`] samples. Block `b` uses a ChaCha8
//! stream seeded with `seed` on stream `b`, so estimates do not depend on the
//! thread count, and every SNR and scenario sees the same channel draws.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amr::Scenario;
use crate::channel::{ChannelEnsemble, PhaseVector};
use crate::error::{invalid, Result};
use crate::info::InfoCurve;
use crate::linalg::inner;
use crate::real::{pairwise_sum, Real};

pub const BLOCK: usize = 1 << 14;
pub const MIN_SAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl McEstimate {
    /// `|self - value|` in units of the standard error.
    pub fn z_score(&self, value: f64) -> f64 {
        (self.mean - value).abs() / self.std_error
    }
}

/// Instantaneous SNRs, row-major `n x K`.
#[derive(Clone, Debug, PartialEq)]
pub struct GainSamples<T> {
    users: usize,
    values: Vec<T>,
}

impl<T: Real> GainSamples<T> {
    pub fn users(&self) -> usize {
        self.users
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.users
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.users..(i + 1) * self.users]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks_exact(self.users)
    }

    pub fn column(&self, k: usize) -> impl Iterator<Item = T> + '_ {
        self.rows().map(move |r| r[k])
    }
}

/// `a_k = R_k^{1/2} f`, so that `h_k^H f = g_k^H a_k` for `h_k = R_k^{1/2} g_k`.
fn projected<T: Real>(e: &ChannelEnsemble<T>, p: &PhaseVector<T>) -> Result<Vec<Vec<Complex<T>>>> {
    if p.len() != e.antennas() {
        return Err(crate::error::Error::DimensionMismatch(format!(
            "phase vector has {} entries, ensemble has {} antennas",
            p.len(),
            e.antennas()
        )));
    }
    let f = p.beamformer();
    Ok(e.correlations().iter().map(|r| r.sqrt_psd().mul_vec(&f)).collect())
}

/// Unit-SNR gains `|g_k^H a_k|^2` for samples `[start, start + len)` of block
/// `block`.
fn block_gains<T: Real>(a: &[Vec<Complex<T>>], seed: u64, block: usize, len: usize) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let n = a.first().map_or(0, Vec::len);
    let mut g = vec![Complex::new(T::zero(), T::zero()); n];
    let mut out = Vec::with_capacity(len * a.len());
    for _ in 0..len {
        for ak in a {
            for z in g.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *z = Complex::new(T::lit(re * half), T::lit(im * half));
            }
            out.push(inner(&g, ak).norm_sqr());
        }
    }
    out
}

fn blocks(n: usize) -> Vec<(usize, usize)> {
    (0..n.div_ceil(BLOCK))
        .map(|b| (b, BLOCK.min(n - b * BLOCK)))
        .collect()
}

/// Draws `n` channel realizations and returns `snr |h_k^H f|^2`.
pub fn sample_effective_gains<T: Real>(
    e: &ChannelEnsemble<T>,
    p: &PhaseVector<T>,
    n: usize,
    seed: u64,
) -> Result<GainSamples<T>> {
    if n == 0 {
        return Err(invalid("n", "need at least one sample"));
    }
    let a = projected(e, p)?;
    let snr = e.snr();
    let parts: Vec<Vec<T>> = blocks(n)
        .into_par_iter()
        .map(|(b, len)| block_gains(&a, seed, b, len))
        .collect();
    let values = parts.into_iter().flatten().map(|g| g * snr).collect();
    Ok(GainSamples {
        users: e.users(),
        values,
    })
}

#[derive(Clone, Copy, Debug)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn of(xs: &[f64]) -> Self {
        let mean = pairwise_sum(xs) / xs.len() as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        Self {
            n: xs.len(),
            mean,
            m2: pairwise_sum(&dev),
        }
    }

    fn merge(self, o: Self) -> Self {
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        let (na, nb, nn) = (self.n as f64, o.n as f64, n as f64);
        Self {
            n,
            mean: self.mean + d * nb / nn,
            m2: self.m2 + o.m2 + d * d * na * nb / nn,
        }
    }

    fn estimate(self, seed: u64) -> McEstimate {
        let var = self.m2 / (self.n - 1) as f64;
        McEstimate {
            mean: self.mean,
            std_error: (var / self.n as f64).sqrt(),
            n_samples: self.n,
            seed,
        }
    }
}

fn rate<T: Real, C: InfoCurve<T> + ?Sized>(curve: &C, gains: &[T], snr: T, scenario: Scenario) -> f64 {
    let g = match scenario {
        Scenario::NonCooperative => gains.iter().fold(T::infinity(), |a, &b| a.min(b)),
        Scenario::Cooperative => gains.iter().copied().sum(),
    };
    curve.mi(g * snr).as_f64()
}

/// Estimates for every `(snr_db, scenario)` pair from one set of channel
/// draws, indexed `[snr][scenario]`.
pub fn mc_amr_grid<T: Real, C: InfoCurve<T> + ?Sized>(
    e: &ChannelEnsemble<T>,
    p: &PhaseVector<T>,
    curve: &C,
    snrs_db: &[f64],
    scenarios: &[Scenario],
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<McEstimate>>> {
    if n < MIN_SAMPLES {
        return Err(invalid("n", format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    if snrs_db.iter().any(|s| !s.is_finite()) {
        return Err(invalid("snr_db", "must be finite"));
    }
    let a = projected(e, p)?;
    let k = e.users();
    let snrs: Vec<T> = snrs_db.iter().map(|d| T::lit(10f64.powf(d / 10.0))).collect();
    let width = snrs.len() * scenarios.len();
    let per_block: Vec<Vec<Moments>> = blocks(n)
        .into_par_iter()
        .map(|(b, len)| {
            let gains = block_gains(&a, seed, b, len);
            let mut out = Vec::with_capacity(width);
            let mut buf = vec![0.0; len];
            for &s in &snrs {
                for &sc in scenarios {
                    for (v, row) in buf.iter_mut().zip(gains.chunks_exact(k)) {
                        *v = rate(curve, row, s, sc);
                    }
                    out.push(Moments::of(&buf));
                }
            }
            out
        })
        .collect();
    let mut total = per_block[0].clone();
    for blk in &per_block[1..] {
        for (t, m) in total.iter_mut().zip(blk) {
            *t = t.merge(*m);
        }
    }
    Ok(total
        .chunks(scenarios.len().max(1))
        .map(|row| row.iter().map(|m| m.estimate(seed)).collect())
        .collect())
}

/// Empirical AMR at the ensemble's SNR.
pub fn mc_amr<T: Real, C: InfoCurve<T> + ?Sized>(
    e: &ChannelEnsemble<T>,
    p: &PhaseVector<T>,
    curve: &C,
    scenario: Scenario,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    Ok(mc_amr_grid(e, p, curve, &[e.snr_db()], &[scenario], n, seed)?[0][0])
}
