//! Statistical CSI: per-user correlation matrices, the analog beamformer's
//! phase vector, per-user average SNRs, and the distributions of the minimum
//! and the sum of the users' instantaneous SNRs.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::HermitianMatrix;
use crate::quadrature::gauss_hermite;
use crate::real::{log_sum_exp, wrap_phase, Real};
use crate::special::{gamma_p, ln_gamma};

/// Relative level below which `phi^H R phi` counts as a nulled user.
pub const NULL_THRESHOLD: f64 = 1e-12;
pub const DEFAULT_SERIES_TOL: f64 = 1e-10;
pub const MAX_SERIES_TERMS: usize = 10_000;
const LOCAL_SCATTERING_ORDER: usize = 200;
const HERMITIAN_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-10;

/// Parametric correlation model for a uniform linear array with
/// half-wavelength spacing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum CorrelationModel {
    /// `R[i,j] = rho^|i-j| e^{j (i-j) phase}`.
    Exponential {
        rho: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Gaussian angular spread (radians) around a nominal angle.
    LocalScattering { angle: f64, spread: f64 },
}

impl CorrelationModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CorrelationModel::Exponential { rho, phase } => {
                if !(0.0..1.0).contains(&rho) {
                    return Err(invalid("rho", format!("must lie in [0, 1), got {rho}")));
                }
                if !phase.is_finite() {
                    return Err(invalid("phase", "must be finite"));
                }
            }
            CorrelationModel::LocalScattering { angle, spread } => {
                if !(spread > 0.0) || !spread.is_finite() {
                    return Err(invalid("spread", format!("must be positive, got {spread}")));
                }
                if !angle.is_finite() {
                    return Err(invalid("angle", "must be finite"));
                }
            }
        }
        Ok(())
    }
}

/// Builds the `n x n` correlation matrix of `model`, projected onto the PSD
/// cone.
pub fn make_correlation<T: Real>(model: &CorrelationModel, n: usize) -> Result<HermitianMatrix<T>> {
    model.validate()?;
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    let mut data = vec![Complex::new(T::zero(), T::zero()); n * n];
    match *model {
        CorrelationModel::Exponential { rho, phase } => {
            for i in 0..n {
                for j in 0..n {
                    let d = i as i64 - j as i64;
                    let mag = rho.powi(d.unsigned_abs() as i32);
                    let arg = d as f64 * phase;
                    data[i * n + j] = Complex::from_polar(T::lit(mag), T::lit(arg));
                }
            }
        }
        CorrelationModel::LocalScattering { angle, spread } => {
            let rule = gauss_hermite::<f64>(LOCAL_SCATTERING_ORDER)?;
            let norm = std::f64::consts::PI.sqrt();
            for i in 0..n {
                for j in 0..n {
                    let d = i as f64 - j as f64;
                    let mut acc = Complex::new(0.0, 0.0);
                    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                        let delta = std::f64::consts::SQRT_2 * spread * x;
                        let arg = std::f64::consts::PI * d * (angle + delta).sin();
                        acc += Complex::from_polar(w, arg);
                    }
                    acc /= norm;
                    data[i * n + j] = Complex::new(T::lit(acc.re), T::lit(acc.im));
                }
            }
        }
    }
    let mut r = HermitianMatrix::from_row_major(n, data)?;
    r.symmetrize();
    Ok(r.project_psd())
}

/// Phase shifts `theta_n` in `(-pi, pi]`; the unit-modulus vector is
/// `phi_n = e^{-j theta_n}` and the beamformer is `f = phi / sqrt(N)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseVector<T> {
    thetas: Vec<T>,
}

impl<T: Real> PhaseVector<T> {
    pub fn new(thetas: Vec<T>) -> Self {
        Self {
            thetas: thetas.into_iter().map(wrap_phase).collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self { thetas: vec![T::zero(); n] }
    }

    /// Uniform random phases.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let pi = std::f64::consts::PI;
        Self::new((0..n).map(|_| T::lit(rng.random_range(-pi..pi))).collect())
    }

    /// Phases of a vector with non-zero entries; only the arguments are used.
    pub fn from_phi(phi: &[Complex<T>]) -> Self {
        Self::new(phi.iter().map(|z| -z.arg()).collect())
    }

    pub fn thetas(&self) -> &[T] {
        &self.thetas
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn phi(&self) -> Vec<Complex<T>> {
        self.thetas.iter().map(|&t| Complex::from_polar(T::one(), -t)).collect()
    }

    pub fn beamformer(&self) -> Vec<Complex<T>> {
        let s = T::one() / T::from_usize_lossy(self.len()).sqrt();
        self.phi().into_iter().map(|z| z * s).collect()
    }
}

/// Recipe for drawing a random ensemble: every user gets its own model
/// parameter from the seeded generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum EnsembleModel {
    /// Exponential model with a common `rho` and a uniform random phase per
    /// user.
    Exponential { rho: f64 },
    /// Local scattering with a common spread and a nominal angle per user
    /// drawn uniformly from `[-max_angle, max_angle]`.
    LocalScattering { spread: f64, max_angle: f64 },
}

impl EnsembleModel {
    fn draw(&self, rng: &mut ChaCha8Rng) -> CorrelationModel {
        let pi = std::f64::consts::PI;
        match *self {
            EnsembleModel::Exponential { rho } => CorrelationModel::Exponential {
                rho,
                phase: rng.random_range(-pi..pi),
            },
            EnsembleModel::LocalScattering { spread, max_angle } => CorrelationModel::LocalScattering {
                angle: rng.random_range(-max_angle..=max_angle),
                spread,
            },
        }
    }
}

/// How an ensemble was produced, kept for reproducibility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: EnsembleModel,
    pub seed: u64,
    pub users: Vec<CorrelationModel>,
}

/// Correlation matrices of the `K` users plus the average SNR.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct ChannelEnsemble<T> {
    correlations: Vec<HermitianMatrix<T>>,
    snr_db: f64,
    #[serde(default)]
    provenance: Option<Provenance>,
}

impl<T: Real> ChannelEnsemble<T> {
    /// Validates and cleans the matrices: Hermitian within `1e-12` relative
    /// (then symmetrized), eigenvalues above `-1e-10` relative (then
    /// clipped), positive trace.
    pub fn new(correlations: Vec<HermitianMatrix<T>>, snr_db: f64) -> Result<Self> {
        if correlations.is_empty() {
            return Err(invalid("correlations", "need at least one user"));
        }
        if !snr_db.is_finite() {
            return Err(invalid("snr_db", "must be finite"));
        }
        let n = correlations[0].dim();
        let mut clean = Vec::with_capacity(correlations.len());
        for (k, r) in correlations.into_iter().enumerate() {
            if r.dim() != n {
                return Err(Error::DimensionMismatch(format!(
                    "user {k} has a {}x{} matrix, expected {n}x{n}",
                    r.dim(),
                    r.dim()
                )));
            }
            let trace = r.trace();
            if !(trace > T::zero()) {
                return Err(invalid("correlations", format!("user {k} has non-positive trace")));
            }
            let scale = trace / T::from_usize_lossy(n);
            if r.hermitian_residual() > T::lit(HERMITIAN_TOL) * scale.max(T::one()) {
                return Err(invalid("correlations", format!("user {k} matrix is not Hermitian")));
            }
            let mut r = r;
            r.symmetrize();
            let min_eig = r.eigenvalues().into_iter().fold(T::infinity(), |a, b| a.min(b));
            if min_eig < -T::lit(EIGEN_TOL) * scale.max(T::one()) {
                return Err(invalid(
                    "correlations",
                    format!("user {k} matrix has eigenvalue {min_eig} < 0"),
                ));
            }
            clean.push(if min_eig < T::zero() { r.project_psd() } else { r });
        }
        Ok(Self {
            correlations: clean,
            snr_db,
            provenance: None,
        })
    }

    /// Draws `k` users' matrices for an `n`-antenna array from `model`.
    pub fn generate(k: usize, n: usize, snr_db: f64, model: EnsembleModel, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k", "must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let users: Vec<CorrelationModel> = (0..k).map(|_| model.draw(&mut rng)).collect();
        let mats = users
            .iter()
            .map(|m| make_correlation(m, n))
            .collect::<Result<Vec<_>>>()?;
        let mut e = Self::new(mats, snr_db)?;
        e.provenance = Some(Provenance { model, seed, users });
        Ok(e)
    }

    pub fn users(&self) -> usize {
        self.correlations.len()
    }

    pub fn antennas(&self) -> usize {
        self.correlations[0].dim()
    }

    pub fn correlations(&self) -> &[HermitianMatrix<T>] {
        &self.correlations
    }

    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    pub fn snr(&self) -> T {
        T::lit(10f64.powf(self.snr_db / 10.0))
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn with_snr_db(&self, snr_db: f64) -> Self {
        Self {
            snr_db,
            ..self.clone()
        }
    }

    fn check_len(&self, p: &PhaseVector<T>) -> Result<()> {
        if p.len() != self.antennas() {
            return Err(Error::DimensionMismatch(format!(
                "phase vector has {} entries, ensemble has {} antennas",
                p.len(),
                self.antennas()
            )));
        }
        Ok(())
    }

    /// `f^H R_k f = phi^H R_k phi / N` for every user, with the nulled-user
    /// check.
    pub fn quadratic_forms(&self, p: &PhaseVector<T>) -> Result<Vec<T>> {
        self.check_len(p)?;
        let phi = p.phi();
        quadratic_forms_of(&self.correlations, &phi)
    }

    /// `gamma_k = snr * f^H R_k f`.
    pub fn effective_snrs(&self, p: &PhaseVector<T>) -> Result<Vec<T>> {
        let s = self.snr();
        Ok(self.quadratic_forms(p)?.into_iter().map(|q| q * s).collect())
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and re-validates an ensemble.
    pub fn from_json(s: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let raw: Self = serde_json::from_str(s)?;
        let mut e = Self::new(raw.correlations, raw.snr_db)?;
        e.provenance = raw.provenance;
        Ok(e)
    }
}

/// `phi^H R_k phi / N` for unit-modulus `phi`.
pub(crate) fn quadratic_forms_of<T: Real>(rs: &[HermitianMatrix<T>], phi: &[Complex<T>]) -> Result<Vec<T>> {
    let n = T::from_usize_lossy(phi.len());
    rs.iter()
        .enumerate()
        .map(|(k, r)| {
            let q = r.quad_form(phi);
            if q <= T::lit(NULL_THRESHOLD) * r.trace() {
                Err(Error::NulledUser {
                    user: k,
                    value: q.as_f64(),
                })
            } else {
                Ok(q / n)
            }
        })
        .collect()
}

fn check_gammas<T: Real>(gammas: &[T]) -> Result<()> {
    if gammas.is_empty() {
        return Err(invalid("gammas", "need at least one user"));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g > T::zero()) || !g.is_finite()) {
        return Err(invalid("gammas", format!("average SNRs must be positive and finite, got {g}")));
    }
    Ok(())
}

/// Law of `min_k gamma_k` for independent exponentials: exponential with
/// mean `gamma_non = (sum 1/gamma_k)^-1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinSnrLaw<T> {
    pub gamma_non: T,
}

pub fn min_snr_law<T: Real>(gammas: &[T]) -> Result<MinSnrLaw<T>> {
    check_gammas(gammas)?;
    let s: T = gammas.iter().map(|&g| T::one() / g).sum();
    Ok(MinSnrLaw { gamma_non: T::one() / s })
}

impl<T: Real> MinSnrLaw<T> {
    pub fn pdf(&self, x: T) -> T {
        if x < T::zero() {
            return T::zero();
        }
        (-x / self.gamma_non).exp() / self.gamma_non
    }

    pub fn cdf(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        -(-x / self.gamma_non).exp_m1()
    }
}

/// Law of `sum_k gamma_k` as a gamma-mixture series
/// `sum_l C psi_l Gamma(K + l, gamma_min)` with `C = prod gamma_min / gamma_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct MrcLaw<T> {
    gammas: Vec<T>,
    gamma_min: T,
    ln_prefactor: T,
    psi: Vec<T>,
    tail_bound: T,
    /// `ln(C psi_l)`, `-inf` where `psi_l` vanishes.
    ln_weights: Vec<T>,
    /// `ln Gamma(K + l)`.
    ln_gamma_shapes: Vec<T>,
}

/// Builds the series, truncated at the first `L` whose certified remaining
/// probability mass is below `tol`.
///
/// With `c_k = 1 - gamma_min / gamma_k`, the generating function of `psi` is
/// `prod_k (1 - c_k z)^-1`, dominated coefficientwise by
/// `(1 - beta z)^-(K-1)` with `beta = max c_k`. The mass beyond `L` is then
/// at most `C sum_{l>L} binom(l+K-2, K-2) beta^l`, bounded by a geometric
/// series since the term ratio `beta (l+K-1)/(l+1)` decreases in `l`.
pub fn mrc_law<T: Real>(gammas: &[T], tol: f64) -> Result<MrcLaw<T>> {
    check_gammas(gammas)?;
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let k = gammas.len();
    let gamma_min = gammas.iter().cloned().fold(T::infinity(), |a, b| a.min(b));
    let ratios: Vec<T> = gammas.iter().map(|&g| T::one() - gamma_min / g).collect();
    let ln_prefactor: T = gammas.iter().map(|&g| (gamma_min / g).ln()).sum();
    let beta = ratios.iter().cloned().fold(T::zero(), |a, b| a.max(b));
    let c = ln_prefactor.as_f64().exp();
    let b = beta.as_f64();
    let kf = k as f64;

    // majorant terms, in logs to survive large K and l
    let ln_term = |l: usize| -> f64 {
        if k < 2 {
            return f64::NEG_INFINITY;
        }
        let l = l as f64;
        ln_gamma(l + kf - 1.0) - ln_gamma(l + 1.0) - ln_gamma(kf - 1.0) + l * b.ln()
    };
    let tail_after = |l: usize| -> f64 {
        if k < 2 || b == 0.0 {
            return 0.0;
        }
        let next = l + 1;
        let ratio = b * (next as f64 + kf - 1.0) / (next as f64 + 1.0);
        if ratio >= 1.0 {
            return f64::INFINITY;
        }
        c * ln_term(next).exp() / (1.0 - ratio)
    };

    let mut truncation = 0;
    while tail_after(truncation) >= tol {
        truncation += 1;
        if truncation > MAX_SERIES_TERMS {
            return Err(Error::SeriesTruncation {
                tol,
                max_terms: MAX_SERIES_TERMS,
                bound: tail_after(MAX_SERIES_TERMS),
            });
        }
    }

    // gamma_i = sum_k c_k^i / i, psi_{l+1} = 1/(l+1) sum_{i=1}^{l+1} i gamma_i psi_{l+1-i}
    let mut powers = ratios.clone();
    let mut sums = Vec::with_capacity(truncation);
    for _ in 0..truncation {
        sums.push(powers.iter().cloned().sum::<T>());
        for (p, &r) in powers.iter_mut().zip(&ratios) {
            *p *= r;
        }
    }
    let mut psi = Vec::with_capacity(truncation + 1);
    psi.push(T::one());
    for l in 1..=truncation {
        let mut acc = T::zero();
        for i in 1..=l {
            // i * gamma_i = sum_k c_k^i
            acc += sums[i - 1] * psi[l - i];
        }
        psi.push(acc / T::from_usize_lossy(l));
    }
    let ln_weights = psi
        .iter()
        .map(|&p| if p > T::zero() { ln_prefactor + p.ln() } else { T::neg_infinity() })
        .collect();
    let ln_gamma_shapes = (0..psi.len()).map(|l| ln_gamma(T::from_usize_lossy(k + l))).collect();
    Ok(MrcLaw {
        gammas: gammas.to_vec(),
        gamma_min,
        ln_prefactor,
        psi,
        tail_bound: T::lit(tail_after(truncation)),
        ln_weights,
        ln_gamma_shapes,
    })
}

impl<T: Real> MrcLaw<T> {
    pub fn gammas(&self) -> &[T] {
        &self.gammas
    }

    pub fn users(&self) -> usize {
        self.gammas.len()
    }

    pub fn gamma_min(&self) -> T {
        self.gamma_min
    }

    pub fn psi(&self) -> &[T] {
        &self.psi
    }

    /// Index of the last retained series term.
    pub fn truncation(&self) -> usize {
        self.psi.len() - 1
    }

    pub fn tail_bound(&self) -> T {
        self.tail_bound
    }

    /// `ln(prod_k gamma_min / gamma_k)`.
    pub fn ln_prefactor(&self) -> T {
        self.ln_prefactor
    }

    /// Density of `v = x / gamma_min` with the `e^-v` factor removed:
    /// `sum_l C psi_l v^(K+l-1) / Gamma(K+l)`.
    pub fn scaled_series(&self, v: T) -> T {
        self.ln_scaled_series(v).exp()
    }

    /// Logarithm of [`scaled_series`](Self::scaled_series), finite where the
    /// truncated polynomial itself overflows.
    pub fn ln_scaled_series(&self, v: T) -> T {
        if !(v > T::zero()) {
            return if self.users() == 1 { T::zero() } else { T::neg_infinity() };
        }
        let k = self.users();
        let lv = v.ln();
        let terms: Vec<T> = self
            .ln_weights
            .iter()
            .zip(&self.ln_gamma_shapes)
            .enumerate()
            .filter(|(_, (w, _))| w.is_finite())
            .map(|(l, (&w, &lg))| w + T::from_usize_lossy(k + l - 1) * lv - lg)
            .collect();
        log_sum_exp(&terms)
    }

    pub fn pdf(&self, x: T) -> T {
        if x < T::zero() {
            return T::zero();
        }
        let v = x / self.gamma_min;
        (self.ln_scaled_series(v) - v).exp() / self.gamma_min
    }

    pub fn cdf(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        let v = x / self.gamma_min;
        let k = self.users();
        let lv = v.ln();
        // one incomplete gamma at the top shape, then the downward recurrence
        // P(a - 1) = P(a) + v^(a-1) e^-v / Gamma(a), which only adds positive
        // terms; each increment is evaluated directly so no error accumulates
        let mut p_shape = gamma_p(T::from_usize_lossy(k + self.psi.len() - 1), v);
        let mut acc = T::zero();
        for l in (0..self.psi.len()).rev() {
            let w = self.ln_weights[l];
            if w.is_finite() {
                acc += w.exp() * p_shape;
            }
            if l > 0 {
                p_shape += (T::from_usize_lossy(k + l - 1) * lv - v - self.ln_gamma_shapes[l]).exp();
            }
        }
        acc.min(T::one())
    }
}
