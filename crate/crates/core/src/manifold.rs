//! Conjugate gradient ascent on the torus of unit-modulus vectors.
//!
//! Gradients follow the `d/d(phi*)` convention: the directional derivative
//! of a real function along `d` is `2 Re <g, d>`.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelEnsemble, PhaseVector};
use crate::error::{invalid, Error, Result};
use crate::linalg::{norm, real_inner};
use crate::real::Real;

pub const MAX_RETRACTION_HALVINGS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Armijo {
    pub c1: f64,
    pub ratio: f64,
    /// Largest per-entry move of the first trial step, in radians.
    pub initial_step: f64,
    pub max_backtracks: usize,
}

impl Default for Armijo {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            ratio: 0.5,
            initial_step: 1.0,
            max_backtracks: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RmCgdConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo: Armijo,
    pub pr_restart: bool,
}

impl Default for RmCgdConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-6,
            armijo: Armijo::default(),
            pr_restart: true,
        }
    }
}

impl RmCgdConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.armijo;
        if !(self.grad_tol > 0.0) {
            return Err(invalid("grad_tol", "must be positive"));
        }
        if !(a.c1 > 0.0 && a.c1 < 1.0) {
            return Err(invalid("armijo.c1", "must lie in (0, 1)"));
        }
        if !(a.ratio > 0.0 && a.ratio < 1.0) {
            return Err(invalid("armijo.ratio", "must lie in (0, 1)"));
        }
        if !(a.initial_step > 0.0) {
            return Err(invalid("armijo.initial_step", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// Harmonic composite SNR `(sum_k (N/snr) / phi^H R_k phi)^-1`.
    F1,
    /// `sum_k ln(phi^H R_k phi)`.
    F2,
}

#[derive(Clone, Copy, Debug)]
pub struct Objective<'a, T> {
    pub kind: ObjectiveKind,
    pub ensemble: &'a ChannelEnsemble<T>,
}

impl<'a, T: Real> Objective<'a, T> {
    pub fn new(kind: ObjectiveKind, ensemble: &'a ChannelEnsemble<T>) -> Self {
        Self { kind, ensemble }
    }

    /// `phi^H R_k phi` and `R_k phi` for every user.
    fn forms(&self, phi: &[Complex<T>]) -> Result<Vec<(T, Vec<Complex<T>>)>> {
        let e = self.ensemble;
        if phi.len() != e.antennas() {
            return Err(Error::DimensionMismatch(format!(
                "phi has {} entries, ensemble has {} antennas",
                phi.len(),
                e.antennas()
            )));
        }
        e.correlations()
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let rp = r.mul_vec(phi);
                let q = real_inner(phi, &rp);
                if q <= T::lit(crate::channel::NULL_THRESHOLD) * r.trace() {
                    Err(Error::NulledUser { user: k, value: q.as_f64() })
                } else {
                    Ok((q, rp))
                }
            })
            .collect()
    }

    fn scale(&self) -> T {
        T::from_usize_lossy(self.ensemble.antennas()) / self.ensemble.snr()
    }

    pub fn value(&self, phi: &[Complex<T>]) -> Result<T> {
        let forms = self.forms(phi)?;
        Ok(match self.kind {
            ObjectiveKind::F1 => {
                let s = self.scale();
                T::one() / forms.iter().map(|(q, _)| s / *q).sum::<T>()
            }
            ObjectiveKind::F2 => forms.iter().map(|(q, _)| q.ln()).sum(),
        })
    }

    pub fn euclidean_grad(&self, phi: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        Ok(self.value_and_grad(phi)?.1)
    }

    pub fn value_and_grad(&self, phi: &[Complex<T>]) -> Result<(T, Vec<Complex<T>>)> {
        let forms = self.forms(phi)?;
        let mut g = vec![Complex::new(T::zero(), T::zero()); phi.len()];
        let value = match self.kind {
            ObjectiveKind::F1 => {
                let s = self.scale();
                let f = T::one() / forms.iter().map(|(q, _)| s / *q).sum::<T>();
                for (q, rp) in &forms {
                    let w = f * f * s / (*q * *q);
                    for (gi, ri) in g.iter_mut().zip(rp) {
                        *gi += ri * w;
                    }
                }
                f
            }
            ObjectiveKind::F2 => {
                for (q, rp) in &forms {
                    let w = T::one() / *q;
                    for (gi, ri) in g.iter_mut().zip(rp) {
                        *gi += ri * w;
                    }
                }
                forms.iter().map(|(q, _)| q.ln()).sum()
            }
        };
        Ok((value, g))
    }
}

/// Tangent projection `v - Re{v .* conj(phi)} .* phi` at `phi`.
pub fn riemannian_grad<T: Real>(euclid: &[Complex<T>], phi: &[Complex<T>]) -> Vec<Complex<T>> {
    euclid
        .iter()
        .zip(phi)
        .map(|(v, p)| v - p * (v * p.conj()).re)
        .collect()
}

/// Moves a tangent vector to the tangent space at `phi_new` by projection.
pub fn transport<T: Real>(eta: &[Complex<T>], phi_new: &[Complex<T>]) -> Vec<Complex<T>> {
    riemannian_grad(eta, phi_new)
}

/// `unt(phi + step * dir)`, halving the step while any entry vanishes.
pub fn retract<T: Real>(phi: &[Complex<T>], dir: &[Complex<T>], step: T) -> Result<Vec<Complex<T>>> {
    let mut s = step;
    for _ in 0..=MAX_RETRACTION_HALVINGS {
        let x: Vec<Complex<T>> = phi.iter().zip(dir).map(|(p, d)| p + d * s).collect();
        if x.iter().all(|z| z.norm() > T::epsilon() && z.norm().is_finite()) {
            return Ok(x.into_iter().map(|z| z / z.norm()).collect());
        }
        s = s * T::lit(0.5);
    }
    Err(Error::DegenerateRetraction(MAX_RETRACTION_HALVINGS))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmCgdStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub grad_norm: f64,
    /// Accepted step; 0 on the final row.
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmCgdResult<T> {
    pub phases: PhaseVector<T>,
    pub value: T,
    pub grad_norm: T,
    pub status: RmCgdStatus,
    pub trace: Vec<TraceRow>,
}

impl<T> RmCgdResult<T> {
    pub fn converged(&self) -> bool {
        self.status == RmCgdStatus::Converged
    }
}

fn max_abs<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|z| z.norm()).fold(T::zero(), T::max)
}

/// Polak–Ribière conjugate gradient ascent with Armijo backtracking. The
/// first trial step moves the largest entry by `initial_step` radians. The
/// direction falls back to the gradient whenever `2 Re <grad, eta>` drops
/// below `|grad|^2`.
pub fn rm_cgd<T: Real>(obj: &Objective<'_, T>, start: &PhaseVector<T>, cfg: &RmCgdConfig) -> Result<RmCgdResult<T>> {
    cfg.validate()?;
    let a = cfg.armijo;
    let mut phi = start.phi();
    let (mut f, eg) = obj.value_and_grad(&phi)?;
    let mut grad = riemannian_grad(&eg, &phi);
    let mut eta = grad.clone();
    let mut trace = Vec::new();
    let mut status = RmCgdStatus::MaxIterations;
    for iter in 0..=cfg.max_iters {
        let gn = norm(&grad);
        if gn < T::lit(cfg.grad_tol) {
            status = RmCgdStatus::Converged;
        }
        if status == RmCgdStatus::Converged || iter == cfg.max_iters {
            trace.push(TraceRow { iter, objective: f.as_f64(), grad_norm: gn.as_f64(), step: 0.0 });
            break;
        }
        let two = T::lit(2.0);
        // restart unless eta is a sufficient ascent direction, which keeps
        // every accepted gain above c1 * step * |grad|^2
        let mut slope = two * real_inner(&grad, &eta);
        if !(slope >= gn * gn) {
            eta = grad.clone();
            slope = two * gn * gn;
        }
        let mut step = T::lit(a.initial_step) / max_abs(&eta);
        let mut accepted = None;
        for _ in 0..=a.max_backtracks {
            if let Ok(next) = retract(&phi, &eta, step) {
                if let Ok((fv, g)) = obj.value_and_grad(&next) {
                    if fv >= f + T::lit(a.c1) * step * slope && fv > f {
                        accepted = Some((next, fv, g));
                        break;
                    }
                }
            }
            step = step * T::lit(a.ratio);
        }
        let Some((next, fv, eg)) = accepted else {
            status = RmCgdStatus::LineSearchFailed;
            trace.push(TraceRow { iter, objective: f.as_f64(), grad_norm: gn.as_f64(), step: 0.0 });
            break;
        };
        trace.push(TraceRow { iter, objective: f.as_f64(), grad_norm: gn.as_f64(), step: step.as_f64() });
        let new_grad = riemannian_grad(&eg, &next);
        let old_grad = transport(&grad, &next);
        let old_eta = transport(&eta, &next);
        let diff: Vec<Complex<T>> = new_grad.iter().zip(&old_grad).map(|(x, y)| x - y).collect();
        let mut zeta = real_inner(&new_grad, &diff) / (gn * gn);
        if cfg.pr_restart {
            zeta = zeta.max(T::zero());
        }
        eta = new_grad.iter().zip(&old_eta).map(|(g, e)| g + e * zeta).collect();
        phi = next;
        f = fv;
        grad = new_grad;
    }
    Ok(RmCgdResult {
        phases: PhaseVector::from_phi(&phi),
        value: f,
        grad_norm: norm(&grad),
        status,
        trace,
    })
}

/// Independent runs from `starts` uniform random phase vectors (start `i`
/// drawn from stream `i` of `seed`), best first by objective value.
pub fn rm_cgd_multistart<T: Real>(
    obj: &Objective<'_, T>,
    starts: usize,
    cfg: &RmCgdConfig,
    seed: u64,
) -> Result<Vec<RmCgdResult<T>>> {
    if starts == 0 {
        return Err(invalid("starts", "must be positive"));
    }
    let n = obj.ensemble.antennas();
    let mut runs = (0..starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            rm_cgd(obj, &PhaseVector::random(n, &mut rng), cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap_or(std::cmp::Ordering::Equal));
    Ok(runs)
}
