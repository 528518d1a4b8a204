//! Gauss–Laguerre, Gauss–Hermite and Gauss–Legendre rules, plus an
//! adaptive interval integrator built on the Legendre rule.
//!
//! Nodes are eigenvalues of the Jacobi matrix of the orthogonal family
//! (Golub–Welsch), polished by Newton iteration on the orthonormal
//! three-term recurrence. Weights come from the Christoffel function
//! `1 / sum_k p_k(x)^2`, evaluated with running rescaling so that high
//! orders do not overflow. Everything is computed in `f64` and cast to the
//! target scalar.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::tridiagonal_eigenvalues;
use crate::real::Real;

pub const MAX_ORDER: usize = 200;
/// Default Gauss–Laguerre order for fading expectations.
pub const DEFAULT_LAGUERRE_ORDER: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// Weight `e^{-x}` on `[0, inf)`.
    Laguerre,
    /// Weight `e^{-x^2}` on the real line.
    Hermite,
    /// Unit weight on `[-1, 1]`.
    Legendre,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule<T> {
    pub kind: RuleKind,
    pub order: usize,
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    /// `sum_i w_i f(x_i)`.
    pub fn integrate(&self, mut f: impl FnMut(T) -> T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Laguerre rule for `int_0^inf f(x) e^{-x} dx`.
pub fn gauss_laguerre<T: Real>(order: usize) -> Result<QuadratureRule<T>> {
    check_order(order)?;
    // monic Laguerre: a_k = 2k + 1, b_k = k
    let diag: Vec<f64> = (0..order).map(|k| 2.0 * k as f64 + 1.0).collect();
    let off: Vec<f64> = (1..=order).map(|k| k as f64).collect();
    let (nodes, weights) = golub_welsch(&diag, &off, 1.0)?;
    Ok(cast_rule(RuleKind::Laguerre, order, nodes, weights))
}

/// Gauss–Hermite rule for `int f(x) e^{-x^2} dx`.
pub fn gauss_hermite<T: Real>(order: usize) -> Result<QuadratureRule<T>> {
    check_order(order)?;
    let diag = vec![0.0; order];
    let off: Vec<f64> = (1..=order).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let (mut nodes, mut weights) = golub_welsch(&diag, &off, std::f64::consts::PI.sqrt())?;
    // enforce exact symmetry
    for i in 0..order / 2 {
        let j = order - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    Ok(cast_rule(RuleKind::Hermite, order, nodes, weights))
}

/// Gauss–Legendre rule for `int_{-1}^{1} f(x) dx`.
pub fn gauss_legendre<T: Real>(order: usize) -> Result<QuadratureRule<T>> {
    check_order(order)?;
    let diag = vec![0.0; order];
    let off: Vec<f64> = (1..=order)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let (mut nodes, mut weights) = golub_welsch(&diag, &off, 2.0)?;
    for i in 0..order / 2 {
        let j = order - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    Ok(cast_rule(RuleKind::Legendre, order, nodes, weights))
}

const ADAPTIVE_ORDER: usize = 15;
const ADAPTIVE_DEPTH: usize = 40;

/// Adaptive bisection with a 15-point Legendre rule on each piece: a piece
/// is accepted when it agrees with the sum over its two halves to within
/// `max(abs_tol, rel_tol * |estimate|)` scaled by the piece's share of the
/// interval.
pub struct Adaptive<T> {
    rule: QuadratureRule<T>,
    pub rel_tol: T,
    pub abs_tol: T,
}

impl<T: Real> Adaptive<T> {
    pub fn new(rel_tol: T, abs_tol: T) -> Self {
        Self {
            rule: gauss_legendre(ADAPTIVE_ORDER).expect("fixed order is valid"),
            rel_tol,
            abs_tol,
        }
    }

    fn panel(&self, f: &mut impl FnMut(T) -> T, a: T, b: T) -> T {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        half * self.rule.integrate(|x| f(mid + half * x))
    }

    /// `int_a^b f`, or `NonConvergence` when the depth limit is hit.
    pub fn integrate(&self, mut f: impl FnMut(T) -> T, a: T, b: T) -> Result<T> {
        if a == b {
            return Ok(T::zero());
        }
        let whole = self.panel(&mut f, a, b);
        let mut total = T::zero();
        // explicit stack keeps the summation order deterministic
        let mut stack = vec![(a, b, whole, 0usize)];
        let width = b - a;
        let scale = whole.abs();
        while let Some((lo, hi, est, depth)) = stack.pop() {
            let mid = (lo + hi) * T::lit(0.5);
            let left = self.panel(&mut f, lo, mid);
            let right = self.panel(&mut f, mid, hi);
            let refined = left + right;
            let share = (hi - lo) / width;
            let tol = self.abs_tol.max(self.rel_tol * scale.max(refined.abs())) * share;
            if (refined - est).abs() <= tol {
                total += refined;
            } else if depth >= ADAPTIVE_DEPTH {
                return Err(crate::error::Error::NonConvergence(format!(
                    "adaptive quadrature on [{lo}, {hi}] did not settle"
                )));
            } else {
                stack.push((mid, hi, right, depth + 1));
                stack.push((lo, mid, left, depth + 1));
            }
        }
        Ok(total)
    }
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 || order > MAX_ORDER {
        return Err(invalid(
            "order",
            format!("quadrature order must lie in 1..={MAX_ORDER}, got {order}"),
        ));
    }
    Ok(())
}

fn cast_rule<T: Real>(kind: RuleKind, order: usize, nodes: Vec<f64>, weights: Vec<f64>) -> QuadratureRule<T> {
    QuadratureRule {
        kind,
        order,
        nodes: nodes.into_iter().map(T::lit).collect(),
        weights: weights.into_iter().map(T::lit).collect(),
    }
}

/// `diag` holds `a_0..a_{n-1}`; `off` holds `sqrt(beta_1)..sqrt(beta_n)`, one
/// more than the Jacobi matrix needs so that `p_n` can be evaluated.
fn golub_welsch(diag: &[f64], off: &[f64], mu0: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = diag.len();
    let guesses = tridiagonal_eigenvalues(diag, &off[..n - 1])?;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &x0 in &guesses {
        let mut x = x0;
        for _ in 0..20 {
            let r = Recurrence::eval(diag, off, mu0, x);
            if r.dp == 0.0 {
                break;
            }
            let dx = r.p / r.dp;
            x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        let r = Recurrence::eval(diag, off, mu0, x);
        nodes.push(x);
        weights.push((-2.0 * r.log_scale - r.sum_sq.ln()).exp());
    }
    Ok((nodes, weights))
}

/// Orthonormal polynomial values at a point, all scaled by `exp(-log_scale)`.
struct Recurrence {
    /// `p_n(x)`
    p: f64,
    /// `p_n'(x)`
    dp: f64,
    /// `sum_{k<n} p_k(x)^2`, scaled by `exp(-2 log_scale)`.
    sum_sq: f64,
    log_scale: f64,
}

impl Recurrence {
    fn eval(diag: &[f64], off: &[f64], mu0: f64, x: f64) -> Self {
        const BIG: f64 = 1e150;
        let n = diag.len();
        let mut p_prev = 0.0;
        let mut dp_prev = 0.0;
        let mut p = 1.0 / mu0.sqrt();
        let mut dp = 0.0;
        let mut sum_sq = 0.0;
        let mut log_scale = 0.0;
        for k in 0..n {
            sum_sq += p * p;
            let b_prev = if k == 0 { 0.0 } else { off[k - 1] };
            let p_next = ((x - diag[k]) * p - b_prev * p_prev) / off[k];
            let dp_next = ((x - diag[k]) * dp + p - b_prev * dp_prev) / off[k];
            p_prev = p;
            dp_prev = dp;
            p = p_next;
            dp = dp_next;
            if p.abs() > BIG || dp.abs() > BIG {
                let s = 1.0 / BIG;
                p *= s;
                dp *= s;
                p_prev *= s;
                dp_prev *= s;
                sum_sq *= s * s;
                log_scale += BIG.ln();
            }
        }
        Self {
            p,
            dp,
            sum_sq,
            log_scale,
        }
    }
}
