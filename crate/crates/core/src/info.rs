//! Mutual information and MMSE of a finite alphabet over the scalar complex
//! Gaussian channel `Y = sqrt(snr) X + N`, plus interpolation tables.
//!
//! MI is measured in bits. The MMSE returned here is the natural-units
//! conditional variance `E|X - E[X|Y]|^2` divided by `ln 2`, so that it is
//! exactly the derivative of the bit-valued MI with respect to the SNR.

use std::path::Path;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{invalid, Error, Result};
use crate::interp::Pchip;
use crate::quadrature::gauss_hermite;
use crate::real::Real;

pub const DEFAULT_HERMITE_ORDER: usize = 40;
pub const MIN_HERMITE_ORDER: usize = 10;
pub const TABLE_FORMAT_VERSION: u32 = 1;

/// MI (bits) and bit-convention MMSE curves of an alphabet, either
/// tabulated or computed directly.
pub trait InfoCurve<T: Real>: Sync {
    fn mi(&self, snr: T) -> T;

    fn ln_mmse(&self, snr: T) -> T;

    fn mmse(&self, snr: T) -> T {
        self.ln_mmse(snr).exp()
    }

    /// `log2 M`.
    fn log2_order(&self) -> T;

    /// SNRs where the curve is only piecewise smooth (table knots).
    fn breakpoints(&self) -> &[T] {
        &[]
    }
}

/// MI (bits) and log-MMSE at one SNR.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfoPoint<T> {
    pub mi: T,
    pub ln_mmse: T,
}

/// Direct quadrature evaluator for the complex-plane integrals after the
/// substitution `u = sqrt(snr) x_m + n`, which leaves a standard complex
/// Gaussian measure on `n`.
///
/// At low SNR the measure is integrated with a tensor Gauss–Hermite rule of
/// the configured order. Once the likelihood-ratio transitions (width about
/// `1 / (sqrt(snr) |x_m - x_m'|)`) get narrower than the Hermite node
/// spacing, a truncated tensor trapezoidal rule with spacing proportional to
/// that width is used instead; it converges geometrically in
/// `1 / (width * spacing)` for these analytic integrands.
///
/// Once every decision boundary is several noise standard deviations away,
/// the posterior is effectively binary near each boundary and both the MI
/// deficit and the MMSE become sums of one-dimensional pair integrals. The
/// neglected overlap terms are of relative order `exp(-b^2)` with `b` the
/// half minimum distance in noise units, below double precision here.
#[derive(Clone, Debug)]
pub struct InfoEvaluator<T> {
    constellation: Constellation<T>,
    order: usize,
    max_distance: T,
    kappa: T,
    hermite: Vec<Node<T>>,
    hermite_radius: T,
}

#[derive(Clone, Copy, Debug)]
struct Node<T> {
    n: Complex<T>,
    ln_w: T,
    w: T,
}

/// Trapezoid spacing times the sharpest relevant transition rate.
const TRAPEZOID_KAPPA: f64 = 0.5;
/// Hermite rule is used while spacing times rate stays below this.
const HERMITE_KAPPA: f64 = 0.3;
const BOX_RADIUS: f64 = 6.5;
const BOX_RADIUS_MAX: f64 = 8.0;
/// Half the scaled minimum distance, in noise standard deviations, beyond
/// which the pairwise reduction is used.
const PAIRWISE_SWITCH: f64 = 4.5;
/// Exponent offsets below this are dropped from the sums (e^-40 ~ 4e-18).
const EXP_CUTOFF: f64 = -40.0;

impl<T: Real> InfoEvaluator<T> {
    pub fn new(constellation: &Constellation<T>, hermite_order: usize) -> Result<Self> {
        if hermite_order < MIN_HERMITE_ORDER {
            return Err(invalid(
                "hermite_order",
                format!("must be at least {MIN_HERMITE_ORDER}, got {hermite_order}"),
            ));
        }
        let rule = gauss_hermite::<T>(hermite_order)?;
        let inv_pi = T::FRAC_1_PI();
        let mut hermite = Vec::with_capacity(hermite_order * hermite_order);
        for (&a, &wa) in rule.nodes.iter().zip(&rule.weights) {
            for (&b, &wb) in rule.nodes.iter().zip(&rule.weights) {
                let w = wa * wb * inv_pi;
                hermite.push(Node {
                    n: Complex::new(a, b),
                    ln_w: w.ln(),
                    w,
                });
            }
        }
        let hermite_radius = rule.nodes.iter().fold(T::zero(), |r, &x| r.max(x.abs())) * T::SQRT_2();
        let pts = constellation.points();
        let mut max_distance = T::zero();
        for a in pts {
            for b in pts {
                max_distance = max_distance.max((a - b).norm());
            }
        }
        Ok(Self {
            constellation: constellation.clone(),
            order: hermite_order,
            max_distance,
            kappa: T::lit(TRAPEZOID_KAPPA),
            hermite,
            hermite_radius,
        })
    }

    /// Overrides the trapezoid spacing factor (spacing times the sharpest
    /// transition rate). Smaller is more accurate and quadratically slower.
    pub fn with_spacing_factor(mut self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(invalid("kappa", format!("must lie in (0, 1], got {kappa}")));
        }
        self.kappa = T::lit(kappa);
        Ok(self)
    }

    pub fn constellation(&self) -> &Constellation<T> {
        &self.constellation
    }

    pub fn hermite_order(&self) -> usize {
        self.order
    }

    fn hermite_spacing(&self) -> T {
        T::PI() / T::from_usize_lossy(2 * self.order).sqrt()
    }

    /// Box radius for the trapezoidal rule: wide enough to contain the
    /// nearest-neighbour decision boundaries that dominate the MMSE tail.
    fn box_radius(&self, root: T) -> T {
        let r = self.constellation.d_min() * root * T::lit(0.5) + T::lit(3.5);
        r.max(T::lit(BOX_RADIUS)).min(T::lit(BOX_RADIUS_MAX))
    }

    /// True when the tensor Gauss–Hermite rule is used at this SNR.
    pub fn uses_hermite(&self, snr: T) -> bool {
        let rate = snr.sqrt() * self.max_distance;
        rate * self.hermite_spacing() <= T::lit(HERMITE_KAPPA)
    }

    fn trapezoid_nodes(&self, root: T) -> Vec<Node<T>> {
        let radius = self.box_radius(root);
        let rate = (root * self.max_distance).min(radius + radius);
        let h = (self.kappa / rate).min(T::lit(0.25));
        let half = (radius / h).ceil().to_usize().expect("finite node count") as i64;
        let r2 = radius * radius;
        let scale = h * h * T::FRAC_1_PI();
        let ln_scale = scale.ln();
        let mut nodes = Vec::new();
        for i in -half..=half {
            let a = T::from_i64(i).expect("index") * h;
            for j in -half..=half {
                let b = T::from_i64(j).expect("index") * h;
                let q = a * a + b * b;
                if q > r2 {
                    continue;
                }
                nodes.push(Node {
                    n: Complex::new(a, b),
                    ln_w: ln_scale - q,
                    w: scale * (-q).exp(),
                });
            }
        }
        nodes
    }

    /// MI and log-MMSE in one pass over the quadrature nodes.
    pub fn evaluate(&self, snr: T) -> Result<InfoPoint<T>> {
        if snr.is_nan() || snr < T::zero() {
            return Err(invalid("snr", format!("must be non-negative, got {snr}")));
        }
        let root = snr.sqrt();
        if self.constellation.d_min() * root * T::lit(0.5) > T::lit(PAIRWISE_SWITCH) {
            return Ok(self.evaluate_pairwise(snr));
        }
        let trapezoid;
        let (nodes, radius): (&[Node<T>], T) = if self.uses_hermite(snr) {
            (&self.hermite, self.hermite_radius)
        } else {
            trapezoid = self.trapezoid_nodes(root);
            (&trapezoid, self.box_radius(root))
        };
        let pts = self.constellation.points();
        let m_count = pts.len();
        let ln2 = T::LN_2();
        let two = T::lit(2.0);
        let cutoff = T::lit(EXP_CUTOFF);
        let per_symbol: Vec<(T, LogAccumulator<T>)> = (0..m_count)
            .into_par_iter()
            .map(|m| {
                let xm = pts[m];
                // pairs whose exponent stays below the cutoff on the whole
                // integration disc never contribute
                let mut diffs = Vec::new();
                let mut scaled = Vec::new();
                let mut energy = Vec::new();
                for (k, &xk) in pts.iter().enumerate() {
                    if k == m {
                        continue;
                    }
                    let d = xm - xk;
                    let a = d.norm() * root;
                    if two * radius * a - a * a < cutoff {
                        continue;
                    }
                    diffs.push(d);
                    scaled.push(d * root);
                    energy.push(a * a);
                }
                let active = diffs.len();
                let mut exps = vec![T::zero(); active];
                let mut lse_m = T::zero();
                let mut err_acc = LogAccumulator::new();
                if active == 0 {
                    return (lse_m, err_acc);
                }
                for node in nodes {
                    let n = node.n;
                    // exponent |n|^2 - |n + d|^2 = -2 Re(conj(n) d) - |d|^2
                    let mut emax_other = T::neg_infinity();
                    for k in 0..active {
                        let d = scaled[k];
                        let e = -two * (n.re * d.re + n.im * d.im) - energy[k];
                        exps[k] = e;
                        if e > emax_other {
                            emax_other = e;
                        }
                    }
                    let emax = emax_other.max(T::zero());
                    let mut s = (-emax).exp();
                    let mut err = Complex::new(T::zero(), T::zero());
                    for k in 0..active {
                        let e = exps[k];
                        let a = e - emax;
                        if a > cutoff {
                            s += a.exp();
                        }
                        let b = e - emax_other;
                        if b > cutoff {
                            err += diffs[k] * b.exp();
                        }
                    }
                    let lse = emax + s.ln();
                    lse_m += node.w * lse;
                    let mag = err.norm();
                    if mag > T::zero() {
                        err_acc.push(node.ln_w + two * (emax_other - lse + mag.ln()));
                    }
                }
                (lse_m, err_acc)
            })
            .collect();
        let mut lse_total = T::zero();
        let mut err_total = LogAccumulator::new();
        for (l, acc) in &per_symbol {
            lse_total += *l;
            err_total.merge(acc);
        }
        let mf = T::from_usize_lossy(m_count);
        let log2m = mf.log2();
        let mi = log2m - lse_total / (mf * ln2);
        let mi = mi.max(T::zero()).min(log2m);
        let ln_mmse = err_total.value() - mf.ln() - ln2.ln();
        Ok(InfoPoint { mi, ln_mmse })
    }

    fn evaluate_pairwise(&self, snr: T) -> InfoPoint<T> {
        let pts = self.constellation.points();
        let m_count = pts.len();
        let mut sq: Vec<T> = Vec::with_capacity(m_count * m_count);
        for (m, &a) in pts.iter().enumerate() {
            for (k, &b) in pts.iter().enumerate() {
                if k != m {
                    sq.push((a - b).norm_sqr());
                }
            }
        }
        sq.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        let tol = T::lit(1e-10);
        let mut deficit = T::zero();
        let mut err = LogAccumulator::new();
        let mut i = 0;
        while i < sq.len() {
            let mut j = i + 1;
            while j < sq.len() && sq[j] - sq[i] <= tol * sq[i] {
                j += 1;
            }
            let count = T::from_usize_lossy(j - i);
            let quarter = sq[i] * T::lit(0.25);
            let (d, ln_g) = binary_pair(snr * quarter, self.kappa);
            deficit += count * d;
            err.push(count.ln() + quarter.ln() + ln_g);
            i = j;
        }
        let mf = T::from_usize_lossy(m_count);
        let log2m = mf.log2();
        let mi = (log2m - deficit / mf).max(T::zero());
        let ln_mmse = err.value() - mf.ln() - T::LN_2().ln();
        InfoPoint { mi, ln_mmse }
    }

    pub fn mutual_information(&self, snr: T) -> Result<T> {
        Ok(self.evaluate(snr)?.mi)
    }

    pub fn mmse(&self, snr: T) -> Result<T> {
        Ok(self.evaluate(snr)?.ln_mmse.exp())
    }
}

impl<T: Real> InfoCurve<T> for InfoEvaluator<T> {
    fn mi(&self, snr: T) -> T {
        self.evaluate(snr.max(T::zero())).map(|p| p.mi).unwrap_or(T::nan())
    }

    fn ln_mmse(&self, snr: T) -> T {
        self.evaluate(snr.max(T::zero()))
            .map(|p| p.ln_mmse)
            .unwrap_or(T::nan())
    }

    fn log2_order(&self) -> T {
        self.constellation.log2_order()
    }
}

/// Binary antipodal input at SNR `s`: returns the MI deficit `1 - I` in bits
/// and the natural-units log-MMSE. With `r ~ N(0, 1/2)` the log-likelihood
/// ratio of the wrong symbol is `u = -4 sqrt(s) r - 4 s`; the deficit is
/// `E[log2(1 + e^u)]` and the MMSE is `E[2 / (1 + e^-u)]`. Both integrands
/// peak at the decision boundary `r = -sqrt(s)`, so a trapezoidal rule is
/// centred there with spacing matched to the transition rate `4 sqrt(s)`.
fn binary_pair<T: Real>(s: T, kappa: T) -> (T, T) {
    let root = s.sqrt();
    let rate = T::lit(4.0) * root;
    let h = (kappa / rate).min(T::lit(0.1));
    let half_width = T::lit(9.0);
    let steps = (half_width / h).ceil().to_i64().expect("finite node count");
    let centre = -root;
    let ln_norm = h.ln() - T::PI().ln() * T::lit(0.5);
    let mut deficit = LogAccumulator::new();
    let mut err = LogAccumulator::new();
    for j in -steps..=steps {
        let r = centre + T::from_i64(j).expect("index") * h;
        let u = -rate * r - T::lit(4.0) * s;
        let ln_w = ln_norm - r * r;
        // ln softplus(u) ~ u once e^u is far below machine epsilon
        let ln_sp = if u < T::lit(-40.0) { u } else { softplus(u).ln() };
        deficit.push(ln_w + ln_sp);
        err.push(ln_w + T::LN_2() - softplus(-u));
    }
    (deficit.value().exp() / T::LN_2(), err.value())
}

/// `ln(1 + e^u)` without overflow or cancellation.
fn softplus<T: Real>(u: T) -> T {
    if u > T::zero() {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Streaming log-sum-exp.
#[derive(Clone, Copy, Debug)]
struct LogAccumulator<T> {
    max: T,
    sum: T,
}

impl<T: Real> LogAccumulator<T> {
    fn new() -> Self {
        Self {
            max: T::neg_infinity(),
            sum: T::zero(),
        }
    }

    fn push(&mut self, v: T) {
        if v == T::neg_infinity() {
            return;
        }
        if v > self.max {
            self.sum = self.sum * (self.max - v).exp() + T::one();
            self.max = v;
        } else {
            self.sum += (v - self.max).exp();
        }
    }

    fn merge(&mut self, other: &Self) {
        if other.max == T::neg_infinity() {
            return;
        }
        if other.max > self.max {
            self.sum = self.sum * (self.max - other.max).exp() + other.sum;
            self.max = other.max;
        } else {
            self.sum += other.sum * (other.max - self.max).exp();
        }
    }

    fn value(&self) -> T {
        self.max + self.sum.ln()
    }
}

/// `I(snr)` in bits.
pub fn mutual_information<T: Real>(c: &Constellation<T>, snr: T, hermite_order: usize) -> Result<T> {
    InfoEvaluator::new(c, hermite_order)?.mutual_information(snr)
}

/// Bit-convention MMSE at `snr`.
pub fn mmse<T: Real>(c: &Constellation<T>, snr: T, hermite_order: usize) -> Result<T> {
    InfoEvaluator::new(c, hermite_order)?.mmse(snr)
}

/// Log-SNR grid specification, in dB.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub db_min: f64,
    pub db_max: f64,
    /// Grid points per 10 dB.
    pub points_per_decade: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            db_min: -40.0,
            db_max: 40.0,
            points_per_decade: 20,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.db_min < self.db_max) || !self.db_min.is_finite() || !self.db_max.is_finite() {
            return Err(invalid("db_min", "grid requires db_min < db_max"));
        }
        if self.points_per_decade < 10 {
            return Err(invalid("points_per_decade", "must be at least 10"));
        }
        Ok(())
    }

    pub fn snr_db_points(&self) -> Vec<f64> {
        let span = (self.db_max - self.db_min) / 10.0 * self.points_per_decade as f64;
        let count = span.round() as usize + 1;
        let step = (self.db_max - self.db_min) / (count - 1) as f64;
        (0..count).map(|i| self.db_min + step * i as f64).collect()
    }
}

/// Tabulated MI and MMSE curves with monotone interpolation on the
/// log-SNR axis.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct InfoTable<T> {
    format_version: u32,
    label: String,
    constellation: Constellation<T>,
    grid: GridSpec,
    hermite_order: usize,
    snr_grid: Vec<T>,
    mi_values: Vec<T>,
    /// natural log of the bit-convention MMSE; the linear values underflow
    /// at high SNR
    ln_mmse_values: Vec<T>,
    #[serde(skip)]
    curves: Option<Curves<T>>,
}

#[derive(Clone, Debug)]
struct Curves<T> {
    mi: Pchip<T>,
    ln_mmse: Pchip<T>,
}

/// Builds a table on the log-SNR grid described by `grid`.
pub fn build_table<T: Real>(c: &Constellation<T>, grid: GridSpec, hermite_order: usize) -> Result<InfoTable<T>> {
    grid.validate()?;
    let eval = InfoEvaluator::new(c, hermite_order)?;
    let snr_grid: Vec<T> = grid
        .snr_db_points()
        .into_iter()
        .map(|db| T::lit(10f64.powf(db / 10.0)))
        .collect();
    let points: Vec<InfoPoint<T>> = snr_grid
        .par_iter()
        .map(|&g| eval.evaluate(g))
        .collect::<Result<_>>()?;
    // quadrature noise near saturation must not break monotonicity
    let mut mi_values = Vec::with_capacity(points.len());
    let mut ln_mmse_values = Vec::with_capacity(points.len());
    let mut run_max = T::zero();
    let mut run_min = T::infinity();
    for p in &points {
        run_max = run_max.max(p.mi);
        run_min = run_min.min(p.ln_mmse);
        mi_values.push(run_max);
        ln_mmse_values.push(run_min);
    }
    let mut table = InfoTable {
        format_version: TABLE_FORMAT_VERSION,
        label: c.label().to_string(),
        constellation: c.clone(),
        grid,
        hermite_order,
        snr_grid,
        mi_values,
        ln_mmse_values,
        curves: None,
    };
    table.prepare();
    Ok(table)
}

impl<T: Real> InfoTable<T> {
    fn prepare(&mut self) {
        let x: Vec<T> = self.snr_grid.iter().map(|g| g.ln()).collect();
        self.curves = Some(Curves {
            mi: Pchip::new(x.clone(), self.mi_values.clone()),
            ln_mmse: Pchip::new(x, self.ln_mmse_values.clone()),
        });
    }

    fn curves(&self) -> &Curves<T> {
        self.curves.as_ref().expect("table curves are prepared at construction")
    }

    pub fn constellation(&self) -> &Constellation<T> {
        &self.constellation
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn hermite_order(&self) -> usize {
        self.hermite_order
    }

    pub fn snr_grid(&self) -> &[T] {
        &self.snr_grid
    }

    pub fn mi_values(&self) -> &[T] {
        &self.mi_values
    }

    pub fn ln_mmse_values(&self) -> &[T] {
        &self.ln_mmse_values
    }

    pub fn mmse_values(&self) -> Vec<T> {
        self.ln_mmse_values.iter().map(|v| v.exp()).collect()
    }

    /// Interpolated MI in bits. Below the grid the curve is continued
    /// linearly through the origin; above it saturates at `log2 M`.
    pub fn interpolate_mi(&self, snr: T) -> T {
        if !(snr > T::zero()) {
            return T::zero();
        }
        let n = self.snr_grid.len();
        let lo = self.snr_grid[0];
        if snr < lo {
            return self.mi_values[0] * snr / lo;
        }
        if snr > self.snr_grid[n - 1] {
            return self.constellation.log2_order();
        }
        if let Ok(i) = self.snr_grid.binary_search_by(|g| g.partial_cmp(&snr).expect("NaN in grid")) {
            return self.mi_values[i];
        }
        self.curves().mi.eval(snr.ln())
    }

    /// Interpolated log-MMSE. Below the grid the MMSE is linear between its
    /// value at zero SNR (`1/ln 2`) and the first grid node; above the grid
    /// the log-MMSE continues linearly in the SNR.
    pub fn interpolate_ln_mmse(&self, snr: T) -> T {
        let n = self.snr_grid.len();
        let lo = self.snr_grid[0];
        if !(snr > T::zero()) {
            return -(T::LN_2().ln());
        }
        if snr < lo {
            let m0 = T::one() / T::LN_2();
            let m1 = self.ln_mmse_values[0].exp();
            return (m0 + (m1 - m0) * snr / lo).ln();
        }
        let hi = self.snr_grid[n - 1];
        if snr > hi {
            let slope = (self.ln_mmse_values[n - 1] - self.ln_mmse_values[n - 2])
                / (hi - self.snr_grid[n - 2]);
            return self.ln_mmse_values[n - 1] + slope * (snr - hi);
        }
        if let Ok(i) = self.snr_grid.binary_search_by(|g| g.partial_cmp(&snr).expect("NaN in grid")) {
            return self.ln_mmse_values[i];
        }
        self.curves().ln_mmse.eval(snr.ln())
    }

    /// Cache key: the table is reusable only if all of these match.
    pub fn matches(&self, c: &Constellation<T>, grid: GridSpec, hermite_order: usize) -> bool {
        self.format_version == TABLE_FORMAT_VERSION
            && self.label == c.label()
            && self.grid == grid
            && self.hermite_order == hermite_order
            && self.constellation.order() == c.order()
            && self
                .constellation
                .points()
                .iter()
                .zip(c.points())
                .all(|(a, b)| (a - b).norm() <= T::lit(1e-12))
    }

    pub fn save_json(&self, path: &Path) -> Result<()>
    where
        T: Serialize,
    {
        let s = serde_json::to_string(self)?;
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let s = std::fs::read_to_string(path)?;
        let mut t: Self = serde_json::from_str(&s)?;
        if t.format_version != TABLE_FORMAT_VERSION {
            return Err(Error::Serialization(format!(
                "table format version {} (expected {TABLE_FORMAT_VERSION})",
                t.format_version
            )));
        }
        let n = t.snr_grid.len();
        if n < 3 || t.mi_values.len() != n || t.ln_mmse_values.len() != n {
            return Err(Error::Serialization("table arrays have inconsistent lengths".into()));
        }
        t.prepare();
        Ok(t)
    }

    /// Loads `path` if it holds a table with a matching key, otherwise builds
    /// a fresh table and writes it there.
    pub fn load_or_build(path: &Path, c: &Constellation<T>, grid: GridSpec, hermite_order: usize) -> Result<Self>
    where
        T: Serialize + for<'de> Deserialize<'de>,
    {
        if let Ok(t) = Self::load_json(path) {
            if t.matches(c, grid, hermite_order) {
                return Ok(t);
            }
        }
        let t = build_table(c, grid, hermite_order)?;
        t.save_json(path)?;
        Ok(t)
    }
}

impl<T: Real> InfoCurve<T> for InfoTable<T> {
    fn mi(&self, snr: T) -> T {
        self.interpolate_mi(snr)
    }

    fn ln_mmse(&self, snr: T) -> T {
        self.interpolate_ln_mmse(snr)
    }

    fn log2_order(&self) -> T {
        self.constellation.log2_order()
    }

    fn breakpoints(&self) -> &[T] {
        &self.snr_grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_snr_anchors() {
        for c in [Constellation::<f64>::psk(2).unwrap(), Constellation::qam(16).unwrap()] {
            let p = InfoEvaluator::new(&c, 40).unwrap().evaluate(0.0).unwrap();
            assert!(p.mi.abs() < 1e-10);
            assert!((p.ln_mmse.exp() - 1.0 / std::f64::consts::LN_2).abs() < 1e-8);
        }
    }

    #[test]
    fn binary_pair_matches_plane_quadrature_for_bpsk() {
        // BPSK has a single pair, so the reduction is exact at any SNR
        let c = Constellation::<f64>::psk(2).unwrap();
        let e = InfoEvaluator::new(&c, 40).unwrap();
        for snr in [0.3, 2.0, 10.0] {
            let p = e.evaluate(snr).unwrap();
            let (deficit, ln_g) = binary_pair(snr, 0.5);
            assert!((1.0 - deficit - p.mi).abs() < 1e-10, "{snr}");
            assert!((ln_g - std::f64::consts::LN_2.ln() - p.ln_mmse).abs() < 5e-8, "{snr}");
        }
    }

    #[test]
    fn regimes_join_continuously() {
        let c = Constellation::<f64>::qam(4).unwrap();
        let e = InfoEvaluator::new(&c, 40).unwrap();
        // b = sqrt(snr) d_min / 2 crosses the pairwise switch at snr = 2 * 4.5^2
        let edge = 2.0 * PAIRWISE_SWITCH * PAIRWISE_SWITCH;
        let below = e.evaluate(edge * (1.0 - 1e-9)).unwrap();
        let above = e.evaluate(edge * (1.0 + 1e-9)).unwrap();
        assert!((below.mi - above.mi).abs() < 1e-12);
        assert!((below.ln_mmse - above.ln_mmse).abs() < 1e-6);
        assert!(e.uses_hermite(1e-3));
        assert!(!e.uses_hermite(10.0));
    }

    #[test]
    fn log_accumulator_merge_is_order_free() {
        let vals = [-3.0, 1.5, -700.0, 0.25, 2.0];
        let mut all = LogAccumulator::new();
        for v in vals {
            all.push(v);
        }
        let mut a = LogAccumulator::new();
        let mut b = LogAccumulator::new();
        for v in &vals[..2] {
            a.push(*v);
        }
        for v in &vals[2..] {
            b.push(*v);
        }
        b.merge(&a);
        let direct = vals.iter().map(|v: &f64| v.exp()).sum::<f64>().ln();
        assert!((all.value() - direct).abs() < 1e-14);
        assert!((b.value() - direct).abs() < 1e-14);
        a.push(f64::NEG_INFINITY);
        assert!(a.value().is_finite());
    }

    #[test]
    fn default_grid_has_161_points() {
        let g = GridSpec::default();
        let pts = g.snr_db_points();
        assert_eq!(pts.len(), 161);
        assert_eq!(pts[0], -40.0);
        assert_eq!(pts[160], 40.0);
        assert!(GridSpec { db_min: 1.0, db_max: 1.0, points_per_decade: 20 }.validate().is_err());
        assert!(GridSpec { db_min: 0.0, db_max: 1.0, points_per_decade: 9 }.validate().is_err());
    }

    #[test]
    fn rejects_bad_arguments() {
        let c = Constellation::<f64>::qam(4).unwrap();
        assert!(InfoEvaluator::new(&c, 9).is_err());
        let e = InfoEvaluator::new(&c, 10).unwrap();
        assert!(e.evaluate(-1.0).is_err());
        assert!(e.evaluate(f64::NAN).is_err());
        assert!(e.clone().with_spacing_factor(0.0).is_err());
    }
}
