//! Average multicast rate for the non-cooperative (minimum SNR) and
//! cooperative (MRC sum SNR) scenarios, Mellin constants of the MMSE curve,
//! and the high-SNR asymptotes.

use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::channel::{min_snr_law, mrc_law, ChannelEnsemble, MrcLaw, PhaseVector};
use crate::error::{invalid, Error, Result};
use crate::info::InfoCurve;
use crate::quadrature::{gauss_laguerre, Adaptive, QuadratureRule, RuleKind};
use crate::real::Real;
use crate::special::ln_factorial;

pub const MIN_LAGUERRE_ORDER: usize = 10;
/// Relative accuracy of Mellin and gap integrals.
pub const INTEGRAL_REL_TOL: f64 = 1e-11;
/// Panels below `2^LOWEST_OCTAVE` are integrated with the small-SNR limit.
const LOWEST_OCTAVE: i32 = -60;
const HIGHEST_OCTAVE: i32 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    NonCooperative,
    Cooperative,
}

impl Scenario {
    pub const BOTH: [Scenario; 2] = [Scenario::NonCooperative, Scenario::Cooperative];

    pub fn short_name(&self) -> &'static str {
        match self {
            Scenario::NonCooperative => "noncoop",
            Scenario::Cooperative => "coop",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noncoop" | "non_cooperative" => Ok(Scenario::NonCooperative),
            "coop" | "cooperative" => Ok(Scenario::Cooperative),
            _ => Err(invalid("scenario", format!("unknown scenario `{s}`"))),
        }
    }
}

fn check_rule<T: Real>(rule: &QuadratureRule<T>) -> Result<()> {
    if rule.kind != RuleKind::Laguerre {
        return Err(invalid("rule", "a Gauss–Laguerre rule is required"));
    }
    if rule.order < MIN_LAGUERRE_ORDER {
        return Err(invalid(
            "rule",
            format!("order must be at least {MIN_LAGUERRE_ORDER}, got {}", rule.order),
        ));
    }
    Ok(())
}

fn clamp_rate<T: Real>(v: T, log2m: T) -> T {
    v.max(T::zero()).min(log2m)
}

/// `sum_t w_t I(gamma_non v_t)`: the expectation of `I` under the
/// exponential law of the minimum SNR.
pub fn amr_noncoop<T: Real, C: InfoCurve<T> + ?Sized>(curve: &C, gamma_non: T, rule: &QuadratureRule<T>) -> Result<T> {
    check_rule(rule)?;
    if !(gamma_non > T::zero()) || !gamma_non.is_finite() {
        return Err(invalid("gamma_non", format!("must be positive, got {gamma_non}")));
    }
    let v = rule.integrate(|x| curve.mi(gamma_non * x));
    Ok(clamp_rate(v, curve.log2_order()))
}

/// `sum_t w_t I(gamma_min v_t) sum_l C psi_l v_t^(K+l-1) / Gamma(K+l)`: the
/// expectation of `I` under the MRC sum law, series truncated at the law's
/// `L`.
pub fn amr_coop<T: Real, C: InfoCurve<T> + ?Sized>(curve: &C, law: &MrcLaw<T>, rule: &QuadratureRule<T>) -> Result<T> {
    check_rule(rule)?;
    let g = law.gamma_min();
    // weights and series combined in logs: the truncated series is a
    // polynomial of degree K+L-1 and overflows at the outer nodes
    let v = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .filter(|(_, &w)| w > T::zero())
        .map(|(&x, &w)| curve.mi(g * x) * (w.ln() + law.ln_scaled_series(x)).exp())
        .sum();
    Ok(clamp_rate(v, curve.log2_order()))
}

/// `int_0^inf weight(x) mmse(x) dx` over octave panels split at the curve's
/// breakpoints. The first octave uses the `x -> 0` limit of the MMSE; the
/// sweep stops once an octave past `x = 1` adds less than `1e-18` of the
/// running total.
fn integrate_with_mmse<T: Real, C: InfoCurve<T> + ?Sized>(
    curve: &C,
    weight: impl Fn(T) -> T,
    lowest: impl Fn(T) -> T,
    from: T,
) -> Result<T> {
    let adaptive = Adaptive::new(T::lit(INTEGRAL_REL_TOL), T::lit(1e-300));
    let breaks = curve.breakpoints();
    let two = T::lit(2.0);
    let mut total = T::zero();
    let mut lo = if from > T::zero() {
        from
    } else {
        let edge = two.powi(LOWEST_OCTAVE);
        total += lowest(edge);
        edge
    };
    let f = |x: T| weight(x) * curve.mmse(x);
    let mut octave = 0;
    loop {
        let hi = lo * two;
        let mut part = T::zero();
        let mut a = lo;
        let start = breaks.partition_point(|&b| b <= lo);
        for &b in &breaks[start..] {
            if b >= hi {
                break;
            }
            part += adaptive.integrate(f, a, b)?;
            a = b;
        }
        part += adaptive.integrate(f, a, hi)?;
        total += part;
        if hi > T::one() && part.abs() <= T::lit(1e-18) * total.abs() {
            return Ok(total);
        }
        octave += 1;
        if octave > HIGHEST_OCTAVE - LOWEST_OCTAVE {
            return Err(Error::NonConvergence(format!(
                "MMSE tail still contributes {part} at x = {hi}"
            )));
        }
        lo = hi;
    }
}

/// Mellin transform `int_0^inf x^(t-1) mmse(x) dx` of the bit-convention
/// MMSE.
pub fn mellin_mmse<T: Real, C: InfoCurve<T> + ?Sized>(curve: &C, t: T) -> Result<T> {
    if !(t > T::zero()) || !t.is_finite() {
        return Err(invalid("t", format!("must be positive, got {t}")));
    }
    let m0 = curve.mmse(T::zero());
    integrate_with_mmse(curve, |x| x.powf(t - T::one()), |e| m0 * e.powf(t) / t, T::zero())
}

/// `int_from^inf x^(t-1) mmse(x) dx`.
pub fn mellin_tail<T: Real, C: InfoCurve<T> + ?Sized>(curve: &C, t: T, from: T) -> Result<T> {
    if !(from > T::zero()) {
        return Err(invalid("from", "must be positive"));
    }
    integrate_with_mmse(curve, |x| x.powf(t - T::one()), |_| T::zero(), from)
}

/// `log2 M - E[I(gamma)]` for the exponential minimum-SNR law, evaluated as
/// `int_0^inf F(x) mmse(x) dx` with `F` the law's CDF. Stays accurate where
/// the Laguerre form loses the small gap to rounding.
pub fn gap_noncoop<T: Real, C: InfoCurve<T> + ?Sized>(curve: &C, gamma_non: T) -> Result<T> {
    if !(gamma_non > T::zero()) {
        return Err(invalid("gamma_non", "must be positive"));
    }
    let m0 = curve.mmse(T::zero());
    integrate_with_mmse(
        curve,
        |x| -(-x / gamma_non).exp_m1(),
        |e| m0 * e * e / (T::lit(2.0) * gamma_non),
        T::zero(),
    )
}

/// Cooperative counterpart of [`gap_noncoop`], using the MRC law's CDF.
pub fn gap_coop<T: Real, C: InfoCurve<T> + ?Sized>(curve: &C, law: &MrcLaw<T>) -> Result<T> {
    integrate_with_mmse(curve, |x| law.cdf(x), |_| T::zero(), T::zero())
}

/// High-SNR template `log2 M - (d snr)^-G`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Asymptote<T> {
    pub array_gain: T,
    pub diversity_order: usize,
    pub log2_order: T,
}

impl<T: Real> Asymptote<T> {
    pub fn gap(&self, snr: T) -> T {
        (self.array_gain * snr).powi(-(self.diversity_order as i32))
    }

    pub fn value(&self, snr: T) -> T {
        self.log2_order - self.gap(snr)
    }
}

/// `d = 1 / (M[mmse; 2] sum_k 1 / (f^H R_k f))`, diversity order 1.
pub fn asymptote_noncoop<T: Real>(
    e: &ChannelEnsemble<T>,
    p: &PhaseVector<T>,
    mellin2: T,
    log2_order: T,
) -> Result<Asymptote<T>> {
    let q = e.quadratic_forms(p)?;
    let s: T = q.iter().map(|&v| T::one() / v).sum();
    Ok(Asymptote {
        array_gain: T::one() / (mellin2 * s),
        diversity_order: 1,
        log2_order,
    })
}

/// `d = (K! prod_k f^H R_k f / M[mmse; K+1])^(1/K)`, diversity order `K`.
/// The product uses the SNR-free quadratic forms, so the SNR enters only
/// through `(d snr)^-K`.
pub fn asymptote_coop<T: Real>(
    e: &ChannelEnsemble<T>,
    p: &PhaseVector<T>,
    mellin_k1: T,
    log2_order: T,
) -> Result<Asymptote<T>> {
    let q = e.quadratic_forms(p)?;
    let k = q.len();
    let ln_prod: T = q.iter().map(|v| v.ln()).sum();
    let ln_d = (ln_factorial::<T>(k) + ln_prod - mellin_k1.ln()) / T::from_usize_lossy(k);
    Ok(Asymptote {
        array_gain: ln_d.exp(),
        diversity_order: k,
        log2_order,
    })
}

/// One evaluated configuration, flattened for CSV/JSON output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmrReport {
    pub scenario: Scenario,
    pub snr_db: f64,
    pub amr_bits: f64,
    /// `log2 M - AMR` from the CDF form; accurate where `amr_bits` saturates.
    pub gap_bits: f64,
    pub asymptote_bits: f64,
    pub array_gain: f64,
    pub diversity_order: usize,
    pub mellin_const: f64,
    pub quadrature_order: usize,
    /// Last retained series index (cooperative only).
    pub series_truncation: Option<usize>,
    pub series_tail_bound: Option<f64>,
    pub gamma_non: Option<f64>,
    pub gammas: Vec<f64>,
    /// How the cooperative array gain reads the per-user SNR product.
    pub array_gain_convention: Option<String>,
}

pub const COOP_GAIN_CONVENTION: &str = "product of SNR-free quadratic forms f^H R_k f; snr enters only as (d snr)^-K";

/// AMR evaluation bound to one MI/MMSE curve and Laguerre rule, caching the
/// Mellin constants.
pub struct AmrEngine<'a, T, C: ?Sized> {
    curve: &'a C,
    rule: QuadratureRule<T>,
    series_tol: f64,
    mellin: Mutex<Vec<(usize, T)>>,
}

impl<'a, T: Real, C: InfoCurve<T> + ?Sized> AmrEngine<'a, T, C> {
    pub fn new(curve: &'a C, laguerre_order: usize, series_tol: f64) -> Result<Self> {
        let rule = gauss_laguerre(laguerre_order)?;
        check_rule(&rule)?;
        if !(series_tol > 0.0) {
            return Err(invalid("series_tol", "must be positive"));
        }
        Ok(Self {
            curve,
            rule,
            series_tol,
            mellin: Mutex::new(Vec::new()),
        })
    }

    pub fn curve(&self) -> &C {
        self.curve
    }

    pub fn rule(&self) -> &QuadratureRule<T> {
        &self.rule
    }

    pub fn series_tol(&self) -> f64 {
        self.series_tol
    }

    /// `M[mmse; t]` for integer `t`, computed once.
    pub fn mellin(&self, t: usize) -> Result<T> {
        if let Some(&(_, v)) = self.mellin.lock().expect("mellin cache").iter().find(|(k, _)| *k == t) {
            return Ok(v);
        }
        let v = mellin_mmse(self.curve, T::from_usize_lossy(t))?;
        self.mellin.lock().expect("mellin cache").push((t, v));
        Ok(v)
    }

    pub fn law(&self, gammas: &[T]) -> Result<MrcLaw<T>> {
        mrc_law(gammas, self.series_tol)
    }

    /// AMR of the ensemble at its own SNR.
    pub fn amr(&self, e: &ChannelEnsemble<T>, p: &PhaseVector<T>, scenario: Scenario) -> Result<T> {
        let gammas = e.effective_snrs(p)?;
        self.amr_from_gammas(&gammas, scenario)
    }

    pub fn amr_from_gammas(&self, gammas: &[T], scenario: Scenario) -> Result<T> {
        match scenario {
            Scenario::NonCooperative => {
                let law = min_snr_law(gammas)?;
                amr_noncoop(self.curve, law.gamma_non, &self.rule)
            }
            Scenario::Cooperative => {
                let law = self.law(gammas)?;
                amr_coop(self.curve, &law, &self.rule)
            }
        }
    }

    /// Exact convergence gap `log2 M - AMR` via the CDF form.
    pub fn gap(&self, e: &ChannelEnsemble<T>, p: &PhaseVector<T>, scenario: Scenario) -> Result<T> {
        let gammas = e.effective_snrs(p)?;
        match scenario {
            Scenario::NonCooperative => gap_noncoop(self.curve, min_snr_law(&gammas)?.gamma_non),
            Scenario::Cooperative => gap_coop(self.curve, &self.law(&gammas)?),
        }
    }

    pub fn asymptote(&self, e: &ChannelEnsemble<T>, p: &PhaseVector<T>, scenario: Scenario) -> Result<Asymptote<T>> {
        let log2m = self.curve.log2_order();
        match scenario {
            Scenario::NonCooperative => asymptote_noncoop(e, p, self.mellin(2)?, log2m),
            Scenario::Cooperative => asymptote_coop(e, p, self.mellin(e.users() + 1)?, log2m),
        }
    }

    pub fn report(&self, e: &ChannelEnsemble<T>, p: &PhaseVector<T>, scenario: Scenario) -> Result<AmrReport> {
        let gammas = e.effective_snrs(p)?;
        let asym = self.asymptote(e, p, scenario)?;
        let mellin_t = match scenario {
            Scenario::NonCooperative => 2,
            Scenario::Cooperative => e.users() + 1,
        };
        let (amr, gap, truncation, tail, gamma_non) = match scenario {
            Scenario::NonCooperative => {
                let g = min_snr_law(&gammas)?.gamma_non;
                let v = amr_noncoop(self.curve, g, &self.rule)?;
                (v, gap_noncoop(self.curve, g)?, None, None, Some(g.as_f64()))
            }
            Scenario::Cooperative => {
                let law = self.law(&gammas)?;
                let v = amr_coop(self.curve, &law, &self.rule)?;
                let gap = gap_coop(self.curve, &law)?;
                (v, gap, Some(law.truncation()), Some(law.tail_bound().as_f64()), None)
            }
        };
        Ok(AmrReport {
            scenario,
            snr_db: e.snr_db(),
            amr_bits: amr.as_f64(),
            gap_bits: gap.as_f64(),
            asymptote_bits: asym.value(e.snr()).as_f64(),
            array_gain: asym.array_gain.as_f64(),
            diversity_order: asym.diversity_order,
            mellin_const: self.mellin(mellin_t)?.as_f64(),
            quadrature_order: self.rule.order,
            series_truncation: truncation,
            series_tail_bound: tail,
            gamma_non,
            gammas: gammas.iter().map(|g| g.as_f64()).collect(),
            array_gain_convention: (scenario == Scenario::Cooperative).then(|| COOP_GAIN_CONVENTION.to_string()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `I(x) = 1 - e^-x`, `mmse = e^-x`: closed forms for every integral.
    struct ToyCurve;

    impl InfoCurve<f64> for ToyCurve {
        fn mi(&self, snr: f64) -> f64 {
            -(-snr).exp_m1()
        }
        fn ln_mmse(&self, snr: f64) -> f64 {
            -snr
        }
        fn log2_order(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn toy_closed_forms() {
        let rule = gauss_laguerre::<f64>(50).unwrap();
        // E[1 - e^{-g X}] for X ~ Exp(1) is g / (1 + g)
        let v = amr_noncoop(&ToyCurve, 2.0, &rule).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-14);
        // M[e^-x; t] = Gamma(t)
        assert!((mellin_mmse(&ToyCurve, 2.0).unwrap() - 1.0).abs() < 1e-10);
        assert!((mellin_mmse(&ToyCurve, 5.0).unwrap() - 24.0).abs() < 1e-9);
        assert!((mellin_tail(&ToyCurve, 2.0, 3.0).unwrap() - 4.0 * (-3.0f64).exp()).abs() < 1e-12);
        let g = gap_noncoop(&ToyCurve, 2.0).unwrap();
        assert!((g - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn coop_single_user_is_noncoop() {
        let rule = gauss_laguerre::<f64>(50).unwrap();
        let law = mrc_law(&[1.7], 1e-10).unwrap();
        let a = amr_coop(&ToyCurve, &law, &rule).unwrap();
        let b = amr_noncoop(&ToyCurve, 1.7, &rule).unwrap();
        assert!((a - b).abs() < 1e-15);
        let g = gap_coop(&ToyCurve, &law).unwrap();
        assert!((g - (1.0 - b)).abs() < 1e-10);
    }

    #[test]
    fn rule_and_argument_checks() {
        let short = gauss_laguerre::<f64>(5).unwrap();
        assert!(amr_noncoop(&ToyCurve, 1.0, &short).is_err());
        let rule = gauss_laguerre::<f64>(20).unwrap();
        assert!(amr_noncoop(&ToyCurve, 0.0, &rule).is_err());
        assert!(mellin_mmse(&ToyCurve, 0.0).is_err());
        assert!("both".parse::<Scenario>().is_err());
        assert_eq!("coop".parse::<Scenario>().unwrap(), Scenario::Cooperative);
        assert_eq!(Scenario::NonCooperative.to_string(), "noncoop");
    }
}
