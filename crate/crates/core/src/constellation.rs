//! Finite input alphabets with equiprobable, unit-energy symbols.

use num_complex::Complex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::real::Real;

/// Inputs whose points move by more than this during renormalization are
/// flagged.
pub const RENORMALIZATION_FLAG_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Constellation<T> {
    points: Vec<Complex<T>>,
    label: String,
    d_min: T,
    renormalized: bool,
}

impl<T: Real> Constellation<T> {
    /// Square QAM with `order` points, `order` an even power of two.
    pub fn qam(order: usize) -> Result<Self> {
        let side = (order as f64).sqrt().round() as usize;
        if order < 4 || side * side != order || !order.is_power_of_two() {
            return Err(invalid(
                "order",
                format!("QAM order must be a square power of two (4, 16, 64, ...), got {order}"),
            ));
        }
        let scale = T::one() / T::lit(2.0 * (order as f64 - 1.0) / 3.0).sqrt();
        let level = |i: usize| T::lit(2.0 * i as f64 - (side as f64 - 1.0));
        let mut points = Vec::with_capacity(order);
        for i in 0..side {
            for q in 0..side {
                points.push(Complex::new(level(i) * scale, level(q) * scale));
            }
        }
        let d_min = T::lit(2.0) * scale;
        Ok(Self {
            points,
            label: format!("{order}-QAM"),
            d_min,
            renormalized: false,
        })
    }

    /// `order` points equally spaced on the unit circle, starting at angle 0.
    pub fn psk(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(invalid("order", format!("PSK order must be at least 2, got {order}")));
        }
        let step = T::lit(2.0 * std::f64::consts::PI / order as f64);
        let points: Vec<Complex<T>> = (0..order)
            .map(|m| Complex::from_polar(T::one(), step * T::from_usize_lossy(m)))
            .collect();
        let d_min = min_distance(&points);
        let label = match order {
            2 => "BPSK".to_string(),
            4 => "QPSK".to_string(),
            _ => format!("{order}-PSK"),
        };
        Ok(Self {
            points,
            label,
            d_min,
            renormalized: false,
        })
    }

    /// User-supplied alphabet, re-centred to zero mean and rescaled to unit
    /// average energy.
    pub fn from_points(points: Vec<Complex<T>>, label: impl Into<String>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("points", "a constellation needs at least two points"));
        }
        if points.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("points", "non-finite coordinate"));
        }
        let m = T::from_usize_lossy(points.len());
        let mean = points.iter().fold(Complex::new(T::zero(), T::zero()), |a, z| a + z) / m;
        let centred: Vec<Complex<T>> = points.iter().map(|z| z - mean).collect();
        let energy = centred.iter().map(|z| z.norm_sqr()).sum::<T>() / m;
        if energy <= T::zero() {
            return Err(invalid("points", "all points coincide"));
        }
        let scale = T::one() / energy.sqrt();
        let normalized: Vec<Complex<T>> = centred.iter().map(|z| z * scale).collect();
        let moved = points
            .iter()
            .zip(&normalized)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max);
        let d_min = min_distance(&normalized);
        if d_min <= T::zero() {
            return Err(invalid("points", "constellation points must be distinct"));
        }
        Ok(Self {
            points: normalized,
            label: label.into(),
            d_min,
            renormalized: moved > T::lit(RENORMALIZATION_FLAG_TOL),
        })
    }

    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Minimum pairwise distance.
    pub fn d_min(&self) -> T {
        self.d_min
    }

    /// True when [`Constellation::from_points`] had to move the input.
    pub fn was_renormalized(&self) -> bool {
        self.renormalized
    }

    /// `log2 M`, the rate ceiling in bits.
    pub fn log2_order(&self) -> T {
        T::from_usize_lossy(self.order()).log2()
    }

    pub fn mean(&self) -> Complex<T> {
        self.points
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |a, z| a + z)
            / T::from_usize_lossy(self.order())
    }

    pub fn mean_energy(&self) -> T {
        self.points.iter().map(|z| z.norm_sqr()).sum::<T>() / T::from_usize_lossy(self.order())
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str, label: impl Into<String>) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let pairs: Vec<[T; 2]> = serde_json::from_str(s)?;
        Self::from_points(pairs.into_iter().map(|[re, im]| Complex::new(re, im)).collect(), label)
    }
}

fn min_distance<T: Real>(points: &[Complex<T>]) -> T {
    let mut best = T::infinity();
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = (a - b).norm();
            if d < best {
                best = d;
            }
        }
    }
    best
}

/// Serialized as a JSON list of `[re, im]` pairs.
impl<T: Real + Serialize> Serialize for Constellation<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[T; 2]> = self.points.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for Constellation<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs: Vec<[T; 2]> = Vec::deserialize(d)?;
        Constellation::from_points(
            pairs.into_iter().map(|[re, im]| Complex::new(re, im)).collect(),
            "custom",
        )
        .map_err(serde::de::Error::custom)
    }
}
