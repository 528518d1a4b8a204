//! Shape-preserving piecewise cubic Hermite interpolation (PCHIP).

use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Pchip<T> {
    x: Vec<T>,
    y: Vec<T>,
    d: Vec<T>,
}

impl<T: Real> Pchip<T> {
    /// `x` must be strictly increasing with at least two entries.
    pub fn new(x: Vec<T>, y: Vec<T>) -> Self {
        assert!(x.len() >= 2 && x.len() == y.len());
        let n = x.len();
        let h: Vec<T> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<T> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![T::zero(); n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
            return Self { x, y, d };
        }
        let two = T::lit(2.0);
        for k in 1..n - 1 {
            let (a, b) = (delta[k - 1], delta[k]);
            if a == T::zero() || b == T::zero() || (a > T::zero()) != (b > T::zero()) {
                d[k] = T::zero();
            } else {
                let w1 = two * h[k] + h[k - 1];
                let w2 = h[k] + two * h[k - 1];
                d[k] = (w1 + w2) / (w1 / a + w2 / b);
            }
        }
        d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Self { x, y, d }
    }

    pub fn knots(&self) -> &[T] {
        &self.x
    }

    pub fn values(&self) -> &[T] {
        &self.y
    }

    /// Evaluates inside `[x_0, x_last]`; outside it clamps to the end values.
    pub fn eval(&self, xq: T) -> T {
        let n = self.x.len();
        if xq <= self.x[0] {
            return self.y[0];
        }
        if xq >= self.x[n - 1] {
            return self.y[n - 1];
        }
        // first index with x > xq
        let hi = self.x.partition_point(|&v| v <= xq);
        let k = hi - 1;
        if self.x[k] == xq {
            return self.y[k];
        }
        let h = self.x[k + 1] - self.x[k];
        let t = (xq - self.x[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = -two * t3 + three * t2;
        let h11 = t3 - t2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

fn end_slope<T: Real>(h0: T, h1: T, del0: T, del1: T) -> T {
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let d = ((two * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    let sgn = |v: T| {
        if v > T::zero() {
            1
        } else if v < T::zero() {
            -1
        } else {
            0
        }
    };
    if sgn(d) != sgn(del0) {
        T::zero()
    } else if sgn(del0) != sgn(del1) && d.abs() > three * del0.abs() {
        three * del0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_knots_and_cubics_locally() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| v.tanh()).collect();
        let p = Pchip::new(x.clone(), y.clone());
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(p.eval(*a), *b);
        }
        assert!((p.eval(1.25) - 1.25f64.tanh()).abs() < 5e-3);
    }

    proptest! {
        #[test]
        fn monotone_data_gives_monotone_interpolant(steps in prop::collection::vec(0.0f64..1.0, 3..30), q in prop::collection::vec(0.0f64..1.0, 2..40)) {
            let x: Vec<f64> = (0..steps.len()).map(|i| i as f64).collect();
            let mut acc = 0.0;
            let y: Vec<f64> = steps.iter().map(|s| { acc += s; acc }).collect();
            let p = Pchip::new(x.clone(), y);
            let top = x[x.len() - 1];
            let mut qs: Vec<f64> = q.iter().map(|t| t * top).collect();
            qs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for w in qs.windows(2) {
                prop_assert!(p.eval(w[0]) <= p.eval(w[1]) + 1e-12);
            }
        }
    }
}
