//! Small dense linear algebra: complex vector helpers, Hermitian matrices
//! and a Jacobi eigensolver.

use num_complex::Complex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::real::Real;

/// `a^H b`.
pub fn inner<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

/// `Re(a^H b)`, the real inner product on `C^n` viewed as `R^2n`.
pub fn real_inner<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + x.re * y.re + x.im * y.im)
}

pub fn norm<T: Real>(a: &[Complex<T>]) -> T {
    a.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// Dense Hermitian matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix<T> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> HermitianMatrix<T> {
    /// Wraps row-major data. The Hermitian property is not enforced here;
    /// see [`HermitianMatrix::hermitian_residual`].
    pub fn from_row_major(n: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {n}x{n} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![Complex::new(T::zero(), T::zero()); n * n];
        for i in 0..n {
            data[i * n + i] = Complex::new(T::one(), T::zero());
        }
        Self { n, data }
    }

    /// Rank-one matrix `a a^H`.
    pub fn outer(a: &[Complex<T>]) -> Self {
        let n = a.len();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(a[i] * a[j].conj());
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.data[i * self.n + i].re).sum()
    }

    /// `max |a_ij - conj(a_ji)|`.
    pub fn hermitian_residual(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in i..self.n {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Replaces the matrix with its Hermitian part `(A + A^H) / 2`.
    pub fn symmetrize(&mut self) {
        let half = T::lit(0.5);
        for i in 0..self.n {
            for j in i..self.n {
                let v = (self.get(i, j) + self.get(j, i).conj()) * half;
                self.data[i * self.n + j] = v;
                self.data[j * self.n + i] = v.conj();
            }
        }
    }

    pub fn mul_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        debug_assert_eq!(x.len(), self.n);
        self.data
            .chunks_exact(self.n)
            .map(|row| {
                row.iter()
                    .zip(x)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// `Re(x^H A x)`; the imaginary part vanishes for Hermitian `A`.
    pub fn quad_form(&self, x: &[Complex<T>]) -> T {
        let ax = self.mul_vec(x);
        real_inner(x, &ax)
    }

    /// Real symmetric embedding `[[A, -B], [B, A]]` of `A + iB`.
    fn real_embedding(&self) -> Vec<T> {
        let n = self.n;
        let m = 2 * n;
        let mut out = vec![T::zero(); m * m];
        for i in 0..n {
            for j in 0..n {
                let z = self.get(i, j);
                out[i * m + j] = z.re;
                out[(i + n) * m + (j + n)] = z.re;
                out[(i + n) * m + j] = z.im;
                out[i * m + (j + n)] = -z.im;
            }
        }
        out
    }

    /// Eigenvalues in ascending order (each once).
    pub fn eigenvalues(&self) -> Vec<T> {
        let (vals, _) = jacobi_eigen(self.real_embedding(), 2 * self.n);
        let mut v = vals;
        v.sort_by(|a, b| a.partial_cmp(b).expect("NaN eigenvalue"));
        // the embedding doubles every eigenvalue
        v.into_iter().step_by(2).collect()
    }

    /// Applies `f` to the spectrum: `V f(L) V^H`.
    pub fn map_spectrum(&self, f: impl Fn(T) -> T) -> Self {
        let n = self.n;
        let m = 2 * n;
        let (vals, vecs) = jacobi_eigen(self.real_embedding(), m);
        let fv: Vec<T> = vals.iter().map(|&l| f(l)).collect();
        let mut out = vec![Complex::new(T::zero(), T::zero()); n * n];
        // f(M) keeps the block structure; read A from the top-left block and B
        // from the bottom-left block.
        for i in 0..n {
            for j in 0..n {
                let mut re = T::zero();
                let mut im = T::zero();
                for (k, &l) in fv.iter().enumerate() {
                    let vj = vecs[j * m + k];
                    re += vecs[i * m + k] * l * vj;
                    im += vecs[(i + n) * m + k] * l * vj;
                }
                out[i * n + j] = Complex::new(re, im);
            }
        }
        let mut r = Self { n, data: out };
        r.symmetrize();
        r
    }

    /// Projection onto the PSD cone by clipping negative eigenvalues.
    pub fn project_psd(&self) -> Self {
        self.map_spectrum(|l| if l > T::zero() { l } else { T::zero() })
    }

    /// Hermitian PSD square root.
    pub fn sqrt_psd(&self) -> Self {
        self.map_spectrum(|l| if l > T::zero() { l.sqrt() } else { T::zero() })
    }
}

impl<T: Real + Serialize> Serialize for HermitianMatrix<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[T; 2]>> = self
            .data
            .chunks_exact(self.n)
            .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for HermitianMatrix<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[T; 2]>> = Vec::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("correlation matrix is not square"));
        }
        let data = rows
            .into_iter()
            .flatten()
            .map(|[re, im]| Complex::new(re, im))
            .collect();
        HermitianMatrix::from_row_major(n, data).map_err(serde::de::Error::custom)
    }
}

/// Cyclic Jacobi eigen-decomposition of a real symmetric row-major matrix.
///
/// Returns eigenvalues and the row-major eigenvector matrix whose column `k`
/// pairs with eigenvalue `k`.
pub fn jacobi_eigen<T: Real>(mut a: Vec<T>, n: usize) -> (Vec<T>, Vec<T>) {
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let scale: T = a.iter().map(|x| *x * *x).sum::<T>();
    let tiny = T::epsilon() * T::epsilon() * scale;
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= tiny || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (apq + apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = T::zero();
                a[q * n + p] = T::zero();
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals = (0..n).map(|i| a[i * n + i]).collect();
    (vals, v)
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off` (implicit QL with Wilkinson shifts), ascending.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if off.len() + 1 != n {
        return Err(invalid("off", "off-diagonal must have length n - 1"));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::NonConvergence("tridiagonal QL".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).expect("NaN eigenvalue"));
    Ok(d)
}
