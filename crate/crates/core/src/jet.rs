//! Second-order forward-mode differentiation in up to six variables.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::tensor::MAX_DIM;

/// Scalar type the metric models are written against, so one definition
/// serves plain evaluation and exact first/second derivatives.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + Send
    + Sync
{
    fn value(&self) -> f64;
    /// A constant of the same shape as `self`.
    fn lift(&self, c: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, k: i32) -> Self;
}

impl Real for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
}

/// Truncated Taylor jet: value, gradient and Hessian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub n: usize,
    pub v: f64,
    pub g: [f64; MAX_DIM],
    pub h: [[f64; MAX_DIM]; MAX_DIM],
}

impl Jet {
    pub fn constant(n: usize, v: f64) -> Self {
        Jet { n, v, g: [0.0; MAX_DIM], h: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    /// The coordinate function `x_i` evaluated at `x`.
    pub fn variable(n: usize, x: f64, i: usize) -> Self {
        let mut j = Self::constant(n, x);
        j.g[i] = 1.0;
        j
    }

    /// All coordinate functions at the point `x`.
    pub fn point(x: &[f64]) -> Vec<Jet> {
        let n = x.len();
        (0..n).map(|i| Jet::variable(n, x[i], i)).collect()
    }

    /// Compose with a scalar function given its value and first two derivatives.
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        let mut out = Jet::constant(self.n, f);
        for i in 0..self.n {
            out.g[i] = df * self.g[i];
            for j in 0..self.n {
                out.h[i][j] = df * self.h[i][j] + d2f * self.g[i] * self.g[j];
            }
        }
        out
    }

    fn zip(self, o: Jet, mut f: impl FnMut(f64, f64) -> f64) -> Jet {
        let mut out = Jet::constant(self.n, f(self.v, o.v));
        for i in 0..self.n {
            out.g[i] = f(self.g[i], o.g[i]);
            for j in 0..self.n {
                out.h[i][j] = f(self.h[i][j], o.h[i][j]);
            }
        }
        out
    }

    fn map(self, mut f: impl FnMut(f64) -> f64) -> Jet {
        let mut out = Jet::constant(self.n, f(self.v));
        for i in 0..self.n {
            out.g[i] = f(self.g[i]);
            for j in 0..self.n {
                out.h[i][j] = f(self.h[i][j]);
            }
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        self.zip(o, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self.zip(o, |a, b| a - b)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut out = Jet::constant(self.n, self.v * o.v);
        for i in 0..self.n {
            out.g[i] = self.g[i] * o.v + self.v * o.g[i];
            for j in 0..self.n {
                out.h[i][j] = self.h[i][j] * o.v
                    + self.v * o.h[i][j]
                    + self.g[i] * o.g[j]
                    + self.g[j] * o.g[i];
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let inv = o.chain(1.0 / o.v, -1.0 / (o.v * o.v), 2.0 / (o.v * o.v * o.v));
        self * inv
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.map(|a| -a)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.v += c;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, c: f64) -> Jet {
        self.v -= c;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.map(|a| a * c)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, c: f64) -> Jet {
        self.map(|a| a / c)
    }
}

impl Real for Jet {
    fn value(&self) -> f64 {
        self.v
    }
    fn lift(&self, c: f64) -> Self {
        Jet::constant(self.n, c)
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn sinh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(s, c, s)
    }
    fn cosh(self) -> Self {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(c, s, c)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }
    fn powi(self, k: i32) -> Self {
        let kf = k as f64;
        let d2 = if k == 0 || k == 1 { 0.0 } else { kf * (kf - 1.0) * self.v.powi(k - 2) };
        let d1 = if k == 0 { 0.0 } else { kf * self.v.powi(k - 1) };
        self.chain(self.v.powi(k), d1, d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f<R: Real>(x: &[R]) -> R {
        // exercises every primitive
        let a = x[0] * x[1] + x[2].sin() * x[0].exp();
        let b = (x[1] * x[1] + 1.5).sqrt() / (x[2].cosh() + x[0].cos());
        let c = (x[0] * x[0] + 2.0).ln() * x[1].sinh() - x[2].powi(3) * 0.5;
        a + b - c
    }

    #[test]
    fn jet_matches_finite_differences() {
        let x0 = [0.3, -0.7, 1.1];
        let j = f(&Jet::point(&x0));
        assert!((j.v - f(&x0)).abs() < 1e-15);
        let h = 1e-4;
        for i in 0..3 {
            let mut p = x0;
            let mut m = x0;
            p[i] += h;
            m[i] -= h;
            let d = (f(&p) - f(&m)) / (2.0 * h);
            assert!((d - j.g[i]).abs() < 1e-7, "grad {i}");
            for k in 0..3 {
                let shift = |a: f64, b: f64| {
                    let mut y = x0;
                    y[i] += a;
                    y[k] += b;
                    f(&y)
                };
                let d2 = (shift(h, h) - shift(h, -h) - shift(-h, h) + shift(-h, -h)) / (4.0 * h * h);
                assert!((d2 - j.h[i][k]).abs() < 1e-5, "hess {i}{k}: {d2} vs {}", j.h[i][k]);
            }
        }
    }

    #[test]
    fn hessian_is_symmetric_and_exact_for_polynomials() {
        let j = {
            let x = Jet::point(&[2.0, 3.0]);
            x[0] * x[0] * x[1] - x[1].powi(2) / 4.0
        };
        assert_eq!(j.v, 12.0 - 2.25);
        assert_eq!(j.g[..2], [12.0, 4.0 - 1.5]);
        assert_eq!(j.h[0][1], 4.0);
        assert_eq!(j.h[1][0], 4.0);
        assert_eq!(j.h[0][0], 6.0);
        assert_eq!(j.h[1][1], -0.5);
    }
}
