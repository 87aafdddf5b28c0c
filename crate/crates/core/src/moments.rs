//! Exact moments of the normalized heat-kernel weight
//! `H^2 = (4 pi t)^{-n/2} exp(-|x|^2 / 4t)` and of the unit sphere.
//!
//! Every coordinate has variance `2t` under `H^2`, and `int H^2 = 1`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{for_each_multi_index, gauss_hermite};
use crate::spaceform::gamma_half;
use crate::tensor::{e_functional, Sym2, Tensor4};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianWeight {
    pub n: usize,
    pub t: f64,
}

impl GaussianWeight {
    pub fn new(n: usize, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
        }
        crate::tensor::check_dim(n)?;
        Ok(GaussianWeight { n, t })
    }

    /// Pointwise weight `H^2(x)`.
    pub fn density(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (4.0 * std::f64::consts::PI * self.t).powf(-(self.n as f64) / 2.0) * (-r2 / (4.0 * self.t)).exp()
    }
}

/// `int H^2 |x|^2 / t = 2n`.
pub fn moment_radial(w: &GaussianWeight) -> f64 {
    2.0 * w.n as f64
}

/// `int H^2 A_ij x^i x^j` (`2 tr(A) t`), or with the extra factor `|x|^2/t`
/// when `weighted` (`4 (n+2) tr(A) t`).
pub fn moment_quadratic(w: &GaussianWeight, a: &Sym2, weighted: bool) -> Result<f64> {
    if a.dim() != w.n {
        return Err(Error::DimensionMismatch { expected: w.n, got: a.dim() });
    }
    let base = 2.0 * a.trace() * w.t;
    Ok(if weighted { 2.0 * (w.n as f64 + 2.0) * base } else { base })
}

/// `int H^2 lambda_ijkl x^i x^j x^k x^l` (`4 E(lambda) t^2`), or with the extra
/// factor `|x|^2/t` when `weighted` (`8 (n+4) E(lambda) t^2`).
pub fn moment_quartic(w: &GaussianWeight, lambda: &Tensor4, weighted: bool) -> Result<f64> {
    if lambda.dim() != w.n {
        return Err(Error::DimensionMismatch { expected: w.n, got: lambda.dim() });
    }
    let base = 4.0 * e_functional(lambda) * w.t * w.t;
    Ok(if weighted { 2.0 * (w.n as f64 + 4.0) * base } else { base })
}

/// `int_{S^{n-1}} prod_i y_i^{k_i} dy`; `n` is the ambient dimension, the
/// length of `exponents`.
pub fn sphere_monomial(exponents: &[u32]) -> f64 {
    if exponents.iter().any(|k| k % 2 == 1) {
        return 0.0;
    }
    let n = exponents.len();
    let total: usize = exponents.iter().map(|&k| k as usize).sum();
    let num: f64 = exponents.iter().map(|&k| gamma_half(k as usize + 1)).product();
    2.0 * num / gamma_half(total + n)
}

/// `int H^2 prod_i x_i^{k_i} dx` by Isserlis pairing: each even power `2m`
/// contributes `(2m - 1)!! (2t)^m`.
pub fn wick_moment(w: &GaussianWeight, exponents: &[u32]) -> f64 {
    let mut out = 1.0;
    for &k in exponents {
        if k % 2 == 1 {
            return 0.0;
        }
        let mut pairings = 1.0;
        let mut j = k as i64 - 1;
        while j > 1 {
            pairings *= j as f64;
            j -= 2;
        }
        out *= pairings * (2.0 * w.t).powi(k as i32 / 2);
    }
    out
}

/// `int H^2 f` by product Gauss–Hermite in the scaled variable `x = 2 sqrt(t) z`;
/// exact for polynomials of degree below `2m`.
pub fn hermite_integral(w: &GaussianWeight, m: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let (z, wz) = gauss_hermite(m);
    let norm = std::f64::consts::PI.sqrt();
    let mut s = 0.0;
    let mut x = vec![0.0; w.n];
    for_each_multi_index(w.n, m, |idx| {
        let mut wt = 1.0;
        for (d, &i) in idx.iter().enumerate() {
            x[d] = 2.0 * w.t.sqrt() * z[i];
            wt *= wz[i] / norm;
        }
        s += wt * f(&x);
    });
    s
}

/// One closed-form moment identity compared with quadrature.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub identity: &'static str,
    pub n: usize,
    pub t: f64,
    pub trial: usize,
    pub closed_form: f64,
    pub quadrature: f64,
    /// Error relative to the integral of the absolute integrand scale.
    pub rel_error: f64,
}

/// Checks the radial, quadratic and quartic identities (both weightings) on
/// `trials` random symmetric `A` and random `lambda` with standard normal entries.
pub fn selftest(n: usize, t: f64, trials: usize, seed: u64) -> Result<Vec<IdentityCheck>> {
    let w = GaussianWeight::new(n, t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((n as u64) << 32) ^ t.to_bits());
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    // degree 6 integrands are exact at this order
    let m = 6;
    let r2 = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let mut out = Vec::new();
    let mut push = |identity, trial, closed: f64, quad: f64, scale: f64| {
        out.push(IdentityCheck {
            identity,
            n,
            t,
            trial,
            closed_form: closed,
            quadrature: quad,
            rel_error: (quad - closed).abs() / closed.abs().max(scale),
        });
    };
    let q = hermite_integral(&w, m, |x| r2(x) / t);
    push("radial", 0, moment_radial(&w), q, 1.0);
    for trial in 0..trials {
        let mut a = Sym2::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = normal();
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        let mut lambda = Tensor4::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        lambda.set(i, j, k, l, normal());
                    }
                }
            }
        }
        let sa = 2.0 * t * a.norm_sq().sqrt();
        let sl = 4.0 * t * t * lambda.norm_sq().sqrt();
        let qa = hermite_integral(&w, m, |x| a.quadratic_form(x));
        let qaw = hermite_integral(&w, m, |x| a.quadratic_form(x) * r2(x) / t);
        let ql = hermite_integral(&w, m, |x| lambda.contract_full(x));
        let qlw = hermite_integral(&w, m, |x| lambda.contract_full(x) * r2(x) / t);
        push("quadratic", trial, moment_quadratic(&w, &a, false)?, qa, sa);
        push("quadratic_weighted", trial, moment_quadratic(&w, &a, true)?, qaw, sa);
        push("quartic", trial, moment_quartic(&w, &lambda, false)?, ql, sl);
        push("quartic_weighted", trial, moment_quartic(&w, &lambda, true)?, qlw, sl);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;
    use std::f64::consts::PI;

    #[test]
    fn radial_identity_examples_and_quadrature() {
        for n in 2..=4 {
            for t in [0.01, 0.1] {
                let w = GaussianWeight::new(n, t).unwrap();
                let q = hermite_integral(&w, 12, |x| x.iter().map(|v| v * v).sum::<f64>() / t);
                assert!((q - moment_radial(&w)).abs() < 1e-12);
                let mass = hermite_integral(&w, 12, |_| 1.0);
                assert!((mass - 1.0).abs() < 1e-13);
            }
        }
        assert_eq!(moment_radial(&GaussianWeight::new(3, 0.2).unwrap()), 6.0);
        assert_eq!(moment_radial(&GaussianWeight::new(2, 0.2).unwrap()), 4.0);
    }

    #[test]
    fn quadratic_examples() {
        let w = GaussianWeight::new(3, 0.1).unwrap();
        let d = Sym2::identity(3);
        assert!((moment_quadratic(&w, &d, false).unwrap() - 0.6).abs() < 1e-15);
        assert!((moment_quadratic(&w, &d, true).unwrap() - 6.0).abs() < 1e-14);
        let tl = Sym2::from_row_major(3, vec![1.0, 2.0, 0.0, 2.0, -3.0, 1.0, 0.0, 1.0, 2.0]).unwrap();
        assert_eq!(moment_quadratic(&w, &tl, false).unwrap(), 0.0);
        assert_eq!(moment_quadratic(&w, &tl, true).unwrap(), 0.0);
        assert!(matches!(moment_quadratic(&w, &Sym2::identity(2), false), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn quartic_examples() {
        let w = GaussianWeight::new(2, 1.0).unwrap();
        let mut l = Tensor4::zeros(2);
        assert_eq!(moment_quartic(&w, &l, false).unwrap(), 0.0);
        l.set(0, 0, 0, 0, 1.0);
        assert_eq!(moment_quartic(&w, &l, false).unwrap(), 12.0);
        // independent check via the pairing formula
        assert_eq!(wick_moment(&w, &[4, 0]), 12.0);
        let ratio = moment_quartic(&w, &l, true).unwrap() / moment_quartic(&w, &l, false).unwrap();
        assert_eq!(ratio, 2.0 * (2.0 + 4.0));
    }

    #[test]
    fn quadratic_and_quartic_agree_with_pairings() {
        let n = 3;
        let w = GaussianWeight::new(n, 0.3).unwrap();
        let a = Sym2::from_fn(n, |i, j| (i as f64 + 1.0) * 0.3 - (j as f64) * 0.7 + 0.1 * (i * j) as f64);
        let l = Tensor4::from_fn(n, |i, j, k, m| ((i * 27 + j * 9 + k * 3 + m) as f64 * 0.61).sin() + 0.2);
        let mut quad = 0.0;
        let mut quad_w = 0.0;
        let mut quart = 0.0;
        let mut quart_w = 0.0;
        let exps = |idx: &[usize], extra: Option<usize>| {
            let mut e = vec![0u32; n];
            for &i in idx {
                e[i] += 1;
            }
            if let Some(s) = extra {
                e[s] += 2;
            }
            wick_moment(&w, &e)
        };
        for i in 0..n {
            for j in 0..n {
                quad += a.get(i, j) * exps(&[i, j], None);
                for s in 0..n {
                    quad_w += a.get(i, j) * exps(&[i, j], Some(s)) / w.t;
                }
                for k in 0..n {
                    for m in 0..n {
                        quart += l.get(i, j, k, m) * exps(&[i, j, k, m], None);
                        for s in 0..n {
                            quart_w += l.get(i, j, k, m) * exps(&[i, j, k, m], Some(s)) / w.t;
                        }
                    }
                }
            }
        }
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        assert!(rel(quad, moment_quadratic(&w, &a, false).unwrap()) < 1e-12);
        assert!(rel(quad_w, moment_quadratic(&w, &a, true).unwrap()) < 1e-12);
        assert!(rel(quart, moment_quartic(&w, &l, false).unwrap()) < 1e-12);
        assert!(rel(quart_w, moment_quartic(&w, &l, true).unwrap()) < 1e-12);
    }

    #[test]
    fn sphere_monomial_examples() {
        assert_eq!(sphere_monomial(&[1, 0, 0]), 0.0);
        assert!((sphere_monomial(&[4, 0, 0]) - 4.0 * PI / 5.0).abs() < 1e-14);
        let via_gamma = 3.0 * PI.powf(1.5) / (5.0 * gamma_half(5));
        assert!((sphere_monomial(&[4, 0, 0]) - via_gamma).abs() < 1e-14);
        for n in 2..=6 {
            let mut e = vec![0u32; n];
            e[0] = 2;
            let area = crate::quadrature::sphere_area(n);
            assert!((sphere_monomial(&e) - area / n as f64).abs() < 1e-13);
        }
        // y_i^4 = 3 y_i^2 y_j^2 on every sphere
        assert!((sphere_monomial(&[4, 0, 0, 0]) - 3.0 * sphere_monomial(&[2, 2, 0, 0])).abs() < 1e-14);
    }

    #[test]
    fn sphere_monomial_matches_angular_quadrature() {
        // (theta, phi) quadrature on S^2: GL in cos(theta), trapezoid in phi.
        let (c, wc) = gauss_legendre(20);
        let integrate = |e: [i32; 3]| {
            let mut s = 0.0;
            for (ci, wi) in c.iter().zip(&wc) {
                let si = (1.0 - ci * ci).sqrt();
                for j in 0..40 {
                    let phi = 2.0 * PI * j as f64 / 40.0;
                    let y = [si * phi.cos(), si * phi.sin(), *ci];
                    s += wi * (2.0 * PI / 40.0) * y[0].powi(e[0]) * y[1].powi(e[1]) * y[2].powi(e[2]);
                }
            }
            s
        };
        for e in [[4, 0, 0], [2, 2, 0], [2, 2, 2], [0, 6, 0], [3, 1, 0], [4, 2, 0]] {
            let want = sphere_monomial(&[e[0] as u32, e[1] as u32, e[2] as u32]);
            assert!((integrate(e) - want).abs() < 1e-13, "{e:?}");
        }
    }

    #[test]
    fn wick_examples() {
        let w = GaussianWeight::new(3, 0.5).unwrap();
        assert_eq!(wick_moment(&w, &[0, 0, 0]), 1.0);
        assert_eq!(wick_moment(&w, &[2, 0, 0]), 1.0);
        assert_eq!(wick_moment(&w, &[2, 1, 0]), 0.0);
        let w1 = GaussianWeight::new(3, 1.0).unwrap();
        assert_eq!(wick_moment(&w1, &[4, 0, 0]), 12.0);
        let q = hermite_integral(&w1, 10, |x| x[0].powi(4) * x[1].powi(2));
        assert!((q - wick_moment(&w1, &[4, 2, 0])).abs() < 1e-11);
    }

    #[test]
    fn selftest_passes_and_is_deterministic() {
        let a = selftest(3, 0.1, 4, 7).unwrap();
        assert_eq!(a.len(), 1 + 4 * 4);
        assert!(a.iter().all(|c| c.rel_error < 1e-10), "{a:?}");
        assert_eq!(a, selftest(3, 0.1, 4, 7).unwrap());
        assert_ne!(a[1].closed_form, selftest(3, 0.1, 4, 8).unwrap()[1].closed_form);
    }
}
