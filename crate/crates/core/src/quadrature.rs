//! One-dimensional Gauss rules and the tensorized rules built from them.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if m == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = mf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if m == 1 {
            return (vec![0.0], vec![2.0]);
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(m: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(m);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    (x.iter().map(|v| c + h * v).collect(), w.iter().map(|v| h * v).collect())
}

/// Composite Gauss–Legendre with `panels` equal panels of `m` points each.
pub fn composite_legendre(m: usize, panels: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(m * panels);
    let mut ws = Vec::with_capacity(m * panels);
    let h = (b - a) / panels as f64;
    for p in 0..panels {
        let (x, w) = gauss_legendre_on(m, a + p as f64 * h, a + (p + 1) as f64 * h);
        xs.extend(x);
        ws.extend(w);
    }
    (xs, ws)
}

/// Gauss–Hermite nodes and weights for the weight `exp(-x^2)`.
pub fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let pim4 = PI.powf(-0.25);
    let mf = m as f64;
    let mut z = 0.0_f64;
    for i in 0..m.div_ceil(2) {
        z = match i {
            0 => (2.0 * mf + 1.0).sqrt() - 1.85575 * (2.0 * mf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * mf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..m {
                let p3 = p2;
                p2 = p1;
                let jf = (j + 1) as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * mf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[m - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[m - 1 - i] = w[i];
    }
    x.reverse();
    w.reverse();
    (x, w)
}

/// Which tensorized rule evaluates integrals against `pi^{-n/2} exp(-|z|^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    ProductHermite,
    RadialSphere,
}

/// Quadrature settings shared by the functional evaluators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rule: Rule,
    /// Points per axis (product rule) or per radial panel (radial rule).
    pub order: usize,
    /// Integration is restricted to `|z| <= c_trunc` in the scaled variable.
    pub c_trunc: f64,
    pub target_tol: f64,
    /// Gauss–Legendre points in the polar angle for the sphere rule; the
    /// azimuthal trapezoid uses twice as many.
    pub angular_order: usize,
    /// Directions for the Monte Carlo sphere rule (n >= 5).
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rule: Rule::ProductHermite,
            order: 40,
            c_trunc: 10.0,
            target_tol: 1e-12,
            angular_order: 16,
            mc_samples: 1_000_000,
            seed: 0,
        }
    }
}

impl QuadratureSpec {
    pub fn radial(order: usize, angular_order: usize) -> Self {
        QuadratureSpec { rule: Rule::RadialSphere, order, angular_order, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 10 {
            return Err(Error::InvalidQuadrature(format!("order {} is below 10", self.order)));
        }
        if !(self.c_trunc >= 8.0) {
            return Err(Error::InvalidQuadrature(format!("c_trunc {} is below 8", self.c_trunc)));
        }
        if !(self.target_tol > 0.0 && self.target_tol < 1.0) {
            return Err(Error::InvalidQuadrature(format!(
                "target_tol {} must lie in (0, 1)",
                self.target_tol
            )));
        }
        if self.rule == Rule::RadialSphere && self.angular_order < 2 {
            return Err(Error::InvalidQuadrature("angular_order must be at least 2".into()));
        }
        Ok(())
    }

    /// The cheaper companion rule whose disagreement is reported as the error estimate.
    pub fn coarsened(&self) -> QuadratureSpec {
        let mut q = self.clone();
        q.order = (self.order * 4 / 5).max(8);
        q.angular_order = (self.angular_order * 3 / 4).max(2);
        q.mc_samples = (self.mc_samples / 2).max(1);
        q.seed = self.seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
        q
    }
}

/// Weighted directions on the unit sphere `S^{n-1}`; weights sum to its area
/// (exactly for the deterministic rules).
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub dirs: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// True for the Monte Carlo rule.
    pub random: bool,
}

/// Area of the unit sphere `S^{n-1}`.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / crate::spaceform::gamma_half(n)
}

impl SphereRule {
    /// Deterministic rules for `n <= 4`, seeded Monte Carlo otherwise.
    pub fn new(n: usize, order: usize, mc_samples: usize, seed: u64) -> Result<Self> {
        let area = sphere_area(n);
        let m = order.max(1);
        let mut dirs = Vec::new();
        let mut weights = Vec::new();
        match n {
            2 => {
                let k = 2 * m;
                for j in 0..k {
                    let phi = 2.0 * PI * (j as f64 + 0.5) / k as f64;
                    dirs.push(vec![phi.cos(), phi.sin()]);
                    weights.push(2.0 * PI / k as f64);
                }
            }
            3 => {
                let (cs, wc) = gauss_legendre(m);
                let k = 2 * m;
                for (c, w) in cs.iter().zip(&wc) {
                    let s = (1.0 - c * c).sqrt();
                    for j in 0..k {
                        let phi = 2.0 * PI * (j as f64 + 0.5) / k as f64;
                        dirs.push(vec![s * phi.cos(), s * phi.sin(), *c]);
                        weights.push(w * 2.0 * PI / k as f64);
                    }
                }
            }
            4 => {
                // Hopf coordinates with s = sin^2(chi): the measure is ds dphi1 dphi2 / 2.
                let (ss, ws) = gauss_legendre_on(m, 0.0, 1.0);
                let k = 2 * m;
                let dphi = 2.0 * PI / k as f64;
                for (s, w) in ss.iter().zip(&ws) {
                    let (sc, cc) = (s.sqrt(), (1.0 - s).sqrt());
                    for a in 0..k {
                        let p1 = dphi * (a as f64 + 0.5);
                        for b in 0..k {
                            let p2 = dphi * (b as f64 + 0.25);
                            dirs.push(vec![cc * p1.cos(), cc * p1.sin(), sc * p2.cos(), sc * p2.sin()]);
                            weights.push(0.5 * w * dphi * dphi);
                        }
                    }
                }
            }
            5 | 6 => {
                if mc_samples == 0 {
                    return Err(Error::InvalidQuadrature("Monte Carlo sphere rule needs samples".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..mc_samples {
                    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                    v.iter_mut().for_each(|a| *a /= norm);
                    dirs.push(v);
                    weights.push(area / mc_samples as f64);
                }
                return Ok(SphereRule { dirs, weights, random: true });
            }
            _ => return Err(Error::UnsupportedDimension(n)),
        }
        Ok(SphereRule { dirs, weights, random: false })
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

/// Radial nodes on `[0, c]` for the weight `rho^{n-1} exp(-rho^2)`, folded into
/// the weights. Panels are narrower near the peak of the weight.
pub fn gaussian_radial_rule(n: usize, order: usize, c: f64) -> (Vec<f64>, Vec<f64>) {
    let mut cuts = vec![0.0];
    for b in [1.5, 3.0, 4.5, 6.0] {
        if b < c {
            cuts.push(b);
        }
    }
    cuts.push(c);
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for win in cuts.windows(2) {
        let (x, w) = gauss_legendre_on(order, win[0], win[1]);
        for (r, wr) in x.into_iter().zip(w) {
            ws.push(wr * r.powi(n as i32 - 1) * (-r * r).exp());
            xs.push(r);
        }
    }
    (xs, ws)
}

/// Iterates over all multi-indices of a tensor-product rule with `m` points per axis.
pub(crate) fn for_each_multi_index(n: usize, m: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; n];
    loop {
        f(&idx);
        let mut k = 0;
        loop {
            if k == n {
                return;
            }
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        for m in [1, 2, 5, 20, 41] {
            let (x, w) = gauss_legendre(m);
            for deg in 0..(2 * m) {
                let s: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((s - exact).abs() < 1e-13, "m={m} deg={deg}");
            }
        }
    }

    #[test]
    fn hermite_moments() {
        // int x^{2k} exp(-x^2) = Gamma(k + 1/2)
        for m in [10, 32, 40] {
            let (x, w) = gauss_hermite(m);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            let mut g = PI.sqrt();
            for k in 0..m {
                let s: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(2 * k as i32)).sum();
                assert!((s - g).abs() <= 1e-12 * g, "m={m} k={k}: {s} vs {g}");
                g *= k as f64 + 0.5;
            }
        }
    }

    #[test]
    fn sphere_rules_total_area_and_second_moment() {
        for n in 2..=4 {
            let rule = SphereRule::new(n, 8, 0, 0).unwrap();
            let area: f64 = rule.weights.iter().sum();
            assert!((area - sphere_area(n)).abs() < 1e-13 * area, "n={n}: {area} vs {}", sphere_area(n));
            for i in 0..n {
                let m2: f64 = rule.dirs.iter().zip(&rule.weights).map(|(d, w)| w * d[i] * d[i]).sum();
                assert!((m2 - sphere_area(n) / n as f64).abs() < 1e-13 * m2);
            }
        }
    }

    #[test]
    fn monte_carlo_sphere_is_seeded() {
        let a = SphereRule::new(5, 0, 1000, 7).unwrap();
        let b = SphereRule::new(5, 0, 1000, 7).unwrap();
        assert_eq!(a.dirs, b.dirs);
        assert!(a.random);
        let c = SphereRule::new(5, 0, 1000, 8).unwrap();
        assert_ne!(a.dirs, c.dirs);
    }

    #[test]
    fn radial_rule_gamma_moments() {
        // int_0^inf rho^{n-1+2k} e^{-rho^2} = Gamma((n+2k)/2)/2
        for n in 2..=6 {
            let (x, w) = gaussian_radial_rule(n, 24, 10.0);
            for k in 0..4 {
                let s: f64 = x.iter().zip(&w).map(|(r, wr)| wr * r.powi(2 * k)).sum();
                let exact = 0.5 * crate::spaceform::gamma_half(n + 2 * k as usize);
                assert!((s - exact).abs() < 1e-14 * exact.max(1.0), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn multi_index_count() {
        let mut c = 0;
        for_each_multi_index(3, 4, |_| c += 1);
        assert_eq!(c, 64);
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::default().validate().is_ok());
        let bad = QuadratureSpec { order: 4, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::InvalidQuadrature(_))));
        let bad = QuadratureSpec { c_trunc: 5.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
