//! Gaussian-profile test functions and the log-Sobolev and entropy functionals
//! evaluated on them in normal coordinates.
//!
//! All integrals use the scaled variable `x = 2 sqrt(t) z`, in which
//! `u^2 dmu = A^2 pi^{-n/2} exp(-|z|^2) eta^2 density dz`. The `log(4 pi t)`
//! terms of the functionals cancel analytically and are never formed.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::charts::{NormalChart, NormalSample};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, gauss_legendre_on, gaussian_radial_rule, QuadratureSpec, Rule, SphereRule};
use crate::spaceform;
use crate::tensor::Sym2;

/// Lower clamp for `1 + a(x,x) + alpha t`.
pub const POSITIVITY_FLOOR: f64 = 1e-300;

/// Product-rule nodes whose weight falls below this are skipped.
const NEGLIGIBLE_WEIGHT: f64 = 1e-40;

/// Coarse-versus-fine disagreement beyond which quadrature is declared unconverged.
const CONVERGENCE_LIMIT: f64 = 1e-6;

/// How the quadratic coefficient of `eta^2` is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum AMode {
    /// `a = Rc(p)/3`
    Optimal,
    Custom(Sym2),
}

/// `u = A (4 pi t)^{-n/4} exp(-|x|^2/8t) eta` with
/// `eta^2 = cutoff(|x|/r_s) max(1 + a(x,x) + alpha t, floor)`.
#[derive(Clone, Debug)]
pub struct TestFunction {
    pub nchart: NormalChart,
    pub a: Sym2,
    pub alpha: f64,
    pub support_radius: f64,
    /// Constant factor `A`; 1 for the class itself.
    pub amplitude: f64,
    /// Set when `1 + a(x,x)` reaches the floor somewhere on the support.
    pub positivity_clamped: bool,
}

/// Quintic smoothstep bump: 1 on `[0, 1/2]`, 0 on `[1, inf)`. Returns value and derivative.
pub fn cutoff(rho: f64) -> (f64, f64) {
    if rho <= 0.5 {
        (1.0, 0.0)
    } else if rho >= 1.0 {
        (0.0, 0.0)
    } else {
        let s = 2.0 * rho - 1.0;
        let v = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
        let d = 30.0 * s * s * (1.0 - s) * (1.0 - s);
        (1.0 - v, -2.0 * d)
    }
}

pub fn build_test_function(nchart: &NormalChart, mode: AMode, alpha: f64, r_s: f64) -> Result<TestFunction> {
    let n = nchart.dim();
    if !(r_s > 0.0) {
        return Err(Error::InvalidArgument(format!("support radius must be positive, got {r_s}")));
    }
    if r_s > nchart.radius() {
        return Err(Error::SupportTooLarge { support: r_s, limit: nchart.radius() });
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument("alpha must be finite".into()));
    }
    let a = match mode {
        AMode::Optimal => nchart.center_curvature()?.rc.scale(1.0 / 3.0),
        AMode::Custom(a) => {
            if a.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: a.dim() });
            }
            a
        }
    };
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, a.as_slice()));
    let lowest = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let positivity_clamped = 1.0 + lowest.min(0.0) * r_s * r_s <= POSITIVITY_FLOOR;
    Ok(TestFunction { nchart: nchart.clone(), a, alpha, support_radius: r_s, amplitude: 1.0, positivity_clamped })
}

impl TestFunction {
    pub fn dim(&self) -> usize {
        self.nchart.dim()
    }

    pub fn scaled(&self, c: f64) -> TestFunction {
        TestFunction { amplitude: self.amplitude * c, ..self.clone() }
    }

    /// Largest `t` for which `exp(-r_s^2 / 16 t)`, the Gaussian weight of the
    /// region where the cutoff acts, stays below `tol`.
    pub fn max_time(&self, tol: f64) -> f64 {
        self.support_radius * self.support_radius / (16.0 * (1.0 / tol).ln())
    }

    /// `eta^2` and its gradient in normal coordinates.
    pub fn eta_sq(&self, x: &[f64], t: f64) -> (f64, Vec<f64>) {
        let n = x.len();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (c, dc) = cutoff(r / self.support_radius);
        if c == 0.0 {
            return (0.0, vec![0.0; n]);
        }
        let ax = self.a.apply(x);
        let raw = 1.0 + x.iter().zip(&ax).map(|(a, b)| a * b).sum::<f64>() + self.alpha * t;
        let clamped = raw <= POSITIVITY_FLOOR;
        let q = if clamped { POSITIVITY_FLOOR } else { raw };
        let grad = (0..n)
            .map(|i| {
                let dq = if clamped { 0.0 } else { 2.0 * ax[i] };
                let radial = if r > 0.0 { dc * x[i] / (r * self.support_radius) } else { 0.0 };
                c * dq + q * radial
            })
            .collect();
        (c * q, grad)
    }

    /// `u(x, t)`.
    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        let n = self.dim() as f64;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let (q, _) = self.eta_sq(x, t);
        self.amplitude * (4.0 * PI * t).powf(-n / 4.0) * (-r2 / (8.0 * t)).exp() * q.sqrt()
    }

    /// Euclidean gradient of `u` in normal coordinates.
    pub fn gradient(&self, x: &[f64], t: f64) -> Vec<f64> {
        let u = self.value(x, t);
        let (q, dq) = self.eta_sq(x, t);
        if q == 0.0 {
            return vec![0.0; x.len()];
        }
        x.iter().zip(&dq).map(|(xi, di)| u * (-xi / (4.0 * t) + di / (2.0 * q))).collect()
    }

    fn check_time(&self, t: f64, q: &QuadratureSpec) -> Result<()> {
        let limit = self.max_time(q.target_tol);
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
        }
        if t > limit {
            return Err(Error::TimeTooLarge { t, limit });
        }
        Ok(())
    }
}

/// The four integrals of the functionals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Components {
    /// `int |grad u|^2 dmu`
    pub dirichlet: f64,
    /// `int u^2 log u^2 dmu`
    pub entropy: f64,
    /// `int u^2 dmu`
    pub mass: f64,
    /// `int Sc u^2 dmu`, only for the entropy functional with curvature term.
    pub scalar_curvature_term: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FunctionalValue {
    pub value: f64,
    pub components: Components,
    pub quad_error_estimate: f64,
}

impl FunctionalValue {
    /// The log-Sobolev value assembled term by term from the components.
    pub fn reconstruct_l(&self, n: usize, t: f64) -> f64 {
        let c = &self.components;
        let nf = n as f64;
        4.0 * t * c.dirichlet - c.entropy + c.mass * c.mass.ln() - (nf + 0.5 * nf * (4.0 * PI * t).ln()) * c.mass
    }
}

/// Raw weighted sums: mass, reduced entropy `int u^2 (-|z|^2 + log eta^2)`,
/// `4t int |grad u|^2`, and `int Sc u^2`.
#[derive(Clone, Copy, Debug, Default)]
struct Sums {
    mass: f64,
    ent: f64,
    dir: f64,
    scal: f64,
}

impl Sums {
    fn add(mut self, o: Sums) -> Sums {
        self.mass += o.mass;
        self.ent += o.ent;
        self.dir += o.dir;
        self.scal += o.scal;
        self
    }
}

/// Contribution of one node with weight `w` against `pi^{-n/2} exp(-|z|^2) dz`.
fn node(tf: &TestFunction, t: f64, x: &[f64], z2: f64, w: f64, s: &NormalSample) -> Sums {
    let (q, dq) = tf.eta_sq(x, t);
    if q == 0.0 {
        return Sums::default();
    }
    let c = w * s.density * q;
    let st = t.sqrt();
    let omega: Vec<f64> = x.iter().zip(&dq).map(|(xi, di)| -xi / (2.0 * st) + st * di / q).collect();
    Sums {
        mass: c,
        ent: c * (-z2 + q.ln()),
        dir: c * s.inv_metric.norm_sq(x, &omega),
        scal: c * s.sc.unwrap_or(0.0),
    }
}

fn integrate(tf: &TestFunction, t: f64, q: &QuadratureSpec, with_sc: bool) -> Result<Sums> {
    let n = tf.dim();
    let norm = PI.powf(-(n as f64) / 2.0);
    let st = t.sqrt();
    let r_s = tf.support_radius;
    let amp2 = tf.amplitude * tf.amplitude;
    let sums = match q.rule {
        Rule::ProductHermite => {
            let (zs, wz) = gauss_hermite(q.order);
            let m = q.order;
            let partials: Vec<Result<Sums>> = (0..m)
                .into_par_iter()
                .map(|first| {
                    let mut acc = Sums::default();
                    let mut idx = vec![0usize; n];
                    idx[0] = first;
                    let mut x = vec![0.0; n];
                    let inner = m.pow(n as u32 - 1);
                    for flat in 0..inner {
                        let mut rem = flat;
                        for slot in idx.iter_mut().skip(1) {
                            *slot = rem % m;
                            rem /= m;
                        }
                        let w: f64 = idx.iter().map(|&i| wz[i]).product::<f64>() * norm;
                        if w < NEGLIGIBLE_WEIGHT {
                            continue;
                        }
                        let z2: f64 = idx.iter().map(|&i| zs[i] * zs[i]).sum();
                        if z2 > q.c_trunc * q.c_trunc {
                            continue;
                        }
                        for (xi, &i) in x.iter_mut().zip(&idx) {
                            *xi = 2.0 * st * zs[i];
                        }
                        if 4.0 * t * z2 >= r_s * r_s {
                            continue;
                        }
                        let s = tf.nchart.sample(&x, with_sc)?;
                        acc = acc.add(node(tf, t, &x, z2, w, &s));
                    }
                    Ok(acc)
                })
                .collect();
            let mut total = Sums::default();
            for p in partials {
                total = total.add(p?);
            }
            total
        }
        Rule::RadialSphere => {
            let (rho, wr) = gaussian_radial_rule(n, q.order, q.c_trunc);
            let sphere = SphereRule::new(n, q.angular_order, q.mc_samples, q.seed)?;
            let keep: Vec<usize> = (0..rho.len()).filter(|&i| 2.0 * st * rho[i] < r_s).collect();
            let radii: Vec<f64> = keep.iter().map(|&i| 2.0 * st * rho[i]).collect();
            let partials: Vec<Result<Sums>> = sphere
                .dirs
                .par_iter()
                .zip(&sphere.weights)
                .map(|(theta, wd)| {
                    let samples = tf.nchart.sample_ray(theta, &radii, with_sc)?;
                    let mut acc = Sums::default();
                    for ((&i, r), s) in keep.iter().zip(&radii).zip(&samples) {
                        let x: Vec<f64> = theta.iter().map(|v| v * r).collect();
                        acc = acc.add(node(tf, t, &x, rho[i] * rho[i], wd * wr[i] * norm, s));
                    }
                    Ok(acc)
                })
                .collect();
            let mut total = Sums::default();
            for p in partials {
                total = total.add(p?);
            }
            total
        }
    };
    Ok(Sums { mass: amp2 * sums.mass, ent: amp2 * sums.ent, dir: amp2 * sums.dir, scal: amp2 * sums.scal })
}

/// Log-Sobolev value and components from the raw sums.
fn assemble(tf: &TestFunction, t: f64, s: &Sums, with_sc: bool) -> FunctionalValue {
    let nf = tf.dim() as f64;
    let log_amp = 2.0 * tf.amplitude.abs().ln();
    let m = s.mass;
    let l = s.dir - s.ent + m * m.ln() - log_amp * m - nf * m;
    let entropy = s.ent + (log_amp - 0.5 * nf * (4.0 * PI * t).ln()) * m;
    let value = if with_sc { l + t * s.scal } else { l };
    FunctionalValue {
        value,
        components: Components {
            dirichlet: s.dir / (4.0 * t),
            entropy,
            mass: m,
            scalar_curvature_term: with_sc.then_some(s.scal),
        },
        quad_error_estimate: 0.0,
    }
}

fn evaluate(tf: &TestFunction, t: f64, q: &QuadratureSpec, with_sc: bool) -> Result<FunctionalValue> {
    q.validate()?;
    tf.check_time(t, q)?;
    let fine = assemble(tf, t, &integrate(tf, t, q, with_sc)?, with_sc);
    let coarse = assemble(tf, t, &integrate(tf, t, &q.coarsened(), with_sc)?, with_sc);
    let err = (fine.value - coarse.value)
        .abs()
        .max((fine.components.mass - coarse.components.mass).abs() * t);
    let limit = CONVERGENCE_LIMIT * fine.components.mass.abs().max(1.0);
    if !(err <= limit) {
        return Err(Error::QuadratureNotConverged { estimate: err, tolerance: limit });
    }
    Ok(FunctionalValue { quad_error_estimate: err, ..fine })
}

/// The log-Sobolev functional at time `t`.
pub fn eval_l(tf: &TestFunction, t: f64, q: &QuadratureSpec) -> Result<FunctionalValue> {
    evaluate(tf, t, q, false)
}

/// The log-Sobolev functional plus `t int Sc u^2`.
pub fn eval_w(tf: &TestFunction, t: f64, q: &QuadratureSpec) -> Result<FunctionalValue> {
    evaluate(tf, t, q, true)
}

/// `int u^2 log u^2 dmu`.
pub fn entropy_integral(tf: &TestFunction, t: f64, q: &QuadratureSpec) -> Result<f64> {
    Ok(evaluate(tf, t, q, false)?.components.entropy)
}

/// Volume of the geodesic ball of radius `r` about the centre.
pub fn ball_volume(nchart: &NormalChart, r: f64, q: &QuadratureSpec) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    if r > nchart.radius() {
        return Err(Error::SupportTooLarge { support: r, limit: nchart.radius() });
    }
    q.validate()?;
    let fine = ball_volume_with(nchart, r, q.order, q.angular_order, q.mc_samples, q.seed)?;
    let c = q.coarsened();
    let coarse = ball_volume_with(nchart, r, c.order, c.angular_order, c.mc_samples, c.seed)?;
    let err = (fine - coarse).abs();
    let limit = CONVERGENCE_LIMIT * fine.abs();
    if !(err <= limit) {
        return Err(Error::QuadratureNotConverged { estimate: err, tolerance: limit });
    }
    Ok(fine)
}

fn ball_volume_with(nchart: &NormalChart, r: f64, order: usize, angular: usize, mc: usize, seed: u64) -> Result<f64> {
    let n = nchart.dim();
    let (rs, wr) = gauss_legendre_on(order, 0.0, r);
    let sphere = SphereRule::new(n, angular, mc, seed)?;
    let parts: Vec<Result<f64>> = sphere
        .dirs
        .par_iter()
        .zip(&sphere.weights)
        .map(|(theta, wd)| {
            let samples = nchart.sample_ray(theta, &rs, false)?;
            let s: f64 = samples
                .iter()
                .zip(rs.iter().zip(&wr))
                .map(|(smp, (ri, wi))| wi * ri.powi(n as i32 - 1) * smp.density)
                .sum();
            Ok(wd * s)
        })
        .collect();
    parts.into_iter().sum()
}

/// `Vol(B(p, r)) / Vol(B^K(r))` at each radius.
pub fn bishop_gromov_ratio(nchart: &NormalChart, k: f64, radii: &[f64], q: &QuadratureSpec) -> Result<Vec<f64>> {
    let n = nchart.dim();
    radii
        .iter()
        .map(|&r| {
            if k > 0.0 && r >= spaceform::radius_cap(k) {
                return Err(Error::InvalidArgument(format!("radius {r} exceeds the model cap")));
            }
            Ok(ball_volume(nchart, r, q)? / spaceform::ball_volume(n, k, r))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{build_normal_chart, make_chart, ModelSpec};

    fn flat(n: usize) -> NormalChart {
        build_normal_chart(&make_chart(&ModelSpec::flat(n, 5.0)).unwrap(), &vec![0.0; n], 4.0).unwrap()
    }

    fn sphere(n: usize, k: f64) -> NormalChart {
        build_normal_chart(&make_chart(&ModelSpec::space_form(n, k, 2.0)).unwrap(), &vec![0.0; n], 1.8).unwrap()
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.3), (1.0, 0.0));
        assert_eq!(cutoff(1.2), (0.0, 0.0));
        let (v, d) = cutoff(0.75);
        assert!((v - 0.5).abs() < 1e-15);
        let h = 1e-6;
        let fd = (cutoff(0.75 + h).0 - cutoff(0.75 - h).0) / (2.0 * h);
        assert!((fd - d).abs() < 1e-8);
    }

    #[test]
    fn build_examples() {
        let tf = build_test_function(&flat(3), AMode::Optimal, 0.0, 2.0).unwrap();
        assert_eq!(tf.a, Sym2::zeros(3));
        let tf = build_test_function(&sphere(3, 1.0), AMode::Optimal, 0.0, 1.5).unwrap();
        assert!(tf.a.sub(&Sym2::scaled_identity(3, 2.0 / 3.0)).unwrap().norm_sq() < 1e-28);
        assert!(matches!(
            build_test_function(&sphere(3, 1.0), AMode::Optimal, 0.0, 1.9),
            Err(Error::SupportTooLarge { .. })
        ));
        let neg = build_test_function(&flat(3), AMode::Custom(Sym2::scaled_identity(3, -1.0)), 0.0, 2.0).unwrap();
        assert!(neg.positivity_clamped);
    }

    #[test]
    fn flat_gaussian_saturates() {
        let tf = build_test_function(&flat(3), AMode::Optimal, 0.0, 2.0).unwrap();
        let v = eval_l(&tf, 1e-3, &QuadratureSpec::default()).unwrap();
        assert!(v.value.abs() < 1e-12, "{}", v.value);
        assert!((v.components.mass - 1.0).abs() < 1e-12);
        let w = eval_w(&tf, 1e-3, &QuadratureSpec::default()).unwrap();
        assert_eq!(w.value, v.value);
    }

    #[test]
    fn cutoff_tail_decays_exponentially_in_inverse_time() {
        let r_s = 1.0;
        let tf = build_test_function(&flat(2), AMode::Custom(Sym2::zeros(2)), 0.0, r_s).unwrap();
        // a loose target admits times where the tail is visible
        let q = QuadratureSpec { target_tol: 0.1, ..QuadratureSpec::radial(48, 8) };
        let ts = [0.02, 0.015, 0.01, 0.0075];
        let pts: Vec<(f64, f64)> = ts
            .iter()
            .map(|&t| {
                let mass = eval_l(&tf, t, &q).unwrap().components.mass;
                assert!(mass < 1.0);
                (1.0 / t, (1.0 - mass).ln())
            })
            .collect();
        assert!(pts.windows(2).all(|w| w[1].1 < w[0].1));
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / 4.0;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / 4.0;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        // u^2 loses mass between |x| = r_s/2 and r_s, a Gaussian of variance 2t per axis
        assert!(slope < -r_s * r_s / 16.0 && slope > -r_s * r_s / 4.0, "{slope}");
    }

    #[test]
    fn reconstruction_and_scale_covariance() {
        let tf = build_test_function(&sphere(3, 1.0), AMode::Optimal, -2.0, 1.5).unwrap();
        let t = 2e-3;
        let q = QuadratureSpec::default();
        let v = eval_l(&tf, t, &q).unwrap();
        assert!((v.reconstruct_l(3, t) - v.value).abs() < 1e-13);
        // the functionals cancel O(1) terms, so roundoff is measured against them
        for c in [2.0, 0.7] {
            let scale = c * c * 3.0 * v.components.mass;
            let vc = eval_l(&tf.scaled(c), t, &q).unwrap();
            assert!((vc.value - c * c * v.value).abs() < 1e-12 * scale);
            let wc = eval_w(&tf.scaled(c), t, &q).unwrap();
            let w = eval_w(&tf, t, &q).unwrap();
            assert!((wc.value - c * c * w.value).abs() < 1e-12 * scale);
            let ec = vc.components.entropy;
            let want = c * c * (v.components.entropy + v.components.mass * (c * c).ln());
            assert!((ec - want).abs() < 1e-12 * want.abs());
        }
    }

    #[test]
    fn sphere_slope() {
        let tf = build_test_function(&sphere(3, 1.0), AMode::Optimal, -2.0, 1.5).unwrap();
        let t = 5e-4;
        let v = eval_l(&tf, t, &QuadratureSpec::default()).unwrap();
        // -6 t - 2 t^2
        assert!((v.value / t + 6.0).abs() < 2.0 * t * 1.5, "{}", v.value / t);
        let w = eval_w(&tf, t, &QuadratureSpec::default()).unwrap();
        assert!((w.value / (t * t) + 2.0).abs() < 0.2, "{}", w.value / (t * t));
        // normalized class: mass 1 + O(t^2)
        assert!((v.components.mass - 1.0).abs() < 10.0 * t * t);
    }

    #[test]
    fn entropy_examples() {
        let tf = build_test_function(&flat(3), AMode::Custom(Sym2::zeros(3)), 0.0, 4.0).unwrap();
        let e = entropy_integral(&tf, 0.01, &QuadratureSpec::default()).unwrap();
        let want = -1.5 - 1.5 * (0.04 * PI).ln();
        assert!((e - want).abs() < 1e-12);

        let tf = build_test_function(&sphere(3, 1.0), AMode::Optimal, 0.0, 1.5).unwrap();
        let t = 1e-4;
        let v = eval_l(&tf, t, &QuadratureSpec::default()).unwrap();
        let c = v.components;
        let slope = (c.entropy + 1.5 + 1.5 * (4.0 * PI * t).ln() * c.mass) / t;
        assert!((slope + 1.0).abs() < 0.01, "{slope}");
    }

    #[test]
    fn time_admissibility() {
        let tf = build_test_function(&flat(3), AMode::Optimal, 0.0, 1.0).unwrap();
        assert!(matches!(eval_l(&tf, 0.01, &QuadratureSpec::default()), Err(Error::TimeTooLarge { .. })));
        assert!(eval_l(&tf, 0.002, &QuadratureSpec::default()).is_ok());
    }

    #[test]
    fn radial_rule_agrees_with_product_rule() {
        let nc = sphere(3, 1.0);
        let a = Sym2::from_row_major(3, vec![0.5, 0.1, 0.0, 0.1, 0.2, -0.1, 0.0, -0.1, 0.9]).unwrap();
        let tf = build_test_function(&nc, AMode::Custom(a), 0.3, 1.5).unwrap();
        let p = eval_w(&tf, 1e-3, &QuadratureSpec::default()).unwrap();
        let r = eval_w(&tf, 1e-3, &QuadratureSpec::radial(30, 16)).unwrap();
        assert!((p.value - r.value).abs() < 1e-13, "{} {}", p.value, r.value);
    }

    #[test]
    fn ball_volumes() {
        let q = QuadratureSpec::radial(20, 8);
        let v = ball_volume(&flat(3), 1.0, &q).unwrap();
        assert!((v - 4.0 * PI / 3.0).abs() < 1e-13);
        let v = ball_volume(&sphere(3, 1.0), 1.0, &q).unwrap();
        let want = PI * (2.0 - 2f64.sin());
        assert!((v / want - 1.0).abs() < 1e-9);
        for (n, k) in [(2, 1.0), (4, -1.0), (4, 0.5)] {
            let v = ball_volume(&sphere(n, k), 0.7, &q).unwrap();
            assert!((v / spaceform::ball_volume(n, k, 0.7) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bishop_gromov_examples() {
        let q = QuadratureSpec::radial(20, 8);
        let radii = [0.2, 0.5, 0.9, 1.3];
        for r in bishop_gromov_ratio(&sphere(3, 1.0), 1.0, &radii, &q).unwrap() {
            assert!((r - 1.0).abs() < 1e-9);
        }
        let dec = bishop_gromov_ratio(&flat(3), -1.0, &radii, &q).unwrap();
        assert!(dec.windows(2).all(|w| w[1] < w[0]));
        for r in bishop_gromov_ratio(&flat(3), 0.0, &radii, &q).unwrap() {
            assert!((r - 1.0).abs() < 1e-12);
        }
    }
}
