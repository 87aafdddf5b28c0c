//! Isoperimetric profiles of model spaces and Schwarz symmetrization of test
//! functions onto them.
//!
//! Superlevel sets `{u >= s}` of the Gaussian-profile test functions are
//! star-shaped in normal coordinates, so every level is described by one
//! radius per direction. With `lambda = log(max u / s)` the level radius solves
//! `phi(rho) = lambda` for the increasing function
//! `phi(rho) = rho^2/8t - log(eta^2(rho theta)/eta^2(0)) / 2`, and surface
//! integrals follow from the coarea formula along rays:
//! `int_{u = s} f dsigma = int_S f |grad u| density R^{n-1} / |d_rho u| dtheta`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charts::NormalChart;
use crate::error::{Error, Result};
use crate::functionals::{ball_volume as chart_ball_volume, eval_l, TestFunction};
use crate::quadrature::{composite_legendre, gauss_legendre_on, QuadratureSpec, SphereRule};
use crate::spaceform;

/// Isoperimetric profile of the `n`-dimensional model space of curvature `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceFormProfile {
    pub n: usize,
    pub k: f64,
    /// Total volume for `k > 0`, infinite otherwise.
    pub beta_max: f64,
}

impl SpaceFormProfile {
    pub fn new(n: usize, k: f64) -> Result<Self> {
        crate::tensor::check_dim(n)?;
        if !k.is_finite() {
            return Err(Error::InvalidArgument(format!("curvature must be finite, got {k}")));
        }
        Ok(SpaceFormProfile { n, k, beta_max: spaceform::total_volume(n, k) })
    }

    /// Radius of the geodesic ball of volume `beta`.
    pub fn radius(&self, beta: f64) -> Result<f64> {
        spaceform::radius_for_volume(self.n, self.k, beta)
    }

    /// Boundary area of the geodesic ball of volume `beta`.
    pub fn area(&self, beta: f64) -> Result<f64> {
        Ok(spaceform::sphere_area(self.n, self.k, self.radius(beta)?))
    }
}

pub fn iso_profile(n: usize, k: f64, beta: f64) -> Result<f64> {
    SpaceFormProfile::new(n, k)?.area(beta)
}

/// Symmetrized rearrangement `u_bar(r)` on the model space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub n: usize,
    pub k: f64,
    /// Increasing radii, starting at 0.
    pub grid: Vec<f64>,
    /// Nonincreasing values; `u_bar = 0` beyond the last radius.
    pub values: Vec<f64>,
    /// Chart volume of `{u >= values[i]}`.
    pub volumes: Vec<f64>,
}

impl RadialProfile {
    /// Interpolates `log u_bar` linearly in `r^2`, which is exact for Gaussians.
    pub fn value(&self, r: f64) -> f64 {
        let last = self.grid.len() - 1;
        if r > self.grid[last] {
            return 0.0;
        }
        let i = self.grid.partition_point(|&g| g < r);
        if i == 0 {
            return self.values[0];
        }
        let (r0, r1) = (self.grid[i - 1], self.grid[i]);
        let w = (r * r - r0 * r0) / (r1 * r1 - r0 * r0);
        (self.values[i - 1].ln() * (1.0 - w) + self.values[i].ln() * w).exp()
    }

    /// Largest gap between chart volumes and model-ball volumes over the ladder.
    pub fn equimeasure_error(&self) -> f64 {
        self.grid
            .iter()
            .zip(&self.volumes)
            .map(|(&r, &v)| (spaceform::ball_volume(self.n, self.k, r) - v).abs())
            .fold(0.0, f64::max)
    }
}

/// Data of one level set `{u = s}`, `s = max u * exp(-lambda)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LevelData {
    pub lambda: f64,
    pub level: f64,
    /// `Vol({u >= s})`
    pub volume: f64,
    /// `d Vol / d lambda`
    pub volume_rate: f64,
    pub area: f64,
    /// `int_{u = s} |grad u| dsigma`
    pub gradient_integral: f64,
    /// `int_{u = s} 1/|grad u| dsigma`
    pub inverse_gradient_integral: f64,
}

const VOLUME_ORDER: usize = 16;
const MONOTONE_SCAN: usize = 256;

/// Level-set solver for one test function at fixed `t`.
struct Levels<'a> {
    tf: &'a TestFunction,
    t: f64,
    ln_q0: f64,
}

impl<'a> Levels<'a> {
    fn new(tf: &'a TestFunction, t: f64) -> Result<Self> {
        let (q0, _) = tf.eta_sq(&vec![0.0; tf.dim()], t);
        if !(q0 > 0.0) {
            return Err(Error::LevelSetDegenerate("test function vanishes at the centre".into()));
        }
        Ok(Levels { tf, t, ln_q0: q0.ln() })
    }

    /// `phi` and `d phi / d rho` along `theta`; infinite outside the support.
    fn phi(&self, theta: &[f64], rho: f64) -> (f64, f64) {
        let x: Vec<f64> = theta.iter().map(|v| v * rho).collect();
        let (q, dq) = self.tf.eta_sq(&x, self.t);
        if q <= 0.0 {
            return (f64::INFINITY, f64::INFINITY);
        }
        let dq_r: f64 = theta.iter().zip(&dq).map(|(a, b)| a * b).sum();
        (rho * rho / (8.0 * self.t) - 0.5 * (q.ln() - self.ln_q0), rho / (4.0 * self.t) - 0.5 * dq_r / q)
    }

    fn check_monotone(&self, theta: &[f64]) -> Result<()> {
        let r_s = self.tf.support_radius;
        let mut prev = 0.0;
        for j in 1..=MONOTONE_SCAN {
            let (p, _) = self.phi(theta, r_s * j as f64 / MONOTONE_SCAN as f64);
            if !p.is_finite() {
                break;
            }
            if !(p > prev) {
                return Err(Error::LevelSetDegenerate(format!(
                    "u is not decreasing along direction {theta:?} near radius {}",
                    r_s * j as f64 / MONOTONE_SCAN as f64
                )));
            }
            prev = p;
        }
        Ok(())
    }

    /// Radius where `phi = lambda` along `theta`.
    fn radius(&self, theta: &[f64], lambda: f64) -> Result<f64> {
        let (mut lo, mut hi) = (0.0, self.tf.support_radius);
        let mut rho = (8.0 * self.t * lambda).sqrt().min(0.5 * hi);
        for _ in 0..200 {
            let (p, dp) = self.phi(theta, rho);
            if p > lambda {
                hi = rho;
            } else {
                lo = rho;
            }
            let mut next = rho - (p - lambda) / dp;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - rho).abs() <= 1e-15 * rho.max(1e-300) || hi - lo <= 1e-15 * hi {
                return Ok(next);
            }
            rho = next;
        }
        Err(Error::LevelSetDegenerate(format!("level radius for lambda = {lambda} did not converge")))
    }

    /// Per-direction contributions at each `lambda` (increasing).
    fn ray(&self, theta: &[f64], lambdas: &[f64]) -> Result<Vec<[f64; 5]>> {
        let n = theta.len();
        self.check_monotone(theta)?;
        let radii: Vec<f64> = lambdas.iter().map(|&l| self.radius(theta, l)).collect::<Result<_>>()?;
        let mut nodes = Vec::with_capacity(radii.len() * (VOLUME_ORDER + 1));
        let mut weights = Vec::with_capacity(nodes.capacity());
        let mut prev = 0.0;
        for &r in &radii {
            let (x, w) = gauss_legendre_on(VOLUME_ORDER, prev, r);
            nodes.extend(x);
            weights.extend(w);
            nodes.push(r);
            weights.push(f64::NAN);
            prev = r;
        }
        let samples = self.tf.nchart.sample_ray(theta, &nodes, false)?;
        let mut out = Vec::with_capacity(radii.len());
        let mut volume = 0.0;
        let mut it = nodes.iter().zip(&weights).zip(&samples);
        for &r in &radii {
            for ((rho, w), s) in it.by_ref() {
                if w.is_nan() {
                    let (_, dphi) = self.phi(theta, r);
                    if !(dphi > 0.0 && dphi.is_finite()) {
                        return Err(Error::LevelSetDegenerate(format!("gradient vanishes on the level at radius {r}")));
                    }
                    let x: Vec<f64> = theta.iter().map(|v| v * r).collect();
                    let (q, dq) = self.tf.eta_sq(&x, self.t);
                    let g: Vec<f64> = (0..n).map(|i| -x[i] / (4.0 * self.t) + dq[i] / (2.0 * q)).collect();
                    let grad_ln = s.inv_metric.norm_sq(&x, &g);
                    let rate = s.density * r.powi(n as i32 - 1) / dphi;
                    out.push([volume, rate, grad_ln.sqrt() * rate, grad_ln * rate, rate]);
                    break;
                }
                volume += w * s.density * rho.powi(n as i32 - 1);
            }
        }
        Ok(out)
    }

    fn sweep(&self, lambdas: &[f64], q: &QuadratureSpec) -> Result<Vec<LevelData>> {
        if lambdas.is_empty() || lambdas.iter().any(|l| !(*l > 0.0)) || lambdas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("level ladder must be positive and strictly increasing in lambda".into()));
        }
        let n = self.tf.dim();
        let rule = SphereRule::new(n, q.angular_order, q.mc_samples, q.seed)?;
        let per_dir: Vec<Vec<[f64; 5]>> =
            rule.dirs.par_iter().map(|d| self.ray(d, lambdas)).collect::<Result<_>>()?;
        let max_u = self.tf.value(&vec![0.0; n], self.t);
        Ok(lambdas
            .iter()
            .enumerate()
            .map(|(k, &lambda)| {
                let mut acc = [0.0; 5];
                for (w, contrib) in rule.weights.iter().zip(&per_dir) {
                    for (a, c) in acc.iter_mut().zip(&contrib[k]) {
                        *a += w * c;
                    }
                }
                let level = max_u * (-lambda).exp();
                LevelData {
                    lambda,
                    level,
                    volume: acc[0],
                    volume_rate: acc[1],
                    area: acc[2],
                    gradient_integral: level * acc[3],
                    inverse_gradient_integral: acc[4] / level,
                }
            })
            .collect())
    }
}

/// Geometric ladder from `max u (1 - 1e-3)` down to `max u * 1e-6`.
fn geometric_ladder(levels: usize) -> Vec<f64> {
    let top = -(1.0 - 1e-3f64).ln();
    let bottom = 1e6f64.ln();
    let ratio = (bottom / top).powf(1.0 / (levels - 1) as f64);
    (0..levels).map(|i| top * ratio.powi(i as i32)).collect()
}

pub const MIN_LEVELS: usize = 64;

/// Equimeasurable radial rearrangement of `u(., t)` onto the model space of curvature `k`.
pub fn symmetrize(tf: &TestFunction, t: f64, k: f64, levels: usize, q: &QuadratureSpec) -> Result<RadialProfile> {
    if levels < MIN_LEVELS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_LEVELS} levels, got {levels}")));
    }
    let n = tf.dim();
    let model = SpaceFormProfile::new(n, k)?;
    let lv = Levels::new(tf, t)?;
    let data = lv.sweep(&geometric_ladder(levels), q)?;
    let max_u = tf.value(&vec![0.0; n], t);
    let mut grid = vec![0.0];
    let mut values = vec![max_u];
    let mut volumes = vec![0.0];
    for d in &data {
        if !(d.volume > *volumes.last().expect("nonempty")) {
            return Err(Error::LevelSetDegenerate(format!("level volume did not increase at s = {}", d.level)));
        }
        grid.push(model.radius(d.volume)?);
        values.push(d.level);
        volumes.push(d.volume);
    }
    Ok(RadialProfile { n, k, grid, values, volumes })
}

/// Mass, entropy and Dirichlet energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Integrals {
    pub mass: f64,
    /// `int u^2 log u^2`
    pub entropy: f64,
    /// `int |grad u|^2`
    pub dirichlet: f64,
}

impl Integrals {
    /// The log-Sobolev functional assembled from the integrals.
    pub fn log_sobolev(&self, n: usize, t: f64) -> f64 {
        let nf = n as f64;
        4.0 * t * self.dirichlet - self.entropy + self.mass * self.mass.ln()
            - (nf + 0.5 * nf * (4.0 * PI * t).ln()) * self.mass
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetrizationReport {
    /// From the chart quadrature of the functionals.
    pub chart: Integrals,
    /// Of the rearrangement on the model space, by layer-cake integration.
    pub model: Integrals,
    /// Chart Dirichlet energy recomputed by coarea on the same ladder.
    pub chart_dirichlet_coarea: f64,
    pub chart_log_sobolev: f64,
    pub model_log_sobolev: f64,
    /// Largest relative gap between chart and model volumes over the profile ladder.
    pub equimeasure_error: f64,
    pub profile: RadialProfile,
}

const LAYER_PANELS: usize = 12;
const LAYER_ORDER: usize = 16;
/// Upper end of `sqrt(lambda)`; the mass below `max u * e^{-36}` is negligible.
const LAYER_SQRT_LAMBDA_MAX: f64 = 6.0;

/// Integrals of the rearrangement via `u_bar^2 dmu_K = s^2 dV`, on a
/// Gauss–Legendre ladder in `sqrt(lambda)`.
fn model_integrals(tf: &TestFunction, t: f64, k: f64, q: &QuadratureSpec) -> Result<(Integrals, f64)> {
    let n = tf.dim();
    let model = SpaceFormProfile::new(n, k)?;
    let (rho, w) = composite_legendre(LAYER_ORDER, LAYER_PANELS, 0.0, LAYER_SQRT_LAMBDA_MAX);
    let lambdas: Vec<f64> = rho.iter().map(|r| r * r).collect();
    let data = Levels::new(tf, t)?.sweep(&lambdas, q)?;
    let mut out = Integrals { mass: 0.0, entropy: 0.0, dirichlet: 0.0 };
    let mut chart_dirichlet = 0.0;
    for ((d, r), wr) in data.iter().zip(&rho).zip(&w) {
        // d lambda = 2 rho d rho
        let dl = 2.0 * r * wr;
        let s2 = d.level * d.level;
        out.mass += dl * s2 * d.volume_rate;
        out.entropy += dl * s2 * 2.0 * d.level.ln() * d.volume_rate;
        let area = spaceform::sphere_area(n, k, model.radius(d.volume)?);
        out.dirichlet += dl * area * area * s2 / d.volume_rate;
        chart_dirichlet += dl * d.level * d.gradient_integral;
    }
    Ok((out, chart_dirichlet))
}

/// Symmetrizes and compares every term of the log-Sobolev functional on both sides.
pub fn symmetrization_chain(tf: &TestFunction, t: f64, k: f64, levels: usize, q: &QuadratureSpec) -> Result<SymmetrizationReport> {
    let n = tf.dim();
    let profile = symmetrize(tf, t, k, levels, q)?;
    let (model, chart_dirichlet_coarea) = model_integrals(tf, t, k, q)?;
    let c = eval_l(tf, t, q)?.components;
    let chart = Integrals { mass: c.mass, entropy: c.entropy, dirichlet: c.dirichlet };
    let equimeasure_error = profile
        .grid
        .iter()
        .zip(&profile.volumes)
        .skip(1)
        .map(|(&r, &v)| (spaceform::ball_volume(n, k, r) - v).abs() / v)
        .fold(0.0, f64::max);
    Ok(SymmetrizationReport {
        chart_log_sobolev: chart.log_sobolev(n, t),
        model_log_sobolev: model.log_sobolev(n, t),
        chart,
        model,
        chart_dirichlet_coarea,
        equimeasure_error,
        profile,
    })
}

/// `(4t int |grad u_bar|^2 dmu_K, 4t int |grad u|^2 dmu)`.
pub fn polya_szego_check(tf: &TestFunction, t: f64, k: f64, q: &QuadratureSpec) -> Result<(f64, f64)> {
    let (model, _) = model_integrals(tf, t, k, q)?;
    let chart = eval_l(tf, t, q)?.components.dirichlet;
    Ok((4.0 * t * model.dirichlet, 4.0 * t * chart))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolderStep {
    /// `Area(u = s)^2`
    pub area_sq: f64,
    /// `int |grad u| dsigma * int 1/|grad u| dsigma`
    pub product: f64,
    pub inverse_gradient_integral: f64,
    /// `-d Vol({u >= s}) / ds` by fourth-order differences of volumes.
    pub inverse_gradient_fd: f64,
    pub volume: f64,
}

pub fn holder_step_check(tf: &TestFunction, t: f64, s: f64, q: &QuadratureSpec) -> Result<HolderStep> {
    let n = tf.dim();
    let max_u = tf.value(&vec![0.0; n], t);
    if !(s > 0.0 && s < max_u) {
        return Err(Error::InvalidArgument(format!("level {s} must lie strictly between 0 and max u = {max_u}")));
    }
    let h = 1e-3 * s.min(max_u - s);
    let levels = [s + 2.0 * h, s + h, s, s - h, s - 2.0 * h];
    let lambdas: Vec<f64> = levels.iter().map(|l| (max_u / l).ln()).collect();
    let d = Levels::new(tf, t)?.sweep(&lambdas, q)?;
    // volumes at s + 2h, s + h, s - h, s - 2h
    let fd = (-d[4].volume + 8.0 * d[3].volume - 8.0 * d[1].volume + d[0].volume) / (12.0 * h);
    let c = &d[2];
    Ok(HolderStep {
        area_sq: c.area * c.area,
        product: c.gradient_integral * c.inverse_gradient_integral,
        inverse_gradient_integral: c.inverse_gradient_integral,
        inverse_gradient_fd: fd,
        volume: c.volume,
    })
}

/// Volume and boundary area of the geodesic ball of radius `r` about the
/// chart centre. A probe of the chart's isoperimetric profile over balls only.
pub fn geodesic_ball_probe(nchart: &NormalChart, r: f64, q: &QuadratureSpec) -> Result<(f64, f64)> {
    let n = nchart.dim();
    let volume = chart_ball_volume(nchart, r, q)?;
    let rule = SphereRule::new(n, q.angular_order, q.mc_samples, q.seed)?;
    let dens: Vec<f64> = rule
        .dirs
        .par_iter()
        .map(|d| Ok(nchart.sample_ray(d, &[r], false)?[0].density))
        .collect::<Result<_>>()?;
    let area = rule.weights.iter().zip(&dens).map(|(w, d)| w * d).sum::<f64>() * r.powi(n as i32 - 1);
    Ok((volume, area))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{build_normal_chart, make_chart, ModelSpec};
    use crate::functionals::{build_test_function, AMode};
    use crate::spaceform::unit_ball_volume;
    use crate::tensor::Sym2;

    fn flat_tf(a: Sym2) -> TestFunction {
        let c = make_chart(&ModelSpec::flat(3, 2.0)).unwrap();
        let nc = build_normal_chart(&c, &[0.0; 3], 1.0).unwrap();
        build_test_function(&nc, AMode::Custom(a), 0.0, 1.0).unwrap()
    }

    fn aniso() -> Sym2 {
        Sym2::from_fn(3, |i, j| [[2.0, 0.3, 0.0], [0.3, -0.5, 0.1], [0.0, 0.1, 0.8]][i][j])
    }

    #[test]
    fn profile_examples() {
        assert!((iso_profile(3, 0.0, 4.0 * PI / 3.0).unwrap() - 4.0 * PI).abs() < 1e-12);
        for n in 2..=5 {
            for beta in [0.1f64, 1.0, 10.0] {
                let w = unit_ball_volume(n);
                let want = n as f64 * w.powf(1.0 / n as f64) * beta.powf((n - 1) as f64 / n as f64);
                assert!((iso_profile(n, 0.0, beta).unwrap() - want).abs() < 1e-12 * want);
            }
        }
        // hemisphere of S^3: volume pi (2r - sin 2r) at r = pi/2
        let hemi = PI * (2.0 * PI / 2.0 - PI.sin());
        assert!((iso_profile(3, 1.0, hemi).unwrap() - 4.0 * PI).abs() < 1e-10);
        assert!(matches!(iso_profile(3, 1.0, 2.0 * PI * PI), Err(Error::VolumeTooLarge { .. })));
        assert!(matches!(iso_profile(3, 0.0, 0.0), Err(Error::NonPositiveVolume(_))));
    }

    #[test]
    fn profile_increasing_and_concave_in_scaled_volume() {
        for k in [0.0, 1.0] {
            let n = 3;
            let xs: Vec<f64> = (1..40).map(|i| 0.05 * i as f64).collect();
            let ys: Vec<f64> = xs.iter().map(|x| iso_profile(n, k, x.powf(1.5)).unwrap()).collect();
            for w in ys.windows(3) {
                assert!(w[1] > w[0]);
                assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-12);
            }
        }
    }

    #[test]
    fn radial_flat_profile_is_reproduced() {
        let tf = flat_tf(Sym2::zeros(3));
        let t = 2e-3;
        let p = symmetrize(&tf, t, 0.0, 64, &QuadratureSpec::default()).unwrap();
        assert!(p.values.windows(2).all(|w| w[1] <= w[0]));
        for r in [0.0, 0.03, 0.1, 0.2, 0.3] {
            let want = tf.value(&[r, 0.0, 0.0], t);
            assert!((p.value(r) - want).abs() < 1e-9 * tf.value(&[0.0; 3], t), "{r}");
        }
        assert!(p.equimeasure_error() < 1e-12);
        assert!(symmetrize(&tf, t, 0.0, 10, &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn radial_cases_have_equal_dirichlet_energy() {
        let q = QuadratureSpec::default();
        let (lhs, rhs) = polya_szego_check(&flat_tf(Sym2::zeros(3)), 2e-3, 0.0, &q).unwrap();
        assert!((lhs - rhs).abs() < 1e-9 * rhs, "{lhs} {rhs}");
        let c = make_chart(&ModelSpec::space_form(3, 1.0, 2.0)).unwrap();
        let nc = build_normal_chart(&c, &[0.0; 3], 1.0).unwrap();
        let tf = build_test_function(&nc, AMode::Optimal, 0.0, 1.0).unwrap();
        let (lhs, rhs) = polya_szego_check(&tf, 2e-3, 1.0, &q).unwrap();
        assert!((lhs - rhs).abs() < 1e-9 * rhs, "{lhs} {rhs}");
    }

    #[test]
    fn anisotropic_chain() {
        let tf = flat_tf(aniso());
        let t = 2e-3;
        let rep = symmetrization_chain(&tf, t, 0.0, 64, &QuadratureSpec::default()).unwrap();
        assert!((rep.model.mass - rep.chart.mass).abs() < 1e-8 * rep.chart.mass, "{rep:?}");
        assert!((rep.model.entropy - rep.chart.entropy).abs() < 1e-8 * rep.chart.entropy.abs());
        assert!((rep.chart_dirichlet_coarea - rep.chart.dirichlet).abs() < 1e-8 * rep.chart.dirichlet);
        assert!(rep.model.dirichlet < rep.chart.dirichlet);
        assert!(rep.chart_log_sobolev >= rep.model_log_sobolev);
        assert!(rep.equimeasure_error < 1e-10);
    }

    #[test]
    fn holder_step() {
        let t = 2e-3;
        let q = QuadratureSpec::default();
        let radial = flat_tf(Sym2::zeros(3));
        let s = 0.3 * radial.value(&[0.0; 3], t);
        let h = holder_step_check(&radial, t, s, &q).unwrap();
        assert!((h.area_sq - h.product).abs() < 1e-10 * h.product);
        assert!((h.inverse_gradient_integral - h.inverse_gradient_fd).abs() < 1e-7 * h.inverse_gradient_fd);

        let tf = flat_tf(aniso());
        let s = 0.3 * tf.value(&[0.0; 3], t);
        let h = holder_step_check(&tf, t, s, &q).unwrap();
        assert!(h.area_sq < h.product * (1.0 - 1e-6), "{h:?}");
        assert!((h.inverse_gradient_integral - h.inverse_gradient_fd).abs() < 1e-7 * h.inverse_gradient_fd);
        // the level set bounds at least as much area as the model ball of equal volume
        assert!(iso_profile(3, 0.0, h.volume).unwrap().powi(2) <= h.area_sq * (1.0 + 1e-10));
    }

    #[test]
    fn ball_probe_on_sphere() {
        let c = make_chart(&ModelSpec::space_form(3, 1.0, 2.0)).unwrap();
        let nc = build_normal_chart(&c, &[0.2, 0.0, -0.1], 0.7).unwrap();
        let q = QuadratureSpec::default();
        let (v, a) = geodesic_ball_probe(&nc, 0.5, &q).unwrap();
        assert!((v - spaceform::ball_volume(3, 1.0, 0.5)).abs() < 1e-9);
        assert!((a - spaceform::sphere_area(3, 1.0, 0.5)).abs() < 1e-9);
        assert!((iso_profile(3, 1.0, v).unwrap() - a).abs() < 1e-8);
    }
}
