//! Radial minimization of the entropy functional with curvature term over
//! unit-mass functions vanishing on the boundary of a model-space ball.
//!
//! Discretized with quadratic finite elements on a uniform mesh in `r`, with
//! the model area density `n omega_n sn_K(r)^{n-1}` inside every integral.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::spaceform::{radius_cap, sphere_area};

/// Ball of radius `radius` about a point of the model space of curvature `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialDomain {
    pub n: usize,
    pub k: f64,
    pub radius: f64,
    /// Mesh nodes on `[0, radius]`; always odd.
    pub grid: Vec<f64>,
}

pub const MIN_NODES: usize = 256;
/// Nodes required per `sqrt(t)`.
pub const NODES_PER_WIDTH: f64 = 16.0;
/// Nodes per `sqrt(t)` at which the P2 error in `mu`, roughly `1e-2 (h/sqrt t)^4`,
/// drops near `1e-9`. At the required minimum it is about `1e-7`.
pub const ACCURATE_NODES_PER_WIDTH: f64 = 64.0;

/// Node count resolving `t` on a ball of `radius` to [`ACCURATE_NODES_PER_WIDTH`].
pub fn resolved_nodes(radius: f64, t: f64) -> usize {
    ((ACCURATE_NODES_PER_WIDTH * radius / t.sqrt()).ceil() as usize).max(MIN_NODES)
}

impl RadialDomain {
    /// Uniform mesh with at least `nodes` nodes.
    pub fn new(n: usize, k: f64, radius: f64, nodes: usize) -> Result<Self> {
        crate::tensor::check_dim(n)?;
        if nodes < MIN_NODES {
            return Err(Error::InvalidArgument(format!("need at least {MIN_NODES} nodes, got {nodes}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
        }
        if k > 0.0 && radius >= radius_cap(k) {
            return Err(Error::InvalidArgument(format!(
                "radius {radius} reaches the antipode at {}",
                radius_cap(k)
            )));
        }
        let elems = nodes.div_ceil(2);
        let m = 2 * elems + 1;
        let grid = (0..m).map(|i| radius * i as f64 / (m - 1) as f64).collect();
        Ok(RadialDomain { n, k, radius, grid })
    }

    pub fn nodes(&self) -> usize {
        self.grid.len()
    }

    fn elements(&self) -> usize {
        (self.grid.len() - 1) / 2
    }

    pub fn scalar_curvature(&self) -> f64 {
        let n = self.n as f64;
        n * (n - 1.0) * self.k
    }

    /// The same ball with twice as many elements.
    pub fn refined(&self) -> RadialDomain {
        RadialDomain::new(self.n, self.k, self.radius, 2 * self.nodes()).expect("refining a valid domain")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Gaussian,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuEstimate {
    pub mu: f64,
    /// Nodal values on the domain grid.
    pub minimizer: Vec<f64>,
    pub grad_norm: f64,
    pub t: f64,
    pub iterations: usize,
    /// False when the iteration limit was reached before the gradient tolerance.
    pub converged: bool,
    /// Iterates that had negative nodal values clipped to zero.
    pub negative_projections: usize,
    /// Objective after every accepted step.
    pub history: Vec<f64>,
}

pub const GRAD_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100_000;
const QUAD_ORDER: usize = 8;
const ARMIJO: f64 = 1e-4;
/// Relative size of objective changes treated as summation roundoff.
pub const ROUNDOFF_BAND: f64 = 1e-9;

/// Symmetric pentadiagonal matrix: `band[i][d] = A(i, i + d)`.
#[derive(Clone)]
struct Banded {
    band: Vec<[f64; 3]>,
}

impl Banded {
    fn zeros(m: usize) -> Self {
        Banded { band: vec![[0.0; 3]; m] }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.band[i][j - i] += v;
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        let m = x.len();
        let mut y = vec![0.0; m];
        for i in 0..m {
            y[i] += self.band[i][0] * x[i];
            for d in 1..3 {
                if i + d < m {
                    y[i] += self.band[i][d] * x[i + d];
                    y[i + d] += self.band[i][d] * x[i];
                }
            }
        }
        y
    }

    fn quad(&self, x: &[f64]) -> f64 {
        self.mul(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Solves `A y = b` by banded Cholesky.
    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let m = b.len();
        // l[i] = [L(i,i), L(i+1,i), L(i+2,i)]
        let mut l = vec![[0.0; 3]; m];
        for i in 0..m {
            let l2 = if i >= 2 { self.band[i - 2][2] / l[i - 2][0] } else { 0.0 };
            let l1 = if i >= 1 {
                (self.band[i - 1][1] - if i >= 2 { l2 * l[i - 2][1] } else { 0.0 }) / l[i - 1][0]
            } else {
                0.0
            };
            let d = self.band[i][0] - l1 * l1 - l2 * l2;
            if !(d > 0.0) {
                return Err(Error::InvalidArgument("preconditioner is not positive definite".into()));
            }
            l[i][0] = d.sqrt();
            if i >= 1 {
                l[i - 1][1] = l1;
            }
            if i >= 2 {
                l[i - 2][2] = l2;
            }
        }
        let mut y = b.to_vec();
        for i in 0..m {
            if i >= 1 {
                y[i] -= l[i - 1][1] * y[i - 1];
            }
            if i >= 2 {
                y[i] -= l[i - 2][2] * y[i - 2];
            }
            y[i] /= l[i][0];
        }
        for i in (0..m).rev() {
            if i + 1 < m {
                y[i] -= l[i][1] * y[i + 1];
            }
            if i + 2 < m {
                y[i] -= l[i][2] * y[i + 2];
            }
            y[i] /= l[i][0];
        }
        Ok(y)
    }
}

/// Quadratic Lagrange shape functions on `[-1, 1]` and their derivatives.
fn shape(xi: f64) -> ([f64; 3], [f64; 3]) {
    (
        [0.5 * xi * (xi - 1.0), 1.0 - xi * xi, 0.5 * xi * (xi + 1.0)],
        [xi - 0.5, -2.0 * xi, xi + 0.5],
    )
}

/// Quadrature point: element, shape values, and weight times area.
struct QuadPoint {
    elem: usize,
    phi: [f64; 3],
    w: f64,
}

struct Discrete {
    m: usize,
    mass: Banded,
    stiff: Banded,
    points: Vec<QuadPoint>,
    lumped: Vec<f64>,
    t: f64,
    sc: f64,
}

impl Discrete {
    fn new(dom: &RadialDomain, t: f64) -> Self {
        let m = dom.nodes();
        let (xs, ws) = gauss_legendre(QUAD_ORDER);
        let mut mass = Banded::zeros(m);
        let mut stiff = Banded::zeros(m);
        let mut points = Vec::with_capacity(dom.elements() * QUAD_ORDER);
        for e in 0..dom.elements() {
            let (a, b) = (dom.grid[2 * e], dom.grid[2 * e + 2]);
            let half = 0.5 * (b - a);
            for (xi, wi) in xs.iter().zip(&ws) {
                let r = a + half * (xi + 1.0);
                let (phi, dxi) = shape(*xi);
                let dphi = dxi.map(|d| d / half);
                let w = wi * half * sphere_area(dom.n, dom.k, r);
                for i in 0..3 {
                    for j in i..3 {
                        mass.add(2 * e + i, 2 * e + j, w * phi[i] * phi[j]);
                        stiff.add(2 * e + i, 2 * e + j, w * dphi[i] * dphi[j]);
                    }
                }
                points.push(QuadPoint { elem: e, phi, w });
            }
        }
        let lumped = mass.mul(&vec![1.0; m]);
        Discrete { m, mass, stiff, points, lumped, t, sc: dom.scalar_curvature() }
    }

    /// `int t (Sc f^2 + 4 f'^2) - f^2 log f^2`
    fn objective(&self, f: &[f64]) -> f64 {
        let quad = self.t * self.sc * self.mass.quad(f) + 4.0 * self.t * self.stiff.quad(f);
        let mut ent = 0.0;
        for p in &self.points {
            let v: f64 = (0..3).map(|a| p.phi[a] * f[2 * p.elem + a]).sum();
            let v2 = v * v;
            if v2 > 0.0 {
                ent += p.w * v2 * v2.ln();
            }
        }
        quad - ent
    }

    fn gradient(&self, f: &[f64]) -> Vec<f64> {
        let mf = self.mass.mul(f);
        let sf = self.stiff.mul(f);
        let mut g: Vec<f64> = (0..self.m).map(|i| 2.0 * self.t * self.sc * mf[i] + 8.0 * self.t * sf[i]).collect();
        for p in &self.points {
            let v: f64 = (0..3).map(|a| p.phi[a] * f[2 * p.elem + a]).sum();
            let v2 = v * v;
            let de = if v2 > 0.0 { 2.0 * v * (v2.ln() + 1.0) } else { 0.0 };
            for a in 0..3 {
                g[2 * p.elem + a] -= p.w * de * p.phi[a];
            }
        }
        g[self.m - 1] = 0.0;
        g
    }

    fn norm_sq(&self, f: &[f64]) -> f64 {
        self.mass.quad(f)
    }

    /// `8t S + lumped M (4 + max(0, 2t Sc - 2 log f^2 - 6 - 2 lambda))`, an
    /// SPD approximation of the Lagrangian Hessian.
    fn preconditioner(&self, f: &[f64], lambda: f64) -> Banded {
        let mut p = Banded::zeros(self.m);
        for i in 0..self.m {
            for d in 0..3 {
                p.band[i][d] = 8.0 * self.t * self.stiff.band[i][d];
            }
            let lf = if f[i] > 0.0 { (f[i] * f[i]).ln() } else { f64::NEG_INFINITY };
            let shift = (2.0 * self.t * self.sc - 2.0 * lf - 6.0 - 2.0 * lambda).clamp(0.0, 1e8);
            p.band[i][0] += self.lumped[i] * (4.0 + shift);
        }
        let last = self.m - 1;
        p.band[last] = [1.0, 0.0, 0.0];
        for d in 1..3 {
            if last >= d {
                p.band[last - d][d] = 0.0;
            }
        }
        p
    }

    /// Clips negatives and rescales to unit mass. Returns whether clipping occurred.
    fn retract(&self, f: &mut [f64]) -> bool {
        let mut clipped = false;
        for v in f.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                clipped = true;
            }
        }
        f[self.m - 1] = 0.0;
        let s = self.norm_sq(f).sqrt();
        f.iter_mut().for_each(|v| *v /= s);
        clipped
    }
}

/// Preconditioned descent direction tangent to the unit sphere.
struct Step {
    g: Vec<f64>,
    d: Vec<f64>,
    /// `sqrt(r^T P^{-1} r)` for the tangential residual `r`.
    grad_norm: f64,
}

impl Discrete {
    fn step(&self, f: &[f64]) -> Result<Step> {
        let g = self.gradient(f);
        let mf = self.mass.mul(f);
        let lambda = 0.5 * dot(&g, f);
        let p = self.preconditioner(f, lambda);
        let pg = p.solve(&g)?;
        let mut pm = p.solve(&mf)?;
        pm[self.m - 1] = 0.0;
        let mu = 0.5 * dot(&mf, &pg) / dot(&mf, &pm);
        let r: Vec<f64> = g.iter().zip(&mf).map(|(a, b)| a - 2.0 * mu * b).collect();
        let d: Vec<f64> = pg.iter().zip(&pm).map(|(a, b)| -(a - 2.0 * mu * b)).collect();
        let grad_norm = (-dot(&r, &d)).max(0.0).sqrt();
        Ok(Step { g, d, grad_norm })
    }
}

fn check_resolution(dom: &RadialDomain, t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let per_width = t.sqrt() / (dom.grid[1] - dom.grid[0]);
    if per_width < NODES_PER_WIDTH {
        return Err(Error::InvalidArgument(format!(
            "mesh has {per_width:.1} nodes per sqrt(t), need {NODES_PER_WIDTH}"
        )));
    }
    Ok(())
}

fn offset(n: usize, t: f64) -> f64 {
    let nf = n as f64;
    nf + 0.5 * nf * (4.0 * PI * t).ln()
}

/// Value of the functional at the nodal function `f`, normalized to unit mass first.
pub fn w_value(dom: &RadialDomain, t: f64, f: &[f64]) -> Result<f64> {
    check_resolution(dom, t)?;
    if f.len() != dom.nodes() {
        return Err(Error::DimensionMismatch { expected: dom.nodes(), got: f.len() });
    }
    let disc = Discrete::new(dom, t);
    let mut g = f.to_vec();
    if !(disc.norm_sq(&g) > 0.0) {
        return Err(Error::InvalidArgument("function has zero mass".into()));
    }
    disc.retract(&mut g);
    Ok(disc.objective(&g) - offset(dom.n, t))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub grad_tol: f64,
    pub max_iterations: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions { grad_tol: GRAD_TOL, max_iterations: MAX_ITERATIONS }
    }
}

pub fn minimize_w(dom: &RadialDomain, t: f64, init: Init) -> Result<MuEstimate> {
    minimize_w_with(dom, t, init, MinimizeOptions::default())
}

pub fn minimize_w_with(dom: &RadialDomain, t: f64, init: Init, opts: MinimizeOptions) -> Result<MuEstimate> {
    check_resolution(dom, t)?;
    let disc = Discrete::new(dom, t);
    let mut f: Vec<f64> = match init {
        Init::Gaussian => dom.grid.iter().map(|r| (-r * r / (8.0 * t)).exp()).collect(),
        Init::Uniform => vec![1.0; dom.nodes()],
    };
    let mut negative_projections = usize::from(disc.retract(&mut f));
    let mut j = disc.objective(&f);
    let mut history = vec![j];
    let mut step = disc.step(&f)?;
    let mut iterations = 0;
    // objective changes below this are roundoff
    let band = |j: f64| ROUNDOFF_BAND * (1.0 + j.abs());
    while iterations < opts.max_iterations && step.grad_norm >= opts.grad_tol {
        iterations += 1;
        let slope = dot(&step.g, &step.d);
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-10 {
            let mut trial: Vec<f64> = f.iter().zip(&step.d).map(|(a, b)| a + alpha * b).collect();
            let clipped = disc.retract(&mut trial);
            let jt = disc.objective(&trial);
            let armijo = jt <= j + ARMIJO * alpha * slope.min(0.0);
            let next = if armijo || jt <= j + band(j) { Some(disc.step(&trial)?) } else { None };
            // inside the roundoff band only a smaller gradient certifies progress
            if let Some(next) = next.filter(|nx| armijo || nx.grad_norm < step.grad_norm) {
                negative_projections += usize::from(clipped);
                f = trial;
                j = jt;
                history.push(jt);
                step = next;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let grad_norm = step.grad_norm;
    Ok(MuEstimate {
        mu: j - offset(dom.n, t),
        minimizer: f,
        grad_norm,
        t,
        iterations,
        converged: grad_norm < opts.grad_tol,
        negative_projections,
        history,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Discrete unit mass `int f^2 dmu` of nodal values.
pub fn discrete_mass(dom: &RadialDomain, f: &[f64]) -> f64 {
    let (xs, ws) = gauss_legendre(QUAD_ORDER);
    let mut s = 0.0;
    for e in 0..dom.elements() {
        let (a, b) = (dom.grid[2 * e], dom.grid[2 * e + 2]);
        let half = 0.5 * (b - a);
        for (xi, wi) in xs.iter().zip(&ws) {
            let (phi, _) = shape(*xi);
            let v: f64 = (0..3).map(|k| phi[k] * f[2 * e + k]).sum();
            s += wi * half * sphere_area(dom.n, dom.k, a + half * (xi + 1.0)) * v * v;
        }
    }
    s
}

/// Change of the minimum under one mesh doubling.
pub fn mesh_refinement_change(dom: &RadialDomain, t: f64) -> Result<f64> {
    let coarse = minimize_w(dom, t, Init::Gaussian)?;
    let fine = minimize_w(&dom.refined(), t, Init::Gaussian)?;
    Ok((fine.mu - coarse.mu).abs())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuBoundReport {
    /// Fitted `q` in `mu ~ -q t^2`.
    pub q: f64,
    pub q_stderr: f64,
    pub q_bound: f64,
    pub gamma: f64,
    /// `q <= Q` within the fitted error.
    pub within_bound: bool,
    /// Pointwise bound on `|Rm|^2` implied by `Q` and `gamma`.
    pub rm_bound: f64,
    pub samples_used: usize,
}

/// Fits `mu(t) ~ -q t^2` on the smaller-`t` half of the samples.
pub fn mu_bound_report(samples: &[(f64, f64)], gamma: f64, q_bound: f64) -> Result<MuBoundReport> {
    let rm_bound = crate::rigidity::rm_bound_from_mu(gamma, q_bound)?;
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples(format!("need at least 2 samples, got {}", samples.len())));
    }
    if samples.iter().any(|(t, mu)| !(*t > 0.0) || !mu.is_finite()) {
        return Err(Error::InvalidArgument("samples need t > 0 and finite mu".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let used = &sorted[..sorted.len().div_ceil(2).max(2)];
    let t_max = used[used.len() - 1].0;
    // single column in tau = t / t_max
    let stt: f64 = used.iter().map(|(t, _)| (t / t_max).powi(4)).sum();
    if !(stt > 0.0) {
        return Err(Error::IllConditionedFit { condition: f64::INFINITY });
    }
    let q = -used.iter().map(|(t, mu)| mu * (t / t_max).powi(2)).sum::<f64>() / stt / (t_max * t_max);
    let dof = (used.len() - 1).max(1) as f64;
    let rss: f64 = used.iter().map(|(t, mu)| (mu + q * t * t).powi(2)).sum();
    let q_stderr = (rss / dof / stt).sqrt() / (t_max * t_max);
    Ok(MuBoundReport {
        q,
        q_stderr,
        q_bound,
        gamma,
        within_bound: q <= q_bound + q_stderr,
        rm_bound,
        samples_used: used.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{build_normal_chart, make_chart, ModelSpec};
    use crate::functionals::{build_test_function, eval_w, AMode};
    use crate::quadrature::QuadratureSpec;

    #[test]
    fn banded_solve_matches_dense() {
        let m = 9;
        let mut a = Banded::zeros(m);
        for i in 0..m {
            a.add(i, i, 4.0 + i as f64);
            if i + 1 < m {
                a.add(i, i + 1, -1.0);
            }
            if i + 2 < m {
                a.add(i, i + 2, 0.5);
            }
        }
        let b: Vec<f64> = (0..m).map(|i| (i as f64).sin()).collect();
        let x = a.solve(&b).unwrap();
        let back = a.mul(&x);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn domain_validation() {
        assert!(RadialDomain::new(3, 0.0, 1.0, 100).is_err());
        assert!(RadialDomain::new(3, 1.0, 3.2, 512).is_err());
        let d = RadialDomain::new(3, 0.0, 1.0, 256).unwrap();
        assert_eq!(d.nodes() % 2, 1);
        assert!(minimize_w(&d, 1e-5, Init::Gaussian).is_err());
    }

    #[test]
    fn flat_ball_is_nearly_saturated() {
        let t: f64 = 1e-3;
        let dom = RadialDomain::new(3, 0.0, 25.0 * t.sqrt(), 1024).unwrap();
        let est = minimize_w(&dom, t, Init::Gaussian).unwrap();
        assert!(est.converged, "{} {}", est.grad_norm, est.iterations);
        assert!(est.mu >= -1e-6 && est.mu <= 1e-3, "{}", est.mu);
        assert!((discrete_mass(&dom, &est.minimizer) - 1.0).abs() < 1e-10);
        assert!(est.minimizer.iter().all(|v| *v >= 0.0));
        assert!(est.history.windows(2).all(|w| w[1] <= w[0] + ROUNDOFF_BAND * (1.0 + w[0].abs())));
    }

    #[test]
    fn uniform_start_reaches_the_same_minimum() {
        let t: f64 = 1e-3;
        let dom = RadialDomain::new(2, 0.0, 20.0 * t.sqrt(), 512).unwrap();
        let a = minimize_w(&dom, t, Init::Gaussian).unwrap();
        let b = minimize_w(&dom, t, Init::Uniform).unwrap();
        assert!(a.converged && b.converged, "{} {}", b.grad_norm, b.iterations);
        assert!((a.mu - b.mu).abs() < 1e-9, "{} {}", a.mu, b.mu);
    }

    #[test]
    fn sphere_minimum_lies_below_the_witness() {
        let t = 2e-3;
        let radius = 1.0;
        let dom = RadialDomain::new(3, 1.0, radius, 1024).unwrap();
        let est = minimize_w(&dom, t, Init::Gaussian).unwrap();
        assert!(est.converged);
        let c = make_chart(&ModelSpec::space_form(3, 1.0, 2.0)).unwrap();
        let nc = build_normal_chart(&c, &[0.0; 3], radius).unwrap();
        let tf = build_test_function(&nc, AMode::Optimal, 0.0, radius).unwrap();
        let w = eval_w(&tf, t, &QuadratureSpec::default()).unwrap();
        let witness = w.value / w.components.mass;
        assert!(est.mu <= witness + 1e-8, "{} {}", est.mu, witness);
        assert!(est.mu / (t * t) > -2.5, "{}", est.mu / (t * t));
    }

    #[test]
    fn mesh_refinement_is_stable() {
        let t: f64 = 1e-3;
        let dom = RadialDomain::new(3, 1.0, 0.8, 512).unwrap();
        assert!(mesh_refinement_change(&dom, t).unwrap() < 1e-6);
    }

    #[test]
    fn bound_report() {
        let flat: Vec<(f64, f64)> = [8e-3, 4e-3, 2e-3, 1e-3].iter().map(|&t| (t, 0.0)).collect();
        let r = mu_bound_report(&flat, 0.0, 0.0).unwrap();
        assert_eq!((r.q, r.rm_bound), (0.0, 0.0));
        assert!(r.within_bound);
        let sphere: Vec<(f64, f64)> = [8e-3, 4e-3, 2e-3, 1e-3].iter().map(|&t| (t, -2.0 * t * t + 5.0 * t * t * t)).collect();
        let r = mu_bound_report(&sphere, 1.0 / 12.0, 1.0).unwrap();
        assert!(r.q >= 2.0 - 0.1 && !r.within_bound, "{r:?}");
        assert!((r.rm_bound - 12.0).abs() < 1e-12);
        assert!(matches!(mu_bound_report(&flat, 0.2, 1.0), Err(Error::GammaOutOfRange(_))));
    }
}
