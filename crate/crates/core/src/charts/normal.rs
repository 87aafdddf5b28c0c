use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::curvature::{orthonormal_frame, scalar_curvature, Connection};
use super::{curvature_at, MetricChart, ModelKind};
use crate::error::{Error, Result};
use crate::ode::{integrate, Tolerances};
use crate::spaceform::{radius_cap, tangential_factors};
use crate::tensor::{CurvatureData, Sym2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeSettings {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for OdeSettings {
    fn default() -> Self {
        OdeSettings { rtol: 1e-10, atol: 1e-12 }
    }
}

/// Inverse of the pulled-back metric at a normal-coordinate point `x`.
#[derive(Clone, Debug, PartialEq)]
pub enum InvMetric {
    Identity,
    /// `x_hat x_hat^T + inv_tangential (I - x_hat x_hat^T)`
    RadialTangential { inv_tangential: f64 },
    Full(Sym2),
}

impl InvMetric {
    /// `w^T g^{-1} w` at the normal-coordinate point `x`.
    pub fn norm_sq(&self, x: &[f64], w: &[f64]) -> f64 {
        match self {
            InvMetric::Identity => w.iter().map(|v| v * v).sum(),
            InvMetric::RadialTangential { inv_tangential } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let w2: f64 = w.iter().map(|v| v * v).sum();
                if r2 == 0.0 {
                    return w2;
                }
                let radial = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>().powi(2) / r2;
                radial + inv_tangential * (w2 - radial)
            }
            InvMetric::Full(m) => m.quadratic_form(w),
        }
    }
}

/// Geometry of the normal chart at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalSample {
    /// Base-chart coordinates of `exp_p(x)`.
    pub point: Vec<f64>,
    /// `det(g~)^{1/2}` in normal coordinates.
    pub density: f64,
    pub inv_metric: InvMetric,
    /// Scalar curvature at the point, when requested.
    pub sc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    /// Base coordinates are already normal at the origin.
    Identity,
    /// Flat metric: `exp_p(x) = p + x`.
    Translate,
    Shooting,
}

/// Normal coordinates at `center` out to `radius`.
#[derive(Clone, Debug)]
pub struct NormalChart {
    base: MetricChart,
    center: Vec<f64>,
    radius: f64,
    kind: Kind,
    /// Orthonormal frame at the centre, row-major with frame vectors as columns.
    frame: Vec<f64>,
    ode: OdeSettings,
}

pub fn build_normal_chart(chart: &MetricChart, p: &[f64], r0: f64) -> Result<NormalChart> {
    build_normal_chart_with(chart, p, r0, OdeSettings::default())
}

pub(crate) fn unit_axes(n: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[i] = s;
            dirs.push(d);
        }
    }
    dirs
}

impl NormalChart {
    pub fn with_ode(chart: &MetricChart, p: &[f64], r0: f64, ode: OdeSettings) -> Result<NormalChart> {
        build_normal_chart_with(chart, p, r0, ode)
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn base(&self) -> &MetricChart {
        &self.base
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn ode_settings(&self) -> OdeSettings {
        self.ode
    }

    /// Whether samples are closed-form rather than shot.
    pub fn is_exact(&self) -> bool {
        self.kind != Kind::Shooting
    }

    /// Curvature at the centre, in the frame of the normal coordinates.
    pub fn center_curvature(&self) -> Result<CurvatureData> {
        curvature_at(&self.base, &self.center)
    }

    fn check_radius(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r > self.radius * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain(x.to_vec()));
        }
        Ok(r)
    }

    pub fn exp(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.sample(x, false)?.point)
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.sample(x, false)?.density)
    }

    pub fn sample(&self, x: &[f64], with_sc: bool) -> Result<NormalSample> {
        let r = self.check_radius(x)?;
        match self.kind {
            Kind::Identity | Kind::Translate => self.closed_form_sample(x, with_sc),
            Kind::Shooting => {
                let theta: Vec<f64> = if r == 0.0 {
                    let mut d = vec![0.0; self.dim()];
                    d[0] = 1.0;
                    d
                } else {
                    x.iter().map(|v| v / r).collect()
                };
                Ok(self.sample_ray(&theta, &[r], with_sc)?.pop().expect("one radius requested"))
            }
        }
    }

    fn scalar_at(&self, point: &[f64]) -> Result<f64> {
        match self.base.callback() {
            Some(f) => Ok(f(point).sc),
            None => scalar_curvature(&self.base, point),
        }
    }

    fn closed_form_sample(&self, x: &[f64], with_sc: bool) -> Result<NormalSample> {
        let n = self.dim();
        let point: Vec<f64> = if self.kind == Kind::Translate {
            self.center.iter().zip(x).map(|(c, v)| c + v).collect()
        } else {
            x.to_vec()
        };
        let model = self.base.model();
        let (density, inv_metric) = match model.map(|m| (m.kind, m.k)) {
            Some((ModelKind::Flat, _)) => (1.0, InvMetric::Identity),
            Some((ModelKind::SpaceForm, k)) => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let (s2, _) = tangential_factors(k * r2);
                (s2.powf(0.5 * (n as f64 - 1.0)), InvMetric::RadialTangential { inv_tangential: 1.0 / s2 })
            }
            _ => {
                let g = self.base.metric_unchecked(&point);
                let (det, inv) = det_and_inverse(n, g.as_slice())?;
                (det.sqrt(), InvMetric::Full(Sym2::from_fn(n, |i, j| inv[i * n + j])))
            }
        };
        let sc = if with_sc { Some(self.scalar_at(&point)?) } else { None };
        Ok(NormalSample { point, density, inv_metric, sc })
    }

    /// Samples along the geodesic with unit initial direction `theta` (in the
    /// normal frame) at the nondecreasing arc lengths `radii`.
    pub fn sample_ray(&self, theta: &[f64], radii: &[f64], with_sc: bool) -> Result<Vec<NormalSample>> {
        let n = self.dim();
        if theta.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: theta.len() });
        }
        let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("ray direction must be a unit vector, norm {norm}")));
        }
        if radii.last().is_some_and(|&r| r > self.radius * (1.0 + 1e-12)) {
            return Err(Error::OutOfDomain(theta.iter().map(|v| v * radii[radii.len() - 1]).collect()));
        }
        if self.kind != Kind::Shooting {
            return radii
                .iter()
                .map(|&r| {
                    let x: Vec<f64> = theta.iter().map(|v| v * r).collect();
                    self.closed_form_sample(&x, with_sc)
                })
                .collect();
        }
        let states = self.shoot(theta, radii)?;
        let mut out = Vec::with_capacity(radii.len());
        for (&s, y) in radii.iter().zip(&states) {
            let point = y[..n].to_vec();
            let g = self.base.metric_unchecked(&point);
            let sc = if with_sc { Some(self.scalar_at(&point)?) } else { None };
            if s == 0.0 {
                out.push(NormalSample { point, density: 1.0, inv_metric: InvMetric::Identity, sc });
                continue;
            }
            // d exp at s theta sends e_a to Y_a(s) / s
            let j = DMatrix::from_fn(n, n, |l, a| y[2 * n + l * n + a] / s);
            let gm = DMatrix::from_row_slice(n, n, g.as_slice());
            let pulled = j.transpose() * &gm * &j;
            let flat: Vec<f64> = (0..n * n).map(|i| pulled[(i / n, i % n)]).collect();
            let (det, inv) = det_and_inverse(n, &flat).map_err(|_| Error::JacobianSingular { arc_length: s })?;
            out.push(NormalSample {
                point,
                density: det.sqrt(),
                inv_metric: InvMetric::Full(Sym2::from_fn(n, |a, b| inv[a * n + b])),
                sc,
            });
        }
        Ok(out)
    }

    /// Geodesic and Jacobi-field states `[x, v, Y, Y']` at each radius.
    fn shoot(&self, theta: &[f64], radii: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.dim();
        let e = &self.frame;
        let mut y0 = vec![0.0; 2 * n + 2 * n * n];
        y0[..n].copy_from_slice(&self.center);
        for l in 0..n {
            y0[n + l] = (0..n).map(|a| e[l * n + a] * theta[a]).sum();
            for a in 0..n {
                y0[2 * n + n * n + l * n + a] = e[l * n + a];
            }
        }
        let base = &self.base;
        let rhs = |s: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            let x = &y[..n];
            let v = &y[n..2 * n];
            let yy = &y[2 * n..2 * n + n * n];
            let yd = &y[2 * n + n * n..];
            let jet = base.metric_jet(x).map_err(|err| match err {
                Error::OutOfDomain(_) => Error::GeodesicLeftDomain { arc_length: s },
                other => other,
            })?;
            let c = Connection::new(&jet)?;
            dy[..n].copy_from_slice(v);
            for l in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc -= c.gamma(l, i, j) * v[i] * v[j];
                    }
                }
                dy[n + l] = acc;
            }
            dy[2 * n..2 * n + n * n].copy_from_slice(yd);
            for l in 0..n {
                for a in 0..n {
                    let mut acc = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            let vv = v[i] * v[j];
                            let mut dg = 0.0;
                            for k in 0..n {
                                dg += c.dgamma(k, l, i, j) * yy[k * n + a];
                            }
                            acc -= dg * vv + 2.0 * c.gamma(l, i, j) * v[i] * yd[j * n + a];
                        }
                    }
                    dy[2 * n + n * n + l * n + a] = acc;
                }
            }
            Ok(())
        };
        let check = |s: f64, y: &[f64]| -> Result<()> {
            if !base.domain().contains(&y[..n]) {
                return Err(Error::GeodesicLeftDomain { arc_length: s });
            }
            let m = DMatrix::from_row_slice(n, n, &y[2 * n..2 * n + n * n]);
            if !(m.determinant() > 0.0) {
                return Err(Error::JacobianSingular { arc_length: s });
            }
            Ok(())
        };
        let tol = Tolerances { rtol: self.ode.rtol, atol: self.ode.atol, ..Tolerances::default() };
        integrate(rhs, 0.0, &y0, radii, tol, check)
    }
}

fn det_and_inverse(n: usize, g: &[f64]) -> Result<(f64, Vec<f64>)> {
    let m = DMatrix::from_row_slice(n, n, g);
    let chol = m.cholesky().ok_or_else(|| Error::InvalidSpec("pulled-back metric is not positive definite".into()))?;
    let det = chol.determinant();
    let inv = chol.inverse();
    Ok((det, (0..n * n).map(|i| inv[(i / n, i % n)]).collect()))
}

fn build_normal_chart_with(chart: &MetricChart, p: &[f64], r0: f64, ode: OdeSettings) -> Result<NormalChart> {
    chart.check_point(p)?;
    let n = chart.dim();
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidArgument(format!("normal chart radius must be positive, got {r0}")));
    }
    if !(ode.rtol > 0.0 && ode.atol > 0.0) {
        return Err(Error::InvalidArgument("ODE tolerances must be positive".into()));
    }
    let model = chart.model();
    let at_origin = p.iter().all(|v| *v == 0.0);
    let kind = match model {
        Some(m) if m.kind == ModelKind::Flat && m.perturbation.is_none() => Kind::Translate,
        Some(m) if m.normal_at_origin() && at_origin => Kind::Identity,
        _ => Kind::Shooting,
    };
    if let Some(m) = model {
        if m.perturbation.is_none() && m.k > 0.0 && kind == Kind::Identity && r0 >= radius_cap(m.k) {
            return Err(Error::JacobianSingular { arc_length: radius_cap(m.k) });
        }
    }
    let frame = match kind {
        Kind::Shooting => orthonormal_frame(&chart.metric(p)?)?,
        _ => Sym2::identity(n).as_slice().to_vec(),
    };
    let nc = NormalChart { base: chart.clone(), center: p.to_vec(), radius: r0, kind, frame, ode };
    match nc.kind {
        Kind::Identity | Kind::Translate => {
            // the coordinate ball of radius r0 must fit inside the domain
            let dom = chart.domain();
            for i in 0..n {
                let room = (p[i] - dom.lo[i]).min(dom.hi[i] - p[i]);
                if room < r0 {
                    return Err(Error::GeodesicLeftDomain { arc_length: room.max(0.0) });
                }
            }
            if let Some((m, rb)) = dom.ball {
                let room = rb - p[..m].iter().map(|v| v * v).sum::<f64>().sqrt();
                if room <= r0 {
                    return Err(Error::GeodesicLeftDomain { arc_length: room.max(0.0) });
                }
            }
        }
        Kind::Shooting => {
            // probe the frame axes and a few diagonal directions out to r0
            let mut dirs = unit_axes(n);
            for mask in 0..(1usize << n).min(16) {
                let d: Vec<f64> = (0..n).map(|i| if mask & (1 << i) != 0 { 1.0 } else { -1.0 }).collect();
                let s = (n as f64).sqrt();
                dirs.push(d.iter().map(|v| v / s).collect());
            }
            for d in &dirs {
                nc.shoot(d, &[r0])?;
            }
        }
    }
    Ok(nc)
}

#[cfg(test)]
mod tests {
    use super::super::{make_chart, ModelSpec, Profile};
    use super::*;

    fn sphere_embed(y: &[f64]) -> Vec<f64> {
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut out = vec![r.cos()];
        out.extend(y.iter().map(|v| if r == 0.0 { 0.0 } else { r.sin() * v / r }));
        out
    }

    #[test]
    fn flat_is_translation() {
        let c = make_chart(&ModelSpec::flat(3, 2.0)).unwrap();
        let nc = build_normal_chart(&c, &[0.5, -0.2, 0.1], 1.0).unwrap();
        let s = nc.sample(&[0.3, 0.1, -0.4], true).unwrap();
        assert_eq!(s.point, vec![0.8, -0.1, -0.30000000000000004]);
        assert_eq!(s.density, 1.0);
        assert_eq!(s.sc, Some(0.0));
        assert!(matches!(build_normal_chart(&c, &[1.5, 0.0, 0.0], 1.0), Err(Error::GeodesicLeftDomain { .. })));
    }

    #[test]
    fn sphere_identity_density() {
        let c = make_chart(&ModelSpec::space_form(3, 1.0, 2.5)).unwrap();
        let nc = build_normal_chart(&c, &[0.0; 3], 2.0).unwrap();
        assert!(nc.is_exact());
        let x = [0.6, -0.8, 0.5];
        let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let d = nc.density(&x).unwrap();
        assert!((d - (r.sin() / r).powi(2)).abs() < 1e-14);
        let cap = make_chart(&ModelSpec::space_form(3, 1.0, 3.1)).unwrap();
        assert!(matches!(build_normal_chart(&cap, &[0.0; 3], 3.2), Err(Error::JacobianSingular { .. })));
    }

    #[test]
    fn shooting_on_offset_sphere_matches_closed_forms() {
        let c = make_chart(&ModelSpec::space_form(3, 1.0, 2.0)).unwrap();
        let p = [0.3, -0.2, 0.1];
        let nc = build_normal_chart(&c, &p, 0.8).unwrap();
        assert!(!nc.is_exact());
        let theta = {
            let v = [0.2, 0.7, -0.4];
            let r = v.iter().map(|a: &f64| a * a).sum::<f64>().sqrt();
            v.map(|a| a / r)
        };
        let radii = [0.0, 0.1, 0.35, 0.8];
        let samples = nc.sample_ray(&theta, &radii, true).unwrap();
        let pe = sphere_embed(&p);
        for (s, smp) in radii.iter().zip(&samples) {
            assert!((smp.density - if *s == 0.0 { 1.0 } else { (s.sin() / s).powi(2) }).abs() < 1e-9, "{s}");
            // independent geodesic distance from the embedding
            let q = sphere_embed(&smp.point);
            let chord = pe.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!((2.0 * (0.5 * chord).asin() - s).abs() < 1e-8);
            // Gauss lemma: the radial direction stays unit length
            if let InvMetric::Full(m) = &smp.inv_metric {
                let g = crate::charts::curvature::invert(3, m.as_slice()).unwrap();
                let grr = Sym2::from_fn(3, |i, j| g[i * 3 + j]).quadratic_form(&theta);
                assert!((grr - 1.0).abs() < 1e-8);
            }
            assert!((smp.sc.unwrap() - 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shooting_density_second_order_matches_ricci() {
        let spec = ModelSpec::conformal_flat(
            3,
            0.3,
            Profile::Gaussian { center: vec![0.2, -0.1, 0.15], width: 0.7 },
            1.0,
        );
        let c = make_chart(&spec).unwrap();
        let nc = NormalChart::with_ode(&c, &[0.0; 3], 0.3, OdeSettings { rtol: 1e-13, atol: 1e-15 }).unwrap();
        let rc = nc.center_curvature().unwrap().rc;
        for dir in unit_axes(3).into_iter().step_by(2) {
            let second = |h: f64| {
                let plus: Vec<f64> = dir.iter().map(|v| v * h).collect();
                let minus: Vec<f64> = dir.iter().map(|v| -v * h).collect();
                (nc.density(&plus).unwrap() + nc.density(&minus).unwrap() - 2.0) / (2.0 * h * h)
            };
            let (a, b) = (second(0.04), second(0.02));
            let fit = (4.0 * b - a) / 3.0;
            let want = -rc.quadratic_form(&dir) / 6.0;
            assert!((fit - want).abs() < 1e-6, "{fit} vs {want}");
        }
    }

    #[test]
    fn conjugate_or_exit_is_reported() {
        let c = make_chart(&ModelSpec::space_form(3, 1.0, 3.0)).unwrap();
        let r = build_normal_chart(&c, &[0.5, 0.0, 0.0], 2.9);
        assert!(matches!(r, Err(Error::GeodesicLeftDomain { .. }) | Err(Error::JacobianSingular { .. })));
    }
}
