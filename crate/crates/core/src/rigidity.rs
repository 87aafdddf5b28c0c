//! Decision procedures turning measured curvature data into rigidity verdicts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charts::{build_normal_chart, curvature_at, MetricChart, NormalChart};
use crate::error::{Error, Result};
use crate::isoperimetry::{geodesic_ball_probe, iso_profile};
use crate::quadrature::{gauss_legendre_on, QuadratureSpec, SphereRule};
use crate::spaceform::unit_ball_volume;
use crate::tensor::{check_dim, weyl_decompose, CurvatureData};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Satisfied,
    Violated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Hypothesis,
    /// Necessary condition for a hypothesis, probed on geodesic balls only.
    Probe,
    Conclusion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub point: Option<Vec<f64>>,
    pub status: Status,
    /// Nonnegative when the condition holds exactly.
    pub margin: f64,
}

impl Check {
    fn new(name: impl Into<String>, kind: CheckKind, point: Option<&[f64]>, margin: f64, tol: f64) -> Check {
        let status = if margin >= -tol { Status::Satisfied } else { Status::Violated };
        Check { name: name.into(), kind, point: point.map(<[f64]>::to_vec), status, margin }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConsistentWithRigidity,
    HypothesisViolated,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RigidityReport {
    pub n: usize,
    pub k: f64,
    pub points: Vec<Vec<f64>>,
    pub tolerance: f64,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
}

impl RigidityReport {
    /// Points where some hypothesis or probe fails.
    pub fn violating_points(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for c in &self.checks {
            if c.kind != CheckKind::Conclusion && c.status == Status::Violated {
                if let Some(p) = &c.point {
                    if !out.contains(p) {
                        out.push(p.clone());
                    }
                }
            }
        }
        out
    }
}

/// Any failing hypothesis wins; otherwise every conclusion must hold.
pub fn verdict(checks: &[Check]) -> Verdict {
    if checks.iter().any(|c| c.kind != CheckKind::Conclusion && c.status == Status::Violated) {
        Verdict::HypothesisViolated
    } else if checks.iter().filter(|c| c.kind == CheckKind::Conclusion).all(|c| c.status == Status::Satisfied) {
        Verdict::ConsistentWithRigidity
    } else {
        Verdict::Inconclusive
    }
}

/// `Sc(p) <= n(n-1)K` from the measured `c1 = -Sc(p)` of the log-Sobolev series.
pub fn scalar_bound_check(c1: f64, err: f64, n: usize, k: f64) -> Check {
    let nf = n as f64;
    Check::new("scalar_curvature_upper_bound", CheckKind::Conclusion, None, nf * (nf - 1.0) * k + c1, err.abs())
}

/// `Q / (1/6 - gamma)`, the pointwise bound on `|Rm|^2`, evaluated as
/// `6Q / (1 - 6 gamma)` so that round inputs give exact results.
pub fn rm_bound_from_mu(gamma: f64, q: f64) -> Result<f64> {
    if !(6.0 * gamma < 1.0) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::InvalidArgument(format!("Q must be nonnegative, got {q}")));
    }
    Ok(6.0 * q / (1.0 - 6.0 * gamma))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConstantCurvatureResidual {
    /// `|Rm|^2 - 2n(n-1)K^2`
    pub rm_excess: f64,
    pub weyl_norm: f64,
    pub traceless_rc_norm: f64,
}

impl ConstantCurvatureResidual {
    pub fn max_abs(&self) -> f64 {
        self.rm_excess.abs().max(self.weyl_norm).max(self.traceless_rc_norm)
    }
}

pub fn constant_curvature_residual(curv: &CurvatureData, k: f64) -> Result<ConstantCurvatureResidual> {
    let n = curv.dim();
    let wd = weyl_decompose(&curv.rm)?;
    let nf = n as f64;
    Ok(ConstantCurvatureResidual {
        rm_excess: curv.rm_norm_sq() - 2.0 * nf * (nf - 1.0) * k * k,
        weyl_norm: wd.weyl.norm_sq().sqrt(),
        traceless_rc_norm: curv.rc.traceless().norm_sq().sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub tolerance: f64,
    /// Also check `Delta Sc >= 0` and the ball-averaged scalar curvature.
    pub extended: bool,
    /// Radius of the balls used for the averaged scalar curvature probe.
    pub average_radius: f64,
    pub quadrature: QuadratureSpec,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            tolerance: 1e-6,
            extended: false,
            average_radius: 0.1,
            quadrature: QuadratureSpec { angular_order: 12, ..QuadratureSpec::default() },
        }
    }
}

/// Mean of `Sc` over the geodesic ball of radius `r` about the chart centre.
pub fn ball_average_scalar(nchart: &NormalChart, r: f64, q: &QuadratureSpec) -> Result<f64> {
    let n = nchart.dim();
    let rule = SphereRule::new(n, q.angular_order, q.mc_samples, q.seed)?;
    let (rs, ws) = gauss_legendre_on(16, 0.0, r);
    let sums: Vec<(f64, f64)> = rule
        .dirs
        .par_iter()
        .map(|d| {
            let samples = nchart.sample_ray(d, &rs, true)?;
            let mut vol = 0.0;
            let mut sc = 0.0;
            for ((rho, w), s) in rs.iter().zip(&ws).zip(&samples) {
                let dv = w * s.density * rho.powi(n as i32 - 1);
                vol += dv;
                sc += dv * s.sc.expect("requested scalar curvature");
            }
            Ok((vol, sc))
        })
        .collect::<Result<_>>()?;
    let (vol, sc) = rule
        .weights
        .iter()
        .zip(&sums)
        .fold((0.0, 0.0), |(v, s), (w, (dv, ds))| (v + w * dv, s + w * ds));
    Ok(sc / vol)
}

/// Samples the scalar curvature and ball-isoperimetry hypotheses at `points`
/// and the constant-curvature conclusion.
pub fn theorem_1_1_pipeline(
    chart: &MetricChart,
    points: &[Vec<f64>],
    k: f64,
    beta_probe: &[f64],
    opts: &PipelineOptions,
) -> Result<RigidityReport> {
    let n = chart.dim();
    check_dim(n)?;
    if points.is_empty() {
        return Err(Error::InvalidArgument("no sample points".into()));
    }
    if beta_probe.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::NonPositiveVolume(beta_probe.iter().cloned().fold(f64::INFINITY, f64::min)));
    }
    let tol = opts.tolerance;
    let nf = n as f64;
    let sc_model = nf * (nf - 1.0) * k;
    let probe_radii: Vec<f64> =
        beta_probe.iter().map(|b| (b / unit_ball_volume(n)).powf(1.0 / nf)).collect();
    let r_max = probe_radii
        .iter()
        .cloned()
        .fold(if opts.extended { opts.average_radius } else { 0.0 }, f64::max);
    let mut checks = Vec::new();
    for p in points {
        let curv = curvature_at(chart, p)?;
        checks.push(Check::new("scalar_curvature_lower_bound", CheckKind::Hypothesis, Some(p), curv.sc - sc_model, tol));
        let nchart = if r_max > 0.0 { Some(build_normal_chart(chart, p, r_max * 1.001)?) } else { None };
        for (beta, r) in beta_probe.iter().zip(&probe_radii) {
            let nc = nchart.as_ref().expect("built when probing");
            let (vol, area) = geodesic_ball_probe(nc, *r, &opts.quadrature)?;
            let model = iso_profile(n, k, vol)?;
            checks.push(Check::new(
                format!("ball_isoperimetry_probe(beta={beta})"),
                CheckKind::Probe,
                Some(p),
                area / model - 1.0,
                tol,
            ));
        }
        if opts.extended {
            checks.push(Check::new("laplacian_scalar_nonnegative", CheckKind::Hypothesis, Some(p), curv.lap_sc()?, tol));
            let nc = nchart.as_ref().expect("built in extended mode");
            let avg = ball_average_scalar(nc, opts.average_radius, &opts.quadrature)?;
            checks.push(Check::new("ball_average_scalar_lower_bound", CheckKind::Probe, Some(p), avg - sc_model, tol));
        }
        let res = constant_curvature_residual(&curv, k)?;
        for (name, v) in [
            ("rm_norm_excess", res.rm_excess),
            ("weyl_norm", res.weyl_norm),
            ("traceless_ricci_norm", res.traceless_rc_norm),
        ] {
            checks.push(Check::new(name, CheckKind::Conclusion, Some(p), -v.abs(), tol));
        }
    }
    let verdict = verdict(&checks);
    Ok(RigidityReport { n, k, points: points.to_vec(), tolerance: tol, checks, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{make_chart, ModelSpec, Profile};

    #[test]
    fn rm_bound_examples() {
        assert_eq!(rm_bound_from_mu(0.0, 0.0).unwrap(), 0.0);
        assert!((rm_bound_from_mu(0.0, 1.0).unwrap() - 6.0).abs() < 1e-14);
        assert!((rm_bound_from_mu(1.0 / 12.0, 1.0).unwrap() - 12.0).abs() < 1e-12);
        assert!(matches!(rm_bound_from_mu(1.0 / 6.0, 1.0), Err(Error::GammaOutOfRange(_))));
        let mut prev = 0.0;
        for g in [-1.0, 0.0, 0.1, 0.16] {
            let v = rm_bound_from_mu(g, 2.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(rm_bound_from_mu(0.0, 2.0).unwrap() > rm_bound_from_mu(0.0, 1.0).unwrap());
    }

    #[test]
    fn scalar_bound_examples() {
        let c = scalar_bound_check(-6.0, 1e-3, 3, 1.0);
        assert_eq!((c.margin, c.status), (0.0, Status::Satisfied));
        assert_eq!(scalar_bound_check(0.0, 1e-6, 3, 0.0).margin, 0.0);
        assert!(scalar_bound_check(0.5, 1e-6, 3, 0.0).margin > 0.0);
        assert_eq!(scalar_bound_check(-7.0, 1e-3, 3, 1.0).status, Status::Violated);
    }

    #[test]
    fn residual_examples() {
        let r = constant_curvature_residual(&CurvatureData::space_form(4, -0.5), -0.5).unwrap();
        assert!(r.max_abs() < 1e-12);
        let r = constant_curvature_residual(&CurvatureData::flat(3), 1.0).unwrap();
        assert!((r.rm_excess + 12.0).abs() < 1e-14);
        let prod = curvature_at(&make_chart(&ModelSpec::product_sphere_line(3, 1.0, 1.0)).unwrap(), &[0.0; 3]).unwrap();
        assert!((prod.sc - 2.0).abs() < 1e-8);
        let r = constant_curvature_residual(&prod, 0.0).unwrap();
        assert!(r.traceless_rc_norm > 0.5 && r.rm_excess > 1.0);
        assert!(matches!(
            constant_curvature_residual(&CurvatureData::flat(2), 0.0),
            Err(Error::DimensionTooSmall(2))
        ));
    }

    #[test]
    fn pipeline_on_models() {
        let opts = PipelineOptions::default();
        let pts = vec![vec![0.0; 3], vec![0.2, -0.1, 0.3]];
        let sphere = make_chart(&ModelSpec::space_form(3, 1.0, 2.0)).unwrap();
        let rep = theorem_1_1_pipeline(&sphere, &pts, 1.0, &[0.01, 0.05], &opts).unwrap();
        assert_eq!(rep.verdict, Verdict::ConsistentWithRigidity, "{rep:?}");
        assert!(rep.checks.iter().all(|c| c.margin.abs() < 1e-6), "{rep:?}");

        let flat = make_chart(&ModelSpec::flat(3, 2.0)).unwrap();
        let rep = theorem_1_1_pipeline(&flat, &pts, 1.0, &[0.01], &opts).unwrap();
        assert_eq!(rep.verdict, Verdict::HypothesisViolated);
        let sc = rep.checks.iter().find(|c| c.name == "scalar_curvature_lower_bound").unwrap();
        assert!((sc.margin + 6.0).abs() < 1e-6);
        assert_eq!(rep.violating_points().len(), 2);
    }

    #[test]
    fn pipeline_localizes_negative_scalar_curvature() {
        let spec = ModelSpec::conformal_flat(3, 0.05, Profile::Gaussian { center: vec![0.0; 3], width: 0.5 }, 1.5);
        let chart = make_chart(&spec).unwrap();
        let pts: Vec<Vec<f64>> = [0.0, 0.3, 0.6, 0.9].iter().map(|&x| vec![x, 0.0, 0.0]).collect();
        let signs: Vec<f64> = pts.iter().map(|p| curvature_at(&chart, p).unwrap().sc).collect();
        assert!(signs.iter().any(|s| *s < 0.0) && signs.iter().any(|s| *s > 0.0), "{signs:?}");
        let rep = theorem_1_1_pipeline(&chart, &pts, 0.0, &[], &PipelineOptions::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::HypothesisViolated);
        let bad = rep.violating_points();
        for (p, s) in pts.iter().zip(&signs) {
            assert_eq!(bad.contains(p), *s < -1e-6, "{p:?} {s}");
        }
    }

    #[test]
    fn extended_pipeline() {
        let sphere = make_chart(&ModelSpec::space_form(3, 1.0, 2.0)).unwrap();
        let opts = PipelineOptions { extended: true, ..PipelineOptions::default() };
        let rep = theorem_1_1_pipeline(&sphere, &[vec![0.1, 0.0, 0.0]], 1.0, &[], &opts).unwrap();
        assert_eq!(rep.verdict, Verdict::ConsistentWithRigidity, "{rep:?}");
        assert!(rep.checks.iter().any(|c| c.name == "ball_average_scalar_lower_bound" && c.margin.abs() < 1e-6));
    }
}
