//! One runner per experiment; each returns an [`Outcome`] and never touches the filesystem.

use std::collections::BTreeMap;

use curvex_core::charts::{build_normal_chart, make_chart, ModelKind, NormalChart};
use curvex_core::expansion::{
    extract_series, predict_l, predict_volume, predict_w, sample_functional, Functional, Sample,
    SeriesCoefficients, SeriesModel,
};
use curvex_core::functionals::{ball_volume, bishop_gromov_ratio, build_test_function, AMode, TestFunction};
use curvex_core::isoperimetry::{geodesic_ball_probe, iso_profile, symmetrization_chain};
use curvex_core::moments::selftest;
use curvex_core::mu_solver::{minimize_w, mu_bound_report, resolved_nodes, Init, RadialDomain};
use curvex_core::rigidity::{theorem_1_1_pipeline, PipelineOptions, Verdict};
use curvex_core::spaceform::unit_ball_volume;
use curvex_core::tensor::CurvatureData;
use curvex_core::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{AlphaChoice, Experiment, RunConfig, TolerancePolicy};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Predicted {
    pub c1: f64,
    pub c2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Extracted {
    pub c1: f64,
    pub c2: f64,
    pub stderr: Predicted,
    pub systematic: Predicted,
}

impl From<&SeriesCoefficients> for Extracted {
    fn from(s: &SeriesCoefficients) -> Self {
        Extracted {
            c1: s.c1,
            c2: s.c2,
            stderr: Predicted { c1: s.stderr[1], c2: s.stderr[2] },
            systematic: Predicted { c1: s.systematic[1], c2: s.systematic[2] },
        }
    }
}

/// Series data behind a plot: samples, the fit and the prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotSeries {
    pub samples: Vec<Sample>,
    pub fit: SeriesCoefficients,
    pub prediction: SeriesCoefficients,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub experiment: Experiment,
    pub predicted: Option<Predicted>,
    pub extracted: Option<Extracted>,
    pub pass: bool,
    pub margins: BTreeMap<String, f64>,
    pub details: Value,
    pub plot: Option<PlotSeries>,
}

impl Outcome {
    fn new(experiment: Experiment) -> Self {
        Outcome {
            experiment,
            predicted: None,
            extracted: None,
            pass: false,
            margins: BTreeMap::new(),
            details: Value::Null,
            plot: None,
        }
    }
}

pub fn run_experiment(cfg: &RunConfig, experiment: Experiment) -> Result<Outcome, CliError> {
    match experiment {
        Experiment::ExpandL => expansion(cfg, Functional::L),
        Experiment::ExpandW => expansion(cfg, Functional::W),
        Experiment::Volume => volume(cfg),
        Experiment::Isoprofile => isoprofile(cfg),
        Experiment::Symmetrize => symmetrize(cfg),
        Experiment::Mu => mu(cfg),
        Experiment::Rigidity => rigidity(cfg),
        Experiment::MomentsSelftest => moments(cfg),
    }
}

fn normal_chart(cfg: &RunConfig, radius: f64) -> Result<NormalChart, CliError> {
    let chart = make_chart(&cfg.chart.spec)?;
    Ok(build_normal_chart(&chart, &cfg.chart.point, radius)?)
}

/// The configured test function with `a` and `alpha` resolved against the curvature at the base point.
fn test_function(cfg: &RunConfig) -> Result<(TestFunction, CurvatureData), CliError> {
    let tfc = &cfg.test_function;
    let nc = normal_chart(cfg, tfc.support_radius)?;
    let curv = nc.center_curvature()?;
    let a = tfc.a_matrix(nc.dim()).unwrap_or_else(|| curv.rc.scale(1.0 / 3.0));
    let alpha = match tfc.alpha {
        AlphaChoice::Optimal => -curv.sc / 3.0,
        AlphaChoice::Value(v) => v,
    };
    Ok((build_test_function(&nc, AMode::Custom(a), alpha, tfc.support_radius)?, curv))
}

fn expansion(cfg: &RunConfig, which: Functional) -> Result<Outcome, CliError> {
    let (tf, curv) = test_function(cfg)?;
    let pred = match which {
        Functional::L => predict_l(&curv, &tf.a, tf.alpha)?,
        Functional::W => predict_w(&curv, &tf.a)?,
    };
    let samples = sample_functional(&tf, which, &cfg.t_grid.grid()?, &cfg.quadrature)?;
    let fit = extract_series(&samples, cfg.t_grid.model)?;
    let tol = &cfg.tolerance;
    let mut out = Outcome::new(match which {
        Functional::L => Experiment::ExpandL,
        Functional::W => Experiment::ExpandW,
    });
    out.pass = TolerancePolicy::accepts(tol.c1_rtol, tol.c1_atol, fit.c1, pred.c1)
        && TolerancePolicy::accepts(tol.c2_rtol, tol.c2_atol, fit.c2, pred.c2);
    out.margins.insert("c1_abs_error".into(), (fit.c1 - pred.c1).abs());
    out.margins.insert("c2_abs_error".into(), (fit.c2 - pred.c2).abs());
    out.margins.insert("c1_rel_error".into(), rel(fit.c1, pred.c1));
    out.margins.insert("c2_rel_error".into(), rel(fit.c2, pred.c2));
    out.details = json!({
        "a": tf.a.as_slice(),
        "alpha": tf.alpha,
        "scalar_curvature": curv.sc,
        "rm_norm_sq": curv.rm_norm_sq(),
        "lap_sc": curv.lap_sc,
        "positivity_clamped": tf.positivity_clamped,
        "fit": fit,
        "samples": samples,
    });
    out.predicted = Some(Predicted { c1: pred.c1, c2: pred.c2 });
    out.extracted = Some(Extracted::from(&fit));
    out.plot = Some(PlotSeries { samples, fit, prediction: pred });
    Ok(out)
}

fn rel(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        (got - want).abs() / want.abs()
    }
}

fn volume(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let vc = &cfg.volume;
    let n = cfg.chart.spec.n;
    let nc = normal_chart(cfg, vc.r_max * 1.001)?;
    let curv = nc.center_curvature()?;
    let (p1, p2) = predict_volume(&curv)?;
    let mut radii = vc.radii();
    let samples = radii
        .iter()
        .map(|&r| {
            let v = ball_volume(&nc, r, &cfg.quadrature)?;
            Ok(Sample { t: r * r, value: v / (unit_ball_volume(n) * r.powi(n as i32)) - 1.0, quad_error: 0.0 })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let fit = extract_series(&samples, SeriesModel::Linear)?;
    radii.reverse();
    let ratios = bishop_gromov_ratio(&nc, vc.k_model, &radii, &cfg.quadrature)?;
    let max_increase = ratios.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let tol = &cfg.tolerance;
    // absolute floor at the volume quadrature noise
    let floor = 1e-9;
    let mut out = Outcome::new(Experiment::Volume);
    out.pass = TolerancePolicy::accepts(tol.volume_c1_rtol, floor, fit.c1, p1)
        && TolerancePolicy::accepts(tol.volume_c2_rtol, floor, fit.c2, p2);
    out.margins.insert("r2_rel_error".into(), rel(fit.c1, p1));
    out.margins.insert("r4_rel_error".into(), rel(fit.c2, p2));
    out.margins.insert("bishop_gromov_max_increase".into(), max_increase);
    out.details = json!({
        "radii": radii,
        "bishop_gromov_ratios": ratios,
        "k_model": vc.k_model,
        "fit": fit,
        "samples": samples,
    });
    let pred = SeriesCoefficients::exact(0.0, p1, p2);
    out.predicted = Some(Predicted { c1: p1, c2: p2 });
    out.extracted = Some(Extracted::from(&fit));
    out.plot = Some(PlotSeries { samples, fit, prediction: pred });
    Ok(out)
}

fn isoprofile(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ic = &cfg.isoprofile;
    let n = cfg.chart.spec.n;
    let radii: Vec<f64> = ic.betas.iter().map(|b| (b / unit_ball_volume(n)).powf(1.0 / n as f64)).collect();
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    let nc = normal_chart(cfg, r_max * 1.001)?;
    let mut out = Outcome::new(Experiment::Isoprofile);
    let mut rows = Vec::new();
    let mut worst = f64::INFINITY;
    for (beta, r) in ic.betas.iter().zip(&radii) {
        let profile = iso_profile(n, ic.k, *beta)?;
        let (vol, area) = geodesic_ball_probe(&nc, *r, &cfg.quadrature)?;
        let margin = area / iso_profile(n, ic.k, vol)? - 1.0;
        worst = worst.min(margin);
        out.margins.insert(format!("ball_probe(beta={beta})"), margin);
        rows.push(json!({ "beta": beta, "profile": profile, "radius": r, "ball_volume": vol, "ball_area": area }));
    }
    out.pass = worst >= -cfg.tolerance.isoperimetry;
    out.details = json!({ "k": ic.k, "probes": rows });
    Ok(out)
}

fn symmetrize(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sc = &cfg.symmetrize;
    let (tf, _) = test_function(cfg)?;
    let rep = symmetrization_chain(&tf, sc.t, sc.k, sc.levels, &cfg.quadrature)?;
    let relative = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    let mass = relative(rep.model.mass, rep.chart.mass);
    let entropy = relative(rep.model.entropy, rep.chart.entropy);
    let coarea = relative(rep.chart_dirichlet_coarea, rep.chart.dirichlet);
    let gap = (rep.chart.dirichlet - rep.model.dirichlet) / rep.chart.dirichlet;
    let tol = cfg.tolerance.preservation;
    let mut out = Outcome::new(Experiment::Symmetrize);
    out.pass = mass <= tol && entropy <= tol && coarea <= tol && rep.equimeasure_error <= tol && gap >= -tol;
    out.margins.insert("mass_rel_error".into(), mass);
    out.margins.insert("entropy_rel_error".into(), entropy);
    out.margins.insert("coarea_dirichlet_rel_error".into(), coarea);
    out.margins.insert("equimeasure_error".into(), rep.equimeasure_error);
    out.margins.insert("dirichlet_rel_gap".into(), gap);
    out.margins.insert("log_sobolev_gap".into(), rep.chart_log_sobolev - rep.model_log_sobolev);
    out.details = json!({
        "t": sc.t,
        "k": sc.k,
        "levels": sc.levels,
        "chart": rep.chart,
        "model": rep.model,
        "chart_dirichlet_coarea": rep.chart_dirichlet_coarea,
        "chart_log_sobolev": rep.chart_log_sobolev,
        "model_log_sobolev": rep.model_log_sobolev,
    });
    Ok(out)
}

fn mu(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = &cfg.chart.spec;
    if !matches!(spec.kind, ModelKind::Flat | ModelKind::SpaceForm) {
        return Err(CliError::Unsupported("the mu experiment needs a flat or space_form chart".into()));
    }
    let mc = &cfg.mu;
    let (n, k) = (spec.n, spec.k);
    let mut pairs = Vec::new();
    let mut runs = Vec::new();
    let mut all_converged = true;
    for &t in &mc.t_values {
        let radius = mc.radius.unwrap_or(mc.radius_over_sqrt_t * t.sqrt());
        let nodes = mc.nodes.max(resolved_nodes(radius, t));
        let dom = RadialDomain::new(n, k, radius, nodes)?;
        let est = minimize_w(&dom, t, Init::Gaussian)?;
        all_converged &= est.converged;
        pairs.push((t, est.mu));
        runs.push(json!({
            "t": t,
            "radius": radius,
            "nodes": dom.nodes(),
            "mu": est.mu,
            "grad_norm": est.grad_norm,
            "iterations": est.iterations,
            "converged": est.converged,
            "negative_projections": est.negative_projections,
        }));
    }
    let report = mu_bound_report(&pairs, mc.gamma, mc.q_bound)?;
    let nf = n as f64;
    // |Rm|^2 / 6 of the model space
    let expected_q = nf * (nf - 1.0) * k * k / 3.0;
    let tol = &cfg.tolerance;
    let mut out = Outcome::new(Experiment::Mu);
    let in_window = pairs.iter().all(|(_, m)| *m >= tol.mu_flat_low && *m <= tol.mu_flat_high);
    out.pass = all_converged
        && if k == 0.0 { in_window } else { report.q >= expected_q * (1.0 - tol.mu_q_rtol) };
    out.margins.insert("q_minus_expected".into(), report.q - expected_q);
    out.margins.insert("q_bound_minus_q".into(), report.q_bound - report.q);
    if k == 0.0 {
        let lowest = pairs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let highest = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        out.margins.insert("mu_min_minus_low".into(), lowest - tol.mu_flat_low);
        out.margins.insert("high_minus_mu_max".into(), tol.mu_flat_high - highest);
    }
    out.details = json!({ "runs": runs, "bound": report, "expected_q": expected_q });
    let samples: Vec<Sample> = pairs.iter().map(|&(t, m)| Sample { t, value: m, quad_error: 0.0 }).collect();
    out.plot = Some(PlotSeries {
        samples,
        fit: SeriesCoefficients::exact(0.0, 0.0, -report.q),
        prediction: SeriesCoefficients::exact(0.0, 0.0, -expected_q),
    });
    Ok(out)
}

fn rigidity(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let rc = &cfg.rigidity;
    let chart = make_chart(&cfg.chart.spec)?;
    let opts = PipelineOptions {
        tolerance: rc.tolerance,
        extended: rc.extended,
        average_radius: rc.average_radius,
        quadrature: cfg.quadrature.clone(),
    };
    let report = theorem_1_1_pipeline(&chart, &rc.points, rc.k, &rc.betas, &opts)?;
    let mut out = Outcome::new(Experiment::Rigidity);
    out.pass = match rc.expect {
        Some(v) => report.verdict == v,
        None => report.verdict != Verdict::Inconclusive,
    };
    for c in &report.checks {
        let idx = c
            .point
            .as_ref()
            .and_then(|p| rc.points.iter().position(|q| q == p))
            .map(|i| format!("[p{i}]"))
            .unwrap_or_default();
        out.margins.insert(format!("{}{idx}", c.name), c.margin);
    }
    out.details = json!({
        "verdict": report.verdict,
        "expected": rc.expect,
        "violating_points": report.violating_points(),
        "checks": report.checks,
    });
    Ok(out)
}

fn moments(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mc = &cfg.moments;
    let seed = cfg.seed.unwrap_or(0);
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    let mut checks = 0;
    for &n in &mc.dims {
        for &t in &mc.t_values {
            for c in selftest(n, t, mc.trials, seed)? {
                let e = worst.entry(c.identity.to_string()).or_insert(0.0);
                *e = e.max(c.rel_error);
                checks += 1;
            }
        }
    }
    let mut out = Outcome::new(Experiment::MomentsSelftest);
    out.pass = worst.values().all(|e| *e <= cfg.tolerance.moments_rtol);
    out.details = json!({ "checks": checks, "dims": mc.dims, "t_values": mc.t_values, "trials": mc.trials });
    out.margins = worst.into_iter().map(|(k, v)| (format!("{k}_max_rel_error"), v)).collect();
    Ok(out)
}
