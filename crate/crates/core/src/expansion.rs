//! Closed-form small-`t` coefficients and their numerical extraction from
//! sampled functional values.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{eval_l, eval_w, TestFunction};
use crate::quadrature::QuadratureSpec;
use crate::tensor::{CurvatureData, Sym2};

/// Coefficients of `c0 + c1 t + c2 t^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesCoefficients {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub stderr: [f64; 3],
    /// Largest deviation of the fitted model from the samples, relative to the largest sample.
    pub fit_residual: f64,
    /// Drift between the full-grid and half-grid fits.
    pub systematic: [f64; 3],
    pub condition: f64,
}

impl SeriesCoefficients {
    pub fn exact(c0: f64, c1: f64, c2: f64) -> Self {
        SeriesCoefficients { c0, c1, c2, stderr: [0.0; 3], fit_residual: 0.0, systematic: [0.0; 3], condition: 1.0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.c0 + self.c1 * t + self.c2 * t * t
    }
}

fn a_excess(curv: &CurvatureData, a: &Sym2) -> Result<f64> {
    Ok(a.sub(&curv.rc.scale(1.0 / 3.0))?.norm_sq())
}

/// Series of the log-Sobolev functional for `eta^2 = 1 + a(x,x) + alpha t + ...`.
pub fn predict_l(curv: &CurvatureData, a: &Sym2, alpha: f64) -> Result<SeriesCoefficients> {
    let lap = curv.lap_sc()?;
    let sc = curv.sc;
    let c2 = -(lap - sc * sc / 3.0 + 2.0 * a.trace() * sc + alpha * sc + curv.rm_norm_sq() / 6.0
        - 4.0 * a_excess(curv, a)?);
    Ok(SeriesCoefficients::exact(0.0, -sc, c2))
}

/// Series of the functional with the scalar-curvature term; independent of `alpha`.
pub fn predict_w(curv: &CurvatureData, a: &Sym2) -> Result<SeriesCoefficients> {
    curv.lap_sc()?;
    let c2 = -(curv.rm_norm_sq() / 6.0 - 4.0 * a_excess(curv, a)?);
    Ok(SeriesCoefficients::exact(0.0, 0.0, c2))
}

/// Series of `t int Sc u^2 dmu`.
pub fn predict_scalar_term(curv: &CurvatureData, a: &Sym2, alpha: f64) -> Result<SeriesCoefficients> {
    let lap = curv.lap_sc()?;
    if a.dim() != curv.dim() {
        return Err(Error::DimensionMismatch { expected: curv.dim(), got: a.dim() });
    }
    let sc = curv.sc;
    Ok(SeriesCoefficients::exact(0.0, sc, lap - sc * sc / 3.0 + 2.0 * a.trace() * sc + alpha * sc))
}

/// `(r^2, r^4)` coefficients of `Vol(B(p,r)) / (omega_n r^n) - 1`.
pub fn predict_volume(curv: &CurvatureData) -> Result<(f64, f64)> {
    let lap = curv.lap_sc()?;
    let n = curv.dim() as f64;
    let sc = curv.sc;
    let r2 = -sc / (6.0 * (n + 2.0));
    let r4 = -(lap - 5.0 / 18.0 * sc * sc + curv.rm_norm_sq() / 6.0 - 4.0 / 9.0 * curv.rc_norm_sq())
        / (20.0 * (n + 2.0) * (n + 4.0));
    Ok((r2, r4))
}

/// Geometric grid of decreasing times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TGrid {
    pub values: Vec<f64>,
    pub refinement_factor: f64,
}

impl TGrid {
    pub fn geometric(t_max: f64, points: usize, factor: f64) -> Result<TGrid> {
        if !(t_max > 0.0) || !(factor > 0.0 && factor < 1.0) || points < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs t_max > 0, 0 < factor < 1 and two or more points (got {t_max}, {factor}, {points})"
            )));
        }
        let values = (0..points).map(|i| t_max * factor.powf(i as f64)).collect();
        Ok(TGrid { values, refinement_factor: factor })
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.iter().any(|t| !(*t > 0.0)) || self.values.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidArgument("t grid must be positive and strictly decreasing".into()));
        }
        Ok(())
    }
}

impl Default for TGrid {
    /// Nine points from `1e-3` with ratio `1/sqrt 2`.
    fn default() -> Self {
        TGrid::geometric(1e-3, 9, std::f64::consts::FRAC_1_SQRT_2).expect("valid default grid")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub value: f64,
    pub quad_error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesModel {
    /// `c1 t + c2 t^2`
    Linear,
    /// `c0 + c1 t + c2 t^2`
    WithConstant,
}

pub const MAX_CONDITION: f64 = 1e8;

/// Weighted least squares on a subset; columns are powers of `t / t_scale`.
fn fit(samples: &[Sample], model: SeriesModel, t_scale: f64) -> Result<SeriesCoefficients> {
    let powers: &[i32] = match model {
        SeriesModel::Linear => &[1, 2],
        SeriesModel::WithConstant => &[0, 1, 2],
    };
    let m = samples.len();
    let p = powers.len();
    let floor = |s: &Sample| (s.quad_error * s.quad_error + (1e-14 * s.value).powi(2)).sqrt();
    let smax = samples.iter().map(floor).fold(0.0, f64::max);
    let sigma: Vec<f64> = samples
        .iter()
        .map(|s| {
            let v = floor(s);
            if v > 0.0 { v } else if smax > 0.0 { smax } else { 1.0 }
        })
        .collect();
    let a = DMatrix::from_fn(m, p, |i, j| (samples[i].t / t_scale).powi(powers[j]) / sigma[i]);
    let b = DVector::from_fn(m, |i, _| samples[i].value / sigma[i]);
    let svd = a.clone().svd(true, true);
    let smax_sv = svd.singular_values.max();
    let smin_sv = svd.singular_values.min();
    let condition = if smin_sv > 0.0 { smax_sv / smin_sv } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditionedFit { condition });
    }
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let mut beta = DVector::<f64>::zeros(p);
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for k in 0..p {
        let sk = svd.singular_values[k];
        let coef = u.column(k).dot(&b) / sk;
        for i in 0..p {
            beta[i] += vt[(k, i)] * coef;
            for j in 0..p {
                cov[(i, j)] += vt[(k, i)] * vt[(k, j)] / (sk * sk);
            }
        }
    }
    let resid = &a * &beta - &b;
    let dof = m.saturating_sub(p).max(1) as f64;
    let chi2 = resid.norm_squared() / dof;
    let inflate = chi2.max(1.0);
    let mut c = [0.0; 3];
    let mut se = [0.0; 3];
    for (j, &pw) in powers.iter().enumerate() {
        let scale = t_scale.powi(pw);
        c[pw as usize] = beta[j] / scale;
        se[pw as usize] = (cov[(j, j)] * inflate).sqrt() / scale;
    }
    let vmax = samples.iter().map(|s| s.value.abs()).fold(0.0, f64::max);
    let fit_residual = samples
        .iter()
        .map(|s| (c[0] + c[1] * s.t + c[2] * s.t * s.t - s.value).abs())
        .fold(0.0, f64::max)
        / if vmax > 0.0 { vmax } else { 1.0 };
    Ok(SeriesCoefficients { c0: c[0], c1: c[1], c2: c[2], stderr: se, fit_residual, systematic: [0.0; 3], condition })
}

/// Fits the series on all samples and on the smaller-`t` half; the half-grid
/// fit is returned with the drift between the two as systematic error.
pub fn extract_series(samples: &[Sample], model: SeriesModel) -> Result<SeriesCoefficients> {
    if samples.len() < 6 {
        return Err(Error::InsufficientSamples(format!("need at least 6 samples, got {}", samples.len())));
    }
    if samples.iter().any(|s| !(s.t > 0.0) || !s.value.is_finite() || !(s.quad_error >= 0.0)) {
        return Err(Error::InvalidArgument("samples need t > 0, finite values and nonnegative errors".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let (t_min, t_max) = (sorted[0].t, sorted[sorted.len() - 1].t);
    if t_max < 8.0 * t_min {
        return Err(Error::InsufficientSamples(format!("t range {t_min}..{t_max} spans less than a factor 8")));
    }
    let full = fit(&sorted, model, t_max)?;
    let p = if model == SeriesModel::Linear { 2 } else { 3 };
    let half_len = sorted.len().div_ceil(2).max(p + 2);
    let half_set = &sorted[..half_len];
    let half = fit(half_set, model, half_set[half_len - 1].t)?;

    let signal = (full.c2 * t_max * t_max).abs();
    let noise = sorted.iter().map(|s| s.quad_error).fold(0.0, f64::max);
    if noise > 1e-12 && noise > 0.25 * signal {
        return Err(Error::NoiseDominates { ratio: noise / signal.max(f64::MIN_POSITIVE) });
    }
    Ok(SeriesCoefficients {
        systematic: [(half.c0 - full.c0).abs(), (half.c1 - full.c1).abs(), (half.c2 - full.c2).abs()],
        ..half
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    L,
    W,
}

/// Evaluates the functional on every grid point.
pub fn sample_functional(tf: &TestFunction, which: Functional, grid: &TGrid, q: &QuadratureSpec) -> Result<Vec<Sample>> {
    grid.validate()?;
    grid.values
        .iter()
        .map(|&t| {
            let v = match which {
                Functional::L => eval_l(tf, t, q)?,
                Functional::W => eval_w(tf, t, q)?,
            };
            Ok(Sample { t, value: v.value, quad_error: v.quad_error_estimate })
        })
        .collect()
}
