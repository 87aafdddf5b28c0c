//! Metric charts, pointwise curvature, and normal coordinates.

mod curvature;
mod models;
mod normal;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::spaceform::radius_cap;
use crate::tensor::{check_dim, AlgebraicCurvature, CurvatureData, Sym2, Tensor3, Tensor4};

pub use curvature::{curvature_at, curvature_generic, density_series, orthonormal_frame, MetricJet};
pub use models::{Model, ModelKind, Perturbation, Profile};
pub use normal::{build_normal_chart, InvMetric, NormalChart, NormalSample, OdeSettings};

/// Description of a catalog chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n: usize,
    /// Sectional curvature of the space form, or of the sphere factor of the product.
    #[serde(default)]
    pub k: f64,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
    /// Half-width of the coordinate box.
    pub radius: f64,
}

impl ModelSpec {
    pub fn flat(n: usize, radius: f64) -> Self {
        ModelSpec { kind: ModelKind::Flat, n, k: 0.0, perturbation: None, radius }
    }

    pub fn space_form(n: usize, k: f64, radius: f64) -> Self {
        ModelSpec { kind: ModelKind::SpaceForm, n, k, perturbation: None, radius }
    }

    pub fn product_sphere_line(n: usize, k: f64, radius: f64) -> Self {
        ModelSpec { kind: ModelKind::ProductSphereLine, n, k, perturbation: None, radius }
    }

    pub fn conformal_flat(n: usize, eps: f64, profile: Profile, radius: f64) -> Self {
        ModelSpec {
            kind: ModelKind::ConformalFlat,
            n,
            k: 0.0,
            perturbation: Some(Perturbation { eps, profile }),
            radius,
        }
    }
}

/// Coordinate domain: an axis-aligned box, optionally intersected with a
/// Euclidean ball where the catalog metric degenerates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// `(number of leading coordinates, radius)`: those coordinates must have norm below radius.
    pub ball: Option<(usize, f64)>,
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.lo.len() {
            return false;
        }
        let in_box = x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *v >= *a && *v <= *b);
        in_box
            && match self.ball {
                Some((m, r)) => x[..m].iter().map(|v| v * v).sum::<f64>().sqrt() < r,
                None => true,
            }
    }

    /// Smallest box half-width, used to scale difference steps.
    pub fn scale(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (b - a))
            .fold(f64::INFINITY, f64::min)
            .min(self.ball.map_or(f64::INFINITY, |b| b.1))
    }
}

pub type MetricFn = Arc<dyn Fn(&[f64]) -> Sym2 + Send + Sync>;
pub type CurvatureFn = Arc<dyn Fn(&[f64]) -> CurvatureData + Send + Sync>;

#[derive(Clone)]
pub(crate) enum MetricSource {
    Model(Model),
    Custom(MetricFn),
}

/// A coordinate domain with a smooth positive-definite metric.
#[derive(Clone)]
pub struct MetricChart {
    n: usize,
    domain: Domain,
    source: MetricSource,
    curvature_callback: Option<CurvatureFn>,
    spec: Option<ModelSpec>,
}

impl fmt::Debug for MetricChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricChart")
            .field("n", &self.n)
            .field("domain", &self.domain)
            .field("spec", &self.spec)
            .field("curvature_callback", &self.curvature_callback.is_some())
            .finish()
    }
}

impl MetricChart {
    /// Chart from a user-supplied metric map on the box `[lo, hi]`.
    pub fn custom(lo: Vec<f64>, hi: Vec<f64>, metric: MetricFn) -> Result<Self> {
        let n = lo.len();
        check_dim(n)?;
        if hi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidSpec("empty coordinate box".into()));
        }
        let chart = MetricChart {
            n,
            domain: Domain { lo, hi, ball: None },
            source: MetricSource::Custom(metric),
            curvature_callback: None,
            spec: None,
        };
        chart.check_positive_definite()?;
        Ok(chart)
    }

    pub fn with_curvature_callback(mut self, f: CurvatureFn) -> Self {
        self.curvature_callback = Some(f);
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn spec(&self) -> Option<&ModelSpec> {
        self.spec.as_ref()
    }

    pub(crate) fn model(&self) -> Option<&Model> {
        match &self.source {
            MetricSource::Model(m) => Some(m),
            MetricSource::Custom(_) => None,
        }
    }

    pub(crate) fn callback(&self) -> Option<&CurvatureFn> {
        self.curvature_callback.as_ref()
    }

    pub(crate) fn source(&self) -> &MetricSource {
        &self.source
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        if !self.domain.contains(x) {
            return Err(Error::OutOfDomain(x.to_vec()));
        }
        Ok(())
    }

    /// Metric components at `x`.
    pub fn metric(&self, x: &[f64]) -> Result<Sym2> {
        self.check_point(x)?;
        Ok(self.metric_unchecked(x))
    }

    pub(crate) fn metric_unchecked(&self, x: &[f64]) -> Sym2 {
        match &self.source {
            MetricSource::Model(m) => Sym2::from_fn(self.n, {
                let g = m.metric(x);
                move |i, j| g[i * self.n + j]
            }),
            MetricSource::Custom(f) => f(x),
        }
    }

    /// Metric with its first and second coordinate derivatives at `x`.
    pub fn metric_jet(&self, x: &[f64]) -> Result<MetricJet> {
        self.check_point(x)?;
        Ok(match &self.source {
            MetricSource::Model(m) => MetricJet::from_jets(self.n, &m.metric(&Jet::point(x))),
            MetricSource::Custom(f) => MetricJet::by_differences(self, f, x),
        })
    }

    fn check_positive_definite(&self) -> Result<()> {
        let n = self.n;
        let mut probes = vec![self.domain.lo.iter().zip(&self.domain.hi).map(|(a, b)| 0.5 * (a + b)).collect::<Vec<_>>()];
        // box corners and face centres pulled slightly inward
        for mask in 0..(1usize << n) {
            let p: Vec<f64> = (0..n)
                .map(|i| {
                    let (a, b) = (self.domain.lo[i], self.domain.hi[i]);
                    let c = 0.5 * (a + b);
                    let h = 0.45 * (b - a);
                    if mask & (1 << i) != 0 { c + h } else { c - h }
                })
                .collect();
            probes.push(p);
        }
        for i in 0..n {
            for s in [-1.0, 1.0] {
                let mut p = probes[0].clone();
                p[i] += s * 0.45 * (self.domain.hi[i] - self.domain.lo[i]);
                probes.push(p);
            }
        }
        for p in probes.into_iter().filter(|p| self.domain.contains(p)) {
            let g = self.metric_unchecked(&p);
            let m = DMatrix::from_row_slice(n, n, g.as_slice());
            if m.iter().any(|v| !v.is_finite()) || m.cholesky().is_none() {
                return Err(Error::InvalidSpec(format!("metric is not positive definite at {p:?}")));
            }
        }
        Ok(())
    }
}

fn parallel_product_curvature(n: usize, k: f64) -> CurvatureData {
    let m = n - 1;
    let rm = Tensor4::from_fn(n, |i, j, a, b| {
        if i < m && j < m && a < m && b < m {
            let d = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
            k * (d(i, a) * d(j, b) - d(i, b) * d(j, a))
        } else {
            0.0
        }
    });
    let rm = AlgebraicCurvature::new(rm).expect("product curvature has curvature symmetries");
    let mut c = CurvatureData::parallel(rm);
    c.grad_rc = Some(Tensor3::zeros(n));
    c
}

/// Builds a catalog chart.
pub fn make_chart(spec: &ModelSpec) -> Result<MetricChart> {
    let n = spec.n;
    check_dim(n)?;
    if !(spec.radius > 0.0 && spec.radius.is_finite()) {
        return Err(Error::InvalidSpec(format!("radius must be positive, got {}", spec.radius)));
    }
    if !spec.k.is_finite() {
        return Err(Error::InvalidSpec("curvature must be finite".into()));
    }
    let mut ball = None;
    match spec.kind {
        ModelKind::Flat => {}
        ModelKind::SpaceForm => {
            if spec.k > 0.0 && spec.radius >= radius_cap(spec.k) {
                return Err(Error::InvalidSpec(format!(
                    "radius {} reaches the antipodal distance {} of the sphere",
                    spec.radius,
                    radius_cap(spec.k)
                )));
            }
            if spec.k > 0.0 {
                ball = Some((n, spec.radius));
            }
        }
        ModelKind::ProductSphereLine => {
            if n < 3 {
                return Err(Error::InvalidSpec("the product needs n >= 3".into()));
            }
            if !(spec.k > 0.0) {
                return Err(Error::InvalidSpec("the sphere factor needs k > 0".into()));
            }
            if spec.radius >= radius_cap(spec.k) {
                return Err(Error::InvalidSpec(format!(
                    "radius {} reaches the antipodal distance {} of the sphere factor",
                    spec.radius,
                    radius_cap(spec.k)
                )));
            }
            ball = Some((n - 1, spec.radius));
        }
        ModelKind::ConformalFlat => {
            if spec.perturbation.is_none() {
                return Err(Error::InvalidSpec("conformal_flat needs a perturbation".into()));
            }
        }
    }
    if let Some(p) = &spec.perturbation {
        if p.profile.dim() != n {
            return Err(Error::InvalidSpec(format!(
                "perturbation profile has dimension {}, chart has {n}",
                p.profile.dim()
            )));
        }
        if !p.eps.is_finite() {
            return Err(Error::InvalidSpec("perturbation amplitude must be finite".into()));
        }
        if let Profile::Gaussian { width, .. } = &p.profile {
            if !(*width > 0.0) {
                return Err(Error::InvalidSpec("Gaussian profile width must be positive".into()));
            }
        }
    }
    let model = Model { kind: spec.kind, n, k: spec.k, perturbation: spec.perturbation.clone() };
    let callback: Option<CurvatureFn> = if spec.perturbation.is_some() {
        None
    } else {
        let k = spec.k;
        match spec.kind {
            ModelKind::Flat | ModelKind::ConformalFlat => Some(Arc::new(move |_: &[f64]| CurvatureData::flat(n))),
            ModelKind::SpaceForm => Some(Arc::new(move |_: &[f64]| CurvatureData::space_form(n, k))),
            ModelKind::ProductSphereLine => Some(Arc::new(move |_: &[f64]| parallel_product_curvature(n, k))),
        }
    };
    let chart = MetricChart {
        n,
        domain: Domain { lo: vec![-spec.radius; n], hi: vec![spec.radius; n], ball },
        source: MetricSource::Model(model),
        curvature_callback: callback,
        spec: Some(spec.clone()),
    };
    chart.check_positive_definite()?;
    Ok(chart)
}
