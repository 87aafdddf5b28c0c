//! Catalog metrics written once over [`Real`] so the same code yields values
//! and exact first and second derivatives.

use serde::{Deserialize, Serialize};

use crate::jet::Real;
use crate::spaceform::tangential_factors;

/// Smooth scalar profile used by conformal perturbations `g -> exp(2 eps phi) g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Profile {
    /// `phi(x) = exp(-|x - center|^2 / width^2)`
    Gaussian { center: Vec<f64>, width: f64 },
    /// `phi(x) = sin(wavevector . x + phase)`
    PlaneWave { wavevector: Vec<f64>, phase: f64 },
}

impl Profile {
    pub fn eval<R: Real>(&self, x: &[R]) -> R {
        match self {
            Profile::Gaussian { center, width } => {
                let mut s = x[0].lift(0.0);
                for (xi, ci) in x.iter().zip(center) {
                    let d = *xi - *ci;
                    s = s + d * d;
                }
                (-(s / (width * width))).exp()
            }
            Profile::PlaneWave { wavevector, phase } => {
                let mut s = x[0].lift(*phase);
                for (xi, ki) in x.iter().zip(wavevector) {
                    s = s + *xi * *ki;
                }
                s.sin()
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Profile::Gaussian { center, .. } => center.len(),
            Profile::PlaneWave { wavevector, .. } => wavevector.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub eps: f64,
    pub profile: Profile,
}

/// Unperturbed catalog geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Flat,
    /// Constant curvature `k`, already in normal coordinates at the origin.
    SpaceForm,
    /// `S^{n-1}(k) x R`, the sphere factor in normal coordinates at the origin
    /// and the line as the last coordinate.
    ProductSphereLine,
    /// `exp(2 eps phi) delta`; needs a perturbation.
    ConformalFlat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub n: usize,
    pub k: f64,
    pub perturbation: Option<Perturbation>,
}

fn space_form_block<R: Real>(x: &[R], k: f64, out: &mut [R], stride: usize) {
    let m = x.len();
    let mut r2 = x[0].lift(0.0);
    for xi in x {
        r2 = r2 + *xi * *xi;
    }
    let (s2, t) = tangential_factors(r2 * k);
    for i in 0..m {
        for j in 0..m {
            let mut v = x[i] * x[j] * t * k;
            if i == j {
                v = v + s2;
            }
            out[i * stride + j] = v;
        }
    }
}

impl Model {
    /// Row-major metric components at `x`.
    pub fn metric<R: Real>(&self, x: &[R]) -> Vec<R> {
        let n = self.n;
        let zero = x[0].lift(0.0);
        let one = x[0].lift(1.0);
        let mut g = vec![zero; n * n];
        match self.kind {
            ModelKind::Flat | ModelKind::ConformalFlat => {
                for i in 0..n {
                    g[i * n + i] = one;
                }
            }
            ModelKind::SpaceForm => space_form_block(x, self.k, &mut g, n),
            ModelKind::ProductSphereLine => {
                space_form_block(&x[..n - 1], self.k, &mut g, n);
                g[n * n - 1] = one;
            }
        }
        if let Some(p) = &self.perturbation {
            let c = (p.profile.eval(x) * (2.0 * p.eps)).exp();
            for v in g.iter_mut() {
                *v = *v * c;
            }
        }
        g
    }

    /// Whether coordinates centred at the origin are already normal coordinates.
    pub fn normal_at_origin(&self) -> bool {
        self.perturbation.is_none()
            && matches!(self.kind, ModelKind::Flat | ModelKind::SpaceForm | ModelKind::ProductSphereLine)
    }
}
