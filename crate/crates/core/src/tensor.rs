//! Dense curvature tensor algebra at a single point, in an orthonormal frame.
//!
//! Sign convention: `Rm(e_i, e_j, e_k, e_l) = <R(e_i, e_j) e_l, e_k>`, so a
//! space form of curvature `K` has `R_ijij = K` on orthonormal pairs and
//! `|Rm|^2 = 2 n (n - 1) K^2`. The Ricci tensor is `Rc_ij = sum_s R_isjs`.
//! Norms are full index sums of squared components.

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest dimension the dense routines are meant for.
pub const MAX_DIM: usize = 6;

pub(crate) fn check_dim(n: usize) -> Result<()> {
    if (2..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n))
    }
}

/// Symmetric 2-tensor stored as a dense row-major `n x n` matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sym2 {
    n: usize,
    data: Vec<f64>,
}

impl Sym2 {
    pub fn zeros(n: usize) -> Self {
        Sym2 { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        let mut s = Self::zeros(n);
        for i in 0..n {
            s.data[i * n + i] = c;
        }
        s
    }

    /// Builds the symmetric part of the matrix produced by `f`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = if i == j { f(i, i) } else { 0.5 * (f(i, j) + f(j, i)) };
                s.data[i * n + j] = v;
                s.data[j * n + i] = v;
            }
        }
        s
    }

    /// Row-major entries; rejects input that is not symmetric to `1e-12` relative.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: data.len() });
        }
        let scale = data.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (data[i * n + j] - data[j * n + i]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| data[i * n + j]))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `sum_ij A_ij B_ij`
    pub fn dot(&self, other: &Sym2) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// `A_ij x^i x^j`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let mut r = 0.0;
            for j in 0..n {
                r += row[j] * x[j];
            }
            s += r * x[i];
        }
        s
    }

    /// `y_i = A_ij x^j`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn scale(&self, c: f64) -> Sym2 {
        Sym2 { n: self.n, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Sym2) -> Result<Sym2> {
        self.same_dim(other)?;
        Ok(Sym2 { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() })
    }

    pub fn sub(&self, other: &Sym2) -> Result<Sym2> {
        self.same_dim(other)?;
        Ok(Sym2 { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() })
    }

    /// `A - (tr A / n) delta`
    pub fn traceless(&self) -> Sym2 {
        let c = self.trace() / self.n as f64;
        let mut t = self.clone();
        for i in 0..self.n {
            t.data[i * self.n + i] -= c;
        }
        t
    }

    /// `tr(A^2) = sum_ij A_ij A_ji`
    pub fn trace_of_square(&self) -> f64 {
        self.norm_sq()
    }

    fn same_dim(&self, other: &Sym2) -> Result<()> {
        if self.n == other.n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.n, got: other.n })
        }
    }
}

/// Dense 3-index array, used for `nabla_k R_ij` stored at `(i, j, k)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 { n, data: vec![0.0; n * n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    t.data[(i * n + j) * n + k] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    pub fn scale(&self, c: f64) -> Tensor3 {
        Tensor3 { n: self.n, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn contract_full(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    s += self.get(i, j, k) * x[i] * x[j] * x[k];
                }
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Dense 4-index array.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Tensor4 { n, data: vec![0.0; n * n * n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let idx = t.index(i, j, k, l);
                        t.data[idx] = f(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    /// `(a ⊗ b)_ijkl = a_ij b_kl`
    pub fn outer(a: &Sym2, b: &Sym2) -> Result<Tensor4> {
        a.same_dim(b)?;
        Ok(Self::from_fn(a.n, |i, j, k, l| a.get(i, j) * b.get(k, l)))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.index(i, j, k, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let idx = self.index(i, j, k, l);
        self.data[idx] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn dot(&self, other: &Tensor4) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> Tensor4 {
        Tensor4 { n: self.n, data: self.data.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Tensor4) -> Result<Tensor4> {
        self.same_dim(other)?;
        Ok(Tensor4 { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() })
    }

    pub fn sub(&self, other: &Tensor4) -> Result<Tensor4> {
        self.same_dim(other)?;
        Ok(Tensor4 { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() })
    }

    /// `T_ijkl x^i x^j x^k x^l`
    pub fn contract_full(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let xij = x[i] * x[j];
                for k in 0..n {
                    let xijk = xij * x[k];
                    for l in 0..n {
                        s += self.get(i, j, k, l) * xijk * x[l];
                    }
                }
            }
        }
        s
    }

    /// Largest violation of the algebraic curvature symmetries
    /// (both antisymmetries, pair symmetry, first Bianchi identity).
    pub fn curvature_symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.get(i, j, k, l);
                        worst = worst
                            .max((r + self.get(j, i, k, l)).abs())
                            .max((r + self.get(i, j, l, k)).abs())
                            .max((r - self.get(k, l, i, j)).abs())
                            .max((r + self.get(i, k, l, j) + self.get(i, l, j, k)).abs());
                    }
                }
            }
        }
        worst
    }

    fn same_dim(&self, other: &Tensor4) -> Result<()> {
        if self.n == other.n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.n, got: other.n })
        }
    }
}

/// A 4-tensor with the symmetries of a Riemann curvature tensor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlgebraicCurvature(Tensor4);

impl AlgebraicCurvature {
    /// Symmetry tolerance used when wrapping a tensor, relative to its largest entry.
    pub const SYMMETRY_TOL: f64 = 1e-10;

    pub fn new(t: Tensor4) -> Result<Self> {
        let scale = t.max_abs().max(1.0);
        let res = t.curvature_symmetry_residual();
        if res > Self::SYMMETRY_TOL * scale {
            return Err(Error::InvalidArgument(format!(
                "tensor violates curvature symmetries (residual {res:e})"
            )));
        }
        Ok(AlgebraicCurvature(t))
    }

    pub fn zeros(n: usize) -> Self {
        AlgebraicCurvature(Tensor4::zeros(n))
    }

    /// Constant sectional curvature `k`: `(k/2) delta ⊙ delta`.
    pub fn space_form(n: usize, k: f64) -> Self {
        AlgebraicCurvature(Tensor4::from_fn(n, |i, j, a, b| {
            let d = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
            k * (d(i, a) * d(j, b) - d(i, b) * d(j, a))
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.n
    }

    pub fn tensor(&self) -> &Tensor4 {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor4 {
        self.0
    }

    pub fn ricci(&self) -> Sym2 {
        let n = self.0.n;
        Sym2::from_fn(n, |i, j| (0..n).map(|s| self.0.get(i, s, j, s)).sum())
    }

    pub fn scalar(&self) -> f64 {
        self.ricci().trace()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.norm_sq()
    }
}

/// Pointwise curvature package in an orthonormal frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvatureData {
    pub rm: AlgebraicCurvature,
    pub rc: Sym2,
    pub sc: f64,
    pub grad_sc: Vec<f64>,
    pub lap_sc: Option<f64>,
    /// `nabla_k R_ij` stored at `(i, j, k)`.
    pub grad_rc: Option<Tensor3>,
    /// `nabla_k nabla_l R_ij` stored at `(i, j, k, l)`.
    pub hess_rc: Option<Tensor4>,
}

impl CurvatureData {
    /// Curvature with all covariant derivatives equal to zero (locally symmetric data).
    pub fn parallel(rm: AlgebraicCurvature) -> Self {
        let n = rm.dim();
        let rc = rm.ricci();
        let sc = rc.trace();
        CurvatureData {
            rm,
            rc,
            sc,
            grad_sc: vec![0.0; n],
            lap_sc: Some(0.0),
            grad_rc: Some(Tensor3::zeros(n)),
            hess_rc: Some(Tensor4::zeros(n)),
        }
    }

    pub fn flat(n: usize) -> Self {
        Self::parallel(AlgebraicCurvature::zeros(n))
    }

    pub fn space_form(n: usize, k: f64) -> Self {
        Self::parallel(AlgebraicCurvature::space_form(n, k))
    }

    pub fn dim(&self) -> usize {
        self.rm.dim()
    }

    pub fn rm_norm_sq(&self) -> f64 {
        self.rm.norm_sq()
    }

    pub fn rc_norm_sq(&self) -> f64 {
        self.rc.norm_sq()
    }

    pub fn lap_sc(&self) -> Result<f64> {
        self.lap_sc.ok_or(Error::MissingField("lap_sc"))
    }
}

/// `E(lambda) = sum_ij (lambda_iijj + lambda_ijij + lambda_ijji)`, the
/// contraction produced by quartic Gaussian moments.
pub fn e_functional(lambda: &Tensor4) -> f64 {
    let n = lambda.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += lambda.get(i, i, j, j) + lambda.get(i, j, i, j) + lambda.get(i, j, j, i);
        }
    }
    s
}

/// Quartic coefficient of the normal-coordinate volume density:
/// `v_ijkl = (1/24)(-(3/5) nabla_k nabla_l R_ij - (2/15) sum_st R_isjt R_kslt + (1/3) R_ij R_kl)`.
pub fn v_tensor(curv: &CurvatureData) -> Result<Tensor4> {
    let hess = curv.hess_rc.as_ref().ok_or(Error::MissingHessian)?;
    let n = curv.dim();
    if hess.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: hess.dim() });
    }
    let rm = curv.rm.tensor();
    let rc = &curv.rc;
    Ok(Tensor4::from_fn(n, |i, j, k, l| {
        let mut rr = 0.0;
        for s in 0..n {
            for t in 0..n {
                rr += rm.get(i, s, j, t) * rm.get(k, s, l, t);
            }
        }
        (-(3.0 / 5.0) * hess.get(i, j, k, l) - (2.0 / 15.0) * rr
            + (1.0 / 3.0) * rc.get(i, j) * rc.get(k, l))
            / 24.0
    }))
}

/// Kulkarni–Nomizu product
/// `(h ⊙ k)_ijkl = h_ik k_jl + h_jl k_ik - h_il k_jk - h_jk k_il`.
pub fn kulkarni_nomizu(h: &Sym2, k: &Sym2) -> Result<Tensor4> {
    h.same_dim(k)?;
    Ok(Tensor4::from_fn(h.dim(), |i, j, a, b| {
        h.get(i, a) * k.get(j, b) + h.get(j, b) * k.get(i, a)
            - h.get(i, b) * k.get(j, a)
            - h.get(j, a) * k.get(i, b)
    }))
}

/// Orthogonal splitting `Rm = scalar part + traceless-Ricci part + Weyl`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeylDecomposition {
    pub scalar_part: Tensor4,
    pub traceless_ricci_part: Tensor4,
    pub weyl: Tensor4,
}

pub fn weyl_decompose(rm: &AlgebraicCurvature) -> Result<WeylDecomposition> {
    let n = rm.dim();
    if n < 3 {
        return Err(Error::DimensionTooSmall(n));
    }
    let nf = n as f64;
    let g = Sym2::identity(n);
    let rc = rm.ricci();
    let sc = rc.trace();
    let gg = kulkarni_nomizu(&g, &g)?;
    let scalar_part = gg.scale(sc / (2.0 * nf * (nf - 1.0)));
    let traceless_ricci_part = kulkarni_nomizu(&rc.traceless(), &g)?.scale(1.0 / (nf - 2.0));
    let weyl = rm.tensor().sub(&scalar_part)?.sub(&traceless_ricci_part)?;
    Ok(WeylDecomposition { scalar_part, traceless_ricci_part, weyl })
}
