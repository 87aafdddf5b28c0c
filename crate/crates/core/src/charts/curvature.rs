use nalgebra::DMatrix;
use serde::Serialize;

use super::{MetricChart, MetricFn, MetricSource};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::tensor::{v_tensor, AlgebraicCurvature, CurvatureData, Sym2, Tensor3, Tensor4};

/// Metric components with first and second coordinate derivatives at a point.
/// `dg[(k n + i) n + j] = d_k g_ij`, `ddg[((k n + l) n + i) n + j] = d_k d_l g_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricJet {
    pub n: usize,
    pub g: Vec<f64>,
    pub dg: Vec<f64>,
    pub ddg: Vec<f64>,
}

/// Relative difference step for metric derivatives of user-supplied charts.
const METRIC_STEP: f64 = 2e-3;

impl MetricJet {
    pub(crate) fn from_jets(n: usize, comps: &[Jet]) -> Self {
        let mut g = vec![0.0; n * n];
        let mut dg = vec![0.0; n * n * n];
        let mut ddg = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                let c = &comps[i * n + j];
                g[i * n + j] = c.v;
                for k in 0..n {
                    dg[(k * n + i) * n + j] = c.g[k];
                    for l in 0..n {
                        ddg[((k * n + l) * n + i) * n + j] = c.h[k][l];
                    }
                }
            }
        }
        MetricJet { n, g, dg, ddg }
    }

    /// Richardson-extrapolated central differences of a metric closure.
    pub(crate) fn by_differences(chart: &MetricChart, f: &MetricFn, x: &[f64]) -> Self {
        let n = chart.dim();
        let h = METRIC_STEP * chart.domain().scale().min(1.0);
        let eval = |y: &[f64]| f(y).as_slice().to_vec();
        let g = eval(x);
        let mut dg = vec![0.0; n * n * n];
        let mut ddg = vec![0.0; n * n * n * n];
        let shifted = |steps: &[(usize, f64)]| {
            let mut y = x.to_vec();
            for &(i, s) in steps {
                y[i] += s;
            }
            eval(&y)
        };
        let first = |k: usize, h: f64| -> Vec<f64> {
            let p = shifted(&[(k, h)]);
            let m = shifted(&[(k, -h)]);
            p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        };
        let second = |k: usize, l: usize, h: f64| -> Vec<f64> {
            if k == l {
                let p = shifted(&[(k, h)]);
                let m = shifted(&[(k, -h)]);
                (0..n * n).map(|i| (p[i] - 2.0 * g[i] + m[i]) / (h * h)).collect()
            } else {
                let pp = shifted(&[(k, h), (l, h)]);
                let pm = shifted(&[(k, h), (l, -h)]);
                let mp = shifted(&[(k, -h), (l, h)]);
                let mm = shifted(&[(k, -h), (l, -h)]);
                (0..n * n).map(|i| (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * h * h)).collect()
            }
        };
        for k in 0..n {
            let (a, b) = (first(k, h), first(k, 0.5 * h));
            for i in 0..n * n {
                dg[k * n * n + i] = (4.0 * b[i] - a[i]) / 3.0;
            }
            for l in 0..=k {
                let (a, b) = (second(k, l, h), second(k, l, 0.5 * h));
                for i in 0..n * n {
                    let v = (4.0 * b[i] - a[i]) / 3.0;
                    ddg[(k * n + l) * n * n + i] = v;
                    ddg[(l * n + k) * n * n + i] = v;
                }
            }
        }
        MetricJet { n, g, dg, ddg }
    }

    fn sym(&self) -> Sym2 {
        Sym2::from_fn(self.n, |i, j| self.g[i * self.n + j])
    }
}

/// Christoffel symbols `gamma[(l n + i) n + j] = Gamma^l_ij` and their
/// derivatives `dgamma[((k n + l) n + i) n + j] = d_k Gamma^l_ij`.
pub(crate) struct Connection {
    pub n: usize,
    pub ginv: Vec<f64>,
    pub gamma: Vec<f64>,
    pub dgamma: Vec<f64>,
}

pub(crate) fn invert(n: usize, g: &[f64]) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(n, n, g);
    let inv = m.cholesky()?.inverse();
    Some((0..n * n).map(|i| inv[(i / n, i % n)]).collect())
}

impl Connection {
    pub fn new(j: &MetricJet) -> Result<Self> {
        let n = j.n;
        let ginv = invert(n, &j.g).ok_or_else(|| Error::InvalidSpec("metric is not positive definite".into()))?;
        let dg = |k: usize, i: usize, m: usize| j.dg[(k * n + i) * n + m];
        let ddg = |k: usize, l: usize, i: usize, m: usize| j.ddg[((k * n + l) * n + i) * n + m];
        // first kind, lowered last index: G_ijm = (d_i g_jm + d_j g_im - d_m g_ij)/2
        let mut first = vec![0.0; n * n * n];
        let mut dfirst = vec![0.0; n * n * n * n];
        for i in 0..n {
            for jj in 0..n {
                for m in 0..n {
                    first[(i * n + jj) * n + m] = 0.5 * (dg(i, jj, m) + dg(jj, i, m) - dg(m, i, jj));
                    for k in 0..n {
                        dfirst[((k * n + i) * n + jj) * n + m] =
                            0.5 * (ddg(k, i, jj, m) + ddg(k, jj, i, m) - ddg(k, m, i, jj));
                    }
                }
            }
        }
        // d_k g^{lm} = -g^{la} d_k g_ab g^{bm}
        let mut dginv = vec![0.0; n * n * n];
        for k in 0..n {
            for l in 0..n {
                for m in 0..n {
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            s -= ginv[l * n + a] * dg(k, a, b) * ginv[b * n + m];
                        }
                    }
                    dginv[(k * n + l) * n + m] = s;
                }
            }
        }
        let mut gamma = vec![0.0; n * n * n];
        let mut dgamma = vec![0.0; n * n * n * n];
        for l in 0..n {
            for i in 0..n {
                for jj in 0..n {
                    let mut s = 0.0;
                    for m in 0..n {
                        s += ginv[l * n + m] * first[(i * n + jj) * n + m];
                    }
                    gamma[(l * n + i) * n + jj] = s;
                    for k in 0..n {
                        let mut d = 0.0;
                        for m in 0..n {
                            d += dginv[(k * n + l) * n + m] * first[(i * n + jj) * n + m]
                                + ginv[l * n + m] * dfirst[((k * n + i) * n + jj) * n + m];
                        }
                        dgamma[((k * n + l) * n + i) * n + jj] = d;
                    }
                }
            }
        }
        Ok(Connection { n, ginv, gamma, dgamma })
    }

    #[inline]
    pub fn gamma(&self, l: usize, i: usize, j: usize) -> f64 {
        self.gamma[(l * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn dgamma(&self, k: usize, l: usize, i: usize, j: usize) -> f64 {
        self.dgamma[((k * self.n + l) * self.n + i) * self.n + j]
    }
}

/// Coordinate components `R_ijkl = g(R(d_i, d_j) d_l, d_k)`.
fn riemann_lower(j: &MetricJet, c: &Connection) -> Vec<f64> {
    let n = j.n;
    // A^m_ijl: R(d_i, d_j) d_l = A^m_ijl d_m
    let mut a = vec![0.0; n * n * n * n];
    for m in 0..n {
        for i in 0..n {
            for jj in 0..n {
                for l in 0..n {
                    let mut v = c.dgamma(i, m, jj, l) - c.dgamma(jj, m, i, l);
                    for p in 0..n {
                        v += c.gamma(p, jj, l) * c.gamma(m, i, p) - c.gamma(p, i, l) * c.gamma(m, jj, p);
                    }
                    a[((m * n + i) * n + jj) * n + l] = v;
                }
            }
        }
    }
    let mut r = vec![0.0; n * n * n * n];
    for i in 0..n {
        for jj in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = 0.0;
                    for m in 0..n {
                        v += j.g[k * n + m] * a[((m * n + i) * n + jj) * n + l];
                    }
                    r[((i * n + jj) * n + k) * n + l] = v;
                }
            }
        }
    }
    r
}

/// Coordinate Ricci tensor `R_ij = g^{kl} R_ikjl` and scalar curvature.
fn ricci_coord(n: usize, ginv: &[f64], rm: &[f64]) -> (Vec<f64>, f64) {
    let mut rc = vec![0.0; n * n];
    for i in 0..n {
        for jj in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += ginv[k * n + l] * rm[((i * n + k) * n + jj) * n + l];
                }
            }
            rc[i * n + jj] = s;
        }
    }
    let sc = (0..n * n).map(|i| ginv[i] * rc[i]).sum();
    (rc, sc)
}

/// Orthonormal frame `E` (row-major, columns are frame vectors) with
/// `E^T g E = I`, from the Cholesky factor `g = L L^T` as `E = L^{-T}`.
pub fn orthonormal_frame(g: &Sym2) -> Result<Vec<f64>> {
    let n = g.dim();
    let m = DMatrix::from_row_slice(n, n, g.as_slice());
    let l = m.cholesky().ok_or_else(|| Error::InvalidSpec("metric is not positive definite".into()))?.l();
    let linv = l.try_inverse().ok_or_else(|| Error::InvalidSpec("singular metric".into()))?;
    let e = linv.transpose();
    Ok((0..n * n).map(|i| e[(i / n, i % n)]).collect())
}

/// Re-express a covariant tensor of rank `rank` in the frame `e`.
fn to_frame(n: usize, rank: usize, t: &[f64], e: &[f64]) -> Vec<f64> {
    let mut cur = t.to_vec();
    // contract one slot at a time, slot s from the left
    for s in 0..rank {
        let stride = n.pow((rank - 1 - s) as u32);
        let block = stride * n;
        let mut next = vec![0.0; cur.len()];
        for base in (0..cur.len()).step_by(block) {
            for rest in 0..stride {
                for a in 0..n {
                    let mut v = 0.0;
                    for i in 0..n {
                        v += cur[base + i * stride + rest] * e[i * n + a];
                    }
                    next[base + a * stride + rest] = v;
                }
            }
        }
        cur = next;
    }
    cur
}

struct PointCurvature {
    jet: MetricJet,
    conn: Connection,
    rm: Vec<f64>,
    rc: Vec<f64>,
    sc: f64,
}

fn point_curvature(chart: &MetricChart, x: &[f64]) -> Result<PointCurvature> {
    let jet = chart.metric_jet(x)?;
    let conn = Connection::new(&jet)?;
    let rm = riemann_lower(&jet, &conn);
    let (rc, sc) = ricci_coord(jet.n, &conn.ginv, &rm);
    Ok(PointCurvature { jet, conn, rm, rc, sc })
}

/// Scalar curvature at `x` from the metric alone (no callback).
pub(crate) fn scalar_curvature(chart: &MetricChart, x: &[f64]) -> Result<f64> {
    Ok(point_curvature(chart, x)?.sc)
}

/// Tolerance on the contracted Bianchi residual, relative to the derivative scale.
const BIANCHI_TOL: f64 = 1e-6;

/// Curvature by differentiating the metric, ignoring any analytic callback.
pub fn curvature_generic(chart: &MetricChart, x: &[f64]) -> Result<CurvatureData> {
    chart.check_point(x)?;
    let n = chart.dim();
    let base = point_curvature(chart, x)?;
    let e = orthonormal_frame(&base.jet.sym())?;

    // distance to the boundary limits the difference step
    let dom = chart.domain();
    let mut room = f64::INFINITY;
    for i in 0..n {
        room = room.min(x[i] - dom.lo[i]).min(dom.hi[i] - x[i]);
    }
    if let Some((m, r)) = dom.ball {
        room = room.min(r - x[..m].iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    let h = (f64::EPSILON.powf(1.0 / 6.0) * dom.scale().min(1.0)).min(room / 2.5);
    if !(h > 0.0) {
        return Err(Error::OutOfDomain(x.to_vec()));
    }

    // F(y) = (coordinate Ricci, scalar curvature)
    let width = n * n + 1;
    let eval = |steps: &[(usize, f64)]| -> Result<Vec<f64>> {
        let mut y = x.to_vec();
        for &(i, s) in steps {
            y[i] += s;
        }
        let p = point_curvature(chart, &y)?;
        let mut v = p.rc;
        v.push(p.sc);
        Ok(v)
    };
    let mut f0 = base.rc.clone();
    f0.push(base.sc);
    let first = |k: usize, h: f64| -> Result<Vec<f64>> {
        let p = eval(&[(k, h)])?;
        let m = eval(&[(k, -h)])?;
        Ok(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    };
    let second = |k: usize, l: usize, h: f64| -> Result<Vec<f64>> {
        if k == l {
            let p = eval(&[(k, h)])?;
            let m = eval(&[(k, -h)])?;
            Ok((0..width).map(|i| (p[i] - 2.0 * f0[i] + m[i]) / (h * h)).collect())
        } else {
            let pp = eval(&[(k, h), (l, h)])?;
            let pm = eval(&[(k, h), (l, -h)])?;
            let mp = eval(&[(k, -h), (l, h)])?;
            let mm = eval(&[(k, -h), (l, -h)])?;
            Ok((0..width).map(|i| (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * h * h)).collect())
        }
    };
    let richardson = |a: Vec<f64>, b: Vec<f64>| -> Vec<f64> { a.iter().zip(&b).map(|(a, b)| (4.0 * b - a) / 3.0).collect() };
    let mut d1 = Vec::with_capacity(n);
    for k in 0..n {
        d1.push(richardson(first(k, h)?, first(k, 0.5 * h)?));
    }
    let mut d2 = vec![vec![]; n * n];
    for k in 0..n {
        for l in 0..=k {
            let v = richardson(second(k, l, h)?, second(k, l, 0.5 * h)?);
            d2[k * n + l] = v.clone();
            d2[l * n + k] = v;
        }
    }

    let c = &base.conn;
    let rc = |i: usize, j: usize| base.rc[i * n + j];
    let drc = |k: usize, i: usize, j: usize| d1[k][i * n + j];
    let ddrc = |k: usize, l: usize, i: usize, j: usize| d2[k * n + l][i * n + j];
    let dsc: Vec<f64> = (0..n).map(|k| d1[k][n * n]).collect();

    // nabla_k R_ij
    let mut cov = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = drc(k, i, j);
                for m in 0..n {
                    v -= c.gamma(m, k, i) * rc(m, j) + c.gamma(m, k, j) * rc(i, m);
                }
                cov[(k * n + i) * n + j] = v;
            }
        }
    }
    let covf = |k: usize, i: usize, j: usize| cov[(k * n + i) * n + j];
    // nabla_l nabla_k R_ij stored at [l][k][i][j]
    let mut cov2 = vec![0.0; n * n * n * n];
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = ddrc(l, k, i, j);
                    for m in 0..n {
                        v -= c.dgamma(l, m, k, i) * rc(m, j)
                            + c.gamma(m, k, i) * drc(l, m, j)
                            + c.dgamma(l, m, k, j) * rc(i, m)
                            + c.gamma(m, k, j) * drc(l, i, m);
                        v -= c.gamma(m, l, k) * covf(m, i, j)
                            + c.gamma(m, l, i) * covf(k, m, j)
                            + c.gamma(m, l, j) * covf(k, i, m);
                    }
                    cov2[((l * n + k) * n + i) * n + j] = v;
                }
            }
        }
    }
    let mut lap = 0.0;
    for k in 0..n {
        for l in 0..n {
            let mut v = d2[k * n + l][n * n];
            for m in 0..n {
                v -= c.gamma(m, k, l) * dsc[m];
            }
            lap += c.ginv[k * n + l] * v;
        }
    }

    // contracted Bianchi: g^{ik} nabla_k R_ij = d_j Sc / 2
    let mut residual = 0.0_f64;
    let mut deriv_scale = dsc.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    deriv_scale = cov.iter().fold(deriv_scale, |m, v| m.max(v.abs()));
    for j in 0..n {
        let mut s = 0.0;
        for i in 0..n {
            for k in 0..n {
                s += c.ginv[i * n + k] * covf(k, i, j);
            }
        }
        residual = residual.max((s - 0.5 * dsc[j]).abs());
    }
    // the trace of the second covariant derivative is the Laplacian of Sc
    let mut lap_from_hess = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    lap_from_hess += c.ginv[i * n + j] * c.ginv[k * n + l] * cov2[((k * n + l) * n + i) * n + j];
                }
            }
        }
    }
    // roundoff in the curvature values, amplified by the difference quotients
    let curv_scale = base.rm.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    let noise = match chart.source() {
        MetricSource::Model(_) => 64.0 * f64::EPSILON * curv_scale,
        MetricSource::Custom(_) => 64.0 * f64::EPSILON / METRIC_STEP.powi(2) * curv_scale,
    };
    let tol1 = BIANCHI_TOL * deriv_scale + 10.0 * noise / h;
    if residual > tol1 {
        return Err(Error::DifferentiationUnstable { residual, tolerance: tol1 });
    }
    let second_scale = cov2.iter().fold(lap.abs(), |m, v| m.max(v.abs()));
    let tol2 = BIANCHI_TOL * second_scale + 10.0 * noise / (h * h);
    let residual2 = (lap - lap_from_hess).abs();
    if residual2 > tol2 {
        return Err(Error::DifferentiationUnstable { residual: residual2, tolerance: tol2 });
    }

    let rm_f = to_frame(n, 4, &base.rm, &e);
    let rm = AlgebraicCurvature::new(Tensor4::from_fn(n, |a, b, cc, d| rm_f[((a * n + b) * n + cc) * n + d]))
        .map_err(|_| Error::DifferentiationUnstable {
            residual: Tensor4::from_fn(n, |a, b, cc, d| rm_f[((a * n + b) * n + cc) * n + d]).curvature_symmetry_residual(),
            tolerance: AlgebraicCurvature::SYMMETRY_TOL,
        })?;
    let grad_sc = to_frame(n, 1, &dsc, &e);
    // grad_rc (i, j, k) = nabla_k R_ij
    let cov_ijk: Vec<f64> = (0..n * n * n)
        .map(|idx| {
            let (i, j, k) = (idx / (n * n), (idx / n) % n, idx % n);
            covf(k, i, j)
        })
        .collect();
    let cov_f = to_frame(n, 3, &cov_ijk, &e);
    // hess_rc (i, j, k, l) = nabla_k nabla_l R_ij, k the outer derivative
    let hess_ijkl: Vec<f64> = (0..n * n * n * n)
        .map(|idx| {
            let (i, j, k, l) = (idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n);
            cov2[((k * n + l) * n + i) * n + j]
        })
        .collect();
    let hess_f = to_frame(n, 4, &hess_ijkl, &e);
    let rc_frame = rm.ricci();
    let sc = rc_frame.trace();
    Ok(CurvatureData {
        rm,
        rc: rc_frame,
        sc,
        grad_sc,
        lap_sc: Some(lap),
        grad_rc: Some(Tensor3::from_fn(n, |i, j, k| cov_f[(i * n + j) * n + k])),
        hess_rc: Some(Tensor4::from_fn(n, |i, j, k, l| hess_f[((i * n + j) * n + k) * n + l])),
    })
}

/// Curvature package at `x` in the Cholesky orthonormal frame; uses the
/// chart's analytic callback when it has one.
pub fn curvature_at(chart: &MetricChart, x: &[f64]) -> Result<CurvatureData> {
    chart.check_point(x)?;
    match chart.callback() {
        Some(f) => Ok(f(x)),
        None => curvature_generic(chart, x),
    }
}

/// Taylor coefficients of the normal-coordinate volume density
/// `1 + order2(x,x) + order3(x,x,x) + order4(x,x,x,x) + ...`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensitySeries {
    /// `-(1/6) Rc`
    pub order2: Sym2,
    /// `-(1/12) nabla_k R_ij`, absent when the curvature carries no first derivatives.
    pub order3: Option<Tensor3>,
    /// The quartic coefficient, absent when the curvature carries no Hessian.
    pub order4: Option<Tensor4>,
}

impl DensitySeries {
    /// Fails with `MissingHessian` when the quartic coefficient was omitted.
    pub fn complete(self) -> Result<(Sym2, Tensor3, Tensor4)> {
        let o4 = self.order4.ok_or(Error::MissingHessian)?;
        let o3 = self.order3.ok_or(Error::MissingField("grad_rc"))?;
        Ok((self.order2, o3, o4))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = 1.0 + self.order2.quadratic_form(x);
        if let Some(o3) = &self.order3 {
            v += o3.contract_full(x);
        }
        if let Some(o4) = &self.order4 {
            v += o4.contract_full(x);
        }
        v
    }
}

pub fn density_series(curv: &CurvatureData) -> DensitySeries {
    DensitySeries {
        order2: curv.rc.scale(-1.0 / 6.0),
        order3: curv.grad_rc.as_ref().map(|t| t.scale(-1.0 / 12.0)),
        order4: v_tensor(curv).ok(),
    }
}
