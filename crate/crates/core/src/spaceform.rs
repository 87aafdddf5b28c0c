//! Closed forms on the model spaces of constant curvature `k`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::jet::Real;
use crate::quadrature::gauss_legendre_on;

/// `Gamma(m / 2)` for a positive integer `m`.
pub fn gamma_half(m: usize) -> f64 {
    assert!(m > 0, "Gamma(0) is undefined");
    let mut g = if m.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut a = if m.is_multiple_of(2) { 1.0 } else { 0.5 };
    while 2.0 * a < m as f64 {
        g *= a;
        a += 1.0;
    }
    g
}

/// Volume of the Euclidean unit ball in dimension `n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma_half(n + 2)
}

/// `sn_k(r)`: `sin(sqrt(k) r)/sqrt(k)`, `r`, or `sinh(sqrt(-k) r)/sqrt(-k)`.
pub fn sn(k: f64, r: f64) -> f64 {
    if k > 0.0 {
        let s = k.sqrt();
        (s * r).sin() / s
    } else if k < 0.0 {
        let s = (-k).sqrt();
        (s * r).sinh() / s
    } else {
        r
    }
}

/// `sn_k'(r)`.
pub fn cs(k: f64, r: f64) -> f64 {
    if k > 0.0 {
        (k.sqrt() * r).cos()
    } else if k < 0.0 {
        ((-k).sqrt() * r).cosh()
    } else {
        1.0
    }
}

/// Largest radius for which balls around a point are embedded (`pi/sqrt(k)` for `k > 0`).
pub fn radius_cap(k: f64) -> f64 {
    if k > 0.0 {
        PI / k.sqrt()
    } else {
        f64::INFINITY
    }
}

/// `(S^2, T)` with `S = sin(sqrt w)/sqrt w` and `T = (1 - S^2)/w`, continued to
/// `w <= 0` through `sinh`. With `w = k |x|^2`, the model metric in normal
/// coordinates is `S^2 delta + k T x x^T`.
pub fn tangential_factors<R: Real>(w: R) -> (R, R) {
    let wv = w.value();
    if wv.abs() <= 1.0 {
        // S^2 = sum_{j>=1} (-1)^{j+1} 2^{2j-1} w^{j-1} / (2j)!
        let mut s2 = w.lift(0.0);
        let mut wp = w.lift(1.0);
        let mut fact = 2.0; // (2j)!
        let mut pow2 = 2.0; // 2^{2j-1}
        for j in 1..=14 {
            if j > 1 {
                let jf = j as f64;
                fact *= (2.0 * jf - 1.0) * (2.0 * jf);
                pow2 *= 4.0;
            }
            let c = if j % 2 == 1 { pow2 / fact } else { -pow2 / fact };
            s2 = s2 + wp * c;
            wp = wp * w;
        }
        // T = (1 - S^2)/w keeps the j >= 2 terms, shifted down one power.
        let mut t = w.lift(0.0);
        let mut wp = w.lift(1.0);
        let mut fact = 24.0;
        let mut pow2 = 8.0;
        for j in 2..=15 {
            if j > 2 {
                let jf = j as f64;
                fact *= (2.0 * jf - 1.0) * (2.0 * jf);
                pow2 *= 4.0;
            }
            let c = if j % 2 == 0 { pow2 / fact } else { -pow2 / fact };
            t = t + wp * c;
            wp = wp * w;
        }
        (s2, t)
    } else if wv > 0.0 {
        let y = w.sqrt();
        let s = y.sin() / y;
        let s2 = s * s;
        (s2, (-s2 + 1.0) / w)
    } else {
        let y = (-w).sqrt();
        let s = y.sinh() / y;
        let s2 = s * s;
        (s2, (-s2 + 1.0) / w)
    }
}

/// Volume of a geodesic ball of radius `r` in the `n`-dimensional model space.
pub fn ball_volume(n: usize, k: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if k == 0.0 {
        return unit_ball_volume(n) * r.powi(n as i32);
    }
    let panels = 4 + (r * k.abs().sqrt() * 4.0).ceil() as usize;
    let h = r / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let (x, w) = gauss_legendre_on(20, p as f64 * h, (p + 1) as f64 * h);
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * sn(k, *xi).powi(n as i32 - 1);
        }
    }
    n as f64 * unit_ball_volume(n) * s
}

/// Area of a geodesic sphere of radius `r`.
pub fn sphere_area(n: usize, k: f64, r: f64) -> f64 {
    n as f64 * unit_ball_volume(n) * sn(k, r).powi(n as i32 - 1)
}

/// Total volume of the model space (finite only for `k > 0`).
pub fn total_volume(n: usize, k: f64) -> f64 {
    if k > 0.0 {
        // area of the round n-sphere of radius 1/sqrt(k)
        2.0 * PI.powf((n + 1) as f64 / 2.0) / gamma_half(n + 1) * k.powf(-(n as f64) / 2.0)
    } else {
        f64::INFINITY
    }
}

/// Radius of the model ball of volume `beta`.
pub fn radius_for_volume(n: usize, k: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::NonPositiveVolume(beta));
    }
    let cap = total_volume(n, k);
    if beta >= cap {
        return Err(Error::VolumeTooLarge { beta, cap });
    }
    if k == 0.0 {
        return Ok((beta / unit_ball_volume(n)).powf(1.0 / n as f64));
    }
    let (mut lo, mut hi) = (0.0, radius_cap(k));
    if !hi.is_finite() {
        hi = 1.0;
        while ball_volume(n, k, hi) < beta {
            hi *= 2.0;
        }
    }
    // Euclidean guess, then safeguarded Newton inside the bracket.
    let mut r = (beta / unit_ball_volume(n)).powf(1.0 / n as f64).clamp(lo, hi);
    for _ in 0..200 {
        let f = ball_volume(n, k, r) - beta;
        if f > 0.0 {
            hi = r;
        } else {
            lo = r;
        }
        let d = sphere_area(n, k, r);
        let mut next = r - f / d;
        if !(next > lo && next < hi) || d <= 0.0 {
            next = 0.5 * (lo + hi);
        }
        if (next - r).abs() <= 1e-15 * r.max(1e-300) {
            return Ok(next);
        }
        r = next;
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Jet;

    #[test]
    fn gamma_half_values() {
        assert_eq!(gamma_half(2), 1.0);
        assert_eq!(gamma_half(6), 2.0);
        assert!((gamma_half(1) - PI.sqrt()).abs() < 1e-15);
        assert!((gamma_half(5) - 0.75 * PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn unit_balls() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_ball_volume_closed_form() {
        for r in [0.1, 0.5, 1.0, 2.0, 3.0] {
            let v = ball_volume(3, 1.0, r);
            let exact = PI * (2.0 * r - (2.0 * r).sin());
            assert!((v - exact).abs() < 1e-12 * exact, "r={r}");
            let vh = ball_volume(3, -1.0, r);
            let exact_h = PI * ((2.0 * r).sinh() - 2.0 * r);
            assert!((vh - exact_h).abs() < 1e-12 * exact_h);
        }
        assert!((total_volume(3, 1.0) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((total_volume(2, 1.0) - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn radius_inversion() {
        for (n, k) in [(2, 1.0), (3, 1.0), (3, -1.0), (4, 0.0), (4, -0.5), (3, 4.0)] {
            for r in [0.05, 0.4, 0.75] {
                let beta = ball_volume(n, k, r);
                let back = radius_for_volume(n, k, beta).unwrap();
                assert!((back - r).abs() < 1e-12 * r, "n={n} k={k} r={r}: {back}");
            }
        }
        assert!(matches!(radius_for_volume(3, 1.0, 100.0), Err(Error::VolumeTooLarge { .. })));
        assert!(matches!(radius_for_volume(3, 1.0, 0.0), Err(Error::NonPositiveVolume(_))));
    }

    #[test]
    fn tangential_factors_continuity_and_derivatives() {
        for w in [-3.0, -1.0 - 1e-12, -1.0 + 1e-12, -0.3, 0.0, 1e-8, 0.7, 1.0 - 1e-12, 1.0 + 1e-12, 2.5] {
            let (s2, t) = tangential_factors(w);
            let exact_s2 = if w > 0.0 {
                (w.sqrt().sin() / w.sqrt()).powi(2)
            } else if w < 0.0 {
                ((-w).sqrt().sinh() / (-w).sqrt()).powi(2)
            } else {
                1.0
            };
            assert!((s2 - exact_s2).abs() < 1e-15, "w={w}");
            if w.abs() > 1e-3 {
                assert!((t - (1.0 - exact_s2) / w).abs() < 1e-12, "w={w}");
            } else {
                assert!((t - 1.0 / 3.0).abs() < 1e-3);
            }
        }
        // derivatives of the series branch agree with the closed form across the seam
        let a = tangential_factors(Jet::variable(1, 1.0 - 1e-9, 0));
        let b = tangential_factors(Jet::variable(1, 1.0 + 1e-9, 0));
        assert!((a.0.g[0] - b.0.g[0]).abs() < 1e-8);
        assert!((a.1.h[0][0] - b.1.h[0][0]).abs() < 1e-6);
    }
}
