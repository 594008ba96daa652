use crate::error::{Error, Result};
use crate::{Mat3, Vec3};

use super::grid::GridVectorField;

/// Four-point Lagrange weights and their derivatives at offset `r`
/// measured from the first stencil node, in units of the spacing.
pub fn cubic_weights(r: f64) -> ([f64; 4], [f64; 4]) {
    let (a, b, c, d) = (r, r - 1.0, r - 2.0, r - 3.0);
    let w = [
        -b * c * d / 6.0,
        a * c * d / 2.0,
        -a * b * d / 2.0,
        a * b * c / 6.0,
    ];
    let dw = [
        -(c * d + b * d + b * c) / 6.0,
        (c * d + a * d + a * c) / 2.0,
        -(b * d + a * d + a * b) / 2.0,
        (b * c + a * c + a * b) / 6.0,
    ];
    (w, dw)
}

/// Lagrange weights and derivative weights at `t` for arbitrary distinct
/// `nodes`.
pub fn lagrange_weights(nodes: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    let mut dw = vec![0.0; n];
    for a in 0..n {
        let mut denom = 1.0;
        let mut num = 1.0;
        for b in 0..n {
            if b != a {
                denom *= nodes[a] - nodes[b];
                num *= t - nodes[b];
            }
        }
        w[a] = num / denom;
        let mut d = 0.0;
        for c in 0..n {
            if c == a {
                continue;
            }
            let mut p = 1.0;
            for b in 0..n {
                if b != a && b != c {
                    p *= t - nodes[b];
                }
            }
            d += p;
        }
        dw[a] = d / denom;
    }
    (w, dw)
}

/// Stencil start and local offset along a bounded axis of `n + 1` nodes.
fn bounded_stencil(s: f64, n: usize) -> (usize, f64) {
    let base = (s.floor() as i64 - 1).clamp(0, n as i64 - 3) as usize;
    (base, s - base as f64)
}

/// Stencil start (possibly negative before wrapping) and offset along a
/// periodic axis of `n` nodes.
fn periodic_stencil(s: f64) -> (i64, f64) {
    let base = s.floor() as i64 - 1;
    (base, s - base as f64)
}

/// Default tolerance on x1 overshoot, relative to `Lx`.
pub const X1_TOL: f64 = 1e-9;

fn stencils(f: &GridVectorField, x: Vec3) -> (usize, [f64; 4], [f64; 4], i64, [f64; 4], [f64; 4], i64, [f64; 4], [f64; 4]) {
    let d = f.domain;
    let x1 = x.x.clamp(0.0, d.lx);
    let (bi, ri) = bounded_stencil(x1 / d.dx(), d.nx);
    let (bj, rj) = periodic_stencil(x.y.rem_euclid(d.ly) / d.dy());
    let (bk, rk) = periodic_stencil(x.z.rem_euclid(d.lz) / d.dz());
    let (wi, dwi) = cubic_weights(ri);
    let (wj, dwj) = cubic_weights(rj);
    let (wk, dwk) = cubic_weights(rk);
    (bi, wi, dwi, bj, wj, dwj, bk, wk, dwk)
}

fn check_x1(f: &GridVectorField, x: Vec3, tol: f64) -> Result<()> {
    let lx = f.domain.lx;
    if x.x < -tol || x.x > lx + tol || !x.iter().all(|v| v.is_finite()) {
        return Err(Error::OutOfDomain(format!("x1 = {} outside [0, {lx}]", x.x)));
    }
    Ok(())
}

/// Tricubic Lagrange interpolation; exact for per-axis cubics.
pub fn interpolate(f: &GridVectorField, x: Vec3) -> Result<Vec3> {
    interpolate_with_tol(f, x, X1_TOL * f.domain.lx)
}

pub fn interpolate_with_tol(f: &GridVectorField, x: Vec3, tol: f64) -> Result<Vec3> {
    check_x1(f, x, tol)?;
    Ok(interpolate_clamped(f, x))
}

/// Interpolation with x1 clamped into `[0, Lx]` (constant extrapolation).
pub fn interpolate_clamped(f: &GridVectorField, x: Vec3) -> Vec3 {
    let d = f.domain;
    let (bi, wi, _, bj, wj, _, bk, wk, _) = stencils(f, x);
    let mut acc = Vec3::zeros();
    for (c, wkc) in wk.iter().enumerate() {
        let k = (bk + c as i64).rem_euclid(d.nz as i64) as usize;
        for (b, wjb) in wj.iter().enumerate() {
            let j = (bj + b as i64).rem_euclid(d.ny as i64) as usize;
            let w = wkc * wjb;
            for (a, wia) in wi.iter().enumerate() {
                let n = d.idx(bi + a, j, k);
                acc += f.get(n) * (w * wia);
            }
        }
    }
    acc
}

/// Value and spatial gradient of the tricubic interpolant, x1 clamped.
///
/// Outside `[0, Lx]` the x1-derivative column is zero, matching constant
/// extrapolation.
pub fn interpolate_grad_clamped(f: &GridVectorField, x: Vec3) -> (Vec3, Mat3) {
    let d = f.domain;
    let (bi, wi, dwi, bj, wj, dwj, bk, wk, dwk) = stencils(f, x);
    let inside = x.x >= 0.0 && x.x <= d.lx;
    let (sx, sy, sz) = (
        if inside { 1.0 / d.dx() } else { 0.0 },
        1.0 / d.dy(),
        1.0 / d.dz(),
    );
    let mut val = Vec3::zeros();
    let mut g = Mat3::zeros();
    for c in 0..4 {
        let k = (bk + c as i64).rem_euclid(d.nz as i64) as usize;
        for b in 0..4 {
            let j = (bj + b as i64).rem_euclid(d.ny as i64) as usize;
            for a in 0..4 {
                let v = f.get(d.idx(bi + a, j, k));
                let w = wi[a] * wj[b] * wk[c];
                val += v * w;
                let gx = dwi[a] * wj[b] * wk[c] * sx;
                let gy = wi[a] * dwj[b] * wk[c] * sy;
                let gz = wi[a] * wj[b] * dwk[c] * sz;
                for i in 0..3 {
                    g[(i, 0)] += v[i] * gx;
                    g[(i, 1)] += v[i] * gy;
                    g[(i, 2)] += v[i] * gz;
                }
            }
        }
    }
    (val, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domain::ChannelDomain;
    use crate::par::Exec;
    use std::f64::consts::PI;

    #[test]
    fn weights_partition_unity_and_reproduce_cubics() {
        for &r in &[0.0, 0.3, 1.0, 1.5, 2.7] {
            let (w, dw) = cubic_weights(r);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(dw.iter().sum::<f64>().abs() < 1e-14);
            let p = |s: f64| 2.0 - s + 0.5 * s * s - 0.25 * s * s * s;
            let dp = |s: f64| -1.0 + s - 0.75 * s * s;
            let v: f64 = (0..4).map(|a| w[a] * p(a as f64)).sum();
            let dv: f64 = (0..4).map(|a| dw[a] * p(a as f64)).sum();
            assert!((v - p(r)).abs() < 1e-13);
            assert!((dv - dp(r)).abs() < 1e-13);
        }
    }

    #[test]
    fn lagrange_matches_uniform_weights() {
        let (w, dw) = lagrange_weights(&[0.0, 1.0, 2.0, 3.0], 1.4);
        let (u, du) = cubic_weights(1.4);
        for a in 0..4 {
            assert!((w[a] - u[a]).abs() < 1e-14 && (dw[a] - du[a]).abs() < 1e-13);
        }
        let (w, dw) = lagrange_weights(&[0.0, 0.1, 0.25], 0.2);
        let f = |t: f64| 1.0 + 3.0 * t - t * t;
        let v: f64 = w.iter().zip([0.0, 0.1, 0.25]).map(|(w, t)| w * f(t)).sum();
        let d: f64 = dw.iter().zip([0.0, 0.1, 0.25]).map(|(w, t)| w * f(t)).sum();
        assert!((v - f(0.2)).abs() < 1e-14 && (d - 2.6).abs() < 1e-12);
    }

    #[test]
    fn exact_at_nodes_and_for_polynomials() {
        let d = ChannelDomain::new(2.0, 1.0, 1.0, 8, 8, 8).unwrap();
        let f = GridVectorField::from_fn(d, 0.0, Exec::Sequential, |x| {
            Vec3::new(x.x * x.x * x.x - x.x, (2.0 * PI * x.y).sin(), 1.0 + 3.0 * x.x)
        });
        for n in [0, 17, 100, d.len() - 1] {
            let v = interpolate(&f, d.node_at(n)).unwrap();
            assert!((v - f.get(n)).norm() < 1e-13);
        }
        for &x1 in &[0.01, 0.37, 1.13, 1.99] {
            let v = interpolate(&f, Vec3::new(x1, 0.0, 0.3)).unwrap();
            assert!((v.x - (x1 * x1 * x1 - x1)).abs() < 1e-12);
            assert!((v.z - (1.0 + 3.0 * x1)).abs() < 1e-12);
        }
    }

    #[test]
    fn fourth_order_in_periodic_direction() {
        let mut errs = Vec::new();
        for n in [8usize, 16] {
            let d = ChannelDomain::new(1.0, 1.0, 1.0, 8, n, 4).unwrap();
            let f = GridVectorField::from_fn(d, 0.0, Exec::Sequential, |x| {
                Vec3::new((2.0 * PI * x.y).sin(), 0.0, 0.0)
            });
            let worst = (0..n)
                .map(|j| {
                    let y = (j as f64 + 0.5) * d.dy();
                    let v = interpolate(&f, Vec3::new(0.5, y, 0.0)).unwrap();
                    (v.x - (2.0 * PI * y).sin()).abs()
                })
                .fold(0.0, f64::max);
            errs.push(worst);
        }
        assert!(errs[0] / errs[1] > 12.0, "{errs:?}");
    }

    #[test]
    fn rejects_points_outside() {
        let d = ChannelDomain::unit(8).unwrap();
        let f = GridVectorField::zeros(d, 0.0);
        assert!(interpolate(&f, Vec3::new(-0.01, 0.0, 0.0)).is_err());
        assert!(interpolate(&f, Vec3::new(1.01, 0.0, 0.0)).is_err());
        assert!(interpolate(&f, Vec3::new(1.0, 7.3, -2.0)).is_ok());
    }

    #[test]
    fn gradient_of_interpolant() {
        let d = ChannelDomain::new(1.0, 1.0, 1.0, 8, 8, 8).unwrap();
        let f = GridVectorField::from_fn(d, 0.0, Exec::Sequential, |x| {
            Vec3::new(x.x * x.x, x.x * 2.0, 0.0)
        });
        let (v, g) = interpolate_grad_clamped(&f, Vec3::new(0.41, 0.2, 0.7));
        assert!((v.x - 0.41 * 0.41).abs() < 1e-13);
        assert!((g[(0, 0)] - 0.82).abs() < 1e-12);
        assert!((g[(1, 0)] - 2.0).abs() < 1e-12);
        assert!(g[(0, 1)].abs() < 1e-12);
        let (_, g) = interpolate_grad_clamped(&f, Vec3::new(1.1, 0.2, 0.7));
        assert_eq!(g[(0, 0)], 0.0);
    }
}
