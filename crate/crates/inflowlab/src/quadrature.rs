//! One-dimensional quadrature rules.

use std::ops::{Add, Mul};

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    (
        x.iter().map(|&s| c + h * s).collect(),
        w.iter().map(|&v| v * h).collect(),
    )
}

/// Composite Simpson weights for `n` (even) uniform intervals of width `h`.
pub fn simpson_weights(n: usize, h: f64) -> Result<Vec<f64>> {
    if n < 2 || n % 2 == 1 {
        return Err(Error::InvalidInput(format!(
            "Simpson's rule needs an even interval count of at least 2, got {n}"
        )));
    }
    Ok((0..=n)
        .map(|i| {
            let c = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect())
}

/// Composite Simpson integral of uniformly spaced samples.
pub fn simpson<T>(values: &[T], h: f64) -> Result<T>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    let w = simpson_weights(values.len().saturating_sub(1), h)?;
    let mut acc = values[0] * w[0];
    for (v, wi) in values.iter().zip(&w).skip(1) {
        acc = acc + *v * *wi;
    }
    Ok(acc)
}

/// Weights of the quadratic through three nodes, integrated over
/// `[t0, t2]`.
fn simpson_pair(t0: f64, t1: f64, t2: f64) -> [f64; 3] {
    let (h0, h1) = (t1 - t0, t2 - t1);
    let s = h0 + h1;
    [
        s / 6.0 * (2.0 - h1 / h0),
        s * s * s / (6.0 * h0 * h1),
        s / 6.0 * (2.0 - h0 / h1),
    ]
}

/// Weights of the quadratic through three nodes, integrated over the last
/// interval `[t1, t2]`.
fn last_interval(t0: f64, t1: f64, t2: f64) -> [f64; 3] {
    let (h0, h1) = (t1 - t0, t2 - t1);
    [
        -h1 * h1 * h1 / (6.0 * h0 * (h0 + h1)),
        h1 * (h1 + 3.0 * h0) / (6.0 * h0),
        h1 * (2.0 * h1 + 3.0 * h0) / (6.0 * (h0 + h1)),
    ]
}

/// Quadrature weights over `[times[0], times[last]]` for strictly increasing,
/// possibly nonuniform nodes: Simpson over pairs of intervals, with the
/// final interval of an odd count closed by a quadratic through the last
/// three nodes.
pub fn simpson_nonuniform_weights(times: &[f64]) -> Result<Vec<f64>> {
    let n = times.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "at least 3 samples are required, got {n}"
        )));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("sample times must increase strictly".into()));
    }
    let mut w = vec![0.0; n];
    let intervals = n - 1;
    let paired = intervals - intervals % 2;
    let mut i = 0;
    while i < paired {
        let p = simpson_pair(times[i], times[i + 1], times[i + 2]);
        for k in 0..3 {
            w[i + k] += p[k];
        }
        i += 2;
    }
    if intervals % 2 == 1 {
        let q = last_interval(times[n - 3], times[n - 2], times[n - 1]);
        for k in 0..3 {
            w[n - 3 + k] += q[k];
        }
    }
    Ok(w)
}

pub fn simpson_nonuniform<T>(times: &[f64], values: &[T]) -> Result<T>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    if times.len() != values.len() {
        return Err(Error::InvalidInput("times and values differ in length".into()));
    }
    let w = simpson_nonuniform_weights(times)?;
    let mut acc = values[0] * w[0];
    for (v, wi) in values.iter().zip(&w).skip(1) {
        acc = acc + *v * *wi;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for p in 0..2 * n {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let want = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "n={n} p={p}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn mapped_rule() {
        let (x, w) = gauss_legendre_on(4, 1.0, 3.0);
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert!((got - (3f64.exp() - 1f64.exp())).abs() < 1e-5);
    }

    #[test]
    fn simpson_exact_for_cubics() {
        let h = 0.25;
        let v: Vec<f64> = (0..=8).map(|i| (i as f64 * h).powi(3)).collect();
        assert!((simpson(&v, h).unwrap() - 4.0).abs() < 1e-14);
        assert!(simpson(&v[..8], h).is_err());
        assert!(simpson(&v[..2], h).is_err());
    }

    #[test]
    fn nonuniform_exact_for_quadratics() {
        let f = |t: f64| 1.0 - 2.0 * t + 3.0 * t * t;
        let big = |t: f64| t - t * t + t * t * t;
        for times in [
            vec![0.0, 0.05, 0.1, 0.15, 0.195, 0.2],
            vec![0.0, 0.3, 0.4],
            vec![0.0, 0.1, 0.3, 0.35],
        ] {
            let v: Vec<f64> = times.iter().map(|&t| f(t)).collect();
            let got = simpson_nonuniform(&times, &v).unwrap();
            let b = *times.last().unwrap();
            assert!((got - big(b)).abs() < 1e-14, "{times:?}");
        }
        assert!(simpson_nonuniform(&[0.0, 1.0], &[1.0, 1.0]).is_err());
    }
}
