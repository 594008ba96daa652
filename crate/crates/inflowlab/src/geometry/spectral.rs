use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

/// Discretization of derivatives along the periodic directions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stencil {
    /// Exact Fourier differentiation; the Nyquist mode is annihilated.
    #[default]
    Spectral,
    /// Second-order centered periodic differences.
    Centered,
}

/// Signed Fourier mode number of FFT bin `j` (Nyquist maps to `n/2`).
pub fn mode_number(j: usize, n: usize) -> i64 {
    if 2 * j <= n {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Real symbol `s` such that the discrete derivative of bin `j` is `i s`.
pub fn derivative_symbol(stencil: Stencil, j: usize, n: usize, len: f64) -> f64 {
    match stencil {
        Stencil::Spectral => {
            if n.is_multiple_of(2) && 2 * j == n {
                0.0
            } else {
                2.0 * PI * mode_number(j, n) as f64 / len
            }
        }
        Stencil::Centered => {
            let h = len / n as f64;
            (2.0 * PI * j as f64 / n as f64).sin() / h
        }
    }
}

/// Two-dimensional FFT over the periodic directions for a stack of
/// `lines` x1-positions.
///
/// Physical layout is `i + lines (j + Ny k)`; the spectral layout is
/// mode-major, `(j + Ny k) lines + i`, so per-mode x1 profiles are contiguous.
pub struct Transverse {
    pub lines: usize,
    pub ny: usize,
    pub nz: usize,
    fy: Arc<dyn Fft<f64>>,
    fyi: Arc<dyn Fft<f64>>,
    fz: Arc<dyn Fft<f64>>,
    fzi: Arc<dyn Fft<f64>>,
}

impl Transverse {
    pub fn new(lines: usize, ny: usize, nz: usize) -> Self {
        let mut p = FftPlanner::new();
        Transverse {
            lines,
            ny,
            nz,
            fy: p.plan_fft_forward(ny),
            fyi: p.plan_fft_inverse(ny),
            fz: p.plan_fft_forward(nz),
            fzi: p.plan_fft_inverse(nz),
        }
    }

    fn transform_plane(&self, plane: &mut [Complex64], scratch: &mut [Complex64], inverse: bool) {
        let (ny, nz) = (self.ny, self.nz);
        if inverse {
            self.fyi.process(plane);
        } else {
            self.fy.process(plane);
        }
        for j in 0..ny {
            for k in 0..nz {
                scratch[k + nz * j] = plane[j + ny * k];
            }
        }
        if inverse {
            self.fzi.process(scratch);
        } else {
            self.fz.process(scratch);
        }
        for j in 0..ny {
            for k in 0..nz {
                plane[j + ny * k] = scratch[k + nz * j];
            }
        }
    }

    pub fn forward(&self, data: &[f64]) -> Vec<Complex64> {
        let m = self.ny * self.nz;
        let mut out = vec![Complex64::new(0.0, 0.0); m * self.lines];
        let mut plane = vec![Complex64::new(0.0, 0.0); m];
        let mut scratch = plane.clone();
        for i in 0..self.lines {
            for (q, p) in plane.iter_mut().enumerate() {
                *p = Complex64::new(data[i + self.lines * q], 0.0);
            }
            self.transform_plane(&mut plane, &mut scratch, false);
            for (q, p) in plane.iter().enumerate() {
                out[q * self.lines + i] = *p;
            }
        }
        out
    }

    /// Inverse transform, returning the real part (normalized).
    pub fn inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        let m = self.ny * self.nz;
        let scale = 1.0 / m as f64;
        let mut out = vec![0.0; m * self.lines];
        let mut plane = vec![Complex64::new(0.0, 0.0); m];
        let mut scratch = plane.clone();
        for i in 0..self.lines {
            for (q, p) in plane.iter_mut().enumerate() {
                *p = spec[q * self.lines + i];
            }
            self.transform_plane(&mut plane, &mut scratch, true);
            for (q, p) in plane.iter().enumerate() {
                out[i + self.lines * q] = p.re * scale;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_identity() {
        let (lines, ny, nz) = (3, 6, 4);
        let data: Vec<f64> = (0..lines * ny * nz).map(|n| ((n * 37) % 11) as f64 - 5.0).collect();
        let t = Transverse::new(lines, ny, nz);
        let back = t.inverse(&t.forward(&data));
        for (a, b) in data.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_lands_in_its_bin() {
        let (ny, nz) = (8, 4);
        let t = Transverse::new(1, ny, nz);
        let data: Vec<f64> = (0..ny * nz)
            .map(|q| {
                let j = q % ny;
                (2.0 * PI * 3.0 * j as f64 / ny as f64).cos()
            })
            .collect();
        let s = t.forward(&data);
        for (q, c) in s.iter().enumerate() {
            let want = if q == 3 || q == 5 { 0.5 * (ny * nz) as f64 } else { 0.0 };
            assert!((c.re - want).abs() < 1e-9 && c.im.abs() < 1e-9, "bin {q}: {c}");
        }
    }

    #[test]
    fn symbols() {
        assert_eq!(mode_number(5, 8), -3);
        assert_eq!(mode_number(4, 8), 4);
        assert_eq!(derivative_symbol(Stencil::Spectral, 4, 8, 1.0), 0.0);
        assert!((derivative_symbol(Stencil::Spectral, 1, 8, 2.0) - PI).abs() < 1e-15);
        assert!(derivative_symbol(Stencil::Centered, 4, 8, 1.0).abs() < 1e-12);
    }
}
