use std::ops::{Add, Mul, Sub};

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

use super::domain::ChannelDomain;
use super::grid::{BoundaryGrid, BoundaryVectorField, GridVectorField, ScalarGrid};
use super::spectral::{derivative_symbol, Stencil, Transverse};

/// Second-order x1 derivative of one line: centered inside, one-sided
/// second-order closures at both ends.
pub fn dx_line<T>(f: &[T], h: f64, out: &mut [T])
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let n = f.len() - 1;
    let c = 0.5 / h;
    out[0] = (f[1] * 4.0 - f[0] * 3.0 - f[2]) * c;
    for i in 1..n {
        out[i] = (f[i + 1] - f[i - 1]) * c;
    }
    out[n] = (f[n] * 3.0 - f[n - 1] * 4.0 + f[n - 2]) * c;
}

/// Dense matrix of [`dx_line`] on `n + 1` nodes.
pub fn dx_matrix(n: usize, h: f64) -> nalgebra::DMatrix<f64> {
    let mut m = nalgebra::DMatrix::zeros(n + 1, n + 1);
    let c = 0.5 / h;
    m[(0, 0)] = -3.0 * c;
    m[(0, 1)] = 4.0 * c;
    m[(0, 2)] = -c;
    for i in 1..n {
        m[(i, i - 1)] = -c;
        m[(i, i + 1)] = c;
    }
    m[(n, n)] = 3.0 * c;
    m[(n, n - 1)] = -4.0 * c;
    m[(n, n - 2)] = c;
    m
}

/// Grid differential operators with a fixed transverse stencil.
pub struct DiffOps {
    pub domain: ChannelDomain,
    pub stencil: Stencil,
    volume: Transverse,
    ky: Vec<f64>,
    kz: Vec<f64>,
}

impl DiffOps {
    pub fn new(domain: ChannelDomain, stencil: Stencil) -> Self {
        let ky = (0..domain.ny)
            .map(|j| derivative_symbol(stencil, j, domain.ny, domain.ly))
            .collect();
        let kz = (0..domain.nz)
            .map(|k| derivative_symbol(stencil, k, domain.nz, domain.lz))
            .collect();
        DiffOps {
            domain,
            stencil,
            volume: Transverse::new(domain.nxp(), domain.ny, domain.nz),
            ky,
            kz,
        }
    }

    pub fn spectral(domain: ChannelDomain) -> Self {
        Self::new(domain, Stencil::Spectral)
    }

    /// Transverse derivative symbols `(ky[j], kz[k])`.
    pub fn symbols(&self) -> (&[f64], &[f64]) {
        (&self.ky, &self.kz)
    }

    pub fn transform(&self) -> &Transverse {
        &self.volume
    }

    pub fn d_dx(&self, f: &[f64]) -> Vec<f64> {
        let nxp = self.domain.nxp();
        let mut out = vec![0.0; f.len()];
        for (line, o) in f.chunks(nxp).zip(out.chunks_mut(nxp)) {
            dx_line(line, self.domain.dx(), o);
        }
        out
    }

    /// Derivatives in y and z of a scalar field.
    pub fn d_dyz(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.domain;
        match self.stencil {
            Stencil::Centered => {
                let (cy, cz) = (0.5 / d.dy(), 0.5 / d.dz());
                let mut fy = vec![0.0; f.len()];
                let mut fz = vec![0.0; f.len()];
                for k in 0..d.nz {
                    let (kp, km) = ((k + 1) % d.nz, (k + d.nz - 1) % d.nz);
                    for j in 0..d.ny {
                        let (jp, jm) = ((j + 1) % d.ny, (j + d.ny - 1) % d.ny);
                        for i in 0..d.nxp() {
                            let n = d.idx(i, j, k);
                            fy[n] = (f[d.idx(i, jp, k)] - f[d.idx(i, jm, k)]) * cy;
                            fz[n] = (f[d.idx(i, j, kp)] - f[d.idx(i, j, km)]) * cz;
                        }
                    }
                }
                (fy, fz)
            }
            Stencil::Spectral => {
                let s = self.volume.forward(f);
                let (sy, sz) = self.spectral_dyz(&s);
                (self.volume.inverse(&sy), self.volume.inverse(&sz))
            }
        }
    }

    /// Multiplies a mode-major spectrum by `i ky` and `i kz`.
    pub fn spectral_dyz(&self, s: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let d = self.domain;
        let lines = d.nxp();
        let mut sy = vec![Complex64::new(0.0, 0.0); s.len()];
        let mut sz = sy.clone();
        for k in 0..d.nz {
            for j in 0..d.ny {
                let q = j + d.ny * k;
                let (iy, iz) = (Complex64::new(0.0, self.ky[j]), Complex64::new(0.0, self.kz[k]));
                for i in 0..lines {
                    let v = s[q * lines + i];
                    sy[q * lines + i] = iy * v;
                    sz[q * lines + i] = iz * v;
                }
            }
        }
        (sy, sz)
    }

    pub fn gradient(&self, f: &[f64]) -> [Vec<f64>; 3] {
        let (fy, fz) = self.d_dyz(f);
        [self.d_dx(f), fy, fz]
    }

    /// Jacobian fields: entry `[i][k]` is the derivative of component `i`
    /// along axis `k`.
    pub fn jacobian(&self, f: &GridVectorField) -> [[Vec<f64>; 3]; 3] {
        let g0 = self.gradient(&f.comps[0]);
        let g1 = self.gradient(&f.comps[1]);
        let g2 = self.gradient(&f.comps[2]);
        [g0, g1, g2]
    }

    pub fn divergence(&self, f: &GridVectorField) -> ScalarGrid {
        let a = self.d_dx(&f.comps[0]);
        let (b, _) = self.d_dyz(&f.comps[1]);
        let (_, c) = self.d_dyz(&f.comps[2]);
        let values = (0..a.len()).map(|n| a[n] + b[n] + c[n]).collect();
        ScalarGrid {
            domain: f.domain,
            values,
        }
    }

    pub fn curl(&self, f: &GridVectorField) -> GridVectorField {
        let (f1y, f1z) = self.d_dyz(&f.comps[0]);
        let f2x = self.d_dx(&f.comps[1]);
        let (_, f2z) = self.d_dyz(&f.comps[1]);
        let f3x = self.d_dx(&f.comps[2]);
        let (f3y, _) = self.d_dyz(&f.comps[2]);
        let n = f.len();
        let c1 = (0..n).map(|m| f3y[m] - f2z[m]).collect();
        let c2 = (0..n).map(|m| f1z[m] - f3x[m]).collect();
        let c3 = (0..n).map(|m| f2x[m] - f1y[m]).collect();
        GridVectorField {
            domain: f.domain,
            t: f.t,
            comps: [c1, c2, c3],
        }
    }
}

/// Discrete divergence with spectral transverse derivatives.
pub fn divergence(f: &GridVectorField) -> ScalarGrid {
    DiffOps::spectral(f.domain).divergence(f)
}

/// Discrete curl with spectral transverse derivatives.
pub fn curl(f: &GridVectorField) -> GridVectorField {
    DiffOps::spectral(f.domain).curl(f)
}

/// Surface divergence `d_y w2 + d_z w3` of a tangential boundary field.
///
/// Rejects input whose normal component exceeds `tol`.
pub fn surface_divergence_with(
    w: &BoundaryVectorField,
    stencil: Stencil,
    tol: f64,
) -> Result<BoundaryGrid> {
    let worst = w.comps[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if worst > tol {
        return Err(Error::InvalidInput(format!(
            "boundary field is not tangential: |w.n| = {worst:e}"
        )));
    }
    let d = w.domain;
    let (ny, nz) = (d.ny, d.nz);
    let values = match stencil {
        Stencil::Centered => {
            let (cy, cz) = (0.5 / d.dy(), 0.5 / d.dz());
            let mut out = vec![0.0; ny * nz];
            for k in 0..nz {
                for j in 0..ny {
                    let a = w.comps[1][(j + 1) % ny + ny * k] - w.comps[1][(j + ny - 1) % ny + ny * k];
                    let b = w.comps[2][j + ny * ((k + 1) % nz)] - w.comps[2][j + ny * ((k + nz - 1) % nz)];
                    out[j + ny * k] = a * cy + b * cz;
                }
            }
            out
        }
        Stencil::Spectral => {
            let t = Transverse::new(1, ny, nz);
            let s2 = t.forward(&w.comps[1]);
            let s3 = t.forward(&w.comps[2]);
            let mut s = vec![Complex64::new(0.0, 0.0); ny * nz];
            for k in 0..nz {
                let kz = derivative_symbol(stencil, k, nz, d.lz);
                for j in 0..ny {
                    let ky = derivative_symbol(stencil, j, ny, d.ly);
                    let q = j + ny * k;
                    s[q] = Complex64::new(0.0, ky) * s2[q] + Complex64::new(0.0, kz) * s3[q];
                }
            }
            t.inverse(&s)
        }
    };
    Ok(BoundaryGrid {
        domain: d,
        side: w.side,
        values,
    })
}

/// Surface divergence with spectral differences and a relative tangency
/// tolerance of `1e-10`.
pub fn surface_divergence(w: &BoundaryVectorField) -> Result<BoundaryGrid> {
    let scale = w
        .comps
        .iter()
        .flat_map(|c| c.iter())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    surface_divergence_with(w, Stencil::Spectral, 1e-10 * scale)
}
