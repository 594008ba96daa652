//! Div-curl machinery on the channel: Biot-Savart inversion, Leray and
//! harmonic projections, fluxes, and recovery of velocity and pressure from
//! a vorticity history.
//!
//! Every solve is diagonalized by the transverse FFT. Per mode the x1
//! profiles are found with the same finite-difference matrix the discrete
//! curl uses, so `curl_h K[w] = w` holds to round-off for discretely
//! in-range `w`.

use nalgebra::{DMatrix, Vector2};
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::domain::{ChannelDomain, Side};
use crate::geometry::grid::{BoundaryGrid, GridVectorField};
use crate::geometry::ops::{dx_matrix, DiffOps};
use crate::geometry::provider::FieldProvider;
use crate::geometry::spectral::{mode_number, Transverse};
use crate::par::{self, Exec};
use crate::quadrature::simpson_nonuniform;
use crate::Vec3;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Relative tolerances of the range-of-curl preconditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeTol {
    /// On `||div w||_inf / ||w||_inf`.
    pub div: f64,
    /// On `|flux| / (||w||_inf * wall area)`.
    pub flux: f64,
}

impl Default for RangeTol {
    fn default() -> Self {
        RangeTol { div: 1e-8, flux: 1e-8 }
    }
}

/// Surface integral of `w . n` over one wall.
pub fn external_flux(w: &GridVectorField, side: Side) -> f64 {
    w.trace(side).normal_component().integral()
}

/// Fluxes of `v2` through the cut `{y = 0}` and of `v3` through `{z = 0}`.
pub fn internal_flux(v: &GridVectorField) -> (f64, f64) {
    let s = cut_fluxes(v);
    (s.0[0], s.1[0])
}

/// Internal fluxes, failing when they vary with the cut position by more
/// than `tol` (relative to `||v||_inf` times the cut area).
pub fn internal_flux_checked(v: &GridVectorField, tol: f64) -> Result<(f64, f64)> {
    let (fy, fz) = cut_fluxes(v);
    let d = v.domain;
    let scale = v.max_abs().max(1e-300);
    for (name, f, area) in [("y", &fy, d.lx * d.lz), ("z", &fz, d.lx * d.ly)] {
        let spread = f.iter().fold(0.0f64, |m, x| m.max((x - f[0]).abs()));
        if spread > tol * scale * area {
            return Err(Error::NotInRange(format!(
                "flux through {name}-cuts varies by {spread:e}; the field is not divergence-free and tangent"
            )));
        }
    }
    Ok((fy[0], fz[0]))
}

fn cut_fluxes(v: &GridVectorField) -> (Vec<f64>, Vec<f64>) {
    let d = v.domain;
    let wx = d.x_weights();
    let mut fy = vec![0.0; d.ny];
    let mut fz = vec![0.0; d.nz];
    for k in 0..d.nz {
        for j in 0..d.ny {
            for (i, w) in wx.iter().enumerate() {
                let n = d.idx(i, j, k);
                fy[j] += w * d.dz() * v.comps[1][n];
                fz[k] += w * d.dy() * v.comps[2][n];
            }
        }
    }
    (fy, fz)
}

/// Coefficients `(c2, c3)` of the harmonic part `(0, c2, c3)`.
pub fn harmonic_project(v: &GridVectorField) -> (f64, f64) {
    (v.mean(1), v.mean(2))
}

/// Per-mode solvers for a fixed domain.
pub struct CurlSolver {
    pub domain: ChannelDomain,
    ops: DiffOps,
    d: DMatrix<f64>,
    dd: DMatrix<f64>,
    /// `D^T D` bordered by the trapezoid mean constraint, LU-factored.
    mean_kkt: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    wall: Transverse,
    exec: Exec,
}

impl CurlSolver {
    pub fn new(domain: ChannelDomain) -> Self {
        let n = domain.nx;
        let d = dx_matrix(n, domain.dx());
        let dtd = d.transpose() * &d;
        let w = domain.x_weights();
        let mut kkt = DMatrix::zeros(n + 2, n + 2);
        kkt.view_mut((0, 0), (n + 1, n + 1)).copy_from(&dtd);
        for i in 0..=n {
            kkt[(i, n + 1)] = w[i];
            kkt[(n + 1, i)] = w[i];
        }
        CurlSolver {
            domain,
            ops: DiffOps::spectral(domain),
            dd: &d * &d,
            d,
            mean_kkt: kkt.lu(),
            wall: Transverse::new(1, domain.ny, domain.nz),
            exec: Exec::Parallel,
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn ops(&self) -> &DiffOps {
        &self.ops
    }

    fn check_domain(&self, f: &GridVectorField) -> Result<()> {
        if f.domain != self.domain {
            return Err(Error::InvalidInput("field and solver domains differ".into()));
        }
        Ok(())
    }

    /// Fails with `NotInRange` unless `w` is divergence-free with zero flux
    /// through both walls, to tolerance.
    pub fn check_range(&self, w: &GridVectorField, tol: RangeTol) -> Result<()> {
        self.check_domain(w)?;
        let scale = w.max_abs();
        if scale == 0.0 {
            return Ok(());
        }
        let div = self.ops.divergence(w).max_abs();
        if div > tol.div * scale {
            return Err(Error::NotInRange(format!(
                "|div w|_inf = {div:e} exceeds {:e}",
                tol.div * scale
            )));
        }
        let area = self.domain.boundary_area();
        for side in [Side::Inflow, Side::Outflow] {
            let f = external_flux(w, side);
            if f.abs() > tol.flux * scale * area {
                return Err(Error::NotInRange(format!("flux {f:e} through the {side:?} wall")));
            }
        }
        Ok(())
    }

    /// Mean-zero least-squares solution of `D v = r`.
    fn antiderivative(&self, r: &[Complex64]) -> Vec<Complex64> {
        let n = self.domain.nx;
        let mut rhs = DMatrix::zeros(n + 2, 2);
        for i in 0..=n {
            rhs[(i, 0)] = r[i].re;
            rhs[(i, 1)] = r[i].im;
        }
        let dt = self.d.transpose();
        let top = &dt * rhs.rows(0, n + 1);
        rhs.rows_mut(0, n + 1).copy_from(&top);
        let x = self.mean_kkt.solve(&rhs).expect("mean-constrained system is regular");
        (0..=n).map(|i| Complex64::new(x[(i, 0)], x[(i, 1)])).collect()
    }

    /// Least-squares solution of `(k2 - D D) v = r` with `v = 0` at both
    /// walls.
    fn wall_poisson(&self, k2: f64, r: &[Complex64]) -> Vec<Complex64> {
        let n = self.domain.nx;
        let mut a = -self.dd.columns(1, n - 1).into_owned();
        for i in 1..n {
            a[(i, i - 1)] += k2;
        }
        let mut rhs = DMatrix::zeros(n + 1, 2);
        for i in 0..=n {
            rhs[(i, 0)] = r[i].re;
            rhs[(i, 1)] = r[i].im;
        }
        let at = a.transpose();
        let x = (&at * &a)
            .cholesky()
            .expect("wall Poisson normal equations are positive definite")
            .solve(&(&at * rhs));
        let mut out = vec![ZERO; n + 1];
        for i in 1..n {
            out[i] = Complex64::new(x[(i - 1, 0)], x[(i - 1, 1)]);
        }
        out
    }

    fn dx_profile(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; v.len()];
        crate::geometry::ops::dx_line(v, self.domain.dx(), &mut out);
        out
    }

    /// The divergence-free field `v` with `curl_h v = w`, `v1 = 0` on both
    /// walls and zero harmonic part.
    pub fn biot_savart(&self, w: &GridVectorField, tol: RangeTol) -> Result<GridVectorField> {
        self.check_range(w, tol)?;
        Ok(self.biot_savart_unchecked(w))
    }

    fn biot_savart_unchecked(&self, w: &GridVectorField) -> GridVectorField {
        let d = self.domain;
        let tr = self.ops.transform();
        let s = [tr.forward(&w.comps[0]), tr.forward(&w.comps[1]), tr.forward(&w.comps[2])];
        let (ky, kz) = self.ops.symbols();
        let lines = d.nxp();
        let modes = par::map_range(self.exec, d.ny * d.nz, |q| {
            let (j, k) = (q % d.ny, q / d.ny);
            let (a, b) = (ky[j], kz[k]);
            let k2 = a * a + b * b;
            let w1 = &s[0][q * lines..(q + 1) * lines];
            let w2 = &s[1][q * lines..(q + 1) * lines];
            let w3 = &s[2][q * lines..(q + 1) * lines];
            if k2 == 0.0 {
                let v2 = self.antiderivative(w3);
                let v3: Vec<Complex64> = self.antiderivative(w2).into_iter().map(|c| -c).collect();
                return [vec![ZERO; lines], v2, v3];
            }
            let (iy, iz) = (Complex64::new(0.0, a), Complex64::new(0.0, b));
            let rhs: Vec<Complex64> = (0..lines).map(|i| iy * w3[i] - iz * w2[i]).collect();
            let v1 = self.wall_poisson(k2, &rhs);
            let bb: Vec<Complex64> = self.dx_profile(&v1).into_iter().map(|c| -c).collect();
            let v2 = (0..lines).map(|i| (iz * w1[i] - iy * bb[i]) / k2).collect();
            let v3 = (0..lines).map(|i| -(iz * bb[i] + iy * w1[i]) / k2).collect();
            [v1, v2, v3]
        });
        let mut out = [vec![ZERO; d.len()], vec![ZERO; d.len()], vec![ZERO; d.len()]];
        for (q, m) in modes.into_iter().enumerate() {
            for c in 0..3 {
                out[c][q * lines..(q + 1) * lines].copy_from_slice(&m[c]);
            }
        }
        GridVectorField {
            domain: d,
            t: w.t,
            comps: [tr.inverse(&out[0]), tr.inverse(&out[1]), tr.inverse(&out[2])],
        }
    }

    /// `P_H v = K[curl_h v] + (0, c2, c3)`. A discrete curl is in the range
    /// exactly, so no range check is made; it would only measure roundoff
    /// when `v` is nearly a gradient.
    pub fn leray(&self, v: &GridVectorField) -> Result<GridVectorField> {
        self.check_domain(v)?;
        let w = self.ops.curl(v);
        let mut p = self.biot_savart_unchecked(&w);
        let (c2, c3) = harmonic_project(v);
        p.comps[1].iter_mut().for_each(|x| *x += c2);
        p.comps[2].iter_mut().for_each(|x| *x += c3);
        Ok(p)
    }

    /// Gradient of the harmonic potential with normal derivative `un_in`
    /// on the inflow wall and `un_out` on the outflow wall.
    pub fn harmonic_gradient(&self, un_in: &BoundaryGrid, un_out: &BoundaryGrid, t: f64, tol: f64) -> Result<GridVectorField> {
        let d = self.domain;
        if un_in.side != Side::Inflow || un_out.side != Side::Outflow {
            return Err(Error::InvalidInput("normal data must be given on the inflow and outflow walls".into()));
        }
        let a0: Vec<Complex64> = self.wall.forward(&un_in.values).into_iter().map(|c| -c).collect();
        let al = self.wall.forward(&un_out.values);
        let m = (d.ny * d.nz) as f64;
        let (f_in, f_out) = (a0[0].re / m, al[0].re / m);
        if (f_in - f_out).abs() > tol * f_in.abs().max(f_out.abs()).max(1.0) {
            return Err(Error::Incompatible(format!(
                "normal velocity fluxes do not balance: mean inflow speed {f_in}, mean outflow speed {f_out}"
            )));
        }
        let (ky, kz) = self.ops.symbols();
        let lines = d.nxp();
        let lx = d.lx;
        let mut out = [vec![ZERO; d.len()], vec![ZERO; d.len()], vec![ZERO; d.len()]];
        for q in 0..d.ny * d.nz {
            let (j, k) = (q % d.ny, q / d.ny);
            let my = 2.0 * std::f64::consts::PI * mode_number(j, d.ny) as f64 / d.ly;
            let mz = 2.0 * std::f64::consts::PI * mode_number(k, d.nz) as f64 / d.lz;
            let kk = (my * my + mz * mz).sqrt();
            let (iy, iz) = (Complex64::new(0.0, ky[j]), Complex64::new(0.0, kz[k]));
            for i in 0..lines {
                let x = i as f64 * d.dx();
                let (psi, phi) = if kk == 0.0 {
                    (Complex64::new(0.5 * (f_in + f_out) * m, 0.0), ZERO)
                } else {
                    let den = 1.0 - (-2.0 * kk * lx).exp();
                    let ex = (kk * (x - lx)).exp();
                    let exm = (-kk * x).exp();
                    let sh = |e: f64, e2: f64| e * (1.0 - e2) / den;
                    let ch = |e: f64, e2: f64| e * (1.0 + e2) / den;
                    let e2x = (-2.0 * kk * x).exp();
                    let e2r = (-2.0 * kk * (lx - x)).exp();
                    let psi = al[q] * sh(ex, e2x) + a0[q] * sh(exm, e2r);
                    let phi = (al[q] * ch(ex, e2x) - a0[q] * ch(exm, e2r)) / kk;
                    (psi, phi)
                };
                out[0][q * lines + i] = psi;
                out[1][q * lines + i] = iy * phi;
                out[2][q * lines + i] = iz * phi;
            }
        }
        let tr = self.ops.transform();
        Ok(GridVectorField {
            domain: d,
            t,
            comps: [tr.inverse(&out[0]), tr.inverse(&out[1]), tr.inverse(&out[2])],
        })
    }

    /// `K[w] + grad phi`, whose normal trace is the given data.
    pub fn k_un(&self, w: &GridVectorField, un_in: &BoundaryGrid, un_out: &BoundaryGrid, tol: RangeTol) -> Result<GridVectorField> {
        let k = self.biot_savart(w, tol)?;
        let g = self.harmonic_gradient(un_in, un_out, w.t, tol.flux.max(1e-10))?;
        Ok(k.add(&g))
    }

    /// `Omega(w) u`, with `Omega = grad K[w] - (grad K[w])^T`.
    pub fn omega_times_u(&self, w: &GridVectorField, u: &dyn FieldProvider, tol: RangeTol) -> Result<GridVectorField> {
        let k = self.biot_savart(w, tol)?;
        let j = self.ops.jacobian(&k);
        let d = self.domain;
        let vals = par::try_map_range(self.exec, d.len(), |n| {
            let uv = u.eval(w.t, d.node_at(n))?;
            let mut r = Vec3::zeros();
            for i in 0..3 {
                for kk in 0..3 {
                    r[i] += (j[i][kk][n] - j[kk][i][n]) * uv[kk];
                }
            }
            Ok::<_, Error>(r)
        })?;
        Ok(GridVectorField::from_vecs(d, w.t, &vals))
    }
}

/// Normal velocity on both walls at time `t`.
pub fn normal_velocity(u: &dyn FieldProvider, domain: &ChannelDomain, t: f64) -> Result<(BoundaryGrid, BoundaryGrid)> {
    let f = |side: Side| -> Result<BoundaryGrid> {
        let values = (0..domain.boundary_len())
            .map(|m| Ok(u.eval(t, domain.boundary_node(side, m))?.x * side.sign()))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundaryGrid {
            domain: *domain,
            side,
            values,
        })
    };
    Ok((f(Side::Inflow)?, f(Side::Outflow)?))
}

pub fn leray_project(v: &GridVectorField) -> Result<GridVectorField> {
    CurlSolver::new(v.domain).leray(v)
}

pub fn biot_savart_k(w: &GridVectorField) -> Result<GridVectorField> {
    CurlSolver::new(w.domain).biot_savart(w, RangeTol::default())
}

pub fn k_un(w: &GridVectorField, un_in: &BoundaryGrid, un_out: &BoundaryGrid) -> Result<GridVectorField> {
    CurlSolver::new(w.domain).k_un(w, un_in, un_out, RangeTol::default())
}

fn grid_of(f: &dyn FieldProvider, domain: &ChannelDomain, t: f64, exec: Exec) -> Result<GridVectorField> {
    GridVectorField::try_from_fn(*domain, t, exec, |x| f.eval(t, x))
}

/// Options of the velocity-recovery pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryOptions {
    pub range: RangeTol,
    pub exec: Exec,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            range: RangeTol { div: 1e-4, flux: 1e-4 },
            exec: Exec::Parallel,
        }
    }
}

/// `mean(f) - mean(Omega(w) u)` in components 2 and 3 at the time of `w`.
pub fn harmonic_rate(
    solver: &CurlSolver,
    u: &dyn FieldProvider,
    w: &GridVectorField,
    f: &dyn FieldProvider,
    opts: &RecoveryOptions,
) -> Result<(f64, f64)> {
    let fg = grid_of(f, &solver.domain, w.t, opts.exec)?;
    let ou = solver.omega_times_u(w, u, opts.range)?;
    Ok((fg.mean(1) - ou.mean(1), fg.mean(2) - ou.mean(2)))
}

/// Harmonic coefficients at the snapshot time `t`, integrating the rate
/// over the snapshots up to `t` with nonuniform Simpson. On the first
/// interval the quadratic through the first three snapshots is integrated
/// instead.
pub fn vc_harmonic(
    u: &dyn FieldProvider,
    omega: &[GridVectorField],
    f: &dyn FieldProvider,
    u0_harmonic: (f64, f64),
    t: f64,
    opts: &RecoveryOptions,
) -> Result<(f64, f64)> {
    if omega.len() < 3 || omega[0].t.abs() > 1e-12 {
        return Err(Error::DataCoverage(format!(
            "the harmonic integral needs at least 3 snapshots starting at 0, found {}",
            omega.len()
        )));
    }
    let upto = omega.iter().take_while(|w| w.t <= t * (1.0 + 1e-12) + 1e-15).count();
    if upto == 0 || (omega[upto - 1].t - t).abs() > 1e-12 * t.abs().max(1.0) {
        return Err(Error::DataCoverage(format!("no vorticity snapshot at t = {t}")));
    }
    if upto == 1 {
        return Ok(u0_harmonic);
    }
    let used = upto.max(3);
    let solver = CurlSolver::new(omega[0].domain).with_exec(opts.exec);
    let rates = omega[..used]
        .iter()
        .map(|w| harmonic_rate(&solver, u, w, f, opts).map(|(a, b)| Vector2::new(a, b)))
        .collect::<Result<Vec<_>>>()?;
    let times: Vec<f64> = omega[..used].iter().map(|w| w.t).collect();
    let int = if upto == 2 {
        let (gx, gw) = crate::quadrature::gauss_legendre_on(2, times[0], times[1]);
        let mut acc = Vector2::zeros();
        for (x, w) in gx.iter().zip(&gw) {
            let (l, _) = crate::geometry::interp::lagrange_weights(&times, *x);
            for k in 0..3 {
                acc += rates[k] * (l[k] * w);
            }
        }
        acc
    } else {
        simpson_nonuniform(&times, &rates)?
    };
    Ok((u0_harmonic.0 + int[0], u0_harmonic.1 + int[1]))
}

/// Velocity and pressure gradient recovered at one snapshot time.
#[derive(Clone, Debug)]
pub struct VelocityRecovery {
    pub v: GridVectorField,
    pub grad_pi: GridVectorField,
    /// `dv/dt + Omega u - f + grad pi`, a gradient up to discretization.
    pub residual: GridVectorField,
    pub curl_residual: f64,
    pub harmonic: (f64, f64),
}

fn velocity_at(
    solver: &CurlSolver,
    u: &dyn FieldProvider,
    omega: &[GridVectorField],
    f: &dyn FieldProvider,
    u0_harmonic: (f64, f64),
    k: usize,
    opts: &RecoveryOptions,
) -> Result<(GridVectorField, (f64, f64))> {
    let w = &omega[k];
    let c = vc_harmonic(u, omega, f, u0_harmonic, w.t, opts)?;
    let (a, b) = normal_velocity(u, &solver.domain, w.t)?;
    let mut v = solver.k_un(w, &a, &b, opts.range)?;
    v.comps[1].iter_mut().for_each(|x| *x += c.0);
    v.comps[2].iter_mut().for_each(|x| *x += c.1);
    Ok((v, c))
}

/// Three-point derivative weights at `times[k]` over `idx`.
fn fd_weights(t: [f64; 3], at: f64) -> [f64; 3] {
    let (_, d) = crate::geometry::interp::lagrange_weights(&t, at);
    [d[0], d[1], d[2]]
}

/// Recovers `v = K_Un[w(t)] + (0, Vc(t))` and the pressure gradient as the
/// gradient part of `f - dv/dt - Omega u`, with `dv/dt` from three-point
/// differences over neighbouring snapshots.
pub fn recover_velocity_and_pressure(
    u: &dyn FieldProvider,
    omega: &[GridVectorField],
    f: &dyn FieldProvider,
    u0_harmonic: (f64, f64),
    t: f64,
    opts: &RecoveryOptions,
) -> Result<VelocityRecovery> {
    let k = omega
        .iter()
        .position(|w| (w.t - t).abs() <= 1e-12 * t.abs().max(1.0))
        .ok_or_else(|| Error::DataCoverage(format!("no vorticity snapshot at t = {t}")))?;
    if omega.len() < 3 {
        return Err(Error::DataCoverage("time derivative needs at least 3 snapshots".into()));
    }
    let stencil = if k == 0 {
        [0, 1, 2]
    } else if k + 1 == omega.len() {
        [k - 2, k - 1, k]
    } else {
        [k - 1, k, k + 1]
    };
    let domain = omega[k].domain;
    let solver = CurlSolver::new(domain).with_exec(opts.exec);
    let mut vs = Vec::with_capacity(3);
    let mut harmonic = (0.0, 0.0);
    for &s in &stencil {
        let (v, c) = velocity_at(&solver, u, omega, f, u0_harmonic, s, opts)?;
        if s == k {
            harmonic = c;
        }
        vs.push(v);
    }
    let w = fd_weights([omega[stencil[0]].t, omega[stencil[1]].t, omega[stencil[2]].t], t);
    let dvdt = vs[0].scale(w[0]).add(&vs[1].scale(w[1])).add(&vs[2].scale(w[2]));
    let v = vs[stencil.iter().position(|&s| s == k).unwrap()].clone();
    let ou = solver.omega_times_u(&omega[k], u, opts.range)?;
    let fg = grid_of(f, &domain, t, opts.exec)?;
    let h = fg.sub(&dvdt).sub(&ou);
    let ph = solver.leray(&h)?;
    let grad_pi = h.sub(&ph);
    let residual = ph.scale(-1.0);
    let curl_residual = solver.ops().curl(&residual).max_abs();
    Ok(VelocityRecovery {
        v,
        grad_pi,
        residual,
        curl_residual,
        harmonic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::provider::ExprField;
    use std::collections::HashMap;
    use std::f64::consts::PI;

    fn dom(nx: usize, n: usize) -> ChannelDomain {
        ChannelDomain::new(1.0, 1.0, 1.0, nx, n, n).unwrap()
    }

    fn grid(d: ChannelDomain, f: impl Fn(Vec3) -> Vec3 + Sync + Send) -> GridVectorField {
        GridVectorField::from_fn(d, 0.0, Exec::Sequential, f)
    }

    /// A smooth field in `H_0 + H_c` built as a discrete curl of a potential
    /// whose tangential part vanishes on both walls.
    fn tangent_field(d: ChannelDomain) -> GridVectorField {
        let a = grid(d, |x| {
            let b = x.x * (1.0 - x.x);
            Vec3::new(
                (2.0 * PI * x.y).sin() * (1.0 + x.x) + 0.3 * (2.0 * PI * x.z).cos(),
                b * (2.0 * PI * (x.y + x.z)).cos(),
                b * b * (2.0 * PI * x.z).sin() + b * (1.0 + x.x),
            )
        });
        DiffOps::spectral(d).curl(&a)
    }

    #[test]
    fn zero_and_antiderivative() {
        let d = dom(64, 4);
        assert_eq!(biot_savart_k(&GridVectorField::zeros(d, 0.0)).unwrap().max_abs(), 0.0);
        let w = grid(d, |x| Vec3::new(0.0, 0.0, PI * (PI * x.x).cos()));
        let v = biot_savart_k(&w).unwrap();
        for n in 0..d.len() {
            let x = d.node_at(n);
            let want = Vec3::new(0.0, (PI * x.x).sin() - 2.0 / PI, 0.0);
            assert!((v.get(n) - want).norm() < 2e-3, "{:?} vs {want:?}", v.get(n));
        }
    }

    #[test]
    fn roundtrip_on_discrete_range() {
        let d = dom(32, 8);
        let s = CurlSolver::new(d);
        let v0 = tangent_field(d);
        let w = s.ops().curl(&v0);
        let k = s.biot_savart(&w, RangeTol::default()).unwrap();
        let back = s.ops().curl(&k);
        assert!(back.sub(&w).max_abs() < 1e-9 * w.max_abs());
        let (c2, c3) = harmonic_project(&k);
        assert!(c2.abs() < 1e-12 && c3.abs() < 1e-12);
        let (h2, h3) = harmonic_project(&v0);
        let mut shifted = v0.clone();
        shifted.comps[1].iter_mut().for_each(|x| *x -= h2);
        shifted.comps[2].iter_mut().for_each(|x| *x -= h3);
        assert!(k.sub(&shifted).max_abs() < 1e-9 * v0.max_abs());
    }

    #[test]
    fn rejects_fields_outside_the_range() {
        let d = dom(16, 4);
        let w = grid(d, |_| Vec3::new(1.0, 0.0, 0.0));
        assert!(matches!(biot_savart_k(&w), Err(Error::NotInRange(_))));
        let w = grid(d, |x| Vec3::new(x.x, 0.0, 0.0));
        assert!(matches!(biot_savart_k(&w), Err(Error::NotInRange(_))));
        assert!((external_flux(&grid(d, |_| Vec3::new(1.0, 0.0, 0.0)), Side::Inflow) + 1.0).abs() < 1e-14);
        assert!((external_flux(&grid(d, |_| Vec3::new(1.0, 0.0, 0.0)), Side::Outflow) - 1.0).abs() < 1e-14);
        assert_eq!(external_flux(&grid(d, |_| Vec3::new(0.0, 1.0, 0.0)), Side::Outflow), 0.0);
    }

    #[test]
    fn leray_projection_properties() {
        let d = dom(16, 8);
        let s = CurlSolver::new(d);
        let q = grid(d, |x| Vec3::new(0.0, 2.0 * PI * (2.0 * PI * x.y).cos(), 0.0));
        assert!(s.leray(&q).unwrap().max_abs() < 1e-12);
        let v = tangent_field(d);
        assert!(s.leray(&v).unwrap().sub(&v).max_abs() < 1e-10);
        let arb = grid(d, |x| Vec3::new(x.x * x.y + 1.0, (x.x * 3.0).sin() + (2.0 * PI * x.z).cos(), x.x));
        let p = s.leray(&arb).unwrap();
        assert!(s.ops().divergence(&p).max_abs() < 1e-10);
        assert!(p.trace(Side::Inflow).normal_component().max_abs() < 1e-12);
        assert!(p.trace(Side::Outflow).normal_component().max_abs() < 1e-12);
        let pp = s.leray(&p).unwrap();
        assert!(pp.sub(&p).max_abs() < 1e-10);
        let (c2, c3) = harmonic_project(&p);
        let hc = grid(d, |_| Vec3::new(0.0, c2, c3));
        let rest = p.sub(&hc);
        let dot: f64 = (0..d.len()).map(|n| rest.get(n).dot(&hc.get(n)) * d.node_weight(n)).sum();
        assert!(dot.abs() < 1e-12);
    }

    #[test]
    fn harmonic_and_internal_fluxes() {
        let d = ChannelDomain::new(2.0, 1.0, 0.5, 16, 4, 4).unwrap();
        let v = grid(d, |_| Vec3::new(0.0, 3.0, 0.0));
        assert_eq!(harmonic_project(&v), (3.0, 0.0));
        let (fy, fz) = internal_flux_checked(&grid(d, |_| Vec3::new(0.0, 1.0, 0.0)), 1e-12).unwrap();
        assert!((fy - 1.0).abs() < 1e-14 && fz == 0.0);
        let bad = grid(d, |x| Vec3::new(0.0, x.y, 0.0));
        assert!(internal_flux_checked(&bad, 1e-6).is_err());
        let k = biot_savart_k(&DiffOps::spectral(d).curl(&tangent_field(d))).unwrap();
        let (a, b) = internal_flux(&k);
        assert!(a.abs() < 1e-12 && b.abs() < 1e-12);
    }

    #[test]
    fn harmonic_gradient_reproduces_normal_data() {
        let d = dom(32, 8);
        let s = CurlSolver::new(d);
        let u = ExprField::parse(["1", "0", "0"], &HashMap::new()).unwrap();
        let (a, b) = normal_velocity(&u, &d, 0.0).unwrap();
        let g = s.harmonic_gradient(&a, &b, 0.0, 1e-10).unwrap();
        assert!(g.sub(&grid(d, |_| Vec3::new(1.0, 0.0, 0.0))).max_abs() < 1e-13);
        let u = ExprField::parse(["1 + 0.3*sin(2*pi*y)", "0", "0"], &HashMap::new()).unwrap();
        let (a, b) = normal_velocity(&u, &d, 0.0).unwrap();
        let mut b2 = b.clone();
        for (m, v) in b2.values.iter_mut().enumerate() {
            let z = d.boundary_node(Side::Outflow, m).z;
            *v += 0.2 * (2.0 * PI * z).cos();
        }
        let g = s.harmonic_gradient(&a, &b2, 0.0, 1e-10).unwrap();
        for m in 0..d.boundary_len() {
            assert!((g.comps[0][d.idx(0, m % 8, m / 8)] + a.values[m]).abs() < 1e-12);
            assert!((g.comps[0][d.idx(32, m % 8, m / 8)] - b2.values[m]).abs() < 1e-12);
        }
        assert!(s.ops().divergence(&g).max_abs() < 0.05);
        let mut c = b.clone();
        c.values.iter_mut().for_each(|v| *v += 0.1);
        assert!(matches!(s.harmonic_gradient(&a, &c, 0.0, 1e-10), Err(Error::Incompatible(_))));
    }

    #[test]
    fn harmonic_trajectory_with_constant_forcing() {
        let d = dom(8, 4);
        let u = ExprField::parse(["1", "0", "0"], &HashMap::new()).unwrap();
        let f = ExprField::parse(["0", "1", "0"], &HashMap::new()).unwrap();
        let om: Vec<GridVectorField> = [0.0, 0.1, 0.25, 0.3].iter().map(|&t| GridVectorField::zeros(d, t)).collect();
        let o = RecoveryOptions::default();
        let (c2, c3) = vc_harmonic(&u, &om, &f, (0.5, -0.2), 0.3, &o).unwrap();
        assert!((c2 - 0.8).abs() < 1e-14 && (c3 + 0.2).abs() < 1e-14);
        assert!(vc_harmonic(&u, &om[..2], &f, (0.0, 0.0), 0.1, &o).is_err());
        let (c2, _) = vc_harmonic(&u, &om, &f, (0.5, -0.2), 0.1, &o).unwrap();
        assert!((c2 - 0.6).abs() < 1e-14);
        let zero = ExprField::parse(["0", "0", "0"], &HashMap::new()).unwrap();
        assert_eq!(vc_harmonic(&u, &om, &zero, (0.5, -0.2), 0.25, &o).unwrap(), (0.5, -0.2));
    }

    #[test]
    fn zero_vorticity_recovers_uniform_flow() {
        let d = dom(8, 4);
        let u = ExprField::parse(["1", "0", "0"], &HashMap::new()).unwrap();
        let zero = ExprField::parse(["0", "0", "0"], &HashMap::new()).unwrap();
        let om: Vec<GridVectorField> = [0.0, 0.1, 0.2].iter().map(|&t| GridVectorField::zeros(d, t)).collect();
        let r = recover_velocity_and_pressure(&u, &om, &zero, (0.0, 0.0), 0.1, &RecoveryOptions::default()).unwrap();
        assert!(r.v.sub(&grid(d, |_| Vec3::new(1.0, 0.0, 0.0))).max_abs() < 1e-13);
        assert!(r.grad_pi.max_abs() < 1e-12);
        assert!(r.curl_residual < 1e-12);
    }
}
