//! Time-dependent vector fields evaluable at arbitrary `(t, x)`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Program, Var};
use crate::{Mat3, Vec3};

use super::domain::{ChannelDomain, Side};
use super::grid::GridVectorField;
use super::interp::{interpolate_grad_clamped, lagrange_weights};

/// How a provider obtains its values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Analytic,
    Gridded,
}

/// Second-order information, available from symbolic providers only.
pub trait HigherDerivatives: Send + Sync {
    fn dtt(&self, t: f64, x: Vec3) -> Vec3;
    /// Spatial gradient of the time derivative.
    fn grad_dt(&self, t: f64, x: Vec3) -> Mat3;
    /// `hessian[i][(j, k)]` is the second derivative of component `i` along
    /// axes `j` and `k`.
    fn hessian(&self, t: f64, x: Vec3) -> [Mat3; 3];
}

/// A vector field with value, spatial gradient (entry `(i, k)` is the
/// derivative of component `i` along axis `k`) and time derivative.
pub trait FieldProvider: Send + Sync {
    fn eval(&self, t: f64, x: Vec3) -> Result<Vec3>;
    fn grad(&self, t: f64, x: Vec3) -> Result<Mat3>;
    fn dt(&self, t: f64, x: Vec3) -> Result<Vec3>;
    fn flavor(&self) -> Flavor;

    fn eval_grad(&self, t: f64, x: Vec3) -> Result<(Vec3, Mat3)> {
        Ok((self.eval(t, x)?, self.grad(t, x)?))
    }

    fn higher(&self) -> Option<&dyn HigherDerivatives> {
        None
    }

    /// True when the field is identically zero (lets callers skip work).
    fn is_zero(&self) -> bool {
        false
    }
}

pub type SharedField = Arc<dyn FieldProvider>;

/// The zero field.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroField;

impl FieldProvider for ZeroField {
    fn eval(&self, _: f64, _: Vec3) -> Result<Vec3> {
        Ok(Vec3::zeros())
    }
    fn grad(&self, _: f64, _: Vec3) -> Result<Mat3> {
        Ok(Mat3::zeros())
    }
    fn dt(&self, _: f64, _: Vec3) -> Result<Vec3> {
        Ok(Vec3::zeros())
    }
    fn flavor(&self) -> Flavor {
        Flavor::Analytic
    }
    fn higher(&self) -> Option<&dyn HigherDerivatives> {
        Some(self)
    }
    fn is_zero(&self) -> bool {
        true
    }
}

impl HigherDerivatives for ZeroField {
    fn dtt(&self, _: f64, _: Vec3) -> Vec3 {
        Vec3::zeros()
    }
    fn grad_dt(&self, _: f64, _: Vec3) -> Mat3 {
        Mat3::zeros()
    }
    fn hessian(&self, _: f64, _: Vec3) -> [Mat3; 3] {
        [Mat3::zeros(); 3]
    }
}

pub fn zero() -> SharedField {
    Arc::new(ZeroField)
}

/// Symbolic field with exact derivatives of every order.
pub struct ExprField {
    exprs: [Expr; 3],
    value: Program,
    value_grad: Program,
    time: Program,
    second: OnceLock<Program>,
}

impl Clone for ExprField {
    fn clone(&self) -> Self {
        Self::new(self.exprs.clone())
    }
}

impl std::fmt::Debug for ExprField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ExprField({}, {}, {})", self.exprs[0], self.exprs[1], self.exprs[2])
    }
}

impl ExprField {
    pub fn new(exprs: [Expr; 3]) -> Self {
        let value = Program::compile(&exprs);
        let mut vg = exprs.to_vec();
        for e in &exprs {
            for v in Var::SPACE {
                vg.push(e.diff(v));
            }
        }
        let time: Vec<Expr> = exprs.iter().map(|e| e.diff(Var::T)).collect();
        ExprField {
            value_grad: Program::compile(&vg),
            time: Program::compile(&time),
            value,
            exprs,
            second: OnceLock::new(),
        }
    }

    /// Parses three component expressions.
    pub fn parse(src: [&str; 3], consts: &HashMap<String, f64>) -> Result<Self> {
        Ok(Self::new([
            Expr::parse(src[0], consts)?,
            Expr::parse(src[1], consts)?,
            Expr::parse(src[2], consts)?,
        ]))
    }

    pub fn constant(v: Vec3) -> Self {
        Self::new([Expr::constant(v.x), Expr::constant(v.y), Expr::constant(v.z)])
    }

    pub fn exprs(&self) -> &[Expr; 3] {
        &self.exprs
    }

    pub fn shared(self) -> SharedField {
        Arc::new(self)
    }

    fn second(&self) -> &Program {
        self.second.get_or_init(|| {
            let mut out = Vec::with_capacity(39);
            for e in &self.exprs {
                out.push(e.diff(Var::T).diff(Var::T));
            }
            for e in &self.exprs {
                let et = e.diff(Var::T);
                for v in Var::SPACE {
                    out.push(et.diff(v));
                }
            }
            for e in &self.exprs {
                let g: Vec<Expr> = Var::SPACE.iter().map(|&v| e.diff(v)).collect();
                for gj in &g {
                    for v in Var::SPACE {
                        out.push(gj.diff(v));
                    }
                }
            }
            Program::compile(&out)
        })
    }

    fn second_all(&self, t: f64, x: Vec3) -> [f64; 39] {
        let mut out = [0.0; 39];
        self.second().eval_into([t, x.x, x.y, x.z], &mut out);
        out
    }
}

fn finite3(v: Vec3) -> Result<Vec3> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("field value {v:?}")))
    }
}

impl FieldProvider for ExprField {
    fn eval(&self, t: f64, x: Vec3) -> Result<Vec3> {
        let mut o = [0.0; 3];
        self.value.eval_into([t, x.x, x.y, x.z], &mut o);
        finite3(Vec3::from(o))
    }

    fn grad(&self, t: f64, x: Vec3) -> Result<Mat3> {
        Ok(self.eval_grad(t, x)?.1)
    }

    fn eval_grad(&self, t: f64, x: Vec3) -> Result<(Vec3, Mat3)> {
        let mut o = [0.0; 12];
        self.value_grad.eval_into([t, x.x, x.y, x.z], &mut o);
        if !o.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite field gradient".into()));
        }
        let v = Vec3::new(o[0], o[1], o[2]);
        let g = Mat3::from_row_slice(&o[3..12]);
        Ok((v, g))
    }

    fn dt(&self, t: f64, x: Vec3) -> Result<Vec3> {
        let mut o = [0.0; 3];
        self.time.eval_into([t, x.x, x.y, x.z], &mut o);
        finite3(Vec3::from(o))
    }

    fn flavor(&self) -> Flavor {
        Flavor::Analytic
    }

    fn higher(&self) -> Option<&dyn HigherDerivatives> {
        Some(self)
    }

    fn is_zero(&self) -> bool {
        self.exprs.iter().all(|e| e.is_zero())
    }
}

impl HigherDerivatives for ExprField {
    fn dtt(&self, t: f64, x: Vec3) -> Vec3 {
        let o = self.second_all(t, x);
        Vec3::new(o[0], o[1], o[2])
    }

    fn grad_dt(&self, t: f64, x: Vec3) -> Mat3 {
        let o = self.second_all(t, x);
        Mat3::from_row_slice(&o[3..12])
    }

    fn hessian(&self, t: f64, x: Vec3) -> [Mat3; 3] {
        let o = self.second_all(t, x);
        [
            Mat3::from_row_slice(&o[12..21]),
            Mat3::from_row_slice(&o[21..30]),
            Mat3::from_row_slice(&o[30..39]),
        ]
    }
}

/// Default width of the constant-extrapolation margin beyond each wall,
/// relative to `Lx`.
pub const SLAB_MARGIN: f64 = 0.25;

/// Time-window of up to `order + 1` samples around `t`.
fn time_window(times: &[f64], t: f64, order: usize, tol: f64) -> Result<(usize, Vec<f64>, Vec<f64>)> {
    let n = times.len();
    let (t0, t1) = (times[0], times[n - 1]);
    if t < t0 - tol || t > t1 + tol {
        return Err(Error::DataCoverage(format!(
            "time {t} outside sampled range [{t0}, {t1}]"
        )));
    }
    if n == 1 {
        return Ok((0, vec![1.0], vec![0.0]));
    }
    let m = (order + 1).min(n);
    let pos = times.partition_point(|&s| s <= t);
    let start = pos.saturating_sub(m / 2).min(n - m);
    let (w, dw) = lagrange_weights(&times[start..start + m], t.clamp(t0, t1));
    Ok((start, w, dw))
}

fn check_increasing(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidInput("at least one time sample is required".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("time samples must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Snapshots on the channel grid: tricubic in space, cubic Lagrange in time,
/// constant in x1 within the extrapolation margin.
#[derive(Clone, Debug)]
pub struct GriddedField {
    snapshots: Vec<GridVectorField>,
    times: Vec<f64>,
    margin: f64,
    time_tol: f64,
}

impl GriddedField {
    pub fn new(snapshots: Vec<GridVectorField>) -> Result<Self> {
        let times: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
        check_increasing(&times)?;
        let d = snapshots[0].domain;
        if snapshots.iter().any(|s| s.domain != d) {
            return Err(Error::InvalidInput("snapshots live on different grids".into()));
        }
        let span = times[times.len() - 1] - times[0];
        Ok(GriddedField {
            snapshots,
            times,
            margin: SLAB_MARGIN * d.lx,
            time_tol: 1e-9 * span.max(1.0),
        })
    }

    /// A time-independent field.
    pub fn steady(field: GridVectorField) -> Self {
        let margin = SLAB_MARGIN * field.domain.lx;
        GriddedField {
            times: vec![field.t],
            snapshots: vec![field],
            margin,
            time_tol: f64::INFINITY,
        }
    }

    pub fn domain(&self) -> ChannelDomain {
        self.snapshots[0].domain
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn check_x(&self, x: Vec3) -> Result<()> {
        let lx = self.domain().lx;
        if x.x < -self.margin || x.x > lx + self.margin || !x.iter().all(|c| c.is_finite()) {
            return Err(Error::OutOfDomain(format!("x1 = {} beyond the extrapolation margin", x.x)));
        }
        Ok(())
    }

    fn combine(&self, t: f64, x: Vec3) -> Result<(Vec3, Mat3, Vec3)> {
        self.check_x(x)?;
        let steady = self.snapshots.len() == 1;
        let (start, w, dw) = if steady {
            (0, vec![1.0], vec![0.0])
        } else {
            time_window(&self.times, t, 3, self.time_tol)?
        };
        let mut v = Vec3::zeros();
        let mut g = Mat3::zeros();
        let mut d = Vec3::zeros();
        for (s, (ws, dws)) in w.iter().zip(&dw).enumerate() {
            let (vs, gs) = interpolate_grad_clamped(&self.snapshots[start + s], x);
            v += vs * *ws;
            g += gs * *ws;
            d += vs * *dws;
        }
        Ok((v, g, d))
    }
}

impl FieldProvider for GriddedField {
    fn eval(&self, t: f64, x: Vec3) -> Result<Vec3> {
        Ok(self.combine(t, x)?.0)
    }
    fn grad(&self, t: f64, x: Vec3) -> Result<Mat3> {
        Ok(self.combine(t, x)?.1)
    }
    fn eval_grad(&self, t: f64, x: Vec3) -> Result<(Vec3, Mat3)> {
        let (v, g, _) = self.combine(t, x)?;
        Ok((v, g))
    }
    fn dt(&self, t: f64, x: Vec3) -> Result<Vec3> {
        Ok(self.combine(t, x)?.2)
    }
    fn flavor(&self) -> Flavor {
        Flavor::Gridded
    }
}

/// Samples on the inflow boundary nodes over time: bilinear in `(y, z)`,
/// cubic in time. Evaluation ignores `x1`.
#[derive(Clone, Debug)]
pub struct BoundaryField {
    domain: ChannelDomain,
    times: Vec<f64>,
    frames: Vec<[Vec<f64>; 3]>,
    time_tol: f64,
}

impl BoundaryField {
    pub fn new(domain: ChannelDomain, times: Vec<f64>, frames: Vec<[Vec<f64>; 3]>) -> Result<Self> {
        check_increasing(&times)?;
        if frames.len() != times.len() {
            return Err(Error::InvalidInput("one frame per time sample is required".into()));
        }
        for f in &frames {
            for c in f {
                if c.len() != domain.boundary_len() {
                    return Err(Error::InvalidInput(format!(
                        "boundary frame needs {} samples, got {}",
                        domain.boundary_len(),
                        c.len()
                    )));
                }
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric("non-finite boundary sample".into()));
                }
            }
        }
        let span = times[times.len() - 1] - times[0];
        Ok(BoundaryField {
            domain,
            times,
            frames,
            time_tol: 1e-9 * span.max(1.0),
        })
    }

    /// Samples a provider on the inflow nodes at the given times.
    pub fn sample(domain: ChannelDomain, times: Vec<f64>, f: &dyn FieldProvider) -> Result<Self> {
        let mut frames = Vec::with_capacity(times.len());
        for &t in &times {
            let mut fr = [
                vec![0.0; domain.boundary_len()],
                vec![0.0; domain.boundary_len()],
                vec![0.0; domain.boundary_len()],
            ];
            for m in 0..domain.boundary_len() {
                let v = f.eval(t, domain.boundary_node(Side::Inflow, m))?;
                for c in 0..3 {
                    fr[c][m] = v[c];
                }
            }
            frames.push(fr);
        }
        Self::new(domain, times, frames)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn frames(&self) -> &[[Vec<f64>; 3]] {
        &self.frames
    }

    pub fn domain(&self) -> ChannelDomain {
        self.domain
    }

    fn spatial(&self, frame: &[Vec<f64>; 3], x: Vec3) -> (Vec3, Vec3, Vec3) {
        let d = self.domain;
        let sy = x.y.rem_euclid(d.ly) / d.dy();
        let sz = x.z.rem_euclid(d.lz) / d.dz();
        let (j0, k0) = (sy.floor() as usize % d.ny, sz.floor() as usize % d.nz);
        let (ry, rz) = (sy - sy.floor(), sz - sz.floor());
        let (j1, k1) = ((j0 + 1) % d.ny, (k0 + 1) % d.nz);
        let at = |c: usize, j: usize, k: usize| frame[c][j + d.ny * k];
        let mut v = Vec3::zeros();
        let mut gy = Vec3::zeros();
        let mut gz = Vec3::zeros();
        for c in 0..3 {
            let (a, b, e, f) = (at(c, j0, k0), at(c, j1, k0), at(c, j0, k1), at(c, j1, k1));
            v[c] = a * (1.0 - ry) * (1.0 - rz) + b * ry * (1.0 - rz) + e * (1.0 - ry) * rz + f * ry * rz;
            gy[c] = ((b - a) * (1.0 - rz) + (f - e) * rz) / d.dy();
            gz[c] = ((e - a) * (1.0 - ry) + (f - b) * ry) / d.dz();
        }
        (v, gy, gz)
    }

    fn combine(&self, t: f64, x: Vec3) -> Result<(Vec3, Mat3, Vec3)> {
        let (start, w, dw) = time_window(&self.times, t, 3, self.time_tol)?;
        let mut v = Vec3::zeros();
        let mut g = Mat3::zeros();
        let mut d = Vec3::zeros();
        for (s, (ws, dws)) in w.iter().zip(&dw).enumerate() {
            let (vs, gy, gz) = self.spatial(&self.frames[start + s], x);
            v += vs * *ws;
            d += vs * *dws;
            g.set_column(1, &(g.column(1) + gy * *ws));
            g.set_column(2, &(g.column(2) + gz * *ws));
        }
        Ok((v, g, d))
    }
}

impl FieldProvider for BoundaryField {
    fn eval(&self, t: f64, x: Vec3) -> Result<Vec3> {
        Ok(self.combine(t, x)?.0)
    }
    fn grad(&self, t: f64, x: Vec3) -> Result<Mat3> {
        Ok(self.combine(t, x)?.1)
    }
    fn dt(&self, t: f64, x: Vec3) -> Result<Vec3> {
        Ok(self.combine(t, x)?.2)
    }
    fn flavor(&self) -> Flavor {
        Flavor::Gridded
    }
}

/// A provider seen through a time shift: `t` maps to `t + offset`.
pub struct Shifted {
    inner: SharedField,
    offset: f64,
}

impl Shifted {
    pub fn new(inner: SharedField, offset: f64) -> Self {
        Shifted { inner, offset }
    }

    pub fn shared(inner: SharedField, offset: f64) -> SharedField {
        if offset == 0.0 {
            inner
        } else {
            Arc::new(Self::new(inner, offset))
        }
    }
}

impl FieldProvider for Shifted {
    fn eval(&self, t: f64, x: Vec3) -> Result<Vec3> {
        self.inner.eval(t + self.offset, x)
    }
    fn grad(&self, t: f64, x: Vec3) -> Result<Mat3> {
        self.inner.grad(t + self.offset, x)
    }
    fn eval_grad(&self, t: f64, x: Vec3) -> Result<(Vec3, Mat3)> {
        self.inner.eval_grad(t + self.offset, x)
    }
    fn dt(&self, t: f64, x: Vec3) -> Result<Vec3> {
        self.inner.dt(t + self.offset, x)
    }
    fn flavor(&self) -> Flavor {
        self.inner.flavor()
    }
    fn higher(&self) -> Option<&dyn HigherDerivatives> {
        self.inner.higher().map(|_| self as &dyn HigherDerivatives)
    }
    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }
}

impl HigherDerivatives for Shifted {
    fn dtt(&self, t: f64, x: Vec3) -> Vec3 {
        self.inner.higher().map_or(Vec3::zeros(), |h| h.dtt(t + self.offset, x))
    }
    fn grad_dt(&self, t: f64, x: Vec3) -> Mat3 {
        self.inner.higher().map_or(Mat3::zeros(), |h| h.grad_dt(t + self.offset, x))
    }
    fn hessian(&self, t: f64, x: Vec3) -> [Mat3; 3] {
        self.inner.higher().map_or([Mat3::zeros(); 3], |h| h.hessian(t + self.offset, x))
    }
}

/// Checks the velocity contract on the grid at time `t`: strict inflow on
/// the inflow wall, strict outflow on the outflow wall, flux balance and
/// pointwise divergence.
pub fn validate_velocity(u: &dyn FieldProvider, domain: &ChannelDomain, t: f64, tol: f64) -> Result<()> {
    let mut flux = [0.0; 2];
    for (s, side) in [Side::Inflow, Side::Outflow].into_iter().enumerate() {
        for m in 0..domain.boundary_len() {
            let x = domain.boundary_node(side, m);
            let un = u.eval(t, x)?.dot(&side.normal());
            let wrong = match side {
                Side::Inflow => un >= 0.0,
                Side::Outflow => un <= 0.0,
            };
            if wrong {
                return Err(Error::InvalidVelocity(format!(
                    "u.n = {un} at {:?} on the {side:?} wall at t = {t}; inflow requires u.n < 0 and outflow u.n > 0",
                    x
                )));
            }
            flux[s] += un * domain.dy() * domain.dz();
        }
    }
    let scale = flux[0].abs().max(flux[1].abs()).max(1.0);
    if (flux[0] + flux[1]).abs() > tol * scale {
        return Err(Error::InvalidVelocity(format!(
            "flux imbalance: inflow {} + outflow {} != 0",
            flux[0], flux[1]
        )));
    }
    for n in (0..domain.len()).step_by(7) {
        let g = u.grad(t, domain.node_at(n))?;
        let div = g.trace();
        if div.abs() > tol * g.norm().max(1.0) {
            return Err(Error::InvalidVelocity(format!(
                "divergence {div:e} at {:?}",
                domain.node_at(n)
            )));
        }
    }
    Ok(())
}
