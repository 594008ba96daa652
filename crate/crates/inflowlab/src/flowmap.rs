//! Flow map `eta(t1, t2; x)` of a velocity field and its spatial Jacobian,
//! integrated together with classical RK4.

use crate::error::{Error, Result};
use crate::geometry::domain::ChannelDomain;
use crate::geometry::provider::{FieldProvider, SLAB_MARGIN};
use crate::{Mat3, Vec3};

/// Hard cap on RK4 steps per trajectory.
pub const MAX_STEPS: usize = 10_000_000;

/// Admissible x1-range for trajectories.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slab {
    pub lo: f64,
    pub hi: f64,
}

impl Slab {
    pub fn unbounded() -> Self {
        Slab {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    /// The channel widened by the default extrapolation margin.
    pub fn for_domain(d: &ChannelDomain) -> Self {
        let m = SLAB_MARGIN * d.lx;
        Slab { lo: -m, hi: d.lx + m }
    }

    #[inline]
    pub fn check(&self, x: Vec3) -> Result<()> {
        if !x.iter().all(|c| c.is_finite()) {
            return Err(Error::Numeric(format!("trajectory state {x:?}")));
        }
        if x.x < self.lo || x.x > self.hi {
            return Err(Error::IntegrationDomain { x1: x.x });
        }
        Ok(())
    }
}

/// Result of one flow-map integration.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSample {
    pub t1: f64,
    pub t2: f64,
    pub x: Vec3,
    pub eta: Vec3,
    pub grad_eta: Mat3,
    /// Step actually used (signed).
    pub step: f64,
}

/// Number of uniform steps of size at most `h` covering `span`.
pub fn steps_for(span: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
    }
    let n = (span.abs() / h - 1e-9).ceil().max(1.0);
    if n > MAX_STEPS as f64 {
        return Err(Error::StepCap(MAX_STEPS));
    }
    Ok(n as usize)
}

/// One RK4 step of the position ODE.
#[inline]
pub fn rk4_position(u: &dyn FieldProvider, t: f64, x: Vec3, dt: f64) -> Result<Vec3> {
    let k1 = u.eval(t, x)?;
    let k2 = u.eval(t + 0.5 * dt, x + k1 * (0.5 * dt))?;
    let k3 = u.eval(t + 0.5 * dt, x + k2 * (0.5 * dt))?;
    let k4 = u.eval(t + dt, x + k3 * dt)?;
    Ok(x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0))
}

/// One RK4 step of the position ODE coupled with the variational equation
/// `dJ/dt = grad u (t, X) J`.
#[inline]
pub fn rk4_coupled(u: &dyn FieldProvider, t: f64, x: Vec3, j: &Mat3, dt: f64) -> Result<(Vec3, Mat3)> {
    let half = 0.5 * dt;
    let (k1, g1) = u.eval_grad(t, x)?;
    let m1 = g1 * j;
    let (k2, g2) = u.eval_grad(t + half, x + k1 * half)?;
    let m2 = g2 * (j + m1 * half);
    let (k3, g3) = u.eval_grad(t + half, x + k2 * half)?;
    let m3 = g3 * (j + m2 * half);
    let (k4, g4) = u.eval_grad(t + dt, x + k3 * dt)?;
    let m4 = g4 * (j + m3 * dt);
    Ok((
        x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0),
        j + (m1 + (m2 + m3) * 2.0 + m4) * (dt / 6.0),
    ))
}

/// Integrates `eta(t1, t2; x)` and its Jacobian with uniform steps of size
/// at most `h`, inside `slab`.
pub fn integrate_flow_in(
    u: &dyn FieldProvider,
    t1: f64,
    t2: f64,
    x: Vec3,
    h: f64,
    slab: Slab,
) -> Result<FlowSample> {
    let n = steps_for(t2 - t1, h)?;
    let dt = (t2 - t1) / n as f64;
    let (mut p, mut j) = (x, Mat3::identity());
    if t1 != t2 {
        for s in 0..n {
            let t = t1 + s as f64 * dt;
            (p, j) = rk4_coupled(u, t, p, &j, dt)?;
            slab.check(p)?;
        }
        if !j.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite flow Jacobian".into()));
        }
    }
    Ok(FlowSample {
        t1,
        t2,
        x,
        eta: p,
        grad_eta: j,
        step: dt,
    })
}

/// [`integrate_flow_in`] without a slab restriction.
pub fn integrate_flow(u: &dyn FieldProvider, t1: f64, t2: f64, x: Vec3, h: f64) -> Result<FlowSample> {
    integrate_flow_in(u, t1, t2, x, h, Slab::unbounded())
}

/// Position only, without the Jacobian.
pub fn integrate_position(u: &dyn FieldProvider, t1: f64, t2: f64, x: Vec3, h: f64, slab: Slab) -> Result<Vec3> {
    let n = steps_for(t2 - t1, h)?;
    let dt = (t2 - t1) / n as f64;
    let mut p = x;
    if t1 != t2 {
        for s in 0..n {
            p = rk4_position(u, t1 + s as f64 * dt, p, dt)?;
            slab.check(p)?;
        }
    }
    Ok(p)
}

/// `|eta(t2, t3; eta(t1, t2; x)) - eta(t1, t3; x)|`.
pub fn group_defect(u: &dyn FieldProvider, t1: f64, t2: f64, t3: f64, x: Vec3, h: f64) -> Result<f64> {
    let s = Slab::unbounded();
    let mid = integrate_position(u, t1, t2, x, h, s)?;
    let composed = integrate_position(u, t2, t3, mid, h, s)?;
    let direct = integrate_position(u, t1, t3, x, h, s)?;
    Ok((composed - direct).norm())
}

/// Finite-difference residual of the self-transport identity
/// `d eta / d t1 + grad eta . u(t1, x) = 0`, with centered step `delta`
/// in `t1` and RK4 step `h`.
pub fn self_transport_residual(
    u: &dyn FieldProvider,
    t1: f64,
    t2: f64,
    x: Vec3,
    delta: f64,
    h: f64,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {delta}")));
    }
    let s = Slab::unbounded();
    let fwd = integrate_position(u, t1 + delta, t2, x, h, s)?;
    let bwd = integrate_position(u, t1 - delta, t2, x, h, s)?;
    let d_t1 = (fwd - bwd) / (2.0 * delta);
    let f = integrate_flow_in(u, t1, t2, x, h, s)?;
    Ok((d_t1 + f.grad_eta * u.eval(t1, x)?).norm())
}
