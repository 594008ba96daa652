//! Compatibility residuals of the data on the inflow wall at `t = 0`, the
//! range-of-curl boundary condition, and the first-order jump across the
//! interface.

use nalgebra::{Matrix3x4, Vector4};
use serde::{Deserialize, Serialize};

use crate::entry::{entry_gradients, trace_back, Trace};
use crate::error::{Error, Result};
use crate::flowmap::integrate_flow_in;
use crate::geometry::domain::{ChannelDomain, Side};
use crate::geometry::grid::{BoundaryGrid, BoundaryVectorField};
use crate::geometry::ops::surface_divergence;
use crate::geometry::provider::{FieldProvider, HigherDerivatives};
use crate::par::{self, Exec};
use crate::transport::{evaluate_branch, Branch, EvalOptions, ProblemData};
use crate::{Mat3, Vec3};

fn inflow_map(domain: &ChannelDomain, f: impl Fn(Vec3) -> Result<f64> + Sync + Send) -> Result<BoundaryGrid> {
    let values = par::try_map_range(Exec::Parallel, domain.boundary_len(), |m| {
        f(domain.boundary_node(Side::Inflow, m))
    })?;
    Ok(BoundaryGrid {
        domain: *domain,
        side: Side::Inflow,
        values,
    })
}

/// `H(0, x) - Y0(x)`.
pub fn cond0_vector(data: &ProblemData, x: Vec3) -> Result<Vec3> {
    Ok(data.h.eval(0.0, x)? - data.y0.eval(0.0, x)?)
}

/// `dH/dt(0) + grad Y0 u0 - grad u0 Y0 - g(0)`.
pub fn cond1_vector(data: &ProblemData, x: Vec3) -> Result<Vec3> {
    let (y0, gy) = data.y0.eval_grad(0.0, x)?;
    let (u0, gu) = data.u.eval_grad(0.0, x)?;
    Ok(data.h.dt(0.0, x)? + gy * u0 - gu * y0 - data.g.eval(0.0, x)?)
}

fn need<'a>(f: &'a dyn FieldProvider, name: &str) -> Result<&'a dyn HigherDerivatives> {
    f.higher()
        .ok_or_else(|| Error::Capability(format!("second derivatives of {name} are unavailable for gridded data")))
}

/// Second-order residual with `dY/dt(0)` replaced through the equation.
pub fn cond2_vector(data: &ProblemData, x: Vec3) -> Result<Vec3> {
    let hu = need(data.u.as_ref(), "u")?;
    let hy = need(data.y0.as_ref(), "Y0")?;
    let hh = need(data.h.as_ref(), "H")?;
    need(data.g.as_ref(), "g")?;
    let (y0, gy) = data.y0.eval_grad(0.0, x)?;
    let (u0, gu) = data.u.eval_grad(0.0, x)?;
    let (g0, gg) = data.g.eval_grad(0.0, x)?;
    let w = g0 - gy * u0 + gu * y0;
    let (sy, su) = (hy.hessian(0.0, x), hu.hessian(0.0, x));
    let mut gw = gg - gy * gu + gu * gy;
    for i in 0..3 {
        let a = sy[i].transpose() * u0;
        let b = su[i].transpose() * y0;
        for k in 0..3 {
            gw[(i, k)] += b[k] - a[k];
        }
    }
    let ut = data.u.dt(0.0, x)?;
    Ok(hh.dtt(0.0, x) + gy * ut + gw * u0 - gu * w - hu.grad_dt(0.0, x) * y0 - data.g.dt(0.0, x)?)
}

pub fn cond0_residual(data: &ProblemData, domain: &ChannelDomain) -> Result<BoundaryGrid> {
    inflow_map(domain, |x| Ok(cond0_vector(data, x)?.norm()))
}

pub fn cond1_residual(data: &ProblemData, domain: &ChannelDomain) -> Result<BoundaryGrid> {
    inflow_map(domain, |x| Ok(cond1_vector(data, x)?.norm()))
}

pub fn cond2_residual(data: &ProblemData, domain: &ChannelDomain) -> Result<BoundaryGrid> {
    inflow_map(domain, |x| Ok(cond2_vector(data, x)?.norm()))
}

/// Signed residual `dH^n/dt + div_G(H^n u^tau - U^n H^tau) - g.n` on the
/// inflow wall at time `t`.
pub fn range_of_curl_signed(data: &ProblemData, domain: &ChannelDomain, t: f64) -> Result<BoundaryGrid> {
    let len = domain.boundary_len();
    let mut w = BoundaryVectorField {
        domain: *domain,
        side: Side::Inflow,
        comps: [vec![0.0; len], vec![0.0; len], vec![0.0; len]],
    };
    let mut local = vec![0.0; len];
    for m in 0..len {
        let x = domain.boundary_node(Side::Inflow, m);
        let (h, u) = (data.h.eval(t, x)?, data.u.eval(t, x)?);
        w.comps[1][m] = u.x * h.y - h.x * u.y;
        w.comps[2][m] = u.x * h.z - h.x * u.z;
        local[m] = -data.h.dt(t, x)?.x + data.g.eval(t, x)?.x;
    }
    let div = surface_divergence(&w)?;
    Ok(BoundaryGrid {
        domain: *domain,
        side: Side::Inflow,
        values: local.iter().zip(&div.values).map(|(a, b)| a + b).collect(),
    })
}

pub fn range_of_curl_residual(data: &ProblemData, domain: &ChannelDomain, t: f64) -> Result<BoundaryGrid> {
    let mut r = range_of_curl_signed(data, domain, t)?;
    r.values.iter_mut().for_each(|v| *v = v.abs());
    Ok(r)
}

/// Entry data of a point on the interface.
#[derive(Clone, Copy, Debug)]
pub struct InterfacePoint {
    pub tau: f64,
    pub gamma: Vec3,
    /// `grad eta(0, t; gamma)`.
    pub b: Mat3,
    pub d_tau: Vector4<f64>,
}

/// Locates the entry of a point on the interface; fails when its entry time
/// is further than `s_tol` from zero.
pub fn interface_point(data: &ProblemData, t: f64, x: Vec3, opts: &EvalOptions, s_tol: f64) -> Result<InterfacePoint> {
    let u = data.u.as_ref();
    let reach = -(s_tol + 4.0 * opts.step());
    let (tau, gamma) = match trace_back(u, t, x, reach, &opts.entry)? {
        Trace::Entered { tau, gamma } => (tau, gamma),
        Trace::Survived { end } => {
            return Err(Error::Geometry(format!("({t}, {x:?}) is not on the interface (origin {end:?})")))
        }
    };
    if tau.abs() > s_tol {
        return Err(Error::Geometry(format!("({t}, {x:?}) enters at tau = {tau}, not on the interface")));
    }
    let j = integrate_flow_in(u, t, tau, x, opts.step(), opts.entry.slab)?.grad_eta;
    let b = j
        .try_inverse()
        .ok_or_else(|| Error::Numeric("singular flow Jacobian".into()))?;
    let (d_tau, _) = entry_gradients(u, t, x, &opts.entry)?;
    Ok(InterfacePoint { tau, gamma, b, d_tau })
}

/// Predicted jump `D(Y+ - Y-)` at a point of the interface, columns ordered
/// `(d/dt, d/dx1, d/dx2, d/dx3)`.
pub fn jump_oracle(data: &ProblemData, t: f64, x: Vec3, opts: &EvalOptions, cond0_tol: f64) -> Result<Matrix3x4<f64>> {
    let p = interface_point(data, t, x, opts, 1e3 * opts.entry.tol)?;
    let c0 = cond0_vector(data, p.gamma)?.norm();
    if c0 > cond0_tol {
        return Err(Error::Inapplicable(format!(
            "zeroth-order compatibility fails at {:?} by {c0:e}",
            p.gamma
        )));
    }
    let r = p.b * cond1_vector(data, p.gamma)?;
    Ok(r * p.d_tau.transpose())
}

/// Measured jumps across the interface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpMeasurement {
    pub epsilon: f64,
    pub y_jump: Vec3,
    pub dy_jump: Matrix3x4<f64>,
}

fn branch_derivative(
    data: &ProblemData,
    t: f64,
    x: Vec3,
    branch: Branch,
    opts: &EvalOptions,
    delta: f64,
) -> Result<(Vec3, Matrix3x4<f64>)> {
    let y = evaluate_branch(data, t, x, branch, opts)?;
    let mut d = Matrix3x4::zeros();
    let a = evaluate_branch(data, t + delta, x, branch, opts)?;
    let b = evaluate_branch(data, t - delta, x, branch, opts)?;
    d.set_column(0, &((a - b) / (2.0 * delta)));
    for k in 0..3 {
        let mut e = Vec3::zeros();
        e[k] = delta;
        let a = evaluate_branch(data, t, x + e, branch, opts)?;
        let b = evaluate_branch(data, t, x - e, branch, opts)?;
        d.set_column(k + 1, &((a - b) / (2.0 * delta)));
    }
    Ok((y, d))
}

/// Evaluates each branch on its own side at `p -/+ eps n`, with `n` the
/// spatial normal of the interface pointing into the inflow region, and
/// differentiates it with centered steps `eps / 2`.
pub fn measure_jump(data: &ProblemData, t: f64, p: Vec3, eps: f64, opts: &EvalOptions, domain: &ChannelDomain) -> Result<JumpMeasurement> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("offset must be positive, got {eps}")));
    }
    let (d_tau, _) = entry_gradients(data.u.as_ref(), t, p, &opts.entry)?;
    let g = Vec3::new(d_tau[1], d_tau[2], d_tau[3]);
    let n = g
        .try_normalize(1e-300)
        .ok_or_else(|| Error::Geometry("degenerate interface normal".into()))?;
    let xp = p + n * eps;
    let xm = p - n * eps;
    let delta = 0.5 * eps;
    for x in [xp, xm] {
        if x.x - delta < 0.0 || x.x + delta > domain.lx {
            return Err(Error::Geometry(format!("straddle point {x:?} leaves the channel")));
        }
    }
    let (yp, dp) = branch_derivative(data, t, xp, Branch::Plus, opts, delta)?;
    let (ym, dm) = branch_derivative(data, t, xm, Branch::Minus, opts, delta)?;
    Ok(JumpMeasurement {
        epsilon: eps,
        y_jump: yp - ym,
        dy_jump: dp - dm,
    })
}

/// Richardson combination of jumps measured at `eps` and `eps / 2`.
pub fn richardson(coarse: &JumpMeasurement, fine: &JumpMeasurement) -> Matrix3x4<f64> {
    fine.dy_jump * 2.0 - coarse.dy_jump
}

/// Sup-norm compatibility residuals on the inflow wall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatReport {
    pub tol: f64,
    pub cond0: f64,
    pub cond1: f64,
    /// `None` when second derivatives of the data are unavailable.
    pub cond2: Option<f64>,
    pub range_of_curl: f64,
    pub cond0_pass: bool,
    pub cond1_pass: bool,
    pub cond2_pass: Option<bool>,
    pub range_of_curl_pass: bool,
    /// Order below which every condition passed; higher orders are not
    /// trusted once a lower one fails.
    pub trusted_order: usize,
}

pub fn compat_report(data: &ProblemData, domain: &ChannelDomain, tol: f64) -> Result<CompatReport> {
    let cond0 = cond0_residual(data, domain)?.max_abs();
    let cond1 = cond1_residual(data, domain)?.max_abs();
    let cond2 = match cond2_residual(data, domain) {
        Ok(r) => Some(r.max_abs()),
        Err(Error::Capability(_)) => None,
        Err(e) => return Err(e),
    };
    let range_of_curl = range_of_curl_residual(data, domain, 0.0)?.max_abs();
    let pass = [cond0 <= tol, cond1 <= tol, cond2.is_some_and(|c| c <= tol)];
    let trusted_order = pass.iter().take_while(|&&p| p).count();
    Ok(CompatReport {
        tol,
        cond0,
        cond1,
        cond2,
        range_of_curl,
        cond0_pass: pass[0],
        cond1_pass: pass[1],
        cond2_pass: cond2.map(|_| pass[2]),
        range_of_curl_pass: range_of_curl <= tol,
        trusted_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::provider::{ExprField, GriddedField, SharedField};
    use crate::geometry::grid::GridVectorField;
    use crate::transport::manufacture;
    use std::collections::HashMap;
    use std::sync::Arc;

    fn f(src: [&str; 3]) -> SharedField {
        ExprField::parse(src, &HashMap::new()).unwrap().shared()
    }

    fn data(u: [&str; 3], y0: [&str; 3], h: [&str; 3]) -> ProblemData {
        ProblemData {
            u: f(u),
            y0: f(y0),
            h: f(h),
            g: f(["0", "0", "0"]),
            horizon: 1.0,
        }
    }

    fn dom() -> ChannelDomain {
        ChannelDomain::unit(8).unwrap()
    }

    #[test]
    fn hand_evaluated_cond1() {
        let d = data(["1", "0", "0"], ["1", "0", "0"], ["1 + t", "0", "0"]);
        assert!((cond1_residual(&d, &dom()).unwrap().max_abs() - 1.0).abs() < 1e-15);
        let d = data(["1", "0.5*x", "0"], ["1", "0", "0"], ["1 + t", "0", "0"]);
        let r = cond1_residual(&d, &dom()).unwrap();
        assert!(r.values.iter().all(|v| (v - 1.25f64.sqrt()).abs() < 1e-15));
        let d = data(["1", "0", "0"], ["1", "0", "0"], ["1", "0.1", "0"]);
        assert!((cond0_residual(&d, &dom()).unwrap().max_abs() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn manufactured_data_is_compatible_to_second_order() {
        let u = ExprField::parse(["1 + 0.2*sin(2*pi*y)", "0.3*x + 0.1*t", "cos(2*pi*y)*0.2"], &HashMap::new()).unwrap();
        let y = ExprField::parse(["sin(x + 2*t) + cos(2*pi*z)", "exp(-t)*x*x", "t*t*sin(2*pi*y)"], &HashMap::new()).unwrap();
        let (d, _) = manufacture(&u, &y, 1.0);
        let r = compat_report(&d, &dom(), 1e-12).unwrap();
        assert!(r.cond0 < 1e-15 && r.cond1 < 1e-12 && r.cond2.unwrap() < 1e-12, "{r:?}");
        assert_eq!(r.trusted_order, 3);
    }

    #[test]
    fn delayed_inflow_has_linear_cond2_slope() {
        let u = ExprField::parse(["1", "0", "0"], &HashMap::new()).unwrap();
        let y = ExprField::parse(["sin(3*t)", "0", "0"], &HashMap::new()).unwrap();
        let (base, _) = manufacture(&u, &y, 1.0);
        let x = Vec3::new(0.0, 0.2, 0.3);
        let at = |delta: f64| {
            let mut d = base.clone();
            d.h = f([&format!("sin(3*(t - {delta}))"), "0", "0"]);
            cond2_vector(&d, x).unwrap().norm()
        };
        let (a, b) = (at(1e-3), at(5e-4));
        assert!((a / b - 2.0).abs() < 1e-2, "{a} {b}");
        assert!((a / 1e-3 - 27.0).abs() < 0.1);
    }

    #[test]
    fn cond2_refuses_gridded_data() {
        let mut d = data(["1", "0", "0"], ["1", "0", "0"], ["1", "0", "0"]);
        d.y0 = Arc::new(GriddedField::steady(GridVectorField::zeros(dom(), 0.0)));
        assert!(matches!(cond2_residual(&d, &dom()), Err(Error::Capability(_))));
        let r = compat_report(&d, &dom(), 1e-9).unwrap();
        assert_eq!(r.cond2, None);
    }

    #[test]
    fn range_of_curl_examples() {
        let d = data(["1", "0", "0"], ["0", "0", "0"], ["2", "3", "-1"]);
        assert!(range_of_curl_residual(&d, &dom(), 0.3).unwrap().max_abs() < 1e-14);
        let d = data(["1", "0", "0"], ["0", "0", "0"], ["-sin(2*pi*y)*t", "0", "0"]);
        let r = range_of_curl_residual(&d, &dom(), 0.5).unwrap();
        let dm = dom();
        for m in 0..dm.boundary_len() {
            let y = dm.boundary_node(Side::Inflow, m).y;
            assert!((r.values[m] - (2.0 * std::f64::consts::PI * y).sin().abs()).abs() < 1e-14);
        }
    }

    #[test]
    fn range_of_curl_is_normal_part_of_cond1() {
        let d = ProblemData {
            u: f(["1 + 0.1*sin(2*pi*z)", "0.2*x", "0.3*sin(2*pi*y)"]),
            y0: f(["cos(2*pi*y)", "0.5*sin(2*pi*z)", "x"]),
            h: f(["cos(2*pi*y)*(1 + t)", "0.5*sin(2*pi*z) + t", "t*t"]),
            g: f(["0.2*cos(2*pi*z)", "0", "0"]),
            horizon: 1.0,
        };
        let dm = ChannelDomain::new(1.0, 1.0, 1.0, 8, 16, 16).unwrap();
        let r = range_of_curl_signed(&d, &dm, 0.0).unwrap();
        for m in 0..dm.boundary_len() {
            let x = dm.boundary_node(Side::Inflow, m);
            let n1 = -cond1_vector(&d, x).unwrap().x;
            assert!((r.values[m] - n1).abs() < 1e-10, "{} vs {n1}", r.values[m]);
        }
    }

    #[test]
    fn uniform_and_shear_oracle() {
        let o = EvalOptions::new(&dom(), 1e-3);
        let d = data(["1", "0", "0"], ["1", "0", "0"], ["1 + t", "0", "0"]);
        let m = jump_oracle(&d, 0.4, Vec3::new(0.4, 0.3, 0.3), &o, 1e-9).unwrap();
        let want = Matrix3x4::new(1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!((m - want).norm() < 1e-9, "{m}");
        let d = data(["1", "0.5*x", "0"], ["1", "0", "0"], ["1 + t", "0", "0"]);
        let m = jump_oracle(&d, 0.4, Vec3::new(0.4, 0.3, 0.3), &o, 1e-9).unwrap();
        assert!((m.column(0) - Vec3::new(1.0, -0.3, 0.0)).norm() < 1e-9, "{m}");
        let c = data(["1", "0", "0"], ["1", "0", "0"], ["1", "0", "0"]);
        assert!(jump_oracle(&c, 0.4, Vec3::new(0.4, 0.3, 0.3), &o, 1e-9).unwrap().norm() < 1e-15);
        let bad = data(["1", "0", "0"], ["1", "0", "0"], ["2", "0", "0"]);
        assert!(matches!(
            jump_oracle(&bad, 0.4, Vec3::new(0.4, 0.3, 0.3), &o, 1e-9),
            Err(Error::Inapplicable(_))
        ));
    }

    #[test]
    fn measured_jump_of_zero_data_vanishes() {
        let d = ProblemData::zero(f(["1", "0", "0"]), 1.0);
        let o = EvalOptions::new(&dom(), 0.01);
        let j = measure_jump(&d, 0.4, Vec3::new(0.4, 0.1, 0.1), 0.02, &o, &dom()).unwrap();
        assert_eq!(j.y_jump, Vec3::zeros());
        assert_eq!(j.dy_jump, Matrix3x4::zeros());
    }

    #[test]
    fn measured_uniform_jump_matches_oracle() {
        let d = data(["1", "0", "0"], ["1", "0", "0"], ["1 + t", "0", "0"]);
        let o = EvalOptions::new(&dom(), 0.01);
        let j = measure_jump(&d, 0.4, Vec3::new(0.4, 0.1, 0.1), 0.02, &o, &dom()).unwrap();
        let want = jump_oracle(&d, 0.4, Vec3::new(0.4, 0.1, 0.1), &o, 1e-9).unwrap();
        assert!((j.dy_jump - want).norm() < 1e-8, "{}", j.dy_jump);
        assert!((j.y_jump.x - 0.02).abs() < 1e-9);
    }
}
