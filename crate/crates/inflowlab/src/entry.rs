//! Entry time and entry point of backward characteristics, region labels,
//! the transported level set and the transversality horizon.

use nalgebra::{Matrix3x4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowmap::{integrate_flow_in, integrate_position, rk4_position, steps_for, Slab};
use crate::geometry::domain::{ChannelDomain, Side};
use crate::geometry::provider::FieldProvider;
use crate::par::{self, Exec};
use crate::{Mat3, Vec3};

/// Which data a space-time point sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// Backward trajectory reaches `t = 0` inside the channel.
    Minus,
    /// Backward trajectory enters through the inflow wall at `tau > 0`.
    Plus,
    /// On the interface: entry exactly at `t = 0`.
    OnS,
}

impl Region {
    pub fn code(self) -> i8 {
        match self {
            Region::Minus => -1,
            Region::OnS => 0,
            Region::Plus => 1,
        }
    }
}

/// Characteristics data of one point.
#[derive(Clone, Debug, PartialEq)]
pub struct EntryRecord {
    pub region: Region,
    /// Entry time; `-inf` for `Minus`.
    pub tau: f64,
    /// Entry point on the inflow wall (absent for `Minus`).
    pub gamma: Option<Vec3>,
    /// Origin at `t = 0` (absent for `Plus`).
    pub gamma0: Option<Vec3>,
    /// `grad eta(tau, t; gamma)` on `Plus`, `grad eta(0, t; gamma0)` otherwise.
    pub b: Mat3,
}

/// Numerical parameters of backward tracing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntryOptions {
    pub step: f64,
    /// Bisection tolerance on `|x1|` at the crossing.
    pub tol: f64,
    pub lx: f64,
    pub slab: Slab,
}

impl EntryOptions {
    pub fn new(domain: &ChannelDomain, step: f64) -> Self {
        EntryOptions {
            step,
            tol: 1e-10 * domain.lx,
            lx: domain.lx,
            slab: Slab::for_domain(domain),
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Outcome of a backward trace from `(t, x)` down to `s_min`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Trace {
    /// Crossed `x1 = 0` at time `tau` and point `gamma` (with `gamma.x = 0`).
    Entered { tau: f64, gamma: Vec3 },
    /// Reached `s_min` at `end` without crossing.
    Survived { end: Vec3 },
}

/// Traces the characteristic through `(t, x)` backward to `s_min`, stopping
/// at the first crossing of the inflow plane.
pub fn trace_back(u: &dyn FieldProvider, t: f64, x: Vec3, s_min: f64, opts: &EntryOptions) -> Result<Trace> {
    if x.x <= opts.tol && t > s_min {
        return Ok(Trace::Entered {
            tau: t,
            gamma: Vec3::new(0.0, x.y, x.z),
        });
    }
    if t <= s_min {
        return Ok(Trace::Survived { end: x });
    }
    let n = steps_for(t - s_min, opts.step)?;
    let dt = -(t - s_min) / n as f64;
    let upper = opts.lx * (1.0 + 1e-9) + opts.tol;
    let mut p = x;
    for k in 0..n {
        let s = t + k as f64 * dt;
        let q = rk4_position(u, s, p, dt)?;
        if !q.iter().all(|c| c.is_finite()) {
            return Err(Error::Numeric(format!("trajectory state {q:?}")));
        }
        if q.x > upper {
            return Err(Error::InvalidVelocity(format!(
                "backward trajectory from {x:?} at t = {t} leaves through the outflow wall"
            )));
        }
        if q.x <= 0.0 {
            let (sigma, point) = bisect_crossing(u, s, p, -dt, opts.tol)?;
            return Ok(Trace::Entered {
                tau: s - sigma,
                gamma: Vec3::new(0.0, point.y, point.z),
            });
        }
        p = q;
    }
    Ok(Trace::Survived { end: p })
}

/// Finds `sigma` in `(0, span]` with a single backward RK4 sub-step from
/// `(s, p)` landing on `x1 = 0` to within `tol`.
fn bisect_crossing(u: &dyn FieldProvider, s: f64, p: Vec3, span: f64, tol: f64) -> Result<(f64, Vec3)> {
    let (mut lo, mut hi) = (0.0, span);
    let mut best = (hi, rk4_position(u, s, p, -hi)?);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let q = rk4_position(u, s, p, -mid)?;
        if q.x.abs() <= tol {
            return Ok((mid, q));
        }
        if q.x > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            best = (mid, q);
        }
        if hi - lo <= f64::EPSILON * span.max(1e-300) {
            break;
        }
    }
    Ok(best)
}

/// Locates the entry data of `(t, x)` and the matching Jacobian, which is
/// re-integrated forward from the located origin.
pub fn locate_entry(u: &dyn FieldProvider, t: f64, x: Vec3, opts: &EntryOptions) -> Result<EntryRecord> {
    if t < 0.0 {
        return Err(Error::InvalidInput(format!("negative time {t}")));
    }
    if x.x < -opts.tol || x.x > opts.lx + opts.tol {
        return Err(Error::OutOfDomain(format!("x1 = {} outside [0, {}]", x.x, opts.lx)));
    }
    match trace_back(u, t, x, 0.0, opts)? {
        Trace::Entered { tau, gamma } => {
            let b = integrate_flow_in(u, tau, t, gamma, opts.step, opts.slab)?.grad_eta;
            Ok(EntryRecord {
                region: Region::Plus,
                tau,
                gamma: Some(gamma),
                gamma0: None,
                b,
            })
        }
        Trace::Survived { end } => {
            let on_s = end.x <= opts.tol;
            let b = integrate_flow_in(u, 0.0, t, end, opts.step, opts.slab)?.grad_eta;
            Ok(EntryRecord {
                region: if on_s { Region::OnS } else { Region::Minus },
                tau: if on_s { 0.0 } else { f64::NEG_INFINITY },
                gamma: on_s.then(|| Vec3::new(0.0, end.y, end.z)),
                gamma0: Some(end),
                b,
            })
        }
    }
}

/// Level set `phi(t, x) = eta(t, 0; x) . e1`, negative on `Plus`, positive on
/// `Minus`.
pub fn levelset_phi(u: &dyn FieldProvider, t: f64, x: Vec3, opts: &EntryOptions) -> Result<f64> {
    Ok(integrate_position(u, t, 0.0, x, opts.step, opts.slab)?.x)
}

/// Level-set value with a fallback for points whose extended backward
/// trajectory leaves the slab: `-tau |u1(tau, gamma)|`, which has the right
/// sign and the right size near the interface. The flag is true when the
/// value is exact.
pub fn levelset_value(u: &dyn FieldProvider, t: f64, x: Vec3, opts: &EntryOptions) -> Result<(f64, bool)> {
    match trace_back(u, t, x, 0.0, opts)? {
        Trace::Survived { end } => Ok((end.x, true)),
        Trace::Entered { tau, gamma } => match integrate_position(u, tau, 0.0, gamma, opts.step, opts.slab) {
            Ok(p) => Ok((p.x.min(0.0), true)),
            Err(Error::IntegrationDomain { .. }) | Err(Error::DataCoverage(_)) => {
                Ok((-tau * u.eval(tau, gamma)?.x.abs(), false))
            }
            Err(e) => Err(e),
        },
    }
}

/// Closed-form derivatives of the entry time and entry point with respect
/// to `(t, x)`, ordered `(d/dt, d/dx1, d/dx2, d/dx3)`.
///
/// The derivative of the flow map in its first time argument uses the
/// self-transport identity `d eta/d t1 = -grad eta . u(t1, x)`.
pub fn entry_gradients(
    u: &dyn FieldProvider,
    t: f64,
    x: Vec3,
    opts: &EntryOptions,
) -> Result<(Vector4<f64>, Matrix3x4<f64>)> {
    let s_min = -4.0 * opts.step.max(opts.tol);
    let (tau, gamma) = match trace_back(u, t, x, s_min, opts)? {
        Trace::Entered { tau, gamma } => (tau, gamma),
        Trace::Survived { .. } => {
            return Err(Error::Inapplicable(format!(
                "({t}, {x:?}) has no entry point; the entry map is defined on the inflow region"
            )))
        }
    };
    let slab = Slab::unbounded();
    let j = integrate_flow_in(u, t, tau, x, opts.step, slab)?.grad_eta;
    let d_t1 = -(j * u.eval(t, x)?);
    let mut d_eta = Matrix3x4::zeros();
    d_eta.set_column(0, &d_t1);
    for k in 0..3 {
        d_eta.set_column(k + 1, &j.column(k));
    }
    let n = Side::Inflow.normal();
    let ug = u.eval(tau, gamma)?;
    let un = ug.dot(&n);
    if un.abs() < 1e-10 * ug.norm().max(1.0) {
        return Err(Error::NearTangency(un.abs()));
    }
    let d_tau: Vector4<f64> = -(d_eta.transpose() * n) / un;
    let d_gamma = d_eta + ug * d_tau.transpose();
    Ok((d_tau, d_gamma))
}

/// Region labels and level-set values on the grid at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionMask {
    pub domain: ChannelDomain,
    pub t: f64,
    /// `-1` Minus, `0` interface band, `+1` Plus.
    pub codes: Vec<i8>,
    pub phi: Vec<f64>,
    pub band: f64,
}

impl RegionMask {
    pub fn count(&self, code: i8) -> usize {
        self.codes.iter().filter(|&&c| c == code).count()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.codes.iter().map(|&c| c as f64).collect()
    }
}

/// Classifies every node at time `t`; nodes with `|phi| <= band` form the
/// interface band.
pub fn classify_grid(
    u: &dyn FieldProvider,
    t: f64,
    domain: &ChannelDomain,
    opts: &EntryOptions,
    band: f64,
    exec: Exec,
) -> Result<RegionMask> {
    let phi = par::try_map_range(exec, domain.len(), |n| {
        Ok::<f64, Error>(levelset_value(u, t, domain.node_at(n), opts)?.0)
    })?;
    let codes = phi
        .iter()
        .map(|&p| {
            if p.abs() <= band {
                0
            } else if p < 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    Ok(RegionMask {
        domain: *domain,
        t,
        codes,
        phi,
        band,
    })
}

/// Kind of transversality failure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// The interface reached the outflow wall.
    InterfaceExit,
    /// The entry time stopped increasing along the interface.
    EntryTimeNotIncreasing,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TstarReport {
    pub tstar: f64,
    pub violations: Vec<Violation>,
}

fn outflow_entered(u: &dyn FieldProvider, t: f64, domain: &ChannelDomain, opts: &EntryOptions, stride: usize) -> Result<bool> {
    for m in (0..domain.boundary_len()).step_by(stride) {
        let x = domain.boundary_node(Side::Outflow, m);
        if let Trace::Entered { tau, .. } = trace_back(u, t, x, 0.0, opts)? {
            if tau >= 0.0 {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Empirical transversality horizon: the largest sampled `t <= horizon`
/// such that the interface stays inside the channel and the entry time
/// increases in time along it. Interface exits are located by bisection.
pub fn tstar_monitor(
    u: &dyn FieldProvider,
    domain: &ChannelDomain,
    horizon: f64,
    dt: f64,
    opts: &EntryOptions,
) -> Result<TstarReport> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("monitor step must be positive, got {dt}")));
    }
    let stride = (domain.boundary_len() / 16).max(1);
    let samples = steps_for(horizon, dt)?;
    let mut last_ok = 0.0;
    for k in 1..=samples {
        let t = (k as f64 * dt).min(horizon);
        if outflow_entered(u, t, domain, opts, stride)? {
            let (mut lo, mut hi) = (last_ok, t);
            while hi - lo > 1e-9 * horizon.max(1.0) {
                let mid = 0.5 * (lo + hi);
                if outflow_entered(u, mid, domain, opts, stride)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(TstarReport {
                tstar: lo,
                violations: vec![Violation {
                    t: hi,
                    kind: ViolationKind::InterfaceExit,
                }],
            });
        }
        for m in (0..domain.boundary_len()).step_by(stride * 4) {
            let seed = domain.boundary_node(Side::Inflow, m);
            let Ok(on_s) = integrate_position(u, 0.0, t, seed, opts.step, opts.slab) else {
                continue;
            };
            let (d_tau, _) = entry_gradients(u, t, on_s, opts)?;
            if !(d_tau[0] > 0.0) {
                return Ok(TstarReport {
                    tstar: last_ok,
                    violations: vec![Violation {
                        t,
                        kind: ViolationKind::EntryTimeNotIncreasing,
                    }],
                });
            }
        }
        last_ok = t;
    }
    Ok(TstarReport {
        tstar: horizon,
        violations: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::provider::ExprField;
    use std::collections::HashMap;

    fn field(src: [&str; 3]) -> ExprField {
        ExprField::parse(src, &HashMap::new()).unwrap()
    }

    fn opts() -> EntryOptions {
        EntryOptions::new(&ChannelDomain::unit(8).unwrap(), 0.01)
    }

    #[test]
    fn uniform_flow_regions() {
        let u = field(["1", "0", "0"]);
        let r = locate_entry(&u, 0.5, Vec3::new(0.2, 0.1, 0.1), &opts()).unwrap();
        assert_eq!(r.region, Region::Plus);
        assert!((r.tau - 0.3).abs() < 1e-9);
        assert!((r.gamma.unwrap() - Vec3::new(0.0, 0.1, 0.1)).norm() < 1e-12);
        assert!((r.b - Mat3::identity()).norm() < 1e-12);
        let r = locate_entry(&u, 0.5, Vec3::new(0.7, 0.1, 0.1), &opts()).unwrap();
        assert_eq!(r.region, Region::Minus);
        assert!((r.gamma0.unwrap() - Vec3::new(0.2, 0.1, 0.1)).norm() < 1e-12);
    }

    #[test]
    fn shear_entry_closed_form() {
        let u = field(["1", "0.5*x", "0"]);
        let r = locate_entry(&u, 0.5, Vec3::new(0.2, 0.3, 0.4), &opts()).unwrap();
        assert_eq!(r.region, Region::Plus);
        assert!((r.tau - 0.3).abs() < 1e-9);
        assert!((r.gamma.unwrap() - Vec3::new(0.0, 0.29, 0.4)).norm() < 1e-9);
        let mut b = Mat3::identity();
        b[(1, 0)] = 0.1;
        assert!((r.b - b).norm() < 1e-9);
    }

    #[test]
    fn inflow_wall_and_initial_time() {
        let u = field(["1", "0", "0"]);
        let r = locate_entry(&u, 0.4, Vec3::new(0.0, 0.3, 0.2), &opts()).unwrap();
        assert_eq!(r.region, Region::Plus);
        assert_eq!(r.tau, 0.4);
        assert_eq!(r.gamma.unwrap(), Vec3::new(0.0, 0.3, 0.2));
        let r = locate_entry(&u, 0.0, Vec3::new(0.0, 0.3, 0.2), &opts()).unwrap();
        assert_eq!(r.region, Region::OnS);
        let r = locate_entry(&u, 0.0, Vec3::new(0.5, 0.3, 0.2), &opts()).unwrap();
        assert_eq!(r.region, Region::Minus);
    }

    #[test]
    fn reversed_flow_is_invalid() {
        let u = field(["-1", "0", "0"]);
        let r = locate_entry(&u, 0.5, Vec3::new(0.8, 0.0, 0.0), &opts());
        assert!(matches!(r, Err(Error::InvalidVelocity(_))));
    }

    #[test]
    fn levelset_of_uniform_flow() {
        let u = field(["1", "0", "0"]);
        let x = Vec3::new(0.7, 0.2, 0.1);
        assert!((levelset_phi(&u, 0.3, x, &opts()).unwrap() - 0.4).abs() < 1e-13);
        assert!((levelset_phi(&u, 0.0, x, &opts()).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn uniform_entry_gradients() {
        let u = field(["1", "0", "0"]);
        let (dtau, dgamma) = entry_gradients(&u, 0.5, Vec3::new(0.2, 0.1, 0.3), &opts()).unwrap();
        let want = Vector4::new(1.0, -1.0, 0.0, 0.0);
        assert!((dtau - want).norm() < 1e-12);
        let mut g = Matrix3x4::zeros();
        g[(1, 2)] = 1.0;
        g[(2, 3)] = 1.0;
        assert!((dgamma - g).norm() < 1e-12);
        assert!(entry_gradients(&u, 0.5, Vec3::new(0.8, 0.1, 0.3), &opts()).is_err());
    }

    #[test]
    fn classification_of_uniform_flow() {
        let d = ChannelDomain::unit(8).unwrap();
        let u = field(["1", "0", "0"]);
        let o = EntryOptions::new(&d, 0.05);
        let m = classify_grid(&u, 0.0, &d, &o, 1e-9, Exec::Sequential).unwrap();
        assert_eq!(m.count(0), d.boundary_len());
        assert_eq!(m.count(-1), d.len() - d.boundary_len());
        let m = classify_grid(&u, 0.5, &d, &o, 1e-6, Exec::Sequential).unwrap();
        for n in 0..d.len() {
            let x1 = d.node_at(n).x;
            let want = if (x1 - 0.5).abs() < 1e-9 {
                0
            } else if x1 < 0.5 {
                1
            } else {
                -1
            };
            assert_eq!(m.codes[n], want, "x1 = {x1}");
        }
    }

    #[test]
    fn tstar_of_uniform_flow() {
        let d = ChannelDomain::unit(8).unwrap();
        let u = field(["1", "0", "0"]);
        let o = EntryOptions::new(&d, 0.05);
        let r = tstar_monitor(&u, &d, 0.8, 0.1, &o).unwrap();
        assert_eq!(r.tstar, 0.8);
        assert!(r.violations.is_empty());
        let r = tstar_monitor(&u, &d, 1.5, 0.1, &o).unwrap();
        assert!((r.tstar - 1.0).abs() < 1e-6, "{r:?}");
        assert_eq!(r.violations[0].kind, ViolationKind::InterfaceExit);
    }
}
