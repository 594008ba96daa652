//! Pointwise evaluation of the Lagrangian solution and grid solves with
//! restarts.
//!
//! At `(t, x)` the characteristic is traced backward together with the
//! Jacobian `J(s) = grad eta(t, s; x)`. Its inverse at the far end pushes the
//! initial or inflow data forward, and `J(s)^-1 g(s, X(s))` is accumulated
//! with composite Simpson for the forcing integral.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::entry::{
    locate_entry, trace_back, tstar_monitor, EntryOptions, Region, RegionMask, Trace, TstarReport,
};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::flowmap::{integrate_position, rk4_coupled, steps_for, Slab};
use crate::geometry::domain::ChannelDomain;
use crate::geometry::dump::Dump;
use crate::geometry::grid::GridVectorField;
use crate::geometry::provider::{
    validate_velocity, ExprField, GriddedField, SharedField, Shifted, ZeroField,
};
use crate::par::{self, Exec};
use crate::quadrature::simpson_weights;
use crate::{Mat3, Vec3};

/// Velocity, initial data, inflow data, forcing and horizon.
#[derive(Clone)]
pub struct ProblemData {
    pub u: SharedField,
    /// Evaluated at `t = 0` only.
    pub y0: SharedField,
    /// Evaluated on the inflow wall; its `x1` argument is always `0`.
    pub h: SharedField,
    pub g: SharedField,
    pub horizon: f64,
}

impl ProblemData {
    /// Zero initial, inflow and forcing data.
    pub fn zero(u: SharedField, horizon: f64) -> Self {
        let z: SharedField = Arc::new(ZeroField);
        ProblemData {
            u,
            y0: z.clone(),
            h: z.clone(),
            g: z,
            horizon,
        }
    }

    /// Data of the restarted problem on `[offset, horizon]`, in local time.
    pub fn restarted(&self, offset: f64, y0: SharedField) -> Self {
        ProblemData {
            u: Shifted::shared(self.u.clone(), offset),
            y0,
            h: Shifted::shared(self.h.clone(), offset),
            g: Shifted::shared(self.g.clone(), offset),
            horizon: self.horizon - offset,
        }
    }
}

/// Which side of the interface to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// The point's own region, averaging both sides inside the band.
    Native,
    Minus,
    Plus,
}

/// Evaluation parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    pub entry: EntryOptions,
    /// Half-width of the averaging band in level-set units.
    pub band: f64,
    /// How far below `t = 0` a forced inflow branch may search for its
    /// entry.
    pub extension: f64,
}

impl EvalOptions {
    pub fn new(domain: &ChannelDomain, step: f64) -> Self {
        EvalOptions {
            entry: EntryOptions::new(domain, step),
            band: 2.0 * step,
            extension: 0.25,
        }
    }

    pub fn with_band(mut self, band: f64) -> Self {
        self.band = band;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.entry.tol = tol;
        self
    }

    pub fn step(&self) -> f64 {
        self.entry.step
    }
}

/// End state of a backward sweep.
#[derive(Clone, Copy, Debug)]
pub struct Sweep {
    pub end: Vec3,
    /// `grad eta(t, s_end; x)`.
    pub jacobian: Mat3,
    /// Forcing integral over `[s_end, t]`.
    pub forcing: Vec3,
}

/// Backward sweep from `(t, x)` to `s_end` with an even number (at least
/// `min_intervals`) of uniform steps no longer than `step`.
pub fn sweep(
    data: &ProblemData,
    t: f64,
    x: Vec3,
    s_end: f64,
    step: f64,
    min_intervals: usize,
    slab: Slab,
) -> Result<Sweep> {
    if min_intervals < 2 {
        return Err(Error::InvalidInput("forcing quadrature needs at least 3 nodes".into()));
    }
    let span = t - s_end;
    if span <= 0.0 {
        return Ok(Sweep {
            end: x,
            jacobian: Mat3::identity(),
            forcing: Vec3::zeros(),
        });
    }
    let mut n = steps_for(span, step)?.max(min_intervals);
    n += n % 2;
    let dt = -span / n as f64;
    let w = simpson_weights(n, span / n as f64)?;
    let forced = !data.g.is_zero();
    let u = data.u.as_ref();
    let (mut p, mut j) = (x, Mat3::identity());
    let mut acc = Vec3::zeros();
    if forced {
        acc += data.g.eval(t, x)? * w[0];
    }
    for k in 0..n {
        let s = t + k as f64 * dt;
        (p, j) = rk4_coupled(u, s, p, &j, dt)?;
        slab.check(p)?;
        if forced {
            let s1 = t + (k + 1) as f64 * dt;
            let ji = invert(&j)?;
            acc += ji * data.g.eval(s1, p)? * w[k + 1];
        }
    }
    Ok(Sweep {
        end: p,
        jacobian: j,
        forcing: acc,
    })
}

fn invert(j: &Mat3) -> Result<Mat3> {
    j.try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Numeric("singular flow Jacobian".into()))
}

/// Value from initial data: `B- Y0(gamma0) + G-`.
fn minus_value(data: &ProblemData, t: f64, x: Vec3, opts: &EvalOptions) -> Result<Vec3> {
    let sw = sweep(data, t, x, 0.0, opts.step(), 2, opts.entry.slab)?;
    let b = invert(&sw.jacobian)?;
    Ok(b * data.y0.eval(0.0, sw.end)? + sw.forcing)
}

/// Value from inflow data entering at `(tau, gamma)`: `B+ H(tau, gamma) + G+`.
fn plus_value(data: &ProblemData, t: f64, x: Vec3, tau: f64, gamma: Vec3, opts: &EvalOptions) -> Result<Vec3> {
    let sw = sweep(data, t, x, tau, opts.step(), 2, opts.entry.slab)?;
    let b = invert(&sw.jacobian)?;
    Ok(b * data.h.eval(tau, gamma)? + sw.forcing)
}

/// Entry of the extended characteristic, searching below `t = 0` when the
/// physical trajectory survives.
fn extended_entry(data: &ProblemData, t: f64, x: Vec3, s_min: f64, opts: &EvalOptions) -> Result<Option<(f64, Vec3)>> {
    match trace_back(data.u.as_ref(), t, x, s_min, &opts.entry)? {
        Trace::Entered { tau, gamma } => Ok(Some((tau, gamma))),
        Trace::Survived { .. } => Ok(None),
    }
}

/// Value of one branch, regardless of the point's own region.
pub fn evaluate_branch(data: &ProblemData, t: f64, x: Vec3, branch: Branch, opts: &EvalOptions) -> Result<Vec3> {
    match branch {
        Branch::Native => lagrangian_solution(data, t, x, opts),
        Branch::Minus => minus_value(data, t, x, opts),
        Branch::Plus => match extended_entry(data, t, x, -opts.extension, opts)? {
            Some((tau, gamma)) => plus_value(data, t, x, tau, gamma, opts),
            None => Err(Error::Inapplicable(format!(
                "no inflow entry within the extension window for ({t}, {x:?})"
            ))),
        },
    }
}

/// Solution value together with its region code and level-set estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointValue {
    pub y: Vec3,
    /// `-1` Minus, `0` averaged band, `+1` Plus.
    pub code: i8,
    pub phi: f64,
}

/// Region-dispatched evaluation with two-sided averaging inside the band.
pub fn evaluate(data: &ProblemData, t: f64, x: Vec3, opts: &EvalOptions) -> Result<PointValue> {
    let u = data.u.as_ref();
    match trace_back(u, t, x, 0.0, &opts.entry)? {
        Trace::Entered { tau, gamma } => {
            let native = plus_value(data, t, x, tau, gamma, opts)?;
            let speed = u.eval(tau, gamma)?.x.abs();
            let estimate = -tau * speed;
            if estimate < -4.0 * opts.band {
                return Ok(PointValue { y: native, code: 1, phi: estimate });
            }
            let phi = match integrate_position(u, tau, 0.0, gamma, opts.step(), opts.entry.slab) {
                Ok(p) => p.x.min(0.0),
                Err(_) => estimate,
            };
            if phi.abs() > opts.band {
                return Ok(PointValue { y: native, code: 1, phi });
            }
            match minus_value(data, t, x, opts) {
                Ok(other) => Ok(PointValue { y: 0.5 * (native + other), code: 0, phi }),
                Err(_) => Ok(PointValue { y: native, code: 0, phi }),
            }
        }
        Trace::Survived { end } => {
            let native = minus_value(data, t, x, opts)?;
            let phi = end.x;
            if phi > opts.band {
                return Ok(PointValue { y: native, code: -1, phi });
            }
            let speed = u.eval(0.0, end)?.x.abs().max(1e-12);
            let reach = (2.0 * phi.max(0.0) / speed + 2.0 * opts.step()).min(opts.extension);
            let other = extended_entry(data, t, x, -reach, opts)
                .and_then(|e| e.map(|(tau, gamma)| plus_value(data, t, x, tau, gamma, opts)).transpose());
            match other {
                Ok(Some(p)) => Ok(PointValue { y: 0.5 * (native + p), code: 0, phi }),
                _ => Ok(PointValue { y: native, code: 0, phi }),
            }
        }
    }
}

/// The Lagrangian solution at `(t, x)`.
pub fn lagrangian_solution(data: &ProblemData, t: f64, x: Vec3, opts: &EvalOptions) -> Result<Vec3> {
    Ok(evaluate(data, t, x, opts)?.y)
}

/// `B- Y0(gamma0)` for a point of the initial-data region.
pub fn pushforward_interior(data: &ProblemData, t: f64, x: Vec3, opts: &EvalOptions) -> Result<Vec3> {
    let r = locate_entry(data.u.as_ref(), t, x, &opts.entry)?;
    match r.region {
        Region::Plus => Err(Error::Inapplicable(format!("({t}, {x:?}) lies in the inflow region"))),
        _ => Ok(r.b * data.y0.eval(0.0, r.gamma0.expect("origin of a non-inflow point"))?),
    }
}

/// `B+ H(tau, gamma)` for a point of the inflow region.
pub fn pushforward_inflow(data: &ProblemData, t: f64, x: Vec3, opts: &EvalOptions) -> Result<Vec3> {
    let r = locate_entry(data.u.as_ref(), t, x, &opts.entry)?;
    match (r.region, r.gamma) {
        (Region::Minus, _) | (_, None) => {
            Err(Error::Inapplicable(format!("({t}, {x:?}) lies in the initial-data region")))
        }
        (_, Some(gamma)) => Ok(r.b * data.h.eval(r.tau, gamma)?),
    }
}

/// Forcing integral from `max(0, tau)` to `t` with at least `intervals`
/// Simpson intervals.
pub fn duhamel_g(data: &ProblemData, t: f64, x: Vec3, opts: &EvalOptions, intervals: usize) -> Result<Vec3> {
    let lower = match trace_back(data.u.as_ref(), t, x, 0.0, &opts.entry)? {
        Trace::Entered { tau, .. } => tau,
        Trace::Survived { .. } => 0.0,
    };
    Ok(sweep(data, t, x, lower, opts.step(), intervals, opts.entry.slab)?.forcing)
}

/// Manufactured data for an exact field: `g = dY/dt + grad Y u - grad u Y`,
/// `Y0 = Y(0)`, `H = Y` on the inflow wall.
pub fn manufacture(u: &ExprField, y: &ExprField, horizon: f64) -> (ProblemData, ExprField) {
    let (ue, ye) = (u.exprs(), y.exprs());
    let comps: Vec<Expr> = (0..3)
        .map(|i| {
            let mut gi = ye[i].diff(Var::T);
            for (k, v) in Var::SPACE.into_iter().enumerate() {
                gi = gi.add(&ye[i].diff(v).mul(&ue[k]));
                gi = gi.sub(&ue[i].diff(v).mul(&ye[k]));
            }
            gi
        })
        .collect();
    let g = ExprField::new([comps[0].clone(), comps[1].clone(), comps[2].clone()]);
    let us = ExprField::new(ue.clone()).shared();
    let ys: SharedField = ExprField::new(ye.clone()).shared();
    let data = ProblemData {
        u: us,
        y0: ys.clone(),
        h: ys,
        g: ExprField::new(g.exprs().clone()).shared(),
        horizon,
    };
    (data, g)
}

/// Grid-solve parameters.
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub eval: EvalOptions,
    pub exec: Exec,
    /// Sampling step of the transversality monitor.
    pub monitor_dt: f64,
    /// Segment at the detected horizon and restart from the grid solution.
    pub restart: bool,
    /// Tolerance of the velocity sign, flux and divergence checks.
    pub velocity_tol: f64,
}

impl SolveOptions {
    pub fn new(domain: &ChannelDomain, step: f64) -> Self {
        SolveOptions {
            eval: EvalOptions::new(domain, step),
            exec: Exec::Parallel,
            monitor_dt: 0.05,
            restart: true,
            velocity_tol: 1e-6,
        }
    }
}

/// Restart window `[start, end]` in global time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub monitor: TstarReport,
}

/// Continuity across a restart seam.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeamCheck {
    pub t: f64,
    /// Max nodal difference between the old segment at the seam and the new
    /// segment at its local start.
    pub nodal_jump: f64,
    /// Max nodal difference a little after the seam between the restarted
    /// solution and the unsegmented formula, off the averaging band and only
    /// when the latter is evaluable.
    pub probe_jump: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub schema: String,
    pub domain: ChannelDomain,
    pub ode_step: f64,
    pub bisection_tol: f64,
    pub band: f64,
    pub times: Vec<f64>,
    pub segments: Vec<Segment>,
    pub seams: Vec<SeamCheck>,
}

pub const RUN_SCHEMA: &str = "inflowlab.run/1";

/// Grid snapshots of the solution with region labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianField {
    pub snapshots: Vec<GridVectorField>,
    pub masks: Vec<RegionMask>,
    pub meta: RunMeta,
}

impl LagrangianField {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn domain(&self) -> ChannelDomain {
        self.meta.domain
    }

    /// Index of the snapshot at time `t`, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.snapshots
            .iter()
            .position(|s| (s.t - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    /// Writes `Y_<k>.bin`, `region_<k>.bin` and `run.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (k, (s, m)) in self.snapshots.iter().zip(&self.masks).enumerate() {
            Dump::from_field(s, "Y").save(&dir.join(format!("Y_{k}.bin")))?;
            let mut d = Dump::from_field(s, "region");
            d.header.components = 2;
            d.comps = vec![m.as_f64(), m.phi.clone()];
            d.save(&dir.join(format!("region_{k}.bin")))?;
        }
        let meta = serde_json::to_string_pretty(&self.meta)?;
        std::fs::write(dir.join("run.json"), meta)?;
        Ok(())
    }

    /// Reads a directory written by [`LagrangianField::save`]. Region dumps
    /// with a single component carry codes only and load with NaN level-set
    /// values.
    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join("run.json"))?;
        let meta: RunMeta = serde_json::from_str(&text)?;
        if meta.schema != RUN_SCHEMA {
            return Err(Error::Format(format!("unsupported run schema {:?}", meta.schema)));
        }
        let mut snapshots = Vec::new();
        let mut masks = Vec::new();
        for k in 0..meta.times.len() {
            let f = Dump::load(&dir.join(format!("Y_{k}.bin")))?.into_field()?;
            if f.domain != meta.domain {
                return Err(Error::Format(format!("snapshot {k} does not match the run domain")));
            }
            let r = Dump::load(&dir.join(format!("region_{k}.bin")))?;
            let codes: Vec<i8> = r.comps[0].iter().map(|&c| c as i8).collect();
            if codes.len() != meta.domain.len() {
                return Err(Error::Format(format!("region mask {k} has the wrong size")));
            }
            let phi = r.comps.get(1).cloned().unwrap_or_else(|| vec![f64::NAN; codes.len()]);
            masks.push(RegionMask {
                domain: meta.domain,
                t: f.t,
                phi,
                codes,
                band: meta.band,
            });
            snapshots.push(f);
        }
        Ok(LagrangianField { snapshots, masks, meta })
    }
}

fn solve_grid(data: &ProblemData, t: f64, domain: &ChannelDomain, opts: &EvalOptions, exec: Exec) -> Result<(GridVectorField, RegionMask)> {
    let vals = par::try_map_range(exec, domain.len(), |n| evaluate(data, t, domain.node_at(n), opts))?;
    let field = GridVectorField::from_vecs(*domain, t, &vals.iter().map(|v| v.y).collect::<Vec<_>>());
    let mask = RegionMask {
        domain: *domain,
        t,
        codes: vals.iter().map(|v| v.code).collect(),
        phi: vals.iter().map(|v| v.phi).collect(),
        band: opts.band,
    };
    Ok((field, mask))
}

/// Evaluates the solution on the grid at each snapshot time, restarting
/// from the grid solution whenever the transversality monitor stops short
/// of the horizon.
pub fn solve(
    data: &ProblemData,
    times: &[f64],
    domain: &ChannelDomain,
    opts: &SolveOptions,
) -> Result<LagrangianField> {
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("snapshot times must increase strictly".into()));
    }
    if let (Some(&a), Some(&b)) = (times.first(), times.last()) {
        if a < 0.0 || b > data.horizon * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "snapshot times must lie in [0, {}]",
                data.horizon
            )));
        }
    }
    validate_velocity(data.u.as_ref(), domain, 0.0, opts.velocity_tol)?;
    let mut snapshots = Vec::with_capacity(times.len());
    let mut masks = Vec::with_capacity(times.len());
    let mut segments = Vec::new();
    let mut seams = Vec::new();
    let mut current = data.clone();
    let mut start = 0.0;
    let mut next = 0;
    loop {
        let remaining = data.horizon - start;
        let monitor = if opts.restart && remaining > 0.0 {
            tstar_monitor(current.u.as_ref(), domain, remaining, opts.monitor_dt.min(remaining), &opts.eval.entry)?
        } else {
            TstarReport {
                tstar: remaining,
                violations: Vec::new(),
            }
        };
        let last = monitor.tstar >= remaining * (1.0 - 1e-12);
        let end = if last { data.horizon } else { start + monitor.tstar };
        if !last && monitor.tstar <= 1e-9 * data.horizon.max(1.0) {
            return Err(Error::Numeric(format!(
                "transversality fails immediately after t = {start}"
            )));
        }
        while next < times.len() && times[next] <= end * (1.0 + 1e-12) + 1e-15 {
            let (mut f, mut m) = solve_grid(&current, times[next] - start, domain, &opts.eval, opts.exec)?;
            f.t = times[next];
            m.t = times[next];
            snapshots.push(f);
            masks.push(m);
            next += 1;
        }
        segments.push(Segment { start, end, monitor });
        if last {
            break;
        }
        let (seam, _) = solve_grid(&current, end - start, domain, &opts.eval, opts.exec)?;
        let restarted = current.restarted(end - start, Arc::new(GriddedField::steady(seam.clone())));
        let (after, _) = solve_grid(&restarted, 0.0, domain, &opts.eval, opts.exec)?;
        let nodal_jump = seam.sub(&after).max_norm();
        let probe = (opts.monitor_dt * 0.1).min(data.horizon - end);
        let probe_jump = if probe > 0.0 {
            let a = solve_grid(&restarted, probe, domain, &opts.eval, opts.exec);
            let b = solve_grid(&current, end - start + probe, domain, &opts.eval, opts.exec);
            match (a, b) {
                (Ok((a, ma)), Ok((b, mb))) => {
                    Some(a.sub(&b).max_norm_where(|n| ma.codes[n] != 0 && mb.codes[n] != 0))
                }
                _ => None,
            }
        } else {
            None
        };
        seams.push(SeamCheck {
            t: end,
            nodal_jump,
            probe_jump,
        });
        current = restarted;
        start = end;
    }
    Ok(LagrangianField {
        snapshots,
        masks,
        meta: RunMeta {
            schema: RUN_SCHEMA.to_string(),
            domain: *domain,
            ode_step: opts.eval.step(),
            bisection_tol: opts.eval.entry.tol,
            band: opts.eval.band,
            times: times.to_vec(),
            segments,
            seams,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::provider::FieldProvider;
    use std::collections::HashMap;

    fn field(src: [&str; 3]) -> ExprField {
        ExprField::parse(src, &HashMap::new()).unwrap()
    }

    fn unit() -> ChannelDomain {
        ChannelDomain::unit(8).unwrap()
    }

    fn data(u: [&str; 3], y0: [&str; 3], h: [&str; 3], g: [&str; 3]) -> ProblemData {
        ProblemData {
            u: field(u).shared(),
            y0: field(y0).shared(),
            h: field(h).shared(),
            g: field(g).shared(),
            horizon: 1.0,
        }
    }

    #[test]
    fn zero_velocity_returns_initial_data() {
        let d = data(["0", "0", "0"], ["sin(x)", "y", "z*z"], ["0", "0", "0"], ["0", "0", "0"]);
        let o = EvalOptions::new(&unit(), 0.1);
        let x = Vec3::new(0.4, 0.3, 0.2);
        let y = pushforward_interior(&d, 0.6, x, &o).unwrap();
        assert!((y - Vec3::new(0.4f64.sin(), 0.3, 0.04)).norm() < 1e-15);
    }

    #[test]
    fn uniform_flow_translates_and_integrates_forcing() {
        let d = data(["1", "0", "0"], ["sin(x)", "0", "0"], ["1 + t", "0", "0"], ["0", "0", "2"]);
        let o = EvalOptions::new(&unit(), 0.01);
        let y = lagrangian_solution(&d, 0.3, Vec3::new(0.8, 0.1, 0.1), &o).unwrap();
        assert!((y - Vec3::new(0.5f64.sin(), 0.0, 0.6)).norm() < 1e-12);
        let y = lagrangian_solution(&d, 0.5, Vec3::new(0.2, 0.1, 0.1), &o).unwrap();
        assert!((y - Vec3::new(1.3, 0.0, 0.4)).norm() < 1e-9);
        let g = duhamel_g(&d, 0.5, Vec3::new(0.2, 0.1, 0.1), &o, 2).unwrap();
        assert!((g.z - 0.4).abs() < 1e-9);
    }

    #[test]
    fn shear_pushforwards() {
        let d = data(["1", "0.5*x", "0"], ["1", "0", "0"], ["1", "0", "0"], ["0", "0", "0"]);
        let o = EvalOptions::new(&unit(), 0.01);
        let y = pushforward_interior(&d, 0.4, Vec3::new(0.7, 0.2, 0.3), &o).unwrap();
        assert!((y - Vec3::new(1.0, 0.2, 0.0)).norm() < 1e-12);
        let y = pushforward_inflow(&d, 0.5, Vec3::new(0.2, 0.3, 0.4), &o).unwrap();
        assert!((y - Vec3::new(1.0, 0.1, 0.0)).norm() < 1e-9);
        assert!(pushforward_inflow(&d, 0.5, Vec3::new(0.7, 0.3, 0.4), &o).is_err());
    }

    #[test]
    fn manufactured_forcing_is_symbolic() {
        let u = field(["1", "0", "0"]);
        let y = field(["0", "0", "sin(2*pi*y)*(1+t)"]);
        let (_, g) = manufacture(&u, &y, 1.0);
        let x = Vec3::new(0.3, 0.17, 0.5);
        let want = (2.0 * std::f64::consts::PI * 0.17).sin();
        let v = g.eval(0.4, x).unwrap();
        assert!(v.x.abs() < 1e-15 && v.y.abs() < 1e-15 && (v.z - want).abs() < 1e-14);
        let (_, g) = manufacture(&u, &field(["1", "0", "0"]), 1.0);
        assert!(g.is_zero());
    }

    #[test]
    fn band_average_is_seamless_for_compatible_data() {
        let d = data(["1", "0", "0"], ["1", "0", "0"], ["1", "0", "0"], ["0", "0", "0"]);
        let o = EvalOptions::new(&unit(), 0.01);
        for x1 in [0.295, 0.3, 0.305, 0.1, 0.9] {
            let p = evaluate(&d, 0.3, Vec3::new(x1, 0.2, 0.2), &o).unwrap();
            assert!((p.y - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12, "{x1}: {p:?}");
        }
        let p = evaluate(&d, 0.3, Vec3::new(0.3, 0.2, 0.2), &o).unwrap();
        assert_eq!(p.code, 0);
    }

    #[test]
    fn forced_branches_extend_across_the_interface() {
        let d = data(["1", "0", "0"], ["0", "0", "0"], ["1 + t", "0", "0"], ["0", "0", "0"]);
        let o = EvalOptions::new(&unit(), 0.01);
        let y = evaluate_branch(&d, 0.3, Vec3::new(0.35, 0.0, 0.0), Branch::Plus, &o).unwrap();
        assert!((y.x - 0.95).abs() < 1e-9);
        let y = evaluate_branch(&d, 0.3, Vec3::new(0.25, 0.0, 0.0), Branch::Minus, &o).unwrap();
        assert!(y.norm() < 1e-15);
    }

    #[test]
    fn zero_data_solve_and_roundtrip() {
        let dom = unit();
        let d = ProblemData::zero(field(["1", "0", "0"]).shared(), 0.5);
        let mut o = SolveOptions::new(&dom, 0.05);
        o.exec = Exec::Sequential;
        let sol = solve(&d, &[0.0, 0.25, 0.5], &dom, &o).unwrap();
        assert!(sol.snapshots.iter().all(|s| s.max_abs() == 0.0));
        assert_eq!(sol.meta.segments.len(), 1);
        let dir = tempfile::tempdir().unwrap();
        sol.save(dir.path()).unwrap();
        let back = LagrangianField::load(dir.path()).unwrap();
        assert_eq!(back.snapshots, sol.snapshots);
        assert_eq!(back.masks[1].codes, sol.masks[1].codes);
    }

    #[test]
    fn restart_segments_uniform_flow() {
        let dom = unit();
        let mut d = data(["1", "0", "0"], ["1", "0", "0"], ["1 + 0.1*t", "0.2*t*t", "0"], ["0", "0", "0"]);
        d.horizon = 1.5;
        let mut o = SolveOptions::new(&dom, 0.05);
        o.exec = Exec::Sequential;
        o.monitor_dt = 0.1;
        let sol = solve(&d, &[0.5, 1.2, 1.5], &dom, &o).unwrap();
        assert_eq!(sol.meta.segments.len(), 2);
        assert!((sol.meta.segments[0].end - 1.0).abs() < 1e-6);
        let seam = &sol.meta.seams[0];
        assert!(seam.nodal_jump < 1e-9, "{seam:?}");
        assert!(seam.probe_jump.unwrap() < 1e-9, "{seam:?}");
        let x = dom.node(2, 1, 1);
        let want = 1.0 + 0.1 * (1.5 - x.x);
        let got = sol.snapshots[2].at(2, 1, 1).x;
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}
