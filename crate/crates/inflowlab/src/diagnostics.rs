//! Verification of computed solutions: PDE residuals in strong and weak
//! form, divergence and wall-flux histories, the energy bound, and Hoelder
//! monitoring.

use serde::{Deserialize, Serialize};

use crate::curltools::external_flux;
use crate::entry::levelset_value;
use crate::error::{Error, Result};
use crate::geometry::domain::{ChannelDomain, Side};
use crate::geometry::grid::GridVectorField;
use crate::geometry::holder::holder_seminorm;
use crate::geometry::interp::lagrange_weights;
use crate::geometry::ops::DiffOps;
use crate::par::{self, Exec};
use crate::quadrature::gauss_legendre_on;
use crate::transport::{evaluate_branch, Branch, EvalOptions, LagrangianField, ProblemData};
use crate::{Mat3, Vec3};

/// Sup and L2 residual over the interiors of the two regions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongResidual {
    pub t: f64,
    pub sup_minus: f64,
    pub sup_plus: f64,
    pub l2_minus: f64,
    pub l2_plus: f64,
    /// Distance from the interface and walls below which nodes are skipped.
    pub exclusion: f64,
    pub nodes_minus: usize,
    pub nodes_plus: usize,
}

fn level_sets(field: &LagrangianField, k: usize, data: &ProblemData, opts: &EvalOptions, exec: Exec) -> Result<Vec<f64>> {
    let m = &field.masks[k];
    if m.phi.iter().all(|p| p.is_finite()) {
        return Ok(m.phi.clone());
    }
    let d = field.domain();
    let t = field.snapshots[k].t;
    par::try_map_range(exec, d.len(), |n| Ok::<_, Error>(levelset_value(data.u.as_ref(), t, d.node_at(n), &opts.entry)?.0))
}

/// Three-point time stencil around snapshot `k`.
fn time_stencil(times: &[f64], k: usize) -> Result<[usize; 3]> {
    if times.len() < 3 {
        return Err(Error::DataCoverage(format!(
            "time differences need at least 3 snapshots, found {}",
            times.len()
        )));
    }
    Ok(if k == 0 {
        [0, 1, 2]
    } else if k + 1 == times.len() {
        [k - 2, k - 1, k]
    } else {
        [k - 1, k, k + 1]
    })
}

/// Finite-difference residual of `dY/dt + grad Y u - grad u Y - g` at the
/// snapshot time `t`, skipping nodes within `3 max(ode_step, dx)` plus the
/// distance the flow covers over the time stencil from the interface or a
/// wall.
pub fn strong_residual(field: &LagrangianField, data: &ProblemData, t: f64, opts: &EvalOptions, exec: Exec) -> Result<StrongResidual> {
    let k = field
        .index_of(t)
        .ok_or_else(|| Error::DataCoverage(format!("no snapshot at t = {t}")))?;
    let times = field.times();
    let st = time_stencil(&times, k)?;
    let (_, dw) = lagrange_weights(&[times[st[0]], times[st[1]], times[st[2]]], t);
    let snaps = &field.snapshots;
    let d = field.domain();
    let ops = DiffOps::spectral(d);
    let jac = ops.jacobian(&snaps[k]);
    let phi = level_sets(field, k, data, opts, exec)?;
    let speed = par::try_map_range(exec, d.len(), |n| Ok::<_, Error>(data.u.eval(t, d.node_at(n))?.norm()))?
        .into_iter()
        .fold(0.0f64, f64::max);
    let exclusion = 3.0 * opts.step().max(d.dx()) + speed * (times[st[2]] - times[st[0]]);
    let res = par::try_map_range(exec, d.len(), |n| {
        let x = d.node_at(n);
        if phi[n].abs() < exclusion || x.x < exclusion || x.x > d.lx - exclusion {
            return Ok::<_, Error>(None);
        }
        let dy = snaps[st[0]].get(n) * dw[0] + snaps[st[1]].get(n) * dw[1] + snaps[st[2]].get(n) * dw[2];
        let gy = Mat3::from_fn(|i, c| jac[i][c][n]);
        let (u, gu) = data.u.eval_grad(t, x)?;
        let y = snaps[k].get(n);
        let r = dy + gy * u - gu * y - data.g.eval(t, x)?;
        Ok(Some((phi[n] > 0.0, r.norm(), d.node_weight(n))))
    })?;
    let mut out = StrongResidual {
        t,
        sup_minus: 0.0,
        sup_plus: 0.0,
        l2_minus: 0.0,
        l2_plus: 0.0,
        exclusion,
        nodes_minus: 0,
        nodes_plus: 0,
    };
    for (minus, r, w) in res.into_iter().flatten() {
        if minus {
            out.sup_minus = out.sup_minus.max(r);
            out.l2_minus += r * r * w;
            out.nodes_minus += 1;
        } else {
            out.sup_plus = out.sup_plus.max(r);
            out.l2_plus += r * r * w;
            out.nodes_plus += 1;
        }
    }
    out.l2_minus = out.l2_minus.sqrt();
    out.l2_plus = out.l2_plus.sqrt();
    Ok(out)
}

/// Tensor bump `prod (1 - s_d^2)^4 e_c` with `s_d = (q_d - c_d) / r_d` over
/// `(t, x1, x2, x3)`, periodic in `x2` and `x3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 4],
    pub radius: [f64; 4],
    pub component: usize,
}

impl Bump {
    /// Rejects bumps whose support touches `t = 0`, `t = horizon` or a wall.
    pub fn validate(&self, domain: &ChannelDomain, horizon: f64) -> Result<()> {
        let [t, x, _, _] = self.center;
        let [rt, rx, ry, rz] = self.radius;
        if self.component > 2 || self.radius.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidInput("bump needs positive radii and a component in 0..3".into()));
        }
        if t - rt <= 0.0 || t + rt >= horizon || x - rx <= 0.0 || x + rx >= domain.lx {
            return Err(Error::InvalidInput("test-function support touches the boundary of the space-time domain".into()));
        }
        if 2.0 * ry > domain.ly || 2.0 * rz > domain.lz {
            return Err(Error::InvalidInput("bump wider than the periodic cell".into()));
        }
        Ok(())
    }

    /// Scalar profile and its derivatives along `(t, x1, x2, x3)`.
    pub fn value_grad(&self, q: [f64; 4]) -> (f64, [f64; 4]) {
        let mut f = [0.0; 4];
        let mut df = [0.0; 4];
        for a in 0..4 {
            let s = (q[a] - self.center[a]) / self.radius[a];
            if s.abs() >= 1.0 {
                return (0.0, [0.0; 4]);
            }
            let b = 1.0 - s * s;
            f[a] = b.powi(4);
            df[a] = -8.0 * s * b.powi(3) / self.radius[a];
        }
        let v = f.iter().product();
        let mut g = [0.0; 4];
        for a in 0..4 {
            g[a] = df[a] * (0..4).filter(|&b| b != a).map(|b| f[b]).product::<f64>();
        }
        (v, g)
    }
}

/// Weak-form residual of one test function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    pub bump: Bump,
    pub order: usize,
    pub value: f64,
    /// `W^{1,1}` norm of the test function.
    pub norm: f64,
}

impl WeakResidual {
    pub fn relative(&self) -> f64 {
        self.value.abs() / self.norm
    }
}

/// Interface crossing along `x1` on `[lo, hi]` at fixed `(t, y, z)`.
pub fn interface_crossing(data: &ProblemData, t: f64, y: f64, z: f64, lo: f64, hi: f64, opts: &EvalOptions) -> Result<Option<f64>> {
    let phi = |x1: f64| -> Result<f64> { Ok(levelset_value(data.u.as_ref(), t, Vec3::new(x1, y, z), &opts.entry)?.0) };
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (phi(a)?, phi(b)?);
    if fa.signum() == fb.signum() {
        return Ok(None);
    }
    while b - a > 1e-13 * (hi - lo).max(1e-300) {
        let m = 0.5 * (a + b);
        if phi(m)?.signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(Some(0.5 * (a + b)))
}

/// Integrates `Y . dphi/dt + (Y x u) : grad phi + (grad u Y) . phi + g . phi`
/// over the support of `bump` with `order`-point Gauss-Legendre per axis.
/// Along `x1` each side of the interface gets its own rule and is
/// evaluated with its own branch, so the integrand is smooth on each piece.
pub fn weak_residual(
    data: &ProblemData,
    bump: &Bump,
    order: usize,
    domain: &ChannelDomain,
    opts: &EvalOptions,
    exec: Exec,
) -> Result<WeakResidual> {
    bump.validate(domain, data.horizon)?;
    let [c, r] = [bump.center, bump.radius];
    let (tq, tw) = gauss_legendre_on(order, c[0] - r[0], c[0] + r[0]);
    let (yq, yw) = gauss_legendre_on(order, c[2] - r[2], c[2] + r[2]);
    let (zq, zw) = gauss_legendre_on(order, c[3] - r[3], c[3] + r[3]);
    let (lo, hi) = (c[1] - r[1], c[1] + r[1]);
    let lines = order * order * order;
    let parts = par::try_map_range(exec, lines, |m| {
        let (a, b, e) = (m % order, (m / order) % order, m / (order * order));
        let (t, y, z) = (tq[a], yq[b], zq[e]);
        let w0 = tw[a] * yw[b] * zw[e];
        let mut pieces = Vec::with_capacity(2);
        match interface_crossing(data, t, y, z, lo, hi, opts)? {
            Some(s) => {
                pieces.push((lo, s, Branch::Plus));
                pieces.push((s, hi, Branch::Minus));
            }
            None => {
                let mid = levelset_value(data.u.as_ref(), t, Vec3::new(0.5 * (lo + hi), y, z), &opts.entry)?.0;
                pieces.push((lo, hi, if mid > 0.0 { Branch::Minus } else { Branch::Plus }));
            }
        }
        let mut acc = 0.0;
        let mut norm = 0.0;
        for (p, q, branch) in pieces {
            let (xq, xw) = gauss_legendre_on(order, p, q);
            for (x1, wx) in xq.iter().zip(&xw) {
                let x = Vec3::new(*x1, y, z);
                let (psi, g) = bump.value_grad([t, *x1, y, z]);
                let w = w0 * wx;
                norm += w * (psi.abs() + g.iter().map(|v| v.abs()).sum::<f64>());
                if psi == 0.0 && g.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let yv = evaluate_branch(data, t, x, branch, opts)?;
                let (u, gu) = data.u.eval_grad(t, x)?;
                let gv = data.g.eval(t, x)?;
                let ci = bump.component;
                let adv: f64 = (0..3).map(|k| u[k] * g[k + 1]).sum();
                let val = yv[ci] * g[0] + yv[ci] * adv + (gu * yv)[ci] * psi + gv[ci] * psi;
                acc += w * val;
            }
        }
        Ok::<_, Error>((acc, norm))
    })?;
    let (value, norm) = parts.iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    Ok(WeakResidual {
        bump: *bump,
        order,
        value,
        norm,
    })
}

/// Per-snapshot divergence and wall fluxes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxRecord {
    pub t: f64,
    /// `||div Y||_inf` off the interface band.
    pub div_sup: f64,
    pub flux_in: f64,
    pub flux_out: f64,
    pub sup: f64,
}

/// Divergence is measured away from the interface by at least the mask
/// band or two cells, whichever is wider.
pub fn divergence_and_flux_history(field: &LagrangianField) -> Vec<FluxRecord> {
    let d = field.domain();
    let ops = DiffOps::spectral(d);
    let width = field.meta.band.max(2.0 * d.dx());
    field
        .snapshots
        .iter()
        .zip(&field.masks)
        .map(|(s, m)| {
            let div = ops.divergence(s);
            let div_sup = div.max_abs_where(|n| {
                if m.phi[n].is_finite() {
                    m.phi[n].abs() > width
                } else {
                    m.codes[n] != 0
                }
            });
            FluxRecord {
                t: s.t,
                div_sup,
                flux_in: external_flux(s, Side::Inflow),
                flux_out: external_flux(s, Side::Outflow),
                sup: s.max_abs(),
            }
        })
        .collect()
}

/// Sampled `sup |grad u|` (Frobenius) over the grid at the snapshot times.
pub fn grad_u_sup(data: &ProblemData, domain: &ChannelDomain, times: &[f64], exec: Exec) -> Result<f64> {
    let mut best = 0.0f64;
    for &t in times {
        let v = par::try_map_range(exec, domain.len(), |n| Ok::<_, Error>(data.u.grad(t, domain.node_at(n))?.norm()))?;
        best = v.into_iter().fold(best, f64::max);
    }
    Ok(best)
}

/// Energy history against `||Y(0)||^2 exp(2 L t) + floor`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub bound: Vec<f64>,
    /// Energy ratios between consecutive snapshots; `None` after a zero energy.
    pub growth_factors: Vec<Option<f64>>,
    pub lipschitz: f64,
    pub floor: f64,
    pub pass: bool,
}

pub fn gronwall_check(field: &LagrangianField, data: &ProblemData, floor: f64, exec: Exec) -> Result<GronwallReport> {
    let times = field.times();
    let d = field.domain();
    let lipschitz = grad_u_sup(data, &d, &times, exec)?;
    let energy: Vec<f64> = field.snapshots.iter().map(|s| s.l2_norm().powi(2)).collect();
    let e0 = energy.first().copied().unwrap_or(0.0);
    let t0 = times.first().copied().unwrap_or(0.0);
    let bound: Vec<f64> = times
        .iter()
        .map(|t| e0 * (2.0 * lipschitz * (t - t0)).exp() + floor)
        .collect();
    let growth_factors = energy
        .windows(2)
        .map(|w| (w[0] > 0.0).then(|| w[1] / w[0]))
        .collect();
    let pass = energy.iter().zip(&bound).all(|(e, b)| e <= b);
    Ok(GronwallReport {
        times,
        energy,
        bound,
        growth_factors,
        lipschitz,
        floor,
        pass,
    })
}

/// Largest L2 difference between matching snapshots of two runs.
pub fn max_l2_difference(a: &LagrangianField, b: &LagrangianField) -> Result<f64> {
    if a.times() != b.times() || a.domain() != b.domain() {
        return Err(Error::InvalidInput("runs differ in times or grid".into()));
    }
    Ok(a.snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| x.sub(y).l2_norm())
        .fold(0.0, f64::max))
}

/// Hoelder estimate of one snapshot next to data-norm estimators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegBound {
    pub t: f64,
    pub alpha: f64,
    pub holder_y: f64,
    pub sup_y: f64,
    pub holder_u: f64,
    pub sup_u: f64,
    pub sup_h: f64,
    pub sup_g: f64,
}

pub fn regbound_monitor(field: &LagrangianField, data: &ProblemData, alpha: f64, budget: usize, seed: u64, exec: Exec) -> Result<Vec<RegBound>> {
    let d = field.domain();
    field
        .snapshots
        .iter()
        .map(|s| {
            let t = s.t;
            let ug = GridVectorField::try_from_fn(d, t, exec, |x| data.u.eval(t, x))?;
            let gg = GridVectorField::try_from_fn(d, t, exec, |x| data.g.eval(t, x))?;
            let sup_h = (0..d.boundary_len())
                .map(|m| Ok(data.h.eval(t, d.boundary_node(Side::Inflow, m))?.norm()))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            Ok(RegBound {
                t,
                alpha,
                holder_y: holder_seminorm(s, alpha, budget, seed)?,
                sup_y: s.max_abs(),
                holder_u: holder_seminorm(&ug, alpha, budget, seed)?,
                sup_u: ug.max_abs(),
                sup_h,
                sup_g: gg.max_abs(),
            })
        })
        .collect()
}

/// Largest branch difference over the interface-band nodes of a snapshot.
pub fn band_jump(field: &LagrangianField, k: usize, data: &ProblemData, opts: &EvalOptions, exec: Exec) -> Result<(usize, f64)> {
    let d = field.domain();
    let t = field.snapshots[k].t;
    let nodes: Vec<usize> = (0..d.len()).filter(|&n| field.masks[k].codes[n] == 0).collect();
    let diffs = par::try_map_range(exec, nodes.len(), |i| {
        let x = d.node_at(nodes[i]);
        let a = evaluate_branch(data, t, x, Branch::Plus, opts);
        let b = evaluate_branch(data, t, x, Branch::Minus, opts);
        Ok::<_, Error>(match (a, b) {
            (Ok(a), Ok(b)) => (a - b).norm(),
            _ => 0.0,
        })
    })?;
    Ok((nodes.len(), diffs.into_iter().fold(0.0, f64::max)))
}

/// One row of the per-snapshot history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDiagnostics {
    pub t: f64,
    pub strong: Option<StrongResidual>,
    pub flux: FluxRecord,
    pub energy: f64,
    pub energy_bound: f64,
    pub regularity: RegBound,
    pub band_nodes: usize,
    pub band_jump: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub snapshots: Vec<SnapshotDiagnostics>,
    pub weak: Vec<WeakResidual>,
    pub gronwall: GronwallReport,
    pub segments: Vec<crate::transport::Segment>,
    pub seams: Vec<crate::transport::SeamCheck>,
}

/// Settings of [`diagnose`].
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnoseOptions {
    pub eval: EvalOptions,
    pub exec: Exec,
    pub alpha: f64,
    pub pair_budget: usize,
    pub seed: u64,
    pub bumps: Vec<Bump>,
    pub quadrature_order: usize,
    pub energy_floor: f64,
}

pub fn diagnose(field: &LagrangianField, data: &ProblemData, opts: &DiagnoseOptions) -> Result<DiagnosticsReport> {
    let d = field.domain();
    let flux = divergence_and_flux_history(field);
    let gronwall = gronwall_check(field, data, opts.energy_floor, opts.exec)?;
    let reg = regbound_monitor(field, data, opts.alpha, opts.pair_budget, opts.seed, opts.exec)?;
    let mut snapshots = Vec::with_capacity(field.snapshots.len());
    for k in 0..field.snapshots.len() {
        let t = field.snapshots[k].t;
        let strong = if field.snapshots.len() >= 3 {
            Some(strong_residual(field, data, t, &opts.eval, opts.exec)?)
        } else {
            None
        };
        let (band_nodes, band_jump) = band_jump(field, k, data, &opts.eval, opts.exec)?;
        snapshots.push(SnapshotDiagnostics {
            t,
            strong,
            flux: flux[k],
            energy: gronwall.energy[k],
            energy_bound: gronwall.bound[k],
            regularity: reg[k],
            band_nodes,
            band_jump,
        });
    }
    let weak = opts
        .bumps
        .iter()
        .map(|b| weak_residual(data, b, opts.quadrature_order, &d, &opts.eval, opts.exec))
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticsReport {
        snapshots,
        weak,
        gronwall,
        segments: field.meta.segments.clone(),
        seams: field.meta.seams.clone(),
    })
}

impl DiagnosticsReport {
    pub const CSV_HEADER: &'static str =
        "t,div_sup,flux_in,flux_out,sup,energy,energy_bound,holder_y,strong_minus,strong_plus,band_jump";

    /// History rows, one per snapshot.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.snapshots {
            let (sm, sp) = r.strong.map_or((f64::NAN, f64::NAN), |x| (x.sup_minus, x.sup_plus));
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                r.t,
                r.flux.div_sup,
                r.flux.flux_in,
                r.flux.flux_out,
                r.flux.sup,
                r.energy,
                r.energy_bound,
                r.regularity.holder_y,
                sm,
                sp,
                r.band_jump
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::provider::ExprField;
    use crate::transport::{manufacture, solve, SolveOptions};
    use std::collections::HashMap;

    fn ef(src: [&str; 3]) -> ExprField {
        ExprField::parse(src, &HashMap::new()).unwrap()
    }

    fn dom() -> ChannelDomain {
        ChannelDomain::new(1.0, 1.0, 1.0, 16, 8, 8).unwrap()
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let b = Bump {
            center: [0.5, 0.5, 0.2, 0.7],
            radius: [0.2, 0.3, 0.25, 0.4],
            component: 1,
        };
        let q = [0.53, 0.41, 0.3, 0.6];
        let (_, g) = b.value_grad(q);
        for a in 0..4 {
            let mut p = q;
            let mut m = q;
            p[a] += 1e-6;
            m[a] -= 1e-6;
            let fd = (b.value_grad(p).0 - b.value_grad(m).0) / 2e-6;
            assert!((fd - g[a]).abs() < 1e-7, "{a}: {fd} vs {}", g[a]);
        }
        assert!(b.validate(&dom(), 1.0).is_ok());
        let bad = Bump { center: [0.1, 0.5, 0.5, 0.5], ..b };
        assert!(bad.validate(&dom(), 1.0).is_err());
    }

    #[test]
    fn zero_data_diagnostics() {
        let d = dom();
        let data = ProblemData::zero(ef(["1", "0", "0"]).shared(), 0.4);
        let mut so = SolveOptions::new(&d, 0.05);
        so.exec = Exec::Sequential;
        let sol = solve(&data, &[0.0, 0.2, 0.4], &d, &so).unwrap();
        let s = strong_residual(&sol, &data, 0.2, &so.eval, Exec::Sequential).unwrap();
        assert_eq!(s.sup_minus + s.sup_plus, 0.0);
        let g = gronwall_check(&sol, &data, 1e-24, Exec::Sequential).unwrap();
        assert!(g.pass && g.energy.iter().all(|e| *e == 0.0));
        let h = divergence_and_flux_history(&sol);
        assert!(h.iter().all(|r| r.div_sup == 0.0 && r.flux_in == 0.0));
    }

    #[test]
    fn manufactured_strong_and_weak_residuals_are_small() {
        let d = ChannelDomain::new(2.0, 1.0, 1.0, 32, 8, 8).unwrap();
        let u = ef(["1", "0.5*x", "0"]);
        let y = ef(["sin(x + 2*t)", "cos(t)*sin(2*pi*z) + 0.3*x", "exp(-t)*cos(2*pi*y)"]);
        let (data, _) = manufacture(&u, &y, 1.0);
        let mut so = SolveOptions::new(&d, 0.01);
        so.exec = Exec::Sequential;
        let sol = solve(&data, &[0.58, 0.6, 0.62], &d, &so).unwrap();
        let s = strong_residual(&sol, &data, 0.6, &so.eval, Exec::Sequential).unwrap();
        assert!(s.nodes_minus > 0 && s.nodes_plus > 0, "{s:?}");
        assert!(s.sup_minus < 0.05 && s.sup_plus < 0.05, "{s:?}");
        let b = Bump {
            center: [0.3, 0.3, 0.5, 0.5],
            radius: [0.1, 0.15, 0.3, 0.3],
            component: 0,
        };
        let w = weak_residual(&data, &b, 6, &d, &so.eval, Exec::Sequential).unwrap();
        assert!(w.relative() < 1e-6, "{w:?}");
    }

    #[test]
    fn energy_bound_of_constant_transport() {
        let d = dom();
        let data = ProblemData {
            y0: ef(["1", "0", "0"]).shared(),
            h: ef(["1", "0", "0"]).shared(),
            ..ProblemData::zero(ef(["1", "0", "0"]).shared(), 0.4)
        };
        let mut so = SolveOptions::new(&d, 0.05);
        so.exec = Exec::Sequential;
        let sol = solve(&data, &[0.0, 0.2, 0.4], &d, &so).unwrap();
        let g = gronwall_check(&sol, &data, 1e-12, Exec::Sequential).unwrap();
        assert!(g.pass);
        assert!(g.growth_factors.iter().all(|f| (f.unwrap() - 1.0).abs() < 1e-10));
        let h = divergence_and_flux_history(&sol);
        assert!((h[1].flux_in + 1.0).abs() < 1e-12 && (h[1].flux_out - 1.0).abs() < 1e-12);
        let r = regbound_monitor(&sol, &data, 0.5, 200, 7, Exec::Sequential).unwrap();
        assert!(r.iter().all(|x| x.holder_y < 1e-12));
    }
}
