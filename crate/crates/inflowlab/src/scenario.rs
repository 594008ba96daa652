//! Scenario presets and the run, verify and report pipeline.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compat::{compat_report, interface_point, jump_oracle, measure_jump, richardson, CompatReport};
use crate::config::{Format, Preset, RunConfig};
use crate::curltools::{recover_velocity_and_pressure, RecoveryOptions};
use crate::diagnostics::{diagnose, interface_crossing, Bump, DiagnoseOptions, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::geometry::domain::{ChannelDomain, Side};
use crate::geometry::dump::Dump;
use crate::geometry::grid::GridVectorField;
use crate::geometry::provider::{ExprField, FieldProvider};
use crate::par::Exec;
use crate::transport::{manufacture, solve, EvalOptions, LagrangianField, ProblemData, SolveOptions};
use crate::Vec3;

pub const REPORT_SCHEMA: &str = "inflowlab.report/1";

/// Problem data of a configured scenario together with what is known
/// about its solution.
#[derive(Clone)]
pub struct Scenario {
    pub preset: Preset,
    pub params: BTreeMap<String, f64>,
    pub velocity: ExprField,
    pub data: ProblemData,
    pub exact: Option<ExprField>,
    /// Momentum forcing for velocity recovery.
    pub force: Option<ExprField>,
    /// Source expressions of `y0`, `h`, `g`.
    pub sources: [[String; 3]; 3],
    pub zero_data: bool,
}

/// `curl V` of an expression field.
pub fn curl_expr(v: &ExprField) -> ExprField {
    let e = v.exprs();
    let d = |i: usize, var: Var| e[i].diff(var);
    ExprField::new([
        d(2, Var::Y).sub(&d(1, Var::Z)),
        d(0, Var::Z).sub(&d(2, Var::X)),
        d(1, Var::X).sub(&d(0, Var::Y)),
    ])
}

/// Material acceleration `du/dt + (u.grad)u`.
pub fn acceleration_expr(u: &ExprField) -> ExprField {
    let e = u.exprs();
    let comp = |i: usize| {
        let mut a = e[i].diff(Var::T);
        for (k, v) in Var::SPACE.into_iter().enumerate() {
            a = a.add(&e[k].mul(&e[i].diff(v)));
        }
        a
    };
    ExprField::new([comp(0), comp(1), comp(2)])
}

fn parse3(src: &[String; 3], consts: &HashMap<String, f64>, what: &str) -> Result<ExprField> {
    ExprField::parse([&src[0], &src[1], &src[2]], consts)
        .map_err(|e| Error::Config(format!("scenario.expressions.{what}: {e}")))
}

fn strs(s: [&str; 3]) -> [String; 3] {
    s.map(str::to_string)
}

fn show(f: &ExprField) -> [String; 3] {
    let e = f.exprs();
    [e[0].to_string(), e[1].to_string(), e[2].to_string()]
}

/// Builds the problem data of `cfg.scenario` and checks that `x1 = 0` is
/// an inflow wall over the run.
pub fn build_scenario(cfg: &RunConfig) -> Result<Scenario> {
    let sc = &cfg.scenario;
    let params = sc.resolved_params()?;
    let consts: HashMap<String, f64> = params.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let zero3 = strs(["0", "0", "0"]);
    let (u_src, mut exact_src, y0, h, mut force_src) = match sc.preset {
        Preset::Uniform => (strs(["speed", "0", "0"]), None, strs(["1", "0", "0"]), strs(["1 + 0.1*t", "0.2*t*t", "0"]), None),
        Preset::Zero => (strs(["speed", "0", "0"]), None, zero3.clone(), zero3.clone(), None),
        Preset::Shear => (strs(["speed", "rate*x", "0"]), None, strs(["1", "0", "0"]), strs(["1 + t", "0", "0"]), None),
        Preset::Manufactured => (
            strs(["speed", "rate*x", "0"]),
            Some(strs(["sin(x + 2*t) + 0.5*cos(2*pi*y)", "cos(t)*sin(2*pi*z) + 0.3*x", "exp(-t)*cos(2*pi*y)*(1 + x*x)"])),
            zero3.clone(),
            zero3.clone(),
            None,
        ),
        Preset::Swirl => (
            strs([
                "1 + amp*sin(2*pi*y)*cos(2*pi*z)",
                "amp*(1 + x)*cos(2*pi*z + t)",
                "amp*(1 + 0.5*x)*sin(2*pi*y)",
            ]),
            None,
            zero3.clone(),
            zero3.clone(),
            None,
        ),
        Preset::Euler => (
            strs([
                "1 + 0.5*t",
                "(0.3 + 0.2*t)*x + (0.2 + 0.1*t)*sin(2*pi*z)",
                "(0.25 - 0.1*t)*cos(2*pi*y) + (0.1 + 0.2*t)*x",
            ]),
            None,
            zero3.clone(),
            zero3.clone(),
            None,
        ),
        Preset::Custom => (zero3.clone(), None, zero3.clone(), zero3.clone(), None),
    };
    let ex = &sc.expressions;
    let u = parse3(ex.u.as_ref().unwrap_or(&u_src), &consts, "u")?;
    let mut exact = match &ex.exact {
        Some(s) => Some(parse3(s, &consts, "exact")?),
        None => exact_src.take().map(|s| parse3(&s, &consts, "exact")).transpose()?,
    };
    match sc.preset {
        Preset::Swirl if ex.exact.is_none() => {
            let v = parse3(
                &strs([
                    "0.1*cos(t)*sin(2*pi*z)*(1 + x*x)",
                    "0.1*sin(2*pi*z)*sin(x + t)",
                    "0.1*exp(-t)*cos(2*pi*y)*x",
                ]),
                &consts,
                "exact",
            )?;
            exact = Some(curl_expr(&v));
        }
        Preset::Euler => {
            if ex.exact.is_none() {
                exact = Some(curl_expr(&u));
            }
            force_src = Some(show(&acceleration_expr(&u)));
        }
        _ => {}
    }
    let force = match &ex.force {
        Some(s) => Some(parse3(s, &consts, "force")?),
        None => force_src.map(|s| parse3(&s, &consts, "force")).transpose()?,
    };
    let horizon = cfg.time.horizon;
    let (data, sources, zero_data) = match &exact {
        Some(y) => {
            let (data, g) = manufacture(&u, y, horizon);
            let ys = show(y);
            (data, [ys.clone(), ys, show(&g)], false)
        }
        None => {
            let y0 = ex.y0.clone().unwrap_or(y0);
            let h = ex.h.clone().unwrap_or(h);
            let g = ex.g.clone().unwrap_or(zero3.clone());
            let fields = [parse3(&y0, &consts, "y0")?, parse3(&h, &consts, "h")?, parse3(&g, &consts, "g")?];
            let zero = fields.iter().all(|f| f.exprs().iter().all(Expr::is_zero));
            let [fy, fh, fg] = fields;
            (
                ProblemData {
                    u: u.clone().shared(),
                    y0: fy.shared(),
                    h: fh.shared(),
                    g: fg.shared(),
                    horizon,
                },
                [y0, h, g],
                zero,
            )
        }
    };
    let domain = cfg.domain.build()?;
    check_inflow_sign(&u, &domain, &cfg.time.times(), horizon)?;
    Ok(Scenario {
        preset: sc.preset,
        params,
        velocity: u,
        data,
        exact,
        force,
        sources,
        zero_data,
    })
}

/// Rejects velocities with `u1 <= 0` somewhere on the inflow wall.
pub fn check_inflow_sign(u: &dyn FieldProvider, domain: &ChannelDomain, times: &[f64], horizon: f64) -> Result<()> {
    let mut ts: Vec<f64> = (0..=8).map(|k| horizon * k as f64 / 8.0).collect();
    ts.extend_from_slice(times);
    for t in ts {
        for m in 0..domain.boundary_len() {
            let x = domain.boundary_node(Side::Inflow, m);
            let un = u.eval(t, x)?.x;
            if !(un > 0.0) {
                return Err(Error::Config(format!(
                    "inflow sign condition violated: u1 = {un} <= 0 at t = {t}, (y, z) = ({}, {}); x1 = 0 must be an inflow wall",
                    x.y, x.z
                )));
            }
        }
    }
    Ok(())
}

/// Reads a configuration file and builds its scenario.
pub fn load(path: &Path, overrides: &[String]) -> Result<(RunConfig, Scenario)> {
    let cfg = crate::config::parse_config(path, overrides)?;
    let sc = build_scenario(&cfg)?;
    Ok((cfg, sc))
}

pub fn solve_options(cfg: &RunConfig, domain: &ChannelDomain, exec: Exec) -> SolveOptions {
    let mut o = SolveOptions::new(domain, cfg.time.ode_step);
    let band = cfg.tolerance.s_band.unwrap_or(o.eval.band);
    o.eval = o.eval.with_band(band).with_tol(cfg.tolerance.bisection_tol * domain.lx);
    o.exec = exec;
    o.monitor_dt = cfg.time.monitor_dt;
    o.restart = cfg.time.restart;
    o
}

fn nan_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// One pass/fail line of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Non-finite values are written as `null` and read back as NaN.
    #[serde(deserialize_with = "nan_if_null")]
    pub value: f64,
    pub threshold: f64,
    /// `"le"` passes when `value <= threshold`, `"gt"` when above.
    pub relation: String,
    pub pass: bool,
}

impl Check {
    fn le(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            relation: "le".into(),
            pass: value <= threshold,
        }
    }

    fn gt(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            relation: "gt".into(),
            pass: value > threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpSample {
    pub epsilon: f64,
    pub y_jump: [f64; 3],
    pub dy_jump: [[f64; 4]; 3],
}

/// Jumps across the interface at one point, next to their predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpReport {
    pub t: f64,
    pub point: [f64; 3],
    pub gamma: [f64; 3],
    pub samples: Vec<JumpSample>,
    /// `2 fine - coarse`, removing the first-order offset error.
    pub y_extrapolated: [f64; 3],
    pub dy_extrapolated: [[f64; 4]; 3],
    /// Value jump predicted from the data mismatch at the entry point.
    pub predicted_y_jump: [f64; 3],
    /// Derivative jump formula; absent when the values do not match.
    pub predicted_dy_jump: Option<[[f64; 4]; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRecord {
    pub t: f64,
    pub curl_residual: f64,
    pub harmonic: (f64, f64),
    /// Transverse means of the prescribed velocity.
    pub velocity_means: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub preset: Preset,
    pub params: BTreeMap<String, f64>,
    pub expect_jump: bool,
    pub times: Vec<f64>,
    pub compat: CompatReport,
    pub diagnostics: DiagnosticsReport,
    /// Sup distance to the exact solution per snapshot, when one is known.
    pub exact_error: Vec<f64>,
    pub jump: Option<JumpReport>,
    pub recovery: Vec<RecoveryRecord>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

fn mat(m: &nalgebra::Matrix3x4<f64>) -> [[f64; 4]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn arr(v: Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Interface point on the centre line at the first of `T/2`, `T/4`, `3T/4`
/// where the interface lies inside the channel.
fn interface_probe(data: &ProblemData, domain: &ChannelDomain, opts: &EvalOptions, margin: f64) -> Result<Option<(f64, Vec3)>> {
    let (y, z) = (0.5 * domain.ly, 0.5 * domain.lz);
    for frac in [0.5, 0.25, 0.75] {
        let t = frac * data.horizon;
        if let Some(x1) = interface_crossing(data, t, y, z, 0.0, domain.lx, opts)? {
            if x1 > margin && x1 < domain.lx - margin {
                return Ok(Some((t, Vec3::new(x1, y, z))));
            }
        }
    }
    Ok(None)
}

/// A bump centred on the interface, or mid-channel when there is none.
pub fn default_bump(data: &ProblemData, domain: &ChannelDomain, opts: &EvalOptions) -> Result<Bump> {
    let t = 0.5 * data.horizon;
    let (y, z) = (0.5 * domain.ly, 0.5 * domain.lz);
    let x1 = interface_crossing(data, t, y, z, 0.0, domain.lx, opts)?.unwrap_or(0.5 * domain.lx);
    let rx = 0.8 * x1.min(domain.lx - x1).min(0.25 * domain.lx);
    Ok(Bump {
        center: [t, x1, y, z],
        radius: [0.4 * t, rx, 0.25 * domain.ly, 0.25 * domain.lz],
        component: 0,
    })
}

fn jump_report(cfg: &RunConfig, sc: &Scenario, domain: &ChannelDomain, opts: &EvalOptions) -> Result<Option<JumpReport>> {
    let eps = cfg.tolerance.fd_step;
    let Some((t, p)) = interface_probe(&sc.data, domain, opts, 2.5 * eps)? else {
        return Ok(None);
    };
    let coarse = measure_jump(&sc.data, t, p, eps, opts, domain)?;
    let fine = measure_jump(&sc.data, t, p, 0.5 * eps, opts, domain)?;
    let ip = interface_point(&sc.data, t, p, opts, 1e-6)?;
    let mismatch = sc.data.h.eval(0.0, ip.gamma)? - sc.data.y0.eval(0.0, ip.gamma)?;
    let predicted_dy_jump = match jump_oracle(&sc.data, t, p, opts, cfg.tolerance.compat) {
        Ok(m) => Some(mat(&m)),
        Err(Error::Inapplicable(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(Some(JumpReport {
        t,
        point: arr(p),
        gamma: arr(ip.gamma),
        samples: [&coarse, &fine]
            .iter()
            .map(|m| JumpSample {
                epsilon: m.epsilon,
                y_jump: arr(m.y_jump),
                dy_jump: mat(&m.dy_jump),
            })
            .collect(),
        y_extrapolated: arr(fine.y_jump * 2.0 - coarse.y_jump),
        dy_extrapolated: mat(&richardson(&coarse, &fine)),
        predicted_y_jump: arr(ip.b * mismatch),
        predicted_dy_jump,
    }))
}

fn recovery(sc: &Scenario, field: &LagrangianField, exec: Exec) -> Result<Vec<RecoveryRecord>> {
    let Some(f) = &sc.force else {
        return Err(Error::Config("velocity recovery needs a momentum forcing".into()));
    };
    let d = field.domain();
    let means = |t: f64| -> Result<(f64, f64)> {
        let v = GridVectorField::try_from_fn(d, t, exec, |x| sc.velocity.eval(t, x))?;
        Ok((v.mean(1), v.mean(2)))
    };
    let u0h = means(0.0)?;
    let opts = RecoveryOptions {
        exec,
        ..RecoveryOptions::default()
    };
    field
        .snapshots
        .iter()
        .map(|w| {
            let r = recover_velocity_and_pressure(sc.data.u.as_ref(), &field.snapshots, f, u0h, w.t, &opts)?;
            Ok(RecoveryRecord {
                t: w.t,
                curl_residual: r.curl_residual,
                harmonic: r.harmonic,
                velocity_means: means(w.t)?,
            })
        })
        .collect()
}

/// Compatibility, diagnostics and checks of a computed field.
pub fn verify(cfg: &RunConfig, sc: &Scenario, field: &LagrangianField, expect_jump: bool, exec: Exec) -> Result<RunReport> {
    let domain = cfg.domain.build()?;
    if field.domain() != domain {
        return Err(Error::Config("stored run does not match the configured domain".into()));
    }
    let times = cfg.time.times();
    let stored = field.times();
    if stored.len() != times.len() || stored.iter().zip(&times).any(|(a, b)| (a - b).abs() > 1e-12 * b.abs().max(1.0)) {
        return Err(Error::Config("stored run does not match the configured snapshot times".into()));
    }
    let so = solve_options(cfg, &domain, exec);
    let tol = &cfg.tolerance;
    let compat = compat_report(&sc.data, &domain, tol.compat)?;
    let bumps = if cfg.diagnostics.bumps.is_empty() {
        vec![default_bump(&sc.data, &domain, &so.eval)?]
    } else {
        cfg.diagnostics.bumps.clone()
    };
    let dopts = DiagnoseOptions {
        eval: so.eval,
        exec,
        alpha: cfg.diagnostics.holder_alpha,
        pair_budget: cfg.diagnostics.pair_budget,
        seed: cfg.seed,
        bumps,
        quadrature_order: tol.quadrature_order,
        energy_floor: tol.energy * tol.energy * domain.volume(),
    };
    let diagnostics = diagnose(field, &sc.data, &dopts)?;
    let exact_error = match &sc.exact {
        Some(y) => field
            .snapshots
            .iter()
            .map(|s| Ok(GridVectorField::try_from_fn(domain, s.t, exec, |x| y.eval(s.t, x))?.sub(s).max_norm()))
            .collect::<Result<Vec<f64>>>()?,
        None => Vec::new(),
    };
    let jump = jump_report(cfg, sc, &domain, &so.eval)?;
    let recovery = if cfg.diagnostics.velocity_recovery {
        recovery(sc, field, exec)?
    } else {
        Vec::new()
    };

    let on = &cfg.diagnostics.checks;
    let mut checks = Vec::new();
    if expect_jump {
        checks.push(Check::gt("cond0_violated", compat.cond0, tol.compat));
        let mismatch = jump.as_ref().map_or(f64::INFINITY, |j| {
            let m = Vec3::from(j.y_extrapolated);
            let p = Vec3::from(j.predicted_y_jump);
            (m - p).norm() / p.norm()
        });
        checks.push(Check::le("jump_matches_prediction", mismatch, 0.1));
    } else {
        if on.cond0 {
            checks.push(Check::le("cond0", compat.cond0, tol.compat));
        }
        if on.cond1 {
            checks.push(Check::le("cond1", compat.cond1, tol.compat));
        }
    }
    if on.range_of_curl {
        checks.push(Check::le("range_of_curl", compat.range_of_curl, tol.compat));
    }
    let strong: Vec<f64> = diagnostics
        .snapshots
        .iter()
        .filter_map(|s| s.strong)
        .filter(|r| r.nodes_minus + r.nodes_plus > 0)
        .map(|r| r.sup_minus.max(r.sup_plus))
        .collect();
    if on.strong_residual && !strong.is_empty() {
        checks.push(Check::le("strong_residual", strong.iter().copied().fold(0.0, f64::max), tol.strong_residual));
    }
    if on.exact_error && !exact_error.is_empty() && !expect_jump {
        checks.push(Check::le("exact_error", exact_error.iter().copied().fold(0.0, f64::max), tol.exact_error));
    }
    if on.weak_residual && !expect_jump && !diagnostics.weak.is_empty() {
        let w = diagnostics.weak.iter().map(|w| w.relative()).fold(0.0, f64::max);
        checks.push(Check::le("weak_residual", w, tol.weak_residual));
    }
    if on.seams && !diagnostics.seams.is_empty() {
        let s = diagnostics
            .seams
            .iter()
            .map(|s| s.probe_jump.unwrap_or(s.nodal_jump))
            .fold(0.0, f64::max);
        checks.push(Check::le("seam_jump", s, tol.seam));
    }
    if on.energy && sc.zero_data {
        let e = diagnostics.gronwall.energy.iter().copied().fold(0.0, f64::max).sqrt();
        checks.push(Check::le("zero_data_l2", e, tol.energy * domain.volume().sqrt()));
    }
    if !recovery.is_empty() {
        let c = recovery.iter().map(|r| r.curl_residual).fold(0.0, f64::max);
        checks.push(Check::le("velocity_curl_residual", c, tol.curl_residual));
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(RunReport {
        schema: REPORT_SCHEMA.into(),
        preset: sc.preset,
        params: sc.params.clone(),
        expect_jump,
        times,
        compat,
        diagnostics,
        exact_error,
        jump,
        recovery,
        checks,
        pass,
    })
}

/// Solves the configured scenario and verifies the result.
pub fn run(cfg: &RunConfig, sc: &Scenario, expect_jump: bool, exec: Exec) -> Result<(LagrangianField, RunReport)> {
    let domain = cfg.domain.build()?;
    let so = solve_options(cfg, &domain, exec);
    let field = solve(&sc.data, &cfg.time.times(), &domain, &so)?;
    let report = verify(cfg, sc, &field, expect_jump, exec)?;
    Ok((field, report))
}

/// Writes the requested artifacts: `snapshots/` (raw), `report.json` and
/// `history.csv`.
pub fn write_artifacts(cfg: &RunConfig, dir: &Path, field: Option<&LagrangianField>, report: &RunReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    if let (true, Some(f)) = (cfg.output.wants(Format::Raw), field) {
        f.save(&dir.join("snapshots"))?;
    }
    if cfg.output.wants(Format::Json) {
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    }
    if cfg.output.wants(Format::Csv) {
        std::fs::write(dir.join("history.csv"), report.diagnostics.to_csv())?;
    }
    Ok(())
}

/// Reads `report.json` from a directory.
pub fn load_report(dir: &Path) -> Result<RunReport> {
    let path = dir.join("report.json");
    if !path.exists() {
        return Err(Error::Io(format!("{} not found", path.display())));
    }
    let r: RunReport = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
    if r.schema != REPORT_SCHEMA {
        return Err(Error::Format(format!("unsupported report schema {:?}", r.schema)));
    }
    Ok(r)
}

/// Human-readable summary of a report.
pub fn render_text(r: &RunReport) -> String {
    let mut s = format!("preset {:?}, {} snapshots\n", r.preset, r.times.len()).to_lowercase();
    let c = &r.compat;
    s.push_str(&format!(
        "compatibility: cond0 {:.3e}  cond1 {:.3e}  cond2 {}  range-of-curl {:.3e}  trusted order {}\n",
        c.cond0,
        c.cond1,
        c.cond2.map_or("n/a".to_string(), |v| format!("{v:.3e}")),
        c.range_of_curl,
        c.trusted_order
    ));
    for seg in &r.diagnostics.segments {
        s.push_str(&format!("segment [{}, {}]\n", seg.start, seg.end));
    }
    for seam in &r.diagnostics.seams {
        s.push_str(&format!(
            "seam at t = {}: nodal {:.3e}, probe {}\n",
            seam.t,
            seam.nodal_jump,
            seam.probe_jump.map_or("n/a".to_string(), |v| format!("{v:.3e}"))
        ));
    }
    s.push_str("t          div_sup    flux_in    flux_out   energy     strong-    strong+\n");
    for d in &r.diagnostics.snapshots {
        let (m, p) = d.strong.map_or((f64::NAN, f64::NAN), |x| (x.sup_minus, x.sup_plus));
        s.push_str(&format!(
            "{:<10.4} {:<10.3e} {:<10.3e} {:<10.3e} {:<10.3e} {:<10.3e} {:<10.3e}\n",
            d.t, d.flux.div_sup, d.flux.flux_in, d.flux.flux_out, d.energy, m, p
        ));
    }
    let strong: Vec<_> = r.diagnostics.snapshots.iter().filter_map(|d| d.strong).collect();
    if !strong.is_empty() && strong.iter().all(|x| x.nodes_minus + x.nodes_plus == 0) {
        s.push_str(&format!(
            "strong residual not evaluated: exclusion width {:.3} leaves no nodes; use closer snapshot times\n",
            strong[0].exclusion
        ));
    }
    for w in &r.diagnostics.weak {
        s.push_str(&format!("weak residual {:.3e} (relative {:.3e})\n", w.value, w.relative()));
    }
    if let Some(j) = &r.jump {
        s.push_str(&format!(
            "jump at t = {}, x = {:?}: measured {:?}, predicted {:?}\n",
            j.t, j.point, j.y_extrapolated, j.predicted_y_jump
        ));
    }
    for c in &r.checks {
        let rel = if c.relation == "gt" { ">" } else { "<=" };
        s.push_str(&format!(
            "[{}] {} = {:.3e} {} {:.3e}\n",
            if c.pass { "pass" } else { "FAIL" },
            c.name,
            c.value,
            rel,
            c.threshold
        ));
    }
    s.push_str(if r.pass { "overall: pass\n" } else { "overall: FAIL\n" });
    s
}

/// Writes the data of a scenario as grid dumps: `u_<k>`, `h_<k>` (the
/// inflow trace, constant in `x1`) and `g_<k>` at each snapshot time,
/// `y0` at `t = 0`, and the source expressions in `data.json`.
pub fn write_problem_data(cfg: &RunConfig, sc: &Scenario, dir: &Path, exec: Exec) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let d = cfg.domain.build()?;
    let y0 = GridVectorField::try_from_fn(d, 0.0, exec, |x| sc.data.y0.eval(0.0, x))?;
    Dump::from_field(&y0, "y0").save(&dir.join("y0.bin"))?;
    for (k, &t) in cfg.time.times().iter().enumerate() {
        let u = GridVectorField::try_from_fn(d, t, exec, |x| sc.data.u.eval(t, x))?;
        let h = GridVectorField::try_from_fn(d, t, exec, |x| sc.data.h.eval(t, Vec3::new(0.0, x.y, x.z)))?;
        let g = GridVectorField::try_from_fn(d, t, exec, |x| sc.data.g.eval(t, x))?;
        Dump::from_field(&u, "u").save(&dir.join(format!("u_{k}.bin")))?;
        Dump::from_field(&h, "h").save(&dir.join(format!("h_{k}.bin")))?;
        Dump::from_field(&g, "g").save(&dir.join(format!("g_{k}.bin")))?;
    }
    let meta = serde_json::json!({
        "schema": "inflowlab.data/1",
        "preset": sc.preset,
        "params": sc.params,
        "times": cfg.time.times(),
        "u": show(&sc.velocity),
        "y0": sc.sources[0],
        "h": sc.sources[1],
        "g": sc.sources[2],
    });
    std::fs::write(dir.join("data.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}
