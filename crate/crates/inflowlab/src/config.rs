//! Run configuration: a JSON document with `domain`, `time`, `scenario`,
//! `tolerance`, `diagnostics`, `output` and `seed` blocks. Every block
//! except `scenario` may be omitted; unknown keys are rejected.
//!
//! ```json
//! { "scenario": { "preset": "shear", "params": { "rate": 0.5 } },
//!   "domain": { "nx": 32 }, "time": { "horizon": 0.6 } }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diagnostics::Bump;
use crate::error::{Error, Result};
use crate::geometry::domain::ChannelDomain;

/// Grid block. Lengths default to 1, resolution to 16 x 8 x 8.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Ly")]
    pub ly: f64,
    #[serde(rename = "Lz")]
    pub lz: f64,
    #[serde(rename = "Nx")]
    pub nx: usize,
    #[serde(rename = "Ny")]
    pub ny: usize,
    #[serde(rename = "Nz")]
    pub nz: usize,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            lx: 1.0,
            ly: 1.0,
            lz: 1.0,
            nx: 16,
            ny: 8,
            nz: 8,
        }
    }
}

impl DomainConfig {
    pub fn build(&self) -> Result<ChannelDomain> {
        ChannelDomain::new(self.lx, self.ly, self.lz, self.nx, self.ny, self.nz)
            .map_err(|e| Error::Config(format!("domain: {e}")))
    }
}

/// Time block. Without `snapshot_times`, five equally spaced times from 0
/// to the horizon are used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub ode_step: f64,
    pub snapshot_times: Option<Vec<f64>>,
    /// Sampling step of the transversality monitor.
    pub monitor_dt: f64,
    pub restart: bool,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            horizon: 0.5,
            ode_step: 0.01,
            snapshot_times: None,
            monitor_dt: 0.05,
            restart: true,
        }
    }
}

impl TimeConfig {
    pub fn times(&self) -> Vec<f64> {
        match &self.snapshot_times {
            Some(t) => t.clone(),
            None => (0..5).map(|k| self.horizon * k as f64 / 4.0).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Uniform,
    Shear,
    Swirl,
    Manufactured,
    Euler,
    Zero,
    Custom,
}

impl Preset {
    /// Parameter names and defaults.
    pub fn parameters(self) -> &'static [(&'static str, f64)] {
        match self {
            Preset::Uniform | Preset::Zero => &[("speed", 1.0)],
            Preset::Shear | Preset::Manufactured => &[("speed", 1.0), ("rate", 0.5)],
            Preset::Swirl => &[("amp", 0.2)],
            Preset::Euler | Preset::Custom => &[],
        }
    }
}

/// Component expressions in `t, x, y, z` and the constant `pi`; scenario
/// parameters are available by name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expressions {
    pub u: Option<[String; 3]>,
    pub y0: Option<[String; 3]>,
    pub h: Option<[String; 3]>,
    pub g: Option<[String; 3]>,
    /// Exact solution; when given, `y0`, `h` and `g` are derived from it.
    pub exact: Option<[String; 3]>,
    /// Momentum forcing `f` of the velocity form.
    pub force: Option<[String; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub preset: Preset,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub expressions: Expressions,
}

impl ScenarioConfig {
    /// Declared parameters with defaults filled in.
    pub fn resolved_params(&self) -> Result<BTreeMap<String, f64>> {
        let known = self.preset.parameters();
        let mut out: BTreeMap<String, f64> = known.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (k, v) in &self.params {
            if self.preset != Preset::Custom && !known.iter().any(|(n, _)| n == k) {
                return Err(Error::Config(format!("scenario.params.{k}: unknown parameter for this preset")));
            }
            if !v.is_finite() {
                return Err(Error::Config(format!("scenario.params.{k}: not a finite number")));
            }
            out.insert(k.clone(), *v);
        }
        Ok(out)
    }
}

/// Numerical tolerances and the thresholds of the pass/fail checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    /// Crossing tolerance on `x1`, relative to `Lx`.
    pub bisection_tol: f64,
    pub quadrature_order: usize,
    /// Offset from the interface used for jump measurements.
    pub fd_step: f64,
    /// Half width of the interface band; defaults to two ODE steps.
    pub s_band: Option<f64>,
    pub compat: f64,
    pub strong_residual: f64,
    pub exact_error: f64,
    pub weak_residual: f64,
    pub seam: f64,
    pub energy: f64,
    pub curl_residual: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            bisection_tol: 1e-10,
            quadrature_order: 6,
            fd_step: 1.0 / 64.0,
            s_band: None,
            compat: 1e-8,
            strong_residual: 5e-2,
            exact_error: 1e-6,
            weak_residual: 1e-6,
            seam: 1e-6,
            energy: 1e-12,
            curl_residual: 1e-5,
        }
    }
}

/// Which checks decide the exit status. Checks whose inputs are missing
/// (no exact solution, fewer than three snapshots) are skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksConfig {
    pub cond0: bool,
    pub cond1: bool,
    pub range_of_curl: bool,
    pub strong_residual: bool,
    pub exact_error: bool,
    pub weak_residual: bool,
    pub seams: bool,
    pub energy: bool,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig {
            cond0: true,
            cond1: false,
            range_of_curl: false,
            strong_residual: true,
            exact_error: true,
            weak_residual: true,
            seams: true,
            energy: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub holder_alpha: f64,
    pub pair_budget: usize,
    /// Test functions of the weak residual; one bump across the interface
    /// is placed automatically when empty.
    pub bumps: Vec<Bump>,
    pub velocity_recovery: bool,
    pub checks: ChecksConfig,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            holder_alpha: 0.5,
            pair_budget: 2000,
            bumps: Vec::new(),
            velocity_recovery: false,
            checks: ChecksConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("inflowlab-out"),
            formats: vec![Format::Json, Format::Csv, Format::Raw],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub time: TimeConfig,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub tolerance: ToleranceConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name}: must be positive, got {v}")))
    }
}

impl RunConfig {
    /// Parses a JSON document after applying `KEY=VALUE` overrides.
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let mut v: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("not valid JSON: {e}")))?;
        for o in overrides {
            apply_override(&mut v, o)?;
        }
        let cfg: RunConfig = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.build()?;
        let t = &self.time;
        positive("time.T", t.horizon)?;
        positive("time.ode_step", t.ode_step)?;
        positive("time.monitor_dt", t.monitor_dt)?;
        let times = t.times();
        if times.is_empty() {
            return Err(Error::Config("time.snapshot_times: empty".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("time.snapshot_times: must be strictly increasing".into()));
        }
        if times[0] < 0.0 || *times.last().unwrap() > t.horizon {
            return Err(Error::Config("time.snapshot_times: must lie in [0, T]".into()));
        }
        let tol = &self.tolerance;
        for (n, v) in [
            ("tolerance.bisection_tol", tol.bisection_tol),
            ("tolerance.fd_step", tol.fd_step),
            ("tolerance.compat", tol.compat),
            ("tolerance.strong_residual", tol.strong_residual),
            ("tolerance.exact_error", tol.exact_error),
            ("tolerance.weak_residual", tol.weak_residual),
            ("tolerance.seam", tol.seam),
            ("tolerance.energy", tol.energy),
            ("tolerance.curl_residual", tol.curl_residual),
        ] {
            positive(n, v)?;
        }
        if let Some(b) = tol.s_band {
            positive("tolerance.s_band", b)?;
        }
        if tol.quadrature_order == 0 || tol.quadrature_order > 64 {
            return Err(Error::Config("tolerance.quadrature_order: must be in 1..=64".into()));
        }
        let a = self.diagnostics.holder_alpha;
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::Config(format!("diagnostics.holder_alpha: must be in (0, 1], got {a}")));
        }
        if self.diagnostics.pair_budget == 0 {
            return Err(Error::Config("diagnostics.pair_budget: must be positive".into()));
        }
        self.scenario.resolved_params()?;
        let e = &self.scenario.expressions;
        if self.scenario.preset == Preset::Custom && e.u.is_none() {
            return Err(Error::Config("scenario.expressions.u: required by the custom preset".into()));
        }
        if e.exact.is_some() && (e.y0.is_some() || e.h.is_some() || e.g.is_some()) {
            return Err(Error::Config(
                "scenario.expressions: exact excludes y0, h and g".into(),
            ));
        }
        Ok(())
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    RunConfig::from_json(&text, overrides)
}

/// Sets the value at a dotted path such as `domain.Nx=32`. The value is
/// parsed as JSON and taken as a string if that fails.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?}: expected KEY=VALUE")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override {spec:?}: empty path segment")));
    }
    let mut cur = root;
    for (i, p) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(m) => {
                if last {
                    m.insert(p.to_string(), value);
                    return Ok(());
                }
                m.entry(p.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(a) => {
                let k: usize = p
                    .parse()
                    .map_err(|_| Error::Config(format!("override {spec:?}: {p} is not an index")))?;
                let n = a.len();
                let slot = a
                    .get_mut(k)
                    .ok_or_else(|| Error::Config(format!("override {spec:?}: index {k} out of {n}")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("override {spec:?}: {p} is not inside an object"))),
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(r#"{"scenario":{"preset":"uniform"}}"#, &[]).unwrap();
        assert_eq!(c.domain, DomainConfig::default());
        assert_eq!(c.time.times(), vec![0.0, 0.125, 0.25, 0.375, 0.5]);
        assert_eq!(c.tolerance.quadrature_order, 6);
        assert_eq!(c.scenario.resolved_params().unwrap()["speed"], 1.0);
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn rejections() {
        let bad = [
            r#"{"scenario":{"preset":"uniform"},"time":{"ode_step":-0.1}}"#,
            r#"{"scenario":{"preset":"uniform"},"colour":1}"#,
            r#"{"scenario":{"preset":"uniform","params":{"sped":2}}}"#,
            r#"{"scenario":{"preset":"custom"}}"#,
            r#"{"scenario":{"preset":"warp"}}"#,
            r#"{"scenario":{"preset":"uniform"},"time":{"snapshot_times":[0.2,0.1]}}"#,
        ];
        for b in bad {
            let e = RunConfig::from_json(b, &[]).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{b}: {e:?}");
        }
        let e = RunConfig::from_json(r#"{"scenario":{"preset":"uniform"},"colour":1}"#, &[]).unwrap_err();
        assert!(e.to_string().contains("colour"));
    }

    #[test]
    fn overrides_follow_dotted_paths() {
        let c = RunConfig::from_json(
            r#"{"scenario":{"preset":"shear"},"time":{"snapshot_times":[0,0.1,0.2]}}"#,
            &[
                "domain.Nx=32".into(),
                "scenario.params.rate=0.25".into(),
                "time.snapshot_times.2=0.3".into(),
                "output.directory=runs/a".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.domain.nx, 32);
        assert_eq!(c.scenario.params["rate"], 0.25);
        assert_eq!(c.time.times(), vec![0.0, 0.1, 0.3]);
        assert_eq!(c.output.directory, PathBuf::from("runs/a"));
        assert!(RunConfig::from_json(r#"{"scenario":{"preset":"shear"}}"#, &["domain".into()]).is_err());
    }
}
