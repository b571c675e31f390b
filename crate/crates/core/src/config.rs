//! TOML run configuration with unit-aware values.
//!
//! Numbers are taken in the units named by `system.units`. Strings may carry
//! a unit suffix (`"4MHz"`, `"10mK"`, `"1.5e-13kg"`, SI mode only) or be a
//! multiple of a scale symbol (`"0.1*omega_b"`, `"3e-5*g_unit"`,
//! `"6000*t_unit"`). Frequencies given in Hz-family units are read as angular
//! frequencies, so `"4MHz"` means 4e6 rad/s.

use serde::{Deserialize, Serialize};

use crate::cooling::{EvalOptions, Thresholds};
use crate::error::{ModelError, Result};
use crate::model::{
    derive_coupling, drive_from_power, to_natural_units, Detuning, DriveParams, HardwareParams, SiSystemParams,
    SystemParams, UnitScale,
};
use crate::optimize::{Bound, Objective, OptimizeSpec};
use crate::spectrum::ThermalNoise;
use crate::stability::DEFAULT_MARGIN;
use crate::sweep::{Axis, Param, Scale, SweepSpec};
use crate::variance::{QuadratureOptions, DEFAULT_MAX_EVALUATIONS, DEFAULT_REL_TOL};

fn cfg_err(msg: impl Into<String>) -> ModelError {
    ModelError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Natural,
    Si,
}

/// A number, or a string with a unit suffix or scale symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Frequency,
    Temperature,
    Mass,
    Coupling,
    Capacitance,
    Length,
    Inductance,
    Power,
    Dimensionless,
}

impl Dimension {
    fn suffixes(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Frequency => &[
                ("rad/s", 1.0),
                ("THz", 1e12),
                ("GHz", 1e9),
                ("MHz", 1e6),
                ("kHz", 1e3),
                ("Hz", 1.0),
            ],
            Dimension::Temperature => &[("mK", 1e-3), ("uK", 1e-6), ("µK", 1e-6), ("nK", 1e-9), ("K", 1.0)],
            Dimension::Mass => &[
                ("kg", 1.0),
                ("mg", 1e-6),
                ("ug", 1e-9),
                ("ng", 1e-12),
                ("pg", 1e-15),
                ("fg", 1e-18),
                ("g", 1e-3),
            ],
            Dimension::Capacitance => &[
                ("pF", 1e-12),
                ("nF", 1e-9),
                ("uF", 1e-6),
                ("fF", 1e-15),
                ("aF", 1e-18),
                ("F", 1.0),
            ],
            Dimension::Length => &[
                ("mm", 1e-3),
                ("um", 1e-6),
                ("µm", 1e-6),
                ("nm", 1e-9),
                ("pm", 1e-12),
                ("m", 1.0),
            ],
            Dimension::Inductance => &[("mH", 1e-3), ("uH", 1e-6), ("nH", 1e-9), ("pH", 1e-12), ("H", 1.0)],
            Dimension::Power => &[
                ("mW", 1e-3),
                ("uW", 1e-6),
                ("nW", 1e-9),
                ("pW", 1e-12),
                ("fW", 1e-15),
                ("aW", 1e-18),
                ("W", 1.0),
            ],
            Dimension::Coupling | Dimension::Dimensionless => &[],
        }
    }

    fn symbol(self) -> Option<&'static str> {
        match self {
            Dimension::Frequency => Some("omega_b"),
            Dimension::Coupling => Some("g_unit"),
            Dimension::Temperature => Some("t_unit"),
            _ => None,
        }
    }
}

/// Unit context for resolving quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitContext {
    pub units: Units,
    /// SI scale; required for symbols in SI mode.
    pub scale: Option<UnitScale>,
}

impl UnitContext {
    pub fn natural() -> Self {
        UnitContext {
            units: Units::Natural,
            scale: None,
        }
    }

    fn symbol_value(&self, dim: Dimension) -> Result<f64> {
        match self.units {
            Units::Natural => Ok(1.0),
            Units::Si => {
                let s = self
                    .scale
                    .ok_or_else(|| cfg_err("scale symbols need system.mass and system.omega_b"))?;
                Ok(match dim {
                    Dimension::Frequency => s.omega_b,
                    Dimension::Coupling => s.coupling(),
                    Dimension::Temperature => s.temperature(),
                    _ => unreachable!("symbol only defined for scaled dimensions"),
                })
            }
        }
    }
}

fn parse_number(s: &str, key: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| cfg_err(format!("`{key}`: cannot read `{s}` as a number")))
}

/// Resolves a quantity to the internal units of `ctx` (natural numbers in
/// natural mode, SI in SI mode).
pub fn resolve(q: &Quantity, dim: Dimension, ctx: &UnitContext, key: &str) -> Result<f64> {
    let v = match q {
        Quantity::Number(v) => *v,
        Quantity::Text(raw) => {
            let s = raw.trim();
            if let Some((num, sym)) = s.split_once('*') {
                let sym = sym.trim();
                match dim.symbol() {
                    Some(expected) if expected == sym => parse_number(num, key)? * ctx.symbol_value(dim)?,
                    _ => return Err(cfg_err(format!("`{key}`: symbol `{sym}` does not apply here"))),
                }
            } else if dim.symbol() == Some(s) {
                ctx.symbol_value(dim)?
            } else if let Ok(v) = s.parse::<f64>() {
                v
            } else {
                let Some(&(suffix, factor)) = dim.suffixes().iter().find(|(suf, _)| s.ends_with(suf)) else {
                    return Err(cfg_err(format!("`{key}`: cannot read `{s}`")));
                };
                if ctx.units == Units::Natural {
                    return Err(cfg_err(format!(
                        "`{key}`: unit suffix `{suffix}` is not allowed with units = \"natural\""
                    )));
                }
                parse_number(&s[..s.len() - suffix.len()], key)? * factor
            }
        }
    };
    if !v.is_finite() {
        return Err(cfg_err(format!("`{key}` must be finite")));
    }
    Ok(v)
}

pub fn param_dimension(p: Param) -> Dimension {
    match p {
        Param::Delta | Param::Delta0 | Param::Kappa | Param::GammaB | Param::Epsilon | Param::OmegaA => {
            Dimension::Frequency
        }
        Param::Temperature => Dimension::Temperature,
        Param::QB => Dimension::Dimensionless,
        Param::G0 => Dimension::Coupling,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSystem {
    #[serde(default)]
    pub units: Units,
    pub mass: Option<Quantity>,
    pub omega_b: Option<Quantity>,
    pub gamma_b: Option<Quantity>,
    pub q_b: Option<Quantity>,
    pub omega_a: Option<Quantity>,
    pub kappa: Option<Quantity>,
    pub g0: Option<Quantity>,
    pub temperature: Option<Quantity>,
    pub cavity_temperature: Option<Quantity>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDrive {
    pub epsilon: Option<Quantity>,
    pub delta: Option<Quantity>,
    pub delta0: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawHardware {
    pub cg0: Quantity,
    pub d: Quantity,
    pub ca: Quantity,
    pub la: Quantity,
    pub power: Quantity,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNumerics {
    pub rel_tol: Option<f64>,
    pub max_evaluations: Option<usize>,
    pub bath_cutoff: Option<Quantity>,
    pub margin: Option<f64>,
    pub thermal: Option<ThermalNoise>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAxis {
    pub param: String,
    pub min: Option<Quantity>,
    pub max: Option<Quantity>,
    pub count: Option<usize>,
    #[serde(default)]
    pub scale: Scale,
    pub values: Option<Vec<Quantity>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    #[serde(default)]
    pub axes: Vec<RawAxis>,
    pub outputs: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBound {
    pub param: String,
    pub min: Quantity,
    pub max: Quantity,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOptimize {
    #[serde(default)]
    pub free: Vec<RawBound>,
    pub objective: Option<Objective>,
    pub coarse_points: Option<usize>,
    pub tol: Option<f64>,
    pub require_weak_coupling: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    pub format: Option<Format>,
    pub path: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub system: RawSystem,
    #[serde(default)]
    pub drive: RawDrive,
    pub hardware: Option<RawHardware>,
    #[serde(default)]
    pub numerics: RawNumerics,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub sweep: Option<RawSweep>,
    pub optimize: Option<RawOptimize>,
    #[serde(default)]
    pub output: RawOutput,
}

pub const DEFAULT_OUTPUTS: [&str; 8] = [
    "n_bf_exact",
    "n_bf_approx",
    "t_eff",
    "n_ca",
    "gamma_ca_at_wb",
    "equipartition_ratio",
    "stability",
    "weak_coupling",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSweep {
    pub axes: Vec<Axis>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedOptimize {
    pub free: Vec<Bound>,
    pub objective: Objective,
    pub coarse_points: usize,
    pub tol: f64,
    pub require_weak_coupling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub rel_tol: f64,
    pub max_evaluations: usize,
    /// Natural units; `None` means ω_a.
    pub bath_cutoff: Option<f64>,
    pub margin: f64,
    pub thermal: ThermalNoise,
}

/// Fully resolved configuration in natural units, as embedded in outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input_units: Units,
    /// SI scale when the input was SI.
    pub scale: Option<UnitScale>,
    pub system: SystemParams,
    pub drive: DriveParams,
    pub numerics: Numerics,
    pub thresholds: Thresholds,
    pub sweep: Option<ResolvedSweep>,
    pub optimize: Option<ResolvedOptimize>,
    pub format: Format,
    pub out: Option<String>,
}

impl RunConfig {
    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            quadrature: QuadratureOptions {
                rel_tol: self.numerics.rel_tol,
                max_evaluations: self.numerics.max_evaluations,
                bath_cutoff: self.numerics.bath_cutoff,
            },
            margin: self.numerics.margin,
            thresholds: self.thresholds,
            thermal: self.numerics.thermal,
            approx_only: false,
        }
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let sweep = self.sweep.as_ref().ok_or_else(|| cfg_err("missing [sweep] section"))?;
        let spec = SweepSpec {
            axes: sweep.axes.clone(),
            params: self.system,
            drive: self.drive,
            options: self.eval_options(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn optimize_spec(&self) -> Result<OptimizeSpec> {
        let o = self
            .optimize
            .as_ref()
            .ok_or_else(|| cfg_err("missing [optimize] section"))?;
        let mut spec = OptimizeSpec::new(o.free.clone(), self.system, self.drive);
        spec.options = self.eval_options();
        spec.objective = o.objective;
        spec.coarse_points = o.coarse_points;
        spec.tol = o.tol;
        spec.require_weak_coupling = o.require_weak_coupling;
        Ok(spec)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Parses TOML text, applies `key=value` overrides, and resolves units.
pub fn load(text: &str, overrides: &[String]) -> Result<RunConfig> {
    load_with(text, overrides, &[])
}

/// [`load`] that first deletes the dotted keys in `cleared`, so an override
/// can replace a mutually exclusive key set in the file.
pub fn load_with(text: &str, overrides: &[String], cleared: &[&str]) -> Result<RunConfig> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| cfg_err(e.to_string()))?;
    for key in cleared {
        let parts: Vec<&str> = key.split('.').collect();
        let mut cur = Some(&mut table);
        for part in &parts[..parts.len() - 1] {
            cur = cur.and_then(|t| t.get_mut(*part)).and_then(toml::Value::as_table_mut);
        }
        if let Some(t) = cur {
            t.remove(parts[parts.len() - 1]);
        }
    }
    for ov in overrides {
        apply_override(&mut table, ov)?;
    }
    let raw: RawConfig = RawConfig::deserialize(toml::Value::Table(table)).map_err(|e| cfg_err(e.to_string()))?;
    resolve_config(&raw)
}

/// Sets a dotted `key=value` in the table. The value is read as a TOML value
/// when possible and as a bare string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| cfg_err(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(cfg_err(format!("bad override key `{key}`")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| cfg_err(format!("override `{key}`: `{part}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

pub fn resolve_config(raw: &RawConfig) -> Result<RunConfig> {
    let s = &raw.system;
    let units = s.units;
    let natural_defaults = SystemParams::figure2(1.0);

    let mut ctx = UnitContext { units, scale: None };
    let opt = |q: &Option<Quantity>, dim: Dimension, key: &str, ctx: &UnitContext| -> Result<Option<f64>> {
        q.as_ref().map(|q| resolve(q, dim, ctx, key)).transpose()
    };

    if raw.hardware.is_some() && units != Units::Si {
        return Err(cfg_err("[hardware] requires system.units = \"si\""));
    }
    if s.gamma_b.is_some() && s.q_b.is_some() {
        return Err(cfg_err("give either system.gamma_b or system.q_b, not both"));
    }

    let (system, scale, epsilon_si) = match units {
        Units::Natural => {
            let mut p = natural_defaults;
            if let Some(v) = opt(&s.mass, Dimension::Mass, "system.mass", &ctx)? {
                p.mass = v;
            }
            if let Some(v) = opt(&s.omega_b, Dimension::Frequency, "system.omega_b", &ctx)? {
                p.omega_b = v;
            }
            if let Some(v) = opt(&s.gamma_b, Dimension::Frequency, "system.gamma_b", &ctx)? {
                p.gamma_b = v;
            }
            if let Some(q) = opt(&s.q_b, Dimension::Dimensionless, "system.q_b", &ctx)? {
                p.gamma_b = p.omega_b / q;
            }
            if let Some(v) = opt(&s.omega_a, Dimension::Frequency, "system.omega_a", &ctx)? {
                p.omega_a = v;
            }
            if let Some(v) = opt(&s.kappa, Dimension::Frequency, "system.kappa", &ctx)? {
                p.kappa = v;
            }
            if let Some(v) = opt(&s.g0, Dimension::Coupling, "system.g0", &ctx)? {
                p.g0 = v;
            }
            if let Some(v) = opt(&s.temperature, Dimension::Temperature, "system.temperature", &ctx)? {
                p.temperature = v;
            }
            p.cavity_temperature = opt(
                &s.cavity_temperature,
                Dimension::Temperature,
                "system.cavity_temperature",
                &ctx,
            )?;
            (p, None, None)
        }
        Units::Si => {
            let mass = opt(&s.mass, Dimension::Mass, "system.mass", &ctx)?
                .ok_or_else(|| cfg_err("system.mass is required with units = \"si\""))?;
            let omega_b = opt(&s.omega_b, Dimension::Frequency, "system.omega_b", &ctx)?
                .ok_or_else(|| cfg_err("system.omega_b is required with units = \"si\""))?;
            let scale = UnitScale::new(mass, omega_b)?;
            ctx.scale = Some(scale);
            let d = scale.to_si(&natural_defaults);
            let mut si = SiSystemParams { mass, omega_b, ..d };
            if let Some(v) = opt(&s.gamma_b, Dimension::Frequency, "system.gamma_b", &ctx)? {
                si.gamma_b = v;
            }
            if let Some(q) = opt(&s.q_b, Dimension::Dimensionless, "system.q_b", &ctx)? {
                si.gamma_b = omega_b / q;
            }
            if let Some(v) = opt(&s.kappa, Dimension::Frequency, "system.kappa", &ctx)? {
                si.kappa = v;
            }
            if let Some(v) = opt(&s.temperature, Dimension::Temperature, "system.temperature", &ctx)? {
                si.temperature = v;
            }
            si.cavity_temperature = opt(
                &s.cavity_temperature,
                Dimension::Temperature,
                "system.cavity_temperature",
                &ctx,
            )?;
            let omega_a = opt(&s.omega_a, Dimension::Frequency, "system.omega_a", &ctx)?;
            let g0 = opt(&s.g0, Dimension::Coupling, "system.g0", &ctx)?;
            let mut epsilon = None;
            if let Some(h) = &raw.hardware {
                let hw = HardwareParams {
                    cg0: resolve(&h.cg0, Dimension::Capacitance, &ctx, "hardware.cg0")?,
                    d: resolve(&h.d, Dimension::Length, &ctx, "hardware.d")?,
                    ca: resolve(&h.ca, Dimension::Capacitance, &ctx, "hardware.ca")?,
                    la: resolve(&h.la, Dimension::Inductance, &ctx, "hardware.la")?,
                    power: resolve(&h.power, Dimension::Power, &ctx, "hardware.power")?,
                };
                if g0.is_some() {
                    return Err(cfg_err("system.g0 conflicts with [hardware], which determines it"));
                }
                if raw.drive.epsilon.is_some() {
                    return Err(cfg_err("drive.epsilon conflicts with [hardware], which determines it"));
                }
                si.g0 = derive_coupling(&hw)?;
                si.omega_a = omega_a.unwrap_or_else(|| hw.shifted_cavity_frequency());
                epsilon = Some(drive_from_power(hw.power, si.kappa, hw.bare_cavity_frequency())?);
            } else {
                if let Some(v) = omega_a {
                    si.omega_a = v;
                }
                if let Some(v) = g0 {
                    si.g0 = v;
                }
            }
            let (p, scale) = to_natural_units(&si)?;
            (p, Some(scale), epsilon)
        }
    };
    system.validate()?;

    // Frequencies in natural units from here on.
    let to_nat = |v: f64| match scale {
        Some(sc) => v / sc.omega_b,
        None => v,
    };
    let to_nat_dim = |v: f64, dim: Dimension| match (scale, dim) {
        (None, _) => v,
        (Some(sc), Dimension::Frequency) => v / sc.omega_b,
        (Some(sc), Dimension::Temperature) => v / sc.temperature(),
        (Some(sc), Dimension::Coupling) => v / sc.coupling(),
        (Some(_), _) => v,
    };

    let d = &raw.drive;
    let epsilon = match (epsilon_si, &d.epsilon) {
        (Some(e), _) => to_nat(e),
        (None, Some(q)) => to_nat(resolve(q, Dimension::Frequency, &ctx, "drive.epsilon")?),
        (None, None) => 2.5e3,
    };
    let detuning = match (&d.delta, &d.delta0) {
        (Some(_), Some(_)) => return Err(cfg_err("give exactly one of drive.delta and drive.delta0")),
        (Some(q), None) => Detuning::Effective(to_nat(resolve(q, Dimension::Frequency, &ctx, "drive.delta")?)),
        (None, Some(q)) => Detuning::Bare(to_nat(resolve(q, Dimension::Frequency, &ctx, "drive.delta0")?)),
        (None, None) => Detuning::Effective(1.0),
    };
    let drive = DriveParams::new(epsilon, detuning);

    let n = &raw.numerics;
    let numerics = Numerics {
        rel_tol: n.rel_tol.unwrap_or(DEFAULT_REL_TOL),
        max_evaluations: n.max_evaluations.unwrap_or(DEFAULT_MAX_EVALUATIONS),
        bath_cutoff: opt(&n.bath_cutoff, Dimension::Frequency, "numerics.bath_cutoff", &ctx)?.map(to_nat),
        margin: n.margin.unwrap_or(DEFAULT_MARGIN),
        thermal: n.thermal.unwrap_or_default(),
    };
    QuadratureOptions {
        rel_tol: numerics.rel_tol,
        max_evaluations: numerics.max_evaluations,
        bath_cutoff: numerics.bath_cutoff,
    }
    .validate()?;

    let sweep = match &raw.sweep {
        None => None,
        Some(sw) => {
            let mut axes = Vec::new();
            for (i, a) in sw.axes.iter().enumerate() {
                let param: Param = a.param.parse()?;
                let dim = param_dimension(param);
                let key = format!("sweep.axes[{i}]");
                let conv = |q: &Quantity| -> Result<f64> { Ok(to_nat_dim(resolve(q, dim, &ctx, &key)?, dim)) };
                let axis = match (&a.values, &a.min, &a.max, a.count) {
                    (Some(vals), None, None, None) => {
                        Axis::list(param, vals.iter().map(conv).collect::<Result<Vec<_>>>()?)?
                    }
                    (None, Some(lo), Some(hi), Some(count)) => {
                        Axis::range(param, conv(lo)?, conv(hi)?, count, a.scale)?
                    }
                    _ => {
                        return Err(cfg_err(format!(
                            "{key}: give either `values` or `min`, `max` and `count`"
                        )))
                    }
                };
                axes.push(axis);
            }
            let outputs = sw
                .outputs
                .clone()
                .unwrap_or_else(|| DEFAULT_OUTPUTS.iter().map(|s| s.to_string()).collect());
            for o in &outputs {
                if !crate::output::REPORT_COLUMNS.contains(&o.as_str()) {
                    return Err(cfg_err(format!("sweep.outputs: unknown quantity `{o}`")));
                }
            }
            let spec = SweepSpec {
                axes: axes.clone(),
                params: system,
                drive,
                options: EvalOptions::default(),
            };
            spec.validate()?;
            Some(ResolvedSweep { axes, outputs })
        }
    };

    let optimize = match &raw.optimize {
        None => None,
        Some(o) => {
            let mut free = Vec::new();
            for (i, b) in o.free.iter().enumerate() {
                let param: Param = b.param.parse()?;
                let dim = param_dimension(param);
                let key = format!("optimize.free[{i}]");
                free.push(Bound {
                    param,
                    min: to_nat_dim(resolve(&b.min, dim, &ctx, &key)?, dim),
                    max: to_nat_dim(resolve(&b.max, dim, &ctx, &key)?, dim),
                });
            }
            Some(ResolvedOptimize {
                free,
                objective: o.objective.unwrap_or_default(),
                coarse_points: o.coarse_points.unwrap_or(41),
                tol: o.tol.unwrap_or(1e-4),
                require_weak_coupling: o.require_weak_coupling.unwrap_or(false),
            })
        }
    };

    Ok(RunConfig {
        input_units: units,
        scale,
        system,
        drive,
        numerics,
        thresholds: raw.thresholds,
        sweep,
        optimize,
        format: raw.output.format.unwrap_or_default(),
        out: raw.output.path.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn empty_config_gives_defaults() {
        let c = load("", &[]).unwrap();
        assert_eq!(c.system, SystemParams::figure2(1.0));
        assert_eq!(c.drive, DriveParams::new(2.5e3, Detuning::Effective(1.0)));
        assert_eq!(c.numerics.rel_tol, 1e-6);
        assert_eq!(c.format, Format::Json);
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = load("[system]\nkapa = 0.1\n", &[]).unwrap_err().to_string();
        assert!(e.contains("kapa"), "{e}");
        let e = load("[bogus]\nx = 1\n", &[]).unwrap_err().to_string();
        assert!(e.contains("bogus"), "{e}");
    }

    #[test]
    fn natural_mode_rejects_suffixes() {
        let e = load("[system]\nkappa = \"4MHz\"\n", &[]).unwrap_err().to_string();
        assert!(e.contains("natural"), "{e}");
        let c = load(
            "[system]\nkappa = \"0.1*omega_b\"\ntemperature = \"6000*t_unit\"\n",
            &[],
        )
        .unwrap();
        assert_eq!(c.system.kappa, 0.1);
        assert_eq!(c.system.temperature, 6000.0);
    }

    #[test]
    fn si_mode_figure5_caption() {
        let text = r#"
[system]
units = "si"
mass = "1.5e-13kg"
omega_b = "4MHz"
gamma_b = "0.25e-4*omega_b"
omega_a = "2e4*omega_b"
kappa = "0.1*omega_b"
g0 = "3e-5*g_unit"
temperature = "10mK"

[drive]
epsilon = "2.5e3*omega_b"
delta = "1*omega_b"
"#;
        let c = load(text, &[]).unwrap();
        assert!(rel(c.system.kappa, 0.1) < 1e-12);
        assert!(rel(c.system.g0, 3e-5) < 1e-12);
        assert!(rel(c.system.temperature, 327.3) < 1e-3);
        assert!(rel(c.drive.epsilon.re, 2.5e3) < 1e-12);
        assert_eq!(c.drive.detuning, Detuning::Effective(1.0));
        assert!(c.scale.is_some());
        assert_eq!(c.input_units, Units::Si);
    }

    #[test]
    fn si_requires_scale() {
        assert!(load("[system]\nunits = \"si\"\nkappa = 1.0\n", &[]).is_err());
    }

    #[test]
    fn hardware_derives_coupling_and_drive() {
        let text = r#"
[system]
units = "si"
mass = "1.5e-13kg"
omega_b = "4MHz"
kappa = "0.4MHz"

[hardware]
cg0 = "1fF"
d = "1um"
ca = "1pF"
la = "1nH"
power = "1nW"
"#;
        let c = load(text, &[]).unwrap();
        let hw = HardwareParams {
            cg0: 1e-15,
            d: 1e-6,
            ca: 1e-12,
            la: 1e-9,
            power: 1e-9,
        };
        let scale = c.scale.unwrap();
        assert!(rel(c.system.g0 * scale.coupling(), derive_coupling(&hw).unwrap()) < 1e-12);
        let eps = drive_from_power(1e-9, 0.4e6, hw.bare_cavity_frequency()).unwrap();
        assert!(rel(c.drive.epsilon.re * 4e6, eps) < 1e-12);
        assert!(load(&format!("{text}\n[drive]\nepsilon = 1.0\n"), &[]).is_err());
        assert!(load("[hardware]\ncg0 = 1\nd = 1\nca = 1\nla = 1\npower = 1\n", &[]).is_err());
    }

    #[test]
    fn overrides() {
        let c = load(
            "[system]\nkappa = 0.3\n",
            &["system.kappa=0.1".into(), "drive.delta0=2".into()],
        )
        .unwrap();
        assert_eq!(c.system.kappa, 0.1);
        assert_eq!(c.drive.detuning, Detuning::Bare(2.0));
        let c = load("", &["numerics.thermal=white".into()]).unwrap();
        assert_eq!(c.numerics.thermal, ThermalNoise::White);
        assert!(load("", &["nonsense".into()]).is_err());
        assert!(load("", &["system.kappa.x=1".into()]).is_err());
        assert!(load("", &["system.nope=1".into()]).is_err());
    }

    #[test]
    fn detuning_exclusive() {
        assert!(load("[drive]\ndelta = 1\ndelta0 = 1\n", &[]).is_err());
        assert!(load("[system]\ngamma_b = 1e-5\nq_b = 1e5\n", &[]).is_err());
        let c = load("[system]\nq_b = 1e5\n", &[]).unwrap();
        assert!(rel(c.system.gamma_b, 1e-5) < 1e-15);
    }

    #[test]
    fn sweep_and_optimize_sections() {
        let text = r#"
[sweep]
outputs = ["n_bf_approx"]
[[sweep.axes]]
param = "delta"
min = 0.25
max = 3.0
count = 12
[[sweep.axes]]
param = "temperature"
values = [327.3, "981.9*t_unit"]

[optimize]
free = [{ param = "delta", min = 0.25, max = 3 }]
objective = "approx"
"#;
        let c = load(text, &[]).unwrap();
        let spec = c.sweep_spec().unwrap();
        assert_eq!(spec.len(), 24);
        assert_eq!(spec.axes[1].values, vec![327.3, 981.9]);
        let o = c.optimize_spec().unwrap();
        assert_eq!(o.objective, Objective::Approx);
        assert_eq!(o.free[0].max, 3.0);

        let bad = "[sweep]\n[[sweep.axes]]\nparam = \"delta\"\nmin = 1\n";
        assert!(load(bad, &[]).is_err());
        let bad = "[sweep]\noutputs = [\"nope\"]\n[[sweep.axes]]\nparam = \"delta\"\nvalues = [1]\n";
        assert!(load(bad, &[]).is_err());
    }

    #[test]
    fn si_sweep_values_are_converted() {
        let text = r#"
[system]
units = "si"
mass = "1.5e-13kg"
omega_b = "4MHz"
[sweep]
[[sweep.axes]]
param = "temperature"
values = ["10mK", "30mK", "100mK"]
"#;
        let c = load(text, &[]).unwrap();
        let v = &c.sweep.unwrap().axes[0].values;
        assert!(rel(v[0], 327.3) < 1e-3 && rel(v[1], 981.9) < 1e-3 && rel(v[2], 3273.0) < 1e-3);
    }

    #[test]
    fn resolve_forms() {
        let si = UnitContext {
            units: Units::Si,
            scale: Some(UnitScale::new(1.0, 4e6).unwrap()),
        };
        let q = |s: &str| Quantity::Text(s.into());
        assert_eq!(resolve(&q("4MHz"), Dimension::Frequency, &si, "k").unwrap(), 4e6);
        assert_eq!(resolve(&q("2*omega_b"), Dimension::Frequency, &si, "k").unwrap(), 8e6);
        assert_eq!(resolve(&q("omega_b"), Dimension::Frequency, &si, "k").unwrap(), 4e6);
        assert!(rel(resolve(&q("10mK"), Dimension::Temperature, &si, "k").unwrap(), 1e-2) < 1e-15);
        assert!(rel(resolve(&q("1.5e-13kg"), Dimension::Mass, &si, "k").unwrap(), 1.5e-13) < 1e-15);
        assert!(rel(resolve(&q("5fF"), Dimension::Capacitance, &si, "k").unwrap(), 5e-15) < 1e-15);
        assert!(resolve(&q("2*g_unit"), Dimension::Frequency, &si, "k").is_err());
        assert!(resolve(&q("4 parsecs"), Dimension::Length, &si, "k").is_err());
        assert!(resolve(&Quantity::Number(f64::NAN), Dimension::Length, &si, "k").is_err());
    }
}
