//! Parameter grids evaluated through the full cooling pipeline.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cooling::{evaluate, CoolingReport, EvalOptions};
use crate::error::{invalid, ModelError, Result};
use crate::model::{Detuning, DriveParams, SystemParams};
use crate::stability::Verdict;

/// Parameters that can be swept or optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    /// Effective detuning Δ.
    Delta,
    /// Bare detuning Δ0.
    Delta0,
    Kappa,
    Temperature,
    /// Mechanical quality factor; sets γ_b = ω_b/Q_b.
    QB,
    GammaB,
    Epsilon,
    G0,
    OmegaA,
}

impl Param {
    pub const ALL: [Param; 9] = [
        Param::Delta,
        Param::Delta0,
        Param::Kappa,
        Param::Temperature,
        Param::QB,
        Param::GammaB,
        Param::Epsilon,
        Param::G0,
        Param::OmegaA,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Delta => "delta",
            Param::Delta0 => "delta0",
            Param::Kappa => "kappa",
            Param::Temperature => "temperature",
            Param::QB => "q_b",
            Param::GammaB => "gamma_b",
            Param::Epsilon => "epsilon",
            Param::G0 => "g0",
            Param::OmegaA => "omega_a",
        }
    }

    pub fn apply(self, params: &mut SystemParams, drive: &mut DriveParams, value: f64) {
        match self {
            Param::Delta => drive.detuning = Detuning::Effective(value),
            Param::Delta0 => drive.detuning = Detuning::Bare(value),
            Param::Kappa => params.kappa = value,
            Param::Temperature => params.temperature = value,
            Param::QB => params.gamma_b = params.omega_b / value,
            Param::GammaB => params.gamma_b = value,
            Param::Epsilon => drive.epsilon = num_complex::Complex64::new(value, 0.0),
            Param::G0 => params.g0 = value,
            Param::OmegaA => params.omega_a = value,
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| ModelError::Config(format!("unknown parameter `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: Param,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn range(param: Param, min: f64, max: f64, count: usize, scale: Scale) -> Result<Self> {
        if count == 0 {
            return Err(invalid("count", "axis needs at least one point"));
        }
        if !min.is_finite() || !max.is_finite() || max < min {
            return Err(invalid("range", format!("bad range [{min}, {max}] for {param}")));
        }
        if scale == Scale::Log && min <= 0.0 {
            return Err(invalid("range", "log axis needs a positive minimum"));
        }
        let values = if count == 1 {
            vec![min]
        } else {
            (0..count)
                .map(|i| {
                    let t = i as f64 / (count - 1) as f64;
                    match scale {
                        Scale::Linear => min + t * (max - min),
                        Scale::Log => (min.ln() + t * (max.ln() - min.ln())).exp(),
                    }
                })
                .collect()
        };
        Ok(Axis { param, values })
    }

    pub fn list(param: Param, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", format!("axis {param} needs finite values")));
        }
        Ok(Axis { param, values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    pub params: SystemParams,
    pub drive: DriveParams,
    pub options: EvalOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(invalid("axes", "a sweep takes one or two axes"));
        }
        if self.axes.len() == 2 && self.axes[0].param == self.axes[1].param {
            return Err(invalid("axes", "the two axes must differ"));
        }
        let detunings = self
            .axes
            .iter()
            .filter(|a| matches!(a.param, Param::Delta | Param::Delta0))
            .count();
        if detunings > 1 {
            return Err(invalid("axes", "delta and delta0 cannot both be swept"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates of grid index `i`, first axis slowest.
    pub fn coords(&self, i: usize) -> Vec<f64> {
        let mut rem = i;
        let mut out = vec![0.0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            let n = axis.values.len();
            out[k] = axis.values[rem % n];
            rem /= n;
        }
        out
    }

    pub fn point(&self, coords: &[f64]) -> (SystemParams, DriveParams) {
        let mut p = self.params;
        let mut d = self.drive;
        for (axis, &v) in self.axes.iter().zip(coords) {
            axis.param.apply(&mut p, &mut d, v);
        }
        (p, d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Cell {
    Ok(Box<CoolingReport>),
    Error { message: String },
}

impl Cell {
    pub fn report(&self) -> Option<&CoolingReport> {
        match self {
            Cell::Ok(r) => Some(r),
            Cell::Error { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub coords: Vec<f64>,
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axes: Vec<Param>,
    pub points: Vec<SweepPoint>,
}

impl SweepTable {
    /// Minimum of `f` over cells where it is defined; ties go to the lower
    /// grid index.
    pub fn min_by<F: Fn(&CoolingReport) -> Option<f64>>(&self, f: F) -> Option<(&SweepPoint, f64)> {
        let mut best: Option<(&SweepPoint, f64)> = None;
        for pt in &self.points {
            if let Some(v) = pt.cell.report().and_then(&f) {
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((pt, v));
                }
            }
        }
        best
    }
}

fn eval_cell(params: &SystemParams, drive: &DriveParams, options: &EvalOptions) -> Cell {
    match evaluate(params, drive, options) {
        Ok(r) => Cell::Ok(Box::new(r)),
        Err(e) => Cell::Error { message: e.to_string() },
    }
}

/// Evaluates every grid point. Workers default to rayon's global pool;
/// output is ordered by grid index either way.
pub fn run_sweep(spec: &SweepSpec, workers: Option<usize>) -> Result<SweepTable> {
    spec.validate()?;
    let job = || {
        (0..spec.len())
            .into_par_iter()
            .map(|i| {
                let coords = spec.coords(i);
                let (p, d) = spec.point(&coords);
                SweepPoint {
                    index: i,
                    cell: eval_cell(&p, &d, &spec.options),
                    coords,
                }
            })
            .collect::<Vec<_>>()
    };
    let points = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| ModelError::Config(e.to_string()))?
            .install(job),
        None => job(),
    };
    Ok(SweepTable {
        axes: spec.axes.iter().map(|a| a.param).collect(),
        points,
    })
}

/// True when the cell holds a stable point with positive effective detuning.
pub fn is_cooling_point(r: &CoolingReport) -> bool {
    r.stability == Verdict::Stable && r.delta > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SweepSpec {
        let mut p = SystemParams::figure2(0.1);
        p.temperature = 327.3;
        SweepSpec {
            axes: vec![Axis::range(Param::Delta, 0.5, 1.5, 5, Scale::Linear).unwrap()],
            params: p,
            drive: DriveParams::new(2.5e3, Detuning::Effective(1.0)),
            options: EvalOptions {
                approx_only: true,
                ..Default::default()
            },
        }
    }

    #[test]
    fn axis_construction() {
        let a = Axis::range(Param::Kappa, 0.1, 10.0, 3, Scale::Log).unwrap();
        assert!((a.values[1] - 1.0).abs() < 1e-12);
        assert_eq!(
            Axis::range(Param::Kappa, 2.0, 3.0, 1, Scale::Linear).unwrap().values,
            vec![2.0]
        );
        assert!(Axis::range(Param::Kappa, 0.0, 1.0, 3, Scale::Log).is_err());
        assert!(Axis::range(Param::Kappa, 0.0, 1.0, 0, Scale::Linear).is_err());
        assert!(Axis::list(Param::Kappa, vec![]).is_err());
        assert_eq!("q_b".parse::<Param>().unwrap(), Param::QB);
        assert!("bogus".parse::<Param>().is_err());
    }

    #[test]
    fn grid_order_first_axis_slowest() {
        let mut s = base();
        s.axes.push(Axis::list(Param::Kappa, vec![0.1, 0.2, 0.3]).unwrap());
        assert_eq!(s.len(), 15);
        assert_eq!(s.coords(0), vec![0.5, 0.1]);
        assert_eq!(s.coords(1), vec![0.5, 0.2]);
        assert_eq!(s.coords(3), vec![0.75, 0.1]);
        let t = run_sweep(&s, Some(3)).unwrap();
        assert_eq!(t.points.len(), 15);
        assert!(t.points.iter().enumerate().all(|(i, p)| p.index == i));
    }

    #[test]
    fn single_point_matches_direct_call() {
        let mut s = base();
        s.options.approx_only = false;
        s.axes = vec![Axis::list(Param::Delta, vec![1.0]).unwrap()];
        let t = run_sweep(&s, None).unwrap();
        let direct = evaluate(&s.params, &s.drive, &s.options).unwrap();
        assert_eq!(t.points[0].cell.report().unwrap(), &direct);
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let s = base();
        let a = run_sweep(&s, Some(1)).unwrap();
        let b = run_sweep(&s, Some(4)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn unstable_cells_are_kept() {
        let mut s = base();
        s.axes = vec![Axis::list(Param::Delta, vec![-1.0, 1.0]).unwrap()];
        let t = run_sweep(&s, None).unwrap();
        assert_eq!(t.points.len(), 2);
        let r = t.points[0].cell.report().unwrap();
        assert_eq!(r.stability, Verdict::Unstable);
        assert!(!is_cooling_point(r));
        assert!(is_cooling_point(t.points[1].cell.report().unwrap()));
    }

    #[test]
    fn bad_points_are_recorded_in_cell() {
        let mut s = base();
        s.axes = vec![Axis::list(Param::Kappa, vec![-1.0, 0.1]).unwrap()];
        let t = run_sweep(&s, None).unwrap();
        assert!(matches!(t.points[0].cell, Cell::Error { .. }));
        assert!(t.points[1].cell.report().is_some());
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = base();
        s.axes.push(Axis::list(Param::Delta0, vec![1.0]).unwrap());
        assert!(run_sweep(&s, None).is_err());
        s.axes.clear();
        assert!(run_sweep(&s, None).is_err());
    }

    #[test]
    fn quality_factor_axis() {
        let mut p = SystemParams::figure2(0.1);
        let mut d = DriveParams::new(1.0, Detuning::Effective(1.0));
        Param::QB.apply(&mut p, &mut d, 1e5);
        assert!((p.gamma_b - 1e-5).abs() < 1e-20);
        Param::Delta0.apply(&mut p, &mut d, 2.0);
        assert_eq!(d.detuning, Detuning::Bare(2.0));
    }
}
