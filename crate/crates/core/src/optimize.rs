//! Deterministic minimization of the phonon number over one or two
//! parameters: coarse grid scan, then golden-section refinement per axis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cooling::{evaluate, CoolingReport, EvalOptions};
use crate::error::{invalid, ModelError, Result};
use crate::model::{DriveParams, SystemParams};
use crate::sweep::{is_cooling_point, Param};

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_COORDINATE_ROUNDS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Phonon number from quadrature of the noise spectra.
    #[default]
    Exact,
    /// Phonon number from the weak-coupling closed form.
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub param: Param,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeSpec {
    pub free: Vec<Bound>,
    pub params: SystemParams,
    pub drive: DriveParams,
    pub options: EvalOptions,
    pub objective: Objective,
    /// Coarse grid points per axis.
    pub coarse_points: usize,
    /// Refinement tolerance on the parameters.
    pub tol: f64,
    /// Treat points outside the weak-coupling limit as infeasible.
    pub require_weak_coupling: bool,
    /// Threads for the grid scan; `None` uses rayon's global pool.
    pub workers: Option<usize>,
}

impl OptimizeSpec {
    pub fn new(free: Vec<Bound>, params: SystemParams, drive: DriveParams) -> Self {
        OptimizeSpec {
            free,
            params,
            drive,
            options: EvalOptions::default(),
            objective: Objective::Exact,
            coarse_points: 41,
            tol: 1e-4,
            require_weak_coupling: false,
            workers: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.free.is_empty() || self.free.len() > 2 {
            return Err(invalid("free", "optimize over one or two parameters"));
        }
        for b in &self.free {
            if !(b.min.is_finite() && b.max.is_finite() && b.min < b.max) {
                return Err(invalid("bounds", format!("bad bounds for {}", b.param)));
            }
        }
        if self.coarse_points < 3 {
            return Err(invalid("coarse_points", "need at least 3"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub params: Vec<(Param, f64)>,
    pub value: f64,
    pub report: CoolingReport,
    pub evaluations: usize,
}

struct Evaluator<'a> {
    spec: &'a OptimizeSpec,
}

impl Evaluator<'_> {
    fn report(&self, x: &[f64]) -> Option<CoolingReport> {
        let mut p = self.spec.params;
        let mut d = self.spec.drive;
        for (b, &v) in self.spec.free.iter().zip(x) {
            b.param.apply(&mut p, &mut d, v);
        }
        evaluate(&p, &d, &self.spec.options).ok()
    }

    /// Objective with infeasible points mapped to +∞.
    fn value(&self, report: Option<&CoolingReport>) -> f64 {
        let Some(r) = report else { return f64::INFINITY };
        if !is_cooling_point(r) || (self.spec.require_weak_coupling && !r.flags.weak_coupling) {
            return f64::INFINITY;
        }
        let v = match self.spec.objective {
            Objective::Exact => {
                if !r.converged {
                    return f64::INFINITY;
                }
                r.n_bf_exact
            }
            Objective::Approx => r.n_bf_approx,
        };
        v.filter(|v| v.is_finite()).unwrap_or(f64::INFINITY)
    }
}

#[derive(Clone)]
struct Sample {
    x: Vec<f64>,
    value: f64,
    report: Option<CoolingReport>,
}

/// Lower value wins; equal values go to the lexicographically lower point.
fn better(a: &Sample, b: &Sample) -> bool {
    match a.value.total_cmp(&b.value) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => {
            for (x, y) in a.x.iter().zip(&b.x) {
                match x.total_cmp(y) {
                    std::cmp::Ordering::Less => return true,
                    std::cmp::Ordering::Greater => return false,
                    std::cmp::Ordering::Equal => {}
                }
            }
            false
        }
    }
}

fn best_sample(samples: &[Sample]) -> &Sample {
    let mut best = &samples[0];
    for s in &samples[1..] {
        if better(s, best) {
            best = s;
        }
    }
    best
}

fn grid(b: &Bound, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| b.min + (b.max - b.min) * i as f64 / (n - 1) as f64)
        .collect()
}

pub fn optimize(spec: &OptimizeSpec) -> Result<Optimum> {
    spec.validate()?;
    match spec.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| ModelError::Config(e.to_string()))?
            .install(|| run(spec)),
        None => run(spec),
    }
}

fn run(spec: &OptimizeSpec) -> Result<Optimum> {
    let ev = Evaluator { spec };
    let n = spec.coarse_points;
    let axes: Vec<Vec<f64>> = spec.free.iter().map(|b| grid(b, n)).collect();
    let points: Vec<Vec<f64>> = match axes.len() {
        1 => axes[0].iter().map(|&x| vec![x]).collect(),
        _ => axes[0]
            .iter()
            .flat_map(|&x| axes[1].iter().map(move |&y| vec![x, y]))
            .collect(),
    };
    let mut samples: Vec<Sample> = points
        .into_par_iter()
        .map(|x| {
            let report = ev.report(&x);
            let value = ev.value(report.as_ref());
            Sample { x, value, report }
        })
        .collect();

    let best = best_sample(&samples);
    if !best.value.is_finite() {
        return Err(ModelError::NoFeasiblePoint);
    }

    let cells: Vec<f64> = spec.free.iter().map(|b| (b.max - b.min) / (n - 1) as f64).collect();
    let mut current = best.x.clone();
    for _round in 0..MAX_COORDINATE_ROUNDS {
        let start = current.clone();
        for k in 0..spec.free.len() {
            let b = &spec.free[k];
            let lo = (current[k] - cells[k]).max(b.min);
            let hi = (current[k] + cells[k]).min(b.max);
            golden(&ev, &current, k, lo, hi, spec.tol, &mut samples);
            current = best_sample(&samples).x.clone();
        }
        if spec.free.len() == 1 {
            break;
        }
        let moved = start.iter().zip(&current).all(|(a, c)| (a - c).abs() <= spec.tol);
        if moved {
            break;
        }
    }

    let best = best_sample(&samples).clone();
    let report = best.report.ok_or(ModelError::NoFeasiblePoint)?;
    Ok(Optimum {
        params: spec.free.iter().map(|b| b.param).zip(best.x).collect(),
        value: best.value,
        report,
        evaluations: samples.len(),
    })
}

/// Golden-section search along axis `k` inside [lo, hi]; ties move toward
/// the lower end. Every evaluation is appended to `log`.
fn golden(
    ev: &Evaluator<'_>,
    base: &[f64],
    k: usize,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    log: &mut Vec<Sample>,
) -> f64 {
    let eval = |t: f64, log: &mut Vec<Sample>| {
        let mut x = base.to_vec();
        x[k] = t;
        let report = ev.report(&x);
        let value = ev.value(report.as_ref());
        log.push(Sample { x, value, report });
        value
    };
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = eval(c, log);
    let mut fd = eval(d, log);
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = eval(c, log);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = eval(d, log);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}
