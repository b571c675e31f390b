//! Classical working point: the self-consistent cavity amplitude, mechanical
//! displacement and effective detuning.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Detuning, DriveParams, SystemParams};
use crate::stability::{self, Verdict};

/// Below this amplitude the linearization about ⟨a⟩ is flagged.
pub const MIN_LINEARIZABLE_AMPLITUDE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Δ solved self-consistently from a prescribed Δ0.
    GivenDelta0,
    /// Δ prescribed, Δ0 back-computed.
    GivenDelta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkingPoint {
    /// Effective detuning Δ = Δ0 − g0⟨x⟩.
    pub delta: f64,
    pub delta0: f64,
    pub a_mean: Complex64,
    pub x_mean: f64,
    /// |g0⟨a⟩|.
    pub g_eff: f64,
    pub mode: SolveMode,
}

/// ⟨a⟩ = ε/(κ + iΔ).
pub fn cavity_amplitude(epsilon: Complex64, kappa: f64, delta: f64) -> Complex64 {
    epsilon / Complex64::new(kappa, delta)
}

impl WorkingPoint {
    /// Working point at a prescribed effective detuning.
    pub fn from_effective_detuning(params: &SystemParams, drive: &DriveParams) -> WorkingPoint {
        let delta = drive.detuning.value();
        let mut wp = Self::at(params, drive.epsilon, delta, SolveMode::GivenDelta);
        wp.delta0 = delta + params.g0 * wp.x_mean;
        wp
    }

    fn at(params: &SystemParams, epsilon: Complex64, delta: f64, mode: SolveMode) -> WorkingPoint {
        let a_mean = cavity_amplitude(epsilon, params.kappa, delta);
        let x_mean = params.g0 * (a_mean.norm_sqr() + 0.5) / (params.mass * params.omega_b.powi(2));
        WorkingPoint {
            delta,
            delta0: delta + params.g0 * x_mean,
            a_mean,
            x_mean,
            g_eff: (params.g0 * a_mean).norm(),
            mode,
        }
    }

    /// |g0⟨a⟩|².
    pub fn coupling_sq(&self) -> f64 {
        self.g_eff * self.g_eff
    }

    pub fn linearization_ok(&self) -> bool {
        self.a_mean.norm() > MIN_LINEARIZABLE_AMPLITUDE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyBranch {
    pub point: WorkingPoint,
    pub stability: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyState {
    pub principal: WorkingPoint,
    pub principal_stability: Verdict,
    /// Every real solution, largest Δ first.
    pub branches: Vec<SteadyBranch>,
    /// More than one stable branch coexists.
    pub multistable: bool,
    pub linearization_ok: bool,
}

/// Solves the steady state for the drive's detuning specification.
///
/// For a prescribed Δ0 the fixed point
/// Δ = Δ0 − c(|ε|²/(κ²+Δ²) + ½), c = ħg0²/(mω_b²),
/// is the cubic (Δ0 − c/2 − Δ)(κ² + Δ²) = c|ε|². Its principal root is the
/// branch continued from Δ0 − c/2 while the drive is ramped up from zero;
/// since the right-hand side only grows, that branch is always the largest
/// real root (it disappears only at a fold, after which the single
/// remaining root is also the largest).
pub fn solve_working_point(params: &SystemParams, drive: &DriveParams, margin: f64) -> Result<SteadyState> {
    params.validate()?;
    drive.validate(params)?;
    match drive.detuning {
        Detuning::Effective(_) => {
            let wp = WorkingPoint::from_effective_detuning(params, drive);
            let verdict = stability::assess(params, &wp, margin)?.verdict;
            Ok(SteadyState {
                principal: wp,
                principal_stability: verdict,
                branches: vec![SteadyBranch {
                    point: wp,
                    stability: verdict,
                }],
                multistable: false,
                linearization_ok: wp.linearization_ok(),
            })
        }
        Detuning::Bare(delta0) => {
            let roots = effective_detuning_roots(params, drive.epsilon.norm(), delta0);
            assert!(!roots.is_empty(), "a real cubic always has a real root");
            let mut branches = Vec::with_capacity(roots.len());
            for delta in roots {
                let mut wp = WorkingPoint::at(params, drive.epsilon, delta, SolveMode::GivenDelta0);
                wp.delta0 = delta0;
                let verdict = stability::assess(params, &wp, margin)?.verdict;
                branches.push(SteadyBranch {
                    point: wp,
                    stability: verdict,
                });
            }
            let stable_count = branches.iter().filter(|b| b.stability == Verdict::Stable).count();
            let principal = branches[0].point;
            Ok(SteadyState {
                principal,
                principal_stability: branches[0].stability,
                multistable: stable_count > 1,
                linearization_ok: principal.linearization_ok(),
                branches,
            })
        }
    }
}

/// Real roots Δ of the steady-state cubic, sorted in decreasing order.
pub fn effective_detuning_roots(params: &SystemParams, eps_abs: f64, delta0: f64) -> Vec<f64> {
    let c = params.shift_per_photon();
    let k2 = params.kappa * params.kappa;
    let shifted = delta0 - 0.5 * c;
    let drive_term = c * eps_abs * eps_abs;
    // Δ³ − D′Δ² + κ²Δ + (c|ε|² − D′κ²) = 0
    let coeffs = [-shifted, k2, drive_term - shifted * k2];
    let mut roots = real_cubic_roots(coeffs[0], coeffs[1], coeffs[2]);
    let f = |x: f64| ((x + coeffs[0]) * x + coeffs[1]) * x + coeffs[2];
    let df = |x: f64| (3.0 * x + 2.0 * coeffs[0]) * x + coeffs[1];
    for r in roots.iter_mut() {
        for _ in 0..8 {
            let d = df(*r);
            if d == 0.0 {
                break;
            }
            let step = f(*r) / d;
            let next = *r - step;
            if !next.is_finite() || f(next).abs() > f(*r).abs() {
                break;
            }
            *r = next;
            if step.abs() <= 1e-16 * r.abs().max(1e-300) {
                break;
            }
        }
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    let scale = shifted.abs().max(params.kappa).max(params.omega_b);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * scale);
    roots
}

/// Real roots of x³ + b x² + c x + d.
fn real_cubic_roots(b: f64, c: f64, d: f64) -> Vec<f64> {
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc > 0.0 {
        let a = -q.signum() * (q.abs() / 2.0 + disc.sqrt()).cbrt();
        let t = if a != 0.0 { a - p / (3.0 * a) } else { 0.0 };
        vec![t - shift]
    } else if p == 0.0 {
        vec![-shift]
    } else {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift)
            .collect()
    }
}
