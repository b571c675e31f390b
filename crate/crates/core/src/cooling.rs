//! Final phonon number, effective temperature, the closed-form
//! weak-coupling approximations and regime classification.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModelError, Result};
use crate::model::{DriveParams, ParamWarning, SystemParams};
use crate::quadrature::QuadratureResult;
use crate::spectrum::{Spectra, ThermalNoise};
use crate::stability::{Verdict, DEFAULT_MARGIN};
use crate::steady_state::{solve_working_point, WorkingPoint};
use crate::variance::{variances, QuadratureOptions};

/// n = ⟨δp²⟩/(2ħmω_b) + mω_b⟨δx²⟩/(2ħ) − ½.
pub fn phonon_number(var_x: f64, var_p: f64, mass: f64, omega_b: f64) -> f64 {
    var_p / (2.0 * mass * omega_b) + mass * omega_b * var_x / 2.0 - 0.5
}

/// [`phonon_number`] that rejects results below −10·`tolerance`.
pub fn phonon_number_checked(var_x: f64, var_p: f64, mass: f64, omega_b: f64, tolerance: f64) -> Result<f64> {
    if var_x < 0.0 || var_p < 0.0 {
        return Err(invalid("variance", "variances must be non-negative"));
    }
    let n = phonon_number(var_x, var_p, mass, omega_b);
    if n < -10.0 * tolerance {
        return Err(ModelError::InconsistentVariances { n_bf: n, tolerance });
    }
    Ok(n)
}

/// T_eff = (ħω_b/k_B)/ln(1/n + 1), zero at n = 0.
pub fn effective_temperature(n_bf: f64, omega_b: f64) -> f64 {
    if n_bf <= 0.0 {
        return 0.0;
    }
    omega_b / (1.0 / n_bf).ln_1p()
}

/// ⟨δx²⟩ ≈ [S′_th(ω_b) + S′_ca(ω_b)]/(2m²ω_b²|γ_b^eff(ω_b)|) and
/// ⟨δp²⟩ = (mω_b)²⟨δx²⟩, from the symmetrized spectra.
pub fn variances_approx(spectra: &Spectra) -> Result<(f64, f64)> {
    let wb = spectra.omega_b();
    let m = spectra.mass();
    let g = spectra.gamma_b_eff(wb).abs();
    if g == 0.0 || !g.is_finite() {
        return Err(ModelError::DegenerateDamping);
    }
    let s = spectra.s_th(wb).1 + spectra.s_ca(wb).1;
    let var_x = s / (2.0 * m * m * wb * wb * g);
    Ok((var_x, (m * wb).powi(2) * var_x))
}

/// n_ca = (2N+1)(κ²+Δ²+ω_b²)/(4ω_bΔ) − ½.
pub fn n_ca(delta: f64, kappa: f64, omega_b: f64, n_cav: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(ModelError::NonPositiveDetuning { delta });
    }
    Ok((2.0 * n_cav + 1.0) * (kappa * kappa + delta * delta + omega_b * omega_b) / (4.0 * omega_b * delta) - 0.5)
}

/// The detuning √(ω_b² + κ²) minimizing n_ca, and the minimum.
pub fn n_ca_minimum(kappa: f64, omega_b: f64, n_cav: f64) -> (f64, f64) {
    let d = (omega_b * omega_b + kappa * kappa).sqrt();
    (d, ((2.0 * n_cav + 1.0) * d - omega_b) / (2.0 * omega_b))
}

/// (γ_b n_b + γ_ca n_ca)/(γ_b + γ_ca).
pub fn phonon_weighted(gamma_b: f64, n_b: f64, gamma_ca_wb: f64, n_ca: f64) -> Result<f64> {
    let total = gamma_b + gamma_ca_wb;
    if !(total > 0.0) {
        return Err(ModelError::DegenerateDamping);
    }
    Ok((gamma_b * n_b + gamma_ca_wb * n_ca) / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingLimits {
    /// N + κ²/4ω_b²
    pub resolved_sideband: f64,
    /// κ/2ω_b
    pub doppler: f64,
    /// ω_a/ω_b, the reduction T/T_eff in the classical limit.
    pub classical_ratio: f64,
    pub optimal_delta: f64,
    pub n_ca_minimum: f64,
}

pub fn cooling_limits(params: &SystemParams) -> CoolingLimits {
    let n = params.occupations().n_cav;
    let (optimal_delta, n_ca_minimum) = n_ca_minimum(params.kappa, params.omega_b, n);
    CoolingLimits {
        resolved_sideband: n + params.kappa.powi(2) / (4.0 * params.omega_b.powi(2)),
        doppler: params.kappa / (2.0 * params.omega_b),
        classical_ratio: params.omega_a / params.omega_b,
        optimal_delta,
        n_ca_minimum,
    }
}

/// Numeric meaning of "≫" and "≪" and the other regime cut-offs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub much_greater: f64,
    pub much_less: f64,
    pub high_q_cavity: f64,
    pub min_amplitude: f64,
    pub rwa_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            much_greater: 10.0,
            much_less: 0.1,
            high_q_cavity: 0.01,
            min_amplitude: 10.0,
            rwa_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeFlags {
    pub stable: bool,
    pub weak_coupling: bool,
    pub high_quality_cavity: bool,
    pub condition_20: bool,
    pub condition_22: bool,
    pub rwa_ok: bool,
    pub linearization_ok: bool,
}

pub fn classify_regime(
    params: &SystemParams,
    drive: &DriveParams,
    wp: &WorkingPoint,
    gamma_ca_wb: f64,
    stable: bool,
    thresholds: &Thresholds,
) -> RegimeFlags {
    let wb = params.omega_b;
    let k = params.kappa;
    let gamma_eff = (params.gamma_b + gamma_ca_wb).abs();
    let weak_coupling = gamma_eff < k.min(wb);
    let occ = params.occupations();
    let condition_22 = match n_ca(wp.delta, k, wb, occ.n_cav) {
        Ok(nca) => params.gamma_b * occ.n_mech < thresholds.much_less * gamma_ca_wb * nca,
        Err(_) => false,
    };
    RegimeFlags {
        stable,
        weak_coupling,
        high_quality_cavity: k * k < thresholds.high_q_cavity * wb * wb,
        condition_20: gamma_ca_wb > thresholds.much_greater * params.gamma_b && weak_coupling,
        condition_22,
        rwa_ok: drive.epsilon.norm() < thresholds.rwa_fraction * params.omega_a,
        linearization_ok: wp.a_mean.norm() > thresholds.min_amplitude,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub quadrature: QuadratureOptions,
    pub margin: f64,
    pub thresholds: Thresholds,
    pub thermal: ThermalNoise,
    /// Skip the quadrature; only closed forms are filled in.
    pub approx_only: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            quadrature: QuadratureOptions::default(),
            margin: DEFAULT_MARGIN,
            thresholds: Thresholds::default(),
            thermal: ThermalNoise::Quantum,
            approx_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingReport {
    pub delta: f64,
    pub delta0: f64,
    pub cavity_amplitude: f64,
    pub stability: Verdict,
    /// None when unstable or when only closed forms were requested.
    pub var_x: Option<f64>,
    pub var_p: Option<f64>,
    pub n_bf_exact: Option<f64>,
    pub var_x_approx: Option<f64>,
    pub n_bf_approx: Option<f64>,
    /// The closed forms assume a stable, weakly coupled oscillator.
    pub n_bf_approx_valid: bool,
    pub t_eff: Option<f64>,
    /// T_eff is only meaningful in the weak-coupling limit.
    pub t_eff_valid: bool,
    pub t_eff_approx: Option<f64>,
    pub n_ca: Option<f64>,
    pub n_b: f64,
    pub n_cav: f64,
    pub gamma_ca_at_wb: f64,
    pub gamma_b_eff_at_wb: f64,
    pub omega_b_eff_sq_at_wb: f64,
    pub equipartition_ratio: Option<f64>,
    pub quadrature_error_x: Option<f64>,
    pub quadrature_error_p: Option<f64>,
    pub n_evaluations: usize,
    pub converged: bool,
    pub peak_scan_fallback: bool,
    pub flags: RegimeFlags,
    pub warnings: Vec<ParamWarning>,
}

/// Steady state, stability, exact and approximate variances, and flags for
/// one parameter point.
pub fn evaluate(params: &SystemParams, drive: &DriveParams, opts: &EvalOptions) -> Result<CoolingReport> {
    let mut warnings = params.validate()?;
    warnings.extend(drive.validate(params)?);
    let ss = solve_working_point(params, drive, opts.margin)?;
    let wp = ss.principal;
    let stable = ss.principal_stability == Verdict::Stable;
    let spectra = Spectra::new(params, &wp).with_thermal(opts.thermal);
    let wb = params.omega_b;
    let m = params.mass;
    let occ = params.occupations();
    let gamma_ca_wb = spectra.gamma_ca(wb);
    let flags = classify_regime(params, drive, &wp, gamma_ca_wb, stable, &opts.thresholds);

    let approx = variances_approx(&spectra).ok();
    let n_bf_approx = approx.map(|(vx, vp)| phonon_number(vx, vp, m, wb));

    let mut var_x = None;
    let mut var_p = None;
    let mut n_bf_exact = None;
    let mut err_x = None;
    let mut err_p = None;
    let mut n_evaluations = 0;
    let mut converged = true;
    let mut fallback = false;
    if stable && !opts.approx_only {
        let mut q = opts.quadrature;
        if q.bath_cutoff.is_none() {
            q.bath_cutoff = Some(params.omega_a);
        }
        let v = variances(&spectra, &q)?;
        let (rx, rp): (QuadratureResult, QuadratureResult) = (v.var_x, v.var_p);
        let tol = rp.abs_error_estimate / (2.0 * m * wb) + m * wb * rx.abs_error_estimate / 2.0;
        n_bf_exact = Some(phonon_number_checked(rx.value, rp.value, m, wb, tol.max(q.rel_tol))?);
        var_x = Some(rx.value);
        var_p = Some(rp.value);
        err_x = Some(rx.abs_error_estimate);
        err_p = Some(rp.abs_error_estimate);
        n_evaluations = rx.n_evaluations + rp.n_evaluations;
        converged = v.converged();
        fallback = v.peaks.fallback;
    }
    let equipartition_ratio = match (var_x, var_p) {
        (Some(x), Some(p)) => Some(p / ((m * wb).powi(2) * x)),
        _ => None,
    };
    Ok(CoolingReport {
        delta: wp.delta,
        delta0: wp.delta0,
        cavity_amplitude: wp.a_mean.norm(),
        stability: ss.principal_stability,
        var_x,
        var_p,
        n_bf_exact,
        var_x_approx: approx.map(|a| a.0),
        n_bf_approx,
        n_bf_approx_valid: stable && flags.weak_coupling,
        t_eff: n_bf_exact.map(|n| effective_temperature(n, wb)),
        t_eff_valid: stable && flags.weak_coupling,
        t_eff_approx: n_bf_approx.map(|n| effective_temperature(n, wb)),
        n_ca: n_ca(wp.delta, params.kappa, wb, occ.n_cav).ok(),
        n_b: occ.n_mech,
        n_cav: occ.n_cav,
        gamma_ca_at_wb: gamma_ca_wb,
        gamma_b_eff_at_wb: params.gamma_b + gamma_ca_wb,
        omega_b_eff_sq_at_wb: spectra.omega_b_eff_sq(wb),
        equipartition_ratio,
        quadrature_error_x: err_x,
        quadrature_error_p: err_p,
        n_evaluations,
        converged,
        peak_scan_fallback: fallback,
        flags,
        warnings,
    })
}
