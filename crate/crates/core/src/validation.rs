//! Self-consistency checks run by `tlrcool validate`: the covariance oracle
//! against quadrature, the two stability tests against each other, and the
//! algebraic identities between equivalent closed forms.

use serde::{Deserialize, Serialize};

use crate::cooling::{effective_temperature, n_ca, phonon_number, phonon_weighted, variances_approx, EvalOptions};
use crate::error::Result;
use crate::lyapunov::{compare_with_quadrature, covariance_at, FullCothComparison};
use crate::model::{bose_einstein, DriveParams, SystemParams};
use crate::spectrum::Spectra;
use crate::stability::{assess, Verdict};
use crate::steady_state::solve_working_point;

/// Relative tolerance for identities between algebraically equal forms.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Relative tolerance of the oracle comparison.
pub const ORACLE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            pass,
            detail: detail.into(),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Frequencies on which the identities are probed: a uniform grid over
/// [−10Δ, 10Δ] that skips ω = 0.
fn probe_grid(delta: f64) -> Vec<f64> {
    let span = 10.0 * delta.abs().max(1.0);
    (0..200)
        .map(|i| -span + 2.0 * span * (i as f64 + 0.5) / 200.0)
        .collect()
}

pub fn run_checks(params: &SystemParams, drive: &DriveParams, opts: &EvalOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let ss = solve_working_point(params, drive, opts.margin)?;
    let wp = ss.principal;
    let st = assess(params, &wp, opts.margin)?;
    checks.push(Check::new(
        "stability_methods_agree",
        st.eigen_verdict == st.routh_verdict,
        format!(
            "eigenvalues: {}, Routh-Hurwitz: {}, max Re λ = {:e}",
            st.eigen_verdict, st.routh_verdict, st.max_real_part
        ),
    ));
    let stable = st.verdict == Verdict::Stable;
    checks.push(Check::new(
        "working_point_stable",
        stable,
        format!("verdict {}", st.verdict),
    ));

    let spectra = Spectra::new(params, &wp).with_thermal(opts.thermal);
    let grid = probe_grid(wp.delta);

    let mut worst_factor = 0.0f64;
    let mut min_factor = f64::INFINITY;
    for &w in &grid {
        let direct = spectra.cavity_response(w).norm_sqr();
        let factor = spectra.cavity_factor(w);
        min_factor = min_factor.min(factor);
        worst_factor = worst_factor.max(rel(direct, factor));
    }
    checks.push(Check::new(
        "cavity_factor_identity",
        worst_factor < IDENTITY_TOL && (params.kappa <= 0.0 || min_factor > 0.0),
        format!("max rel deviation {worst_factor:e}, min factor {min_factor:e}"),
    ));

    let mut worst_chi = 0.0f64;
    let mut worst_sca = 0.0f64;
    for &w in &grid {
        if let (Ok(a), Ok(b)) = (spectra.chi_eff(w), spectra.chi_eff_reduced(w)) {
            worst_chi = worst_chi.max((a - b).norm() / a.norm().max(b.norm()));
        }
        let (s, _) = spectra.s_ca(w);
        worst_sca = worst_sca.max(rel(s, spectra.s_ca_via_c(w)));
        if let Some(g) = spectra.s_ca_via_gamma(w) {
            worst_sca = worst_sca.max(rel(s, g));
        }
    }
    checks.push(Check::new(
        "susceptibility_forms_agree",
        worst_chi < IDENTITY_TOL,
        format!("max rel deviation {worst_chi:e}"),
    ));
    checks.push(Check::new(
        "cavity_noise_forms_agree",
        worst_sca < IDENTITY_TOL,
        format!("max rel deviation {worst_sca:e}"),
    ));

    let occ = params.occupations();
    if let Ok((vx, vp)) = variances_approx(&spectra) {
        let n_approx = phonon_number(vx, vp, params.mass, params.omega_b);
        match n_ca(wp.delta, params.kappa, params.omega_b, occ.n_cav) {
            Ok(nca) => {
                let gca = spectra.gamma_ca(params.omega_b);
                if let Ok(nw) = phonon_weighted(params.gamma_b, occ.n_mech, gca, nca) {
                    checks.push(Check::new(
                        "weighted_occupation_identity",
                        rel(n_approx, nw) < 1e-8,
                        format!("from spectra {n_approx:.10e}, weighted {nw:.10e}"),
                    ));
                    let (lo, hi) = (occ.n_mech.min(nca), occ.n_mech.max(nca));
                    let slack = 1e-9 * hi.max(1.0);
                    checks.push(Check::new(
                        "convex_combination_bound",
                        n_approx >= lo - slack && n_approx <= hi + slack,
                        format!("{lo:e} <= {n_approx:e} <= {hi:e}"),
                    ));
                }
            }
            Err(e) => checks.push(Check::new(
                "weighted_occupation_identity",
                true,
                format!("skipped: {e}"),
            )),
        }
    }

    let n = if occ.n_mech > 0.0 { occ.n_mech } else { 0.1 };
    let t = effective_temperature(n, params.omega_b);
    let back = bose_einstein(params.omega_b, t);
    checks.push(Check::new(
        "temperature_round_trip",
        rel(back, n) < 1e-12,
        format!("n = {n:e} -> T = {t:e} -> n = {back:e}"),
    ));

    if stable {
        let cov = covariance_at(params, &wp)?;
        checks.push(Check::new(
            "covariance_uncertainty",
            cov.satisfies_uncertainty(1e-9) && cov.residual < 1e-10,
            format!(
                "det V_b = {:e}, det V_a = {:e}, residual {:e}",
                cov.mechanical_determinant(),
                cov.cavity_determinant(),
                cov.residual
            ),
        ));
        let mut quad = opts.quadrature;
        if quad.bath_cutoff.is_none() {
            quad.bath_cutoff = Some(params.omega_a);
        }
        let cmp = compare_with_quadrature(params, &wp, ORACLE_TOL, &quad)?;
        let w = &cmp.white;
        checks.push(Check::new(
            "oracle_white_bath",
            w.pass,
            format!(
                "rel deviation x {:e}, p {:e} (tol {:e})",
                w.deviation_x, w.deviation_p, w.tolerance
            ),
        ));
        match &cmp.full_coth {
            FullCothComparison::Compared(c) => checks.push(Check::new(
                "oracle_quantum_bath_hot_limit",
                c.pass,
                format!(
                    "rel deviation x {:e}, p {:e} (tol {:e})",
                    c.deviation_x, c.deviation_p, c.tolerance
                ),
            )),
            FullCothComparison::NotApplicable { reason } => checks.push(Check::new(
                "oracle_quantum_bath_hot_limit",
                true,
                format!("skipped: {reason}"),
            )),
        }
    }
    Ok(checks)
}
