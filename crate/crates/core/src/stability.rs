//! Linear stability of the fluctuation dynamics.
//!
//! The state vector is (δx, δp, δX, δY) with the cavity quadratures
//! δX = (δa + δa†)/√2 and δY = (δa − δa†)/(i√2). Stability is decided twice:
//! from the eigenvalues of the drift matrix and from the Routh table of its
//! characteristic polynomial.

use std::fmt;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::model::SystemParams;
use crate::steady_state::WorkingPoint;

/// Default half-width of the marginal band on Re λ, natural units.
pub const DEFAULT_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Marginal => "marginal",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftMatrix {
    pub matrix: Matrix4<f64>,
    /// Coefficients of det(sI − A) from s⁴ down to s⁰; the first is 1.
    pub char_poly: [f64; 5],
}

impl DriftMatrix {
    pub fn new(matrix: Matrix4<f64>) -> Self {
        let char_poly = characteristic_polynomial(&matrix);
        DriftMatrix { matrix, char_poly }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.matrix
            .complex_eigenvalues()
            .iter()
            .map(|z| Complex64::new(z.re, z.im))
            .collect()
    }
}

/// Drift matrix of the linearized Langevin equations (ħ = 1).
pub fn drift_matrix(params: &SystemParams, wp: &WorkingPoint) -> DriftMatrix {
    let m = params.mass;
    let s2 = std::f64::consts::SQRT_2;
    let ga = wp.a_mean * params.g0;
    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0,                                   1.0 / m,         0.0,           0.0,
        -m * params.omega_b * params.omega_b, -params.gamma_b,  s2 * ga.re,    s2 * ga.im,
        -s2 * ga.im,                           0.0,            -params.kappa,  wp.delta,
        s2 * ga.re,                            0.0,            -wp.delta,     -params.kappa,
    );
    DriftMatrix::new(a)
}

/// Faddeev–LeVerrier recursion for det(sI − A).
fn characteristic_polynomial(a: &Matrix4<f64>) -> [f64; 5] {
    let mut coeffs = [0.0; 5];
    coeffs[0] = 1.0;
    let mut m = Matrix4::<f64>::zeros();
    for k in 1..=4 {
        m = a * m + Matrix4::identity() * coeffs[k - 1];
        coeffs[k] = -(a * m).trace() / k as f64;
    }
    coeffs
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub verdict: Verdict,
    pub eigen_verdict: Verdict,
    pub routh_verdict: Verdict,
    pub eigenvalues: Vec<Complex64>,
    pub max_real_part: f64,
}

pub fn eigen_verdict(eigenvalues: &[Complex64], margin: f64) -> Verdict {
    let max_re = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re < -margin {
        Verdict::Stable
    } else if max_re > margin {
        Verdict::Unstable
    } else {
        Verdict::Marginal
    }
}

/// Routh–Hurwitz test on a real polynomial given from the highest power
/// down. A first-column entry that vanishes to within `rel_tol` of the terms
/// it was computed from yields `Marginal`.
pub fn routh_hurwitz(coeffs: &[f64], rel_tol: f64) -> Verdict {
    let n = coeffs.len();
    if n < 2 {
        return Verdict::Stable;
    }
    if coeffs[0] == 0.0 {
        return Verdict::Marginal;
    }
    let width = n.div_ceil(2);
    let mut prev: Vec<f64> = coeffs.iter().step_by(2).copied().collect();
    let mut cur: Vec<f64> = coeffs.iter().skip(1).step_by(2).copied().collect();
    prev.resize(width, 0.0);
    cur.resize(width, 0.0);
    let mut scale_cur = cur.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut first_column = vec![prev[0]];
    for _ in 1..n {
        let lead = cur[0];
        if lead.abs() <= rel_tol * scale_cur || lead == 0.0 {
            return Verdict::Marginal;
        }
        first_column.push(lead);
        let mut next = vec![0.0; width];
        let mut scale_next = 0.0f64;
        for j in 0..width - 1 {
            let t1 = lead * prev[j + 1];
            let t2 = prev[0] * cur[j + 1];
            next[j] = (t1 - t2) / lead;
            scale_next = scale_next.max(t1.abs().max(t2.abs()) / lead.abs());
        }
        prev = cur;
        cur = next;
        scale_cur = scale_next;
    }
    let sign_changes = first_column
        .windows(2)
        .filter(|w| w[0].signum() != w[1].signum())
        .count();
    if sign_changes == 0 {
        Verdict::Stable
    } else {
        Verdict::Unstable
    }
}

/// Both criteria must agree unless one of them sits on the boundary, in
/// which case the point is reported as marginal.
pub fn is_stable(dm: &DriftMatrix, margin: f64) -> Result<StabilityReport> {
    let eigenvalues = dm.eigenvalues();
    let max_real_part = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let eigen = eigen_verdict(&eigenvalues, margin);
    let routh = routh_hurwitz(&dm.char_poly, margin);
    let verdict = match (eigen, routh) {
        (Verdict::Marginal, _) | (_, Verdict::Marginal) => Verdict::Marginal,
        (a, b) if a == b => a,
        (a, b) => {
            return Err(ModelError::StabilityDisagreement {
                eigen: a.to_string(),
                routh: b.to_string(),
            })
        }
    };
    Ok(StabilityReport {
        verdict,
        eigen_verdict: eigen,
        routh_verdict: routh,
        eigenvalues,
        max_real_part,
    })
}

pub fn assess(params: &SystemParams, wp: &WorkingPoint, margin: f64) -> Result<StabilityReport> {
    is_stable(&drift_matrix(params, wp), margin)
}
