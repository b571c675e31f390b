//! Stationary covariance of the linearized fluctuations from the algebraic
//! Lyapunov equation A·V + V·Aᵀ + D = 0, with the mechanical force treated as
//! white noise.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::model::SystemParams;
use crate::spectrum::{Spectra, ThermalNoise};
use crate::stability::{drift_matrix, is_stable, DriftMatrix, Verdict, DEFAULT_MARGIN};
use crate::steady_state::WorkingPoint;
use crate::variance::{variances, QuadratureOptions};

/// Minimum k_BT/ħω_b for comparing the colored bath against the white oracle.
pub const FULL_COTH_MIN_TEMPERATURE: f64 = 100.0;

/// Symmetrized second moments of (δx, δp, δX, δY).
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub matrix: Matrix4<f64>,
    pub residual: f64,
}

impl CovarianceMatrix {
    pub fn var_x(&self) -> f64 {
        self.matrix[(0, 0)]
    }

    pub fn var_p(&self) -> f64 {
        self.matrix[(1, 1)]
    }

    pub fn mechanical_determinant(&self) -> f64 {
        Matrix2::new(
            self.matrix[(0, 0)],
            self.matrix[(0, 1)],
            self.matrix[(1, 0)],
            self.matrix[(1, 1)],
        )
        .determinant()
    }

    pub fn cavity_determinant(&self) -> f64 {
        Matrix2::new(
            self.matrix[(2, 2)],
            self.matrix[(2, 3)],
            self.matrix[(3, 2)],
            self.matrix[(3, 3)],
        )
        .determinant()
    }

    /// det of each conjugate block ≥ ¼ (ħ = 1), within `tol` relative.
    pub fn satisfies_uncertainty(&self, tol: f64) -> bool {
        self.mechanical_determinant() >= 0.25 * (1.0 - tol) && self.cavity_determinant() >= 0.25 * (1.0 - tol)
    }
}

/// D = diag(0, 2γ_b m T, κ(2N+1), κ(2N+1)).
pub fn diffusion_matrix(params: &SystemParams) -> Matrix4<f64> {
    let n = params.occupations().n_cav;
    let cav = params.kappa * (2.0 * n + 1.0);
    Matrix4::from_diagonal(&nalgebra::Vector4::new(
        0.0,
        2.0 * params.gamma_b * params.mass * params.temperature,
        cav,
        cav,
    ))
}

/// Solves A·V + V·Aᵀ + D = 0 through the vectorized form
/// (I⊗A + A⊗I)·vec(V) = −vec(D).
pub fn lyapunov_covariance(dm: &DriftMatrix, diffusion: &Matrix4<f64>) -> Result<CovarianceMatrix> {
    let report = is_stable(dm, DEFAULT_MARGIN)?;
    if report.verdict != Verdict::Stable {
        return Err(ModelError::NoStationaryState);
    }
    let a = &dm.matrix;
    let mut k = DMatrix::<f64>::zeros(16, 16);
    // vec is column-major: index i + 4j holds V[i, j].
    for i in 0..4 {
        for j in 0..4 {
            let row = i + 4 * j;
            for l in 0..4 {
                k[(row, l + 4 * j)] += a[(i, l)];
                k[(row, i + 4 * l)] += a[(j, l)];
            }
        }
    }
    let rhs = DVector::from_iterator(16, diffusion.iter().map(|d| -d));
    let sol = k.lu().solve(&rhs).ok_or(ModelError::NoStationaryState)?;
    let mut v = Matrix4::from_column_slice(sol.as_slice());
    v = 0.5 * (v + v.transpose());
    let res = a * v + v * a.transpose() + diffusion;
    let residual = res.norm() / diffusion.norm().max(f64::MIN_POSITIVE);
    Ok(CovarianceMatrix { matrix: v, residual })
}

pub fn covariance_at(params: &SystemParams, wp: &WorkingPoint) -> Result<CovarianceMatrix> {
    lyapunov_covariance(&drift_matrix(params, wp), &diffusion_matrix(params))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentComparison {
    pub var_x_oracle: f64,
    pub var_p_oracle: f64,
    pub var_x_quadrature: f64,
    pub var_p_quadrature: f64,
    pub deviation_x: f64,
    pub deviation_p: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl MomentComparison {
    fn new(oracle: (f64, f64), quad: (f64, f64), tolerance: f64) -> Self {
        let dx = ((quad.0 - oracle.0) / oracle.0).abs();
        let dp = ((quad.1 - oracle.1) / oracle.1).abs();
        MomentComparison {
            var_x_oracle: oracle.0,
            var_p_oracle: oracle.1,
            var_x_quadrature: quad.0,
            var_p_quadrature: quad.1,
            deviation_x: dx,
            deviation_p: dp,
            tolerance,
            pass: dx < tolerance && dp < tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FullCothComparison {
    Compared(MomentComparison),
    NotApplicable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub residual: f64,
    pub uncertainty_ok: bool,
    pub white: MomentComparison,
    pub full_coth: FullCothComparison,
}

impl OracleComparison {
    pub fn pass(&self) -> bool {
        let coth_ok = match &self.full_coth {
            FullCothComparison::Compared(c) => c.pass,
            FullCothComparison::NotApplicable { .. } => true,
        };
        self.white.pass && coth_ok && self.uncertainty_ok && self.residual < 1e-10
    }
}

/// Oracle against quadrature: white bath in both (tolerance `rel_tol`), and
/// the colored bath against the oracle at 1% when k_BT ≫ ħω_b.
pub fn compare_with_quadrature(
    params: &SystemParams,
    wp: &WorkingPoint,
    rel_tol: f64,
    quad: &QuadratureOptions,
) -> Result<OracleComparison> {
    let cov = covariance_at(params, wp)?;
    let oracle = (cov.var_x(), cov.var_p());
    let spectra = Spectra::new(params, wp);
    let white = variances(&spectra.with_thermal(ThermalNoise::White), quad)?;
    let white = MomentComparison::new(oracle, (white.var_x.value, white.var_p.value), rel_tol);
    let full_coth = if params.temperature / params.omega_b > FULL_COTH_MIN_TEMPERATURE {
        let v = variances(&spectra, quad)?;
        FullCothComparison::Compared(MomentComparison::new(oracle, (v.var_x.value, v.var_p.value), 1e-2))
    } else {
        FullCothComparison::NotApplicable {
            reason: format!(
                "k_BT/hbar omega_b = {} is not above {}",
                params.temperature / params.omega_b,
                FULL_COTH_MIN_TEMPERATURE
            ),
        }
    };
    Ok(OracleComparison {
        residual: cov.residual,
        uncertainty_ok: cov.satisfies_uncertainty(1e-9),
        white,
        full_coth,
    })
}
