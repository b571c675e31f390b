//! Position and momentum variances as frequency integrals of the noise
//! spectra, ⟨δr²⟩ = (1/2π)∫S_r(ω)dω.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::quadrature::{integrate_panels, QuadratureResult, Tolerance};
use crate::spectrum::{Spectra, ThermalNoise};

pub const DEFAULT_REL_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_EVALUATIONS: usize = 500_000;
const SEED_MULTIPLES: [f64; 4] = [1.0, 3.0, 10.0, 30.0];
const SHELL_GROWTH: f64 = 4.0;
const MAX_SHELLS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakKind {
    Mechanical,
    Cavity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub center: f64,
    pub width: f64,
    pub kind: PeakKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSearch {
    pub peaks: Vec<Peak>,
    /// The fixed-point iteration failed and peaks came from a dense scan.
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub max_evaluations: usize,
    /// Upper frequency limit used with the quantum bath spectrum, whose
    /// ohmic growth makes the momentum integral diverge logarithmically.
    /// `None` integrates to infinity.
    pub bath_cutoff: Option<f64>,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            rel_tol: DEFAULT_REL_TOL,
            max_evaluations: DEFAULT_MAX_EVALUATIONS,
            bath_cutoff: None,
        }
    }
}

impl QuadratureOptions {
    pub fn validate(&self) -> Result<()> {
        if !(1e-12..=1e-3).contains(&self.rel_tol) {
            return Err(crate::error::invalid(
                "rel_tol",
                format!("{} outside [1e-12, 1e-3]", self.rel_tol),
            ));
        }
        if self.max_evaluations < 1000 {
            return Err(crate::error::invalid("max_evaluations", "must be at least 1000"));
        }
        if let Some(c) = self.bath_cutoff {
            if !(c > 0.0) {
                return Err(crate::error::invalid("bath_cutoff", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variances {
    pub var_x: QuadratureResult,
    pub var_p: QuadratureResult,
    pub peaks: PeakSearch,
    /// Frequency cap actually applied, if any.
    pub cutoff: Option<f64>,
}

impl Variances {
    pub fn converged(&self) -> bool {
        self.var_x.converged && self.var_p.converged
    }
}

/// Resonances of S_x: the mechanical peaks at ±ω* with ω*² = (ω_b^eff(ω*))²
/// and the broad cavity features at ±√(κ² + Δ²).
pub fn locate_peaks(spectra: &Spectra) -> PeakSearch {
    let wb = spectra.omega_b();
    let mut peaks = Vec::with_capacity(4);
    let mut fallback = false;
    match mechanical_fixed_point(spectra) {
        Some(w) => {
            let width = spectra.gamma_b_eff(w).abs().max(spectra.gamma_b().abs());
            peaks.push(Peak {
                center: w,
                width,
                kind: PeakKind::Mechanical,
            });
            peaks.push(Peak {
                center: -w,
                width,
                kind: PeakKind::Mechanical,
            });
        }
        None => {
            fallback = true;
            for p in dense_scan(spectra) {
                peaks.push(p);
                peaks.push(Peak { center: -p.center, ..p });
            }
            if peaks.is_empty() {
                let width = spectra.gamma_b_eff(wb).abs().max(spectra.gamma_b());
                peaks.push(Peak {
                    center: wb,
                    width,
                    kind: PeakKind::Mechanical,
                });
                peaks.push(Peak {
                    center: -wb,
                    width,
                    kind: PeakKind::Mechanical,
                });
            }
        }
    }
    let k = spectra.kappa();
    let d = spectra.delta();
    let cav = (k * k + d * d).sqrt();
    if cav > 0.0 && k > 0.0 {
        peaks.push(Peak {
            center: cav,
            width: k,
            kind: PeakKind::Cavity,
        });
        peaks.push(Peak {
            center: -cav,
            width: k,
            kind: PeakKind::Cavity,
        });
    }
    PeakSearch { peaks, fallback }
}

fn mechanical_fixed_point(spectra: &Spectra) -> Option<f64> {
    let wb = spectra.omega_b();
    let tol = 1e-10 * wb;
    let mut w = wb;
    for _ in 0..50 {
        let sq = spectra.omega_b_eff_sq(w);
        if !(sq > 0.0) || !sq.is_finite() {
            return None;
        }
        let next = sq.sqrt();
        if (next - w).abs() <= tol {
            return Some(next);
        }
        w = next;
    }
    None
}

/// Local maxima of S_x on a uniform positive-frequency grid, with half-width
/// read off at half maximum.
fn dense_scan(spectra: &Spectra) -> Vec<Peak> {
    let k = spectra.kappa();
    let d = spectra.delta();
    let top = 3.0 * spectra.omega_b().max((k * k + d * d).sqrt());
    let n = 20_000;
    let h = top / n as f64;
    let vals: Vec<f64> = (0..=n)
        .map(|i| {
            let v = spectra.s_x_unchecked(i as f64 * h);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        })
        .collect();
    let mut out = Vec::new();
    for i in 1..n {
        if vals[i] > vals[i - 1] && vals[i] >= vals[i + 1] && vals[i] > 0.0 {
            let half = 0.5 * vals[i];
            let mut lo = i;
            while lo > 0 && vals[lo] > half {
                lo -= 1;
            }
            let mut hi = i;
            while hi < n && vals[hi] > half {
                hi += 1;
            }
            let width = (0.5 * (hi - lo) as f64 * h).max(h);
            out.push(Peak {
                center: i as f64 * h,
                width,
                kind: PeakKind::Mechanical,
            });
        }
    }
    out
}

/// Mandatory panel edges: every peak center ± {1, 3, 10, 30} widths.
pub fn seed_points(peaks: &[Peak], lo: f64, hi: f64) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    if lo < 0.0 && hi > 0.0 {
        pts.push(0.0);
    }
    for p in peaks {
        let mut cand = vec![p.center];
        for m in SEED_MULTIPLES {
            cand.push(p.center - m * p.width);
            cand.push(p.center + m * p.width);
        }
        pts.extend(cand.into_iter().filter(|&x| x > lo && x < hi));
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Integrate `f` over the real line (or over [0, ∞) when `half_line`) and
/// divide by 2π. A core interval [−Ω0, Ω0] carries the seeded panels; shells
/// growing by 4× are added until the last one is negligible, and the
/// geometric remainder is added to the value and the error.
pub fn integrate_spectrum<F: Fn(f64) -> f64>(
    f: &F,
    peaks: &[Peak],
    omega0: f64,
    floor: f64,
    cutoff: Option<f64>,
    half_line: bool,
    opts: &QuadratureOptions,
) -> QuadratureResult {
    let rel = opts.rel_tol;
    let scale = 2.0 * PI;
    let floor_int = floor * scale;
    let cap = cutoff.unwrap_or(f64::INFINITY);
    let omega0 = omega0.min(cap);
    let lo = if half_line { 0.0 } else { -omega0 };
    let pts = seed_points(peaks, lo, omega0);
    let core_tol = Tolerance {
        abs: 0.5 * rel * floor_int,
        rel: 0.5 * rel,
    };
    let mut total = integrate_panels(f, &pts, core_tol, opts.max_evaluations);

    let mut inner = omega0;
    let mut prev_shell: Option<f64> = None;
    let mut shells_done = false;
    for _ in 0..MAX_SHELLS {
        if inner >= cap {
            shells_done = true;
            break;
        }
        let outer = (inner * SHELL_GROWTH).min(cap);
        let budget = opts.max_evaluations.saturating_sub(total.n_evaluations);
        let shell_tol = Tolerance {
            abs: 0.1 * rel * total.value.abs().max(floor_int),
            rel: 0.0,
        };
        let mut shell = integrate_panels(f, &[inner, outer], shell_tol, budget / 2);
        if !half_line {
            let left = integrate_panels(f, &[-outer, -inner], shell_tol, budget / 2);
            shell = shell.combine(left);
        }
        total = total.combine(shell);
        let contribution = shell.value.abs();
        if outer >= cap {
            shells_done = true;
            break;
        }
        if let Some(p) = prev_shell.filter(|p| *p != 0.0) {
            // Remainder extrapolated from the measured decay of the last two
            // shells, summed up to the cutoff when there is one.
            let ratio = (contribution / p.abs()).min(1.0);
            let tail = shell.value * shell_remainder(ratio, inner, outer, cap);
            let budget = 0.25 * rel * total.value.abs().max(floor_int);
            if contribution < rel * total.value.abs().max(floor_int) && tail.abs() < budget {
                total.value += tail;
                total.abs_error_estimate += tail.abs();
                shells_done = true;
                break;
            }
        }
        prev_shell = Some(shell.value);
        inner = outer;
    }
    total.converged = total.converged
        && shells_done
        && total.value.is_finite()
        && total.abs_error_estimate <= rel * total.value.abs().max(floor_int);
    total.scaled(1.0 / scale)
}

/// Sum of the shells beyond `outer` relative to the last one, for shell
/// ratio `ratio`; infinite-range sums cap the ratio at ½.
fn shell_remainder(ratio: f64, inner: f64, outer: f64, cap: f64) -> f64 {
    if cap.is_finite() {
        let k = ((cap / outer).ln() / (outer / inner).ln()).ceil().max(0.0) as i32;
        if ratio >= 1.0 {
            k as f64
        } else {
            ratio * (1.0 - ratio.powi(k)) / (1.0 - ratio)
        }
    } else {
        let r = ratio.min(0.5);
        r / (1.0 - r)
    }
}

/// ⟨δx²⟩ and ⟨δp²⟩ by quadrature of S_x and S_p = (mω)²S_x.
pub fn variances(spectra: &Spectra, opts: &QuadratureOptions) -> Result<Variances> {
    opts.validate()?;
    let peaks = locate_peaks(spectra);
    let m = spectra.mass();
    let wb = spectra.omega_b();
    let omega0 = 10.0 * wb.max(spectra.delta().abs()).max(spectra.kappa());
    let cutoff = match spectra.thermal() {
        ThermalNoise::Quantum => opts.bath_cutoff,
        ThermalNoise::White => None,
    };
    let fx = |w: f64| spectra.s_x_unchecked(w);
    let fp = |w: f64| spectra.s_p_unchecked(w);
    let var_x = integrate_spectrum(&fx, &peaks.peaks, omega0, 1.0 / (2.0 * m * wb), cutoff, false, opts);
    let var_p = integrate_spectrum(&fp, &peaks.peaks, omega0, m * wb / 2.0, cutoff, false, opts);
    for r in [&var_x, &var_p] {
        if !r.value.is_finite() {
            return Err(ModelError::SingularSusceptibility { omega: f64::NAN });
        }
    }
    Ok(Variances {
        var_x,
        var_p,
        peaks,
        cutoff,
    })
}
