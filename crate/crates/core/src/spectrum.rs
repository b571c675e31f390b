//! Frequency-domain response of the mechanical resonator: susceptibility,
//! induced damping and frequency shift, and the thermal and cavity-induced
//! noise spectra (ħ = k_B = 1).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::model::SystemParams;
use crate::steady_state::WorkingPoint;

/// Mechanical bath model used in the thermal force spectrum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermalNoise {
    /// ħγ_b m ω [1 + coth(ħω/2k_BT)], the colored quantum spectrum.
    #[default]
    Quantum,
    /// White force noise 2γ_b m k_BT, its ω → 0 value.
    White,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralIntermediates {
    /// B(ω) = m(ω_b² − ω² + iγ_bω)[(κ+iω)² + Δ²] − 2ħ|g0⟨a⟩|²Δ
    pub b_of_omega: Complex64,
    /// C(ω) = ħ√(2κ) g0⟨a⟩[κ + i(ω+Δ)]
    pub c_of_omega: Complex64,
    /// |(κ+iω)² + Δ²|²
    pub cavity_factor: f64,
}

/// Every frequency-resolved quantity at one ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub omega: f64,
    pub s_x: f64,
    pub s_p: f64,
    pub s_th: f64,
    pub s_th_sym: f64,
    pub s_ca: f64,
    pub s_ca_sym: f64,
    pub chi_eff: Complex64,
    pub gamma_ca: f64,
    /// (ω_b^eff)², kept signed.
    pub omega_b_eff_sq: f64,
    pub gamma_b_eff: f64,
}

/// Spectral evaluator for one working point. Cheap to build and `Sync`,
/// so a single instance can serve concurrent quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectra {
    mass: f64,
    omega_b: f64,
    gamma_b: f64,
    kappa: f64,
    delta: f64,
    temperature: f64,
    a_mean: Complex64,
    g0: f64,
    coupling_sq: f64,
    n_cav: f64,
    thermal: ThermalNoise,
}

impl Spectra {
    pub fn new(params: &SystemParams, wp: &WorkingPoint) -> Self {
        Spectra {
            mass: params.mass,
            omega_b: params.omega_b,
            gamma_b: params.gamma_b,
            kappa: params.kappa,
            delta: wp.delta,
            temperature: params.temperature,
            a_mean: wp.a_mean,
            g0: params.g0,
            coupling_sq: wp.coupling_sq(),
            n_cav: params.occupations().n_cav,
            thermal: ThermalNoise::Quantum,
        }
    }

    pub fn with_thermal(mut self, thermal: ThermalNoise) -> Self {
        self.thermal = thermal;
        self
    }

    pub fn thermal(&self) -> ThermalNoise {
        self.thermal
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn omega_b(&self) -> f64 {
        self.omega_b
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn gamma_b(&self) -> f64 {
        self.gamma_b
    }

    /// (κ + iω)² + Δ²
    pub fn cavity_response(&self, omega: f64) -> Complex64 {
        let k = self.kappa;
        Complex64::new(k * k - omega * omega + self.delta * self.delta, 2.0 * k * omega)
    }

    /// (κ² + Δ² − ω²)² + 4κ²ω², written out rather than via |·|².
    pub fn cavity_factor(&self, omega: f64) -> f64 {
        let k = self.kappa;
        let re = k * k + self.delta * self.delta - omega * omega;
        re * re + 4.0 * k * k * omega * omega
    }

    pub fn intermediates(&self, omega: f64) -> SpectralIntermediates {
        let cav = self.cavity_response(omega);
        let mech = Complex64::new(self.omega_b * self.omega_b - omega * omega, self.gamma_b * omega);
        let b = self.mass * mech * cav - 2.0 * self.coupling_sq * self.delta;
        let c = (2.0 * self.kappa).sqrt() * self.g0 * self.a_mean * Complex64::new(self.kappa, omega + self.delta);
        SpectralIntermediates {
            b_of_omega: b,
            c_of_omega: c,
            cavity_factor: self.cavity_factor(omega),
        }
    }

    /// γ_ca(ω) = 4ħ|g0⟨a⟩|²κΔ / (m|(κ+iω)² + Δ²|²)
    pub fn gamma_ca(&self, omega: f64) -> f64 {
        4.0 * self.coupling_sq * self.kappa * self.delta / (self.mass * self.cavity_factor(omega))
    }

    pub fn gamma_b_eff(&self, omega: f64) -> f64 {
        self.gamma_b + self.gamma_ca(omega)
    }

    /// (ω_b^eff)² = ω_b² − (κ² − ω² + Δ²)γ_ca(ω)/(2κ), may be negative.
    pub fn omega_b_eff_sq(&self, omega: f64) -> f64 {
        let k = self.kappa;
        let bracket = k * k - omega * omega + self.delta * self.delta;
        if bracket == 0.0 {
            return self.omega_b * self.omega_b;
        }
        self.omega_b * self.omega_b - bracket * self.gamma_ca(omega) / (2.0 * k)
    }

    /// χ_eff = [(κ+iω)² + Δ²]/B(ω).
    pub fn chi_eff(&self, omega: f64) -> Result<Complex64> {
        let b = self.intermediates(omega).b_of_omega;
        if b.norm_sqr() == 0.0 || !b.re.is_finite() || !b.im.is_finite() {
            return Err(ModelError::SingularSusceptibility { omega });
        }
        Ok(self.cavity_response(omega) / b)
    }

    /// χ_eff = 1/(m[(ω_b^eff)² − ω² + iωγ_b^eff]).
    pub fn chi_eff_reduced(&self, omega: f64) -> Result<Complex64> {
        let denom = self.mass
            * Complex64::new(
                self.omega_b_eff_sq(omega) - omega * omega,
                omega * self.gamma_b_eff(omega),
            );
        if denom.norm_sqr() == 0.0 {
            return Err(ModelError::SingularSusceptibility { omega });
        }
        Ok(1.0 / denom)
    }

    /// Thermal force spectrum: (unsymmetrized, symmetrized).
    pub fn s_th(&self, omega: f64) -> (f64, f64) {
        let pref = self.gamma_b * self.mass;
        let t = self.temperature;
        match self.thermal {
            ThermalNoise::White => {
                let v = 2.0 * pref * t;
                (v, v)
            }
            ThermalNoise::Quantum => {
                // ω[1 + coth(ω/2T)] = 2ω/(1 − e^{−ω/T}), computed with expm1.
                let factor = if t <= 0.0 {
                    if omega > 0.0 {
                        2.0 * omega
                    } else {
                        0.0
                    }
                } else if omega == 0.0 {
                    2.0 * t
                } else {
                    let x = -omega / t;
                    if x > 700.0 {
                        0.0
                    } else {
                        -2.0 * omega / x.exp_m1()
                    }
                };
                let unsym = pref * factor;
                (unsym, unsym - pref * omega)
            }
        }
    }

    /// Cavity-induced force spectrum: (unsymmetrized, symmetrized).
    pub fn s_ca(&self, omega: f64) -> (f64, f64) {
        let k = self.kappa;
        let d = self.delta;
        let pref = 2.0 * self.coupling_sq * k / self.cavity_factor(omega);
        let sym = pref * (2.0 * self.n_cav + 1.0) * (k * k + d * d + omega * omega);
        (sym + pref * 2.0 * omega * d, sym)
    }

    /// S_ca = mħ[(2N+1)(κ²+Δ²+ω²)/(2Δ) + ω]γ_ca(ω); undefined at Δ = 0.
    pub fn s_ca_via_gamma(&self, omega: f64) -> Option<f64> {
        if self.delta == 0.0 {
            return None;
        }
        let k = self.kappa;
        let d = self.delta;
        let bracket = (2.0 * self.n_cav + 1.0) * (k * k + d * d + omega * omega) / (2.0 * d) + omega;
        Some(self.mass * bracket * self.gamma_ca(omega))
    }

    /// S_ca = [(N+1)|C(ω)|² + N|C(−ω)|²] / |(κ+iω)² + Δ²|².
    pub fn s_ca_via_c(&self, omega: f64) -> f64 {
        let cp = self.intermediates(omega).c_of_omega.norm_sqr();
        let cm = self.intermediates(-omega).c_of_omega.norm_sqr();
        ((self.n_cav + 1.0) * cp + self.n_cav * cm) / self.cavity_factor(omega)
    }

    /// |χ_eff|² from the cavity factor and |B|², used on the hot path.
    fn chi_sq(&self, omega: f64) -> f64 {
        let b = self.intermediates(omega).b_of_omega.norm_sqr();
        self.cavity_factor(omega) / b
    }

    /// S_x = |χ_eff|²[S_th + S_ca]. Returns NaN or ∞ where B(ω) vanishes.
    pub fn s_x_unchecked(&self, omega: f64) -> f64 {
        self.chi_sq(omega) * (self.s_th(omega).0 + self.s_ca(omega).0)
    }

    pub fn s_x(&self, omega: f64) -> Result<f64> {
        let v = self.s_x_unchecked(omega);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ModelError::SingularSusceptibility { omega })
        }
    }

    /// S_p = (ωm)² S_x.
    pub fn s_p(&self, omega: f64) -> Result<f64> {
        Ok((omega * self.mass).powi(2) * self.s_x(omega)?)
    }

    pub fn s_p_unchecked(&self, omega: f64) -> f64 {
        (omega * self.mass).powi(2) * self.s_x_unchecked(omega)
    }

    pub fn sample(&self, omega: f64) -> Result<SpectrumSample> {
        let chi = self.chi_eff(omega)?;
        let (s_th, s_th_sym) = self.s_th(omega);
        let (s_ca, s_ca_sym) = self.s_ca(omega);
        let s_x = chi.norm_sqr() * (s_th + s_ca);
        let gamma_ca = self.gamma_ca(omega);
        Ok(SpectrumSample {
            omega,
            s_x,
            s_p: (omega * self.mass).powi(2) * s_x,
            s_th,
            s_th_sym,
            s_ca,
            s_ca_sym,
            chi_eff: chi,
            gamma_ca,
            omega_b_eff_sq: self.omega_b_eff_sq(omega),
            gamma_b_eff: self.gamma_b + gamma_ca,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Detuning, DriveParams};

    fn setup(kappa: f64, eps: f64, delta: f64, temperature: f64) -> (SystemParams, Spectra) {
        let mut p = SystemParams::figure2(kappa);
        p.temperature = temperature;
        let wp = WorkingPoint::from_effective_detuning(&p, &DriveParams::new(eps, Detuning::Effective(delta)));
        (p, Spectra::new(&p, &wp))
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn induced_damping_vanishes_without_coupling_or_detuning() {
        let (_, s) = setup(0.1, 0.0, 1.0, 300.0);
        assert_eq!(s.gamma_ca(1.0), 0.0);
        let (_, s) = setup(0.1, 2.5e3, 0.0, 300.0);
        assert_eq!(s.gamma_ca(1.0), 0.0);
        assert_eq!(s.gamma_b_eff(0.7), s.gamma_b());
    }

    #[test]
    fn induced_damping_at_figure5_point() {
        let (_, s) = setup(0.1, 2.5e3, 1.0, 327.3);
        // 4 · 9e-10 · (6.25e6/1.01) · 0.1 / (1e-4 + 0.04)
        let expected = 4.0 * 9e-10 * (6.25e6 / 1.01) * 0.1 / 0.0401;
        assert!(rel(s.gamma_ca(1.0), expected) < 1e-12);
        assert!((s.gamma_ca(1.0) - 5.56e-2).abs() < 1e-3);
        let ratio = (s.gamma_b_eff(1.0) / 0.1).log10();
        assert!((ratio + 0.25).abs() < 0.01);
    }

    #[test]
    fn frequency_shift() {
        let (_, s) = setup(0.1, 0.0, 1.0, 0.0);
        assert_eq!(s.omega_b_eff_sq(0.8), 1.0);
        let (_, s) = setup(0.1, 2.5e3, 1.0, 327.3);
        let w = (0.01f64 + 1.0).sqrt();
        assert!((s.omega_b_eff_sq(w) - 1.0).abs() < 1e-12);
        let shift = 1.0 - s.omega_b_eff_sq(1.0);
        assert!(rel(shift, 0.1 * s.gamma_ca(1.0) / 2.0) < 1e-12);
        assert!((shift - 2.8e-3).abs() < 1e-4);
        assert!((s.omega_b_eff_sq(1.0).sqrt() - 1.0).abs() < 2e-3);
    }

    #[test]
    fn bare_susceptibility() {
        let (p, s) = setup(0.1, 0.0, 1.0, 0.0);
        let chi0 = s.chi_eff(0.0).unwrap();
        assert!((chi0 - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let chi1 = s.chi_eff(1.0).unwrap();
        let expected = 1.0 / Complex64::new(0.0, p.gamma_b);
        assert!((chi1 - expected).norm() < 1e-9 * expected.norm());
        assert!(rel(chi1.norm(), p.quality_factor()) < 1e-12);
    }

    #[test]
    fn susceptibility_forms_agree_at_peak() {
        let (_, s) = setup(0.1, 2.5e3, 1.0, 327.3);
        let chi = s.chi_eff(1.0).unwrap();
        let reduced = s.chi_eff_reduced(1.0).unwrap();
        assert!((chi - reduced).norm() < 1e-10 * chi.norm());
        // Near resonance |χ| ≈ 1/(mω_bγ_eff)
        let approx = 1.0 / s.gamma_b_eff(1.0);
        assert!(rel(chi.norm(), approx) < 0.06);
    }

    #[test]
    fn thermal_spectrum_limits() {
        let (p, s) = setup(0.1, 0.0, 1.0, 0.0);
        let g = p.gamma_b;
        assert_eq!(s.s_th(2.0), (2.0 * g * 2.0, g * 2.0));
        assert_eq!(s.s_th(-2.0).0, 0.0);
        assert!((s.s_th(-2.0).1 - 2.0 * g).abs() < 1e-20);

        let (_, s) = setup(0.1, 0.0, 1.0, 50.0);
        assert_eq!(s.s_th(0.0).0, 2.0 * g * 50.0);
        assert!(rel(s.s_th(1e-12).0, 2.0 * g * 50.0) < 1e-12);

        let (_, s) = setup(0.1, 0.0, 1.0, 6.0e3);
        let (unsym, sym) = s.s_th(1.0);
        // coth(1/12000) · 1 ≈ 12000
        let coth = 1.0 / (1.0f64 / 12000.0).tanh();
        assert!(rel(sym, g * coth) < 1e-12);
        assert!(rel(sym, 1.2e4 * g) < 1e-6);
        assert!((unsym - sym - g).abs() < 1e-12 * unsym);
        assert!(rel(s.s_th(-1.0).1, sym) < 1e-12);

        let (_, s) = setup(0.1, 0.0, 1.0, 1.0);
        assert_eq!(s.s_th(-1e6).0, 0.0);
    }

    #[test]
    fn white_thermal_mode() {
        let (p, s) = setup(0.1, 2.5e3, 1.0, 6.0e3);
        let w = s.with_thermal(ThermalNoise::White);
        assert_eq!(w.s_th(3.0), (2.0 * p.gamma_b * 6.0e3, 2.0 * p.gamma_b * 6.0e3));
        assert_eq!(w.s_th(-3.0), w.s_th(3.0));
    }

    #[test]
    fn induced_spectrum_forms() {
        let (_, s) = setup(0.1, 0.0, 1.0, 327.3);
        assert_eq!(s.s_ca(1.0).0, 0.0);

        let (_, s) = setup(0.1, 2.5e3, 1.0, 327.3);
        // N ≈ 0 at ω_a = 2e4, T = 327: bracket at ω = Δ = 1 is κ² + 4
        let g2 = 9e-10 * 6.25e6 / 1.01;
        let expected = 2.0 * g2 * 0.1 * 4.01 / 0.0401;
        assert!(rel(s.s_ca(1.0).0, expected) < 1e-12);
        // At ω = −Δ the bracket drops to κ².
        let at_stokes = 2.0 * g2 * 0.1 * 0.01 / s.cavity_factor(-1.0);
        assert!(rel(s.s_ca(-1.0).0, at_stokes) < 1e-12);
        assert!(s.s_ca(1.0).0 > s.s_ca(-1.0).0);
        assert!(rel(s.s_ca_via_gamma(1.0).unwrap(), s.s_ca(1.0).0) < 1e-12);
        assert!(rel(s.s_ca_via_c(1.0), s.s_ca(1.0).0) < 1e-12);

        let (_, s0) = setup(0.1, 2.5e3, 0.0, 327.3);
        assert!(s0.s_ca_via_gamma(1.0).is_none());
        assert!(s0.s_ca(1.0).0 > 0.0);
    }

    #[test]
    fn cavity_factor_identity() {
        let (_, s) = setup(0.37, 2.5e3, 1.4, 10.0);
        for w in [-5.0, -1.0, 0.0, 0.3, 2.2] {
            let direct = s.cavity_response(w).norm_sqr();
            assert!(rel(s.cavity_factor(w), direct) < 1e-13);
            assert!(s.cavity_factor(w) > 0.0);
            assert!(rel(s.intermediates(w).cavity_factor, direct) < 1e-13);
        }
    }

    #[test]
    fn spectrum_sample_consistency() {
        let (_, s) = setup(0.2, 2.5e3, 1.0, 6.0e3);
        let smp = s.sample(1.1).unwrap();
        assert!(smp.s_x >= 0.0);
        assert!(rel(smp.s_p, 1.1f64.powi(2) * smp.s_x) < 1e-15);
        assert!(rel(smp.gamma_b_eff, s.gamma_b() + smp.gamma_ca) < 1e-15);
        assert!(smp.gamma_ca > 0.0);
        let (_, s) = setup(0.2, 2.5e3, -1.0, 6.0e3);
        assert!(s.gamma_ca(1.0) < 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn dual_forms(kappa in 0.05f64..3.0, delta in 0.05f64..3.0,
                          eps in 10.0f64..2.5e3, t in 0.0f64..1e4, x in -10.0f64..10.0) {
                let (_, s) = setup(kappa, eps, delta, t);
                let w = x * delta;
                let chi = s.chi_eff(w).unwrap();
                let red = s.chi_eff_reduced(w).unwrap();
                prop_assert!((chi - red).norm() <= 1e-10 * chi.norm());
                let direct = s.s_ca(w).0;
                prop_assert!(((s.s_ca_via_gamma(w).unwrap() - direct) / direct).abs() < 1e-10);
                prop_assert!(((s.s_ca_via_c(w) - direct) / direct).abs() < 1e-10);
                prop_assert!(direct >= 0.0);
                // Im[1/(mχ)] = ω γ_eff(ω)
                let inv = 1.0 / chi;
                let target = w * s.gamma_b_eff(w);
                prop_assert!((inv.im - target).abs() <= 1e-10 * (target.abs() + inv.norm()));
                prop_assert_eq!(s.gamma_ca(w).signum(), delta.signum());
            }

            #[test]
            fn drive_scaling(kappa in 0.05f64..2.0, delta in 0.1f64..3.0, f in 0.1f64..3.0, w in -4.0f64..4.0) {
                let (_, a) = setup(kappa, 500.0, delta, 100.0);
                let (_, b) = setup(kappa, 500.0 * f, delta, 100.0);
                prop_assert!(((b.gamma_ca(w) / a.gamma_ca(w)) - f * f).abs() < 1e-10 * f * f);
                prop_assert!(((b.s_ca(w).0 / a.s_ca(w).0) - f * f).abs() < 1e-10 * f * f);
            }

            #[test]
            fn thermal_spectrum_properties(t in 0.0f64..1e5, w in -1e3f64..1e3) {
                let (p, s) = setup(0.1, 0.0, 1.0, t);
                let (u, sym) = s.s_th(w);
                prop_assert!(u >= 0.0);
                prop_assert!((sym - s.s_th(-w).1).abs() <= 1e-12 * sym.abs().max(1e-300));
                prop_assert!((u - sym - p.gamma_b * w).abs() <= 1e-12 * u.abs().max(p.gamma_b * w.abs()));
            }
        }
    }
}
