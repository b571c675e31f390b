//! Physical parameters of the resonator pair and the conversion between SI
//! and natural units.
//!
//! Internally every quantity is expressed with ħ = k_B = 1, and in practice
//! also m = ω_b = 1: frequencies are in units of ω_b, temperatures in units of
//! ħω_b/k_B, lengths in units of √(ħ/mω_b). The formulas keep `mass` and
//! `omega_b` explicit so that they remain valid for any choice of scale.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Static parameters of the mechanical resonator, the cavity and their
/// coupling, in units with ħ = k_B = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub mass: f64,
    pub omega_b: f64,
    pub gamma_b: f64,
    /// Coupling-shifted cavity frequency.
    pub omega_a: f64,
    /// Cavity amplitude decay rate.
    pub kappa: f64,
    pub g0: f64,
    /// Temperature of the mechanical bath (and of the cavity bath unless
    /// `cavity_temperature` overrides it).
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity_temperature: Option<f64>,
}

/// Conditions the model tolerates but which weaken its assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ParamWarning {
    /// ω_b/ω_a exceeds 0.01.
    MechanicalFrequencyNotSmall { ratio: f64 },
    /// |ε| is not small against ω_a (threshold ω_a/4).
    RotatingWaveQuestionable { ratio: f64 },
}

impl SystemParams {
    /// The parameter set of the detuning-variance figure (T = 6000 ħω_b/k_B,
    /// κ = ω_b), in natural units.
    pub fn figure2(kappa: f64) -> Self {
        SystemParams {
            mass: 1.0,
            omega_b: 1.0,
            gamma_b: 0.25e-4,
            omega_a: 2.0e4,
            kappa,
            g0: 3.0e-5,
            temperature: 6.0e3,
            cavity_temperature: None,
        }
    }

    pub fn validate(&self) -> Result<Vec<ParamWarning>> {
        positive_finite("mass", self.mass)?;
        positive_finite("omega_b", self.omega_b)?;
        positive_finite("kappa", self.kappa)?;
        non_negative_finite("gamma_b", self.gamma_b)?;
        non_negative_finite("temperature", self.temperature)?;
        positive_finite("omega_a", self.omega_a)?;
        if !self.g0.is_finite() {
            return Err(invalid("g0", "must be finite"));
        }
        if let Some(t) = self.cavity_temperature {
            non_negative_finite("cavity_temperature", t)?;
        }
        let mut warnings = Vec::new();
        let ratio = self.omega_b / self.omega_a;
        if ratio > 0.01 {
            warnings.push(ParamWarning::MechanicalFrequencyNotSmall { ratio });
        }
        Ok(warnings)
    }

    pub fn quality_factor(&self) -> f64 {
        self.omega_b / self.gamma_b
    }

    pub fn cavity_temperature(&self) -> f64 {
        self.cavity_temperature.unwrap_or(self.temperature)
    }

    pub fn occupations(&self) -> BathOccupations {
        BathOccupations {
            n_cav: bose_einstein(self.omega_a, self.cavity_temperature()),
            n_mech: bose_einstein(self.omega_b, self.temperature),
        }
    }

    /// ħ g0² / (m ω_b²): the detuning shift per intracavity photon.
    pub fn shift_per_photon(&self) -> f64 {
        self.g0 * self.g0 / (self.mass * self.omega_b * self.omega_b)
    }
}

fn positive_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be non-negative and finite, got {v}")))
    }
}

/// How the detuning of the drive is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detuning {
    /// Bare detuning Δ0 = ω_a − ω_d; the effective detuning is solved for.
    Bare(f64),
    /// Effective detuning Δ prescribed directly; Δ0 is back-computed.
    Effective(f64),
}

impl Detuning {
    pub fn value(&self) -> f64 {
        match *self {
            Detuning::Bare(v) | Detuning::Effective(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub epsilon: Complex64,
    pub detuning: Detuning,
}

impl DriveParams {
    pub fn new(epsilon: f64, detuning: Detuning) -> Self {
        DriveParams {
            epsilon: Complex64::new(epsilon, 0.0),
            detuning,
        }
    }

    pub fn validate(&self, params: &SystemParams) -> Result<Vec<ParamWarning>> {
        if !(self.epsilon.re.is_finite() && self.epsilon.im.is_finite()) {
            return Err(invalid("epsilon", "must be finite"));
        }
        if !self.detuning.value().is_finite() {
            return Err(invalid("delta", "must be finite"));
        }
        let ratio = self.epsilon.norm() / params.omega_a;
        if ratio >= 0.25 {
            Ok(vec![ParamWarning::RotatingWaveQuestionable { ratio }])
        } else {
            Ok(Vec::new())
        }
    }
}

/// Circuit-level description of the cavity and the capacitive gap, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareParams {
    /// Rest gate capacitance C_g⁰, F.
    pub cg0: f64,
    /// Rest gap, m.
    pub d: f64,
    /// Cavity capacitance, F.
    pub ca: f64,
    /// Cavity inductance, H.
    pub la: f64,
    /// Drive power, W.
    pub power: f64,
}

impl HardwareParams {
    pub fn validate(&self) -> Result<()> {
        non_negative_finite("cg0", self.cg0)?;
        positive_finite("d", self.d)?;
        positive_finite("ca", self.ca)?;
        positive_finite("la", self.la)?;
        non_negative_finite("power", self.power)
    }

    /// ω_a′ = 1/√(L_a C_a), rad/s.
    pub fn bare_cavity_frequency(&self) -> f64 {
        1.0 / (self.la * self.ca).sqrt()
    }

    /// V_rms = √(ħω_a′/C_a), V.
    pub fn rms_voltage(&self) -> f64 {
        (HBAR * self.bare_cavity_frequency() / self.ca).sqrt()
    }

    /// ω_a = ω_a′ + C_g⁰V_rms²/ħ, rad/s.
    pub fn shifted_cavity_frequency(&self) -> f64 {
        let w = self.bare_cavity_frequency();
        w + self.cg0 * w / self.ca
    }
}

/// g0 = C_g⁰V_rms²/(ħd) in rad/(s·m) for the given circuit.
pub fn derive_coupling(hw: &HardwareParams) -> Result<f64> {
    hw.validate()?;
    coupling_from_capacitances(hw.cg0, hw.ca, hw.d, hw.bare_cavity_frequency())
}

/// g0 = C_g⁰ ω_a′/(C_a d), the closed form after substituting V_rms².
pub fn coupling_from_capacitances(cg0: f64, ca: f64, d: f64, omega_a_prime: f64) -> Result<f64> {
    non_negative_finite("cg0", cg0)?;
    positive_finite("ca", ca)?;
    positive_finite("d", d)?;
    positive_finite("omega_a_prime", omega_a_prime)?;
    Ok(cg0 * omega_a_prime / (ca * d))
}

/// |ε| = √(2κP/(ħω_a′)) in rad/s, all inputs SI.
pub fn drive_from_power(power: f64, kappa: f64, omega_a_prime: f64) -> Result<f64> {
    non_negative_finite("power", power)?;
    non_negative_finite("kappa", kappa)?;
    positive_finite("omega_a_prime", omega_a_prime)?;
    Ok((2.0 * kappa * power / (HBAR * omega_a_prime)).sqrt())
}

/// Mean thermal occupations of the two baths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathOccupations {
    /// Thermal photon number N of the cavity bath.
    pub n_cav: f64,
    /// Initial thermal phonon number n_b of the mechanical mode.
    pub n_mech: f64,
}

/// 1/(exp(ω/T) − 1) with ħ = k_B = 1; zero at T = 0 and no overflow for
/// ω ≫ T.
pub fn bose_einstein(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let x = omega / temperature;
    if x > 700.0 {
        return 0.0;
    }
    1.0 / x.exp_m1()
}

/// Occupations for a common bath temperature, ħ = k_B = 1.
pub fn thermal_occupations(temperature: f64, omega_a: f64, omega_b: f64) -> BathOccupations {
    BathOccupations {
        n_cav: bose_einstein(omega_a, temperature),
        n_mech: bose_einstein(omega_b, temperature),
    }
}

/// Occupations from an SI temperature (K) and angular frequencies (rad/s).
pub fn thermal_occupations_si(temperature_k: f64, omega_a: f64, omega_b: f64) -> BathOccupations {
    thermal_occupations(K_B * temperature_k / HBAR, omega_a, omega_b)
}

/// System parameters in SI units: kg, rad/s, rad/(s·m), K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiSystemParams {
    pub mass: f64,
    pub omega_b: f64,
    pub gamma_b: f64,
    pub omega_a: f64,
    pub kappa: f64,
    pub g0: f64,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity_temperature: Option<f64>,
}

/// The SI scale behind a natural-unit parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitScale {
    pub mass: f64,
    pub omega_b: f64,
}

impl UnitScale {
    pub fn new(mass: f64, omega_b: f64) -> Result<Self> {
        positive_finite("mass", mass)?;
        positive_finite("omega_b", omega_b)?;
        Ok(UnitScale { mass, omega_b })
    }

    /// √(ħ/(mω_b)), m.
    pub fn length(&self) -> f64 {
        (HBAR / (self.mass * self.omega_b)).sqrt()
    }

    /// √(ħ m ω_b), kg·m/s.
    pub fn momentum(&self) -> f64 {
        (HBAR * self.mass * self.omega_b).sqrt()
    }

    /// ħω_b/k_B, K.
    pub fn temperature(&self) -> f64 {
        HBAR * self.omega_b / K_B
    }

    /// ω_b √(mω_b/ħ), the coupling unit in rad/(s·m).
    pub fn coupling(&self) -> f64 {
        self.omega_b / self.length()
    }

    pub fn to_si(&self, p: &SystemParams) -> SiSystemParams {
        let w = self.omega_b;
        SiSystemParams {
            mass: p.mass * self.mass,
            omega_b: p.omega_b * w,
            gamma_b: p.gamma_b * w,
            omega_a: p.omega_a * w,
            kappa: p.kappa * w,
            g0: p.g0 * self.coupling(),
            temperature: p.temperature * self.temperature(),
            cavity_temperature: p.cavity_temperature.map(|t| t * self.temperature()),
        }
    }

    pub fn to_natural(&self, si: &SiSystemParams) -> SystemParams {
        let w = self.omega_b;
        SystemParams {
            mass: si.mass / self.mass,
            omega_b: si.omega_b / w,
            gamma_b: si.gamma_b / w,
            omega_a: si.omega_a / w,
            kappa: si.kappa / w,
            g0: si.g0 / self.coupling(),
            temperature: si.temperature / self.temperature(),
            cavity_temperature: si.cavity_temperature.map(|t| t / self.temperature()),
        }
    }
}

/// Rescales SI parameters to ħ = k_B = m = ω_b = 1, returning the scale
/// needed to undo the conversion.
pub fn to_natural_units(si: &SiSystemParams) -> Result<(SystemParams, UnitScale)> {
    let scale = UnitScale::new(si.mass, si.omega_b)?;
    let natural = scale.to_natural(si);
    natural.validate()?;
    Ok((natural, scale))
}
