//! Published parameter values for the SnV emitter, in internal units.

use crate::emitter::EmitterParams;
use crate::error::Result;
use crate::units::mhz_to_rad_per_ns;

/// Excited-state lifetime (ns).
pub const T1: f64 = 7.44;
/// Inhomogeneous dephasing time (ns).
pub const T2_STAR: f64 = 4.54;

/// Ramsey fit: intrinsic and laser-induced pure dephasing (MHz, divide by 2π).
pub const RAMSEY_GAMMA_PD_INTRINSIC_MHZ: f64 = 6.99;
pub const RAMSEY_GAMMA_PD_LASER_MHZ: f64 = 14.8;
/// Hahn-echo fit. The laser value is read as 2π × 16.0 MHz.
pub const HAHN_GAMMA_PD_INTRINSIC_MHZ: f64 = 6.39;
pub const HAHN_GAMMA_PD_LASER_MHZ: f64 = 16.0;

/// Saturation parameters of the highest-power Rabi trace and the detuning map.
pub const S_MAX: f64 = 367.0;
pub const S_MAP: f64 = 102.0;
/// Measured π-pulse duration at `S_MAX` (ns).
pub const PI_TIME: f64 = 1.71;
pub const PI_FIDELITY: f64 = 0.771;

/// Lifetime-trace fit: A (counts/ns/trigger), B (counts/ns/trigger).
pub const LIFETIME_AMPLITUDE: f64 = 1.423e-5;
pub const LIFETIME_BACKGROUND: f64 = 5.6e-8;

/// Signal-to-background ratio in the first 11.1 ns after the pulse, and over
/// the whole visible decay.
pub const SBR_GATED: f64 = 23.91;
pub const SBR_FULL: f64 = 13.27;
pub const GATE_NS: f64 = 11.1;

pub const G2_PARALLEL: f64 = 0.22;
pub const G2_PERPENDICULAR: f64 = 0.51;
pub const G2_ZERO: f64 = 0.0836;
pub const EPSILON: f64 = 0.04;
pub const DELTA2: f64 = 0.04;
pub const G2_RAW_PULSED: f64 = 0.067;

/// Simulated HOM visibility quoted for the measured dephasing.
pub const V_SIM: f64 = 0.632;
/// Inhomogeneous and homogeneous PLE widths (MHz).
pub const INHOMOGENEOUS_FWHM_MHZ: f64 = 64.0;
pub const HOMOGENEOUS_FWHM_MHZ: f64 = 35.0;

/// Emitter with the Ramsey-fit dephasing rates and T₂*.
pub fn ramsey_emitter() -> Result<EmitterParams> {
    EmitterParams::new(
        T1,
        mhz_to_rad_per_ns(RAMSEY_GAMMA_PD_INTRINSIC_MHZ),
        mhz_to_rad_per_ns(RAMSEY_GAMMA_PD_LASER_MHZ),
        Some(T2_STAR),
    )
}

/// Emitter with the Hahn-echo dephasing rates and T₂*.
pub fn hahn_emitter() -> Result<EmitterParams> {
    EmitterParams::new(
        T1,
        mhz_to_rad_per_ns(HAHN_GAMMA_PD_INTRINSIC_MHZ),
        mhz_to_rad_per_ns(HAHN_GAMMA_PD_LASER_MHZ),
        Some(T2_STAR),
    )
}
