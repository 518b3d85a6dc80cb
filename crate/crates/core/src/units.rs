//! Physical constants and wavelength/frequency conversions.

use std::f64::consts::PI;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const NANOMETRE: f64 = 1e-9;
pub const MICROMETRE: f64 = 1e-6;

/// Vacuum wavelength (m) to angular frequency (rad/s).
#[inline]
pub fn wavelength_to_omega(wavelength: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / wavelength
}

/// Angular frequency (rad/s) to vacuum wavelength (m).
#[inline]
pub fn omega_to_wavelength(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega
}

#[inline]
pub fn nm_to_omega(wavelength_nm: f64) -> f64 {
    wavelength_to_omega(wavelength_nm * NANOMETRE)
}

#[inline]
pub fn omega_to_nm(omega: f64) -> f64 {
    omega_to_wavelength(omega) / NANOMETRE
}
