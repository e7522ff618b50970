//! CODATA-2018 constants in SI units.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Hartree energy (J).
    pub hartree: f64,
    /// Rydberg energy, exactly half the Hartree energy (J).
    pub rydberg: f64,
    /// Bohr radius (m).
    pub bohr_radius: f64,
    /// Elementary charge (C).
    pub elementary_charge: f64,
    /// Vacuum permittivity (F/m).
    pub epsilon_0: f64,
    /// Reduced Planck constant (J s).
    pub hbar: f64,
    /// Speed of light (m/s).
    pub speed_of_light: f64,
    /// Boltzmann constant (J/K).
    pub boltzmann: f64,
}

pub const CODATA2018: PhysicalConstants = PhysicalConstants {
    hartree: 4.359_744_722_207_1e-18,
    rydberg: 4.359_744_722_207_1e-18 / 2.0,
    bohr_radius: 5.291_772_109_03e-11,
    elementary_charge: 1.602_176_634e-19,
    epsilon_0: 8.854_187_812_8e-12,
    hbar: 1.054_571_817e-34,
    speed_of_light: 299_792_458.0,
    boltzmann: 1.380_649e-23,
};

/// Cesium ground-state hyperfine splitting, 9 192 631 770 Hz (exact).
pub const CS_CLOCK_HZ: f64 = 9_192_631_770.0;

impl PhysicalConstants {
    pub fn planck(&self) -> f64 {
        2.0 * PI * self.hbar
    }

    /// `e^2 / (4 pi eps0)` in J m.
    pub fn coulomb(&self) -> f64 {
        self.elementary_charge.powi(2) / (4.0 * PI * self.epsilon_0)
    }
}

pub fn hz_to_rad(hz: f64) -> f64 {
    2.0 * PI * hz
}

pub fn rad_to_hz(rad_per_s: f64) -> f64 {
    rad_per_s / (2.0 * PI)
}

pub const CS_CLOCK_RAD: f64 = 2.0 * PI * CS_CLOCK_HZ;
