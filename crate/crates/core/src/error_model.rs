//! Closed-form intrinsic-error estimates for the blockade gate.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::CS_CLOCK_RAD;
use crate::error::{Error, Result};

/// Physical inputs of one gate realization. All rates are angular
/// frequencies (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    /// Rydberg Rabi frequency.
    pub omega: f64,
    /// Qubit splitting `|1> - |0>`.
    pub omega_10: f64,
    /// Blockade shift of the doubly excited state.
    pub blockade: f64,
    /// Rydberg lifetime (s). `f64::INFINITY` switches decay off.
    pub tau: f64,
}

impl GateParams {
    pub fn new(omega: f64, omega_10: f64, blockade: f64, tau: f64) -> Result<Self> {
        let p = GateParams {
            omega,
            omega_10,
            blockade,
            tau,
        };
        p.validate()?;
        Ok(p)
    }

    /// Cesium clock-state qubit splitting.
    pub fn cesium(omega: f64, blockade: f64, tau: f64) -> Result<Self> {
        Self::new(omega, CS_CLOCK_RAD, blockade, tau)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("omega", self.omega),
            ("omega_10", self.omega_10),
            ("blockade", self.blockade),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Domain(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if !(self.tau > 0.0) {
            return Err(Error::Domain(format!(
                "lifetime must be positive, got {}",
                self.tau
            )));
        }
        Ok(())
    }

    /// Rydberg decay rate `1/tau` (1/s).
    pub fn gamma_r(&self) -> f64 {
        1.0 / self.tau
    }

    /// `Omega < B/10` and `B < omega_10`, where the perturbative estimates
    /// apply.
    pub fn strong_blockade(&self) -> bool {
        self.omega < self.blockade / 10.0 && self.blockade < self.omega_10
    }
}

/// Gate error averaged over the four computational-basis inputs, including
/// finite-`omega_10` corrections.
pub fn intrinsic_error_e1(p: &GateParams) -> f64 {
    let (w, b, w10) = (p.omega, p.blockade, p.omega_10);
    let decay = 7.0 * PI / (4.0 * w * p.tau)
        * (1.0 + w * w / (w10 * w10) + w * w / (7.0 * b * b));
    let blockade = w * w / (8.0 * b * b) * (1.0 + 6.0 * b * b / (w10 * w10));
    decay + blockade
}

fn check_positive(b: f64, tau: f64) -> Result<()> {
    if !(b > 0.0) || !(tau > 0.0) {
        return Err(Error::Domain(format!(
            "blockade and lifetime must be positive, got B={b}, tau={tau}"
        )));
    }
    Ok(())
}

/// Rabi frequency minimizing [`intrinsic_error_e1`] when
/// `omega_10 >> (B, Omega)`: `(7 pi)^{1/3} B^{2/3} / tau^{1/3}`.
pub fn optimal_rabi(blockade: f64, tau: f64) -> Result<f64> {
    check_positive(blockade, tau)?;
    Ok((7.0 * PI).cbrt() * blockade.powf(2.0 / 3.0) / tau.cbrt())
}

/// Minimum of the computational-basis error, `3 (7 pi)^{2/3} / (8 (B tau)^{2/3})`.
pub fn min_error(blockade: f64, tau: f64) -> Result<f64> {
    check_positive(blockade, tau)?;
    Ok(3.0 * (7.0 * PI).powf(2.0 / 3.0) / 8.0 / (blockade * tau).powf(2.0 / 3.0))
}

/// Spontaneous-emission error picked up in the intermediate states of an
/// adiabatic-passage pi pulse: `pi P_int / (Omega tau_int)`.
pub fn stirap_intermediate_error(p_int: f64, omega: f64, tau_int: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_int) {
        return Err(Error::Domain(format!(
            "intermediate population must lie in [0, 1], got {p_int}"
        )));
    }
    if !(omega > 0.0) || !(tau_int > 0.0) {
        return Err(Error::Domain(format!(
            "Rabi frequency and lifetime must be positive, got {omega}, {tau_int}"
        )));
    }
    Ok(PI * p_int / (omega * tau_int))
}
