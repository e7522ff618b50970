//! Dipole-dipole coupling between two atoms in circular states and the
//! resulting blockade shift.
//!
//! With the quantization axis along the interatomic axis, `|c_n c_n>`
//! couples most strongly to `|c_{n+1} c_{n-1}>`, detuned by the Förster
//! defect `delta < 0`. The pair is treated as the two-level system
//! `[[0, V], [V, delta]]`; the blockade shift is its upper eigenvalue.
//!
//! The dimensionless part of the parallel coupling behaves as `n^4 / 2` at
//! large `n`. A shorthand `8 n^4` asymptote circulates alongside the closed
//! form, but it disagrees with the closed form by a factor of 16; the closed
//! form is the one consistent with the tabulated blockade shifts and is what
//! is used here.
//!
//! With the quantization axis perpendicular to the interatomic axis the
//! resonant channel `|c_n c_n> <-> |n,n-2,n-2>|n,n-2,n-2>` dominates and the
//! shift equals the coupling itself. Only that resonant channel is modeled.

use std::f64::consts::PI;

use serde::Serialize;

use crate::atomic::energy_defects;
use crate::constants::CODATA2018;
use crate::error::{Error, Result};
use crate::numerics::log_product;

/// Default separation below which the two electron clouds are considered to
/// overlap (m).
pub const DEFAULT_EXCLUSION_RADIUS: f64 = 2e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Parallel,
    Perpendicular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairGeometry {
    /// Interatomic separation (m).
    pub separation: f64,
    pub orientation: Orientation,
    /// Separation below which [`PairGeometry::overlap_warning`] is raised (m).
    pub exclusion_radius: f64,
}

impl PairGeometry {
    pub fn new(separation: f64, orientation: Orientation) -> Result<Self> {
        if !(separation > 0.0) || !separation.is_finite() {
            return Err(Error::Domain(format!(
                "separation must be positive, got {separation}"
            )));
        }
        Ok(PairGeometry {
            separation,
            orientation,
            exclusion_radius: DEFAULT_EXCLUSION_RADIUS,
        })
    }

    pub fn with_exclusion_radius(mut self, radius: f64) -> Self {
        self.exclusion_radius = radius;
        self
    }

    /// The atoms are closer than the exclusion radius. Results are still
    /// computed.
    pub fn overlap_warning(&self) -> bool {
        self.separation < self.exclusion_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockadeResult {
    /// Coupling matrix element (rad/s).
    pub v_dd: f64,
    /// Detuning of the coupled pair state (rad/s).
    pub delta: f64,
    pub u_plus: f64,
    pub u_minus: f64,
    /// Blockade shift, equal to `u_plus` (rad/s).
    pub blockade_shift: f64,
    pub overlap_warning: bool,
}

impl BlockadeResult {
    pub fn blockade_shift_hz(&self) -> f64 {
        self.blockade_shift / (2.0 * PI)
    }
}

fn check_inputs(n: u32, separation: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("n = {n} must be at least 2")));
    }
    if !(separation > 0.0) {
        return Err(Error::Domain(format!(
            "separation must be positive, got {separation}"
        )));
    }
    Ok(n as f64)
}

/// `e^2 a0^2 / (4 pi eps0 R^3 hbar)` (rad/s).
fn dipole_scale(separation: f64) -> f64 {
    let k = &CODATA2018;
    k.coulomb() * k.bohr_radius.powi(2) / separation.powi(3) / k.hbar
}

/// Dimensionless factor `8 2^{4n} n^{2n+4} (n^2-1)^{n+2} /
/// ((2n+1)^{2n+3} (2n-1)^{2n+1})` of the parallel coupling.
pub fn vdd_parallel_factor(n: u32) -> Result<f64> {
    let n = check_inputs(n, 1.0)?;
    log_product(
        &[
            (8.0, 1.0),
            (2.0, 4.0 * n),
            (n, 2.0 * n + 4.0),
            (n * n - 1.0, n + 2.0),
            (2.0 * n + 1.0, -(2.0 * n + 3.0)),
            (2.0 * n - 1.0, -(2.0 * n + 1.0)),
        ],
        1.0,
    )
}

/// `<c_{n+1} c_{n-1}|V_dd|c_n c_n>` for the parallel geometry (rad/s).
pub fn vdd_parallel(n: u32, separation: f64) -> Result<f64> {
    check_inputs(n, separation)?;
    Ok(dipole_scale(separation) * vdd_parallel_factor(n)?)
}

/// Dimensionless factor `(27/8) n^2 (n-1)` of the perpendicular coupling.
pub fn vdd_perpendicular_factor(n: u32) -> Result<f64> {
    let n = check_inputs(n, 1.0)?;
    Ok(27.0 / 8.0 * n * n * (n - 1.0))
}

/// Resonant coupling magnitude for the perpendicular geometry (rad/s).
pub fn vdd_perpendicular(n: u32, separation: f64) -> Result<f64> {
    check_inputs(n, separation)?;
    Ok(dipole_scale(separation) * vdd_perpendicular_factor(n)?)
}

/// Eigenvalues `(u_plus, u_minus)` of `[[0, v], [v, delta]]`, i.e. the roots
/// of `u^2 - delta u - v^2 = 0`.
///
/// The root that would suffer cancellation is taken from the product
/// `u_plus u_minus = -v^2`.
pub fn forster_eigenvalues(delta: f64, v: f64) -> (f64, f64) {
    let s = (delta * delta + 4.0 * v * v).sqrt();
    if s == 0.0 {
        return (0.0, 0.0);
    }
    if delta >= 0.0 {
        let u_plus = 0.5 * (delta + s);
        (u_plus, -v * v / u_plus)
    } else {
        let u_minus = 0.5 * (delta - s);
        (-v * v / u_minus, u_minus)
    }
}

/// Blockade shift of `|c_n c_n>` at separation `R` in the parallel
/// geometry.
pub fn blockade_shift(n: u32, separation: f64) -> Result<BlockadeResult> {
    let geometry = PairGeometry::new(separation, Orientation::Parallel)?;
    blockade_shift_in(n, &geometry)
}

pub fn blockade_shift_in(n: u32, geometry: &PairGeometry) -> Result<BlockadeResult> {
    let r = geometry.separation;
    let (v_dd, delta) = match geometry.orientation {
        Orientation::Parallel => (vdd_parallel(n, r)?, energy_defects(n)?.delta),
        Orientation::Perpendicular => (vdd_perpendicular(n, r)?, 0.0),
    };
    let (u_plus, u_minus) = forster_eigenvalues(delta, v_dd);
    Ok(BlockadeResult {
        v_dd,
        delta,
        u_plus,
        u_minus,
        blockade_shift: u_plus,
        overlap_warning: geometry.overlap_warning(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic::quadrature::adaptive_simpson;
    use crate::atomic::{reduced_dipole_down, reduced_dipole_same_n, reduced_dipole_up};
    use crate::numerics::{clebsch_gordan, ln_factorial};
    use num_bigint::BigUint;
    use num_traits::ToPrimitive;

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    /// Parallel coupling factor assembled from reduced radial elements and
    /// Clebsch-Gordan coefficients.
    fn assembled_parallel_factor(n: u32) -> f64 {
        let l = (n - 1) as f64;
        let nf = n as f64;
        -6.0_f64.sqrt()
            * reduced_dipole_up(n).unwrap()
            * reduced_dipole_down(n).unwrap()
            / ((2.0 * nf + 1.0) * (2.0 * nf - 3.0)).sqrt()
            * clebsch_gordan(1.0, 1.0, 1.0, -1.0, 2.0, 0.0)
            * clebsch_gordan(l, l, 1.0, 1.0, l + 1.0, l + 1.0)
            * clebsch_gordan(l, l, 1.0, -1.0, l - 1.0, l - 1.0)
    }

    fn assembled_perpendicular_factor(n: u32) -> f64 {
        let l = (n - 1) as f64;
        let nf = n as f64;
        let cg = clebsch_gordan(l, l, 1.0, -1.0, l - 1.0, l - 1.0);
        -1.5 * reduced_dipole_same_n(n).unwrap().powi(2) / (2.0 * nf - 3.0)
            * clebsch_gordan(1.0, -1.0, 1.0, -1.0, 2.0, -2.0)
            * cg
            * cg
    }

    /// Exact rational evaluation of the parallel factor.
    fn bigint_parallel_factor(n: u32) -> f64 {
        let big = |x: u64| BigUint::from(x);
        let n64 = n as u64;
        let num = big(8)
            * big(2).pow(4 * n)
            * big(n64).pow(2 * n + 4)
            * big(n64 * n64 - 1).pow(n + 2);
        let den = big(2 * n64 + 1).pow(2 * n + 3) * big(2 * n64 - 1).pow(2 * n + 1);
        let shift = 200u32;
        let scaled = (num << shift) / den;
        scaled.to_f64().unwrap() * 2f64.powi(-(shift as i32))
    }

    #[test]
    fn parallel_factor_matches_exact_rational() {
        for n in [2, 5, 30, 80, 110, 200] {
            let got = vdd_parallel_factor(n).unwrap();
            let exact = bigint_parallel_factor(n);
            assert!(rel(got, exact) < 1e-12, "n={n}: {got} vs {exact}");
        }
    }

    #[test]
    fn parallel_closed_form_matches_assembly() {
        for n in [5, 30, 80, 110] {
            let closed = vdd_parallel_factor(n).unwrap();
            let assembled = assembled_parallel_factor(n);
            assert!(rel(closed, assembled) < 1e-10, "n={n}: {closed} vs {assembled}");
        }
    }

    #[test]
    fn perpendicular_closed_form_matches_assembly_in_magnitude() {
        assert_eq!(vdd_perpendicular_factor(2).unwrap(), 13.5);
        for n in [3, 5, 30, 100, 110] {
            let closed = vdd_perpendicular_factor(n).unwrap();
            let assembled = assembled_perpendicular_factor(n);
            // The assembled element carries an overall minus sign; a resonant
            // coupling shifts the pair by +-|V| either way.
            assert!(rel(closed, assembled.abs()) < 1e-10, "n={n}");
        }
    }

    #[test]
    fn same_n_radial_element_matches_quadrature() {
        // R_{n,n-2} ∝ r^{n-2} e^{-r/n} (2n - 2 - 2r/n), normalized numerically.
        for n in [3_u32, 10, 40] {
            let nf = n as f64;
            let hi = 4.0 * nf * nf + 60.0;
            let ln_circ = |r: f64| crate::atomic::quadrature::ln_circular_radial(n, r);
            let raw = |r: f64| {
                (nf - 2.0) * r.ln() - r / nf - 0.5 * ln_factorial(2 * n as u64)
                    + (2.0 * nf - 2.0 - 2.0 * r / nf).abs().ln()
            };
            let sign = |r: f64| (2.0 * nf - 2.0 - 2.0 * r / nf).signum();
            let norm = adaptive_simpson(
                &|r: f64| if r <= 0.0 { 0.0 } else { (2.0 * raw(r) + 2.0 * r.ln()).exp() },
                0.0,
                hi,
                1e-12,
            );
            let overlap = adaptive_simpson(
                &|r: f64| {
                    if r <= 0.0 {
                        0.0
                    } else {
                        sign(r) * (raw(r) + ln_circ(r) + 3.0 * r.ln()).exp()
                    }
                },
                0.0,
                hi,
                1e-12,
            ) / norm.sqrt();
            let reduced = ((nf - 1.0).sqrt() * overlap).abs();
            let closed = reduced_dipole_same_n(n).unwrap();
            assert!(rel(reduced, closed) < 1e-8, "n={n}: {reduced} vs {closed}");
        }
    }

    #[test]
    fn parallel_factor_asymptote_is_half_n4() {
        let ratio = |n: u32| vdd_parallel_factor(n).unwrap() / (n as f64).powi(4);
        assert!((ratio(120) / ratio(180) - 1.0).abs() < 0.01);
        assert!((ratio(2000) - 0.5).abs() < 0.005);
        // The shorthand 8 n^4 is off by a factor of 16.
        assert!((8.0 / ratio(180) - 16.0).abs() < 0.5);
    }

    #[test]
    fn coupling_scales_as_inverse_cube() {
        let r = 2e-6;
        assert!(rel(vdd_parallel(110, r).unwrap() / vdd_parallel(110, 2.0 * r).unwrap(), 8.0) < 1e-13);
        let slope = (vdd_perpendicular(100, 3e-6).unwrap() / vdd_perpendicular(100, 2e-6).unwrap()).ln()
            / (1.5_f64).ln();
        assert!((slope + 3.0).abs() < 0.01);
    }

    #[test]
    fn tabulated_blockade_shifts() {
        for (n, ghz) in [(80, 2.21), (100, 5.89), (110, 8.71)] {
            let b = blockade_shift(n, 2e-6).unwrap();
            assert!(rel(b.blockade_shift_hz() / 1e9, ghz) < 0.02, "n={n}: {}", b.blockade_shift_hz());
            assert!(!b.overlap_warning);
        }
        assert!(blockade_shift(110, 1.5e-6).unwrap().overlap_warning);
    }

    #[test]
    fn eigenvalues_solve_the_quadratic() {
        for &(delta, v) in &[(-1.0, 1.0), (-1.0, 1e-6), (-3.0, 1e4), (2.0, 0.5), (-1e9, 1e3)] {
            let (up, um) = forster_eigenvalues(delta, v);
            for u in [up, um] {
                let residual = u * u - delta * u - v * v;
                let scale = u * u + (delta * u).abs() + v * v;
                assert!(residual.abs() <= 1e-10 * scale);
            }
            if delta < 0.0 {
                assert!(up >= 0.0 && um <= 0.0);
            }
        }
        let (up, _) = forster_eigenvalues(-1.0, 1.0);
        assert!((up - (-1.0 + 5.0_f64.sqrt()) / 2.0).abs() < 1e-15);
        assert_eq!(forster_eigenvalues(-5.0, 0.0).0, 0.0);
    }

    #[test]
    fn blockade_limits() {
        let delta = -1.0;
        let (strong, _) = forster_eigenvalues(delta, 1e3);
        assert!(rel(strong, 1e3) < 0.01);
        let (weak, _) = forster_eigenvalues(delta, 1e-3);
        assert!(rel(weak, 1e-6) < 0.01);
        // Van der Waals regime keeps full precision.
        let (tiny, _) = forster_eigenvalues(-1.0, 1e-9);
        assert!(rel(tiny, 1e-18) < 1e-12);
    }

    #[test]
    fn defect_ratio_shrinks_with_n() {
        let ratio = |n: u32| {
            let d = energy_defects(n).unwrap();
            (d.delta / d.delta_prime).abs()
        };
        for n in 50..150 {
            assert!(ratio(n + 1) < ratio(n));
        }
    }

    /// Log-log slope of B(R) at the separation where V = k |delta|.
    fn slope_where_coupling_is(n: u32, k: f64) -> f64 {
        let delta = energy_defects(n).unwrap().delta.abs();
        let v1 = vdd_parallel(n, 1e-6).unwrap();
        let r = 1e-6 * (v1 / (k * delta)).cbrt();
        let h = 1e-4;
        let b = |r: f64| blockade_shift(n, r).unwrap().blockade_shift.ln();
        (b(r * (1.0 + h)) - b(r * (1.0 - h))) / ((1.0 + h).ln() - (1.0 - h).ln())
    }

    #[test]
    fn blockade_curve_crosses_from_resonant_to_van_der_waals() {
        // For u^2 - delta u - V^2 = 0 the local exponent is
        // -3 V B'(V) / B; at V = 10|delta| that is -3.150, at V = |delta|/10
        // it is -5.942.
        let exact = |k: f64| {
            let b = (-1.0 + (1.0 + 4.0 * k * k).sqrt()) / 2.0;
            let db = 2.0 * k / (1.0 + 4.0 * k * k).sqrt();
            -3.0 * k * db / b
        };
        for n in [90, 100, 110] {
            let near = slope_where_coupling_is(n, 10.0);
            let far = slope_where_coupling_is(n, 0.1);
            assert!((near - exact(10.0)).abs() < 1e-5, "n={n}: {near}");
            assert!((far - exact(0.1)).abs() < 1e-5, "n={n}: {far}");
            assert!((far + 6.0).abs() < 0.1);
            assert!((slope_where_coupling_is(n, 100.0) + 3.0).abs() < 0.1);
        }
    }

    #[test]
    fn perpendicular_geometry_is_resonant() {
        let g = PairGeometry::new(2e-6, Orientation::Perpendicular).unwrap();
        let b = blockade_shift_in(100, &g).unwrap();
        assert_eq!(b.delta, 0.0);
        assert!(rel(b.blockade_shift, b.v_dd) < 1e-15);
        assert!(PairGeometry::new(-1.0, Orientation::Parallel).is_err());
    }
}
