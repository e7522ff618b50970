//! Hydrogenic structure of circular Rydberg states.
//!
//! A circular state `|c_n> = |n, n-1, n-1>` has maximal orbital angular
//! momentum and a single allowed spontaneous decay channel, `c_n -> c_{n-1}`.
//! Every closed form with an `n`-dependent exponent is evaluated in log
//! space; `2^{4n}` alone overflows near `n = 256` and the intermediate
//! products much earlier.
//!
//! Reduced matrix elements use the Wigner-Eckart convention
//! `<j' m'|T_q|j m> = C^{j'm'}_{j m 1 q} <j'||T||j> / sqrt(2j'+1)`, under
//! which `<l'||r||l> = ±sqrt(l_>) R` with `R` the radial integral and `l_>`
//! the larger of the two orbital quantum numbers.

use std::f64::consts::PI;

use serde::Serialize;

use crate::constants::{PhysicalConstants, CODATA2018};
use crate::error::{Error, Result};
use crate::numerics::{clebsch_gordan, ln_factorial, log_product, log_product_factor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RydbergLevel {
    pub n: u32,
    pub l: u32,
    pub m: i32,
}

impl RydbergLevel {
    pub fn new(n: u32, l: u32, m: i32) -> Result<Self> {
        if n < 1 {
            return Err(Error::Domain(format!("principal quantum number {n} < 1")));
        }
        if l >= n {
            return Err(Error::Domain(format!("l = {l} must be below n = {n}")));
        }
        if m.unsigned_abs() > l {
            return Err(Error::Domain(format!("|m| = {} exceeds l = {l}", m.abs())));
        }
        Ok(RydbergLevel { n, l, m })
    }

    /// The circular state `|n, n-1, n-1>`.
    pub fn circular(n: u32) -> Result<Self> {
        if n < 1 {
            return Err(Error::Domain(format!("principal quantum number {n} < 1")));
        }
        Ok(RydbergLevel {
            n,
            l: n - 1,
            m: (n - 1) as i32,
        })
    }

    pub fn is_circular(&self) -> bool {
        self.l + 1 == self.n && self.m == self.l as i32
    }

    /// Hydrogenic binding energy `-E_R / n^2` (J).
    pub fn energy(&self) -> f64 {
        -CODATA2018.rydberg / (self.n as f64).powi(2)
    }
}

fn require_n(n: u32, min: u32) -> Result<f64> {
    if n < min {
        return Err(Error::Domain(format!("n = {n} must be at least {min}")));
    }
    Ok(n as f64)
}

/// `<c_{n-1}||r||c_n>` in units of the Bohr radius.
pub fn reduced_dipole_down(n: u32) -> Result<f64> {
    let n = require_n(n, 2)?;
    log_product(
        &[
            (4.0, n),
            (n, n + 1.0),
            (n - 1.0, n + 1.5),
            (4.0 * n * n - 6.0 * n + 2.0, 0.5),
            (2.0 * n - 1.0, -(2.0 * n + 1.0)),
        ],
        -1.0,
    )
}

/// `<c_{n+1}||r||c_n>` in units of the Bohr radius.
pub fn reduced_dipole_up(n: u32) -> Result<f64> {
    let n = require_n(n, 1)?;
    log_product(
        &[
            (2.0, 0.5),
            (4.0, n + 1.0),
            (n + 1.0, n + 2.0),
            (n, n + 3.0),
            (2.0 * n + 1.0, -(2.0 * n + 2.5)),
        ],
        1.0,
    )
}

/// `<n, n-2||r||n, n-1>` in units of the Bohr radius (same-`n` transition
/// used by the perpendicular geometry).
pub fn reduced_dipole_same_n(n: u32) -> Result<f64> {
    let n = require_n(n, 2)?;
    Ok(1.5 * n * (2.0 * n - 1.0).sqrt() * (n - 1.0).sqrt())
}

/// `|<c_{n-1}|r_{-1}|c_n>|` in units of the Bohr radius, assembled from the
/// reduced element and a Clebsch-Gordan coefficient.
pub fn spherical_dipole_down(n: u32) -> Result<f64> {
    let reduced = reduced_dipole_down(n)?;
    let l = (n - 1) as f64;
    let cg = clebsch_gordan(l, l, 1.0, -1.0, l - 1.0, l - 1.0);
    Ok((cg * reduced / (2.0 * (l - 1.0) + 1.0).sqrt()).abs())
}

/// Angular frequency of `c_n -> c_{n-1}` (rad/s).
pub fn transition_frequency(n: u32) -> Result<f64> {
    let n = require_n(n, 2)?;
    let k = &CODATA2018;
    Ok(k.rydberg / k.hbar * (1.0 / (n - 1.0).powi(2) - 1.0 / (n * n)))
}

pub fn transition_frequency_hz(n: u32) -> Result<f64> {
    Ok(transition_frequency(n)? / (2.0 * PI))
}

/// Förster energy defects of the pair state `|c_n c_n>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DefectPair {
    /// Defect to `|c_{n+1} c_{n-1}>` (rad/s).
    pub delta: f64,
    /// Defect to `|n+2, n, n>|c_{n-1}>` (rad/s).
    pub delta_prime: f64,
}

impl DefectPair {
    pub fn delta_hartree(&self) -> f64 {
        self.delta * CODATA2018.hbar / CODATA2018.hartree
    }

    pub fn delta_prime_hartree(&self) -> f64 {
        self.delta_prime * CODATA2018.hbar / CODATA2018.hartree
    }

    pub fn delta_hz(&self) -> f64 {
        self.delta / (2.0 * PI)
    }

    pub fn delta_prime_hz(&self) -> f64 {
        self.delta_prime / (2.0 * PI)
    }
}

pub fn energy_defects(n: u32) -> Result<DefectPair> {
    let n = require_n(n, 2)?;
    let k = &CODATA2018;
    let scale = k.hartree / 2.0 / k.hbar;
    let inv2 = |x: f64| 1.0 / (x * x);
    Ok(DefectPair {
        delta: scale * (-inv2(n + 1.0) - inv2(n - 1.0) + 2.0 * inv2(n)),
        delta_prime: scale * (-inv2(n + 2.0) - inv2(n - 1.0) + 2.0 * inv2(n)),
    })
}

fn lifetime_prefactor(k: &PhysicalConstants) -> f64 {
    // 3 pi eps0 hbar^4 c^3 / (E_R^3 a0^2 e^2), grouped to stay in range.
    let hbar_over_er = k.hbar / k.rydberg;
    3.0 * PI * k.epsilon_0 * k.hbar * hbar_over_er.powi(3) * k.speed_of_light.powi(3)
        / (k.bohr_radius * k.elementary_charge).powi(2)
}

/// Zero-temperature radiative lifetime of `c_n` (s), from the closed form
/// `prefactor * (2n-1)^{4n-1} / (2^{4n+1} n^{2n-4} (n-1)^{2n-2})`.
pub fn lifetime_0k(n: u32) -> Result<f64> {
    let n = require_n(n, 2)?;
    let mut factors = vec![
        (2.0 * n - 1.0, 4.0 * n - 1.0),
        (2.0, -(4.0 * n + 1.0)),
        (n, -(2.0 * n - 4.0)),
    ];
    if n > 2.0 {
        factors.push((n - 1.0, -(2.0 * n - 2.0)));
    }
    let shape = log_product_factor(&factors, 1.0)?;
    Ok(lifetime_prefactor(&CODATA2018) * shape.value())
}

/// Zero-temperature lifetime from the golden-rule expression
/// `3 pi eps0 hbar c^3 / (omega^3 e^2 |<c_{n-1}|r_{-1}|c_n>|^2)` with the
/// hydrogenic matrix element substituted.
pub fn lifetime_0k_from_matrix_element(n: u32) -> Result<f64> {
    let k = &CODATA2018;
    let omega = transition_frequency(n)?;
    let d = spherical_dipole_down(n)? * k.bohr_radius;
    Ok(3.0 * PI * k.epsilon_0 * k.hbar * k.speed_of_light.powi(3)
        / (omega.powi(3) * (k.elementary_charge * d).powi(2)))
}

/// Mean blackbody photon number at the `c_n -> c_{n-1}` frequency.
pub fn thermal_occupation(n: u32, temperature: f64) -> Result<f64> {
    if !(temperature >= 0.0) {
        return Err(Error::Domain(format!(
            "temperature must be non-negative, got {temperature}"
        )));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let k = &CODATA2018;
    let x = k.hbar * transition_frequency(n)? / (k.boltzmann * temperature);
    Ok(1.0 / x.exp_m1())
}

/// Lifetime at temperature `T` (K) including blackbody-stimulated emission
/// on the `c_n -> c_{n-1}` channel.
pub fn lifetime(n: u32, temperature: f64) -> Result<f64> {
    let occupation = thermal_occupation(n, temperature)?;
    Ok(lifetime_0k(n)? / (occupation + 1.0))
}

/// Most probable electron radius of `c_n`, `n^2 a0` (m).
pub fn radial_density_peak(n: u32) -> Result<f64> {
    let n = require_n(n, 1)?;
    Ok(n * n * CODATA2018.bohr_radius)
}

/// Probability that the electron of `c_n` lies outside `radius` (m).
///
/// The radial density `r^2 R_{n,n-1}^2 ∝ r^{2n} e^{-2r/(n a0)}` is a gamma
/// distribution, so this is the regularized upper incomplete gamma function
/// `Q(2n+1, 2r/(n a0))`.
pub fn radial_probability_outside(n: u32, radius: f64) -> Result<f64> {
    let nf = require_n(n, 1)?;
    if !(radius >= 0.0) {
        return Err(Error::Domain(format!("radius must be non-negative, got {radius}")));
    }
    let x = 2.0 * radius / (nf * CODATA2018.bohr_radius);
    Ok(ln_regularized_upper_gamma(2 * n as u64 + 1, x).exp())
}

/// `ln Q(a, x)` for integer shape `a >= 1`.
pub(crate) fn ln_regularized_upper_gamma(a: u64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let af = a as f64;
    let ln_gamma_a = ln_factorial(a - 1);
    let ln_front = af * x.ln() - x - ln_gamma_a;
    if x < af + 1.0 {
        // Series for P(a, x) = x^a e^{-x} / Gamma(a+1) * sum x^k / ((a+1)...(a+k)).
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > sum * 1e-17 {
            term *= x / (af + k);
            sum += term;
            k += 1.0;
        }
        let p = (ln_front - af.ln() + sum.ln()).exp();
        (-p).ln_1p()
    } else {
        // Modified Lentz evaluation of the continued fraction for Q.
        let tiny = 1e-300;
        let mut b = x + 1.0 - af;
        let mut cc = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - af);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            cc = b + an / cc;
            if cc.abs() < tiny {
                cc = tiny;
            }
            d = 1.0 / d;
            let delta = d * cc;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        ln_front + h.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Polarization {
    #[serde(rename = "sigma+")]
    SigmaPlus,
    #[serde(rename = "sigma-")]
    SigmaMinus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderState {
    /// Position `k` in the ladder `|psi_k>`.
    pub index: u32,
    pub level: RydbergLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderLink {
    pub from: u32,
    pub to: u32,
    pub frequency_hz: f64,
    pub polarization: Polarization,
}

/// Multiphoton adiabatic-passage ladder ending in `c_{n_final}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StirapLadder {
    pub states: Vec<LadderState>,
    pub links: Vec<LadderLink>,
}

impl StirapLadder {
    pub fn max_link_hz(&self) -> f64 {
        self.links.iter().map(|l| l.frequency_hz).fold(0.0, f64::max)
    }

    pub fn min_link_hz(&self) -> f64 {
        self.links
            .iter()
            .map(|l| l.frequency_hz)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Rydberg portion of the ladder, `|psi_3>` through `|psi_N>` with
/// `N = n_final`.
///
/// Two interleaved chains alternate between high-`n` and low-`n` states:
/// `|psi_{2k-1}> = |3N/2 + 2 - k, 2k-2, 2k-2>` and
/// `|psi_{2k}> = |N/2 + k, 2k-1, 2k-1>` for `k = 2 ..= N/2`. For `N = 112`
/// this runs from `|168, 2, 2>` to the circular state `|112, 111, 111>`.
pub fn stirap_chain(n_final: u32) -> Result<StirapLadder> {
    if !n_final.is_multiple_of(2) || n_final < 6 {
        return Err(Error::InvalidChain(format!(
            "final principal quantum number must be even and at least 6, got {n_final}"
        )));
    }
    let half = n_final / 2;
    let mut states = Vec::with_capacity(2 * (half as usize - 1));
    for k in 2..=half {
        let odd = RydbergLevel::new(3 * half + 2 - k, 2 * k - 2, (2 * k - 2) as i32)
            .map_err(|e| Error::InvalidChain(e.to_string()))?;
        let even = RydbergLevel::new(half + k, 2 * k - 1, (2 * k - 1) as i32)
            .map_err(|e| Error::InvalidChain(e.to_string()))?;
        states.push(LadderState {
            index: 2 * k - 1,
            level: odd,
        });
        states.push(LadderState {
            index: 2 * k,
            level: even,
        });
    }
    let h = CODATA2018.planck();
    let links = states
        .windows(2)
        .map(|pair| {
            let (a, b) = (&pair[0], &pair[1]);
            LadderLink {
                from: a.index,
                to: b.index,
                frequency_hz: (a.level.energy() - b.level.energy()).abs() / h,
                polarization: if a.index % 2 == 0 {
                    Polarization::SigmaPlus
                } else {
                    Polarization::SigmaMinus
                },
            }
        })
        .collect();
    Ok(StirapLadder { states, links })
}

#[cfg(test)]
pub(crate) mod quadrature {
    /// Adaptive Simpson integration with absolute tolerance `tol`.
    pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn recurse(
            f: &impl Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            let delta = left + right - whole;
            let floor = 1e-15 * (left.abs() + right.abs());
            if depth == 0 || delta.abs() <= 15.0 * tol.max(floor) {
                return left + right + delta / 15.0;
            }
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
        // Split into panels first so narrow peaks are not missed.
        let panels = 64;
        let w = (b - a) / panels as f64;
        let crude: f64 = (0..=4 * panels)
            .map(|i| f(a + i as f64 * w / 4.0).abs() * w / 4.0)
            .sum();
        let tol = tol.max(1e-14 * crude);
        (0..panels)
            .map(|i| {
                let lo = a + i as f64 * w;
                let hi = lo + w;
                let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
                let whole = w / 6.0 * (fa + 4.0 * fm + fb);
                recurse(f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 25)
            })
            .sum()
    }

    /// `ln R_{n,n-1}(r)` for the normalized hydrogenic circular radial
    /// function, `r` in Bohr radii.
    pub fn ln_circular_radial(n: u32, r: f64) -> f64 {
        let nf = n as f64;
        1.5 * (2.0 / nf).ln() - 0.5 * super::ln_factorial(2 * n as u64)
            + (nf - 1.0) * (2.0 * r / nf).ln()
            - r / nf
    }

    /// `int_0^inf R_{n',n'-1} R_{n,n-1} r^3 dr` in Bohr radii.
    pub fn circular_radial_integral(n1: u32, n2: u32) -> f64 {
        let hi = 4.0 * (n1.max(n2) as f64).powi(2) + 60.0;
        let f = |r: f64| {
            if r <= 0.0 {
                0.0
            } else {
                (ln_circular_radial(n1, r) + ln_circular_radial(n2, r) + 3.0 * r.ln()).exp()
            }
        };
        let scale = (n1.max(n2) as f64).powi(2);
        adaptive_simpson(&f, 0.0, hi, 1e-13 * scale)
    }
}
