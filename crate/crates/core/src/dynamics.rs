//! Two-atom open-system dynamics through the pi - 2pi - pi blockade sequence.
//!
//! Each atom carries the levels `{|0>, |g>, |1>, |r>}` (indices 0..4), where
//! `|g>` collects the ground sublevels outside the qubit. Pair states use the
//! Kronecker order control ⊗ target, so pair index = `4 * c + t` and `|rr>` is
//! the last of the 16 basis states.
//!
//! Density matrices are vectorized by column stacking, so
//! `vec(A X B) = (B^T ⊗ A) vec(X)`, and the master equation becomes
//! `d vec(rho)/dt = G vec(rho)` with a 256 x 256 generator `G`. Within one
//! pulse the generator is constant and the segment is propagated exactly by
//! `exp(G t)`.
//!
//! The two-atom dissipator is the sum of single-atom dissipators, each acting
//! on its own tensor factor: jump operators `L ⊗ I` and `I ⊗ L`. This also
//! fixes the damping of coherences between the two atoms, which the
//! single-atom matrix form leaves implicit.
//!
//! The Hamiltonian is written in a frame where `|0>` sits at `-omega_10`, so
//! an idle qubit precesses at `omega_10`. [`CzSequence`] removes that
//! deterministic single-qubit rotation at readout (see [`qubit_frame`]), which
//! makes the ideal gate `diag(1, -1, -1, -1)` on the qubit subspace.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::error_model::GateParams;
use crate::numerics::{
    c, hermitian_defect, hermitian_eig, hermitian_part, identity, kron, matrix_exp, max_abs, rk4_integrate_with,
    trace, unvec_col, vec_col, CMatrix, CVector, I, ONE, ZERO,
};

pub const ATOM_DIM: usize = 4;
pub const PAIR_DIM: usize = ATOM_DIM * ATOM_DIM;

/// Single-atom level indices.
pub const LEVEL_0: usize = 0;
pub const LEVEL_G: usize = 1;
pub const LEVEL_1: usize = 2;
pub const LEVEL_R: usize = 3;

/// Pair index of `|c t>`.
pub const fn pair_index(control: usize, target: usize) -> usize {
    ATOM_DIM * control + target
}

/// Branching ratio of `|r>` into each qubit level; `|g>` takes the rest.
pub const QUBIT_BRANCHING: f64 = 1.0 / 16.0;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const EIGEN_TOL: f64 = 1e-9;

/// A validated density matrix on one atom (4 x 4) or a pair (16 x 16).
///
/// Trace may be below one (population lost from a subspace) but not above.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let dim = m.nrows();
        if !m.is_square() || !(dim == ATOM_DIM || dim == PAIR_DIM) {
            return Err(Error::Dimension {
                expected: "4x4 or 16x16".into(),
                found: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        let scale = max_abs(&m);
        let asymmetry = hermitian_defect(&m);
        if asymmetry > HERMITIAN_TOL * scale.max(1.0) {
            return Err(Error::NotHermitian { asymmetry, scale });
        }
        let tr = trace(&m).re;
        if !(-TRACE_TOL..=1.0 + TRACE_TOL).contains(&tr) {
            return Err(Error::InvalidState(format!(
                "trace {tr} outside [0, 1]"
            )));
        }
        let (values, _) = hermitian_eig(&hermitian_part(&m))?;
        if values[0] < -EIGEN_TOL {
            return Err(Error::NotPsd {
                min_eigenvalue: values[0],
            });
        }
        Ok(DensityMatrix(m))
    }

    /// `|psi><psi|` for a normalized state vector.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!(
                "state vector norm {norm} is not 1"
            )));
        }
        Self::new(psi * psi.adjoint())
    }

    /// `|b><b|` for a single basis state.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::Dimension {
                expected: format!("index < {dim}"),
                found: index.to_string(),
            });
        }
        let mut m = CMatrix::zeros(dim, dim);
        m[(index, index)] = ONE;
        Self::new(m)
    }

    /// `rho_c ⊗ rho_t` for two single-atom states.
    pub fn product(control: &DensityMatrix, target: &DensityMatrix) -> Result<Self> {
        if control.dim() != ATOM_DIM || target.dim() != ATOM_DIM {
            return Err(Error::Dimension {
                expected: "two 4x4 single-atom states".into(),
                found: format!("{} and {}", control.dim(), target.dim()),
            });
        }
        Self::new(kron(&control.0, &target.0))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        trace(&self.0).re
    }

    pub fn population(&self, index: usize) -> f64 {
        self.0[(index, index)].re
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eig(&hermitian_part(&self.0))?.0[0])
    }

    /// `<psi| rho |psi>`.
    pub fn overlap_with_pure(&self, psi: &CVector) -> f64 {
        (psi.adjoint() * &self.0 * psi)[(0, 0)].re
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Atom {
    Control,
    Target,
}

/// A square resonant pulse on the `|1> <-> |r>` transition of one atom; the
/// other atom is undriven for its duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSegment {
    pub atom: Atom,
    /// Pulse area `Omega * t` (rad).
    pub area: f64,
    /// Rabi frequency (rad/s).
    pub omega: f64,
}

impl PulseSegment {
    pub fn new(atom: Atom, area: f64, omega: f64) -> Result<Self> {
        if !(area > 0.0) || !area.is_finite() || !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::Domain(format!(
                "pulse area and Rabi frequency must be positive, got {area}, {omega}"
            )));
        }
        Ok(PulseSegment { atom, area, omega })
    }

    pub fn duration(&self) -> f64 {
        self.area / self.omega
    }

    fn rabi(&self, atom: Atom) -> f64 {
        if atom == self.atom {
            self.omega
        } else {
            0.0
        }
    }
}

/// The three pulses `{pi_c, (2 pi)_t, pi_c}` of the blockade gate.
pub fn cz_pulses(omega: f64) -> Result<[PulseSegment; 3]> {
    let pi_c = PulseSegment::new(Atom::Control, PI, omega)?;
    let two_pi_t = PulseSegment::new(Atom::Target, 2.0 * PI, omega)?;
    Ok([pi_c, two_pi_t, pi_c])
}

/// Total duration of the gate, `4 pi / Omega`.
pub fn cz_duration(omega: f64) -> f64 {
    4.0 * PI / omega
}

/// Single-atom Hamiltonian over `hbar` (rad/s) in the `{|0>,|g>,|1>,|r>}`
/// basis: `|0>` at `-omega_10`, and `Omega/2` couplings from `|r>` to both
/// qubit levels.
pub fn single_atom_hamiltonian(omega: Complex64, omega_10: f64) -> CMatrix {
    let mut h = CMatrix::zeros(ATOM_DIM, ATOM_DIM);
    let half = omega * 0.5;
    h[(LEVEL_0, LEVEL_0)] = c(-omega_10, 0.0);
    h[(LEVEL_0, LEVEL_R)] = half.conj();
    h[(LEVEL_1, LEVEL_R)] = half.conj();
    h[(LEVEL_R, LEVEL_0)] = half;
    h[(LEVEL_R, LEVEL_1)] = half;
    h
}

/// Jump operators for Rydberg decay at total rate `gamma_r`:
/// `sqrt(gamma/16)|0><r|`, `sqrt(7 gamma/8)|g><r|`, `sqrt(gamma/16)|1><r|`.
pub fn single_atom_jumps(gamma_r: f64) -> Result<Vec<CMatrix>> {
    if !(gamma_r >= 0.0) || !gamma_r.is_finite() {
        return Err(Error::Domain(format!(
            "decay rate must be finite and non-negative, got {gamma_r}"
        )));
    }
    let branches = [
        (LEVEL_0, QUBIT_BRANCHING),
        (LEVEL_G, 1.0 - 2.0 * QUBIT_BRANCHING),
        (LEVEL_1, QUBIT_BRANCHING),
    ];
    Ok(branches
        .iter()
        .map(|&(to, ratio)| {
            let mut l = CMatrix::zeros(ATOM_DIM, ATOM_DIM);
            l[(to, LEVEL_R)] = c((gamma_r * ratio).sqrt(), 0.0);
            l
        })
        .collect())
}

/// Column-stacked Lindblad generator
/// `G = -i(I ⊗ H - H^T ⊗ I) + sum_k [conj(L_k) ⊗ L_k - (I ⊗ L_k^† L_k + (L_k^† L_k)^T ⊗ I)/2]`.
pub fn lindblad_generator(h: &CMatrix, jumps: &[CMatrix]) -> CMatrix {
    let n = h.nrows();
    let eye = identity(n);
    let mut g = (kron(&eye, h) - kron(&h.transpose(), &eye)) * (-I);
    for l in jumps {
        let ldl = l.adjoint() * l;
        g += kron(&l.map(|z| z.conj()), l);
        g -= (kron(&eye, &ldl) + kron(&ldl.transpose(), &eye)) * c(0.5, 0.0);
    }
    g
}

/// Dissipative part of the single-atom generator as a 16 x 16 superoperator.
pub fn single_atom_liouvillian(gamma_r: f64) -> Result<CMatrix> {
    let zero = CMatrix::zeros(ATOM_DIM, ATOM_DIM);
    Ok(lindblad_generator(&zero, &single_atom_jumps(gamma_r)?))
}

/// Pair Hamiltonian over `hbar` during one segment:
/// `H_c ⊗ I + I ⊗ H_t + B |rr><rr|`.
pub fn two_atom_hamiltonian(params: &GateParams, segment: &PulseSegment) -> CMatrix {
    let eye = identity(ATOM_DIM);
    let hc = single_atom_hamiltonian(c(segment.rabi(Atom::Control), 0.0), params.omega_10);
    let ht = single_atom_hamiltonian(c(segment.rabi(Atom::Target), 0.0), params.omega_10);
    let mut h = kron(&hc, &eye) + kron(&eye, &ht);
    let rr = pair_index(LEVEL_R, LEVEL_R);
    h[(rr, rr)] += c(params.blockade, 0.0);
    h
}

/// Jump operators of both atoms lifted to the pair space.
pub fn two_atom_jumps(gamma_r: f64) -> Result<Vec<CMatrix>> {
    let eye = identity(ATOM_DIM);
    let single = single_atom_jumps(gamma_r)?;
    Ok(single
        .iter()
        .map(|l| kron(l, &eye))
        .chain(single.iter().map(|l| kron(&eye, l)))
        .collect())
}

/// Full 256 x 256 generator of one pulse segment.
pub fn two_atom_generator(params: &GateParams, segment: &PulseSegment) -> Result<CMatrix> {
    params.validate()?;
    Ok(lindblad_generator(
        &two_atom_hamiltonian(params, segment),
        &two_atom_jumps(params.gamma_r())?,
    ))
}

/// Applies a column-stacked superoperator to a matrix.
pub fn apply_superoperator(superop: &CMatrix, rho: &CMatrix) -> CMatrix {
    unvec_col(&(superop * vec_col(rho)), rho.nrows())
}

/// `exp(G t)` for one segment.
pub fn segment_propagator(params: &GateParams, segment: &PulseSegment) -> Result<CMatrix> {
    let g = two_atom_generator(params, segment)?;
    Ok(matrix_exp(&(g * c(segment.duration(), 0.0))))
}

/// Evolves a pair state through one segment by the exact propagator.
pub fn propagate(
    rho0: &DensityMatrix,
    params: &GateParams,
    segment: &PulseSegment,
) -> Result<DensityMatrix> {
    check_pair(rho0)?;
    let p = segment_propagator(params, segment)?;
    DensityMatrix::new(apply_superoperator(&p, rho0.matrix()))
}

fn check_pair(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != PAIR_DIM {
        return Err(Error::Dimension {
            expected: "16x16 pair state".into(),
            found: format!("{0}x{0}", rho.dim()),
        });
    }
    Ok(())
}

/// Pair unitary `R ⊗ R`, `R = diag(exp(-i omega_10 t), 1, 1, 1)`, undoing the
/// free precession of `|0>` accumulated over time `t`.
pub fn qubit_frame(omega_10: f64, t: f64) -> CMatrix {
    let mut r = identity(ATOM_DIM);
    r[(LEVEL_0, LEVEL_0)] = Complex64::from_polar(1.0, -omega_10 * t);
    kron(&r, &r)
}

/// The complete gate as one superoperator, built once and applied to any
/// number of inputs.
#[derive(Debug, Clone)]
pub struct CzSequence {
    params: GateParams,
    /// Gate map including the readout frame correction.
    map: CMatrix,
}

impl CzSequence {
    pub fn new(params: &GateParams) -> Result<Self> {
        params.validate()?;
        let [pi_c, two_pi_t, _] = cz_pulses(params.omega)?;
        let control = segment_propagator(params, &pi_c)?;
        let target = segment_propagator(params, &two_pi_t)?;
        let frame = qubit_frame(params.omega_10, cz_duration(params.omega));
        let frame_super = kron(&frame.map(|z| z.conj()), &frame);
        let map = frame_super * (&control * (target * &control));
        Ok(CzSequence {
            params: *params,
            map,
        })
    }

    pub fn params(&self) -> &GateParams {
        &self.params
    }

    /// The 256 x 256 superoperator of the whole gate.
    pub fn superoperator(&self) -> &CMatrix {
        &self.map
    }

    pub fn apply(&self, rho0: &DensityMatrix) -> Result<DensityMatrix> {
        check_pair(rho0)?;
        DensityMatrix::new(apply_superoperator(&self.map, rho0.matrix()))
    }
}

/// Runs `{pi_c, (2 pi)_t, pi_c}` on one input and returns the output in the
/// qubit frame.
pub fn run_cz_sequence(rho0: &DensityMatrix, params: &GateParams) -> Result<DensityMatrix> {
    CzSequence::new(params)?.apply(rho0)
}

/// Target size of `omega_max * h` for [`propagate_rk4`], where `omega_max`
/// is the fastest interaction-picture phase.
pub const RK4_PHASE_STEP: f64 = 0.05;

/// Independent reference for one segment: classical RK4 on the master
/// equation in the interaction picture of the generator's diagonal.
///
/// Writing `G = D + O` with `D` diagonal, `x = exp(-D t) vec(rho)` obeys
/// `dx/dt = exp(-D t) O exp(D t) x`. The fast Hamiltonian phases then only
/// enter through the weak couplings, so the step needs to resolve them but
/// the error scales with `Omega` rather than `omega_10` or `B`.
pub fn propagate_rk4(
    rho0: &DensityMatrix,
    params: &GateParams,
    segment: &PulseSegment,
    phase_step: f64,
) -> Result<DensityMatrix> {
    check_pair(rho0)?;
    if !(phase_step > 0.0) {
        return Err(Error::Domain(format!(
            "phase step must be positive, got {phase_step}"
        )));
    }
    let g = two_atom_generator(params, segment)?;
    let n = g.nrows();
    let d: Vec<Complex64> = (0..n).map(|j| g[(j, j)]).collect();
    let mut couplings = Vec::new();
    let mut omega_max = 0.0_f64;
    let mut coupling_max = 0.0_f64;
    for col in 0..n {
        for row in 0..n {
            let v = g[(row, col)];
            if row != col && v != ZERO {
                couplings.push((row, col, v));
                omega_max = omega_max.max((d[row] - d[col]).im.abs());
                coupling_max = coupling_max.max(v.norm());
            }
        }
    }
    let t = segment.duration();
    let rate = omega_max.max(coupling_max);
    let steps = ((rate * t / phase_step).ceil() as usize).max(16);
    let h = t / steps as f64;

    // exp(D t) is advanced by half steps, matching the RK4 stage times; any
    // other time falls back to direct evaluation.
    let half_step: Vec<Complex64> = d.iter().map(|&x| (x * (0.5 * h)).exp()).collect();
    let mut phase_t = 0.0;
    let mut phase: Vec<Complex64> = vec![ONE; n];
    let rhs = |s: f64, x: &CVector| -> CVector {
        if s != phase_t {
            if ((s - phase_t) - 0.5 * h).abs() <= 1e-9 * h {
                for (p, f) in phase.iter_mut().zip(&half_step) {
                    *p *= f;
                }
            } else {
                for (p, &dj) in phase.iter_mut().zip(&d) {
                    *p = (dj * s).exp();
                }
            }
            phase_t = s;
        }
        let u: Vec<Complex64> = x.iter().zip(&phase).map(|(a, p)| a * p).collect();
        let mut out = CVector::zeros(n);
        for &(row, col, v) in &couplings {
            out[row] += v * u[col];
        }
        for (o, p) in out.iter_mut().zip(&phase) {
            *o /= p;
        }
        out
    };
    let x = rk4_integrate_with(rhs, &vec_col(rho0.matrix()), (0.0, t), steps);
    let y = CVector::from_iterator(n, x.iter().zip(&d).map(|(a, &dj)| a * (dj * t).exp()));
    DensityMatrix::new(unvec_col(&y, PAIR_DIM))
}
