//! Simulated state and process tomography of the blockade gate.
//!
//! Conventions, fixed here and used everywhere:
//!
//! * Two-qubit states are 4 x 4 in the basis `|ct>` with index `2 c + t`.
//! * The process basis is the unnormalized Pauli products
//!   `P_m = sigma_a ⊗ sigma_b`, `m = 4 a + b`, with `sigma = (I, X, Y, Z)`.
//!   A channel is `E(rho) = sum_mn chi_mn P_m rho P_n^†`, so a
//!   trace-preserving map has `Tr chi = 1`.
//! * The Choi matrix is `J = sum_ij |i><j| ⊗ E(|i><j|)` (input factor first),
//!   so `J = V chi V^†` where column `m` of `V` is `vec(P_m)`, and
//!   `chi = V^† J V / 16`.
//! * Each reconstructed state is `T T^† / Tr(T T^†)` with `T` lower triangular
//!   with a real diagonal; each reconstructed process is
//!   `J = N(A A^†)`, where `N(K) = (S^{-1/2} ⊗ I) K (S^{-1/2} ⊗ I)` and
//!   `S = Tr_out K`. The normalization makes every candidate exactly
//!   completely positive and trace preserving.
//! * Both fits maximize the multinomial likelihood, written as the relative
//!   entropy `sum_k p_k ln(p_k / q_k)` between data `p` and model `q`.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, CzSequence, DensityMatrix, LEVEL_0, LEVEL_1};
use crate::error::{Error, Result};
use crate::error_model::GateParams;
use crate::numerics::{
    c, complex_matrix, hermitian_eig, hermitian_part, identity, kron, max_abs, trace,
    unvec_col, vec_col, CMatrix, CVector, I, ONE, ZERO,
};
use crate::optim::{self, LbfgsOptions, StopReason};

pub const QUBITS_DIM: usize = 4;
pub const PROCESS_DIM: usize = QUBITS_DIM * QUBITS_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

pub const PAULIS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
/// Single-qubit measurement bases; each pair of them is one setting.
pub const MEASUREMENT_BASES: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

impl Pauli {
    pub fn matrix(self) -> CMatrix {
        let entries = match self {
            Pauli::I => [ONE, ZERO, ZERO, ONE],
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, -I, I, ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        };
        CMatrix::from_row_slice(2, 2, &entries)
    }

    pub fn label(self) -> &'static str {
        match self {
            Pauli::I => "I",
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        }
    }

    /// Projector onto the `sign = +1` or `-1` eigenspace.
    fn projector(self, sign: f64) -> CMatrix {
        (identity(2) + self.matrix() * c(sign, 0.0)) * c(0.5, 0.0)
    }
}

/// `P_m` of the process basis.
pub fn pauli_pair(m: usize) -> CMatrix {
    kron(&PAULIS[m / 4].matrix(), &PAULIS[m % 4].matrix())
}

pub fn pauli_pair_label(m: usize) -> String {
    format!("{}{}", PAULIS[m / 4].label(), PAULIS[m % 4].label())
}

/// Qubit input states `|0>, |1>, |+>, |+i>`.
pub const INPUT_LABELS: [&str; 4] = ["0", "1", "+", "+i"];

fn qubit_input(k: usize) -> CVector {
    let s = 0.5f64.sqrt();
    let (a, b) = match k {
        0 => (ONE, ZERO),
        1 => (ZERO, ONE),
        2 => (c(s, 0.0), c(s, 0.0)),
        _ => (c(s, 0.0), c(0.0, s)),
    };
    CVector::from_column_slice(&[a, b])
}

/// Embeds a qubit vector into the four atomic levels.
fn atomic_input(k: usize) -> CVector {
    let q = qubit_input(k);
    let mut v = CVector::zeros(dynamics::ATOM_DIM);
    v[LEVEL_0] = q[0];
    v[LEVEL_1] = q[1];
    v
}

/// One of the 16 product inputs, as a two-qubit state and as the
/// corresponding two-atom state.
#[derive(Debug, Clone)]
pub struct QptInput {
    pub label: String,
    pub qubits: CMatrix,
    pub atoms: DensityMatrix,
}

/// The 16 inputs, control-major: input `4 i + j` has the control in state
/// `i` and the target in state `j` of `INPUT_LABELS`.
pub fn qpt_input_states() -> Vec<QptInput> {
    let mut inputs = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            let q = qubit_input(i).kronecker(&qubit_input(j));
            let a = atomic_input(i).kronecker(&atomic_input(j));
            inputs.push(QptInput {
                label: format!("{},{}", INPUT_LABELS[i], INPUT_LABELS[j]),
                qubits: &q * q.adjoint(),
                atoms: DensityMatrix::pure(&a).expect("inputs are normalized"),
            });
        }
    }
    inputs
}

fn qubit_levels() -> [usize; 4] {
    [
        dynamics::pair_index(LEVEL_0, LEVEL_0),
        dynamics::pair_index(LEVEL_0, LEVEL_1),
        dynamics::pair_index(LEVEL_1, LEVEL_0),
        dynamics::pair_index(LEVEL_1, LEVEL_1),
    ]
}

/// Restricts a pair state to the qubit subspace without renormalizing, and
/// returns it with the trace loss `1 - Tr(rho4)`.
pub fn project_to_computational(rho: &DensityMatrix) -> Result<(CMatrix, f64)> {
    if rho.dim() != dynamics::PAIR_DIM {
        return Err(Error::Dimension {
            expected: "16x16 pair state".into(),
            found: format!("{0}x{0}", rho.dim()),
        });
    }
    let idx = qubit_levels();
    let m = rho.matrix();
    let rho4 = CMatrix::from_fn(QUBITS_DIM, QUBITS_DIM, |i, j| m[(idx[i], idx[j])]);
    let loss = (1.0 - trace(&rho4).re).clamp(0.0, 1.0);
    Ok((rho4, loss))
}

/// Outcome order within a setting: `(+,+), (+,-), (-,+), (-,-)` for
/// (control, target).
pub const OUTCOME_SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub control: Pauli,
    pub target: Pauli,
    pub probabilities: [f64; 4],
}

/// Outcome probabilities of the nine Pauli-pair settings (36 numbers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    pub settings: Vec<Setting>,
}

impl ProbabilityTable {
    pub fn flattened(&self) -> Vec<f64> {
        self.settings
            .iter()
            .flat_map(|s| s.probabilities)
            .collect()
    }
}

/// The 36 outcome projectors, in table order.
pub fn measurement_projectors() -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(36);
    for a in MEASUREMENT_BASES {
        for b in MEASUREMENT_BASES {
            for (sa, sb) in OUTCOME_SIGNS {
                out.push(kron(&a.projector(sa), &b.projector(sb)));
            }
        }
    }
    out
}

/// `Tr(A B)` without forming the product.
fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn check_qubit_state(rho: &CMatrix) -> Result<()> {
    if rho.nrows() != QUBITS_DIM || rho.ncols() != QUBITS_DIM {
        return Err(Error::Dimension {
            expected: "4x4 two-qubit matrix".into(),
            found: format!("{}x{}", rho.nrows(), rho.ncols()),
        });
    }
    Ok(())
}

/// Noise-free Born probabilities `Tr(Pi rho)` of the 36 outcomes. For a
/// subnormalized `rho` each setting sums to `Tr(rho)`.
pub fn measurement_probabilities(rho: &CMatrix) -> Result<ProbabilityTable> {
    check_qubit_state(rho)?;
    let projectors = measurement_projectors();
    let mut settings = Vec::with_capacity(9);
    let mut k = 0;
    for a in MEASUREMENT_BASES {
        for b in MEASUREMENT_BASES {
            let mut probabilities = [0.0; 4];
            for p in probabilities.iter_mut() {
                *p = trace_product(&projectors[k], rho).re.max(0.0);
                k += 1;
            }
            settings.push(Setting {
                control: a,
                target: b,
                probabilities,
            });
        }
    }
    Ok(ProbabilityTable { settings })
}

/// Finite-shot measurement record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sampling {
    /// Repetitions per setting.
    pub shots: u64,
    pub seed: u64,
}

/// Replaces each setting's probabilities by multinomial frequencies from
/// `shots` draws. Shots that land outside the qubit subspace (probability
/// `1 - Tr rho`) are discarded, so frequencies keep the trace loss.
pub fn sample_probabilities(
    table: &ProbabilityTable,
    shots: u64,
    rng: &mut impl rand::Rng,
) -> Result<ProbabilityTable> {
    if shots == 0 {
        return Err(Error::Domain("sampling needs at least one shot".into()));
    }
    let mut settings = table.settings.clone();
    for s in settings.iter_mut() {
        let lost = (1.0 - s.probabilities.iter().sum::<f64>()).max(0.0);
        let mut weights = s.probabilities.to_vec();
        weights.push(lost);
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::Numerical(format!("invalid outcome weights: {e}")))?;
        let mut counts = [0u64; 5];
        for _ in 0..shots {
            counts[dist.sample(rng)] += 1;
        }
        for (p, n) in s.probabilities.iter_mut().zip(counts) {
            *p = n as f64 / shots as f64;
        }
    }
    Ok(ProbabilityTable { settings })
}

/// Linear-inversion estimate `sum_m <P_m> P_m / 4` from the table; Pauli
/// expectations with an identity factor are averaged over the settings that
/// contain them.
pub fn linear_inversion_state(table: &ProbabilityTable) -> CMatrix {
    let mut sums = [0.0; 16];
    let mut counts = [0usize; 16];
    for s in &table.settings {
        let (a, b) = (s.control as usize, s.target as usize);
        for (p, (sa, sb)) in s.probabilities.iter().zip(OUTCOME_SIGNS) {
            for (m, w) in [(0, 1.0), (4 * a, sa), (b, sb), (4 * a + b, sa * sb)] {
                sums[m] += w * p;
            }
        }
        for m in [0, 4 * a, b, 4 * a + b] {
            counts[m] += 1;
        }
    }
    let mut rho = CMatrix::zeros(4, 4);
    for m in 0..16 {
        if counts[m] > 0 {
            rho += pauli_pair(m) * c(sums[m] / counts[m] as f64 / 4.0, 0.0);
        }
    }
    rho
}

/// How a likelihood fit ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Final relative entropy between data and model.
    pub cost: f64,
    pub stop_reason: String,
}

impl FitDiagnostics {
    fn from_result(r: &optim::LbfgsResult) -> Self {
        FitDiagnostics {
            converged: r.reason == StopReason::GradientTolerance,
            iterations: r.iterations,
            gradient_norm: r.gradient_norm,
            cost: r.value,
            stop_reason: match r.reason {
                StopReason::GradientTolerance => "gradient tolerance reached",
                StopReason::MaxIterations => "iteration limit reached",
                StopReason::Stalled => "line search stalled at objective resolution",
            }
            .into(),
        }
    }
}

/// Unpacks `2 d^2 - d` reals into a lower-triangular matrix with a real
/// diagonal.
fn unpack_lower(x: &[f64], d: usize) -> CMatrix {
    let mut t = CMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        t[(i, i)] = c(x[k], 0.0);
        k += 1;
        for j in 0..i {
            t[(i, j)] = c(x[k], x[k + 1]);
            k += 2;
        }
    }
    t
}

/// Inverse of [`unpack_lower`] for the gradient `dF/dRe T + i dF/dIm T`.
fn pack_lower(g: &CMatrix) -> Vec<f64> {
    let d = g.nrows();
    let mut x = Vec::with_capacity(d * d);
    for i in 0..d {
        x.push(g[(i, i)].re);
        for j in 0..i {
            x.push(g[(i, j)].re);
            x.push(g[(i, j)].im);
        }
    }
    x
}

/// Eigenvalue floor added to linear-inversion estimates before they seed a
/// fit. It must stay tiny: the likelihood is quartic in the Cholesky entries
/// of directions the data assign zero weight, so a fit started away from such
/// a boundary approaches it only sublinearly.
const START_FLOOR: f64 = 1e-13;

/// Cholesky factor of `m + floor * I` after clipping eigenvalues at zero.
fn regularized_cholesky(m: &CMatrix, floor: f64) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eig(&hermitian_part(m))?;
    let clipped: Vec<f64> = values.iter().map(|&v| v.max(0.0) + floor).collect();
    let psd = &vectors * crate::numerics::real_diag(&clipped) * vectors.adjoint();
    let chol = nalgebra::Cholesky::new(hermitian_part(&psd))
        .ok_or_else(|| Error::Numerical("Cholesky factorization failed".into()))?;
    Ok(chol.l())
}

/// Data probabilities below this are round-off from exact Born
/// probabilities and are fitted as exact zeros. Left in, a `p ~ 1e-17`
/// against a model `q ~ 1e-20` would dominate the gradient through `p/q`.
const PROBABILITY_FLOOR: f64 = 1e-14;

fn clean_data(p: f64) -> f64 {
    if p < PROBABILITY_FLOOR {
        0.0
    } else {
        p
    }
}

/// Generalized relative entropy `sum_k [p ln(p/q) - p + q]`.
///
/// Model and data share their per-setting totals at the optimum, so the
/// extra `q - p` terms do not move it, but they make every summand
/// non-negative and second order in `q - p`: written as
/// `p (x - ln(1 + x))` with `x = (q - p)/p`, nothing cancels near the
/// optimum and the objective stays resolvable far below `1e-13`.
fn relative_entropy(data: &[f64], model: &[f64]) -> f64 {
    let mut cost = 0.0;
    for (&p, &q) in data.iter().zip(model) {
        if p > 0.0 {
            if !(q > 0.0) {
                return f64::INFINITY;
            }
            let x = (q - p) / p;
            cost += p * (x - x.ln_1p());
        } else {
            cost += q;
        }
    }
    cost
}

/// Derivative of [`relative_entropy`] with respect to each model
/// probability, `1 - p/q`.
fn entropy_weights(data: &[f64], model: &[f64]) -> Vec<f64> {
    data.iter()
        .zip(model)
        .map(|(&p, &q)| if p > 0.0 { (q - p) / q } else { 1.0 })
        .collect()
}

/// A reconstructed unit-trace state with its fit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateEstimate {
    #[serde(with = "complex_matrix")]
    pub rho: CMatrix,
    pub diagnostics: FitDiagnostics,
}

/// Maximum-likelihood state reconstruction from a probability table.
pub fn mle_state(table: &ProbabilityTable) -> Result<StateEstimate> {
    mle_state_with(table, LbfgsOptions::default())
}

fn mle_state_with(table: &ProbabilityTable, opts: LbfgsOptions) -> Result<StateEstimate> {
    let raw = table.flattened();
    let projectors = measurement_projectors();
    if raw.len() != projectors.len() {
        return Err(Error::Dimension {
            expected: format!("{} outcome probabilities", projectors.len()),
            found: raw.len().to_string(),
        });
    }
    if raw.iter().any(|p| !(p.is_finite() && *p >= -PROBABILITY_FLOOR)) {
        return Err(Error::Domain("probabilities must be finite and non-negative".into()));
    }
    let data: Vec<f64> = raw.into_iter().map(clean_data).collect();
    let lin = linear_inversion_state(table);
    let tr = trace(&lin).re;
    if !(tr > 0.0) {
        return Err(Error::Domain("probability table carries no population".into()));
    }
    let start = regularized_cholesky(&(lin / c(tr, 0.0)), START_FLOOR)?;

    let d = QUBITS_DIM;
    let objective = |x: &[f64]| {
        let t = unpack_lower(x, d);
        let k = &t * t.adjoint();
        let norm = trace(&k).re;
        let rho = k / c(norm, 0.0);
        let model: Vec<f64> = projectors.iter().map(|p| trace_product(p, &rho).re).collect();
        let cost = relative_entropy(&data, &model);
        if !cost.is_finite() {
            return (cost, vec![0.0; x.len()]);
        }
        let w = entropy_weights(&data, &model);
        let mut f = CMatrix::zeros(d, d);
        for (p, wk) in projectors.iter().zip(&w) {
            f += p * c(*wk, 0.0);
        }
        let shift = trace_product(&f, &rho).re;
        let g = (f - identity(d) * c(shift, 0.0)) * &t * c(2.0 / norm, 0.0);
        (cost, pack_lower(&g))
    };
    let result = optim::minimize(objective, pack_lower(&start), opts);
    let t = unpack_lower(&result.x, d);
    let k = &t * t.adjoint();
    let rho = hermitian_part(&(&k / c(trace(&k).re, 0.0)));
    Ok(StateEstimate {
        rho,
        diagnostics: FitDiagnostics::from_result(&result),
    })
}

/// Process matrix in the two-qubit Pauli basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChiMatrix(#[serde(with = "complex_matrix")] CMatrix);

impl ChiMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != PROCESS_DIM || m.ncols() != PROCESS_DIM {
            return Err(Error::Dimension {
                expected: "16x16 process matrix".into(),
                found: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        Ok(ChiMatrix(m))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        trace(&self.0).re
    }

    /// `max |sum_mn chi_mn P_n^† P_m - I|`, zero for a trace-preserving map.
    pub fn trace_preservation_defect(&self) -> f64 {
        let j = choi_from_chi(self);
        max_abs(&(partial_trace_output(&j) - identity(QUBITS_DIM)))
    }

    /// Applies the channel to a two-qubit matrix.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        apply_choi(&choi_from_chi(self), rho)
    }
}

fn pauli_vectors() -> CMatrix {
    let mut v = CMatrix::zeros(PROCESS_DIM, PROCESS_DIM);
    for m in 0..PROCESS_DIM {
        v.set_column(m, &vec_col(&pauli_pair(m)));
    }
    v
}

pub fn chi_from_choi(j: &CMatrix) -> ChiMatrix {
    let v = pauli_vectors();
    ChiMatrix(v.adjoint() * j * v / c(16.0, 0.0))
}

pub fn choi_from_chi(chi: &ChiMatrix) -> CMatrix {
    let v = pauli_vectors();
    &v * &chi.0 * v.adjoint()
}

/// Choi matrix of the column-stacked superoperator `s`.
pub fn choi_from_superoperator(s: &CMatrix) -> CMatrix {
    let d = QUBITS_DIM;
    CMatrix::from_fn(d * d, d * d, |r, col| {
        let (i, a) = (r / d, r % d);
        let (j, b) = (col / d, col % d);
        s[(a + d * b, i + d * j)]
    })
}

/// `E(rho)_{ab} = sum_ij rho_ij J_{(i,a),(j,b)}`.
pub fn apply_choi(j: &CMatrix, rho: &CMatrix) -> CMatrix {
    let d = rho.nrows();
    CMatrix::from_fn(d, d, |a, b| {
        let mut acc = ZERO;
        for i in 0..d {
            for k in 0..d {
                acc += rho[(i, k)] * j[(d * i + a, d * k + b)];
            }
        }
        acc
    })
}

/// `Tr_out J`, the trace over the second tensor factor.
pub fn partial_trace_output(j: &CMatrix) -> CMatrix {
    let d = QUBITS_DIM;
    CMatrix::from_fn(d, d, |i, k| (0..d).map(|a| j[(d * i + a, d * k + a)]).sum())
}

/// `chi` of the unitary channel `rho -> U rho U^†`.
pub fn chi_of_unitary(u: &CMatrix) -> ChiMatrix {
    let v = vec_col(u);
    chi_from_choi(&(&v * v.adjoint()))
}

/// The blockade gate's native target `diag(1, -1, -1, -1)`.
pub fn ideal_chi_cz() -> ChiMatrix {
    chi_of_unitary(&crate::numerics::real_diag(&[1.0, -1.0, -1.0, -1.0]))
}

/// Linear-inversion and maximum-likelihood process matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiEstimate {
    pub raw: ChiMatrix,
    pub physical: ChiMatrix,
    pub diagnostics: FitDiagnostics,
}

fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0_f64, f64::max);
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Reconstructs the gate from 16 (input, output) pairs of two-qubit states.
pub fn chi_from_map(pairs: &[(CMatrix, CMatrix)]) -> Result<ChiEstimate> {
    chi_from_map_with(pairs, LbfgsOptions::default())
}

fn chi_from_map_with(pairs: &[(CMatrix, CMatrix)], opts: LbfgsOptions) -> Result<ChiEstimate> {
    let n = PROCESS_DIM;
    for (rin, rout) in pairs {
        check_qubit_state(rin)?;
        check_qubit_state(rout)?;
    }
    let mut inputs = CMatrix::zeros(n, pairs.len());
    let mut outputs = CMatrix::zeros(n, pairs.len());
    for (k, (rin, rout)) in pairs.iter().enumerate() {
        inputs.set_column(k, &vec_col(rin));
        outputs.set_column(k, &vec_col(rout));
    }
    let rank = numerical_rank(&inputs, 1e-10);
    if rank < n || pairs.len() != n {
        return Err(Error::SingularInputBasis { rank, needed: n });
    }
    let inverse = inputs
        .clone()
        .try_inverse()
        .ok_or(Error::SingularInputBasis { rank, needed: n })?;
    let superop = outputs * inverse;
    let j_lin = hermitian_part(&choi_from_superoperator(&superop));
    let raw = chi_from_choi(&j_lin);

    // Data: each output's Born probabilities; model: the same measurement on
    // the candidate channel's output, q = Tr(Pi E(rho_in)) = Tr((rho_in^T ⊗ Pi) J).
    let projectors = measurement_projectors();
    let data: Vec<f64> = pairs
        .iter()
        .flat_map(|(_, rout)| projectors.iter().map(|p| clean_data(trace_product(p, rout).re)))
        .collect();
    let transposed_inputs: Vec<CMatrix> = pairs.iter().map(|(rin, _)| rin.transpose()).collect();

    let start = regularized_cholesky(&j_lin, 4.0 * START_FLOOR)?;
    let objective = |x: &[f64]| {
        let a = unpack_lower(x, n);
        let k = &a * a.adjoint();
        let Some((j, w, s_eig)) = normalize_choi(&k) else {
            return (f64::INFINITY, vec![0.0; x.len()]);
        };
        let model: Vec<f64> = pairs
            .iter()
            .flat_map(|(rin, _)| {
                let out = apply_choi(&j, rin);
                projectors.iter().map(move |p| trace_product(p, &out).re)
            })
            .collect();
        let cost = relative_entropy(&data, &model);
        if !cost.is_finite() {
            return (cost, vec![0.0; x.len()]);
        }
        let weights = entropy_weights(&data, &model);
        let mut f = CMatrix::zeros(n, n);
        for (rt, w_in) in transposed_inputs.iter().zip(weights.chunks(projectors.len())) {
            let mut g = CMatrix::zeros(QUBITS_DIM, QUBITS_DIM);
            for (p, wk) in projectors.iter().zip(w_in) {
                g += p * c(*wk, 0.0);
            }
            f += kron(rt, &g);
        }
        // dCost = Tr(F dJ), J = W K W with W = S^{-1/2} ⊗ I.
        let wfw = &w * &f * &w;
        let x_mat = partial_trace_output(&(&k * &w * &f + &f * &w * &k));
        let (lambda, u) = s_eig;
        let rot = u.adjoint() * x_mat * &u;
        let phi = CMatrix::from_fn(QUBITS_DIM, QUBITS_DIM, |i, l| {
            let (si, sl) = (lambda[i].sqrt(), lambda[l].sqrt());
            rot[(i, l)] * c(-1.0 / (si * sl * (si + sl)), 0.0)
        });
        let y = &u * phi * u.adjoint();
        let grad_k = wfw + kron(&y, &identity(QUBITS_DIM));
        let g = grad_k * &a * c(2.0, 0.0);
        (cost, pack_lower(&g))
    };
    let result = optim::minimize(objective, pack_lower(&start), opts);
    let a = unpack_lower(&result.x, n);
    let (j, _, _) = normalize_choi(&(&a * a.adjoint()))
        .ok_or_else(|| Error::Numerical("process fit left the positive cone".into()))?;
    Ok(ChiEstimate {
        raw,
        physical: chi_from_choi(&hermitian_part(&j)),
        diagnostics: FitDiagnostics::from_result(&result),
    })
}

/// `N(K)` together with `W = S^{-1/2} ⊗ I` and the eigensystem of `S`.
#[allow(clippy::type_complexity)]
fn normalize_choi(k: &CMatrix) -> Option<(CMatrix, CMatrix, (Vec<f64>, CMatrix))> {
    let s = hermitian_part(&partial_trace_output(k));
    let (lambda, u) = hermitian_eig(&s).ok()?;
    if !(lambda[0] > 0.0) {
        return None;
    }
    let inv_sqrt = crate::numerics::real_diag(&lambda.iter().map(|l| 1.0 / l.sqrt()).collect::<Vec<_>>());
    let s_inv_sqrt = &u * inv_sqrt * u.adjoint();
    let w = kron(&s_inv_sqrt, &identity(QUBITS_DIM));
    let j = &w * k * &w;
    Some((j, w, (lambda, u)))
}

/// Square root of a PSD matrix with eigenvalues below `rel_cut * max`
/// treated as exact zeros, so that round-off in rank-deficient inputs does
/// not leak into the fidelity through `sqrt`.
fn sqrt_psd_truncated(m: &CMatrix, rel_cut: f64) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eig(&hermitian_part(m))?;
    let top = values.last().copied().unwrap_or(0.0).max(0.0);
    let tol = 1e-9 * top.max(f64::MIN_POSITIVE);
    if values[0] < -tol {
        return Err(Error::NotPsd {
            min_eigenvalue: values[0],
        });
    }
    let roots: Vec<f64> = values
        .iter()
        .map(|&v| if v > rel_cut * top { v.sqrt() } else { 0.0 })
        .collect();
    Ok(&vectors * crate::numerics::real_diag(&roots) * vectors.adjoint())
}

/// Trace-overlap error `1 - (Tr sqrt(sqrt(a) b sqrt(a)))^2` of two process
/// matrices, each normalized to unit trace first.
///
/// The trace norm is evaluated as the sum of singular values of
/// `sqrt(a) sqrt(b)`, which keeps full relative accuracy when one argument
/// is (nearly) pure.
pub fn process_error(chi_sim: &ChiMatrix, chi_id: &ChiMatrix) -> Result<f64> {
    let normalized = |chi: &ChiMatrix| -> Result<CMatrix> {
        let tr = chi.trace();
        if !(tr > 0.0) {
            return Err(Error::Domain(format!("process matrix trace {tr} is not positive")));
        }
        Ok(chi.matrix() / c(tr, 0.0))
    };
    let a = sqrt_psd_truncated(&normalized(chi_sim)?, 1e-13)?;
    let b = sqrt_psd_truncated(&normalized(chi_id)?, 1e-13)?;
    let fidelity_root: f64 = (a * b).svd(false, false).singular_values.iter().sum();
    Ok((1.0 - fidelity_root * fidelity_root).clamp(0.0, 1.0))
}

/// Everything recorded for one input of the process tomography.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyRecord {
    pub input: String,
    /// Two-atom state after the gate.
    #[serde(with = "complex_matrix")]
    pub final_state: CMatrix,
    /// Qubit block of the final state, not renormalized.
    #[serde(with = "complex_matrix")]
    pub projected: CMatrix,
    pub trace_loss: f64,
    pub probabilities: ProbabilityTable,
    pub reconstruction: StateEstimate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QptOptions {
    /// Finite-shot measurements instead of exact probabilities.
    pub sampling: Option<Sampling>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QptResult {
    pub process_error: f64,
    pub mean_trace_loss: f64,
    pub chi: ChiEstimate,
    pub records: Vec<TomographyRecord>,
}

impl QptResult {
    /// True when every state fit and the process fit met their gradient
    /// tolerance.
    pub fn all_fits_converged(&self) -> bool {
        self.chi.diagnostics.converged
            && self.records.iter().all(|r| r.reconstruction.diagnostics.converged)
    }
}

/// Full pipeline: inputs, gate dynamics, projection, state fits, process
/// fit, and the trace-overlap error against `diag(1, -1, -1, -1)`.
pub fn run_full_qpt(params: &GateParams, options: &QptOptions) -> Result<QptResult> {
    let gate = CzSequence::new(params)?;
    let mut rng = options.sampling.map(|s| ChaCha8Rng::seed_from_u64(s.seed));
    let mut records = Vec::with_capacity(16);
    let mut pairs = Vec::with_capacity(16);
    for input in qpt_input_states() {
        let out = gate.apply(&input.atoms)?;
        let (projected, trace_loss) = project_to_computational(&out)?;
        let mut probabilities = measurement_probabilities(&projected)?;
        if let (Some(s), Some(rng)) = (options.sampling, rng.as_mut()) {
            probabilities = sample_probabilities(&probabilities, s.shots, rng)?;
        }
        let reconstruction = mle_state(&probabilities)?;
        pairs.push((input.qubits.clone(), reconstruction.rho.clone()));
        records.push(TomographyRecord {
            input: input.label,
            final_state: out.into_matrix(),
            projected,
            trace_loss,
            probabilities,
            reconstruction,
        });
    }
    let chi = chi_from_map(&pairs)?;
    let process_error = process_error(&chi.physical, &ideal_chi_cz())?;
    let mean_trace_loss = records.iter().map(|r| r.trace_loss).sum::<f64>() / records.len() as f64;
    Ok(QptResult {
        process_error,
        mean_trace_loss,
        chi,
        records,
    })
}

/// Applies a column-stacked superoperator on two-qubit matrices.
pub fn apply_qubit_superoperator(s: &CMatrix, rho: &CMatrix) -> CMatrix {
    unvec_col(&(s * vec_col(rho)), rho.nrows())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{real_diag, trace_distance};
    use rand::Rng;

    fn random_state(rng: &mut ChaCha8Rng, rank: usize) -> CMatrix {
        let a = CMatrix::from_fn(4, rank, |_, _| {
            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let m = &a * a.adjoint();
        hermitian_part(&(&m / c(trace(&m).re, 0.0)))
    }

    fn random_unitary(rng: &mut ChaCha8Rng) -> CMatrix {
        let h = CMatrix::from_fn(4, 4, |_, _| c(rng.random::<f64>(), rng.random::<f64>()));
        crate::numerics::matrix_exp(&(hermitian_part(&h) * I))
    }

    fn fidelity_with_pure(rho: &CMatrix, psi: &CVector) -> f64 {
        (psi.adjoint() * rho * psi)[(0, 0)].re
    }

    /// Brute-force Choi matrix, straight from the definition.
    fn choi_of(channel: impl Fn(&CMatrix) -> CMatrix) -> CMatrix {
        let mut j = CMatrix::zeros(16, 16);
        for i in 0..4 {
            for k in 0..4 {
                let mut e = CMatrix::zeros(4, 4);
                e[(i, k)] = ONE;
                let mut eik = CMatrix::zeros(4, 4);
                eik[(i, k)] = ONE;
                j += kron(&eik, &channel(&e));
            }
        }
        j
    }

    #[test]
    fn inputs_are_pure_qubit_product_states() {
        let inputs = qpt_input_states();
        assert_eq!(inputs.len(), 16);
        assert_eq!(inputs[0].label, "0,0");
        let mut zz = CMatrix::zeros(4, 4);
        zz[(0, 0)] = ONE;
        assert_eq!(inputs[0].qubits, zz);
        for inp in &inputs {
            assert!((inp.atoms.trace() - 1.0).abs() < 1e-15);
            let (rho4, loss) = project_to_computational(&inp.atoms).unwrap();
            assert!(loss < 1e-15);
            assert!(max_abs(&(rho4 - &inp.qubits)) < 1e-15);
        }
        let mut gram = CMatrix::zeros(16, 16);
        for (k, inp) in inputs.iter().enumerate() {
            gram.set_column(k, &vec_col(&inp.qubits));
        }
        assert_eq!(numerical_rank(&gram, 1e-10), 16);
    }

    #[test]
    fn projection_of_reservoir_state_loses_everything() {
        let gg = dynamics::pair_index(dynamics::LEVEL_G, dynamics::LEVEL_G);
        let rho = DensityMatrix::basis(16, gg).unwrap();
        let (rho4, loss) = project_to_computational(&rho).unwrap();
        assert_eq!(max_abs(&rho4), 0.0);
        assert_eq!(loss, 1.0);
    }

    #[test]
    fn probabilities_of_simple_states() {
        let mut zz = CMatrix::zeros(4, 4);
        zz[(0, 0)] = ONE;
        let t = measurement_probabilities(&zz).unwrap();
        let zz_setting = t
            .settings
            .iter()
            .find(|s| s.control == Pauli::Z && s.target == Pauli::Z)
            .unwrap();
        assert_eq!(zz_setting.probabilities, [1.0, 0.0, 0.0, 0.0]);

        let mixed = identity(4) * c(0.25, 0.0);
        for s in measurement_probabilities(&mixed).unwrap().settings {
            for p in s.probabilities {
                assert!((p - 0.25).abs() < 1e-15);
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sub = random_state(&mut rng, 4) * c(0.9, 0.0);
        for s in measurement_probabilities(&sub).unwrap().settings {
            assert!((s.probabilities.iter().sum::<f64>() - 0.9).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_inversion_recovers_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_state(&mut rng, 3);
        let table = measurement_probabilities(&rho).unwrap();
        assert!(max_abs(&(linear_inversion_state(&table) - rho)) < 1e-14);
    }

    #[test]
    fn mle_recovers_pure_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..3 {
            let u = random_unitary(&mut rng);
            let psi = u.column(0).into_owned();
            let rho = &psi * psi.adjoint();
            let est = mle_state(&measurement_probabilities(&rho).unwrap()).unwrap();
            let f = fidelity_with_pure(&est.rho, &psi);
            assert!(f >= 1.0 - 1e-8, "fidelity {f}, {:?}", est.diagnostics);
        }
    }

    #[test]
    fn mle_of_maximally_mixed_state() {
        let rho = identity(4) * c(0.25, 0.0);
        let est = mle_state(&measurement_probabilities(&rho).unwrap()).unwrap();
        assert!(est.diagnostics.converged);
        assert!(max_abs(&(est.rho - rho)) < 1e-10);
    }

    #[test]
    fn mle_round_trip_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for rank in [4, 2, 1] {
            let rho = random_state(&mut rng, rank);
            let est = mle_state(&measurement_probabilities(&rho).unwrap()).unwrap();
            let d = trace_distance(&est.rho, &rho).unwrap();
            assert!(d <= 1e-6, "rank {rank}: {d:e} {:?}", est.diagnostics);
        }
    }

    #[test]
    fn mle_of_subnormalized_data_is_unit_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_state(&mut rng, 4);
        let est = mle_state(&measurement_probabilities(&(&rho * c(0.97, 0.0))).unwrap()).unwrap();
        assert!((trace(&est.rho).re - 1.0).abs() < 1e-14);
        assert!(trace_distance(&est.rho, &rho).unwrap() < 1e-6);
    }

    #[test]
    fn mle_rejects_negative_probabilities() {
        let mut table = measurement_probabilities(&real_diag(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        table.settings[0].probabilities[3] = -1e-3;
        assert!(matches!(mle_state(&table), Err(Error::Domain(_))));
        table.settings[0].probabilities[3] = f64::NAN;
        assert!(mle_state(&table).is_err());
    }

    #[test]
    fn sampled_frequencies_approach_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho = random_state(&mut rng, 2) * c(0.95, 0.0);
        let exact = measurement_probabilities(&rho).unwrap();
        let sampled = sample_probabilities(&exact, 200_000, &mut rng).unwrap();
        for (a, b) in exact.flattened().iter().zip(sampled.flattened()) {
            assert!((a - b).abs() < 5e-3);
        }
        let again = sample_probabilities(&exact, 1000, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let same = sample_probabilities(&exact, 1000, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(again, same);
    }

    #[test]
    fn choi_conversions_match_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_unitary(&mut rng);
        let j = choi_of(|e| &u * e * u.adjoint());
        let chi = chi_of_unitary(&u);
        assert!(max_abs(&(choi_from_chi(&chi) - &j)) < 1e-13);
        assert!((chi.trace() - 1.0).abs() < 1e-13);
        assert!(chi.trace_preservation_defect() < 1e-13);
        let rho = random_state(&mut rng, 4);
        assert!(max_abs(&(chi.apply(&rho) - &u * &rho * u.adjoint())) < 1e-13);
    }

    #[test]
    fn ideal_gate_chi() {
        let chi = ideal_chi_cz();
        let u = real_diag(&[1.0, -1.0, -1.0, -1.0]);
        let j = choi_of(|e| &u * e * u.adjoint());
        assert!(max_abs(&(chi_from_choi(&j).matrix() - chi.matrix())) < 1e-15);
        // Rank one on {II, IZ, ZI, ZZ} with amplitudes (-1, 1, 1, 1)/2.
        let mut amp = CVector::zeros(16);
        for (m, a) in [(0, -0.5), (3, 0.5), (12, 0.5), (15, 0.5)] {
            amp[m] = c(a, 0.0);
        }
        assert!(max_abs(&(chi.matrix() - &amp * amp.adjoint())) < 1e-15);
        let (values, _) = hermitian_eig(chi.matrix()).unwrap();
        assert_eq!(values.iter().filter(|v| v.abs() > 1e-12).count(), 1);
        assert_eq!(process_error(&chi, &chi).unwrap(), 0.0);
    }

    #[test]
    fn identity_and_depolarizing_channels() {
        let id = chi_of_unitary(&identity(4));
        let mut e0 = CMatrix::zeros(16, 16);
        e0[(0, 0)] = ONE;
        assert!(max_abs(&(id.matrix() - e0)) < 1e-15);

        let dep = chi_from_choi(&choi_of(|e| identity(4) * (trace(e) / 4.0)));
        assert!(max_abs(&(dep.matrix() - identity(16) * c(1.0 / 16.0, 0.0))) < 1e-15);
    }

    #[test]
    fn process_error_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = chi_of_unitary(&random_unitary(&mut rng));
        let b = chi_of_unitary(&random_unitary(&mut rng));
        let e_ab = process_error(&a, &b).unwrap();
        let e_ba = process_error(&b, &a).unwrap();
        assert!((e_ab - e_ba).abs() < 1e-12);
        // Orthogonal rank-one processes.
        let x = chi_of_unitary(&kron(&Pauli::X.matrix(), &identity(2)));
        assert!((process_error(&ideal_chi_cz(), &x).unwrap() - 1.0).abs() < 1e-14);
        // For a pure target the error is 1 - <u|chi|u>.
        let mixed = ChiMatrix::new(
            ideal_chi_cz().matrix() * c(0.99, 0.0) + identity(16) * c(0.01 / 16.0, 0.0),
        )
        .unwrap();
        let u = ideal_chi_cz().matrix().column(0).into_owned() * c(-2.0, 0.0);
        let want = 1.0 - (u.adjoint() * mixed.matrix() * &u)[(0, 0)].re;
        assert!((process_error(&mixed, &ideal_chi_cz()).unwrap() - want).abs() < 1e-14);
        assert!((process_error(&ideal_chi_cz(), &mixed).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn chi_fit_of_unitary_map() {
        let u = real_diag(&[1.0, -1.0, -1.0, -1.0]);
        let pairs: Vec<_> = qpt_input_states()
            .into_iter()
            .map(|inp| {
                let out = &u * &inp.qubits * u.adjoint();
                (inp.qubits, out)
            })
            .collect();
        let est = chi_from_map(&pairs).unwrap();
        assert!(max_abs(&(est.raw.matrix() - ideal_chi_cz().matrix())) < 1e-13);
        assert!(process_error(&est.physical, &ideal_chi_cz()).unwrap() < 1e-9);
        assert!(est.physical.trace_preservation_defect() < 1e-8);
    }

    #[test]
    fn chi_fit_of_noisy_channel() {
        // Amplitude damping on both qubits after a phase gate: a CPTP map
        // with full Kraus rank that the fit must reproduce.
        let p: f64 = 1e-3;
        let k0 = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c((1.0 - p).sqrt(), 0.0)]);
        let k1 = CMatrix::from_row_slice(2, 2, &[ZERO, c(p.sqrt(), 0.0), ZERO, ZERO]);
        let kraus: Vec<CMatrix> = [&k0, &k1]
            .iter()
            .flat_map(|a| [&k0, &k1].map(|b| kron(a, b)))
            .collect();
        let u = real_diag(&[1.0, -1.0, -1.0, -1.0]);
        let channel = |rho: &CMatrix| -> CMatrix {
            let r = &u * rho * u.adjoint();
            kraus.iter().map(|k| k * &r * k.adjoint()).sum()
        };
        let truth = chi_from_choi(&choi_of(channel));
        let pairs: Vec<_> = qpt_input_states()
            .into_iter()
            .map(|inp| {
                let out = channel(&inp.qubits);
                (inp.qubits, out)
            })
            .collect();
        let est = chi_from_map(&pairs).unwrap();
        assert!(est.physical.trace_preservation_defect() < 1e-8);
        let d = max_abs(&(est.physical.matrix() - truth.matrix()));
        assert!(d < 1e-7, "{d:e} {:?}", est.diagnostics);
        for (rin, rout) in &pairs {
            assert!(trace_distance(&est.physical.apply(rin), rout).unwrap() <= 1e-4);
        }
    }

    #[test]
    fn singular_input_set_is_rejected() {
        let inputs = qpt_input_states();
        let mut pairs: Vec<_> = inputs.iter().map(|i| (i.qubits.clone(), i.qubits.clone())).collect();
        pairs[15] = pairs[0].clone();
        assert!(matches!(
            chi_from_map(&pairs),
            Err(Error::SingularInputBasis { rank: 15, needed: 16 })
        ));
    }

    #[test]
    fn ideal_limit_pipeline() {
        let p = GateParams::new(1.0, 1e5, 1e5, f64::INFINITY).unwrap();
        let r = run_full_qpt(&p, &QptOptions::default()).unwrap();
        assert!(r.process_error <= 1e-8, "{:e}", r.process_error);
        assert!(r.mean_trace_loss < 1e-8);
    }

    #[test]
    fn records_serialize_as_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rho = random_state(&mut rng, 2);
        let est = mle_state(&measurement_probabilities(&rho).unwrap()).unwrap();
        let json = serde_json::to_string(&est).unwrap();
        assert!(json.starts_with("{\"rho\":[[["));
        let back: StateEstimate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, est);
        let chi_json = serde_json::to_value(ideal_chi_cz()).unwrap();
        assert_eq!(chi_json[0][0], serde_json::json!([0.25, 0.0]));
    }
}
