//! Dense complex linear algebra and scalar helpers shared by the physics
//! modules.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Everything here is a pure
//! function of its inputs.

use std::ops::{Div, Mul};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn diag(entries: &[Complex64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(entries))
}

pub fn real_diag(entries: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        entries.len(),
        entries.iter().map(|&x| c(x, 0.0)),
    ))
}

/// Outer product `|a><b|`.
pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Largest entry of `|M - M^H|`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_hermitian(m: &CMatrix, rel_tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension {
            expected: "square matrix".into(),
            found: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    let scale = max_abs(m);
    let asymmetry = hermitian_defect(m);
    if asymmetry > rel_tol * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian { asymmetry, scale });
    }
    Ok(())
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Signed number stored as `sign * exp(log_magnitude)`.
///
/// Products of large powers (`2^{4n} n^{2n+4}` and friends) are formed in
/// this representation and only exponentiated at the end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogFactor {
    pub sign: f64,
    pub log_magnitude: f64,
}

impl LogFactor {
    pub const ONE: LogFactor = LogFactor {
        sign: 1.0,
        log_magnitude: 0.0,
    };

    /// `base^exponent` for a positive base.
    pub fn power(base: f64, exponent: f64) -> Result<Self> {
        if !(base > 0.0) || !base.is_finite() {
            return Err(Error::Domain(format!(
                "log-space power needs a positive finite base, got {base}"
            )));
        }
        Ok(LogFactor {
            sign: 1.0,
            log_magnitude: exponent * base.ln(),
        })
    }

    pub fn from_f64(x: f64) -> Result<Self> {
        if x == 0.0 || !x.is_finite() {
            return Err(Error::Domain(format!(
                "cannot represent {x} as a log-space factor"
            )));
        }
        Ok(LogFactor {
            sign: x.signum(),
            log_magnitude: x.abs().ln(),
        })
    }

    pub fn negate(self) -> Self {
        LogFactor {
            sign: -self.sign,
            ..self
        }
    }

    pub fn value(self) -> f64 {
        self.sign * self.log_magnitude.exp()
    }
}

impl Mul for LogFactor {
    type Output = LogFactor;
    fn mul(self, rhs: LogFactor) -> LogFactor {
        LogFactor {
            sign: self.sign * rhs.sign,
            log_magnitude: self.log_magnitude + rhs.log_magnitude,
        }
    }
}

impl Div for LogFactor {
    type Output = LogFactor;
    fn div(self, rhs: LogFactor) -> LogFactor {
        LogFactor {
            sign: self.sign * rhs.sign,
            log_magnitude: self.log_magnitude - rhs.log_magnitude,
        }
    }
}

/// `leading_sign * prod(base^exponent)`, accumulated in log space.
pub fn log_product(factors: &[(f64, f64)], leading_sign: f64) -> Result<f64> {
    Ok(log_product_factor(factors, leading_sign)?.value())
}

pub fn log_product_factor(factors: &[(f64, f64)], leading_sign: f64) -> Result<LogFactor> {
    if leading_sign != 1.0 && leading_sign != -1.0 {
        return Err(Error::Domain(format!(
            "leading sign must be +1 or -1, got {leading_sign}"
        )));
    }
    let mut acc = LogFactor {
        sign: leading_sign,
        log_magnitude: 0.0,
    };
    for &(base, exponent) in factors {
        acc = acc * LogFactor::power(base, exponent)?;
    }
    Ok(acc)
}

/// `ln(n!)`.
pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Eigen-decomposition of a Hermitian matrix.
///
/// Eigenvalues are returned in ascending order; column `k` of the returned
/// matrix is the normalized eigenvector for eigenvalue `k`.
pub fn hermitian_eig(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    check_hermitian(m, 1e-12)?;
    let n = m.nrows();
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Applies a real scalar function to the spectrum of a Hermitian matrix.
pub fn hermitian_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eig(m)?;
    let mapped: Vec<Complex64> = values.iter().map(|&x| c(f(x), 0.0)).collect();
    Ok(&vectors * diag(&mapped) * vectors.adjoint())
}

/// Principal square root of a positive semidefinite matrix.
///
/// Eigenvalues in `[-1e-12, 0)` are treated as zero; anything more negative
/// is rejected.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eig(m)?;
    let min = values.first().copied().unwrap_or(0.0);
    if min < -1e-12 {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    let roots: Vec<Complex64> = values.iter().map(|&x| c(x.max(0.0).sqrt(), 0.0)).collect();
    Ok(&vectors * diag(&roots) * vectors.adjoint())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

/// Matrix 1-norm (maximum absolute column sum).
pub fn norm_one(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant (Higham's choice of parameters).
pub fn matrix_exp(m: &CMatrix) -> CMatrix {
    assert!(m.is_square(), "matrix_exp needs a square matrix");
    let n = m.nrows();
    if n == 0 {
        return m.clone();
    }
    let norm = norm_one(m);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = m.scale(0.5_f64.powi(squarings));
    let eye = identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| c(PADE13[k], 0.0);

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &eye * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &eye * b(0);

    let numer = &v + &u;
    let denom = &v - &u;
    let mut result = denom
        .lu()
        .solve(&numer)
        .expect("Padé denominator is nonsingular after scaling");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Classical fixed-step RK4 for `dy/dt = G(t) y` with a matrix-valued
/// generator.
pub fn rk4_integrate(
    generator: impl Fn(f64) -> CMatrix,
    y0: &CVector,
    t_span: (f64, f64),
    steps: usize,
) -> CVector {
    rk4_integrate_with(|t, y| generator(t) * y, y0, t_span, steps)
}

/// Classical fixed-step RK4 for `dy/dt = f(t, y)`.
///
/// Use this form when the right-hand side is cheaper to apply than to
/// materialize as a matrix.
pub fn rk4_integrate_with(
    mut rhs: impl FnMut(f64, &CVector) -> CVector,
    y0: &CVector,
    t_span: (f64, f64),
    steps: usize,
) -> CVector {
    assert!(steps >= 1, "rk4 needs at least one step");
    let (t0, t1) = t_span;
    let h = (t1 - t0) / steps as f64;
    let half = c(0.5 * h, 0.0);
    let full = c(h, 0.0);
    let sixth = c(h / 6.0, 0.0);
    let two = c(2.0, 0.0);
    let mut y = y0.clone();
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = rhs(t, &y);
        let k2 = rhs(t + 0.5 * h, &(&y + &k1 * half));
        let k3 = rhs(t + 0.5 * h, &(&y + &k2 * half));
        let k4 = rhs(t + h, &(&y + &k3 * full));
        y += (k1 + k2 * two + k3 * two + k4) * sixth;
    }
    y
}

fn twice(x: f64) -> Option<i64> {
    let d = 2.0 * x;
    let r = d.round();
    ((d - r).abs() < 1e-9).then_some(r as i64)
}

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | J M>` in the Condon-Shortley
/// phase convention.
///
/// Arguments may be integers or half-integers. Any selection-rule violation
/// (triangle rule, `|m| > j`, `m1 + m2 != M`, mismatched integrality)
/// yields 0.
pub fn clebsch_gordan(j1: f64, m1: f64, j2: f64, m2: f64, j: f64, m: f64) -> f64 {
    let (Some(tj1), Some(tm1), Some(tj2), Some(tm2), Some(tj), Some(tm)) = (
        twice(j1),
        twice(m1),
        twice(j2),
        twice(m2),
        twice(j),
        twice(m),
    ) else {
        return 0.0;
    };
    if tj1 < 0 || tj2 < 0 || tj < 0 {
        return 0.0;
    }
    if tm1 + tm2 != tm || tm1.abs() > tj1 || tm2.abs() > tj2 || tm.abs() > tj {
        return 0.0;
    }
    // j +- m must be an integer for every pair.
    if (tj1 + tm1) % 2 != 0 || (tj2 + tm2) % 2 != 0 || (tj + tm) % 2 != 0 {
        return 0.0;
    }
    if tj < (tj1 - tj2).abs() || tj > tj1 + tj2 || (tj1 + tj2 + tj) % 2 != 0 {
        return 0.0;
    }

    // All of these are non-negative integers once the checks above pass.
    let half = |x: i64| (x / 2) as u64;
    let a = half(tj1 + tj2 - tj);
    let b = half(tj1 - tm1);
    let cc = half(tj2 + tm2);
    let d = half(tj - tj2 + tm1);
    let e = half(tj - tj1 - tm2);

    let log_prefactor = 0.5
        * (((tj + 1) as f64).ln()
            + ln_factorial(half(tj + tj1 - tj2))
            + ln_factorial(half(tj - tj1 + tj2))
            + ln_factorial(half(tj1 + tj2 - tj))
            - ln_factorial(half(tj1 + tj2 + tj) + 1)
            + ln_factorial(half(tj + tm))
            + ln_factorial(half(tj - tm))
            + ln_factorial(half(tj1 - tm1))
            + ln_factorial(half(tj1 + tm1))
            + ln_factorial(half(tj2 - tm2))
            + ln_factorial(half(tj2 + tm2)));

    let k_min = 0_i64.max(-(d as i64)).max(-(e as i64)) as u64;
    let k_max = a.min(b).min(cc);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let log_den = ln_factorial(k)
            + ln_factorial(a - k)
            + ln_factorial(b - k)
            + ln_factorial(cc - k)
            + ln_factorial((d as i64 + k as i64) as u64)
            + ln_factorial((e as i64 + k as i64) as u64);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (log_prefactor - log_den).exp();
    }
    sum
}

/// Trace distance `||A - B||_1 / 2` between Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    let (values, _) = hermitian_eig(&hermitian_part(&(a - b)))?;
    Ok(0.5 * values.iter().map(|x| x.abs()).sum::<f64>())
}

/// Column-stacking vectorization.
pub fn vec_col(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvec_col(v: &CVector, rows: usize) -> CMatrix {
    CMatrix::from_column_slice(rows, v.len() / rows, v.as_slice())
}

/// Serde adapter writing a complex matrix as rows of `[re, im]` pairs.
///
/// Use with `#[serde(with = "crate::numerics::complex_matrix")]`.
pub mod complex_matrix {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{c, CMatrix};

    pub fn to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
        m.row_iter()
            .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix, String> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("ragged complex matrix".into());
        }
        Ok(CMatrix::from_fn(nrows, ncols, |i, j| {
            c(rows[i][j][0], rows[i][j][1])
        }))
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, serializer: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<CMatrix, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(deserializer)?;
        from_rows(&rows).map_err(D::Error::custom)
    }
}
