//! Dense complex matrices, pure states and the state-comparison metrics
//! (trace distance, pure-target fidelity, von Neumann entropy, purity).
//!
//! Everything here is a pure function of immutable inputs. Matrices are
//! small enough (at most 1024x1024) that a dense Hermitian eigensolver is
//! all the linear algebra the crate needs.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hermiticity tolerance enforced on every [`DensityMatrix`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Allowed trace deviation for a [`DensityMatrix`].
pub const TRACE_TOL: f64 = 1e-9;
/// Allowed deviation of a [`StateVector`] norm from one.
pub const NORM_TOL: f64 = 1e-12;

/// Looser tolerances applied to matrices and states read from files, which
/// may have been written by tools that round.
const IO_HERMITIAN_TOL: f64 = 1e-9;
const IO_TRACE_TOL: f64 = 1e-6;
const IO_NORM_TOL: f64 = 1e-9;

const EIGEN_HERMITIAN_TOL: f64 = 1e-10;
const EIGEN_MAX_ITER: usize = 10_000;
const ENTROPY_TRACE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square: {rows} rows, row {row} has {len} entries")]
    NotSquare { rows: usize, row: usize, len: usize },
    #[error("matrix dimension must be positive")]
    EmptyMatrix,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("not Hermitian: max |m_ij - conj(m_ji)| = {defect:e}")]
    NotHermitian { defect: f64 },
    #[error("trace {trace} deviates from 1 by more than {tol:e}")]
    BadTrace { trace: f64, tol: f64 },
    #[error("eigensolver did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("state length {len} is not a positive power of two")]
    BadStateLength { len: usize },
    #[error("state norm {norm} deviates from 1")]
    NotNormalized { norm: f64 },
    #[error("fidelity has imaginary part {imag:e}")]
    ComplexFidelity { imag: f64 },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self, LinalgError> {
        let dim = rows.len();
        if dim == 0 {
            return Err(LinalgError::EmptyMatrix);
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (row, r) in rows.into_iter().enumerate() {
            if r.len() != dim {
                return Err(LinalgError::NotSquare {
                    rows: dim,
                    row,
                    len: r.len(),
                });
            }
            data.extend(r);
        }
        Ok(Self { dim, data })
    }

    /// Real-valued matrix from nested rows.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    /// Diagonal matrix.
    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Largest |m_ij - conj(m_ji)|.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, LinalgError> {
        check_dims(self.dim, other.dim)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm())))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        check_dims(self.dim, other.dim)?;
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        check_dims(self.dim, other.dim)?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim)
            .map(|i| {
                self.data[i * self.dim..(i + 1) * self.dim]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Copies the lower triangle from the conjugated upper triangle and
    /// zeroes imaginary parts on the diagonal.
    pub fn symmetrize_from_upper(&mut self) {
        let n = self.dim;
        for i in 0..n {
            let d = self.get(i, i);
            self.set(i, i, Complex64::new(d.re, 0.0));
            for j in i + 1..n {
                let v = self.get(i, j);
                self.set(j, i, v.conj());
            }
        }
    }

    fn check_finite(&self) -> Result<(), LinalgError> {
        for i in 0..self.dim {
            for j in 0..self.dim {
                let z = self.get(i, j);
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(LinalgError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }
}

fn check_dims(left: usize, right: usize) -> Result<(), LinalgError> {
    if left != right {
        Err(LinalgError::DimensionMismatch { left, right })
    } else {
        Ok(())
    }
}

/// Normalized pure state of `qubit_count` qubits. Qubit 0 is the least
/// significant bit of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amps: Vec<Complex64>) -> Result<Self, LinalgError> {
        Self::with_tolerance(amps, NORM_TOL)
    }

    fn with_tolerance(amps: Vec<Complex64>, tol: f64) -> Result<Self, LinalgError> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(LinalgError::BadStateLength { len });
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > tol {
            return Err(LinalgError::NotNormalized { norm });
        }
        Ok(Self {
            qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    /// Normalizes arbitrary non-zero amplitudes.
    pub fn normalized(mut amps: Vec<Complex64>) -> Result<Self, LinalgError> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(LinalgError::NotNormalized { norm });
        }
        for a in &mut amps {
            *a /= norm;
        }
        Self::new(amps)
    }

    /// Computational basis state `|index>`.
    pub fn basis(qubits: usize, index: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { qubits, amps }
    }

    pub fn qubit_count(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<Complex64, LinalgError> {
        check_dims(self.dim(), other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

#[derive(Serialize, Deserialize)]
struct StateVectorJson {
    qubits: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for StateVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        StateVectorJson {
            qubits: self.qubits,
            re: self.amps.iter().map(|a| a.re).collect(),
            im: self.amps.iter().map(|a| a.im).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = StateVectorJson::deserialize(d)?;
        if raw.re.len() != raw.im.len() || raw.re.len() != 1usize << raw.qubits {
            return Err(D::Error::custom(format!(
                "expected {} amplitudes for {} qubits, got re={} im={}",
                1usize << raw.qubits,
                raw.qubits,
                raw.re.len(),
                raw.im.len()
            )));
        }
        let amps: Vec<Complex64> = raw
            .re
            .iter()
            .zip(&raw.im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect();
        let sv = StateVector::with_tolerance(amps, IO_NORM_TOL).map_err(D::Error::custom)?;
        StateVector::normalized(sv.amps).map_err(D::Error::custom)
    }
}

/// Hermitian, unit-trace complex matrix.
///
/// Positivity is not enforced: partially assembled reconstructions are
/// represented with this type too and are not guaranteed PSD. Use
/// [`DensityMatrix::min_eigenvalue`] to check finalized matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self, LinalgError> {
        Self::with_tolerance(m, HERMITIAN_TOL, TRACE_TOL)
    }

    pub(crate) fn with_tolerance(m: ComplexMatrix, herm_tol: f64, trace_tol: f64) -> Result<Self, LinalgError> {
        if m.dim == 0 {
            return Err(LinalgError::EmptyMatrix);
        }
        m.check_finite()?;
        let defect = m.hermitian_defect();
        if defect > herm_tol {
            return Err(LinalgError::NotHermitian { defect });
        }
        let tr = m.trace().re;
        if (tr - 1.0).abs() > trace_tol {
            return Err(LinalgError::BadTrace { trace: tr, tol: trace_tol });
        }
        Ok(Self(m))
    }

    /// `|psi><psi|`.
    pub fn pure(psi: &StateVector) -> Self {
        let a = psi.amplitudes();
        let mut m = ComplexMatrix::from_fn(a.len(), |i, j| a[i] * a[j].conj());
        m.symmetrize_from_upper();
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0.get(i, j)
    }

    pub fn min_eigenvalue(&self) -> Result<f64, LinalgError> {
        Ok(hermitian_eigen(&self.0)?.values[0])
    }
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixJson {
    dimension: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let n = self.dim();
        DensityMatrixJson {
            dimension: n,
            re: (0..n).map(|i| (0..n).map(|j| self.get(i, j).re).collect()).collect(),
            im: (0..n).map(|i| (0..n).map(|j| self.get(i, j).im).collect()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = DensityMatrixJson::deserialize(d)?;
        let n = raw.dimension;
        let shape_ok = raw.re.len() == n
            && raw.im.len() == n
            && raw.re.iter().all(|r| r.len() == n)
            && raw.im.iter().all(|r| r.len() == n);
        if !shape_ok {
            return Err(D::Error::custom(format!(
                "\"re\" and \"im\" must both be {n}x{n}"
            )));
        }
        let m = ComplexMatrix::from_fn(n, |i, j| Complex64::new(raw.re[i][j], raw.im[i][j]));
        let mut dm = DensityMatrix::with_tolerance(m, IO_HERMITIAN_TOL, IO_TRACE_TOL)
            .map_err(D::Error::custom)?;
        dm.0.symmetrize_from_upper();
        Ok(dm)
    }
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: ComplexMatrix,
}

/// Dense Hermitian eigensolver (Householder tridiagonalization followed by
/// implicit QR, via nalgebra).
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<HermitianEigen, LinalgError> {
    let n = m.dim();
    if n == 0 {
        return Err(LinalgError::EmptyMatrix);
    }
    m.check_finite()?;
    let defect = m.hermitian_defect();
    if defect > EIGEN_HERMITIAN_TOL * m.max_abs().max(1.0) {
        return Err(LinalgError::NotHermitian { defect });
    }
    let dm = DMatrix::from_fn(n, n, |i, j| m.get(i, j));
    let eig = dm
        .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(LinalgError::NoConvergence {
            iterations: EIGEN_MAX_ITER,
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, |i, col| eig.eigenvectors[(i, order[col])]);
    Ok(HermitianEigen { values, vectors })
}

/// `(1/2) Tr|a - b|`, clamped to `[0, 1]`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64, LinalgError> {
    let diff = a.matrix().sub(b.matrix())?;
    let eig = hermitian_eigen(&diff)?;
    let t = 0.5 * eig.values.iter().map(|w| w.abs()).sum::<f64>();
    Ok(t.clamp(0.0, 1.0))
}

/// `<psi|rho|psi>` for a pure target.
pub fn fidelity_pure(target: &StateVector, rho: &DensityMatrix) -> Result<f64, LinalgError> {
    check_dims(target.dim(), rho.dim())?;
    let psi = target.amplitudes();
    let rho_psi = rho.matrix().mul_vec(psi);
    let f: Complex64 = psi.iter().zip(&rho_psi).map(|(a, b)| a.conj() * b).sum();
    if f.im.abs() >= 1e-10 {
        return Err(LinalgError::ComplexFidelity { imag: f.im });
    }
    Ok(f.re.clamp(0.0, 1.0))
}

/// Von Neumann entropy in bits together with the negative eigenvalue mass
/// that was clamped away before evaluating it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entropy {
    pub bits: f64,
    pub clamped_mass: f64,
}

/// `-sum w log2 w` over the eigenvalues of `rho`. Negative eigenvalues are
/// clamped to zero and the remainder renormalized to sum to one.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<Entropy, LinalgError> {
    let tr = rho.matrix().trace().re;
    if (tr - 1.0).abs() > ENTROPY_TRACE_TOL {
        return Err(LinalgError::BadTrace {
            trace: tr,
            tol: ENTROPY_TRACE_TOL,
        });
    }
    let eig = hermitian_eigen(rho.matrix())?;
    Ok(entropy_from_spectrum(&eig.values))
}

pub(crate) fn entropy_from_spectrum(values: &[f64]) -> Entropy {
    let clamped_mass: f64 = values.iter().filter(|&&w| w < 0.0).map(|w| -w).sum();
    let total: f64 = values.iter().filter(|&&w| w > 0.0).sum();
    let bits = if total > 0.0 {
        values
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|&w| {
                let p = w / total;
                -p * p.log2()
            })
            .sum::<f64>()
            .max(0.0)
    } else {
        0.0
    };
    Entropy { bits, clamped_mass }
}

/// `Re Tr(rho^2)`, evaluated as the sum of squared entry moduli.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.matrix().as_slice().iter().map(|z| z.norm_sqr()).sum()
}
