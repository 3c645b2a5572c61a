//! Dense complex matrices and the isotropic family of multipartite states.
//!
//! Composite indices are row-major over parties: the basis vector
//! `|a_1 a_2 ... a_N>` sits at `a_1 d^(N-1) + a_2 d^(N-2) + ... + a_N`.
//! Every outcome-tuple table in the crate uses the same ordering.

use std::ops::{Add, Index, IndexMut, Mul};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{check_scenario, outcome_count, Error, Result};

/// Entrywise tolerance for the Hermiticity, trace and PSD checks.
pub const STATE_TOLERANCE: f64 = 1e-9;

/// A square `dim x dim` complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    /// Builds a matrix from `dim * dim` row-major entries.
    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    /// The rank-1 projector `|psi><psi|` (the vector is not normalized here).
    pub fn outer(psi: &[Complex64]) -> Self {
        Self::from_fn(psi.len(), |r, c| psi[r] * psi[c].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    /// `Tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex64 {
        assert_eq!(self.dim, other.dim, "trace_product dimension mismatch");
        let n = self.dim;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.data[i * n + j] * other.data[j * n + i];
            }
        }
        acc
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "max_abs_diff dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.dim)
            .all(|r| (r..self.dim).all(|c| (self[(r, c)] - self[(c, r)].conj()).norm() <= tol))
    }

    /// Smallest eigenvalue of the Hermitian part `(M + M^dagger) / 2`.
    pub fn min_hermitian_eigenvalue(&self) -> f64 {
        let herm = DMatrix::from_fn(self.dim, self.dim, |r, c| {
            (self[(r, c)] + self[(c, r)].conj()) * 0.5
        });
        herm.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.dim + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix addition dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "matrix product dimension mismatch");
        let n = self.dim;
        let mut out = ComplexMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

/// Kronecker product: entry `(i*dimB + k, j*dimB + l)` is `A(i,j) * B(k,l)`.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (da, db) = (a.dim, b.dim);
    let dim = da * db;
    let mut out = ComplexMatrix::zeros(dim);
    for i in 0..da {
        for j in 0..da {
            let aij = a[(i, j)];
            for k in 0..db {
                for l in 0..db {
                    out[(i * db + k, j * db + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// A validated density operator on `(C^d)^{⊗N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    matrix: ComplexMatrix,
    local_dim: usize,
    parties: usize,
}

impl QuantumState {
    /// Checks Hermiticity, unit trace and positivity (eigenvalue floor `-1e-9`).
    pub fn new(matrix: ComplexMatrix, local_dim: usize, parties: usize) -> Result<Self> {
        check_scenario(local_dim, parties)?;
        let expected = outcome_count(local_dim, parties);
        if matrix.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: matrix.dim(),
            });
        }
        if !matrix.is_hermitian(STATE_TOLERANCE) {
            return Err(Error::InvalidState("matrix is not Hermitian".into()));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOLERANCE || tr.im.abs() > STATE_TOLERANCE {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min_eig = matrix.min_hermitian_eigenvalue();
        if min_eig < -STATE_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self {
            matrix,
            local_dim,
            parties,
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// `1 + d + d^2 + ... + d^(N-1)`: the index stride between `|i...i>` and `|i+1...i+1>`.
fn repunit(d: usize, parties: usize) -> usize {
    (0..parties).map(|k| d.pow(k as u32)).sum()
}

/// Projector onto the generalized GHZ vector `(1/sqrt d) Σ_i |i>^{⊗N}`.
pub fn ghz_projector(d: usize, parties: usize) -> Result<QuantumState> {
    check_scenario(d, parties)?;
    let dim = outcome_count(d, parties);
    let stride = repunit(d, parties);
    let mut m = ComplexMatrix::zeros(dim);
    let weight = Complex64::new(1.0 / d as f64, 0.0);
    for i in 0..d {
        for j in 0..d {
            m[(i * stride, j * stride)] = weight;
        }
    }
    QuantumState::new(m, d, parties)
}

/// `v |phi><phi| + (1 - v) I / d^N`.
pub fn isotropic_state(d: usize, parties: usize, v: f64) -> Result<QuantumState> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::VisibilityOutOfRange(v));
    }
    let ghz = ghz_projector(d, parties)?;
    let dim = ghz.dim();
    let noise = ComplexMatrix::identity(dim).scale((1.0 - v) / dim as f64);
    QuantumState::new(&ghz.matrix.scale(v) + &noise, d, parties)
}

/// The fully separable member of the family, `(|phi><phi| + I/d) / (1 + d^(N-1))`.
///
/// Built from its own closed form rather than through [`isotropic_state`], so
/// the two constructions can be compared.
pub fn sep_isotropic(d: usize, parties: usize) -> Result<QuantumState> {
    let ghz = ghz_projector(d, parties)?;
    let k = d.pow(parties as u32 - 1) as f64;
    let dim = ghz.dim();
    let sum = &ghz.matrix + &ComplexMatrix::identity(dim).scale(1.0 / d as f64);
    QuantumState::new(sum.scale(1.0 / (1.0 + k)), d, parties)
}
