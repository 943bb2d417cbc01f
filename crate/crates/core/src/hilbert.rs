//! Atomic and cavity operators and their embedding into the composite
//! space |level⟩ ⊗ |n⟩.
//!
//! Composite basis ordering is atom-major: the state |i; n⟩ (level i in
//! 1..=3, photon number n in 0..=n_fock) sits at index
//! `(i - 1) * (n_fock + 1) + n`.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const N_LEVELS: usize = 3;

/// Square complex operator. The dimension travels with the matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct QOperator {
    matrix: DMatrix<C64>,
}

impl QOperator {
    pub fn from_matrix(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        Ok(Self { matrix })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn dagger(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, factor: impl Into<C64>) -> Self {
        Self {
            matrix: &self.matrix * factor.into(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Largest |A_ij − conj(A_ji)|.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        Ok(&self.try_mul(other)? - &other.try_mul(self)?)
    }
}

impl Add for &QOperator {
    type Output = QOperator;
    fn add(self, rhs: &QOperator) -> QOperator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        QOperator {
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &QOperator {
    type Output = QOperator;
    fn sub(self, rhs: &QOperator) -> QOperator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        QOperator {
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl Mul for &QOperator {
    type Output = QOperator;
    fn mul(self, rhs: &QOperator) -> QOperator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        QOperator {
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

/// Truncated annihilation operator on |0⟩..|n_fock⟩: a[k, k+1] = √(k+1).
pub fn annihilator(n_fock: usize) -> QOperator {
    let dim = n_fock + 1;
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..n_fock {
        m[(k, k + 1)] = C64::new(((k + 1) as f64).sqrt(), 0.0);
    }
    QOperator { matrix: m }
}

/// a†a, stored as the exact diagonal 0, 1, …, n_fock.
pub fn number_operator(n_fock: usize) -> QOperator {
    let diag = nalgebra::DVector::from_fn(n_fock + 1, |k, _| C64::new(k as f64, 0.0));
    QOperator {
        matrix: DMatrix::from_diagonal(&diag),
    }
}

/// σ_ij = |i⟩⟨j| on the three atomic levels (1-based).
pub fn sigma(i: usize, j: usize) -> Result<QOperator> {
    for level in [i, j] {
        if !(1..=N_LEVELS).contains(&level) {
            return Err(Error::LevelOutOfRange(level));
        }
    }
    let mut m = DMatrix::zeros(N_LEVELS, N_LEVELS);
    m[(i - 1, j - 1)] = C64::new(1.0, 0.0);
    Ok(QOperator { matrix: m })
}

/// Tensor product atom ⊗ cavity with the atomic factor first.
pub fn embed(atom_op: &QOperator, cavity_op: &QOperator) -> Result<QOperator> {
    if atom_op.dim() != N_LEVELS {
        return Err(Error::DimensionMismatch {
            expected: N_LEVELS,
            actual: atom_op.dim(),
        });
    }
    Ok(QOperator {
        matrix: atom_op.matrix.kronecker(&cavity_op.matrix),
    })
}

/// Composite operators used throughout the solvers, built once per cutoff.
#[derive(Debug, Clone)]
pub struct CompositeOps {
    pub n_fock: usize,
    /// a ⊗ I_atom, in the composite space.
    pub a: QOperator,
    /// σ_ij ⊗ I_cavity, indexed `sigma[i-1][j-1]`.
    pub sigma: [[QOperator; 3]; 3],
}

impl CompositeOps {
    pub fn new(n_fock: usize) -> Self {
        let id_cav = QOperator::identity(n_fock + 1);
        let a = embed(&QOperator::identity(N_LEVELS), &annihilator(n_fock)).expect("3-level atom");
        let sigma = std::array::from_fn(|i| {
            std::array::from_fn(|j| embed(&sigma(i + 1, j + 1).expect("valid level"), &id_cav).expect("3-level atom"))
        });
        Self { n_fock, a, sigma }
    }

    pub fn dim(&self) -> usize {
        N_LEVELS * (self.n_fock + 1)
    }

    pub fn sigma(&self, i: usize, j: usize) -> &QOperator {
        &self.sigma[i - 1][j - 1]
    }

    pub fn number(&self) -> QOperator {
        embed(&QOperator::identity(N_LEVELS), &number_operator(self.n_fock))
            .expect("identity and number operator have valid dimensions")
    }
}

/// Index of |level; n⟩ in the composite basis.
pub fn basis_index(level: usize, n: usize, n_fock: usize) -> Result<usize> {
    if !(1..=N_LEVELS).contains(&level) {
        return Err(Error::LevelOutOfRange(level));
    }
    if n > n_fock {
        return Err(Error::DimensionMismatch {
            expected: n_fock,
            actual: n,
        });
    }
    Ok((level - 1) * (n_fock + 1) + n)
}

/// Inverse of [`basis_index`]: returns (level, n).
pub fn basis_label(index: usize, n_fock: usize) -> Result<(usize, usize)> {
    let block = n_fock + 1;
    if index >= N_LEVELS * block {
        return Err(Error::DimensionMismatch {
            expected: N_LEVELS * block,
            actual: index,
        });
    }
    Ok((index / block + 1, index % block))
}
