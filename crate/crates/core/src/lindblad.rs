//! Liouvillian of the damped, driven system and its exact steady state.
//!
//! ```text
//! dρ/dt = −i[H, ρ] + ½κ 𝓛[a]ρ + ½γ31 𝓛[σ13]ρ + ½γ32 𝓛[σ23]ρ + ½γ21 𝓛[σ12]ρ
//! 𝓛[C]ρ = 2CρC† − C†Cρ − ρC†C
//! ```
//!
//! κ is the energy decay rate; the field amplitude decays at κ/2.
//!
//! Superoperators act on column-stacked density matrices:
//! `vec(ρ)[i + d·j] = ρ[i, j]`, so that `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.
//!
//! The steady state is the one reached from an atom prepared in |1⟩: only
//! atomic levels connected to |1⟩ through the Hamiltonian or a decay channel
//! take part in the solve (see [`active_levels`]). For Ω = 0 and γ32 = 0 this
//! drops the decoupled level |2⟩, which would otherwise carry a second,
//! independent steady state.

use std::collections::BTreeMap;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::hamiltonian::build_hamiltonian_with;
use crate::hilbert::{CompositeOps, QOperator, C64, N_LEVELS};
use crate::params::SystemParams;

/// Default ceiling for [`choose_cutoff`]; overridden by
/// `LAMBDA_CQED_MAX_CUTOFF`.
pub const DEFAULT_MAX_CUTOFF: usize = 40;
pub const MAX_CUTOFF_ENV: &str = "LAMBDA_CQED_MAX_CUTOFF";

/// Linear map on column-stacked d×d matrices, stored sparse (d²×d²).
#[derive(Debug, Clone)]
pub struct Superoperator {
    dim: usize,
    matrix: SparseColMat<usize, C64>,
    /// Composite basis indices the steady-state solve is restricted to.
    sector: Vec<usize>,
}

/// Accumulates superoperator entries before compression.
#[derive(Debug, Default)]
struct SuperBuilder {
    dim: usize,
    entries: Vec<Triplet<usize, usize, C64>>,
}

impl SuperBuilder {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// Adds `factor · A X B`.
    fn push_sandwich(&mut self, factor: C64, left: &DMatrix<C64>, right: &DMatrix<C64>) {
        let d = self.dim;
        let left_nz: Vec<(usize, usize, C64)> = nonzeros(left);
        let right_nz: Vec<(usize, usize, C64)> = nonzeros(right);
        // (AXB)[i, j] = Σ A[i,k] X[k,l] B[l,j]
        for &(i, k, a) in &left_nz {
            for &(l, j, b) in &right_nz {
                self.entries
                    .push(Triplet::new(i + d * j, k + d * l, factor * a * b));
            }
        }
    }

    fn push_commutator(&mut self, h: &DMatrix<C64>) {
        let id = DMatrix::identity(self.dim, self.dim);
        let minus_i = C64::new(0.0, -1.0);
        self.push_sandwich(minus_i, h, &id);
        self.push_sandwich(-minus_i, &id, h);
    }

    fn push_dissipator(&mut self, rate: f64, c: &DMatrix<C64>) {
        if rate == 0.0 {
            return;
        }
        let id = DMatrix::identity(self.dim, self.dim);
        let cd = c.adjoint();
        let cdc = &cd * c;
        let r = C64::new(rate, 0.0);
        self.push_sandwich(r * 2.0, c, &cd);
        self.push_sandwich(-r, &cdc, &id);
        self.push_sandwich(-r, &id, &cdc);
    }

    fn finish(self, sector: Vec<usize>) -> Superoperator {
        let n = self.dim * self.dim;
        let matrix = SparseColMat::try_new_from_triplets(n, n, &self.entries)
            .expect("superoperator indices are in range");
        Superoperator {
            dim: self.dim,
            matrix,
            sector,
        }
    }
}

fn nonzeros(m: &DMatrix<C64>) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != C64::new(0.0, 0.0) {
                out.push((i, j, v));
            }
        }
    }
    out
}

impl Superoperator {
    /// Operator dimension d; the superoperator itself is d²×d².
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.matrix.val().len()
    }

    pub fn sector(&self) -> &[usize] {
        &self.sector
    }

    /// Largest |entry|, used as the scale for residual checks.
    pub fn max_abs(&self) -> f64 {
        self.matrix.val().iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    fn for_each_entry(&self, mut f: impl FnMut(usize, usize, C64)) {
        let col_ptr = self.matrix.col_ptr();
        let row_idx = self.matrix.row_idx();
        let val = self.matrix.val();
        for col in 0..self.matrix.ncols() {
            for p in col_ptr[col]..col_ptr[col + 1] {
                f(row_idx[p], col, val[p]);
            }
        }
    }

    pub fn apply_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.dim * self.dim, "vectorized operator length");
        let mut out = vec![C64::new(0.0, 0.0); x.len()];
        self.for_each_entry(|r, c, v| out[r] += v * x[c]);
        out
    }

    /// L[X] for a d×d matrix X.
    pub fn apply(&self, x: &QOperator) -> Result<QOperator> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.dim(),
            });
        }
        let out = self.apply_vec(x.matrix().as_slice());
        QOperator::from_matrix(DMatrix::from_vec(self.dim, self.dim, out))
    }

    /// Dense copy; intended for tests and small systems.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim * self.dim;
        let mut m = DMatrix::zeros(n, n);
        self.for_each_entry(|r, c, v| m[(r, c)] += v);
        m
    }

    /// Sum of two superoperators on the same space. The sector is the union.
    pub fn add(&self, other: &Superoperator) -> Result<Superoperator> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        let mut builder = SuperBuilder::new(self.dim);
        self.for_each_entry(|r, c, v| builder.entries.push(Triplet::new(r, c, v)));
        other.for_each_entry(|r, c, v| builder.entries.push(Triplet::new(r, c, v)));
        let mut sector: Vec<usize> = self.sector.iter().chain(&other.sector).copied().collect();
        sector.sort_unstable();
        sector.dedup();
        Ok(builder.finish(sector))
    }
}

/// 𝓛[C]ρ = 2CρC† − C†Cρ − ρC†C.
pub fn dissipator(collapse_op: &QOperator) -> Superoperator {
    let dim = collapse_op.dim();
    let mut builder = SuperBuilder::new(dim);
    builder.push_dissipator(1.0, collapse_op.matrix());
    builder.finish((0..dim).collect())
}

/// −i[H, ·].
pub fn commutator_superoperator(h: &QOperator) -> Superoperator {
    let dim = h.dim();
    let mut builder = SuperBuilder::new(dim);
    builder.push_commutator(h.matrix());
    builder.finish((0..dim).collect())
}

/// Atomic levels (1-based) reachable from |1⟩ through a Hamiltonian
/// coupling or a decay channel.
pub fn active_levels(params: &SystemParams) -> Vec<usize> {
    // directed edges between levels
    let mut edges: Vec<(usize, usize)> = Vec::new();
    if params.g > 0.0 {
        edges.extend([(1, 3), (3, 1)]);
    }
    if params.omega_free > 0.0 {
        edges.extend([(2, 3), (3, 2)]);
    }
    if params.gamma31 > 0.0 {
        edges.push((3, 1));
    }
    if params.gamma32 > 0.0 {
        edges.push((3, 2));
    }
    if params.gamma21 > 0.0 {
        edges.push((2, 1));
    }
    let mut reached = [false; N_LEVELS + 1];
    reached[1] = true;
    let mut stack = vec![1];
    while let Some(level) = stack.pop() {
        for &(from, to) in &edges {
            if from == level && !reached[to] {
                reached[to] = true;
                stack.push(to);
            }
        }
    }
    (1..=N_LEVELS).filter(|&l| reached[l]).collect()
}

pub fn build_liouvillian(params: &SystemParams) -> Result<Superoperator> {
    params.validate()?;
    Ok(build_liouvillian_with(&CompositeOps::new(params.n_fock), params))
}

/// Same as [`build_liouvillian`] but reuses precomputed operators.
pub fn build_liouvillian_with(ops: &CompositeOps, params: &SystemParams) -> Superoperator {
    let dim = ops.dim();
    let h = build_hamiltonian_with(ops, params);
    let mut builder = SuperBuilder::new(dim);
    builder.push_commutator(h.matrix());
    builder.push_dissipator(0.5 * params.kappa, ops.a.matrix());
    builder.push_dissipator(0.5 * params.gamma31, ops.sigma(1, 3).matrix());
    builder.push_dissipator(0.5 * params.gamma32, ops.sigma(2, 3).matrix());
    builder.push_dissipator(0.5 * params.gamma21, ops.sigma(1, 2).matrix());
    let block = ops.n_fock + 1;
    let sector = active_levels(params)
        .into_iter()
        .flat_map(|level| (level - 1) * block..level * block)
        .collect();
    builder.finish(sector)
}

/// Hermitian, unit-trace state of the composite system.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    rho: QOperator,
}

impl DensityMatrix {
    /// Wraps a matrix, Hermitizing it and normalizing the trace.
    pub fn from_operator(op: QOperator) -> Result<Self> {
        let m = op.matrix();
        let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
        let tr = herm.trace();
        if tr.norm() == 0.0 || !tr.re.is_finite() {
            return Err(Error::SingularSystem(format!("state has trace {tr}")));
        }
        Ok(Self {
            rho: QOperator::from_matrix(herm / tr)?,
        })
    }

    pub fn pure(state: &[C64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(state);
        Self::from_operator(QOperator::from_matrix(&v * v.adjoint())?)
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn operator(&self) -> &QOperator {
        &self.rho
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.rho.hermiticity_error()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.rho.matrix().clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Total population of the highest Fock level kept.
    pub fn top_fock_population(&self, n_fock: usize) -> f64 {
        (1..=N_LEVELS)
            .map(|level| {
                let k = (level - 1) * (n_fock + 1) + n_fock;
                self.rho.get(k, k).re
            })
            .sum()
    }
}

/// tr(ρ · op).
pub fn expectation(rho: &DensityMatrix, op: &QOperator) -> Result<C64> {
    if rho.dim() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            actual: op.dim(),
        });
    }
    let r = rho.rho.matrix();
    let o = op.matrix();
    let n = r.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += r[(i, k)] * o[(k, i)];
        }
    }
    Ok(acc)
}

/// Checks that ρ is a valid state and a null vector of L.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDiagnostics {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
    /// max |L[ρ]| / max |L|
    pub relative_residual: f64,
}

impl StateDiagnostics {
    pub fn evaluate(l: &Superoperator, rho: &DensityMatrix) -> Result<Self> {
        let residual = l
            .apply(rho.operator())?
            .matrix()
            .iter()
            .fold(0.0_f64, |m, z| m.max(z.norm()));
        let scale = l.max_abs().max(f64::MIN_POSITIVE);
        Ok(Self {
            trace_error: (rho.trace() - C64::new(1.0, 0.0)).norm(),
            hermiticity_error: rho.hermiticity_error(),
            min_eigenvalue: rho.min_eigenvalue(),
            relative_residual: residual / scale,
        })
    }

    pub fn is_valid(&self) -> bool {
        self.trace_error < 1e-10
            && self.hermiticity_error < 1e-10
            && self.min_eigenvalue >= -1e-8
            && self.relative_residual < 1e-10
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SteadyStateOptions {
    /// Solve a second time with a different trace-replaced row and compare.
    pub verify_unique: bool,
    /// Agreement required between the two solves.
    pub uniqueness_tol: f64,
    /// Refinement passes are taken while the relative residual exceeds this.
    pub residual_tol: f64,
    pub max_refinements: usize,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            verify_unique: true,
            uniqueness_tol: 1e-7,
            residual_tol: 1e-12,
            max_refinements: 3,
        }
    }
}

pub fn steady_state(l: &Superoperator) -> Result<DensityMatrix> {
    steady_state_with(l, &SteadyStateOptions::default())
}

/// Solves L[ρ] = 0 with tr ρ = 1 by sparse LU on the system where one
/// row of L is replaced by the trace functional.
pub fn steady_state_with(l: &Superoperator, opts: &SteadyStateOptions) -> Result<DensityMatrix> {
    let d = l.dim;
    let sector = &l.sector;
    let ds = sector.len();
    if ds == 0 {
        return Err(Error::SingularSystem("empty sector".into()));
    }
    // full index -> local index inside the sector
    let mut local = vec![usize::MAX; d];
    for (k, &i) in sector.iter().enumerate() {
        local[i] = k;
    }
    let to_local = |full: usize| -> Option<usize> {
        let (i, j) = (full % d, full / d);
        let (li, lj) = (local[i], local[j]);
        (li != usize::MAX && lj != usize::MAX).then(|| li + ds * lj)
    };
    let mut entries: Vec<(usize, usize, C64)> = Vec::with_capacity(l.nnz());
    l.for_each_entry(|r, c, v| {
        if let (Some(lr), Some(lc)) = (to_local(r), to_local(c)) {
            entries.push((lr, lc, v));
        }
    });
    let scale = entries.iter().fold(0.0_f64, |m, e| m.max(e.2.norm())).max(1.0);

    let first_row = 0; // ρ[s0, s0]
    let x = solve_replaced(&entries, ds, first_row, scale, opts)?;
    if opts.verify_unique && ds > 1 {
        let last_row = (ds - 1) + ds * (ds - 1);
        let y = solve_replaced(&entries, ds, last_row, scale, opts)?;
        let diff = x
            .iter()
            .zip(&y)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).norm()));
        if diff > opts.uniqueness_tol {
            return Err(Error::SingularSystem(format!(
                "solutions with different normalization rows differ by {diff:e}"
            )));
        }
    }

    let mut rho = DMatrix::zeros(d, d);
    for lj in 0..ds {
        for li in 0..ds {
            rho[(sector[li], sector[lj])] = x[li + ds * lj];
        }
    }
    DensityMatrix::from_operator(QOperator::from_matrix(rho)?)
}

fn solve_replaced(
    entries: &[(usize, usize, C64)],
    ds: usize,
    replaced_row: usize,
    scale: f64,
    opts: &SteadyStateOptions,
) -> Result<Vec<C64>> {
    let n = ds * ds;
    let mut triplets: Vec<Triplet<usize, usize, C64>> = entries
        .iter()
        .filter(|e| e.0 != replaced_row)
        .map(|&(r, c, v)| Triplet::new(r, c, v))
        .collect();
    // trace functional, scaled to the size of the other rows
    for k in 0..ds {
        triplets.push(Triplet::new(replaced_row, k + ds * k, C64::new(scale, 0.0)));
    }
    let a = SparseColMat::<usize, C64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::SingularSystem(format!("assembly failed: {e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| Error::SingularSystem(format!("sparse LU failed: {e:?}")))?;

    let rhs = Mat::<C64>::from_fn(n, 1, |i, _| {
        if i == replaced_row {
            C64::new(scale, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let mut x = lu.solve(&rhs);
    for _ in 0..opts.max_refinements {
        // r = b − A x
        let mut r = rhs.clone();
        for t in &triplets {
            r[(t.row, 0)] -= t.val * x[(t.col, 0)];
        }
        let rmax = (0..n).fold(0.0_f64, |m, i| m.max(r[(i, 0)].norm()));
        if !rmax.is_finite() {
            return Err(Error::SingularSystem("non-finite solution".into()));
        }
        if rmax <= opts.residual_tol * scale {
            break;
        }
        let dx = lu.solve(&r);
        for i in 0..n {
            x[(i, 0)] += dx[(i, 0)];
        }
    }
    let out: Vec<C64> = (0..n).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularSystem("non-finite solution".into()));
    }
    Ok(out)
}

/// Mean photon number and level populations of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub mean_n: f64,
    pub s11: f64,
    pub s22: f64,
    pub s33: f64,
    /// ⟨a⟩
    pub field: C64,
}

pub fn observables(ops: &CompositeOps, rho: &DensityMatrix) -> Result<Observables> {
    Ok(Observables {
        mean_n: expectation(rho, &ops.number())?.re,
        s11: expectation(rho, ops.sigma(1, 1))?.re,
        s22: expectation(rho, ops.sigma(2, 2))?.re,
        s33: expectation(rho, ops.sigma(3, 3))?.re,
        field: expectation(rho, &ops.a)?,
    })
}

/// Steady state of `params` together with its observables.
pub fn solve_point(params: &SystemParams) -> Result<(DensityMatrix, Observables)> {
    let ops = CompositeOps::new(params.n_fock);
    let l = build_liouvillian(params)?;
    let rho = steady_state(&l)?;
    let obs = observables(&ops, &rho)?;
    Ok((rho, obs))
}

/// Cutoff ceiling from `LAMBDA_CQED_MAX_CUTOFF`, or the default.
pub fn max_cutoff_from_env() -> usize {
    std::env::var(MAX_CUTOFF_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_CUTOFF)
}

pub fn choose_cutoff(params: &SystemParams, tol: f64) -> Result<usize> {
    choose_cutoff_with_ceiling(params, tol, max_cutoff_from_env())
}

/// Smallest n_fock whose top Fock level holds less than `tol` population
/// and whose ⟨a†a⟩ moves by less than `tol · max(⟨a†a⟩, 1)` when the cutoff
/// grows by 2.
pub fn choose_cutoff_with_ceiling(params: &SystemParams, tol: f64, ceiling: usize) -> Result<usize> {
    if tol <= 0.0 || !tol.is_finite() {
        return Err(Error::InvalidParameter {
            field: "tol",
            reason: format!("must be positive, got {tol}"),
        });
    }
    params.validate()?;
    let mut cache: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut eval = |n_fock: usize| -> Result<(f64, f64)> {
        if let Some(v) = cache.get(&n_fock) {
            return Ok(*v);
        }
        let p = params.with_n_fock(n_fock);
        let (rho, obs) = solve_point(&p)?;
        let v = (rho.top_fock_population(n_fock), obs.mean_n);
        cache.insert(n_fock, v);
        Ok(v)
    };
    for n_fock in 1..=ceiling {
        let (top, mean_n) = eval(n_fock)?;
        if top >= tol {
            continue;
        }
        let (_, mean_n_up) = eval(n_fock + 2)?;
        if (mean_n - mean_n_up).abs() < tol * mean_n.max(1.0) {
            return Ok(n_fock);
        }
    }
    Err(Error::CutoffNotConverged { ceiling })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::build_hamiltonian;
    use crate::hilbert::{annihilator, basis_index};
    use rand::{Rng, SeedableRng};

    fn random_matrix(rng: &mut impl Rng, d: usize) -> DMatrix<C64> {
        DMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_state(rng: &mut impl Rng, d: usize) -> DMatrix<C64> {
        let m = random_matrix(rng, d);
        let rho = &m * m.adjoint();
        let tr = rho.trace();
        rho / tr
    }

    fn dense_dissipator(c: &DMatrix<C64>, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let cd = c.adjoint();
        let cdc = &cd * c;
        (c * rho * &cd) * C64::new(2.0, 0.0) - &cdc * rho - rho * &cdc
    }

    /// Right-hand side of the master equation, evaluated with dense
    /// matrix products.
    fn dense_rhs(p: &SystemParams, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let ops = CompositeOps::new(p.n_fock);
        let h = build_hamiltonian(p).unwrap().into_matrix();
        let i = C64::new(0.0, 1.0);
        let mut out = (&h * rho - rho * &h) * (-i);
        for (rate, c) in [
            (p.kappa, ops.a.matrix()),
            (p.gamma31, ops.sigma(1, 3).matrix()),
            (p.gamma32, ops.sigma(2, 3).matrix()),
            (p.gamma21, ops.sigma(1, 2).matrix()),
        ] {
            out += dense_dissipator(c, rho) * C64::new(0.5 * rate, 0.0);
        }
        out
    }

    #[test]
    fn zero_collapse_gives_zero_superoperator() {
        let l = dissipator(&QOperator::zeros(4));
        assert_eq!(l.nnz(), 0);
    }

    #[test]
    fn cavity_dissipator_on_one_photon() {
        let l = dissipator(&annihilator(1));
        let mut rho = DMatrix::zeros(2, 2);
        rho[(1, 1)] = C64::new(1.0, 0.0);
        let out = l.apply(&QOperator::from_matrix(rho).unwrap()).unwrap();
        assert!((out.get(0, 0) - C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((out.get(1, 1) - C64::new(-2.0, 0.0)).norm() < 1e-15);
        assert!(out.get(0, 1).norm() < 1e-15 && out.get(1, 0).norm() < 1e-15);
    }

    #[test]
    fn dissipator_matches_dense_and_is_traceless() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..10 {
            let c = random_matrix(&mut rng, 5);
            let rho = random_state(&mut rng, 5);
            let l = dissipator(&QOperator::from_matrix(c.clone()).unwrap());
            let got = l.apply(&QOperator::from_matrix(rho.clone()).unwrap()).unwrap();
            let want = dense_dissipator(&c, &rho);
            assert!((got.matrix() - &want).camax() < 1e-12);
            assert!(got.trace().norm() < 1e-12);
        }
    }

    #[test]
    fn dissipator_scales_quadratically() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let c = random_matrix(&mut rng, 4);
        let alpha = C64::new(0.7, -1.3);
        let l1 = dissipator(&QOperator::from_matrix(c.clone()).unwrap()).to_dense();
        let l2 = dissipator(&QOperator::from_matrix(&c * alpha).unwrap()).to_dense();
        assert!((l2 - l1 * C64::new(alpha.norm_sqr(), 0.0)).camax() < 1e-12);
    }

    #[test]
    fn liouvillian_matches_dense_master_equation() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let mut p = SystemParams::paper_defaults()
            .with_detunings(0.3, -0.2, 0.4)
            .with_n_fock(3);
        p.gamma21 = 2e-3;
        p.kappa = 0.05;
        let l = build_liouvillian(&p).unwrap();
        for _ in 0..5 {
            let rho = random_state(&mut rng, p.dim());
            let got = l.apply(&QOperator::from_matrix(rho.clone()).unwrap()).unwrap();
            let want = dense_rhs(&p, &rho);
            assert!((got.matrix() - want).camax() < 1e-12);
        }
    }

    #[test]
    fn liouvillian_preserves_trace() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(9);
        let p = SystemParams::paper_defaults().with_n_fock(4);
        let l = build_liouvillian(&p).unwrap();
        for _ in 0..20 {
            let m = random_matrix(&mut rng, p.dim());
            let x = (&m + m.adjoint()) * C64::new(0.5, 0.0);
            let out = l.apply(&QOperator::from_matrix(x).unwrap()).unwrap();
            assert!(out.trace().norm() < 1e-10);
        }
    }

    #[test]
    fn conservative_limit_is_pure_commutator() {
        let mut p = SystemParams::paper_defaults().with_n_fock(3);
        p.kappa = 0.0;
        p.gamma31 = 0.0;
        p.gamma32 = 0.0;
        let h = build_hamiltonian(&p).unwrap();
        let l = build_liouvillian(&p).unwrap();
        assert!((l.to_dense() - commutator_superoperator(&h).to_dense()).camax() < 1e-15);
        // any function of H is stationary
        let h2 = &h * &h;
        let out = l.apply(&h2).unwrap();
        assert!(out.max_abs() < 1e-10);
    }

    #[test]
    fn cavity_decay_moves_population_downward() {
        let mut p = SystemParams::paper_defaults().with_n_fock(4);
        p.g = 0.0;
        p.omega_free = 0.0;
        p.eta = 0.0;
        p.kappa = 0.2;
        let l = build_liouvillian(&p).unwrap();
        // diagonal state with weight on |1;2⟩ and |1;3⟩
        let mut rho = DMatrix::zeros(p.dim(), p.dim());
        rho[(2, 2)] = C64::new(0.6, 0.0);
        rho[(3, 3)] = C64::new(0.4, 0.0);
        let out = l.apply(&QOperator::from_matrix(rho).unwrap()).unwrap();
        // d/dt p_n = κ[(n+1) p_{n+1} − n p_n]
        let expected = [0.0, 0.2 * 2.0 * 0.6, 0.2 * (3.0 * 0.4 - 2.0 * 0.6), -0.2 * 3.0 * 0.4, 0.0];
        for (n, e) in expected.iter().enumerate() {
            assert!((out.get(n, n).re - e).abs() < 1e-14, "n = {n}");
        }
    }

    #[test]
    fn empty_driven_cavity_matches_analytic() {
        let mut p = SystemParams::paper_defaults().with_n_fock(12);
        p.g = 0.0;
        p.omega_free = 0.0;
        p.eta = 0.05;
        p.kappa = 0.2;
        for dc in [-0.3, 0.0, 0.15] {
            p.delta_c = dc;
            let (_, obs) = solve_point(&p).unwrap();
            let alpha = -C64::new(p.eta, 0.0) / C64::new(dc, -p.kappa / 2.0);
            assert!((obs.field - alpha).norm() < 1e-9, "{} vs {}", obs.field, alpha);
            let n = p.eta * p.eta / (dc * dc + p.kappa * p.kappa / 4.0);
            assert!((obs.mean_n - n).abs() < 1e-9 * n.max(1.0));
            assert!((obs.s11 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn optical_pumping_into_dark_ground_state() {
        let mut p = SystemParams::paper_defaults().with_n_fock(3);
        p.eta = 0.0;
        let (rho, obs) = solve_point(&p).unwrap();
        let k = basis_index(1, 0, 3).unwrap();
        assert!((rho.operator().get(k, k).re - 1.0).abs() < 1e-10);
        assert!(obs.mean_n.abs() < 1e-10);
        assert!((obs.s11 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn degenerate_null_space_is_reported() {
        // Ω = η = 0 with decay into |2⟩: |1;0⟩ and |2;0⟩ are both stationary.
        let mut p = SystemParams::paper_defaults().with_n_fock(2);
        p.eta = 0.0;
        p.omega_free = 0.0;
        let l = build_liouvillian(&p).unwrap();
        assert!(matches!(steady_state(&l), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn free_field_off_with_decay_to_2_shelves_the_atom() {
        let mut p = SystemParams::paper_defaults().with_n_fock(6);
        p.omega_free = 0.0;
        p.delta_c = -0.4;
        let (_, obs) = solve_point(&p).unwrap();
        assert!((obs.s22 - 1.0).abs() < 1e-8);
        let n = p.eta * p.eta / (p.delta_c * p.delta_c + p.kappa * p.kappa / 4.0);
        assert!((obs.mean_n - n).abs() < 1e-6 * n);
    }

    #[test]
    fn active_level_sets() {
        let p = SystemParams::paper_defaults();
        assert_eq!(active_levels(&p), vec![1, 2, 3]);
        assert_eq!(active_levels(&SystemParams::two_level_defaults()), vec![1, 3]);
        let mut q = p;
        q.g = 0.0;
        assert_eq!(active_levels(&q), vec![1]);
        q.gamma21 = 0.1;
        assert_eq!(active_levels(&q), vec![1]);
    }

    #[test]
    fn expectation_basics() {
        let p = SystemParams::paper_defaults().with_n_fock(3);
        let ops = CompositeOps::new(3);
        let mut ket = vec![C64::new(0.0, 0.0); p.dim()];
        ket[basis_index(1, 0, 3).unwrap()] = C64::new(1.0, 0.0);
        let rho = DensityMatrix::pure(&ket).unwrap();
        assert!((expectation(&rho, &QOperator::identity(p.dim())).unwrap() - 1.0).norm() < 1e-15);
        assert!((expectation(&rho, ops.sigma(1, 1)).unwrap() - 1.0).norm() < 1e-15);
        assert!(expectation(&rho, &ops.number()).unwrap().norm() < 1e-15);
        assert!(expectation(&rho, &QOperator::identity(3)).is_err());
    }

    #[test]
    fn steady_state_validity_at_paper_point() {
        let p = SystemParams::paper_defaults().with_detunings(-0.5, -0.5, -0.5).with_n_fock(6);
        let l = build_liouvillian(&p).unwrap();
        let rho = steady_state(&l).unwrap();
        let diag = StateDiagnostics::evaluate(&l, &rho).unwrap();
        assert!(diag.is_valid(), "{diag:?}");
        let obs = observables(&CompositeOps::new(6), &rho).unwrap();
        assert!((obs.s11 + obs.s22 + obs.s33 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cutoff_choice() {
        let mut p = SystemParams::paper_defaults();
        p.eta = 0.0;
        assert_eq!(choose_cutoff_with_ceiling(&p, 1e-6, 10).unwrap(), 1);

        // empty cavity with ⟨a†a⟩ = 0.25
        let mut q = SystemParams::paper_defaults();
        q.g = 0.0;
        q.omega_free = 0.0;
        q.kappa = 0.2;
        q.eta = 0.05;
        q.delta_c = 0.0;
        let n = choose_cutoff_with_ceiling(&q, 1e-6, 20).unwrap();
        assert!(n <= 10, "cutoff {n}");
        let (rho, obs) = solve_point(&q.with_n_fock(n)).unwrap();
        assert!(rho.top_fock_population(n) < 1e-6);
        assert!((obs.mean_n - 0.25).abs() < 1e-6);

        assert!(matches!(
            choose_cutoff_with_ceiling(&q, 1e-12, 2),
            Err(Error::CutoffNotConverged { ceiling: 2 })
        ));
        assert!(choose_cutoff_with_ceiling(&q, 0.0, 5).is_err());
    }
}
