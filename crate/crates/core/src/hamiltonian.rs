//! Rotating-frame Hamiltonian (ħ = 1), co-rotating with the probe:
//!
//! ```text
//! H = Δc a†a + Δ1 σ33 + (Δ1 − Δ2) σ22
//!   + g (σ31 a + σ13 a†) + Ω (σ32 + σ23) + η (a + a†)
//! ```

use nalgebra::Matrix3;

use crate::error::Result;
use crate::hilbert::{CompositeOps, QOperator};
use crate::params::SystemParams;

/// Bare energies: Δc a†a + Δ1 σ33 + (Δ1 − Δ2) σ22.
pub fn detuning_term(ops: &CompositeOps, params: &SystemParams) -> QOperator {
    let n = ops.number().scale(params.delta_c);
    let e3 = ops.sigma(3, 3).scale(params.delta_1);
    let e2 = ops.sigma(2, 2).scale(params.delta_1 - params.delta_2);
    &(&n + &e3) + &e2
}

/// g (σ31 a + σ13 a†).
pub fn cavity_coupling_term(ops: &CompositeOps, g: f64) -> QOperator {
    let up = ops.sigma(3, 1) * &ops.a;
    (&up + &up.dagger()).scale(g)
}

/// Ω (σ32 + σ23).
pub fn free_drive_term(ops: &CompositeOps, omega: f64) -> QOperator {
    (ops.sigma(3, 2) + ops.sigma(2, 3)).scale(omega)
}

/// η (a + a†).
pub fn probe_drive_term(ops: &CompositeOps, eta: f64) -> QOperator {
    (&ops.a + &ops.a.dagger()).scale(eta)
}

pub fn build_hamiltonian(params: &SystemParams) -> Result<QOperator> {
    params.validate()?;
    Ok(build_hamiltonian_with(&CompositeOps::new(params.n_fock), params))
}

/// Same as [`build_hamiltonian`] but reuses precomputed operators; the
/// caller guarantees `ops.n_fock == params.n_fock`.
pub fn build_hamiltonian_with(ops: &CompositeOps, params: &SystemParams) -> QOperator {
    debug_assert_eq!(ops.n_fock, params.n_fock);
    let mut h = detuning_term(ops, params);
    h = &h + &cavity_coupling_term(ops, params.g);
    h = &h + &free_drive_term(ops, params.omega_free);
    &h + &probe_drive_term(ops, params.eta)
}

/// The η = 0 Hamiltonian restricted to {|1; n+1⟩, |2; n⟩, |3; n⟩}.
pub fn block_matrix(n: usize, params: &SystemParams) -> Matrix3<f64> {
    let nf = n as f64;
    let gc = params.g * (nf + 1.0).sqrt();
    let om = params.omega_free;
    Matrix3::new(
        (nf + 1.0) * params.delta_c,
        0.0,
        gc,
        0.0,
        nf * params.delta_c + params.delta_1 - params.delta_2,
        om,
        gc,
        om,
        nf * params.delta_c + params.delta_1,
    )
}
