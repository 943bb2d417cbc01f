//! Factorized mean-field (Maxwell–Bloch) model.
//!
//! Every mixed moment is split, ⟨σ_ij a⟩ → ⟨σ_ij⟩⟨a⟩, which leaves a
//! closed system for the atomic density matrix ρ_A and the coherent field
//! amplitude α = ⟨a⟩:
//!
//! ```text
//! dρ_A/dt = −i[H_A(α), ρ_A] + ½γ31 𝓛[σ13]ρ_A + ½γ32 𝓛[σ23]ρ_A + ½γ21 𝓛[σ12]ρ_A
//! H_A(α)  = Δ1 σ33 + (Δ1 − Δ2) σ22 + g(α σ31 + α* σ13) + Ω(σ32 + σ23)
//! dα/dt   = −(iΔc + κ/2) α − i g ⟨σ13⟩ − i η
//! ```
//!
//! These follow from d⟨O⟩/dt = tr(O 𝓛[ρ]) with the Liouvillian of
//! [`crate::lindblad`], followed by the factorization.
//!
//! Expectation values relate to matrix elements as ⟨σ_ij⟩ = ρ_ji. For the
//! real-vector form used by the integrator the coordinates are
//!
//! ```text
//! [s11, s22, s33, Re s12, Im s12, Re s13, Im s13, Re s23, Im s23, Re a, Im a]
//! ```

use nalgebra::{Matrix3, SMatrix, SVector};

use crate::error::{Error, Result};
use crate::hilbert::C64;
use crate::params::SystemParams;

pub const STATE_LEN: usize = 11;
pub type StateVector = SVector<f64, STATE_LEN>;
pub type Jacobian = SMatrix<f64, STATE_LEN, STATE_LEN>;

/// Population tolerance used by [`MeanFieldState::check`].
pub const POPULATION_SLACK: f64 = 1e-6;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanFieldState {
    pub s11: f64,
    pub s22: f64,
    pub s33: f64,
    pub s12: C64,
    pub s13: C64,
    pub s23: C64,
    pub a: C64,
}

impl MeanFieldState {
    /// Atom in |1⟩, empty cavity.
    pub fn ground() -> Self {
        Self {
            s11: 1.0,
            ..Self::default()
        }
    }

    pub fn population_sum(&self) -> f64 {
        self.s11 + self.s22 + self.s33
    }

    pub fn photon_number(&self) -> f64 {
        self.a.norm_sqr()
    }

    pub fn check(&self) -> Result<()> {
        if (self.population_sum() - 1.0).abs() > POPULATION_SLACK {
            return Err(Error::Precondition(format!(
                "populations sum to {}",
                self.population_sum()
            )));
        }
        for p in [self.s11, self.s22, self.s33] {
            if !(-POPULATION_SLACK..=1.0 + POPULATION_SLACK).contains(&p) {
                return Err(Error::Precondition(format!("population {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Atomic density matrix, ρ[j][i] = ⟨σ_ij⟩ (0-based indices).
    pub fn atomic_density(&self) -> Matrix3<C64> {
        let mut rho = Matrix3::zeros();
        rho[(0, 0)] = C64::new(self.s11, 0.0);
        rho[(1, 1)] = C64::new(self.s22, 0.0);
        rho[(2, 2)] = C64::new(self.s33, 0.0);
        for (i, j, s) in [(0, 1, self.s12), (0, 2, self.s13), (1, 2, self.s23)] {
            rho[(j, i)] = s;
            rho[(i, j)] = s.conj();
        }
        rho
    }

    pub fn from_atomic_density(rho: &Matrix3<C64>, a: C64) -> Self {
        Self {
            s11: rho[(0, 0)].re,
            s22: rho[(1, 1)].re,
            s33: rho[(2, 2)].re,
            s12: rho[(1, 0)],
            s13: rho[(2, 0)],
            s23: rho[(2, 1)],
            a,
        }
    }

    pub fn to_vector(&self) -> StateVector {
        StateVector::from_column_slice(&[
            self.s11, self.s22, self.s33, self.s12.re, self.s12.im, self.s13.re, self.s13.im,
            self.s23.re, self.s23.im, self.a.re, self.a.im,
        ])
    }

    pub fn from_vector(v: &StateVector) -> Self {
        Self {
            s11: v[0],
            s22: v[1],
            s33: v[2],
            s12: C64::new(v[3], v[4]),
            s13: C64::new(v[5], v[6]),
            s23: C64::new(v[7], v[8]),
            a: C64::new(v[9], v[10]),
        }
    }
}

fn atom_op(i: usize, j: usize) -> Matrix3<C64> {
    let mut m = Matrix3::zeros();
    m[(i - 1, j - 1)] = C64::new(1.0, 0.0);
    m
}

fn dissipate(rate: f64, c: &Matrix3<C64>, rho: &Matrix3<C64>) -> Matrix3<C64> {
    if rate == 0.0 {
        return Matrix3::zeros();
    }
    let cd = c.adjoint();
    let cdc = cd * c;
    ((c * rho * cd) * C64::new(2.0, 0.0) - cdc * rho - rho * cdc) * C64::new(rate, 0.0)
}

/// Terms of the vector field that are linear in (ρ_A, α).
fn linear_part(rho: &Matrix3<C64>, a: C64, p: &SystemParams) -> (Matrix3<C64>, C64) {
    let mut h0 = Matrix3::zeros();
    h0[(2, 2)] = C64::new(p.delta_1, 0.0);
    h0[(1, 1)] = C64::new(p.delta_1 - p.delta_2, 0.0);
    h0[(2, 1)] = C64::new(p.omega_free, 0.0);
    h0[(1, 2)] = C64::new(p.omega_free, 0.0);
    let mut d_rho = (h0 * rho - rho * h0) * (-I);
    d_rho += dissipate(0.5 * p.gamma31, &atom_op(1, 3), rho);
    d_rho += dissipate(0.5 * p.gamma32, &atom_op(2, 3), rho);
    d_rho += dissipate(0.5 * p.gamma21, &atom_op(1, 2), rho);
    let s13 = rho[(2, 0)];
    let d_a = -(I * p.delta_c + 0.5 * p.kappa) * a - I * p.g * s13;
    (d_rho, d_a)
}

/// The bilinear coupling −i g [α σ31 + α* σ13, ρ_A].
fn coupling_part(rho: &Matrix3<C64>, a: C64, p: &SystemParams) -> Matrix3<C64> {
    let mut v = Matrix3::zeros();
    v[(2, 0)] = a * p.g;
    v[(0, 2)] = a.conj() * p.g;
    (v * rho - rho * v) * (-I)
}

/// Time derivative of every component, returned in the same layout.
pub fn mean_field_rhs(state: &MeanFieldState, params: &SystemParams) -> MeanFieldState {
    let rho = state.atomic_density();
    let (mut d_rho, mut d_a) = linear_part(&rho, state.a, params);
    d_rho += coupling_part(&rho, state.a, params);
    d_a -= I * params.eta;
    MeanFieldState::from_atomic_density(&d_rho, d_a)
}

pub fn rhs_vector(x: &StateVector, params: &SystemParams) -> StateVector {
    mean_field_rhs(&MeanFieldState::from_vector(x), params).to_vector()
}

/// Directional derivative J(x)·v of the vector field.
pub fn jacobian_times(x: &StateVector, v: &StateVector, params: &SystemParams) -> StateVector {
    let sx = MeanFieldState::from_vector(x);
    let sv = MeanFieldState::from_vector(v);
    let (rx, rv) = (sx.atomic_density(), sv.atomic_density());
    let (mut d_rho, d_a) = linear_part(&rv, sv.a, params);
    d_rho += coupling_part(&rv, sx.a, params) + coupling_part(&rx, sv.a, params);
    MeanFieldState::from_atomic_density(&d_rho, d_a).to_vector()
}

pub fn jacobian(x: &StateVector, params: &SystemParams) -> Jacobian {
    let mut j = Jacobian::zeros();
    for k in 0..STATE_LEN {
        let col = jacobian_times(x, &StateVector::ith(k, 1.0), params);
        j.set_column(k, &col);
    }
    j
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrationOptions {
    /// Relative and absolute local error tolerance per step.
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_steps: usize,
    /// ‖f‖∞ below which Newton polishing is attempted.
    pub polish_below: f64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-7,
            atol: 1e-10,
            initial_step: 1e-3,
            max_steps: 5_000_000,
            polish_below: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MeanFieldSolution {
    pub state: MeanFieldState,
    /// ‖d(state)/dt‖∞ dropped below the tolerance before t_max.
    pub converged: bool,
    pub time: f64,
    pub steps: usize,
    /// ‖d(state)/dt‖∞ at the returned state.
    pub rate: f64,
}

pub fn integrate_to_steady(
    params: &SystemParams,
    initial: &MeanFieldState,
    t_max: f64,
    tol: f64,
) -> Result<MeanFieldSolution> {
    integrate_to_steady_with(params, initial, t_max, tol, &IntegrationOptions::default())
}

// Dormand–Prince 5(4) tableau. The system is autonomous, so the stage
// times are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive Dormand–Prince integration from `initial` until the vector
/// field falls below `tol` or `t_max` is reached.
///
/// Whenever ‖f‖∞ drops below `opts.polish_below`, Newton iterations
/// (population sum held at its current value) are tried from the current
/// point. A polished point is accepted only if it meets `tol` and every
/// Jacobian eigenvalue off the conserved direction has a non-positive real
/// part; otherwise integration resumes with the threshold lowered
/// tenfold.
pub fn integrate_to_steady_with(
    params: &SystemParams,
    initial: &MeanFieldState,
    t_max: f64,
    tol: f64,
    opts: &IntegrationOptions,
) -> Result<MeanFieldSolution> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidParameter {
            field: "t_max",
            reason: format!("must be positive, got {t_max}"),
        });
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter {
            field: "tol",
            reason: format!("must be positive, got {tol}"),
        });
    }
    params.validate()?;
    let f = |x: &StateVector| rhs_vector(x, params);

    let mut x = initial.to_vector();
    let mut t = 0.0;
    let mut h = opts.initial_step.min(t_max);
    let mut k1 = f(&x);
    let mut steps = 0;
    let mut polish_below = opts.polish_below;
    while steps < opts.max_steps {
        let rate = k1.amax();
        if rate < tol {
            return Ok(finish(x, true, t, steps, rate));
        }
        if rate < polish_below {
            if let Some(xp) = newton_polish(&x, params, tol) {
                let rate = f(&xp).amax();
                return Ok(finish(xp, true, t, steps, rate));
            }
            polish_below *= 0.1;
        }
        if t >= t_max {
            break;
        }
        h = h.min(t_max - t);
        let k2 = f(&(x + h * A21 * k1));
        let k3 = f(&(x + h * (A31 * k1 + A32 * k2)));
        let k4 = f(&(x + h * (A41 * k1 + A42 * k2 + A43 * k3)));
        let k5 = f(&(x + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4)));
        let k6 = f(&(x + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)));
        let x_new = x + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = f(&x_new);
        let err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let err = err_vec
            .iter()
            .zip(x.iter().zip(x_new.iter()))
            .map(|(e, (a, b))| e / (opts.atol + opts.rtol * a.abs().max(b.abs())))
            .fold(0.0_f64, |m, r| m.max(r.abs()));
        if !err.is_finite() {
            return Err(Error::Precondition("mean-field integration diverged".into()));
        }
        if err <= 1.0 {
            t += h;
            x = x_new;
            k1 = k7;
            steps += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
        h *= factor.clamp(0.2, 5.0);
    }
    let rate = k1.amax();
    Ok(finish(x, rate < tol, t, steps, rate))
}

/// Newton iteration for f(x) = 0 with the population sum fixed; returns the
/// root if it is reached within `tol` and is linearly stable.
fn newton_polish(x0: &StateVector, params: &SystemParams, tol: f64) -> Option<StateVector> {
    let pop = x0[0] + x0[1] + x0[2];
    // s22 is then a constant of motion and must keep its initial value
    let level_two_decoupled = params.omega_free == 0.0 && params.gamma32 == 0.0 && params.gamma21 == 0.0;
    let mut x = *x0;
    for _ in 0..30 {
        let mut rhs = -rhs_vector(&x, params);
        if rhs.amax() < tol {
            return is_stable(&x, params).then_some(x);
        }
        let mut j = jacobian(&x, params);
        // the population rows of J sum to zero; pin the sum instead
        for k in 0..STATE_LEN {
            j[(0, k)] = if k < 3 { 1.0 } else { 0.0 };
        }
        rhs[0] = pop - (x[0] + x[1] + x[2]);
        if level_two_decoupled {
            for k in 0..STATE_LEN {
                j[(1, k)] = if k == 1 { 1.0 } else { 0.0 };
            }
            rhs[1] = x0[1] - x[1];
        }
        // minimum-norm step for whatever degeneracy is left
        let dx = j.svd(true, true).solve(&rhs, 1e-12 * j.amax()).ok()?;
        if !dx.iter().all(|v| v.is_finite()) {
            return None;
        }
        x += dx;
    }
    None
}

fn is_stable(x: &StateVector, params: &SystemParams) -> bool {
    let j = jacobian(x, params);
    let scale = j.amax().max(1.0);
    let growing = j
        .complex_eigenvalues()
        .iter()
        .filter(|l| l.re > 1e-10 * scale)
        .count();
    growing == 0
}

fn finish(x: StateVector, converged: bool, time: f64, steps: usize, rate: f64) -> MeanFieldSolution {
    MeanFieldSolution {
        state: MeanFieldState::from_vector(&x),
        converged,
        time,
        steps,
        rate,
    }
}

/// Time scale over which the slowest damping channel relaxes; used as the
/// default integration horizon.
pub fn default_horizon(params: &SystemParams) -> f64 {
    let slowest = [params.kappa, params.gamma31 + params.gamma32]
        .into_iter()
        .filter(|r| *r > 0.0)
        .fold(f64::INFINITY, f64::min);
    if slowest.is_finite() {
        200.0 / slowest
    } else {
        1e4
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{embed, CompositeOps, QOperator};
    use crate::lindblad::{build_liouvillian, expectation, DensityMatrix};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};

    fn random_state(rng: &mut impl Rng) -> MeanFieldState {
        let m = Matrix3::from_fn(|_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let rho = m * m.adjoint();
        let rho = rho / rho.trace();
        let a = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        MeanFieldState::from_atomic_density(&rho, a)
    }

    fn random_params(rng: &mut impl Rng) -> SystemParams {
        SystemParams {
            g: rng.random_range(0.1..3.0),
            omega_free: rng.random_range(0.0..1.0),
            eta: rng.random_range(0.0..1.0),
            kappa: rng.random_range(0.01..1.0),
            gamma31: rng.random_range(0.01..1.0),
            gamma32: rng.random_range(0.01..1.0),
            gamma21: rng.random_range(0.0..0.2),
            delta_c: rng.random_range(-2.0..2.0),
            delta_1: rng.random_range(-2.0..2.0),
            delta_2: rng.random_range(-2.0..2.0),
            n_fock: 10,
        }
    }

    #[test]
    fn ground_state_is_fixed_without_drives() {
        let mut p = SystemParams::paper_defaults();
        p.g = 0.0;
        p.omega_free = 0.0;
        p.eta = 0.0;
        let d = mean_field_rhs(&MeanFieldState::ground(), &p);
        assert_eq!(d.to_vector().amax(), 0.0);
    }

    #[test]
    fn empty_cavity_field_equation() {
        let mut p = SystemParams::paper_defaults();
        p.g = 0.0;
        p.omega_free = 0.0;
        p.delta_c = 0.4;
        let mut s = MeanFieldState::ground();
        s.a = C64::new(0.3, -0.2);
        let d = mean_field_rhs(&s, &p);
        let want = -(I * p.delta_c + p.kappa / 2.0) * s.a - I * p.eta;
        assert!((d.a - want).norm() < 1e-15);
    }

    #[test]
    fn population_derivatives_cancel() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        for _ in 0..100 {
            let s = random_state(&mut rng);
            let p = random_params(&mut rng);
            let d = mean_field_rhs(&s, &p);
            assert!(d.population_sum().abs() < 1e-13);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(2);
        for _ in 0..20 {
            let x = random_state(&mut rng).to_vector();
            let p = random_params(&mut rng);
            let j = jacobian(&x, &p);
            let h = 1e-6;
            let mut fd = Jacobian::zeros();
            for k in 0..STATE_LEN {
                let e = StateVector::ith(k, h);
                let col = (rhs_vector(&(x + e), &p) - rhs_vector(&(x - e), &p)) / (2.0 * h);
                fd.set_column(k, &col);
            }
            let scale = j.amax().max(1.0);
            assert!((j - fd).amax() < 1e-6 * scale, "{}", (j - fd).amax());
        }
    }

    /// Oracle: for ρ = ρ_A ⊗ |α⟩⟨α| the factorization is exact, so the
    /// mean-field derivative must equal tr(O 𝓛[ρ]) from the full
    /// Liouvillian, up to Fock truncation of the coherent state.
    #[test]
    fn matches_full_liouvillian_on_product_states() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let n_fock = 30;
        let ops = CompositeOps::new(n_fock);
        for _ in 0..5 {
            let mut s = random_state(&mut rng);
            s.a *= 0.8;
            let p = random_params(&mut rng).with_n_fock(n_fock);

            let mut coh = vec![C64::new(0.0, 0.0); n_fock + 1];
            let mut amp = C64::new((-0.5 * s.a.norm_sqr()).exp(), 0.0);
            for (n, c) in coh.iter_mut().enumerate() {
                if n > 0 {
                    amp *= s.a / (n as f64).sqrt();
                }
                *c = amp;
            }
            let v = nalgebra::DVector::from_vec(coh);
            let field = QOperator::from_matrix(&v * v.adjoint()).unwrap();
            let rho_a = s.atomic_density();
            let atom = QOperator::from_matrix(DMatrix::from_fn(3, 3, |i, j| rho_a[(i, j)])).unwrap();
            let rho = embed(&atom, &field).unwrap();

            let l = build_liouvillian(&p).unwrap();
            let drho = l.apply(&rho).unwrap();
            // tr(O·dρ) computed via DensityMatrix-free expectation
            let ev = |op: &QOperator| -> C64 {
                let m = drho.matrix() * op.matrix();
                m.trace()
            };
            let d = mean_field_rhs(&s, &p);
            assert!((ev(&ops.a) - d.a).norm() < 1e-8);
            assert!((ev(ops.sigma(1, 3)) - d.s13).norm() < 1e-8);
            assert!((ev(ops.sigma(1, 2)) - d.s12).norm() < 1e-8);
            assert!((ev(ops.sigma(2, 3)) - d.s23).norm() < 1e-8);
            assert!((ev(ops.sigma(3, 3)).re - d.s33).abs() < 1e-8);
            assert!((ev(ops.sigma(2, 2)).re - d.s22).abs() < 1e-8);
        }
    }

    #[test]
    fn driven_empty_cavity_relaxes_to_analytic_value() {
        let mut p = SystemParams::paper_defaults();
        p.g = 0.0;
        p.omega_free = 0.0;
        p.kappa = 0.2;
        p.eta = 0.05;
        p.delta_c = 0.3;
        let sol = integrate_to_steady(&p, &MeanFieldState::ground(), 1e4, 1e-10).unwrap();
        assert!(sol.converged);
        let n = p.eta * p.eta / (p.delta_c * p.delta_c + p.kappa * p.kappa / 4.0);
        assert!((sol.state.photon_number() - n).abs() < 1e-8 * n);
    }

    #[test]
    fn population_is_conserved_along_trajectory() {
        let p = SystemParams::paper_defaults().with_detunings(0.2, 0.1, 0.1);
        let sol = integrate_to_steady(&p, &MeanFieldState::ground(), 500.0, 1e-14).unwrap();
        assert!((sol.state.population_sum() - 1.0).abs() < 1e-8);
        sol.state.check().unwrap();
    }

    #[test]
    fn exact_and_mean_field_agree_for_weak_probe() {
        // weak coupling, strong damping; the ratio must approach 1 as η shrinks
        let base = SystemParams {
            g: 0.05,
            omega_free: 0.1,
            eta: 0.0,
            kappa: 1.0,
            gamma31: 1.0,
            gamma32: 1.0,
            gamma21: 0.0,
            delta_c: 0.1,
            delta_1: 0.2,
            delta_2: 0.2,
            n_fock: 6,
        };
        let ops = CompositeOps::new(base.n_fock);
        let mut last = f64::INFINITY;
        for eta in [0.2, 0.1, 0.05] {
            let p = SystemParams { eta, ..base };
            let sol = integrate_to_steady(&p, &MeanFieldState::ground(), 1e4, 1e-12).unwrap();
            assert!(sol.converged);
            let l = build_liouvillian(&p).unwrap();
            let rho: DensityMatrix = crate::lindblad::steady_state(&l).unwrap();
            let a_exact = expectation(&rho, &ops.a).unwrap();
            let dev = (sol.state.a / a_exact - 1.0).norm();
            assert!(dev < 0.05, "η = {eta}: deviation {dev}");
            assert!(dev <= last + 1e-12);
            last = dev;
        }
    }

    #[test]
    fn polishing_lands_on_the_integrated_fixed_point() {
        let mut p = SystemParams::paper_defaults().with_detunings(-2.0, -2.1, -2.1);
        p.kappa = 0.05;
        p.gamma31 = 0.05;
        p.gamma32 = 0.05;
        let plain = IntegrationOptions {
            polish_below: 0.0,
            rtol: 1e-10,
            atol: 1e-13,
            ..Default::default()
        };
        let a = integrate_to_steady_with(&p, &MeanFieldState::ground(), 1e5, 1e-11, &plain).unwrap();
        let b = integrate_to_steady(&p, &MeanFieldState::ground(), 1e5, 1e-11).unwrap();
        assert!(a.converged && b.converged);
        assert!(b.time < a.time);
        let diff = (a.state.to_vector() - b.state.to_vector()).amax();
        // the plain run stops on a slow dark-state mode still ~1e-8 away
        assert!(diff < 1e-6, "{diff:e}");
    }

    #[test]
    fn decoupled_level_two_stays_empty() {
        let p = SystemParams::two_level_defaults().with_n_fock(8);
        let sol = integrate_to_steady(&p, &MeanFieldState::ground(), default_horizon(&p), 1e-9).unwrap();
        assert!(sol.converged);
        assert!(sol.state.s22.abs() < 1e-14, "{}", sol.state.s22);
        assert!((sol.state.population_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn argument_checks() {
        let p = SystemParams::paper_defaults();
        assert!(integrate_to_steady(&p, &MeanFieldState::ground(), 0.0, 1e-6).is_err());
        assert!(integrate_to_steady(&p, &MeanFieldState::ground(), 1.0, -1.0).is_err());
        let mut bad = MeanFieldState::ground();
        bad.s11 = 0.5;
        assert!(bad.check().is_err());
    }
}
