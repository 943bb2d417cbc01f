//! Dressed-state analytics for the η = 0 manifolds.
//!
//! Manifold `n` is spanned by (|1; n+1⟩, |2; n⟩, |3; n⟩) and its Hamiltonian
//! is [`block_matrix`]. When the two-photon detuning
//! `Δc − Δ1 + Δ2` vanishes, |1; n+1⟩ and |2; n⟩ are degenerate and the
//! block diagonalizes in closed form. With G = g√(n+1),
//! R² = G² + Ω² and Δ = Δ1 − Δc (= ω31 − ωc):
//!
//! ```text
//! ω⁰ = (n+1) Δc
//! ω± = (n+1) Δc + ½ (Δ ± √(4R² + Δ²))
//!
//! tan θ = Ω / G
//! tan φ = 2R / (√(4R² + Δ²) − Δ)
//!
//! |n,0⟩ = −sin θ |1;n+1⟩ + cos θ |2;n⟩
//! |n,−⟩ = −cos θ sin φ |1;n+1⟩ − sin θ sin φ |2;n⟩ + cos φ |3;n⟩
//! |n,+⟩ =  cos θ cos φ |1;n+1⟩ + sin θ cos φ |2;n⟩ + sin φ |3;n⟩
//! ```
//!
//! Energies are in the probe rotating frame, on the same footing as
//! [`block_matrix`]; the lab-frame offset ωc(n + ½) is dropped.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::block_matrix;
use crate::hilbert::C64;
use crate::params::SystemParams;

const RESONANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Minus,
    Zero,
    Plus,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Minus => "minus",
            Branch::Zero => "zero",
            Branch::Plus => "plus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedLevel {
    pub n: usize,
    pub branch: Branch,
    pub energy: f64,
    /// Coefficients on (|1; n+1⟩, |2; n⟩, |3; n⟩).
    pub amplitudes: [C64; 3],
}

impl DressedLevel {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn overlap(&self, other: &DressedLevel) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Δc − Δ1 + Δ2: energy of |1; n+1⟩ minus that of |2; n⟩, the same in
/// every manifold.
pub fn two_photon_detuning(params: &SystemParams) -> f64 {
    params.delta_c - params.delta_1 + params.delta_2
}

fn check_two_photon_resonance(params: &SystemParams) -> Result<()> {
    let detuning = two_photon_detuning(params);
    let scale = 1f64
        .max(params.delta_c.abs())
        .max(params.delta_1.abs())
        .max(params.delta_2.abs());
    if detuning.abs() > RESONANCE_TOL * scale {
        return Err(Error::Precondition(format!(
            "closed-form dressed states need a vanishing two-photon detuning \
             Δc − Δ1 + Δ2, got {detuning:e}"
        )));
    }
    Ok(())
}

fn atom_cavity_mismatch(params: &SystemParams) -> f64 {
    params.delta_1 - params.delta_c
}

fn coupling_radius_sq(n: usize, params: &SystemParams) -> f64 {
    params.g * params.g * (n as f64 + 1.0) + params.omega_free * params.omega_free
}

/// Returns (ω⁰, ω⁻, ω⁺).
pub fn dressed_energies_resonant(n: usize, params: &SystemParams) -> Result<(f64, f64, f64)> {
    check_two_photon_resonance(params)?;
    let base = (n as f64 + 1.0) * params.delta_c;
    let delta = atom_cavity_mismatch(params);
    let root = (4.0 * coupling_radius_sq(n, params) + delta * delta).sqrt();
    Ok((base, base + 0.5 * (delta - root), base + 0.5 * (delta + root)))
}

/// Returns (θ, φ). θ lies in [0, π/2] (π/2 only when g = 0) and φ in (0, π/2).
pub fn mixing_angles(n: usize, params: &SystemParams) -> Result<(f64, f64)> {
    if params.g == 0.0 && params.omega_free == 0.0 {
        return Err(Error::Degenerate(
            "mixing angles are undefined when g = Ω = 0".into(),
        ));
    }
    let gc = params.g * (n as f64 + 1.0).sqrt();
    let theta = params.omega_free.atan2(gc);
    let two_r = 2.0 * coupling_radius_sq(n, params).sqrt();
    let delta = atom_cavity_mismatch(params);
    let denom = (two_r * two_r + delta * delta).sqrt() - delta;
    let phi = two_r.atan2(denom);
    Ok((theta, phi))
}

/// Returns (|n,0⟩, |n,−⟩, |n,+⟩).
pub fn dressed_states_resonant(
    n: usize,
    params: &SystemParams,
) -> Result<(DressedLevel, DressedLevel, DressedLevel)> {
    let (e0, em, ep) = dressed_energies_resonant(n, params)?;
    let (theta, phi) = mixing_angles(n, params)?;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let re = |x: f64| C64::new(x, 0.0);
    let zero = DressedLevel {
        n,
        branch: Branch::Zero,
        energy: e0,
        amplitudes: [re(-st), re(ct), re(0.0)],
    };
    let minus = DressedLevel {
        n,
        branch: Branch::Minus,
        energy: em,
        amplitudes: [re(-ct * sp), re(-st * sp), re(cp)],
    };
    let plus = DressedLevel {
        n,
        branch: Branch::Plus,
        energy: ep,
        amplitudes: [re(ct * cp), re(st * cp), re(sp)],
    };
    Ok((zero, minus, plus))
}

/// Numerical diagonalization of [`block_matrix`]; levels are returned in
/// ascending energy and labelled minus, zero, plus. Among levels degenerate
/// with the middle one, the one with the largest |2; n⟩ weight is labelled
/// zero. Each eigenvector is phased so its largest component is real and
/// positive.
pub fn dressed_states_general(n: usize, params: &SystemParams) -> [DressedLevel; 3] {
    let block: Matrix3<f64> = block_matrix(n, params);
    let eig = SymmetricEigen::new(block);
    let scale = block.amax().max(1.0);
    let mut pairs: Vec<(f64, [f64; 3])> = (0..3)
        .map(|k| {
            let v = eig.eigenvectors.column(k);
            (eig.eigenvalues[k], [v[0], v[1], v[2]])
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let degenerate = |a: f64, b: f64| (a - b).abs() <= 1e-12 * scale;
    let middle_energy = pairs[1].0;
    let zero_idx = (0..3)
        .filter(|&k| degenerate(pairs[k].0, middle_energy))
        .max_by(|&a, &b| {
            pairs[a].1[1]
                .abs()
                .total_cmp(&pairs[b].1[1].abs())
                .then(b.cmp(&a))
        })
        .unwrap_or(1);
    if zero_idx != 1 {
        pairs.swap(1, zero_idx);
        // keep ascending order among the remaining two
        if pairs[0].0 > pairs[2].0 {
            pairs.swap(0, 2);
        }
    }

    let branches = [Branch::Minus, Branch::Zero, Branch::Plus];
    std::array::from_fn(|k| {
        let (energy, mut v) = pairs[k];
        let lead = (0..3)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .unwrap();
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        DressedLevel {
            n,
            branch: branches[k],
            energy,
            amplitudes: v.map(|x| C64::new(x, 0.0)),
        }
    })
}

/// Dark-state dressing by the probe at ω31 = ωc: (−η√(n+1), +η√(n+1)).
pub fn raman_dressed_energies(n: usize, params: &SystemParams) -> (f64, f64) {
    let split = params.eta * (n as f64 + 1.0).sqrt();
    (-split, split)
}

/// Positions ±η/√(n+1) of the dark-state mediated multiphoton Raman
/// resonances for n = 0..=n_max, ascending.
pub fn raman_peak_positions(n_max: usize, eta: f64) -> Vec<f64> {
    let mut out: Vec<f64> = (0..=n_max)
        .flat_map(|n| {
            let p = eta / (n as f64 + 1.0).sqrt();
            [-p, p]
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiphotonModel {
    TwoLevel,
    ThreeLevel,
}

/// Per-photon resonance positions ±½√(4g²(n+1) + [4Ω²] + Δ²)/(n+1) for
/// n = 0..=n_max, ascending. Δ = ω31 − ωc; the Ω term is only present for
/// the three-level model.
pub fn multiphoton_peak_positions(
    n_max: usize,
    params: &SystemParams,
    model: MultiphotonModel,
) -> Vec<f64> {
    let delta = atom_cavity_mismatch(params);
    let drive = match model {
        MultiphotonModel::TwoLevel => 0.0,
        MultiphotonModel::ThreeLevel => 4.0 * params.omega_free * params.omega_free,
    };
    let mut out: Vec<f64> = (0..=n_max)
        .flat_map(|n| {
            let order = n as f64 + 1.0;
            let p = 0.5 * (4.0 * params.g * params.g * order + drive + delta * delta).sqrt() / order;
            [-p, p]
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}
