//! Density matrices, thermal states and the entropy/coherence metrics.
//!
//! "Energy representation" always refers to an [`EnergyBasis`]. Entropies are
//! in nats.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, CohError, Result};
use crate::linalg::{self, CMatrix, HermitianMatrix};
use crate::spinsys::EnergyBasis;

/// Tolerance for the trace, hermiticity and positivity of a density matrix.
pub const STATE_TOL: f64 = 1e-12;
/// Eigenvalues/populations at or below this are exact zeros in entropy sums.
pub const ENTROPY_ZERO: f64 = 1e-14;
/// Negative populations down to `-POPULATION_CLIP` are roundoff and clipped.
pub const POPULATION_CLIP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let dev = linalg::hermitian_deviation(&m)?;
        if dev > STATE_TOL {
            return Err(CohError::InvalidState(format!("not Hermitian, deviation {dev:e}")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(CohError::InvalidState(format!("trace {tr} is not 1")));
        }
        let min_eig = linalg::eigvalsh(&m).first().copied().unwrap_or(0.0);
        if min_eig < -STATE_TOL {
            return Err(CohError::InvalidState(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self(m))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) state vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if psi.is_empty() || norm == 0.0 {
            return Err(CohError::InvalidState("zero state vector".into()));
        }
        let n = psi.len();
        let m = CMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Ok(Self(HermitianMatrix::hermitize(&m).into_matrix()))
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self(CMatrix::identity(n, n).scale(1.0 / n as f64))
    }

    /// Builds `Σ_k p_k |b_k⟩⟨b_k|` from populations in a given basis.
    pub fn from_populations(p: &PopulationVector, basis: &EnergyBasis) -> Result<Self> {
        check_dim(basis.dim(), p.len())?;
        let m = linalg::function_of(p.as_slice(), basis.vectors(), |x| C64::new(x, 0.0));
        Ok(Self(HermitianMatrix::hermitize(&m).into_matrix()))
    }

    /// Wraps a matrix produced by trace- and spectrum-preserving arithmetic,
    /// symmetrizing away roundoff.
    pub(crate) fn from_trusted(m: &CMatrix) -> Self {
        Self(HermitianMatrix::hermitize(m).into_matrix())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.0)
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        linalg::re_trace_product(&self.0, &self.0)
    }
}

/// Probabilities of a complete measurement, `p_k ≥ 0`, `Σ p_k = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationVector(Vec<f64>);

impl PopulationVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(CohError::InvalidPopulations("empty".into()));
        }
        if let Some(x) = p.iter().find(|x| !(**x >= 0.0)) {
            return Err(CohError::InvalidPopulations(format!("entry {x} is negative")));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > STATE_TOL {
            return Err(CohError::InvalidPopulations(format!("sum {s} is not 1")));
        }
        Ok(Self(p))
    }

    /// Clips roundoff negatives and renormalizes.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        if let Some(x) = w.iter().find(|x| !(**x >= -POPULATION_CLIP)) {
            return Err(CohError::InvalidPopulations(format!("entry {x} is negative")));
        }
        let clipped: Vec<f64> = w.iter().map(|x| x.max(0.0)).collect();
        let s: f64 = clipped.iter().sum();
        if !(s > 0.0) {
            return Err(CohError::InvalidPopulations("zero total weight".into()));
        }
        Ok(Self(clipped.into_iter().map(|x| x / s).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Boltzmann weights `exp(-β e_k)/Z` for any real `β`, including `±∞`.
///
/// Infinite `β` gives the uniform distribution over the degenerate ground
/// (or top) level.
pub fn canonical_populations(energies: &[f64], beta: f64) -> Vec<f64> {
    if beta.is_infinite() {
        let target = if beta > 0.0 {
            energies.iter().copied().fold(f64::INFINITY, f64::min)
        } else {
            energies.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        let scale = energies.iter().fold(1.0_f64, |s, x| s.max(x.abs()));
        let hits: Vec<bool> = energies
            .iter()
            .map(|e| (e - target).abs() <= crate::spinsys::DEGENERACY_TOL * scale)
            .collect();
        let count = hits.iter().filter(|h| **h).count() as f64;
        return hits.iter().map(|&h| if h { 1.0 / count } else { 0.0 }).collect();
    }
    // Shift by the extreme energy so the largest exponent is zero.
    let shift = if beta >= 0.0 {
        energies.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        energies.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    };
    let w: Vec<f64> = energies.iter().map(|e| (-beta * (e - shift)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// `Σ p_k e_k`.
pub fn population_energy(p: &[f64], energies: &[f64]) -> f64 {
    p.iter().zip(energies).map(|(p, e)| p * e).sum()
}

/// Inverse temperature whose canonical mean energy equals `energy`.
///
/// Solved by bisection on the monotone map `β ↦ ⟨E⟩_β`; returns `±∞` when the
/// energy sits at the spectrum's edge.
pub fn beta_for_energy(energies: &[f64], energy: f64) -> Result<f64> {
    let lo_e = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_e = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi_e - lo_e;
    if spread <= 0.0 {
        return Err(CohError::Domain("flat spectrum has no temperature".into()));
    }
    let tol = 1e-14 * spread.max(lo_e.abs()).max(hi_e.abs());
    if energy < lo_e - tol || energy > hi_e + tol {
        return Err(CohError::Domain(format!(
            "energy {energy} outside the spectrum [{lo_e}, {hi_e}]"
        )));
    }
    if energy <= lo_e + tol {
        return Ok(f64::INFINITY);
    }
    if energy >= hi_e - tol {
        return Ok(f64::NEG_INFINITY);
    }
    let mean = |b: f64| population_energy(&canonical_populations(energies, b), energies);
    let mut width = 1.0 / spread;
    while mean(-width) < energy {
        width *= 2.0;
    }
    while mean(width) > energy {
        width *= 2.0;
    }
    // mean is decreasing in β.
    let (mut lo, mut hi) = (-width, width);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if mean(mid) > energy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `ρ_T = exp(-βH)/Z` assembled in the energy eigenbasis.
pub fn thermal_state(basis: &EnergyBasis, beta: f64) -> Result<DensityMatrix> {
    if beta.is_nan() || beta < 0.0 {
        return Err(CohError::Domain(format!(
            "inverse temperature must be non-negative, got {beta}"
        )));
    }
    let p = PopulationVector(canonical_populations(basis.energies(), beta));
    DensityMatrix::from_populations(&p, basis)
}

/// `p_k = ⟨e_k|ρ|e_k⟩`.
pub fn energy_populations(rho: &DensityMatrix, basis: &EnergyBasis) -> Result<PopulationVector> {
    check_dim(basis.dim(), rho.dim())?;
    let b = basis.vectors();
    let n = rho.dim();
    let r = rho.matrix();
    let p: Vec<f64> = (0..n)
        .map(|k| {
            let col = b.column(k);
            let rc = r * col;
            col.dotc(&rc).re
        })
        .collect();
    PopulationVector::from_weights(&p)
}

/// `-Σ w ln w` over weights above [`ENTROPY_ZERO`].
pub fn entropy_of_weights(w: &[f64]) -> f64 {
    w.iter()
        .filter(|&&x| x > ENTROPY_ZERO)
        .map(|&x| -x * x.ln())
        .sum()
}

/// Shannon entropy `-Σ p ln p`, with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &PopulationVector) -> f64 {
    entropy_of_weights(p.as_slice())
}

/// `-Tr(ρ ln ρ)` from the spectrum of `ρ`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of_weights(&rho.eigenvalues())
}

/// `D(ρ|ρ_E) = S_E − S_vN`, the divergence from the energy-diagonal part.
pub fn divergence_to_diagonal(rho: &DensityMatrix, basis: &EnergyBasis) -> Result<f64> {
    let p = energy_populations(rho, basis)?;
    Ok(shannon_entropy(&p) - von_neumann_entropy(rho))
}

/// Value of the off-diagonal coherence measure.
///
/// `normalized` is false for `N = 2`, where the `2N/(N−2)` prefactor is
/// undefined and `value` is the bare sum `Σ_{i<j} |ρ_ij|²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    pub value: f64,
    pub normalized: bool,
}

/// `C = 2N/(N−2) Σ_{i<j} |ρ_ij|²` with `ρ` in the energy representation.
pub fn coherence_c(rho: &DensityMatrix, basis: &EnergyBasis) -> Result<Coherence> {
    check_dim(basis.dim(), rho.dim())?;
    let r = basis.to_energy_rep(rho.matrix());
    Ok(coherence_of_energy_rep(&r))
}

pub(crate) fn coherence_of_energy_rep(r: &CMatrix) -> Coherence {
    let n = r.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += r[(i, j)].norm_sqr();
        }
    }
    if n > 2 {
        let nf = n as f64;
        Coherence {
            value: 2.0 * nf / (nf - 2.0) * sum,
            normalized: true,
        }
    } else {
        Coherence {
            value: sum,
            normalized: false,
        }
    }
}

/// Bhattacharyya overlap `Σ √(p_i q_i)`.
pub fn bhattacharyya_overlap(p: &PopulationVector, q: &PopulationVector) -> Result<f64> {
    check_dim(p.len(), q.len())?;
    let o: f64 = p
        .as_slice()
        .iter()
        .zip(q.as_slice())
        .map(|(a, b)| (a * b).sqrt())
        .sum();
    Ok(o.min(1.0))
}

/// `Tr(ρH)`.
pub fn mean_energy(rho: &DensityMatrix, h: &HermitianMatrix) -> Result<f64> {
    check_dim(h.dim(), rho.dim())?;
    Ok(linalg::re_trace_product(rho.matrix(), h.matrix()))
}

/// Energy error relative to a target; falls back to the absolute error when
/// the target energy is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyDeviation {
    pub value: f64,
    pub relative: bool,
}

/// `σ = (E − E_T)/E_T`.
pub fn relative_energy_error(energy: f64, target: f64) -> EnergyDeviation {
    if target == 0.0 {
        EnergyDeviation {
            value: energy - target,
            relative: false,
        }
    } else {
        EnergyDeviation {
            value: (energy - target) / target,
            relative: true,
        }
    }
}
