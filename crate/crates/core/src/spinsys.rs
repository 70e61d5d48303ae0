//! Spin-j algebra, the `U Jz² + Δ Jx` model Hamiltonian and its energy
//! eigenbasis.
//!
//! Matrices are written in the `|j, m⟩` basis ordered `m = j, j-1, …, -j`,
//! with ħ = 1.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{CohError, Result};
use crate::linalg::{self, CMatrix, HermitianMatrix};

/// Relative gap below which neighbouring eigenvalues are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Couplings of the model Hamiltonian `U Jz² + Δ Jx`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub u: f64,
    pub delta: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { u: 1.0, delta: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct SpinSystem {
    twice_j: u32,
    jx: HermitianMatrix,
    jy: HermitianMatrix,
    jz: HermitianMatrix,
}

impl SpinSystem {
    pub fn new(j: f64) -> Result<Self> {
        let twice_j = twice_spin(j)?;
        let (jx, jy, jz) = ladder_components(twice_j);
        Ok(Self { twice_j, jx, jy, jz })
    }

    pub fn j(&self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    pub fn twice_j(&self) -> u32 {
        self.twice_j
    }

    /// `N = 2j + 1`.
    pub fn dim(&self) -> usize {
        self.twice_j as usize + 1
    }

    pub fn jx(&self) -> &HermitianMatrix {
        &self.jx
    }

    pub fn jy(&self) -> &HermitianMatrix {
        &self.jy
    }

    pub fn jz(&self) -> &HermitianMatrix {
        &self.jz
    }
}

fn twice_spin(j: f64) -> Result<u32> {
    let tj = 2.0 * j;
    if !tj.is_finite() || tj < 1.0 || (tj - tj.round()).abs() > 1e-9 || tj > 1e6 {
        return Err(CohError::InvalidSpin(j));
    }
    Ok(tj.round() as u32)
}

fn ladder_components(twice_j: u32) -> (HermitianMatrix, HermitianMatrix, HermitianMatrix) {
    let n = twice_j as usize + 1;
    let j = twice_j as f64 / 2.0;
    let m_of = |k: usize| j - k as f64;

    // J+ |j,m⟩ = sqrt(j(j+1) - m(m+1)) |j,m+1⟩; index k-1 holds m+1.
    let mut jp = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let m = m_of(k);
        jp[(k - 1, k)] = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
    }
    let jm = jp.transpose();

    let jx = (&jp + &jm).map(|x| C64::new(0.5 * x, 0.0));
    let jy = CMatrix::from_fn(n, n, |r, c| C64::new(0.0, -0.5) * (jp[(r, c)] - jm[(r, c)]));
    let jz = CMatrix::from_fn(n, n, |r, c| {
        if r == c {
            C64::new(m_of(r), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    (
        HermitianMatrix::hermitize(&jx),
        HermitianMatrix::hermitize(&jy),
        HermitianMatrix::hermitize(&jz),
    )
}

/// Spin-j matrices `(Jx, Jy, Jz)`.
pub fn build_angular_momentum(j: f64) -> Result<(HermitianMatrix, HermitianMatrix, HermitianMatrix)> {
    let sys = SpinSystem::new(j)?;
    Ok((sys.jx, sys.jy, sys.jz))
}

/// `H₀ = U Jz² + Δ Jx`.
pub fn build_model_hamiltonian(sys: &SpinSystem, u: f64, delta: f64) -> HermitianMatrix {
    let jz = sys.jz.matrix();
    let h = (jz * jz).scale(u) + sys.jx.matrix().scale(delta);
    HermitianMatrix::hermitize(&h)
}

/// `H_n = H₀ / Tr(H₀²)`.
pub fn normalize_hamiltonian(h0: &HermitianMatrix) -> Result<HermitianMatrix> {
    let tr_sq = linalg::re_trace_product(h0.matrix(), h0.matrix());
    if tr_sq <= 0.0 || !tr_sq.is_finite() {
        return Err(CohError::Domain(format!(
            "cannot normalize a Hamiltonian with Tr(H²) = {tr_sq}"
        )));
    }
    Ok(h0.scale(1.0 / tr_sq))
}

/// The energy representation: ascending energies and the matching
/// eigenvectors as columns.
///
/// Each eigenvector's largest-magnitude component (first one on ties) is made
/// real and positive. Inside a degenerate block the basis is rebuilt by
/// Gram–Schmidt on the projections of the computational basis vectors, so the
/// result does not depend on the eigensolver's arbitrary choice.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyBasis {
    energies: Vec<f64>,
    vectors: CMatrix,
}

impl EnergyBasis {
    pub fn of(h: &HermitianMatrix) -> Self {
        let (energies, raw) = h.eigh();
        let vectors = canonical_vectors(&energies, raw);
        Self { energies, vectors }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    /// `B† A B`: a computational-basis operator in the energy representation.
    pub fn to_energy_rep(&self, a: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * a * &self.vectors
    }

    /// `B A B†`: an energy-representation operator in the computational basis.
    pub fn from_energy_rep(&self, a: &CMatrix) -> CMatrix {
        &self.vectors * a * self.vectors.adjoint()
    }

    /// `V diag(e) V†`.
    pub fn reconstruct(&self) -> CMatrix {
        linalg::function_of(&self.energies, &self.vectors, |x| C64::new(x, 0.0))
    }
}

/// Validating entry point for arbitrary complex input.
pub fn eigendecompose(h: &CMatrix) -> Result<EnergyBasis> {
    let h = HermitianMatrix::new(h.clone())?;
    Ok(EnergyBasis::of(&h))
}

fn degenerate_blocks(e: &[f64]) -> Vec<std::ops::Range<usize>> {
    let scale = e.iter().fold(1.0_f64, |s, x| s.max(x.abs()));
    let mut blocks = Vec::new();
    let mut start = 0;
    for k in 1..=e.len() {
        if k == e.len() || (e[k] - e[k - 1]).abs() > DEGENERACY_TOL * scale {
            blocks.push(start..k);
            start = k;
        }
    }
    blocks
}

fn canonical_vectors(e: &[f64], mut v: CMatrix) -> CMatrix {
    let n = e.len();
    for block in degenerate_blocks(e) {
        if block.len() > 1 {
            let sub = v.columns(block.start, block.len()).into_owned();
            let basis = block_basis(&sub);
            for (c, col) in block.clone().zip(basis) {
                v.set_column(c, &col);
            }
        }
    }
    for c in 0..n {
        let mut best = 0;
        for i in 1..n {
            if v[(i, c)].norm() > v[(best, c)].norm() + 1e-12 {
                best = i;
            }
        }
        let z = v[(best, c)];
        let phase = z.conj() / z.norm();
        for i in 0..n {
            v[(i, c)] *= phase;
        }
    }
    v
}

/// Gram–Schmidt over `P e_1, P e_2, …` where `P` projects onto the span of
/// `sub`'s columns; vectors with small residual norm are skipped.
fn block_basis(sub: &CMatrix) -> Vec<nalgebra::DVector<C64>> {
    let (n, d) = sub.shape();
    let proj = sub * sub.adjoint();
    let mut out: Vec<nalgebra::DVector<C64>> = Vec::with_capacity(d);
    for i in 0..n {
        if out.len() == d {
            break;
        }
        let mut w = proj.column(i).into_owned();
        for q in &out {
            let overlap = q.dotc(&w);
            w -= q * overlap;
        }
        // Second pass for numerical orthogonality.
        for q in &out {
            let overlap = q.dotc(&w);
            w -= q * overlap;
        }
        let norm = w.norm();
        if norm > 1e-6 {
            out.push(w / C64::new(norm, 0.0));
        }
    }
    assert_eq!(out.len(), d, "degenerate block basis lost rank");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, random_hermitian, unitarity_defect};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a * b - b * a
    }

    #[test]
    fn spin_half_matrices() {
        let (jx, jy, jz) = build_angular_momentum(0.5).unwrap();
        let ex = CMatrix::from_row_slice(2, 2, &[c(0.0), c(0.5), c(0.5), c(0.0)]);
        let ez = CMatrix::from_row_slice(2, 2, &[c(0.5), c(0.0), c(0.0), c(-0.5)]);
        let ey = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.0), C64::new(0.0, -0.5), C64::new(0.0, 0.5), c(0.0)],
        );
        assert!(max_abs_diff(jx.matrix(), &ex) < 1e-15);
        assert!(max_abs_diff(jy.matrix(), &ey) < 1e-15);
        assert!(max_abs_diff(jz.matrix(), &ez) < 1e-15);
    }

    #[test]
    fn spin_one_matrices() {
        let (jx, _, jz) = build_angular_momentum(1.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let ex = CMatrix::from_row_slice(
            3,
            3,
            &[c(0.0), c(s), c(0.0), c(s), c(0.0), c(s), c(0.0), c(s), c(0.0)],
        );
        assert!(max_abs_diff(jx.matrix(), &ex) < 1e-15);
        assert_eq!(jz.diagonal(), vec![1.0, 0.0, -1.0]);
        assert!(max_abs_diff(jz.matrix(), &CMatrix::from_diagonal(&jz.matrix().diagonal())) == 0.0);
    }

    #[test]
    fn casimir_for_spin_four() {
        let sys = SpinSystem::new(4.0).unwrap();
        assert_eq!(sys.dim(), 9);
        let (x, y, z) = (sys.jx().matrix(), sys.jy().matrix(), sys.jz().matrix());
        let casimir = x * x + y * y + z * z;
        let expected = CMatrix::identity(9, 9).scale(20.0);
        assert!(max_abs_diff(&casimir, &expected) < 1e-12);
    }

    #[test]
    fn commutation_relations_up_to_j12() {
        for twice_j in 1..=24u32 {
            let j = twice_j as f64 / 2.0;
            let sys = SpinSystem::new(j).unwrap();
            let (x, y, z) = (sys.jx().matrix(), sys.jy().matrix(), sys.jz().matrix());
            let i = C64::new(0.0, 1.0);
            assert!(max_abs_diff(&commutator(x, y), &z.map(|v| i * v)) < 1e-12, "j={j}");
            assert!(max_abs_diff(&commutator(y, z), &x.map(|v| i * v)) < 1e-12, "j={j}");
            assert!(max_abs_diff(&commutator(z, x), &y.map(|v| i * v)) < 1e-12, "j={j}");
            let casimir = x * x + y * y + z * z;
            let expected = CMatrix::identity(sys.dim(), sys.dim()).scale(j * (j + 1.0));
            assert!(max_abs_diff(&casimir, &expected) < 1e-10, "j={j}");
        }
    }

    #[test]
    fn invalid_spin_rejected() {
        for j in [0.0, 0.3, -1.0, 1.25, f64::NAN] {
            assert!(matches!(SpinSystem::new(j), Err(CohError::InvalidSpin(_))), "j={j}");
        }
    }

    #[test]
    fn spin_half_model_spectrum() {
        // (1/4) I + Jx has eigenvalues 1/4 ± 1/2.
        let sys = SpinSystem::new(0.5).unwrap();
        let h = build_model_hamiltonian(&sys, 1.0, 1.0);
        let basis = EnergyBasis::of(&h);
        assert!((basis.energies()[0] + 0.25).abs() < 1e-14);
        assert!((basis.energies()[1] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn zero_tunnelling_is_diagonal() {
        let sys = SpinSystem::new(2.0).unwrap();
        let h = build_model_hamiltonian(&sys, 1.5, 0.0);
        let m: Vec<f64> = vec![2.0, 1.0, 0.0, -1.0, -2.0];
        let expected: Vec<f64> = m.iter().map(|m| 1.5 * m * m).collect();
        assert_eq!(h.diagonal(), expected);
        assert_eq!(h.off_diagonal().matrix().iter().map(|z| z.norm()).sum::<f64>(), 0.0);
    }

    #[test]
    fn pure_tunnelling_spectrum_matches_jz() {
        let sys = SpinSystem::new(1.0).unwrap();
        let h = build_model_hamiltonian(&sys, 0.0, 1.0);
        let basis = EnergyBasis::of(&h);
        for (got, want) in basis.energies().iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-13);
        }
    }

    #[test]
    fn normalization_examples() {
        let h0 = HermitianMatrix::from_diagonal(&[1.0, -1.0]);
        let hn = normalize_hamiltonian(&h0).unwrap();
        assert_eq!(hn.diagonal(), vec![0.5, -0.5]);

        let unit = HermitianMatrix::from_diagonal(&[1.0, 0.0]);
        assert_eq!(normalize_hamiltonian(&unit).unwrap(), unit);

        let sys = SpinSystem::new(1.0).unwrap();
        let h0 = build_model_hamiltonian(&sys, 1.0, 1.0);
        let hn = normalize_hamiltonian(&h0).unwrap();
        let t0 = linalg::re_trace_product(h0.matrix(), h0.matrix());
        let tn = linalg::re_trace_product(hn.matrix(), hn.matrix());
        // Tr(Jz⁴) + Tr(Jx²) = 2 + 2 for j = 1.
        assert!((t0 - 4.0).abs() < 1e-13);
        assert!((tn * t0 - 1.0).abs() < 1e-13);

        assert!(matches!(
            normalize_hamiltonian(&HermitianMatrix::zeros(3)),
            Err(CohError::Domain(_))
        ));
    }

    #[test]
    fn diagonal_input_gives_permutation_basis() {
        let h = HermitianMatrix::from_diagonal(&[3.0, 1.0, 2.0]);
        let b = EnergyBasis::of(&h);
        assert_eq!(b.energies(), &[1.0, 2.0, 3.0]);
        let expected = CMatrix::from_row_slice(
            3,
            3,
            &[c(0.0), c(0.0), c(1.0), c(1.0), c(0.0), c(0.0), c(0.0), c(1.0), c(0.0)],
        );
        assert!(max_abs_diff(b.vectors(), &expected) < 1e-15);
    }

    #[test]
    fn pauli_spectrum() {
        let (jx, _, _) = build_angular_momentum(0.5).unwrap();
        let b = eigendecompose(jx.matrix()).unwrap();
        assert!((b.energies()[0] + 0.5).abs() < 1e-15);
        assert!((b.energies()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = CMatrix::identity(3, 3);
        m[(0, 2)] = C64::new(0.0, 1.0);
        assert!(matches!(eigendecompose(&m), Err(CohError::NotHermitian(_))));
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let h = random_hermitian(5, &mut rng);
            let b = EnergyBasis::of(&h);
            assert!(b.energies().windows(2).all(|w| w[0] <= w[1]));
            assert!(unitarity_defect(b.vectors()) < 1e-10);
            assert!(max_abs_diff(&b.reconstruct(), h.matrix()) < 1e-10);
        }
    }

    #[test]
    fn model_hamiltonians_reconstruct() {
        for twice_j in 1..=24u32 {
            let sys = SpinSystem::new(twice_j as f64 / 2.0).unwrap();
            for (u, d) in [(1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (-0.7, 2.3)] {
                let h = normalize_hamiltonian(&build_model_hamiltonian(&sys, u, d)).unwrap();
                let b = EnergyBasis::of(&h);
                assert!(unitarity_defect(b.vectors()) < 1e-10);
                assert!(max_abs_diff(&b.reconstruct(), h.matrix()) < 1e-10);
            }
        }
    }

    #[test]
    fn phase_convention_and_degenerate_blocks_are_canonical() {
        // Jz² is degenerate in ±m; the canonical basis must be the same no
        // matter how the input is rotated inside each degenerate block.
        let sys = SpinSystem::new(2.0).unwrap();
        let h = build_model_hamiltonian(&sys, 1.0, 0.0);
        let b = EnergyBasis::of(&h);
        for c in 0..b.dim() {
            let col = b.vectors().column(c);
            let (k, z) = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .unwrap();
            assert!(z.im.abs() < 1e-14 && z.re > 0.0, "column {c} entry {k}");
        }
        let again = EnergyBasis::of(&h);
        assert_eq!(b.vectors(), again.vectors());
        assert!(max_abs_diff(&b.reconstruct(), h.matrix()) < 1e-12);
    }
}
