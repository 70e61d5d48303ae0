//! Static optimization over unitaries `U = exp(iV)`.
//!
//! The optimization variable `V` and the resulting `U` are expressed in the
//! energy representation of the problem's Hamiltonian, where the initial
//! thermal state is `diag(p_T)` and the final state is `ρ_f = U† ρ_T U`.

mod objective;
mod operators;
mod search;

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, CohError, Result};
use crate::linalg::{self, CMatrix, HermitianMatrix};
use crate::states::DensityMatrix;

pub use objective::{
    evaluate_objective, CoherenceProblem, EnergyConstraint, Objective, ObjectiveKind, Penalty,
    TargetEnergy,
};
pub(crate) use objective::final_state as final_state_of;
pub use operators::{build_dipole, build_target_operator, Coupling};
pub use search::{optimize, GradientMethod, OptResult, OptimizerOptions};

/// Hermitian `N×N` matrix packed into `N²` reals: the `N` diagonal entries,
/// then `(Re, Im)` of `V_cd` for every `c < d` in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermitianGenerator {
    dim: usize,
    params: Vec<f64>,
}

impl HermitianGenerator {
    pub fn new(dim: usize, params: Vec<f64>) -> Result<Self> {
        check_dim(dim * dim, params.len())?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(CohError::NonFinite("generator parameter".into()));
        }
        Ok(Self { dim, params })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            params: vec![0.0; dim * dim],
        }
    }

    /// Gaussian entries: diagonal with standard deviation `scale`, real and
    /// imaginary off-diagonal parts with `scale/√2` each.
    pub fn random(dim: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let diag = Normal::new(0.0, scale).expect("finite scale");
        let off = Normal::new(0.0, scale * std::f64::consts::FRAC_1_SQRT_2).expect("finite scale");
        let mut params = Vec::with_capacity(dim * dim);
        for _ in 0..dim {
            params.push(diag.sample(&mut rng));
        }
        for _ in 0..dim * (dim - 1) {
            params.push(off.sample(&mut rng));
        }
        Self { dim, params }
    }

    pub fn from_matrix(m: &HermitianMatrix) -> Self {
        let n = m.dim();
        let a = m.matrix();
        let mut params: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
        for c in 0..n {
            for d in c + 1..n {
                params.push(a[(c, d)].re);
                params.push(a[(c, d)].im);
            }
        }
        Self { dim: n, params }
    }

    pub fn to_matrix(&self) -> HermitianMatrix {
        HermitianMatrix::hermitize(&generator_matrix(self.dim, &self.params))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }
}

pub(crate) fn generator_matrix(n: usize, params: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(params[i], 0.0);
    }
    let mut k = n;
    for c in 0..n {
        for d in c + 1..n {
            let z = C64::new(params[k], params[k + 1]);
            m[(c, d)] = z;
            m[(d, c)] = z.conj();
            k += 2;
        }
    }
    m
}

/// `U = exp(iV)`.
pub fn unitary_from_generator(v: &HermitianGenerator) -> CMatrix {
    v.to_matrix().exp_scaled(C64::new(0.0, 1.0))
}

/// Principal generator `V` with `exp(iV) = U` and spectrum in `(-π, π]`.
///
/// `U` is diagonalized through the Hermitian pencil `A + κB`, where
/// `A = (U + U†)/2` and `B = (U − U†)/2i` commute for unitary `U`.
pub fn generator_from_unitary(u: &CMatrix) -> Result<HermitianGenerator> {
    let n = u.nrows();
    if linalg::unitarity_defect(u) > 1e-10 {
        return Err(CohError::Domain("matrix is not unitary".into()));
    }
    let a = (u + u.adjoint()).scale(0.5);
    let b = (u - u.adjoint()) * C64::new(0.0, -0.5);
    const KAPPA: f64 = 0.577_215_664_901_532_9;
    let (_, vecs) = linalg::eigh(&(&a + b.scale(KAPPA)));
    let thetas: Vec<f64> = (0..n)
        .map(|k| {
            let col = vecs.column(k);
            let re = col.dotc(&(&a * col)).re;
            let im = col.dotc(&(&b * col)).re;
            im.atan2(re)
        })
        .collect();
    let v = linalg::function_of(&thetas, &vecs, |t| C64::new(t, 0.0));
    let generator = HermitianGenerator::from_matrix(&HermitianMatrix::hermitize(&v));
    let back = unitary_from_generator(&generator);
    let err = linalg::max_abs_diff(&back, u);
    if err > 1e-8 {
        return Err(CohError::Domain(format!(
            "logarithm failed to reproduce the unitary (error {err:e})"
        )));
    }
    Ok(generator)
}

/// `ρ_f = U† ρ U`.
pub fn conjugate_state(rho: &DensityMatrix, u: &CMatrix) -> Result<DensityMatrix> {
    check_dim(rho.dim(), u.nrows())?;
    check_dim(rho.dim(), u.ncols())?;
    let m = u.adjoint() * rho.matrix() * u;
    Ok(DensityMatrix::from_trusted(&m))
}

/// `W_kj = exp(2πi kj/N)/√N`. Every column has uniform modulus, so `W†ρW`
/// has a uniform diagonal for every diagonal `ρ`.
pub fn dft_unitary(n: usize) -> CMatrix {
    assert!(n >= 2, "DFT unitary needs N >= 2");
    let norm = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |k, j| {
        let phase = 2.0 * PI * ((k * j) % n) as f64 / n as f64;
        C64::from_polar(norm, phase)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{energy_populations, shannon_entropy, thermal_state, von_neumann_entropy};
    use crate::spinsys::EnergyBasis;
    use rand::SeedableRng;

    #[test]
    fn packing_round_trip() {
        let g = HermitianGenerator::random(4, 1.0, 17);
        let back = HermitianGenerator::from_matrix(&g.to_matrix());
        assert_eq!(g, back);
        assert!(HermitianGenerator::new(3, vec![0.0; 8]).is_err());
    }

    #[test]
    fn zero_generator_is_identity() {
        let u = unitary_from_generator(&HermitianGenerator::zeros(5));
        assert!(linalg::max_abs_diff(&u, &CMatrix::identity(5, 5)) < 1e-15);
    }

    #[test]
    fn sigma_y_rotation() {
        // V = (π/2) σ_y → exp(iV) = cos(π/2) I + i sin(π/2) σ_y = [[0, 1], [-1, 0]].
        let v = HermitianGenerator::new(2, vec![0.0, 0.0, 0.0, -PI / 2.0]).unwrap();
        let u = unitary_from_generator(&v);
        let want = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 0.0)],
        );
        assert!(linalg::max_abs_diff(&u, &want) < 1e-15);
    }

    #[test]
    fn random_generators_give_unitaries() {
        for seed in 0..50 {
            let v = HermitianGenerator::random(7, 2.0, seed);
            assert!(linalg::unitarity_defect(&unitary_from_generator(&v)) < 1e-10);
        }
    }

    #[test]
    fn logarithm_inverts_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [2usize, 3, 6, 9] {
            let u = linalg::random_unitary(n, &mut rng);
            let v = generator_from_unitary(&u).unwrap();
            assert!(linalg::max_abs_diff(&unitary_from_generator(&v), &u) < 1e-10);
        }
        for n in 2..10 {
            let w = dft_unitary(n);
            let v = generator_from_unitary(&w).unwrap();
            assert!(linalg::max_abs_diff(&unitary_from_generator(&v), &w) < 1e-10);
        }
    }

    #[test]
    fn conjugation_preserves_spectrum() {
        let basis = EnergyBasis::of(&linalg::random_hermitian(5, &mut ChaCha8Rng::seed_from_u64(1)));
        let rho = thermal_state(&basis, 0.8).unwrap();
        let same = conjugate_state(&rho, &CMatrix::identity(5, 5)).unwrap();
        assert!(linalg::max_abs_diff(same.matrix(), rho.matrix()) < 1e-15);

        let u = unitary_from_generator(&HermitianGenerator::random(5, 1.0, 9));
        let moved = conjugate_state(&rho, &u).unwrap();
        for (a, b) in moved.eigenvalues().iter().zip(rho.eigenvalues()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((von_neumann_entropy(&moved) - von_neumann_entropy(&rho)).abs() < 1e-10);
        assert!((moved.matrix().trace().re - 1.0).abs() < 1e-14);
        assert!(conjugate_state(&rho, &CMatrix::identity(4, 4)).is_err());
    }

    #[test]
    fn dft_examples() {
        let w2 = dft_unitary(2);
        for z in w2.iter() {
            assert!((z.norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        }
        assert!(linalg::unitarity_defect(&dft_unitary(7)) < 1e-14);

        let diag = [0.4, 0.25, 0.2, 0.1, 0.05];
        let rho = DensityMatrix::from_trusted(&CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            5,
            diag.iter().map(|x| C64::new(*x, 0.0)),
        )));
        let w = dft_unitary(5);
        let moved = conjugate_state(&rho, &w).unwrap();
        for k in 0..5 {
            assert!((moved.matrix()[(k, k)].re - 0.2).abs() < 1e-15);
        }

        let h = HermitianMatrix::from_diagonal(&[0.0, 0.3, 0.5, 1.1, 1.4]);
        let basis = EnergyBasis::of(&h);
        let thermal = thermal_state(&basis, 2.0).unwrap();
        let moved = conjugate_state(&thermal, &w).unwrap();
        let d = shannon_entropy(&energy_populations(&moved, &basis).unwrap()) - von_neumann_entropy(&moved);
        assert!((d - (5f64.ln() - von_neumann_entropy(&thermal))).abs() < 1e-12);
    }
}
