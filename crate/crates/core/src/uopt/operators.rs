use serde::{Deserialize, Serialize};

use crate::linalg::HermitianMatrix;

/// Which power of the dipole generates the target operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `μ`
    Dipole,
    /// `μ²`
    DipoleSquared,
}

impl Coupling {
    pub fn matrix(self, n: usize) -> HermitianMatrix {
        let mu = build_dipole(n);
        match self {
            Coupling::Dipole => mu,
            Coupling::DipoleSquared => {
                let m = mu.matrix();
                HermitianMatrix::hermitize(&(m * m))
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Coupling::Dipole => "mu",
            Coupling::DipoleSquared => "mu2",
        }
    }
}

/// Nearest-neighbour dipole in the energy representation: ones on the first
/// super- and sub-diagonal.
pub fn build_dipole(n: usize) -> HermitianMatrix {
    assert!(n >= 2, "dipole needs N >= 2");
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for k in 0..n - 1 {
        m[(k, k + 1)] = 1.0;
        m[(k + 1, k)] = 1.0;
    }
    HermitianMatrix::from_real(&m).expect("symmetric by construction")
}

/// `O = exp(α A) − diag(exp(α A))`.
pub fn build_target_operator(coupling: &HermitianMatrix, alpha: f64) -> HermitianMatrix {
    coupling.exp_real(alpha).off_diagonal()
}
