//! Dense complex linear algebra shared by every module.
//!
//! All functions of Hermitian operands (exponential, logarithm, directional
//! derivatives of the exponential) go through an eigendecomposition.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CohError, Result};

pub type CMatrix = DMatrix<C64>;

/// Entrywise tolerance for the Hermitian check, relative to `max(1, max|A_ij|)`.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// An `N×N` complex matrix with `A = A†`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let dev = hermitian_deviation(&m)?;
        let scale = m.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        if dev > HERMITIAN_TOL * scale {
            return Err(CohError::NotHermitian(dev));
        }
        Ok(Self(m))
    }

    /// Projects a square matrix onto its Hermitian part, `(A + A†)/2`.
    pub fn hermitize(m: &CMatrix) -> Self {
        assert!(m.is_square(), "hermitize needs a square matrix");
        Self((m + m.adjoint()).scale(0.5))
    }

    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(d[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    /// The real diagonal entries.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
    }

    /// The matrix with its diagonal set to zero.
    pub fn off_diagonal(&self) -> Self {
        let mut m = self.0.clone();
        for i in 0..self.dim() {
            m[(i, i)] = C64::new(0.0, 0.0);
        }
        Self(m)
    }

    /// Eigenvalues (ascending) and orthonormal eigenvectors as columns.
    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        eigh(&self.0)
    }

    /// `exp(s·A)` for real `s`, which is again Hermitian.
    pub fn exp_real(&self, s: f64) -> HermitianMatrix {
        HermitianMatrix::hermitize(&self.exp_scaled(C64::new(s, 0.0)))
    }

    /// `exp(s·A)` for complex `s`.
    pub fn exp_scaled(&self, s: C64) -> CMatrix {
        let (e, v) = self.eigh();
        function_of(&e, &v, |x| (s * x).exp())
    }
}

impl std::ops::Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 + &rhs.0)
    }
}

/// `max |A - A†|` over entries.
pub fn hermitian_deviation(m: &CMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(CohError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    Ok(dev)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
///
/// Only the Hermitian part of `m` is used. Ties keep the solver's order.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let h = (m + m.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, c| eig.eigenvectors[(i, order[c])]);
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()).scale(0.5);
    let mut values: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// `V diag(f(e)) V†`.
pub fn function_of(e: &[f64], v: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let n = e.len();
    let mut scaled = v.clone();
    for (c, &ec) in e.iter().enumerate() {
        let fc = f(ec);
        for i in 0..n {
            scaled[(i, c)] *= fc;
        }
    }
    scaled * v.adjoint()
}

/// `sin(x)/x`, accurate near zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// First divided difference of `x ↦ exp(i t x)` at `(a, b)`.
///
/// Written as `i t e^{i t (a+b)/2} sinc(t (a-b)/2)`, which is continuous
/// through `a = b` where it equals the derivative `i t e^{i t a}`.
pub fn exp_divided_difference(a: f64, b: f64, t: f64) -> C64 {
    let mid = C64::new(0.0, t * 0.5 * (a + b)).exp();
    C64::new(0.0, t) * mid * sinc(0.5 * t * (a - b))
}

/// Divided-difference (Daleckii–Krein) kernel of `x ↦ exp(i t x)` for a
/// spectrum `e`.
pub fn exp_kernel(e: &[f64], t: f64) -> CMatrix {
    let n = e.len();
    CMatrix::from_fn(n, n, |a, b| exp_divided_difference(e[a], e[b], t))
}

/// Nearest unitary in Frobenius norm (polar factor), via SVD.
pub fn polar_unitary(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd requested u");
    let vt = svd.v_t.expect("svd requested v_t");
    u * vt
}

/// `‖U†U − I‖_max`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    let prod = u.adjoint() * u;
    let eye = CMatrix::identity(n, n);
    (prod - eye).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `Re Tr(A B)` without forming the product.
pub fn re_trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre matrix,
/// with the phases of `R`'s diagonal absorbed into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..n {
        let d = r[(c, c)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, c)] *= phase;
        }
    }
    q
}

/// Random Hermitian matrix with i.i.d. Gaussian entries (GUE-like).
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        m[(i, i)] = C64::new(d, 0.0);
        for j in i + 1..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    HermitianMatrix(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(
            HermitianMatrix::new(m),
            Err(CohError::NotHermitian(_))
        ));
        let rect = CMatrix::zeros(2, 3);
        assert!(matches!(
            HermitianMatrix::new(rect),
            Err(CohError::NotSquare { .. })
        ));
    }

    #[test]
    fn divided_difference_limits() {
        let t = 0.7;
        let a = 1.3;
        let exact = C64::new(0.0, t) * C64::new(0.0, t * a).exp();
        assert!((exp_divided_difference(a, a, t) - exact).norm() < 1e-15);
        let b = a + 1e-3;
        let direct = (C64::new(0.0, t * a).exp() - C64::new(0.0, t * b).exp()) / (a - b);
        assert!((exp_divided_difference(a, b, t) - direct).norm() < 1e-10);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 5, 9] {
            let u = random_unitary(n, &mut rng);
            assert!(unitarity_defect(&u) < 1e-12);
        }
    }

    #[test]
    fn polar_projection_restores_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_unitary(4, &mut rng);
        let noisy = u.map(|z| z * (1.0 + 1e-7));
        let fixed = polar_unitary(&noisy);
        assert!(unitarity_defect(&fixed) < 1e-13);
        assert!(max_abs_diff(&fixed, &u) < 1e-9);
    }
}
