use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, CohError, Result};
use crate::linalg::{self, CMatrix, HermitianMatrix};
use crate::spinsys::{
    build_model_hamiltonian, normalize_hamiltonian, EnergyBasis, ModelParams, SpinSystem,
};
use crate::states::{self, DensityMatrix};

use super::{generator_matrix, HermitianGenerator};

/// Floor applied to populations inside `ln p` of the entropy gradient.
const LOG_CLIP: f64 = 1e-300;

/// The fixed data of an optimization: normalized Hamiltonian, its energy
/// basis and the initial thermal populations at `β₀`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoherenceProblem {
    hamiltonian: HermitianMatrix,
    basis: EnergyBasis,
    beta0: f64,
    initial_populations: Vec<f64>,
}

impl CoherenceProblem {
    /// Spin-j model `H_n = H₀/Tr(H₀²)` with `H₀ = U Jz² + Δ Jx`.
    pub fn model(j: f64, beta0: f64, params: ModelParams) -> Result<Self> {
        let sys = SpinSystem::new(j)?;
        let h0 = build_model_hamiltonian(&sys, params.u, params.delta);
        Self::from_hamiltonian(normalize_hamiltonian(&h0)?, beta0)
    }

    pub fn from_hamiltonian(hamiltonian: HermitianMatrix, beta0: f64) -> Result<Self> {
        if beta0.is_nan() || beta0 < 0.0 {
            return Err(CohError::Domain(format!(
                "inverse temperature must be non-negative, got {beta0}"
            )));
        }
        let basis = EnergyBasis::of(&hamiltonian);
        let initial_populations = states::canonical_populations(basis.energies(), beta0);
        Ok(Self {
            hamiltonian,
            basis,
            beta0,
            initial_populations,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn hamiltonian(&self) -> &HermitianMatrix {
        &self.hamiltonian
    }

    pub fn basis(&self) -> &EnergyBasis {
        &self.basis
    }

    pub fn energies(&self) -> &[f64] {
        self.basis.energies()
    }

    /// Boltzmann weights of `ρ_T`, in ascending-energy order.
    pub fn initial_populations(&self) -> &[f64] {
        &self.initial_populations
    }

    /// `ρ_T` in the computational basis.
    pub fn thermal_state(&self) -> DensityMatrix {
        states::thermal_state(&self.basis, self.beta0).expect("beta0 validated")
    }

    /// `S_vN(ρ_T)`, conserved by every unitary.
    pub fn initial_entropy(&self) -> f64 {
        states::entropy_of_weights(&self.initial_populations)
    }

    /// Canonical mean energy at inverse temperature `beta`.
    pub fn canonical_energy(&self, beta: f64) -> f64 {
        states::population_energy(&states::canonical_populations(self.energies(), beta), self.energies())
    }

    /// `U_E` (energy representation) expressed in the computational basis.
    pub fn to_computational(&self, u_energy: &CMatrix) -> CMatrix {
        self.basis.from_energy_rep(u_energy)
    }
}

/// How the target energy `E_f` of the constraint is specified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetEnergy {
    /// `E_f` is the canonical mean energy at this inverse temperature.
    Beta(f64),
    Energy(f64),
}

/// Form of the energy penalty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    /// `λ |E − E_f|` with the sub-gradient convention `sign(0) = 0`.
    #[default]
    Absolute,
    /// `λ (E − E_f)²`. A smooth alternative for comparison runs.
    Squared,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyConstraint {
    pub lambda: f64,
    pub target_energy: f64,
    pub penalty: Penalty,
    /// Canonical populations whose mean energy is `target_energy`; the
    /// reference for overlap reports.
    pub target_populations: Vec<f64>,
}

impl EnergyConstraint {
    /// Resolves the target to an energy and then back to the canonical
    /// distribution at that energy, so both ways of specifying `E_f` give
    /// bit-identical constraints.
    pub fn new(problem: &CoherenceProblem, lambda: f64, target: TargetEnergy, penalty: Penalty) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(CohError::Domain(format!("Lagrange multiplier must be >= 0, got {lambda}")));
        }
        let target_energy = match target {
            TargetEnergy::Beta(b) => {
                if b.is_nan() {
                    return Err(CohError::Domain("target inverse temperature is NaN".into()));
                }
                problem.canonical_energy(b)
            }
            TargetEnergy::Energy(e) => e,
        };
        let beta = states::beta_for_energy(problem.energies(), target_energy)?;
        let target_populations = states::canonical_populations(problem.energies(), beta);
        Ok(Self {
            lambda,
            target_energy,
            penalty,
            target_populations,
        })
    }

    fn value(&self, energy: f64) -> f64 {
        let d = energy - self.target_energy;
        match self.penalty {
            Penalty::Absolute => self.lambda * d.abs(),
            Penalty::Squared => self.lambda * d * d,
        }
    }

    fn derivative(&self, energy: f64) -> f64 {
        let d = energy - self.target_energy;
        match self.penalty {
            Penalty::Absolute => {
                let s = if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                self.lambda * s
            }
            Penalty::Squared => 2.0 * self.lambda * d,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// `S_E(ρ_f)`; equals the divergence up to the constant `S_vN(ρ_T)`.
    Unconstrained,
    /// `S_E − λ|E − E_f|`.
    EnergyConstrained(EnergyConstraint),
    /// `Tr(ρ_f O)`, optionally with the energy penalty. `O` is given in the
    /// energy representation and has a zero diagonal.
    GeneralizedTarget {
        operator: HermitianMatrix,
        constraint: Option<EnergyConstraint>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Objective {
    kind: ObjectiveKind,
    problem: CoherenceProblem,
}

/// Quantities of the final state shared by values and gradients.
pub(crate) struct Forward {
    /// Spectrum and eigenvectors of `V`.
    pub spectrum: Vec<f64>,
    pub eigvecs: CMatrix,
    pub unitary: CMatrix,
    pub populations: Vec<f64>,
    /// `ρ_f` in the energy representation, built only when needed.
    pub final_state: Option<CMatrix>,
}

impl Objective {
    pub fn unconstrained(problem: CoherenceProblem) -> Self {
        Self {
            kind: ObjectiveKind::Unconstrained,
            problem,
        }
    }

    pub fn energy_constrained(problem: CoherenceProblem, constraint: EnergyConstraint) -> Self {
        Self {
            kind: ObjectiveKind::EnergyConstrained(constraint),
            problem,
        }
    }

    pub fn generalized(
        problem: CoherenceProblem,
        operator: HermitianMatrix,
        constraint: Option<EnergyConstraint>,
    ) -> Result<Self> {
        check_dim(problem.dim(), operator.dim())?;
        if operator.diagonal().iter().any(|d| *d != 0.0) {
            return Err(CohError::Domain("target operator must have a zero diagonal".into()));
        }
        Ok(Self {
            kind: ObjectiveKind::GeneralizedTarget { operator, constraint },
            problem,
        })
    }

    pub fn kind(&self) -> &ObjectiveKind {
        &self.kind
    }

    pub fn problem(&self) -> &CoherenceProblem {
        &self.problem
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn constraint(&self) -> Option<&EnergyConstraint> {
        match &self.kind {
            ObjectiveKind::Unconstrained => None,
            ObjectiveKind::EnergyConstrained(c) => Some(c),
            ObjectiveKind::GeneralizedTarget { constraint, .. } => constraint.as_ref(),
        }
    }

    fn operator(&self) -> Option<&HermitianMatrix> {
        match &self.kind {
            ObjectiveKind::GeneralizedTarget { operator, .. } => Some(operator),
            _ => None,
        }
    }

    fn has_entropy(&self) -> bool {
        !matches!(self.kind, ObjectiveKind::GeneralizedTarget { .. })
    }

    /// Populations the final state is compared against: uniform for the
    /// unconstrained problem, canonical at `E_f` when a constraint exists.
    pub fn reference_populations(&self) -> Option<Vec<f64>> {
        match (&self.kind, self.constraint()) {
            (ObjectiveKind::Unconstrained, _) => Some(vec![1.0 / self.dim() as f64; self.dim()]),
            (_, Some(c)) => Some(c.target_populations.clone()),
            _ => None,
        }
    }

    pub(crate) fn forward(&self, params: &[f64], need_state: bool) -> Forward {
        let n = self.dim();
        let v = generator_matrix(n, params);
        let (spectrum, eigvecs) = linalg::eigh(&v);
        let unitary = linalg::function_of(&spectrum, &eigvecs, |x| C64::new(0.0, x).exp());
        let pt = self.problem.initial_populations();
        // p_k = Σ_j |U_jk|² p_T,j
        let populations: Vec<f64> = (0..n)
            .map(|k| (0..n).map(|j| unitary[(j, k)].norm_sqr() * pt[j]).sum())
            .collect();
        let final_state = (need_state || self.operator().is_some()).then(|| final_state(&unitary, pt));
        Forward {
            spectrum,
            eigvecs,
            unitary,
            populations,
            final_state,
        }
    }

    pub(crate) fn value_of(&self, fwd: &Forward) -> f64 {
        let mut value = 0.0;
        if self.has_entropy() {
            value += states::entropy_of_weights(&fwd.populations);
        }
        if let Some(op) = self.operator() {
            let rho = fwd.final_state.as_ref().expect("final state built for operators");
            value += linalg::re_trace_product(rho, op.matrix());
        }
        if let Some(c) = self.constraint() {
            value -= c.value(states::population_energy(&fwd.populations, self.problem.energies()));
        }
        value
    }

    pub fn value_at(&self, params: &[f64]) -> f64 {
        self.value_of(&self.forward(params, false))
    }

    /// Value and exact gradient with respect to the packed generator.
    ///
    /// With `Γ = ∂J/∂ρ_f` and `M = Γ U† ρ_T`, `dJ = 2 Re Tr(M dU)`. The
    /// derivative of `exp(iV)` along `dV` is `W (G ∘ W† dV W) W†` with `G`
    /// the divided differences of `x ↦ e^{ix}` over the spectrum of `V`,
    /// which gives `dJ = 2 Re Tr(R dV)` for `R = W (M' ∘ Gᵀ) W†`, `M' = W† M W`.
    pub fn value_and_gradient_at(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let n = self.dim();
        let fwd = self.forward(params, false);
        let value = self.value_of(&fwd);
        let energies = self.problem.energies();

        let mut gamma = match self.operator() {
            Some(op) => op.matrix().clone(),
            None => CMatrix::zeros(n, n),
        };
        let penalty_slope = self
            .constraint()
            .map(|c| c.derivative(states::population_energy(&fwd.populations, energies)))
            .unwrap_or(0.0);
        for k in 0..n {
            let mut g = -penalty_slope * energies[k];
            if self.has_entropy() {
                g += -fwd.populations[k].max(LOG_CLIP).ln() - 1.0;
            }
            gamma[(k, k)] += C64::new(g, 0.0);
        }

        let pt = self.problem.initial_populations();
        let mut m = gamma * fwd.unitary.adjoint();
        for b in 0..n {
            for a in 0..n {
                m[(a, b)] *= pt[b];
            }
        }
        let w = &fwd.eigvecs;
        let mp = w.adjoint() * m * w;
        let kernel = linalg::exp_kernel(&fwd.spectrum, 1.0);
        let inner = CMatrix::from_fn(n, n, |a, b| mp[(a, b)] * kernel[(b, a)]);
        let r = w * inner * w.adjoint();

        let mut grad = Vec::with_capacity(n * n);
        for c in 0..n {
            grad.push(2.0 * r[(c, c)].re);
        }
        for c in 0..n {
            for d in c + 1..n {
                grad.push(2.0 * (r[(d, c)].re + r[(c, d)].re));
                grad.push(2.0 * (r[(c, d)].im - r[(d, c)].im));
            }
        }
        (value, grad)
    }

    pub fn evaluate(&self, v: &HermitianGenerator) -> f64 {
        assert_eq!(v.dim(), self.dim(), "generator dimension");
        self.value_at(v.params())
    }
}

/// `U† diag(p) U`.
pub(crate) fn final_state(u: &CMatrix, p: &[f64]) -> CMatrix {
    let n = p.len();
    let mut du = u.clone();
    for j in 0..n {
        for k in 0..n {
            du[(j, k)] *= p[j];
        }
    }
    let rho = u.adjoint() * du;
    (&rho + rho.adjoint()).scale(0.5)
}

pub fn evaluate_objective(obj: &Objective, v: &HermitianGenerator) -> f64 {
    obj.evaluate(v)
}
