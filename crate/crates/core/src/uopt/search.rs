use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, CohError, Result};
use crate::linalg::{self, CMatrix};
use crate::optimizer::{self, finite_difference_gradient, AscentObjective, AscentSettings, Termination};
use crate::states::{self, Coherence, PopulationVector};

use super::objective::Objective;
use super::HermitianGenerator;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    /// Exact derivative of `exp(iV)` through the eigendecomposition of `V`.
    #[default]
    Analytic,
    /// Central differences over the `N²` parameters with step `fd_step`.
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub fd_step: f64,
    /// Standard deviation of the diagonal of a random `V₀`.
    pub init_scale: f64,
    pub seed: u64,
    pub gradient: GradientMethod,
    pub memory: usize,
    pub stall_window: usize,
    pub stall_tol: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        let a = AscentSettings::default();
        Self {
            max_iter: a.max_iter,
            grad_tol: a.grad_tol,
            fd_step: 1e-5,
            init_scale: 1.0,
            seed: 0,
            gradient: GradientMethod::Analytic,
            memory: a.memory,
            stall_window: a.stall_window,
            stall_tol: a.stall_tol,
        }
    }
}

impl OptimizerOptions {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Random starting generator drawn from `seed` and `init_scale`.
    pub fn initial_generator(&self, dim: usize) -> HermitianGenerator {
        HermitianGenerator::random(dim, self.init_scale, self.seed)
    }

    fn settings(&self) -> AscentSettings {
        AscentSettings {
            max_iter: self.max_iter,
            grad_tol: self.grad_tol,
            memory: self.memory,
            stall_window: self.stall_window,
            stall_tol: self.stall_tol,
            ..AscentSettings::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) || !(self.fd_step > 0.0) || !(self.init_scale > 0.0) {
            return Err(CohError::Domain(
                "grad_tol, fd_step and init_scale must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptResult {
    pub generator: HermitianGenerator,
    /// `U = exp(iV)` in the energy representation.
    pub unitary: CMatrix,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub gradient_norm: f64,
    /// Energy populations of `ρ_f`, ascending energy.
    pub final_populations: Vec<f64>,
    pub final_coherence: Coherence,
    pub final_energy: f64,
    /// `S_E(ρ_f)`.
    pub energy_entropy: f64,
    /// `S_vN(ρ_f)` from the spectrum of the final state.
    pub final_entropy: f64,
    /// `D(ρ_f|ρ_E) = S_E − S_vN(ρ_T)`.
    pub divergence: f64,
    /// Bhattacharyya overlap with the objective's reference populations.
    pub overlap: Option<f64>,
    pub seed: u64,
    pub objective_trace: Vec<f64>,
}

struct Adapter<'a> {
    objective: &'a Objective,
    method: GradientMethod,
    fd_step: f64,
}

impl AscentObjective for Adapter<'_> {
    fn dim(&self) -> usize {
        self.objective.dim() * self.objective.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.objective.value_at(x)
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match self.method {
            GradientMethod::Analytic => self.objective.value_and_gradient_at(x),
            GradientMethod::FiniteDifference => (
                self.objective.value_at(x),
                finite_difference_gradient(|p| self.objective.value_at(p), x, self.fd_step),
            ),
        }
    }
}

/// Iterations between checks of the generator's spectrum.
const RECHART_EVERY: usize = 200;

/// The differential of `V ↦ exp(iV)` is singular wherever two eigenvalues of
/// `V` differ by a nonzero multiple of `2π`, and the ascent crawls near such
/// points. Every `RECHART_EVERY` iterations a generator whose spectrum has
/// left `(−π, π]` is replaced by the principal one for the same unitary,
/// provided the objective does not drop.
fn ascend_with_recharting(
    adapter: &Adapter<'_>,
    obj: &Objective,
    x0: Vec<f64>,
    opts: &OptimizerOptions,
) -> Result<optimizer::AscentOutcome> {
    let mut settings = opts.settings();
    let mut x = x0;
    let mut total: Option<optimizer::AscentOutcome> = None;
    loop {
        let used = total.as_ref().map_or(0, |t| t.iterations);
        settings.max_iter = (opts.max_iter - used).min(RECHART_EVERY);
        let chunk = optimizer::maximize(adapter, x, &settings)?;
        let more = chunk.termination == Termination::MaxIterations && used + chunk.iterations < opts.max_iter;
        let merged = match total.take() {
            None => chunk,
            Some(mut t) => {
                t.trace.extend_from_slice(&chunk.trace[1..]);
                t.iterations += chunk.iterations;
                t.evaluations += chunk.evaluations;
                t.x = chunk.x;
                t.value = chunk.value;
                t.gradient_inf_norm = chunk.gradient_inf_norm;
                t.termination = chunk.termination;
                t
            }
        };
        if !more {
            return Ok(merged);
        }
        x = principal_params(obj, &merged.x, merged.value).unwrap_or_else(|| merged.x.clone());
        total = Some(merged);
    }
}

fn principal_params(obj: &Objective, x: &[f64], value: f64) -> Option<Vec<f64>> {
    let n = obj.dim();
    let v = super::generator_matrix(n, x);
    let (e, w) = linalg::eigh(&v);
    if e.iter().all(|l| l.abs() <= PI) {
        return None;
    }
    let wrapped = |l: f64| {
        let r = (l + PI).rem_euclid(2.0 * PI) - PI;
        if r == -PI { PI } else { r }
    };
    let m = linalg::function_of(&e, &w, |l| num_complex::Complex64::new(wrapped(l), 0.0));
    let params = HermitianGenerator::from_matrix(&linalg::HermitianMatrix::hermitize(&m)).params().to_vec();
    (obj.value_at(&params) >= value).then_some(params)
}

/// Local maximization of `obj` from `v0`. Deterministic in its inputs.
pub fn optimize(obj: &Objective, v0: &HermitianGenerator, opts: &OptimizerOptions) -> Result<OptResult> {
    check_dim(obj.dim(), v0.dim())?;
    opts.validate()?;
    if v0.params().iter().any(|p| !p.is_finite()) {
        return Err(CohError::NonFinite("initial generator".into()));
    }
    let adapter = Adapter {
        objective: obj,
        method: opts.gradient,
        fd_step: opts.fd_step,
    };
    let outcome = ascend_with_recharting(&adapter, obj, v0.params().to_vec(), opts).map_err(|e| match e {
        CohError::NonFinite(msg) => CohError::NonFinite(format!("{msg} (seed {})", opts.seed)),
        other => other,
    })?;

    let generator = HermitianGenerator::new(obj.dim(), outcome.x)?;
    let fwd = obj.forward(generator.params(), true);
    let rho = fwd.final_state.expect("requested final state");
    let problem = obj.problem();
    let energy_entropy = states::entropy_of_weights(&fwd.populations);
    let final_entropy = states::entropy_of_weights(&linalg::eigvalsh(&rho));
    let overlap = obj
        .reference_populations()
        .map(|q| {
            let p = PopulationVector::from_weights(&fwd.populations)?;
            states::bhattacharyya_overlap(&p, &PopulationVector::from_weights(&q)?)
        })
        .transpose()?;
    Ok(OptResult {
        objective_value: outcome.value,
        iterations: outcome.iterations,
        converged: outcome.termination.converged(),
        termination: outcome.termination,
        gradient_norm: outcome.gradient_inf_norm,
        final_coherence: states::coherence_of_energy_rep(&rho),
        final_energy: states::population_energy(&fwd.populations, problem.energies()),
        energy_entropy,
        final_entropy,
        divergence: energy_entropy - problem.initial_entropy(),
        overlap,
        final_populations: fwd.populations,
        unitary: fwd.unitary,
        generator,
        seed: opts.seed,
        objective_trace: outcome.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinsys::ModelParams;
    use crate::uopt::{dft_unitary, generator_from_unitary, CoherenceProblem};

    fn problem(j: f64, beta0: f64) -> CoherenceProblem {
        CoherenceProblem::model(j, beta0, ModelParams::default()).unwrap()
    }

    #[test]
    fn high_temperature_reaches_uniform_populations() {
        let obj = Objective::unconstrained(problem(1.0, 0.2));
        let opts = OptimizerOptions::default();
        for seed in 0..50 {
            let o = opts.with_seed(seed);
            let r = optimize(&obj, &o.initial_generator(3), &o).unwrap();
            assert!(r.converged, "seed {seed}: {:?}", r.termination);
            for p in &r.final_populations {
                assert!((p - 1.0 / 3.0).abs() < 1e-6, "seed {seed}: {:?}", r.final_populations);
            }
            assert!((r.final_entropy - obj.problem().initial_entropy()).abs() < 1e-9);
            assert!(r.objective_trace.windows(2).all(|w| w[1] >= w[0]));
            let again = obj.value_at(r.generator.params());
            assert!((again - r.objective_value).abs() < 1e-9);
            assert!(linalg::unitarity_defect(&r.unitary) < 1e-10);
        }
    }

    #[test]
    fn dft_start_converges_immediately() {
        let p = problem(2.0, 1.0);
        let n = p.dim();
        let obj = Objective::unconstrained(p);
        let v0 = generator_from_unitary(&dft_unitary(n)).unwrap();
        let r = optimize(&obj, &v0, &OptimizerOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert!((r.objective_value - (n as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn finite_difference_route_agrees() {
        let obj = Objective::unconstrained(problem(1.0, 2.0));
        let opts = OptimizerOptions {
            gradient: GradientMethod::FiniteDifference,
            ..OptimizerOptions::default()
        };
        let r = optimize(&obj, &opts.initial_generator(3), &opts).unwrap();
        assert!((r.objective_value - 3f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn optimum_is_degenerate() {
        let obj = Objective::unconstrained(problem(1.5, 2.0));
        let opts = OptimizerOptions::default();
        let a = optimize(&obj, &opts.with_seed(1).initial_generator(4), &opts.with_seed(1)).unwrap();
        let b = optimize(&obj, &opts.with_seed(2).initial_generator(4), &opts.with_seed(2)).unwrap();
        assert!((a.objective_value - b.objective_value).abs() < 1e-6);
        assert!(linalg::frobenius_distance(&a.unitary, &b.unitary) > 1e-3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let obj = Objective::unconstrained(problem(1.0, 1.0));
        let opts = OptimizerOptions::default();
        assert!(optimize(&obj, &HermitianGenerator::zeros(4), &opts).is_err());
        let bad = OptimizerOptions {
            grad_tol: 0.0,
            ..opts.clone()
        };
        assert!(optimize(&obj, &HermitianGenerator::zeros(3), &bad).is_err());
    }

    #[test]
    fn identical_inputs_identical_results() {
        let obj = Objective::unconstrained(problem(1.0, 3.0));
        let opts = OptimizerOptions::default().with_seed(11);
        let v0 = opts.initial_generator(3);
        let a = optimize(&obj, &v0, &opts).unwrap();
        let b = optimize(&obj, &v0, &opts).unwrap();
        assert_eq!(a.generator, b.generator);
        assert_eq!(a.objective_trace, b.objective_trace);
    }
}
