//! Batch experiments over many random starts, and their persistence.

mod census;
pub mod csv;
mod sweeps;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CohError, Result};
use crate::linalg::{self, HermitianMatrix};
use crate::optimizer::Termination;
use crate::spinsys::ModelParams;
use crate::states;
use crate::uopt::{
    build_dipole, build_target_operator, optimize, CoherenceProblem, Coupling, EnergyConstraint,
    Objective, OptimizerOptions, Penalty, TargetEnergy,
};

pub use census::{cluster_labels, same_partition, trap_census, Cluster, TrapCensus, SENSITIVITY_TOLS};
pub use sweeps::{
    aggregate, beta_sweep_max_c, c_non_decreasing, grid_sweep_o, lambda_sweep, log_grid, GridSweep, LambdaSweep,
    SweepRecord, Tolerances,
};

pub const DEFAULT_VALUE_TOL: f64 = 1e-4;
pub const DEFAULT_OVERLAP_TOL: f64 = 1e-3;
pub const DEFAULT_ENERGY_TOL: f64 = 1e-3;

/// Which objective a batch optimizes, in terms of physical parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveKindSpec {
    Unconstrained,
    EnergyConstrained {
        target: TargetEnergy,
        lambda: f64,
        #[serde(default)]
        penalty: Penalty,
    },
    Generalized {
        alpha: f64,
        coupling: Coupling,
        /// `(β_F, λ)` of the optional energy constraint.
        constraint: Option<(f64, f64)>,
        #[serde(default)]
        penalty: Penalty,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub j: f64,
    pub beta0: f64,
    pub model: ModelParams,
    pub objective: ObjectiveKindSpec,
}

impl ObjectiveSpec {
    pub fn unconstrained(j: f64, beta0: f64) -> Self {
        Self {
            j,
            beta0,
            model: ModelParams::default(),
            objective: ObjectiveKindSpec::Unconstrained,
        }
    }

    pub fn energy_constrained(j: f64, beta0: f64, beta_f: f64, lambda: f64) -> Self {
        Self {
            j,
            beta0,
            model: ModelParams::default(),
            objective: ObjectiveKindSpec::EnergyConstrained {
                target: TargetEnergy::Beta(beta_f),
                lambda,
                penalty: Penalty::Absolute,
            },
        }
    }

    pub fn generalized(j: f64, beta0: f64, alpha: f64, coupling: Coupling, constraint: Option<(f64, f64)>) -> Self {
        Self {
            j,
            beta0,
            model: ModelParams::default(),
            objective: ObjectiveKindSpec::Generalized {
                alpha,
                coupling,
                constraint,
                penalty: Penalty::Absolute,
            },
        }
    }

    pub fn build(&self) -> Result<Objective> {
        let problem = CoherenceProblem::model(self.j, self.beta0, self.model)?;
        Ok(match &self.objective {
            ObjectiveKindSpec::Unconstrained => Objective::unconstrained(problem),
            ObjectiveKindSpec::EnergyConstrained { target, lambda, penalty } => {
                let c = EnergyConstraint::new(&problem, *lambda, *target, *penalty)?;
                Objective::energy_constrained(problem, c)
            }
            ObjectiveKindSpec::Generalized {
                alpha,
                coupling,
                constraint,
                penalty,
            } => {
                let op = build_target_operator(&coupling.matrix(problem.dim()), *alpha);
                let c = constraint
                    .map(|(beta_f, lambda)| {
                        EnergyConstraint::new(&problem, lambda, TargetEnergy::Beta(beta_f), *penalty)
                    })
                    .transpose()?;
                Objective::generalized(problem, op, c)?
            }
        })
    }
}

/// Per-run results kept in batch records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub objective_value: f64,
    pub overlap: Option<f64>,
    /// Coherence measure `C` of the final state.
    pub coherence: f64,
    /// `σ = (E − E_f)/E_f`, present when the objective has an energy target.
    pub sigma: Option<f64>,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub final_energy: f64,
    pub energy_entropy: f64,
    pub divergence: f64,
    /// `Tr(ρ_f μ)`.
    pub mu: f64,
    /// `Tr(ρ_f μ²)` with the diagonal of `μ²` removed.
    pub mu2_offdiag: f64,
    /// `Tr(ρ_f O)` for generalized objectives.
    pub target_expectation: Option<f64>,
    pub final_populations: Vec<f64>,
    /// Packed optimal generator (energy representation).
    pub generator: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub seed: u64,
    pub spec: ObjectiveSpec,
    pub summary: Option<RunSummary>,
    /// Set when the run failed numerically; the batch continues.
    pub error: Option<String>,
}

impl RunRecord {
    pub fn converged(&self) -> bool {
        self.summary.as_ref().is_some_and(|s| s.converged)
    }
}

/// One optimization from the random start drawn from `seed`.
pub fn single_run(spec: &ObjectiveSpec, objective: &Objective, run_id: usize, seed: u64, opts: &OptimizerOptions) -> RunRecord {
    let opts = opts.with_seed(seed);
    let v0 = opts.initial_generator(objective.dim());
    let outcome = optimize(objective, &v0, &opts).map(|r| summarize(objective, r));
    let (summary, error) = match outcome {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    RunRecord {
        run_id,
        seed,
        spec: spec.clone(),
        summary,
        error,
    }
}

fn summarize(objective: &Objective, r: crate::uopt::OptResult) -> RunSummary {
    let problem = objective.problem();
    let n = problem.dim();
    let rho = crate::uopt::final_state_of(&r.unitary, problem.initial_populations());
    let mu = build_dipole(n);
    let mu2 = HermitianMatrix::hermitize(&(mu.matrix() * mu.matrix())).off_diagonal();
    let target_expectation = match objective.kind() {
        crate::uopt::ObjectiveKind::GeneralizedTarget { operator, .. } => {
            Some(linalg::re_trace_product(&rho, operator.matrix()))
        }
        _ => None,
    };
    let sigma = objective
        .constraint()
        .map(|c| states::relative_energy_error(r.final_energy, c.target_energy).value);
    RunSummary {
        objective_value: r.objective_value,
        overlap: r.overlap,
        coherence: r.final_coherence.value,
        sigma,
        converged: r.converged,
        termination: r.termination,
        iterations: r.iterations,
        final_energy: r.final_energy,
        energy_entropy: r.energy_entropy,
        divergence: r.divergence,
        mu: linalg::re_trace_product(&rho, mu.matrix()),
        mu2_offdiag: linalg::re_trace_product(&rho, mu2.matrix()),
        target_expectation,
        final_populations: r.final_populations,
        generator: r.generator.params().to_vec(),
    }
}

/// `n_runs` independent optimizations with seeds `seed0, seed0+1, …`, run on
/// the current rayon pool. Records come back in seed order.
pub fn multistart(spec: &ObjectiveSpec, n_runs: usize, seed0: u64, opts: &OptimizerOptions) -> Result<Vec<RunRecord>> {
    if n_runs == 0 {
        return Err(CohError::Domain("multistart needs at least one run".into()));
    }
    let objective = spec.build()?;
    Ok((0..n_runs)
        .into_par_iter()
        .map(|k| single_run(spec, &objective, k, seed0 + k as u64, opts))
        .collect())
}

/// Successful records only.
pub(crate) fn summaries(records: &[RunRecord]) -> impl Iterator<Item = &RunSummary> {
    records.iter().filter_map(|r| r.summary.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_follow_seed_order() {
        let spec = ObjectiveSpec::unconstrained(1.0, 0.2);
        let recs = multistart(&spec, 12, 40, &OptimizerOptions::default()).unwrap();
        for (k, r) in recs.iter().enumerate() {
            assert_eq!(r.run_id, k);
            assert_eq!(r.seed, 40 + k as u64);
        }
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let again = pool.install(|| multistart(&spec, 12, 40, &OptimizerOptions::default())).unwrap();
        assert_eq!(recs, again);
    }

    #[test]
    fn unconstrained_batch_reaches_log_n() {
        let spec = ObjectiveSpec::unconstrained(1.0, 0.2);
        let recs = multistart(&spec, 50, 0, &OptimizerOptions::default()).unwrap();
        for r in &recs {
            let s = r.summary.as_ref().unwrap();
            assert!((s.objective_value - 3f64.ln()).abs() < 1e-6);
        }
        assert_eq!(trap_census(&recs, DEFAULT_VALUE_TOL).unwrap().n_clusters, 1);
    }

    #[test]
    fn stored_generator_reproduces_value() {
        let spec = ObjectiveSpec::energy_constrained(1.0, 3.0, 0.3, 0.3);
        let obj = spec.build().unwrap();
        for r in multistart(&spec, 5, 7, &OptimizerOptions::default()).unwrap() {
            let s = r.summary.unwrap();
            assert!((obj.value_at(&s.generator) - s.objective_value).abs() < 1e-9);
            let o = s.overlap.unwrap();
            assert!((0.0..=1.0).contains(&o));
        }
    }

    #[test]
    fn failures_are_recorded() {
        let spec = ObjectiveSpec::unconstrained(1.0, 0.2);
        let obj = spec.build().unwrap();
        let bad = OptimizerOptions {
            fd_step: -1.0,
            ..OptimizerOptions::default()
        };
        let r = single_run(&spec, &obj, 0, 1, &bad);
        assert!(r.summary.is_none());
        assert!(r.error.is_some());
        assert!(multistart(&spec, 0, 0, &OptimizerOptions::default()).is_err());
    }

    #[test]
    fn spec_builds_each_kind() {
        assert!(ObjectiveSpec::generalized(1.0, 1.0, 0.04, Coupling::Dipole, Some((0.5, 10.0)))
            .build()
            .is_ok());
        assert!(ObjectiveSpec::energy_constrained(1.0, 1.0, 0.5, -1.0).build().is_err());
        assert!(ObjectiveSpec::unconstrained(0.3, 1.0).build().is_err());
    }
}
