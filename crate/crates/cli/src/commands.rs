//! Experiment drivers. Each one is a pure function of the resolved config.

use cohgen::grape::{self, ControlField};
use cohgen::harness::{
    aggregate, beta_sweep_max_c, c_non_decreasing, grid_sweep_o, lambda_sweep, multistart, trap_census,
    ObjectiveKindSpec, ObjectiveSpec, RunRecord, Tolerances,
};
use cohgen::spinsys::SpinSystem;
use cohgen::states::{coherence_c, DensityMatrix};
use cohgen::uopt::{dft_unitary, optimize, CoherenceProblem, EnergyConstraint, Objective, TargetEnergy};
use cohgen::{CMatrix, CohError, HermitianMatrix};

use crate::config::{Experiment, RunConfig, SweepKind};
use crate::summary::{
    Batch, CanonicalResults, Fig1Curve, Fig1Results, GrapeResults, GridResults, MicrocanonicalResults, Results,
    Status, Summary, SCHEMA_VERSION,
};

/// Runs a resolved config. Numerical failures end up in the summary status
/// instead of an `Err`.
pub fn run(experiment: Experiment, config: RunConfig) -> Summary {
    let outcome = match experiment {
        Experiment::Microcanonical => microcanonical(&config),
        Experiment::Canonical => canonical(&config),
        Experiment::Grape => grape_field(&config),
        Experiment::Sweep => sweep(&config),
    };
    let (status, error, results) = match outcome {
        Ok((status, results)) => (status, None, Some(results)),
        Err(e) => (Status::NumericalFailure, Some(e.to_string()), None),
    };
    Summary {
        schema_version: SCHEMA_VERSION,
        experiment,
        status,
        config,
        error,
        results,
    }
}

type Outcome = cohgen::Result<(Status, Results)>;

fn tolerances(c: &RunConfig) -> Tolerances {
    Tolerances {
        value: c.census.value_tol,
        overlap: c.census.overlap_tol,
    }
}

fn runs(c: &RunConfig) -> usize {
    c.runs.expect("resolved config carries runs")
}

fn j_beta0(c: &RunConfig) -> (f64, f64) {
    (
        c.system.j.expect("resolved config carries j"),
        c.system.beta0.expect("resolved config carries beta0"),
    )
}

fn status_of(records: &[RunRecord]) -> Status {
    if records.iter().any(|r| r.error.is_some()) {
        Status::NumericalFailure
    } else if records.iter().all(RunRecord::converged) {
        Status::Ok
    } else {
        Status::NotConverged
    }
}

fn batch(c: &RunConfig, spec: &ObjectiveSpec) -> cohgen::Result<Batch> {
    let records = multistart(spec, runs(c), c.seed, &c.optimizer)?;
    Ok(Batch {
        census: trap_census(&records, c.census.value_tol)?,
        aggregate: aggregate(spec, &records, tolerances(c))?,
        records,
    })
}

fn microcanonical(c: &RunConfig) -> Outcome {
    let (j, beta0) = j_beta0(c);
    let spec = ObjectiveSpec {
        model: c.model(),
        ..ObjectiveSpec::unconstrained(j, beta0)
    };
    let b = batch(c, &spec)?;
    let ok: Vec<_> = b.records.iter().filter_map(|r| r.summary.as_ref()).collect();
    let dim = SpinSystem::new(j)?.dim();
    let uniform = 1.0 / dim as f64;
    let max_population_deviation = ok
        .iter()
        .flat_map(|s| s.final_populations.iter())
        .map(|p| (p - uniform).abs())
        .fold(0.0, f64::max);
    let max_entropy_gap = ok
        .iter()
        .map(|s| (s.energy_entropy - (dim as f64).ln()).abs())
        .fold(0.0, f64::max);
    Ok((
        status_of(&b.records),
        Results::Microcanonical(MicrocanonicalResults {
            dim,
            max_population_deviation,
            max_entropy_gap,
            batch: b,
        }),
    ))
}

fn canonical(c: &RunConfig) -> Outcome {
    let (j, beta0) = j_beta0(c);
    let target = match (c.constraint.beta_f, c.constraint.energy) {
        (Some(b), _) => TargetEnergy::Beta(b),
        (None, Some(e)) => TargetEnergy::Energy(e),
        (None, None) => unreachable!("resolved config carries a target"),
    };
    let problem = CoherenceProblem::model(j, beta0, c.model())?;
    let target_energy = EnergyConstraint::new(&problem, 0.0, target, c.constraint.penalty)?.target_energy;
    let spec_at = |lambda: f64| ObjectiveSpec {
        j,
        beta0,
        model: c.model(),
        objective: ObjectiveKindSpec::EnergyConstrained {
            target,
            lambda,
            penalty: c.constraint.penalty,
        },
    };
    let single = c.constraint.lambda.map(|l| batch(c, &spec_at(l))).transpose()?;
    let sweep = c
        .constraint
        .lambdas
        .as_ref()
        .map(|ls| {
            lambda_sweep(
                &spec_at(ls[0]),
                ls,
                runs(c),
                c.seed,
                &c.optimizer,
                c.census.energy_tol,
                tolerances(c),
            )
        })
        .transpose()?;
    let status = [
        single.as_ref().map_or(Status::Ok, |b| status_of(&b.records)),
        sweep.as_ref().map_or(Status::Ok, |s| sweep_status(&s.records)),
    ]
    .into_iter()
    .max()
    .expect("two entries");
    Ok((
        status,
        Results::Canonical(CanonicalResults {
            target_energy,
            batch: single,
            lambda_sweep: sweep,
        }),
    ))
}

fn abs_table(m: &CMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().map(|z| z.norm()).collect()).collect()
}

fn grape_field(c: &RunConfig) -> Outcome {
    let (j, beta0) = j_beta0(c);
    let g = &c.grape;
    let problem = CoherenceProblem::model(j, beta0, c.model())?;
    let sys = SpinSystem::new(j)?;
    let n = problem.dim();
    let h = problem.hamiltonian();
    let control = sys.jz();
    let target = problem.to_computational(&dft_unitary(n));
    let field0 = ControlField::random(g.total_time, g.steps, g.init_scale, c.seed)?;
    let (field, res) = grape::grape_optimize(h, control, &target, &field0, &g.options())?;

    let mut csv = Vec::new();
    field.write_csv(&mut csv)?;
    let back = ControlField::read_csv(&csv[..])?;
    let reimport_fidelity = grape::unitary_fidelity(&grape::propagate(h, control, &back)?, &target)?;

    let p = problem.initial_populations();
    let rho0 = HermitianMatrix::from_diagonal(p).into_matrix();
    let u = problem.basis().to_energy_rep(&res.u_final);
    // same U†ρU convention as the static optimization
    let rho_f = u.adjoint() * &rho0 * &u;
    let coherence = coherence_c(&DensityMatrix::new(problem.basis().from_energy_rep(&rho_f))?, problem.basis())?.value;
    let opts = c.optimizer.with_seed(c.seed);
    let objective = Objective::unconstrained(problem.clone());
    let reference = optimize(&objective, &opts.initial_generator(n), &opts)?;
    let final_populations: Vec<f64> = rho_f.diagonal().iter().map(|z| z.re).collect();
    let uniform = 1.0 / n as f64;
    let max_population_deviation = final_populations.iter().map(|q| (q - uniform).abs()).fold(0.0, f64::max);
    if !res.fidelity.is_finite() {
        return Err(CohError::NonFinite("GRAPE fidelity".into()));
    }
    let status = if res.converged { Status::Ok } else { Status::NotConverged };
    Ok((
        status,
        Results::Grape(GrapeResults {
            dim: n,
            fidelity: res.fidelity,
            reimport_fidelity,
            converged: res.converged,
            termination: res.termination,
            iterations: res.iterations,
            final_populations,
            max_population_deviation,
            coherence,
            static_coherence: reference.final_coherence.value,
            dt: field.dt(),
            amplitudes: field.amplitudes().to_vec(),
            fidelity_trace: res.fidelity_trace,
            rho_initial_abs: abs_table(&rho0),
            rho_final_abs: abs_table(&rho_f),
            unitary_abs: abs_table(&u),
        }),
    ))
}

fn sweep(c: &RunConfig) -> Outcome {
    let kind = c.sweep.kind.expect("resolved sweep carries a kind");
    let beta0s = c.sweep.beta0s.as_deref().expect("resolved sweep carries beta0s");
    match kind {
        SweepKind::Fig1 => {
            let js = c.system.js.as_deref().expect("resolved fig1 carries js");
            let records = beta_sweep_max_c(js, beta0s, runs(c), c.seed, &c.optimizer)?;
            let curves = js
                .iter()
                .map(|&j| {
                    let mut curve: Vec<_> = records.iter().filter(|r| r.j == j).collect();
                    curve.sort_by(|a, b| a.beta0.total_cmp(&b.beta0));
                    Fig1Curve {
                        j,
                        non_decreasing: c_non_decreasing(&records, j),
                        c_first: curve.first().map_or(f64::NAN, |r| r.c_best),
                        c_last: curve.last().map_or(f64::NAN, |r| r.c_best),
                    }
                })
                .collect();
            let status = sweep_status(&records);
            Ok((status, Results::Fig1(Fig1Results { curves, records })))
        }
        SweepKind::Fig4 | SweepKind::Fig5 => {
            let grid = grid_sweep_o(
                c.system.j.expect("resolved grid carries j"),
                c.target.alpha.expect("resolved grid carries alpha"),
                c.target.coupling,
                beta0s,
                c.sweep.beta_fs.as_deref().expect("resolved grid carries beta_fs"),
                c.constraint.lambda.expect("resolved grid carries lambda"),
                runs(c),
                c.seed,
                &c.optimizer,
            )?;
            let status = sweep_status(&grid.records);
            let r = GridResults {
                argmax_o: grid.argmax_o(),
                argmax_mu: grid.argmax_mu(),
                argmin_mu2_offdiag: grid.argmin_mu2_offdiag(),
                hot_target_corner: grid.hot_target_corner(),
                corner_is_max: grid.corner_is_max(),
                o_and_mu_agree: grid.o_and_mu_agree(),
                inverted_extremum: grid.inverted_extremum(),
                max_abs_mu: grid.max_abs_mu(),
                grid,
            };
            Ok((status, if kind == SweepKind::Fig4 { Results::Fig4(r) } else { Results::Fig5(r) }))
        }
    }
}

fn sweep_status(records: &[cohgen::harness::SweepRecord]) -> Status {
    if records.iter().any(|r| r.n_failed > 0) {
        Status::NumericalFailure
    } else if records.iter().any(|r| r.n_converged < r.n_runs) {
        Status::NotConverged
    } else {
        Status::Ok
    }
}
