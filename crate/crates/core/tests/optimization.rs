use cohgen::grape::{self, ControlField, GrapeOptions};
use cohgen::harness::{multistart, ObjectiveSpec};
use cohgen::linalg;
use cohgen::optimizer::finite_difference_gradient;
use cohgen::spinsys::SpinSystem;
use cohgen::states::{von_neumann_entropy, DensityMatrix};
use cohgen::uopt::{dft_unitary, optimize, Coupling, HermitianGenerator, Objective, OptimizerOptions};
use cohgen::HermitianMatrix;
use proptest::prelude::*;

fn specs() -> Vec<(&'static str, ObjectiveSpec)> {
    vec![
        ("unconstrained", ObjectiveSpec::unconstrained(1.5, 2.0)),
        ("energy-constrained", ObjectiveSpec::energy_constrained(1.5, 40.0, 0.3, 0.3)),
        (
            "generalized",
            ObjectiveSpec::generalized(1.5, 40.0, 0.04, Coupling::Dipole, Some((0.5, 2.0))),
        ),
    ]
}

fn assert_gradient_close(name: &str, analytic: &[f64], fd: &[f64]) {
    let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let err = analytic
        .iter()
        .zip(fd)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err <= 1e-4 * scale, "{name}: error {err:e} at scale {scale:e}");
}

#[test]
fn objective_gradients_match_finite_differences() {
    for (name, spec) in specs() {
        let obj = spec.build().unwrap();
        for seed in 0..20 {
            let v = HermitianGenerator::random(obj.dim(), 1.0, seed);
            let (_, g) = obj.value_and_gradient_at(v.params());
            let fd = finite_difference_gradient(|x| obj.value_at(x), v.params(), 1e-6);
            assert_gradient_close(name, &g, &fd);
        }
    }
}

fn grape_model(j: f64) -> (HermitianMatrix, HermitianMatrix, cohgen::CMatrix) {
    let problem = cohgen::uopt::CoherenceProblem::model(j, 0.2, Default::default()).unwrap();
    let target = problem.to_computational(&dft_unitary(problem.dim()));
    let jz = SpinSystem::new(j).unwrap().jz().clone();
    (problem.hamiltonian().clone(), jz, target)
}

#[test]
fn grape_gradient_matches_finite_differences() {
    let (h, c, target) = grape_model(1.5);
    let field = ControlField::random(3000.0, 60, 0.05, 4).unwrap();
    let (_, g) = grape::fidelity_gradient(&h, &c, &target, &field).unwrap();
    let f = |a: &[f64]| {
        let fld = ControlField::new(field.dt(), a.to_vec()).unwrap();
        grape::unitary_fidelity(&grape::propagate(&h, &c, &fld).unwrap(), &target).unwrap()
    };
    let full = finite_difference_gradient(f, field.amplitudes(), 1e-6);
    let picks: Vec<usize> = (0..10).map(|k| k * 6 + 1).collect();
    let a: Vec<f64> = picks.iter().map(|&k| g[k]).collect();
    let b: Vec<f64> = picks.iter().map(|&k| full[k]).collect();
    assert_gradient_close("grape", &a, &b);
}

#[test]
fn grape_trace_is_monotone_and_field_round_trips() {
    let (h, c, target) = grape_model(1.0);
    let field0 = ControlField::random(6000.0, 100, 0.01, 2).unwrap();
    let opts = GrapeOptions {
        max_iter: 150,
        ..Default::default()
    };
    let (field, res) = grape::grape_optimize(&h, &c, &target, &field0, &opts).unwrap();
    assert!(res.fidelity_trace.windows(2).all(|w| w[1] >= w[0]));
    assert!(linalg::unitarity_defect(&res.u_final) < 1e-9);
    let mut buf = Vec::new();
    field.write_csv(&mut buf).unwrap();
    let back = ControlField::read_csv(&buf[..]).unwrap();
    let f = grape::unitary_fidelity(&grape::propagate(&h, &c, &back).unwrap(), &target).unwrap();
    assert!((f - res.fidelity).abs() < 1e-12);
}

#[test]
fn batches_are_reproducible() {
    let spec = ObjectiveSpec::energy_constrained(1.0, 3.0, 0.3, 0.3);
    let a = multistart(&spec, 8, 100, &OptimizerOptions::default()).unwrap();
    let b = multistart(&spec, 8, 100, &OptimizerOptions::default()).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn optimum_set_is_degenerate() {
    let obj = ObjectiveSpec::unconstrained(2.0, 1.0).build().unwrap();
    let opts = OptimizerOptions::default();
    let run = |seed| {
        let o = opts.with_seed(seed);
        optimize(&obj, &o.initial_generator(obj.dim()), &o).unwrap()
    };
    let (a, b) = (run(1), run(2));
    assert!((a.objective_value - b.objective_value).abs() < 1e-6);
    assert!(linalg::frobenius_distance(&a.unitary, &b.unitary) > 1e-3);
}

fn check_result(obj: &Objective, seed: u64) -> Result<(), TestCaseError> {
    let opts = OptimizerOptions::default().with_seed(seed);
    let r = optimize(obj, &opts.initial_generator(obj.dim()), &opts).unwrap();
    let problem = obj.problem();
    let s0 = von_neumann_entropy(&problem.thermal_state());
    prop_assert!((r.final_entropy - s0).abs() < 1e-9);
    prop_assert!(r.objective_trace.windows(2).all(|w| w[1] >= w[0]));
    prop_assert!(linalg::unitarity_defect(&r.unitary) < 1e-10);
    let u = problem.to_computational(&r.unitary);
    let rho = DensityMatrix::new(
        HermitianMatrix::hermitize(&(u.adjoint() * problem.thermal_state().matrix() * &u)).into_matrix(),
    )
    .unwrap();
    prop_assert!((von_neumann_entropy(&rho) - s0).abs() < 1e-9);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unconstrained_optimum_is_ln_n(seed in any::<u64>(), twice in 1u32..=6, beta0 in 0.05f64..50.0) {
        let j = twice as f64 / 2.0;
        let obj = ObjectiveSpec::unconstrained(j, beta0).build().unwrap();
        let opts = OptimizerOptions::default().with_seed(seed);
        let r = optimize(&obj, &opts.initial_generator(obj.dim()), &opts).unwrap();
        let ln_n = (obj.dim() as f64).ln();
        prop_assert!(r.objective_value <= ln_n + 1e-12);
        prop_assert!(ln_n - r.objective_value < 1e-6);
        check_result(&obj, seed)?;
    }

    #[test]
    fn constrained_runs_keep_the_spectrum(seed in any::<u64>(), lambda in 0.0f64..5.0) {
        let obj = ObjectiveSpec::energy_constrained(1.0, 3.0, 0.3, lambda).build().unwrap();
        check_result(&obj, seed)?;
    }
}
