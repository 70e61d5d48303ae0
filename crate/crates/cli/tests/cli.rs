use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cohgen::grape::{self, ControlField};
use cohgen::spinsys::SpinSystem;
use cohgen::uopt::{dft_unitary, CoherenceProblem};
use cohgen_cli::summary::{Results, Status, Summary};
use tempfile::TempDir;

fn cohgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cohgen")).args(args).output().unwrap()
}

fn run_into(dir: &TempDir, name: &str, args: &[&str]) -> (Output, PathBuf) {
    let out = dir.path().join(name);
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    (cohgen(&all), out)
}

fn summary(dir: &Path) -> Summary {
    Summary::from_json(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn microcanonical_reports_uniform_populations() {
    let tmp = TempDir::new().unwrap();
    let (o, dir) = run_into(&tmp, "m", &["microcanonical", "--j", "1", "--beta0", "0.2", "--runs", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&dir);
    assert_eq!(s.status, Status::Ok);
    let Some(Results::Microcanonical(m)) = s.results else { panic!("wrong results") };
    assert_eq!(m.batch.records.len(), 10);
    for r in &m.batch.records {
        for p in &r.summary.as_ref().unwrap().final_populations {
            assert!((p - 1.0 / 3.0).abs() < 1e-6);
        }
    }
    let runs = fs::read_to_string(dir.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 11);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(cohgen(&["microcanonical", "--beta0", "0.2"]).status.code(), Some(2));
    assert_eq!(cohgen(&["canonical", "--j", "1", "--beta0", "3", "--lambda", "0.3"]).status.code(), Some(2));
    assert_eq!(cohgen(&["grape", "--j", "0.7", "--beta0", "1"]).status.code(), Some(2));
    assert_eq!(cohgen(&["sweep"]).status.code(), Some(2));
    assert_eq!(cohgen(&["microcanonical", "--j", "1", "--beta0", "x"]).status.code(), Some(2));

    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[system]\nspin = 1\n").unwrap();
    let o = cohgen(&["microcanonical", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("spin"));
}

#[test]
fn energy_target_matches_beta_target() {
    let tmp = TempDir::new().unwrap();
    let common = ["canonical", "--j", "1", "--beta0", "3", "--lambda", "0.3", "--runs", "12", "--seed", "3"];
    let (o, by_beta) = run_into(&tmp, "beta", &[&common[..], &["--betaf", "0.3"]].concat());
    assert!(o.status.success());
    let Some(Results::Canonical(c)) = summary(&by_beta).results else { panic!() };
    let e = format!("{:e}", c.target_energy);
    let (o, by_energy) = run_into(&tmp, "energy", &[&common[..], &["--energy", &e]].concat());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["runs.csv", "fig2.csv"] {
        assert_eq!(fs::read(by_beta.join(f)).unwrap(), fs::read(by_energy.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn config_echo_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let (o, first) = run_into(
        &tmp,
        "first",
        &["canonical", "--j", "1", "--beta0", "3", "--betaf", "0.3", "--lambdas", "0.1,1", "--runs", "6"],
    );
    assert!(o.status.success());
    let echo = first.join("config.toml");
    let (o, second) = run_into(&tmp, "second", &["canonical", "--config", echo.to_str().unwrap()]);
    assert!(o.status.success());
    for f in ["summary.json", "config.toml", "fig3.csv"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }
    let fig3 = fs::read_to_string(first.join("fig3.csv")).unwrap();
    assert_eq!(fig3.lines().next(), Some("lambda,rank,overlap,mean_sigma"));
    assert_eq!(fig3.lines().count(), 13);
}

#[test]
fn report_rewrites_identical_csvs() {
    let tmp = TempDir::new().unwrap();
    let (o, dir) = run_into(
        &tmp,
        "r",
        &["canonical", "--j", "1", "--beta0", "3", "--betaf", "0.3", "--lambda", "0.3", "--lambdas", "0.3,3", "--runs", "8"],
    );
    assert!(o.status.success());
    let before: Vec<_> = ["runs.csv", "fig2.csv", "fig3.csv"].iter().map(|f| fs::read(dir.join(f)).unwrap()).collect();
    for f in ["runs.csv", "fig2.csv", "fig3.csv"] {
        fs::remove_file(dir.join(f)).unwrap();
    }
    let o = cohgen(&["report", dir.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("lambda0"));
    let after: Vec<_> = ["runs.csv", "fig2.csv", "fig3.csv"].iter().map(|f| fs::read(dir.join(f)).unwrap()).collect();
    assert_eq!(before, after);
    assert_eq!(cohgen(&["report", tmp.path().join("missing").to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn grape_field_reimport_and_best_effort_flag() {
    let tmp = TempDir::new().unwrap();
    let (o, dir) = run_into(
        &tmp,
        "g",
        &["grape", "--j", "3", "--beta0", "0.2", "--time", "2000", "--steps", "20", "--target-fidelity", "1.0", "--max-iter", "10"],
    );
    assert_eq!(o.status.code(), Some(0));
    let s = summary(&dir);
    assert_eq!(s.status, Status::NotConverged);
    let Some(Results::Grape(g)) = s.results else { panic!() };
    assert!(!g.converged);

    let text = fs::read_to_string(dir.join("field.csv")).unwrap();
    let field = ControlField::read_csv(text.as_bytes()).unwrap();
    assert_eq!(field.steps(), 20);
    let problem = CoherenceProblem::model(3.0, 0.2, Default::default()).unwrap();
    let target = problem.to_computational(&dft_unitary(7));
    let jz = SpinSystem::new(3.0).unwrap().jz().clone();
    let f = grape::unitary_fidelity(&grape::propagate(problem.hamiltonian(), &jz, &field).unwrap(), &target).unwrap();
    assert!((f - g.fidelity).abs() < 1e-12);

    for f in ["fidelity_trace.csv", "rho_initial_abs.csv", "rho_final_abs.csv", "unitary_abs.csv"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let rho0 = fs::read_to_string(dir.join("rho_initial_abs.csv")).unwrap();
    assert_eq!(rho0.lines().count(), 7);
}

#[test]
fn grid_sweep_writes_three_maps() {
    let tmp = TempDir::new().unwrap();
    let (o, dir) = run_into(
        &tmp,
        "f5",
        &["sweep", "--kind", "fig5", "--j", "1", "--beta0s", "0.5,5", "--betafs", "0.5,5", "--runs", "2"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.join("fig5.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("beta0,beta_f,o_best,mu_best,mu2_offdiag_best"));
    assert_eq!(lines.count(), 4);
    let s = summary(&dir);
    assert_eq!(s.config.target.alpha, Some(40.0));

    let (o, dir) = run_into(&tmp, "f1", &["sweep", "--kind", "fig1", "--j", "1,2", "--grid-points", "3", "--runs", "3"]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.join("fig1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn same_seed_same_bytes() {
    let tmp = TempDir::new().unwrap();
    let args = ["sweep", "--kind", "fig4", "--j", "1", "--grid-points", "2", "--runs", "3", "--seed", "8"];
    let (_, a) = run_into(&tmp, "a", &args);
    let (_, b) = run_into(&tmp, "b", &[&args[..], &["--workers", "2"]].concat());
    for f in ["summary.json", "fig4.csv", "config.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
