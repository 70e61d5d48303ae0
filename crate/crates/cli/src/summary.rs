//! The `summary.json` document and every artifact derived from it.

use std::fmt::Write as _;

use cohgen::grape::ControlField;
use cohgen::harness::csv::{self as hcsv, fmt};
use cohgen::harness::{GridSweep, LambdaSweep, RunRecord, SweepRecord, TrapCensus};
use cohgen::optimizer::Termination;
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";

/// Ordered by severity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Some run stopped at the iteration limit, or the field missed its
    /// target fidelity. Results are still written and the exit code is 0.
    NotConverged,
    /// At least one run failed numerically. Exit code 3.
    NumericalFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub status: Status,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub results: Option<Results>,
}

/// One multistart batch at fixed parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub census: TrapCensus,
    pub aggregate: SweepRecord,
    pub records: Vec<RunRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicrocanonicalResults {
    pub dim: usize,
    /// Largest `|p_k − 1/N|` over successful runs.
    pub max_population_deviation: f64,
    /// Largest `|S_E − ln N|` over successful runs.
    pub max_entropy_gap: f64,
    pub batch: Batch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalResults {
    pub target_energy: f64,
    /// Present when `--lambda` was given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<Batch>,
    /// Present when `--lambdas` was given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_sweep: Option<LambdaSweep>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrapeResults {
    pub dim: usize,
    pub fidelity: f64,
    /// Fidelity after writing the field to CSV and reading it back.
    pub reimport_fidelity: f64,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    /// Energy-basis populations of the final state.
    pub final_populations: Vec<f64>,
    pub max_population_deviation: f64,
    /// `C` of the final state, and of a static micro-canonical optimum of the
    /// same problem.
    pub coherence: f64,
    pub static_coherence: f64,
    pub dt: f64,
    pub amplitudes: Vec<f64>,
    pub fidelity_trace: Vec<f64>,
    /// Element magnitudes in the energy representation.
    pub rho_initial_abs: Vec<Vec<f64>>,
    pub rho_final_abs: Vec<Vec<f64>>,
    pub unitary_abs: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1Curve {
    pub j: f64,
    pub non_decreasing: bool,
    /// `C` at the smallest and largest `β₀` of the grid.
    pub c_first: f64,
    pub c_last: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1Results {
    pub curves: Vec<Fig1Curve>,
    pub records: Vec<SweepRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResults {
    pub argmax_o: (f64, f64),
    pub argmax_mu: (f64, f64),
    pub argmin_mu2_offdiag: (f64, f64),
    pub hot_target_corner: (f64, f64),
    pub corner_is_max: bool,
    pub o_and_mu_agree: bool,
    pub inverted_extremum: bool,
    pub max_abs_mu: f64,
    pub grid: GridSweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Results {
    Microcanonical(MicrocanonicalResults),
    Canonical(CanonicalResults),
    Grape(GrapeResults),
    Fig1(Fig1Results),
    Fig4(GridResults),
    Fig5(GridResults),
}

impl Summary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// `(file name, contents)` of every CSV derivable from the summary.
    pub fn csv_artifacts(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let Some(results) = &self.results else {
            return out;
        };
        match results {
            Results::Microcanonical(m) => out.push(("runs.csv", runs_csv(&m.batch.records))),
            Results::Canonical(c) => {
                if let Some(b) = &c.batch {
                    out.push(("runs.csv", runs_csv(&b.records)));
                    out.push(("fig2.csv", render(|w| hcsv::write_fig2(&b.records, w))));
                }
                if let Some(s) = &c.lambda_sweep {
                    out.push(("fig3.csv", render(|w| hcsv::write_fig3(s, w))));
                }
            }
            Results::Grape(g) => {
                if let Ok(field) = ControlField::new(g.dt, g.amplitudes.clone()) {
                    out.push(("field.csv", render(|w| field.write_csv(w))));
                }
                let mut trace = String::from("iteration,fidelity\n");
                for (k, f) in g.fidelity_trace.iter().enumerate() {
                    writeln!(trace, "{k},{}", fmt(*f)).unwrap();
                }
                out.push(("fidelity_trace.csv", trace));
                out.push(("rho_initial_abs.csv", table_csv(&g.rho_initial_abs)));
                out.push(("rho_final_abs.csv", table_csv(&g.rho_final_abs)));
                out.push(("unitary_abs.csv", table_csv(&g.unitary_abs)));
            }
            Results::Fig1(f) => out.push(("fig1.csv", render(|w| hcsv::write_fig1(&f.records, w)))),
            Results::Fig4(g) => out.push(("fig4.csv", render(|w| hcsv::write_grid(&g.grid, w)))),
            Results::Fig5(g) => out.push(("fig5.csv", render(|w| hcsv::write_grid(&g.grid, w)))),
        }
        out
    }

    /// Human-readable tables for the terminal.
    pub fn report(&self) -> String {
        let mut s = String::new();
        writeln!(s, "experiment: {}", self.experiment.name()).unwrap();
        writeln!(s, "status: {:?}", self.status).unwrap();
        if let Some(e) = &self.error {
            writeln!(s, "error: {e}").unwrap();
        }
        let Some(results) = &self.results else {
            return s;
        };
        match results {
            Results::Microcanonical(m) => {
                writeln!(s, "N = {}", m.dim).unwrap();
                writeln!(s, "max |p_k - 1/N| = {:.3e}", m.max_population_deviation).unwrap();
                writeln!(s, "max |S_E - ln N| = {:.3e}", m.max_entropy_gap).unwrap();
                batch_table(&mut s, &m.batch);
            }
            Results::Canonical(c) => {
                writeln!(s, "E_f = {:.10e}", c.target_energy).unwrap();
                if let Some(b) = &c.batch {
                    batch_table(&mut s, b);
                }
                if let Some(sw) = &c.lambda_sweep {
                    writeln!(s, "{:>10} {:>12} {:>9} {:>7} {:>12}", "lambda", "mean|sigma|", "clusters", "traps", "min overlap")
                        .unwrap();
                    for r in &sw.records {
                        writeln!(
                            s,
                            "{:>10.4} {:>12.4e} {:>9} {:>7} {:>12.8}",
                            r.lambda.unwrap_or(f64::NAN),
                            r.mean_sigma.unwrap_or(f64::NAN),
                            r.n_clusters,
                            r.n_traps,
                            r.sorted_overlaps.first().copied().unwrap_or(f64::NAN)
                        )
                        .unwrap();
                    }
                    match sw.lambda0 {
                        Some(l) => writeln!(s, "lambda0 = {l}").unwrap(),
                        None => writeln!(s, "lambda0 not reached (tolerance {:e})", sw.energy_tol).unwrap(),
                    }
                }
            }
            Results::Grape(g) => {
                writeln!(s, "N = {}, steps = {}, dt = {}", g.dim, g.amplitudes.len(), g.dt).unwrap();
                writeln!(s, "fidelity = {:.10} ({} iterations, {:?})", g.fidelity, g.iterations, g.termination).unwrap();
                writeln!(s, "re-imported field fidelity = {:.10}", g.reimport_fidelity).unwrap();
                writeln!(s, "max |p_k - 1/N| = {:.3e}", g.max_population_deviation).unwrap();
                writeln!(s, "C = {:.6e} (static optimum {:.6e})", g.coherence, g.static_coherence).unwrap();
                writeln!(s, "|rho_final| (energy representation):").unwrap();
                for row in &g.rho_final_abs {
                    let cells: Vec<String> = row.iter().map(|x| format!("{x:.4}")).collect();
                    writeln!(s, "  {}", cells.join(" ")).unwrap();
                }
            }
            Results::Fig1(f) => {
                writeln!(s, "{:>5} {:>10} {:>14}", "j", "beta0", "C_max").unwrap();
                for r in &f.records {
                    writeln!(s, "{:>5} {:>10.4} {:>14.6e}", r.j, r.beta0, r.c_best).unwrap();
                }
                for c in &f.curves {
                    writeln!(s, "j = {}: non-decreasing in beta0: {}", c.j, c.non_decreasing).unwrap();
                }
            }
            Results::Fig4(g) | Results::Fig5(g) => {
                writeln!(
                    s,
                    "{:>9} {:>9} {:>14} {:>14} {:>14}",
                    "beta0", "beta_F", "O_best", "mu_best", "mu2_offdiag"
                )
                .unwrap();
                for r in &g.grid.records {
                    writeln!(
                        s,
                        "{:>9.4} {:>9.4} {:>14.6e} {:>14.6e} {:>14.6e}",
                        r.beta0,
                        r.beta_f.unwrap_or(f64::NAN),
                        r.o_best.unwrap_or(f64::NAN),
                        r.mu_best,
                        r.mu2_offdiag_best
                    )
                    .unwrap();
                }
                writeln!(s, "argmax <O> at {:?}, corner {:?}", g.argmax_o, g.hot_target_corner).unwrap();
                writeln!(s, "argmax <O> = argmax <mu>: {}", g.o_and_mu_agree).unwrap();
                writeln!(s, "argmax <mu> = argmin off-diagonal <mu^2>: {}", g.inverted_extremum).unwrap();
                writeln!(s, "max |<mu>| = {:.3e}", g.max_abs_mu).unwrap();
            }
        }
        s
    }
}

fn render(f: impl FnOnce(&mut Vec<u8>) -> cohgen::Result<()>) -> String {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii csv")
}

pub const RUNS_HEADER: &str =
    "run_id,seed,converged,termination,iterations,objective,coherence,overlap,sigma,final_energy,energy_entropy,divergence";

fn runs_csv(records: &[RunRecord]) -> String {
    let opt = |x: Option<f64>| x.map(fmt).unwrap_or_default();
    let mut s = format!("{RUNS_HEADER}\n");
    for r in records {
        match &r.summary {
            Some(x) => writeln!(
                s,
                "{},{},{},{:?},{},{},{},{},{},{},{},{}",
                r.run_id,
                r.seed,
                x.converged,
                x.termination,
                x.iterations,
                fmt(x.objective_value),
                fmt(x.coherence),
                opt(x.overlap),
                opt(x.sigma),
                fmt(x.final_energy),
                fmt(x.energy_entropy),
                fmt(x.divergence)
            ),
            None => writeln!(s, "{},{},false,failed,0,,,,,,,", r.run_id, r.seed),
        }
        .unwrap();
    }
    s
}

fn table_csv(rows: &[Vec<f64>]) -> String {
    let mut s = String::new();
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| fmt(*x)).collect();
        writeln!(s, "{}", cells.join(",")).unwrap();
    }
    s
}

fn batch_table(s: &mut String, b: &Batch) {
    let a = &b.aggregate;
    writeln!(
        s,
        "runs: {} ({} converged, {} failed)",
        a.n_runs, a.n_converged, a.n_failed
    )
    .unwrap();
    writeln!(s, "best objective = {:.12}, C = {:.6e}", a.best_objective, a.c_best).unwrap();
    if let Some(m) = a.mean_sigma {
        writeln!(s, "mean |sigma| = {m:.3e}").unwrap();
    }
    writeln!(s, "clusters (value tol {:e}):", b.census.value_tol).unwrap();
    writeln!(s, "{:>6} {:>18} {:>14} {:>14}", "size", "objective", "overlap", "C").unwrap();
    for c in &b.census.clusters {
        writeln!(
            s,
            "{:>6} {:>18.12} {:>14.10} {:>14.6e}",
            c.size,
            c.value,
            c.overlap.unwrap_or(f64::NAN),
            c.coherence
        )
        .unwrap();
    }
    let sens: Vec<String> = b.census.sensitivity.iter().map(|(t, n)| format!("{t:e}:{n}")).collect();
    writeln!(s, "cluster count by tolerance: {}", sens.join(" ")).unwrap();
    if let (Some(v), Some(c)) = (a.overlap_partition_matches_value, a.overlap_partition_matches_coherence) {
        writeln!(s, "overlap plateaus match value plateaus: {v}, match C plateaus: {c}").unwrap();
    }
}
