use serde::{Deserialize, Serialize};

use crate::error::{CohError, Result};
use crate::uopt::{Coupling, OptimizerOptions, TargetEnergy};

use super::census::{cluster_labels, same_partition, trap_census};
use super::{multistart, summaries, ObjectiveKindSpec, ObjectiveSpec, RunRecord, RunSummary};

/// Aggregate of one batch at one sweep coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub j: f64,
    pub beta0: f64,
    pub beta_f: Option<f64>,
    pub lambda: Option<f64>,
    pub n_runs: usize,
    pub n_failed: usize,
    pub n_converged: usize,
    /// Quantities at the run with the largest objective value.
    pub best_objective: f64,
    pub c_best: f64,
    pub o_best: Option<f64>,
    pub mu_best: f64,
    pub mu2_offdiag_best: f64,
    /// Mean of `|σ|` over successful runs.
    pub mean_sigma: Option<f64>,
    /// Overlaps of successful runs, ascending.
    pub sorted_overlaps: Vec<f64>,
    pub n_clusters: usize,
    pub n_traps: usize,
    /// Whether clustering converged runs by overlap reproduces the clustering
    /// by objective value.
    pub overlap_partition_matches_value: Option<bool>,
    /// Whether clustering by overlap reproduces the clustering by `C`.
    pub overlap_partition_matches_coherence: Option<bool>,
}

/// Clustering tolerances used by the aggregates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub value: f64,
    pub overlap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            value: super::DEFAULT_VALUE_TOL,
            overlap: super::DEFAULT_OVERLAP_TOL,
        }
    }
}

/// Best-run quantities, `|σ|` mean, census and partition checks of one batch.
pub fn aggregate(spec: &ObjectiveSpec, records: &[RunRecord], tol: Tolerances) -> Result<SweepRecord> {
    let ok: Vec<&RunSummary> = summaries(records).collect();
    let best = ok
        .iter()
        .max_by(|a, b| a.objective_value.total_cmp(&b.objective_value))
        .ok_or_else(|| CohError::NonFinite(format!("every run failed for {spec:?}")))?;
    let (beta_f, lambda) = match spec.objective {
        ObjectiveKindSpec::Unconstrained => (None, None),
        ObjectiveKindSpec::EnergyConstrained { target, lambda, .. } => match target {
            TargetEnergy::Beta(b) => (Some(b), Some(lambda)),
            TargetEnergy::Energy(_) => (None, Some(lambda)),
        },
        ObjectiveKindSpec::Generalized { constraint, .. } => (constraint.map(|c| c.0), constraint.map(|c| c.1)),
    };
    let sigmas: Vec<f64> = ok.iter().filter_map(|s| s.sigma).map(f64::abs).collect();
    let mut sorted_overlaps: Vec<f64> = ok.iter().filter_map(|s| s.overlap).collect();
    sorted_overlaps.sort_by(f64::total_cmp);

    let converged: Vec<&RunSummary> = ok.iter().copied().filter(|s| s.converged).collect();
    let census = trap_census(records, tol.value)?;
    let (by_value, by_coherence) = if converged.iter().all(|s| s.overlap.is_some()) && !converged.is_empty() {
        let labels = |xs: Vec<f64>, t: f64| cluster_labels(&xs, t);
        let ov = labels(converged.iter().map(|s| s.overlap.unwrap()).collect(), tol.overlap);
        let val = labels(converged.iter().map(|s| s.objective_value).collect(), tol.value);
        let coh = labels(converged.iter().map(|s| s.coherence).collect(), tol.overlap);
        (Some(same_partition(&ov, &val)), Some(same_partition(&ov, &coh)))
    } else {
        (None, None)
    };

    Ok(SweepRecord {
        j: spec.j,
        beta0: spec.beta0,
        beta_f,
        lambda,
        n_runs: records.len(),
        n_failed: records.len() - ok.len(),
        n_converged: converged.len(),
        best_objective: best.objective_value,
        c_best: best.coherence,
        o_best: best.target_expectation,
        mu_best: best.mu,
        mu2_offdiag_best: best.mu2_offdiag,
        mean_sigma: (!sigmas.is_empty()).then(|| sigmas.iter().sum::<f64>() / sigmas.len() as f64),
        sorted_overlaps,
        n_clusters: census.n_clusters,
        n_traps: census.n_traps,
        overlap_partition_matches_value: by_value,
        overlap_partition_matches_coherence: by_coherence,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweep {
    /// One record per multiplier, ascending in `λ`.
    pub records: Vec<SweepRecord>,
    pub energy_tol: f64,
    /// Smallest `λ` whose mean `|σ|` is below `energy_tol`.
    pub lambda0: Option<f64>,
}

impl LambdaSweep {
    pub fn record_at(&self, lambda: f64) -> Option<&SweepRecord> {
        self.records.iter().find(|r| r.lambda == Some(lambda))
    }

    /// Mean `|σ|` never increases from the smallest `λ` up to `λ₀`.
    pub fn sigma_non_increasing_to_lambda0(&self) -> bool {
        let Some(l0) = self.lambda0 else { return false };
        let sig: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.lambda.is_some_and(|l| l <= l0))
            .filter_map(|r| r.mean_sigma)
            .collect();
        sig.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Energy-constrained batches at each `λ`, sharing the seeds `seed0…`.
pub fn lambda_sweep(
    base: &ObjectiveSpec,
    lambdas: &[f64],
    n_runs: usize,
    seed0: u64,
    opts: &OptimizerOptions,
    energy_tol: f64,
    tol: Tolerances,
) -> Result<LambdaSweep> {
    let ObjectiveKindSpec::EnergyConstrained { target, penalty, .. } = base.objective else {
        return Err(CohError::Domain("lambda sweep needs an energy-constrained objective".into()));
    };
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l >= 0.0)) {
        return Err(CohError::Domain("lambda list must be nonempty and non-negative".into()));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let records = sorted
        .iter()
        .map(|&lambda| {
            let spec = ObjectiveSpec {
                objective: ObjectiveKindSpec::EnergyConstrained { target, lambda, penalty },
                ..base.clone()
            };
            aggregate(&spec, &multistart(&spec, n_runs, seed0, opts)?, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    let lambda0 = records
        .iter()
        .find(|r| r.mean_sigma.is_some_and(|s| s < energy_tol))
        .and_then(|r| r.lambda);
    Ok(LambdaSweep {
        records,
        energy_tol,
        lambda0,
    })
}

/// Unconstrained optimum's `C` for every `(j, β₀)`.
pub fn beta_sweep_max_c(
    js: &[f64],
    beta0s: &[f64],
    n_runs: usize,
    seed0: u64,
    opts: &OptimizerOptions,
) -> Result<Vec<SweepRecord>> {
    if js.is_empty() || beta0s.is_empty() {
        return Err(CohError::Domain("beta sweep needs nonempty grids".into()));
    }
    let mut out = Vec::with_capacity(js.len() * beta0s.len());
    for &j in js {
        for &beta0 in beta0s {
            let spec = ObjectiveSpec::unconstrained(j, beta0);
            out.push(aggregate(&spec, &multistart(&spec, n_runs, seed0, opts)?, Tolerances::default())?);
        }
    }
    Ok(out)
}

/// Whether a per-`j` curve of `C` is non-decreasing in `β₀`.
pub fn c_non_decreasing(records: &[SweepRecord], j: f64) -> bool {
    let mut curve: Vec<(f64, f64)> = records.iter().filter(|r| r.j == j).map(|r| (r.beta0, r.c_best)).collect();
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    curve.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-9)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSweep {
    pub j: f64,
    pub alpha: f64,
    pub coupling: Coupling,
    pub lambda: f64,
    /// Row-major over `β₀`, then `β_F`.
    pub records: Vec<SweepRecord>,
}

impl GridSweep {
    fn arg(&self, key: impl Fn(&SweepRecord) -> f64, max: bool) -> (f64, f64) {
        let pick = self
            .records
            .iter()
            .max_by(|a, b| {
                let o = key(a).total_cmp(&key(b));
                if max { o } else { o.reverse() }
            })
            .expect("grid is nonempty");
        (pick.beta0, pick.beta_f.expect("grid cells carry beta_f"))
    }

    /// `(β₀, β_F)` of the cell with the largest best `⟨O⟩`.
    pub fn argmax_o(&self) -> (f64, f64) {
        self.arg(|r| r.o_best.unwrap_or(f64::NEG_INFINITY), true)
    }

    pub fn argmax_mu(&self) -> (f64, f64) {
        self.arg(|r| r.mu_best, true)
    }

    pub fn argmin_mu2_offdiag(&self) -> (f64, f64) {
        self.arg(|r| r.mu2_offdiag_best, false)
    }

    /// `(max β₀, min β_F)`.
    pub fn hot_target_corner(&self) -> (f64, f64) {
        let b0 = self.records.iter().map(|r| r.beta0).fold(f64::NEG_INFINITY, f64::max);
        let bf = self.records.iter().filter_map(|r| r.beta_f).fold(f64::INFINITY, f64::min);
        (b0, bf)
    }

    pub fn corner_is_max(&self) -> bool {
        self.argmax_o() == self.hot_target_corner()
    }

    pub fn o_and_mu_agree(&self) -> bool {
        self.argmax_o() == self.argmax_mu()
    }

    /// The `⟨μ⟩` maximum sits where the off-diagonal `⟨μ²⟩` is smallest.
    pub fn inverted_extremum(&self) -> bool {
        self.argmax_mu() == self.argmin_mu2_offdiag()
    }

    pub fn max_abs_mu(&self) -> f64 {
        self.records.iter().map(|r| r.mu_best.abs()).fold(0.0, f64::max)
    }
}

/// Energy-constrained `⟨O⟩` optimization on a `(β₀, β_F)` grid.
#[allow(clippy::too_many_arguments)]
pub fn grid_sweep_o(
    j: f64,
    alpha: f64,
    coupling: Coupling,
    beta0s: &[f64],
    beta_fs: &[f64],
    lambda: f64,
    n_runs: usize,
    seed0: u64,
    opts: &OptimizerOptions,
) -> Result<GridSweep> {
    if beta0s.is_empty() || beta_fs.is_empty() {
        return Err(CohError::Domain("grid sweep needs nonempty grids".into()));
    }
    let mut records = Vec::with_capacity(beta0s.len() * beta_fs.len());
    for &beta0 in beta0s {
        for &beta_f in beta_fs {
            let spec = ObjectiveSpec::generalized(j, beta0, alpha, coupling, Some((beta_f, lambda)));
            records.push(aggregate(&spec, &multistart(&spec, n_runs, seed0, opts)?, Tolerances::default())?);
        }
    }
    Ok(GridSweep {
        j,
        alpha,
        coupling,
        lambda,
        records,
    })
}

/// `n` points spaced evenly in `ln β` over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}
