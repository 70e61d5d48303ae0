use serde::{Deserialize, Serialize};

use crate::error::{CohError, Result};

use super::RunRecord;

/// Tolerances at which the cluster count is re-evaluated for the sensitivity report.
pub const SENSITIVITY_TOLS: [f64; 5] = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub size: usize,
    /// Objective value of the best member.
    pub value: f64,
    pub overlap: Option<f64>,
    pub coherence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapCensus {
    pub value_tol: f64,
    pub n_clusters: usize,
    /// Clusters below the best one.
    pub n_traps: usize,
    /// Best cluster first.
    pub clusters: Vec<Cluster>,
    /// `(tolerance, cluster count)` pairs.
    pub sensitivity: Vec<(f64, usize)>,
    /// Records left out because they failed or hit the iteration limit.
    pub n_excluded: usize,
}

/// Single-linkage clustering of scalars: sorted descending, a gap larger than
/// `tol` starts a new cluster. Label 0 is the cluster with the largest values.
pub fn cluster_labels(values: &[f64], tol: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut labels = vec![0; values.len()];
    let mut label = 0;
    for w in 0..order.len() {
        if w > 0 && values[order[w - 1]] - values[order[w]] > tol {
            label += 1;
        }
        labels[order[w]] = label;
    }
    labels
}

/// Whether two labelings of the same items induce the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    use std::collections::HashMap;
    if a.len() != b.len() {
        return false;
    }
    let mut ab = HashMap::new();
    let mut ba = HashMap::new();
    a.iter()
        .zip(b)
        .all(|(x, y)| *ab.entry(x).or_insert(y) == y && *ba.entry(y).or_insert(x) == x)
}

/// Clusters the converged runs by objective value.
pub fn trap_census(records: &[RunRecord], value_tol: f64) -> Result<TrapCensus> {
    if records.is_empty() {
        return Err(CohError::Domain("trap census needs at least one record".into()));
    }
    let members: Vec<_> = records
        .iter()
        .filter_map(|r| r.summary.as_ref().filter(|s| s.converged))
        .collect();
    let values: Vec<f64> = members.iter().map(|s| s.objective_value).collect();
    let count = |tol: f64| cluster_labels(&values, tol).iter().max().map_or(0, |m| m + 1);
    let labels = cluster_labels(&values, value_tol);
    let n_clusters = count(value_tol);
    let mut clusters: Vec<Option<Cluster>> = vec![None; n_clusters];
    for (s, &l) in members.iter().zip(&labels) {
        let c = clusters[l].get_or_insert(Cluster {
            size: 0,
            value: s.objective_value,
            overlap: s.overlap,
            coherence: s.coherence,
        });
        c.size += 1;
        if s.objective_value > c.value {
            c.value = s.objective_value;
            c.overlap = s.overlap;
            c.coherence = s.coherence;
        }
    }
    Ok(TrapCensus {
        value_tol,
        n_clusters,
        n_traps: n_clusters.saturating_sub(1),
        clusters: clusters.into_iter().map(|c| c.expect("every label used")).collect(),
        sensitivity: SENSITIVITY_TOLS.iter().map(|&t| (t, count(t))).collect(),
        n_excluded: records.len() - members.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{ObjectiveSpec, RunSummary};
    use crate::optimizer::Termination;

    fn record(value: f64) -> RunRecord {
        RunRecord {
            run_id: 0,
            seed: 0,
            spec: ObjectiveSpec::unconstrained(1.0, 1.0),
            summary: Some(RunSummary {
                objective_value: value,
                overlap: Some(value / 2.0),
                coherence: value,
                sigma: None,
                converged: true,
                termination: Termination::GradientTolerance,
                iterations: 1,
                final_energy: 0.0,
                energy_entropy: value,
                divergence: 0.0,
                mu: 0.0,
                mu2_offdiag: 0.0,
                target_expectation: None,
                final_populations: vec![],
                generator: vec![],
            }),
            error: None,
        }
    }

    #[test]
    fn census_examples() {
        let same: Vec<_> = (0..5).map(|_| record(0.7)).collect();
        assert_eq!(trap_census(&same, 1e-4).unwrap().n_clusters, 1);

        let recs = vec![record(1.0), record(1.0), record(0.5)];
        let c = trap_census(&recs, 1e-4).unwrap();
        assert_eq!(c.n_clusters, 2);
        assert_eq!(c.n_traps, 1);
        let sizes: Vec<_> = c.clusters.iter().map(|c| c.size).collect();
        assert_eq!(sizes, vec![2, 1]);
        assert_eq!(c.clusters[1].value, 0.5);
        assert!(trap_census(&[], 1e-4).is_err());
    }

    #[test]
    fn non_converged_runs_are_excluded() {
        let mut bad = record(0.1);
        bad.summary.as_mut().unwrap().converged = false;
        let failed = RunRecord {
            summary: None,
            error: Some("boom".into()),
            ..record(0.0)
        };
        let c = trap_census(&[record(1.0), bad, failed], 1e-4).unwrap();
        assert_eq!(c.n_clusters, 1);
        assert_eq!(c.n_excluded, 2);
    }

    #[test]
    fn sensitivity_is_non_increasing_in_tolerance() {
        let recs: Vec<_> = [1.0, 0.99999, 0.9999, 0.999, 0.99].iter().map(|&v| record(v)).collect();
        let c = trap_census(&recs, 1e-4).unwrap();
        let counts: Vec<_> = c.sensitivity.iter().map(|(_, n)| *n).collect();
        assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
        assert_eq!(counts[0], 5);
    }

    #[test]
    fn partitions() {
        let a = cluster_labels(&[0.1, 0.5, 0.1005, 0.9], 1e-3);
        assert_eq!(a, vec![2, 1, 2, 0]);
        assert!(same_partition(&a, &[7, 3, 7, 1]));
        assert!(!same_partition(&a, &[7, 3, 3, 1]));
        assert!(!same_partition(&a, &[0, 0, 0, 0]));
    }
}
