use serde::{Deserialize, Serialize};

use super::{assign_clusters, fit_cart, CartParams};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::model::Hyperparams;
use crate::numerics::derive_seed;
use crate::parallel::par_map;
use crate::trainer::train;

/// Deepest node level counted as "top of the tree".
pub const TOP_LEVEL_DEPTH: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrequency {
    pub runs_requested: usize,
    pub runs_completed: usize,
    /// `(run, error)` for runs that failed.
    pub failures: Vec<(usize, String)>,
    /// Schema order; share of completed runs whose top levels used the feature.
    pub frequency: Vec<(String, f64)>,
    pub accuracies: Vec<f64>,
}

/// Retrains the model `runs` times with derived seeds, clusters the full
/// dataset, fits a surrogate tree on raw features and counts which features
/// appear at depth `<= 2`.
pub fn tree_feature_frequency(
    dataset: &Dataset,
    h: &Hyperparams,
    runs: usize,
    cart: &CartParams,
    jobs: usize,
) -> Result<FeatureFrequency> {
    if runs == 0 {
        return Err(Error::Domain("runs must be at least 1".into()));
    }
    let x = dataset.feature_rows()?;
    let ids: Vec<usize> = (0..runs).collect();
    let outcomes = par_map(jobs, &ids, |&run| -> Result<(Vec<usize>, f64)> {
        let hr = Hyperparams {
            seed: derive_seed(h.seed, &[run as u64]),
            ..h.clone()
        };
        let model = train(dataset, &hr)?.model;
        let clusters = assign_clusters(&model, dataset)?;
        let (tree, acc) = fit_cart(&x, &clusters, cart)?;
        Ok((
            tree.features_up_to(TOP_LEVEL_DEPTH).into_iter().collect(),
            acc,
        ))
    })?;
    let used: Vec<Vec<usize>> = outcomes
        .iter()
        .filter_map(|o| o.as_ref().ok())
        .map(|(f, _)| f.clone())
        .collect();
    let accuracies = outcomes
        .iter()
        .filter_map(|o| o.as_ref().ok())
        .map(|(_, a)| *a)
        .collect();
    let failures = outcomes
        .iter()
        .enumerate()
        .filter_map(|(i, o)| o.as_ref().err().map(|e| (i, e.to_string())))
        .collect();
    Ok(FeatureFrequency {
        runs_requested: runs,
        runs_completed: used.len(),
        failures,
        frequency: frequency_table(
            &dataset
                .schema
                .names()
                .map(str::to_string)
                .collect::<Vec<_>>(),
            &used,
        ),
        accuracies,
    })
}

/// Share of `runs` containing each feature index.
pub fn frequency_table(names: &[String], runs: &[Vec<usize>]) -> Vec<(String, f64)> {
    names
        .iter()
        .enumerate()
        .map(|(f, name)| {
            let hits = runs.iter().filter(|r| r.contains(&f)).count();
            let share = if runs.is_empty() {
                0.0
            } else {
                hits as f64 / runs.len() as f64
            };
            (name.clone(), share)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_run_table() {
        let names: Vec<String> = ["fatigue", "age"].iter().map(|s| s.to_string()).collect();
        let t = frequency_table(&names, &[vec![0]]);
        assert_eq!(
            t,
            vec![("fatigue".to_string(), 1.0), ("age".to_string(), 0.0)]
        );
        let t = frequency_table(&names, &[vec![0, 1], vec![0]]);
        assert_eq!(t[1].1, 0.5);
    }
}
