use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Fold membership of every record for one or more shuffled repeats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// `assignments[repeat][record]` is the record's test fold.
    pub assignments: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn repeats(&self) -> usize {
        self.assignments.len()
    }

    pub fn test_indices(&self, repeat: usize, fold: usize) -> Vec<usize> {
        self.assignments[repeat]
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| (f == fold).then_some(i))
            .collect()
    }

    pub fn train_indices(&self, repeat: usize, fold: usize) -> Vec<usize> {
        self.assignments[repeat]
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| (f != fold).then_some(i))
            .collect()
    }

    /// `repeats` independent stratified plans; repeat `r` draws from the
    /// stream derived from `(seed, r)`.
    pub fn repeated(labels: &[bool], k: usize, repeats: usize, seed: u64) -> Result<Self> {
        let mut assignments = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let mut rng = RngStream::derived(seed, &[r as u64]);
            assignments.push(stratified_kfold(labels, k, &mut rng)?.assignments.remove(0));
        }
        Ok(Self { k, assignments })
    }
}

/// One stratified repeat: positives and negatives are shuffled separately
/// and dealt round-robin, negatives continuing where positives stopped.
pub fn stratified_kfold(labels: &[bool], k: usize, rng: &mut RngStream) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Domain(format!("k must be at least 2, got {k}")));
    }
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Domain("stratification needs both classes".into()));
    }
    if k > pos.len().min(neg.len()) {
        return Err(Error::Domain(format!(
            "k = {k} exceeds the smaller class count ({})",
            pos.len().min(neg.len())
        )));
    }
    rng.shuffle(&mut pos);
    rng.shuffle(&mut neg);
    let mut fold_of = vec![0; labels.len()];
    for (slot, &i) in pos.iter().chain(&neg).enumerate() {
        fold_of[i] = slot % k;
    }
    Ok(FoldPlan {
        k,
        assignments: vec![fold_of],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_per_fold() {
        let labels: Vec<bool> = (0..1000).map(|i| i < 415).collect();
        let plan = stratified_kfold(&labels, 10, &mut RngStream::new(1)).unwrap();
        for f in 0..10 {
            let test = plan.test_indices(0, f);
            let p = test.iter().filter(|&&i| labels[i]).count();
            assert!(p == 41 || p == 42, "fold {f}: {p}");
            assert_eq!(test.len(), 100);
        }
    }

    #[test]
    fn two_folds_of_four() {
        let labels = [true, false, true, false];
        let plan = stratified_kfold(&labels, 2, &mut RngStream::new(9)).unwrap();
        for f in 0..2 {
            let t = plan.test_indices(0, f);
            assert_eq!(t.len(), 2);
            assert_eq!(t.iter().filter(|&&i| labels[i]).count(), 1);
        }
    }

    #[test]
    fn deterministic() {
        let labels: Vec<bool> = (0..97).map(|i| i % 3 == 0).collect();
        let a = FoldPlan::repeated(&labels, 5, 3, 77).unwrap();
        let b = FoldPlan::repeated(&labels, 5, 3, 77).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.assignments[0], a.assignments[1]);
    }

    #[test]
    fn errors() {
        let mut rng = RngStream::new(0);
        assert!(stratified_kfold(&[true, false], 1, &mut rng).is_err());
        assert!(stratified_kfold(&[true, true, true], 2, &mut rng).is_err());
        assert!(stratified_kfold(&[true, false, false, false], 2, &mut rng).is_err());
    }

    proptest::proptest! {
        #[test]
        fn partitions_and_balances(
            labels in proptest::collection::vec(proptest::bool::ANY, 20..300),
            k in 2usize..8,
            seed in 0u64..1000,
        ) {
            let npos = labels.iter().filter(|&&l| l).count();
            proptest::prop_assume!(npos >= k && labels.len() - npos >= k);
            let plan = stratified_kfold(&labels, k, &mut RngStream::new(seed)).unwrap();
            let mut seen = vec![0; labels.len()];
            let mut pos_counts = Vec::new();
            let mut neg_counts = Vec::new();
            for f in 0..k {
                let t = plan.test_indices(0, f);
                for &i in &t { seen[i] += 1; }
                pos_counts.push(t.iter().filter(|&&i| labels[i]).count());
                neg_counts.push(t.iter().filter(|&&i| !labels[i]).count());
            }
            proptest::prop_assert!(seen.iter().all(|&c| c == 1));
            for c in [&pos_counts, &neg_counts] {
                let (lo, hi) = (c.iter().min().unwrap(), c.iter().max().unwrap());
                proptest::prop_assert!(hi - lo <= 1);
            }
        }
    }
}
