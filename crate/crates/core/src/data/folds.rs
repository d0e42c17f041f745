use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from, stream};

/// Index sets for one cross-validation fold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Fold {
    /// The held-out block (`val` plus `test`), sorted.
    pub fn held_out(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.val.iter().chain(&self.test).copied().collect();
        v.sort_unstable();
        v
    }
}

/// Stratified k-fold assignment.
///
/// Each class is shuffled and dealt round-robin into `k` blocks, with the
/// starting block rotating between classes so block sizes stay within one.
/// Block `f` is held out in fold `f`; per class, the first `ceil(n/2)` of its
/// held-out members go to `test` and the rest to `val`.
pub fn stratified_kfold(labels: &[usize], num_classes: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Config(format!("k-fold needs k >= 2, got {k}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= num_classes {
            return Err(Error::Config(format!("label {y} outside {num_classes} classes")));
        }
        by_class[y].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            return Err(Error::Config(format!("class {c} has {} members, fewer than k = {k}", members.len())));
        }
    }
    let mut rng = rng_from(derive_seed(seed, stream::FOLDS));
    // blocks[f][c] = members of class c held out in fold f
    let mut blocks: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); num_classes]; k];
    let mut cursor = 0;
    for (c, members) in by_class.iter_mut().enumerate() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            blocks[cursor % k][c].push(i);
            cursor += 1;
        }
    }
    let folds = (0..k)
        .map(|f| {
            let mut test = Vec::new();
            let mut val = Vec::new();
            for members in &blocks[f] {
                let cut = members.len().div_ceil(2);
                test.extend_from_slice(&members[..cut]);
                val.extend_from_slice(&members[cut..]);
            }
            let mut held = vec![false; labels.len()];
            for &i in test.iter().chain(&val) {
                held[i] = true;
            }
            let train = (0..labels.len()).filter(|&i| !held[i]).collect();
            test.sort_unstable();
            val.sort_unstable();
            Fold { train, val, test }
        })
        .collect();
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_ten_over_five() {
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let folds = stratified_kfold(&labels, 2, 5, 1).unwrap();
        for f in &folds {
            let mut per_class = [0; 2];
            for &i in &f.test {
                per_class[labels[i]] += 1;
            }
            assert_eq!(per_class, [1, 1]);
            assert_eq!(f.train.len(), 8);
        }
    }

    #[test]
    fn held_out_blocks_partition() {
        let labels: Vec<usize> = (0..37).map(|i| i % 3).collect();
        let folds = stratified_kfold(&labels, 3, 4, 9).unwrap();
        let mut seen = [0; 37];
        for f in &folds {
            for i in f.held_out() {
                seen[i] += 1;
            }
            let mut all: Vec<usize> = f.train.iter().chain(&f.val).chain(&f.test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..37).collect::<Vec<_>>());
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn proportions_within_one_sample() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 90)).collect();
        let folds = stratified_kfold(&labels, 2, 5, 3).unwrap();
        for f in &folds {
            let held = f.held_out();
            let minority = held.iter().filter(|&&i| labels[i] == 1).count();
            assert!((minority as i64 - 2).abs() <= 1);
            assert!(f.train.iter().any(|&i| labels[i] == 0));
            assert!(f.train.iter().any(|&i| labels[i] == 1));
        }
    }

    #[test]
    fn too_few_members_is_config_error() {
        let labels = vec![0, 0, 0, 0, 0, 1];
        assert!(matches!(stratified_kfold(&labels, 2, 2, 0), Err(Error::Config(_))));
        assert!(stratified_kfold(&labels, 2, 1, 0).is_err());
    }

    #[test]
    fn deterministic_for_seed() {
        let labels: Vec<usize> = (0..30).map(|i| i % 2).collect();
        assert_eq!(stratified_kfold(&labels, 2, 3, 5).unwrap(), stratified_kfold(&labels, 2, 3, 5).unwrap());
        assert_ne!(stratified_kfold(&labels, 2, 3, 5).unwrap(), stratified_kfold(&labels, 2, 3, 6).unwrap());
    }
}
