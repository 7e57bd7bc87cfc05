use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MteError, Result};

/// Assignment of observations `0..N` to `K` cross-fitting folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPartition {
    assignments: Vec<usize>,
    k: usize,
    seed: u64,
}

impl FoldPartition {
    /// Builds a partition from explicit labels. Every fold `0..k` must be
    /// non-empty; sizes are not required to be balanced.
    pub fn from_assignments(assignments: Vec<usize>, k: usize, seed: u64) -> Result<Self> {
        if k < 2 || k > assignments.len() {
            return Err(MteError::InvalidArgument(format!("need 2 <= K <= N, got K = {k}, N = {}", assignments.len())));
        }
        let mut seen = vec![false; k];
        for &a in &assignments {
            if a >= k {
                return Err(MteError::InvalidArgument(format!("fold label {a} out of range for K = {k}")));
            }
            seen[a] = true;
        }
        if let Some(empty) = seen.iter().position(|&s| !s) {
            return Err(MteError::InvalidArgument(format!("fold {empty} is empty")));
        }
        Ok(FoldPartition { assignments, k, seed })
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Members of `fold` in ascending order.
    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    /// The auxiliary sample of `fold`: every observation outside it, in
    /// ascending order.
    pub fn complement(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Same index sets under new labels: fold `f` becomes `permutation[f]`.
    pub fn relabeled(&self, permutation: &[usize]) -> Result<Self> {
        let mut check = permutation.to_vec();
        check.sort_unstable();
        if check != (0..self.k).collect::<Vec<_>>() {
            return Err(MteError::InvalidArgument("relabeling must be a permutation of the fold labels".into()));
        }
        let assignments = self.assignments.iter().map(|&a| permutation[a]).collect();
        Ok(FoldPartition { assignments, k: self.k, seed: self.seed })
    }

    /// Fold labels ordered by their smallest member, so reductions do not
    /// depend on how folds are labeled.
    pub(crate) fn canonical_order(&self) -> Vec<usize> {
        let mut first = vec![usize::MAX; self.k];
        for (i, &a) in self.assignments.iter().enumerate() {
            first[a] = first[a].min(i);
        }
        let mut order: Vec<usize> = (0..self.k).collect();
        order.sort_by_key(|&f| first[f]);
        order
    }
}

/// Seeded uniform shuffle of `0..n` cut into `k` contiguous blocks; the
/// first `n mod k` folds get one extra element.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPartition> {
    if k < 2 || k > n {
        return Err(MteError::InvalidArgument(format!("need 2 <= K <= N, got K = {k}, N = {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut assignments = vec![0; n];
    let mut pos = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &i in &order[pos..pos + size] {
            assignments[i] = fold;
        }
        pos += size;
    }
    Ok(FoldPartition { assignments, k, seed })
}
