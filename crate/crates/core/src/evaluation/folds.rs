use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subject-to-fold map. Every subject sits in exactly one fold and fold
/// sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub fold_of: BTreeMap<String, usize>,
}

impl FoldAssignment {
    /// Subjects of `fold`, sorted.
    pub fn members(&self, fold: usize) -> Vec<String> {
        self.fold_of
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(s, _)| s.clone())
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.fold_of.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded shuffle followed by round-robin assignment. The result does not
/// depend on the order of `subject_ids`.
pub fn split_subject_folds(subject_ids: &[String], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k == 0 {
        return Err(Error::arg("split_subject_folds: k must be >= 1"));
    }
    let mut ids: Vec<&String> = subject_ids.iter().collect();
    ids.sort();
    ids.dedup();
    if ids.len() != subject_ids.len() {
        return Err(Error::arg("split_subject_folds: duplicate subject ids"));
    }
    if ids.len() < k {
        return Err(Error::arg(format!(
            "split_subject_folds: {} subjects for {k} folds",
            ids.len()
        )));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of = ids
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i % k))
        .collect();
    Ok(FoldAssignment { k, seed, fold_of })
}
