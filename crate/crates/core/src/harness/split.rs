use std::collections::{BTreeMap, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::HarnessError;
use crate::memory::{InteractionRecord, MemoryStore};

/// Users with fewer interactions are dropped.
pub const MIN_INTERACTIONS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct UserSplit {
    pub user_id: String,
    /// Chronological, without the held-out interaction.
    pub train: Vec<InteractionRecord>,
    pub test: InteractionRecord,
}

impl UserSplit {
    pub fn interacted(&self) -> HashSet<&str> {
        self.train
            .iter()
            .map(|r| r.item_id.as_str())
            .chain(std::iter::once(self.test.item_id.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub domain: String,
    /// Sorted by user id.
    pub users: Vec<UserSplit>,
    /// Users dropped for having fewer than [`MIN_INTERACTIONS`].
    pub insufficient_history: usize,
}

/// Leave-last-out: each user's latest interaction is the test target.
/// Ties on timestamp keep ingestion order.
pub fn split_dataset(store: &MemoryStore, domain: &str) -> Result<DatasetSplit, HarnessError> {
    let mut by_user: BTreeMap<String, Vec<InteractionRecord>> = BTreeMap::new();
    for r in store.domain_interactions(domain)? {
        by_user.entry(r.user_id.clone()).or_default().push(r);
    }
    let mut users = Vec::new();
    let mut insufficient_history = 0;
    for (user_id, mut records) in by_user {
        if records.len() < MIN_INTERACTIONS {
            insufficient_history += 1;
            continue;
        }
        let test = records.pop().expect("non-empty");
        users.push(UserSplit {
            user_id,
            train: records,
            test,
        });
    }
    Ok(DatasetSplit {
        domain: domain.to_string(),
        users,
        insufficient_history,
    })
}

/// `n` distinct items from `catalog` that are not in `interacted`, drawn
/// with a seeded generator. `catalog` order is part of the input; pass it
/// sorted for reproducibility.
pub fn sample_negatives(
    user_id: &str,
    catalog: &[String],
    interacted: &HashSet<&str>,
    n: usize,
    seed: u64,
) -> Result<Vec<String>, HarnessError> {
    let eligible: Vec<&String> = catalog
        .iter()
        .filter(|id| !interacted.contains(id.as_str()))
        .collect();
    if eligible.len() < n {
        return Err(HarnessError::InsufficientItems {
            user_id: user_id.to_string(),
            needed: n,
            available: eligible.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<String> = eligible
        .choose_multiple(&mut rng, n)
        .map(|s| (*s).clone())
        .collect();
    picked.shuffle(&mut rng);
    Ok(picked)
}

/// Negatives plus the positive at a seed-determined position.
pub fn sample_candidates(
    user_id: &str,
    catalog: &[String],
    interacted: &HashSet<&str>,
    positive: &str,
    n_negatives: usize,
    seed: u64,
) -> Result<Vec<String>, HarnessError> {
    let mut interacted = interacted.clone();
    interacted.insert(positive);
    let mut list = sample_negatives(user_id, catalog, &interacted, n_negatives, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let at = rng.random_range(0..=list.len());
    list.insert(at, positive.to_string());
    Ok(list)
}
