use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::predict::{filter_summarization_tests, is_auto_title};
use super::prompt::{item_list, task_question};
use super::split::{sample_candidates, split_dataset, DatasetSplit, UserSplit};
use super::{ExemplarConfig, ExemplarMode, GroundTruth, HarnessError, Shot, TaskInstance, TaskKind};
use crate::memory::{InteractionRecord, MemoryStore};

/// Items of history shown in a sequential exemplar.
const SHOT_HISTORY: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceConfig {
    pub seed: u64,
    /// Keep at most this many instances.
    pub limit: Option<usize>,
    /// Negatives per DirectRec instance.
    pub negatives: usize,
    pub exemplars: ExemplarConfig,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            limit: None,
            negatives: 99,
            exemplars: ExemplarConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSet {
    pub instances: Vec<TaskInstance>,
    /// Users dropped by the split.
    pub insufficient_history: usize,
    /// Test interactions lacking the text a task needs.
    pub missing_text: usize,
    /// Summarization targets removed by the auto-title blocklist.
    pub auto_titles: usize,
}

fn instance_seed(base: u64, user_index: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(user_index as u64 + 1)
}

fn nonblank(s: &Option<String>) -> Option<&str> {
    s.as_deref().map(str::trim).filter(|t| !t.is_empty())
}

fn format_rating(r: f64) -> String {
    if r.fract() == 0.0 {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

struct Pool<'a> {
    split: &'a DatasetSplit,
    titles: &'a HashMap<String, String>,
}

impl Pool<'_> {
    fn title<'t>(&'t self, id: &'t str) -> &'t str {
        self.titles.get(id).map_or(id, String::as_str)
    }

    /// Exemplar built from `user.train[j]`, if that interaction supports one.
    fn shot(&self, task: TaskKind, user: &UserSplit, j: usize) -> Option<Shot> {
        let r: &InteractionRecord = &user.train[j];
        let uid = &user.user_id;
        let title = self.title(&r.item_id);
        Some(match task {
            TaskKind::RatingPrediction => Shot {
                question: task_question(task, uid, title, "", ""),
                answer: format_rating(r.rating),
            },
            TaskKind::SequentialRec | TaskKind::DirectRec => {
                if j == 0 {
                    return None;
                }
                let from = j.saturating_sub(SHOT_HISTORY);
                let items = item_list(user.train[from..j].iter().map(|h| self.title(&h.item_id)));
                Shot {
                    question: task_question(TaskKind::SequentialRec, uid, "", &items, ""),
                    answer: title.to_string(),
                }
            }
            TaskKind::ExplanationGen => Shot {
                question: task_question(task, uid, title, "", ""),
                answer: nonblank(&r.review_text)?.to_string(),
            },
            TaskKind::ReviewSummarization => {
                let summary = nonblank(&r.review_title).filter(|t| !is_auto_title(t))?;
                Shot {
                    question: task_question(task, uid, title, "", nonblank(&r.review_text)?),
                    answer: summary.to_string(),
                }
            }
        })
    }

    /// Up to `count` exemplars from one user, newest first.
    fn user_shots(&self, task: TaskKind, user: &UserSplit, count: usize, target: &Target<'_>) -> Vec<Shot> {
        (0..user.train.len())
            .rev()
            .filter(|&j| user.train[j].item_id != target.item_id)
            .filter_map(|j| self.shot(task, user, j))
            .filter(|s| !target.leaks(s))
            .take(count)
            .collect()
    }
}

struct Target<'a> {
    item_id: &'a str,
    title: &'a str,
}

impl Target<'_> {
    fn leaks(&self, shot: &Shot) -> bool {
        shot.question.contains(self.title) || shot.answer.contains(self.title)
    }
}

/// Exemplars for one evaluation user: the user's own training
/// interactions first (in-domain only), then one exemplar per nearest user
/// by training-set size.
fn select_shots(
    task: TaskKind,
    config: &ExemplarConfig,
    user: &UserSplit,
    pool: &Pool<'_>,
    target: &Target<'_>,
) -> Vec<Shot> {
    let count = config.shot_count;
    if count == 0 {
        return Vec::new();
    }
    let mut shots = Vec::new();
    if config.mode == ExemplarMode::InDomain {
        shots = pool.user_shots(task, user, count, target);
    }
    let mut others: Vec<&UserSplit> = pool
        .split
        .users
        .iter()
        .filter(|u| config.mode == ExemplarMode::Transfer || u.user_id != user.user_id)
        .collect();
    others.sort_by_key(|u| {
        (
            u.user_id != user.user_id,
            u.train.len().abs_diff(user.train.len()),
            u.user_id.clone(),
        )
    });
    for other in others {
        if shots.len() >= count {
            break;
        }
        let take = if other.user_id == user.user_id { count - shots.len() } else { 1 };
        shots.extend(pool.user_shots(task, other, take, target));
    }
    shots.truncate(count);
    shots.reverse();
    shots
}

/// Builds evaluation instances for one task and domain.
///
/// Users are visited in a seeded order; each contributes at most one
/// instance. Per-instance seeds depend on the user's position in the
/// sorted split, so `limit` does not change the instances it keeps.
pub fn make_instances(
    store: &MemoryStore,
    task: TaskKind,
    domain: &str,
    config: &InstanceConfig,
) -> Result<InstanceSet, HarnessError> {
    config.exemplars.validate(domain)?;
    let split = split_dataset(store, domain)?;
    let items = store.domain_items(domain)?;
    let titles: HashMap<String, String> = items.iter().map(|i| (i.item_id.clone(), i.title.clone())).collect();
    let mut catalog: Vec<String> = items.into_iter().map(|i| i.item_id).collect();
    catalog.sort();

    let source = match (&config.exemplars.mode, &config.exemplars.source_domain) {
        (ExemplarMode::Transfer, Some(src)) => {
            let split = split_dataset(store, src)?;
            let titles: HashMap<String, String> = store
                .domain_items(src)?
                .into_iter()
                .map(|i| (i.item_id, i.title))
                .collect();
            Some((split, titles))
        }
        _ => None,
    };
    let pool = match &source {
        Some((split, titles)) => Pool { split, titles },
        None => Pool {
            split: &split,
            titles: &titles,
        },
    };

    let mut order: Vec<usize> = (0..split.users.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));

    let mut instances = Vec::new();
    let mut missing_text = 0;
    for user_index in order {
        if config.limit.is_some_and(|l| instances.len() >= l) {
            break;
        }
        let user = &split.users[user_index];
        let test = &user.test;
        let seed = instance_seed(config.seed, user_index);
        let text = |s: &Option<String>| nonblank(s).map(str::to_string);
        let (ground_truth, review) = match task {
            TaskKind::RatingPrediction => (GroundTruth::Rating(test.rating), None),
            TaskKind::SequentialRec | TaskKind::DirectRec => (GroundTruth::Item(test.item_id.clone()), None),
            TaskKind::ExplanationGen => match text(&test.review_text) {
                Some(t) => (GroundTruth::Text(t), None),
                None => {
                    missing_text += 1;
                    continue;
                }
            },
            TaskKind::ReviewSummarization => match (text(&test.review_title), text(&test.review_text)) {
                (Some(t), Some(r)) => (GroundTruth::Text(t), Some(r)),
                _ => {
                    missing_text += 1;
                    continue;
                }
            },
        };
        let candidates = match task {
            TaskKind::DirectRec => Some(sample_candidates(
                &user.user_id,
                &catalog,
                &user.interacted(),
                &test.item_id,
                config.negatives,
                seed,
            )?),
            _ => None,
        };
        let history: Vec<String> = match task {
            TaskKind::SequentialRec => user.train.iter().map(|r| r.item_id.clone()).collect(),
            _ => Vec::new(),
        };
        let target_title = titles.get(&test.item_id).map_or(test.item_id.as_str(), String::as_str);
        let shots = select_shots(
            task,
            &config.exemplars,
            user,
            &pool,
            &Target {
                item_id: &test.item_id,
                title: target_title,
            },
        );
        let item_titles: BTreeMap<String, String> = std::iter::once(&test.item_id)
            .chain(history.iter())
            .chain(candidates.iter().flatten())
            .map(|id| (id.clone(), titles.get(id).cloned().unwrap_or_else(|| id.clone())))
            .collect();
        instances.push(TaskInstance {
            id: format!("{}-{}-{}", task.label(), domain, instances.len()),
            task,
            domain: domain.to_string(),
            user_id: user.user_id.clone(),
            target_item: test.item_id.clone(),
            ground_truth,
            candidates,
            history,
            review,
            item_titles,
            shots,
            seed,
        });
    }
    let mut auto_titles = 0;
    if task == TaskKind::ReviewSummarization {
        let before = instances.len();
        instances = filter_summarization_tests(instances, None);
        auto_titles = before - instances.len();
    }
    Ok(InstanceSet {
        instances,
        insufficient_history: split.insufficient_history,
        missing_text,
        auto_titles,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::fixtures;

    fn store() -> MemoryStore {
        let store = MemoryStore::in_memory().unwrap();
        store
            .ingest_reader(fixtures::synthetic_jsonl("Beauty", 300, 40, 11).as_bytes(), "Beauty")
            .unwrap();
        store
            .ingest_reader(fixtures::synthetic_jsonl("Toys", 300, 30, 12).as_bytes(), "Toys")
            .unwrap();
        store
    }

    #[test]
    fn direct_rec_invariants() {
        let store = store();
        let set = make_instances(&store, TaskKind::DirectRec, "Beauty", &InstanceConfig::default()).unwrap();
        assert_eq!(set.instances.len(), 40);
        let split = split_dataset(&store, "Beauty").unwrap();
        for inst in &set.instances {
            let c = inst.candidates.as_ref().unwrap();
            assert_eq!(c.len(), 100);
            assert_eq!(c.iter().filter(|i| **i == inst.target_item).count(), 1);
            assert_eq!(c.iter().collect::<HashSet<_>>().len(), 100);
            let user = split.users.iter().find(|u| u.user_id == inst.user_id).unwrap();
            let seen = user.interacted();
            assert!(c.iter().filter(|i| **i != inst.target_item).all(|i| !seen.contains(i.as_str())));
        }
    }

    #[test]
    fn limit_keeps_prefix() {
        let store = store();
        let all = make_instances(&store, TaskKind::RatingPrediction, "Beauty", &InstanceConfig::default()).unwrap();
        let some = make_instances(
            &store,
            TaskKind::RatingPrediction,
            "Beauty",
            &InstanceConfig {
                limit: Some(5),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(some.instances[..], all.instances[..5]);
    }

    #[test]
    fn sequential_history_excludes_target() {
        let store = store();
        let set = make_instances(&store, TaskKind::SequentialRec, "Beauty", &InstanceConfig::default()).unwrap();
        for inst in &set.instances {
            assert!(!inst.history.contains(&inst.target_item));
            let target_title = inst.title(&inst.target_item);
            for shot in &inst.shots {
                assert!(!shot.question.contains(target_title) && !shot.answer.contains(target_title));
            }
            assert_eq!(inst.shots.len(), 3);
        }
    }

    #[test]
    fn zero_shot_has_no_exemplars() {
        let store = store();
        let cfg = InstanceConfig {
            exemplars: ExemplarConfig::zero_shot(),
            ..Default::default()
        };
        let set = make_instances(&store, TaskKind::RatingPrediction, "Beauty", &cfg).unwrap();
        assert!(set.instances.iter().all(|i| i.shots.is_empty()));
    }

    #[test]
    fn transfer_draws_from_source_domain() {
        let store = store();
        let cfg = InstanceConfig {
            exemplars: ExemplarConfig {
                shot_count: 3,
                mode: ExemplarMode::Transfer,
                source_domain: Some("Beauty".into()),
            },
            ..Default::default()
        };
        let set = make_instances(&store, TaskKind::RatingPrediction, "Toys", &cfg).unwrap();
        for inst in &set.instances {
            assert_eq!(inst.shots.len(), 3);
            for shot in &inst.shots {
                assert!(shot.question.contains("user Beauty-U"), "{}", shot.question);
                assert!(shot.question.contains("\"Beauty "));
            }
        }
    }

    #[test]
    fn summarization_filters_auto_titles() {
        let store = store();
        let set = make_instances(&store, TaskKind::ReviewSummarization, "Beauty", &InstanceConfig::default()).unwrap();
        assert!(set.auto_titles > 0);
        for inst in &set.instances {
            let GroundTruth::Text(t) = &inst.ground_truth else { panic!() };
            assert!(!is_auto_title(t));
            assert!(inst.review.is_some());
        }
    }
}
