use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::kg::EntityId;

/// Candidate F1 thresholds, searched in this order.
pub const THRESHOLD_GRID: [f64; 5] = [0.01, 0.05, 0.1, 0.2, 0.5];

/// Rank-1 correctness. `flagged` marks an empty ranking or empty gold set,
/// both of which score 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hit {
    pub hit: bool,
    pub flagged: bool,
}

pub fn hits_at_1<T: PartialEq>(ranked: &[T], gold: &[T]) -> Hit {
    match ranked.first() {
        None => Hit { hit: false, flagged: true },
        Some(_) if gold.is_empty() => Hit { hit: false, flagged: true },
        Some(top) => Hit { hit: gold.contains(top), flagged: false },
    }
}

/// Set F1. Both empty is 1.0; exactly one empty is 0.0.
pub fn f1<T: Ord>(predicted: &BTreeSet<T>, gold: &BTreeSet<T>) -> f64 {
    match (predicted.is_empty(), gold.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let common = predicted.intersection(gold).count() as f64;
    if common == 0.0 {
        return 0.0;
    }
    let precision = common / predicted.len() as f64;
    let recall = common / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

pub fn coverage_rate(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        return 0.0;
    }
    flags.iter().filter(|&&c| c).count() as f64 / flags.len() as f64
}

/// Entities scoring at least `threshold`.
pub fn predicted_set(ranked: &[(EntityId, f64)], threshold: f64) -> BTreeSet<EntityId> {
    ranked.iter().filter(|(_, s)| *s >= threshold).map(|(e, _)| *e).collect()
}

/// A ranked answer list with its gold set.
pub type Graded = (Vec<(EntityId, f64)>, BTreeSet<EntityId>);

/// Grid threshold with the best mean F1; ties go to the earlier grid value.
pub fn choose_threshold(questions: &[Graded]) -> f64 {
    let mut best = (f64::NEG_INFINITY, THRESHOLD_GRID[0]);
    for &theta in &THRESHOLD_GRID {
        let total: f64 = questions.iter().map(|(r, g)| f1(&predicted_set(r, theta), g)).sum();
        let mean = if questions.is_empty() { 0.0 } else { total / questions.len() as f64 };
        if mean > best.0 {
            best = (mean, theta);
        }
    }
    best.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub hit: bool,
    /// Empty ranking or no gold answers.
    pub flagged: bool,
    pub f1: f64,
    pub coverage: bool,
    pub subgraph_size: usize,
}

impl QuestionRecord {
    pub fn score(
        id: impl Into<String>,
        ranked: &[(EntityId, f64)],
        gold: &[EntityId],
        threshold: f64,
        coverage: bool,
        subgraph_size: usize,
    ) -> Self {
        let ids: Vec<EntityId> = ranked.iter().map(|(e, _)| *e).collect();
        let h = hits_at_1(&ids, gold);
        let gold_set: BTreeSet<EntityId> = gold.iter().copied().collect();
        Self {
            id: id.into(),
            hit: h.hit,
            flagged: h.flagged,
            f1: f1(&predicted_set(ranked, threshold), &gold_set),
            coverage,
            subgraph_size,
        }
    }
}

/// Per-question records and their means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub hits_at_1: f64,
    pub f1: f64,
    pub coverage_rate: f64,
    pub flagged: usize,
    /// Absolute score threshold defining the F1 prediction set.
    pub threshold: f64,
    /// F1 convention when prediction and gold are both empty.
    pub f1_both_empty: f64,
    pub fingerprint: String,
    pub seed: u64,
    pub records: Vec<QuestionRecord>,
}

impl EvalReport {
    pub fn from_records(records: Vec<QuestionRecord>, threshold: f64, fingerprint: String, seed: u64) -> Self {
        let n = records.len().max(1) as f64;
        let hits = records.iter().filter(|r| r.hit).count() as f64 / n;
        let f1 = records.iter().map(|r| r.f1).sum::<f64>() / n;
        let flags: Vec<bool> = records.iter().map(|r| r.coverage).collect();
        Self {
            hits_at_1: hits,
            f1,
            coverage_rate: coverage_rate(&flags),
            flagged: records.iter().filter(|r| r.flagged).count(),
            threshold,
            f1_both_empty: 1.0,
            fingerprint,
            seed,
            records,
        }
    }
}
