//! Majority labels with worker-trust filtering.
//!
//! Workers whose agreement with the majority falls below the trust gate are
//! dropped and majorities recomputed until no further worker is dropped.
//! Exclusion is never undone, so the loop ends after at most one round per
//! worker, and records are sorted first so arrival order does not matter.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::record::AnnotationRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateConfig {
    /// Trusted yes/no votes needed per candidate; the gold label is the
    /// majority of the first this-many of them.
    pub min_votes: usize,
    pub trust_threshold: f64,
}

impl Default for AggregateConfig {
    fn default() -> Self {
        AggregateConfig {
            min_votes: 5,
            trust_threshold: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct WorkerStats {
    /// Yes/no votes on candidates that have a majority.
    pub submissions: usize,
    pub agreements: usize,
    /// `agreements / submissions`; 1 for a worker with no counted submissions.
    pub trust: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Gold {
    pub label: bool,
    /// Panel votes disagreeing with the label.
    pub disagreements: u8,
    /// The panel: the first trusted yes/no votes in time order.
    pub votes: Vec<(String, bool)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Aggregation {
    pub gold: BTreeMap<String, Gold>,
    pub needs_more: BTreeSet<String>,
    /// Candidates whose premise a majority of trusted workers flagged.
    pub flagged: BTreeSet<String>,
    pub workers: BTreeMap<String, WorkerStats>,
    pub excluded_workers: BTreeSet<String>,
    pub rounds: usize,
}

struct Outcome {
    majority: Option<bool>,
    panel: Vec<(String, bool)>,
    flagged: bool,
}

fn majority(votes: &[(String, bool)]) -> Option<bool> {
    let yes = votes.iter().filter(|v| v.1).count();
    let no = votes.len() - yes;
    match yes.cmp(&no) {
        std::cmp::Ordering::Greater => Some(true),
        std::cmp::Ordering::Less => Some(false),
        std::cmp::Ordering::Equal => None,
    }
}

fn outcomes(
    by_cand: &BTreeMap<&str, Vec<&AnnotationRecord>>,
    trusted: &BTreeSet<&str>,
    cfg: &AggregateConfig,
) -> BTreeMap<String, Outcome> {
    let mut out = BTreeMap::new();
    for (&cand, recs) in by_cand {
        let recs: Vec<&&AnnotationRecord> = recs.iter().filter(|r| trusted.contains(r.worker.as_str())).collect();
        let flags = recs.iter().filter(|r| r.premise_flagged).count();
        let flagged = 2 * flags > recs.len();
        let votes: Vec<(String, bool)> = recs.iter().filter_map(|r| r.vote().map(|v| (r.worker.clone(), v))).collect();
        let panel: Vec<(String, bool)> = votes.into_iter().take(cfg.min_votes).collect();
        let (majority, panel) = if flagged { (None, Vec::new()) } else { (majority(&panel), panel) };
        out.insert(cand.to_string(), Outcome { majority, panel, flagged });
    }
    out
}

fn worker_stats(
    records: &[&AnnotationRecord],
    outcomes: &BTreeMap<String, Outcome>,
) -> BTreeMap<String, WorkerStats> {
    let mut stats: BTreeMap<String, WorkerStats> = BTreeMap::new();
    for r in records {
        let s = stats.entry(r.worker.clone()).or_default();
        let (Some(vote), Some(m)) = (r.vote(), outcomes.get(&r.cand).and_then(|o| o.majority)) else {
            continue;
        };
        s.submissions += 1;
        s.agreements += (vote == m) as usize;
    }
    for s in stats.values_mut() {
        s.trust = if s.submissions == 0 {
            1.0
        } else {
            s.agreements as f64 / s.submissions as f64
        };
    }
    stats
}

/// Aggregates `records` for the candidates in `cands` (candidates with
/// records but not listed are aggregated too). Repeated (worker, cand)
/// records after the first are ignored.
pub fn aggregate<'a>(
    records: impl IntoIterator<Item = &'a AnnotationRecord>,
    cands: impl IntoIterator<Item = &'a str>,
    cfg: &AggregateConfig,
) -> Aggregation {
    let mut sorted: Vec<&AnnotationRecord> = records.into_iter().collect();
    sorted.sort_by(|a, b| (a.time, &a.worker, &a.cand, a.label).cmp(&(b.time, &b.worker, &b.cand, b.label)));
    let mut seen = BTreeSet::new();
    sorted.retain(|r| seen.insert((r.worker.as_str(), r.cand.as_str())));

    let mut by_cand: BTreeMap<&str, Vec<&AnnotationRecord>> = cands.into_iter().map(|c| (c, Vec::new())).collect();
    for r in &sorted {
        by_cand.entry(r.cand.as_str()).or_default().push(r);
    }
    let mut trusted: BTreeSet<&str> = sorted.iter().map(|r| r.worker.as_str()).collect();
    let mut rounds = 0;
    let (outcome, stats) = loop {
        rounds += 1;
        let outcome = outcomes(&by_cand, &trusted, cfg);
        let stats = worker_stats(&sorted, &outcome);
        let drop: Vec<&str> = trusted
            .iter()
            .copied()
            .filter(|w| stats.get(*w).is_some_and(|s| s.trust < cfg.trust_threshold))
            .collect();
        if drop.is_empty() {
            break (outcome, stats);
        }
        for w in drop {
            trusted.remove(w);
        }
    };

    let mut agg = Aggregation {
        workers: stats,
        rounds,
        ..Default::default()
    };
    agg.excluded_workers = agg.workers.keys().filter(|w| !trusted.contains(w.as_str())).cloned().collect();
    for (cand, o) in outcome {
        if o.flagged {
            agg.flagged.insert(cand);
        } else if o.panel.len() < cfg.min_votes || o.majority.is_none() {
            agg.needs_more.insert(cand);
        } else {
            let label = o.majority.unwrap();
            let disagreements = o.panel.iter().filter(|v| v.1 != label).count() as u8;
            agg.gold.insert(
                cand,
                Gold {
                    label,
                    disagreements,
                    votes: o.panel,
                },
            );
        }
    }
    agg
}
