//! Simulated crowd collection with planted unreliable workers and an
//! index-based reimplementation of the trust fixpoint.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relmine_annotate::aggregate::{aggregate, AggregateConfig, Aggregation};
use relmine_annotate::record::{AnnotationRecord, Label};

pub struct Crowd {
    pub records: Vec<AnnotationRecord>,
    pub cands: Vec<String>,
    pub planted_bad: BTreeSet<String>,
}

/// Collects votes in rounds, asking fresh workers for every candidate the
/// aggregation still lists as needing more, until none is left.
pub fn simulate(seed: u64, n_cands: usize, n_good: usize, n_bad: usize) -> Crowd {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<bool> = (0..n_cands).map(|_| rng.gen_bool(0.33)).collect();
    let workers: Vec<(String, f64)> = (0..n_good)
        .map(|i| (format!("good{i:02}"), 0.97))
        .chain((0..n_bad).map(|i| (format!("bad{i:02}"), 0.35)))
        .collect();
    let cands: Vec<String> = (0..n_cands).map(|i| format!("c{i:03}")).collect();
    let mut asked: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_cands];
    let mut records = Vec::new();
    let mut time = 0u64;
    let mut todo: Vec<usize> = (0..n_cands).collect();
    let cfg = AggregateConfig::default();
    while !todo.is_empty() {
        for &c in &todo {
            let mut free: Vec<usize> = (0..workers.len()).filter(|w| !asked[c].contains(w)).collect();
            free.shuffle(&mut rng);
            let want = if asked[c].is_empty() { 5 } else { 1 };
            for w in free.into_iter().take(want) {
                asked[c].insert(w);
                time += 1;
                let correct = rng.gen_bool(workers[w].1);
                let label = if rng.gen_bool(0.02) {
                    Label::Incomprehensible
                } else if correct == truth[c] {
                    Label::Yes
                } else {
                    Label::No
                };
                records.push(AnnotationRecord {
                    worker: workers[w].0.clone(),
                    cand: cands[c].clone(),
                    label,
                    premise_flagged: false,
                    time,
                });
            }
        }
        let agg = aggregate(&records, cands.iter().map(String::as_str), &cfg);
        todo = (0..n_cands)
            .filter(|&c| agg.needs_more.contains(&cands[c]) && asked[c].len() < workers.len())
            .collect();
    }
    Crowd {
        records,
        cands,
        planted_bad: workers.iter().filter(|w| w.1 < 0.5).map(|w| w.0.clone()).collect(),
    }
}

/// The excluded worker set, recomputed over dense vote arrays.
pub fn oracle_excluded(records: &[AnnotationRecord], min_votes: usize, gate: f64) -> BTreeSet<String> {
    let mut workers: Vec<&str> = records.iter().map(|r| r.worker.as_str()).collect();
    workers.sort_unstable();
    workers.dedup();
    let mut cands: Vec<&str> = records.iter().map(|r| r.cand.as_str()).collect();
    cands.sort_unstable();
    cands.dedup();
    let wix = |w: &str| workers.binary_search(&w).unwrap();
    let cix = |c: &str| cands.binary_search(&c).unwrap();
    // votes[c] = (time, worker, vote) in time order.
    let mut votes: Vec<Vec<(u64, usize, bool)>> = vec![Vec::new(); cands.len()];
    for r in records {
        if let (false, Some(v)) = (r.premise_flagged, r.label.as_bool()) {
            votes[cix(&r.cand)].push((r.time, wix(&r.worker), v));
        }
    }
    for v in &mut votes {
        v.sort_by(|a, b| (a.0, workers[a.1]).cmp(&(b.0, workers[b.1])));
    }
    let mut trusted = vec![true; workers.len()];
    loop {
        let mut maj: Vec<Option<bool>> = Vec::with_capacity(cands.len());
        for v in &votes {
            let panel: Vec<bool> = v.iter().filter(|x| trusted[x.1]).map(|x| x.2).take(min_votes).collect();
            let yes = panel.iter().filter(|&&b| b).count() as i64;
            let no = panel.len() as i64 - yes;
            maj.push(if yes > no { Some(true) } else if no > yes { Some(false) } else { None });
        }
        let mut agree = vec![0usize; workers.len()];
        let mut total = vec![0usize; workers.len()];
        for (c, v) in votes.iter().enumerate() {
            let Some(m) = maj[c] else { continue };
            for &(_, w, b) in v {
                total[w] += 1;
                agree[w] += (b == m) as usize;
            }
        }
        let mut changed = false;
        for w in 0..workers.len() {
            if trusted[w] && total[w] > 0 && (agree[w] as f64) < gate * total[w] as f64 {
                trusted[w] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..workers.len()).filter(|&w| !trusted[w]).map(|w| workers[w].to_string()).collect()
}

pub fn check_aggregation(agg: &Aggregation, crowd: &Crowd, cfg: &AggregateConfig) -> Result<(), String> {
    let oracle = oracle_excluded(&crowd.records, cfg.min_votes, cfg.trust_threshold);
    if agg.excluded_workers != oracle {
        return Err(format!("excluded {:?}, oracle {:?}", agg.excluded_workers, oracle));
    }
    if agg.excluded_workers != crowd.planted_bad {
        return Err(format!("excluded {:?}, planted {:?}", agg.excluded_workers, crowd.planted_bad));
    }
    for (w, s) in &agg.workers {
        let excluded = agg.excluded_workers.contains(w);
        if excluded != (s.trust < cfg.trust_threshold) {
            return Err(format!("{w}: limiting trust {} but excluded={excluded}", s.trust));
        }
    }
    for (c, g) in &agg.gold {
        if g.votes.len() < cfg.min_votes {
            return Err(format!("{c}: {} trusted votes", g.votes.len()));
        }
        if g.votes.iter().any(|v| agg.excluded_workers.contains(&v.0)) {
            return Err(format!("{c}: panel contains an excluded worker"));
        }
        let agreeing = g.votes.iter().filter(|v| v.1 == g.label).count();
        if 2 * agreeing <= g.votes.len() || g.disagreements > 2 {
            return Err(format!("{c}: {agreeing} of {} agree, {} disagreements", g.votes.len(), g.disagreements));
        }
    }
    if agg.rounds > agg.workers.len() + 1 {
        return Err(format!("{} rounds for {} workers", agg.rounds, agg.workers.len()));
    }
    Ok(())
}

/// Runs several simulated collections and checks each aggregation.
pub fn check_planted_workers(seeds: std::ops::Range<u64>) -> Result<usize, String> {
    let cfg = AggregateConfig::default();
    let mut gold = 0;
    for seed in seeds {
        let crowd = simulate(seed, 60, 12, 3);
        let agg = aggregate(&crowd.records, crowd.cands.iter().map(String::as_str), &cfg);
        check_aggregation(&agg, &crowd, &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
        let mut shuffled = crowd.records.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xabc));
        if aggregate(&shuffled, crowd.cands.iter().map(String::as_str), &cfg) != agg {
            return Err(format!("seed {seed}: result depends on record order"));
        }
        gold += agg.gold.len();
    }
    Ok(gold)
}
