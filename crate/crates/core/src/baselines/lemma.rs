use std::collections::BTreeSet;

use crate::baselines::Scorer;
use crate::candidate::Candidate;
use crate::path::{content_words, predicate_and_voice, PathEnd, Relation, StopList};

/// True iff the premise contains every content word of the hypothesis, both
/// share the predicate, and voice agrees with argument alignment: same voice
/// with the subject on the same argument, or different voice with the
/// subject on different arguments.
pub fn lemma_baseline(
    premise: &Relation,
    premise_reversed: bool,
    hypothesis: &Relation,
    hypothesis_reversed: bool,
    stop: &StopList,
) -> bool {
    let premise_words: BTreeSet<String> = content_words(premise, stop).into_iter().collect();
    if !content_words(hypothesis, stop).iter().all(|w| premise_words.contains(w)) {
        return false;
    }
    let (Some(p), Some(h)) = (predicate_and_voice(premise), predicate_and_voice(hypothesis)) else {
        return false;
    };
    if p.lemma != h.lemma {
        return false;
    }
    // Subject on argument A?
    let p_subject_a = (p.subject_end == PathEnd::Start) != premise_reversed;
    let h_subject_a = (h.subject_end == PathEnd::Start) != hypothesis_reversed;
    (p.voice == h.voice) == (p_subject_a == h_subject_a)
}

pub fn lemma_decision(cand: &Candidate, stop: &StopList) -> bool {
    lemma_baseline(
        &cand.premise,
        cand.premise_reversed,
        &cand.hypothesis,
        cand.hypothesis_reversed,
        stop,
    )
}

pub struct LemmaScorer {
    stop: StopList,
}

impl LemmaScorer {
    pub fn new(stop: StopList) -> Self {
        LemmaScorer { stop }
    }
}

impl Scorer for LemmaScorer {
    fn name(&self) -> &str {
        "lemma"
    }
    fn score(&self, cand: &Candidate) -> Option<f64> {
        Some(if lemma_decision(cand, &self.stop) { 1.0 } else { 0.0 })
    }
    fn abstain_value(&self) -> f64 {
        0.0
    }
    fn is_binary(&self) -> bool {
        true
    }
}
