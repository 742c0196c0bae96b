//! Entailment scorers. Every scorer maps a [`Candidate`] to a real score;
//! a scorer that cannot judge a candidate abstains, and abstentions are
//! scored with the scorer's theoretical minimum.

pub mod corpus;
pub mod inclusion;
pub mod kge;
pub mod lemma;
pub mod rules;
pub mod selector;
pub mod sgns;
pub mod sherlock;
pub mod vectors;

use crate::candidate::Candidate;

pub trait Scorer: Send + Sync {
    fn name(&self) -> &str;

    /// `None` when the scorer abstains.
    fn score(&self, cand: &Candidate) -> Option<f64>;

    /// Score assigned to abstentions; never above any real score.
    fn abstain_value(&self) -> f64;

    /// Binary scorers emit 0 or 1 and are not threshold-tuned.
    fn is_binary(&self) -> bool {
        false
    }

    fn value(&self, cand: &Candidate) -> f64 {
        self.score(cand).unwrap_or_else(|| self.abstain_value())
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn score(&self, cand: &Candidate) -> Option<f64> {
        (**self).score(cand)
    }
    fn abstain_value(&self) -> f64 {
        (**self).abstain_value()
    }
    fn is_binary(&self) -> bool {
        (**self).is_binary()
    }
}

/// Predicts entailment for everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct AlwaysYes;

impl Scorer for AlwaysYes {
    fn name(&self) -> &str {
        "always_yes"
    }
    fn score(&self, _: &Candidate) -> Option<f64> {
        Some(1.0)
    }
    fn abstain_value(&self) -> f64 {
        0.0
    }
    fn is_binary(&self) -> bool {
        true
    }
}

/// Sum of two scorers. A side that abstains contributes its abstain value;
/// the sum abstains only when both sides do.
pub struct SumScorer<A, B> {
    name: String,
    first: A,
    second: B,
}

impl<A: Scorer, B: Scorer> SumScorer<A, B> {
    pub fn new(name: impl Into<String>, first: A, second: B) -> Self {
        SumScorer {
            name: name.into(),
            first,
            second,
        }
    }
}

impl<A: Scorer, B: Scorer> Scorer for SumScorer<A, B> {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, cand: &Candidate) -> Option<f64> {
        match (self.first.score(cand), self.second.score(cand)) {
            (None, None) => None,
            (x, y) => Some(x.unwrap_or(self.first.abstain_value()) + y.unwrap_or(self.second.abstain_value())),
        }
    }

    fn abstain_value(&self) -> f64 {
        self.first.abstain_value() + self.second.abstain_value()
    }
}

/// A scorer backed by a closure; handy for fixed score tables.
pub struct FnScorer<F> {
    name: String,
    abstain: f64,
    f: F,
}

impl<F> FnScorer<F>
where
    F: Fn(&Candidate) -> Option<f64> + Send + Sync,
{
    pub fn new(name: impl Into<String>, abstain: f64, f: F) -> Self {
        FnScorer {
            name: name.into(),
            abstain,
            f,
        }
    }
}

impl<F> Scorer for FnScorer<F>
where
    F: Fn(&Candidate) -> Option<f64> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }
    fn score(&self, cand: &Candidate) -> Option<f64> {
        (self.f)(cand)
    }
    fn abstain_value(&self) -> f64 {
        self.abstain
    }
}
