//! Scores candidates with the discovery statistics themselves.

use crate::baselines::inclusion::ExtensionIndex;
use crate::baselines::Scorer;
use crate::candidate::Candidate;
use crate::discovery::{entity_support_ratio, relevance, significance, ScoreTriple};
use crate::teg::TegStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Relevance,
    Significance,
    SupportRatio,
    Product,
}

impl Component {
    fn pick(self, s: &ScoreTriple) -> f64 {
        match self {
            Component::Relevance => s.relv,
            Component::Significance => s.sigma,
            Component::SupportRatio => s.esr,
            Component::Product => s.product(),
        }
    }
}

/// Uses scores attached to the candidate when present; otherwise computes
/// them from the aligned typed extensions in `store`.
pub struct StatisticScorer<'a> {
    name: String,
    index: Option<ExtensionIndex<'a>>,
    component: Component,
}

impl<'a> StatisticScorer<'a> {
    pub fn new(name: impl Into<String>, store: Option<&'a TegStore>, component: Component) -> Self {
        StatisticScorer {
            name: name.into(),
            index: store.map(ExtensionIndex::new),
            component,
        }
    }

    pub fn triple(&self, cand: &Candidate) -> Option<ScoreTriple> {
        if let Some(s) = cand.scores {
            return Some(s);
        }
        let index = self.index.as_ref()?;
        let a = index.premise(cand, true)?;
        let b = index.hypothesis(cand, true)?;
        let universe = index.store().universe();
        Some(ScoreTriple {
            relv: relevance(&a, &b, universe).ok()?,
            sigma: significance(&a, &b, universe).ok()?,
            esr: entity_support_ratio(&a, &b).ok()?,
        })
    }
}

impl Scorer for StatisticScorer<'_> {
    fn name(&self) -> &str {
        &self.name
    }
    fn score(&self, cand: &Candidate) -> Option<f64> {
        self.triple(cand).map(|s| self.component.pick(&s))
    }
    fn abstain_value(&self) -> f64 {
        0.0
    }
}
