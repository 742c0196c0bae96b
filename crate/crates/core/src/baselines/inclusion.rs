//! Distributional inclusion measures over relation extensions. A
//! relation's features are its (A, B) entity pairs, weighted by count.

use std::collections::{BTreeMap, HashMap};

use crate::baselines::Scorer;
use crate::candidate::Candidate;
use crate::path::{Relation, RelationId};
use crate::teg::{Extension, Pair, SlotType, TegStore};

pub type Features<K> = BTreeMap<K, f64>;

/// Share of `a`'s weight on features that `b` also has.
pub fn weeds_prec<K: Ord>(a: &Features<K>, b: &Features<K>) -> Option<f64> {
    let total: f64 = a.values().sum();
    if total <= 0.0 {
        return None;
    }
    let shared: f64 = a.iter().filter(|(k, _)| b.contains_key(k)).map(|(_, v)| v).sum();
    Some(shared / total)
}

/// Clarke's degree of inclusion of `u` in `v`.
pub fn clarke_de<K: Ord>(u: &Features<K>, v: &Features<K>) -> Option<f64> {
    let total: f64 = u.values().sum();
    if total <= 0.0 {
        return None;
    }
    let shared: f64 = u.iter().map(|(k, x)| x.min(v.get(k).copied().unwrap_or(0.0))).sum();
    Some(shared / total)
}

/// √(CL(a, b)·(1 − CL(b, a))).
pub fn inv_cl<K: Ord>(a: &Features<K>, b: &Features<K>) -> Option<f64> {
    let ab = clarke_de(a, b)?;
    let ba = clarke_de(b, a)?;
    Some((ab * (1.0 - ba)).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InclusionMeasure {
    WeedsPrec,
    InvCl,
}

/// Looks up candidate extensions in a graph, aligned so that every pair
/// reads (A-entity, B-entity).
pub struct ExtensionIndex<'a> {
    store: &'a TegStore,
    typed: HashMap<(RelationId, (SlotType, SlotType)), usize>,
}

impl<'a> ExtensionIndex<'a> {
    pub fn new(store: &'a TegStore) -> Self {
        let typed = store
            .typed()
            .iter()
            .enumerate()
            .map(|(i, t)| ((t.base, t.slot_types.clone()), i))
            .collect();
        ExtensionIndex { store, typed }
    }

    pub fn store(&self) -> &TegStore {
        self.store
    }

    pub fn raw(&self, rel: &Relation, slots: Option<&(SlotType, SlotType)>) -> Option<&'a Extension> {
        match slots {
            None => self.store.relation(rel.id()).map(|e| &e.extension),
            Some(s) => self
                .typed
                .get(&(rel.id(), s.clone()))
                .map(|&i| &self.store.typed()[i].extension),
        }
    }

    pub fn aligned(&self, rel: &Relation, slots: Option<&(SlotType, SlotType)>, reversed: bool) -> Option<Extension> {
        let ext = self.raw(rel, slots)?;
        Some(if reversed { ext.swapped() } else { ext.clone() })
    }

    pub fn premise(&self, cand: &Candidate, typed: bool) -> Option<Extension> {
        self.aligned(&cand.premise, typed.then_some(&cand.premise_types), cand.premise_reversed)
    }

    pub fn hypothesis(&self, cand: &Candidate, typed: bool) -> Option<Extension> {
        self.aligned(&cand.hypothesis, typed.then_some(&cand.hypothesis_types), cand.hypothesis_reversed)
    }
}

pub fn features(ext: &Extension) -> Features<Pair> {
    ext.iter_counted().map(|(p, c)| (p, c as f64)).collect()
}

pub struct InclusionScorer<'a> {
    name: String,
    index: ExtensionIndex<'a>,
    measure: InclusionMeasure,
    typed: bool,
}

impl<'a> InclusionScorer<'a> {
    pub fn new(name: impl Into<String>, store: &'a TegStore, measure: InclusionMeasure, typed: bool) -> Self {
        InclusionScorer {
            name: name.into(),
            index: ExtensionIndex::new(store),
            measure,
            typed,
        }
    }
}

impl Scorer for InclusionScorer<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, cand: &Candidate) -> Option<f64> {
        let a = features(&self.index.premise(cand, self.typed)?);
        let b = features(&self.index.hypothesis(cand, self.typed)?);
        match self.measure {
            InclusionMeasure::WeedsPrec => weeds_prec(&a, &b),
            InclusionMeasure::InvCl => inv_cl(&a, &b),
        }
    }

    fn abstain_value(&self) -> f64 {
        0.0
    }
}
