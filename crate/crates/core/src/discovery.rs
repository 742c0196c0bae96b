//! Scoring of premise/hypothesis pairs and inference-rule candidate
//! selection over a typed event graph.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read, Write};

use rayon::prelude::*;

use crate::candidate::Candidate;
use crate::error::{Error, Result, ScoreError};
use crate::path::{FilterConfig, Relation};
use crate::teg::{Extension, Pair, SlotType, TegStore, TypedRelation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreTriple {
    pub relv: f64,
    pub sigma: f64,
    pub esr: f64,
}

impl ScoreTriple {
    pub fn product(&self) -> f64 {
        self.relv * self.sigma * self.esr
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryConfig {
    pub theta_relv: f64,
    pub theta_sigma: f64,
    pub theta_esr: f64,
    pub r_min: usize,
    pub max_premises_per_hypothesis: usize,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            theta_relv: 1000.0,
            theta_sigma: 15.0,
            theta_esr: 0.6,
            r_min: 5,
            max_premises_per_hypothesis: 100,
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.theta_relv > 0.0
            && self.theta_sigma > 0.0
            && self.theta_esr > 0.0
            && self.r_min > 0
            && self.max_premises_per_hypothesis > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("discovery thresholds must all be positive".into()))
        }
    }
}

/// `P(B|A) / P(B)` with `P(B) = |B| / universe²`.
pub fn relevance_counts(a: usize, b: usize, shared: usize, universe: usize) -> std::result::Result<f64, ScoreError> {
    if a == 0 || b == 0 {
        return Err(ScoreError::EmptyExtension);
    }
    let space = (universe as f64) * (universe as f64);
    Ok(shared as f64 * space / (a as f64 * b as f64))
}

pub fn relevance(a: &Extension, b: &Extension, universe: usize) -> std::result::Result<f64, ScoreError> {
    relevance_counts(a.len(), b.len(), a.intersection(b).len(), universe)
}

/// `P(B|A) · lrs(A, B)`, natural log, with `0 · log 0 = 0`.
pub fn significance_counts(a: usize, b: usize, shared: usize, universe: usize) -> std::result::Result<f64, ScoreError> {
    if a == 0 || b == 0 {
        return Err(ScoreError::EmptyExtension);
    }
    let space = (universe as f64) * (universe as f64);
    let p_b = b as f64 / space;
    if p_b >= 1.0 {
        return Err(ScoreError::DegeneratePrior("1"));
    }
    let p_b_given_a = shared as f64 / a as f64;
    let p_not_b_given_a = 1.0 - p_b_given_a;
    let term = |conditional: f64, prior: f64| {
        if conditional == 0.0 {
            0.0
        } else {
            conditional * (conditional / prior).ln()
        }
    };
    let lrs = 2.0 * a as f64 * (term(p_b_given_a, p_b) + term(p_not_b_given_a, 1.0 - p_b));
    // The sum is a scaled KL divergence; clamp rounding noise below zero.
    Ok(p_b_given_a * lrs.max(0.0))
}

pub fn significance(a: &Extension, b: &Extension, universe: usize) -> std::result::Result<f64, ScoreError> {
    significance_counts(a.len(), b.len(), a.intersection(b).len(), universe)
}

/// Distinct entities in the shared pairs over twice the shared pair count.
pub fn entity_support_ratio_of(shared: &[Pair]) -> std::result::Result<f64, ScoreError> {
    if shared.is_empty() {
        return Err(ScoreError::EmptyIntersection);
    }
    let entities: BTreeSet<u32> = shared.iter().flat_map(|&(x, y)| [x, y]).collect();
    Ok(entities.len() as f64 / (2.0 * shared.len() as f64))
}

pub fn entity_support_ratio(a: &Extension, b: &Extension) -> std::result::Result<f64, ScoreError> {
    entity_support_ratio_of(&a.intersection(b))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Accepted(ScoreTriple),
    Rejected {
        criterion: u8,
        reason: String,
        scores: Option<ScoreTriple>,
    },
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted(_))
    }

    pub fn criterion(&self) -> Option<u8> {
        match self {
            Verdict::Accepted(_) => None,
            Verdict::Rejected { criterion, .. } => Some(*criterion),
        }
    }
}

fn joint_signature(a: &TypedRelation, b: &TypedRelation) -> (BTreeSet<String>, BTreeSet<String>) {
    (
        a.tsg.0.intersection(&b.tsg.0).cloned().collect(),
        a.tsg.1.intersection(&b.tsg.1).cloned().collect(),
    )
}

/// Checks the six acceptance criteria for `A ⇒ B` in order.
pub fn accept_rule(a: &TypedRelation, b: &TypedRelation, universe: usize, cfg: &DiscoveryConfig) -> Verdict {
    let reject = |criterion: u8, reason: String, scores: Option<ScoreTriple>| Verdict::Rejected {
        criterion,
        reason,
        scores,
    };
    let joint = joint_signature(a, b);
    if joint.0.is_empty() || joint.1.is_empty() {
        return reject(1, "joint type signature has an empty slot".into(), None);
    }
    let shared = a.extension.intersection(&b.extension);
    if shared.len() < cfg.r_min {
        return reject(2, format!("{} shared pairs", shared.len()), None);
    }
    let firsts: BTreeSet<u32> = shared.iter().map(|p| p.0).collect();
    let seconds: BTreeSet<u32> = shared.iter().map(|p| p.1).collect();
    if firsts.len() < cfg.r_min || seconds.len() < cfg.r_min {
        return reject(3, format!("{} / {} distinct slot entities", firsts.len(), seconds.len()), None);
    }
    let (na, nb) = (a.extension.len(), b.extension.len());
    let relv = match relevance_counts(na, nb, shared.len(), universe) {
        Ok(v) => v,
        Err(e) => return reject(4, e.to_string(), None),
    };
    let sigma = match significance_counts(na, nb, shared.len(), universe) {
        Ok(v) => v,
        Err(e) => return reject(5, e.to_string(), None),
    };
    let esr = match entity_support_ratio_of(&shared) {
        Ok(v) => v,
        Err(e) => return reject(6, e.to_string(), None),
    };
    let scores = ScoreTriple { relv, sigma, esr };
    if relv < cfg.theta_relv {
        return reject(4, format!("relv {relv}"), Some(scores));
    }
    if sigma < cfg.theta_sigma {
        return reject(5, format!("sigma {sigma}"), Some(scores));
    }
    if esr < cfg.theta_esr {
        return reject(6, format!("esr {esr}"), Some(scores));
    }
    Verdict::Accepted(scores)
}

/// An accepted candidate; premise and hypothesis index into
/// [`TegStore::typed`].
#[derive(Debug, Clone, PartialEq)]
pub struct InfCand {
    pub premise: usize,
    pub hypothesis: usize,
    pub scores: ScoreTriple,
    pub joint_tsg: (BTreeSet<String>, BTreeSet<String>),
}

/// Per hypothesis: drops premises sharing the hypothesis' base relation and
/// keeps the best premises by score product. Ties go to the smaller premise
/// key. Output is grouped by hypothesis in index order.
pub fn rank_and_trim(cands: Vec<InfCand>, store: &TegStore, cfg: &DiscoveryConfig) -> Vec<InfCand> {
    let typed = store.typed();
    let mut by_hypothesis: std::collections::BTreeMap<usize, Vec<InfCand>> = Default::default();
    for c in cands {
        if typed[c.premise].base != typed[c.hypothesis].base {
            by_hypothesis.entry(c.hypothesis).or_default().push(c);
        }
    }
    let mut out = Vec::new();
    for (_, mut group) in by_hypothesis {
        group.sort_by(|x, y| {
            y.scores
                .product()
                .partial_cmp(&x.scores.product())
                .unwrap_or(Ordering::Equal)
                .then_with(|| store.relation_key(&typed[x.premise]).cmp(&store.relation_key(&typed[y.premise])))
        });
        group.truncate(cfg.max_premises_per_hypothesis);
        out.extend(group);
    }
    out
}

/// Scores every ordered pair of typed relations that share at least
/// `r_min` entity pairs and returns the trimmed accepted candidates.
pub fn discover(store: &TegStore, cfg: &DiscoveryConfig) -> Vec<InfCand> {
    let typed = store.typed();
    let universe = store.universe();
    let mut index: HashMap<Pair, Vec<usize>> = HashMap::new();
    for (i, t) in typed.iter().enumerate() {
        for &p in t.extension.pairs() {
            index.entry(p).or_default().push(i);
        }
    }
    let accepted: Vec<Vec<InfCand>> = (0..typed.len())
        .into_par_iter()
        .map(|h| {
            let mut overlap: HashMap<usize, usize> = HashMap::new();
            for p in typed[h].extension.pairs() {
                for &a in &index[p] {
                    *overlap.entry(a).or_default() += 1;
                }
            }
            let mut premises: Vec<usize> = overlap
                .into_iter()
                .filter(|&(_, n)| n >= cfg.r_min)
                .map(|(a, _)| a)
                .collect();
            premises.sort_unstable();
            premises
                .into_iter()
                .filter_map(|a| match accept_rule(&typed[a], &typed[h], universe, cfg) {
                    Verdict::Accepted(scores) => Some(InfCand {
                        premise: a,
                        hypothesis: h,
                        scores,
                        joint_tsg: joint_signature(&typed[a], &typed[h]),
                    }),
                    Verdict::Rejected { .. } => None,
                })
                .collect()
        })
        .collect();
    rank_and_trim(accepted.into_iter().flatten().collect(), store, cfg)
}

pub const CANDIDATE_HEADER: &str = "premise_path\tpremise_types\thypothesis_path\thypothesis_types\trelv\tsigma\tesr\tproduct";

pub fn format_slots(slots: &(SlotType, SlotType)) -> String {
    format!("{},{}", slots.0, slots.1)
}

pub fn parse_slots(text: &str) -> Option<(SlotType, SlotType)> {
    let (s, u) = text.split_once(',')?;
    Some((SlotType::parse(s), SlotType::parse(u)))
}

pub fn write_candidates<W: Write>(w: &mut W, store: &TegStore, cands: &[InfCand]) -> Result<()> {
    writeln!(w, "{CANDIDATE_HEADER}")?;
    let typed = store.typed();
    for c in cands {
        let (p, h) = (&typed[c.premise], &typed[c.hypothesis]);
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            store.relation(p.base).expect("typed base exists").relation,
            format_slots(&p.slot_types),
            store.relation(h.base).expect("typed base exists").relation,
            format_slots(&h.slot_types),
            c.scores.relv,
            c.scores.sigma,
            c.scores.esr,
            c.scores.product()
        )?;
    }
    Ok(())
}

/// One line of a candidate TSV as written by [`write_candidates`].
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRow {
    pub premise_path: String,
    pub premise_types: (SlotType, SlotType),
    pub hypothesis_path: String,
    pub hypothesis_types: (SlotType, SlotType),
    pub scores: Option<ScoreTriple>,
}

/// Reads candidate TSV. Score columns are optional so that hand-written
/// candidate lists with only the four path/type columns load too.
pub fn read_candidates<R: Read>(reader: R) -> Result<Vec<CandidateRow>> {
    let mut rows = Vec::new();
    for (no, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') || line.starts_with("premise_path\t") {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 4 {
            return Err(Error::Format(format!("candidate line {}: expected at least 4 columns", no + 1)));
        }
        let slots = |s: &str| {
            parse_slots(s).ok_or_else(|| Error::Format(format!("candidate line {}: bad types `{s}`", no + 1)))
        };
        let scores = if cols.len() >= 7 {
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("candidate line {}: bad number `{s}`", no + 1)))
            };
            Some(ScoreTriple {
                relv: num(cols[4])?,
                sigma: num(cols[5])?,
                esr: num(cols[6])?,
            })
        } else {
            None
        };
        rows.push(CandidateRow {
            premise_path: cols[0].to_string(),
            premise_types: slots(cols[1])?,
            hypothesis_path: cols[2].to_string(),
            hypothesis_types: slots(cols[3])?,
            scores,
        });
    }
    Ok(rows)
}

/// Parses the rows' paths into candidates numbered from 1 in file order.
pub fn candidates_from_rows(rows: Vec<CandidateRow>, cfg: &FilterConfig) -> Result<Vec<Candidate>> {
    rows.into_iter()
        .enumerate()
        .map(|(i, row)| {
            let parse = |p: &str| {
                Relation::parse(p, cfg).map_err(|e| Error::Format(format!("candidate {}: path `{p}`: {e:?}", i + 1)))
            };
            let mut c = Candidate::new((i + 1).to_string(), parse(&row.premise_path)?, parse(&row.hypothesis_path)?);
            c.premise_types = row.premise_types;
            c.hypothesis_types = row.hypothesis_types;
            c.scores = row.scores;
            Ok(c)
        })
        .collect()
}
