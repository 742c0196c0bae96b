//! Labeled data loading, dev/test splitting, threshold tuning and the
//! precision/recall/F1 report.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::baselines::lemma::lemma_decision;
use crate::baselines::Scorer;
use crate::candidate::Candidate;
use crate::error::{Error, Result};
use crate::path::{FilterConfig, Relation, StopList};
use crate::teg::SlotType;

#[derive(Debug, Clone, PartialEq)]
pub struct Labeled {
    pub cand: Candidate,
    pub gold: bool,
    /// Annotators disagreeing with the majority label.
    pub disagreements: u8,
}

/// Names of the columns read by [`read_labeled`]. Optional columns that are
/// unset or absent from the header fall back to `⊤` types, unreversed
/// paths, zero disagreements and row numbers as ids.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub id: Option<String>,
    pub premise: String,
    pub hypothesis: String,
    pub premise_types: Option<String>,
    pub hypothesis_types: Option<String>,
    pub premise_reversed: Option<String>,
    pub hypothesis_reversed: Option<String>,
    pub gold: String,
    pub disagreements: Option<String>,
    /// Field separator; by default tab for `.tsv` files, comma otherwise.
    pub delimiter: Option<char>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            id: Some("id".into()),
            premise: "premise_relation".into(),
            hypothesis: "hypothesis_relation".into(),
            premise_types: Some("premise_types".into()),
            hypothesis_types: Some("hypothesis_types".into()),
            premise_reversed: Some("is_premise_reversed".into()),
            hypothesis_reversed: Some("is_hypothesis_reversed".into()),
            gold: "is_entailment".into(),
            disagreements: Some("num_disagr".into()),
            delimiter: None,
        }
    }
}

#[derive(Debug, Deserialize)]
struct ColumnFile {
    columns: ColumnMap,
}

impl ColumnMap {
    /// Parses a `[columns]` table.
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: ColumnFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(f.columns)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Accepts `--` or `___` as separators and drops `^-` inverse markers.
pub fn normalize_path_text(text: &str) -> String {
    text.trim().replace("^-", "").replace("___", "--")
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" | "t" | "entailment" | "entailed" => Some(true),
        "0" | "false" | "no" | "n" | "f" | "non-entailment" | "not_entailment" | "" => Some(false),
        _ => None,
    }
}

fn parse_types(s: &str) -> Option<(SlotType, SlotType)> {
    let sep = if s.contains(',') { ',' } else { '|' };
    let (a, b) = s.trim().split_once(sep)?;
    Some((SlotType::parse(a.trim()), SlotType::parse(b.trim())))
}

pub fn read_labeled<R: Read>(reader: R, map: &ColumnMap, delimiter: u8, cfg: &FilterConfig) -> Result<Vec<Labeled>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required = |name: &str| find(name).ok_or_else(|| Error::Format(format!("missing column `{name}`")));
    let optional = |name: &Option<String>| name.as_deref().and_then(find);
    let (p_col, h_col, g_col) = (required(&map.premise)?, required(&map.hypothesis)?, required(&map.gold)?);
    let id_col = optional(&map.id);
    let (pt_col, ht_col) = (optional(&map.premise_types), optional(&map.hypothesis_types));
    let (pr_col, hr_col) = (optional(&map.premise_reversed), optional(&map.hypothesis_reversed));
    let dis_col = optional(&map.disagreements);

    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let relation = |c: usize| {
            let text = normalize_path_text(field(c));
            Relation::parse(&text, cfg).map_err(|source| Error::Path { path: text, source })
        };
        let flag = |c: Option<usize>| -> Result<bool> {
            match c {
                None => Ok(false),
                Some(c) => parse_bool(field(c)).ok_or_else(|| Error::Format(format!("row {line}: bad flag `{}`", field(c)))),
            }
        };
        let types = |c: Option<usize>| -> Result<(SlotType, SlotType)> {
            match c {
                None => Ok((SlotType::Top, SlotType::Top)),
                Some(c) => parse_types(field(c)).ok_or_else(|| Error::Format(format!("row {line}: bad types `{}`", field(c)))),
            }
        };
        let mut cand = Candidate::new(
            id_col.map_or_else(|| row.to_string(), |c| field(c).to_string()),
            relation(p_col)?,
            relation(h_col)?,
        );
        cand.premise_types = types(pt_col)?;
        cand.hypothesis_types = types(ht_col)?;
        cand.premise_reversed = flag(pr_col)?;
        cand.hypothesis_reversed = flag(hr_col)?;
        let gold = parse_bool(field(g_col)).ok_or_else(|| Error::Format(format!("row {line}: bad label `{}`", field(g_col))))?;
        let disagreements = match dis_col {
            None => 0,
            Some(c) => field(c)
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("row {line}: bad disagreement count `{}`", field(c))))?,
        };
        out.push(Labeled {
            cand,
            gold,
            disagreements,
        });
    }
    Ok(out)
}

pub fn load_labeled(path: &Path, map: &ColumnMap, cfg: &FilterConfig) -> Result<Vec<Labeled>> {
    let delimiter = match map.delimiter {
        Some(c) => c as u8,
        None if path.extension().is_some_and(|e| e == "tsv") => b'\t',
        None => b',',
    };
    read_labeled(std::fs::File::open(path)?, map, delimiter, cfg)
}

/// Writes labeled candidates with the default column names, tab-separated.
pub fn write_labeled<W: Write>(w: &mut W, items: &[Labeled]) -> Result<()> {
    let map = ColumnMap::default();
    let cols = [
        map.id.unwrap(),
        map.premise,
        map.premise_types.unwrap(),
        map.hypothesis,
        map.hypothesis_types.unwrap(),
        map.premise_reversed.unwrap(),
        map.hypothesis_reversed.unwrap(),
        map.gold,
        map.disagreements.unwrap(),
    ];
    writeln!(w, "{}", cols.join("\t"))?;
    for l in items {
        let c = &l.cand;
        writeln!(
            w,
            "{}\t{}\t{},{}\t{}\t{},{}\t{}\t{}\t{}\t{}",
            c.id,
            c.premise,
            c.premise_types.0,
            c.premise_types.1,
            c.hypothesis,
            c.hypothesis_types.0,
            c.hypothesis_types.1,
            c.premise_reversed as u8,
            c.hypothesis_reversed as u8,
            l.gold as u8,
            l.disagreements
        )?;
    }
    Ok(())
}

/// Size, label balance and agreement profile of a labeled set.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DatasetStats {
    pub total: usize,
    pub positive: usize,
    /// Counts of items with 0, 1 and 2 disagreements; index 3 holds anything larger.
    pub by_disagreements: [usize; 4],
}

impl DatasetStats {
    pub fn of(items: &[Labeled]) -> Self {
        let mut s = DatasetStats { total: items.len(), ..Default::default() };
        for it in items {
            s.positive += it.gold as usize;
            s.by_disagreements[(it.disagreements as usize).min(3)] += 1;
        }
        s
    }

    fn pct(&self, n: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * n as f64 / self.total as f64
        }
    }

    pub fn positive_pct(&self) -> f64 {
        self.pct(self.positive)
    }

    pub fn disagreement_pct(&self, n: usize) -> f64 {
        self.pct(self.by_disagreements[n.min(3)])
    }
}

impl std::fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "total\t{}", self.total)?;
        writeln!(f, "entailment\t{:.1}%", self.positive_pct())?;
        writeln!(f, "non_entailment\t{:.1}%", 100.0 - self.positive_pct())?;
        writeln!(f, "unanimous\t{:.1}%", self.disagreement_pct(0))?;
        writeln!(f, "one_disagreement\t{:.1}%", self.disagreement_pct(1))?;
        writeln!(f, "two_disagreements\t{:.1}%", self.disagreement_pct(2))?;
        if self.by_disagreements[3] > 0 {
            writeln!(f, "more_disagreements\t{:.1}%", self.disagreement_pct(3))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Stratified 25:75 split by (label, disagreements). Each stratum of size
/// n contributes round(n/4) items to dev. Indices come back sorted.
pub fn split_dev_test(items: &[Labeled], seed: u64) -> Split {
    let mut strata: BTreeMap<(bool, u8), Vec<usize>> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        strata.entry((it.gold, it.disagreements)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split::default();
    for ((gold, dis), mut members) in strata {
        if members.len() < 4 {
            let w = format!(
                "stratum (label={gold}, disagreements={dis}) has only {} items; dev share is not 25%",
                members.len()
            );
            warn!("{w}");
            split.warnings.push(w);
        }
        members.shuffle(&mut rng);
        let n_dev = (members.len() as f64 / 4.0).round() as usize;
        split.dev.extend_from_slice(&members[..n_dev]);
        split.test.extend_from_slice(&members[n_dev..]);
    }
    split.dev.sort_unstable();
    split.test.sort_unstable();
    split
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision is 0 without positive predictions, recall 0 without gold
/// positives, F1 0 when both are 0.
pub fn metrics(predicted: &[bool], gold: &[bool]) -> Metrics {
    let (mut tp, mut fp, mut pos) = (0usize, 0usize, 0usize);
    for (&p, &g) in predicted.iter().zip(gold) {
        tp += (p && g) as usize;
        fp += (p && !g) as usize;
        pos += g as usize;
    }
    from_counts(tp, fp, pos)
}

fn from_counts(tp: usize, fp: usize, gold_pos: usize) -> Metrics {
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if gold_pos == 0 { 0.0 } else { tp as f64 / gold_pos as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics { precision, recall, f1 }
}

/// Predicts `lemma ∨ score ≥ θ`.
pub fn predict(scores: &[f64], lemma: &[bool], theta: f64) -> Vec<bool> {
    scores.iter().zip(lemma).map(|(&s, &l)| l || s >= theta).collect()
}

pub fn evaluate(scores: &[f64], lemma: &[bool], gold: &[bool], theta: f64) -> Metrics {
    metrics(&predict(scores, lemma, theta), gold)
}

/// Midpoint that stays finite when one side is infinite.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => lo + (hi - lo) / 2.0,
        (false, true) => hi - 1.0,
        (true, false) => lo + 1.0,
        (false, false) => 0.0,
    }
}

/// −∞, the midpoints between consecutive distinct scores, and +∞.
pub fn candidate_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut out = vec![f64::NEG_INFINITY];
    out.extend(distinct.windows(2).map(|w| midpoint(w[0], w[1])));
    out.push(f64::INFINITY);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tuned {
    pub theta: f64,
    pub dev: Metrics,
    pub warning: Option<String>,
}

/// Threshold maximizing dev F1 of `lemma ∨ score ≥ θ`; ties go to the
/// smallest θ. A −∞ optimum is reported as the smallest score, which
/// selects the same items.
pub fn tune_threshold(scores: &[f64], lemma: &[bool], gold: &[bool]) -> Tuned {
    assert_eq!(scores.len(), gold.len());
    assert_eq!(lemma.len(), gold.len());
    let gold_pos = gold.iter().filter(|&&g| g).count();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    // Start at +∞: only lemma positives. Walk θ down one group of equal
    // scores at a time.
    let (mut tp, mut fp) = (0usize, 0usize);
    for i in 0..scores.len() {
        if lemma[i] {
            tp += gold[i] as usize;
            fp += !gold[i] as usize;
        }
    }
    let mut best = (f64::INFINITY, from_counts(tp, fp, gold_pos));
    let mut k = 0;
    while k < order.len() {
        let value = scores[order[k]];
        let mut end = k;
        while end < order.len() && scores[order[end]] == value {
            let i = order[end];
            if !lemma[i] {
                tp += gold[i] as usize;
                fp += !gold[i] as usize;
            }
            end += 1;
        }
        let theta = if end == order.len() {
            f64::NEG_INFINITY
        } else {
            midpoint(scores[order[end]], value)
        };
        let m = from_counts(tp, fp, gold_pos);
        if m.f1 >= best.1.f1 {
            best = (theta, m);
        }
        k = end;
    }

    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut warning = None;
    let mut theta = best.0;
    if distinct.len() == 1 {
        theta = distinct[0];
        warning = Some(format!("all {} scores equal {}", scores.len(), distinct[0]));
    } else if theta == f64::NEG_INFINITY && !distinct.is_empty() {
        theta = distinct[0];
    }
    Tuned {
        theta,
        dev: best.1,
        warning,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scorer: String,
    /// `None` for binary scorers.
    pub theta: Option<f64>,
    pub dev: Metrics,
    pub test: Metrics,
}

pub struct EvalData<'a> {
    pub items: &'a [Labeled],
    pub lemma: Vec<bool>,
    pub gold: Vec<bool>,
}

impl<'a> EvalData<'a> {
    pub fn new(items: &'a [Labeled], stop: &StopList) -> Self {
        EvalData {
            items,
            lemma: items.iter().map(|l| lemma_decision(&l.cand, stop)).collect(),
            gold: items.iter().map(|l| l.gold).collect(),
        }
    }

    pub fn scores(&self, s: &dyn Scorer) -> Vec<f64> {
        self.items.iter().map(|l| s.value(&l.cand)).collect()
    }
}

pub fn evaluate_scorer(s: &dyn Scorer, dev: &EvalData, test: &EvalData) -> ReportRow {
    let dev_scores = dev.scores(s);
    let test_scores = test.scores(s);
    if s.is_binary() {
        return ReportRow {
            scorer: s.name().to_string(),
            theta: None,
            dev: evaluate(&dev_scores, &dev.lemma, &dev.gold, 0.5),
            test: evaluate(&test_scores, &test.lemma, &test.gold, 0.5),
        };
    }
    let tuned = tune_threshold(&dev_scores, &dev.lemma, &dev.gold);
    if let Some(w) = &tuned.warning {
        warn!("{}: {w}", s.name());
    }
    ReportRow {
        scorer: s.name().to_string(),
        theta: Some(tuned.theta),
        dev: tuned.dev,
        test: evaluate(&test_scores, &test.lemma, &test.gold, tuned.theta),
    }
}

pub fn run_report(scorers: &[&dyn Scorer], dev: &[Labeled], test: &[Labeled], stop: &StopList) -> Vec<ReportRow> {
    let dev = EvalData::new(dev, stop);
    let test = EvalData::new(test, stop);
    scorers.par_iter().map(|s| evaluate_scorer(*s, &dev, &test)).collect()
}

pub const REPORT_HEADER: &str = "scorer\ttheta\tdev_p\tdev_r\tdev_f1\ttest_p\ttest_r\ttest_f1";

pub fn write_report<W: Write>(w: &mut W, rows: &[ReportRow]) -> Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in rows {
        let theta = match r.theta {
            None => "-".to_string(),
            Some(t) if t.is_infinite() => if t > 0.0 { "inf" } else { "-inf" }.to_string(),
            Some(t) => format!("{t:.3}"),
        };
        writeln!(
            w,
            "{}\t{theta}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}",
            r.scorer, r.dev.precision, r.dev.recall, r.dev.f1, r.test.precision, r.test.recall, r.test.f1
        )?;
    }
    Ok(())
}
