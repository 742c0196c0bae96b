//! Binary scorers that look candidates up in an external rule collection.
//! Rules are stored as pairs of normalized phrases: placeholders,
//! punctuation and stop words removed, remaining words kept in order.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::baselines::Scorer;
use crate::candidate::Candidate;
use crate::error::{Error, Result};
use crate::path::{content_words, Relation, StopList};

/// Layouts of rule files accepted by [`RuleBase::read`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleFormat {
    /// `premise<TAB>hypothesis[<TAB>...]`.
    Tsv,
    /// `[LHS] ||| phrase ||| paraphrase ||| ...`; each line yields
    /// phrase ⇒ paraphrase.
    Ppdb,
    /// One group of mutually equivalent phrases per line, separated by tabs
    /// or `;$`; each line yields every ordered pair of distinct members.
    Synsets,
}

impl FromStr for RuleFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(RuleFormat::Tsv),
            "ppdb" => Ok(RuleFormat::Ppdb),
            "synsets" | "synset" => Ok(RuleFormat::Synsets),
            other => Err(Error::Config(format!("unknown rule format `{other}`"))),
        }
    }
}

const PLACEHOLDERS: &[&str] = &["x", "y", "a", "b", "arg1", "arg2", "someone", "something"];

/// Canonical form of a rule phrase.
pub fn normalize_phrase(text: &str, stop: &StopList) -> String {
    let mut cleaned = String::with_capacity(text.len());
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '[' | '<' | '{' => depth += 1,
            ']' | '>' | '}' => depth = depth.saturating_sub(1),
            _ if depth > 0 => {}
            _ => cleaned.push(c),
        }
    }
    cleaned
        .split_whitespace()
        .filter(|tok| !tok.contains("::"))
        .map(|tok| {
            tok.chars()
                .filter(|c| c.is_alphanumeric() || *c == '-' || *c == '\'')
                .collect::<String>()
                .to_lowercase()
        })
        .filter(|tok| !tok.is_empty() && !PLACEHOLDERS.contains(&tok.as_str()) && !stop.contains(tok))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Key under which a relation is looked up.
pub fn relation_phrase(rel: &Relation, stop: &StopList) -> String {
    content_words(rel, stop).join(" ")
}

#[derive(Debug, Clone, Default)]
pub struct RuleBase {
    name: String,
    rules: BTreeSet<(String, String)>,
}

impl RuleBase {
    pub fn new(name: impl Into<String>) -> Self {
        RuleBase {
            name: name.into(),
            rules: BTreeSet::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Adds a rule given as raw phrases; returns false if either side is
    /// empty after normalization or both sides coincide.
    pub fn insert(&mut self, premise: &str, hypothesis: &str, stop: &StopList) -> bool {
        let p = normalize_phrase(premise, stop);
        let h = normalize_phrase(hypothesis, stop);
        if p.is_empty() || h.is_empty() || p == h {
            return false;
        }
        self.rules.insert((p, h))
    }

    pub fn contains(&self, premise: &str, hypothesis: &str) -> bool {
        self.rules.contains(&(premise.to_string(), hypothesis.to_string()))
    }

    pub fn read<R: Read>(name: &str, reader: R, format: RuleFormat, stop: &StopList) -> Result<Self> {
        let mut base = RuleBase::new(name);
        for (no, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            match format {
                RuleFormat::Tsv => {
                    let mut cols = line.split('\t');
                    let (Some(p), Some(h)) = (cols.next(), cols.next()) else {
                        return Err(Error::Format(format!("{name} line {}: expected two columns", no + 1)));
                    };
                    base.insert(p, h, stop);
                }
                RuleFormat::Ppdb => {
                    let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
                    if fields.len() < 3 {
                        return Err(Error::Format(format!("{name} line {}: expected `|||` fields", no + 1)));
                    }
                    base.insert(fields[1], fields[2], stop);
                }
                RuleFormat::Synsets => {
                    let members: Vec<&str> = line
                        .split('\t')
                        .flat_map(|f| f.split(";$"))
                        .map(str::trim)
                        .filter(|m| !m.is_empty())
                        .collect();
                    for (i, p) in members.iter().enumerate() {
                        for (j, h) in members.iter().enumerate() {
                            if i != j {
                                base.insert(p, h, stop);
                            }
                        }
                    }
                }
            }
        }
        Ok(base)
    }

    pub fn load(name: &str, path: &Path, format: RuleFormat, stop: &StopList) -> Result<Self> {
        Self::read(name, std::fs::File::open(path)?, format, stop)
    }

    /// Writes normalized rules as two-column TSV.
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> Result<()> {
        for (p, h) in &self.rules {
            writeln!(w, "{p}\t{h}")?;
        }
        Ok(())
    }
}

/// Scores 1 when any of its rule bases contains the candidate.
pub struct RuleScorer {
    name: String,
    bases: Vec<RuleBase>,
    stop: StopList,
}

impl RuleScorer {
    pub fn new(name: impl Into<String>, bases: Vec<RuleBase>, stop: StopList) -> Self {
        RuleScorer {
            name: name.into(),
            bases,
            stop,
        }
    }

    pub fn single(base: RuleBase, stop: StopList) -> Self {
        let name = base.name().to_string();
        RuleScorer::new(name, vec![base], stop)
    }
}

impl Scorer for RuleScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, cand: &Candidate) -> Option<f64> {
        let p = relation_phrase(&cand.premise, &self.stop);
        let h = relation_phrase(&cand.hypothesis, &self.stop);
        let hit = self.bases.iter().any(|b| b.contains(&p, &h));
        Some(if hit { 1.0 } else { 0.0 })
    }

    fn abstain_value(&self) -> f64 {
        0.0
    }

    fn is_binary(&self) -> bool {
        true
    }
}
