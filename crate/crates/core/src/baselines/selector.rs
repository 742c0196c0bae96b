//! Chooses, per type signature of a candidate, between a typed and an
//! untyped scorer according to which did better on dev.
//!
//! Each scorer's output is shifted by its own dev threshold so that scores
//! from both sides share the decision boundary 0. Signatures unseen on dev
//! fall back to a vote over their individual types, then to the untyped
//! scorer. If the combination does worse on dev than both scorers alone,
//! the better scorer is used everywhere.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use crate::baselines::Scorer;
use crate::candidate::Candidate;
use crate::error::{Error, Result};
use crate::eval::{evaluate, tune_threshold, EvalData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Choice {
    Typed,
    Untyped,
}

impl Choice {
    /// Typed wins only when strictly better.
    pub fn from_f1(typed: f64, untyped: f64) -> Self {
        if typed > untyped {
            Choice::Typed
        } else {
            Choice::Untyped
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Choice::Typed => "typed",
            Choice::Untyped => "untyped",
        }
    }
}

impl FromStr for Choice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "typed" => Ok(Choice::Typed),
            "untyped" => Ok(Choice::Untyped),
            other => Err(Error::Format(format!("unknown choice `{other}`"))),
        }
    }
}

/// Dev F1 of both scorers on one group of candidates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    pub size: usize,
    pub typed_f1: f64,
    pub untyped_f1: f64,
}

impl GroupStats {
    pub fn choice(&self) -> Choice {
        Choice::from_f1(self.typed_f1, self.untyped_f1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorModel {
    pub typed_theta: f64,
    pub untyped_theta: f64,
    pub typed_f1: f64,
    pub untyped_f1: f64,
    pub by_signature: BTreeMap<(String, String), GroupStats>,
    pub by_type: BTreeMap<String, GroupStats>,
    /// Set when the guard replaced per-signature choices.
    pub uniform: Option<Choice>,
}

impl SelectorModel {
    pub fn choose(&self, signature: &(String, String)) -> Choice {
        if let Some(c) = self.uniform {
            return c;
        }
        if let Some(g) = self.by_signature.get(signature) {
            return g.choice();
        }
        let mut votes = [0usize; 2];
        let types: BTreeSet<&String> = [&signature.0, &signature.1].into_iter().collect();
        for t in types {
            if let Some(g) = self.by_type.get(t) {
                votes[g.choice() as usize] += 1;
            }
        }
        if votes[Choice::Typed as usize] > votes[Choice::Untyped as usize] {
            Choice::Typed
        } else {
            Choice::Untyped
        }
    }

    fn offset(&self, c: Choice) -> f64 {
        let t = match c {
            Choice::Typed => self.typed_theta,
            Choice::Untyped => self.untyped_theta,
        };
        if t.is_finite() {
            t
        } else {
            0.0
        }
    }

    /// Fits on dev candidates.
    pub fn fit(typed: &dyn Scorer, untyped: &dyn Scorer, dev: &EvalData) -> Self {
        let ts = dev.scores(typed);
        let us = dev.scores(untyped);
        let tt = tune_threshold(&ts, &dev.lemma, &dev.gold);
        let tu = tune_threshold(&us, &dev.lemma, &dev.gold);

        let group_stats = |members: &[usize]| {
            let pick = |v: &[f64]| members.iter().map(|&i| v[i]).collect::<Vec<_>>();
            let lemma: Vec<bool> = members.iter().map(|&i| dev.lemma[i]).collect();
            let gold: Vec<bool> = members.iter().map(|&i| dev.gold[i]).collect();
            GroupStats {
                size: members.len(),
                typed_f1: evaluate(&pick(&ts), &lemma, &gold, tt.theta).f1,
                untyped_f1: evaluate(&pick(&us), &lemma, &gold, tu.theta).f1,
            }
        };

        let mut sig_groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
        let mut type_groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, l) in dev.items.iter().enumerate() {
            let sig = l.cand.signature();
            type_groups.entry(sig.0.clone()).or_default().push(i);
            if sig.1 != sig.0 {
                type_groups.entry(sig.1.clone()).or_default().push(i);
            }
            sig_groups.entry(sig).or_default().push(i);
        }

        let mut model = SelectorModel {
            typed_theta: tt.theta,
            untyped_theta: tu.theta,
            typed_f1: tt.dev.f1,
            untyped_f1: tu.dev.f1,
            by_signature: sig_groups.iter().map(|(k, m)| (k.clone(), group_stats(m))).collect(),
            by_type: type_groups.iter().map(|(k, m)| (k.clone(), group_stats(m))).collect(),
            uniform: None,
        };

        let combined: Vec<f64> = dev.items.iter().map(|l| model.calibrated(typed, untyped, &l.cand)).collect();
        let f1 = tune_threshold(&combined, &dev.lemma, &dev.gold).dev.f1;
        if f1 < tt.dev.f1.min(tu.dev.f1) {
            log::warn!(
                "per-signature selection reaches dev F1 {f1:.3} below both scorers ({:.3}, {:.3}); using one scorer throughout",
                tt.dev.f1,
                tu.dev.f1
            );
            model.uniform = Some(Choice::from_f1(tt.dev.f1, tu.dev.f1));
        }
        model
    }

    pub fn calibrated(&self, typed: &dyn Scorer, untyped: &dyn Scorer, cand: &Candidate) -> f64 {
        let c = self.choose(&cand.signature());
        let raw = match c {
            Choice::Typed => typed.value(cand),
            Choice::Untyped => untyped.value(cand),
        };
        raw - self.offset(c)
    }

    /// Line-oriented text form holding every statistic the choices derive
    /// from.
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "theta\t{}\t{}", self.typed_theta, self.untyped_theta)?;
        writeln!(w, "f1\t{}\t{}", self.typed_f1, self.untyped_f1)?;
        if let Some(u) = self.uniform {
            writeln!(w, "uniform\t{}", u.as_str())?;
        }
        for ((s, u), g) in &self.by_signature {
            writeln!(w, "signature\t{s}\t{u}\t{}\t{}\t{}\t{}", g.size, g.typed_f1, g.untyped_f1, g.choice().as_str())?;
        }
        for (t, g) in &self.by_type {
            writeln!(w, "type\t{t}\t{}\t{}\t{}\t{}", g.size, g.typed_f1, g.untyped_f1, g.choice().as_str())?;
        }
        Ok(())
    }

    /// Reads [`write`](Self::write) output. Choices are recomputed from the
    /// stored statistics and must agree with the stored choice column.
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let bad = |no: usize, what: &str| Error::Format(format!("selector line {}: {what}", no + 1));
        let num = |no: usize, s: &str| s.parse::<f64>().map_err(|_| bad(no, "bad number"));
        let mut m = SelectorModel {
            typed_theta: 0.0,
            untyped_theta: 0.0,
            typed_f1: 0.0,
            untyped_f1: 0.0,
            by_signature: BTreeMap::new(),
            by_type: BTreeMap::new(),
            uniform: None,
        };
        let stats = |no: usize, f: &[&str]| -> Result<GroupStats> {
            let g = GroupStats {
                size: f[0].parse().map_err(|_| bad(no, "bad size"))?,
                typed_f1: num(no, f[1])?,
                untyped_f1: num(no, f[2])?,
            };
            if g.choice() != f[3].parse()? {
                return Err(bad(no, "stored choice disagrees with its statistics"));
            }
            Ok(g)
        };
        for (no, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let f: Vec<&str> = line.split('\t').collect();
            match (f[0], f.len()) {
                ("theta", 3) => (m.typed_theta, m.untyped_theta) = (num(no, f[1])?, num(no, f[2])?),
                ("f1", 3) => (m.typed_f1, m.untyped_f1) = (num(no, f[1])?, num(no, f[2])?),
                ("uniform", 2) => m.uniform = Some(f[1].parse()?),
                ("signature", 7) => {
                    m.by_signature.insert((f[1].to_string(), f[2].to_string()), stats(no, &f[3..])?);
                }
                ("type", 6) => {
                    m.by_type.insert(f[1].to_string(), stats(no, &f[2..])?);
                }
                ("", 1) => {}
                _ => return Err(bad(no, "unrecognized record")),
            }
        }
        Ok(m)
    }
}

pub struct TsgSelector<T, U> {
    name: String,
    typed: T,
    untyped: U,
    model: SelectorModel,
}

impl<T: Scorer, U: Scorer> TsgSelector<T, U> {
    pub fn fit(name: impl Into<String>, typed: T, untyped: U, dev: &EvalData) -> Self {
        let model = SelectorModel::fit(&typed, &untyped, dev);
        TsgSelector {
            name: name.into(),
            typed,
            untyped,
            model,
        }
    }

    pub fn with_model(name: impl Into<String>, typed: T, untyped: U, model: SelectorModel) -> Self {
        TsgSelector {
            name: name.into(),
            typed,
            untyped,
            model,
        }
    }

    pub fn model(&self) -> &SelectorModel {
        &self.model
    }
}

impl<T: Scorer, U: Scorer> Scorer for TsgSelector<T, U> {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, cand: &Candidate) -> Option<f64> {
        Some(self.model.calibrated(&self.typed, &self.untyped, cand))
    }

    fn abstain_value(&self) -> f64 {
        let a = self.typed.abstain_value() - self.model.offset(Choice::Typed);
        let b = self.untyped.abstain_value() - self.model.offset(Choice::Untyped);
        a.min(b)
    }
}
