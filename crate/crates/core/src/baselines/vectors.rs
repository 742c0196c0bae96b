//! Dense vector tables and the cosine-based scorers built on them.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::baselines::Scorer;
use crate::candidate::Candidate;
use crate::error::{Error, Result};
use crate::path::Relation;
use crate::teg::typed_key;

/// Token → vector lookup stored row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VectorTable {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl VectorTable {
    pub fn new(dim: usize) -> Self {
        VectorTable {
            dim,
            ..Default::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Inserts or replaces a vector.
    pub fn insert(&mut self, token: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Format(format!(
                "vector for `{token}` has {} components, expected {}",
                vector.len(),
                self.dim
            )));
        }
        match self.index.get(token) {
            Some(&i) => self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(vector),
            None => {
                self.index.insert(token.to_string(), self.tokens.len());
                self.tokens.push(token.to_string());
                self.data.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Reads the word2vec text format: a `count dim` header line, then one
    /// `token v1 ... vdim` line per vector.
    pub fn read_text<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty vector file".into()))??;
        let mut head = header.split_whitespace();
        let (Some(count), Some(dim), None) = (head.next(), head.next(), head.next()) else {
            return Err(Error::Format(format!("bad vector header `{header}`")));
        };
        let count: usize = count.parse().map_err(|_| Error::Format(format!("bad vector count `{count}`")))?;
        let dim: usize = dim.parse().map_err(|_| Error::Format(format!("bad dimension `{dim}`")))?;
        let mut table = VectorTable::new(dim);
        let mut row = Vec::with_capacity(dim);
        for (no, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ').filter(|p| !p.is_empty());
            let token = parts.next().unwrap_or_default();
            row.clear();
            for p in parts {
                row.push(
                    p.parse::<f64>()
                        .map_err(|_| Error::Format(format!("vector line {}: bad number `{p}`", no + 2)))?,
                );
            }
            table.insert(token, &row)?;
        }
        if table.len() != count {
            return Err(Error::Format(format!("header announces {count} vectors, found {}", table.len())));
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_text(std::fs::File::open(path)?)
    }

    pub fn write_text<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (i, tok) in self.tokens.iter().enumerate() {
            write!(w, "{tok}")?;
            for v in &self.data[i * self.dim..(i + 1) * self.dim] {
                write!(w, " {v:.8}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_text(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity; `None` for a zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot(a, b) / (na * nb))
}

fn average<'a, I: IntoIterator<Item = &'a str>>(tokens: I, table: &VectorTable) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; table.dim()];
    let mut n = 0usize;
    for t in tokens {
        if let Some(v) = table.get(t) {
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    sum.iter_mut().for_each(|s| *s /= n as f64);
    Some(sum)
}

/// Cosine of the averaged vectors of two token lists. Tokens missing from
/// the table are skipped; `None` if either side has no known token.
pub fn avg_vector_cosine<'a, P, H>(premise: P, hypothesis: H, table: &VectorTable) -> Option<f64>
where
    P: IntoIterator<Item = &'a str>,
    H: IntoIterator<Item = &'a str>,
{
    let p = average(premise, table)?;
    let h = average(hypothesis, table)?;
    cosine(&p, &h)
}

/// Averaged word vectors over the lemmas of each path.
pub struct WordAverageScorer {
    name: String,
    table: VectorTable,
}

impl WordAverageScorer {
    pub fn new(name: impl Into<String>, table: VectorTable) -> Self {
        WordAverageScorer {
            name: name.into(),
            table,
        }
    }
}

impl Scorer for WordAverageScorer {
    fn name(&self) -> &str {
        &self.name
    }
    fn score(&self, cand: &Candidate) -> Option<f64> {
        avg_vector_cosine(cand.premise.lemmas(), cand.hypothesis.lemmas(), &self.table)
    }
    fn abstain_value(&self) -> f64 {
        -1.0
    }
}

/// How a relation is named in an embedding table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationTokens {
    Untyped,
    Typed,
}

impl RelationTokens {
    pub fn premise_token(self, cand: &Candidate) -> String {
        self.token(&cand.premise, &cand.premise_types)
    }

    pub fn hypothesis_token(self, cand: &Candidate) -> String {
        self.token(&cand.hypothesis, &cand.hypothesis_types)
    }

    fn token(self, rel: &Relation, slots: &(crate::teg::SlotType, crate::teg::SlotType)) -> String {
        match self {
            RelationTokens::Untyped => rel.to_string(),
            RelationTokens::Typed => typed_key(rel, slots),
        }
    }
}

/// Cosine between whole-relation vectors.
pub struct RelationVectorScorer {
    name: String,
    table: VectorTable,
    tokens: RelationTokens,
}

impl RelationVectorScorer {
    pub fn new(name: impl Into<String>, table: VectorTable, tokens: RelationTokens) -> Self {
        RelationVectorScorer {
            name: name.into(),
            table,
            tokens,
        }
    }
}

impl Scorer for RelationVectorScorer {
    fn name(&self) -> &str {
        &self.name
    }
    fn score(&self, cand: &Candidate) -> Option<f64> {
        let p = self.table.get(&self.tokens.premise_token(cand))?;
        let h = self.table.get(&self.tokens.hypothesis_token(cand))?;
        cosine(p, h)
    }
    fn abstain_value(&self) -> f64 {
        -1.0
    }
}
