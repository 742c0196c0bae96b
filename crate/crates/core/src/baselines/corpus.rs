//! One-line-per-fact text corpora derived from a graph, for training
//! relation embeddings with a word-embedding trainer.

use std::io::Write;

use crate::error::Result;
use crate::teg::TegStore;

/// `e1:<first> <relation> e2:<second>`, repeated once per occurrence.
/// `typed` names relations by their typed key (`path|type1|type2`) and
/// emits one line per occurrence in each typed subrelation.
pub fn synthetic_corpus(store: &TegStore, typed: bool) -> Vec<String> {
    let mut lines = Vec::new();
    let mut emit = |token: &str, ext: &crate::teg::Extension| {
        for ((a, b), n) in ext.iter_counted() {
            let line = format!("e1:{} {} e2:{}", store.entity_name(a), token, store.entity_name(b));
            for _ in 0..n {
                lines.push(line.clone());
            }
        }
    };
    if typed {
        for t in store.typed() {
            emit(&store.relation_key(t), &t.extension);
        }
    } else {
        for entry in store.relations() {
            emit(&entry.relation.to_string(), &entry.extension);
        }
    }
    lines
}

pub fn write_corpus<W: Write>(w: &mut W, lines: &[String]) -> Result<()> {
    for l in lines {
        writeln!(w, "{l}")?;
    }
    Ok(())
}
