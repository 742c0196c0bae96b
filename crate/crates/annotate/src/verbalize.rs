//! Turns dependency paths into present-tense sentences with typed
//! placeholders, e.g. `location[B] is annexing location[A]`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Serialize;

use relmine_core::path::{predicate_and_voice, PathEnd, Relation, Voice};
use relmine_core::teg::{Slot, SlotType, TegStore};
use relmine_core::Candidate;

use crate::error::{Error, Result};

const BUILTIN_LEXICON: &str = include_str!("../data/lexicon.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordKind {
    Verb,
    /// Rendered in the simple present, never progressive.
    Stative,
    Copula,
    Noun,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordForms {
    pub third_person: String,
    pub present_participle: String,
    pub past_participle: String,
    pub kind: WordKind,
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, WordForms>,
}

impl Lexicon {
    pub fn builtin() -> Self {
        let mut lex = Lexicon::default();
        lex.extend_tsv(BUILTIN_LEXICON).expect("built-in lexicon parses");
        lex
    }

    /// Adds or overrides entries from tab-separated lines
    /// `lemma third_person present_participle past_participle kind`.
    pub fn extend_tsv(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(Error::Format(format!("lexicon line {}: expected 5 columns", no + 1)));
            }
            let kind = match cols[4] {
                "verb" => WordKind::Verb,
                "stative" => WordKind::Stative,
                "copula" => WordKind::Copula,
                "noun" => WordKind::Noun,
                other => return Err(Error::Format(format!("lexicon line {}: unknown kind `{other}`", no + 1))),
            };
            self.entries.insert(
                cols[0].to_string(),
                WordForms {
                    third_person: cols[1].to_string(),
                    present_participle: cols[2].to_string(),
                    past_participle: cols[3].to_string(),
                    kind,
                },
            );
        }
        Ok(())
    }

    pub fn with_file(mut self, path: &Path) -> Result<Self> {
        self.extend_tsv(&std::fs::read_to_string(path)?)?;
        Ok(self)
    }

    pub fn get(&self, lemma: &str) -> Option<&WordForms> {
        self.entries.get(lemma)
    }
}

fn is_vowel(c: char) -> bool {
    "aeiou".contains(c)
}

/// Guessed forms for a verb missing from the lexicon.
pub fn guess_forms(lemma: &str) -> WordForms {
    let chars: Vec<char> = lemma.chars().collect();
    let n = chars.len();
    let cvc = n >= 3
        && !is_vowel(chars[n - 1])
        && !"wxy".contains(chars[n - 1])
        && is_vowel(chars[n - 2])
        && !is_vowel(chars[n - 3])
        && chars.iter().filter(|c| is_vowel(**c)).count() == 1;
    let stem_ing = if let Some(stem) = lemma.strip_suffix("ie") {
        format!("{stem}y")
    } else if lemma.ends_with('e') && !lemma.ends_with("ee") && n > 2 {
        lemma[..lemma.len() - 1].to_string()
    } else if cvc {
        format!("{lemma}{}", chars[n - 1])
    } else {
        lemma.to_string()
    };
    let past = if lemma.ends_with('e') {
        format!("{lemma}d")
    } else if lemma.ends_with('y') && n > 1 && !is_vowel(chars[n - 2]) {
        format!("{}ied", &lemma[..lemma.len() - 1])
    } else if cvc {
        format!("{lemma}{}ed", chars[n - 1])
    } else {
        format!("{lemma}ed")
    };
    let third = if ["s", "sh", "ch", "x", "z", "o"].iter().any(|s| lemma.ends_with(s)) {
        format!("{lemma}es")
    } else if lemma.ends_with('y') && n > 1 && !is_vowel(chars[n - 2]) {
        format!("{}ies", &lemma[..lemma.len() - 1])
    } else {
        format!("{lemma}s")
    };
    WordForms {
        third_person: third,
        present_participle: format!("{stem_ing}ing"),
        past_participle: past,
        kind: WordKind::Verb,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verbalization {
    pub sentence: String,
    /// Placeholder text for A and B, e.g. `location[A]`.
    pub placeholders: (String, String),
    /// Up to three example entity names for A and B.
    pub examples: (Vec<String>, Vec<String>),
    /// Set when the predicate was not in the lexicon and its forms were guessed.
    pub fallback: bool,
}

fn type_name(t: &SlotType) -> String {
    match t {
        SlotType::Type(name) => name.replace('_', " "),
        SlotType::Top => "entity".to_string(),
    }
}

fn article(word: &str) -> &'static str {
    if word.starts_with(is_vowel) {
        "an"
    } else {
        "a"
    }
}

/// Renders `rel`, whose first and second slots carry `types`. With
/// `reversed`, the path's first slot is B.
pub fn verbalize_relation(rel: &Relation, types: &(SlotType, SlotType), reversed: bool, lex: &Lexicon) -> Verbalization {
    let (first_letter, second_letter) = if reversed { ('B', 'A') } else { ('A', 'B') };
    let first = format!("{}[{first_letter}]", type_name(&types.0));
    let second = format!("{}[{second_letter}]", type_name(&types.1));
    let placeholders = if reversed {
        (second.clone(), first.clone())
    } else {
        (first.clone(), second.clone())
    };

    let pred = predicate_and_voice(rel);
    let mut texts: Vec<&str> = rel.tokens().iter().map(|t| t.text()).collect();
    let (subject, object) = match pred.as_ref().map(|p| p.subject_end) {
        Some(PathEnd::End) => {
            texts.reverse();
            (second, first)
        }
        _ => (first, second),
    };
    let lemma = texts[1];
    let (forms, fallback) = match lex.get(lemma) {
        Some(f) => (f.clone(), false),
        None => (guess_forms(lemma), true),
    };
    let passive = pred.as_ref().is_some_and(|p| p.voice == Voice::Passive);
    let ends_possessive = texts.last() == Some(&"poss");
    let rest_lemmas = (texts.len() - 1) / 2 - 1;

    let mut words: Vec<String> = vec![subject];
    match (forms.kind, passive) {
        (WordKind::Copula, _) => words.push("is".into()),
        (WordKind::Noun, _) => {
            words.push("is".into());
            if ends_possessive && rest_lemmas == 0 {
                words.push(format!("{object}'s"));
            } else {
                words.push(article(lemma).into());
            }
            words.push(lemma.into());
        }
        (WordKind::Stative, false) => words.push(forms.third_person.clone()),
        (WordKind::Stative, true) => words.extend(["is".into(), forms.past_participle.clone()]),
        (WordKind::Verb, false) => words.extend(["is".into(), forms.present_participle.clone()]),
        (WordKind::Verb, true) => words.extend(["is".into(), "being".into(), forms.past_participle.clone()]),
    }
    let mut placed_object = forms.kind == WordKind::Noun && ends_possessive && rest_lemmas == 0;
    let mut i = 2;
    while i + 1 < texts.len() {
        let (label, word) = (texts[i], texts[i + 1]);
        if label == "xcomp" {
            words.push("to".into());
        }
        if ends_possessive && !placed_object && i + 3 == texts.len() {
            words.push(format!("{object}'s"));
            placed_object = true;
        }
        words.push(word.into());
        i += 2;
    }
    if !placed_object {
        words.push(object);
    }
    Verbalization {
        sentence: words.join(" "),
        placeholders,
        examples: (Vec::new(), Vec::new()),
        fallback,
    }
}

pub fn question(v: &Verbalization) -> String {
    format!("Is it certain that {}?", v.sentence)
}

/// The most frequent entities of each slot of the premise extension,
/// aligned to A and B.
pub fn example_entities(store: &TegStore, cand: &Candidate, n: usize) -> (Vec<String>, Vec<String>) {
    let Some(entry) = store.relation(cand.premise.id()) else {
        return (Vec::new(), Vec::new());
    };
    let ext = store
        .find_typed(cand.premise.id(), &cand.premise_types)
        .map(|t| &t.extension)
        .unwrap_or(&entry.extension);
    let top = |slot: Slot| -> Vec<String> {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for ((a, b), c) in ext.iter_counted() {
            let e = if slot == Slot::First { a } else { b };
            *counts.entry(store.entity_name(e)).or_default() += c as u64;
        }
        let mut v: Vec<(&str, u64)> = counts.into_iter().collect();
        v.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(y.0)));
        v.into_iter().take(n).map(|(e, _)| e.to_string()).collect()
    };
    let (first, second) = (top(Slot::First), top(Slot::Second));
    if cand.premise_reversed {
        (second, first)
    } else {
        (first, second)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CandidateText {
    pub premise: Verbalization,
    pub hypothesis: Verbalization,
    pub question: String,
}

pub fn verbalize(cand: &Candidate, lex: &Lexicon, store: Option<&TegStore>) -> CandidateText {
    let mut premise = verbalize_relation(&cand.premise, &cand.premise_types, cand.premise_reversed, lex);
    if let Some(store) = store {
        premise.examples = example_entities(store, cand, 3);
    }
    let hypothesis = verbalize_relation(&cand.hypothesis, &cand.hypothesis_types, cand.hypothesis_reversed, lex);
    let question = question(&hypothesis);
    CandidateText {
        premise,
        hypothesis,
        question,
    }
}
