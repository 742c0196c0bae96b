//! Relations as lemmatized dependency paths.
//!
//! A path alternates edge labels and lemmas and starts and ends with an edge
//! label: `nsubj--annex--dobj`. The first label attaches argument 1, the last
//! label attaches argument 2. Reading direction matters: the reversed path is
//! a different relation.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::{Error, Result};

/// Separator between path tokens in every text format.
pub const TOKEN_SEP: &str = "--";

const DEFAULT_FILTER: &str = include_str!("../data/filter.toml");
const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TokenKind {
    EdgeLabel,
    Lemma,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathToken {
    kind: TokenKind,
    text: String,
}

impl PathToken {
    pub fn label(text: &str) -> Self {
        PathToken {
            kind: TokenKind::EdgeLabel,
            text: text.to_lowercase(),
        }
    }

    pub fn lemma(text: &str) -> Self {
        PathToken {
            kind: TokenKind::Lemma,
            text: text.to_lowercase(),
        }
    }

    pub fn kind(&self) -> TokenKind {
        self.kind
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn is_label(&self) -> bool {
        self.kind == TokenKind::EdgeLabel
    }
}

/// Structural problems with a token sequence. These are distinct from filter
/// rejections: a structurally broken path is not a path at all.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("path is empty")]
    Empty,
    #[error("path has {0} tokens; a path needs an odd count of at least 3")]
    BadLength(usize),
    #[error("token {0} is empty")]
    EmptyToken(usize),
    #[error("token {index} (`{text}`) should be {expected:?}")]
    Alternation {
        index: usize,
        text: String,
        expected: TokenKind,
    },
    #[error("token `{0}` contains whitespace or the token separator")]
    BadCharacter(String),
    #[error("unknown dependency label `{0}`")]
    UnknownLabel(String),
}

/// Filter settings for dependency paths.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub max_lemmas: usize,
    pub max_labels: usize,
    pub subject_labels: BTreeSet<String>,
    pub argument_labels: BTreeSet<String>,
    pub banned_labels: BTreeSet<String>,
    pub label_vocabulary: BTreeSet<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        #[derive(Deserialize)]
        struct Raw {
            max_lemmas: usize,
            max_labels: usize,
            subject_labels: BTreeSet<String>,
            argument_labels: BTreeSet<String>,
            banned_labels: BTreeSet<String>,
            label_vocabulary: BTreeSet<String>,
        }
        let raw: Raw = toml::from_str(DEFAULT_FILTER).expect("built-in filter config parses");
        FilterConfig {
            max_lemmas: raw.max_lemmas,
            max_labels: raw.max_labels,
            subject_labels: raw.subject_labels,
            argument_labels: raw.argument_labels,
            banned_labels: raw.banned_labels,
            label_vocabulary: raw.label_vocabulary,
        }
    }
}

impl FilterConfig {
    /// Parses a key-value file. Keys that are absent keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: FilterConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.max_lemmas == 0 || cfg.max_labels == 0 {
            return Err(Error::Config("max_lemmas and max_labels must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn is_known_label(&self, label: &str) -> bool {
        self.label_vocabulary.contains(label)
    }
}

/// Stable 64-bit identifier derived from the token sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub u64);

impl RelationId {
    fn of(canonical: &str) -> Self {
        let digest = Sha256::digest(canonical.as_bytes());
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        RelationId(u64::from_be_bytes(bytes))
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// A structurally valid dependency path. Filter acceptance is checked
/// separately by [`validate_path`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Relation {
    tokens: Vec<PathToken>,
    id: RelationId,
}

impl PartialOrd for Relation {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Relation {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.tokens.cmp(&other.tokens)
    }
}

impl Relation {
    pub fn from_tokens(tokens: Vec<PathToken>) -> std::result::Result<Self, PathError> {
        check_structure(&tokens)?;
        let id = RelationId::of(&join_tokens(&tokens));
        Ok(Relation { tokens, id })
    }

    /// Parses `nsubj--annex--dobj`; kinds are assigned by position and labels
    /// are checked against the configured vocabulary.
    pub fn parse(text: &str, cfg: &FilterConfig) -> std::result::Result<Self, PathError> {
        let tokens = tokenize(text);
        check_vocabulary(&tokens, cfg)?;
        Self::from_tokens(tokens)
    }

    pub fn tokens(&self) -> &[PathToken] {
        &self.tokens
    }

    pub fn id(&self) -> RelationId {
        self.id
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> + '_ {
        self.tokens.iter().skip(1).step_by(2).map(PathToken::text)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> + '_ {
        self.tokens.iter().step_by(2).map(PathToken::text)
    }

    pub fn first_label(&self) -> &str {
        self.tokens[0].text()
    }

    pub fn last_label(&self) -> &str {
        self.tokens[self.tokens.len() - 1].text()
    }

    pub fn reversed(&self) -> Relation {
        let tokens: Vec<PathToken> = self.tokens.iter().rev().cloned().collect();
        let id = RelationId::of(&join_tokens(&tokens));
        Relation { tokens, id }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&join_tokens(&self.tokens))
    }
}

fn join_tokens(tokens: &[PathToken]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push_str(TOKEN_SEP);
        }
        out.push_str(&t.text);
    }
    out
}

/// Splits a path string, assigning labels to even and lemmas to odd positions.
pub fn tokenize(text: &str) -> Vec<PathToken> {
    if text.is_empty() {
        return Vec::new();
    }
    text.split(TOKEN_SEP)
        .enumerate()
        .map(|(i, t)| if i % 2 == 0 { PathToken::label(t) } else { PathToken::lemma(t) })
        .collect()
}

fn check_structure(tokens: &[PathToken]) -> std::result::Result<(), PathError> {
    if tokens.is_empty() {
        return Err(PathError::Empty);
    }
    if tokens.len() < 3 || tokens.len().is_multiple_of(2) {
        return Err(PathError::BadLength(tokens.len()));
    }
    for (i, t) in tokens.iter().enumerate() {
        if t.text.is_empty() {
            return Err(PathError::EmptyToken(i));
        }
        if t.text.contains(TOKEN_SEP) || t.text.chars().any(char::is_whitespace) {
            return Err(PathError::BadCharacter(t.text.clone()));
        }
        let expected = if i % 2 == 0 { TokenKind::EdgeLabel } else { TokenKind::Lemma };
        if t.kind != expected {
            return Err(PathError::Alternation {
                index: i,
                text: t.text.clone(),
                expected,
            });
        }
    }
    Ok(())
}

fn check_vocabulary(tokens: &[PathToken], cfg: &FilterConfig) -> std::result::Result<(), PathError> {
    match tokens.iter().find(|t| t.is_label() && !cfg.is_known_label(&t.text)) {
        Some(t) => Err(PathError::UnknownLabel(t.text.clone())),
        None => Ok(()),
    }
}

/// Why a structurally valid path was filtered out. `criterion` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub criterion: u8,
    pub detail: String,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "criterion {}: {}", self.criterion, self.detail)
    }
}

/// Applies the seven path filters in order and reports the first failure.
pub fn validate_path(
    tokens: &[PathToken],
    cfg: &FilterConfig,
) -> std::result::Result<std::result::Result<(), Rejection>, PathError> {
    check_structure(tokens)?;
    check_vocabulary(tokens, cfg)?;

    let labels: Vec<&str> = tokens.iter().step_by(2).map(PathToken::text).collect();
    let lemmas: Vec<&str> = tokens.iter().skip(1).step_by(2).map(PathToken::text).collect();
    let first = labels[0];
    let last = labels[labels.len() - 1];
    let reject = |criterion: u8, detail: String| Ok(Err(Rejection { criterion, detail }));

    if !cfg.subject_labels.contains(first) && !cfg.subject_labels.contains(last) {
        return reject(1, format!("no subject label at either end ({first}, {last})"));
    }
    if !cfg.argument_labels.contains(first) && !cfg.argument_labels.contains(last) {
        return reject(2, format!("no argument label at either end ({first}, {last})"));
    }
    if lemmas.len() > cfg.max_lemmas || labels.len() > cfg.max_labels {
        return reject(3, format!("{} lemmas, {} labels", lemmas.len(), labels.len()));
    }
    if !lemmas.iter().any(|l| l.chars().filter(|c| c.is_alphabetic()).count() >= 3) {
        return reject(4, "no lemma with three letters".into());
    }
    if first == last {
        return reject(5, format!("`{first}` at both ends"));
    }
    if let Some(banned) = labels.iter().find(|l| cfg.banned_labels.contains(**l)) {
        return reject(6, format!("banned label `{banned}`"));
    }
    if let Some(w) = lemmas.windows(2).find(|w| w[0] == w[1]) {
        return reject(7, format!("repeated lemma `{}`", w[0]));
    }
    if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
        return reject(7, format!("repeated label `{}`", w[0]));
    }
    Ok(Ok(()))
}

/// Lowercase stop word set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopList {
    words: BTreeSet<String>,
}

impl Default for StopList {
    fn default() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }
}

impl StopList {
    /// One word per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        StopList { words }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let list = Self::parse(&std::fs::read_to_string(path)?);
        if list.words.is_empty() {
            return Err(Error::Config(format!("stop list {} is empty", path.display())));
        }
        Ok(list)
    }

    pub fn from_words<I: IntoIterator<Item = S>, S: AsRef<str>>(words: I) -> Self {
        StopList {
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Lemmas of the path that are not stop words, in path order.
pub fn content_words(rel: &Relation, stop: &StopList) -> Vec<String> {
    rel.lemmas()
        .map(str::to_lowercase)
        .filter(|l| !stop.contains(l))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Voice {
    Active,
    Passive,
}

/// Which end of the path carries the subject label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathEnd {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub lemma: String,
    pub voice: Voice,
    pub subject_end: PathEnd,
}

pub const SUBJECT: &str = "nsubj";
pub const PASSIVE_SUBJECT: &str = "nsubjpass";

fn is_subject(label: &str) -> bool {
    label == SUBJECT || label == PASSIVE_SUBJECT
}

/// The lemma next to the subject label and the voice that label implies.
/// Returns `None` only for paths without a subject end, which the filter
/// never accepts.
pub fn predicate_and_voice(rel: &Relation) -> Option<Predicate> {
    let tokens = rel.tokens();
    let (label, lemma, subject_end) = if is_subject(rel.first_label()) {
        (rel.first_label(), tokens[1].text(), PathEnd::Start)
    } else if is_subject(rel.last_label()) {
        (rel.last_label(), tokens[tokens.len() - 2].text(), PathEnd::End)
    } else {
        return None;
    };
    let voice = if label == PASSIVE_SUBJECT { Voice::Passive } else { Voice::Active };
    Some(Predicate {
        lemma: lemma.to_string(),
        voice,
        subject_end,
    })
}
