//! Meta rules: premise/hypothesis templates obtained by masking material
//! that a candidate's two paths share with a single placeholder `X`.
//!
//! Three miners exist. The path miner masks a run of path tokens, the
//! character miner masks a lemma that appears bare on one side and with
//! an affix on the other, and the implicative miner finds `V xcomp X ⇒ X`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::path::{Relation, PASSIVE_SUBJECT, SUBJECT};

pub const MASK: &str = "X";
pub const DEFAULT_MIN_FREQ: usize = 10;
const XCOMP: &str = "xcomp";
const SEP: &str = "--";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetaLevel {
    Path,
    Char,
    Implicative,
}

impl fmt::Display for MetaLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetaLevel::Path => "path",
            MetaLevel::Char => "char",
            MetaLevel::Implicative => "implicative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Both,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "⇒",
            Direction::Both => "⇔",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaRule {
    pub level: MetaLevel,
    pub premise: String,
    pub hypothesis: String,
    pub direction: Direction,
    /// Sum of `instances`.
    pub freq: usize,
    /// Observed values of `X` with their counts.
    pub instances: BTreeMap<String, usize>,
}

/// One masking of one candidate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Masked {
    pub level: MetaLevel,
    pub premise: String,
    pub hypothesis: String,
    pub x: String,
}

fn texts(rel: &Relation) -> Vec<&str> {
    rel.tokens().iter().map(|t| t.text()).collect()
}

fn is_lemma_pos(i: usize) -> bool {
    i % 2 == 1
}

/// Occurrences of `needle` in `hay` starting at a lemma position.
fn occurrences(hay: &[&str], needle: &[&str]) -> Vec<usize> {
    if needle.len() > hay.len() {
        return Vec::new();
    }
    (0..=hay.len() - needle.len())
        .filter(|&i| is_lemma_pos(i) && hay[i..i + needle.len()] == *needle)
        .collect()
}

fn masked_template(tokens: &[&str], start: usize, len: usize, mask: &str) -> String {
    let mut out: Vec<&str> = tokens[..start].to_vec();
    out.push(mask);
    out.extend_from_slice(&tokens[start + len..]);
    out.join(SEP)
}

/// Masks the longest run of tokens, starting and ending with a lemma, that
/// occurs exactly once in each path. Candidates are skipped when that run
/// is not unique, or when the two templates still share a lemma, since a
/// second mask would then be needed.
pub fn mask_path(premise: &Relation, hypothesis: &Relation) -> Option<Masked> {
    let p = texts(premise);
    let h = texts(hypothesis);
    for len in (1..=p.len().min(h.len())).rev().filter(|l| l % 2 == 1) {
        let mut found: Vec<(usize, usize)> = Vec::new();
        for i in (1..p.len()).step_by(2) {
            if i + len > p.len() - 1 {
                break;
            }
            for j in occurrences(&h, &p[i..i + len]) {
                if j + len < h.len() {
                    found.push((i, j));
                }
            }
        }
        match found.as_slice() {
            [] => continue,
            [(i, j)] => {
                let (i, j) = (*i, *j);
                let rest_p: BTreeSet<&str> = p.iter().enumerate().filter(|(k, _)| is_lemma_pos(*k) && (*k < i || *k >= i + len)).map(|(_, t)| *t).collect();
                let shares_more = h
                    .iter()
                    .enumerate()
                    .any(|(k, t)| is_lemma_pos(k) && (k < j || k >= j + len) && rest_p.contains(t));
                let premise = masked_template(&p, i, len, MASK);
                let hypothesis = masked_template(&h, j, len, MASK);
                if shares_more || premise == hypothesis {
                    return None;
                }
                return Some(Masked {
                    level: MetaLevel::Path,
                    premise,
                    hypothesis,
                    x: p[i..i + len].join(SEP),
                });
            }
            _ => return None,
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Morphology {
    pub prefixes: Vec<String>,
    pub suffixes: Vec<String>,
    pub min_base_len: usize,
    #[serde(default)]
    pub irregular: BTreeMap<String, BTreeMap<String, String>>,
}

const DEFAULT_MORPHOLOGY: &str = include_str!("../data/morphology.toml");

impl Default for Morphology {
    fn default() -> Self {
        Morphology::from_toml(DEFAULT_MORPHOLOGY).expect("shipped morphology table parses")
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

impl Morphology {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("morphology table: {e}")))
    }

    /// `base` with a vowel-initial suffix attached: final `e` is dropped,
    /// and the last consonant of a one-syllable consonant-vowel-consonant
    /// word is doubled.
    pub fn attach_suffix(&self, base: &str, suffix: &str) -> String {
        if suffix.is_empty() {
            return base.to_string();
        }
        if let Some(form) = self.irregular.get(suffix).and_then(|m| m.get(base)) {
            return form.clone();
        }
        let chars: Vec<char> = base.chars().collect();
        let starts_with_vowel = suffix.chars().next().is_some_and(is_vowel);
        if starts_with_vowel && chars.last() == Some(&'e') {
            return format!("{}{suffix}", &base[..base.len() - 1]);
        }
        let n = chars.len();
        let syllables = chars
            .iter()
            .enumerate()
            .filter(|&(i, &c)| is_vowel(c) && (i == 0 || !is_vowel(chars[i - 1])))
            .count();
        if starts_with_vowel
            && n >= 3
            && syllables == 1
            && !is_vowel(chars[n - 1])
            && !matches!(chars[n - 1], 'w' | 'x' | 'y')
            && is_vowel(chars[n - 2])
            && !is_vowel(chars[n - 3])
        {
            return format!("{base}{}{suffix}", chars[n - 1]);
        }
        format!("{base}{suffix}")
    }

    /// The (prefix, suffix) that derives `derived` from `base`, if any.
    pub fn derivation(&self, base: &str, derived: &str) -> Option<(String, String)> {
        if base == derived || base.chars().filter(|c| c.is_alphabetic()).count() < self.min_base_len {
            return None;
        }
        let prefixes = std::iter::once("").chain(self.prefixes.iter().map(String::as_str));
        for prefix in prefixes {
            let Some(rest) = derived.strip_prefix(prefix) else { continue };
            let suffixes = std::iter::once("").chain(self.suffixes.iter().map(String::as_str));
            for suffix in suffixes {
                if prefix.is_empty() && suffix.is_empty() {
                    continue;
                }
                if self.attach_suffix(base, suffix) == rest {
                    return Some((prefix.to_string(), suffix.to_string()));
                }
            }
        }
        None
    }

    pub fn instantiate_char(&self, token: &str, x: &str) -> Option<String> {
        let (prefix, suffix) = token.split_once(MASK)?;
        Some(format!("{prefix}{}", self.attach_suffix(x, suffix)))
    }
}

/// Masks a lemma that occurs bare on one side and affixed on the other.
/// Exactly one such lemma pair must exist.
pub fn mask_char(premise: &Relation, hypothesis: &Relation, morph: &Morphology) -> Option<Masked> {
    let p = texts(premise);
    let h = texts(hypothesis);
    let mut hits = Vec::new();
    for i in (1..p.len()).step_by(2) {
        for j in (1..h.len()).step_by(2) {
            if let Some((pre, suf)) = morph.derivation(h[j], p[i]) {
                hits.push((i, j, format!("{pre}{MASK}{suf}"), MASK.to_string(), h[j]));
            } else if let Some((pre, suf)) = morph.derivation(p[i], h[j]) {
                hits.push((i, j, MASK.to_string(), format!("{pre}{MASK}{suf}"), p[i]));
            }
        }
    }
    let [(i, j, pm, hm, x)] = hits.as_slice() else {
        return None;
    };
    Some(Masked {
        level: MetaLevel::Char,
        premise: masked_template(&p, *i, 1, pm),
        hypothesis: masked_template(&h, *j, 1, hm),
        x: x.to_string(),
    })
}

/// Matches `[subj, V, xcomp, R...]` against `[subj', R...]`. Returns the
/// verb, the matrix subject label and the masked templates.
fn implicative_shape(embedded: &[&str], plain: &[&str]) -> Option<(String, String, String, String, String)> {
    let is_subj = |l: &str| l == SUBJECT || l == PASSIVE_SUBJECT;
    if embedded.len() < 5 || embedded[2] != XCOMP || !is_subj(embedded[0]) || !is_subj(plain[0]) {
        return None;
    }
    let rest = &embedded[3..];
    if rest != &plain[1..] {
        return None;
    }
    let x = rest[..rest.len() - 1].join(SEP);
    let last = rest[rest.len() - 1];
    Some((
        embedded[1].to_string(),
        embedded[0].to_string(),
        format!("{}{SEP}{}{SEP}{XCOMP}{SEP}{MASK}{SEP}{last}", embedded[0], embedded[1]),
        format!("{}{SEP}{MASK}{SEP}{last}", plain[0]),
        x,
    ))
}

/// An implicative verb observation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ImplicativeHit {
    pub verb: String,
    pub passive: bool,
    /// True when the embedding occurs in the premise (`V to X ⇒ X`).
    pub forward: bool,
    pub masked: Masked,
}

/// Tries both path orientations.
pub fn match_implicative(premise: &Relation, hypothesis: &Relation) -> Option<ImplicativeHit> {
    let p = texts(premise);
    let h = texts(hypothesis);
    let pr: Vec<&str> = p.iter().rev().copied().collect();
    let hr: Vec<&str> = h.iter().rev().copied().collect();
    for (a, b) in [(&p, &h), (&pr, &hr)] {
        if let Some((verb, subj, pt, ht, x)) = implicative_shape(a, b) {
            return Some(ImplicativeHit {
                verb,
                passive: subj == PASSIVE_SUBJECT,
                forward: true,
                masked: Masked {
                    level: MetaLevel::Implicative,
                    premise: pt,
                    hypothesis: ht,
                    x,
                },
            });
        }
        if let Some((verb, subj, pt, ht, x)) = implicative_shape(b, a) {
            return Some(ImplicativeHit {
                verb,
                passive: subj == PASSIVE_SUBJECT,
                forward: false,
                masked: Masked {
                    level: MetaLevel::Implicative,
                    premise: ht,
                    hypothesis: pt,
                    x,
                },
            });
        }
    }
    None
}

/// Groups masked candidates by (level, premise, hypothesis). Groups at or
/// above `min_freq` whose mirror is also at or above it merge into one
/// `⇔` rule with the summed frequency, oriented toward the more frequent
/// side (ties: smaller premise template).
pub fn aggregate(masked: impl IntoIterator<Item = Masked>, min_freq: usize) -> Vec<MetaRule> {
    let mut groups: BTreeMap<(MetaLevel, String, String), BTreeMap<String, usize>> = BTreeMap::new();
    for m in masked {
        *groups.entry((m.level, m.premise, m.hypothesis)).or_default().entry(m.x).or_default() += 1;
    }
    let freq = |g: &BTreeMap<String, usize>| g.values().sum::<usize>();
    let mut done: BTreeSet<(MetaLevel, String, String)> = BTreeSet::new();
    let mut rules = Vec::new();
    for (key, inst) in &groups {
        let f = freq(inst);
        if f < min_freq || done.contains(key) {
            continue;
        }
        let mirror = (key.0, key.2.clone(), key.1.clone());
        let mirrored = groups.get(&mirror).filter(|g| freq(g) >= min_freq && mirror != *key);
        match mirrored {
            Some(other) => {
                let fo = freq(other);
                let keep_this = f > fo || (f == fo && key.1 <= mirror.1);
                let (k, _) = if keep_this { (key, &mirror) } else { (&mirror, key) };
                let mut instances = inst.clone();
                for (x, c) in other {
                    *instances.entry(x.clone()).or_default() += c;
                }
                rules.push(MetaRule {
                    level: k.0,
                    premise: k.1.clone(),
                    hypothesis: k.2.clone(),
                    direction: Direction::Both,
                    freq: f + fo,
                    instances,
                });
                done.insert(mirror);
                done.insert(key.clone());
            }
            None => rules.push(MetaRule {
                level: key.0,
                premise: key.1.clone(),
                hypothesis: key.2.clone(),
                direction: Direction::Forward,
                freq: f,
                instances: inst.clone(),
            }),
        }
    }
    rules.sort_by(|a, b| {
        b.freq
            .cmp(&a.freq)
            .then(a.level.cmp(&b.level))
            .then_with(|| a.premise.cmp(&b.premise))
            .then_with(|| a.hypothesis.cmp(&b.hypothesis))
    });
    rules
}

pub fn mine_path_meta(cands: &[(Relation, Relation)], min_freq: usize) -> Vec<MetaRule> {
    aggregate(cands.iter().filter_map(|(p, h)| mask_path(p, h)), min_freq)
}

pub fn mine_char_meta(cands: &[(Relation, Relation)], morph: &Morphology, min_freq: usize) -> Vec<MetaRule> {
    aggregate(cands.iter().filter_map(|(p, h)| mask_char(p, h, morph)), min_freq)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImplicativeVerb {
    pub verb: String,
    pub passive: bool,
    pub freq: usize,
}

/// Meta rules of the implicative shape, and the matrix verbs of the
/// forward (`V to X ⇒ X`) ones ranked by frequency.
pub fn mine_implicatives(cands: &[(Relation, Relation)], min_freq: usize) -> (Vec<MetaRule>, Vec<ImplicativeVerb>) {
    let hits: Vec<ImplicativeHit> = cands.iter().filter_map(|(p, h)| match_implicative(p, h)).collect();
    let mut verbs: BTreeMap<(String, bool), usize> = BTreeMap::new();
    for h in hits.iter().filter(|h| h.forward) {
        *verbs.entry((h.verb.clone(), h.passive)).or_default() += 1;
    }
    let mut list: Vec<ImplicativeVerb> = verbs
        .into_iter()
        .filter(|(_, f)| *f >= min_freq)
        .map(|((verb, passive), freq)| ImplicativeVerb { verb, passive, freq })
        .collect();
    list.sort_by(|a, b| b.freq.cmp(&a.freq).then_with(|| a.verb.cmp(&b.verb)).then(a.passive.cmp(&b.passive)));
    let rules = aggregate(hits.into_iter().map(|h| h.masked), min_freq);
    (rules, list)
}

/// Substitutes `x` for the mask in a template of the given level.
pub fn instantiate(level: MetaLevel, template: &str, x: &str, morph: &Morphology) -> Option<String> {
    let tokens: Vec<&str> = template.split(SEP).collect();
    let mut out = Vec::with_capacity(tokens.len());
    let mut seen = 0;
    for t in tokens {
        if level == MetaLevel::Char && t.contains(MASK) && t != t.to_lowercase() {
            out.push(morph.instantiate_char(t, x)?);
            seen += 1;
        } else if t == MASK {
            out.push(x.to_string());
            seen += 1;
        } else {
            out.push(t.to_string());
        }
    }
    (seen == 1).then(|| out.join(SEP))
}

pub const META_HEADER: &str = "level\tpremise_template\thypothesis_template\tdirection\tfreq\texamples";

/// Up to five most frequent instances as `x:count`, comma-separated.
pub fn format_examples(instances: &BTreeMap<String, usize>) -> String {
    let mut v: Vec<(&String, &usize)> = instances.iter().collect();
    v.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    v.iter().take(5).map(|(x, c)| format!("{x}:{c}")).collect::<Vec<_>>().join(",")
}

pub fn write_meta<W: Write>(w: &mut W, min_freq: usize, rules: &[MetaRule], verbs: &[ImplicativeVerb]) -> Result<()> {
    writeln!(w, "# min_freq={min_freq}")?;
    for v in verbs {
        writeln!(
            w,
            "# implicative_verb={}\tvoice={}\tfreq={}",
            v.verb,
            if v.passive { "passive" } else { "active" },
            v.freq
        )?;
    }
    writeln!(w, "{META_HEADER}")?;
    for r in rules {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.level,
            r.premise,
            r.hypothesis,
            r.direction,
            r.freq,
            format_examples(&r.instances)
        )?;
    }
    Ok(())
}
