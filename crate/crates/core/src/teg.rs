//! Typed event graph: relation extensions over entity pairs, the largest
//! typable subrelations of each relation, and their type signatures.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::path::{tokenize, validate_path, FilterConfig, Relation, RelationId};

/// Index of an entity inside one [`TegStore`].
pub type EntityIx = u32;

/// An ordered entity pair.
pub type Pair = (EntityIx, EntityIx);

/// A slot restriction: a concrete type or the unrestricted `⊤`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotType {
    Type(String),
    Top,
}

pub const TOP_SYMBOL: &str = "⊤";

impl SlotType {
    pub fn parse(s: &str) -> Self {
        if s == TOP_SYMBOL {
            SlotType::Top
        } else {
            SlotType::Type(s.to_string())
        }
    }

    pub fn admits(&self, types: &BTreeSet<String>) -> bool {
        match self {
            SlotType::Top => true,
            SlotType::Type(t) => types.contains(t),
        }
    }
}

impl fmt::Display for SlotType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotType::Type(t) => f.write_str(t),
            SlotType::Top => f.write_str(TOP_SYMBOL),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    First,
    Second,
}

impl Slot {
    fn of(self, pair: Pair) -> EntityIx {
        match self {
            Slot::First => pair.0,
            Slot::Second => pair.1,
        }
    }
}

/// Entity to type set. Entities missing from the map have no types.
#[derive(Debug, Clone, Default)]
pub struct TypeMap {
    map: HashMap<String, BTreeSet<String>>,
}

impl TypeMap {
    pub fn insert<I, S>(&mut self, entity: &str, types: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.map
            .entry(entity.to_string())
            .or_default()
            .extend(types.into_iter().map(Into::into));
    }

    pub fn get(&self, entity: &str) -> Option<&BTreeSet<String>> {
        self.map.get(entity)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// TSV lines `entity<TAB>type1,type2,...`.
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut types = TypeMap::default();
        for (no, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(entity), rest, None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Format(format!("type map line {}: expected 2 columns", no + 1)));
            };
            if entity.is_empty() {
                return Err(Error::Format(format!("type map line {}: empty entity", no + 1)));
            }
            let list = rest.unwrap_or("");
            types.insert(entity, list.split(',').map(str::trim).filter(|t| !t.is_empty()));
        }
        Ok(types)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }
}

/// A set of ordered entity pairs with per-pair occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Extension {
    pairs: Vec<Pair>,
    counts: Vec<u32>,
}

impl Extension {
    /// Builds an extension from pairs; repeated pairs are merged and counted.
    pub fn from_pairs<I: IntoIterator<Item = Pair>>(pairs: I) -> Self {
        let mut counted: BTreeMap<Pair, u32> = BTreeMap::new();
        for p in pairs {
            *counted.entry(p).or_default() += 1;
        }
        Self::from_counted(counted.into_iter())
    }

    fn from_counted<I: Iterator<Item = (Pair, u32)>>(it: I) -> Self {
        let (pairs, counts) = it.unzip();
        Extension { pairs, counts }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Sorted, duplicate-free pairs.
    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn iter_counted(&self) -> impl Iterator<Item = (Pair, u32)> + '_ {
        self.pairs.iter().copied().zip(self.counts.iter().copied())
    }

    pub fn contains(&self, pair: Pair) -> bool {
        self.pairs.binary_search(&pair).is_ok()
    }

    pub fn projection(&self, slot: Slot) -> BTreeSet<EntityIx> {
        self.pairs.iter().map(|&p| slot.of(p)).collect()
    }

    /// Pairs present in both extensions, in sorted order.
    pub fn intersection(&self, other: &Extension) -> Vec<Pair> {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.pairs.len() && j < other.pairs.len() {
            match self.pairs[i].cmp(&other.pairs[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(self.pairs[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    /// The same pairs with their two entities exchanged.
    pub fn swapped(&self) -> Extension {
        let mut counted: Vec<(Pair, u32)> = self.iter_counted().map(|((a, b), c)| ((b, a), c)).collect();
        counted.sort_unstable();
        Self::from_counted(counted.into_iter())
    }

    fn filter(&self, mut keep: impl FnMut(Pair) -> bool) -> Extension {
        Self::from_counted(self.iter_counted().filter(|(p, _)| keep(*p)))
    }
}

/// A relation restricted to a pair of slot types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedRelation {
    pub base: RelationId,
    pub slot_types: (SlotType, SlotType),
    pub extension: Extension,
    pub tsg: (BTreeSet<String>, BTreeSet<String>),
}

/// The `k` most frequent types in one slot, chosen greedily; each pick is
/// removed from every entity before the next. When no type remains, `⊤` is
/// emitted and the sequence ends.
pub fn top_types(ext: &Extension, slot: Slot, k: usize, types: &[BTreeSet<String>]) -> Vec<SlotType> {
    let mut chosen: Vec<SlotType> = Vec::with_capacity(k);
    let mut removed: BTreeSet<&str> = BTreeSet::new();
    for _ in 0..k {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for &p in ext.pairs() {
            for t in &types[slot.of(p) as usize] {
                if !removed.contains(t.as_str()) {
                    *counts.entry(t.as_str()).or_default() += 1;
                }
            }
        }
        // Ascending key order plus strict comparison keeps the smallest
        // type id among ties.
        let mut best: Option<(&str, usize)> = None;
        for (t, c) in counts {
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((t, c));
            }
        }
        match best {
            Some((t, _)) => {
                removed.insert(t);
                chosen.push(SlotType::Type(t.to_string()));
            }
            None => {
                chosen.push(SlotType::Top);
                break;
            }
        }
    }
    chosen
}

/// Per-slot intersection of the type sets of the member entities.
pub fn type_signature(ext: &Extension, types: &[BTreeSet<String>]) -> (BTreeSet<String>, BTreeSet<String>) {
    let intersect = |slot: Slot| -> BTreeSet<String> {
        let mut members = ext.projection(slot).into_iter();
        let Some(first) = members.next() else {
            return BTreeSet::new();
        };
        let mut acc = types[first as usize].clone();
        for e in members {
            acc.retain(|t| types[e as usize].contains(t));
            if acc.is_empty() {
                break;
            }
        }
        acc
    };
    (intersect(Slot::First), intersect(Slot::Second))
}

/// The subrelations `R_{s,u}` over the cross product of both slots' top
/// types that keep at least `r_min` pairs.
pub fn typable_subrelations(
    base: RelationId,
    ext: &Extension,
    k: usize,
    r_min: usize,
    types: &[BTreeSet<String>],
) -> Vec<TypedRelation> {
    let firsts = top_types(ext, Slot::First, k, types);
    let seconds = top_types(ext, Slot::Second, k, types);
    let mut out = Vec::new();
    for s in &firsts {
        for u in &seconds {
            let sub = ext.filter(|(a, b)| s.admits(&types[a as usize]) && u.admits(&types[b as usize]));
            if sub.len() >= r_min {
                let tsg = type_signature(&sub, types);
                out.push(TypedRelation {
                    base,
                    slot_types: (s.clone(), u.clone()),
                    extension: sub,
                    tsg,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationEntry {
    pub relation: Relation,
    pub extension: Extension,
}

/// Counters from one ingestion run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub lines: usize,
    pub malformed: usize,
    /// Filter rejections, indexed by criterion − 1.
    pub rejected: [usize; 7],
    pub accepted: usize,
    pub duplicates: usize,
}

impl IngestReport {
    pub fn rejected_total(&self) -> usize {
        self.rejected.iter().sum()
    }
}

/// Relations, their extensions and their typed subrelations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TegStore {
    entities: Vec<String>,
    entity_index: HashMap<String, EntityIx>,
    entity_types: Vec<BTreeSet<String>>,
    relations: BTreeMap<RelationId, RelationEntry>,
    typed: Vec<TypedRelation>,
}

const MAGIC: &[u8; 8] = b"RMTEG\0\0\x01";

impl TegStore {
    /// Reads `path<TAB>entity1<TAB>entity2` records. Paths failing the filter
    /// are counted per criterion; unparseable lines are skipped with a
    /// warning; more than half malformed lines aborts.
    pub fn ingest<R: Read>(reader: R, cfg: &FilterConfig) -> Result<(TegStore, IngestReport)> {
        let mut report = IngestReport::default();
        let mut names: BTreeSet<String> = BTreeSet::new();
        let mut raw: BTreeMap<RelationId, (Relation, BTreeMap<(String, String), u32>)> = BTreeMap::new();

        for (no, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            report.lines += 1;
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 || cols[1].is_empty() || cols[2].is_empty() {
                report.malformed += 1;
                warn!("line {}: expected path, entity1, entity2 (malformed so far: {})", no + 1, report.malformed);
                continue;
            }
            let tokens = tokenize(cols[0]);
            match validate_path(&tokens, cfg) {
                Err(e) => {
                    report.malformed += 1;
                    warn!("line {}: {e} (malformed so far: {})", no + 1, report.malformed);
                }
                Ok(Err(rejection)) => {
                    report.rejected[rejection.criterion as usize - 1] += 1;
                    log::debug!("line {}: `{}` rejected, {rejection}", no + 1, cols[0]);
                }
                Ok(Ok(())) => {
                    let relation = Relation::from_tokens(tokens).expect("validated path");
                    let (stored, ext) = raw
                        .entry(relation.id())
                        .or_insert_with(|| (relation.clone(), BTreeMap::new()));
                    if *stored != relation {
                        return Err(Error::IdCollision {
                            id: relation.id().to_string(),
                            first: stored.to_string(),
                            second: relation.to_string(),
                        });
                    }
                    let count = ext.entry((cols[1].to_string(), cols[2].to_string())).or_default();
                    if *count > 0 {
                        report.duplicates += 1;
                    }
                    *count += 1;
                    names.insert(cols[1].to_string());
                    names.insert(cols[2].to_string());
                    report.accepted += 1;
                }
            }
        }
        if report.malformed * 2 > report.lines {
            return Err(Error::TooManyMalformed {
                malformed: report.malformed,
                total: report.lines,
            });
        }

        let mut store = TegStore::with_entities(names.into_iter().collect());
        for (id, (relation, pairs)) in raw {
            let ext = Extension::from_counted(
                pairs
                    .into_iter()
                    .map(|((a, b), c)| ((store.entity_index[&a], store.entity_index[&b]), c)),
            );
            store.relations.insert(id, RelationEntry { relation, extension: ext });
        }
        Ok((store, report))
    }

    fn with_entities(entities: Vec<String>) -> Self {
        let entity_index = entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i as EntityIx))
            .collect();
        let entity_types = vec![BTreeSet::new(); entities.len()];
        TegStore {
            entities,
            entity_index,
            entity_types,
            relations: BTreeMap::new(),
            typed: Vec::new(),
        }
    }

    /// Builds a store from in-memory relations; used by tests and tools that
    /// already hold validated paths.
    pub fn from_relations<'a, I>(relations: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Relation, Vec<(&'a str, &'a str)>)>,
    {
        let relations: Vec<_> = relations.into_iter().collect();
        let names: BTreeSet<String> = relations
            .iter()
            .flat_map(|(_, ps)| ps.iter().flat_map(|(a, b)| [a.to_string(), b.to_string()]))
            .collect();
        let mut store = TegStore::with_entities(names.into_iter().collect());
        for (rel, pairs) in relations {
            let ext = Extension::from_pairs(
                pairs
                    .iter()
                    .map(|(a, b)| (store.entity_index[*a], store.entity_index[*b])),
            );
            if let Some(prev) = store.relations.get(&rel.id()) {
                if prev.relation != rel {
                    return Err(Error::IdCollision {
                        id: rel.id().to_string(),
                        first: prev.relation.to_string(),
                        second: rel.to_string(),
                    });
                }
            }
            store.relations.insert(rel.id(), RelationEntry { relation: rel, extension: ext });
        }
        Ok(store)
    }

    /// Attaches entity types. Entities absent from `types` get none.
    pub fn assign_types(&mut self, types: &TypeMap) {
        self.entity_types = self
            .entities
            .iter()
            .map(|e| types.get(e).cloned().unwrap_or_default())
            .collect();
    }

    /// Replaces the typed relations with `Type_k²` of every relation.
    pub fn build_typed(&mut self, k: usize, r_min: usize) {
        let types = &self.entity_types;
        let entries: Vec<(&RelationId, &RelationEntry)> = self.relations.iter().collect();
        let typed: Vec<Vec<TypedRelation>> = entries
            .par_iter()
            .map(|(id, entry)| typable_subrelations(**id, &entry.extension, k, r_min, types))
            .collect();
        self.typed = typed.into_iter().flatten().collect();
    }

    pub fn universe(&self) -> usize {
        self.entities.len()
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn entity_name(&self, ix: EntityIx) -> &str {
        &self.entities[ix as usize]
    }

    pub fn entity_ix(&self, name: &str) -> Option<EntityIx> {
        self.entity_index.get(name).copied()
    }

    pub fn entity_types(&self) -> &[BTreeSet<String>] {
        &self.entity_types
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationEntry> + '_ {
        self.relations.values()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn relation(&self, id: RelationId) -> Option<&RelationEntry> {
        self.relations.get(&id)
    }

    pub fn typed(&self) -> &[TypedRelation] {
        &self.typed
    }

    /// Looks up a typed relation by base relation and slot types.
    pub fn find_typed(&self, base: RelationId, slots: &(SlotType, SlotType)) -> Option<&TypedRelation> {
        self.typed.iter().find(|t| t.base == base && &t.slot_types == slots)
    }

    pub fn relation_key(&self, t: &TypedRelation) -> String {
        typed_key(&self.relations[&t.base].relation, &t.slot_types)
    }

    /// Share of relations with at least one typed subrelation using `⊤`.
    pub fn top_share(&self) -> f64 {
        if self.relations.is_empty() {
            return 0.0;
        }
        let with_top: BTreeSet<RelationId> = self
            .typed
            .iter()
            .filter(|t| t.slot_types.0 == SlotType::Top || t.slot_types.1 == SlotType::Top)
            .map(|t| t.base)
            .collect();
        with_top.len() as f64 / self.relations.len() as f64
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        Self::read_binary(&mut r)
    }

    /// Length-prefixed little-endian encoding; every section is sorted.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(self.entities.len() as u32)?;
        for (name, types) in self.entities.iter().zip(&self.entity_types) {
            write_str(w, name)?;
            w.write_u32::<LittleEndian>(types.len() as u32)?;
            for t in types {
                write_str(w, t)?;
            }
        }
        w.write_u32::<LittleEndian>(self.relations.len() as u32)?;
        for entry in self.relations.values() {
            write_str(w, &entry.relation.to_string())?;
            write_extension(w, &entry.extension)?;
        }
        let mut typed: Vec<&TypedRelation> = self.typed.iter().collect();
        typed.sort_by(|a, b| (a.base, &a.slot_types).cmp(&(b.base, &b.slot_types)));
        w.write_u32::<LittleEndian>(typed.len() as u32)?;
        for t in typed {
            write_str(w, &self.relations[&t.base].relation.to_string())?;
            write_slot(w, &t.slot_types.0)?;
            write_slot(w, &t.slot_types.1)?;
            write_extension(w, &t.extension)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a TEG store file".into()));
        }
        let n = r.read_u32::<LittleEndian>()? as usize;
        let mut entities = Vec::with_capacity(n);
        let mut entity_types = Vec::with_capacity(n);
        for _ in 0..n {
            entities.push(read_str(r)?);
            let nt = r.read_u32::<LittleEndian>()? as usize;
            let mut types = BTreeSet::new();
            for _ in 0..nt {
                types.insert(read_str(r)?);
            }
            entity_types.push(types);
        }
        let mut store = TegStore::with_entities(entities);
        store.entity_types = entity_types;

        let parse = |s: &str| {
            Relation::from_tokens(tokenize(s)).map_err(|e| Error::Path {
                path: s.to_string(),
                source: e,
            })
        };
        let nr = r.read_u32::<LittleEndian>()? as usize;
        for _ in 0..nr {
            let relation = parse(&read_str(r)?)?;
            let extension = read_extension(r, n)?;
            store.relations.insert(relation.id(), RelationEntry { relation, extension });
        }
        let ntyped = r.read_u32::<LittleEndian>()? as usize;
        for _ in 0..ntyped {
            let base = parse(&read_str(r)?)?.id();
            if !store.relations.contains_key(&base) {
                return Err(Error::Format("typed relation refers to an unknown relation".into()));
            }
            let s = read_slot(r)?;
            let u = read_slot(r)?;
            let extension = read_extension(r, n)?;
            let tsg = type_signature(&extension, &store.entity_types);
            store.typed.push(TypedRelation {
                base,
                slot_types: (s, u),
                extension,
                tsg,
            });
        }
        Ok(store)
    }

    /// Human-readable dump: `relations.tsv`, `extensions.tsv`, `typed.tsv`.
    pub fn export_tsv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut rel = BufWriter::new(std::fs::File::create(dir.join("relations.tsv"))?);
        let mut ext = BufWriter::new(std::fs::File::create(dir.join("extensions.tsv"))?);
        writeln!(rel, "id\tpath\tsize")?;
        writeln!(ext, "path\tentity1\tentity2\tcount")?;
        for entry in self.relations.values() {
            let path = entry.relation.to_string();
            writeln!(rel, "{}\t{}\t{}", entry.relation.id(), path, entry.extension.len())?;
            for ((a, b), c) in entry.extension.iter_counted() {
                writeln!(ext, "{}\t{}\t{}\t{}", path, self.entity_name(a), self.entity_name(b), c)?;
            }
        }
        let mut typed = BufWriter::new(std::fs::File::create(dir.join("typed.tsv"))?);
        writeln!(typed, "path\ttype1\ttype2\tsize\ttsg1\ttsg2")?;
        let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(",");
        for t in &self.typed {
            writeln!(
                typed,
                "{}\t{}\t{}\t{}\t{}\t{}",
                self.relations[&t.base].relation,
                t.slot_types.0,
                t.slot_types.1,
                t.extension.len(),
                join(&t.tsg.0),
                join(&t.tsg.1)
            )?;
        }
        rel.flush()?;
        ext.flush()?;
        typed.flush()?;
        Ok(())
    }
}

/// Token naming a typed relation: `path|type1|type2`.
pub fn typed_key(relation: &Relation, slots: &(SlotType, SlotType)) -> String {
    format!("{}|{}|{}", relation, slots.0, slots.1)
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

fn write_slot<W: Write>(w: &mut W, s: &SlotType) -> Result<()> {
    match s {
        SlotType::Top => w.write_u8(0)?,
        SlotType::Type(t) => {
            w.write_u8(1)?;
            write_str(w, t)?;
        }
    }
    Ok(())
}

fn read_slot<R: Read>(r: &mut R) -> Result<SlotType> {
    match r.read_u8()? {
        0 => Ok(SlotType::Top),
        1 => Ok(SlotType::Type(read_str(r)?)),
        tag => Err(Error::Format(format!("bad slot tag {tag}"))),
    }
}

fn write_extension<W: Write>(w: &mut W, ext: &Extension) -> Result<()> {
    w.write_u32::<LittleEndian>(ext.len() as u32)?;
    for ((a, b), c) in ext.iter_counted() {
        w.write_u32::<LittleEndian>(a)?;
        w.write_u32::<LittleEndian>(b)?;
        w.write_u32::<LittleEndian>(c)?;
    }
    Ok(())
}

fn read_extension<R: Read>(r: &mut R, entities: usize) -> Result<Extension> {
    let n = r.read_u32::<LittleEndian>()? as usize;
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        let a = r.read_u32::<LittleEndian>()?;
        let b = r.read_u32::<LittleEndian>()?;
        let c = r.read_u32::<LittleEndian>()?;
        if a as usize >= entities || b as usize >= entities {
            return Err(Error::Format("entity index out of range".into()));
        }
        items.push(((a, b), c));
    }
    if items.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::Format("extension pairs are not sorted".into()));
    }
    Ok(Extension::from_counted(items.into_iter()))
}
