//! Independent reference implementations and random fixtures shared by the
//! integration tests and the acceptance suite. Everything here works on
//! entity names and plain sets, not on the store's indexed structures.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relmine_core::baselines::inclusion::{inv_cl, weeds_prec, Features};
use relmine_core::baselines::kge::{complex_loss_and_grad, transe_margin_loss_and_grad, Complex};
use relmine_core::baselines::sgns::sgns_loss_and_grad;
use relmine_core::discovery::{entity_support_ratio, relevance, significance, DiscoveryConfig};
use relmine_core::eval::{candidate_thresholds, evaluate, tune_threshold};
use relmine_core::path::{FilterConfig, Relation};
use relmine_core::teg::{Extension, TegStore, TypeMap, TOP_SYMBOL};

pub type NamePair = (String, String);
pub type Relations = BTreeMap<String, BTreeSet<NamePair>>;
pub type Types = BTreeMap<String, BTreeSet<String>>;

const VERBS: &[&str] = &[
    "annex", "invade", "visit", "beat", "defeat", "play", "win", "lose", "join", "leave", "rule", "found", "lead",
    "own", "buy", "sell", "attack", "border", "govern", "host", "sign", "hire", "fire", "meet", "marry", "love",
    "hate", "serve", "coach", "train", "face", "battle",
];
const TAILS: &[&str] = &["dobj", "pobj", "iobj"];
const TYPE_POOL: &[&str] = &["location", "organization", "person", "sports_team", "written_work"];

#[derive(Debug, Clone)]
pub struct Synth {
    pub relations: Relations,
    pub types: Types,
}

impl Synth {
    pub fn triples_tsv(&self) -> String {
        let mut s = String::new();
        for (path, pairs) in &self.relations {
            for (a, b) in pairs {
                s.push_str(&format!("{path}\t{a}\t{b}\n"));
            }
        }
        s
    }

    pub fn types_tsv(&self) -> String {
        let mut s = String::new();
        for (e, ts) in &self.types {
            if !ts.is_empty() {
                s.push_str(&format!("{e}\t{}\n", ts.iter().cloned().collect::<Vec<_>>().join(",")));
            }
        }
        s
    }

    pub fn universe(&self) -> usize {
        let ents: BTreeSet<&String> = self.relations.values().flatten().flat_map(|(a, b)| [a, b]).collect();
        ents.len()
    }
}

/// A random graph whose relations draw pairs from a few shared pools so
/// that extensions overlap.
pub fn synth_graph(seed: u64, max_entities: usize, max_relations: usize) -> Synth {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_ent = rng.gen_range(10..=max_entities);
    let entities: Vec<String> = (0..n_ent).map(|i| format!("ent{i:02}")).collect();
    let mut types = Types::new();
    for e in &entities {
        let n = rng.gen_range(0..=3);
        let ts: BTreeSet<String> = TYPE_POOL.choose_multiple(&mut rng, n).map(|t| t.to_string()).collect();
        types.insert(e.clone(), ts);
    }
    let pools: Vec<Vec<NamePair>> = (0..3)
        .map(|_| {
            (0..rng.gen_range(8..30))
                .map(|_| (entities.choose(&mut rng).unwrap().clone(), entities.choose(&mut rng).unwrap().clone()))
                .collect()
        })
        .collect();
    let n_rel = rng.gen_range(4..=max_relations);
    let mut paths: Vec<String> = Vec::new();
    for v in VERBS {
        for t in TAILS {
            paths.push(format!("nsubj--{v}--{t}"));
        }
    }
    paths.shuffle(&mut rng);
    let mut relations = Relations::new();
    for path in paths.into_iter().take(n_rel) {
        let pool = &pools[rng.gen_range(0..pools.len())];
        let n = rng.gen_range(1..=pool.len());
        let mut pairs: BTreeSet<NamePair> = pool.choose_multiple(&mut rng, n).cloned().collect();
        for _ in 0..rng.gen_range(0..4) {
            pairs.insert((entities.choose(&mut rng).unwrap().clone(), entities.choose(&mut rng).unwrap().clone()));
        }
        relations.insert(path, pairs);
    }
    Synth { relations, types }
}

fn types_of<'a>(types: &'a Types, e: &str) -> BTreeSet<&'a str> {
    types.get(e).map(|s| s.iter().map(String::as_str).collect()).unwrap_or_default()
}

/// Greedy most-frequent types of one slot (0 or 1), re-counted from
/// scratch after each pick, ending in `⊤` when nothing is left.
pub fn oracle_top_types(pairs: &BTreeSet<NamePair>, slot: usize, k: usize, types: &Types) -> Vec<String> {
    let mut taken: Vec<String> = Vec::new();
    while taken.len() < k {
        let mut freq: Vec<(String, usize)> = Vec::new();
        let all: BTreeSet<&str> = TYPE_POOL.iter().copied().chain(types.values().flatten().map(String::as_str)).collect();
        for t in all {
            if taken.iter().any(|x| x == t) {
                continue;
            }
            let n = pairs
                .iter()
                .filter(|p| types_of(types, if slot == 0 { &p.0 } else { &p.1 }).contains(t))
                .count();
            if n > 0 {
                freq.push((t.to_string(), n));
            }
        }
        let max = freq.iter().map(|f| f.1).max();
        match max {
            None => {
                taken.push(TOP_SYMBOL.to_string());
                break;
            }
            Some(m) => {
                let first = freq.iter().filter(|f| f.1 == m).map(|f| f.0.clone()).min().unwrap();
                taken.push(first);
            }
        }
    }
    taken
}

fn admits(slot_type: &str, types: &Types, e: &str) -> bool {
    slot_type == TOP_SYMBOL || types_of(types, e).contains(slot_type)
}

/// Key `path|s|u` → typed extension, by enumerating every pair of types
/// (and `⊤`) and keeping those on both top-k lists with ≥ r_min pairs.
pub fn oracle_typed(rels: &Relations, types: &Types, k: usize, r_min: usize) -> BTreeMap<String, BTreeSet<NamePair>> {
    let mut all: Vec<String> = types.values().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    all.push(TOP_SYMBOL.to_string());
    let mut out = BTreeMap::new();
    for (path, pairs) in rels {
        let first = oracle_top_types(pairs, 0, k, types);
        let second = oracle_top_types(pairs, 1, k, types);
        for s in &all {
            for u in &all {
                if !first.contains(s) || !second.contains(u) {
                    continue;
                }
                let sub: BTreeSet<NamePair> = pairs
                    .iter()
                    .filter(|(a, b)| admits(s, types, a) && admits(u, types, b))
                    .cloned()
                    .collect();
                if sub.len() >= r_min {
                    out.insert(format!("{path}|{s}|{u}"), sub);
                }
            }
        }
    }
    out
}

pub fn oracle_tsg(pairs: &BTreeSet<NamePair>, types: &Types) -> (BTreeSet<String>, BTreeSet<String>) {
    let slot = |f: &dyn Fn(&NamePair) -> &String| {
        let mut sets = pairs.iter().map(|p| types.get(f(p)).cloned().unwrap_or_default());
        let first = sets.next().unwrap_or_default();
        sets.fold(first, |acc, s| acc.intersection(&s).cloned().collect())
    };
    (slot(&|p| &p.0), slot(&|p| &p.1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleScores {
    pub relv: f64,
    pub sigma: f64,
    pub esr: f64,
}

fn oracle_sigma(na: f64, nb: f64, shared: f64, universe: f64) -> f64 {
    let p_b = nb / (universe * universe);
    let p_b_a = shared / na;
    let xlogy = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    let lrs = 2.0 * na * (xlogy(p_b_a, p_b) + xlogy(1.0 - p_b_a, 1.0 - p_b));
    p_b_a * lrs.max(0.0)
}

/// Every ordered pair of typed relations with different base paths, the
/// six criteria re-derived, then the per-hypothesis top-N by product.
pub fn oracle_discover(
    typed: &BTreeMap<String, BTreeSet<NamePair>>,
    types: &Types,
    universe: usize,
    cfg: &DiscoveryConfig,
) -> BTreeMap<(String, String), OracleScores> {
    let base = |key: &str| key.split('|').next().unwrap().to_string();
    let mut by_hyp: BTreeMap<&String, Vec<(&String, OracleScores)>> = BTreeMap::new();
    for (ka, a) in typed {
        for (kb, b) in typed {
            if base(ka) == base(kb) {
                continue;
            }
            let (ta, tb) = (oracle_tsg(a, types), oracle_tsg(b, types));
            if ta.0.intersection(&tb.0).next().is_none() || ta.1.intersection(&tb.1).next().is_none() {
                continue;
            }
            let shared: BTreeSet<&NamePair> = a.intersection(b).collect();
            if shared.len() < cfg.r_min {
                continue;
            }
            let firsts: BTreeSet<&String> = shared.iter().map(|p| &p.0).collect();
            let seconds: BTreeSet<&String> = shared.iter().map(|p| &p.1).collect();
            if firsts.len() < cfg.r_min || seconds.len() < cfg.r_min {
                continue;
            }
            let (na, nb, ns, u) = (a.len() as f64, b.len() as f64, shared.len() as f64, universe as f64);
            if nb >= u * u {
                continue;
            }
            let relv = ns * u * u / (na * nb);
            let sigma = oracle_sigma(na, nb, ns, u);
            let ents: BTreeSet<&String> = firsts.union(&seconds).copied().collect();
            let esr = ents.len() as f64 / (2.0 * ns);
            if relv >= cfg.theta_relv && sigma >= cfg.theta_sigma && esr >= cfg.theta_esr {
                by_hyp.entry(kb).or_default().push((ka, OracleScores { relv, sigma, esr }));
            }
        }
    }
    let mut out = BTreeMap::new();
    for (h, mut list) in by_hyp {
        list.sort_by(|x, y| {
            let px = x.1.relv * x.1.sigma * x.1.esr;
            let py = y.1.relv * y.1.sigma * y.1.esr;
            py.partial_cmp(&px).unwrap().then_with(|| x.0.cmp(y.0))
        });
        list.truncate(cfg.max_premises_per_hypothesis);
        for (p, s) in list {
            out.insert((p.clone(), h.clone()), s);
        }
    }
    out
}

/// Relative closeness for comparing two computations of one quantity.
pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn random_extension(rng: &mut ChaCha8Rng, n_entities: u32) -> Extension {
    let n = rng.gen_range(1..40);
    Extension::from_pairs((0..n).map(|_| (rng.gen_range(0..n_entities), rng.gen_range(0..n_entities))))
}

/// Relv symmetry, σ ≥ 0 and esr ∈ (0, 1] on random extension pairs.
pub fn check_score_properties(cases: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut asymmetric_sigma = 0usize;
    for case in 0..cases {
        let n_entities = rng.gen_range(2..60);
        let a = random_extension(&mut rng, n_entities);
        let b = if rng.gen_bool(0.3) {
            Extension::from_pairs(a.pairs().iter().copied().filter(|_| rng.gen_bool(0.6)).chain([a.pairs()[0]]))
        } else {
            random_extension(&mut rng, n_entities)
        };
        let universe = n_entities as usize;
        let ab = relevance(&a, &b, universe).map_err(|e| format!("case {case}: {e}"))?;
        let ba = relevance(&b, &a, universe).map_err(|e| format!("case {case}: {e}"))?;
        if !close(ab, ba) {
            return Err(format!("case {case}: relevance {ab} vs {ba}"));
        }
        match significance(&a, &b, universe) {
            Ok(s) if s < 0.0 || !s.is_finite() => return Err(format!("case {case}: sigma {s}")),
            Ok(s) => {
                if let Ok(r) = significance(&b, &a, universe) {
                    asymmetric_sigma += (!close(s, r)) as usize;
                }
            }
            Err(_) => {}
        }
        match entity_support_ratio(&a, &b) {
            Ok(e) if !(e > 0.0 && e <= 1.0) => return Err(format!("case {case}: esr {e}")),
            _ => {}
        }
    }
    if asymmetric_sigma == 0 {
        return Err("sigma never asymmetric".into());
    }
    Ok(())
}

/// WeedsPrec(f, f) = 1 and invCL(f, f) = 0 on random weight vectors.
pub fn check_inclusion_identities(cases: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let n = rng.gen_range(1..50);
        let f: Features<u32> = (0..n).map(|k| (k, rng.gen_range(0.001..10.0))).collect();
        let w = weeds_prec(&f, &f).ok_or("weeds undefined")?;
        let c = inv_cl(&f, &f).ok_or("invcl undefined")?;
        if (w - 1.0).abs() > 1e-12 || c.abs() > 1e-6 {
            return Err(format!("case {case}: weeds {w}, invcl {c}"));
        }
    }
    Ok(())
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7)
}

fn vecs(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

/// Central differences over every coordinate of `params` against
/// `analytic`; returns the worst relative error.
fn worst_fd(params: &[Vec<f64>], analytic: &[Vec<f64>], loss: &dyn Fn(&[Vec<f64>]) -> f64) -> f64 {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (i, p) in params.iter().enumerate() {
        for k in 0..p.len() {
            let (mut up, mut down) = (params.to_vec(), params.to_vec());
            up[i][k] += h;
            down[i][k] -= h;
            let numeric = (loss(&up) - loss(&down)) / (2.0 * h);
            worst = worst.max(rel_error(analytic[i][k], numeric));
        }
    }
    worst
}

/// Skip-gram, translation and bilinear gradients against central finite
/// differences of independently written losses.
pub fn check_gradients(configs: usize, seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let sig_ln = |x: f64| -(1.0 + (-x).exp()).ln();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    for _ in 0..configs {
        let d = rng.gen_range(2..7);
        let k = rng.gen_range(1..5);

        let p = vecs(&mut rng, 2 + k, d);
        let loss = |v: &[Vec<f64>]| -sig_ln(dot(&v[0], &v[1])) - v[2..].iter().map(|u| sig_ln(-dot(&v[0], u))).sum::<f64>();
        let negs: Vec<&[f64]> = p[2..].iter().map(Vec::as_slice).collect();
        let g = sgns_loss_and_grad(&p[0], &p[1], &negs);
        let mut analytic = vec![g.center, g.positive];
        analytic.extend(g.negatives);
        worst = worst.max(worst_fd(&p, &analytic, &loss));

        let margin = rng.gen_range(0.5..3.0);
        let p = vecs(&mut rng, 5, d);
        let dist = |h: &[f64], r: &[f64], t: &[f64]| (0..h.len()).map(|i| (h[i] + r[i] - t[i]).powi(2)).sum::<f64>().sqrt();
        let loss = |v: &[Vec<f64>]| (margin + dist(&v[0], &v[1], &v[2]) - dist(&v[3], &v[1], &v[4])).max(0.0);
        let g = transe_margin_loss_and_grad(&p[0], &p[1], &p[2], &p[3], &p[4], margin);
        let analytic = vec![g.head, g.rel, g.tail, g.neg_head, g.neg_tail];
        // The hinge is not differentiable at its corner; such draws are skipped.
        let inner = margin + dist(&p[0], &p[1], &p[2]) - dist(&p[3], &p[1], &p[4]);
        if inner.abs() > 1e-3 {
            worst = worst.max(worst_fd(&p, &analytic, &loss));
        }

        let y = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let l2 = rng.gen_range(0.0..0.1);
        let p = vecs(&mut rng, 6, d);
        let loss = |v: &[Vec<f64>]| {
            let mut phi = 0.0;
            for i in 0..v[0].len() {
                // Re((a + bi)(c + di)(e − fi)), expanded by hand.
                let (a, b, c, dd, e, f) = (v[0][i], v[1][i], v[2][i], v[3][i], v[4][i], v[5][i]);
                let (re1, im1) = (a * c - b * dd, a * dd + b * c);
                phi += re1 * e + im1 * f;
            }
            let sq: f64 = v.iter().flatten().map(|x| x * x).sum();
            (1.0 + (-y * phi).exp()).ln() + l2 * sq
        };
        let g = complex_loss_and_grad(
            Complex { re: &p[0], im: &p[1] },
            Complex { re: &p[2], im: &p[3] },
            Complex { re: &p[4], im: &p[5] },
            y,
            l2,
        );
        let analytic = vec![g.head.0, g.head.1, g.rel.0, g.rel.1, g.tail.0, g.tail.1];
        worst = worst.max(worst_fd(&p, &analytic, &loss));
    }
    if worst > 1e-4 {
        return Err(format!("worst relative gradient error {worst:e}"));
    }
    Ok(worst)
}

/// The tuned threshold reaches the best F1 of an exhaustive sweep and is
/// the smallest threshold doing so.
pub fn check_threshold_optimality(cases: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        let n = rng.gen_range(1..=200);
        let levels = rng.gen_range(1..20);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
        let gold: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.35)).collect();
        let lemma: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.05)).collect();
        let tuned = tune_threshold(&scores, &lemma, &gold);
        let mut best = (f64::NAN, -1.0);
        for t in candidate_thresholds(&scores) {
            let f = evaluate(&scores, &lemma, &gold, t).f1;
            if f > best.1 {
                best = (t, f);
            }
        }
        let got = evaluate(&scores, &lemma, &gold, tuned.theta).f1;
        if (got - best.1).abs() > 1e-12 || (tuned.dev.f1 - best.1).abs() > 1e-12 {
            return Err(format!("case {case}: tuned F1 {got} vs sweep {}", best.1));
        }
        let same_predictions = |a: f64, b: f64| {
            scores.iter().zip(&lemma).all(|(&s, &l)| (l || s >= a) == (l || s >= b))
        };
        if !same_predictions(tuned.theta, best.0) && tuned.theta > best.0 {
            return Err(format!("case {case}: theta {} is not the smallest optimum {}", tuned.theta, best.0));
        }
    }
    Ok(())
}

/// The store built from the same graph through the library.
pub fn build_store(g: &Synth, k: usize, r_min: usize) -> TegStore {
    let cfg = FilterConfig::default();
    let rels: Vec<(Relation, Vec<(&str, &str)>)> = g
        .relations
        .iter()
        .map(|(p, pairs)| {
            let rel = Relation::parse(p, &cfg).unwrap_or_else(|e| panic!("{p}: {e:?}"));
            (rel, pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect())
        })
        .collect();
    let mut store = TegStore::from_relations(rels).expect("store");
    let mut tm = TypeMap::default();
    for (e, ts) in &g.types {
        tm.insert(e, ts.iter());
    }
    store.assign_types(&tm);
    store.build_typed(k, r_min);
    store
}

fn named(store: &TegStore, ext: &Extension) -> BTreeSet<NamePair> {
    ext.pairs()
        .iter()
        .map(|&(a, b)| (store.entity_name(a).to_string(), store.entity_name(b).to_string()))
        .collect()
}

pub fn store_typed_named(store: &TegStore) -> BTreeMap<String, BTreeSet<NamePair>> {
    store.typed().iter().map(|t| (store.relation_key(t), named(store, &t.extension))).collect()
}

pub fn store_tsg_named(store: &TegStore) -> BTreeMap<String, (BTreeSet<String>, BTreeSet<String>)> {
    store.typed().iter().map(|t| (store.relation_key(t), t.tsg.clone())).collect()
}

/// Runs the library's discovery and keys the result like the oracle.
pub fn library_discover(store: &TegStore, cfg: &DiscoveryConfig) -> BTreeMap<(String, String), OracleScores> {
    let typed = store.typed();
    relmine_core::discovery::discover(store, cfg)
        .into_iter()
        .map(|c| {
            let key = (store.relation_key(&typed[c.premise]), store.relation_key(&typed[c.hypothesis]));
            (key, OracleScores { relv: c.scores.relv, sigma: c.scores.sigma, esr: c.scores.esr })
        })
        .collect()
}

/// Library and oracle discovery agree on the candidate set and scores.
pub fn compare_discovery(g: &Synth, k: usize, cfg: &DiscoveryConfig) -> Result<usize, String> {
    let store = build_store(g, k, cfg.r_min);
    let typed = oracle_typed(&g.relations, &g.types, k, cfg.r_min);
    let want = oracle_discover(&typed, &g.types, store.universe(), cfg);
    let got = library_discover(&store, cfg);
    let wk: BTreeSet<_> = want.keys().collect();
    let gk: BTreeSet<_> = got.keys().collect();
    if wk != gk {
        let missing: Vec<_> = wk.difference(&gk).take(3).collect();
        let extra: Vec<_> = gk.difference(&wk).take(3).collect();
        return Err(format!("candidate sets differ; missing {missing:?}, extra {extra:?}"));
    }
    for (key, w) in &want {
        let g = &got[key];
        if !(close(w.relv, g.relv) && close(w.sigma, g.sigma) && close(w.esr, g.esr)) {
            return Err(format!("{key:?}: oracle {w:?} vs library {g:?}"));
        }
    }
    Ok(want.len())
}

/// Library typing agrees with the string-space oracle.
pub fn compare_typing(g: &Synth, k: usize, r_min: usize) -> Result<usize, String> {
    let store = build_store(g, k, r_min);
    let want = oracle_typed(&g.relations, &g.types, k, r_min);
    let got = store_typed_named(&store);
    if want != got {
        let wk: BTreeSet<_> = want.keys().collect();
        let gk: BTreeSet<_> = got.keys().collect();
        let missing: Vec<_> = wk.difference(&gk).take(3).collect();
        let extra: Vec<_> = gk.difference(&wk).take(3).collect();
        return Err(format!("typed relations differ; missing {missing:?}, extra {extra:?}"));
    }
    for (key, tsg) in store_tsg_named(&store) {
        if oracle_tsg(&want[&key], &g.types) != tsg {
            return Err(format!("{key}: type signature differs"));
        }
    }
    for (key, pairs) in &want {
        if pairs.len() < r_min {
            return Err(format!("{key}: {} pairs below r_min", pairs.len()));
        }
    }
    Ok(want.len())
}

/// Discovery thresholds for small graphs, where the defaults accept little.
pub fn small_graph_configs() -> Vec<DiscoveryConfig> {
    vec![
        DiscoveryConfig::default(),
        DiscoveryConfig { theta_relv: 1.0, theta_sigma: 0.5, theta_esr: 0.3, r_min: 2, max_premises_per_hypothesis: 100 },
        DiscoveryConfig { theta_relv: 5.0, theta_sigma: 1.0, theta_esr: 0.5, r_min: 3, max_premises_per_hypothesis: 2 },
    ]
}

/// Raising any one threshold never adds a candidate.
pub fn check_monotone(g: &Synth, k: usize) -> Result<(), String> {
    let base = DiscoveryConfig { theta_relv: 1.0, theta_sigma: 0.5, theta_esr: 0.3, r_min: 2, max_premises_per_hypothesis: 1000 };
    let store = build_store(g, k, base.r_min);
    let before: BTreeSet<_> = library_discover(&store, &base).into_keys().collect();
    let raised = [
        DiscoveryConfig { theta_relv: 20.0, ..base.clone() },
        DiscoveryConfig { theta_sigma: 5.0, ..base.clone() },
        DiscoveryConfig { theta_esr: 0.7, ..base.clone() },
        DiscoveryConfig { r_min: 4, ..base.clone() },
    ];
    for cfg in raised {
        let after: BTreeSet<_> = library_discover(&store, &cfg).into_keys().collect();
        if !after.is_subset(&before) {
            return Err(format!("raising thresholds to {cfg:?} added candidates"));
        }
    }
    Ok(())
}

/// Matrix verbs planted in the meta population with their voice and count.
pub const PLANTED_IMPLICATIVES: &[(&str, bool, usize)] = &[
    ("agree", false, 40),
    ("force", true, 35),
    ("elect", true, 30),
    ("go", false, 25),
    ("try", false, 20),
    ("decide", false, 15),
    ("expect", true, 12),
];

/// A candidate population with a possessive alternation, an agentive
/// derivation, implicative embeddings, a below-threshold verb and noise.
pub fn meta_population() -> Vec<(Relation, Relation)> {
    let cfg = FilterConfig::default();
    let rel = |s: &str| Relation::parse(s, &cfg).unwrap_or_else(|e| panic!("{s}: {e:?}"));
    let mut out = Vec::new();
    for noun in ["ally", "enemy", "partner"] {
        for _ in 0..4 {
            out.push((rel(&format!("nsubj--{noun}--prep--of--obj")), rel(&format!("nsubj--{noun}--poss"))));
            out.push((rel(&format!("nsubj--{noun}--poss")), rel(&format!("nsubj--{noun}--prep--of--obj"))));
        }
    }
    for (base, agent) in [("teach", "teacher"), ("lead", "leader"), ("own", "owner"), ("write", "writer"), ("run", "runner")] {
        for _ in 0..3 {
            out.push((rel(&format!("nsubj--{agent}--prep--of--obj")), rel(&format!("nsubj--{base}--obj"))));
            out.push((rel(&format!("nsubj--{base}--obj")), rel(&format!("nsubj--{agent}--prep--of--obj"))));
        }
    }
    let objects = ["buy", "visit", "sign", "join", "attack"];
    let with_below: Vec<(&str, bool, usize)> =
        PLANTED_IMPLICATIVES.iter().copied().chain([("hope", false, 5)]).collect();
    for (verb, passive, n) in with_below {
        let subj = if passive { "nsubjpass" } else { "nsubj" };
        for i in 0..n {
            let x = objects[i % objects.len()];
            out.push((rel(&format!("{subj}--{verb}--xcomp--{x}--obj")), rel(&format!("nsubj--{x}--obj"))));
        }
    }
    for (a, b) in [("win", "beat"), ("win", "lose"), ("annex", "invade")] {
        for _ in 0..12 {
            out.push((rel(&format!("nsubj--{a}--obj")), rel(&format!("nsubj--{b}--obj"))));
        }
    }
    out
}

/// Exact rules and frequencies recovered from [`meta_population`].
pub fn check_meta_population() -> Result<(), String> {
    use relmine_core::meta::{mine_char_meta, mine_implicatives, mine_path_meta, Direction, MetaLevel, Morphology};
    let cands = meta_population();
    let path = mine_path_meta(&cands, 10);
    let ally = path
        .iter()
        .find(|r| r.instances.contains_key("ally"))
        .ok_or("no path rule covers `ally`")?;
    if (ally.premise.as_str(), ally.hypothesis.as_str(), ally.direction, ally.freq)
        != ("nsubj--X--poss", "nsubj--X--prep--of--obj", Direction::Both, 24)
    {
        return Err(format!("possessive rule: {ally:?}"));
    }
    let morph = Morphology::default();
    let chars = mine_char_meta(&cands, &morph, 10);
    if chars.len() != 1 {
        return Err(format!("expected one character-level rule, got {}", chars.len()));
    }
    let c = &chars[0];
    // Equal frequencies on both sides orient the rule to the smaller premise.
    let ok = c.level == MetaLevel::Char
        && c.direction == Direction::Both
        && c.premise == "nsubj--X--obj"
        && c.hypothesis == "nsubj--Xer--prep--of--obj";
    if !ok || c.freq != 30 || c.instances.len() != 5 {
        return Err(format!("agentive rule: {c:?}"));
    }
    let (rules, verbs) = mine_implicatives(&cands, 10);
    let got: Vec<(String, bool, usize)> = verbs.iter().map(|v| (v.verb.clone(), v.passive, v.freq)).collect();
    let want: Vec<(String, bool, usize)> =
        PLANTED_IMPLICATIVES.iter().map(|&(v, p, n)| (v.to_string(), p, n)).collect();
    if got != want {
        return Err(format!("implicative verbs {got:?}"));
    }
    for &(verb, passive, n) in PLANTED_IMPLICATIVES {
        let subj = if passive { "nsubjpass" } else { "nsubj" };
        let premise = format!("{subj}--{verb}--xcomp--X--obj");
        let r = rules.iter().find(|r| r.premise == premise).ok_or(format!("no rule for {verb}"))?;
        if r.hypothesis != "nsubj--X--obj" || r.freq != n || r.direction != Direction::Forward {
            return Err(format!("{verb}: {r:?}"));
        }
    }
    if rules.iter().any(|r| r.premise.contains("--hope--")) {
        return Err("below-threshold verb produced a rule".into());
    }
    Ok(())
}
