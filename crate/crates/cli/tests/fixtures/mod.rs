//! Pipeline inputs written to disk and helpers for running the binary.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relmine_core::discovery::format_slots;
use relmine_core::eval::{write_labeled, Labeled};
use relmine_core::path::{FilterConfig, Relation};
use relmine_core::teg::SlotType;
use relmine_core::Candidate;

use crate::core_support::{meta_population, synth_graph};

pub fn relmine() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relmine"))
}

pub fn run(args: &[&str]) -> Output {
    relmine().args(args).env_remove("RELMINE_DATA_DIR").output().expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "relmine {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

pub struct Inputs {
    pub triples: PathBuf,
    pub types: PathBuf,
    pub labeled: PathBuf,
    pub meta_cands: PathBuf,
    pub config: PathBuf,
}

pub const SMALL_GRAPH_CONFIG: &str = "\
[build_teg]
k = 3
r_min = 2

[discover]
theta_relv = 1.0
theta_sigma = 0.5
theta_esr = 0.3
r_min = 2

[train]
dim = 8
epochs = 3
seed = 7
";

/// Labeled pairs over the graph's own relations, with seeded labels.
fn labeled_items(paths: &[String], seed: u64) -> Vec<Labeled> {
    let cfg = FilterConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::new();
    for (i, a) in paths.iter().enumerate() {
        for (j, b) in paths.iter().enumerate() {
            if i == j || items.len() >= 160 {
                continue;
            }
            let mut c = Candidate::new(
                (items.len() + 1).to_string(),
                Relation::parse(a, &cfg).unwrap(),
                Relation::parse(b, &cfg).unwrap(),
            );
            c.hypothesis_reversed = rng.gen_bool(0.2);
            items.push(Labeled {
                cand: c,
                gold: rng.gen_bool(0.33),
                disagreements: rng.gen_range(0..=2),
            });
        }
    }
    items
}

pub fn meta_candidates_tsv() -> String {
    let top = format_slots(&(SlotType::Top, SlotType::Top));
    let mut s = String::from("premise_path\tpremise_types\thypothesis_path\thypothesis_types\n");
    for (a, b) in meta_population() {
        s.push_str(&format!("{a}\t{top}\t{b}\t{top}\n"));
    }
    s
}

pub fn write_inputs(dir: &Path, seed: u64) -> Inputs {
    let g = synth_graph(seed, 50, 30);
    let inputs = Inputs {
        triples: dir.join("triples.tsv"),
        types: dir.join("types.tsv"),
        labeled: dir.join("labeled.tsv"),
        meta_cands: dir.join("meta_cands.tsv"),
        config: dir.join("relmine.toml"),
    };
    std::fs::write(&inputs.triples, g.triples_tsv()).unwrap();
    std::fs::write(&inputs.types, g.types_tsv()).unwrap();
    let paths: Vec<String> = g.relations.keys().cloned().collect();
    let mut buf = Vec::new();
    write_labeled(&mut buf, &labeled_items(&paths, seed)).unwrap();
    std::fs::write(&inputs.labeled, buf).unwrap();
    std::fs::write(&inputs.meta_cands, meta_candidates_tsv()).unwrap();
    std::fs::write(&inputs.config, SMALL_GRAPH_CONFIG).unwrap();
    inputs
}

/// Runs build-teg, discover, train, eval and mine-meta into `out`.
pub fn run_pipeline(inputs: &Inputs, out: &Path, threads: &str) {
    let cfg = p(&inputs.config);
    let teg = out.join("teg");
    let cands = out.join("cands.tsv");
    let vectors = out.join("relation_vectors.txt");
    let typed_vectors = out.join("typed_relation_vectors.txt");
    let common = ["--config", cfg, "--threads", threads];
    let with = |args: &[&str]| {
        let mut v: Vec<&str> = common.to_vec();
        v.extend_from_slice(args);
        run_ok(&v);
    };
    with(&["build-teg", "--triples", p(&inputs.triples), "--types", p(&inputs.types), "--out", p(&teg), "--tsv"]);
    with(&["discover", "--teg", p(&teg), "--out", p(&cands)]);
    with(&["train", "--teg", p(&teg), "--model", "sgns", "--out", p(&vectors)]);
    with(&["train", "--teg", p(&teg), "--model", "sgns", "--typed", "--out", p(&typed_vectors)]);
    let rv = format!("sgns={}", p(&vectors));
    let trv = format!("sgns={}", p(&typed_vectors));
    with(&[
        "eval",
        "--data",
        p(&inputs.labeled),
        "--seed",
        "3",
        "--teg",
        p(&teg),
        "--relation-vectors",
        &rv,
        "--typed-relation-vectors",
        &trv,
        "--report",
        p(&out.join("report.tsv")),
        "--split-out",
        p(&out.join("split")),
    ]);
    with(&["mine-meta", "--cands", p(&inputs.meta_cands), "--min-freq", "10", "--out", p(&out.join("meta.tsv"))]);
}

/// Relative path → contents of every file under `dir`.
pub fn snapshot(dir: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}
