use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use log::{info, warn};

use relmine_annotate::aggregate::AggregateConfig;
use relmine_annotate::record::RecordLog;
use relmine_annotate::server::{load_candidates, serve, system_clock, AppState, Qualification, ServiceConfig};
use relmine_annotate::verbalize::Lexicon;
use relmine_core::baselines::corpus::synthetic_corpus;
use relmine_core::baselines::inclusion::{InclusionMeasure, InclusionScorer};
use relmine_core::baselines::kge::{train_kge, KgeConfig, KgeModel, Triples};
use relmine_core::baselines::lemma::LemmaScorer;
use relmine_core::baselines::rules::{RuleBase, RuleFormat, RuleScorer};
use relmine_core::baselines::selector::TsgSelector;
use relmine_core::baselines::sgns::{train_sgns, SgnsConfig, TrainLog};
use relmine_core::baselines::sherlock::{Component, StatisticScorer};
use relmine_core::baselines::vectors::{RelationTokens, RelationVectorScorer, VectorTable, WordAverageScorer};
use relmine_core::baselines::{AlwaysYes, Scorer};
use relmine_core::discovery::{write_candidates, DiscoveryConfig};
use relmine_core::eval::{load_labeled, run_report, split_dev_test, write_labeled, write_report, ColumnMap, DatasetStats, EvalData, Labeled};
use relmine_core::manifest::{manifest_path, RunManifest};
use relmine_core::meta::{mine_char_meta, mine_implicatives, mine_path_meta, write_meta, DEFAULT_MIN_FREQ};
use relmine_core::teg::{TegStore, TypeMap};

use crate::{AnnotateArgs, BuildTegArgs, Context, DiscoverArgs, EvalArgs, ExportArgs, MineMetaArgs, ModelKind, TrainArgs};

pub const TEG_FILE: &str = "teg.bin";
const DEFAULT_K: usize = 5;
const DEFAULT_R_MIN: usize = 5;
const DEFAULT_SPLIT_SEED: u64 = 1;
const DEFAULT_ADDR: &str = "127.0.0.1:8080";

fn teg_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(TEG_FILE)
    } else {
        path.to_path_buf()
    }
}

fn load_teg(path: &Path) -> Result<TegStore> {
    let file = teg_file(path);
    TegStore::load(&file).with_context(|| format!("loading graph {}", file.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_manifest(m: &RunManifest, output: &Path) -> Result<()> {
    let p = manifest_path(output);
    m.write(&p).with_context(|| format!("writing {}", p.display()))
}

pub fn build_teg(ctx: &Context, a: BuildTegArgs) -> Result<()> {
    let k = a.k.or(ctx.file.build_teg.k).unwrap_or(DEFAULT_K);
    let r_min = a.r_min.or(ctx.file.build_teg.r_min).unwrap_or(DEFAULT_R_MIN);
    if k == 0 || r_min == 0 {
        bail!("k and r_min must be positive");
    }
    let filter = ctx.data.filter()?;
    let triples = File::open(&a.triples).with_context(|| format!("opening {}", a.triples.display()))?;
    let (mut store, report) = TegStore::ingest(triples, &filter)?;
    info!(
        "{} lines, {} malformed, {} rejected {:?}, {} accepted, {} duplicates",
        report.lines,
        report.malformed,
        report.rejected_total(),
        report.rejected,
        report.accepted,
        report.duplicates
    );
    let types = TypeMap::load(&a.types).with_context(|| format!("loading types {}", a.types.display()))?;
    store.assign_types(&types);
    store.build_typed(k, r_min);
    info!(
        "{} relations, {} typed subrelations, {} entities, top share {:.3}",
        store.relation_count(),
        store.typed().len(),
        store.universe(),
        store.top_share()
    );
    std::fs::create_dir_all(&a.out)?;
    store.save(&a.out.join(TEG_FILE))?;
    if a.tsv {
        store.export_tsv(&a.out)?;
    }
    let mut m = RunManifest::new("build-teg");
    m.set("k", k).set("r_min", r_min);
    m.add_input("triples", &a.triples)?.add_input("types", &a.types)?;
    write_manifest(&m, &a.out)
}

pub fn discover(ctx: &Context, a: DiscoverArgs) -> Result<()> {
    let f = &ctx.file.discover;
    let d = DiscoveryConfig::default();
    let cfg = DiscoveryConfig {
        theta_relv: a.theta_relv.or(f.theta_relv).unwrap_or(d.theta_relv),
        theta_sigma: a.theta_sigma.or(f.theta_sigma).unwrap_or(d.theta_sigma),
        theta_esr: a.theta_esr.or(f.theta_esr).unwrap_or(d.theta_esr),
        r_min: a.r_min.or(f.r_min).unwrap_or(d.r_min),
        max_premises_per_hypothesis: a.top.or(f.top).unwrap_or(d.max_premises_per_hypothesis),
    };
    cfg.validate()?;
    let store = load_teg(&a.teg)?;
    let cands = relmine_core::discovery::discover(&store, &cfg);
    info!("{} candidates from {} typed relations", cands.len(), store.typed().len());
    let mut w = create(&a.out)?;
    write_candidates(&mut w, &store, &cands)?;
    w.flush()?;
    let mut m = RunManifest::new("discover");
    m.set("theta_relv", cfg.theta_relv)
        .set("theta_sigma", cfg.theta_sigma)
        .set("theta_esr", cfg.theta_esr)
        .set("r_min", cfg.r_min)
        .set("top", cfg.max_premises_per_hypothesis);
    m.add_input("teg", &teg_file(&a.teg))?;
    write_manifest(&m, &a.out)
}

fn log_losses(log: &TrainLog) {
    for (i, l) in log.epoch_losses.iter().enumerate() {
        info!("epoch {}: loss {l:.6}", i + 1);
    }
}

pub fn train(ctx: &Context, a: TrainArgs) -> Result<()> {
    let f = &ctx.file.train;
    let store = load_teg(&a.teg)?;
    let (seed, describe) = match a.model {
        ModelKind::Sgns => {
            let d = SgnsConfig::default();
            let cfg = SgnsConfig {
                dim: a.dim.or(f.dim).unwrap_or(d.dim),
                epochs: a.epochs.or(f.epochs).unwrap_or(d.epochs),
                window: a.window.or(f.window).or(d.window),
                negatives: a.negatives.or(f.negatives).unwrap_or(d.negatives),
                lr: a.lr.or(f.lr).unwrap_or(d.lr),
                seed: a.seed.or(f.seed).unwrap_or(d.seed),
                ..d
            };
            if a.entities_out.is_some() {
                warn!("--entities-out is ignored for the word model");
            }
            let corpus = synthetic_corpus(&store, a.typed);
            info!("{} corpus lines", corpus.len());
            let (table, log) = train_sgns(&corpus, &cfg)?;
            log_losses(&log);
            let mut w = create(&a.out)?;
            table.write_text(&mut w)?;
            w.flush()?;
            (cfg.seed, cfg.describe())
        }
        ModelKind::Transe | ModelKind::Complex => {
            let model = if a.model == ModelKind::Transe { KgeModel::TransE } else { KgeModel::ComplEx };
            let d = KgeConfig::new(model);
            let cfg = KgeConfig {
                dim: a.dim.or(f.dim).unwrap_or(d.dim),
                epochs: a.epochs.or(f.epochs).unwrap_or(d.epochs),
                lr: a.lr.or(f.lr).unwrap_or(d.lr),
                margin: a.margin.or(f.margin).unwrap_or(d.margin),
                negatives: a.negatives.or(f.negatives).unwrap_or(d.negatives),
                l2: a.l2.or(f.l2).unwrap_or(d.l2),
                seed: a.seed.or(f.seed).unwrap_or(d.seed),
                model,
            };
            let triples = Triples::from_store(&store, a.typed);
            let (emb, log) = train_kge(&triples, &cfg)?;
            log_losses(&log);
            let mut w = create(&a.out)?;
            emb.relations.write_text(&mut w)?;
            w.flush()?;
            if let Some(p) = &a.entities_out {
                let mut w = create(p)?;
                emb.entities.write_text(&mut w)?;
                w.flush()?;
            }
            (cfg.seed, cfg.describe())
        }
    };
    let mut m = RunManifest::new("train").with_seed(seed);
    for (k, v) in describe {
        m.set(k, v);
    }
    m.set("model", format!("{:?}", a.model).to_lowercase()).set("typed", a.typed);
    m.add_input("teg", &teg_file(&a.teg))?;
    write_manifest(&m, &a.out)
}

fn split_named(spec: &str, what: &str) -> Result<(String, String)> {
    let (name, rest) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("{what} `{spec}`: expected NAME=..."))?;
    if name.is_empty() || rest.is_empty() {
        bail!("{what} `{spec}`: empty name or value");
    }
    Ok((name.to_string(), rest.to_string()))
}

fn load_vectors(path: &str) -> Result<VectorTable> {
    VectorTable::load(Path::new(path)).with_context(|| format!("loading vectors {path}"))
}

/// Every scorer the given inputs allow, in report order.
fn build_scorers<'a>(
    a: &EvalArgs,
    store: Option<&'a TegStore>,
    dev: &EvalData,
    stop: &relmine_core::path::StopList,
) -> Result<Vec<Box<dyn Scorer + 'a>>> {
    let mut out: Vec<Box<dyn Scorer + 'a>> = vec![Box::new(AlwaysYes), Box::new(LemmaScorer::new(stop.clone()))];
    if let Some(store) = store {
        for (name, measure) in [("weeds", InclusionMeasure::WeedsPrec), ("invcl", InclusionMeasure::InvCl)] {
            out.push(Box::new(InclusionScorer::new(name, store, measure, false)));
            out.push(Box::new(InclusionScorer::new(format!("{name}_typed"), store, measure, true)));
            out.push(Box::new(TsgSelector::fit(
                format!("{name}_tsg"),
                InclusionScorer::new(format!("{name}_typed"), store, measure, true),
                InclusionScorer::new(name, store, measure, false),
                dev,
            )));
        }
    }
    for (name, component) in [
        ("relv", Component::Relevance),
        ("sigma", Component::Significance),
        ("esr", Component::SupportRatio),
        ("product", Component::Product),
    ] {
        if store.is_some() {
            out.push(Box::new(StatisticScorer::new(name, store, component)));
        }
    }
    if let Some(p) = &a.word_vectors {
        out.push(Box::new(WordAverageScorer::new("word_average", load_vectors(&p.to_string_lossy())?)));
    }
    let mut untyped = Vec::new();
    for spec in &a.relation_vectors {
        let (name, path) = split_named(spec, "relation vectors")?;
        let table = load_vectors(&path)?;
        out.push(Box::new(RelationVectorScorer::new(name.clone(), table.clone(), RelationTokens::Untyped)));
        untyped.push((name, table));
    }
    for spec in &a.typed_relation_vectors {
        let (name, path) = split_named(spec, "typed relation vectors")?;
        let table = load_vectors(&path)?;
        let typed_name = format!("{name}_typed");
        out.push(Box::new(RelationVectorScorer::new(typed_name.clone(), table.clone(), RelationTokens::Typed)));
        if let Some((_, u)) = untyped.iter().find(|(n, _)| *n == name) {
            out.push(Box::new(TsgSelector::fit(
                format!("{name}_tsg"),
                RelationVectorScorer::new(typed_name, table, RelationTokens::Typed),
                RelationVectorScorer::new(name.clone(), u.clone(), RelationTokens::Untyped),
                dev,
            )));
        }
    }
    let mut bases = Vec::new();
    for spec in &a.rules {
        let (name, rest) = split_named(spec, "rules")?;
        let (format, path) = rest
            .split_once(':')
            .ok_or_else(|| anyhow!("rules `{spec}`: expected NAME=FORMAT:PATH"))?;
        let format: RuleFormat = format.parse()?;
        let base = RuleBase::load(&name, Path::new(path), format, stop).with_context(|| format!("loading rules {path}"))?;
        info!("rule collection {name}: {} rules", base.len());
        out.push(Box::new(RuleScorer::single(base.clone(), stop.clone())));
        bases.push(base);
    }
    if bases.len() > 1 {
        out.push(Box::new(RuleScorer::new("rules_union", bases, stop.clone())));
    }
    Ok(out)
}

fn select_scorers<'a>(all: Vec<Box<dyn Scorer + 'a>>, wanted: &[String]) -> Result<Vec<Box<dyn Scorer + 'a>>> {
    if wanted.is_empty() {
        return Ok(all);
    }
    let mut all: Vec<Option<Box<dyn Scorer + 'a>>> = all.into_iter().map(Some).collect();
    let mut out = Vec::new();
    for w in wanted {
        let slot = all
            .iter_mut()
            .find(|s| s.as_ref().is_some_and(|s| s.name() == w))
            .ok_or_else(|| anyhow!("scorer `{w}` is unknown or its inputs were not given"))?;
        out.push(slot.take().expect("found above"));
    }
    Ok(out)
}

pub fn eval(ctx: &Context, a: EvalArgs) -> Result<()> {
    let f = &ctx.file.eval;
    let filter = ctx.data.filter()?;
    let stop = ctx.data.stop_list()?;
    let columns = match a.columns.as_ref().or(f.columns.as_ref()) {
        Some(p) => ColumnMap::load(p).with_context(|| format!("loading columns {}", p.display()))?,
        None => ColumnMap::default(),
    };
    let load = |p: &Path| load_labeled(p, &columns, &filter).with_context(|| format!("loading labeled data {}", p.display()));
    let mut m = RunManifest::new("eval");
    let (dev, test): (Vec<Labeled>, Vec<Labeled>) = match (&a.data, &a.dev, &a.test) {
        (Some(data), _, _) => {
            let seed = a.seed.or(f.seed).unwrap_or(DEFAULT_SPLIT_SEED);
            let items = load(data)?;
            let stats = DatasetStats::of(&items);
            info!("dataset:\n{stats}");
            let split = split_dev_test(&items, seed);
            m = m.with_seed(seed);
            m.add_input("data", data)?;
            let pick = |ix: &[usize]| ix.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
            (pick(&split.dev), pick(&split.test))
        }
        (None, Some(d), Some(t)) => {
            m.add_input("dev", d)?.add_input("test", t)?;
            (load(d)?, load(t)?)
        }
        _ => bail!("give --data, or both --dev and --test"),
    };
    info!("{} dev items, {} test items", dev.len(), test.len());
    if let Some(dir) = &a.split_out {
        std::fs::create_dir_all(dir)?;
        for (name, items) in [("dev.tsv", &dev), ("test.tsv", &test)] {
            let mut w = create(&dir.join(name))?;
            write_labeled(&mut w, items)?;
            w.flush()?;
        }
    }
    let store = a.teg.as_deref().map(load_teg).transpose()?;
    if let Some(p) = &a.teg {
        m.add_input("teg", &teg_file(p))?;
    }
    let dev_data = EvalData::new(&dev, &stop);
    let all = build_scorers(&a, store.as_ref(), &dev_data, &stop)?;
    let wanted = if a.scorer.is_empty() { f.scorers.clone().unwrap_or_default() } else { a.scorer.clone() };
    let scorers = select_scorers(all, &wanted)?;
    let refs: Vec<&dyn Scorer> = scorers.iter().map(|s| s.as_ref() as &dyn Scorer).collect();
    let rows = run_report(&refs, &dev, &test, &stop);
    let mut w = create(&a.report)?;
    write_report(&mut w, &rows)?;
    w.flush()?;
    m.set("scorers", refs.iter().map(|s| s.name()).collect::<Vec<_>>().join(","));
    if let Some(p) = &a.word_vectors {
        m.add_input("word_vectors", p)?;
    }
    for (kind, specs) in [
        ("relation_vectors", &a.relation_vectors),
        ("typed_relation_vectors", &a.typed_relation_vectors),
        ("rules", &a.rules),
    ] {
        for spec in specs {
            let (name, rest) = split_named(spec, kind)?;
            let path = if kind == "rules" { rest.split_once(':').map_or(rest.as_str(), |(_, p)| p) } else { &rest };
            m.add_input(&format!("{kind}.{name}"), Path::new(path))?;
        }
    }
    if let Some(p) = &a.columns {
        m.add_input("columns", p)?;
    }
    write_manifest(&m, &a.report)
}

fn service_config(ctx: &Context, lock_timeout: Option<u64>, qualification: Option<&PathBuf>) -> Result<ServiceConfig> {
    let f = &ctx.file.annotate;
    let d = ServiceConfig::default();
    let qualification = match qualification.or(f.qualification.as_ref()) {
        Some(p) => Qualification::load(p).with_context(|| format!("loading qualification {}", p.display()))?,
        None => d.qualification,
    };
    Ok(ServiceConfig {
        aggregate: AggregateConfig {
            min_votes: f.min_votes.unwrap_or(d.aggregate.min_votes),
            trust_threshold: f.trust_threshold.unwrap_or(d.aggregate.trust_threshold),
        },
        lock_timeout: lock_timeout.or(f.lock_timeout).unwrap_or(d.lock_timeout),
        qualification,
    })
}

fn lexicon(ctx: &Context, extra: Option<&PathBuf>) -> Result<Lexicon> {
    let mut lex = Lexicon::builtin();
    for p in ctx.data.lexicon().iter().chain(extra.or(ctx.file.annotate.lexicon.as_ref())) {
        lex = lex.with_file(p).with_context(|| format!("loading lexicon {}", p.display()))?;
    }
    Ok(lex)
}

pub fn annotate_serve(ctx: &Context, a: AnnotateArgs) -> Result<()> {
    let filter = ctx.data.filter()?;
    let cands = load_candidates(&a.cands, &filter).with_context(|| format!("loading candidates {}", a.cands.display()))?;
    let store = a.teg.as_deref().map(load_teg).transpose()?;
    let lex = lexicon(ctx, a.lexicon.as_ref())?;
    let cfg = service_config(ctx, a.lock_timeout, a.qualification.as_ref())?;
    let log = match &a.state {
        Some(dir) => RecordLog::open(dir, ctx.file.annotate.snapshot_every.unwrap_or(1000))?,
        None => {
            warn!("no --state directory; annotations are kept in memory only");
            RecordLog::in_memory()
        }
    };
    let addr: SocketAddr = a
        .addr
        .as_deref()
        .or(ctx.file.annotate.addr.as_deref())
        .unwrap_or(DEFAULT_ADDR)
        .parse()
        .context("parsing --addr")?;
    info!("{} candidates, serving on {addr}", cands.len());
    let app = AppState::new(cands, &lex, store.as_ref(), log, cfg, system_clock())?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(serve(addr, app))?;
    Ok(())
}

pub fn mine_meta(ctx: &Context, a: MineMetaArgs) -> Result<()> {
    let min_freq = a.min_freq.or(ctx.file.mine_meta.min_freq).unwrap_or(DEFAULT_MIN_FREQ);
    if min_freq == 0 {
        bail!("min-freq must be positive");
    }
    let filter = ctx.data.filter()?;
    let morph = ctx.data.morphology()?;
    let cands = load_candidates(&a.cands, &filter).with_context(|| format!("loading candidates {}", a.cands.display()))?;
    let pairs: Vec<_> = cands.into_iter().map(|c| (c.premise, c.hypothesis)).collect();
    let mut rules = mine_path_meta(&pairs, min_freq);
    rules.extend(mine_char_meta(&pairs, &morph, min_freq));
    let (implicative, verbs) = mine_implicatives(&pairs, min_freq);
    rules.extend(implicative);
    info!("{} meta rules, {} implicative verbs from {} candidates", rules.len(), verbs.len(), pairs.len());
    let mut w = create(&a.out)?;
    write_meta(&mut w, min_freq, &rules, &verbs)?;
    w.flush()?;
    let mut m = RunManifest::new("mine-meta");
    m.set("min_freq", min_freq);
    m.add_input("cands", &a.cands)?;
    write_manifest(&m, &a.out)
}

pub fn export(ctx: &Context, a: ExportArgs) -> Result<()> {
    match (&a.teg, &a.records, &a.cands) {
        (Some(teg), _, _) => {
            let store = load_teg(teg)?;
            store.export_tsv(&a.out)?;
            let mut m = RunManifest::new("export-teg");
            m.add_input("teg", &teg_file(teg))?;
            write_manifest(&m, &a.out)
        }
        (None, Some(records), Some(cands_path)) => {
            let filter = ctx.data.filter()?;
            let cands = load_candidates(cands_path, &filter)?;
            let log = RecordLog::open(records, 0).with_context(|| format!("opening records {}", records.display()))?;
            let n_records = log.len();
            let cfg = service_config(ctx, None, None)?;
            let app = AppState::new(cands, &Lexicon::builtin(), None, log, cfg.clone(), system_clock())?;
            let agg = app.aggregation();
            info!(
                "{n_records} records: {} gold, {} need more votes, {} flagged, excluded workers {:?}",
                agg.gold.len(),
                agg.needs_more.len(),
                agg.flagged.len(),
                agg.excluded_workers
            );
            let mut w = create(&a.out)?;
            w.write_all(app.export_tsv()?.as_bytes())?;
            w.flush()?;
            let mut m = RunManifest::new("export-gold");
            m.set("min_votes", cfg.aggregate.min_votes).set("trust_threshold", cfg.aggregate.trust_threshold);
            m.add_input("records", records)?.add_input("cands", cands_path)?;
            write_manifest(&m, &a.out)
        }
        _ => bail!("give --teg, or both --records and --cands"),
    }
}
