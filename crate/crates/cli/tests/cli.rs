#[path = "../../core/tests/support/mod.rs"]
mod core_support;
mod fixtures;

use relmine_annotate::record::{AnnotationRecord, Label, RecordLog};
use relmine_core::eval::{load_labeled, ColumnMap};
use relmine_core::manifest::RunManifest;
use relmine_core::path::FilterConfig;

use fixtures::{p, run, run_ok, write_inputs};

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["discover", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["build-teg", "discover", "train", "eval", "annotate-serve", "mine-meta", "export"] {
        let out = run(&[sub, "--help"]);
        assert!(out.status.success(), "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"), "{sub}");
    }
}

#[test]
fn stage_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["discover", "--teg", p(&dir.path().join("missing")), "--out", p(&dir.path().join("c.tsv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: loading graph"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[discover]\ntheta = 1\n").unwrap();
    let out = run(&["--config", p(&bad), "mine-meta", "--cands", "x", "--out", "y"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
}

#[test]
fn flags_override_config_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_inputs(dir.path(), 9);
    let cfg = p(&inputs.config);
    let teg = dir.path().join("teg");
    run_ok(&["--config", cfg, "build-teg", "--triples", p(&inputs.triples), "--types", p(&inputs.types), "--out", p(&teg)]);
    let m = RunManifest::parse(&std::fs::read_to_string(teg.join("manifest.txt")).unwrap()).unwrap();
    assert_eq!((m.config["k"].as_str(), m.config["r_min"].as_str()), ("3", "2"));

    let cands = dir.path().join("c.tsv");
    run_ok(&["--config", cfg, "discover", "--teg", p(&teg), "--theta-esr", "0.9", "--out", p(&cands)]);
    let m = RunManifest::parse(&std::fs::read_to_string(dir.path().join("c.tsv.manifest")).unwrap()).unwrap();
    assert_eq!(m.config["theta_esr"], "0.9");
    assert_eq!(m.config["theta_relv"], "1");
    assert_eq!(m.config["top"], "100");
}

#[test]
fn eval_reports_requested_scorers_only() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_inputs(dir.path(), 4);
    let report = dir.path().join("r.tsv");
    run_ok(&["eval", "--data", p(&inputs.labeled), "--scorer", "lemma,always_yes", "--report", p(&report)]);
    let text = std::fs::read_to_string(&report).unwrap();
    let names: Vec<&str> = text.lines().skip(1).map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(names, ["lemma", "always_yes"]);
    let always = text.lines().find(|l| l.starts_with("always_yes")).unwrap();
    assert!(always.split('\t').any(|c| c == "1.000"), "{always}");

    let out = run(&["eval", "--data", p(&inputs.labeled), "--scorer", "weeds", "--report", p(&report)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`weeds`"));
}

#[test]
fn data_dir_replaces_stop_words() {
    let dir = tempfile::tempdir().unwrap();
    let labeled = dir.path().join("l.tsv");
    std::fs::write(
        &labeled,
        "id\tpremise_relation\thypothesis_relation\tis_entailment\n\
         1\tnsubj--visit--dobj\tnsubj--visit--prep--on--pobj\ttrue\n\
         2\tnsubj--beat--dobj\tnsubj--beat--dobj\ttrue\n\
         3\tnsubj--lose--dobj\tnsubj--play--dobj\tfalse\n",
    )
    .unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir_all(&data).unwrap();
    std::fs::write(data.join("stopwords.txt"), "the\n").unwrap();
    let lemma_dev_test = |extra: &[&str]| {
        let report = dir.path().join("r.tsv");
        let mut args = extra.to_vec();
        args.extend(["eval", "--dev", p(&labeled), "--test", p(&labeled), "--scorer", "lemma", "--report", p(&report)]);
        run_ok(&args);
        std::fs::read_to_string(&report).unwrap().lines().nth(1).unwrap().to_string()
    };
    let plain = lemma_dev_test(&[]);
    let with_data = lemma_dev_test(&["--data-dir", p(&data)]);
    assert_ne!(plain, with_data, "`on` is a content word under the replacement list");
}

#[test]
fn export_writes_gold_labels_from_a_record_log() {
    let dir = tempfile::tempdir().unwrap();
    let cands = dir.path().join("cands.tsv");
    std::fs::write(
        &cands,
        "premise_path\tpremise_types\thypothesis_path\thypothesis_types\n\
         nsubj--annex--dobj\tlocation,location\tnsubj--invade--dobj\tlocation,location\n\
         nsubj--beat--dobj\t⊤,⊤\tnsubj--play--dobj\t⊤,⊤\n",
    )
    .unwrap();
    let state = dir.path().join("state");
    {
        let mut log = RecordLog::open(&state, 0).unwrap();
        let mut time = 0;
        // w0 contradicts the others on candidate 2 and is excluded.
        for w in 0..6 {
            let batch = ["1", "2"]
                .iter()
                .map(|c| {
                    time += 1;
                    AnnotationRecord {
                        worker: format!("w{w}"),
                        cand: c.to_string(),
                        label: if *c == "1" || w == 0 { Label::Yes } else { Label::No },
                        premise_flagged: false,
                        time,
                    }
                })
                .collect();
            log.append(batch).unwrap();
        }
    }
    let gold = dir.path().join("gold.tsv");
    run_ok(&["export", "--records", p(&state), "--cands", p(&cands), "--out", p(&gold)]);
    let items = load_labeled(&gold, &ColumnMap::default(), &FilterConfig::default()).unwrap();
    let got: Vec<(bool, u8)> = items.iter().map(|i| (i.gold, i.disagreements)).collect();
    assert_eq!(got, [(true, 0), (false, 0)]);
    assert!(dir.path().join("gold.tsv.manifest").is_file());

    let out = run(&["export", "--records", p(&state), "--out", p(&gold)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn export_dumps_a_graph() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_inputs(dir.path(), 2);
    let teg = dir.path().join("teg");
    run_ok(&["build-teg", "--triples", p(&inputs.triples), "--types", p(&inputs.types), "--k", "2", "--rmin", "2", "--out", p(&teg)]);
    let dump = dir.path().join("dump");
    run_ok(&["export", "--teg", p(&teg), "--out", p(&dump)]);
    for f in ["relations.tsv", "extensions.tsv", "typed.tsv", "manifest.txt"] {
        assert!(dump.join(f).is_file(), "{f}");
    }
}

#[test]
fn kge_training_writes_relation_and_entity_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = write_inputs(dir.path(), 3);
    let teg = dir.path().join("teg");
    run_ok(&["build-teg", "--triples", p(&inputs.triples), "--types", p(&inputs.types), "--rmin", "2", "--out", p(&teg)]);
    for model in ["transe", "complex"] {
        let rel = dir.path().join(format!("{model}.txt"));
        let ent = dir.path().join(format!("{model}_entities.txt"));
        run_ok(&["train", "--teg", p(&teg), "--model", model, "--dim", "6", "--epochs", "2", "--out", p(&rel), "--entities-out", p(&ent)]);
        assert!(std::fs::metadata(&rel).unwrap().len() > 0);
        assert!(std::fs::metadata(&ent).unwrap().len() > 0);
        let m = RunManifest::parse(&std::fs::read_to_string(dir.path().join(format!("{model}.txt.manifest"))).unwrap()).unwrap();
        assert_eq!(m.config["model"], model);
    }
}
