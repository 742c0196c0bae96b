//! Optional TOML run configuration. Every key is optional; a flag given on
//! the command line wins over the file, and the file wins over defaults.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

use relmine_core::path::{FilterConfig, StopList};
use relmine_core::meta::Morphology;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub data_dir: Option<PathBuf>,
    pub build_teg: BuildTegSection,
    pub discover: DiscoverSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub annotate: AnnotateSection,
    pub mine_meta: MineMetaSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildTegSection {
    pub k: Option<usize>,
    pub r_min: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoverSection {
    pub theta_relv: Option<f64>,
    pub theta_sigma: Option<f64>,
    pub theta_esr: Option<f64>,
    pub r_min: Option<usize>,
    pub top: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub dim: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub negatives: Option<usize>,
    pub window: Option<usize>,
    pub margin: Option<f64>,
    pub l2: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub seed: Option<u64>,
    pub columns: Option<PathBuf>,
    pub scorers: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotateSection {
    pub addr: Option<String>,
    pub lock_timeout: Option<u64>,
    pub min_votes: Option<usize>,
    pub trust_threshold: Option<f64>,
    pub qualification: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MineMetaSection {
    pub min_freq: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Shared data files, each taken from the data directory when present there.
#[derive(Debug, Clone, Default)]
pub struct DataFiles {
    pub dir: Option<PathBuf>,
}

impl DataFiles {
    fn file(&self, name: &str) -> Option<PathBuf> {
        let p = self.dir.as_ref()?.join(name);
        p.is_file().then_some(p)
    }

    pub fn filter(&self) -> Result<FilterConfig> {
        match self.file("filter.toml") {
            Some(p) => FilterConfig::load(&p).with_context(|| format!("loading {}", p.display())),
            None => Ok(FilterConfig::default()),
        }
    }

    pub fn stop_list(&self) -> Result<StopList> {
        match self.file("stopwords.txt") {
            Some(p) => StopList::load(&p).with_context(|| format!("loading {}", p.display())),
            None => Ok(StopList::default()),
        }
    }

    pub fn morphology(&self) -> Result<Morphology> {
        match self.file("morphology.toml") {
            Some(p) => {
                let text = std::fs::read_to_string(&p)?;
                Morphology::from_toml(&text).with_context(|| format!("loading {}", p.display()))
            }
            None => Ok(Morphology::default()),
        }
    }

    pub fn lexicon(&self) -> Option<PathBuf> {
        self.file("lexicon.tsv")
    }
}
