//! Skip-gram with negative sampling, trained single-threaded so that a
//! fixed seed reproduces the same vectors.

use std::collections::HashMap;

use log::info;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::vectors::{dot, VectorTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsConfig {
    pub dim: usize,
    pub epochs: usize,
    /// Context radius; `None` uses every other token of the line.
    pub window: Option<usize>,
    pub negatives: usize,
    /// Frequent-token downsampling threshold; 0 disables it.
    pub subsample: f64,
    /// Initial learning rate, decayed linearly to 1e-4 of itself.
    pub lr: f64,
    pub min_count: u64,
    pub seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 300,
            epochs: 5,
            window: None,
            negatives: 5,
            subsample: 1e-3,
            lr: 0.025,
            min_count: 1,
            seed: 1,
        }
    }
}

impl SgnsConfig {
    pub fn describe(&self) -> Vec<(String, String)> {
        vec![
            ("dim".into(), self.dim.to_string()),
            ("epochs".into(), self.epochs.to_string()),
            ("window".into(), self.window.map_or("line".into(), |w| w.to_string())),
            ("negatives".into(), self.negatives.to_string()),
            ("subsample".into(), self.subsample.to_string()),
            ("lr".into(), self.lr.to_string()),
            ("min_count".into(), self.min_count.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

/// Mean loss per (center, context) update, one entry per epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epoch_losses: Vec<f64>,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + eˣ) without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGrad {
    pub loss: f64,
    pub center: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Loss −ln σ(u⁺·v) − Σₖ ln σ(−uₖ·v) of one center vector `v` against its
/// true context vector and sampled noise vectors, with its gradients.
pub fn sgns_loss_and_grad(center: &[f64], positive: &[f64], negatives: &[&[f64]]) -> SgnsGrad {
    let d = center.len();
    let mut g_center = vec![0.0; d];
    let s = dot(center, positive);
    let mut loss = softplus(-s);
    let coef = sigmoid(s) - 1.0;
    g_center.iter_mut().zip(positive).for_each(|(g, u)| *g += coef * u);
    let g_pos = center.iter().map(|v| coef * v).collect();
    let mut g_negs = Vec::with_capacity(negatives.len());
    for u in negatives {
        let s = dot(center, u);
        loss += softplus(s);
        let coef = sigmoid(s);
        g_center.iter_mut().zip(u.iter()).for_each(|(g, x)| *g += coef * x);
        g_negs.push(center.iter().map(|v| coef * v).collect());
    }
    SgnsGrad {
        loss,
        center: g_center,
        positive: g_pos,
        negatives: g_negs,
    }
}

struct Vocab {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

fn build_vocab(lines: &[String], min_count: u64) -> Vocab {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for l in lines {
        for t in l.split_whitespace() {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    // Most frequent first, ties by token, so ids do not depend on hashing.
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let tokens: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
    let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Vocab {
        tokens,
        counts: kept.iter().map(|&(_, c)| c).collect(),
        index,
    }
}

fn row(m: &[f64], i: usize, d: usize) -> &[f64] {
    &m[i * d..(i + 1) * d]
}

fn add_row(m: &mut [f64], i: usize, d: usize, scale: f64, g: &[f64]) {
    m[i * d..(i + 1) * d].iter_mut().zip(g).for_each(|(x, g)| *x += scale * g);
}

/// Trains input vectors on whitespace-tokenized lines.
pub fn train_sgns(lines: &[String], cfg: &SgnsConfig) -> Result<(VectorTable, TrainLog)> {
    if cfg.dim == 0 || cfg.epochs == 0 {
        return Err(Error::Training("dimension and epochs must be positive".into()));
    }
    let vocab = build_vocab(lines, cfg.min_count);
    if vocab.tokens.len() < 2 {
        return Err(Error::Training(format!("vocabulary has {} tokens, need at least 2", vocab.tokens.len())));
    }
    let d = cfg.dim;
    let v = vocab.tokens.len();
    let total: u64 = vocab.counts.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut input: Vec<f64> = (0..v * d).map(|_| (rng.gen::<f64>() - 0.5) / d as f64).collect();
    let mut output = vec![0.0; v * d];

    let keep_prob: Vec<f64> = vocab
        .counts
        .iter()
        .map(|&c| {
            if cfg.subsample <= 0.0 {
                return 1.0;
            }
            let f = c as f64 / total as f64;
            (((f / cfg.subsample).sqrt() + 1.0) * cfg.subsample / f).min(1.0)
        })
        .collect();
    let encoded: Vec<Vec<usize>> = lines
        .iter()
        .map(|l| l.split_whitespace().filter_map(|t| vocab.index.get(t).copied()).collect())
        .collect();

    let planned = (cfg.epochs as f64) * (total as f64);
    let mut processed = 0u64;
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let mut erng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(epoch as u64 + 1)));
        let noise = WeightedIndex::new(vocab.counts.iter().map(|&c| (c as f64).powf(0.75)))
            .map_err(|e| Error::Training(e.to_string()))?;
        let (mut loss_sum, mut updates) = (0.0, 0u64);
        let mut kept = Vec::new();
        for line in &encoded {
            processed += line.len() as u64;
            let lr = cfg.lr * (1.0 - processed as f64 / (planned + 1.0)).max(1e-4);
            kept.clear();
            kept.extend(line.iter().copied().filter(|&t| erng.gen::<f64>() < keep_prob[t]));
            for (i, &center) in kept.iter().enumerate() {
                for (j, &context) in kept.iter().enumerate() {
                    if i == j || cfg.window.is_some_and(|w| i.abs_diff(j) > w) {
                        continue;
                    }
                    let negs: Vec<usize> = (0..cfg.negatives)
                        .map(|_| noise.sample(&mut erng))
                        .filter(|&n| n != context)
                        .collect();
                    let neg_rows: Vec<&[f64]> = negs.iter().map(|&n| row(&output, n, d)).collect();
                    let g = sgns_loss_and_grad(row(&input, center, d), row(&output, context, d), &neg_rows);
                    loss_sum += g.loss;
                    updates += 1;
                    add_row(&mut input, center, d, -lr, &g.center);
                    add_row(&mut output, context, d, -lr, &g.positive);
                    for (&n, gn) in negs.iter().zip(&g.negatives) {
                        add_row(&mut output, n, d, -lr, gn);
                    }
                }
            }
        }
        let mean = if updates == 0 { 0.0 } else { loss_sum / updates as f64 };
        info!("sgns epoch {}: mean loss {mean:.6} over {updates} updates", epoch + 1);
        log.epoch_losses.push(mean);
    }

    let mut table = VectorTable::new(d);
    for (i, t) in vocab.tokens.iter().enumerate() {
        table.insert(t, row(&input, i, d))?;
    }
    Ok((table, log))
}
