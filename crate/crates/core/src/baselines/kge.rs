//! Knowledge-graph embeddings (translation and complex bilinear) trained on
//! the graph's (entity, relation, entity) facts. Relations are then compared
//! by the cosine of their learned vectors.

use std::collections::HashMap;
use std::str::FromStr;

use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::sgns::{sigmoid, softplus, TrainLog};
use crate::baselines::vectors::{dot, VectorTable};
use crate::error::{Error, Result};
use crate::teg::TegStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KgeModel {
    TransE,
    ComplEx,
}

impl FromStr for KgeModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(KgeModel::TransE),
            "complex" => Ok(KgeModel::ComplEx),
            other => Err(Error::Config(format!("unknown embedding model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KgeConfig {
    pub model: KgeModel,
    pub dim: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Ranking margin of the translation model.
    pub margin: f64,
    pub negatives: usize,
    /// L2 penalty of the bilinear model.
    pub l2: f64,
    pub seed: u64,
}

impl KgeConfig {
    pub fn new(model: KgeModel) -> Self {
        KgeConfig {
            model,
            dim: 100,
            epochs: 50,
            lr: match model {
                KgeModel::TransE => 0.01,
                KgeModel::ComplEx => 0.05,
            },
            margin: 1.0,
            negatives: 1,
            l2: 1e-4,
            seed: 1,
        }
    }

    pub fn describe(&self) -> Vec<(String, String)> {
        vec![
            ("model".into(), format!("{:?}", self.model).to_lowercase()),
            ("dim".into(), self.dim.to_string()),
            ("epochs".into(), self.epochs.to_string()),
            ("lr".into(), self.lr.to_string()),
            ("margin".into(), self.margin.to_string()),
            ("negatives".into(), self.negatives.to_string()),
            ("l2".into(), self.l2.to_string()),
            ("seed".into(), self.seed.to_string()),
        ]
    }
}

/// Indexed facts. Relations are named by path string, or by typed key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Triples {
    pub entities: Vec<String>,
    pub relations: Vec<String>,
    pub facts: Vec<(usize, usize, usize)>,
}

impl Triples {
    pub fn from_store(store: &TegStore, typed: bool) -> Self {
        let mut relations = Vec::new();
        let mut facts = Vec::new();
        let mut push = |name: String, ext: &crate::teg::Extension| {
            let r = relations.len();
            relations.push(name);
            facts.extend(ext.pairs().iter().map(|&(a, b)| (a as usize, r, b as usize)));
        };
        if typed {
            for t in store.typed() {
                push(store.relation_key(t), &t.extension);
            }
        } else {
            for e in store.relations() {
                push(e.relation.to_string(), &e.extension);
            }
        }
        Triples {
            entities: store.entities().to_vec(),
            relations,
            facts,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KgeEmbeddings {
    pub entities: VectorTable,
    /// For the bilinear model: real parts followed by imaginary parts.
    pub relations: VectorTable,
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginGrad {
    pub loss: f64,
    pub head: Vec<f64>,
    pub rel: Vec<f64>,
    pub tail: Vec<f64>,
    pub neg_head: Vec<f64>,
    pub neg_tail: Vec<f64>,
}

/// max(0, γ + ‖h + r − t‖ − ‖h' + r − t'‖) and its gradients.
pub fn transe_margin_loss_and_grad(
    h: &[f64],
    r: &[f64],
    t: &[f64],
    nh: &[f64],
    nt: &[f64],
    margin: f64,
) -> MarginGrad {
    let d = h.len();
    let pos: Vec<f64> = (0..d).map(|k| h[k] + r[k] - t[k]).collect();
    let neg: Vec<f64> = (0..d).map(|k| nh[k] + r[k] - nt[k]).collect();
    let (dp, dn) = (norm(&pos), norm(&neg));
    let loss = margin + dp - dn;
    let zero = vec![0.0; d];
    if loss <= 0.0 {
        return MarginGrad {
            loss: 0.0,
            head: zero.clone(),
            rel: zero.clone(),
            tail: zero.clone(),
            neg_head: zero.clone(),
            neg_tail: zero,
        };
    }
    let up: Vec<f64> = pos.iter().map(|x| if dp > 0.0 { x / dp } else { 0.0 }).collect();
    let un: Vec<f64> = neg.iter().map(|x| if dn > 0.0 { x / dn } else { 0.0 }).collect();
    MarginGrad {
        loss,
        head: up.clone(),
        rel: up.iter().zip(&un).map(|(a, b)| a - b).collect(),
        tail: up.iter().map(|x| -x).collect(),
        neg_head: un.iter().map(|x| -x).collect(),
        neg_tail: un,
    }
}

/// A complex vector as separate real and imaginary parts.
#[derive(Debug, Clone, Copy)]
pub struct Complex<'a> {
    pub re: &'a [f64],
    pub im: &'a [f64],
}

/// Re⟨h, r, conj(t)⟩.
pub fn complex_score(h: Complex, r: Complex, t: Complex) -> f64 {
    (0..h.re.len())
        .map(|k| {
            h.re[k] * r.re[k] * t.re[k] + h.im[k] * r.re[k] * t.im[k] + h.re[k] * r.im[k] * t.im[k]
                - h.im[k] * r.im[k] * t.re[k]
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrad {
    pub loss: f64,
    /// (re, im) gradients of head, relation and tail.
    pub head: (Vec<f64>, Vec<f64>),
    pub rel: (Vec<f64>, Vec<f64>),
    pub tail: (Vec<f64>, Vec<f64>),
}

/// softplus(−y·φ) + λ(‖h‖² + ‖r‖² + ‖t‖²) for label y ∈ {−1, 1}.
pub fn complex_loss_and_grad(h: Complex, r: Complex, t: Complex, y: f64, l2: f64) -> ComplexGrad {
    let phi = complex_score(h, r, t);
    let sq = |c: Complex| dot(c.re, c.re) + dot(c.im, c.im);
    let loss = softplus(-y * phi) + l2 * (sq(h) + sq(r) + sq(t));
    let dphi = -y * sigmoid(-y * phi);
    let d = h.re.len();
    let g = |f: &dyn Fn(usize) -> f64, own: &[f64]| -> Vec<f64> {
        (0..d).map(|k| dphi * f(k) + 2.0 * l2 * own[k]).collect()
    };
    ComplexGrad {
        loss,
        head: (
            g(&|k| r.re[k] * t.re[k] + r.im[k] * t.im[k], h.re),
            g(&|k| r.re[k] * t.im[k] - r.im[k] * t.re[k], h.im),
        ),
        rel: (
            g(&|k| h.re[k] * t.re[k] + h.im[k] * t.im[k], r.re),
            g(&|k| h.re[k] * t.im[k] - h.im[k] * t.re[k], r.im),
        ),
        tail: (
            g(&|k| h.re[k] * r.re[k] - h.im[k] * r.im[k], t.re),
            g(&|k| h.im[k] * r.re[k] + h.re[k] * r.im[k], t.im),
        ),
    }
}

struct Params {
    d: usize,
    data: Vec<f64>,
}

impl Params {
    fn random(n: usize, d: usize, bound: f64, rng: &mut ChaCha8Rng) -> Self {
        Params {
            d,
            data: (0..n * d).map(|_| rng.gen_range(-bound..bound)).collect(),
        }
    }
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
    fn step(&mut self, i: usize, lr: f64, g: &[f64]) {
        self.data[i * self.d..(i + 1) * self.d]
            .iter_mut()
            .zip(g)
            .for_each(|(x, g)| *x -= lr * g);
    }
    fn normalize_rows(&mut self) {
        for row in self.data.chunks_mut(self.d) {
            let n = norm(row);
            if n > 0.0 {
                row.iter_mut().for_each(|x| *x /= n);
            }
        }
    }
}

fn corrupt(fact: (usize, usize, usize), n_entities: usize, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let (h, _, t) = fact;
    let mut e = rng.gen_range(0..n_entities - 1);
    if rng.gen_bool(0.5) {
        if e >= h {
            e += 1;
        }
        (e, t)
    } else {
        if e >= t {
            e += 1;
        }
        (h, e)
    }
}

pub fn train_kge(triples: &Triples, cfg: &KgeConfig) -> Result<(KgeEmbeddings, TrainLog)> {
    if triples.facts.is_empty() {
        return Err(Error::Training("no facts to train on".into()));
    }
    if triples.entities.len() < 2 {
        return Err(Error::Training("need at least two entities".into()));
    }
    if cfg.dim == 0 || cfg.epochs == 0 {
        return Err(Error::Training("dimension and epochs must be positive".into()));
    }
    let (ne, nr, d) = (triples.entities.len(), triples.relations.len(), cfg.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 6.0 / (d as f64).sqrt();
    let mut order: Vec<usize> = (0..triples.facts.len()).collect();
    let mut log = TrainLog::default();

    let (entities, relations) = match cfg.model {
        KgeModel::TransE => {
            let mut ent = Params::random(ne, d, bound, &mut rng);
            let mut rel = Params::random(nr, d, bound, &mut rng);
            rel.normalize_rows();
            for epoch in 0..cfg.epochs {
                ent.normalize_rows();
                order.shuffle(&mut rng);
                let mut total = 0.0;
                for &i in &order {
                    let f = triples.facts[i];
                    for _ in 0..cfg.negatives {
                        let (nh, nt) = corrupt(f, ne, &mut rng);
                        let g = transe_margin_loss_and_grad(
                            ent.row(f.0),
                            rel.row(f.1),
                            ent.row(f.2),
                            ent.row(nh),
                            ent.row(nt),
                            cfg.margin,
                        );
                        total += g.loss;
                        if g.loss > 0.0 {
                            ent.step(f.0, cfg.lr, &g.head);
                            rel.step(f.1, cfg.lr, &g.rel);
                            ent.step(f.2, cfg.lr, &g.tail);
                            ent.step(nh, cfg.lr, &g.neg_head);
                            ent.step(nt, cfg.lr, &g.neg_tail);
                        }
                    }
                }
                let mean = total / (order.len() * cfg.negatives.max(1)) as f64;
                info!("transe epoch {}: mean loss {mean:.6}", epoch + 1);
                log.epoch_losses.push(mean);
            }
            ent.normalize_rows();
            (ent.data, rel.data)
        }
        KgeModel::ComplEx => {
            let init = 1.0 / (d as f64).sqrt();
            let mut ent_re = Params::random(ne, d, init, &mut rng);
            let mut ent_im = Params::random(ne, d, init, &mut rng);
            let mut rel_re = Params::random(nr, d, init, &mut rng);
            let mut rel_im = Params::random(nr, d, init, &mut rng);
            for epoch in 0..cfg.epochs {
                order.shuffle(&mut rng);
                let (mut total, mut count) = (0.0, 0usize);
                for &i in &order {
                    let f = triples.facts[i];
                    let mut samples = vec![(f.0, f.2, 1.0)];
                    for _ in 0..cfg.negatives {
                        let (nh, nt) = corrupt(f, ne, &mut rng);
                        samples.push((nh, nt, -1.0));
                    }
                    for (h, t, y) in samples {
                        let g = complex_loss_and_grad(
                            Complex { re: ent_re.row(h), im: ent_im.row(h) },
                            Complex { re: rel_re.row(f.1), im: rel_im.row(f.1) },
                            Complex { re: ent_re.row(t), im: ent_im.row(t) },
                            y,
                            cfg.l2,
                        );
                        total += g.loss;
                        count += 1;
                        ent_re.step(h, cfg.lr, &g.head.0);
                        ent_im.step(h, cfg.lr, &g.head.1);
                        rel_re.step(f.1, cfg.lr, &g.rel.0);
                        rel_im.step(f.1, cfg.lr, &g.rel.1);
                        ent_re.step(t, cfg.lr, &g.tail.0);
                        ent_im.step(t, cfg.lr, &g.tail.1);
                    }
                }
                let mean = total / count as f64;
                info!("complex epoch {}: mean loss {mean:.6}", epoch + 1);
                log.epoch_losses.push(mean);
            }
            let concat = |re: &Params, im: &Params, n: usize| {
                (0..n).flat_map(|i| re.row(i).iter().chain(im.row(i)).copied().collect::<Vec<_>>()).collect()
            };
            (concat(&ent_re, &ent_im, ne), concat(&rel_re, &rel_im, nr))
        }
    };

    let width = entities.len() / ne;
    let mut ent_table = VectorTable::new(width);
    for (i, name) in triples.entities.iter().enumerate() {
        ent_table.insert(name, &entities[i * width..(i + 1) * width])?;
    }
    let mut rel_table = VectorTable::new(width);
    let mut seen: HashMap<&str, ()> = HashMap::new();
    for (i, name) in triples.relations.iter().enumerate() {
        if seen.insert(name, ()).is_some() {
            return Err(Error::Training(format!("relation `{name}` listed twice")));
        }
        rel_table.insert(name, &relations[i * width..(i + 1) * width])?;
    }
    Ok((
        KgeEmbeddings {
            entities: ent_table,
            relations: rel_table,
        },
        log,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn translation_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 5;
        let loss = |v: &[Vec<f64>]| {
            let dist = |a: &[f64], b: &[f64]| {
                (0..d).map(|k| (a[k] + v[1][k] - b[k]).powi(2)).sum::<f64>().sqrt()
            };
            (2.0 + dist(&v[0], &v[2]) - dist(&v[3], &v[4])).max(0.0)
        };
        for _ in 0..20 {
            let v: Vec<Vec<f64>> = (0..5).map(|_| rand_vec(&mut rng, d)).collect();
            let g = transe_margin_loss_and_grad(&v[0], &v[1], &v[2], &v[3], &v[4], 2.0);
            assert!((g.loss - loss(&v)).abs() < 1e-12);
            let grads = [&g.head, &g.rel, &g.tail, &g.neg_head, &g.neg_tail];
            for (which, grad) in grads.iter().enumerate() {
                for k in 0..d {
                    let h = 1e-6;
                    let (mut p, mut m) = (v.clone(), v.clone());
                    p[which][k] += h;
                    m[which][k] -= h;
                    let numeric = (loss(&p) - loss(&m)) / (2.0 * h);
                    assert!(rel_err(grad[k], numeric) < 1e-4, "{which}/{k}: {} vs {numeric}", grad[k]);
                }
            }
        }
    }

    #[test]
    fn bilinear_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 4;
        for y in [1.0, -1.0] {
            for _ in 0..10 {
                let v: Vec<Vec<f64>> = (0..6).map(|_| rand_vec(&mut rng, d)).collect();
                let loss = |v: &[Vec<f64>]| {
                    let c = |i: usize| Complex { re: &v[i], im: &v[i + 1] };
                    complex_loss_and_grad(c(0), c(2), c(4), y, 0.01).loss
                };
                let c = |i: usize| Complex { re: &v[i], im: &v[i + 1] };
                let g = complex_loss_and_grad(c(0), c(2), c(4), y, 0.01);
                let grads = [&g.head.0, &g.head.1, &g.rel.0, &g.rel.1, &g.tail.0, &g.tail.1];
                for (which, grad) in grads.iter().enumerate() {
                    for k in 0..d {
                        let h = 1e-6;
                        let (mut p, mut m) = (v.clone(), v.clone());
                        p[which][k] += h;
                        m[which][k] -= h;
                        let numeric = (loss(&p) - loss(&m)) / (2.0 * h);
                        assert!(rel_err(grad[k], numeric) < 1e-4, "{which}/{k}: {} vs {numeric}", grad[k]);
                    }
                }
            }
        }
    }

    #[test]
    fn bilinear_score_is_asymmetric_for_imaginary_relations() {
        // d = 1, r = i: φ(h, r, t) = h_re·t_im − h_im·t_re = −φ(t, r, h).
        let (h, t) = ((0.3, 0.7), (-0.4, 0.9));
        let r = Complex { re: &[0.0], im: &[1.0] };
        let forward = complex_score(Complex { re: &[h.0], im: &[h.1] }, r, Complex { re: &[t.0], im: &[t.1] });
        let backward = complex_score(Complex { re: &[t.0], im: &[t.1] }, r, Complex { re: &[h.0], im: &[h.1] });
        let closed = h.0 * t.1 - h.1 * t.0;
        assert!((forward - closed).abs() < 1e-12);
        assert!((backward + closed).abs() < 1e-12);
        // A real relation is symmetric.
        let real = Complex { re: &[0.8], im: &[0.0] };
        let f = complex_score(Complex { re: &[h.0], im: &[h.1] }, real, Complex { re: &[t.0], im: &[t.1] });
        let b = complex_score(Complex { re: &[t.0], im: &[t.1] }, real, Complex { re: &[h.0], im: &[h.1] });
        assert!((f - b).abs() < 1e-12);
    }

    fn toy() -> Triples {
        let entities: Vec<String> = (0..12).map(|i| format!("e{i}")).collect();
        let facts = (0..6).map(|i| (i, 0, i + 6)).chain((0..6).map(|i| (i + 6, 1, (i + 1) % 6))).collect();
        Triples {
            entities,
            relations: vec!["r0".into(), "r1".into()],
            facts,
        }
    }

    #[test]
    fn training_reduces_loss() {
        for model in [KgeModel::TransE, KgeModel::ComplEx] {
            let cfg = KgeConfig {
                dim: 8,
                epochs: 60,
                ..KgeConfig::new(model)
            };
            let (emb, log) = train_kge(&toy(), &cfg).unwrap();
            let first = log.epoch_losses[..5].iter().sum::<f64>();
            let last = log.epoch_losses[log.epoch_losses.len() - 5..].iter().sum::<f64>();
            assert!(last < first, "{model:?}: {first} -> {last}");
            let expected = if model == KgeModel::ComplEx { 16 } else { 8 };
            assert_eq!(emb.relations.dim(), expected);
            assert_eq!(emb.relations.len(), 2);
        }
    }

    #[test]
    fn empty_graph_is_an_error() {
        let t = Triples {
            entities: vec!["a".into(), "b".into()],
            ..Default::default()
        };
        assert!(train_kge(&t, &KgeConfig::new(KgeModel::TransE)).is_err());
    }
}
