//! Evaluation protocols: node classification with a built-in logistic
//! regression classifier and graph reconstruction from embedding
//! distances.

use crate::error::{Error, Result};
use crate::graph::{Graph, LabelTable};
use crate::model::Embeddings;
use crate::util::{rng_for, sigmoid, softmax, sq_dist};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Train/test node split over the labeled nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train_ids: Vec<u32>,
    pub test_ids: Vec<u32>,
    pub train_fraction: f64,
    pub seed: u64,
}

pub fn make_split(labels: &LabelTable, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Data(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut nodes = labels.labeled_nodes();
    if nodes.is_empty() {
        return Err(Error::Data("no labeled nodes".into()));
    }
    use rand::seq::SliceRandom;
    let mut rng = rng_for(seed, "eval-split");
    nodes.shuffle(&mut rng);
    let cut = (train_fraction * nodes.len() as f64).floor() as usize;
    let cut = cut.clamp(1, nodes.len() - 1);
    let (train, test) = nodes.split_at(cut);
    Ok(Split {
        train_ids: train.to_vec(),
        test_ids: test.to_vec(),
        train_fraction,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierMode {
    /// Softmax regression for single-label data.
    Multinomial,
    /// Independent binary regressions per label for multilabel data.
    OneVsRest,
}

#[derive(Debug, Clone)]
pub struct ClassifierModel {
    /// num_labels x (dim + 1) weight matrix, bias last.
    weights: Vec<f64>,
    num_labels: usize,
    dim: usize,
    pub mode: ClassifierMode,
    pub l2: f64,
}

impl ClassifierModel {
    fn row(&self, label: usize) -> &[f64] {
        &self.weights[label * (self.dim + 1)..(label + 1) * (self.dim + 1)]
    }

    fn raw_score(&self, label: usize, features: &[f64]) -> f64 {
        let w = self.row(label);
        w[..self.dim]
            .iter()
            .zip(features)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + w[self.dim]
    }

    /// Per-label scores for one node: softmax probabilities in multinomial
    /// mode, independent sigmoids in one-vs-rest mode.
    pub fn scores(&self, features: &[f64]) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.num_labels)
            .map(|c| self.raw_score(c, features))
            .collect();
        match self.mode {
            ClassifierMode::Multinomial => softmax(&raw),
            ClassifierMode::OneVsRest => raw.into_iter().map(sigmoid).collect(),
        }
    }
}

const FIT_TOLERANCE: f64 = 1e-5;
const FIT_MAX_ITERS: usize = 1000;

struct FitProblem<'a> {
    features: Vec<&'a [f64]>,
    /// One-hot (multinomial) or multi-hot (one-vs-rest) targets, row per
    /// sample.
    targets: Vec<Vec<f64>>,
    num_labels: usize,
    dim: usize,
    mode: ClassifierMode,
    l2: f64,
}

impl FitProblem<'_> {
    fn loss_grad(&self, weights: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let stride = self.dim + 1;
        let mut loss = 0.0;
        let mut grad_buf = grad;
        if let Some(g) = grad_buf.as_deref_mut() {
            g.fill(0.0);
        }
        for (x, t) in self.features.iter().zip(&self.targets) {
            let raw: Vec<f64> = (0..self.num_labels)
                .map(|c| {
                    let w = &weights[c * stride..(c + 1) * stride];
                    w[..self.dim].iter().zip(*x).map(|(a, b)| a * b).sum::<f64>() + w[self.dim]
                })
                .collect();
            let (probs, sample_loss) = match self.mode {
                ClassifierMode::Multinomial => {
                    let p = softmax(&raw);
                    let mut l = 0.0;
                    for (pc, tc) in p.iter().zip(t) {
                        if *tc > 0.0 {
                            l -= tc * pc.max(1e-300).ln();
                        }
                    }
                    (p, l)
                }
                ClassifierMode::OneVsRest => {
                    let p: Vec<f64> = raw.iter().copied().map(sigmoid).collect();
                    let mut l = 0.0;
                    for (pc, tc) in p.iter().zip(t) {
                        let pc = pc.clamp(1e-15, 1.0 - 1e-15);
                        l -= tc * pc.ln() + (1.0 - tc) * (1.0 - pc).ln();
                    }
                    (p, l)
                }
            };
            loss += sample_loss;
            if let Some(g) = grad_buf.as_deref_mut() {
                for c in 0..self.num_labels {
                    let err = probs[c] - t[c];
                    let gr = &mut g[c * stride..(c + 1) * stride];
                    for (gx, &xv) in gr[..self.dim].iter_mut().zip(*x) {
                        *gx += err * xv;
                    }
                    gr[self.dim] += err;
                }
            }
        }
        // Ridge on the non-bias weights.
        for c in 0..self.num_labels {
            let w = &weights[c * stride..(c + 1) * stride];
            loss += self.l2 / 2.0 * w[..self.dim].iter().map(|v| v * v).sum::<f64>();
        }
        if let Some(g) = grad_buf.as_deref_mut() {
            for c in 0..self.num_labels {
                let gr = &mut g[c * stride..(c + 1) * stride];
                let w = &weights[c * stride..(c + 1) * stride];
                for (gx, &wv) in gr[..self.dim].iter_mut().zip(&w[..self.dim]) {
                    *gx += self.l2 * wv;
                }
            }
        }
        loss
    }
}

/// Fit the classifier by full-batch gradient descent with a halving line
/// search, to gradient-norm tolerance 1e-5 or 1000 iterations. The
/// problem is convex, so the result does not depend on the seed; the
/// parameter is kept for interface stability.
pub fn fit_classifier(
    embeddings: &Embeddings,
    labels: &LabelTable,
    split: &Split,
    l2: f64,
    _seed: u64,
) -> Result<ClassifierModel> {
    let mode = if labels.multilabel() {
        ClassifierMode::OneVsRest
    } else {
        ClassifierMode::Multinomial
    };
    let num_labels = labels.num_labels().max(1);
    let dim = embeddings.dim;
    let mut features = Vec::with_capacity(split.train_ids.len());
    let mut targets = Vec::with_capacity(split.train_ids.len());
    for &node in &split.train_ids {
        if node as usize >= embeddings.n() {
            return Err(Error::NodeRange {
                id: node,
                n: embeddings.n(),
            });
        }
        features.push(embeddings.row(node));
        let mut t = vec![0.0; num_labels];
        for &l in labels.labels_of(node) {
            t[l as usize] = 1.0;
        }
        targets.push(t);
    }
    let problem = FitProblem {
        features,
        targets,
        num_labels,
        dim,
        mode,
        l2,
    };

    let mut weights = vec![0.0; num_labels * (dim + 1)];
    let mut grad = vec![0.0; weights.len()];
    let mut step = 1.0f64;
    let mut loss = problem.loss_grad(&weights, Some(&mut grad));
    for _iter in 0..FIT_MAX_ITERS {
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm < FIT_TOLERANCE {
            break;
        }
        let mut accepted = false;
        for _ in 0..50 {
            let trial: Vec<f64> = weights
                .iter()
                .zip(&grad)
                .map(|(w, g)| w - step * g)
                .collect();
            let trial_loss = problem.loss_grad(&trial, None);
            if trial_loss <= loss {
                weights = trial;
                loss = problem.loss_grad(&weights, Some(&mut grad));
                step *= 1.2;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break; // no descent direction at float precision
        }
    }
    // Non-convergence at the cap is tolerated; the model is still usable.
    Ok(ClassifierModel {
        weights,
        num_labels,
        dim,
        mode,
        l2,
    })
}

/// Predicted label sets. Single-label mode takes the argmax; multilabel
/// mode takes the top L_i scored labels, where L_i is the node's true
/// label count. Ties break toward the lowest label id.
pub fn predict(
    classifier: &ClassifierModel,
    embeddings: &Embeddings,
    nodes: &[u32],
    label_counts: Option<&[usize]>,
) -> Vec<Vec<u32>> {
    nodes
        .iter()
        .enumerate()
        .map(|(idx, &node)| {
            let scores = classifier.scores(embeddings.row(node));
            match classifier.mode {
                ClassifierMode::Multinomial => {
                    let best = scores
                        .iter()
                        .enumerate()
                        .fold((0usize, f64::NEG_INFINITY), |acc, (c, &s)| {
                            if s > acc.1 {
                                (c, s)
                            } else {
                                acc
                            }
                        });
                    vec![best.0 as u32]
                }
                ClassifierMode::OneVsRest => {
                    let want = label_counts.map(|c| c[idx]).unwrap_or(1);
                    let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
                    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                    let mut out: Vec<u32> =
                        ranked.iter().take(want).map(|&(c, _)| c as u32).collect();
                    out.sort_unstable();
                    out
                }
            }
        })
        .collect()
}

fn confusion_counts(
    predicted: &[Vec<u32>],
    truth: &[Vec<u32>],
    num_labels: usize,
) -> Vec<(usize, usize, usize)> {
    let mut counts = vec![(0usize, 0usize, 0usize); num_labels];
    for (p, t) in predicted.iter().zip(truth) {
        for &label in p {
            if t.contains(&label) {
                counts[label as usize].0 += 1; // TP
            } else {
                counts[label as usize].1 += 1; // FP
            }
        }
        for &label in t {
            if !p.contains(&label) {
                counts[label as usize].2 += 1; // FN
            }
        }
    }
    counts
}

/// Unweighted mean of per-label F1. Labels with no positives in either
/// set score 0.
pub fn macro_f1(predicted: &[Vec<u32>], truth: &[Vec<u32>], num_labels: usize) -> f64 {
    if num_labels == 0 {
        return 0.0;
    }
    let counts = confusion_counts(predicted, truth, num_labels);
    let sum: f64 = counts
        .iter()
        .map(|&(tp, fp, fne)| {
            let denom = 2 * tp + fp + fne;
            if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            }
        })
        .sum();
    sum / num_labels as f64
}

/// F1 over globally pooled confusion counts.
pub fn micro_f1(predicted: &[Vec<u32>], truth: &[Vec<u32>], num_labels: usize) -> f64 {
    let counts = confusion_counts(predicted, truth, num_labels);
    let (tp, fp, fne) = counts
        .iter()
        .fold((0, 0, 0), |(a, b, c), &(x, y, z)| (a + x, b + y, c + z));
    let denom = 2 * tp + fp + fne;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// A candidate pair ordered by (distance, i, j); the total order makes
/// the top-k set and its output order deterministic.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    pair: (u32, u32),
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.pair.cmp(&other.pair))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn row_candidates(embeddings: &Embeddings, i: u32, k: usize, heap: &mut std::collections::BinaryHeap<Candidate>) {
    let n = embeddings.n() as u32;
    let ui = embeddings.row(i);
    for j in (i + 1)..n {
        let cand = Candidate {
            dist: sq_dist(ui, embeddings.row(j)),
            pair: (i, j),
        };
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().unwrap() {
            heap.pop();
            heap.push(cand);
        }
    }
}

fn top_k_from_heap(heap: std::collections::BinaryHeap<Candidate>) -> Vec<(u32, u32)> {
    let mut items = heap.into_vec();
    items.sort_unstable();
    items.into_iter().map(|c| c.pair).collect()
}

pub fn reconstruct_serial(embeddings: &Embeddings, k: usize) -> Result<Vec<(u32, u32)>> {
    check_k(embeddings, k)?;
    let mut heap = std::collections::BinaryHeap::with_capacity(k + 1);
    for i in 0..embeddings.n() as u32 {
        row_candidates(embeddings, i, k, &mut heap);
    }
    Ok(top_k_from_heap(heap))
}

#[cfg(feature = "parallel")]
pub fn reconstruct_parallel(embeddings: &Embeddings, k: usize) -> Result<Vec<(u32, u32)>> {
    check_k(embeddings, k)?;
    let heap = (0..embeddings.n() as u32)
        .into_par_iter()
        .fold(
            || std::collections::BinaryHeap::with_capacity(k + 1),
            |mut heap, i| {
                row_candidates(embeddings, i, k, &mut heap);
                heap
            },
        )
        .reduce(
            || std::collections::BinaryHeap::with_capacity(k + 1),
            |mut a, b| {
                for cand in b {
                    if a.len() < k {
                        a.push(cand);
                    } else if cand < *a.peek().unwrap() {
                        a.pop();
                        a.push(cand);
                    }
                }
                a
            },
        );
    Ok(top_k_from_heap(heap))
}

fn check_k(embeddings: &Embeddings, k: usize) -> Result<()> {
    let n = embeddings.n();
    let pairs = n * n.saturating_sub(1) / 2;
    if k > pairs {
        return Err(Error::NodeRange {
            id: k as u32,
            n: pairs,
        });
    }
    Ok(())
}

/// Top-k node pairs by ascending embedding distance; the reconstruction
/// prediction.
pub fn reconstruct(embeddings: &Embeddings, k: usize) -> Result<Vec<(u32, u32)>> {
    #[cfg(feature = "parallel")]
    {
        reconstruct_parallel(embeddings, k)
    }
    #[cfg(not(feature = "parallel"))]
    {
        reconstruct_serial(embeddings, k)
    }
}

/// Precision, recall and F1 of predicted pairs against the pristine edge
/// set.
pub fn reconstruction_f1(predicted: &[(u32, u32)], pristine: &Graph) -> (f64, f64, f64) {
    if predicted.is_empty() || pristine.edge_count() == 0 {
        return (0.0, 0.0, 0.0);
    }
    let hits = predicted
        .iter()
        .filter(|&&(u, v)| pristine.has_edge(u, v))
        .count() as f64;
    let precision = hits / predicted.len() as f64;
    let recall = hits / pristine.edge_count() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}
