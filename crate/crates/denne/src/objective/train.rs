//! Serial SGD over walk-derived pairs with amortized regularizer
//! application.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{LrSchedule, Model, NoiseMode};
use crate::objective::{total_loss, LossBreakdown};
use crate::sampling::{extract_pairs, generate_walks, NegativeSampler, TrainingPair, WalkConfig};
use crate::util::{rng_for, rng_for_indexed, sigmoid};

#[derive(Debug, Clone, Copy)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Probe loss at initialization, before any update.
    pub initial: LossBreakdown,
    pub epochs: Vec<EpochRecord>,
    pub positive_pairs: usize,
}

const PROBE_LIMIT: usize = 1000;

/// Bound on |dLoss/dp| in SGD embedding/fitness steps.
const GRAD_CLIP: f64 = 10.0;

/// Looser bound for the noise step: its proximal prior update is stable
/// under large gradients, and strongly disputed pairs need the full
/// signal so their entries can grow enough to shield the embeddings.
const NOISE_GRAD_CLIP: f64 = 100.0;

/// Reciprocal expected touches per epoch, used to scale per-touch
/// embedding-regularizer gradients so one epoch applies about one full
/// batch pass. The noise prior is deliberately NOT amortized: the model
/// weighs prior and likelihood 1:1 per adjacency entry, so every pair
/// visit applies the full-strength prior decay. Amortizing it by the
/// corpus pair count would let frequently-walked pairs accumulate noise
/// proportional to their count, absorbing signal on true edges instead
/// of disputed ones.
pub struct TouchScales {
    u: Vec<f64>,
    positives: usize,
}

impl TouchScales {
    pub fn build(positives: &[TrainingPair], sampler: &NegativeSampler, n: usize, k: usize) -> Self {
        let mut u = vec![0.0; n];
        for p in positives {
            u[p.center as usize] += 1.0 + k as f64;
            u[p.context as usize] += 1.0;
        }
        let expected_draws = positives.len() as f64 * k as f64;
        for (i, t) in u.iter_mut().enumerate() {
            *t += expected_draws * sampler.probability(i as u32);
        }
        TouchScales {
            u,
            positives: positives.len(),
        }
    }

    fn u_scale(&self, node: u32) -> f64 {
        let t = self.u[node as usize];
        if t > 0.0 {
            1.0 / t
        } else {
            0.0
        }
    }
}

/// One SGD update for a positive pair and its drawn negatives. Applies
/// exact analytic pair gradients plus per-touch amortized regularizer
/// gradients; fitness is projected back to >= 0.
pub fn gradient_step(
    model: &mut Model,
    positive: &TrainingPair,
    negatives: &[u32],
    learning_rate: f64,
    scales: &TouchScales,
    noise_frozen: bool,
) -> Result<()> {
    if learning_rate <= 0.0 {
        return Err(Error::Training(format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    apply_pair(model, positive, learning_rate, scales, noise_frozen)?;
    for &v in negatives {
        if v == positive.center {
            continue;
        }
        let neg = TrainingPair::negative(positive.center, v);
        apply_pair(model, &neg, learning_rate, scales, noise_frozen)?;
    }
    // Center-prior extras amortized per positive-pair step.
    apply_center_prior(model, learning_rate, scales);
    Ok(())
}

fn apply_pair(
    model: &mut Model,
    pair: &TrainingPair,
    lr: f64,
    scales: &TouchScales,
    noise_frozen: bool,
) -> Result<()> {
    let (i, j) = (pair.center, pair.context);
    let s = model.similarity(i, j)?;
    if !s.is_finite() {
        return Err(Error::Training(format!(
            "non-finite similarity for pair ({i}, {j})"
        )));
    }
    let a = sigmoid(s);
    let frozen_noise = model.config().freeze_noise || noise_frozen;
    let eps = if frozen_noise {
        model.get_noise(i, j)?
    } else {
        model.touch_noise(i, j)?
    };
    let delta = model.config().clamp_delta;
    let raw = a + eps;
    let clamped = raw < delta || raw > 1.0 - delta;
    let p = raw.clamp(delta, 1.0 - delta);
    let dl_dp = if clamped {
        0.0
    } else if pair.positive {
        -1.0 / p
    } else {
        1.0 / (1.0 - p)
    };
    // SGD stability clips; they bind only when p leaves [0.1, 0.9] far
    // enough for a single step to overshoot. The batch gradients stay
    // exact.
    let dl_dp_noise = dl_dp.clamp(-NOISE_GRAD_CLIP, NOISE_GRAD_CLIP);
    let dl_dp = dl_dp.clamp(-GRAD_CLIP, GRAD_CLIP);
    let dl_ds = dl_dp * a * (1.0 - a);

    let dim = model.dim();
    let diff: Vec<f64> = {
        let ui = model.embedding(i);
        let uj = model.embedding(j);
        ui.iter().zip(uj).map(|(a, b)| a - b).collect()
    };
    for (r, d) in diff.iter().enumerate() {
        model.embedding_mut(i)[r] -= lr * dl_ds * (-2.0 * d);
        model.embedding_mut(j)[r] -= lr * dl_ds * (2.0 * d);
    }
    debug_assert_eq!(diff.len(), dim);

    // Noise update: explicit pair-gradient step, then the prior applied
    // as an exact proximal (implicit) step on its quadratic form. This is
    // unconditionally stable for any alpha_e and leaves the entry at the
    // fixed point |dl/dp| / (alpha_e * curvature) under repeated visits,
    // so noise concentrates on the pairs the embeddings dispute.
    if !frozen_noise {
        let prior = noise_prior(model, eps);
        let stepped = eps - lr * dl_dp_noise;
        let strength = lr * model.config().alpha_e * prior.curvature;
        let mode = prior.mode;
        model.set_noise(i, j, (stepped + strength * mode) / (1.0 + strength))?;
        if !prior.mixture_logit_grad.is_empty() {
            // The mixture weights see one prior term per entry; amortize
            // their update by the expected entry touches instead.
            let scale = (scales.u_scale(i) + scales.u_scale(j)) / 2.0;
            let grads = prior.mixture_logit_grad.clone();
            let logits = model.mixture_logits_mut();
            for (g, upd) in grads.iter().zip(logits.iter_mut()) {
                *upd -= lr * scale * g;
            }
        }
    }

    // Fitness: pair gradient plus amortized lambda term, projected to >= 0.
    if model.fitness.is_some() {
        let cfg_term = {
            let cfg = model.config();
            cfg.alpha_u * cfg.alpha_deg * cfg.degree.as_ref().unwrap().lambda
        };
        let (si, sj) = (scales.u_scale(i), scales.u_scale(j));
        let d = model.fitness.as_mut().unwrap();
        let (di, dj) = (d[i as usize], d[j as usize]);
        d[i as usize] = (di - lr * (dl_ds * dj + si * cfg_term)).max(0.0);
        d[j as usize] = (dj - lr * (dl_ds * di + sj * cfg_term)).max(0.0);
    }

    // Embedding regularizer for the two touched rows.
    apply_embed_reg_row(model, i, lr, scales.u_scale(i));
    apply_embed_reg_row(model, j, lr, scales.u_scale(j));

    if !model.embedding(i).iter().all(|x| x.is_finite()) {
        return Err(Error::Training(format!(
            "non-finite embedding after update of node {i}"
        )));
    }
    Ok(())
}

/// The noise prior, viewed as the quadratic
/// alpha_e * curvature / 2 * (eps - mode)^2 plus the mixture-logit
/// gradient it induces at the current entry.
struct NoisePrior {
    /// Second derivative of the unweighted prior in eps (2 for Gaussian,
    /// sum beta_l / sigma_l^2 for the mixture).
    curvature: f64,
    mode: f64,
    mixture_logit_grad: Vec<f64>,
}

fn noise_prior(model: &Model, eps: f64) -> NoisePrior {
    let cfg = model.config();
    match &cfg.noise_mode {
        NoiseMode::Gaussian => NoisePrior {
            curvature: 2.0,
            mode: 0.0,
            mixture_logit_grad: Vec::new(),
        },
        NoiseMode::Adaptive(components) => {
            let beta = model.mixture_weights().expect("adaptive mode");
            let mut curvature = 0.0;
            let mut weighted_mean = 0.0;
            let mut dl_dbeta = vec![0.0; components.len()];
            for (l, c) in components.iter().enumerate() {
                curvature += beta[l] / c.variance;
                weighted_mean += beta[l] * c.mean / c.variance;
                let d = eps - c.mean;
                dl_dbeta[l] = cfg.alpha_e / (2.0 * c.variance) * d * d;
            }
            let inner: f64 = beta.iter().zip(&dl_dbeta).map(|(b, g)| b * g).sum();
            let mixture_logit_grad: Vec<f64> = (0..components.len())
                .map(|l| beta[l] * (dl_dbeta[l] - inner))
                .collect();
            NoisePrior {
                curvature,
                mode: weighted_mean / curvature,
                mixture_logit_grad,
            }
        }
    }
}

fn apply_embed_reg_row(model: &mut Model, node: u32, lr: f64, scale: f64) {
    if scale == 0.0 {
        return;
    }
    let cfg = model.config();
    let alpha_u = cfg.alpha_u;
    let alpha_com = cfg.alpha_com;
    let dim = model.dim();
    if model.community.is_none() {
        let row = model.embedding_mut(node);
        for x in row {
            *x -= lr * scale * alpha_u * 2.0 * *x;
        }
        return;
    }

    let w = alpha_u * alpha_com;
    let m1 = model.split();
    let m2 = dim - m1;
    let (k, sigma_c2, frozen) = {
        let cs = model.community.as_ref().unwrap();
        (cs.communities, cs.sigma_c2, cs.frozen)
    };

    // Local block.
    for r in 0..m1 {
        let x = model.embedding(node)[r];
        model.embedding_mut(node)[r] -= lr * scale * w * 2.0 * x;
    }

    if frozen {
        // Ground-truth memberships are one-hot within ~e^-100, so only
        // the node's own community contributes above f64 noise; pull the
        // community block and that one center toward each other directly.
        let own = {
            let cs = model.community.as_ref().unwrap();
            let logits = &cs.membership_logits[node as usize * k..(node as usize + 1) * k];
            logits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(idx, _)| idx)
                .unwrap()
        };
        let pull = w / sigma_c2;
        for r in 0..m2 {
            let u = model.embedding(node)[m1 + r];
            let c = model.community.as_ref().unwrap().centers[own * m2 + r];
            let d = u - c;
            model.embedding_mut(node)[m1 + r] -= lr * scale * pull * d;
            model.community.as_mut().unwrap().centers[own * m2 + r] += lr * scale * pull * d;
        }
        return;
    }

    let gamma = model.community.as_ref().unwrap().gamma(node);
    // Community block, its centers and the membership logits of this row.
    let u_comm: Vec<f64> = model.embedding(node)[m1..].to_vec();
    let mut q = vec![0.0; k];
    let mut u_grad = vec![0.0; m2];
    let mut c_grad = vec![0.0; k * m2];
    {
        let cs = model.community.as_ref().unwrap();
        for (kk, g) in gamma.iter().enumerate() {
            let center = cs.center(kk, m2);
            let mut d2 = 0.0;
            for r in 0..m2 {
                let d = u_comm[r] - center[r];
                d2 += d * d;
                u_grad[r] += w * g / sigma_c2 * d;
                c_grad[kk * m2 + r] = w * g / sigma_c2 * (center[r] - u_comm[r]);
            }
            q[kk] = d2 / (2.0 * sigma_c2);
        }
    }
    for r in 0..m2 {
        model.embedding_mut(node)[m1 + r] -= lr * scale * u_grad[r];
    }
    let cs = model.community.as_mut().unwrap();
    for (c, g) in cs.centers.iter_mut().zip(&c_grad) {
        *c -= lr * scale * g;
    }
    let inner: f64 = gamma.iter().zip(&q).map(|(g, qq)| g * qq).sum();
    for l in 0..k {
        let g = gamma[l] * w * (q[l] - inner);
        cs.membership_logits[node as usize * k + l] -= lr * scale * g;
    }
}

fn apply_center_prior(model: &mut Model, lr: f64, scales: &TouchScales) {
    let alpha_com = model.config().alpha_com;
    if let Some(cs) = model.community.as_mut() {
        if scales.positives == 0 {
            return;
        }
        let scale = 1.0 / scales.positives as f64;
        let sigma_w2 = cs.sigma_w2;
        for c in cs.centers.iter_mut() {
            *c -= lr * scale * alpha_com * *c / sigma_w2;
        }
    }
}

fn learning_rate(cfg_lr0: f64, schedule: LrSchedule, step: usize, total: usize) -> f64 {
    match schedule {
        LrSchedule::Constant => cfg_lr0,
        LrSchedule::Linear => {
            let frac = 1.0 - step as f64 / total.max(1) as f64;
            cfg_lr0 * frac.max(0.01)
        }
    }
}

/// Run the full training protocol: walk corpus, negative sampling, SGD
/// with decaying learning rate, per-epoch probe losses.
pub fn train(
    model: &mut Model,
    graph: &Graph,
    walk_config: &WalkConfig,
    epochs: usize,
) -> Result<TrainReport> {
    let walks = generate_walks(graph, walk_config);
    let positives: Vec<TrainingPair> = walks
        .iter()
        .flat_map(|w| extract_pairs(w, walk_config.window))
        .collect();
    if positives.is_empty() {
        return Err(Error::Data(
            "walk corpus produced no training pairs (empty graph?)".into(),
        ));
    }
    let cfg = model.config().clone();
    let sampler = NegativeSampler::new(graph, cfg.neg_exponent)?;
    let scales = TouchScales::build(&positives, &sampler, model.n(), cfg.negatives);

    // Fixed probe set: leading corpus pairs plus frozen negatives.
    let mut probe: Vec<TrainingPair> = Vec::new();
    {
        let mut rng = rng_for(cfg.seed, "probe-negatives");
        for p in positives.iter().take(PROBE_LIMIT) {
            probe.push(*p);
            for v in sampler.sample_negatives(p.center, cfg.negatives, &mut rng)? {
                probe.push(TrainingPair::negative(p.center, v));
            }
        }
    }

    let initial = total_loss(model, &probe)?;
    let total_steps = epochs * positives.len();
    let mut report = TrainReport {
        initial,
        epochs: Vec::with_capacity(epochs),
        positive_pairs: positives.len(),
    };

    let mut order: Vec<usize> = (0..positives.len()).collect();
    let mut step = 0usize;
    for epoch in 0..epochs {
        let started = Instant::now();
        {
            use rand::seq::SliceRandom;
            let mut rng = rng_for_indexed(cfg.seed, "epoch-shuffle", epoch as u64);
            order.shuffle(&mut rng);
        }
        let mut neg_rng = rng_for_indexed(cfg.seed, "epoch-negatives", epoch as u64);
        for &idx in &order {
            let pair = positives[idx];
            let negatives = sampler.sample_negatives(pair.center, cfg.negatives, &mut neg_rng)?;
            let lr = learning_rate(cfg.lr0, cfg.lr_schedule, step, total_steps);
            gradient_step(
                model,
                &pair,
                &negatives,
                lr,
                &scales,
                epoch < cfg.noise_warmup_epochs,
            )?;
            step += 1;
        }
        let loss = total_loss(model, &probe)?;
        report.epochs.push(EpochRecord {
            epoch,
            loss,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(report)
}
