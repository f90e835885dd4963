//! The training objective: noisy structure-preserving pair losses, noise
//! and embedding regularizers, their exact batch gradients, and the SGD
//! trainer.

pub mod train;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{Model, NoiseMode};
use crate::sampling::TrainingPair;
use crate::util::sigmoid;

/// Loss components of one evaluation. The identity
/// `total = proximity + alpha_e * reg_noise + alpha_u * reg_embed
///        + alpha_com * reg_prior_extras`
/// holds exactly; `reg_embed` carries the per-prior weights already.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub proximity: f64,
    pub reg_noise: f64,
    pub reg_embed: f64,
    pub reg_prior_extras: f64,
    pub total: f64,
}

/// Signal shared by loss and gradient paths for a single pair.
struct PairSignal {
    score: f64,
    prob: f64,
    /// dLoss/d(raw probability); zero when the clamp is active.
    dl_dp: f64,
}

fn pair_signal(model: &Model, pair: &TrainingPair) -> Result<PairSignal> {
    let score = model.similarity(pair.center, pair.context)?;
    let a = sigmoid(score);
    let raw = a + model.get_noise(pair.center, pair.context)?;
    let delta = model.config().clamp_delta;
    let clamped = raw < delta || raw > 1.0 - delta;
    let prob = raw.clamp(delta, 1.0 - delta);
    let dl_dp = if clamped {
        0.0
    } else if pair.positive {
        -1.0 / prob
    } else {
        1.0 / (1.0 - prob)
    };
    Ok(PairSignal { score, prob, dl_dp })
}

/// Negative log-likelihood of one observation: -log p for positives,
/// -log(1 - p) for negatives, on the clamped probability.
pub fn pair_loss(model: &Model, pair: &TrainingPair) -> Result<f64> {
    let sig = pair_signal(model, pair)?;
    Ok(if pair.positive {
        -sig.prob.ln()
    } else {
        -(1.0 - sig.prob).ln()
    })
}

/// Gaussian noise regularizer: sum of squared materialized entries.
/// Untouched pairs sit exactly at the prior mode 0 and contribute nothing.
pub fn reg_noise_gaussian(model: &Model) -> f64 {
    model.noise_entries().map(|(_, e)| e * e).sum()
}

/// Adaptive noise regularizer over materialized entries:
/// sum_ij sum_l (beta_l / (2 sigma_l^2)) (eps_ij - mu_l)^2.
pub fn reg_noise_adaptive(model: &Model) -> Result<f64> {
    let beta = model.mixture_weights()?;
    let components = model.mixture_components();
    let mut total = 0.0;
    for (_, eps) in model.noise_entries() {
        for (b, c) in beta.iter().zip(components) {
            let d = eps - c.mean;
            total += b / (2.0 * c.variance) * d * d;
        }
    }
    Ok(total)
}

/// The active noise regularizer for the configured mode.
pub fn reg_noise(model: &Model) -> Result<f64> {
    match model.config().noise_mode {
        NoiseMode::Gaussian => Ok(reg_noise_gaussian(model)),
        NoiseMode::Adaptive(_) => reg_noise_adaptive(model),
    }
}

/// Basic embedding regularizer: squared Frobenius norm of U.
pub fn reg_embed_basic(model: &Model) -> f64 {
    model.embedding_matrix().iter().map(|u| u * u).sum()
}

/// Community regularizer and the separately tracked center-prior extra
/// sum_k ||c_k||^2 / (2 sigma_w^2).
pub fn reg_embed_community(model: &Model) -> Result<(f64, f64)> {
    let cs = model
        .community
        .as_ref()
        .ok_or_else(|| Error::Mode("community prior is not enabled".into()))?;
    let m1 = model.split();
    let m2 = model.dim() - m1;
    let mut value = 0.0;
    for i in 0..model.n() as u32 {
        let u = model.embedding(i);
        for &x in &u[..m1] {
            value += x * x;
        }
        let gamma = cs.gamma(i);
        for (k, g) in gamma.iter().enumerate() {
            let center = cs.center(k, m2);
            let mut d2 = 0.0;
            for (x, c) in u[m1..].iter().zip(center) {
                let d = x - c;
                d2 += d * d;
            }
            value += g / (2.0 * cs.sigma_c2) * d2;
        }
    }
    let extras: f64 = cs.centers.iter().map(|c| c * c).sum::<f64>() / (2.0 * cs.sigma_w2);
    Ok((value, extras))
}

/// Degree regularizer: lambda times the total fitness.
pub fn reg_embed_degree(model: &Model) -> Result<f64> {
    let fitness = model
        .fitness
        .as_ref()
        .ok_or_else(|| Error::Mode("degree prior is not enabled".into()))?;
    let lambda = model.config().degree.as_ref().unwrap().lambda;
    Ok(lambda * fitness.iter().sum::<f64>())
}

/// The prior-weighted embedding regularizer and the center-prior extra.
pub fn combined_reg_embed(model: &Model) -> Result<(f64, f64)> {
    let cfg = model.config();
    let mut value;
    let mut extras = 0.0;
    if model.community.is_some() {
        let (com, center) = reg_embed_community(model)?;
        value = cfg.alpha_com * com;
        extras = center;
    } else {
        value = reg_embed_basic(model);
    }
    if model.fitness.is_some() {
        value += cfg.alpha_deg * reg_embed_degree(model)?;
    }
    Ok((value, extras))
}

/// Full objective value over the given labeled pairs.
pub fn total_loss(model: &Model, pairs: &[TrainingPair]) -> Result<LossBreakdown> {
    let cfg = model.config();
    let mut proximity = 0.0;
    for pair in pairs {
        proximity += pair_loss(model, pair)?;
    }
    let reg_noise = reg_noise(model)?;
    let (reg_embed, reg_prior_extras) = combined_reg_embed(model)?;
    let total = proximity
        + cfg.alpha_e * reg_noise
        + cfg.alpha_u * reg_embed
        + cfg.alpha_com * reg_prior_extras;
    Ok(LossBreakdown {
        proximity,
        reg_noise,
        reg_embed,
        reg_prior_extras,
        total,
    })
}

/// Exact batch gradient of `total_loss` for every trainable family.
/// Vectors are zero-length for families the configuration does not use.
#[derive(Debug, Clone, Default)]
pub struct GradientSet {
    pub u: Vec<f64>,
    pub noise: BTreeMap<(u32, u32), f64>,
    pub centers: Vec<f64>,
    pub membership_logits: Vec<f64>,
    pub fitness: Vec<f64>,
    pub mixture_logits: Vec<f64>,
}

fn noise_key(i: u32, j: u32) -> (u32, u32) {
    (i.min(j), i.max(j))
}

pub fn total_loss_grad(model: &Model, pairs: &[TrainingPair]) -> Result<GradientSet> {
    let cfg = model.config();
    let n = model.n();
    let dim = model.dim();
    let mut grad = GradientSet {
        u: vec![0.0; n * dim],
        ..GradientSet::default()
    };
    if let Some(cs) = &model.community {
        grad.centers = vec![0.0; cs.centers.len()];
        grad.membership_logits = vec![0.0; cs.membership_logits.len()];
    }
    if model.fitness.is_some() {
        grad.fitness = vec![0.0; n];
    }
    if matches!(cfg.noise_mode, NoiseMode::Adaptive(_)) {
        grad.mixture_logits = vec![0.0; model.mixture_logits().len()];
    }

    // Pair terms.
    for pair in pairs {
        let (i, j) = (pair.center, pair.context);
        let sig = pair_signal(model, pair)?;
        let a = sigmoid(sig.score);
        let dl_ds = sig.dl_dp * a * (1.0 - a);
        let ui = model.embedding(i);
        let uj = model.embedding(j);
        for r in 0..dim {
            let diff = ui[r] - uj[r];
            grad.u[i as usize * dim + r] += dl_ds * (-2.0 * diff);
            grad.u[j as usize * dim + r] += dl_ds * (2.0 * diff);
        }
        *grad.noise.entry(noise_key(i, j)).or_insert(0.0) += sig.dl_dp;
        if let Some(d) = &model.fitness {
            grad.fitness[i as usize] += dl_ds * d[j as usize];
            grad.fitness[j as usize] += dl_ds * d[i as usize];
        }
    }

    // Noise regularizer.
    match &cfg.noise_mode {
        NoiseMode::Gaussian => {
            for (key, eps) in model.noise_entries() {
                *grad.noise.entry(key).or_insert(0.0) += cfg.alpha_e * 2.0 * eps;
            }
        }
        NoiseMode::Adaptive(components) => {
            let beta = model.mixture_weights()?;
            let mut dl_dbeta = vec![0.0; components.len()];
            for (key, eps) in model.noise_entries() {
                let mut g = 0.0;
                for (l, c) in components.iter().enumerate() {
                    let d = eps - c.mean;
                    g += beta[l] / c.variance * d;
                    dl_dbeta[l] += cfg.alpha_e / (2.0 * c.variance) * d * d;
                }
                *grad.noise.entry(key).or_insert(0.0) += cfg.alpha_e * g;
            }
            let inner: f64 = beta.iter().zip(&dl_dbeta).map(|(b, g)| b * g).sum();
            for l in 0..components.len() {
                grad.mixture_logits[l] += beta[l] * (dl_dbeta[l] - inner);
            }
        }
    }

    // Embedding regularizer.
    if let Some(cs) = &model.community {
        let w = cfg.alpha_u * cfg.alpha_com;
        let m1 = model.split();
        let m2 = dim - m1;
        let k = cs.communities;
        for i in 0..n {
            let u = model.embedding(i as u32);
            for r in 0..m1 {
                grad.u[i * dim + r] += w * 2.0 * u[r];
            }
            let gamma = cs.gamma(i as u32);
            let mut q = vec![0.0; k];
            for (kk, g) in gamma.iter().enumerate() {
                let center = cs.center(kk, m2);
                let mut d2 = 0.0;
                for r in 0..m2 {
                    let d = u[m1 + r] - center[r];
                    d2 += d * d;
                    grad.u[i * dim + m1 + r] += w * g / cs.sigma_c2 * d;
                    grad.centers[kk * m2 + r] += w * g / cs.sigma_c2 * (center[r] - u[m1 + r]);
                }
                q[kk] = d2 / (2.0 * cs.sigma_c2);
            }
            if !cs.frozen {
                let inner: f64 = gamma.iter().zip(&q).map(|(g, qq)| g * qq).sum();
                for l in 0..k {
                    grad.membership_logits[i * k + l] += gamma[l] * w * (q[l] - inner);
                }
            }
        }
        // Center prior, weighted alpha_com in the total.
        for (g, c) in grad.centers.iter_mut().zip(&cs.centers) {
            *g += cfg.alpha_com * c / cs.sigma_w2;
        }
    } else {
        for (g, u) in grad.u.iter_mut().zip(model.embedding_matrix()) {
            *g += cfg.alpha_u * 2.0 * u;
        }
    }
    if let Some(dc) = &cfg.degree {
        for g in grad.fitness.iter_mut() {
            *g += cfg.alpha_u * cfg.alpha_deg * dc.lambda;
        }
    }

    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::model::{CommunityConfig, MixtureComponent, ModelConfig};

    fn base_model(cfg: ModelConfig, n: usize) -> Model {
        let edges: Vec<(u32, u32)> = (0..n as u32 - 1).map(|i| (i, i + 1)).collect();
        let graph = Graph::from_edges(n, edges).unwrap();
        Model::init(cfg, &graph).unwrap()
    }

    #[test]
    fn pair_loss_examples() {
        let mut m = base_model(
            ModelConfig {
                dim: 2,
                init_scale: 1e-15,
                ..ModelConfig::default()
            },
            3,
        );
        let pos = TrainingPair::positive(0, 1);
        let neg = TrainingPair::negative(0, 1);
        // a ~ 0.5, eps = 0 -> ln 2 either way.
        assert!((pair_loss(&m, &pos).unwrap() - 2f64.ln()).abs() < 1e-9);
        assert!((pair_loss(&m, &neg).unwrap() - 2f64.ln()).abs() < 1e-9);
        // a ~ 0.5, eps = 0.3 -> -ln 0.8.
        m.set_noise(0, 1, 0.3).unwrap();
        assert!((pair_loss(&m, &pos).unwrap() + 0.8f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn gaussian_noise_regularizer() {
        let mut m = base_model(ModelConfig::default(), 4);
        assert_eq!(reg_noise_gaussian(&m), 0.0);
        m.set_noise(0, 1, 0.1).unwrap();
        m.set_noise(1, 2, -0.2).unwrap();
        assert!((reg_noise_gaussian(&m) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn adaptive_noise_regularizer_hand_value() {
        // Components (0,5), (0,0.5), (0.01,0.5), uniform beta, single eps=0.1.
        let mut m = base_model(
            ModelConfig {
                noise_mode: NoiseMode::Adaptive(vec![
                    MixtureComponent { mean: 0.0, variance: 5.0 },
                    MixtureComponent { mean: 0.0, variance: 0.5 },
                    MixtureComponent { mean: 0.01, variance: 0.5 },
                ]),
                ..ModelConfig::default()
            },
            3,
        );
        m.set_noise(0, 1, 0.1).unwrap();
        let expected = (1.0 / 3.0) * (0.01 / 10.0 + 0.01 / 1.0 + 0.0081 / 1.0);
        assert!((reg_noise_adaptive(&m).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn adaptive_single_component_reduces_to_gaussian() {
        let var = 2.5;
        let mut m = base_model(
            ModelConfig {
                noise_mode: NoiseMode::Adaptive(vec![MixtureComponent {
                    mean: 0.0,
                    variance: var,
                }]),
                ..ModelConfig::default()
            },
            4,
        );
        m.set_noise(0, 2, 0.4).unwrap();
        m.set_noise(1, 3, -0.1).unwrap();
        let adaptive = reg_noise_adaptive(&m).unwrap();
        assert!((adaptive - reg_noise_gaussian(&m) / (2.0 * var)).abs() < 1e-15);
    }

    #[test]
    fn adaptive_zero_at_component_mean() {
        let mut m = base_model(
            ModelConfig {
                noise_mode: NoiseMode::Adaptive(vec![MixtureComponent {
                    mean: 0.25,
                    variance: 1.0,
                }]),
                ..ModelConfig::default()
            },
            3,
        );
        m.set_noise(0, 1, 0.25).unwrap();
        assert!(reg_noise_adaptive(&m).unwrap().abs() < 1e-15);
    }

    #[test]
    fn basic_embed_regularizer() {
        let mut m = base_model(
            ModelConfig {
                dim: 2,
                init_scale: 1e-300,
                ..ModelConfig::default()
            },
            2,
        );
        m.embedding_mut(0).copy_from_slice(&[1.0, 2.0]);
        m.embedding_mut(1).copy_from_slice(&[0.0, 0.0]);
        let v = reg_embed_basic(&m);
        assert!((v - 5.0).abs() < 1e-12);
        for x in m.embedding_mut(0) {
            *x *= 2.0;
        }
        assert!((reg_embed_basic(&m) - 4.0 * v).abs() < 1e-10);
    }

    #[test]
    fn community_regularizer_hand_value() {
        // n=1 is not constructible over an edge, use n=2 and zero node 1.
        let mut m = base_model(
            ModelConfig {
                dim: 4,
                split: Some(2),
                init_scale: 1e-300,
                community: Some(CommunityConfig {
                    memberships: Some(vec![0, 0]),
                    ..CommunityConfig::new(2)
                }),
                ..ModelConfig::default()
            },
            2,
        );
        m.embedding_mut(0).copy_from_slice(&[1.0, 1.0, 0.5, 0.5]);
        m.embedding_mut(1).copy_from_slice(&[0.0; 4]);
        m.community.as_mut().unwrap().centers = vec![0.0; 4];
        let (value, extras) = reg_embed_community(&m).unwrap();
        // 1 + 1 local, (0.25 + 0.25) / 2 community.
        assert!((value - 2.25).abs() < 1e-10);
        assert_eq!(extras, 0.0);
    }

    #[test]
    fn community_regularizer_zero_at_center() {
        let mut m = base_model(
            ModelConfig {
                dim: 4,
                split: Some(2),
                init_scale: 1e-300,
                community: Some(CommunityConfig {
                    memberships: Some(vec![0, 1]),
                    ..CommunityConfig::new(2)
                }),
                ..ModelConfig::default()
            },
            2,
        );
        let cs = m.community.as_mut().unwrap();
        cs.centers = vec![0.7, -0.2, 0.1, 0.4];
        m.embedding_mut(0).copy_from_slice(&[0.0, 0.0, 0.7, -0.2]);
        m.embedding_mut(1).copy_from_slice(&[0.0, 0.0, 0.1, 0.4]);
        let (value, _) = reg_embed_community(&m).unwrap();
        assert!(value.abs() < 1e-12);
    }

    #[test]
    fn degree_regularizer() {
        let mut m = base_model(
            ModelConfig {
                degree: Some(crate::model::DegreeConfig { lambda: 2.0 }),
                ..ModelConfig::default()
            },
            2,
        );
        let d = m.fitness.as_mut().unwrap();
        d[0] = 0.5;
        d[1] = 1.5;
        assert!((reg_embed_degree(&m).unwrap() - 4.0).abs() < 1e-12);
        m.fitness.as_mut().unwrap().iter_mut().for_each(|x| *x = 0.0);
        assert_eq!(reg_embed_degree(&m).unwrap(), 0.0);
    }

    #[test]
    fn breakdown_identity_holds() {
        let mut m = base_model(
            ModelConfig {
                dim: 6,
                init_scale: 0.4,
                community: Some(CommunityConfig::new(2)),
                degree: Some(crate::model::DegreeConfig { lambda: 2.0 }),
                noise_mode: NoiseMode::default_adaptive(),
                seed: 3,
                ..ModelConfig::default()
            },
            6,
        );
        m.set_noise(0, 3, 0.2).unwrap();
        m.set_noise(1, 4, -0.1).unwrap();
        let pairs = vec![
            TrainingPair::positive(0, 1),
            TrainingPair::positive(1, 2),
            TrainingPair::negative(0, 4),
            TrainingPair::negative(2, 5),
        ];
        let b = total_loss(&m, &pairs).unwrap();
        let cfg = m.config();
        let rhs = b.proximity
            + cfg.alpha_e * b.reg_noise
            + cfg.alpha_u * b.reg_embed
            + cfg.alpha_com * b.reg_prior_extras;
        assert_eq!(b.total, rhs);
        assert!(b.total.is_finite());
    }

    #[test]
    fn total_loss_zero_for_empty_everything() {
        let m = base_model(
            ModelConfig {
                init_scale: 1e-300,
                ..ModelConfig::default()
            },
            3,
        );
        let b = total_loss(&m, &[]).unwrap();
        assert!(b.total.abs() < 1e-100);
    }

    #[test]
    fn noise_gradient_at_half() {
        // Positive pair at a = 0.5, eps = 0: dL/deps = -1/0.5 = -2.
        let m = base_model(
            ModelConfig {
                dim: 2,
                init_scale: 1e-15,
                alpha_e: 0.0,
                alpha_u: 0.0,
                ..ModelConfig::default()
            },
            3,
        );
        let g = total_loss_grad(&m, &[TrainingPair::positive(0, 1)]).unwrap();
        assert!((g.noise[&(0, 1)] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn clamped_pair_has_zero_noise_gradient() {
        let mut m = base_model(
            ModelConfig {
                dim: 2,
                init_scale: 1e-15,
                alpha_e: 0.0,
                alpha_u: 0.0,
                ..ModelConfig::default()
            },
            3,
        );
        m.set_noise(0, 1, 0.9).unwrap(); // p clamps at 1 - delta
        let g = total_loss_grad(&m, &[TrainingPair::positive(0, 1)]).unwrap();
        assert_eq!(g.noise[&(0, 1)], 0.0);
        // Loss itself stays finite.
        assert!(pair_loss(&m, &TrainingPair::negative(0, 1)).unwrap().is_finite());
    }
}
