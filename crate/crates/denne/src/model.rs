//! Parameter store and forward computations: embeddings, the sparse edge
//! noise table, community / degree priors and the adaptive noise mixture.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::util::{rng_for, sigmoid, softmax, sq_dist};

/// One fixed Gaussian component of the adaptive noise mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseMode {
    /// Zero-mean Gaussian prior on every noise entry.
    Gaussian,
    /// Learnable convex combination of fixed Gaussian components.
    Adaptive(Vec<MixtureComponent>),
}

impl NoiseMode {
    /// The component grid used in the reference experiments.
    pub fn default_adaptive() -> NoiseMode {
        NoiseMode::Adaptive(vec![
            MixtureComponent { mean: 0.0, variance: 5.0 },
            MixtureComponent { mean: 0.0, variance: 0.5 },
            MixtureComponent { mean: 0.01, variance: 0.5 },
        ])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityConfig {
    pub communities: usize,
    pub sigma_c2: f64,
    pub sigma_w2: f64,
    /// Ground-truth memberships; when given, membership rows are frozen
    /// one-hot instead of trainable.
    pub memberships: Option<Vec<u32>>,
}

impl CommunityConfig {
    pub fn new(communities: usize) -> CommunityConfig {
        CommunityConfig {
            communities,
            sigma_c2: 1.0,
            sigma_w2: 1.0,
            memberships: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeConfig {
    pub lambda: f64,
}

impl Default for DegreeConfig {
    fn default() -> Self {
        DegreeConfig { lambda: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrSchedule {
    /// Linear decay from lr0 to lr0 / 100 across all pair updates.
    Linear,
    /// Fixed learning rate, used by the gradient tests.
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    /// Split point between local and community dimensions; defaults to
    /// dim / 2 when a community prior is active.
    pub split: Option<usize>,
    pub community: Option<CommunityConfig>,
    pub degree: Option<DegreeConfig>,
    pub noise_mode: NoiseMode,
    /// Weight of the embedding regularizer (the model's alpha_U).
    pub alpha_u: f64,
    /// Weight of the noise regularizer.
    pub alpha_e: f64,
    /// Per-prior weights for the community and degree regularizers.
    pub alpha_com: f64,
    pub alpha_deg: f64,
    pub init_scale: f64,
    /// Half-width delta of the probability clamp [delta, 1 - delta].
    pub clamp_delta: f64,
    pub negatives: usize,
    pub neg_exponent: f64,
    pub lr0: f64,
    pub lr_schedule: LrSchedule,
    /// Pin every noise entry at 0: the ablation baseline that trains the
    /// same pipeline without denoising.
    pub freeze_noise: bool,
    /// Epochs to keep the noise table frozen before releasing it, so
    /// noise estimates are informed by already-formed structure instead
    /// of absorbing early gradients.
    pub noise_warmup_epochs: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 32,
            split: None,
            community: None,
            degree: None,
            noise_mode: NoiseMode::Gaussian,
            alpha_u: 0.001,
            alpha_e: 50.0,
            alpha_com: 1.0,
            alpha_deg: 1.0,
            init_scale: 0.1,
            clamp_delta: 1e-6,
            negatives: 5,
            neg_exponent: 0.75,
            lr0: 0.025,
            lr_schedule: LrSchedule::Linear,
            freeze_noise: false,
            noise_warmup_epochs: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityState {
    pub communities: usize,
    pub sigma_c2: f64,
    pub sigma_w2: f64,
    /// K x m2 center matrix, row-major.
    pub centers: Vec<f64>,
    /// n x K membership logits; rows are softmaxed on read.
    pub membership_logits: Vec<f64>,
    /// True when ground-truth memberships were supplied.
    pub frozen: bool,
}

impl CommunityState {
    pub fn center(&self, k: usize, m2: usize) -> &[f64] {
        &self.centers[k * m2..(k + 1) * m2]
    }

    pub fn gamma(&self, node: u32) -> Vec<f64> {
        let k = self.communities;
        softmax(&self.membership_logits[node as usize * k..(node as usize + 1) * k])
    }
}

/// Node embedding matrix with row access, also the unit the evaluation
/// protocols consume.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Embeddings {
    pub fn n(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, node: u32) -> &[f64] {
        &self.data[node as usize * self.dim..(node as usize + 1) * self.dim]
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    n: usize,
    split: usize,
    u: Vec<f64>,
    noise: BTreeMap<(u32, u32), f64>,
    mixture_logits: Vec<f64>,
    pub community: Option<CommunityState>,
    /// Per-node degree fitness, present when the degree prior is on.
    pub fitness: Option<Vec<f64>>,
}

/// Negative squared Euclidean distance, the proximity kernel for edge
/// probabilities.
pub fn proximity(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "proximity: lengths {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(-sq_dist(x, y))
}

impl Model {
    pub fn init(config: ModelConfig, graph: &Graph) -> Result<Model> {
        let n = graph.n();
        if config.dim == 0 {
            return Err(Error::Config("dim must be positive".into()));
        }
        if !(config.clamp_delta > 0.0 && config.clamp_delta < 0.5) {
            return Err(Error::Config(format!(
                "clamp delta must lie in (0, 0.5), got {}",
                config.clamp_delta
            )));
        }
        if config.alpha_u < 0.0 || config.alpha_e < 0.0 {
            return Err(Error::Config("regularizer weights must be >= 0".into()));
        }
        let split = match (&config.community, config.split) {
            (Some(_), Some(m1)) if m1 == 0 || m1 >= config.dim => {
                return Err(Error::Config(format!(
                    "split must satisfy 0 < m1 < dim, got m1={} dim={}",
                    m1, config.dim
                )))
            }
            (_, Some(m1)) => m1,
            (_, None) => config.dim / 2,
        };
        if let NoiseMode::Adaptive(components) = &config.noise_mode {
            if components.is_empty() {
                return Err(Error::Config("adaptive mode needs >= 1 component".into()));
            }
            if components.iter().any(|c| c.variance <= 0.0) {
                return Err(Error::Config("mixture variances must be positive".into()));
            }
        }

        let mut rng = rng_for(config.seed, "model-init");
        let normal = Normal::new(0.0, config.init_scale).map_err(|e| Error::Config(e.to_string()))?;
        let u: Vec<f64> = (0..n * config.dim).map(|_| normal.sample(&mut rng)).collect();

        let community = match &config.community {
            None => None,
            Some(cc) => {
                if cc.communities < 2 {
                    return Err(Error::Config(format!(
                        "community prior needs K >= 2, got {}",
                        cc.communities
                    )));
                }
                if cc.sigma_c2 <= 0.0 || cc.sigma_w2 <= 0.0 {
                    return Err(Error::Config("community variances must be positive".into()));
                }
                let k = cc.communities;
                let m2 = config.dim - split;
                let centers: Vec<f64> = (0..k * m2).map(|_| normal.sample(&mut rng)).collect();
                let (membership_logits, frozen) = match &cc.memberships {
                    None => (vec![0.0; n * k], false),
                    Some(groups) => {
                        if groups.len() != n {
                            return Err(Error::Config(format!(
                                "memberships length {} does not match n={n}",
                                groups.len()
                            )));
                        }
                        // Large logit gap makes the softmax effectively one-hot.
                        let mut logits = vec![-50.0; n * k];
                        for (i, &g) in groups.iter().enumerate() {
                            if g as usize >= k {
                                return Err(Error::Config(format!(
                                    "membership id {g} out of range for K={k}"
                                )));
                            }
                            logits[i * k + g as usize] = 50.0;
                        }
                        (logits, true)
                    }
                };
                Some(CommunityState {
                    communities: k,
                    sigma_c2: cc.sigma_c2,
                    sigma_w2: cc.sigma_w2,
                    centers,
                    membership_logits,
                    frozen,
                })
            }
        };

        let fitness = config.degree.as_ref().map(|dc| vec![1.0 / dc.lambda; n]);
        let mixture_logits = match &config.noise_mode {
            NoiseMode::Gaussian => Vec::new(),
            NoiseMode::Adaptive(components) => vec![0.0; components.len()],
        };

        Ok(Model {
            config,
            n,
            split,
            u,
            noise: BTreeMap::new(),
            mixture_logits,
            community,
            fitness,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    /// Split index between local and community dimensions.
    pub fn split(&self) -> usize {
        self.split
    }

    pub fn embedding(&self, node: u32) -> &[f64] {
        let d = self.config.dim;
        &self.u[node as usize * d..(node as usize + 1) * d]
    }

    pub fn embedding_mut(&mut self, node: u32) -> &mut [f64] {
        let d = self.config.dim;
        &mut self.u[node as usize * d..(node as usize + 1) * d]
    }

    pub fn embedding_matrix(&self) -> &[f64] {
        &self.u
    }

    pub fn embeddings(&self) -> Embeddings {
        Embeddings {
            dim: self.config.dim,
            data: self.u.clone(),
        }
    }

    pub fn mixture_logits(&self) -> &[f64] {
        &self.mixture_logits
    }

    pub fn mixture_logits_mut(&mut self) -> &mut [f64] {
        &mut self.mixture_logits
    }

    fn check_pair(&self, i: u32, j: u32) -> Result<()> {
        if i == j {
            return Err(Error::Domain(format!("self-pair ({i}, {i}) is never scored")));
        }
        for id in [i, j] {
            if id as usize >= self.n {
                return Err(Error::NodeRange { id, n: self.n });
            }
        }
        Ok(())
    }

    fn noise_key(i: u32, j: u32) -> (u32, u32) {
        (i.min(j), i.max(j))
    }

    /// Similarity score s_ij: proximity of the embedding halves (the split
    /// is a no-op on the value but mirrors the community formulation) plus
    /// the fitness product when the degree prior is on.
    pub fn similarity(&self, i: u32, j: u32) -> Result<f64> {
        self.check_pair(i, j)?;
        let ui = self.embedding(i);
        let uj = self.embedding(j);
        let mut s = if self.community.is_some() {
            let m1 = self.split;
            proximity(&ui[..m1], &uj[..m1])? + proximity(&ui[m1..], &uj[m1..])?
        } else {
            proximity(ui, uj)?
        };
        if let Some(d) = &self.fitness {
            s += d[i as usize] * d[j as usize];
        }
        Ok(s)
    }

    /// Noise-free edge probability a_ij = logistic(s_ij).
    pub fn edge_prob(&self, i: u32, j: u32) -> Result<f64> {
        Ok(sigmoid(self.similarity(i, j)?))
    }

    /// Observed-edge probability: a_ij + eps_ij truncated to
    /// [delta, 1 - delta].
    pub fn effective_prob(&self, i: u32, j: u32) -> Result<f64> {
        let raw = self.edge_prob(i, j)? + self.get_noise(i, j)?;
        let delta = self.config.clamp_delta;
        Ok(raw.clamp(delta, 1.0 - delta))
    }

    /// Current noise value; 0 for pairs the trainer never touched.
    pub fn get_noise(&self, i: u32, j: u32) -> Result<f64> {
        self.check_pair(i, j)?;
        Ok(self
            .noise
            .get(&Self::noise_key(i, j))
            .copied()
            .unwrap_or(0.0))
    }

    /// Materialize a noise entry so the trainer can update it; returns the
    /// current value.
    pub fn touch_noise(&mut self, i: u32, j: u32) -> Result<f64> {
        self.check_pair(i, j)?;
        Ok(*self.noise.entry(Self::noise_key(i, j)).or_insert(0.0))
    }

    pub fn set_noise(&mut self, i: u32, j: u32, value: f64) -> Result<()> {
        self.check_pair(i, j)?;
        self.noise.insert(Self::noise_key(i, j), value);
        Ok(())
    }

    pub fn add_noise(&mut self, i: u32, j: u32, delta: f64) -> Result<()> {
        self.check_pair(i, j)?;
        *self.noise.entry(Self::noise_key(i, j)).or_insert(0.0) += delta;
        Ok(())
    }

    /// Materialized noise entries in sorted key order.
    pub fn noise_entries(&self) -> impl Iterator<Item = ((u32, u32), f64)> + '_ {
        self.noise.iter().map(|(&k, &v)| (k, v))
    }

    pub fn noise_entry_count(&self) -> usize {
        self.noise.len()
    }

    /// Softmax mixture weights beta. Only valid in adaptive mode.
    pub fn mixture_weights(&self) -> Result<Vec<f64>> {
        match &self.config.noise_mode {
            NoiseMode::Gaussian => Err(Error::Mode(
                "mixture weights are undefined in gaussian noise mode".into(),
            )),
            NoiseMode::Adaptive(_) => Ok(softmax(&self.mixture_logits)),
        }
    }

    pub fn mixture_components(&self) -> &[MixtureComponent] {
        match &self.config.noise_mode {
            NoiseMode::Gaussian => &[],
            NoiseMode::Adaptive(c) => c,
        }
    }
}
