//! DeepWalk-style training data: truncated random walks, window context
//! pairs and degree-biased negative sampling.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::util::rng_for_indexed;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        // Walk number 10, length 80, window 5.
        WalkConfig {
            walks_per_node: 10,
            walk_length: 80,
            window: 5,
            seed: 0,
        }
    }
}

/// One (center, context) observation; the atomic SGD unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingPair {
    pub center: u32,
    pub context: u32,
    pub positive: bool,
}

impl TrainingPair {
    pub fn positive(center: u32, context: u32) -> TrainingPair {
        TrainingPair {
            center,
            context,
            positive: true,
        }
    }

    pub fn negative(center: u32, context: u32) -> TrainingPair {
        TrainingPair {
            center,
            context,
            positive: false,
        }
    }
}

/// Start nodes in emission order: one shuffled pass over all nodes per
/// round, each start tagged with its global walk index.
fn walk_starts(graph: &Graph, config: &WalkConfig) -> Vec<(u64, u32)> {
    let n = graph.n();
    let mut starts = Vec::with_capacity(config.walks_per_node * n);
    for pass in 0..config.walks_per_node {
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut rng = rng_for_indexed(config.seed, "walk-order", pass as u64);
        order.shuffle(&mut rng);
        for (pos, &start) in order.iter().enumerate() {
            starts.push(((pass * n + pos) as u64, start));
        }
    }
    starts
}

/// Uniform-neighbor walk with its own RNG stream; walks from isolated
/// nodes stop at length 1.
fn single_walk(graph: &Graph, config: &WalkConfig, index: u64, start: u32) -> Vec<u32> {
    let mut rng = rng_for_indexed(config.seed, "walk-step", index);
    let mut walk = Vec::with_capacity(config.walk_length);
    walk.push(start);
    let mut current = start;
    while walk.len() < config.walk_length {
        let neighbors = graph.neighbors(current);
        if neighbors.is_empty() {
            break;
        }
        current = neighbors[rng.gen_range(0..neighbors.len())];
        walk.push(current);
    }
    walk
}

pub fn generate_walks_serial(graph: &Graph, config: &WalkConfig) -> Vec<Vec<u32>> {
    walk_starts(graph, config)
        .iter()
        .map(|&(index, start)| single_walk(graph, config, index, start))
        .collect()
}

/// Parallel walk generation. Per-walk RNG streams make this bitwise
/// identical to the serial version.
#[cfg(feature = "parallel")]
pub fn generate_walks_parallel(graph: &Graph, config: &WalkConfig) -> Vec<Vec<u32>> {
    walk_starts(graph, config)
        .par_iter()
        .map(|&(index, start)| single_walk(graph, config, index, start))
        .collect()
}

pub fn generate_walks(graph: &Graph, config: &WalkConfig) -> Vec<Vec<u32>> {
    #[cfg(feature = "parallel")]
    {
        generate_walks_parallel(graph, config)
    }
    #[cfg(not(feature = "parallel"))]
    {
        generate_walks_serial(graph, config)
    }
}

/// Positive pairs from one walk: every ordered (center, context) within
/// `window` positions. Revisit pairs with center == context are skipped.
pub fn extract_pairs(walk: &[u32], window: usize) -> Vec<TrainingPair> {
    let mut pairs = Vec::new();
    for i in 0..walk.len() {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(walk.len().saturating_sub(1));
        for j in lo..=hi {
            if j == i || walk[i] == walk[j] {
                continue;
            }
            pairs.push(TrainingPair::positive(walk[i], walk[j]));
        }
    }
    pairs
}

/// Noise distribution for negatives: P(v) proportional to degree^exponent,
/// zero mass on isolated nodes.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    cumulative: Vec<f64>,
    weights: Vec<f64>,
    total: f64,
}

const REDRAW_LIMIT: usize = 100;

impl NegativeSampler {
    pub fn new(graph: &Graph, exponent: f64) -> Result<NegativeSampler> {
        let weights: Vec<f64> = (0..graph.n() as u32)
            .map(|v| {
                let d = graph.degree(v).unwrap();
                if d == 0 {
                    0.0
                } else {
                    (d as f64).powf(exponent)
                }
            })
            .collect();
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut total = 0.0;
        for &w in &weights {
            total += w;
            cumulative.push(total);
        }
        if total <= 0.0 {
            return Err(Error::Sampling(
                "negative sampler needs a graph with at least one edge".into(),
            ));
        }
        Ok(NegativeSampler {
            cumulative,
            weights,
            total,
        })
    }

    pub fn probability(&self, node: u32) -> f64 {
        self.weights[node as usize] / self.total
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> u32 {
        let x = rng.gen::<f64>() * self.total;
        match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&x).unwrap())
        {
            Ok(i) | Err(i) => (i.min(self.cumulative.len() - 1)) as u32,
        }
    }

    /// Draw `count` nodes distinct from `center`. Draws that hit the center
    /// are redrawn up to a bound, then skipped.
    pub fn sample_negatives<R: Rng>(
        &self,
        center: u32,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<u32>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        if self.total - self.weights[center as usize] <= 0.0 {
            return Err(Error::Sampling(format!(
                "all sampling mass sits on center node {center}"
            )));
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            for attempt in 0..=REDRAW_LIMIT {
                let v = self.draw(rng);
                if v != center {
                    out.push(v);
                    break;
                }
                if attempt == REDRAW_LIMIT {
                    // Astronomically unlikely unless nearly degenerate; skip.
                }
            }
        }
        Ok(out)
    }
}
