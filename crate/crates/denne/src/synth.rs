//! Synthetic pristine graphs (geometric and partition) and ground-truth
//! edge-noise injection.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{EdgeDelta, Graph};
use crate::util::rng_for;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricSpec {
    pub n: usize,
    pub radius: f64,
    pub seed: u64,
}

impl GeometricSpec {
    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Spec(format!("geometric: n must be >= 2, got {}", self.n)));
        }
        if !(self.radius > 0.0 && self.radius < std::f64::consts::SQRT_2) {
            return Err(Error::Spec(format!(
                "geometric: radius must lie in (0, sqrt(2)), got {}",
                self.radius
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSpec {
    pub n: usize,
    pub k: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

impl PartitionSpec {
    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return Err(Error::Spec(format!(
                "partition: k must lie in 1..=n, got k={} n={}",
                self.k, self.n
            )));
        }
        let ok = (0.0..=1.0).contains(&self.p_out)
            && self.p_out <= self.p_in
            && self.p_in <= 1.0;
        if !ok {
            return Err(Error::Spec(format!(
                "partition: need 0 <= p_out <= p_in <= 1, got p_in={} p_out={}",
                self.p_in, self.p_out
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub add_ratio: f64,
    pub remove_ratio: f64,
    pub seed: u64,
}

impl NoiseSpec {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.add_ratio) || !(0.0..1.0).contains(&self.remove_ratio) {
            return Err(Error::Spec(format!(
                "noise: add_ratio in [0,1] and remove_ratio in [0,1), got add={} remove={}",
                self.add_ratio, self.remove_ratio
            )));
        }
        Ok(())
    }
}

/// Build the geometric graph induced by fixed points: edge iff squared
/// distance < radius^2.
pub fn geometric_from_points(points: &[[f64; 2]], radius: f64) -> Result<Graph> {
    let n = points.len();
    let r2 = radius * radius;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            if dx * dx + dy * dy < r2 {
                edges.push((i as u32, j as u32));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// Random geometric graph: points uniform in the unit square, edges below
/// the distance threshold.
pub fn gen_geometric(spec: &GeometricSpec) -> Result<(Graph, Vec<[f64; 2]>)> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed, "synth-geometric");
    let points: Vec<[f64; 2]> = (0..spec.n)
        .map(|_| [rng.gen::<f64>(), rng.gen::<f64>()])
        .collect();
    let graph = geometric_from_points(&points, spec.radius)?;
    Ok((graph, points))
}

/// Probability that two uniform points in the unit square are closer than
/// `radius` (valid for radius <= 1).
pub fn geometric_edge_prob(radius: f64) -> f64 {
    let r = radius;
    r * r * (std::f64::consts::PI - 8.0 * r / 3.0 + r * r / 2.0)
}

/// Bisect the connection radius so the expected edge count hits `target`.
pub fn calibrate_geometric_radius(n: usize, target_edges: usize) -> Result<f64> {
    let pairs = (n * (n - 1) / 2) as f64;
    let want = target_edges as f64 / pairs;
    if want >= geometric_edge_prob(1.0) {
        return Err(Error::Spec(format!(
            "geometric calibration: target {target_edges} too dense for n={n}"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if geometric_edge_prob(mid) < want {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Near-equal block assignment of n nodes into k consecutive groups.
pub fn partition_groups(n: usize, k: usize) -> Vec<u32> {
    let base = n / k;
    let extra = n % k;
    let mut groups = Vec::with_capacity(n);
    for g in 0..k {
        let size = base + usize::from(g < extra);
        groups.extend(std::iter::repeat(g as u32).take(size));
    }
    groups
}

/// Random partition graph: independent Bernoulli edges at p_in within a
/// group and p_out across groups.
pub fn gen_partition(spec: &PartitionSpec) -> Result<(Graph, Vec<u32>)> {
    spec.validate()?;
    let groups = partition_groups(spec.n, spec.k);
    let mut rng = rng_for(spec.seed, "synth-partition");
    let mut edges = Vec::new();
    for i in 0..spec.n {
        for j in (i + 1)..spec.n {
            let p = if groups[i] == groups[j] {
                spec.p_in
            } else {
                spec.p_out
            };
            if rng.gen::<f64>() < p {
                edges.push((i as u32, j as u32));
            }
        }
    }
    let graph = Graph::from_edges(spec.n, edges)?;
    Ok((graph, groups))
}

/// Solve (p_in, p_out) with p_out = mix_ratio * p_in so the expected edge
/// count equals `target`.
pub fn calibrate_partition_probs(
    n: usize,
    k: usize,
    target_edges: usize,
    mix_ratio: f64,
) -> Result<(f64, f64)> {
    if k == 0 || k > n {
        return Err(Error::Spec(format!("partition calibration: bad k={k} for n={n}")));
    }
    if !(0.0..=1.0).contains(&mix_ratio) {
        return Err(Error::Spec(format!(
            "partition calibration: mix_ratio must be in [0,1], got {mix_ratio}"
        )));
    }
    let groups = partition_groups(n, k);
    let mut intra = 0f64;
    let mut sizes = vec![0usize; k];
    for &g in &groups {
        sizes[g as usize] += 1;
    }
    for &s in &sizes {
        intra += (s * (s - 1) / 2) as f64;
    }
    let total = (n * (n - 1) / 2) as f64;
    let inter = total - intra;
    let p_in = target_edges as f64 / (intra + mix_ratio * inter);
    if p_in > 1.0 {
        return Err(Error::Spec(format!(
            "partition calibration: target {target_edges} too dense"
        )));
    }
    Ok((p_in, mix_ratio * p_in))
}

/// Corrupt a pristine graph: add ceil(add_ratio * E) uniform non-edges and
/// remove floor(remove_ratio * E) uniform edges. The returned delta is the
/// exact ground truth of the perturbation.
pub fn inject_noise(pristine: &Graph, spec: &NoiseSpec) -> Result<(Graph, EdgeDelta)> {
    spec.validate()?;
    let n = pristine.n();
    let edge_count = pristine.edge_count();
    let n_add = (spec.add_ratio * edge_count as f64).ceil() as usize;
    let n_remove = (spec.remove_ratio * edge_count as f64).floor() as usize;
    let total_pairs = n * n.saturating_sub(1) / 2;
    if total_pairs - edge_count < n_add {
        return Err(Error::Capacity(format!(
            "cannot add {n_add} edges: only {} non-edges exist",
            total_pairs - edge_count
        )));
    }

    let mut rng = rng_for(spec.seed, "inject-noise");

    let mut removed: Vec<(u32, u32)> = {
        let mut edges: Vec<(u32, u32)> = pristine.edges().collect();
        edges.partial_shuffle(&mut rng, n_remove).0.to_vec()
    };
    removed.sort_unstable();
    let removed_set: BTreeSet<(u32, u32)> = removed.iter().copied().collect();

    // Rejection sampling is cheap at the densities we target (far below 50%).
    let mut added_set: BTreeSet<(u32, u32)> = BTreeSet::new();
    while added_set.len() < n_add {
        let u = rng.gen_range(0..n as u32);
        let v = rng.gen_range(0..n as u32);
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if pristine.has_edge(key.0, key.1) || added_set.contains(&key) {
            continue;
        }
        added_set.insert(key);
    }
    let added: Vec<(u32, u32)> = added_set.iter().copied().collect();

    let observed_edges = pristine
        .edges()
        .filter(|e| !removed_set.contains(e))
        .chain(added.iter().copied());
    let observed = Graph::from_edges(n, observed_edges)?;
    Ok((observed, EdgeDelta { added, removed }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::edge_diff;

    #[test]
    fn geometric_predicate_on_injected_points() {
        let points = [[0.0, 0.0], [0.3, 0.0], [0.9, 0.0]];
        let g = geometric_from_points(&points, 0.5).unwrap();
        assert!(g.has_edge(0, 1));
        assert!(!g.has_edge(0, 2));
        assert!(!g.has_edge(1, 2)); // distance 0.6 >= 0.5
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn geometric_near_full_radius_gives_complete_graph() {
        let spec = GeometricSpec {
            n: 12,
            radius: std::f64::consts::SQRT_2 - 1e-9,
            seed: 3,
        };
        let (g, _) = gen_geometric(&spec).unwrap();
        assert_eq!(g.edge_count(), 12 * 11 / 2);
    }

    #[test]
    fn geometric_calibration_hits_paper_scale() {
        // 1,024 nodes / 5,470 edges target; realized count within 2%.
        let radius = calibrate_geometric_radius(1024, 5470).unwrap();
        let (g, _) = gen_geometric(&GeometricSpec {
            n: 1024,
            radius,
            seed: 11,
        })
        .unwrap();
        let rel = (g.edge_count() as f64 - 5470.0).abs() / 5470.0;
        assert!(rel < 0.02, "edge count {} off by {rel}", g.edge_count());
    }

    #[test]
    fn partition_limiting_cases() {
        let (cliques, groups) = gen_partition(&PartitionSpec {
            n: 9,
            k: 3,
            p_in: 1.0,
            p_out: 0.0,
            seed: 1,
        })
        .unwrap();
        assert_eq!(cliques.edge_count(), 3 * 3);
        for (u, v) in cliques.edges() {
            assert_eq!(groups[u as usize], groups[v as usize]);
        }

        let (empty, _) = gen_partition(&PartitionSpec {
            n: 9,
            k: 3,
            p_in: 0.0,
            p_out: 0.0,
            seed: 1,
        })
        .unwrap();
        assert_eq!(empty.edge_count(), 0);
    }

    #[test]
    fn partition_calibration_hits_paper_scale() {
        // 1,024 nodes, 8 groups, 7,066 edges target.
        let (p_in, p_out) = calibrate_partition_probs(1024, 8, 7066, 0.1).unwrap();
        let (g, _) = gen_partition(&PartitionSpec {
            n: 1024,
            k: 8,
            p_in,
            p_out,
            seed: 5,
        })
        .unwrap();
        let rel = (g.edge_count() as f64 - 7066.0).abs() / 7066.0;
        assert!(rel < 0.02, "edge count {} off by {rel}", g.edge_count());
    }

    #[test]
    fn partition_rejects_bad_k() {
        assert!(gen_partition(&PartitionSpec {
            n: 3,
            k: 5,
            p_in: 0.5,
            p_out: 0.1,
            seed: 0,
        })
        .is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        let spec = GeometricSpec {
            n: 64,
            radius: 0.2,
            seed: 9,
        };
        assert_eq!(gen_geometric(&spec).unwrap().0, gen_geometric(&spec).unwrap().0);
        let pspec = PartitionSpec {
            n: 64,
            k: 4,
            p_in: 0.4,
            p_out: 0.05,
            seed: 9,
        };
        assert_eq!(gen_partition(&pspec).unwrap().0, gen_partition(&pspec).unwrap().0);
    }

    #[test]
    fn noise_identity_when_ratios_zero() {
        let (g, _) = gen_partition(&PartitionSpec {
            n: 32,
            k: 4,
            p_in: 0.5,
            p_out: 0.1,
            seed: 2,
        })
        .unwrap();
        let (observed, delta) = inject_noise(
            &g,
            &NoiseSpec {
                add_ratio: 0.0,
                remove_ratio: 0.0,
                seed: 4,
            },
        )
        .unwrap();
        assert_eq!(observed, g);
        assert!(delta.is_empty());
    }

    #[test]
    fn noise_counts_and_membership() {
        let (g, _) = gen_partition(&PartitionSpec {
            n: 40,
            k: 4,
            p_in: 0.6,
            p_out: 0.05,
            seed: 8,
        })
        .unwrap();
        let e = g.edge_count();
        let (observed, delta) = inject_noise(
            &g,
            &NoiseSpec {
                add_ratio: 0.05,
                remove_ratio: 0.1,
                seed: 21,
            },
        )
        .unwrap();
        assert_eq!(delta.added.len(), (0.05 * e as f64).ceil() as usize);
        assert_eq!(delta.removed.len(), (0.1 * e as f64).floor() as usize);
        for &(u, v) in &delta.added {
            assert!(!g.has_edge(u, v));
            assert!(observed.has_edge(u, v));
        }
        for &(u, v) in &delta.removed {
            assert!(g.has_edge(u, v));
            assert!(!observed.has_edge(u, v));
        }
        // Applying the delta to the pristine graph reconstructs the observed one.
        let diff = edge_diff(&observed, &g).unwrap();
        assert_eq!(diff.added, delta.added);
        assert_eq!(diff.removed, delta.removed);
    }

    #[test]
    fn noise_capacity_error() {
        // Complete graph has no non-edges to add.
        let full = Graph::from_edges(3, [(0, 1), (0, 2), (1, 2)]).unwrap();
        let err = inject_noise(
            &full,
            &NoiseSpec {
                add_ratio: 0.5,
                remove_ratio: 0.0,
                seed: 0,
            },
        )
        .unwrap_err();
        assert_eq!(err.category(), "capacity");
    }
}
