use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::SocialParams;
use crate::error::{Error, Result};

/// Undirected, unweighted friendship graph over nodes `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialGraph {
    /// Sorted neighbor lists.
    pub adjacency: Vec<Vec<usize>>,
    /// Partition blocks of consecutive node ids.
    pub clusters: Vec<Vec<usize>>,
}

impl SocialGraph {
    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }
}

/// Gaussian random partition graph: cluster sizes ~ N(mean, mean / shape),
/// rounded and at least one; pairs inside a cluster connect with `p_in`,
/// pairs across clusters with `p_out`.
pub fn build_social_graph<R: Rng + ?Sized>(
    n_nodes: usize,
    params: &SocialParams,
    rng: &mut R,
) -> Result<SocialGraph> {
    if n_nodes < 2 {
        return Err(Error::param("n_nodes", "social graph needs at least 2 nodes"));
    }
    let sd = (params.mean_cluster_size / params.size_shape).sqrt();
    let normal = Normal::new(params.mean_cluster_size, sd)
        .map_err(|e| Error::param("social", e.to_string()))?;

    let mut clusters = Vec::new();
    let mut block_of = vec![0usize; n_nodes];
    let mut assigned = 0;
    while assigned < n_nodes {
        let draw: f64 = normal.sample(rng);
        let size = (draw.round().max(1.0) as usize).min(n_nodes - assigned);
        let block: Vec<usize> = (assigned..assigned + size).collect();
        for &v in &block {
            block_of[v] = clusters.len();
        }
        clusters.push(block);
        assigned += size;
    }

    let mut adjacency = vec![Vec::new(); n_nodes];
    for u in 0..n_nodes {
        for v in u + 1..n_nodes {
            let p = if block_of[u] == block_of[v] {
                params.p_in
            } else {
                params.p_out
            };
            if rng.random::<f64>() < p {
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
        }
    }
    Ok(SocialGraph {
        adjacency,
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn params(mean: f64, p_in: f64, p_out: f64) -> SocialParams {
        SocialParams {
            mean_cluster_size: mean,
            size_shape: 5.0,
            p_in,
            p_out,
        }
    }

    #[test]
    fn single_cluster_full_probability_is_complete() {
        let mut rng = substream(1, &[]);
        let g = build_social_graph(12, &params(1000.0, 1.0, 0.0), &mut rng).unwrap();
        assert_eq!(g.clusters.len(), 1);
        assert_eq!(g.edge_count(), 12 * 11 / 2);
    }

    #[test]
    fn zero_probabilities_give_empty_graph() {
        let mut rng = substream(2, &[]);
        let g = build_social_graph(50, &params(10.0, 0.0, 0.0), &mut rng).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn symmetric_without_self_loops() {
        let mut rng = substream(3, &[]);
        let g = build_social_graph(60, &params(10.0, 0.5, 0.05), &mut rng).unwrap();
        for (u, nbrs) in g.adjacency.iter().enumerate() {
            assert!(!nbrs.contains(&u));
            for &v in nbrs {
                assert!(g.adjacency[v].contains(&u));
            }
        }
        let covered: usize = g.clusters.iter().map(Vec::len).sum();
        assert_eq!(covered, 60);
    }

    #[test]
    fn rejects_single_node() {
        let mut rng = substream(4, &[]);
        assert!(build_social_graph(1, &params(10.0, 0.5, 0.1), &mut rng).is_err());
    }

    #[test]
    fn edge_count_matches_expectation_over_seeds() {
        let n = 100;
        let (p_in, p_out) = (0.25, 0.01);
        let pairs = |s: usize| (s * s.saturating_sub(1) / 2) as f64;
        let mut observed = 0.0;
        let mut expected = 0.0;
        for seed in 0..200 {
            let mut rng = substream(seed, &[9]);
            let g = build_social_graph(n, &params(10.0, p_in, p_out), &mut rng).unwrap();
            let intra: f64 = g.clusters.iter().map(|c| pairs(c.len())).sum();
            expected += intra * p_in + (pairs(n) - intra) * p_out;
            observed += g.edge_count() as f64;
        }
        assert!(
            ((observed - expected) / expected).abs() < 0.05,
            "observed {observed} expected {expected}"
        );
    }
}
