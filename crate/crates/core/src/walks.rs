//! Second-order (node2vec) biased random walks, sampled per window.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::ContactGraph;
use crate::error::{Diagnostic, Error, Result};
use crate::rng::{substream, TAG_WALKS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkParams {
    /// Walks started from every non-isolated node.
    pub walks_per_node: usize,
    /// Nodes per walk, start included.
    pub walk_length: usize,
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            walks_per_node: 4,
            walk_length: 8,
            p: 1.0,
            q: 0.5,
            seed: 0,
        }
    }
}

impl WalkParams {
    pub fn diagnostics(&self, prefix: &str) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.walks_per_node < 1 {
            out.push(Diagnostic::new(format!("{prefix}walks_per_node"), "walks_per_node must be >= 1"));
        }
        if self.walk_length < 2 {
            out.push(Diagnostic::new(format!("{prefix}walk_length"), "walk_length must be >= 2"));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            out.push(Diagnostic::new(format!("{prefix}p"), "p must be > 0"));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            out.push(Diagnostic::new(format!("{prefix}q"), "q must be > 0"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics("");
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(d))
        }
    }
}

/// Unnormalized transition weights from `curr` to each of its neighbors (in
/// neighbor order), given the node visited before it: `1/p` to go back, `1`
/// to a common neighbor of `prev`, `1/q` to move outward. Without `prev` the
/// weights are uniform.
pub fn step_weights(graph: &ContactGraph, prev: Option<usize>, curr: usize, p: f64, q: f64) -> Vec<f64> {
    let nbrs = graph.neighbors(curr);
    match prev {
        None => vec![1.0; nbrs.len()],
        Some(prev) => nbrs
            .iter()
            .map(|&x| {
                if x == prev {
                    1.0 / p
                } else if graph.has_edge(x, prev) {
                    1.0
                } else {
                    1.0 / q
                }
            })
            .collect(),
    }
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if target < *w {
            return i;
        }
        target -= w;
    }
    weights.len() - 1
}

fn walk_from<R: Rng + ?Sized>(graph: &ContactGraph, start: usize, params: &WalkParams, rng: &mut R) -> Vec<usize> {
    let mut walk = Vec::with_capacity(params.walk_length);
    walk.push(start);
    let mut prev = None;
    let mut curr = start;
    while walk.len() < params.walk_length {
        let nbrs = graph.neighbors(curr);
        if nbrs.is_empty() {
            break;
        }
        let weights = step_weights(graph, prev, curr, params.p, params.q);
        let next = nbrs[pick(&weights, rng)];
        walk.push(next);
        prev = Some(curr);
        curr = next;
    }
    walk
}

/// The walks sampled on one window's graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkCorpus {
    pub window: usize,
    pub walks: Vec<Vec<usize>>,
}

impl WalkCorpus {
    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for w in &self.walks {
            for (i, v) in w.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses a walks file, rejecting ids outside `0..n_nodes`.
    pub fn from_text(window: usize, text: &str, n_nodes: usize) -> Result<Self> {
        let mut diags = Vec::new();
        let mut walks = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: std::result::Result<Vec<usize>, _> = line.split_whitespace().map(str::parse).collect();
            match parsed {
                Ok(w) if w.iter().all(|&v| v < n_nodes) => walks.push(w),
                Ok(_) => diags.push(Diagnostic::new(format!("line {}", i + 1), format!("node id outside 0..{n_nodes}"))),
                Err(e) => diags.push(Diagnostic::new(format!("line {}", i + 1), e.to_string())),
            }
        }
        if diags.is_empty() {
            Ok(Self { window, walks })
        } else {
            Err(Error::Validation(diags))
        }
    }
}

/// Samples `walks_per_node` walks from every non-isolated node, in ascending
/// node order. Each start node draws from its own stream keyed by
/// `(seed, window, node)`, so the corpus does not depend on scheduling.
pub fn sample_walks(graph: &ContactGraph, params: &WalkParams) -> WalkCorpus {
    let walks: Vec<Vec<usize>> = (0..graph.n_nodes())
        .into_par_iter()
        .filter(|&v| graph.degree(v) > 0)
        .flat_map_iter(|start| {
            let mut rng = substream(params.seed, &[TAG_WALKS, graph.window as u64, start as u64]);
            (0..params.walks_per_node)
                .map(|_| walk_from(graph, start, params, &mut rng))
                .collect::<Vec<_>>()
        })
        .collect();
    if walks.is_empty() {
        log::warn!("window {} has no edges; walk corpus is empty", graph.window);
    }
    WalkCorpus {
        window: graph.window,
        walks,
    }
}
