//! Per-window contact graphs built from a position trace.

mod topology;

pub use topology::{
    betweenness, closeness, clustering_coefficient, degree, eigenvector_centrality, read_topology_csv, topology, EigenResult,
    Topology,
    TOPOLOGY_HEADER,
};

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Diagnostic, Error, Result};
use crate::grm::{PositionTrace, Segment};

/// Undirected simple graph for one time window over a fixed node universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactGraph {
    /// 1-based window index.
    pub window: usize,
    adjacency: Vec<Vec<usize>>,
}

impl ContactGraph {
    /// Builds a graph from an edge list. Self-loops and duplicates are dropped.
    pub fn from_edges(window: usize, n_nodes: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![Vec::new(); n_nodes];
        for &(u, v) in edges {
            if u != v {
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
            nbrs.dedup();
        }
        Self { window, adjacency }
    }

    pub fn empty(window: usize, n_nodes: usize) -> Self {
        Self {
            window,
            adjacency: vec![Vec::new(); n_nodes],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, nbrs)| nbrs.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn non_isolated(&self) -> usize {
        self.adjacency.iter().filter(|n| !n.is_empty()).count()
    }
}

/// One graph per non-overlapping window, windows numbered from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSequence {
    pub window_duration: f64,
    pub n_nodes: usize,
    pub graphs: Vec<ContactGraph>,
    /// Set when the trace was shorter than a single window.
    pub truncated: bool,
}

pub const EDGES_HEADER: &str = "window,u,v";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactRule {
    pub window_duration: f64,
    /// Meters.
    pub radius: f64,
    /// Minimum continuous time within range, seconds. Zero accepts any
    /// positive-length overlap.
    pub min_contact: f64,
}

impl Default for ContactRule {
    fn default() -> Self {
        Self {
            window_duration: 86_400.0,
            radius: 100.0,
            min_contact: 0.0,
        }
    }
}

pub fn window_count(duration: f64, window_duration: f64) -> usize {
    ((duration / window_duration).ceil() as usize).max(1)
}

/// Appends, for one node pair, the windows in which they come within range.
fn pair_contacts(a: &[Segment], b: &[Segment], rule: &ContactRule, n_windows: usize, out: &mut Vec<usize>) {
    let r2 = rule.radius * rule.radius;
    let w = rule.window_duration;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let (sa, sb) = (&a[i], &b[j]);
        let lo = sa.t_start.max(sb.t_start);
        let hi = sa.t_end.min(sb.t_end);
        if hi > lo {
            let (dx, dy) = (sa.x - sb.x, sa.y - sb.y);
            if dx * dx + dy * dy <= r2 {
                let first = ((lo / w).floor() as usize).min(n_windows - 1);
                let last = ((hi / w).ceil() as usize).saturating_sub(1).min(n_windows - 1);
                for k in first..=last {
                    let start = lo.max(k as f64 * w);
                    let end = if k + 1 == n_windows { hi } else { hi.min((k + 1) as f64 * w) };
                    let len = end - start;
                    if len > 0.0 && len >= rule.min_contact && out.last() != Some(&k) {
                        out.push(k);
                    }
                }
            }
        }
        if sa.t_end <= sb.t_end {
            i += 1;
        } else {
            j += 1;
        }
    }
}

/// Discretizes `trace` into contact graphs. Nodes `u` and `v` share an edge
/// in window `t` iff at some instant of `t` they are at most `rule.radius`
/// apart; distances are exact because positions are piecewise constant.
pub fn build_graph_sequence(trace: &PositionTrace, rule: &ContactRule) -> Result<GraphSequence> {
    if trace.nodes.is_empty() || trace.nodes.iter().all(Vec::is_empty) {
        return Err(Error::EmptyTrace);
    }
    if !(rule.window_duration > 0.0) {
        return Err(Error::param("window_duration", "must be > 0"));
    }
    if !(rule.radius > 0.0) {
        return Err(Error::param("contact_radius", "must be > 0"));
    }
    if !(rule.min_contact >= 0.0) {
        return Err(Error::param("min_contact_s", "must be >= 0"));
    }
    let diags = trace.diagnostics(None);
    if !diags.is_empty() {
        return Err(Error::Validation(diags));
    }
    let n = trace.n_nodes();
    let n_windows = window_count(trace.sim_duration, rule.window_duration);
    let truncated = trace.sim_duration < rule.window_duration;
    if truncated {
        log::warn!(
            "trace spans {} s, shorter than one {} s window; emitting a single truncated window",
            trace.sim_duration,
            rule.window_duration
        );
    }

    let per_node: Vec<Vec<(usize, usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut found = Vec::new();
            let mut windows = Vec::new();
            for v in u + 1..n {
                windows.clear();
                pair_contacts(&trace.nodes[u], &trace.nodes[v], rule, n_windows, &mut windows);
                windows.sort_unstable();
                windows.dedup();
                found.extend(windows.iter().map(|&k| (k, u, v)));
            }
            found
        })
        .collect();

    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_windows];
    for (k, u, v) in per_node.into_iter().flatten() {
        edges[k].push((u, v));
    }
    let graphs = edges
        .iter()
        .enumerate()
        .map(|(k, e)| ContactGraph::from_edges(k + 1, n, e))
        .collect();
    Ok(GraphSequence {
        window_duration: rule.window_duration,
        n_nodes: n,
        graphs,
        truncated,
    })
}

impl GraphSequence {
    pub fn edges_to_csv(&self) -> String {
        let mut out = String::from(EDGES_HEADER);
        out.push('\n');
        for g in &self.graphs {
            for (u, v) in g.edges() {
                let _ = writeln!(out, "{},{u},{v}", g.window);
            }
        }
        out
    }

    /// Rebuilds a sequence from an edge-list CSV; the node universe and window
    /// count are not recoverable from edges alone and must be supplied.
    pub fn from_edges_csv(text: &str, n_nodes: usize, n_windows: usize, window_duration: f64) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == EDGES_HEADER => {}
            other => {
                return Err(Error::Validation(vec![Diagnostic::new(
                    "row 1",
                    format!("expected header `{EDGES_HEADER}`, found `{}`", other.map_or("", |(_, h)| h)),
                )]))
            }
        }
        let mut diags = Vec::new();
        let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_windows];
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let row = format!("row {}", i + 1);
            let parsed: Vec<Option<usize>> = line.split(',').map(|f| f.trim().parse().ok()).collect();
            match parsed.as_slice() {
                [Some(w), Some(u), Some(v)] => {
                    if *w == 0 || *w > n_windows {
                        diags.push(Diagnostic::new(row, format!("window {w} outside 1..={n_windows}")));
                    } else if *u >= n_nodes || *v >= n_nodes {
                        diags.push(Diagnostic::new(row, format!("node id outside 0..{n_nodes}")));
                    } else if u == v {
                        diags.push(Diagnostic::new(row, "self-loop"));
                    } else {
                        edges[w - 1].push((*u, *v));
                    }
                }
                _ => diags.push(Diagnostic::new(row, "expected three non-negative integers")),
            }
        }
        if !diags.is_empty() {
            return Err(Error::Validation(diags));
        }
        Ok(Self {
            window_duration,
            n_nodes,
            graphs: edges
                .iter()
                .enumerate()
                .map(|(k, e)| ContactGraph::from_edges(k + 1, n_nodes, e))
                .collect(),
            truncated: false,
        })
    }
}
