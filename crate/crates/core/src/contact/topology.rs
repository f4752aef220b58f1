//! Classical node centralities on a single contact graph.

use std::collections::VecDeque;

use super::ContactGraph;
use crate::error::{Diagnostic, Error, Result};

pub const TOPOLOGY_HEADER: &str = "window,node,degree,betweenness,closeness,eigenvector,clustering";

pub fn degree(graph: &ContactGraph) -> Vec<usize> {
    (0..graph.n_nodes()).map(|v| graph.degree(v)).collect()
}

/// Local clustering coefficient; zero for nodes of degree < 2.
pub fn clustering_coefficient(graph: &ContactGraph) -> Vec<f64> {
    (0..graph.n_nodes())
        .map(|v| {
            let nbrs = graph.neighbors(v);
            let k = nbrs.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (i, &a) in nbrs.iter().enumerate() {
                for &b in &nbrs[i + 1..] {
                    if graph.has_edge(a, b) {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .collect()
}

/// Shortest-path betweenness (Brandes accumulation), normalized by the
/// number of unordered pairs excluding the node, `(n-1)(n-2)/2`.
pub fn betweenness(graph: &ContactGraph) -> Vec<f64> {
    let n = graph.n_nodes();
    let mut bc = vec![0.0; n];
    if n < 3 {
        return bc;
    }
    let mut stack = Vec::with_capacity(n);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![-1i64; n];
    let mut delta = vec![0.0f64; n];
    let mut queue = VecDeque::with_capacity(n);
    for s in 0..n {
        if graph.degree(s) == 0 {
            continue;
        }
        stack.clear();
        for v in 0..n {
            preds[v].clear();
            sigma[v] = 0.0;
            dist[v] = -1;
            delta[v] = 0.0;
        }
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in graph.neighbors(v) {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                bc[w] += delta[w];
            }
        }
    }
    // Each unordered pair was visited from both ends.
    let scale = 1.0 / ((n - 1) * (n - 2)) as f64;
    bc.iter_mut().for_each(|b| *b *= scale);
    bc
}

/// Closeness with component scaling: for `v` in a component of size `c`,
/// `((c-1)/(n-1)) * ((c-1)/sum of distances)`; isolated nodes score zero.
pub fn closeness(graph: &ContactGraph) -> Vec<f64> {
    let n = graph.n_nodes();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::with_capacity(n);
    (0..n)
        .map(|s| {
            dist.iter_mut().for_each(|d| *d = usize::MAX);
            dist[s] = 0;
            queue.push_back(s);
            let (mut reached, mut total) = (0usize, 0usize);
            while let Some(v) = queue.pop_front() {
                reached += 1;
                total += dist[v];
                for &w in graph.neighbors(v) {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[v] + 1;
                        queue.push_back(w);
                    }
                }
            }
            if reached <= 1 || n <= 1 {
                return 0.0;
            }
            let others = (reached - 1) as f64;
            (others / (n - 1) as f64) * (others / total as f64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

const EIGEN_TOL: f64 = 1e-10;
const EIGEN_MAX_ITER: usize = 1000;
const EIGEN_SHIFT: f64 = 0.5;

/// Principal eigenvector of the adjacency matrix by power iteration on
/// `A + 0.5 I` (the shift breaks the bipartite +/- lambda tie), started from
/// the uniform vector and L2-normalized. An edgeless graph yields the uniform
/// vector.
pub fn eigenvector_centrality(graph: &ContactGraph) -> EigenResult {
    let n = graph.n_nodes();
    if n == 0 {
        return EigenResult {
            values: vec![],
            converged: true,
            iterations: 0,
        };
    }
    let uniform = 1.0 / (n as f64).sqrt();
    let mut x = vec![uniform; n];
    if graph.edge_count() == 0 {
        return EigenResult {
            values: x,
            converged: true,
            iterations: 0,
        };
    }
    let mut next = vec![0.0; n];
    for iter in 1..=EIGEN_MAX_ITER {
        for v in 0..n {
            next[v] = EIGEN_SHIFT * x[v] + graph.neighbors(v).iter().map(|&w| x[w]).sum::<f64>();
        }
        let norm = next.iter().map(|a| a * a).sum::<f64>().sqrt();
        let mut diff: f64 = 0.0;
        for v in 0..n {
            let nv = next[v] / norm;
            diff = diff.max((nv - x[v]).abs());
            x[v] = nv;
        }
        if diff < EIGEN_TOL {
            return EigenResult {
                values: x,
                converged: true,
                iterations: iter,
            };
        }
    }
    log::warn!("eigenvector centrality did not converge in window {}", graph.window);
    EigenResult {
        values: x,
        converged: false,
        iterations: EIGEN_MAX_ITER,
    }
}

/// All baseline metrics of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub window: usize,
    pub degree: Vec<usize>,
    pub betweenness: Vec<f64>,
    pub closeness: Vec<f64>,
    pub eigenvector: EigenResult,
    pub clustering: Vec<f64>,
}

pub fn topology(graph: &ContactGraph) -> Topology {
    Topology {
        window: graph.window,
        degree: degree(graph),
        betweenness: betweenness(graph),
        closeness: closeness(graph),
        eigenvector: eigenvector_centrality(graph),
        clustering: clustering_coefficient(graph),
    }
}

impl Topology {
    pub fn write_csv_rows(&self, out: &mut String) {
        use std::fmt::Write as _;
        for v in 0..self.degree.len() {
            let _ = writeln!(
                out,
                "{},{v},{},{:.12},{:.12},{:.12},{:.12}",
                self.window,
                self.degree[v],
                self.betweenness[v],
                self.closeness[v],
                self.eigenvector.values[v],
                self.clustering[v]
            );
        }
    }
}

/// Parses a topology CSV back into per-window metrics. Every window in
/// `1..=n_windows` must list every node in `0..n_nodes` exactly once.
pub fn read_topology_csv(text: &str, n_nodes: usize, n_windows: usize) -> Result<Vec<Topology>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TOPOLOGY_HEADER => {}
        other => {
            return Err(Error::Validation(vec![Diagnostic::new(
                "row 1",
                format!("expected header `{TOPOLOGY_HEADER}`, found `{}`", other.map_or("", |(_, h)| h)),
            )]))
        }
    }
    let mut out: Vec<Topology> = (1..=n_windows)
        .map(|window| Topology {
            window,
            degree: vec![0; n_nodes],
            betweenness: vec![0.0; n_nodes],
            closeness: vec![0.0; n_nodes],
            eigenvector: EigenResult {
                values: vec![0.0; n_nodes],
                converged: true,
                iterations: 0,
            },
            clustering: vec![0.0; n_nodes],
        })
        .collect();
    let mut seen = vec![vec![false; n_nodes]; n_windows];
    let mut diags = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = format!("row {}", i + 1);
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 7 {
            diags.push(Diagnostic::new(row, format!("expected 7 fields, found {}", f.len())));
            continue;
        }
        let ids: Vec<Option<usize>> = f[..3].iter().map(|x| x.parse().ok()).collect();
        let vals: Vec<Option<f64>> = f[3..].iter().map(|x| x.parse().ok()).collect();
        let (Some(w), Some(v), Some(deg)) = (ids[0], ids[1], ids[2]) else {
            diags.push(Diagnostic::new(row, "window, node and degree must be non-negative integers"));
            continue;
        };
        if vals.iter().any(Option::is_none) {
            diags.push(Diagnostic::new(row, "unparseable metric value"));
            continue;
        }
        if w == 0 || w > n_windows || v >= n_nodes {
            diags.push(Diagnostic::new(row, format!("window {w} / node {v} outside the graph sequence")));
            continue;
        }
        if std::mem::replace(&mut seen[w - 1][v], true) {
            diags.push(Diagnostic::new(row, format!("duplicate row for window {w}, node {v}")));
            continue;
        }
        let t = &mut out[w - 1];
        t.degree[v] = deg;
        t.betweenness[v] = vals[0].unwrap();
        t.closeness[v] = vals[1].unwrap();
        t.eigenvector.values[v] = vals[2].unwrap();
        t.clustering[v] = vals[3].unwrap();
    }
    let missing = seen.iter().flatten().filter(|s| !**s).count();
    if missing > 0 && diags.is_empty() {
        diags.push(Diagnostic::new("topology", format!("{missing} (window, node) rows missing")));
    }
    if diags.is_empty() {
        Ok(out)
    } else {
        Err(Error::Validation(diags))
    }
}
