//! Embedding-derived analytics: cosine-distance mobility, vector-norm
//! importance, dispersion (CV), z-scored heatmaps and Pearson correlations
//! against the topological baselines.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::contact::Topology;
use crate::error::{Error, Result};

/// CV threshold (percent) above which dispersion counts as high.
pub const HIGH_CV: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineDistance {
    /// `1 - x.y / (|x| |y|)`, in `[0, 2]`.
    pub value: f64,
    /// Set when either vector is zero; `value` is then 1.0.
    pub degenerate: bool,
}

pub fn cosine_distance(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<CosineDistance> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("vectors of length {} and {}", x.len(), y.len())));
    }
    let nx = x.dot(&x).sqrt();
    let ny = y.dot(&y).sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Ok(CosineDistance { value: 1.0, degenerate: true });
    }
    // 1 - cos = |x/|x| - y/|y||^2 / 2; exact zero for parallel inputs and
    // accurate for nearly parallel ones.
    let half_sq: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a / nx - b / ny).powi(2)).sum::<f64>() / 2.0;
    Ok(CosineDistance {
        value: half_sq.min(2.0),
        degenerate: false,
    })
}

/// Which window pairs a mobility series compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    /// `(t, t+1)` for every t.
    Consecutive,
    /// Every `(i, j)` with `i < j`.
    #[default]
    Forward,
}

impl std::str::FromStr for DistanceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consecutive" => Ok(Self::Consecutive),
            "forward" => Ok(Self::Forward),
            other => Err(Error::param("distance_mode", format!("`{other}` is not `consecutive` or `forward`"))),
        }
    }
}

/// Cosine distances of one node's embedding between pairs of windows.
/// Window numbers are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilitySeries {
    pub node: usize,
    pub mode: DistanceMode,
    pub entries: Vec<(usize, usize, f64)>,
    /// Entries where a zero embedding row made the distance degenerate.
    pub degenerate: usize,
}

impl MobilitySeries {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.2).collect()
    }
}

fn check_node(embeddings: &[Array2<f64>], node: usize) -> Result<()> {
    let Some(first) = embeddings.first() else {
        return Err(Error::Dimension("no embeddings".into()));
    };
    if embeddings.iter().any(|u| u.dim() != first.dim()) {
        return Err(Error::Dimension("embedding windows differ in shape".into()));
    }
    if node >= first.nrows() {
        return Err(Error::Dimension(format!("node {node} outside 0..{}", first.nrows())));
    }
    Ok(())
}

pub fn mobility_series(embeddings: &[Array2<f64>], node: usize, mode: DistanceMode) -> Result<MobilitySeries> {
    check_node(embeddings, node)?;
    let t = embeddings.len();
    let pairs: Vec<(usize, usize)> = match mode {
        DistanceMode::Consecutive => (0..t.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
        DistanceMode::Forward => (0..t).flat_map(|i| (i + 1..t).map(move |j| (i, j))).collect(),
    };
    let mut degenerate = 0;
    let mut entries = Vec::with_capacity(pairs.len());
    for (i, j) in pairs {
        let d = cosine_distance(embeddings[i].row(node), embeddings[j].row(node))?;
        degenerate += usize::from(d.degenerate);
        entries.push((i + 1, j + 1, d.value));
    }
    Ok(MobilitySeries { node, mode, entries, degenerate })
}

/// Per-window L2 norm of a node's embedding row.
pub fn vector_norms(embeddings: &[Array2<f64>], node: usize) -> Result<Vec<f64>> {
    check_node(embeddings, node)?;
    Ok(embeddings.iter().map(|u| u.row(node).dot(&u.row(node)).sqrt()).collect())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_std(values: &[f64], m: f64) -> f64 {
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Coefficient of variation in percent, `100 * stdev / mean` with the
/// population stdev. `None` for fewer than two values or a zero mean.
pub fn cv(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values);
    if m == 0.0 || !m.is_finite() {
        return None;
    }
    Some(100.0 * population_std(values, m) / m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pearson {
    pub r: f64,
    /// Two-sided p-value from a t distribution with `len - 2` degrees of freedom.
    pub p: f64,
}

/// Product-moment correlation. `None` when either series is constant or
/// shorter than three values.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<Pearson>> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("series of length {} and {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Ok(None);
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * dist.cdf(-t.abs())).min(1.0)
    };
    Ok(Some(Pearson { r, p }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZScore {
    pub values: Array2<f64>,
    /// Columns with zero spread, left at zero.
    pub flat_columns: Vec<usize>,
}

/// Column-wise z-score of a node x window matrix (population stdev).
pub fn zscore_by_window(matrix: &Array2<f64>) -> ZScore {
    let mut values = matrix.clone();
    let mut flat_columns = Vec::new();
    for (j, mut col) in values.axis_iter_mut(Axis(1)).enumerate() {
        let v = col.to_vec();
        let m = mean(&v);
        let s = population_std(&v, m);
        if s > 0.0 && s.is_finite() {
            col.mapv_inplace(|x| (x - m) / s);
        } else {
            col.fill(0.0);
            flat_columns.push(j);
        }
    }
    ZScore { values, flat_columns }
}

/// Per-node aggregates of the embedding measures.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStats {
    pub node: usize,
    pub avg_cosdist: f64,
    pub cv_cosdist: Option<f64>,
    pub avg_norm: f64,
    pub cv_norm: Option<f64>,
}

impl NodeStats {
    pub fn high_mobility(&self) -> bool {
        self.cv_cosdist.is_some_and(|c| c > HIGH_CV)
    }

    pub fn high_norm_cv(&self) -> bool {
        self.cv_norm.is_some_and(|c| c > HIGH_CV)
    }
}

/// Per-node time averages of the topological baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyAverages {
    pub degree: Vec<f64>,
    pub betweenness: Vec<f64>,
    pub closeness: Vec<f64>,
    pub eigenvector: Vec<f64>,
    pub clustering: Vec<f64>,
}

impl TopologyAverages {
    pub fn from_windows(windows: &[Topology], n_nodes: usize) -> Self {
        let avg = |f: &dyn Fn(&Topology, usize) -> f64| -> Vec<f64> {
            (0..n_nodes)
                .map(|v| {
                    if windows.is_empty() {
                        0.0
                    } else {
                        windows.iter().map(|t| f(t, v)).sum::<f64>() / windows.len() as f64
                    }
                })
                .collect()
        };
        Self {
            degree: avg(&|t, v| t.degree[v] as f64),
            betweenness: avg(&|t, v| t.betweenness[v]),
            closeness: avg(&|t, v| t.closeness[v]),
            eigenvector: avg(&|t, v| t.eigenvector.values[v]),
            clustering: avg(&|t, v| t.clustering[v]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    /// 2 for embedding-vs-embedding rows, 3 for embedding-vs-topology rows.
    pub table: u8,
    pub metric_a: &'static str,
    pub metric_b: &'static str,
    /// Nodes with both values defined.
    pub n: usize,
    pub result: Option<Pearson>,
}

/// Pearson correlation over the nodes where both values are defined.
fn paired(a: &[Option<f64>], b: &[Option<f64>]) -> (usize, Option<Pearson>) {
    let (x, y): (Vec<f64>, Vec<f64>) = a
        .iter()
        .zip(b)
        .filter_map(|(p, q)| Some(((*p)?, (*q)?)))
        .unzip();
    let n = x.len();
    (n, pearson(&x, &y).expect("equal lengths by construction"))
}

/// The four embedding-vs-embedding rows and the ten embedding-vs-topology
/// rows. Nodes with an undefined CV drop out of the rows that use it.
pub fn correlation_report(stats: &[NodeStats], topo: &TopologyAverages) -> Vec<CorrelationRow> {
    let some = |v: &[f64]| v.iter().map(|x| Some(*x)).collect::<Vec<_>>();
    let avg_cos: Vec<Option<f64>> = stats.iter().map(|s| Some(s.avg_cosdist)).collect();
    let cv_cos: Vec<Option<f64>> = stats.iter().map(|s| s.cv_cosdist).collect();
    let avg_norm: Vec<Option<f64>> = stats.iter().map(|s| Some(s.avg_norm)).collect();
    let cv_norm: Vec<Option<f64>> = stats.iter().map(|s| s.cv_norm).collect();

    let mut rows = Vec::with_capacity(14);
    let mut push = |table, metric_a, a: &[Option<f64>], metric_b, b: &[Option<f64>]| {
        let (n, result) = paired(a, b);
        rows.push(CorrelationRow { table, metric_a, metric_b, n, result });
    };
    push(2, "avg_cosdist", &avg_cos, "cv_cosdist", &cv_cos);
    push(2, "avg_cosdist", &avg_cos, "cv_norm", &cv_norm);
    push(2, "avg_norm", &avg_norm, "cv_cosdist", &cv_cos);
    push(2, "avg_norm", &avg_norm, "cv_norm", &cv_norm);
    let topo_cols: [(&'static str, Vec<Option<f64>>); 5] = [
        ("avg_degree", some(&topo.degree)),
        ("avg_betweenness", some(&topo.betweenness)),
        ("avg_closeness", some(&topo.closeness)),
        ("avg_eigenvector", some(&topo.eigenvector)),
        ("avg_clustering", some(&topo.clustering)),
    ];
    for (name, emb) in [("avg_cosdist", &avg_cos), ("avg_norm", &avg_norm)] {
        for (tname, col) in &topo_cols {
            push(3, name, emb, tname, col);
        }
    }
    rows
}

/// Everything the analyze stage reports.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticsReport {
    pub mode: DistanceMode,
    pub node_stats: Vec<NodeStats>,
    /// Node x window vector norms.
    pub norms: Array2<f64>,
    pub heatmap: ZScore,
    /// Node x node Pearson r of the norm series; NaN where undefined.
    pub pearson_nodes: Array2<f64>,
    pub correlations: Vec<CorrelationRow>,
    /// Cosine distances involving a zero embedding row.
    pub degenerate_distances: usize,
}

pub fn analyze(embeddings: &[Array2<f64>], topologies: &[Topology], mode: DistanceMode) -> Result<AnalyticsReport> {
    check_node(embeddings, 0)?;
    let n = embeddings[0].nrows();
    let t = embeddings.len();
    let mut norms = Array2::zeros((n, t));
    let mut node_stats = Vec::with_capacity(n);
    let mut degenerate_distances = 0;
    for v in 0..n {
        let series = mobility_series(embeddings, v, mode)?;
        degenerate_distances += series.degenerate;
        let dists = series.values();
        let nv = vector_norms(embeddings, v)?;
        norms.row_mut(v).assign(&ArrayView1::from(&nv));
        node_stats.push(NodeStats {
            node: v,
            avg_cosdist: if dists.is_empty() { 0.0 } else { mean(&dists) },
            cv_cosdist: cv(&dists),
            avg_norm: mean(&nv),
            cv_norm: cv(&nv),
        });
    }
    let mut pearson_nodes = Array2::from_elem((n, n), f64::NAN);
    for a in 0..n {
        for b in a..n {
            let r = pearson(&norms.row(a).to_vec(), &norms.row(b).to_vec())?.map_or(f64::NAN, |p| p.r);
            pearson_nodes[[a, b]] = r;
            pearson_nodes[[b, a]] = r;
        }
    }
    let topo = TopologyAverages::from_windows(topologies, n);
    Ok(AnalyticsReport {
        mode,
        heatmap: zscore_by_window(&norms),
        correlations: correlation_report(&node_stats, &topo),
        node_stats,
        norms,
        pearson_nodes,
        degenerate_distances,
    })
}

fn opt_cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.12e}"))
}

fn num_cell(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12e}")
    } else {
        String::new()
    }
}

pub const NODE_STATS_HEADER: &str = "node,avg_cosdist,cv_cosdist,avg_norm,cv_norm,high_mobility_flag,high_norm_cv_flag";
pub const CORRELATIONS_HEADER: &str = "table,metric_a,metric_b,n,r,p";

impl AnalyticsReport {
    pub fn node_stats_csv(&self) -> String {
        let mut out = format!("{NODE_STATS_HEADER}\n");
        for s in &self.node_stats {
            let _ = writeln!(
                out,
                "{},{:.12e},{},{:.12e},{},{},{}",
                s.node,
                s.avg_cosdist,
                opt_cell(s.cv_cosdist),
                s.avg_norm,
                opt_cell(s.cv_norm),
                u8::from(s.high_mobility()),
                u8::from(s.high_norm_cv()),
            );
        }
        out
    }

    pub fn heatmap_csv(&self) -> String {
        matrix_csv(&self.heatmap.values, "node", "w", 1)
    }

    pub fn pearson_nodes_csv(&self) -> String {
        matrix_csv(&self.pearson_nodes, "node", "n", 0)
    }

    pub fn correlations_csv(&self) -> String {
        let mut out = format!("{CORRELATIONS_HEADER}\n");
        for row in &self.correlations {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                row.table,
                row.metric_a,
                row.metric_b,
                row.n,
                opt_cell(row.result.map(|p| p.r)),
                opt_cell(row.result.map(|p| p.p)),
            );
        }
        out
    }

    /// Fraction of nodes whose norm CV, and whose cosine-distance CV, is high.
    pub fn high_cv_fractions(&self) -> (f64, f64) {
        let n = self.node_stats.len().max(1) as f64;
        let norm = self.node_stats.iter().filter(|s| s.high_norm_cv()).count() as f64 / n;
        let cos = self.node_stats.iter().filter(|s| s.high_mobility()).count() as f64 / n;
        (norm, cos)
    }

    /// Node ids with the `k` largest values of `key`, ties by node id.
    pub fn top_nodes(&self, k: usize, key: impl Fn(&NodeStats) -> f64) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.node_stats.len()).collect();
        ids.sort_by(|&a, &b| key(&self.node_stats[b]).total_cmp(&key(&self.node_stats[a])).then(a.cmp(&b)));
        ids.truncate(k);
        ids
    }

    pub fn correlation(&self, metric_a: &str, metric_b: &str) -> Option<Pearson> {
        self.correlations
            .iter()
            .find(|r| r.metric_a == metric_a && r.metric_b == metric_b)
            .and_then(|r| r.result)
    }
}

fn matrix_csv(m: &Array2<f64>, row_label: &str, col_prefix: &str, col_base: usize) -> String {
    let mut out = String::from(row_label);
    for j in 0..m.ncols() {
        let _ = write!(out, ",{col_prefix}{}", j + col_base);
    }
    out.push('\n');
    for (i, row) in m.rows().into_iter().enumerate() {
        let _ = write!(out, "{i}");
        for &x in row {
            let _ = write!(out, ",{}", num_cell(x));
        }
        out.push('\n');
    }
    out
}
