//! Python bindings for the mobembed pipeline: configuration, trace
//! generation, contact graphs, walks, PPMI, the aligned fit, analytics and
//! the staged pipeline runner.

use std::path::PathBuf;

use mobembed_core::contact::{self, ContactGraph};
use mobembed_core::embed::{self, FitOptions};
use mobembed_core::grm;
use mobembed_core::metrics::{self, DistanceMode};
use mobembed_core::pipeline::{self, Stage};
use mobembed_core::walks::{self, WalkCorpus, WalkParams};
use mobembed_core::Error;
use ndarray::Array2;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py_err(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_array(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("matrix rows differ in length"));
    }
    Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect()).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn parse_stage(name: &str) -> PyResult<Stage> {
    Stage::ALL
        .iter()
        .copied()
        .find(|s| s.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown stage `{name}`")))
}

/// Full pipeline configuration; every field defaults to the reference run.
#[pyclass(name = "PipelineConfig", module = "mobembed")]
struct PyPipelineConfig {
    inner: pipeline::PipelineConfig,
}

#[pymethods]
impl PyPipelineConfig {
    #[new]
    #[pyo3(signature = (toml_text = None))]
    fn new(toml_text: Option<&str>) -> PyResult<Self> {
        let inner = match toml_text {
            Some(text) => pipeline::PipelineConfig::from_toml_str(text).map_err(to_py_err)?,
            None => pipeline::PipelineConfig::default(),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: pipeline::PipelineConfig::load(&path).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn output_dir(&self) -> PathBuf {
        self.inner.output_dir.clone()
    }

    #[setter]
    fn set_output_dir(&mut self, dir: PathBuf) {
        self.inner.output_dir = dir;
    }

    #[getter]
    fn threads(&self) -> usize {
        self.inner.threads
    }

    #[setter]
    fn set_threads(&mut self, threads: usize) {
        self.inner.threads = threads;
    }

    /// Every violated invariant as `(location, message)` pairs; empty when valid.
    fn diagnostics(&self) -> Vec<(String, String)> {
        self.inner.diagnostics().into_iter().map(|d| (d.location, d.message)).collect()
    }

    fn content_hash(&self) -> String {
        self.inner.content_hash()
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "PipelineConfig(seed={}, output_dir={:?}, n_nodes={}, dim={})",
            self.inner.seed, self.inner.output_dir, self.inner.trace.n_nodes, self.inner.embed.dim
        )
    }
}

/// Undirected contact graph of one window.
#[pyclass(name = "ContactGraph", module = "mobembed")]
struct PyContactGraph {
    inner: ContactGraph,
}

#[pymethods]
impl PyContactGraph {
    #[new]
    #[pyo3(signature = (n_nodes, edges, window = 1))]
    fn new(n_nodes: usize, edges: Vec<(usize, usize)>, window: usize) -> PyResult<Self> {
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= n_nodes || v >= n_nodes) {
            return Err(PyValueError::new_err(format!("edge ({u}, {v}) outside 0..{n_nodes}")));
        }
        Ok(Self {
            inner: ContactGraph::from_edges(window, n_nodes, &edges),
        })
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    #[getter]
    fn window(&self) -> usize {
        self.inner.window
    }

    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().collect()
    }

    fn neighbors(&self, node: usize) -> PyResult<Vec<usize>> {
        if node >= self.inner.n_nodes() {
            return Err(PyValueError::new_err(format!("node {node} outside 0..{}", self.inner.n_nodes())));
        }
        Ok(self.inner.neighbors(node).to_vec())
    }

    /// Per-node centralities: degree, betweenness, closeness, eigenvector,
    /// clustering.
    fn topology(&self, py: Python<'_>) -> PyResult<Py<pyo3::types::PyDict>> {
        let t = contact::topology(&self.inner);
        let d = pyo3::types::PyDict::new(py);
        d.set_item("degree", t.degree)?;
        d.set_item("betweenness", t.betweenness)?;
        d.set_item("closeness", t.closeness)?;
        d.set_item("eigenvector", t.eigenvector.values)?;
        d.set_item("eigenvector_converged", t.eigenvector.converged)?;
        d.set_item("clustering", t.clustering)?;
        Ok(d.unbind())
    }

    /// node2vec walks from every non-isolated node.
    #[pyo3(signature = (walks_per_node = 4, walk_length = 8, p = 1.0, q = 0.5, seed = 0))]
    fn sample_walks(&self, walks_per_node: usize, walk_length: usize, p: f64, q: f64, seed: u64) -> PyResult<Vec<Vec<usize>>> {
        let params = WalkParams { walks_per_node, walk_length, p, q, seed };
        params.validate().map_err(to_py_err)?;
        Ok(walks::sample_walks(&self.inner, &params).walks)
    }

    fn __repr__(&self) -> String {
        format!("ContactGraph(window={}, n_nodes={}, edges={})", self.inner.window, self.inner.n_nodes(), self.inner.edge_count())
    }
}

/// Generates a trace and returns `(segments, meetings)`: segments as
/// `(node, t_start, t_end, x, y)` and meetings as
/// `(group, t_start, t_end, attendees)`.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn generate_trace(
    config: &PyPipelineConfig,
) -> PyResult<(Vec<(usize, f64, f64, f64, f64)>, Vec<(usize, f64, f64, Vec<usize>)>)> {
    let generated = grm::generate_trace(&config.inner.trace_config()).map_err(to_py_err)?;
    let segments = generated
        .trace
        .nodes
        .iter()
        .enumerate()
        .flat_map(|(node, segs)| segs.iter().map(move |s| (node, s.t_start, s.t_end, s.x, s.y)))
        .collect();
    let meetings = generated
        .meetings
        .iter()
        .map(|m| (m.group_id, m.t_start, m.t_end, m.attendees.clone()))
        .collect();
    Ok((segments, meetings))
}

/// Builds the per-window contact graphs of a generated trace.
#[pyfunction]
fn contact_graphs(config: &PyPipelineConfig) -> PyResult<Vec<PyContactGraph>> {
    let generated = grm::generate_trace(&config.inner.trace_config()).map_err(to_py_err)?;
    let seq = contact::build_graph_sequence(&generated.trace, &config.inner.contact_rule()).map_err(to_py_err)?;
    Ok(seq.graphs.into_iter().map(|inner| PyContactGraph { inner }).collect())
}

/// PPMI matrix of a walk corpus over `n_nodes` nodes.
#[pyfunction]
#[pyo3(signature = (walks, n_nodes, radius = 5))]
fn ppmi(walks: Vec<Vec<usize>>, n_nodes: usize, radius: usize) -> PyResult<Vec<Vec<f64>>> {
    let corpus = WalkCorpus { window: 1, walks };
    let counts = embed::cooccurrence_counts(&corpus, n_nodes, radius).map_err(to_py_err)?;
    Ok(to_rows(&embed::ppmi(&counts).map_err(to_py_err)?))
}

/// Fits the aligned embedding sequence to a list of square matrices.
/// Returns `{"embeddings", "sweep_losses", "window_losses", "converged"}`.
#[pyfunction]
#[pyo3(signature = (matrices, dim, lambda_ = 50.0, tau = 15.0, seed = 0, max_sweeps = 200, inner_steps = 10))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    matrices: Vec<Vec<Vec<f64>>>,
    dim: usize,
    lambda_: f64,
    tau: f64,
    seed: u64,
    max_sweeps: usize,
    inner_steps: usize,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let ys = matrices.into_iter().map(to_array).collect::<PyResult<Vec<_>>>()?;
    let opts = FitOptions { dim, lambda: lambda_, tau, seed, max_sweeps, inner_steps, ..FitOptions::default() };
    let out = py.detach(|| embed::fit(&ys, &opts)).map_err(to_py_err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("embeddings", out.embeddings.iter().map(to_rows).collect::<Vec<_>>())?;
    d.set_item("sweep_losses", out.sweep_losses)?;
    d.set_item("window_losses", out.window_losses)?;
    d.set_item("converged", out.converged)?;
    Ok(d.unbind())
}

#[pyfunction]
fn cosine_distance(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    metrics::cosine_distance(ndarray::ArrayView1::from(&x), ndarray::ArrayView1::from(&y))
        .map(|d| d.value)
        .map_err(to_py_err)
}

/// Coefficient of variation in percent; `None` when undefined.
#[pyfunction]
fn cv(values: Vec<f64>) -> Option<f64> {
    metrics::cv(&values)
}

/// `(r, p)`, or `None` for constant or too-short series.
#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<Option<(f64, f64)>> {
    Ok(metrics::pearson(&x, &y).map_err(to_py_err)?.map(|p| (p.r, p.p)))
}

/// Mobility series of one node: `(window_i, window_j, distance)` triples.
#[pyfunction]
#[pyo3(signature = (embeddings, node, mode = "forward"))]
fn mobility_series(embeddings: Vec<Vec<Vec<f64>>>, node: usize, mode: &str) -> PyResult<Vec<(usize, usize, f64)>> {
    let mode: DistanceMode = mode.parse().map_err(to_py_err)?;
    let us = embeddings.into_iter().map(to_array).collect::<PyResult<Vec<_>>>()?;
    Ok(metrics::mobility_series(&us, node, mode).map_err(to_py_err)?.entries)
}

/// Runs one stage (`generate`, `graphs`, `walks`, `embed`, `analyze`) and
/// returns its manifest as JSON text.
#[pyfunction]
fn run_stage(py: Python<'_>, stage: &str, config: &PyPipelineConfig) -> PyResult<String> {
    let stage = parse_stage(stage)?;
    let cfg = config.inner.clone();
    let outcome = py.detach(|| pipeline::run_stage(stage, &cfg)).map_err(to_py_err)?;
    serde_json::to_string(&outcome.manifest).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Runs every stage and returns the run summary.
#[pyfunction]
fn run_all(py: Python<'_>, config: &PyPipelineConfig) -> PyResult<String> {
    let cfg = config.inner.clone();
    let outcomes = py.detach(|| pipeline::run_all(&cfg)).map_err(to_py_err)?;
    Ok(pipeline::summary(&outcomes))
}

#[pymodule]
fn mobembed(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPipelineConfig>()?;
    m.add_class::<PyContactGraph>()?;
    m.add_function(wrap_pyfunction!(generate_trace, m)?)?;
    m.add_function(wrap_pyfunction!(contact_graphs, m)?)?;
    m.add_function(wrap_pyfunction!(ppmi, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_distance, m)?)?;
    m.add_function(wrap_pyfunction!(cv, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(mobility_series, m)?)?;
    m.add_function(wrap_pyfunction!(run_stage, m)?)?;
    m.add_function(wrap_pyfunction!(run_all, m)?)?;
    Ok(())
}
