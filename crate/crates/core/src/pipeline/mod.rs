//! Stage orchestration with persisted CSV/text intermediates.
//!
//! Layout under the output directory:
//!
//! ```text
//! trace/    trace.csv, meetings.csv
//! graphs/   edges.csv, topology.csv
//! walks/    walks_<w>.txt
//! embed/    emb_<w>.csv, loss.csv, window_loss.csv, [ppmi.csv]
//! analyze/  node_stats.csv, heatmap_norm_zscore.csv, pearson_nodes.csv, correlations.csv
//! ```
//!
//! Every stage directory also carries a `manifest.json` with the config hash,
//! seed, and SHA-256 digests of inputs and outputs. Manifests hold no
//! timestamps, so reruns with the same config are byte-identical.

mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

pub use config::{AnalyzeConfig, EmbedConfig, GraphsConfig, PipelineConfig};

use crate::contact::{build_graph_sequence, read_topology_csv, topology, GraphSequence, TOPOLOGY_HEADER};
use crate::embed::{embedding_from_csv, embedding_to_csv, fit, top_eigenvalue, PpmiMatrix, PPMI_HEADER};
use crate::error::{Error, Result};
use crate::grm::{generate_trace, meetings_to_csv, PositionTrace};
use crate::metrics::analyze;
use crate::walks::{sample_walks, WalkCorpus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Generate,
    Graphs,
    Walks,
    Embed,
    Analyze,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Generate, Stage::Graphs, Stage::Walks, Stage::Embed, Stage::Analyze];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Graphs => "graphs",
            Stage::Walks => "walks",
            Stage::Embed => "embed",
            Stage::Analyze => "analyze",
        }
    }

    /// Subdirectory of the output directory holding this stage's artifacts.
    pub fn dir(self) -> &'static str {
        match self {
            Stage::Generate => "trace",
            Stage::Graphs => "graphs",
            Stage::Walks => "walks",
            Stage::Embed => "embed",
            Stage::Analyze => "analyze",
        }
    }
}

/// Provenance record written next to each stage's artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    /// Relative path -> SHA-256 of every file read.
    pub inputs: BTreeMap<String, String>,
    /// Relative path -> SHA-256 of every file written.
    pub outputs: BTreeMap<String, String>,
    pub stats: serde_json::Value,
}

impl Manifest {
    pub fn stat_usize(&self, key: &str) -> Result<usize> {
        self.stats
            .get(key)
            .and_then(serde_json::Value::as_u64)
            .map(|v| v as usize)
            .ok_or_else(|| Error::Config(format!("{} manifest lacks `{key}`", self.stage)))
    }

    pub fn stat_f64(&self, key: &str) -> Option<f64> {
        self.stats.get(key).and_then(serde_json::Value::as_f64)
    }
}

/// What one stage run produced.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub stage: Stage,
    pub elapsed: Duration,
    pub manifest: Manifest,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Tracks files read and written by a stage, relative to the output root.
struct Artifacts<'a> {
    root: &'a Path,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl<'a> Artifacts<'a> {
    fn new(root: &'a Path) -> Self {
        Self {
            root,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    /// Reads an upstream artifact; a missing file names the stage that makes it.
    fn read(&mut self, rel: &str, producer: Stage) -> Result<String> {
        let path = self.root.join(rel);
        match std::fs::read_to_string(&path) {
            Ok(text) => {
                self.inputs.insert(rel.to_string(), sha256_hex(text.as_bytes()));
                Ok(text)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingArtifact {
                path,
                stage: producer.name(),
            }),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    fn read_manifest(&mut self, producer: Stage) -> Result<Manifest> {
        let rel = format!("{}/manifest.json", producer.dir());
        let text = self.read(&rel, producer)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{rel}: {e}")))
    }

    fn write(&mut self, rel: &str, contents: &str) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.outputs.insert(rel.to_string(), sha256_hex(contents.as_bytes()));
        Ok(())
    }

    fn finish(mut self, stage: Stage, config: &PipelineConfig, stats: serde_json::Value) -> Result<Manifest> {
        let manifest = Manifest {
            stage: stage.name().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.content_hash(),
            seed: config.seed,
            inputs: std::mem::take(&mut self.inputs),
            outputs: std::mem::take(&mut self.outputs),
            stats,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.root.join(stage.dir()).join("manifest.json");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

/// Empties a stage's directory so no stale artifact survives a rerun.
fn reset_stage_dir(root: &Path, stage: Stage) -> Result<()> {
    let dir = root.join(stage.dir());
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))
}

fn window_file(prefix: &str, window: usize, ext: &str) -> String {
    format!("{prefix}_{window:03}.{ext}")
}

fn run_generate(config: &PipelineConfig, art: &mut Artifacts) -> Result<serde_json::Value> {
    let generated = generate_trace(&config.trace_config())?;
    art.write("trace/trace.csv", &generated.trace.to_csv())?;
    art.write("trace/meetings.csv", &meetings_to_csv(&generated.meetings))?;
    let segments: usize = generated.trace.nodes.iter().map(Vec::len).sum();
    Ok(json!({
        "n_nodes": generated.trace.n_nodes(),
        "sim_duration_s": generated.trace.sim_duration,
        "meetings": generated.meetings.len(),
        "segments": segments,
        "social_edges": generated.social.adjacency.iter().map(Vec::len).sum::<usize>() / 2,
    }))
}

fn run_graphs(config: &PipelineConfig, art: &mut Artifacts) -> Result<serde_json::Value> {
    let text = art.read("trace/trace.csv", Stage::Generate)?;
    let trace = PositionTrace::from_csv(&text)?;
    let seq = build_graph_sequence(&trace, &config.contact_rule())?;
    art.write("graphs/edges.csv", &seq.edges_to_csv())?;
    let topologies: Vec<_> = seq.graphs.par_iter().map(topology).collect();
    let mut topo_csv = format!("{TOPOLOGY_HEADER}\n");
    for t in &topologies {
        t.write_csv_rows(&mut topo_csv);
    }
    art.write("graphs/topology.csv", &topo_csv)?;
    let edge_counts: Vec<usize> = seq.graphs.iter().map(|g| g.edge_count()).collect();
    let total: usize = edge_counts.iter().sum();
    Ok(json!({
        "n_nodes": seq.n_nodes,
        "n_windows": seq.graphs.len(),
        "window_duration_s": seq.window_duration,
        "truncated": seq.truncated,
        "total_edges": total,
        "mean_edges_per_window": total as f64 / seq.graphs.len() as f64,
        "edgeless_windows": edge_counts.iter().filter(|&&c| c == 0).count(),
        "eigenvector_unconverged_windows": topologies.iter().filter(|t| !t.eigenvector.converged).count(),
    }))
}

fn load_graphs(art: &mut Artifacts) -> Result<GraphSequence> {
    let m = art.read_manifest(Stage::Graphs)?;
    let (n_nodes, n_windows) = (m.stat_usize("n_nodes")?, m.stat_usize("n_windows")?);
    let window_duration = m.stat_f64("window_duration_s").unwrap_or(86_400.0);
    let text = art.read("graphs/edges.csv", Stage::Graphs)?;
    GraphSequence::from_edges_csv(&text, n_nodes, n_windows, window_duration)
}

fn run_walks(config: &PipelineConfig, art: &mut Artifacts) -> Result<serde_json::Value> {
    let seq = load_graphs(art)?;
    let params = config.walk_params();
    params.validate()?;
    let corpora: Vec<WalkCorpus> = seq.graphs.iter().map(|g| sample_walks(g, &params)).collect();
    for c in &corpora {
        art.write(&format!("walks/{}", window_file("walks", c.window, "txt")), &c.to_text())?;
    }
    Ok(json!({
        "n_nodes": seq.n_nodes,
        "n_windows": corpora.len(),
        "total_walks": corpora.iter().map(|c| c.walks.len()).sum::<usize>(),
        "empty_windows": corpora.iter().filter(|c| c.is_empty()).count(),
    }))
}

fn run_embed(config: &PipelineConfig, art: &mut Artifacts) -> Result<serde_json::Value> {
    let m = art.read_manifest(Stage::Walks)?;
    let (n_nodes, n_windows) = (m.stat_usize("n_nodes")?, m.stat_usize("n_windows")?);
    let mut corpora = Vec::with_capacity(n_windows);
    for w in 1..=n_windows {
        let text = art.read(&format!("walks/{}", window_file("walks", w, "txt")), Stage::Walks)?;
        corpora.push(WalkCorpus::from_text(w, &text, n_nodes)?);
    }
    let radius = config.embed.context_radius;
    let matrices: Vec<PpmiMatrix> = corpora
        .par_iter()
        .map(|c| PpmiMatrix::from_corpus(c, n_nodes, radius))
        .collect::<Result<_>>()?;
    if config.embed.dump_ppmi {
        let mut text = format!("{PPMI_HEADER}\n");
        for p in &matrices {
            p.write_csv_rows(&mut text);
        }
        art.write("embed/ppmi.csv", &text)?;
    }
    let ys: Vec<Array2<f64>> = matrices.into_iter().map(|p| p.values).collect();
    let top: Vec<f64> = ys.par_iter().map(top_eigenvalue).collect::<Result<_>>()?;
    let half_lambda = config.embed.lambda / 2.0;
    let ridge_dominated = top.iter().filter(|&&e| e <= half_lambda).count();
    if ridge_dominated > 0 {
        log::warn!(
            "lambda/2 = {half_lambda} is at least the top PPMI eigenvalue in {ridge_dominated} of {n_windows} windows; \
             the optimum there is U_t = 0 and embeddings shrink toward zero"
        );
    }
    let fitted = fit(&ys, &config.fit_options())?;
    for (t, u) in fitted.embeddings.iter().enumerate() {
        art.write(&format!("embed/{}", window_file("emb", t + 1, "csv")), &embedding_to_csv(u))?;
    }
    art.write("embed/loss.csv", &fitted.loss_csv())?;
    let mut wl = String::from("window,loss\n");
    for (t, l) in fitted.window_losses.iter().enumerate() {
        let _ = writeln!(wl, "{},{l:.12e}", t + 1);
    }
    art.write("embed/window_loss.csv", &wl)?;
    if !fitted.converged {
        log::warn!("factorization stopped after {} sweeps without meeting rel_tol", config.embed.max_sweeps);
    }
    Ok(json!({
        "n_nodes": n_nodes,
        "n_windows": n_windows,
        "dim": fitted.dim,
        "initial_loss": fitted.sweep_losses[0],
        "final_loss": fitted.final_loss(),
        "sweeps": fitted.sweep_losses.len() - 1,
        "converged": fitted.converged,
        "top_ppmi_eigenvalue_min": top.iter().copied().fold(f64::INFINITY, f64::min),
        "top_ppmi_eigenvalue_max": top.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "ridge_dominated_windows": ridge_dominated,
    }))
}

fn run_analyze(config: &PipelineConfig, art: &mut Artifacts) -> Result<serde_json::Value> {
    let m = art.read_manifest(Stage::Embed)?;
    let (n_nodes, n_windows) = (m.stat_usize("n_nodes")?, m.stat_usize("n_windows")?);
    let mut embeddings = Vec::with_capacity(n_windows);
    for w in 1..=n_windows {
        let text = art.read(&format!("embed/{}", window_file("emb", w, "csv")), Stage::Embed)?;
        let u = embedding_from_csv(&text)?;
        if u.nrows() != n_nodes {
            return Err(Error::Dimension(format!("emb window {w} has {} rows, expected {n_nodes}", u.nrows())));
        }
        embeddings.push(u);
    }
    let topo_text = art.read("graphs/topology.csv", Stage::Graphs)?;
    let topologies = read_topology_csv(&topo_text, n_nodes, n_windows)?;
    let report = analyze(&embeddings, &topologies, config.analyze.distance_mode)?;
    art.write("analyze/node_stats.csv", &report.node_stats_csv())?;
    art.write("analyze/heatmap_norm_zscore.csv", &report.heatmap_csv())?;
    art.write("analyze/pearson_nodes.csv", &report.pearson_nodes_csv())?;
    art.write("analyze/correlations.csv", &report.correlations_csv())?;
    let (frac_norm, frac_cos) = report.high_cv_fractions();
    let r = |a, b| report.correlation(a, b).map(|p| p.r);
    Ok(json!({
        "distance_mode": config.analyze.distance_mode,
        "frac_high_norm_cv": frac_norm,
        "frac_high_cosdist_cv": frac_cos,
        "r_avg_norm_vs_cv_cosdist": r("avg_norm", "cv_cosdist"),
        "r_avg_cosdist_vs_avg_degree": r("avg_cosdist", "avg_degree"),
        "top5_avg_norm": report.top_nodes(5, |s| s.avg_norm),
        "top5_avg_cosdist": report.top_nodes(5, |s| s.avg_cosdist),
        "degenerate_distances": report.degenerate_distances,
    }))
}

fn with_threads<T: Send>(threads: usize, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if threads == 0 {
        return job();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(job)
}

/// Runs one stage against the artifacts already under `config.output_dir`.
pub fn run_stage(stage: Stage, config: &PipelineConfig) -> Result<StageOutcome> {
    config.validate()?;
    let start = Instant::now();
    let root = config.output_dir.as_path();
    let manifest = with_threads(config.threads, || {
        let mut art = Artifacts::new(root);
        let stats = run_stage_body(stage, config, &mut art)?;
        art.finish(stage, config, stats)
    })?;
    let elapsed = start.elapsed();
    log::info!("stage {} finished in {:.2?}", stage.name(), elapsed);
    Ok(StageOutcome { stage, elapsed, manifest })
}

fn run_stage_body(stage: Stage, config: &PipelineConfig, art: &mut Artifacts) -> Result<serde_json::Value> {
    // The stage directory is cleared only once the upstream inputs are known
    // to exist, so a missing input leaves earlier artifacts untouched.
    let root = art.root;
    let check = |producer: Stage, rel: &str| -> Result<()> {
        let path = root.join(rel);
        if path.exists() {
            Ok(())
        } else {
            Err(Error::MissingArtifact { path, stage: producer.name() })
        }
    };
    match stage {
        Stage::Generate => {}
        Stage::Graphs => check(Stage::Generate, "trace/trace.csv")?,
        Stage::Walks => check(Stage::Graphs, "graphs/manifest.json")?,
        Stage::Embed => check(Stage::Walks, "walks/manifest.json")?,
        Stage::Analyze => {
            check(Stage::Embed, "embed/manifest.json")?;
            check(Stage::Graphs, "graphs/topology.csv")?
        }
    }
    reset_stage_dir(root, stage)?;
    match stage {
        Stage::Generate => run_generate(config, art),
        Stage::Graphs => run_graphs(config, art),
        Stage::Walks => run_walks(config, art),
        Stage::Embed => run_embed(config, art),
        Stage::Analyze => run_analyze(config, art),
    }
}

/// Runs every stage in order, stopping at the first failure.
pub fn run_all(config: &PipelineConfig) -> Result<Vec<StageOutcome>> {
    Stage::ALL.iter().map(|&s| run_stage(s, config)).collect()
}

/// Human-readable run summary: per-stage wall time and headline statistics.
pub fn summary(outcomes: &[StageOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        let s = &o.manifest.stats;
        let _ = write!(out, "{:<9} {:>9.2?}", o.stage.name(), o.elapsed);
        let detail = match o.stage {
            Stage::Generate => format!("{} nodes, {} meetings", s["n_nodes"], s["meetings"]),
            Stage::Graphs => format!(
                "{} windows, {} edges ({:.1}/window)",
                s["n_windows"],
                s["total_edges"],
                s["mean_edges_per_window"].as_f64().unwrap_or(0.0)
            ),
            Stage::Walks => format!("{} walks, {} empty windows", s["total_walks"], s["empty_windows"]),
            Stage::Embed => format!(
                "loss {:.6e} -> {:.6e} after {} sweeps{}",
                s["initial_loss"].as_f64().unwrap_or(f64::NAN),
                s["final_loss"].as_f64().unwrap_or(f64::NAN),
                s["sweeps"],
                if s["converged"].as_bool() == Some(true) { "" } else { " (not converged)" }
            ),
            Stage::Analyze => format!(
                "top-5 avg norm {}, top-5 avg cosine distance {}, high-CV norm {:.0}% / cosine {:.0}%",
                s["top5_avg_norm"],
                s["top5_avg_cosdist"],
                100.0 * s["frac_high_norm_cv"].as_f64().unwrap_or(0.0),
                100.0 * s["frac_high_cosdist_cv"].as_f64().unwrap_or(0.0),
            ),
        };
        let _ = writeln!(out, "  {detail}");
    }
    out
}

/// Output path of a stage artifact.
pub fn artifact_path(config: &PipelineConfig, rel: &str) -> PathBuf {
    config.output_dir.join(rel)
}
