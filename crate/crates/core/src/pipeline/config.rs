use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contact::ContactRule;
use crate::embed::FitOptions;
use crate::error::{Diagnostic, Error, Result};
use crate::grm::TraceConfig;
use crate::metrics::DistanceMode;
use crate::walks::WalkParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphsConfig {
    /// Seconds per contact-graph window.
    pub window_duration: f64,
    /// Meters.
    pub contact_radius: f64,
    /// Minimum continuous time in range for an edge, seconds.
    pub min_contact_s: f64,
}

impl Default for GraphsConfig {
    fn default() -> Self {
        let rule = ContactRule::default();
        Self {
            window_duration: rule.window_duration,
            contact_radius: rule.radius,
            min_contact_s: rule.min_contact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub dim: usize,
    pub lambda: f64,
    pub tau: f64,
    /// Walk positions on each side that count as co-occurring.
    pub context_radius: usize,
    pub initial_step: f64,
    pub max_halvings: usize,
    pub inner_steps: usize,
    pub max_sweeps: usize,
    pub rel_tol: f64,
    /// Also write the PPMI matrices.
    pub dump_ppmi: bool,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        let fit = FitOptions::default();
        Self {
            dim: fit.dim,
            lambda: fit.lambda,
            tau: fit.tau,
            context_radius: 5,
            initial_step: fit.initial_step,
            max_halvings: fit.max_halvings,
            inner_steps: fit.inner_steps,
            max_sweeps: fit.max_sweeps,
            rel_tol: fit.rel_tol,
            dump_ppmi: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Window pairs used for the per-node cosine-distance statistics.
    pub distance_mode: DistanceMode,
}

/// Everything a pipeline run depends on. Parsed from TOML; every field has a
/// default, so an empty file describes the full-scale reference run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads for intra-stage parallelism; 0 uses every core.
    pub threads: usize,
    pub trace: TraceConfig,
    pub graphs: GraphsConfig,
    pub walks: WalkParams,
    pub embed: EmbedConfig,
    pub analyze: AnalyzeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: PathBuf::from("out"),
            threads: 0,
            trace: TraceConfig::default(),
            graphs: GraphsConfig::default(),
            walks: WalkParams::default(),
            embed: EmbedConfig::default(),
            analyze: AnalyzeConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Every violated invariant, across all sections.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = self.trace.diagnostics("trace.");
        let g = &self.graphs;
        if !(g.window_duration > 0.0 && g.window_duration.is_finite()) {
            out.push(Diagnostic::new("graphs.window_duration", "window_duration must be > 0"));
        }
        if !(g.contact_radius > 0.0 && g.contact_radius.is_finite()) {
            out.push(Diagnostic::new("graphs.contact_radius", "contact_radius must be > 0"));
        }
        if !(g.min_contact_s >= 0.0 && g.min_contact_s.is_finite()) {
            out.push(Diagnostic::new("graphs.min_contact_s", "min_contact_s must be >= 0"));
        }
        out.extend(self.walks.diagnostics("walks."));
        out.extend(self.fit_options().diagnostics("embed."));
        if self.embed.context_radius < 1 {
            out.push(Diagnostic::new("embed.context_radius", "context_radius must be >= 1"));
        }
        if self.embed.dim > self.trace.n_nodes && self.trace.n_nodes > 0 {
            out.push(Diagnostic::new(
                "embed.dim",
                format!("dim {} exceeds trace.n_nodes {}", self.embed.dim, self.trace.n_nodes),
            ));
        }
        match std::fs::metadata(&self.output_dir) {
            Ok(m) if !m.is_dir() => out.push(Diagnostic::new("output_dir", "exists and is not a directory")),
            Ok(m) if m.permissions().readonly() => out.push(Diagnostic::new("output_dir", "is read-only")),
            _ => {}
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(d))
        }
    }

    /// SHA-256 over the settings that influence artifact content (everything
    /// except the output location and thread count).
    pub fn content_hash(&self) -> String {
        let canonical = Self {
            output_dir: PathBuf::new(),
            threads: 0,
            ..self.clone()
        };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn trace_config(&self) -> TraceConfig {
        TraceConfig {
            seed: self.seed,
            ..self.trace.clone()
        }
    }

    pub fn contact_rule(&self) -> ContactRule {
        ContactRule {
            window_duration: self.graphs.window_duration,
            radius: self.graphs.contact_radius,
            min_contact: self.graphs.min_contact_s,
        }
    }

    pub fn walk_params(&self) -> WalkParams {
        WalkParams {
            seed: self.seed,
            ..self.walks.clone()
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        let e = &self.embed;
        FitOptions {
            dim: e.dim,
            lambda: e.lambda,
            tau: e.tau,
            initial_step: e.initial_step,
            max_halvings: e.max_halvings,
            inner_steps: e.inner_steps,
            max_sweeps: e.max_sweeps,
            rel_tol: e.rel_tol,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_clean() {
        assert!(PipelineConfig::default().diagnostics().is_empty());
        assert_eq!(PipelineConfig::from_toml_str("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn all_violations_reported_together() {
        let text = r#"
            [trace]
            k_mix = [{ period = 86400.0, fraction = 0.6 }, { period = 604800.0, fraction = 0.3 }]
            [walks]
            p = 0.0
            [embed]
            dim = 0
        "#;
        let cfg = PipelineConfig::from_toml_str(text).unwrap();
        let d = cfg.diagnostics();
        assert!(d.iter().any(|x| x.location.starts_with("trace.k_mix")));
        assert!(d.iter().any(|x| x.location == "walks.p" && x.message == "p must be > 0"));
        assert!(d.iter().any(|x| x.location == "embed.dim"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(PipelineConfig::from_toml_str("sed = 3"), Err(Error::Config(_))));
        assert!(PipelineConfig::from_toml_str("[walks]\nlength = 3").is_err());
    }

    #[test]
    fn hash_ignores_output_location_and_threads() {
        let a = PipelineConfig::default();
        let b = PipelineConfig {
            output_dir: "elsewhere".into(),
            threads: 3,
            ..a.clone()
        };
        assert_eq!(a.content_hash(), b.content_hash());
        let c = PipelineConfig { seed: 2, ..a.clone() };
        assert_ne!(a.content_hash(), c.content_hash());
    }
}
