//! Group-meeting mobility trace generator.
//!
//! A simplified group-regularity model: nodes live in fixed home cells of a
//! square grid and teleport to a group's venue cell for the duration of each
//! meeting they attend. Groups meet periodically with a regularity period K;
//! inter-meeting gaps, durations and group sizes follow heavy-tailed laws and
//! attendance is biased by a Gaussian-random-partition social graph.

mod sampling;
mod schedule;
mod social;
mod trace;

pub use sampling::{sample_group_size, sample_trunc_powerlaw};
pub use schedule::{assign_attendees, draw_rosters, schedule_meetings};
pub use social::{build_social_graph, SocialGraph};
pub use trace::{generate_trace, meetings_to_csv, GeneratedTrace, PositionTrace, Segment, MEETINGS_HEADER, TRACE_HEADER};
pub use schedule::GroupSchedule;

use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, Error, Result};

pub const HOUR: f64 = 3600.0;
pub const DAY: f64 = 86_400.0;

/// One regularity class: groups with this period meet at multiples of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityClass {
    pub period: f64,
    pub fraction: f64,
}

/// Gaussian random partition parameters for the social layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SocialParams {
    pub mean_cluster_size: f64,
    /// Cluster sizes are drawn from N(mean, mean / shape).
    pub size_shape: f64,
    pub p_in: f64,
    pub p_out: f64,
}

impl Default for SocialParams {
    fn default() -> Self {
        Self {
            mean_cluster_size: 10.0,
            size_shape: 5.0,
            p_in: 0.25,
            p_out: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttendanceParams {
    pub p_base: f64,
    pub p_social: f64,
}

impl Default for AttendanceParams {
    fn default() -> Self {
        Self {
            p_base: 0.5,
            p_social: 0.4,
        }
    }
}

/// Generator configuration. Defaults reproduce the reference 100-node,
/// 500-group, 87-day scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub n_nodes: usize,
    pub n_groups: usize,
    /// Seconds.
    pub sim_duration: f64,
    pub k_mix: Vec<RegularityClass>,
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Side length of a square cell, meters.
    pub cell_side: f64,
    pub alpha_gmt: f64,
    /// Exponential cutoff of the inter-meeting time law, seconds.
    pub beta_gmt: f64,
    /// Lower bound of the inter-meeting time law, seconds.
    pub gmt_min: f64,
    pub alpha_dur: f64,
    pub beta_dur: f64,
    pub dur_min: f64,
    pub alpha_size: f64,
    /// Maximum group size.
    pub beta_size: usize,
    pub social: SocialParams,
    pub attendance: AttendanceParams,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            n_nodes: 100,
            n_groups: 500,
            sim_duration: 87.0 * DAY,
            k_mix: vec![
                RegularityClass {
                    period: DAY,
                    fraction: 0.70,
                },
                RegularityClass {
                    period: 7.0 * DAY,
                    fraction: 0.15,
                },
                RegularityClass {
                    period: 6.0 * HOUR,
                    fraction: 0.15,
                },
            ],
            grid_rows: 30,
            grid_cols: 30,
            cell_side: 50.0,
            alpha_gmt: 3.0,
            beta_gmt: 30.0 * DAY,
            gmt_min: HOUR,
            alpha_dur: 3.0,
            beta_dur: 30.0 * DAY,
            dur_min: HOUR,
            alpha_size: 2.24,
            beta_size: 30,
            social: SocialParams::default(),
            attendance: AttendanceParams::default(),
            seed: 0,
        }
    }
}

impl TraceConfig {
    /// Grid extent in meters as (width, height).
    pub fn extent(&self) -> (f64, f64) {
        (
            self.grid_cols as f64 * self.cell_side,
            self.grid_rows as f64 * self.cell_side,
        )
    }

    /// Collects every violated invariant, prefixing field names with `prefix`.
    pub fn diagnostics(&self, prefix: &str) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &str, msg: &str| {
            if !ok {
                out.push(Diagnostic::new(format!("{prefix}{field}"), msg));
            }
        };
        check(self.n_nodes > 0, "n_nodes", "n_nodes must be > 0");
        check(self.n_groups > 0, "n_groups", "n_groups must be > 0");
        check(
            self.sim_duration.is_finite() && self.sim_duration > 0.0,
            "sim_duration",
            "sim_duration must be > 0",
        );
        check(self.grid_rows > 0, "grid_rows", "grid_rows must be > 0");
        check(self.grid_cols > 0, "grid_cols", "grid_cols must be > 0");
        check(self.cell_side > 0.0, "cell_side", "cell_side must be > 0");
        check(!self.k_mix.is_empty(), "k_mix", "k_mix must not be empty");
        let total: f64 = self.k_mix.iter().map(|k| k.fraction).sum();
        check(
            (total - 1.0).abs() <= 1e-9,
            "k_mix",
            &format!("k_mix fractions must sum to 1 (got {total})"),
        );
        for (i, k) in self.k_mix.iter().enumerate() {
            check(
                k.period > 0.0,
                &format!("k_mix[{i}].period"),
                "period must be > 0",
            );
            check(
                (0.0..=1.0).contains(&k.fraction),
                &format!("k_mix[{i}].fraction"),
                "fraction must be in [0, 1]",
            );
        }
        check(self.alpha_gmt > 1.0, "alpha_gmt", "alpha_gmt must be > 1");
        check(self.beta_gmt > 0.0, "beta_gmt", "beta_gmt must be > 0");
        check(self.gmt_min > 0.0, "gmt_min", "gmt_min must be > 0");
        check(self.alpha_dur > 1.0, "alpha_dur", "alpha_dur must be > 1");
        check(self.beta_dur > 0.0, "beta_dur", "beta_dur must be > 0");
        check(self.dur_min > 0.0, "dur_min", "dur_min must be > 0");
        check(self.alpha_size > 1.0, "alpha_size", "alpha_size must be > 1");
        check(self.beta_size >= 2, "beta_size", "beta_size must be >= 2");
        let s = &self.social;
        check(
            s.mean_cluster_size > 0.0,
            "social.mean_cluster_size",
            "mean_cluster_size must be > 0",
        );
        check(s.size_shape > 0.0, "social.size_shape", "size_shape must be > 0");
        check(
            (0.0..=1.0).contains(&s.p_in),
            "social.p_in",
            "p_in must be in [0, 1]",
        );
        check(
            (0.0..=1.0).contains(&s.p_out),
            "social.p_out",
            "p_out must be in [0, 1]",
        );
        let a = &self.attendance;
        check(
            (0.0..=1.0).contains(&a.p_base),
            "attendance.p_base",
            "p_base must be in [0, 1]",
        );
        check(
            (0.0..=1.0).contains(&a.p_social),
            "attendance.p_social",
            "p_social must be in [0, 1]",
        );
        out
    }

    pub fn validate(&self) -> Result<()> {
        let diags = self.diagnostics("");
        if diags.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(diags))
        }
    }
}

/// A scheduled group meeting. Times are seconds from the start of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct MeetingEvent {
    pub group_id: usize,
    pub venue: (usize, usize),
    pub t_start: f64,
    pub t_end: f64,
    pub attendees: Vec<usize>,
}

/// Rounds to the millisecond so values survive a 3-decimal CSV round trip.
pub(crate) fn quantize(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert!(TraceConfig::default().validate().is_ok());
    }

    #[test]
    fn k_mix_sum_is_reported() {
        let mut cfg = TraceConfig::default();
        cfg.k_mix[0].fraction = 0.6;
        let diags = cfg.diagnostics("trace.");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].location, "trace.k_mix");
    }

    #[test]
    fn reports_all_violations_at_once() {
        let cfg = TraceConfig {
            n_nodes: 0,
            alpha_gmt: 1.0,
            beta_size: 1,
            ..TraceConfig::default()
        };
        assert_eq!(cfg.diagnostics("").len(), 3);
    }
}
