use std::fmt::Write as _;

use rand::Rng;

use super::{assign_attendees, build_social_graph, draw_rosters, quantize, schedule_meetings, MeetingEvent, SocialGraph, TraceConfig};
use crate::error::{Diagnostic, Error, Result};
use crate::rng::{substream, TAG_ATTEND, TAG_HOME, TAG_JITTER, TAG_ROSTER, TAG_SCHEDULE, TAG_SOCIAL};

/// A node stays at `(x, y)` during `[t_start, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub x: f64,
    pub y: f64,
}

/// Piecewise-constant positions. Every node's segments tile `[0, sim_duration]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionTrace {
    pub sim_duration: f64,
    pub nodes: Vec<Vec<Segment>>,
}

pub const TRACE_HEADER: &str = "node_id,t_start_s,t_end_s,x_m,y_m";
pub const MEETINGS_HEADER: &str = "group_id,t_start_s,t_end_s,cell_row,cell_col,attendees";

impl PositionTrace {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Checks tiling and, when `bounds` is given, that positions lie inside
    /// `[0, w] x [0, h]`.
    pub fn diagnostics(&self, bounds: Option<(f64, f64)>) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (node, segs) in self.nodes.iter().enumerate() {
            let loc = format!("node {node}");
            let Some(first) = segs.first() else {
                out.push(Diagnostic::new(loc, "no segments"));
                continue;
            };
            if first.t_start != 0.0 {
                out.push(Diagnostic::new(&loc, format!("starts at {} instead of 0", first.t_start)));
            }
            let last = segs.last().unwrap();
            if last.t_end != self.sim_duration {
                out.push(Diagnostic::new(
                    &loc,
                    format!("ends at {} instead of {}", last.t_end, self.sim_duration),
                ));
            }
            for (i, s) in segs.iter().enumerate() {
                if !(s.t_start < s.t_end) {
                    out.push(Diagnostic::new(&loc, format!("segment {i} has t_start >= t_end")));
                }
                if i > 0 && segs[i - 1].t_end != s.t_start {
                    out.push(Diagnostic::new(&loc, format!("segment {i} is not contiguous with its predecessor")));
                }
                if !(s.x.is_finite() && s.y.is_finite()) {
                    out.push(Diagnostic::new(&loc, format!("segment {i} has a non-finite position")));
                } else if let Some((w, h)) = bounds {
                    if s.x < 0.0 || s.x > w || s.y < 0.0 || s.y > h {
                        out.push(Diagnostic::new(&loc, format!("segment {i} lies outside the grid")));
                    }
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * self.nodes.iter().map(Vec::len).sum::<usize>());
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for (node, segs) in self.nodes.iter().enumerate() {
            for s in segs {
                let _ = writeln!(out, "{node},{:.3},{:.3},{:.3},{:.3}", s.t_start, s.t_end, s.x, s.y);
            }
        }
        out
    }

    /// Parses a trace CSV. Node ids must form `0..n`; rows may come in any
    /// order and are sorted per node by start time.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == TRACE_HEADER => {}
            Some((_, h)) => {
                return Err(Error::Validation(vec![Diagnostic::new(
                    "row 1",
                    format!("expected header `{TRACE_HEADER}`, found `{h}`"),
                )]))
            }
            None => return Err(Error::EmptyTrace),
        }
        let mut diags = Vec::new();
        let mut nodes: Vec<Vec<Segment>> = Vec::new();
        for (i, line) in lines {
            let row = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                diags.push(Diagnostic::new(format!("row {row}"), format!("expected 5 fields, found {}", fields.len())));
                continue;
            }
            let node = fields[0].parse::<usize>();
            let nums: Vec<Option<f64>> = fields[1..].iter().map(|f| f.parse::<f64>().ok()).collect();
            match (node, nums.as_slice()) {
                (Ok(node), [Some(t0), Some(t1), Some(x), Some(y)]) => {
                    if node >= nodes.len() {
                        nodes.resize(node + 1, Vec::new());
                    }
                    nodes[node].push(Segment {
                        t_start: *t0,
                        t_end: *t1,
                        x: *x,
                        y: *y,
                    });
                }
                _ => diags.push(Diagnostic::new(format!("row {row}"), "unparseable field")),
            }
        }
        if !diags.is_empty() {
            return Err(Error::Validation(diags));
        }
        if nodes.is_empty() {
            return Err(Error::EmptyTrace);
        }
        for segs in &mut nodes {
            segs.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
        }
        let sim_duration = nodes
            .iter()
            .filter_map(|s| s.last())
            .map(|s| s.t_end)
            .fold(0.0, f64::max);
        let trace = PositionTrace { sim_duration, nodes };
        let diags = trace.diagnostics(None);
        if diags.is_empty() {
            Ok(trace)
        } else {
            Err(Error::Validation(diags))
        }
    }
}

pub fn meetings_to_csv(meetings: &[MeetingEvent]) -> String {
    let mut out = String::from(MEETINGS_HEADER);
    out.push('\n');
    for m in meetings {
        let attendees: Vec<String> = m.attendees.iter().map(usize::to_string).collect();
        let _ = writeln!(
            out,
            "{},{:.3},{:.3},{},{},{}",
            m.group_id,
            m.t_start,
            m.t_end,
            m.venue.0,
            m.venue.1,
            attendees.join(";")
        );
    }
    out
}

/// Everything the generator produced, including the hidden social structure.
#[derive(Debug, Clone)]
pub struct GeneratedTrace {
    pub trace: PositionTrace,
    pub meetings: Vec<MeetingEvent>,
    pub social: SocialGraph,
    pub rosters: Vec<Vec<usize>>,
    pub homes: Vec<(usize, usize)>,
}

/// Runs the generator end to end.
///
/// Nodes sit at the center of their home cell unless attending a meeting, in
/// which case they stand at a uniform point of the venue cell. When a node's
/// meetings overlap, the one starting first wins and the others are skipped.
pub fn generate_trace(config: &TraceConfig) -> Result<GeneratedTrace> {
    config.validate()?;
    let seed = config.seed;
    let social = if config.n_nodes >= 2 {
        build_social_graph(config.n_nodes, &config.social, &mut substream(seed, &[TAG_SOCIAL]))?
    } else {
        SocialGraph {
            adjacency: vec![Vec::new(); config.n_nodes],
            clusters: vec![(0..config.n_nodes).collect()],
        }
    };
    let rosters = draw_rosters(config, &mut substream(seed, &[TAG_ROSTER]))?;
    let mut home_rng = substream(seed, &[TAG_HOME]);
    let homes: Vec<(usize, usize)> = (0..config.n_nodes)
        .map(|_| {
            (
                home_rng.random_range(0..config.grid_rows),
                home_rng.random_range(0..config.grid_cols),
            )
        })
        .collect();
    let plan = schedule_meetings(config, &mut substream(seed, &[TAG_SCHEDULE]))?;

    let mut attend_rng = substream(seed, &[TAG_ATTEND]);
    let mut meetings = Vec::new();
    for group in &plan {
        let roster = &rosters[group.group_id];
        for m in &group.meetings {
            meetings.push(assign_attendees(m, roster, &social, &config.attendance, &mut attend_rng));
        }
    }

    // Per-node agenda of attended meetings, in start order.
    let mut agenda: Vec<Vec<usize>> = vec![Vec::new(); config.n_nodes];
    for (idx, m) in meetings.iter().enumerate() {
        for &a in &m.attendees {
            agenda[a].push(idx);
        }
    }
    let side = config.cell_side;
    let center = |(r, c): (usize, usize)| (quantize((c as f64 + 0.5) * side), quantize((r as f64 + 0.5) * side));

    let nodes = agenda
        .into_iter()
        .enumerate()
        .map(|(node, mut events)| {
            events.sort_by(|&a, &b| {
                meetings[a]
                    .t_start
                    .total_cmp(&meetings[b].t_start)
                    .then(meetings[a].group_id.cmp(&meetings[b].group_id))
            });
            let mut jitter = substream(seed, &[TAG_JITTER, node as u64]);
            let (hx, hy) = center(homes[node]);
            let mut segs = Vec::new();
            let mut t = 0.0;
            for idx in events {
                let m = &meetings[idx];
                if m.t_start < t {
                    continue;
                }
                if m.t_start > t {
                    segs.push(Segment {
                        t_start: t,
                        t_end: m.t_start,
                        x: hx,
                        y: hy,
                    });
                }
                let (row, col) = m.venue;
                segs.push(Segment {
                    t_start: m.t_start,
                    t_end: m.t_end,
                    x: quantize((col as f64 + jitter.random::<f64>()) * side),
                    y: quantize((row as f64 + jitter.random::<f64>()) * side),
                });
                t = m.t_end;
            }
            if t < config.sim_duration {
                segs.push(Segment {
                    t_start: t,
                    t_end: config.sim_duration,
                    x: hx,
                    y: hy,
                });
            }
            segs
        })
        .collect();

    Ok(GeneratedTrace {
        trace: PositionTrace {
            sim_duration: config.sim_duration,
            nodes,
        },
        meetings,
        social,
        rosters,
        homes,
    })
}
