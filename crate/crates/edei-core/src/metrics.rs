//! Episode records, evaluation metrics, and CSV emission.
//!
//! An [`EpisodeRecord`] captures the counts one episode produced; the
//! metric functions are pure arithmetic over those counts so they can be
//! checked exactly. Division by a zero denominator is an error, never a
//! silent NaN.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{metric} needs a positive {denominator}")]
    ZeroDenominator { metric: &'static str, denominator: &'static str },
    #[error("cannot aggregate an empty record set")]
    Empty,
}

/// One step of an episode trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub t: u32,
    /// |V^f| after the step.
    pub incidents: usize,
    pub done: usize,
    pub failed: usize,
    pub w_succ: f64,
    pub w_is: f64,
    pub w_r: f64,
    pub reward: f64,
}

/// Everything a finished episode contributes to the metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u32,
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    /// Issued assignments n_O.
    pub n_assignments: usize,
    pub n_nodes: usize,
    pub t_max: u32,
    pub delta_t: u32,
    /// Flow line segments in the scenario.
    pub k_line: u32,
    /// Checked item count for the carry metric.
    pub n_checked: u32,
    pub n_agents: usize,
    /// Agents that switched from assignment duty to incident recovery.
    pub duty_switches: usize,
    pub completions: usize,
    /// Incident nodes summed over every executed step.
    pub incident_node_steps: u64,
    pub reward_sum: f64,
    /// Per-step rows; may be empty when traces are not collected.
    pub trace: Vec<TraceRow>,
}

/// Completion rate: completions over issued assignments.
pub fn rate_s(r: &EpisodeRecord) -> Result<f64, MetricsError> {
    if r.n_assignments == 0 {
        return Err(MetricsError::ZeroDenominator {
            metric: "rate_s",
            denominator: "assignment count",
        });
    }
    Ok(r.completions as f64 / r.n_assignments as f64)
}

/// Completion rate normalized by crew size plus duty switches.
pub fn rate_s_agent_normalized(r: &EpisodeRecord) -> Result<f64, MetricsError> {
    if r.n_assignments == 0 {
        return Err(MetricsError::ZeroDenominator {
            metric: "rate_s_paper",
            denominator: "assignment count",
        });
    }
    if r.n_agents + r.duty_switches == 0 {
        return Err(MetricsError::ZeroDenominator {
            metric: "rate_s_paper",
            denominator: "agent count",
        });
    }
    Ok(r.completions as f64 / (r.n_assignments * (r.n_agents + r.duty_switches)) as f64)
}

/// Damage rate: time-averaged incident fraction over the full window.
pub fn rate_f(r: &EpisodeRecord) -> Result<f64, MetricsError> {
    if r.n_nodes == 0 || r.t_max == 0 {
        return Err(MetricsError::ZeroDenominator {
            metric: "rate_f",
            denominator: "node-step count",
        });
    }
    Ok(r.incident_node_steps as f64 / (r.n_nodes as f64 * f64::from(r.t_max)))
}

/// Throughput: completions over line segments and the takt interval.
pub fn tp(r: &EpisodeRecord) -> Result<f64, MetricsError> {
    if r.delta_t == 0 {
        return Err(MetricsError::ZeroDenominator { metric: "tp", denominator: "takt interval" });
    }
    let segments = r.n_assignments as u64 + u64::from(r.k_line);
    if segments <= 1 {
        return Err(MetricsError::ZeroDenominator { metric: "tp", denominator: "segment count" });
    }
    Ok(r.completions as f64 / ((segments - 1) as f64 * f64::from(r.delta_t)))
}

/// Transport efficiency and carry rate.
pub fn te_it(r: &EpisodeRecord) -> Result<(f64, f64), MetricsError> {
    if r.n_assignments == 0 || r.n_agents + r.duty_switches == 0 {
        return Err(MetricsError::ZeroDenominator { metric: "te", denominator: "crew-assignment product" });
    }
    if r.n_checked == 0 {
        return Err(MetricsError::ZeroDenominator { metric: "it", denominator: "checked count" });
    }
    let te = r.completions as f64 / (r.n_assignments * (r.n_agents + r.duty_switches) * 2) as f64;
    let it = r.completions as f64 / (f64::from(r.n_checked) * 2.0);
    Ok((te, it))
}

/// All per-episode metrics, ready for one CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub episode: u32,
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub rate_s: f64,
    pub rate_s_paper: f64,
    pub rate_f: f64,
    pub tp: f64,
    pub te: f64,
    pub it: f64,
    pub reward: f64,
}

impl MetricsRow {
    pub fn from_record(r: &EpisodeRecord) -> Result<Self, MetricsError> {
        let (te, it) = te_it(r)?;
        Ok(MetricsRow {
            episode: r.episode,
            scenario: r.scenario.clone(),
            policy: r.policy.clone(),
            seed: r.seed,
            rate_s: rate_s(r)?,
            rate_s_paper: rate_s_agent_normalized(r)?,
            rate_f: rate_f(r)?,
            tp: tp(r)?,
            te,
            it,
            reward: r.reward_sum,
        })
    }
}

pub const CSV_HEADER: &str = "episode,scenario,policy,seed,rate_s,rate_s_paper,rate_f,tp,te,it,reward";

/// Renders one row per record under the fixed header. Floats print in
/// shortest round-trip form, so equal values yield byte-equal output.
pub fn to_csv(records: &[EpisodeRecord]) -> Result<String, MetricsError> {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let row = MetricsRow::from_record(r)?;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.episode,
            row.scenario,
            row.policy,
            row.seed,
            row.rate_s,
            row.rate_s_paper,
            row.rate_f,
            row.tp,
            row.te,
            row.it,
            row.reward
        )
        .expect("string writes cannot fail");
    }
    Ok(out)
}

pub const TRACE_CSV_HEADER: &str = "t,incidents,done,failed,w_succ,w_is,w_r,reward";

pub fn trace_csv(record: &EpisodeRecord) -> String {
    let mut out = String::new();
    out.push_str(TRACE_CSV_HEADER);
    out.push('\n');
    for row in &record.trace {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.t, row.incidents, row.done, row.failed, row.w_succ, row.w_is, row.w_r, row.reward
        )
        .expect("string writes cannot fail");
    }
    out
}

/// Mean metrics for one (scenario, policy) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub scenario: String,
    pub policy: String,
    pub episodes: usize,
    pub rate_s: f64,
    pub rate_s_paper: f64,
    pub rate_f: f64,
    pub tp: f64,
    pub te: f64,
    pub it: f64,
    pub reward: f64,
}

/// Per-cell arithmetic means, cells sorted by (scenario, policy).
pub fn aggregate(records: &[EpisodeRecord]) -> Result<Vec<Aggregate>, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut keys: Vec<(String, String)> = records
        .iter()
        .map(|r| (r.scenario.clone(), r.policy.clone()))
        .collect();
    keys.sort();
    keys.dedup();
    let mut cells = Vec::with_capacity(keys.len());
    for (scenario, policy) in keys {
        let rows: Vec<MetricsRow> = records
            .iter()
            .filter(|r| r.scenario == scenario && r.policy == policy)
            .map(MetricsRow::from_record)
            .collect::<Result<_, _>>()?;
        let n = rows.len() as f64;
        let mean = |f: fn(&MetricsRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        cells.push(Aggregate {
            scenario,
            policy,
            episodes: rows.len(),
            rate_s: mean(|r| r.rate_s),
            rate_s_paper: mean(|r| r.rate_s_paper),
            rate_f: mean(|r| r.rate_f),
            tp: mean(|r| r.tp),
            te: mean(|r| r.te),
            it: mean(|r| r.it),
            reward: mean(|r| r.reward),
        });
    }
    Ok(cells)
}
