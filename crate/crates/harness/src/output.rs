//! File formats: result and trace CSVs, policy and distribution JSON, atomic writes.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use eve_core::eve::PpiRecord;
use eve_core::{Policy, TabularMDP};
use serde::{Deserialize, Serialize};

use crate::run::ResultRow;
use crate::HarnessError;

pub const RESULTS_HEADER: &str = "method,seed,iteration,entropy_nats,residual,lambda,theta_star";

pub const TRACE_HEADER: &str =
    "t,beta,lambda,theta_star,ratio_spread,entropy_uv,entropy_stationary,\
entropy_rate,residual,inner_iters,inner_converged,cumulative_steps,uv_l1_gap,fixed_point_shift";

/// Seventeen significant digits, so values round-trip exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(&r.method),
            r.seed,
            r.iteration,
            format_float(r.entropy_nats),
            format_float(r.residual),
            opt(r.lambda),
            opt(r.theta_star),
        );
    }
    out
}

pub fn trace_csv(records: &[PpiRecord]) -> String {
    let mut out = String::new();
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            format_float(r.beta),
            format_float(r.lambda),
            format_float(r.theta_star),
            format_float(r.ratio_spread),
            format_float(r.entropy_uv),
            format_float(r.entropy_stationary),
            format_float(r.entropy_rate),
            format_float(r.residual),
            r.inner_iters,
            r.inner_converged,
            r.cumulative_steps,
            format_float(r.uv_l1_gap),
            format_float(r.fixed_point_shift),
        );
    }
    out
}

/// Row-major policy table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolicyFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub probs: Vec<f64>,
}

impl PolicyFile {
    pub fn from_policy(p: &Policy) -> Self {
        PolicyFile {
            n_states: p.n_states(),
            n_actions: p.n_actions(),
            probs: p.as_slice().to_vec(),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PolicyInput {
    Table(PolicyFile),
    Flat(Vec<f64>),
}

/// Reads a policy either as a [`PolicyFile`] object or as a bare row-major array.
pub fn load_policy(path: &Path, mdp: &TabularMDP) -> Result<Policy, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let input: PolicyInput =
        serde_json::from_str(&text).map_err(|e| HarnessError::json(path, e))?;
    let (s, a, probs) = match input {
        PolicyInput::Table(f) => (f.n_states, f.n_actions, f.probs),
        PolicyInput::Flat(p) => (mdp.n_states(), mdp.n_actions(), p),
    };
    if s != mdp.n_states() || a != mdp.n_actions() {
        return Err(HarnessError::config(
            "policy",
            format!(
                "shape {s}x{a} does not match environment {}x{}",
                mdp.n_states(),
                mdp.n_actions()
            ),
        ));
    }
    Ok(Policy::new(s, a, probs)?)
}

#[derive(Serialize)]
struct DistributionFile<'a> {
    n_states: usize,
    n_actions: usize,
    probs: &'a [f64],
}

pub fn distribution_json(n_states: usize, n_actions: usize, probs: &[f64]) -> String {
    let mut s = serde_json::to_string_pretty(&DistributionFile {
        n_states,
        n_actions,
        probs,
    })
    .expect("plain data serializes");
    s.push('\n');
    s
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// Writes through a temporary file in the target directory, then renames.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| HarnessError::io(dir, e))?;
    tmp.write_all(contents)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| HarnessError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| HarnessError::io(path, e.error))?;
    Ok(())
}
