//! Input, output, stats, and CSV file formats.
//!
//! Input and output files hold one `name=v1,v2,...` line per variable with
//! signed decimal values. Blank lines and lines starting with `#` are
//! skipped on input.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use ptrmpc_core::field::FieldParams;
use ptrmpc_core::harness::RoundStats;
use ptrmpc_core::lang::{Inputs, RunOutput};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct FormatError {
    pub line: usize,
    pub msg: String,
}

pub fn parse_values(text: &str) -> Result<Inputs, FormatError> {
    let mut out = Inputs::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| FormatError { line: i + 1, msg };
        let (name, vals) = line
            .split_once('=')
            .ok_or_else(|| err("expected name=v1,v2,...".into()))?;
        let name = name.trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(err(format!("bad variable name '{name}'")));
        }
        let vals = vals.trim();
        let parsed = if vals.is_empty() {
            Vec::new()
        } else {
            vals.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<i128>()
                        .map_err(|_| err(format!("bad value '{}'", v.trim())))
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        if out.insert(name.to_string(), parsed).is_some() {
            return Err(err(format!("'{name}' given twice")));
        }
    }
    Ok(out)
}

pub fn format_outputs(out: &RunOutput) -> String {
    let mut s = String::new();
    for (name, vals) in &out.outputs {
        let vs: Vec<String> = vals.iter().map(i128::to_string).collect();
        let _ = writeln!(s, "{name}={}", vs.join(","));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseJson {
    pub id: i64,
    pub interactive_ops: u64,
    pub rounds: u64,
    pub bytes: u64,
}

/// Stats file written by `run`. Wall time is left out so that runs with
/// the same seed produce identical files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsJson {
    pub mode: String,
    pub parties: usize,
    pub threshold: usize,
    pub kappa: u32,
    pub field_bits: u32,
    pub prime: String,
    pub interactive_ops: u64,
    pub rounds: u64,
    pub bytes_per_party: Vec<u64>,
    pub bytes_total: u64,
    pub dealer_bits: u64,
    pub diagnostics: u64,
    pub branch_bodies: u64,
    pub phases: Vec<PhaseJson>,
}

impl StatsJson {
    pub fn mpc(
        out: &RunOutput,
        stats: &RoundStats,
        field: &FieldParams,
        n: usize,
        t: usize,
    ) -> Self {
        StatsJson {
            mode: "mpc".into(),
            parties: n,
            threshold: t,
            kappa: field.kappa,
            field_bits: field.field_bitlen,
            prime: field.prime.to_string(),
            interactive_ops: stats.interactive_ops,
            rounds: stats.rounds,
            bytes_per_party: stats.bytes_per_party.clone(),
            bytes_total: stats.total_bytes(),
            dealer_bits: stats.dealer_bits,
            diagnostics: stats.diagnostics,
            branch_bodies: out.branch_bodies,
            phases: phases(out),
        }
    }

    pub fn plain(out: &RunOutput, field: &FieldParams) -> Self {
        StatsJson {
            mode: "plain".into(),
            parties: 0,
            threshold: 0,
            kappa: field.kappa,
            field_bits: field.field_bitlen,
            prime: field.prime.to_string(),
            interactive_ops: 0,
            rounds: 0,
            bytes_per_party: Vec::new(),
            bytes_total: 0,
            dealer_bits: 0,
            diagnostics: out.diagnostics,
            branch_bodies: out.branch_bodies,
            phases: phases(out),
        }
    }
}

fn phases(out: &RunOutput) -> Vec<PhaseJson> {
    out.phases
        .iter()
        .map(|p| PhaseJson {
            id: p.id as i64,
            interactive_ops: p.interactive_ops,
            rounds: p.rounds,
            bytes: p.bytes,
        })
        .collect()
}

pub const CSV_HEADER: &str = "case,size,interactive_ops,rounds,bytes,wall_ms";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvRow {
    pub case: String,
    pub size: u64,
    pub interactive_ops: u64,
    pub rounds: u64,
    pub bytes: u64,
    pub wall_ms: u64,
}

impl CsvRow {
    pub fn line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.case, self.size, self.interactive_ops, self.rounds, self.bytes, self.wall_ms
        )
    }
}

pub fn write_csv(rows: &[CsvRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.line());
        s.push('\n');
    }
    s
}
