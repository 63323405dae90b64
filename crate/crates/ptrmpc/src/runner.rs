//! Compiles and executes programs in either mode.

use std::time::Instant;

use ptrmpc_core::field::{Field, FieldParams};
use ptrmpc_core::harness::InProcess;
use ptrmpc_core::harness::{Engine, EngineError, PartyConfig, RoundStats, Transport};
use ptrmpc_core::lang::{self, CompileError, Inputs, Options, Program, RunError, RunOutput};

use crate::tcp::TcpMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransportKind {
    #[default]
    InProc,
    Tcp,
}

impl std::str::FromStr for TransportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "inproc" => Ok(TransportKind::InProc),
            "tcp" => Ok(TransportKind::Tcp),
            _ => Err(format!("unknown transport '{s}' (expected inproc or tcp)")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub parties: PartyConfig,
    pub transport: TransportKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            parties: PartyConfig::default(),
            transport: TransportKind::InProc,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("{0}")]
    Compile(CompileError),
    #[error("invalid party configuration: {0}")]
    Config(String),
    #[error("engine: {0}")]
    Engine(EngineError),
    #[error("transport setup: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Run(RunError),
}

/// Outputs and counters of one secure run.
#[derive(Debug, Clone)]
pub struct Report {
    pub output: RunOutput,
    pub stats: RoundStats,
    pub field: FieldParams,
}

pub fn compile(src: &str, opts: &Options) -> Result<Program, RunnerError> {
    lang::compile(src, opts).map_err(RunnerError::Compile)
}

fn transport(kind: TransportKind, n: usize) -> Result<Box<dyn Transport>, RunnerError> {
    Ok(match kind {
        TransportKind::InProc => Box::new(InProcess::default()),
        TransportKind::Tcp => Box::new(TcpMesh::loopback(n)?),
    })
}

/// Runs `prog` over secret shares.
pub fn run_mpc(
    prog: &Program,
    opts: &Options,
    inputs: &Inputs,
    cfg: &RunConfig,
) -> Result<Report, RunnerError> {
    let p = cfg.parties;
    if p.n < 2 || 2 * p.t >= p.n {
        return Err(RunnerError::Config(format!(
            "need n >= 2 and t < n/2, got n={} t={}",
            p.n, p.t
        )));
    }
    let params = lang::field_params(prog, p.kappa);
    let field = Field::new(params).map_err(|e| RunnerError::Config(e.to_string()))?;
    let mut eng =
        Engine::new(field, p, transport(cfg.transport, p.n)?).map_err(RunnerError::Engine)?;
    let start = Instant::now();
    let output = lang::run_mpc(prog, &mut eng, opts, inputs).map_err(RunnerError::Run)?;
    let mut stats = eng.stats().clone();
    stats.wall_ms = start.elapsed().as_millis() as u64;
    log::debug!(
        "run finished: {} ops, {} rounds",
        stats.interactive_ops,
        stats.rounds
    );
    Ok(Report {
        output,
        stats,
        field: params,
    })
}

/// Runs `prog` on clear values in the field the secure run would use.
pub fn run_plain(
    prog: &Program,
    opts: &Options,
    inputs: &Inputs,
    kappa: u32,
) -> Result<RunOutput, RunnerError> {
    let params = lang::field_params(prog, kappa);
    lang::run_plain(prog, &params, opts, inputs).map_err(RunnerError::Run)
}
