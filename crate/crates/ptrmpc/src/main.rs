use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ptrmpc::bench::{self, CASES};
use ptrmpc::formats::{self, CsvRow, StatsJson};
use ptrmpc::runner::{self, RunConfig, RunnerError, TransportKind};
use ptrmpc_core::harness::PartyConfig;
use ptrmpc_core::lang::{self, CompileError, Options};

const EXIT_USAGE: u8 = 1;
const EXIT_REJECTED: u8 = 2;
const EXIT_ABORT: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "ptrmpc",
    version,
    about = "Check, run, and benchmark programs over secret-shared data"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Parse and statically check a program.
    Check {
        program: PathBuf,
        #[command(flatten)]
        lang: LangArgs,
    },
    /// Execute a program and write its outputs and stats.
    Run {
        program: PathBuf,
        #[command(flatten)]
        lang: LangArgs,
        #[command(flatten)]
        parties: PartyArgs,
        /// Input values, one `name=v1,v2` line per variable.
        #[arg(short, long)]
        input: Option<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Stats JSON file; stderr when omitted.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Evaluate on clear values instead of shares.
        #[arg(long)]
        plain: bool,
        /// Override a public global integer, as `name=value`.
        #[arg(short = 'D', long = "define", value_parser = parse_define)]
        defines: Vec<(String, i128)>,
    },
    /// Run benchmark cases and print CSV.
    Bench {
        /// Case ids; all cases when empty.
        cases: Vec<String>,
        /// Comma-separated sizes; each case's default grid when omitted.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<u64>,
        #[command(flatten)]
        parties: PartyArgs,
        /// CSV file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// List case ids and exit.
        #[arg(long)]
        list: bool,
    },
}

#[derive(Args, Debug)]
struct LangArgs {
    /// Accept pointer arithmetic.
    #[arg(long)]
    ptr_arith: bool,
    /// Abort on null dereference instead of reading zero.
    #[arg(long)]
    strict_null: bool,
}

#[derive(Args, Debug)]
struct PartyArgs {
    /// Number of computational parties.
    #[arg(short = 'n', long, default_value_t = 3)]
    parties: usize,
    /// Corruption threshold; must satisfy t < n/2.
    #[arg(short = 't', long, default_value_t = 1)]
    threshold: usize,
    /// Statistical security parameter.
    #[arg(long, default_value_t = 48)]
    kappa: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Transport between parties: inproc or tcp.
    #[arg(long, default_value = "inproc")]
    transport: TransportKind,
}

impl PartyArgs {
    fn config(&self) -> Result<RunConfig, String> {
        if self.parties < 2 || 2 * self.threshold >= self.parties {
            return Err(format!(
                "need at least 2 parties and t < n/2 (got n={}, t={})",
                self.parties, self.threshold
            ));
        }
        Ok(RunConfig {
            parties: PartyConfig {
                n: self.parties,
                t: self.threshold,
                seed: self.seed,
                kappa: self.kappa,
            },
            transport: self.transport,
        })
    }
}

fn parse_define(s: &str) -> Result<(String, i128), String> {
    let (k, v) = s.split_once('=').ok_or("expected name=value")?;
    let v = v.trim().parse().map_err(|_| format!("bad value '{v}'"))?;
    Ok((k.trim().to_string(), v))
}

/// Failure carrying its exit code.
struct Fail(u8, String);

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| Fail(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn from_runner(e: RunnerError) -> Fail {
    let code = match &e {
        RunnerError::Compile(_) => EXIT_REJECTED,
        RunnerError::Run(lang::RunError::Input(_))
        | RunnerError::Config(_)
        | RunnerError::Io(_) => EXIT_USAGE,
        RunnerError::Run(_) | RunnerError::Engine(_) => EXIT_ABORT,
    };
    Fail(code, e.to_string())
}

fn options(l: &LangArgs) -> Options {
    Options {
        ptr_arith: l.ptr_arith,
        strict_null: l.strict_null,
        ..Options::default()
    }
}

fn compile(path: &Path, opts: &Options) -> Result<lang::Program, Fail> {
    let src = read(path)?;
    lang::compile(&src, opts)
        .map_err(|e: CompileError| Fail(EXIT_REJECTED, format!("{}: {e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str, to_stderr: bool) -> Result<(), Fail> {
    match path {
        Some(p) => {
            fs::write(p, text).map_err(|e| Fail(EXIT_USAGE, format!("{}: {e}", p.display())))
        }
        None if to_stderr => {
            eprint!("{text}");
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<(), Fail> {
    match cli.cmd {
        Cmd::Check { program, lang } => {
            compile(&program, &options(&lang))?;
            println!("{}: ok", program.display());
            Ok(())
        }
        Cmd::Run {
            program,
            lang,
            parties,
            input,
            output,
            stats,
            plain,
            defines,
        } => {
            let cfg = parties.config().map_err(|m| Fail(EXIT_USAGE, m))?;
            let mut opts = options(&lang);
            opts.defines.extend(defines);
            let prog = compile(&program, &opts)?;
            let inputs = match &input {
                Some(p) => formats::parse_values(&read(p)?)
                    .map_err(|e| Fail(EXIT_USAGE, format!("{}: {e}", p.display())))?,
                None => lang::Inputs::new(),
            };
            let (out, json) = if plain {
                let out = runner::run_plain(&prog, &opts, &inputs, cfg.parties.kappa)
                    .map_err(from_runner)?;
                let json = StatsJson::plain(&out, &lang::field_params(&prog, cfg.parties.kappa));
                (out, json)
            } else {
                let r = runner::run_mpc(&prog, &opts, &inputs, &cfg).map_err(from_runner)?;
                log::info!("wall time {} ms", r.stats.wall_ms);
                let json =
                    StatsJson::mpc(&r.output, &r.stats, &r.field, cfg.parties.n, cfg.parties.t);
                (r.output, json)
            };
            emit(output.as_deref(), &formats::format_outputs(&out), false)?;
            let mut text =
                serde_json::to_string_pretty(&json).map_err(|e| Fail(EXIT_USAGE, e.to_string()))?;
            text.push('\n');
            emit(stats.as_deref(), &text, true)
        }
        Cmd::Bench {
            cases,
            sizes,
            parties,
            output,
            list,
        } => {
            if list {
                for c in CASES {
                    println!("{}", c.id);
                }
                return Ok(());
            }
            let cfg = parties.config().map_err(|m| Fail(EXIT_USAGE, m))?;
            let selected: Vec<&bench::Case> = if cases.is_empty() {
                CASES.iter().collect()
            } else {
                cases
                    .iter()
                    .map(|id| {
                        bench::find(id)
                            .ok_or_else(|| Fail(EXIT_USAGE, format!("unknown case '{id}'")))
                    })
                    .collect::<Result<_, _>>()?
            };
            let mut rows: Vec<CsvRow> = Vec::new();
            for c in selected {
                let grid = if sizes.is_empty() {
                    c.growth.sizes()
                } else {
                    sizes.clone()
                };
                for size in grid {
                    log::info!("bench {} size {size}", c.id);
                    let m = c
                        .measure(size, cfg.parties.seed, &cfg)
                        .map_err(from_runner)?;
                    if !m.outputs_match() {
                        return Err(Fail(
                            EXIT_ABORT,
                            format!("{} at size {size}: secure and clear outputs differ", c.id),
                        ));
                    }
                    rows.extend(m.rows());
                }
            }
            emit(output.as_deref(), &formats::write_csv(&rows), false)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
