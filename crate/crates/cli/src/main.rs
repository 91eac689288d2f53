use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use navigator::engine::ENGINE_CMD_ENV;
use navigator::pipeline::{
    cmd_bench, cmd_build_index, cmd_compare, cmd_explore, cmd_extract, cmd_prove, cmd_templatize,
    proof_block, EngineChoice, IndexSource, PipelineError, RunConfig,
};
use navigator::search::{SearchOutcome, TryMode};
use navigator::throughput::CompareConfig;

#[derive(Parser)]
#[command(name = "navigator", version, about = "Explore proof-state graphs and mine theorem datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn (state, tactic) pairs into a deduplicated template corpus.
    Templatize {
        /// JSONL of {"state": …, "tactic": …} records.
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        theory: Option<PathBuf>,
    },
    /// Embed a template corpus into a binary index.
    BuildIndex {
        #[arg(long)]
        templates: PathBuf,
        /// Optional JSONL of {"text": …, "vector": […]} records.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Explore each theorem's state graph; writes one graph file per theorem.
    Explore {
        #[arg(long)]
        theorems: PathBuf,
        /// Output directory for graph files.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Apply attempts per theorem.
        #[arg(long, default_value_t = 200_000)]
        max_transitions: u64,
        /// Wall-clock limit per theorem; 0 disables it.
        #[arg(long, default_value_t = 1800.0)]
        max_seconds: f64,
    },
    /// Build the theorem dataset from a directory of graph files.
    Extract {
        graph_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        max_depth: usize,
        #[arg(long)]
        theory: Option<PathBuf>,
    },
    /// Search for a proof of one theorem.
    Prove {
        #[arg(long)]
        theorem: String,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: SearchFlags,
    },
    /// Run proof search on every theorem in a file and report proved/total.
    Bench {
        #[arg(long)]
        theorems: PathBuf,
        /// Write per-theorem JSONL here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        search: SearchFlags,
    },
    /// Compare states reached by retrieval and a slow per-character baseline.
    Compare {
        #[arg(long)]
        theorems: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 120.0)]
        window_seconds: f64,
        #[arg(long, default_value_t = 20)]
        baseline_ms_per_char: u64,
        #[arg(long, default_value_t = 10.0)]
        min_ratio: f64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineFlag {
    Builtin,
    External,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeFlag {
    TenValid,
    TenAttempts,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    theory: Option<PathBuf>,
    /// Binary template index.
    #[arg(long, conflicts_with = "templates")]
    index: Option<PathBuf>,
    /// Template corpus, embedded on the fly instead of --index.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 200)]
    cap: usize,
    #[arg(long, value_enum)]
    engine: Option<EngineFlag>,
    /// External engine command (implies --engine external).
    #[arg(long)]
    engine_cmd: Option<String>,
    /// Per-request timeout for external engines, in seconds.
    #[arg(long, default_value_t = 10.0)]
    engine_timeout: f64,
}

#[derive(Args)]
struct SearchFlags {
    #[arg(long, default_value_t = 120.0)]
    budget_seconds: f64,
    #[arg(long, default_value_t = 10)]
    tries_per_state: usize,
    #[arg(long, value_enum, default_value_t = ModeFlag::TenValid)]
    mode: ModeFlag,
    /// Cap on apply attempts for reproducible runs.
    #[arg(long)]
    max_transitions: Option<u64>,
}

fn usage(msg: impl Into<String>) -> PipelineError {
    PipelineError::Usage(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64, PipelineError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(usage(format!("--{name} must be positive")))
    }
}

impl Common {
    fn config(&self) -> Result<RunConfig, PipelineError> {
        let engine = match (self.engine, &self.engine_cmd) {
            (Some(EngineFlag::Builtin), Some(_)) => {
                return Err(usage("--engine builtin conflicts with --engine-cmd"))
            }
            (Some(EngineFlag::Builtin), None) => EngineChoice::Builtin,
            (_, Some(cmd)) => EngineChoice::External(cmd.clone()),
            (Some(EngineFlag::External), None) => match std::env::var(ENGINE_CMD_ENV) {
                Ok(cmd) => EngineChoice::External(cmd),
                Err(_) => {
                    return Err(usage(format!(
                        "--engine external needs --engine-cmd or {ENGINE_CMD_ENV}"
                    )))
                }
            },
            (None, None) => EngineChoice::Builtin,
        };
        if self.k == 0 || self.cap == 0 {
            return Err(usage("--k and --cap must be positive"));
        }
        let mut config = RunConfig {
            theory: RunConfig::load_theory(self.theory.as_deref())?,
            engine,
            engine_timeout: Duration::from_secs_f64(positive("engine-timeout", self.engine_timeout)?),
            ..RunConfig::default()
        };
        if let Some(w) = self.workers {
            if w == 0 {
                return Err(usage("--workers must be at least 1"));
            }
            config.workers = w;
        }
        config.explore.k_neighbors = self.k;
        config.explore.instantiation_cap = self.cap;
        config.search.k_neighbors = self.k;
        config.search.instantiation_cap = self.cap;
        Ok(config)
    }

    fn index(&self) -> Result<IndexSource, PipelineError> {
        match (&self.index, &self.templates) {
            (Some(p), None) => Ok(IndexSource::File(p.clone())),
            (None, Some(p)) => Ok(IndexSource::Templates(p.clone())),
            _ => Err(usage("one of --index or --templates is required")),
        }
    }
}

impl SearchFlags {
    fn apply(&self, config: &mut RunConfig) -> Result<(), PipelineError> {
        config.search.max_seconds = Some(positive("budget-seconds", self.budget_seconds)?);
        if self.tries_per_state == 0 {
            return Err(usage("--tries-per-state must be at least 1"));
        }
        config.search.tries_per_state = self.tries_per_state;
        config.search.mode = match self.mode {
            ModeFlag::TenValid => TryMode::ValidStates,
            ModeFlag::TenAttempts => TryMode::Attempts,
        };
        config.search.max_transitions = self.max_transitions;
        Ok(())
    }
}

fn theory_of(path: &Option<PathBuf>) -> Result<std::sync::Arc<navigator::Theory>, PipelineError> {
    RunConfig::load_theory(path.as_deref())
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), PipelineError> {
    match out {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Templatize { corpus, out, theory } => {
            let s = cmd_templatize(&corpus, &out, theory_of(&theory)?.as_ref())?;
            println!("pairs: {}", s.pairs);
            println!("templates: {}", s.templates);
            println!("warnings: {}", s.warnings);
        }
        Command::BuildIndex {
            templates,
            embeddings,
            out,
        } => {
            let n = cmd_build_index(&templates, embeddings.as_deref(), &out)?;
            println!("indexed: {n}");
        }
        Command::Explore {
            theorems,
            out,
            common,
            max_transitions,
            max_seconds,
        } => {
            let mut config = common.config()?;
            config.explore.max_transitions = max_transitions;
            config.explore.max_seconds = if max_seconds == 0.0 {
                None
            } else {
                Some(positive("max-seconds", max_seconds)?)
            };
            let summary = cmd_explore(&config, &theorems, &common.index()?, &out)?;
            for r in &summary.runs {
                match &r.result {
                    Ok(s) => println!(
                        "{}: states {} attempted {} succeeded {} proof_finished {} seconds {:.3}",
                        r.name,
                        s.distinct_states,
                        s.transitions_attempted,
                        s.transitions_succeeded,
                        s.proof_finished_hits,
                        s.elapsed_seconds
                    ),
                    Err(e) => println!("{}: failed: {e}", r.name),
                }
            }
            println!("avg states per theorem: {:.2}", summary.avg_states());
            let failed = summary.failed();
            if failed > 0 {
                return Err(PipelineError::Partial {
                    failed,
                    total: summary.runs.len(),
                });
            }
        }
        Command::Extract {
            graph_dir,
            out,
            max_depth,
            theory,
        } => {
            let s = cmd_extract(&graph_dir, max_depth, &out, theory_of(&theory)?.as_ref())?;
            println!("graphs: {} (skipped {})", s.graphs, s.skipped);
            println!("records: {} (duplicates dropped {})", s.records, s.duplicates);
            if s.skipped > 0 {
                return Err(PipelineError::Partial {
                    failed: s.skipped,
                    total: s.graphs + s.skipped,
                });
            }
        }
        Command::Prove {
            theorem,
            common,
            search,
        } => {
            let mut config = common.config()?;
            search.apply(&mut config)?;
            let report = cmd_prove(&config, &theorem, &common.index()?)?;
            match report.outcome {
                SearchOutcome::Proved(p) => println!("{}", proof_block(&theorem, &p.tactics)),
                SearchOutcome::Failed(reason) => {
                    println!("failed: {reason}");
                    return Err(PipelineError::Partial { failed: 1, total: 1 });
                }
            }
        }
        Command::Bench {
            theorems,
            out,
            common,
            search,
        } => {
            let mut config = common.config()?;
            search.apply(&mut config)?;
            let report = cmd_bench(&config, &theorems, &common.index()?)?;
            write_or_print(out.as_deref(), &report.to_jsonl())?;
            println!("{}", report.summary());
        }
        Command::Compare {
            theorems,
            common,
            window_seconds,
            baseline_ms_per_char,
            min_ratio,
        } => {
            let config = common.config()?;
            let cc = CompareConfig {
                window_seconds: positive("window-seconds", window_seconds)?,
                baseline_delay: Duration::from_millis(baseline_ms_per_char),
                k_neighbors: config.explore.k_neighbors,
                instantiation_cap: config.explore.instantiation_cap,
            };
            let table = cmd_compare(&config, &theorems, &common.index()?, &cc)?;
            print!("{}", table.to_jsonl());
            println!("ratio: {:.2}", table.ratio());
            if !table.meets(min_ratio) {
                return Err(PipelineError::Partial { failed: 1, total: 1 });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("navigator: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
