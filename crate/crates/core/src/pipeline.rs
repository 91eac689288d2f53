//! File-level commands: templatize, index, explore, extract, prove, bench,
//! compare. Theorem-level work runs on a pool of worker threads; every
//! theorem writes its own output file, renamed into place when complete.

use std::collections::{HashSet, VecDeque};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use log::{info, warn};
use serde::Deserialize;
use thiserror::Error;

use crate::embed::{build_index, EmbeddingTable, TemplateIndex};
use crate::engine::external::DEFAULT_TIMEOUT;
use crate::engine::{BuiltinSession, EngineError, EngineSession, ExternalBackend, ProofEngine};
use crate::explore::{explore, ExploreBudget, ExploreStats, RetrievalCandidates, StateGraph};
use crate::extract::{extract_dataset, write_dataset, TheoremRecord, DEFAULT_MAX_DEPTH};
use crate::search::{
    parse_theorem_file, prove, theorem_name, BenchEntry, BenchReport, FailReason, SearchBudget,
    SearchOutcome, SearchReport,
};
use crate::state::StateContext;
use crate::template::{build_template_corpus, read_template_corpus, write_template_corpus, Vocabulary};
use crate::theory::Theory;
use crate::throughput::{compare, CompareConfig, CompareTable};

pub const GRAPH_SUFFIX: &str = ".graph.jsonl";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("input: {0}")]
    Input(String),
    #[error("{failed} of {total} theorems failed")]
    Partial { failed: usize, total: usize },
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            PipelineError::Input(_) | PipelineError::Io(_) => 2,
            PipelineError::Partial { .. } => 3,
        }
    }
}

fn input_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Input(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| input_err(path, e))
}

/// Write through a sibling temp file and rename, so readers never see a
/// half-written file.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        write(&mut out)?;
        out.flush()?;
    }
    fs::rename(&tmp, path)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EngineChoice {
    Builtin,
    External(String),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub theory: Arc<Theory>,
    pub workers: usize,
    pub engine: EngineChoice,
    pub engine_timeout: Duration,
    pub explore: ExploreBudget,
    pub search: SearchBudget,
    pub max_depth: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            theory: Arc::new(Theory::group()),
            workers: thread::available_parallelism().map_or(1, |n| n.get()),
            engine: EngineChoice::Builtin,
            engine_timeout: DEFAULT_TIMEOUT,
            explore: ExploreBudget::default(),
            search: SearchBudget::default(),
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

impl RunConfig {
    pub fn new_engine(&self) -> Result<Box<dyn ProofEngine>, EngineError> {
        Ok(match &self.engine {
            EngineChoice::Builtin => Box::new(BuiltinSession::builtin(self.theory.clone())),
            EngineChoice::External(cmd) => Box::new(EngineSession::new(ExternalBackend::spawn(
                cmd,
                self.engine_timeout,
            )?)),
        })
    }

    pub fn load_theory(path: Option<&Path>) -> Result<Arc<Theory>, PipelineError> {
        Ok(Arc::new(match path {
            Some(p) => Theory::load(p).map_err(|e| input_err(p, e))?,
            None => Theory::group(),
        }))
    }
}

/// Run `job` over `items` on `workers` threads; results keep input order.
pub fn run_pool<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    job: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let queue = Mutex::new((0..items.len()).collect::<VecDeque<usize>>());
    let results = Mutex::new(Vec::with_capacity(items.len()));
    thread::scope(|s| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let Some(i) = queue.lock().expect("queue lock").pop_front() else {
                    break;
                };
                let r = job(&items[i]);
                results.lock().expect("results lock").push((i, r));
            });
        }
    });
    let mut results = results.into_inner().expect("results lock");
    results.sort_by_key(|(i, _)| *i);
    results.into_iter().map(|(_, r)| r).collect()
}

#[derive(Deserialize)]
struct PairRecord {
    state: String,
    tactic: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplatizeSummary {
    pub pairs: usize,
    pub templates: usize,
    pub warnings: usize,
}

pub fn cmd_templatize(
    corpus: &Path,
    out: &Path,
    theory: &Theory,
) -> Result<TemplatizeSummary, PipelineError> {
    let file = File::open(corpus).map_err(|e| input_err(corpus, e))?;
    let mut pairs = Vec::new();
    let mut warnings = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| input_err(corpus, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<PairRecord>(&line) {
            Ok(p) if !p.tactic.trim().is_empty() => {
                pairs.push((StateContext::from_pretty(&p.state), p.tactic))
            }
            Ok(_) => {
                warn!("{}:{}: empty tactic", corpus.display(), i + 1);
                warnings += 1;
            }
            Err(e) => {
                warn!("{}:{}: {e}", corpus.display(), i + 1);
                warnings += 1;
            }
        }
    }
    let vocab = Vocabulary::from_theory(theory);
    let templates = build_template_corpus(pairs.iter().map(|(c, t)| (c, t.as_str())), &vocab);
    write_atomic(out, |w| write_template_corpus(&templates, w))?;
    Ok(TemplatizeSummary {
        pairs: pairs.len(),
        templates: templates.len(),
        warnings,
    })
}

pub fn load_templates(path: &Path) -> Result<Vec<crate::template::TacticTemplate>, PipelineError> {
    let file = File::open(path).map_err(|e| input_err(path, e))?;
    let (templates, bad) = read_template_corpus(BufReader::new(file))?;
    for line in bad {
        warn!("{}:{line}: malformed template skipped", path.display());
    }
    Ok(templates)
}

pub fn cmd_build_index(
    templates: &Path,
    embeddings: Option<&Path>,
    out: &Path,
) -> Result<usize, PipelineError> {
    let templates = load_templates(templates)?;
    let table = match embeddings {
        Some(p) => {
            let f = File::open(p).map_err(|e| input_err(p, e))?;
            Some(EmbeddingTable::read(BufReader::new(f)).map_err(|e| input_err(p, e))?)
        }
        None => None,
    };
    let index = build_index(&templates, table.as_ref()).map_err(|e| PipelineError::Input(e.to_string()))?;
    write_atomic(out, |w| {
        index
            .write_to(w)
            .map_err(|e| io::Error::other(e.to_string()))
    })?;
    Ok(index.len())
}

/// Where retrieval gets its index: a saved index file, or a template
/// corpus embedded on the fly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexSource {
    File(PathBuf),
    Templates(PathBuf),
}

pub fn load_index(source: &IndexSource) -> Result<TemplateIndex, PipelineError> {
    match source {
        IndexSource::File(path) => {
            let f = File::open(path).map_err(|e| input_err(path, e))?;
            TemplateIndex::read_from(BufReader::new(f)).map_err(|e| input_err(path, e))
        }
        IndexSource::Templates(path) => {
            build_index(&load_templates(path)?, None).map_err(|e| input_err(path, e))
        }
    }
}

/// Theorems from a file, each paired with a unique file-safe name.
pub fn load_theorems(path: &Path) -> Result<Vec<(String, String)>, PipelineError> {
    let blocks = parse_theorem_file(&read_text(path)?);
    let mut seen = HashSet::new();
    Ok(blocks
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let base: String = theorem_name(&t)
                .unwrap_or("theorem")
                .chars()
                .map(|c| if c.is_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
                .collect();
            let name = if seen.insert(base.clone()) {
                base
            } else {
                format!("{base}_{i}")
            };
            seen.insert(name.clone());
            (name, t)
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct TheoremRun {
    pub name: String,
    pub result: Result<ExploreStats, String>,
}

#[derive(Debug, Clone)]
pub struct ExploreSummary {
    pub runs: Vec<TheoremRun>,
}

impl ExploreSummary {
    pub fn failed(&self) -> usize {
        self.runs.iter().filter(|r| r.result.is_err()).count()
    }

    /// Mean distinct states over theorems that ran.
    pub fn avg_states(&self) -> f64 {
        let ok: Vec<usize> = self
            .runs
            .iter()
            .filter_map(|r| r.result.as_ref().ok().map(|s| s.distinct_states))
            .collect();
        if ok.is_empty() {
            0.0
        } else {
            ok.iter().sum::<usize>() as f64 / ok.len() as f64
        }
    }
}

pub fn cmd_explore(
    config: &RunConfig,
    theorems: &Path,
    index: &IndexSource,
    out_dir: &Path,
) -> Result<ExploreSummary, PipelineError> {
    let index = load_index(index)?;
    let theorems = load_theorems(theorems)?;
    fs::create_dir_all(out_dir)?;
    let source = RetrievalCandidates {
        index: &index,
        k: config.explore.k_neighbors,
        cap: config.explore.instantiation_cap,
    };
    let runs = run_pool(&theorems, config.workers, |(name, theorem)| {
        let result = (|| {
            let mut engine = config.new_engine().map_err(|e| e.to_string())?;
            let ex = explore(theorem, &mut engine, &source, &config.explore).map_err(|e| e.to_string())?;
            let path = out_dir.join(format!("{name}{GRAPH_SUFFIX}"));
            write_atomic(&path, |w| ex.graph.write_snapshot(w)).map_err(|e| e.to_string())?;
            if let Some(reason) = &ex.graph.truncated {
                warn!("{name}: exploration truncated: {reason}");
            }
            info!(
                "{name}: {} states, {} attempts",
                ex.stats.distinct_states, ex.stats.transitions_attempted
            );
            Ok(ex.stats)
        })();
        if let Err(e) = &result {
            warn!("{name}: {e}");
        }
        TheoremRun {
            name: name.clone(),
            result,
        }
    });
    Ok(ExploreSummary { runs })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractSummary {
    pub graphs: usize,
    pub skipped: usize,
    pub records: usize,
    pub duplicates: usize,
}

/// Graph files in a directory, sorted by name.
pub fn graph_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| input_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_str().is_some_and(|s| s.ends_with(GRAPH_SUFFIX)))
        .collect();
    files.sort();
    Ok(files)
}

pub fn extract_dir(dir: &Path, max_depth: usize, theory: &Theory) -> Result<(Vec<TheoremRecord>, ExtractSummary), PipelineError> {
    let files = graph_files(dir)?;
    let mut summary = ExtractSummary {
        graphs: 0,
        skipped: 0,
        records: 0,
        duplicates: 0,
    };
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for path in files {
        let graph = File::open(&path).and_then(|f| StateGraph::read_snapshot(BufReader::new(f)));
        let graph = match graph {
            Ok(g) => g,
            Err(e) => {
                warn!("skipping {}: {e}", path.display());
                summary.skipped += 1;
                continue;
            }
        };
        summary.graphs += 1;
        let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let source = file_name.strip_suffix(GRAPH_SUFFIX).unwrap_or(file_name);
        for r in extract_dataset(&graph, max_depth, source, &theory.signature) {
            if seen.insert(r.state.clone()) {
                records.push(r);
            } else {
                summary.duplicates += 1;
            }
        }
    }
    summary.records = records.len();
    Ok((records, summary))
}

pub fn cmd_extract(
    graph_dir: &Path,
    max_depth: usize,
    out: &Path,
    theory: &Theory,
) -> Result<ExtractSummary, PipelineError> {
    let (records, summary) = extract_dir(graph_dir, max_depth, theory)?;
    write_atomic(out, |w| write_dataset(&records, w))?;
    Ok(summary)
}

/// `theorem … := by` followed by the proof, one tactic per line.
pub fn proof_block(theorem: &str, tactics: &[String]) -> String {
    let head = theorem.split(":=").next().unwrap_or(theorem).trim_end();
    let mut out = format!("{head} := by");
    for t in tactics {
        out.push_str("\n  ");
        out.push_str(t);
    }
    out
}

pub fn cmd_prove(config: &RunConfig, theorem: &str, index: &IndexSource) -> Result<SearchReport, PipelineError> {
    let index = load_index(index)?;
    let source = RetrievalCandidates {
        index: &index,
        k: config.search.k_neighbors,
        cap: config.search.instantiation_cap,
    };
    let mut engine = config
        .new_engine()
        .map_err(|e| PipelineError::Input(e.to_string()))?;
    Ok(prove(theorem, &mut engine, &source, &config.search))
}

pub fn cmd_bench(config: &RunConfig, theorems: &Path, index: &IndexSource) -> Result<BenchReport, PipelineError> {
    let index = load_index(index)?;
    let theorems = load_theorems(theorems)?;
    let source = RetrievalCandidates {
        index: &index,
        k: config.search.k_neighbors,
        cap: config.search.instantiation_cap,
    };
    let start = std::time::Instant::now();
    let entries = run_pool(&theorems, config.workers, |(name, theorem)| {
        let report = match config.new_engine() {
            Ok(mut engine) => prove(theorem, &mut engine, &source, &config.search),
            Err(e) => SearchReport {
                outcome: SearchOutcome::Failed(FailReason::Engine(e.to_string())),
                attempts: 0,
                expanded: 0,
                elapsed_seconds: 0.0,
            },
        };
        BenchEntry::from_report(name, &report)
    });
    Ok(BenchReport {
        entries,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn cmd_compare(
    config: &RunConfig,
    theorems: &Path,
    index: &IndexSource,
    compare_config: &CompareConfig,
) -> Result<CompareTable, PipelineError> {
    let index = load_index(index)?;
    let theorems: Vec<String> = load_theorems(theorems)?.into_iter().map(|(_, t)| t).collect();
    compare(&theorems, || config.new_engine(), &index, compare_config)
        .map_err(|e| PipelineError::Input(e.to_string()))
}
