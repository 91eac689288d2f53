//! States reached in a fixed window by two candidate generators over the
//! same engine: retrieval plus instantiation, and a baseline whose latency
//! models byte-at-a-time decoding (a fixed delay per output character).

use std::thread;
use std::time::Duration;

use serde::Serialize;

use crate::embed::TemplateIndex;
use crate::engine::{EngineError, ProofEngine};
use crate::explore::{explore, CandidateSource, ExploreBudget, RetrievalCandidates};

pub const DEFAULT_BASELINE_DELAY: Duration = Duration::from_millis(20);
pub const DEFAULT_WINDOW_SECONDS: f64 = 120.0;

/// Wraps another source and sleeps `per_char` for every character of each
/// candidate before yielding it.
pub struct SlowCandidates<'s> {
    pub inner: &'s dyn CandidateSource,
    pub per_char: Duration,
}

impl CandidateSource for SlowCandidates<'_> {
    fn candidates<'a>(&'a self, pretty: &str) -> Box<dyn Iterator<Item = String> + 'a> {
        let delay = self.per_char;
        Box::new(self.inner.candidates(pretty).inspect(move |t| {
            thread::sleep(delay * t.chars().count() as u32);
        }))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneratorProfile {
    pub generator: String,
    pub window_seconds: f64,
    pub states: Vec<usize>,
    pub attempts: Vec<u64>,
    pub avg_states: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareTable {
    pub rows: Vec<GeneratorProfile>,
}

impl CompareTable {
    pub fn ratio(&self) -> f64 {
        let (r, b) = (self.rows[0].avg_states, self.rows[1].avg_states);
        if b == 0.0 {
            f64::INFINITY
        } else {
            r / b
        }
    }

    pub fn meets(&self, min_ratio: f64) -> bool {
        self.ratio() >= min_ratio
    }

    pub fn to_jsonl(&self) -> String {
        self.rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "generator": r.generator,
                    "avg_states": r.avg_states,
                    "window_seconds": r.window_seconds,
                })
                .to_string()
                    + "\n"
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CompareConfig {
    pub window_seconds: f64,
    pub baseline_delay: Duration,
    pub k_neighbors: usize,
    pub instantiation_cap: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            window_seconds: DEFAULT_WINDOW_SECONDS,
            baseline_delay: DEFAULT_BASELINE_DELAY,
            k_neighbors: crate::embed::DEFAULT_K,
            instantiation_cap: crate::template::DEFAULT_INSTANTIATION_CAP,
        }
    }
}

fn profile<E: ProofEngine>(
    name: &str,
    theorems: &[String],
    engine_factory: &mut impl FnMut() -> Result<E, EngineError>,
    source: &dyn CandidateSource,
    budget: &ExploreBudget,
) -> Result<GeneratorProfile, EngineError> {
    let mut states = Vec::new();
    let mut attempts = Vec::new();
    for t in theorems {
        // engine startup happens outside the window
        let mut engine = engine_factory()?;
        let ex = explore(t, &mut engine, source, budget)?;
        states.push(ex.stats.distinct_states);
        attempts.push(ex.stats.transitions_attempted);
    }
    let avg_states = if states.is_empty() {
        0.0
    } else {
        states.iter().sum::<usize>() as f64 / states.len() as f64
    };
    Ok(GeneratorProfile {
        generator: name.to_string(),
        window_seconds: budget.max_seconds.unwrap_or(0.0),
        states,
        attempts,
        avg_states,
    })
}

/// Explore every theorem once per generator, sequentially, with only the
/// time budget. Row 0 is retrieval, row 1 the baseline.
pub fn compare<E: ProofEngine>(
    theorems: &[String],
    mut engine_factory: impl FnMut() -> Result<E, EngineError>,
    index: &TemplateIndex,
    config: &CompareConfig,
) -> Result<CompareTable, EngineError> {
    assert!(config.window_seconds > 0.0, "window must be positive");
    let budget = ExploreBudget {
        max_transitions: u64::MAX,
        max_seconds: Some(config.window_seconds),
        k_neighbors: config.k_neighbors,
        instantiation_cap: config.instantiation_cap,
    };
    let retrieval = RetrievalCandidates {
        index,
        k: config.k_neighbors,
        cap: config.instantiation_cap,
    };
    let baseline = SlowCandidates {
        inner: &retrieval,
        per_char: config.baseline_delay,
    };
    Ok(CompareTable {
        rows: vec![
            profile("retrieval", theorems, &mut engine_factory, &retrieval, &budget)?,
            profile("baseline", theorems, &mut engine_factory, &baseline, &budget)?,
        ],
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;
    use std::time::Instant;

    use super::*;
    use crate::embed::build_index;
    use crate::engine::BuiltinSession;
    use crate::template::TacticTemplate;
    use crate::theory::Theory;

    #[test]
    fn baseline_respects_delay_model() {
        let th = Arc::new(Theory::group());
        let templates: Vec<TacticTemplate> = ["rw [mul_comm {var0} {var1}]", "rw [mul_assoc]"]
            .iter()
            .map(|t| TacticTemplate::parse(t).unwrap())
            .collect();
        let index = build_index(&templates, None).unwrap();
        let theorems = vec!["theorem t (a b c : ℝ) : a * b * c = b * (a * c)".to_string()];
        let config = CompareConfig {
            window_seconds: 0.5,
            baseline_delay: Duration::from_millis(20),
            ..CompareConfig::default()
        };
        let start = Instant::now();
        let table = compare(&theorems, || Ok(BuiltinSession::builtin(th.clone())), &index, &config)
            .unwrap();
        assert!(start.elapsed() < Duration::from_secs(3));
        // each candidate is ≥ 14 chars, so at most 0.5 / 0.28 + 1 attempts fit
        assert!(table.rows[1].attempts[0] <= 2, "{:?}", table.rows[1]);
        assert!(table.rows[0].avg_states >= table.rows[1].avg_states);
        assert_eq!(table.to_jsonl().lines().count(), 2);
    }
}
