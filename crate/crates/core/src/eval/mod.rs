//! Benchmark runs: scoring, multi-seed aggregation and reports.

mod benchmark;
mod metrics;
mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, AgentConfig, Backend, BackendError, QueryFailure, QueryOutcome};
use crate::market::MarketStore;
use crate::registry::{Grounding, ToolRegistry};
use crate::tools::StubTable;

pub use benchmark::{
    load_benchmark, parse_benchmark, replay_script, split_keywords, stub_table, write_benchmark, BenchmarkItem,
    COLUMNS, EXPECTED_ITEM_COUNT,
};
pub use metrics::{
    canonical_number, keyword_coverage, metric_la_hr, metric_ma, metric_rr, tokens, unsupported_fraction, Judge,
    Scoring,
};
pub use report::{
    emit_report, parse_summary_tsv, report_items_tsv, report_markdown, report_summary_tsv, write_reports, ReportFormat,
    SummaryRow,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("benchmark line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("benchmark is missing column '{column}'")]
    MissingColumn { column: &'static str },
    #[error("benchmark line {line}: column '{column}' is empty")]
    EmptyField { line: usize, column: &'static str },
    #[error("benchmark line {line}: duplicate item_id '{item_id}'")]
    DuplicateItem { item_id: String, line: usize },
    #[error("benchmark line {line}: unparseable expected_calls: {message}")]
    BadCalls { line: usize, message: String },
    #[error("benchmark line {line}: invalid stub_results: {message}")]
    BadStubs { line: usize, message: String },
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("malformed report: {0}")]
    Report(String),
}

/// Scores of one item in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub item_id: String,
    pub rr: f64,
    pub ma: f64,
    /// 0 when `rr = 0`.
    pub la: f64,
    /// 1 when `rr = 0`.
    pub hr: f64,
    pub spq_seconds: f64,
    /// The judge failed and LA/HR come from the fallback.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub judge_fallback: bool,
    pub outcome: QueryOutcome,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub rr: f64,
    pub ma: f64,
    pub la: f64,
    pub hr: f64,
    pub spq: f64,
}

impl Averages {
    pub fn as_array(&self) -> [f64; 5] {
        [self.rr, self.ma, self.la, self.hr, self.spq]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Averages {
            rr: v[0],
            ma: v[1],
            la: v[2],
            hr: v[3],
            spq: v[4],
        }
    }

    /// Arithmetic means of the per-item values.
    pub fn of_records(records: &[EvalRecord]) -> Self {
        let n = records.len().max(1) as f64;
        let mut sum = [0.0; 5];
        for r in records {
            for (s, v) in sum.iter_mut().zip([r.rr, r.ma, r.la, r.hr, r.spq_seconds]) {
                *s += v;
            }
        }
        Averages::from_array(sum.map(|s| s / n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub averages: Averages,
    pub records: Vec<EvalRecord>,
}

/// Settings recorded with a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSnapshot {
    pub agent_label: String,
    pub mode: String,
    pub temperature: f64,
    pub seeds: Vec<u64>,
    pub context_budget_tokens: usize,
    pub max_generated_tokens: usize,
    pub empty_output_retries: u32,
    pub scoring: String,
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunSnapshot,
    pub runs: Vec<SeedReport>,
    /// Mean of the per-seed averages.
    pub averages: Averages,
    /// Mean percentage error across seeds; present for two or more seeds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mpe: Option<Averages>,
}

/// `mean(|x_i - mean| / mean) * 100`. Zero when the mean is zero, which for
/// non-negative metrics means every run scored zero.
pub fn mean_percentage_error(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Some(0.0);
    }
    Some(values.iter().map(|x| (x - mean).abs() / mean).sum::<f64>() / n * 100.0)
}

/// Where tool calls are answered during a run.
#[derive(Clone, Copy)]
pub enum EvalMode<'a> {
    Stub(&'a StubTable),
    Real { store: &'a MarketStore, as_of: Option<i64> },
}

impl EvalMode<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            EvalMode::Stub(_) => "stub",
            EvalMode::Real { .. } => "real",
        }
    }

    fn grounding<'g>(&'g self, item_id: &'g str) -> Grounding<'g> {
        match *self {
            EvalMode::Stub(table) => Grounding::Stub { table, item_id },
            EvalMode::Real { store, as_of } => Grounding::Real { store, as_of },
        }
    }
}

pub struct RunConfig {
    /// Base agent settings; `seed` is replaced by each entry of `seeds`.
    pub agent: AgentConfig,
    pub seeds: Vec<u64>,
    /// Measure SPQ. Items then run one at a time so timings are not skewed
    /// by contention; otherwise SPQ is recorded as 0.
    pub timing: bool,
    /// Worker bound when timing is off.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            agent: AgentConfig::default(),
            seeds: vec![1],
            timing: true,
            workers: 4,
        }
    }
}

/// Runs every item once per seed. Item failures are recorded, never raised.
pub fn run_benchmark(
    items: &[BenchmarkItem],
    registry: &ToolRegistry,
    backend: &dyn Backend,
    mode: EvalMode<'_>,
    scoring: &Scoring<'_>,
    config: &RunConfig,
) -> Result<RunReport, EvalError> {
    if config.seeds.is_empty() {
        return Err(EvalError::Config("at least one seed is required".into()));
    }
    let workers = if config.timing { 1 } else { config.workers.max(1) };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EvalError::Config(e.to_string()))?;

    let mut runs = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let agent_config = AgentConfig {
            seed,
            ..config.agent.clone()
        };
        let agent = Agent::new(registry, backend, agent_config)?;
        let score = |item: &BenchmarkItem| score_item(&agent, item, mode, scoring, config.timing);
        let records: Vec<EvalRecord> = if workers == 1 {
            items.iter().map(score).collect()
        } else {
            pool.install(|| items.par_iter().map(score).collect())
        };
        tracing::info!(seed, items = records.len(), "seed finished");
        runs.push(SeedReport {
            seed,
            averages: Averages::of_records(&records),
            records,
        });
    }

    let per_seed: Vec<[f64; 5]> = runs.iter().map(|r| r.averages.as_array()).collect();
    let n = per_seed.len() as f64;
    let mut mean = [0.0; 5];
    let mut mpe = [0.0; 5];
    for k in 0..5 {
        let column: Vec<f64> = per_seed.iter().map(|a| a[k]).collect();
        mean[k] = column.iter().sum::<f64>() / n;
        mpe[k] = mean_percentage_error(&column).unwrap_or(0.0);
    }

    Ok(RunReport {
        config: RunSnapshot {
            agent_label: backend.label(),
            mode: mode.name().into(),
            temperature: config.agent.temperature,
            seeds: config.seeds.clone(),
            context_budget_tokens: config.agent.context_budget_tokens,
            max_generated_tokens: config.agent.max_generated_tokens,
            empty_output_retries: config.agent.empty_output_retries,
            scoring: match scoring {
                Scoring::Fallback => "fallback".into(),
                Scoring::Judge(_) => "judge".into(),
            },
            timing: config.timing,
        },
        averages: Averages::from_array(mean),
        mpe: (runs.len() >= 2).then(|| Averages::from_array(mpe)),
        runs,
    })
}

fn score_item(
    agent: &Agent<'_>,
    item: &BenchmarkItem,
    mode: EvalMode<'_>,
    scoring: &Scoring<'_>,
    timing: bool,
) -> EvalRecord {
    let grounding = mode.grounding(&item.item_id);
    let mut outcome = agent.answer(&item.nlq, &grounding, Some(&item.item_id));
    if !timing {
        outcome.wall_seconds = 0.0;
    }
    if let Some(QueryFailure::Transport { message }) = &outcome.failure {
        tracing::warn!(item = %item.item_id, "transport failure: {message}");
    }
    let rr = metric_rr(&outcome);
    let ma = metric_ma(&outcome, item);
    let (la, hr, judge_fallback) = if rr == 1.0 {
        metric_la_hr(&outcome, item, scoring)
    } else {
        (0.0, 1.0, false)
    };
    EvalRecord {
        item_id: item.item_id.clone(),
        rr,
        ma,
        la,
        hr,
        spq_seconds: outcome.wall_seconds,
        judge_fallback,
        outcome,
    }
}
