//! Experiment campaigns: every (function, algorithm, run) cell is executed
//! with a seed derived from its coordinates, then aggregated, compared with
//! the rank-sum test and written out as CSV/JSON tables.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmarks::{self, BenchmarkEntry};
use crate::emo::{self, EmoParams, LambdaScope, RunRecord};
use crate::error::{Error, Result};
use crate::model::RngStream;
use crate::opposition::{self, OppositionConfig};
use crate::stats::{self, AggregateResult, WilcoxonResult, MIN_SAMPLE_SIZE};

/// Environment variable capping the number of concurrently executed cells.
pub const THREADS_ENV: &str = "EMOPT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Emo,
    Obemo,
}

impl Algorithm {
    pub fn id(self) -> &'static str {
        match self {
            Algorithm::Emo => "emo",
            Algorithm::Obemo => "obemo",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "emo" => Ok(Algorithm::Emo),
            "obemo" => Ok(Algorithm::Obemo),
            other => Err(Error::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format '{other}'"))),
        }
    }
}

/// Engine settings shared by every cell. The iteration cap is chosen per
/// function (see [`CampaignConfig::max_iterations`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub population_size: usize,
    pub local_search_iters: usize,
    pub local_search_delta: f64,
    pub stagnation_tolerance: f64,
    pub stagnation_window: usize,
    pub target_value: Option<f64>,
    pub lambda_scope: LambdaScope,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let p = EmoParams::default();
        Self {
            population_size: p.population_size,
            local_search_iters: p.local_search_iters,
            local_search_delta: p.local_search_delta,
            stagnation_tolerance: p.stagnation_tolerance,
            stagnation_window: p.stagnation_window,
            target_value: p.target_value,
            lambda_scope: p.lambda_scope,
        }
    }
}

impl EngineConfig {
    pub fn params(&self, max_iterations: usize) -> EmoParams {
        EmoParams {
            population_size: self.population_size,
            local_search_iters: self.local_search_iters,
            local_search_delta: self.local_search_delta,
            max_iterations,
            stagnation_tolerance: self.stagnation_tolerance,
            stagnation_window: self.stagnation_window,
            target_value: self.target_value,
            lambda_scope: self.lambda_scope,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub functions: Vec<String>,
    pub algorithms: Vec<Algorithm>,
    pub runs: usize,
    pub base_seed: u64,
    /// Overrides every function's default cap (2000 for the low-dimensional
    /// set, 1000 for the 30-dimensional set) when present.
    pub max_iterations: Option<usize>,
    /// Use each function's verified global minimum as the target value
    /// (overrides `engine.target_value`).
    pub stop_at_known_minimum: bool,
    pub engine: EngineConfig,
    pub opposition: OppositionConfig,
    pub output_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            functions: benchmarks::registry()
                .iter()
                .map(|e| e.id.to_string())
                .collect(),
            algorithms: vec![Algorithm::Emo, Algorithm::Obemo],
            runs: 35,
            base_seed: 2012,
            max_iterations: None,
            stop_at_known_minimum: false,
            engine: EngineConfig::default(),
            opposition: OppositionConfig::default(),
            output_dir: PathBuf::from("results"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

impl CampaignConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Resolves function keys to registry entries, in canonical `f1..f14`
    /// order with duplicates removed.
    pub fn resolve_functions(&self) -> Result<Vec<BenchmarkEntry>> {
        if self.functions.is_empty() {
            return Err(Error::Config("no functions selected".into()));
        }
        let mut entries: Vec<BenchmarkEntry> = Vec::new();
        for key in &self.functions {
            let entry = benchmarks::by_id(key)
                .ok_or_else(|| Error::Config(format!("unknown function '{key}'")))?;
            if !entries.iter().any(|e| e.id == entry.id) {
                entries.push(entry);
            }
        }
        entries.sort_by_key(|e| function_ordinal(e.id));
        Ok(entries)
    }

    pub fn resolve_algorithms(&self) -> Result<Vec<Algorithm>> {
        let set: BTreeSet<Algorithm> = self.algorithms.iter().copied().collect();
        if set.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        Ok(set.into_iter().collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        self.resolve_functions()?;
        self.resolve_algorithms()?;
        self.engine
            .params(1)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.opposition
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn params_for(&self, entry: &BenchmarkEntry) -> EmoParams {
        let mut params = self
            .engine
            .params(self.max_iterations.unwrap_or(entry.default_max_iterations));
        if self.stop_at_known_minimum {
            params.target_value = Some(entry.canonical_minimum);
        }
        params
    }
}

fn function_ordinal(id: &str) -> usize {
    id.trim_start_matches('f').parse().unwrap_or(usize::MAX)
}

/// Seed of run `run` of `algorithm` on `function_id`: the first eight bytes
/// (little-endian) of SHA-256 over `"{base_seed}/{function_id}/{algorithm}/{run}"`.
pub fn cell_seed(base_seed: u64, function_id: &str, algorithm: Algorithm, run: usize) -> u64 {
    let digest = Sha256::digest(format!("{base_seed}/{function_id}/{algorithm}/{run}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Runs one algorithm once on a fresh copy of `entry`.
pub fn run_single(
    entry: &BenchmarkEntry,
    algorithm: Algorithm,
    params: &EmoParams,
    opposition: &OppositionConfig,
    seed: u64,
) -> Result<RunRecord> {
    let mut objective = entry.spec.fresh();
    let mut rng = RngStream::new(seed);
    match algorithm {
        Algorithm::Emo => emo::run_emo(&mut objective, params, &mut rng),
        Algorithm::Obemo => opposition::run_obemo(&mut objective, params, opposition, &mut rng),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub run: usize,
    pub seed: u64,
    pub record: RunRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecords {
    pub function_id: String,
    pub algorithm: Algorithm,
    pub runs: Vec<RunEntry>,
}

/// Raw per-run output of a campaign, as stored in `records.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRecords {
    pub config: CampaignConfig,
    pub cells: Vec<CellRecords>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub function_id: String,
    /// `"<a>_vs_<b>"`; `a` is the first sample of both tests.
    pub pair: String,
    pub best: WilcoxonResult,
    pub iterations: WilcoxonResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub config: CampaignConfig,
    pub aggregates: Vec<AggregateResult>,
    pub comparisons: Vec<Comparison>,
    pub warnings: Vec<String>,
    pub cells: Vec<CellRecords>,
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Reads [`THREADS_ENV`]; unset or unparsable means "use all cores".
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok()
}

/// Executes every cell of the campaign. Cells run concurrently on up to
/// `threads` workers; results come back in canonical order.
pub fn execute(config: &CampaignConfig, threads: Option<usize>) -> Result<CampaignRecords> {
    config.validate()?;
    let functions = config.resolve_functions()?;
    let algorithms = config.resolve_algorithms()?;

    let jobs: Vec<(usize, Algorithm, usize)> = functions
        .iter()
        .enumerate()
        .flat_map(|(fi, _)| {
            algorithms
                .iter()
                .flat_map(move |&a| (0..config.runs).map(move |k| (fi, a, k)))
        })
        .collect();

    let pool = thread_pool(threads)?;
    let results: Vec<Result<RunEntry>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(fi, algorithm, run)| {
                let entry = &functions[fi];
                let seed = cell_seed(config.base_seed, entry.id, algorithm, run);
                let record = run_single(
                    entry,
                    algorithm,
                    &config.params_for(entry),
                    &config.opposition,
                    seed,
                )?;
                Ok(RunEntry { run, seed, record })
            })
            .collect()
    });

    let mut results = results.into_iter();
    let mut cells = Vec::new();
    for entry in &functions {
        for &algorithm in &algorithms {
            let runs = results
                .by_ref()
                .take(config.runs)
                .collect::<Result<Vec<_>>>()?;
            cells.push(CellRecords {
                function_id: entry.id.to_string(),
                algorithm,
                runs,
            });
        }
    }
    Ok(CampaignRecords {
        config: config.clone(),
        cells,
    })
}

/// Aggregates stored records and runs every pairwise comparison.
pub fn build_report(records: &CampaignRecords) -> Result<CampaignReport> {
    let config = &records.config;
    let mut aggregates = Vec::new();
    for cell in &records.cells {
        if cell.runs.len() != config.runs {
            return Err(Error::Incomplete(format!(
                "{} / {} has {} of {} runs",
                cell.function_id,
                cell.algorithm,
                cell.runs.len(),
                config.runs
            )));
        }
        let recs: Vec<RunRecord> = cell.runs.iter().map(|r| r.record.clone()).collect();
        aggregates.push(stats::aggregate(
            &cell.function_id,
            cell.algorithm.id(),
            &recs,
        )?);
    }
    let functions = config.resolve_functions()?;
    let algorithms = config.resolve_algorithms()?;
    for entry in &functions {
        for &algorithm in &algorithms {
            if !aggregates
                .iter()
                .any(|a| a.function_id == entry.id && a.algorithm_id == algorithm.id())
            {
                return Err(Error::Incomplete(format!(
                    "no runs stored for {} / {}",
                    entry.id, algorithm
                )));
            }
        }
    }

    let mut warnings = Vec::new();
    let mut comparisons = Vec::new();
    if algorithms.len() >= 2 && config.runs < MIN_SAMPLE_SIZE {
        warnings.push(format!(
            "{} run(s) per cell is below the rank-sum minimum of {MIN_SAMPLE_SIZE}; no significance tests emitted",
            config.runs
        ));
    } else {
        for entry in &functions {
            let find = |alg: Algorithm| {
                aggregates
                    .iter()
                    .find(|a| a.function_id == entry.id && a.algorithm_id == alg.id())
                    .expect("checked above")
            };
            for (i, &base) in algorithms.iter().enumerate() {
                for &other in &algorithms[i + 1..] {
                    let (best, iterations) = stats::compare_algorithms(find(other), find(base))?;
                    comparisons.push(Comparison {
                        function_id: entry.id.to_string(),
                        pair: format!("{other}_vs_{base}"),
                        best,
                        iterations,
                    });
                }
            }
        }
    }
    Ok(CampaignReport {
        config: config.clone(),
        aggregates,
        comparisons,
        warnings,
        cells: records.cells.clone(),
    })
}

/// Executes and reports a campaign.
pub fn run_campaign(config: &CampaignConfig, threads: Option<usize>) -> Result<CampaignReport> {
    build_report(&execute(config, threads)?)
}

pub const COMPARISON_HEADER: [&str; 5] = [
    "function",
    "algorithm",
    "averaged_best",
    "averaged_iterations",
    "averaged_evaluations",
];
pub const WILCOXON_HEADER: [&str; 6] = [
    "function",
    "pair",
    "metric",
    "statistic",
    "p_value",
    "significant",
];
pub const TRACE_HEADER: [&str; 2] = ["iteration", "best_so_far"];
pub const RUNS_HEADER: [&str; 7] = [
    "function",
    "algorithm",
    "run",
    "seed",
    "best",
    "iterations",
    "evaluations",
];

pub const RECORDS_FILE: &str = "records.json";
pub const REPORT_FILE: &str = "report.json";

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Serialization(format!("{}: {other:?}", path.display())),
    }
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Creates `dir` (and parents) or reports why it cannot be used.
pub fn prepare_output_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".emopt-write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(dir, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(dir, e))
}

/// Writes `records.json` plus the requested table formats to `dir`.
/// Returns the written paths in writing order.
pub fn emit_tables(
    report: &CampaignReport,
    dir: &Path,
    formats: &[OutputFormat],
) -> Result<Vec<PathBuf>> {
    // Refuse partial campaigns before touching the filesystem.
    let records = CampaignRecords {
        config: report.config.clone(),
        cells: report.cells.clone(),
    };
    build_report(&records)?;

    prepare_output_dir(dir)?;
    let mut written = Vec::new();

    let path = dir.join(RECORDS_FILE);
    write_json(&path, &records)?;
    written.push(path);

    if formats.contains(&OutputFormat::Csv) {
        let path = dir.join("comparison.csv");
        write_csv(
            &path,
            &COMPARISON_HEADER,
            report.aggregates.iter().map(|a| {
                vec![
                    a.function_id.clone(),
                    a.algorithm_id.clone(),
                    a.averaged_best.to_string(),
                    a.averaged_iterations.to_string(),
                    a.averaged_evaluations.to_string(),
                ]
            }),
        )?;
        written.push(path);

        if !report.comparisons.is_empty() {
            let path = dir.join("wilcoxon.csv");
            write_csv(
                &path,
                &WILCOXON_HEADER,
                report.comparisons.iter().flat_map(|c| {
                    [("best", &c.best), ("iterations", &c.iterations)].map(|(metric, w)| {
                        vec![
                            c.function_id.clone(),
                            c.pair.clone(),
                            metric.to_string(),
                            w.statistic.to_string(),
                            w.p_value.to_string(),
                            w.significant_at_5pct.to_string(),
                        ]
                    })
                }),
            )?;
            written.push(path);
        }

        let path = dir.join("runs.csv");
        write_csv(
            &path,
            &RUNS_HEADER,
            report.cells.iter().flat_map(|cell| {
                cell.runs.iter().map(move |r| {
                    vec![
                        cell.function_id.clone(),
                        cell.algorithm.id().to_string(),
                        r.run.to_string(),
                        r.seed.to_string(),
                        r.record.best_fitness.to_string(),
                        r.record.iterations.to_string(),
                        r.record.evaluations.to_string(),
                    ]
                })
            }),
        )?;
        written.push(path);

        for agg in &report.aggregates {
            let path = dir.join(format!(
                "trace_{}_{}.csv",
                agg.function_id, agg.algorithm_id
            ));
            write_csv(
                &path,
                &TRACE_HEADER,
                agg.best_trace
                    .iter()
                    .enumerate()
                    .map(|(i, v)| vec![(i + 1).to_string(), v.to_string()]),
            )?;
            written.push(path);
        }
    }

    if formats.contains(&OutputFormat::Json) {
        let path = dir.join(REPORT_FILE);
        write_json(&path, &JsonReport::from(report))?;
        written.push(path);
    }
    Ok(written)
}

/// Loads `records.json` from a previous campaign.
pub fn load_records(dir: &Path) -> Result<CampaignRecords> {
    let path = if dir.is_dir() {
        dir.join(RECORDS_FILE)
    } else {
        dir.to_path_buf()
    };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))
}

/// Shape of `report.json`; see `schema/report.schema.json`.
#[derive(Debug, Serialize)]
pub struct JsonReport<'a> {
    pub config: &'a CampaignConfig,
    pub aggregates: Vec<JsonAggregate<'a>>,
    pub comparisons: &'a [Comparison],
    pub warnings: &'a [String],
}

#[derive(Debug, Serialize)]
pub struct JsonAggregate<'a> {
    pub function: &'a str,
    pub algorithm: &'a str,
    pub runs: usize,
    pub averaged_best: f64,
    pub averaged_iterations: f64,
    pub averaged_evaluations: f64,
    pub best_values: &'a [f64],
    pub iteration_counts: &'a [usize],
}

impl<'a> From<&'a CampaignReport> for JsonReport<'a> {
    fn from(r: &'a CampaignReport) -> Self {
        Self {
            config: &r.config,
            aggregates: r
                .aggregates
                .iter()
                .map(|a| JsonAggregate {
                    function: &a.function_id,
                    algorithm: &a.algorithm_id,
                    runs: a.runs,
                    averaged_best: a.averaged_best,
                    averaged_iterations: a.averaged_iterations,
                    averaged_evaluations: a.averaged_evaluations,
                    best_values: &a.best_values,
                    iteration_counts: &a.iteration_counts,
                })
                .collect(),
            comparisons: &r.comparisons,
            warnings: &r.warnings,
        }
    }
}
