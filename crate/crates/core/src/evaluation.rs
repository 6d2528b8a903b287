//! Repeated trials per (dataset, method), Welch comparisons against the
//! best method of each dataset, winning frequencies and report files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpcc::cpcc;
use crate::ensemble::{ensemble_checksum, generate_ensemble_from, EnsembleConfig};
use crate::error::{Error, Result};
use crate::fusion::{renyi_fuse, RenyiFuser};
use crate::genetic::{genetic_fuse, GaConfig};
use crate::matrix::{euclidean_dissimilarity, DataMatrix, DissimilarityMatrix};
use crate::stats::welch_t_test;
use crate::ultrametric::subdominant_ultrametric;

pub const DEFAULT_SIGNIFICANCE: f64 = 0.01;
pub const DEFAULT_REPEATS: usize = 10;

/// The six named Rényi fusers plus the genetic consensus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodId {
    Max,
    Euclid,
    Amean,
    Gmean,
    Hmean,
    Min,
    Genetic,
}

impl MethodId {
    pub const ALL: [MethodId; 7] = [
        Self::Max,
        Self::Euclid,
        Self::Amean,
        Self::Gmean,
        Self::Hmean,
        Self::Min,
        Self::Genetic,
    ];

    pub fn fuser(self) -> Option<RenyiFuser> {
        Some(match self {
            Self::Max => RenyiFuser::Max,
            Self::Euclid => RenyiFuser::Euclid,
            Self::Amean => RenyiFuser::Amean,
            Self::Gmean => RenyiFuser::Gmean,
            Self::Hmean => RenyiFuser::Hmean,
            Self::Min => RenyiFuser::Min,
            Self::Genetic => return None,
        })
    }

    pub fn name(self) -> &'static str {
        self.fuser().map_or("genetic", RenyiFuser::name)
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method {s:?}")))
    }
}

/// Settings shared by every trial; per-trial seeds replace the `seed`
/// fields of both configs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub ensemble: EnsembleConfig,
    pub ga: GaConfig,
}

impl TrialConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = *self;
        c.ensemble.seed = seed;
        c.ga.seed = seed;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub dataset: String,
    pub method: MethodId,
    pub seed: u64,
    /// CPCC of the fused matrix before ultrametric recovery.
    pub cpcc_raw: f64,
    /// CPCC of the subdominant ultrametric of the fused matrix.
    pub cpcc_ultrametric: f64,
    pub wall_time: f64,
    pub ensemble_checksum: String,
}

/// Runs every method on the single ensemble drawn for `seed`.
pub fn run_seed(
    dataset: &str,
    e: &DissimilarityMatrix,
    methods: &[MethodId],
    seed: u64,
    cfg: &TrialConfig,
) -> Result<Vec<TrialRecord>> {
    let cfg = cfg.with_seed(seed);
    let ensemble = generate_ensemble_from(e, &cfg.ensemble)?;
    let checksum = ensemble_checksum(&ensemble);
    let members: Vec<DissimilarityMatrix> =
        ensemble.into_iter().map(|m| m.completed_matrix).collect();
    methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let (cpcc_raw, cpcc_ultrametric) = match method.fuser() {
                Some(fuser) => {
                    let fused = renyi_fuse(&members, fuser.alpha())?;
                    let recovered = subdominant_ultrametric(&fused);
                    (cpcc(&fused, e)?, cpcc(&recovered, e)?)
                }
                None => {
                    let g = genetic_fuse(&members, e, &cfg.ga)?;
                    (g.cpcc_raw, g.cpcc_ultrametric)
                }
            };
            Ok(TrialRecord {
                dataset: dataset.to_string(),
                method,
                seed,
                cpcc_raw,
                cpcc_ultrametric,
                wall_time: start.elapsed().as_secs_f64(),
                ensemble_checksum: checksum.clone(),
            })
        })
        .collect()
}

/// All methods over seeds `base_seed..base_seed + repeats`, in seed-major
/// order.
pub fn run_dataset(
    dataset: &str,
    data: &DataMatrix,
    methods: &[MethodId],
    repeats: usize,
    base_seed: u64,
    cfg: &TrialConfig,
) -> Result<Vec<TrialRecord>> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let e = euclidean_dissimilarity(data);
    let per_seed: Vec<Vec<TrialRecord>> = (0..repeats as u64)
        .into_par_iter()
        .map(|r| run_seed(dataset, &e, methods, base_seed + r, cfg))
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

/// One record per seed for a single method.
pub fn run_trials(
    data: &DataMatrix,
    method: MethodId,
    repeats: usize,
    base_seed: u64,
    cfg: &TrialConfig,
) -> Result<Vec<TrialRecord>> {
    run_dataset("data", data, &[method], repeats, base_seed, cfg)
}

/// The CPCC samples of one (dataset, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCell {
    pub dataset: String,
    pub method: MethodId,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub dataset: String,
    pub method: MethodId,
    pub mean: f64,
    pub std_dev: f64,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub method: MethodId,
    /// `None` for the best method itself, when a sample is too small, or
    /// when the statistic is infinite (both samples constant).
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p_value: Option<f64>,
    pub significantly_worse: bool,
    pub wins: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetVerdict {
    pub dataset: String,
    pub best: MethodId,
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodFrequency {
    pub method: MethodId,
    pub wins: usize,
    pub datasets: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinningSummary {
    pub verdicts: Vec<DatasetVerdict>,
    pub frequencies: Vec<MethodFrequency>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn ordered_unique<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for it in items {
        if !out.contains(&it) {
            out.push(it);
        }
    }
    out
}

/// Per dataset, the method with the highest mean (first in cell order on
/// ties) is the reference; a method wins the dataset when it is the
/// reference or a two-sided Welch test at `significance` does not separate
/// it from the reference. Frequencies are percentages of datasets won.
///
/// With fewer than two samples in a cell no test is possible, and the
/// method wins only when its mean equals the reference mean.
pub fn winning_frequency(cells: &[SampleCell], significance: f64) -> Result<WinningSummary> {
    if cells.is_empty() {
        return Err(Error::InvalidInput("no sample cells".into()));
    }
    if let Some(c) = cells.iter().find(|c| c.samples.is_empty()) {
        return Err(Error::InvalidInput(format!(
            "cell ({}, {}) has no samples",
            c.dataset, c.method
        )));
    }
    let datasets = ordered_unique(cells.iter().map(|c| c.dataset.clone()));
    let methods = ordered_unique(cells.iter().map(|c| c.method));
    let mut wins = vec![0usize; methods.len()];
    let mut verdicts = Vec::with_capacity(datasets.len());

    for dataset in &datasets {
        let row: Vec<&SampleCell> = methods
            .iter()
            .map(|m| {
                cells
                    .iter()
                    .find(|c| &c.dataset == dataset && c.method == *m)
                    .ok_or_else(|| Error::InvalidInput(format!("missing cell ({dataset}, {m})")))
            })
            .collect::<Result<_>>()?;
        let means: Vec<f64> = row.iter().map(|c| mean(&c.samples)).collect();
        let mut best = 0;
        for (i, &m) in means.iter().enumerate() {
            if m > means[best] {
                best = i;
            }
        }
        let mut comparisons = Vec::with_capacity(row.len());
        for (i, cell) in row.iter().enumerate() {
            let cmp = if i == best {
                Comparison {
                    method: cell.method,
                    t: None,
                    df: None,
                    p_value: None,
                    significantly_worse: false,
                    wins: true,
                }
            } else if cell.samples.len() < 2 || row[best].samples.len() < 2 {
                let tie = means[i] == means[best];
                Comparison {
                    method: cell.method,
                    t: None,
                    df: None,
                    p_value: None,
                    significantly_worse: !tie,
                    wins: tie,
                }
            } else {
                let w = welch_t_test(&cell.samples, &row[best].samples, significance)?;
                Comparison {
                    method: cell.method,
                    t: w.t.is_finite().then_some(w.t),
                    df: Some(w.df),
                    p_value: Some(w.p_value),
                    significantly_worse: w.significant,
                    wins: !w.significant,
                }
            };
            if cmp.wins {
                wins[i] += 1;
            }
            comparisons.push(cmp);
        }
        verdicts.push(DatasetVerdict {
            dataset: dataset.clone(),
            best: methods[best],
            comparisons,
        });
    }

    let frequencies = methods
        .iter()
        .zip(&wins)
        .map(|(&method, &w)| MethodFrequency {
            method,
            wins: w,
            datasets: datasets.len(),
            percent: 100.0 * w as f64 / datasets.len() as f64,
        })
        .collect();
    Ok(WinningSummary {
        verdicts,
        frequencies,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub datasets: Vec<String>,
    pub methods: Vec<MethodId>,
    pub repeats: usize,
    pub base_seed: u64,
    pub significance: f64,
    pub config: TrialConfig,
    pub trials: Vec<TrialRecord>,
    pub cells: Vec<CellSummary>,
    pub summary: WinningSummary,
}

impl ExperimentReport {
    /// Aggregates completed trials. Cells and verdicts use `cpcc_raw`.
    pub fn assemble(
        trials: Vec<TrialRecord>,
        repeats: usize,
        base_seed: u64,
        significance: f64,
        config: TrialConfig,
    ) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::InvalidInput("no trials to report".into()));
        }
        let datasets = ordered_unique(trials.iter().map(|t| t.dataset.clone()));
        let mut methods = ordered_unique(trials.iter().map(|t| t.method));
        methods.sort();
        let mut cells = Vec::new();
        let mut sample_cells = Vec::new();
        for d in &datasets {
            for &m in &methods {
                let samples: Vec<f64> = trials
                    .iter()
                    .filter(|t| &t.dataset == d && t.method == m)
                    .map(|t| t.cpcc_raw)
                    .collect();
                cells.push(CellSummary {
                    dataset: d.clone(),
                    method: m,
                    mean: mean(&samples),
                    std_dev: std_dev(&samples),
                    samples: samples.clone(),
                });
                sample_cells.push(SampleCell {
                    dataset: d.clone(),
                    method: m,
                    samples,
                });
            }
        }
        let summary = winning_frequency(&sample_cells, significance)?;
        Ok(Self {
            datasets,
            methods,
            repeats,
            base_seed,
            significance,
            config,
            trials,
            cells,
            summary,
        })
    }

    pub fn cell(&self, dataset: &str, method: MethodId) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.method == method)
    }

    pub fn frequency(&self, method: MethodId) -> Option<f64> {
        self.summary
            .frequencies
            .iter()
            .find(|f| f.method == method)
            .map(|f| f.percent)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Runs every (dataset, method) pair and assembles the report.
pub fn run_benchmark(
    datasets: &[(String, DataMatrix)],
    methods: &[MethodId],
    repeats: usize,
    base_seed: u64,
    cfg: &TrialConfig,
) -> Result<ExperimentReport> {
    let mut trials = Vec::new();
    for (name, data) in datasets {
        trials.extend(run_dataset(name, data, methods, repeats, base_seed, cfg)?);
    }
    ExperimentReport::assemble(trials, repeats, base_seed, DEFAULT_SIGNIFICANCE, *cfg)
}

pub const TABLE_FILE: &str = "cpcc_table.csv";
pub const FREQUENCY_FILE: &str = "winning_frequency.csv";
pub const REPORT_FILE: &str = "report.json";

/// Writes the mean-CPCC table (methods by datasets), the winning
/// frequencies and the full JSON report into `dir`.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    if report.trials.is_empty() || report.cells.is_empty() {
        return Err(Error::InvalidInput(
            "refusing to emit an empty report".into(),
        ));
    }
    fs::create_dir_all(dir)?;
    let header = format!(
        "# base_seed: {}\n# repeats: {}\n# significance: {}\n# config: {}\n",
        report.base_seed,
        report.repeats,
        report.significance,
        serde_json::to_string(&report.config)?
    );

    let mut table = header.clone();
    table.push_str("method");
    for d in &report.datasets {
        table.push(',');
        table.push_str(d);
    }
    table.push('\n');
    for &m in &report.methods {
        table.push_str(m.name());
        for d in &report.datasets {
            let mean = report.cell(d, m).map_or(f64::NAN, |c| c.mean);
            table.push_str(&format!(",{mean}"));
        }
        table.push('\n');
    }

    let mut freq = header;
    freq.push_str("method,wins,datasets,winning_frequency\n");
    for f in &report.summary.frequencies {
        freq.push_str(&format!(
            "{},{},{},{}\n",
            f.method, f.wins, f.datasets, f.percent
        ));
    }

    let paths = vec![
        dir.join(TABLE_FILE),
        dir.join(FREQUENCY_FILE),
        dir.join(REPORT_FILE),
    ];
    fs::write(&paths[0], table)?;
    fs::write(&paths[1], freq)?;
    fs::write(&paths[2], serde_json::to_string_pretty(report)?)?;
    Ok(paths)
}
