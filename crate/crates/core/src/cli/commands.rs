//! Library side of the subcommands. Everything the binary does is reachable
//! from here, so runs can be driven from tests as well.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{RunConfig, Seeds};
use crate::audit::{
    build_report, evaluate, factors_on, read_report, write_report, BucketSpec, Evaluation, FactorBasis, GroupReport,
    OutcomeMetric, ReportMeta,
};
use crate::data::{split_train_test, write_canonical, Gender, RatingDataset, SplitPair};
use crate::error::{Error, Result};
use crate::metrics::{user_factors, UserFactors};
use crate::recommenders::{
    fit, grid_search, load_checkpoint, Algorithm, GridSearchOutcome, HyperParams, RecommenderModel, TrainingIndex,
};

/// One row of the per-gender dataset table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsRow {
    pub gender: Gender,
    pub users: usize,
    pub ratings: usize,
    pub mean_anomaly: f64,
    pub mean_entropy: f64,
    pub mean_size: f64,
}

/// Per-gender means of profile factors. Genders without any rated profile
/// are left out, so an empty dataset gives an empty table.
pub fn stats_table(factors: &[UserFactors], ds: &RatingDataset) -> Vec<StatsRow> {
    Gender::ALL
        .into_iter()
        .filter_map(|gender| {
            let group: Vec<&UserFactors> = factors
                .iter()
                .filter(|f| ds.user(f.user).is_some_and(|u| u.gender == gender))
                .collect();
            if group.is_empty() {
                return None;
            }
            let n = group.len() as f64;
            let ratings: usize = group.iter().map(|f| f.size).sum();
            Some(StatsRow {
                gender,
                users: group.len(),
                ratings,
                mean_anomaly: group.iter().map(|f| f.anomaly).sum::<f64>() / n,
                mean_entropy: group.iter().map(|f| f.entropy).sum::<f64>() / n,
                mean_size: ratings as f64 / n,
            })
        })
        .collect()
}

/// Dataset table on the chosen basis. The train basis uses the configured
/// split.
pub fn cmd_stats(config: &RunConfig, basis: FactorBasis) -> Result<Vec<StatsRow>> {
    let ds = config.load_dataset()?;
    let factors = match basis {
        FactorBasis::Full => user_factors(&ds),
        FactorBasis::Train => user_factors(&split_train_test(&ds, config.split_ratio, config.seeds().split)?.train),
    };
    Ok(stats_table(&factors, &ds))
}

pub fn format_stats(rows: &[StatsRow]) -> String {
    let mut out = format!(
        "{:<8} {:>7} {:>9} {:>9} {:>9} {:>9}\n",
        "gender", "users", "ratings", "anomaly", "entropy", "size"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<8} {:>7} {:>9} {:>9.4} {:>9.4} {:>9.2}\n",
            r.gender.label(),
            r.users,
            r.ratings,
            r.mean_anomaly,
            r.mean_entropy,
            r.mean_size
        ));
    }
    out
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::csv(path, e))
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| v.to_string())
}

pub fn write_stats_csv(rows: &[StatsRow], path: &Path) -> Result<()> {
    write_rows(
        path,
        &["gender", "users", "ratings", "mean_anomaly", "mean_entropy", "mean_size"],
        rows.iter().map(|r| {
            [
                r.gender.label().to_string(),
                r.users.to_string(),
                r.ratings.to_string(),
                r.mean_anomaly.to_string(),
                r.mean_entropy.to_string(),
                r.mean_size.to_string(),
            ]
        }),
    )
}

pub fn write_grid_csv(outcome: &GridSearchOutcome, path: &Path) -> Result<()> {
    write_rows(
        path,
        &["index", "params", "precision", "error", "selected"],
        outcome.entries.iter().enumerate().map(|(n, e)| {
            [
                n.to_string(),
                e.params.to_string(),
                opt(e.precision),
                e.error.clone().unwrap_or_default(),
                (n == outcome.best_index).to_string(),
            ]
        }),
    )
}

pub fn write_outcomes_csv(evaluation: &Evaluation, path: &Path) -> Result<()> {
    write_rows(
        path,
        &["user_id", "gender", "precision", "miscalibration"],
        evaluation.outcomes.iter().map(|o| {
            [
                o.user.to_string(),
                o.gender.code().to_string(),
                o.precision.to_string(),
                opt(o.miscalibration),
            ]
        }),
    )
}

/// Precision and miscalibration of one algorithm, overall and per gender.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub params: HyperParams,
    pub precision: Option<f64>,
    pub precision_male: Option<f64>,
    pub precision_female: Option<f64>,
    pub miscalibration: Option<f64>,
    pub miscalibration_male: Option<f64>,
    pub miscalibration_female: Option<f64>,
}

impl SummaryRow {
    pub fn new(algorithm: Algorithm, params: HyperParams, evaluation: &Evaluation) -> Self {
        let p = |g| evaluation.mean(OutcomeMetric::Precision, g);
        let m = |g| evaluation.mean(OutcomeMetric::Miscalibration, g);
        Self {
            algorithm,
            params,
            precision: p(None),
            precision_male: p(Some(Gender::Male)),
            precision_female: p(Some(Gender::Female)),
            miscalibration: m(None),
            miscalibration_male: m(Some(Gender::Male)),
            miscalibration_female: m(Some(Gender::Female)),
        }
    }
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    write_rows(
        path,
        &[
            "algorithm",
            "precision",
            "precision_male",
            "precision_female",
            "miscalibration",
            "miscalibration_male",
            "miscalibration_female",
            "params",
        ],
        rows.iter().map(|r| {
            [
                r.algorithm.name().to_string(),
                opt(r.precision),
                opt(r.precision_male),
                opt(r.precision_female),
                opt(r.miscalibration),
                opt(r.miscalibration_male),
                opt(r.miscalibration_female),
                r.params.to_string(),
            ]
        }),
    )
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads the dataset and applies the configured split.
pub fn prepare(config: &RunConfig) -> Result<(RatingDataset, SplitPair)> {
    let ds = config.load_dataset()?;
    let split = split_train_test(&ds, config.split_ratio, config.seeds().split)?;
    Ok((ds, split))
}

/// Hyperparameters for `algorithm`: the fixed ones from the config, or the
/// winner of a grid search on a validation split of the training part.
pub fn select_params(
    config: &RunConfig,
    algorithm: Algorithm,
    split: &SplitPair,
) -> Result<(HyperParams, Option<GridSearchOutcome>)> {
    if let Some(hp) = config.params.get(&algorithm) {
        return Ok((hp.clone(), None));
    }
    let seeds = config.seeds();
    let inner = split_train_test(&split.train, config.validation_ratio, seeds.validation)?;
    let outcome = grid_search(
        algorithm,
        &inner.train,
        &inner.test,
        &config.grid,
        config.k,
        seeds.model,
        config.relevance_threshold,
    )?;
    Ok((outcome.best.clone(), Some(outcome)))
}

pub fn train_selected(config: &RunConfig, algorithm: Algorithm, split: &SplitPair) -> Result<(RecommenderModel, Option<GridSearchOutcome>)> {
    let (hp, search) = select_params(config, algorithm, split)?;
    let model = fit(algorithm, &split.train, &hp, config.seeds().model)?;
    Ok((model, search))
}

/// Loads a checkpoint and checks that it was trained on this config's split.
pub fn load_model_for(path: &Path, split: &SplitPair) -> Result<RecommenderModel> {
    let model = load_checkpoint(path)?;
    if model.fingerprint != TrainingIndex::new(&split.train).fingerprint() {
        return Err(Error::Config(format!(
            "{} was not trained on the training split of this configuration",
            path.display()
        )));
    }
    Ok(model)
}

pub fn report_stem(spec: &BucketSpec, metric: OutcomeMetric) -> String {
    format!("{}_{}_{}", spec.factor, metric, spec.gender.label())
}

/// Builds and writes every (factor, metric, gender) report of one model
/// under `dir`.
pub fn write_reports(
    config: &RunConfig,
    factors: &[UserFactors],
    evaluation: &Evaluation,
    meta: &ReportMeta,
    dir: &Path,
) -> Result<Vec<GroupReport>> {
    let mut out = Vec::new();
    for &factor in &config.factors {
        for &metric in &config.metrics {
            for gender in Gender::ALL {
                let spec = BucketSpec {
                    factor,
                    num_buckets: config.buckets,
                    gender,
                };
                let report = build_report(&spec, metric, factors, evaluation)?;
                write_report(&report, meta, dir, &report_stem(&spec, metric))?;
                out.push(report);
            }
        }
    }
    Ok(out)
}

/// Everything a pipeline run produced, besides the files.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub run_dir: PathBuf,
    pub seeds: Seeds,
    pub stats: Vec<StatsRow>,
    pub summary: Vec<SummaryRow>,
    pub evaluations: Vec<(Algorithm, Evaluation)>,
    pub reports: Vec<(Algorithm, GroupReport)>,
}

/// Removes the lock file when the run ends, successfully or not.
struct RunLock(PathBuf);

impl RunLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(".lock");
        fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| Error::Config(format!("run directory {} is locked: {e}", dir.display())))?;
        Ok(Self(path))
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Creates `<out>/run-<timestamp>`, adding a counter when the name is taken.
pub fn create_run_dir(out: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let stamp = chrono::Local::now().format("run-%Y%m%dT%H%M%S").to_string();
    for n in 0.. {
        let name = if n == 0 { stamp.clone() } else { format!("{stamp}-{n}") };
        let dir = out.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(dir, e)),
        }
    }
    unreachable!()
}

/// Split, model selection, training, evaluation and audit of every
/// configured algorithm, written into a fresh run directory under
/// `config.out_dir`.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutcome> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let run_dir = create_run_dir(&config.out_dir).map_err(|e| e.in_stage("setup"))?;
    let _lock = RunLock::acquire(&run_dir)?;
    let seeds = config.seeds();
    write_json(config, &run_dir.join("config.json")).map_err(|e| e.in_stage("setup"))?;
    write_json(&seeds, &run_dir.join("seeds.json")).map_err(|e| e.in_stage("setup"))?;

    let (ds, split) = prepare(config).map_err(|e| e.in_stage("split"))?;
    log::info!(
        "split: {} training and {} test ratings",
        split.train.num_ratings(),
        split.test.num_ratings()
    );
    let factors = factors_on(config.factor_basis, &ds, &split);
    let stats = stats_table(&factors, &ds);
    write_stats_csv(&stats, &run_dir.join("stats.csv")).map_err(|e| e.in_stage("stats"))?;

    let mut summary = Vec::new();
    let mut evaluations = Vec::new();
    let mut reports = Vec::new();
    for &algorithm in &config.algorithms {
        log::info!("{algorithm}: model selection");
        let (hp, search) = select_params(config, algorithm, &split).map_err(|e| e.in_stage("gridsearch"))?;
        if let Some(search) = &search {
            write_grid_csv(search, &run_dir.join("grid").join(format!("{}.csv", algorithm.tag())))
                .map_err(|e| e.in_stage("gridsearch"))?;
        }
        log::info!("{algorithm}: fitting {hp}");
        let model = fit(algorithm, &split.train, &hp, seeds.model).map_err(|e| e.in_stage("train"))?;
        let evaluation = evaluate(&split, &model, config.k, config.alpha, config.relevance_threshold)
            .map_err(|e| e.in_stage("evaluate"))?;
        write_outcomes_csv(&evaluation, &run_dir.join("outcomes").join(format!("{}.csv", algorithm.tag())))
            .map_err(|e| e.in_stage("evaluate"))?;
        summary.push(SummaryRow::new(algorithm, hp, &evaluation));

        let meta = ReportMeta {
            algorithm,
            seed: config.seed,
        };
        let dir = run_dir.join("reports").join(algorithm.tag());
        for report in write_reports(config, &factors, &evaluation, &meta, &dir).map_err(|e| e.in_stage("audit"))? {
            reports.push((algorithm, report));
        }
        evaluations.push((algorithm, evaluation));
    }
    write_summary_csv(&summary, &run_dir.join("summary.csv")).map_err(|e| e.in_stage("summary"))?;
    Ok(PipelineOutcome {
        run_dir,
        seeds,
        stats,
        summary,
        evaluations,
        reports,
    })
}

/// Every report file of a run directory, relative to it, sorted.
pub fn report_files(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let root = run_dir.join("reports");
    let mut out = Vec::new();
    let mut stack = vec![root.clone()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(run_dir).expect("under run dir").to_path_buf());
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Collects every report of a run directory into one long-format table,
/// `plots.csv`, with one line per bucket.
pub fn export_plots(run_dir: &Path) -> Result<PathBuf> {
    let path = run_dir.join("plots.csv");
    let mut w = csv_writer(&path)?;
    w.write_record([
        "algorithm",
        "factor",
        "metric",
        "gender",
        "correlation",
        "bucket",
        "mean_factor",
        "mean_outcome",
        "user_count",
    ])
    .map_err(|e| Error::csv(&path, e))?;
    for rel in report_files(run_dir)? {
        if rel.extension().is_none_or(|e| e != "json") {
            continue;
        }
        let full = run_dir.join(&rel);
        let dir = full.parent().expect("report file has a parent");
        let stem = full.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let (sidecar, rows) = read_report(dir, stem)?;
        for row in rows {
            w.write_record([
                sidecar.algorithm.name().to_string(),
                sidecar.spec.factor.to_string(),
                sidecar.outcome_metric.to_string(),
                sidecar.spec.gender.label().to_string(),
                opt(sidecar.correlation),
                row.bucket.to_string(),
                row.mean_factor.to_string(),
                opt(row.mean_outcome),
                row.user_count.to_string(),
            ])
            .map_err(|e| Error::csv(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the dataset as canonical CSV files into `dir`.
pub fn cmd_ingest(config: &RunConfig, dir: &Path) -> Result<RatingDataset> {
    let ds = config.load_dataset()?;
    write_canonical(&ds, dir)?;
    Ok(ds)
}

/// Writes the configured split as two canonical datasets, `train/` and
/// `test/`, under `dir`.
pub fn cmd_split(config: &RunConfig, dir: &Path) -> Result<SplitPair> {
    let (_, split) = prepare(config)?;
    write_canonical(&split.train, &dir.join("train"))?;
    write_canonical(&split.test, &dir.join("test"))?;
    Ok(split)
}
