//! Command-line front end. Settings come from defaults, then the optional
//! `--config` JSON document, then flags.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::audit::{evaluate, factors_on, Factor, FactorBasis, OutcomeMetric, ReportMeta};
use crate::error::{Error, Result};
use crate::recommenders::{save_checkpoint, Algorithm, HyperParams};

pub use commands::{
    cmd_ingest, cmd_split, cmd_stats, create_run_dir, export_plots, format_stats, load_model_for, prepare,
    report_files, report_stem, run_pipeline, select_params, stats_table, train_selected, write_grid_csv, write_json,
    write_outcomes_csv, write_reports, write_stats_csv, write_summary_csv, PipelineOutcome, StatsRow, SummaryRow,
};
pub use config::{load_data_dir, RunConfig, Seeds};

#[derive(Debug, Parser)]
#[command(name = "recfair", version, about = "Gender-fairness audits of collaborative-filtering recommenders")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Recommendation list length.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Algorithms to run (comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    pub algo: Vec<Algorithm>,
    /// Profile factors to audit (comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    pub factor: Vec<Factor>,
    /// Outcome metrics to audit (comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    pub metric: Vec<OutcomeMetric>,
    #[arg(long, global = true)]
    pub buckets: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert the dataset to canonical CSV files.
    Ingest,
    /// Per-gender user counts and mean profile factors.
    Stats {
        /// Compute factors on all ratings or on the training split only.
        #[arg(long, default_value = "full")]
        basis: FactorBasis,
    },
    /// Write the seeded train/test split.
    Split,
    /// Grid search on a validation split of the training data.
    Gridsearch,
    /// Fit the selected (or given) configuration and save a checkpoint.
    Train {
        /// JSON file with fixed hyperparameters, skipping the grid search.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Per-user precision and miscalibration of a saved model.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Group reports of a saved model.
    Audit {
        #[arg(long)]
        model: PathBuf,
    },
    /// Every stage into a timestamped run directory.
    Pipeline,
    /// Collect the reports of a run directory into one plot table.
    ExportPlots {
        #[arg(long)]
        run: PathBuf,
    },
}

impl Cli {
    /// Defaults, overridden by the config file, overridden by flags.
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.data {
            c.data_dir = v.clone();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.out {
            c.out_dir = v.clone();
        }
        if let Some(v) = self.k {
            c.k = v;
        }
        if let Some(v) = self.buckets {
            c.buckets = v;
        }
        if !self.algo.is_empty() {
            c.algorithms = self.algo.clone();
        }
        if !self.factor.is_empty() {
            c.factors = self.factor.clone();
        }
        if !self.metric.is_empty() {
            c.metrics = self.metric.clone();
        }
        Ok(c)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = cli.resolve_config()?;
    if !matches!(cli.command, Command::ExportPlots { .. }) {
        config.validate()?;
    }
    let out = &config.out_dir;
    match &cli.command {
        Command::Ingest => {
            let dir = out.join("dataset");
            let ds = cmd_ingest(&config, &dir)?;
            println!(
                "{} users, {} items, {} ratings written to {}",
                ds.users().len(),
                ds.items().len(),
                ds.num_ratings(),
                dir.display()
            );
        }
        Command::Stats { basis } => print!("{}", format_stats(&cmd_stats(&config, *basis)?)),
        Command::Split => {
            let dir = out.join("split");
            let split = cmd_split(&config, &dir)?;
            println!(
                "{} training and {} test ratings written to {}",
                split.train.num_ratings(),
                split.test.num_ratings(),
                dir.display()
            );
        }
        Command::Gridsearch => {
            let (_, split) = prepare(&config)?;
            for &algorithm in &config.algorithms {
                let (best, search) = select_params(&config, algorithm, &split)?;
                match search {
                    Some(s) => {
                        let path = out.join("grid").join(format!("{}.csv", algorithm.tag()));
                        write_grid_csv(&s, &path)?;
                        println!("{algorithm}: {best} (precision {:.4}), table in {}", s.best_precision, path.display());
                    }
                    None => println!("{algorithm}: fixed by configuration: {best}"),
                }
            }
        }
        Command::Train { params } => {
            let mut config = config.clone();
            if let Some(path) = params {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let hp: HyperParams = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
                for &algorithm in &config.algorithms {
                    config.params.insert(algorithm, hp.clone());
                }
                config.validate()?;
            }
            let (_, split) = prepare(&config)?;
            for &algorithm in &config.algorithms {
                let (model, _) = train_selected(&config, algorithm, &split)?;
                let path = out.join("models").join(format!("{}.json", algorithm.tag()));
                std::fs::create_dir_all(out.join("models")).map_err(|e| Error::io(out, e))?;
                save_checkpoint(&model, &path)?;
                println!("{algorithm}: {} saved to {}", model.hyper, path.display());
            }
        }
        Command::Evaluate { model } => {
            let (_, split) = prepare(&config)?;
            let model = load_model_for(model, &split)?;
            let evaluation = evaluate(&split, &model, config.k, config.alpha, config.relevance_threshold)?;
            let path = out.join("outcomes").join(format!("{}.csv", model.algorithm.tag()));
            write_outcomes_csv(&evaluation, &path)?;
            let row = SummaryRow::new(model.algorithm, model.hyper.clone(), &evaluation);
            let summary = out.join("summary").join(format!("{}.csv", model.algorithm.tag()));
            write_summary_csv(std::slice::from_ref(&row), &summary)?;
            println!(
                "{}: precision {} (male {}, female {}), miscalibration {} (male {}, female {})",
                row.algorithm,
                show(row.precision),
                show(row.precision_male),
                show(row.precision_female),
                show(row.miscalibration),
                show(row.miscalibration_male),
                show(row.miscalibration_female)
            );
        }
        Command::Audit { model } => {
            let (ds, split) = prepare(&config)?;
            let model = load_model_for(model, &split)?;
            let evaluation = evaluate(&split, &model, config.k, config.alpha, config.relevance_threshold)?;
            let factors = factors_on(config.factor_basis, &ds, &split);
            let meta = ReportMeta {
                algorithm: model.algorithm,
                seed: config.seed,
            };
            let dir = out.join("reports").join(model.algorithm.tag());
            for report in write_reports(&config, &factors, &evaluation, &meta, &dir)? {
                println!(
                    "{} vs {} ({}): r = {}",
                    report.spec.factor,
                    report.outcome_metric,
                    report.spec.gender.label(),
                    show(report.correlation)
                );
            }
        }
        Command::Pipeline => {
            let outcome = run_pipeline(&config)?;
            print!("{}", format_stats(&outcome.stats));
            for row in &outcome.summary {
                println!(
                    "{:<11} precision {} / {}  miscalibration {} / {}  (male / female)",
                    row.algorithm.name(),
                    show(row.precision_male),
                    show(row.precision_female),
                    show(row.miscalibration_male),
                    show(row.miscalibration_female)
                );
            }
            println!("run directory: {}", outcome.run_dir.display());
        }
        Command::ExportPlots { run } => println!("{}", export_plots(run)?.display()),
    }
    Ok(())
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}
