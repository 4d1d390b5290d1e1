// SPDX-License-Identifier: Apache-2.0
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bntrace::attack::{
    calibrate_threshold, empirical_roc, fit_population_model, fraction_at_or_below, statistics,
};
use bntrace::dataset::{self, Dataset, Schema};
use bntrace::harness::{self, ExperimentConfig};
use bntrace::learn::{self, PriorSpec, StructureSearchConfig};
use bntrace::network::BayesianNetwork;
use bntrace::theory;
use bntrace::{Error, Result};

#[derive(Parser)]
#[command(
    name = "bntrace",
    version,
    about = "Tracing risk of released Bayesian networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the complexity of a model's structure.
    Complexity {
        #[arg(long)]
        model: PathBuf,
    },
    /// Theoretical power curve and AUC for a complexity and pool size.
    Bound {
        #[arg(long)]
        complexity: f64,
        #[arg(long)]
        pool_size: f64,
        /// Cap power by a mu-GDP guarantee.
        #[arg(long)]
        gdp_mu: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learn structure and parameters from a dataset.
    Learn {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        eta: usize,
        #[arg(long, default_value_t = 1.0)]
        prior: f64,
        /// Warn about CPT rows supported by fewer records.
        #[arg(long, default_value_t = 50)]
        min_support: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Release synthetic data drawn from a posterior sample of a learned model.
    Synthesize {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        eta: usize,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        prior: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw records from a model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the schema sidecar here.
        #[arg(long)]
        schema_out: Option<PathBuf>,
    },
    /// Score pool members against non-members with the likelihood-ratio test.
    Attack {
        #[arg(long)]
        released: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        nonmembers: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        prior: f64,
        /// Report the threshold and power at this false-positive rate.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run repeated-split experiments; several configs yield a comparison table.
    Experiment {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Directory for report.json, roc.dat and bound.dat (one subdirectory
        /// per config when several are given).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        table_csv: Option<PathBuf>,
    },
    /// Variance of the statistic for a Naive-Bayes structure.
    NbVariance {
        #[arg(long)]
        attributes: u64,
        #[arg(long)]
        pool_size: f64,
        #[arg(long)]
        p1: f64,
    },
}

fn write(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Complexity { model } => {
            println!("{}", BayesianNetwork::load(&model)?.complexity());
        }
        Command::Bound {
            complexity,
            pool_size,
            gdp_mu,
            out,
        } => {
            let mut profile = theory::lr_moments(complexity, pool_size)?;
            if let Some(mu) = gdp_mu {
                profile = profile.with_gdp(mu)?;
            }
            let grid = theory::log_grid(harness::ALPHA_GRID_MIN, 1.0, harness::ALPHA_GRID_POINTS);
            let curve = theory::bound_curve(&profile, &grid)?;
            println!("auc {:.6}", curve.auc);
            if let Some(out) = out {
                let mut comments = vec![format!(
                    "bound for complexity {complexity} pool {pool_size}"
                )];
                if let Some(mu) = gdp_mu {
                    comments.push(format!("capped by {mu}-GDP"));
                }
                comments.push(format!("AUC {:.6}", curve.auc));
                comments.push("alpha power".into());
                write(&out, &curve.to_dat(&comments))?;
            }
        }
        Command::Learn {
            data,
            schema,
            eta,
            prior,
            min_support,
            out,
        } => {
            let data = dataset::load_csv(&data, schema.as_deref())?;
            let prior = PriorSpec::new(prior)?;
            let structure = learn::learn_structure(&data, &StructureSearchConfig::with_eta(eta))?;
            let model = learn::learn_parameters(&data, &structure, &prior)?;
            model.save(&out)?;
            println!(
                "edges {} complexity {}",
                structure.edge_count(),
                structure.complexity()
            );
            for w in learn::min_support_filter(&model, min_support)? {
                eprintln!(
                    "warning: {} row {} estimated from {} records",
                    model.names()[w.node],
                    w.row,
                    w.support
                );
            }
        }
        Command::Synthesize {
            data,
            schema,
            eta,
            count,
            seed,
            prior,
            out,
        } => {
            let data = dataset::load_csv(&data, schema.as_deref())?;
            let synth = learn::synthesize(&data, eta, count, seed, &PriorSpec::new(prior)?)?;
            synth.write_csv(&out)?;
        }
        Command::Sample {
            model,
            count,
            seed,
            out,
            schema_out,
        } => {
            let model = BayesianNetwork::load(&model)?;
            model.sample(count, seed).write_csv(&out)?;
            if let Some(path) = schema_out {
                write(&path, &model.schema().to_sidecar())?;
            }
        }
        Command::Attack {
            released,
            pool,
            reference,
            nonmembers,
            prior,
            alpha,
            out,
        } => {
            let released = BayesianNetwork::load(&released)?;
            let schema = released.schema();
            let load = |p: &Path| -> Result<Dataset> { read_with_schema(p, &schema) };
            let (pool, reference, nonmembers) =
                (load(&pool)?, load(&reference)?, load(&nonmembers)?);
            let population =
                fit_population_model(&reference, released.structure(), &PriorSpec::new(prior)?)?;
            let pool_stats = statistics(&population, &released, &pool)?;
            let other_stats = statistics(&population, &released, &nonmembers)?;
            let roc = empirical_roc(&pool_stats, &other_stats)?;
            println!("auc {:.6}", roc.auc);
            if let Some(alpha) = alpha {
                let threshold = calibrate_threshold(&other_stats, alpha)?;
                println!(
                    "alpha {alpha} threshold {threshold:.6} power {:.6}",
                    fraction_at_or_below(&pool_stats, threshold)
                );
            }
            if let Some(out) = out {
                write(
                    &out,
                    &roc.to_dat(&[format!("AUC {:.6}", roc.auc), "alpha power".into()]),
                )?;
            }
        }
        Command::Experiment {
            configs,
            out_dir,
            table_csv,
        } => {
            let mut reports = Vec::with_capacity(configs.len());
            for (i, path) in configs.iter().enumerate() {
                let report = harness::run_experiment(&ExperimentConfig::load(path)?)?;
                if let Some(dir) = &out_dir {
                    let dir = if configs.len() == 1 {
                        dir.clone()
                    } else {
                        dir.join(format!("config{i}"))
                    };
                    harness::write_report(&report, &dir)?;
                }
                if !report.support_warnings.is_empty() {
                    eprintln!(
                        "warning: {} low-support CPT rows in the first split of {}",
                        report.support_warnings.len(),
                        path.display()
                    );
                }
                reports.push(report);
            }
            let table = harness::compare_table(&reports)?;
            print!("{}", table.text);
            if let Some(path) = table_csv {
                write(&path, &table.csv)?;
            }
        }
        Command::NbVariance {
            attributes,
            pool_size,
            p1,
        } => {
            println!(
                "{}",
                theory::naive_bayes_variance(attributes, pool_size, p1)?
            );
        }
    }
    Ok(())
}

fn read_with_schema(path: &Path, schema: &Schema) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    dataset::read_csv(file, Some(schema))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
