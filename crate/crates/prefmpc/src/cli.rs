//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use prefmpc_core::learner::TrainedModel;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::experiment::{
    campaign_table, evaluate_models, init_sampler, initial_state, mpc_spec, random_weight, run_experiment,
    sample_test_set, sample_train_set, train_surrogate, write_artifacts, ExperimentConfig, Scenario,
};
use crate::formats::{load_dataset, load_model, read_json, save_dataset, save_model, write_json, DatasetBundle};
use crate::simulation::simulate;
use crate::table::{emit_figure_data, render_aligned};

#[derive(Debug, Parser)]
#[command(name = "prefmpc", version, about = "Learn MPC cost weights from pairwise trajectory preferences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON file whose fields override the scenario defaults.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the configuration file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Quadratic,
    Complex,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Quadratic => Scenario::Quadratic,
            ScenarioArg::Complex => Scenario::Complex,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a trajectory pool with a labeled test set and training sets.
    GenerateData {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        scenario: Option<ScenarioArg>,
        /// Training-set sizes (comma separated); defaults to the scenario sweep.
        #[arg(long, value_delimiter = ',')]
        nd: Vec<usize>,
        /// Drop pairs with equal settling times (complex scenario).
        #[arg(long)]
        drop_kappa_ties: bool,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Train a surrogate on a dataset file.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Selection set; without it the last fifth of the data is held out.
        #[arg(long, value_name = "PATH")]
        test: Option<PathBuf>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Closed-loop campaign of trained models against the baselines.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        scenario: Option<ScenarioArg>,
        /// Model files (comma separated or repeated).
        #[arg(long = "model", value_delimiter = ',', required = true)]
        models: Vec<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Full quadratic-oracle experiment.
    ReproduceQuadratic {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        nd: Vec<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Full settling-time experiment with the tie-break ablation.
    ReproduceComplex {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        nd: Vec<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// One closed-loop run of a model file, `oracle` or `random`.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        scenario: Option<ScenarioArg>,
        #[arg(long, value_name = "PATH|oracle|random")]
        model: String,
        /// Initial state (comma separated); defaults to the seeded draw of `--sim`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        /// Simulation index selecting the seeded initial state and random weights.
        #[arg(long, default_value_t = 0)]
        sim: usize,
        #[arg(long)]
        steps: Option<usize>,
        /// Writes `simulation.json` here instead of printing it.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// HTTP service for interactive preference elicitation.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

fn read_overrides(path: Option<&Path>) -> Result<Value> {
    match path {
        Some(p) => {
            let v: Value = read_json(p)?;
            if !v.is_object() {
                return Err(Error::Config(format!("{} must hold a JSON object", p.display())));
            }
            Ok(v)
        }
        None => Ok(Value::Object(Default::default())),
    }
}

fn file_scenario(overrides: &Value) -> Result<Option<Scenario>> {
    match overrides.get("scenario") {
        None => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| Error::Config(format!("scenario: {e}"))),
    }
}

/// Scenario defaults, then the configuration file, then the flags.
pub fn load_config(
    scenario: Option<Scenario>,
    common: &Common,
    nd: &[usize],
    restarts: Option<usize>,
) -> Result<ExperimentConfig> {
    let overrides = read_overrides(common.config.as_deref())?;
    let scenario = match scenario {
        Some(s) => s,
        None => file_scenario(&overrides)?.unwrap_or(Scenario::Quadratic),
    };
    let mut cfg = ExperimentConfig::with_overrides(scenario, common.seed.unwrap_or(0), &overrides)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if !nd.is_empty() {
        cfg.sweep = nd.to_vec();
    }
    if let Some(r) = restarts {
        cfg.train.restarts = r;
    }
    Ok(cfg)
}

fn model_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn generate_data(cfg: &ExperimentConfig, drop_kappa_ties: bool, out: &Path) -> Result<()> {
    cfg.validate()?;
    let system = cfg.system()?;
    let gen = cfg.gen_config();
    let pool = std::sync::Arc::new(prefmpc_core::dataset::generate_pool(&system, &gen)?);
    let oracle = cfg.oracle();
    let bundle = |dataset| DatasetBundle {
        system: system.clone(),
        config: gen.clone(),
        oracle: Some(oracle.clone()),
        dataset,
    };
    let test = sample_test_set(cfg, &pool, drop_kappa_ties)?;
    for &n_d in &cfg.sweep {
        let train = sample_train_set(cfg, &pool, drop_kappa_ties, n_d, &test)?;
        save_dataset(&out.join(format!("train_{n_d}.json")), &bundle(train))?;
    }
    save_dataset(&out.join("test.json"), &bundle(test))?;
    write_json(&out.join("config.json"), cfg)
}

/// Trains on `data`; the training settings come from `cfg.train` and the
/// initializations follow the dataset's weight sampling.
pub fn train_files(data: &Path, test: Option<&Path>, cfg: &ExperimentConfig) -> Result<TrainedModel> {
    let train = load_dataset(data)?;
    let test = match test {
        Some(p) => {
            let t = load_dataset(p)?;
            if t.dataset.pool() != train.dataset.pool() {
                return Err(Error::Config(format!(
                    "{} and {} were not drawn from the same trajectory pool",
                    data.display(),
                    p.display()
                )));
            }
            Some(prefmpc_core::dataset::PreferenceDataset::new(
                train.dataset.pool().clone(),
                t.dataset.pairs().to_vec(),
            )?)
        }
        None => None,
    };
    let mut sampler = init_sampler(cfg, train.system.nx(), train.system.nu());
    sampler.weights = train.config.weights.clone();
    train_surrogate(&train.dataset, test.as_ref(), &cfg.train_config(), &sampler)
}

pub fn run(cli: Cli) -> Result<()> {
    let mut stdout = std::io::stdout();
    match cli.command {
        Command::GenerateData {
            common,
            scenario,
            nd,
            drop_kappa_ties,
            out,
        } => {
            let cfg = load_config(scenario.map(Into::into), &common, &nd, None)?;
            generate_data(&cfg, drop_kappa_ties, &out)?;
            writeln!(stdout, "wrote datasets to {}", out.display()).ok();
        }
        Command::Train {
            common,
            data,
            test,
            restarts,
            out,
        } => {
            let bundle_seed = load_dataset(&data)?.config.seed;
            let mut cfg = load_config(None, &common, &[], restarts)?;
            let file_seed = read_overrides(common.config.as_deref())?.get("seed").is_some();
            if common.seed.is_none() && !file_seed {
                cfg.seed = bundle_seed;
            }
            let model = train_files(&data, test.as_deref(), &cfg)?;
            let path = out.join("model.json");
            save_model(&path, &model, &cfg.train_config())?;
            writeln!(
                stdout,
                "train accuracy {:.4}, selection accuracy {:.4}, restart {}; wrote {}",
                model.train_accuracy,
                model.test_accuracy.unwrap_or(f64::NAN),
                model.restart_index,
                path.display()
            )
            .ok();
        }
        Command::Evaluate {
            common,
            scenario,
            models,
            out,
        } => {
            let cfg = load_config(scenario.map(Into::into), &common, &[], None)?;
            let loaded = models
                .iter()
                .map(|p| Ok((model_name(p), load_model(p)?.0)))
                .collect::<Result<Vec<_>>>()?;
            let (names, campaign) = evaluate_models(&cfg, &loaded)?;
            let table = campaign_table(&campaign, cfg.t_sim);
            table.write(&out.join("table.tsv"))?;
            emit_figure_data(&names, &campaign, cfg.t_sim, &out)?;
            write!(stdout, "{}", render_aligned(&table)).ok();
        }
        Command::ReproduceQuadratic {
            common,
            nd,
            restarts,
            out,
        } => reproduce(Scenario::Quadratic, &common, &nd, restarts, &out)?,
        Command::ReproduceComplex {
            common,
            nd,
            restarts,
            out,
        } => reproduce(Scenario::Complex, &common, &nd, restarts, &out)?,
        Command::Simulate {
            common,
            scenario,
            model,
            x0,
            sim,
            steps,
            out,
        } => {
            let mut cfg = load_config(scenario.map(Into::into), &common, &[], None)?;
            if let Some(s) = steps {
                cfg.t_sim = s;
            }
            cfg.validate_setup()?;
            let system = cfg.system()?;
            let (q, r) = match model.as_str() {
                "oracle" => cfg.oracle_weights(),
                "random" => random_weight(&cfg, system.nx(), system.nu(), sim)?,
                path => load_model(Path::new(path))?.0.theta.matrices(),
            };
            let x0 = if x0.is_empty() {
                initial_state(&cfg, system.nx(), sim)
            } else {
                DVector::from_vec(x0)
            };
            let spec = mpc_spec(&cfg, &system, q, r)?;
            let doc = simulate(&spec, &x0, cfg.t_sim, cfg.eps, Some(&cfg.oracle_weights()))?;
            match out {
                Some(dir) => write_json(&dir.join("simulation.json"), &doc)?,
                None => {
                    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))?;
                    writeln!(stdout, "{text}").ok();
                }
            }
        }
        Command::Serve { common, host, port } => {
            let overrides = read_overrides(common.config.as_deref())?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::Config(format!("runtime: {e}")))?;
            runtime.block_on(crate::server::serve(&host, port, common.seed.unwrap_or(0), overrides))?;
        }
    }
    Ok(())
}

fn reproduce(scenario: Scenario, common: &Common, nd: &[usize], restarts: Option<usize>, out: &Path) -> Result<()> {
    let cfg = load_config(Some(scenario), common, nd, restarts)?;
    let result = run_experiment(&cfg)?;
    write_artifacts(&result, out)?;
    let mut stdout = std::io::stdout();
    write!(stdout, "{}", render_aligned(&result.table)).ok();
    writeln!(stdout, "artifacts in {}", out.display()).ok();
    Ok(())
}
