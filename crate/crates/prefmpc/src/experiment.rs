//! The two synthetic-oracle experiments: dataset generation, training sweeps
//! and closed-loop campaigns, reduced to tables and plot-ready data.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use prefmpc_core::dataset::{
    build_pairs, build_pairs_excluding, generate_pool, sample_initial_state, GenConfig, PreferenceDataset,
    TrajectoryPool,
};
use prefmpc_core::learner::{select_best, train_multistart, train_restarts, RandomInit, TrainConfig, TrainedModel};
use prefmpc_core::linsys::make_oscillating_masses;
use prefmpc_core::mpc::{
    evaluate_campaign, CampaignConfig, CampaignEntry, CampaignResult, Controller, InputBounds, MpcSpec,
};
use prefmpc_core::oracle::accuracy;
use prefmpc_core::rng::{self, domain};
use prefmpc_core::trajectory::quad_cost;
use prefmpc_core::{LinearSystem, Preference, PreferenceOracle, SettlingResult};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::formats::{
    matrix_rows, save_dataset, save_model, write_json, DatasetBundle, GenConfigDoc, RangeDoc, TrainConfigDoc,
    WeightSamplingDoc,
};
use crate::table::{emit_figure_data, fmt_opt, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Quadratic oracle, bounded inputs.
    Quadratic,
    /// Settling-time oracle with the input tie-break, unbounded inputs.
    Complex,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Quadratic => "quadratic",
            Scenario::Complex => "complex",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    pub mass: f64,
    pub spring: f64,
    pub sample_time: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            mass: 1.0,
            spring: 2.0,
            sample_time: 0.2,
        }
    }
}

/// Every setting of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub plant: PlantConfig,
    pub n_t: usize,
    /// Trajectory horizon of the pool and prediction horizon of every MPC.
    pub horizon: usize,
    pub position_range: RangeDoc,
    pub velocity_range: RangeDoc,
    pub weights: WeightSamplingDoc,
    pub train: TrainConfigDoc,
    /// Training-set sizes.
    pub sweep: Vec<usize>,
    pub test_size: usize,
    pub simulations: usize,
    pub t_sim: usize,
    /// Output threshold of the settling time.
    pub eps: f64,
    /// Symmetric input limit of every MPC; `None` leaves inputs unbounded.
    pub input_bound: Option<f64>,
    /// Diagonals of the oracle weights (quadratic scenario).
    pub oracle_q: Vec<f64>,
    pub oracle_r: Vec<f64>,
}

impl ExperimentConfig {
    pub fn quadratic(seed: u64) -> Self {
        let gen = GenConfig::quadratic(seed);
        Self {
            scenario: Scenario::Quadratic,
            seed,
            plant: PlantConfig::default(),
            n_t: gen.n_t,
            horizon: gen.horizon,
            position_range: gen.position_range.into(),
            velocity_range: gen.velocity_range.into(),
            weights: (&gen.weights).into(),
            train: TrainConfigDoc::default(),
            sweep: vec![20, 60, 100, 400, 1000],
            test_size: 500,
            simulations: 200,
            t_sim: 30,
            eps: 0.1,
            input_bound: Some(1.0),
            oracle_q: vec![40.0, 40.0, 40.0, 5.0, 5.0, 5.0],
            oracle_r: vec![0.2, 0.2],
        }
    }

    pub fn complex(seed: u64) -> Self {
        let gen = GenConfig::settling(seed);
        Self {
            scenario: Scenario::Complex,
            horizon: gen.horizon,
            weights: (&gen.weights).into(),
            sweep: vec![20, 100, 400, 1000],
            input_bound: None,
            ..Self::quadratic(seed)
        }
    }

    pub fn defaults(scenario: Scenario, seed: u64) -> Self {
        match scenario {
            Scenario::Quadratic => Self::quadratic(seed),
            Scenario::Complex => Self::complex(seed),
        }
    }

    /// Scenario defaults overlaid with the fields present in `overrides`
    /// (nested objects merge key by key). The result is not validated.
    pub fn with_overrides(scenario: Scenario, seed: u64, overrides: &Value) -> Result<Self> {
        let mut base = serde_json::to_value(Self::defaults(scenario, seed)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, overrides);
        let cfg: Self = serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.scenario != scenario {
            return Err(Error::Config(format!(
                "configuration is for the {} scenario, expected {}",
                cfg.scenario.name(),
                scenario.name()
            )));
        }
        Ok(cfg)
    }

    pub fn gen_config(&self) -> GenConfig {
        let doc = GenConfigDoc {
            n_t: self.n_t,
            horizon: self.horizon,
            position_range: self.position_range,
            velocity_range: self.velocity_range,
            weights: self.weights.clone(),
            seed: self.seed,
        };
        (&doc).into()
    }

    pub fn train_config(&self) -> TrainConfig {
        (&self.train).into()
    }

    pub fn system(&self) -> Result<LinearSystem> {
        Ok(make_oscillating_masses(
            self.plant.mass,
            self.plant.spring,
            self.plant.sample_time,
        )?)
    }

    pub fn oracle_weights(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        (
            DMatrix::from_diagonal(&DVector::from_column_slice(&self.oracle_q)),
            DMatrix::from_diagonal(&DVector::from_column_slice(&self.oracle_r)),
        )
    }

    pub fn oracle(&self) -> PreferenceOracle {
        match self.scenario {
            Scenario::Quadratic => {
                let (q, r) = self.oracle_weights();
                PreferenceOracle::Quadratic { q, r }
            }
            Scenario::Complex => PreferenceOracle::Settling { eps: self.eps },
        }
    }

    pub fn bounds(&self, nu: usize) -> Option<InputBounds> {
        self.input_bound.map(|b| InputBounds::symmetric(nu, b))
    }

    /// Full check, including that the sweep and test set fit in the pool.
    pub fn validate(&self) -> Result<()> {
        self.validate_setup()?;
        if self.sweep.is_empty() || self.sweep.contains(&0) {
            return Err(Error::Config("sweep sizes must be positive".into()));
        }
        let ordered = self.n_t * self.n_t.saturating_sub(1);
        let largest = self.sweep.iter().copied().max().unwrap_or(0);
        if self.test_size == 0 || largest + self.test_size > ordered {
            return Err(Error::Config(format!(
                "{} ordered pairs cannot hold a {}-pair test set and a {largest}-pair training set",
                ordered, self.test_size
            )));
        }
        if self.simulations == 0 {
            return Err(Error::Config("simulations must be positive".into()));
        }
        Ok(())
    }

    /// Checks the plant, pool, training and closed-loop settings only.
    pub fn validate_setup(&self) -> Result<()> {
        let sys = self.system()?;
        self.gen_config().validate(&sys)?;
        self.train_config().validate()?;
        if self.t_sim == 0 {
            return Err(Error::Config("t_sim must be positive".into()));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::Config("eps must be non-negative".into()));
        }
        if let Some(b) = self.input_bound {
            if !(b >= 0.0) {
                return Err(Error::Config("input bound must be non-negative".into()));
            }
        }
        if self.oracle_q.len() != sys.nx() || self.oracle_r.len() != sys.nu() {
            return Err(Error::Config("oracle weight diagonals do not match the plant".into()));
        }
        if self.oracle_q.iter().chain(&self.oracle_r).any(|v| !(*v > 0.0)) {
            return Err(Error::Config("oracle weights must be positive".into()));
        }
        Ok(())
    }
}

fn merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

/// One trained surrogate of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepModel {
    pub n_d: usize,
    pub model: TrainedModel,
    /// Mean training time over all restarts, in seconds.
    pub mean_wall_time: f64,
}

/// A labeling of the pool with its training sweep and closed-loop campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    /// Short name used in file names (`main`, `with_tiebreak`, `without_tiebreak`).
    pub label: String,
    pub drop_kappa_ties: bool,
    pub test: PreferenceDataset,
    pub train_sets: Vec<PreferenceDataset>,
    pub models: Vec<SweepModel>,
    /// Mean test accuracy of the random-weight surrogates.
    pub random_test_accuracy: f64,
    pub entry_names: Vec<String>,
    pub campaign: CampaignResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub system: LinearSystem,
    pub oracle: PreferenceOracle,
    pub pool: Arc<TrajectoryPool>,
    pub initial_states: Vec<DVector<f64>>,
    /// Weights of the per-simulation random baseline.
    pub random_weights: Vec<(DMatrix<f64>, DMatrix<f64>)>,
    pub variants: Vec<Variant>,
    /// Deterministic result table.
    pub table: Table,
    /// Training wall times, kept apart so that `table` is reproducible byte for byte.
    pub timings: Table,
}

pub const ORACLE_ROW: &str = "oracle";
pub const RANDOM_ROW: &str = "random";

pub fn sigma_name(n_d: usize) -> String {
    format!("sigma_{n_d}")
}

/// Fraction of `dataset` labeled correctly by the score comparison under `(q, r)`.
pub fn weights_accuracy(q: &DMatrix<f64>, r: &DMatrix<f64>, dataset: &PreferenceDataset) -> Result<f64> {
    let scores = dataset
        .pool()
        .trajectories()
        .iter()
        .map(|t| quad_cost(t, q, r))
        .collect::<prefmpc_core::Result<Vec<_>>>()?;
    let predicted: Vec<Preference> = dataset
        .pairs()
        .iter()
        .map(|p| Preference::first_if(scores[p.i] <= scores[p.j]))
        .collect();
    Ok(accuracy(&predicted, &dataset.labels())?)
}

struct Shared {
    config: ExperimentConfig,
    system: LinearSystem,
    oracle: PreferenceOracle,
    pool: Arc<TrajectoryPool>,
    initial_states: Vec<DVector<f64>>,
    random_weights: Vec<(DMatrix<f64>, DMatrix<f64>)>,
}

fn prepare(config: &ExperimentConfig) -> Result<Shared> {
    config.validate()?;
    let system = config.system()?;
    let pool = Arc::new(generate_pool(&system, &config.gen_config())?);
    Ok(Shared {
        oracle: config.oracle(),
        initial_states: initial_states(config, system.nx()),
        random_weights: random_weights(config, system.nx(), system.nu())?,
        config: config.clone(),
        system,
        pool,
    })
}

/// Initial states of the closed-loop simulations, one stream per simulation.
pub fn initial_states(config: &ExperimentConfig, nx: usize) -> Vec<DVector<f64>> {
    (0..config.simulations)
        .map(|s| initial_state(config, nx, s))
        .collect()
}

pub fn initial_state(config: &ExperimentConfig, nx: usize, sim: usize) -> DVector<f64> {
    let mut r = rng::stream(config.seed, domain::SIM_X0, sim as u64);
    sample_initial_state(&mut r, nx, config.position_range.into(), config.velocity_range.into())
}

/// Weights of the per-simulation random baseline.
pub fn random_weights(config: &ExperimentConfig, nx: usize, nu: usize) -> Result<Vec<(DMatrix<f64>, DMatrix<f64>)>> {
    (0..config.simulations)
        .map(|s| random_weight(config, nx, nu, s))
        .collect()
}

pub fn random_weight(config: &ExperimentConfig, nx: usize, nu: usize, sim: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut r = rng::stream(config.seed, domain::SIM_RANDOM_WEIGHTS, sim as u64);
    let weights: prefmpc_core::dataset::WeightSampling = (&config.weights).into();
    Ok(weights.sample(&mut r, nx, nu)?)
}

/// Stream index offset separating the pair samples of the two labelings.
const ABLATION_OFFSET: u64 = 1 << 32;

/// The held-out pairs used for model selection and reporting.
pub fn sample_test_set(
    config: &ExperimentConfig,
    pool: &Arc<TrajectoryPool>,
    drop_kappa_ties: bool,
) -> Result<PreferenceDataset> {
    let offset = if drop_kappa_ties { ABLATION_OFFSET } else { 0 };
    let mut r = rng::stream(config.seed, domain::TEST_PAIRS, offset);
    Ok(build_pairs(pool, config.test_size, &config.oracle(), &mut r, drop_kappa_ties)?)
}

/// `n_d` training pairs disjoint from `test`; each size has its own stream.
pub fn sample_train_set(
    config: &ExperimentConfig,
    pool: &Arc<TrajectoryPool>,
    drop_kappa_ties: bool,
    n_d: usize,
    test: &PreferenceDataset,
) -> Result<PreferenceDataset> {
    let offset = if drop_kappa_ties { ABLATION_OFFSET } else { 0 };
    let mut r = rng::stream(config.seed, domain::TRAIN_PAIRS, offset + n_d as u64);
    Ok(build_pairs_excluding(
        pool,
        n_d,
        &config.oracle(),
        &mut r,
        drop_kappa_ties,
        test.pairs(),
    )?)
}

/// Learner initializations drawn like the pool's LQR weights.
pub fn init_sampler(config: &ExperimentConfig, nx: usize, nu: usize) -> RandomInit {
    RandomInit {
        weights: (&config.weights).into(),
        nx,
        nu,
        seed: config.seed,
    }
}

fn run_variant(shared: &Shared, label: &str, drop_kappa_ties: bool, with_oracle_row: bool) -> Result<Variant> {
    let cfg = &shared.config;
    let test = sample_test_set(cfg, &shared.pool, drop_kappa_ties)?;
    let train_config = cfg.train_config();
    let sampler = init_sampler(cfg, shared.system.nx(), shared.system.nu());
    let mut train_sets = Vec::with_capacity(cfg.sweep.len());
    let mut models = Vec::with_capacity(cfg.sweep.len());
    for &n_d in &cfg.sweep {
        let train = sample_train_set(cfg, &shared.pool, drop_kappa_ties, n_d, &test)?;
        let restarts = train_restarts(&train, &test, &train_config, &sampler);
        let times: Vec<f64> = restarts.iter().filter_map(|r| r.as_ref().ok()).map(|m| m.wall_time).collect();
        let mean_wall_time = if times.is_empty() {
            0.0
        } else {
            times.iter().sum::<f64>() / times.len() as f64
        };
        let model = select_best(restarts)?;
        models.push(SweepModel {
            n_d,
            model,
            mean_wall_time,
        });
        train_sets.push(train);
    }

    let random_test_accuracy = shared
        .random_weights
        .iter()
        .map(|(q, r)| weights_accuracy(q, r, &test))
        .sum::<Result<f64>>()?
        / shared.random_weights.len() as f64;

    let named: Vec<(String, &TrainedModel)> = models.iter().map(|m| (sigma_name(m.n_d), &m.model)).collect();
    let entries = campaign_entries(
        cfg,
        &shared.system,
        &shared.random_weights,
        Some(random_test_accuracy),
        with_oracle_row,
        &named,
    )?;
    let campaign_config = campaign_config(cfg, with_oracle_row);
    let campaign = evaluate_campaign(&entries, &shared.initial_states, &campaign_config)?;
    Ok(Variant {
        label: label.into(),
        drop_kappa_ties,
        test,
        train_sets,
        models,
        random_test_accuracy,
        entry_names: entries.into_iter().map(|e| e.name).collect(),
        campaign,
    })
}

fn campaign_config(cfg: &ExperimentConfig, with_oracle_row: bool) -> CampaignConfig {
    CampaignConfig {
        t_sim: cfg.t_sim,
        eps: cfg.eps,
        performance_weights: with_oracle_row.then(|| cfg.oracle_weights()),
        reference: with_oracle_row.then(|| ORACLE_ROW.to_string()),
    }
}

/// MPC with the given weights under the experiment's plant, horizon and bounds.
pub fn mpc_spec(cfg: &ExperimentConfig, system: &LinearSystem, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<MpcSpec> {
    Ok(MpcSpec::new(system.clone(), cfg.horizon, q, r, cfg.bounds(system.nu()))?)
}

/// Campaign rows in table order: oracle weights (optional), the
/// per-simulation random baseline, then the named surrogates.
pub fn campaign_entries(
    cfg: &ExperimentConfig,
    system: &LinearSystem,
    random_weights: &[(DMatrix<f64>, DMatrix<f64>)],
    random_test_accuracy: Option<f64>,
    with_oracle_row: bool,
    models: &[(String, &TrainedModel)],
) -> Result<Vec<CampaignEntry>> {
    let mut entries = Vec::with_capacity(models.len() + 2);
    if with_oracle_row {
        let (q, r) = cfg.oracle_weights();
        entries.push(CampaignEntry::new(ORACLE_ROW, Controller::Shared(mpc_spec(cfg, system, q, r)?)));
    }
    let random_specs = random_weights
        .iter()
        .map(|(q, r)| mpc_spec(cfg, system, q.clone(), r.clone()))
        .collect::<Result<Vec<_>>>()?;
    let mut random = CampaignEntry::new(RANDOM_ROW, Controller::PerRun(random_specs));
    random.test_accuracy = random_test_accuracy;
    entries.push(random);
    for (name, model) in models {
        let (q, r) = model.theta.matrices();
        let mut e = CampaignEntry::new(name.clone(), Controller::Shared(mpc_spec(cfg, system, q, r)?));
        e.train_accuracy = Some(model.train_accuracy);
        e.test_accuracy = model.test_accuracy;
        entries.push(e);
    }
    Ok(entries)
}

/// Closed-loop campaign of already trained surrogates against the oracle
/// (quadratic scenario only) and random baselines of `cfg`.
pub fn evaluate_models(cfg: &ExperimentConfig, models: &[(String, TrainedModel)]) -> Result<(Vec<String>, CampaignResult)> {
    cfg.validate_setup()?;
    if cfg.simulations == 0 {
        return Err(Error::Config("simulations must be positive".into()));
    }
    let system = cfg.system()?;
    let with_oracle_row = cfg.scenario == Scenario::Quadratic;
    let named: Vec<(String, &TrainedModel)> = models.iter().map(|(n, m)| (n.clone(), m)).collect();
    let weights = random_weights(cfg, system.nx(), system.nu())?;
    let entries = campaign_entries(cfg, &system, &weights, None, with_oracle_row, &named)?;
    let campaign = evaluate_campaign(
        &entries,
        &initial_states(cfg, system.nx()),
        &campaign_config(cfg, with_oracle_row),
    )?;
    Ok((entries.into_iter().map(|e| e.name).collect(), campaign))
}

/// Splits off the last fifth of the pairs (at least one) for model selection.
pub fn holdout_split(dataset: &PreferenceDataset) -> Result<(PreferenceDataset, PreferenceDataset)> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::Config(format!("training needs at least 2 labeled pairs, got {n}")));
    }
    let hold = (n / 5).max(1);
    Ok((dataset.slice(0..n - hold), dataset.slice(n - hold..n)))
}

/// Multistart training; selection uses `test` or, without one, a holdout
/// split of `train`.
pub fn train_surrogate(
    train: &PreferenceDataset,
    test: Option<&PreferenceDataset>,
    config: &TrainConfig,
    sampler: &RandomInit,
) -> Result<TrainedModel> {
    match test {
        Some(t) => Ok(train_multistart(train, t, config, sampler)?),
        None => {
            let (fit, hold) = holdout_split(train)?;
            Ok(train_multistart(&fit, &hold, config, sampler)?)
        }
    }
}

/// Renders a settling index, with `>T` for runs that never settled.
pub fn fmt_settling(s: SettlingResult, t_sim: usize) -> String {
    if s.settled {
        s.index.to_string()
    } else {
        format!(">{t_sim}")
    }
}

fn pct(v: Option<f64>) -> String {
    fmt_opt(v.map(|a| 100.0 * a), 2)
}

/// One row per controller: accuracies in percent, normalized closed-loop
/// cost (when measured), settling indices and average peak input.
pub fn campaign_table(campaign: &CampaignResult, t_sim: usize) -> Table {
    let mut table = Table::new([
        "name",
        "train_acc",
        "test_acc",
        "avg_phi",
        "max_phi",
        "min_phi",
        "median_kappa",
        "max_kappa",
        "avg_max_input",
    ]);
    for row in &campaign.rows {
        let p = row.performance;
        table.push([
            row.name.clone(),
            pct(row.train_accuracy),
            pct(row.test_accuracy),
            fmt_opt(p.map(|s| s.avg), 3),
            fmt_opt(p.map(|s| s.max), 3),
            fmt_opt(p.map(|s| s.min), 3),
            row.settling_median.to_string(),
            fmt_settling(row.settling_max, t_sim),
            format!("{:.3}", row.avg_max_input),
        ]);
    }
    table
}

fn timings_table(variants: &[Variant]) -> Table {
    let mut t = Table::new(["variant", "name", "mean_train_time_s", "selected_train_time_s"]);
    for v in variants {
        for m in &v.models {
            t.push([
                v.label.clone(),
                sigma_name(m.n_d),
                format!("{:.4}", m.mean_wall_time),
                format!("{:.4}", m.model.wall_time),
            ]);
        }
    }
    t
}

/// Quadratic-oracle experiment: one labeling, bounded MPC, performance
/// normalized by the oracle-weight controller.
pub fn run_quadratic_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    if config.scenario != Scenario::Quadratic {
        return Err(Error::Config("expected the quadratic scenario".into()));
    }
    let shared = prepare(config)?;
    let variant = run_variant(&shared, "main", false, true)?;
    let table = campaign_table(&variant.campaign, config.t_sim);
    let variants = vec![variant];
    Ok(ExperimentResult {
        timings: timings_table(&variants),
        config: shared.config,
        system: shared.system,
        oracle: shared.oracle,
        pool: shared.pool,
        initial_states: shared.initial_states,
        random_weights: shared.random_weights,
        variants,
        table,
    })
}

/// Settling-time experiment: the pool labeled with and without the input
/// tie-break (ties dropped), unbounded MPC.
pub fn run_complex_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    if config.scenario != Scenario::Complex {
        return Err(Error::Config("expected the complex scenario".into()));
    }
    let shared = prepare(config)?;
    let with = run_variant(&shared, "with_tiebreak", false, false)?;
    let without = run_variant(&shared, "without_tiebreak", true, false)?;
    let mut table = Table::new([
        "name",
        "train_acc",
        "test_acc",
        "median_kappa",
        "max_kappa",
        "avg_max_input",
        "train_acc_no_tiebreak",
        "test_acc_no_tiebreak",
        "median_kappa_no_tiebreak",
        "max_kappa_no_tiebreak",
        "avg_max_input_no_tiebreak",
    ]);
    for (a, b) in with.campaign.rows.iter().zip(&without.campaign.rows) {
        table.push([
            a.name.clone(),
            pct(a.train_accuracy),
            pct(a.test_accuracy),
            a.settling_median.to_string(),
            fmt_settling(a.settling_max, config.t_sim),
            format!("{:.3}", a.avg_max_input),
            pct(b.train_accuracy),
            pct(b.test_accuracy),
            b.settling_median.to_string(),
            fmt_settling(b.settling_max, config.t_sim),
            format!("{:.3}", b.avg_max_input),
        ]);
    }
    let variants = vec![with, without];
    Ok(ExperimentResult {
        timings: timings_table(&variants),
        config: shared.config,
        system: shared.system,
        oracle: shared.oracle,
        pool: shared.pool,
        initial_states: shared.initial_states,
        random_weights: shared.random_weights,
        variants,
        table,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    match config.scenario {
        Scenario::Quadratic => run_quadratic_experiment(config),
        Scenario::Complex => run_complex_experiment(config),
    }
}

#[derive(Serialize)]
struct WeightsDoc {
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
}

/// Writes every artifact of `result` under `dir`:
///
/// - `config.json`, `table.tsv`, `timings.tsv`
/// - `initial_states.json`, `random_weights.json`
/// - per variant `<label>/`: `test.json`, `train_<n>.json`, `model_<n>.json`,
///   figure data and `trajectories/<row>.json`
pub fn write_artifacts(result: &ExperimentResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join("config.json"), &result.config)?;
    result.table.write(&dir.join("table.tsv"))?;
    result.timings.write(&dir.join("timings.tsv"))?;
    let x0: Vec<Vec<f64>> = result.initial_states.iter().map(|x| x.iter().copied().collect()).collect();
    write_json(&dir.join("initial_states.json"), &x0)?;
    let weights: Vec<WeightsDoc> = result
        .random_weights
        .iter()
        .map(|(q, r)| WeightsDoc {
            q: matrix_rows(q),
            r: matrix_rows(r),
        })
        .collect();
    write_json(&dir.join("random_weights.json"), &weights)?;
    let gen = result.config.gen_config();
    let train_config = result.config.train_config();
    for v in &result.variants {
        let vdir = dir.join(&v.label);
        let bundle = |dataset: &PreferenceDataset| DatasetBundle {
            system: result.system.clone(),
            config: gen.clone(),
            oracle: Some(result.oracle.clone()),
            dataset: dataset.clone(),
        };
        save_dataset(&vdir.join("test.json"), &bundle(&v.test))?;
        for (set, m) in v.train_sets.iter().zip(&v.models) {
            save_dataset(&vdir.join(format!("train_{}.json", m.n_d)), &bundle(set))?;
            save_model(&vdir.join(format!("model_{}.json", m.n_d)), &m.model, &train_config)?;
        }
        emit_figure_data(&v.entry_names, &v.campaign, result.config.t_sim, &vdir)?;
    }
    Ok(())
}
