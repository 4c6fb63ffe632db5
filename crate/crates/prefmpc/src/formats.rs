//! JSON documents: plant, trajectories, dataset files and trained models.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use prefmpc_core::dataset::{GenConfig, LabeledPair, PreferenceDataset, Range, TrajectoryPool, WeightSampling};
use prefmpc_core::learner::{LbfgsStatus, Theta, TrainConfig, TrainedModel};
use prefmpc_core::{LinearSystem, Preference, PreferenceOracle, Trajectory};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DATASET_VERSION: u32 = 1;
pub const MODEL_VERSION: u32 = 1;

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn rows_matrix(what: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Format(format!("{what} must be {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn vectors(what: &str, rows: &[Vec<f64>], dim: usize) -> Result<Vec<DVector<f64>>> {
    rows.iter()
        .map(|r| {
            if r.len() == dim {
                Ok(DVector::from_column_slice(r))
            } else {
                Err(Error::Format(format!("{what} rows must have length {dim}")))
            }
        })
        .collect()
}

/// Linear plant with row-major matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDoc {
    pub nx: usize,
    pub nu: usize,
    pub ny: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
}

impl From<&LinearSystem> for SystemDoc {
    fn from(s: &LinearSystem) -> Self {
        Self {
            nx: s.nx(),
            nu: s.nu(),
            ny: s.ny(),
            a: matrix_rows(s.a()),
            b: matrix_rows(s.b()),
            c: matrix_rows(s.c()),
        }
    }
}

impl SystemDoc {
    pub fn to_system(&self) -> Result<LinearSystem> {
        Ok(LinearSystem::new(
            rows_matrix("A", &self.a, self.nx, self.nx)?,
            rows_matrix("B", &self.b, self.nx, self.nu)?,
            rows_matrix("C", &self.c, self.ny, self.nx)?,
        )?)
    }
}

/// Trajectory wire format: one row per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDoc {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    #[serde(rename = "U")]
    pub u: Vec<Vec<f64>>,
    #[serde(rename = "Y")]
    pub y: Vec<Vec<f64>>,
}

impl From<&Trajectory> for TrajectoryDoc {
    fn from(t: &Trajectory) -> Self {
        let rows = |v: &[DVector<f64>]| v.iter().map(|x| x.iter().copied().collect()).collect();
        Self {
            n: t.horizon(),
            x: rows(t.states()),
            u: rows(t.inputs()),
            y: rows(t.outputs()),
        }
    }
}

impl TrajectoryDoc {
    pub fn to_trajectory(&self) -> Result<Trajectory> {
        if self.x.len() != self.n + 1 || self.u.len() != self.n || self.y.len() != self.n {
            return Err(Error::Format(format!(
                "trajectory with N = {} needs {} states, {} inputs and {} outputs",
                self.n,
                self.n + 1,
                self.n,
                self.n
            )));
        }
        let dim = |rows: &[Vec<f64>]| rows.first().map_or(0, Vec::len);
        let x = vectors("X", &self.x, dim(&self.x))?;
        let u = vectors("U", &self.u, dim(&self.u))?;
        let y = vectors("Y", &self.y, dim(&self.y))?;
        Ok(Trajectory::new(x, u, y)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeDoc {
    pub lo: f64,
    pub hi: f64,
}

impl From<Range> for RangeDoc {
    fn from(r: Range) -> Self {
        Self { lo: r.lo, hi: r.hi }
    }
}

impl From<RangeDoc> for Range {
    fn from(r: RangeDoc) -> Self {
        Range::new(r.lo, r.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSamplingDoc {
    PredominantlyDiagonal { diag: RangeDoc, offdiag_scale: f64 },
    Diagonal { q: Vec<RangeDoc>, r: Vec<RangeDoc> },
}

impl From<&WeightSampling> for WeightSamplingDoc {
    fn from(w: &WeightSampling) -> Self {
        match w {
            WeightSampling::PredominantlyDiagonal { diag, offdiag_scale } => WeightSamplingDoc::PredominantlyDiagonal {
                diag: (*diag).into(),
                offdiag_scale: *offdiag_scale,
            },
            WeightSampling::Diagonal { q, r } => WeightSamplingDoc::Diagonal {
                q: q.iter().map(|&v| v.into()).collect(),
                r: r.iter().map(|&v| v.into()).collect(),
            },
        }
    }
}

impl From<&WeightSamplingDoc> for WeightSampling {
    fn from(w: &WeightSamplingDoc) -> Self {
        match w {
            WeightSamplingDoc::PredominantlyDiagonal { diag, offdiag_scale } => WeightSampling::PredominantlyDiagonal {
                diag: (*diag).into(),
                offdiag_scale: *offdiag_scale,
            },
            WeightSamplingDoc::Diagonal { q, r } => WeightSampling::Diagonal {
                q: q.iter().map(|&v| v.into()).collect(),
                r: r.iter().map(|&v| v.into()).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfigDoc {
    pub n_t: usize,
    pub horizon: usize,
    pub position_range: RangeDoc,
    pub velocity_range: RangeDoc,
    pub weights: WeightSamplingDoc,
    pub seed: u64,
}

impl From<&GenConfig> for GenConfigDoc {
    fn from(c: &GenConfig) -> Self {
        Self {
            n_t: c.n_t,
            horizon: c.horizon,
            position_range: c.position_range.into(),
            velocity_range: c.velocity_range.into(),
            weights: (&c.weights).into(),
            seed: c.seed,
        }
    }
}

impl From<&GenConfigDoc> for GenConfig {
    fn from(c: &GenConfigDoc) -> Self {
        GenConfig {
            n_t: c.n_t,
            horizon: c.horizon,
            position_range: c.position_range.into(),
            velocity_range: c.velocity_range.into(),
            weights: (&c.weights).into(),
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleDoc {
    Quadratic {
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
        #[serde(rename = "R")]
        r: Vec<Vec<f64>>,
    },
    Settling { eps: f64 },
}

impl From<&PreferenceOracle> for OracleDoc {
    fn from(o: &PreferenceOracle) -> Self {
        match o {
            PreferenceOracle::Quadratic { q, r } => OracleDoc::Quadratic {
                q: matrix_rows(q),
                r: matrix_rows(r),
            },
            PreferenceOracle::Settling { eps } => OracleDoc::Settling { eps: *eps },
        }
    }
}

impl OracleDoc {
    pub fn to_oracle(&self) -> Result<PreferenceOracle> {
        Ok(match self {
            OracleDoc::Quadratic { q, r } => PreferenceOracle::Quadratic {
                q: rows_matrix("Q", q, q.len(), q.len())?,
                r: rows_matrix("R", r, r.len(), r.len())?,
            },
            OracleDoc::Settling { eps } => PreferenceOracle::Settling { eps: *eps },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDoc {
    pub i: usize,
    pub j: usize,
    pub p: u8,
}

/// Dataset file: pool, labeled pairs and the settings that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub version: u32,
    pub system: SystemDoc,
    pub config: GenConfigDoc,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleDoc>,
    pub trajectories: Vec<TrajectoryDoc>,
    pub pairs: Vec<PairDoc>,
}

/// A dataset together with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub system: LinearSystem,
    pub config: GenConfig,
    pub oracle: Option<PreferenceOracle>,
    pub dataset: PreferenceDataset,
}

impl DatasetFile {
    pub fn from_bundle(b: &DatasetBundle) -> Self {
        Self {
            version: DATASET_VERSION,
            system: (&b.system).into(),
            config: (&b.config).into(),
            seed: b.config.seed,
            oracle: b.oracle.as_ref().map(Into::into),
            trajectories: b.dataset.pool().trajectories().iter().map(Into::into).collect(),
            pairs: b
                .dataset
                .pairs()
                .iter()
                .map(|p| PairDoc {
                    i: p.i,
                    j: p.j,
                    p: p.p.as_u8(),
                })
                .collect(),
        }
    }

    pub fn to_bundle(&self) -> Result<DatasetBundle> {
        if self.version != DATASET_VERSION {
            return Err(Error::UnsupportedVersion {
                found: self.version,
                supported: DATASET_VERSION,
            });
        }
        let mut config: GenConfig = (&self.config).into();
        config.seed = self.seed;
        let pool = TrajectoryPool::new(
            self.trajectories
                .iter()
                .map(TrajectoryDoc::to_trajectory)
                .collect::<Result<Vec<_>>>()?,
        )?;
        let pairs = self
            .pairs
            .iter()
            .map(|p| {
                Ok(LabeledPair {
                    i: p.i,
                    j: p.j,
                    p: Preference::from_u8(p.p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DatasetBundle {
            system: self.system.to_system()?,
            config,
            oracle: self.oracle.as_ref().map(OracleDoc::to_oracle).transpose()?,
            dataset: PreferenceDataset::new(Arc::new(pool), pairs)?,
        })
    }
}

/// Training settings; missing fields take their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfigDoc {
    pub adam_iters: usize,
    pub adam_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub lbfgs_max_iters: usize,
    pub lbfgs_history: usize,
    pub rho: f64,
    pub restarts: usize,
    pub prob_clamp: f64,
    pub pg_tol: f64,
}

impl Default for TrainConfigDoc {
    fn default() -> Self {
        (&TrainConfig::default()).into()
    }
}

impl From<&TrainConfig> for TrainConfigDoc {
    fn from(c: &TrainConfig) -> Self {
        Self {
            adam_iters: c.adam_iters,
            adam_lr: c.adam_lr,
            adam_beta1: c.adam_beta1,
            adam_beta2: c.adam_beta2,
            lbfgs_max_iters: c.lbfgs_max_iters,
            lbfgs_history: c.lbfgs_history,
            rho: c.rho,
            restarts: c.restarts,
            prob_clamp: c.prob_clamp,
            pg_tol: c.pg_tol,
        }
    }
}

impl From<&TrainConfigDoc> for TrainConfig {
    fn from(c: &TrainConfigDoc) -> Self {
        TrainConfig {
            adam_iters: c.adam_iters,
            adam_lr: c.adam_lr,
            adam_beta1: c.adam_beta1,
            adam_beta2: c.adam_beta2,
            lbfgs_max_iters: c.lbfgs_max_iters,
            lbfgs_history: c.lbfgs_history,
            rho: c.rho,
            restarts: c.restarts,
            prob_clamp: c.prob_clamp,
            pg_tol: c.pg_tol,
        }
    }
}

pub fn status_name(s: LbfgsStatus) -> &'static str {
    match s {
        LbfgsStatus::Converged => "converged",
        LbfgsStatus::MaxIterations => "max_iterations",
        LbfgsStatus::LineSearchStalled => "line_search_stalled",
    }
}

fn status_from_name(s: &str) -> Result<LbfgsStatus> {
    match s {
        "converged" => Ok(LbfgsStatus::Converged),
        "max_iterations" => Ok(LbfgsStatus::MaxIterations),
        "line_search_stalled" => Ok(LbfgsStatus::LineSearchStalled),
        other => Err(Error::Format(format!("unknown solver status {other:?}"))),
    }
}

/// Trained surrogate: parameters, the matrices they encode, metrics and settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub nx: usize,
    pub nu: usize,
    pub theta: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub warm_start_loss: f64,
    pub final_loss: f64,
    pub lbfgs_iterations: usize,
    pub lbfgs_status: String,
    pub wall_time: f64,
    pub restart_index: usize,
    pub seed: u64,
    pub config: TrainConfigDoc,
}

impl ModelFile {
    pub fn from_model(m: &TrainedModel, config: &TrainConfig) -> Self {
        let (q, r) = m.theta.matrices();
        Self {
            version: MODEL_VERSION,
            nx: m.theta.nx(),
            nu: m.theta.nu(),
            theta: m.theta.as_slice().to_vec(),
            q: matrix_rows(&q),
            r: matrix_rows(&r),
            train_accuracy: m.train_accuracy,
            test_accuracy: m.test_accuracy,
            warm_start_loss: m.warm_start_loss,
            final_loss: m.final_loss,
            lbfgs_iterations: m.lbfgs_iterations,
            lbfgs_status: status_name(m.lbfgs_status).into(),
            wall_time: m.wall_time,
            restart_index: m.restart_index,
            seed: m.seed,
            config: config.into(),
        }
    }

    pub fn to_model(&self) -> Result<(TrainedModel, TrainConfig)> {
        if self.version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion {
                found: self.version,
                supported: MODEL_VERSION,
            });
        }
        let theta = Theta::new(self.nx, self.nu, self.theta.clone())?;
        let (q, r) = theta.matrices();
        let q_doc = rows_matrix("Q", &self.q, self.nx, self.nx)?;
        let r_doc = rows_matrix("R", &self.r, self.nu, self.nu)?;
        let close = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a - b).amax() <= 1e-9 * (1.0 + a.amax());
        if !close(&q, &q_doc) || !close(&r, &r_doc) {
            return Err(Error::Format("Q and R do not match theta".into()));
        }
        let model = TrainedModel {
            theta,
            train_accuracy: self.train_accuracy,
            test_accuracy: self.test_accuracy,
            warm_start_loss: self.warm_start_loss,
            final_loss: self.final_loss,
            lbfgs_iterations: self.lbfgs_iterations,
            lbfgs_status: status_from_name(&self.lbfgs_status)?,
            wall_time: self.wall_time,
            restart_index: self.restart_index,
            seed: self.seed,
        };
        Ok((model, (&self.config).into()))
    }
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(Some(path.to_path_buf()), e))
}

/// Parses a versioned document, reporting a version mismatch before any
/// structural error.
pub fn parse_versioned<T: DeserializeOwned>(text: &str, supported: u32, path: Option<&Path>) -> Result<T> {
    let probe: VersionProbe =
        serde_json::from_str(text).map_err(|e| Error::parse(path.map(Path::to_path_buf), e))?;
    if probe.version != supported {
        return Err(Error::UnsupportedVersion {
            found: probe.version,
            supported,
        });
    }
    serde_json::from_str(text).map_err(|e| Error::parse(path.map(Path::to_path_buf), e))
}

pub fn save_dataset(path: &Path, bundle: &DatasetBundle) -> Result<()> {
    write_json(path, &DatasetFile::from_bundle(bundle))
}

pub fn load_dataset(path: &Path) -> Result<DatasetBundle> {
    parse_versioned::<DatasetFile>(&read(path)?, DATASET_VERSION, Some(path))?.to_bundle()
}

pub fn save_model(path: &Path, model: &TrainedModel, config: &TrainConfig) -> Result<()> {
    write_json(path, &ModelFile::from_model(model, config))
}

pub fn load_model(path: &Path) -> Result<(TrainedModel, TrainConfig)> {
    parse_versioned::<ModelFile>(&read(path)?, MODEL_VERSION, Some(path))?.to_model()
}
