use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, invalid, Result};
use crate::trajectory::{max_input_inf_norm, quad_cost, settling_time, SettlingResult, Trajectory};

use super::closed_loop::{run, ClosedLoopResult, MpcController};
use super::MpcSpec;

/// The controller(s) evaluated under one table row.
#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    /// One controller for every initial state.
    Shared(MpcSpec),
    /// One controller per initial state, in the order of the initial states.
    PerRun(Vec<MpcSpec>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignEntry {
    pub name: String,
    pub controller: Controller,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub train_time: Option<f64>,
}

impl CampaignEntry {
    pub fn new(name: impl Into<String>, controller: Controller) -> Self {
        Self {
            name: name.into(),
            controller,
            train_accuracy: None,
            test_accuracy: None,
            train_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub t_sim: usize,
    /// Output threshold of the settling time.
    pub eps: f64,
    /// Weights of the closed-loop performance index; `None` skips it.
    pub performance_weights: Option<(DMatrix<f64>, DMatrix<f64>)>,
    /// Row whose average performance normalizes every performance column.
    pub reference: Option<String>,
}

/// Metrics of one closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    pub performance: Option<f64>,
    pub settling: SettlingResult,
    pub max_input: f64,
}

impl RunMetrics {
    pub fn of(traj: &Trajectory, config: &CampaignConfig) -> Result<Self> {
        let performance = match &config.performance_weights {
            Some((q, r)) => Some(quad_cost(traj, q, r)?),
            None => None,
        };
        Ok(Self {
            performance,
            settling: settling_time(traj, config.eps),
            max_input: max_input_inf_norm(traj),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub avg: f64,
    pub max: f64,
    pub min: f64,
}

/// One table row.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceRow {
    pub name: String,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub train_time: Option<f64>,
    /// Closed-loop performance, divided by the reference row's average when
    /// a reference is configured.
    pub performance: Option<Summary>,
    /// Median settling index; unsettled runs count as `t_sim`.
    pub settling_median: f64,
    /// Largest settling index; `settled == false` when any run never settled.
    pub settling_max: SettlingResult,
    pub avg_max_input: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub rows: Vec<PerformanceRow>,
    /// `runs[e][s]`: closed loop of entry `e` from initial state `s`.
    pub runs: Vec<Vec<ClosedLoopResult>>,
    pub metrics: Vec<Vec<RunMetrics>>,
    /// Divisor applied to the performance columns (1 without a reference).
    pub performance_scale: f64,
}

/// Median with the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Per-step average of `|y_t|` over a set of closed loops.
pub fn mean_output_norms(runs: &[ClosedLoopResult]) -> Vec<f64> {
    let len = runs.iter().map(|r| r.trajectory.outputs().len()).min().unwrap_or(0);
    (0..len)
        .map(|t| runs.iter().map(|r| r.trajectory.outputs()[t].norm()).sum::<f64>() / runs.len() as f64)
        .collect()
}

fn spec_for(entry: &CampaignEntry, run: usize) -> &MpcSpec {
    match &entry.controller {
        Controller::Shared(s) => s,
        Controller::PerRun(v) => &v[run],
    }
}

/// Runs every entry from every initial state and reduces the runs to table
/// rows in entry order.
pub fn evaluate_campaign(
    entries: &[CampaignEntry],
    initial_states: &[DVector<f64>],
    config: &CampaignConfig,
) -> Result<CampaignResult> {
    if entries.is_empty() || initial_states.is_empty() {
        return Err(invalid("a campaign needs at least one controller and one initial state"));
    }
    if config.t_sim == 0 || !(config.eps >= 0.0) {
        return Err(invalid("campaign needs t_sim > 0 and eps >= 0"));
    }
    for e in entries {
        if let Controller::PerRun(v) = &e.controller {
            check_dim("per-run controllers", initial_states.len(), v.len())?;
        }
    }
    let reference = match &config.reference {
        Some(name) => Some(
            entries
                .iter()
                .position(|e| &e.name == name)
                .ok_or_else(|| invalid(alloc::format!("reference row {name:?} is not in the campaign")))?,
        ),
        None => None,
    };

    let jobs: Vec<(usize, usize)> = (0..entries.len())
        .flat_map(|e| (0..initial_states.len()).map(move |s| (e, s)))
        .collect();
    let simulate = |&(e, s): &(usize, usize)| -> Result<(ClosedLoopResult, RunMetrics)> {
        let controller = MpcController::new(spec_for(&entries[e], s))?;
        let res = run(&controller, &initial_states[s], config.t_sim)?;
        let metrics = RunMetrics::of(&res.trajectory, config)?;
        Ok((res, metrics))
    };
    #[cfg(feature = "parallel")]
    let outcomes: Vec<Result<(ClosedLoopResult, RunMetrics)>> = {
        use rayon::prelude::*;
        jobs.par_iter().map(simulate).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Result<(ClosedLoopResult, RunMetrics)>> = jobs.iter().map(simulate).collect();

    let n = initial_states.len();
    let mut runs = Vec::with_capacity(entries.len());
    let mut metrics = Vec::with_capacity(entries.len());
    let mut it = outcomes.into_iter();
    for _ in entries {
        let mut r = Vec::with_capacity(n);
        let mut m = Vec::with_capacity(n);
        for _ in 0..n {
            let (res, met) = it.next().expect("one outcome per job")?;
            r.push(res);
            m.push(met);
        }
        runs.push(r);
        metrics.push(m);
    }

    let raw: Vec<Option<Summary>> = metrics.iter().map(|m| performance_summary(m)).collect();
    let scale = match reference {
        Some(idx) => match raw[idx] {
            Some(s) if s.avg > 0.0 => s.avg,
            _ => return Err(invalid("reference row has no positive average performance")),
        },
        None => 1.0,
    };
    let rows = entries
        .iter()
        .zip(&metrics)
        .zip(&raw)
        .map(|((e, m), s)| {
            let kappas: Vec<f64> = m.iter().map(|r| r.settling.index as f64).collect();
            let settling_max = m.iter().map(|r| r.settling).fold(
                SettlingResult {
                    settled: true,
                    index: 0,
                },
                |acc, r| SettlingResult {
                    settled: acc.settled && r.settled,
                    index: acc.index.max(r.index),
                },
            );
            PerformanceRow {
                name: e.name.clone(),
                train_accuracy: e.train_accuracy,
                test_accuracy: e.test_accuracy,
                train_time: e.train_time,
                performance: s.map(|s| Summary {
                    avg: s.avg / scale,
                    max: s.max / scale,
                    min: s.min / scale,
                }),
                settling_median: median(&kappas).unwrap_or(0.0),
                settling_max,
                avg_max_input: m.iter().map(|r| r.max_input).sum::<f64>() / m.len() as f64,
            }
        })
        .collect();
    Ok(CampaignResult {
        rows,
        runs,
        metrics,
        performance_scale: scale,
    })
}

fn performance_summary(m: &[RunMetrics]) -> Option<Summary> {
    let values: Vec<f64> = m.iter().map(|r| r.performance).collect::<Option<_>>()?;
    Some(Summary {
        avg: values.iter().sum::<f64>() / values.len() as f64,
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::default_oscillating_masses;
    use crate::mpc::InputBounds;
    use alloc::vec;

    fn spec(scale: f64) -> MpcSpec {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![40.0, 40.0, 40.0, 5.0, 5.0, 5.0]));
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![0.2, 0.2 * scale]));
        MpcSpec::new(default_oscillating_masses(), 10, q, r, Some(InputBounds::symmetric(2, 1.0))).unwrap()
    }

    fn config() -> CampaignConfig {
        let s = spec(1.0);
        CampaignConfig {
            t_sim: 30,
            eps: 0.1,
            performance_weights: Some((s.q().clone(), s.r().clone())),
            reference: Some("oracle".into()),
        }
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn single_run_row() {
        let x0 = vec![DVector::from_vec(vec![0.2, -0.1, 0.3, 0.0, 0.01, -0.02])];
        let entries = vec![CampaignEntry::new("oracle", Controller::Shared(spec(1.0)))];
        let res = evaluate_campaign(&entries, &x0, &config()).unwrap();
        let p = res.rows[0].performance.unwrap();
        assert_eq!(p.avg, 1.0);
        assert_eq!(p.max, p.min);
        assert_eq!(p.avg, p.max);
    }

    #[test]
    fn reference_row_normalizes_to_one() {
        let x0 = vec![
            DVector::from_vec(vec![0.2, -0.1, 0.3, 0.0, 0.01, -0.02]),
            DVector::from_vec(vec![-0.3, 0.25, 0.1, 0.04, 0.0, 0.02]),
            DVector::from_vec(vec![0.1, 0.1, -0.2, -0.03, 0.02, 0.0]),
        ];
        let entries = vec![
            CampaignEntry::new("other", Controller::PerRun(vec![spec(50.0), spec(0.5), spec(3.0)])),
            CampaignEntry::new("oracle", Controller::Shared(spec(1.0))),
        ];
        let res = evaluate_campaign(&entries, &x0, &config()).unwrap();
        assert_eq!(res.rows[1].performance.unwrap().avg, 1.0);
        // The oracle-weight controller is optimal for its own horizon cost, not
        // necessarily for the closed loop, so only sanity is checked here.
        assert!(res.rows[0].performance.unwrap().avg > 0.0);
        assert_eq!(res.runs.len(), 2);
        assert_eq!(res.runs[0].len(), 3);
        for (r, m) in res.runs[0].iter().zip(&res.metrics[0]) {
            assert_eq!(m.settling, settling_time(&r.trajectory, 0.1));
        }
    }

    #[test]
    fn unknown_reference_is_rejected() {
        let x0 = vec![DVector::zeros(6)];
        let entries = vec![CampaignEntry::new("a", Controller::Shared(spec(1.0)))];
        assert!(evaluate_campaign(&entries, &x0, &config()).is_err());
    }
}
