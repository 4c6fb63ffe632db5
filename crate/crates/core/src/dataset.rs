//! Trajectory pools from random LQR rollouts and labeled preference pairs.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linsys::{lqr_gain, rollout_lqr, LinearSystem};
use crate::oracle::{Preference, PreferenceOracle};
use crate::rng::{self, uniform};
use crate::trajectory::{settling_time, Trajectory};

/// Closed interval `[lo, hi]` used for uniform sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi {
            Ok(())
        } else {
            Err(invalid(format!("{what}: invalid range [{}, {}]", self.lo, self.hi)))
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        uniform(rng, self.lo, self.hi)
    }
}

/// How random LQR weights (and learner initializations) are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSampling {
    /// Dense symmetric matrices dominated by their diagonal.
    PredominantlyDiagonal { diag: Range, offdiag_scale: f64 },
    /// Diagonal matrices with one range per entry.
    Diagonal { q: Vec<Range>, r: Vec<Range> },
}

impl WeightSampling {
    /// Diagonal entries in `[0.1, 10]` with 5% off-diagonal perturbations.
    pub fn predominantly_diagonal() -> Self {
        WeightSampling::PredominantlyDiagonal {
            diag: Range::new(0.1, 10.0),
            offdiag_scale: 0.05,
        }
    }

    /// Position weights in `[5, 20]`, every other entry in `[0.1, 1]`.
    pub fn settling_diagonal(n_positions: usize, nx: usize, nu: usize) -> Self {
        let q = (0..nx)
            .map(|i| {
                if i < n_positions {
                    Range::new(5.0, 20.0)
                } else {
                    Range::new(0.1, 1.0)
                }
            })
            .collect();
        WeightSampling::Diagonal {
            q,
            r: alloc::vec![Range::new(0.1, 1.0); nu],
        }
    }

    pub fn validate(&self, nx: usize, nu: usize) -> Result<()> {
        match self {
            WeightSampling::PredominantlyDiagonal {
                diag,
                offdiag_scale,
            } => {
                diag.validate("diagonal range")?;
                if diag.lo <= 0.0 {
                    return Err(invalid("diagonal range must be positive"));
                }
                if !(*offdiag_scale >= 0.0 && offdiag_scale.is_finite()) {
                    return Err(invalid("off-diagonal scale must be non-negative"));
                }
                Ok(())
            }
            WeightSampling::Diagonal { q, r } => {
                check_dim("Q ranges", nx, q.len())?;
                check_dim("R ranges", nu, r.len())?;
                for range in q.iter().chain(r) {
                    range.validate("diagonal range")?;
                    if range.lo <= 0.0 {
                        return Err(invalid("diagonal ranges must be positive"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Draws a `(Q, R)` pair.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        nx: usize,
        nu: usize,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        match self {
            WeightSampling::PredominantlyDiagonal {
                diag,
                offdiag_scale,
            } => Ok((
                random_pd_matrix(rng, nx, *diag, *offdiag_scale)?,
                random_pd_matrix(rng, nu, *diag, *offdiag_scale)?,
            )),
            WeightSampling::Diagonal { q, r } => {
                check_dim("Q ranges", nx, q.len())?;
                check_dim("R ranges", nu, r.len())?;
                Ok((random_pd_diag(rng, q)?, random_pd_diag(rng, r)?))
            }
        }
    }
}

/// Dataset generation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    /// Number of trajectories in the pool.
    pub n_t: usize,
    /// Trajectory horizon `N`.
    pub horizon: usize,
    pub position_range: Range,
    pub velocity_range: Range,
    pub weights: WeightSampling,
    pub seed: u64,
}

impl GenConfig {
    /// 50 trajectories of horizon 10 with predominantly-diagonal LQR weights.
    pub fn quadratic(seed: u64) -> Self {
        Self {
            n_t: 50,
            horizon: 10,
            position_range: Range::new(-0.3, 0.3),
            velocity_range: Range::new(-0.05, 0.05),
            weights: WeightSampling::predominantly_diagonal(),
            seed,
        }
    }

    /// 50 trajectories of horizon 15 with diagonal, position-heavy LQR weights.
    pub fn settling(seed: u64) -> Self {
        Self {
            horizon: 15,
            weights: WeightSampling::settling_diagonal(3, 6, 2),
            ..Self::quadratic(seed)
        }
    }

    pub fn validate(&self, sys: &LinearSystem) -> Result<()> {
        if self.n_t == 0 {
            return Err(invalid("pool size must be positive"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be positive"));
        }
        self.position_range.validate("position range")?;
        self.velocity_range.validate("velocity range")?;
        self.weights.validate(sys.nx(), sys.nu())
    }
}

/// Trajectories that share a horizon and dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPool {
    trajectories: Vec<Trajectory>,
}

impl TrajectoryPool {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| invalid("trajectory pool must not be empty"))?;
        for t in &trajectories {
            check_dim("pool horizon", first.horizon(), t.horizon())?;
            check_dim("pool state dimension", first.state_dim(), t.state_dim())?;
            check_dim("pool input dimension", first.input_dim(), t.input_dim())?;
            check_dim("pool output dimension", first.output_dim(), t.output_dim())?;
        }
        Ok(Self { trajectories })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn get(&self, i: usize) -> Option<&Trajectory> {
        self.trajectories.get(i)
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.trajectories[0].horizon()
    }

    pub fn state_dim(&self) -> usize {
        self.trajectories[0].state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.trajectories[0].input_dim()
    }
}

/// One labeled comparison: `p = First` means trajectory `i` beats `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabeledPair {
    pub i: usize,
    pub j: usize,
    pub p: Preference,
}

/// Labeled pairs over a shared pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceDataset {
    pool: Arc<TrajectoryPool>,
    pairs: Vec<LabeledPair>,
}

impl PreferenceDataset {
    pub fn new(pool: Arc<TrajectoryPool>, pairs: Vec<LabeledPair>) -> Result<Self> {
        for pair in &pairs {
            if pair.i == pair.j {
                return Err(invalid(format!("pair ({}, {}) compares a trajectory with itself", pair.i, pair.j)));
            }
            if pair.i >= pool.len() || pair.j >= pool.len() {
                return Err(invalid(format!(
                    "pair ({}, {}) out of range for a pool of {}",
                    pair.i,
                    pair.j,
                    pool.len()
                )));
            }
        }
        Ok(Self { pool, pairs })
    }

    pub fn pool(&self) -> &Arc<TrajectoryPool> {
        &self.pool
    }

    pub fn pairs(&self) -> &[LabeledPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn labels(&self) -> Vec<Preference> {
        self.pairs.iter().map(|p| p.p).collect()
    }

    pub fn trajectories(&self, pair: &LabeledPair) -> (&Trajectory, &Trajectory) {
        let t = self.pool.trajectories();
        (&t[pair.i], &t[pair.j])
    }

    /// Dataset over the same pool restricted to `range` of the pairs.
    pub fn slice(&self, range: core::ops::Range<usize>) -> Self {
        Self {
            pool: self.pool.clone(),
            pairs: self.pairs[range].to_vec(),
        }
    }
}

/// Positions (first half of the state) and velocities (second half), i.i.d. uniform.
pub fn sample_initial_state<R: Rng + ?Sized>(
    rng: &mut R,
    nx: usize,
    position_range: Range,
    velocity_range: Range,
) -> DVector<f64> {
    let np = nx / 2;
    DVector::from_fn(nx, |i, _| {
        if i < np {
            position_range.sample(rng)
        } else {
            velocity_range.sample(rng)
        }
    })
}

const PD_MAX_FAILURES: usize = 100;

/// Symmetric matrix with uniform diagonal and off-diagonal entries bounded by
/// `offdiag_scale * min(d_i, d_j)`, redrawn until Cholesky succeeds.
pub fn random_pd_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    diag: Range,
    offdiag_scale: f64,
) -> Result<DMatrix<f64>> {
    diag.validate("diagonal range")?;
    if n == 0 {
        return Err(invalid("matrix size must be positive"));
    }
    for _ in 0..PD_MAX_FAILURES {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = diag.sample(rng);
        }
        for i in 0..n {
            for j in 0..i {
                let bound = offdiag_scale * m[(i, i)].min(m[(j, j)]);
                let v = uniform(rng, -bound, bound);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        if m.clone().cholesky().is_some() {
            return Ok(m);
        }
    }
    Err(Error::Generation(format!(
        "{PD_MAX_FAILURES} consecutive non-positive-definite draws (offdiag_scale = {offdiag_scale})"
    )))
}

/// Diagonal matrix with entry `i` uniform in `ranges[i]`.
pub fn random_pd_diag<R: Rng + ?Sized>(rng: &mut R, ranges: &[Range]) -> Result<DMatrix<f64>> {
    if ranges.is_empty() {
        return Err(invalid("matrix size must be positive"));
    }
    for r in ranges {
        r.validate("diagonal range")?;
        if r.lo <= 0.0 {
            return Err(invalid("diagonal ranges must be positive"));
        }
    }
    let d = DVector::from_iterator(ranges.len(), ranges.iter().map(|r| r.sample(rng)));
    Ok(DMatrix::from_diagonal(&d))
}

const SLOT_MAX_ATTEMPTS: usize = 10;

/// One LQR rollout per slot, each slot drawing from its own seed-derived stream.
pub fn generate_pool(sys: &LinearSystem, config: &GenConfig) -> Result<TrajectoryPool> {
    config.validate(sys)?;
    let trajectories = (0..config.n_t)
        .map(|slot| generate_slot(sys, config, slot))
        .collect::<Result<Vec<_>>>()?;
    TrajectoryPool::new(trajectories)
}

fn generate_slot(sys: &LinearSystem, config: &GenConfig, slot: usize) -> Result<Trajectory> {
    let mut rng = rng::stream(config.seed, rng::domain::POOL, slot as u64);
    let x0 = sample_initial_state(
        &mut rng,
        sys.nx(),
        config.position_range,
        config.velocity_range,
    );
    let mut last = None;
    for _ in 0..SLOT_MAX_ATTEMPTS {
        let (q, r) = config.weights.sample(&mut rng, sys.nx(), sys.nu())?;
        match lqr_gain(sys.a(), sys.b(), &q, &r) {
            Ok(k) => return rollout_lqr(sys, &k, &x0, config.horizon),
            Err(e) => last = Some(e),
        }
    }
    Err(Error::Generation(format!(
        "slot {slot}: LQR synthesis failed {SLOT_MAX_ATTEMPTS} times ({})",
        last.expect("at least one attempt")
    )))
}

/// Samples `n_d` distinct ordered pairs `(i, j)`, `i != j`, uniformly without
/// replacement and labels each with `oracle`.
///
/// With `drop_kappa_ties`, pairs whose settling indices coincide are removed
/// before sampling; this needs a settling oracle to define the threshold.
pub fn build_pairs<R: Rng + ?Sized>(
    pool: &Arc<TrajectoryPool>,
    n_d: usize,
    oracle: &PreferenceOracle,
    rng: &mut R,
    drop_kappa_ties: bool,
) -> Result<PreferenceDataset> {
    build_pairs_excluding(pool, n_d, oracle, rng, drop_kappa_ties, &[])
}

/// [`build_pairs`] that never returns an ordered pair listed in `exclude`.
pub fn build_pairs_excluding<R: Rng + ?Sized>(
    pool: &Arc<TrajectoryPool>,
    n_d: usize,
    oracle: &PreferenceOracle,
    rng: &mut R,
    drop_kappa_ties: bool,
    exclude: &[LabeledPair],
) -> Result<PreferenceDataset> {
    let excluded: BTreeSet<(usize, usize)> = exclude.iter().map(|p| (p.i, p.j)).collect();
    let kappa: Option<Vec<usize>> = if drop_kappa_ties {
        let eps = match oracle {
            PreferenceOracle::Settling { eps } => *eps,
            _ => return Err(invalid("dropping settling-time ties needs a settling oracle")),
        };
        Some(
            pool.trajectories()
                .iter()
                .map(|t| settling_time(t, eps).index)
                .collect(),
        )
    } else {
        None
    };
    let n = pool.len();
    let mut candidates = Vec::with_capacity(n * n.saturating_sub(1));
    for i in 0..n {
        for j in 0..n {
            if i == j || excluded.contains(&(i, j)) {
                continue;
            }
            if let Some(k) = &kappa {
                if k[i] == k[j] {
                    continue;
                }
            }
            candidates.push((i, j));
        }
    }
    if n_d > candidates.len() {
        return Err(Error::InsufficientPairs {
            requested: n_d,
            available: candidates.len(),
        });
    }
    // Partial Fisher-Yates: the first n_d slots become a uniform sample.
    for k in 0..n_d {
        let pick = k + rng.random_range(0..candidates.len() - k);
        candidates.swap(k, pick);
    }
    let trajectories = pool.trajectories();
    let pairs = candidates[..n_d]
        .iter()
        .map(|&(i, j)| {
            Ok(LabeledPair {
                i,
                j,
                p: oracle.prefer(&trajectories[i], &trajectories[j])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PreferenceDataset::new(pool.clone(), pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsys::default_oscillating_masses;
    use crate::oracle::pref_quadratic;

    fn quadratic_oracle() -> PreferenceOracle {
        PreferenceOracle::Quadratic {
            q: DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![40.0, 40.0, 40.0, 5.0, 5.0, 5.0])),
            r: DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![0.2, 0.2])),
        }
    }

    /// Independent check: every leading principal minor is positive.
    fn minors_positive(m: &DMatrix<f64>) -> bool {
        (1..=m.nrows()).all(|k| m.view((0, 0), (k, k)).into_owned().determinant() > 0.0)
    }

    #[test]
    fn initial_state_ranges() {
        let mut rng = rng::stream(3, 0, 0);
        let zero = Range::new(0.0, 0.0);
        assert_eq!(sample_initial_state(&mut rng, 6, zero, zero), DVector::zeros(6));
        for _ in 0..200 {
            let x = sample_initial_state(&mut rng, 6, Range::new(-0.3, 0.3), Range::new(-0.05, 0.05));
            assert!(x.rows(0, 3).iter().all(|v| v.abs() <= 0.3));
            assert!(x.rows(3, 3).iter().all(|v| v.abs() <= 0.05));
        }
        let a = sample_initial_state(&mut rng::stream(9, 0, 0), 6, Range::new(-1.0, 1.0), zero);
        let b = sample_initial_state(&mut rng::stream(9, 0, 0), 6, Range::new(-1.0, 1.0), zero);
        assert_eq!(a, b);
    }

    #[test]
    fn pd_matrices() {
        let mut rng = rng::stream(5, 0, 0);
        let d = random_pd_matrix(&mut rng, 4, Range::new(0.1, 10.0), 0.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(d[(i, j)], 0.0);
                }
            }
        }
        let eye = random_pd_matrix(&mut rng, 2, Range::new(1.0, 1.0), 0.0).unwrap();
        assert_eq!(eye, DMatrix::identity(2, 2));
        for _ in 0..200 {
            let m = random_pd_matrix(&mut rng, 6, Range::new(0.1, 10.0), 0.05).unwrap();
            assert!(minors_positive(&m));
            assert_eq!(m, m.transpose());
            assert!(m.diagonal().iter().all(|v| (0.1..=10.0).contains(v)));
        }
        // Off-diagonals this large cannot stay positive definite.
        assert!(matches!(
            random_pd_matrix(&mut rng, 6, Range::new(1.0, 1.0), 50.0),
            Err(Error::Generation(_))
        ));
    }

    #[test]
    fn pd_diagonals() {
        let mut rng = rng::stream(5, 0, 1);
        let fixed = random_pd_diag(&mut rng, &[Range::new(2.0, 2.0), Range::new(0.5, 0.5)]).unwrap();
        assert_eq!(fixed, DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![2.0, 0.5])));
        let sampling = WeightSampling::settling_diagonal(3, 6, 2);
        for _ in 0..100 {
            let (q, r) = sampling.sample(&mut rng, 6, 2).unwrap();
            for i in 0..3 {
                assert!((5.0..=20.0).contains(&q[(i, i)]));
                assert!((0.1..=1.0).contains(&q[(i + 3, i + 3)]));
            }
            assert!(r.diagonal().iter().all(|v| (0.1..=1.0).contains(v)));
            assert!(minors_positive(&q) && minors_positive(&r));
        }
    }

    #[test]
    fn single_zero_trajectory_pool() {
        let sys = default_oscillating_masses();
        let zero = Range::new(0.0, 0.0);
        let config = GenConfig {
            n_t: 1,
            position_range: zero,
            velocity_range: zero,
            ..GenConfig::quadratic(1)
        };
        let pool = generate_pool(&sys, &config).unwrap();
        assert_eq!(pool.len(), 1);
        assert!(pool.trajectories()[0]
            .states()
            .iter()
            .all(|x| x.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn default_pool_is_reproducible() {
        let sys = default_oscillating_masses();
        let a = generate_pool(&sys, &GenConfig::quadratic(11)).unwrap();
        let b = generate_pool(&sys, &GenConfig::quadratic(11)).unwrap();
        assert_eq!(a.len(), 50);
        assert_eq!(a.horizon(), 10);
        assert_eq!(a, b);
        let c = generate_pool(&sys, &GenConfig::quadratic(12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn pairs_are_distinct_and_labels_reproducible() {
        let sys = default_oscillating_masses();
        let pool = Arc::new(generate_pool(&sys, &GenConfig::quadratic(2)).unwrap());
        let oracle = quadratic_oracle();
        let mut rng = rng::stream(2, rng::domain::TRAIN_PAIRS, 0);
        let empty = build_pairs(&pool, 0, &oracle, &mut rng, false).unwrap();
        assert!(empty.is_empty());
        let ds = build_pairs(&pool, 1000, &oracle, &mut rng, false).unwrap();
        assert_eq!(ds.len(), 1000);
        let unique: BTreeSet<_> = ds.pairs().iter().map(|p| (p.i, p.j)).collect();
        assert_eq!(unique.len(), 1000);
        let (q, r) = match &oracle {
            PreferenceOracle::Quadratic { q, r } => (q, r),
            _ => unreachable!(),
        };
        for pair in ds.pairs() {
            assert_ne!(pair.i, pair.j);
            let (ti, tj) = ds.trajectories(pair);
            assert_eq!(pref_quadratic(ti, tj, q, r).unwrap(), pair.p);
        }
        assert!(matches!(
            build_pairs(&pool, 2451, &oracle, &mut rng, false),
            Err(Error::InsufficientPairs { available: 2450, .. })
        ));
        let all = build_pairs(&pool, 2450, &oracle, &mut rng, false).unwrap();
        assert_eq!(all.len(), 2450);
    }

    #[test]
    fn exclusion_keeps_sets_disjoint() {
        let sys = default_oscillating_masses();
        let pool = Arc::new(generate_pool(&sys, &GenConfig::quadratic(4)).unwrap());
        let oracle = quadratic_oracle();
        let mut rng = rng::stream(4, 0, 0);
        let test = build_pairs(&pool, 500, &oracle, &mut rng, false).unwrap();
        let train = build_pairs_excluding(&pool, 1000, &oracle, &mut rng, false, test.pairs()).unwrap();
        let seen: BTreeSet<_> = test.pairs().iter().map(|p| (p.i, p.j)).collect();
        assert!(train.pairs().iter().all(|p| !seen.contains(&(p.i, p.j))));
        assert!(build_pairs_excluding(&pool, 1951, &oracle, &mut rng, false, test.pairs()).is_err());
    }

    #[test]
    fn kappa_tie_filter() {
        let sys = default_oscillating_masses();
        let pool = Arc::new(generate_pool(&sys, &GenConfig::settling(6)).unwrap());
        let oracle = PreferenceOracle::Settling { eps: 0.1 };
        let mut rng = rng::stream(6, 0, 0);
        let ds = build_pairs(&pool, 200, &oracle, &mut rng, true).unwrap();
        for pair in ds.pairs() {
            let (ti, tj) = ds.trajectories(pair);
            assert_ne!(settling_time(ti, 0.1).index, settling_time(tj, 0.1).index);
        }
        assert!(build_pairs(&pool, 10, &quadratic_oracle(), &mut rng, true).is_err());
    }

    #[test]
    fn dataset_rejects_bad_pairs() {
        let sys = default_oscillating_masses();
        let pool = Arc::new(
            generate_pool(
                &sys,
                &GenConfig {
                    n_t: 3,
                    ..GenConfig::quadratic(1)
                },
            )
            .unwrap(),
        );
        let p = Preference::First;
        assert!(PreferenceDataset::new(pool.clone(), alloc::vec![LabeledPair { i: 1, j: 1, p }]).is_err());
        assert!(PreferenceDataset::new(pool.clone(), alloc::vec![LabeledPair { i: 0, j: 3, p }]).is_err());
        assert!(PreferenceDataset::new(pool, alloc::vec![LabeledPair { i: 0, j: 2, p }]).is_ok());
    }
}
