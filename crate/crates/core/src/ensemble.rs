//! Monte Carlo ensembles of independent trajectories.
//!
//! Trajectory `i` draws its dither from stream `i` of the run seed, so the
//! result does not depend on scheduling. Work is cut into fixed chunks of
//! [`CHUNK`] indices; each chunk folds its trajectories in index order and
//! chunk accumulators are merged in chunk order, which makes the statistics
//! bit-identical for any number of worker threads.
//!
//! A trajectory that produces a non-finite value is dropped from every step
//! and counted in [`EnsembleStats::n_diverged`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dither::RandomStream;
use crate::dynamics::System;
use crate::error::{invalid, Error, Result};
use crate::objectives::Objective;

/// Trajectories per work unit.
pub const CHUNK: usize = 1024;

/// Stream id reserved for run-level draws such as a shared `y0`.
const MASTER_STREAM: u64 = u64::MAX;
/// Key offset for per-trajectory initial-condition draws.
const INIT_KEY: u64 = 0x5851_f42d_4c95_7f2d;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "TDES_THREADS";

/// Initial condition of one coordinate block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    Fixed { value: Vec<f64> },
    /// Uniform on `[low, high)` in every coordinate.
    Uniform { low: f64, high: f64 },
}

impl InitSpec {
    fn validate(&self, name: &'static str, dim: usize) -> Result<()> {
        match self {
            InitSpec::Fixed { value } => {
                if value.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: value.len(),
                    });
                }
                if value.iter().any(|v| !v.is_finite()) {
                    return Err(invalid(name, "must be finite"));
                }
            }
            InitSpec::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(invalid(name, format!("bad interval [{low}, {high})")));
                }
            }
        }
        Ok(())
    }

    fn draw(&self, stream: &mut RandomStream, dim: usize) -> Vec<f64> {
        match self {
            InitSpec::Fixed { value } => value.clone(),
            InitSpec::Uniform { low, high } => (0..dim)
                .map(|j| low + (high - low) * unit_interval(stream, j))
                .collect(),
        }
    }
}

fn unit_interval(stream: &mut RandomStream, j: usize) -> f64 {
    let hi = stream.word(0, 2 * j) as u64;
    let lo = stream.word(0, 2 * j + 1) as u64;
    ((hi << 32 | lo) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Drawn independently for every trajectory when random.
    pub x0: InitSpec,
    /// Drawn once per run and shared by all trajectories when random.
    pub y0: InitSpec,
    pub system: System,
    /// Worker threads; `None` uses [`THREADS_ENV`] or rayon's default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl EnsembleConfig {
    pub fn validate(&self, obj: &Objective) -> Result<()> {
        if self.n_traj == 0 {
            return Err(invalid("n_traj", "must be at least 1"));
        }
        if self.n_steps == 0 {
            return Err(invalid("n_steps", "must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "must be at least 1"));
        }
        if self.system.is_one_dimensional() && obj.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: obj.dim(),
            });
        }
        self.x0.validate("x0", obj.dim())?;
        self.y0.validate("y0", obj.dim())?;
        Ok(())
    }

    /// The shared `y0` this configuration resolves to.
    pub fn resolve_y0(&self, dim: usize) -> Vec<f64> {
        let mut master = RandomStream::new(self.seed, MASTER_STREAM, 2 * dim);
        self.y0.draw(&mut master, dim)
    }

    fn x0_for(&self, index: usize, dim: usize) -> Vec<f64> {
        match &self.x0 {
            InitSpec::Fixed { value } => value.clone(),
            spec => {
                let mut s = RandomStream::new(self.seed ^ INIT_KEY, index as u64, 2 * dim);
                spec.draw(&mut s, dim)
            }
        }
    }
}

/// Per-coordinate, per-step statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordStats {
    pub mean_x: Vec<f64>,
    pub var_x: Vec<f64>,
    pub sigma_x: Vec<f64>,
    pub mean_y: Vec<f64>,
    pub var_y: Vec<f64>,
    pub sigma_y: Vec<f64>,
}

/// Ensemble summary; index `k` runs over `0..=n_steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_traj: usize,
    pub n_steps: usize,
    pub n_diverged: usize,
    pub y0: Vec<f64>,
    pub coords: Vec<CoordStats>,
}

impl EnsembleStats {
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Trajectories that contributed to the statistics.
    pub fn n_used(&self) -> usize {
        self.n_traj - self.n_diverged
    }

    pub fn mean_x(&self) -> &[f64] {
        &self.coords[0].mean_x
    }

    pub fn sigma_x(&self) -> &[f64] {
        &self.coords[0].sigma_x
    }

    pub fn var_x(&self) -> &[f64] {
        &self.coords[0].var_x
    }

    pub fn mean_y(&self) -> &[f64] {
        &self.coords[0].mean_y
    }

    pub fn sigma_y(&self) -> &[f64] {
        &self.coords[0].sigma_y
    }

    pub fn var_y(&self) -> &[f64] {
        &self.coords[0].var_y
    }
}

/// A full trajectory stored step-major: `x[k * dim + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub index: usize,
    pub dim: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Step at which a non-finite value appeared; the path stops before it.
    pub diverged_at: Option<usize>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.x.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x_at(&self, k: usize) -> &[f64] {
        &self.x[k * self.dim..(k + 1) * self.dim]
    }

    pub fn y_at(&self, k: usize) -> &[f64] {
        &self.y[k * self.dim..(k + 1) * self.dim]
    }
}

/// Extra per-trajectory reductions computed alongside the standard
/// statistics. `observe` is called once per finite trajectory, in index
/// order within a chunk; `merge` combines chunks in index order.
pub trait Observer: Sync {
    type Acc: Send;

    fn init(&self, n_steps: usize, dim: usize) -> Self::Acc;
    fn observe(&self, acc: &mut Self::Acc, path: &Path);
    fn merge(&self, into: &mut Self::Acc, other: Self::Acc);
}

impl Observer for () {
    type Acc = ();

    fn init(&self, _: usize, _: usize) {}
    fn observe(&self, _: &mut (), _: &Path) {}
    fn merge(&self, _: &mut (), _: ()) {}
}

/// Streaming mean and centred second moment of several series at once.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMoments {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningMoments {
    pub fn new(len: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(values) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn merge(&mut self, other: &RunningMoments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased variance; zero for fewer than two samples.
    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.mean.len()];
        }
        let d = (self.count - 1) as f64;
        self.m2.iter().map(|s| (s / d).max(0.0)).collect()
    }
}

struct ChunkAcc<A> {
    x: RunningMoments,
    y: RunningMoments,
    diverged: usize,
    extra: A,
}

fn simulate(config: &EnsembleConfig, obj: &Objective, y0: &[f64], index: usize) -> Result<Path> {
    let dim = obj.dim();
    let mut stream = RandomStream::new(config.seed, index as u64, dim);
    let x0 = config.x0_for(index, dim);
    let cap = (config.n_steps + 1) * dim;
    let mut path = Path {
        index,
        dim,
        x: Vec::with_capacity(cap),
        y: Vec::with_capacity(cap),
        diverged_at: None,
    };
    let mut state = match config.system.init(&x0, y0, obj, &mut stream) {
        Ok(s) => s,
        Err(Error::NonFinite { step }) => {
            path.diverged_at = Some(step);
            return Ok(path);
        }
        Err(e) => return Err(e),
    };
    path.x.extend_from_slice(&state.x);
    path.y.extend_from_slice(&state.y);
    for _ in 0..config.n_steps {
        match config.system.advance(&mut state, obj, &mut stream) {
            Ok(()) => {
                path.x.extend_from_slice(&state.x);
                path.y.extend_from_slice(&state.y);
            }
            Err(Error::NonFinite { step }) => {
                path.diverged_at = Some(step);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(path)
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let threads = threads.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()));
    match threads {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|_| invalid("threads", "could not start worker pool"))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

/// Runs the ensemble and returns per-step statistics.
pub fn run(config: &EnsembleConfig, obj: &Objective) -> Result<EnsembleStats> {
    run_observed(config, obj, &()).map(|(s, _)| s)
}

/// Runs the ensemble, feeding every finite trajectory to `observer` as well.
pub fn run_observed<O: Observer>(
    config: &EnsembleConfig,
    obj: &Objective,
    observer: &O,
) -> Result<(EnsembleStats, O::Acc)> {
    config.validate(obj)?;
    let dim = obj.dim();
    let y0 = config.resolve_y0(dim);
    let len = (config.n_steps + 1) * dim;
    let n_chunks = config.n_traj.div_ceil(CHUNK);

    let chunks: Vec<Result<ChunkAcc<O::Acc>>> = with_pool(config.threads, || {
        (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = ChunkAcc {
                    x: RunningMoments::new(len),
                    y: RunningMoments::new(len),
                    diverged: 0,
                    extra: observer.init(config.n_steps, dim),
                };
                let end = ((c + 1) * CHUNK).min(config.n_traj);
                for i in c * CHUNK..end {
                    let path = simulate(config, obj, &y0, i)?;
                    if path.diverged_at.is_some() {
                        acc.diverged += 1;
                        continue;
                    }
                    acc.x.push(&path.x);
                    acc.y.push(&path.y);
                    observer.observe(&mut acc.extra, &path);
                }
                Ok(acc)
            })
            .collect()
    })?;

    let mut x = RunningMoments::new(len);
    let mut y = RunningMoments::new(len);
    let mut diverged = 0;
    let mut extra = observer.init(config.n_steps, dim);
    for chunk in chunks {
        let chunk = chunk?;
        x.merge(&chunk.x);
        y.merge(&chunk.y);
        diverged += chunk.diverged;
        observer.merge(&mut extra, chunk.extra);
    }
    if diverged == config.n_traj {
        return Err(Error::AllDiverged {
            n_traj: config.n_traj,
        });
    }

    let (vx, vy) = (x.variance(), y.variance());
    let coords = (0..dim)
        .map(|j| {
            let pick = |v: &[f64]| -> Vec<f64> { (0..=config.n_steps).map(|k| v[k * dim + j]).collect() };
            let var_x = pick(&vx);
            let var_y = pick(&vy);
            CoordStats {
                mean_x: pick(x.mean()),
                sigma_x: var_x.iter().map(|v| v.sqrt()).collect(),
                var_x,
                mean_y: pick(y.mean()),
                sigma_y: var_y.iter().map(|v| v.sqrt()).collect(),
                var_y,
            }
        })
        .collect();

    Ok((
        EnsembleStats {
            n_traj: config.n_traj,
            n_steps: config.n_steps,
            n_diverged: diverged,
            y0,
            coords,
        },
        extra,
    ))
}

/// Full paths of trajectories `0..count`.
pub fn sample_paths(config: &EnsembleConfig, obj: &Objective, count: usize) -> Result<Vec<Path>> {
    config.validate(obj)?;
    if count > config.n_traj {
        return Err(invalid("count", format!("{count} exceeds n_traj = {}", config.n_traj)));
    }
    let y0 = config.resolve_y0(obj.dim());
    (0..count).map(|i| simulate(config, obj, &y0, i)).collect()
}
