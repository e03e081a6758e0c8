//! White-noise constructions of the DT Wiener and SS-1 processes.
//!
//! Wiener paths accumulate independent increments from the left starting at
//! `h(t_0) = 0`, `t_0 = 0`. SS-1 paths accumulate from the right starting at
//! a virtual point `t_{n+1} = infinity` where the process vanishes, so the
//! last grid point carries the increment variance `c e^{-beta t_n}`. With
//! that convention the sample covariance converges to the Gram matrix
//! exactly.
//!
//! Path `k` draws its noise from the ChaCha8 stream `(seed, k)`, so any subset
//! of paths can be regenerated (or generated in parallel) independently.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::kernels::{stable_increments, KernelFamily, KernelSpec};
use crate::maxent::increment_variances;

pub const RNG_ALGORITHM: &str = "chacha8(seed, stream=index)";
pub const GAUSSIAN_ALGORITHM: &str = "ziggurat(rand_distr::StandardNormal)";

/// Paths needed before moment audits mean anything.
pub const MIN_AUDIT_PATHS: usize = 100;

/// Audit threshold in standard errors.
pub const AUDIT_SIGMAS: f64 = 5.0;

/// Deterministic generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// I.i.d. `N(0, c)` draws, reproducible from `seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhiteNoiseSource {
    pub seed: u64,
    variance: f64,
}

impl WhiteNoiseSource {
    pub fn new(seed: u64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive, got {variance}"
            )));
        }
        Ok(Self { seed, variance })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// `len` draws from stream `stream`.
    pub fn draws(&self, stream: u64, len: usize) -> Vec<f64> {
        let sd = self.variance.sqrt();
        let mut rng = stream_rng(self.seed, stream);
        (0..len)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

/// `p` realizations on a common grid, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    grid: SamplingGrid,
    paths: DenseMatrix,
}

impl PathSet {
    pub fn new(grid: SamplingGrid, paths: DenseMatrix) -> Result<Self> {
        if paths.rows() == 0 {
            return Err(Error::InvalidParameter("a path set needs at least one path".into()));
        }
        if paths.cols() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: paths.cols(),
            });
        }
        Ok(Self { grid, paths })
    }

    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }

    pub fn paths(&self) -> &DenseMatrix {
        &self.paths
    }

    pub fn num_paths(&self) -> usize {
        self.paths.rows()
    }

    pub fn path(&self, k: usize) -> &[f64] {
        self.paths.row(k)
    }

    /// Per-coordinate sample mean.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.grid.len();
        let mut m = vec![0.0; n];
        for row in self.paths.row_iter() {
            for (a, x) in m.iter_mut().zip(row) {
                *a += x;
            }
        }
        let p = self.num_paths() as f64;
        m.iter_mut().for_each(|a| *a /= p);
        m
    }

    /// Unbiased sample covariance (divides by `p - 1`).
    pub fn covariance(&self) -> DenseMatrix {
        let n = self.grid.len();
        let mean = self.mean();
        let mut cov = DenseMatrix::zeros(n, n);
        let mut centered = vec![0.0; n];
        for row in self.paths.row_iter() {
            for (c, (x, m)) in centered.iter_mut().zip(row.iter().zip(&mean)) {
                *c = x - m;
            }
            for i in 0..n {
                for j in i..n {
                    cov[(i, j)] += centered[i] * centered[j];
                }
            }
        }
        let denom = (self.num_paths().max(2) - 1) as f64;
        for i in 0..n {
            for j in i..n {
                let v = cov[(i, j)] / denom;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        cov
    }

    /// Same values with the columns in reverse order, placed on `grid`.
    fn reversed_onto(&self, grid: SamplingGrid) -> Result<Self> {
        let n = self.grid.len();
        let paths = DenseMatrix::from_fn(self.num_paths(), n, |k, i| self.paths[(k, n - 1 - i)]);
        Self::new(grid, paths)
    }
}

fn check_paths(p: usize) -> Result<()> {
    if p == 0 {
        Err(Error::InvalidParameter("need at least one path".into()))
    } else {
        Ok(())
    }
}

/// Accumulates `sqrt(var_i) w_i` along each path in the given direction.
fn cumulative_paths(
    grid: &SamplingGrid,
    variances: &[f64],
    noise: WhiteNoiseSource,
    p: usize,
    from_right: bool,
) -> Result<PathSet> {
    check_paths(p)?;
    let n = grid.len();
    let sd: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
    let mut data = Vec::with_capacity(p * n);
    let mut row = vec![0.0; n];
    for k in 0..p {
        let w = noise.draws(k as u64, n);
        let mut acc = 0.0;
        if from_right {
            for i in (0..n).rev() {
                acc += w[i] * sd[i];
                row[i] = acc;
            }
        } else {
            for i in 0..n {
                acc += w[i] * sd[i];
                row[i] = acc;
            }
        }
        data.extend_from_slice(&row);
    }
    PathSet::new(grid.clone(), DenseMatrix::from_row_major(p, n, data)?)
}

/// `g(t_k) = sum_{i<=k} w(t_i) sqrt(t_i - t_{i-1})` with `t_0 = 0`.
pub fn sample_wiener(grid: &SamplingGrid, c: f64, seed: u64, p: usize) -> Result<PathSet> {
    let noise = WhiteNoiseSource::new(seed, c)?;
    let mut prev = 0.0;
    let gaps: Vec<f64> = grid
        .times()
        .iter()
        .map(|&t| {
            let d = t - prev;
            prev = t;
            d
        })
        .collect();
    cumulative_paths(grid, &gaps, noise, p, false)
}

/// `h(t_k) = sum_{i>=k} w_i sqrt(delta_i)` with `delta` from
/// [`stable_increments`]; the final term is the increment to infinity.
pub fn sample_ss1(grid: &SamplingGrid, c: f64, beta: f64, seed: u64, p: usize) -> Result<PathSet> {
    let noise = WhiteNoiseSource::new(seed, c)?;
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    cumulative_paths(grid, &stable_increments(grid, beta), noise, p, true)
}

/// Samples from the white-noise construction matching `spec`.
pub fn sample(spec: &KernelSpec, grid: &SamplingGrid, seed: u64, p: usize) -> Result<PathSet> {
    match spec.beta() {
        None => sample_wiener(grid, spec.c(), seed, p),
        Some(beta) => sample_ss1(grid, spec.c(), beta, seed, p),
    }
}

/// The stable time change `tau_k = e^{-beta t_{n+1-k}}`, `k = 1..n`.
///
/// Reversing the order turns the decreasing exponentials into an increasing
/// grid; the virtual point `t_{n+1} = infinity` maps to the Wiener origin
/// `tau_0 = 0`. A Wiener process on the `tau` grid, read back in reverse
/// order, is an SS-1 process on the original grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StableTimeTransform {
    tau: SamplingGrid,
    original: SamplingGrid,
    beta: f64,
}

impl StableTimeTransform {
    pub fn tau(&self) -> &SamplingGrid {
        &self.tau
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Index on the `tau` grid holding original index `i` (0-based).
    pub fn tau_index(&self, i: usize) -> usize {
        self.tau.len() - 1 - i
    }

    /// `t_i = -ln(tau_{n+1-i}) / beta`.
    pub fn recover_times(&self) -> Vec<f64> {
        (0..self.tau.len())
            .map(|i| -self.tau.times()[self.tau_index(i)].ln() / self.beta)
            .collect()
    }

    /// Maps paths sampled on the `tau` grid back to the original grid.
    pub fn to_original(&self, on_tau: &PathSet) -> Result<PathSet> {
        if on_tau.grid() != &self.tau {
            return Err(Error::InvalidParameter(
                "paths were not sampled on the transformed grid".into(),
            ));
        }
        on_tau.reversed_onto(self.original.clone())
    }
}

/// Builds the stable time change for `grid`.
///
/// Fails if two exponentials coincide in floating point (extreme `beta t`).
pub fn stable_time_transform(grid: &SamplingGrid, beta: f64) -> Result<StableTimeTransform> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let tau = grid.times().iter().rev().map(|&t| (-beta * t).exp()).collect();
    Ok(StableTimeTransform {
        tau: SamplingGrid::new(tau)?,
        original: grid.clone(),
        beta,
    })
}

/// SS-1 paths obtained as time-changed Wiener paths.
pub fn sample_ss1_via_wiener(
    grid: &SamplingGrid,
    c: f64,
    beta: f64,
    seed: u64,
    p: usize,
) -> Result<PathSet> {
    let tt = stable_time_transform(grid, beta)?;
    tt.to_original(&sample_wiener(tt.tau(), c, seed, p)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `E h(t_i) = 0`.
    Mean,
    /// Variance of the `i`-th increment of the construction.
    Increment,
}

/// Sample moments of one constrained quantity.
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintCheck {
    pub kind: ConstraintKind,
    pub index: usize,
    pub expected_variance: f64,
    pub sample_mean: f64,
    pub mean_se: f64,
    pub sample_variance: f64,
    pub variance_se: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub kernel: KernelSpec,
    pub paths: usize,
    pub sigmas: f64,
    pub checks: Vec<ConstraintCheck>,
    pub flagged: usize,
}

fn moments(values: impl Iterator<Item = f64>, p: usize) -> (f64, f64) {
    let xs: Vec<f64> = values.collect();
    let mean = xs.iter().sum::<f64>() / p as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (p - 1) as f64;
    (mean, var)
}

/// Checks the zero-mean constraints and the increment-variance constraints
/// of `spec`'s maximum-entropy problem on the sample paths.
///
/// Increments follow the construction: Wiener uses `h(t_1) - 0` and
/// `h(t_i) - h(t_{i-1})`; SS-1 uses `h(t_i) - h(t_{i+1})` and `h(t_n) - 0`.
/// A quantity is flagged when its sample mean or sample variance is more
/// than five standard errors from the target.
pub fn audit_constraints(ps: &PathSet, spec: &KernelSpec) -> Result<AuditReport> {
    let p = ps.num_paths();
    if p < MIN_AUDIT_PATHS {
        return Err(Error::TooFewPaths {
            required: MIN_AUDIT_PATHS,
            found: p,
        });
    }
    let grid = ps.grid();
    let t = grid.times();
    let n = grid.len();
    let c = spec.c();
    let var_se_factor = (2.0 / (p - 1) as f64).sqrt();
    let mut checks = Vec::with_capacity(2 * n);

    let mut push = |kind, index, expected: f64, (mean, var): (f64, f64)| {
        let mean_se = (expected / p as f64).sqrt();
        let variance_se = expected * var_se_factor;
        let flagged = (mean.abs() > AUDIT_SIGMAS * mean_se)
            || ((var - expected).abs() > AUDIT_SIGMAS * variance_se);
        checks.push(ConstraintCheck {
            kind,
            index,
            expected_variance: expected,
            sample_mean: mean,
            mean_se,
            sample_variance: var,
            variance_se,
            flagged,
        });
    };

    for i in 0..n {
        let expected = spec.eval(t[i], t[i]);
        push(
            ConstraintKind::Mean,
            i,
            expected,
            moments(ps.paths.row_iter().map(|r| r[i]), p),
        );
    }

    let delta = increment_variances(spec, grid)?;
    for (i, d) in delta.iter().enumerate() {
        let expected = c * d;
        let increments = ps.paths.row_iter().map(|r| match spec.family() {
            KernelFamily::Wiener => r[i] - if i == 0 { 0.0 } else { r[i - 1] },
            KernelFamily::Ss1 => r[i] - if i + 1 == n { 0.0 } else { r[i + 1] },
        });
        push(ConstraintKind::Increment, i, expected, moments(increments, p));
    }

    let flagged = checks.iter().filter(|c| c.flagged).count();
    Ok(AuditReport {
        kernel: *spec,
        paths: p,
        sigmas: AUDIT_SIGMAS,
        checks,
        flagged,
    })
}
