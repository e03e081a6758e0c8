//! Band projection, band extension and Gaussian-entropy comparisons.
//!
//! A 1-band skeleton fixes the diagonal and first off-diagonal of a
//! covariance matrix. Among all positive-definite completions, the one whose
//! inverse is tridiagonal (the band extension) is unique and has maximal
//! Gaussian entropy. For Wiener and SS-1 Gram matrices the band extension of
//! their own band is the Gram matrix itself. The randomized audits in this
//! module compare the band extension (or the closed-form kernel law) with
//! random competitors satisfying the same constraints.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::dense::{Cholesky, DenseMatrix};
use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::kernels::{stable_increments, KernelFamily, KernelSpec};
use crate::process::stream_rng;
use crate::structure::log_det;

/// Slack allowed when comparing a candidate entropy with the maximum.
pub const DOMINANCE_SLACK: f64 = 1e-9;

/// Gap counted as a strict entropy loss.
pub const STRICT_GAP: f64 = 1e-6;

/// Halvings of the perturbation scale before giving up on a direction.
const MAX_SHRINKS: u32 = 64;

/// Known diagonal and first off-diagonal of a symmetric matrix; every other
/// entry is unspecified.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSkeleton {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl BandSkeleton {
    /// Validates that every contiguous 2x2 block is positive definite.
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidParameter("empty band skeleton".into()));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(Error::DimensionMismatch {
                expected: diag.len() - 1,
                found: offdiag.len(),
            });
        }
        if let Some(index) = diag.iter().position(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::NotCompletable { index });
        }
        for (i, &e) in offdiag.iter().enumerate() {
            if !e.is_finite() || !(diag[i] * diag[i + 1] - e * e > 0.0) {
                return Err(Error::NotCompletable { index: i });
            }
        }
        Ok(Self { diag, offdiag })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }
}

/// Copies the diagonal and first off-diagonal of a symmetric matrix.
pub fn band_project(m: &DenseMatrix) -> Result<BandSkeleton> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            found: m.cols(),
        });
    }
    if let Some((row, col)) = m.asymmetry() {
        return Err(Error::NotSymmetric { row, col });
    }
    let n = m.rows();
    BandSkeleton::new(
        (0..n).map(|i| m[(i, i)]).collect(),
        (0..n.saturating_sub(1)).map(|i| m[(i, i + 1)]).collect(),
    )
}

/// Unique positive completion of `a` with tridiagonal inverse.
///
/// Entries are filled by increasing distance from the diagonal, left to
/// right, with the Gauss-Markov recursion
/// `M[i][j] = M[i][j-1] M[j-1][j] / M[j-1][j-1]`.
pub fn band_extend(a: &BandSkeleton) -> Result<DenseMatrix> {
    let n = a.len();
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = a.diag[i];
    }
    for (i, &e) in a.offdiag.iter().enumerate() {
        m[(i, i + 1)] = e;
        m[(i + 1, i)] = e;
    }
    for k in 2..n {
        for i in 0..n - k {
            let j = i + k;
            let v = m[(i, j - 1)] * m[(j - 1, j)] / m[(j - 1, j - 1)];
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Differential entropy in nats of `N(0, cov)`:
/// `(n/2) ln(2 pi e) + (1/2) ln det cov`.
pub fn gaussian_entropy(cov: &DenseMatrix) -> Result<f64> {
    let chol = Cholesky::factor(cov)?;
    Ok(entropy_from_log_det(cov.rows(), chol.log_det()))
}

pub(crate) fn entropy_from_log_det(n: usize, log_det: f64) -> f64 {
    0.5 * n as f64 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + 0.5 * log_det
}

/// A positive extension of `a` drawn by perturb-and-reject.
#[derive(Debug, Clone)]
pub struct ExtensionDraw {
    pub matrix: DenseMatrix,
    /// Candidate matrices tried, including the accepted one.
    pub proposals: u32,
}

/// Random positive-definite matrix agreeing with `a` on the band.
///
/// The unspecified entries of the band extension are perturbed by
/// `s u_ij sqrt(M_ii M_jj)` with `u_ij` uniform on `[-1, 1]` and `s` uniform
/// on `[1/4, 1]`; while the result is not positive definite `s` is halved.
/// Deterministic in `seed`.
pub fn random_positive_extension(a: &BandSkeleton, seed: u64) -> Result<DenseMatrix> {
    let base = band_extend(a)?;
    Ok(draw_extension(&base, &mut stream_rng(seed, 0)).matrix)
}

fn draw_extension(base: &DenseMatrix, rng: &mut ChaCha8Rng) -> ExtensionDraw {
    let n = base.rows();
    if n < 3 {
        return ExtensionDraw {
            matrix: base.clone(),
            proposals: 1,
        };
    }
    let mut direction = DenseMatrix::zeros(n, n);
    for k in 2..n {
        for i in 0..n - k {
            let j = i + k;
            let u: f64 = rng.random_range(-1.0..=1.0);
            let v = u * (base[(i, i)] * base[(j, j)]).sqrt();
            direction[(i, j)] = v;
            direction[(j, i)] = v;
        }
    }
    let mut scale: f64 = rng.random_range(0.25..=1.0);
    let mut proposals = 0;
    while proposals < MAX_SHRINKS {
        proposals += 1;
        let candidate = DenseMatrix::from_fn(n, n, |i, j| base[(i, j)] + scale * direction[(i, j)]);
        if Cholesky::factor(&candidate).is_ok() {
            return ExtensionDraw {
                matrix: candidate,
                proposals,
            };
        }
        scale *= 0.5;
    }
    ExtensionDraw {
        matrix: base.clone(),
        proposals,
    }
}

/// Entropy of a reference law versus randomized competitors.
#[derive(Debug, Clone, Serialize)]
pub struct GaussianEntropyReport {
    /// Which maximum-entropy problem was audited.
    pub problem: &'static str,
    /// Entropy (nats) of the claimed maximizer.
    pub reference_entropy: f64,
    pub candidate_entropies: Vec<f64>,
    /// Every candidate is at most `reference_entropy + 1e-9`.
    pub dominance: bool,
    /// Candidates at least `1e-6` nats below the reference.
    pub strictly_dominated: usize,
    /// Largest `candidate - reference`, if any candidate exists.
    pub max_excess: Option<f64>,
    /// Matrices proposed to obtain the accepted candidates.
    pub proposals: u64,
    pub seed: u64,
}

impl GaussianEntropyReport {
    fn build(
        problem: &'static str,
        reference_entropy: f64,
        candidate_entropies: Vec<f64>,
        proposals: u64,
        seed: u64,
    ) -> Self {
        let dominance = candidate_entropies
            .iter()
            .all(|&h| h <= reference_entropy + DOMINANCE_SLACK);
        let strictly_dominated = candidate_entropies
            .iter()
            .filter(|&&h| h <= reference_entropy - STRICT_GAP)
            .count();
        let max_excess = candidate_entropies
            .iter()
            .map(|h| h - reference_entropy)
            .reduce(f64::max);
        Self {
            problem,
            reference_entropy,
            candidate_entropies,
            dominance,
            strictly_dominated,
            max_excess,
            proposals,
            seed,
        }
    }

    /// Accepted candidates per proposal.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.candidate_entropies.len() as f64 / self.proposals as f64
        }
    }
}

/// Band extension versus `trials` random positive extensions of `a`.
///
/// Trial `k` draws from the stream `(seed, k)`, so trials are independent of
/// evaluation order.
pub fn completion_entropy_test(
    a: &BandSkeleton,
    seed: u64,
    trials: usize,
) -> Result<GaussianEntropyReport> {
    let base = band_extend(a)?;
    let reference = gaussian_entropy(&base)?;
    let mut entropies = Vec::with_capacity(trials);
    let mut proposals = 0u64;
    for k in 0..trials {
        let draw = draw_extension(&base, &mut stream_rng(seed, k as u64));
        proposals += u64::from(draw.proposals);
        entropies.push(gaussian_entropy(&draw.matrix)?);
    }
    Ok(GaussianEntropyReport::build(
        "covariance_completion",
        reference,
        entropies,
        proposals,
        seed,
    ))
}

/// Increment variances (unit scale) and the direction of accumulation for
/// the white-noise construction of `spec` on `grid`.
///
/// Wiener accumulates from the left from `t_0 = 0`; SS-1 accumulates from the
/// right from the virtual point at infinity.
pub(crate) fn increment_variances(spec: &KernelSpec, grid: &SamplingGrid) -> Result<Vec<f64>> {
    match spec.family() {
        KernelFamily::Wiener => {
            if grid.first() <= 0.0 {
                return Err(Error::SingularGram(
                    "Wiener kernel on a grid with t_1 = 0".into(),
                ));
            }
            let mut prev = 0.0;
            Ok(grid
                .times()
                .iter()
                .map(|&t| {
                    let d = t - prev;
                    prev = t;
                    d
                })
                .collect())
        }
        KernelFamily::Ss1 => Ok(stable_increments(
            grid,
            spec.beta().expect("SS-1 spec carries beta"),
        )),
    }
}

/// Covariance of `h = sqrt(c) V diag(sqrt(delta)) L z`, a zero-mean law whose
/// increments have exactly the variances required by the kernel's
/// white-noise construction, correlated through `L L^T`.
///
/// `corr_factor` must be lower triangular with unit-norm rows so that
/// `L L^T` is a correlation matrix; the identity reproduces the kernel.
pub fn increment_law_covariance(
    spec: &KernelSpec,
    grid: &SamplingGrid,
    corr_factor: &DenseMatrix,
) -> Result<DenseMatrix> {
    let n = grid.len();
    if corr_factor.rows() != n || corr_factor.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: corr_factor.rows(),
        });
    }
    let delta = increment_variances(spec, grid)?;
    let sd: Vec<f64> = delta.iter().map(|d| d.sqrt()).collect();
    // Row r of D L, then accumulate rows in the direction of the construction.
    let scaled = DenseMatrix::from_fn(n, n, |i, j| sd[i] * corr_factor[(i, j)]);
    let mut g = DenseMatrix::zeros(n, n);
    let mut acc = vec![0.0; n];
    let order: Vec<usize> = match spec.family() {
        KernelFamily::Wiener => (0..n).collect(),
        KernelFamily::Ss1 => (0..n).rev().collect(),
    };
    for i in order {
        for (a, x) in acc.iter_mut().zip(scaled.row(i)) {
            *a += x;
        }
        for (j, a) in acc.iter().enumerate() {
            g[(i, j)] = *a;
        }
    }
    let c = spec.c();
    Ok(DenseMatrix::from_fn(n, n, |i, j| {
        c * g.row(i).iter().zip(g.row(j)).map(|(a, b)| a * b).sum::<f64>()
    }))
}

/// Lower-triangular factor with unit-norm rows and positive diagonal, so
/// `L L^T` is a random correlation matrix.
pub fn random_correlation_factor(n: usize, rng: &mut impl Rng) -> DenseMatrix {
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let mut row: Vec<f64> = (0..=i).map(|_| rng.sample(StandardNormal)).collect();
        row[i] = row[i].abs();
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (j, x) in row.iter().enumerate() {
            l[(i, j)] = x / norm;
        }
    }
    l
}

/// The kernel's own law versus `trials` laws meeting the same increment
/// variance and zero-mean constraints with randomly correlated increments.
///
/// Since `ln det` of a candidate splits as `ln det R + sum ln delta_i` and
/// `det R <= 1` for a correlation matrix `R`, every candidate must lose.
pub fn increment_constrained_entropy_test(
    spec: &KernelSpec,
    grid: &SamplingGrid,
    seed: u64,
    trials: usize,
) -> Result<GaussianEntropyReport> {
    let reference = entropy_from_log_det(grid.len(), log_det(spec, grid)?);
    let mut entropies = Vec::with_capacity(trials);
    for k in 0..trials {
        let mut rng = stream_rng(seed, k as u64);
        let l = random_correlation_factor(grid.len(), &mut rng);
        let cov = increment_law_covariance(spec, grid, &l)?;
        entropies.push(gaussian_entropy(&cov)?);
    }
    let problem = match spec.family() {
        KernelFamily::Wiener => "wiener_increments",
        KernelFamily::Ss1 => "ss1_increments",
    };
    Ok(GaussianEntropyReport::build(
        problem,
        reference,
        entropies,
        trials as u64,
        seed,
    ))
}
