//! Kernel-regularized FIR impulse-response estimation.
//!
//! The impulse response `h` (length `n`) gets the Gaussian prior `N(0, P)`
//! with `P` a Wiener or SS-1 Gram matrix, and the data follow
//! `y = Phi h + e`, `e ~ N(0, sigma2 I)`. Hyperparameters are tuned by
//! maximizing the marginal likelihood of `y`; the estimate is the posterior
//! mean. All algebra happens at the FIR order `n`: the prior enters only
//! through its closed-form tridiagonal precision and log determinant.

use serde::{Deserialize, Serialize};

use crate::dense::{Cholesky, DenseMatrix};
use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::kernels::{KernelFamily, KernelSpec};
use crate::structure::{closed_form_inverse, log_det};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Input/output record for FIR identification.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationProblem {
    u: Vec<f64>,
    y: Vec<f64>,
    order: usize,
    sigma2: Option<f64>,
}

impl EstimationProblem {
    /// `sigma2 = None` asks the tuner to estimate the noise variance.
    pub fn new(u: Vec<f64>, y: Vec<f64>, order: usize, sigma2: Option<f64>) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                found: y.len(),
            });
        }
        if order == 0 {
            return Err(Error::InvalidParameter("FIR order must be at least 1".into()));
        }
        if order > u.len() {
            return Err(Error::OrderTooLarge {
                order,
                len: u.len(),
            });
        }
        if let Some(s) = sigma2 {
            check_sigma2(s)?;
        }
        Ok(Self {
            u,
            y,
            order,
            sigma2,
        })
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn sigma2(&self) -> Option<f64> {
        self.sigma2
    }

    /// The sample grid `t_i = i` (`Ts = 1`), `i = 1..=n`.
    pub fn default_grid(&self) -> SamplingGrid {
        SamplingGrid::uniform(self.order, 1.0, 1.0).expect("order >= 1")
    }
}

fn check_sigma2(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "noise variance must be positive, got {s}"
        )))
    }
}

/// `Phi[k][j] = u[k - j]`, zero for negative time (zero initial conditions).
pub fn toeplitz_regressor(u: &[f64], n: usize) -> Result<DenseMatrix> {
    if n > u.len() {
        return Err(Error::OrderTooLarge {
            order: n,
            len: u.len(),
        });
    }
    Ok(DenseMatrix::from_fn(u.len(), n, |k, j| {
        if k >= j {
            u[k - j]
        } else {
            0.0
        }
    }))
}

/// Regressor, data and the `n x n` products reused by every hyperparameter
/// evaluation.
#[derive(Debug, Clone)]
pub struct RegressionData {
    phi: DenseMatrix,
    y: Vec<f64>,
    phi_t_phi: DenseMatrix,
    phi_t_y: Vec<f64>,
}

/// Posterior quantities at one hyperparameter setting.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub mean: Vec<f64>,
    pub log_ml: f64,
}

impl RegressionData {
    pub fn new(phi: DenseMatrix, y: Vec<f64>) -> Result<Self> {
        if phi.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: phi.rows(),
                found: y.len(),
            });
        }
        let n = phi.cols();
        let mut phi_t_phi = DenseMatrix::zeros(n, n);
        let mut phi_t_y = vec![0.0; n];
        for (row, &yk) in phi.row_iter().zip(&y) {
            for i in 0..n {
                phi_t_y[i] += row[i] * yk;
                for j in 0..=i {
                    phi_t_phi[(i, j)] += row[i] * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                phi_t_phi[(j, i)] = phi_t_phi[(i, j)];
            }
        }
        Ok(Self {
            phi,
            y,
            phi_t_phi,
            phi_t_y,
        })
    }

    pub fn from_problem(problem: &EstimationProblem) -> Result<Self> {
        Self::new(
            toeplitz_regressor(&problem.u, problem.order)?,
            problem.y.clone(),
        )
    }

    pub fn order(&self) -> usize {
        self.phi.cols()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Posterior mean and log marginal likelihood.
    ///
    /// With `A = Phi^T Phi / sigma2 + P^{-1}` (Cholesky-factored) and
    /// `h = A^{-1} Phi^T y / sigma2`:
    ///
    /// * `y^T (Phi P Phi^T + sigma2 I)^{-1} y = |y - Phi h|^2 / sigma2 + h^T P^{-1} h`
    /// * `ln det(Phi P Phi^T + sigma2 I) = ln det P + ln det A + N ln sigma2`
    pub fn posterior(&self, sigma2: f64, spec: &KernelSpec, grid: &SamplingGrid) -> Result<Posterior> {
        check_sigma2(sigma2)?;
        let n = self.order();
        if grid.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: grid.len(),
            });
        }
        let precision = closed_form_inverse(spec, grid)?;
        let mut a = self.phi_t_phi.scaled(1.0 / sigma2);
        for (i, d) in precision.diag().iter().enumerate() {
            a[(i, i)] += d;
        }
        for (i, e) in precision.offdiag().iter().enumerate() {
            a[(i, i + 1)] += e;
            a[(i + 1, i)] += e;
        }
        let chol = Cholesky::factor(&a)
            .map_err(|_| Error::SingularGram("regularized normal matrix is not positive definite".into()))?;
        let rhs: Vec<f64> = self.phi_t_y.iter().map(|v| v / sigma2).collect();
        let mean = chol.solve(&rhs);

        let fitted = self.phi.mul_vec(&mean)?;
        let rss: f64 = self.y.iter().zip(&fitted).map(|(y, f)| (y - f) * (y - f)).sum();
        let prior_quad: f64 = precision
            .mul_vec(&mean)?
            .iter()
            .zip(&mean)
            .map(|(a, b)| a * b)
            .sum();
        let quad = rss / sigma2 + prior_quad;
        let big_n = self.len() as f64;
        let ld = log_det(spec, grid)? + chol.log_det() + big_n * sigma2.ln();
        let log_ml = -0.5 * (quad + ld + big_n * LN_2PI);
        Ok(Posterior { mean, log_ml })
    }
}

/// `(Phi^T Phi / sigma2 + P^{-1})^{-1} Phi^T y / sigma2` with the closed-form
/// tridiagonal `P^{-1}`.
pub fn posterior_mean(
    phi: &DenseMatrix,
    y: &[f64],
    sigma2: f64,
    spec: &KernelSpec,
    grid: &SamplingGrid,
) -> Result<Vec<f64>> {
    Ok(RegressionData::new(phi.clone(), y.to_vec())?
        .posterior(sigma2, spec, grid)?
        .mean)
}

/// `ln N(y; 0, Phi P Phi^T + sigma2 I)` evaluated at dimension `n`.
pub fn log_marginal_likelihood(
    phi: &DenseMatrix,
    y: &[f64],
    sigma2: f64,
    spec: &KernelSpec,
    grid: &SamplingGrid,
) -> Result<f64> {
    Ok(RegressionData::new(phi.clone(), y.to_vec())?
        .posterior(sigma2, spec, grid)?
        .log_ml)
}

/// Candidate values for one hyperparameter.
///
/// JSON: `{"min":0.01,"max":10,"points":7}` (log-spaced) or
/// `{"values":[0.1,1.0]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum LogRange {
    Values { values: Vec<f64> },
    Spaced { min: f64, max: f64, points: usize },
}

impl LogRange {
    pub fn spaced(min: f64, max: f64, points: usize) -> Self {
        LogRange::Spaced { min, max, points }
    }

    pub fn single(value: f64) -> Self {
        LogRange::Values { values: vec![value] }
    }

    /// Validated candidate values.
    pub fn candidates(&self, name: &str) -> Result<Vec<f64>> {
        let out = match self {
            LogRange::Values { values } => values.clone(),
            LogRange::Spaced { min, max, points } => {
                if *points == 0 || !(max >= min) {
                    return Err(Error::EmptySearchSpace(format!(
                        "{name}: range [{min}, {max}] with {points} points"
                    )));
                }
                if *points == 1 {
                    vec![*min]
                } else {
                    let (lo, hi) = (min.ln(), max.ln());
                    let step = (hi - lo) / (*points - 1) as f64;
                    (0..*points)
                        .map(|k| {
                            if k + 1 == *points {
                                *max
                            } else {
                                (lo + k as f64 * step).exp()
                            }
                        })
                        .collect()
                }
            }
        };
        if out.is_empty() {
            return Err(Error::EmptySearchSpace(format!("{name}: no candidate values")));
        }
        if let Some(bad) = out.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{name}: candidate {bad} is not positive"
            )));
        }
        Ok(out)
    }
}

/// Simplex refinement settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub enabled: bool,
    pub max_evals: usize,
    /// Stop once the spread of negative log-ML values across the simplex
    /// falls below this.
    pub tol: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            max_evals: 400,
            tol: 1e-9,
        }
    }
}

/// Hyperparameter search: a log grid followed by Nelder-Mead in log space,
/// confined to the grid's bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub family: KernelFamily,
    pub c: LogRange,
    /// Ignored for the Wiener kernel.
    pub beta: LogRange,
    /// Ignored when the problem fixes the noise variance.
    pub sigma2: LogRange,
    pub refine: RefineConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            family: KernelFamily::Ss1,
            c: LogRange::spaced(1e-3, 1e3, 7),
            beta: LogRange::spaced(1e-2, 3.0, 7),
            sigma2: LogRange::spaced(1e-4, 1e2, 7),
            refine: RefineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Grid,
    Refine,
}

/// One marginal-likelihood evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub stage: Stage,
    pub c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub sigma2: f64,
    /// `None` when the candidate could not be evaluated (e.g. underflow).
    pub log_ml: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TunedHyperparameters {
    pub spec: KernelSpec,
    pub sigma2: f64,
    pub log_ml: f64,
    pub sigma2_tuned: bool,
    pub evaluations: Vec<Evaluation>,
}

/// Candidate lists `[c, beta, sigma2]`; the beta list is a single dummy for
/// Wiener so the product stays uniform.
struct SearchSpace {
    family: KernelFamily,
    axes: [Vec<f64>; 3],
    sigma2_tuned: bool,
}

impl SearchSpace {
    fn new(problem: &EstimationProblem, search: &SearchConfig) -> Result<Self> {
        let c = search.c.candidates("c")?;
        let beta = match search.family {
            KernelFamily::Ss1 => search.beta.candidates("beta")?,
            KernelFamily::Wiener => vec![1.0],
        };
        let (sigma2, sigma2_tuned) = match problem.sigma2 {
            Some(s) => (vec![s], false),
            None => (search.sigma2.candidates("sigma2")?, true),
        };
        Ok(Self {
            family: search.family,
            axes: [c, beta, sigma2],
            sigma2_tuned,
        })
    }

    fn spec(&self, c: f64, beta: f64) -> Result<KernelSpec> {
        KernelSpec::new(self.family, c, Some(beta))
    }

    /// Axes with more than one distinct candidate, with their log bounds.
    fn free_axes(&self) -> Vec<(usize, f64, f64)> {
        self.axes
            .iter()
            .enumerate()
            .filter_map(|(k, vals)| {
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min).ln();
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max).ln();
                (hi > lo).then_some((k, lo, hi))
            })
            .collect()
    }
}

struct Tuner<'a> {
    data: &'a RegressionData,
    grid: &'a SamplingGrid,
    space: SearchSpace,
    evaluations: Vec<Evaluation>,
    best: Option<(f64, [f64; 3])>,
}

impl Tuner<'_> {
    fn evaluate(&mut self, stage: Stage, x: [f64; 3]) -> Option<f64> {
        let log_ml = self
            .space
            .spec(x[0], x[1])
            .and_then(|spec| self.data.posterior(x[2], &spec, self.grid))
            .ok()
            .map(|p| p.log_ml)
            .filter(|v| v.is_finite());
        self.evaluations.push(Evaluation {
            stage,
            c: x[0],
            beta: (self.space.family == KernelFamily::Ss1).then_some(x[1]),
            sigma2: x[2],
            log_ml,
        });
        if let Some(v) = log_ml {
            if self.best.is_none_or(|(b, _)| v > b) {
                self.best = Some((v, x));
            }
        }
        log_ml
    }

    fn grid_search(&mut self) {
        let [cs, betas, sigmas] = self.space.axes.clone();
        for &c in &cs {
            for &beta in &betas {
                for &s in &sigmas {
                    self.evaluate(Stage::Grid, [c, beta, s]);
                }
            }
        }
    }

    fn refine(&mut self, cfg: &RefineConfig) {
        let Some((_, start)) = self.best else { return };
        let free = self.space.free_axes();
        if !cfg.enabled || free.is_empty() || cfg.max_evals == 0 {
            return;
        }
        let steps: Vec<f64> = free
            .iter()
            .map(|&(k, lo, hi)| (hi - lo) / (self.space.axes[k].len().max(2) - 1) as f64)
            .collect();
        let x0: Vec<f64> = free.iter().map(|&(k, _, _)| start[k].ln()).collect();
        let to_params = |z: &[f64]| {
            let mut x = start;
            for (&(k, lo, hi), v) in free.iter().zip(z) {
                x[k] = v.clamp(lo, hi).exp();
            }
            x
        };
        let mut objective = |z: &[f64]| {
            self.evaluate(Stage::Refine, to_params(z))
                .map_or(f64::INFINITY, |v| -v)
        };
        nelder_mead(&mut objective, &x0, &steps, cfg.max_evals, cfg.tol);
    }
}

/// Minimizes `f` from `x0` with an axis-aligned initial simplex.
fn nelder_mead(
    f: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    max_evals: usize,
    tol: f64,
) {
    let d = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for k in 0..d {
        let mut v = x0.to_vec();
        v[k] += 0.5 * steps[k];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = d + 1;

    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
    };

    while evals < max_evals {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if values[d].is_finite() && values[d] - values[0] <= tol {
            break;
        }

        let mut centroid = vec![0.0; d];
        for v in &simplex[..d] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / d as f64;
            }
        }
        let worst = simplex[d].clone();
        let reflected = lerp(&centroid, &worst, -1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = lerp(&centroid, &worst, -2.0);
            let fe = f(&expanded);
            evals += 1;
            if fe < fr {
                simplex[d] = expanded;
                values[d] = fe;
            } else {
                simplex[d] = reflected;
                values[d] = fr;
            }
        } else if fr < values[d - 1] {
            simplex[d] = reflected;
            values[d] = fr;
        } else {
            let (contracted, fc) = if fr < values[d] {
                let p = lerp(&centroid, &worst, -0.5);
                let v = f(&p);
                (p, v)
            } else {
                let p = lerp(&centroid, &worst, 0.5);
                let v = f(&p);
                (p, v)
            };
            evals += 1;
            if fc < values[d].min(fr) {
                simplex[d] = contracted;
                values[d] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=d {
                    simplex[i] = lerp(&best, &simplex[i], 0.5);
                    values[i] = f(&simplex[i]);
                }
                evals += d;
            }
        }
    }
}

/// Maximizes the log marginal likelihood over `search`.
///
/// Every grid candidate is evaluated first; the best one seeds a Nelder-Mead
/// refinement. The returned point is the best evaluation seen in either
/// stage, so it is never worse than any grid candidate.
pub fn tune_hyperparameters(
    problem: &EstimationProblem,
    grid: &SamplingGrid,
    search: &SearchConfig,
) -> Result<TunedHyperparameters> {
    let data = RegressionData::from_problem(problem)?;
    tune_with_data(&data, problem, grid, search)
}

fn tune_with_data(
    data: &RegressionData,
    problem: &EstimationProblem,
    grid: &SamplingGrid,
    search: &SearchConfig,
) -> Result<TunedHyperparameters> {
    if grid.len() != problem.order {
        return Err(Error::DimensionMismatch {
            expected: problem.order,
            found: grid.len(),
        });
    }
    let space = SearchSpace::new(problem, search)?;
    let sigma2_tuned = space.sigma2_tuned;
    let mut tuner = Tuner {
        data,
        grid,
        space,
        evaluations: Vec::new(),
        best: None,
    };
    tuner.grid_search();
    if tuner.best.is_none() {
        // Surface the first failure rather than a generic message.
        let [c, beta, s] = [
            tuner.space.axes[0][0],
            tuner.space.axes[1][0],
            tuner.space.axes[2][0],
        ];
        let spec = tuner.space.spec(c, beta)?;
        data.posterior(s, &spec, grid)?;
        return Err(Error::EmptySearchSpace(
            "no candidate produced a finite marginal likelihood".into(),
        ));
    }
    tuner.refine(&search.refine);
    let (log_ml, x) = tuner.best.expect("grid stage found a candidate");
    Ok(TunedHyperparameters {
        spec: tuner.space.spec(x[0], x[1])?,
        sigma2: x[2],
        log_ml,
        sigma2_tuned,
        evaluations: tuner.evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// True when `sigma2` was tuned jointly rather than fixed by the caller.
    pub sigma2_tuned: bool,
    pub evaluations: Vec<Evaluation>,
}

/// Fitted impulse response with the hyperparameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpulseResponseEstimate {
    pub coefficients: Vec<f64>,
    pub kernel: KernelSpec,
    pub sigma2: f64,
    pub log_ml: f64,
    pub diagnostics: Diagnostics,
}

/// Tunes the hyperparameters, then returns the posterior mean at the optimum.
pub fn fit(
    problem: &EstimationProblem,
    grid: &SamplingGrid,
    search: &SearchConfig,
) -> Result<ImpulseResponseEstimate> {
    let data = RegressionData::from_problem(problem)?;
    let tuned = tune_with_data(&data, problem, grid, search)?;
    let post = data.posterior(tuned.sigma2, &tuned.spec, grid)?;
    Ok(ImpulseResponseEstimate {
        coefficients: post.mean,
        kernel: tuned.spec,
        sigma2: tuned.sigma2,
        log_ml: post.log_ml,
        diagnostics: Diagnostics {
            sigma2_tuned: tuned.sigma2_tuned,
            evaluations: tuned.evaluations,
        },
    })
}
