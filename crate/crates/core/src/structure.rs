//! Closed-form structure of the Wiener and SS-1 Gram matrices.
//!
//! For both kernels the precision matrix `P^{-1}` is tridiagonal, it factors
//! as `F^T F` with `F` upper bidiagonal, and the upper-triangular square root
//! `U = F^{-1}` (so `P = U U^T`) has an `O(n)` description. Everything here is
//! computed from the grid directly; no dense matrix is ever inverted.
//!
//! Scale handling: the formulas are derived for `c = 1` and the scale is put
//! back with `(cP)^{-1} = P^{-1}/c`, `det(cP) = c^n det P` and a factor
//! `1/sqrt(c)` on `F`.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::kernels::{log_stable_increments, stable_increments, KernelFamily, KernelSpec};

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalMatrix {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        check_band_lengths(diag.len(), offdiag.len())?;
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

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.len();
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for (i, &e) in self.offdiag.iter().enumerate() {
            m[(i, i + 1)] = e;
            m[(i + 1, i)] = e;
        }
        m
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), v.len())?;
        let n = self.len();
        let mut out: Vec<f64> = self.diag.iter().zip(v).map(|(d, x)| d * x).collect();
        for i in 0..n.saturating_sub(1) {
            out[i] += self.offdiag[i] * v[i + 1];
            out[i + 1] += self.offdiag[i] * v[i];
        }
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            diag: self.diag.iter().map(|x| x * factor).collect(),
            offdiag: self.offdiag.iter().map(|x| x * factor).collect(),
        }
    }
}

/// Upper bidiagonal factor `F` with positive diagonal and `P^{-1} = F^T F`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperBidiagonal {
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl UpperBidiagonal {
    pub fn new(diag: Vec<f64>, sup: Vec<f64>) -> Result<Self> {
        check_band_lengths(diag.len(), sup.len())?;
        Ok(Self { diag, sup })
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

    /// First superdiagonal.
    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.len();
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for (i, &e) in self.sup.iter().enumerate() {
            m[(i, i + 1)] = e;
        }
        m
    }

    /// `F v`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), v.len())?;
        let n = self.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n - 1 {
            out.push(self.diag[i] * v[i] + self.sup[i] * v[i + 1]);
        }
        out.push(self.diag[n - 1] * v[n - 1]);
        Ok(out)
    }

    /// `F^T v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), v.len())?;
        let n = self.len();
        let mut out = Vec::with_capacity(n);
        out.push(self.diag[0] * v[0]);
        for i in 1..n {
            out.push(self.diag[i] * v[i] + self.sup[i - 1] * v[i - 1]);
        }
        Ok(out)
    }

    /// The tridiagonal product `F^T F`.
    pub fn gram(&self) -> TridiagonalMatrix {
        let n = self.len();
        let mut diag = Vec::with_capacity(n);
        diag.push(self.diag[0] * self.diag[0]);
        for i in 1..n {
            diag.push(self.sup[i - 1] * self.sup[i - 1] + self.diag[i] * self.diag[i]);
        }
        let offdiag = (0..n - 1).map(|i| self.diag[i] * self.sup[i]).collect();
        TridiagonalMatrix { diag, offdiag }
    }
}

/// `O(n)` description of the upper-triangular `U` with `U U^T = P`.
///
/// Entries for `i <= j` are `U[i][j] = r_j` for SS-1 and
/// `U[i][j] = (t_i / t_j) r_j` for Wiener, where `r_j = 1 / F[j][j]` is the
/// reciprocal diagonal of the precision factor.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredSqrt {
    spec: KernelSpec,
    times: Vec<f64>,
    recip_diag: Vec<f64>,
}

impl StructuredSqrt {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn recip_diag(&self) -> &[f64] {
        &self.recip_diag
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i > j {
            return 0.0;
        }
        match self.spec.family() {
            KernelFamily::Ss1 => self.recip_diag[j],
            KernelFamily::Wiener => self.times[i] / self.times[j] * self.recip_diag[j],
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.len();
        DenseMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    /// `U z` via suffix sums. With `z` standard normal this is an exact draw
    /// from `N(0, P)`.
    pub fn mul_vec(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), z.len())?;
        let n = self.len();
        let mut out = vec![0.0; n];
        let mut acc = 0.0;
        match self.spec.family() {
            KernelFamily::Ss1 => {
                for j in (0..n).rev() {
                    acc += self.recip_diag[j] * z[j];
                    out[j] = acc;
                }
            }
            KernelFamily::Wiener => {
                for j in (0..n).rev() {
                    acc += self.recip_diag[j] * z[j] / self.times[j];
                    out[j] = self.times[j] * acc;
                }
            }
        }
        Ok(out)
    }
}

fn check_band_lengths(n: usize, off: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("empty banded matrix".into()));
    }
    if off + 1 != n {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            found: off,
        });
    }
    Ok(())
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn check_wiener_origin(spec: &KernelSpec, grid: &SamplingGrid) -> Result<()> {
    if spec.family() == KernelFamily::Wiener && grid.first() <= 0.0 {
        return Err(Error::SingularGram(
            "Wiener kernel on a grid with t_1 = 0".into(),
        ));
    }
    Ok(())
}

/// Unit-scale SS-1 increments, rejecting any that underflowed to zero.
fn checked_increments(grid: &SamplingGrid, beta: f64) -> Result<Vec<f64>> {
    let delta = stable_increments(grid, beta);
    if let Some(i) = delta.iter().position(|&d| !(d > 0.0) || !(1.0 / d).is_finite()) {
        return Err(Error::SingularGram(format!(
            "SS-1 increment {i} is not representable (beta * t too large)"
        )));
    }
    Ok(delta)
}

/// Tridiagonal `P^{-1}` from its closed form.
///
/// Wiener, with `d_k = t_{k+1} - t_k`:
/// `[0][0] = t_2 / (t_1 d_1)`, interior `(t_{i+1} - t_{i-1}) / (d_{i-1} d_i)`,
/// last `1 / d_{n-1}`, off-diagonal `-1 / d_i`.
///
/// SS-1, with `delta` from [`stable_increments`]:
/// `[0][0] = 1 / delta_1`, interior `(delta_{i-1} + delta_i) / (delta_{i-1} delta_i)`,
/// last `e^{beta (t_n - t_{n-1})} / delta_{n-1}`, off-diagonal `-1 / delta_i`.
///
/// `n = 1` and `n = 2` are covered by the same first/last row rules; for
/// `n = 1` the single entry is `1 / P[0][0]`.
pub fn closed_form_inverse(spec: &KernelSpec, grid: &SamplingGrid) -> Result<TridiagonalMatrix> {
    check_wiener_origin(spec, grid)?;
    let t = grid.times();
    let n = t.len();
    let inv_c = 1.0 / spec.c();
    let mut diag = Vec::with_capacity(n);
    let mut offdiag = Vec::with_capacity(n.saturating_sub(1));

    match spec.family() {
        KernelFamily::Wiener => {
            if n == 1 {
                diag.push(1.0 / t[0]);
            } else {
                let d: Vec<f64> = grid.gaps().collect();
                diag.push(t[1] / (t[0] * d[0]));
                for i in 1..n - 1 {
                    diag.push((t[i + 1] - t[i - 1]) / (d[i - 1] * d[i]));
                }
                diag.push(1.0 / d[n - 2]);
                offdiag.extend(d.iter().map(|g| -1.0 / g));
            }
        }
        KernelFamily::Ss1 => {
            let beta = spec.beta().expect("SS-1 spec carries beta");
            let delta = checked_increments(grid, beta)?;
            if n == 1 {
                diag.push(1.0 / delta[0]);
            } else {
                diag.push(1.0 / delta[0]);
                for i in 1..n - 1 {
                    diag.push((delta[i - 1] + delta[i]) / (delta[i - 1] * delta[i]));
                }
                diag.push((beta * (t[n - 1] - t[n - 2])).exp() / delta[n - 2]);
                offdiag.extend(delta[..n - 1].iter().map(|d| -1.0 / d));
            }
        }
    }
    for x in diag.iter_mut().chain(offdiag.iter_mut()) {
        *x *= inv_c;
    }
    Ok(TridiagonalMatrix { diag, offdiag })
}

/// `ln det P`, accumulated term by term in the log domain.
///
/// Wiener: `n ln c + ln t_1 + sum ln(t_{k+1} - t_k)`.
/// SS-1: `n ln c - beta t_n + sum ln(e^{-beta t_k} - e^{-beta t_{k+1}})`.
pub fn log_det(spec: &KernelSpec, grid: &SamplingGrid) -> Result<f64> {
    check_wiener_origin(spec, grid)?;
    let n = grid.len() as f64;
    let body = match spec.family() {
        KernelFamily::Wiener => grid.first().ln() + grid.gaps().map(f64::ln).sum::<f64>(),
        KernelFamily::Ss1 => {
            let beta = spec.beta().expect("SS-1 spec carries beta");
            log_stable_increments(grid, beta).iter().sum::<f64>()
        }
    };
    Ok(n * spec.c().ln() + body)
}

/// Upper bidiagonal `F` with positive diagonal and `F^T F = P^{-1}`.
///
/// SS-1: `F[i][i] = -F[i][i+1] = 1 / sqrt(delta_i)` for `i < n`, and
/// `F[n][n] = sqrt((e^{beta (t_n - t_{n-1})} - 1) / delta_{n-1})`, which
/// simplifies to `e^{beta t_n / 2}`.
///
/// Wiener: `F[i][i] = sqrt((t_{i+1} / t_i) / (t_{i+1} - t_i))`,
/// `F[i][i+1] = -(t_i / t_{i+1}) F[i][i]`, `F[n][n] = sqrt(1 / t_n)`.
pub fn precision_factor(spec: &KernelSpec, grid: &SamplingGrid) -> Result<UpperBidiagonal> {
    check_wiener_origin(spec, grid)?;
    let t = grid.times();
    let n = t.len();
    let scale = 1.0 / spec.c().sqrt();
    let mut diag = Vec::with_capacity(n);
    let mut sup = Vec::with_capacity(n - 1);
    match spec.family() {
        KernelFamily::Wiener => {
            for i in 0..n - 1 {
                let d = ((t[i + 1] / t[i]) / (t[i + 1] - t[i])).sqrt() * scale;
                diag.push(d);
                sup.push(-(t[i] / t[i + 1]) * d);
            }
            diag.push((1.0 / t[n - 1]).sqrt() * scale);
        }
        KernelFamily::Ss1 => {
            let beta = spec.beta().expect("SS-1 spec carries beta");
            let delta = checked_increments(grid, beta)?;
            for &di in &delta[..n - 1] {
                let d = scale / di.sqrt();
                diag.push(d);
                sup.push(-d);
            }
            diag.push(scale / delta[n - 1].sqrt());
        }
    }
    Ok(UpperBidiagonal { diag, sup })
}

/// Closed-form triangular square root `U = F^{-1}` with `U U^T = P`.
pub fn sqrt_factor(spec: &KernelSpec, grid: &SamplingGrid) -> Result<StructuredSqrt> {
    let factor = precision_factor(spec, grid)?;
    Ok(StructuredSqrt {
        spec: *spec,
        times: grid.times().to_vec(),
        recip_diag: factor.diag.iter().map(|d| 1.0 / d).collect(),
    })
}

/// `P^{-1} v = F^T (F v)` in `O(n)`.
pub fn apply_precision(factor: &UpperBidiagonal, v: &[f64]) -> Result<Vec<f64>> {
    check_len(factor.len(), v.len())?;
    let d = &factor.diag;
    let s = &factor.sup;
    let n = d.len();
    let mut out = vec![0.0; n];
    // Fused F v then F^T w; w_i only feeds rows i and i + 1.
    let mut prev_w = 0.0;
    for i in 0..n {
        let w = if i + 1 < n {
            d[i] * v[i] + s[i] * v[i + 1]
        } else {
            d[i] * v[i]
        };
        out[i] = d[i] * w + if i > 0 { s[i - 1] * prev_w } else { 0.0 };
        prev_w = w;
    }
    Ok(out)
}

/// Solves `P x = b`; identical to [`apply_precision`] because `P^{-1}` is
/// available in factored form.
pub fn solve_gram(factor: &UpperBidiagonal, b: &[f64]) -> Result<Vec<f64>> {
    apply_precision(factor, b)
}
