//! Dense reference linear algebra used to validate the closed forms.
//!
//! Nothing here shares code with [`crate::structure`]: elimination,
//! factorization and products are delegated to `nalgebra`. These routines are
//! `O(n^3)` and meant for test-sized matrices (a few hundred rows at most).

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::grid::SamplingGrid;
use crate::kernels::{gram, KernelSpec};
use crate::maxent::{band_extend, band_project};
use crate::structure::{closed_form_inverse, log_det, precision_factor, sqrt_factor};

/// Pivots smaller than this are treated as exact zeros.
pub const PIVOT_FLOOR: f64 = 1e-300;

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn require_square(m: &DenseMatrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: m.rows(),
            found: m.cols(),
        })
    }
}

/// Inverse by LU with partial pivoting.
pub fn dense_inverse(m: &DenseMatrix) -> Result<DenseMatrix> {
    require_square(m)?;
    let lu = to_na(m).lu();
    let u = lu.u();
    if let Some(index) = (0..u.nrows()).find(|&i| !(u[(i, i)].abs() > PIVOT_FLOOR)) {
        return Err(Error::Singular { index });
    }
    lu.try_inverse()
        .map(|inv| from_na(&inv))
        .ok_or(Error::Singular { index: 0 })
}

/// `ln det M` from the LU pivots, summed in the log domain.
///
/// Fails with [`Error::NotPositiveDefinite`] when the determinant is negative.
pub fn dense_logdet(m: &DenseMatrix) -> Result<f64> {
    require_square(m)?;
    let lu = to_na(m).lu();
    let u = lu.u();
    let mut sign: f64 = lu.p().determinant();
    let mut acc = 0.0;
    for i in 0..u.nrows() {
        let p = u[(i, i)];
        if !(p.abs() > PIVOT_FLOOR) {
            return Err(Error::Singular { index: i });
        }
        sign *= p.signum();
        acc += p.abs().ln();
    }
    if sign < 0.0 {
        return Err(Error::NotPositiveDefinite { index: u.nrows() });
    }
    Ok(acc)
}

/// Lower Cholesky factor.
pub fn dense_chol(m: &DenseMatrix) -> Result<DenseMatrix> {
    require_square(m)?;
    let chol = to_na(m)
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { index: 0 })?;
    Ok(from_na(&chol.l()))
}

pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            found: b.rows(),
        });
    }
    Ok(from_na(&(to_na(a) * to_na(b))))
}

/// Solves `M x = b` by LU.
pub fn dense_solve(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    require_square(m)?;
    if b.len() != m.rows() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            found: b.len(),
        });
    }
    let rhs = nalgebra::DVector::from_column_slice(b);
    to_na(m)
        .lu()
        .solve(&rhs)
        .map(|x| x.iter().copied().collect())
        .ok_or(Error::Singular { index: 0 })
}

/// One closed-form-versus-oracle comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: &'static str,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckItem {
    fn new(name: &'static str, residual: f64, threshold: f64) -> Self {
        Self {
            name,
            residual,
            threshold,
            pass: residual <= threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub kernel: KernelSpec,
    pub n: usize,
    pub checks: Vec<CheckItem>,
    pub pass: bool,
}

/// Cross-checks every closed form for `(spec, grid)` against the dense
/// oracle:
///
/// * `||T P - I||_inf <= 1e-8 n` (tridiagonal inverse)
/// * `|log_det - dense_logdet| <= 1e-9 max(1, |log_det|)`
/// * `||F^T F - T||_inf <= 1e-10 ||T||_inf` (precision factor)
/// * `||U U^T - P||_inf <= 1e-12 ||P||_inf` (square root)
/// * band extension of the band projection equals `P` to `1e-12` relative
pub fn consistency_report(spec: &KernelSpec, grid: &SamplingGrid) -> Result<CheckReport> {
    let n = grid.len();
    let p = gram(spec, grid)?.values;
    let tri = closed_form_inverse(spec, grid)?;
    let tri_dense = tri.to_dense();

    let inv_residual = matmul(&tri_dense, &p)?
        .sub(&DenseMatrix::identity(n))?
        .norm_inf();

    let ld = log_det(spec, grid)?;
    let ld_residual = (ld - dense_logdet(&p)?).abs();

    let f = precision_factor(spec, grid)?.to_dense();
    let ftf = matmul(&f.transpose(), &f)?;
    let factor_residual = ftf.sub(&tri_dense)?.norm_inf();

    let u = sqrt_factor(spec, grid)?.to_dense();
    let uut = matmul(&u, &u.transpose())?;
    let sqrt_residual = uut.sub(&p)?.norm_inf();

    let mut checks = vec![
        CheckItem::new("inverse_identity", inv_residual, 1e-8 * n as f64),
        CheckItem::new("log_det", ld_residual, 1e-9 * ld.abs().max(1.0)),
        CheckItem::new("precision_factor", factor_residual, 1e-10 * tri_dense.norm_inf()),
        CheckItem::new("sqrt_factor", sqrt_residual, 1e-12 * p.norm_inf()),
    ];
    if n >= 3 {
        let ext = band_extend(&band_project(&p)?)?;
        checks.push(CheckItem::new(
            "band_extension",
            max_relative_deviation(&ext, &p),
            1e-12,
        ));
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(CheckReport {
        kernel: *spec,
        n,
        checks,
        pass,
    })
}

/// `max |a_ij - b_ij| / |b_ij|` over entries (absolute where `b_ij = 0`).
pub fn max_relative_deviation(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| {
            let d = (x - y).abs();
            if *y == 0.0 {
                d
            } else {
                d / y.abs()
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn inverse_examples() {
        let i3 = DenseMatrix::identity(3);
        assert_eq!(dense_inverse(&i3).unwrap(), i3);
        let d = DenseMatrix::from_rows(&[[2.0, 0.0], [0.0, 4.0]]).unwrap();
        let inv = dense_inverse(&d).unwrap();
        assert_eq!(inv, DenseMatrix::from_rows(&[[0.5, 0.0], [0.0, 0.25]]).unwrap());
        let s = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert_eq!(dense_inverse(&s).unwrap_err().code(), "Singular");
    }

    #[test]
    fn inverse_of_wiener_gram_is_the_closed_form() {
        let g = SamplingGrid::new(vec![1.0, 2.0, 4.0]).unwrap();
        let spec = KernelSpec::wiener(1.0).unwrap();
        let inv = dense_inverse(&gram(&spec, &g).unwrap().values).unwrap();
        let closed = closed_form_inverse(&spec, &g).unwrap().to_dense();
        assert!(inv.sub(&closed).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn logdet_and_chol_examples() {
        assert_eq!(dense_logdet(&DenseMatrix::identity(5)).unwrap(), 0.0);
        let c = dense_chol(&DenseMatrix::from_rows(&[[4.0]]).unwrap()).unwrap();
        assert_eq!(c[(0, 0)], 2.0);
        let g = SamplingGrid::new(vec![1.0, 2.0, 3.0]).unwrap();
        let p = gram(&KernelSpec::ss1(1.0, LN_2).unwrap(), &g).unwrap().values;
        assert!((dense_logdet(&p).unwrap() - (1.0f64 / 256.0).ln()).abs() < 1e-13);
        let neg = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(dense_logdet(&neg).unwrap_err().code(), "NotPositiveDefinite");
        assert_eq!(dense_chol(&neg).unwrap_err().code(), "NotPositiveDefinite");
    }

    #[test]
    fn matmul_checks_shapes() {
        let a = DenseMatrix::zeros(2, 3);
        assert_eq!(matmul(&a, &a).unwrap_err().code(), "DimensionMismatch");
        let b = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let bb = matmul(&b, &b).unwrap();
        assert_eq!(bb, DenseMatrix::from_rows(&[[7.0, 10.0], [15.0, 22.0]]).unwrap());
    }

    #[test]
    fn consistency_report_passes_on_examples() {
        let g = SamplingGrid::uniform(10, 0.5, 0.5).unwrap();
        for spec in [KernelSpec::ss1(1.0, LN_2).unwrap(), KernelSpec::wiener(2.0).unwrap()] {
            let r = consistency_report(&spec, &g).unwrap();
            assert!(r.pass, "{r:?}");
            assert_eq!(r.checks.len(), 5);
        }
    }
}
