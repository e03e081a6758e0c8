//! Structured kernel algebra for the discrete-time Wiener and first-order
//! stable spline (SS-1) covariance kernels on arbitrary sampling grids.
//!
//! Both kernels have tridiagonal precision matrices with closed-form entries,
//! bidiagonal precision factors and an `O(n)` description of the triangular
//! square root. The crate exposes those closed forms ([`structure`]), the
//! band-extension view of the same matrices ([`maxent`]), white-noise path
//! samplers ([`process`]) and a kernel-regularized FIR estimator built on the
//! structured algebra ([`estimator`]). Dense reference routines used to
//! validate every closed form live in `oracle`, which backs the test
//! suites and the command-line `check` and is not part of the stable API.
//!
//! ```
//! use stablekern::{KernelSpec, SamplingGrid, structure};
//!
//! let grid = SamplingGrid::new(vec![1.0, 2.0, 4.0]).unwrap();
//! let spec = KernelSpec::wiener(1.0).unwrap();
//! let ld = structure::log_det(&spec, &grid).unwrap();
//! assert!((ld - 2f64.ln()).abs() < 1e-15);
//! ```

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dense;
pub mod error;
pub mod estimator;
pub mod formats;
pub mod grid;
pub mod kernels;
pub mod maxent;
#[doc(hidden)]
pub mod oracle;
pub mod process;
pub mod structure;

pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use grid::SamplingGrid;
pub use kernels::{KernelFamily, KernelMatrix, KernelSpec};
pub use structure::{StructuredSqrt, TridiagonalMatrix, UpperBidiagonal};
