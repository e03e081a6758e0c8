//! Sampling grids: the ordered, possibly non-uniform time instants on which
//! kernels, processes and matrices are defined.

use crate::error::{Error, Result};

/// Strictly increasing, nonnegative, finite time instants `t_1 < ... < t_n`.
///
/// Grids are immutable once built. The implicit origin `t_0 = 0` of the
/// Wiener construction and the virtual point at infinity of the SS-1
/// construction are never stored here; the samplers add them internally.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingGrid {
    times: Vec<f64>,
}

impl SamplingGrid {
    /// Validates `times`.
    ///
    /// Ordering is checked with exact comparison: two equal instants are
    /// rejected no matter how close the caller considers them.
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptyGrid);
        }
        for (index, &t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "grid time t[{index}] = {t} is not finite"
                )));
            }
            if t < 0.0 {
                return Err(Error::NegativeTime { index, value: t });
            }
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonIncreasing {
                index: i + 1,
                prev: times[i],
                next: times[i + 1],
            });
        }
        Ok(Self { times })
    }

    /// `t_i = t_start + (i - 1) * delta` for `i = 1..=n`.
    pub fn uniform(n: usize, delta: f64, t_start: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("uniform grid needs n >= 1".into()));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "uniform grid spacing must be positive, got {delta}"
            )));
        }
        if !(t_start > 0.0) || !t_start.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "uniform grid start must be positive, got {t_start}"
            )));
        }
        Self::new((0..n).map(|i| t_start + i as f64 * delta).collect())
    }

    #[inline]
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// Always false; kept for API symmetry with `len`.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    #[inline]
    pub fn first(&self) -> f64 {
        self.times[0]
    }

    #[inline]
    pub fn last(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Gaps `t_{i+1} - t_i`, length `n - 1`.
    pub fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.times.windows(2).map(|w| w[1] - w[0])
    }
}

impl TryFrom<Vec<f64>> for SamplingGrid {
    type Error = Error;

    fn try_from(times: Vec<f64>) -> Result<Self> {
        Self::new(times)
    }
}
