//! L1 discretisation of the left and right Caputo derivatives on a uniform grid.
//!
//! For `0 < alpha < 1` and step `dt` the left operator at node `k` is
//!
//! ```text
//! D_k[phi] = b0 * sum_{j=1..k} (phi_j - phi_{j-1}) * w[k - j],
//! b0       = -dt^(-alpha) / Gamma(2 - alpha),
//! w[m]     = m^(1-alpha) - (m+1)^(1-alpha).
//! ```
//!
//! The right operator is the time reflection of the left one: applying it to
//! `lambda` at node `k` gives the same number as the left operator applied to
//! the reversed samples at node `n - k`. Written out, with `c0 = -b0`,
//!
//! ```text
//! R_k[lambda] = c0 * sum_{i=k+1..n} (lambda_i - lambda_{i-1}) * w[i - k - 1].
//! ```
//!
//! Both operators put the same positive coefficient `c0` on the unknown sample,
//! which is what the implicit state and adjoint steps need.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StencilError {
    #[error("fractional order must lie in (0,1), got {0}")]
    OrderOutOfRange(f64),
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("stencil needs at least one step")]
    NoSteps,
    #[error("left Caputo operator needs history: step index must be >= 1")]
    NoHistory,
    #[error("right Caputo operator is undefined at the terminal node {0}")]
    TerminalNode(usize),
    #[error("step index {index} outside stencil/sample range {len}")]
    OutOfRange { index: usize, len: usize },
}

/// Cached L1 weights for one `(alpha, dt, n)` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Stencil<T> {
    alpha: T,
    dt: T,
    b0: T,
    weights: Vec<T>,
}

impl<T: Real> L1Stencil<T> {
    /// Builds the stencil for up to `n` steps (`n + 1` cached weights).
    pub fn new(alpha: T, dt: T, n: usize) -> Result<Self, StencilError> {
        if !(alpha > T::zero() && alpha < T::one()) {
            return Err(StencilError::OrderOutOfRange(alpha.as_f64()));
        }
        if !(dt > T::zero()) {
            return Err(StencilError::NonPositiveStep(dt.as_f64()));
        }
        if n == 0 {
            return Err(StencilError::NoSteps);
        }
        let one = T::one();
        let beta = one - alpha;
        let weights = (0..=n)
            .map(|m| {
                let m = T::from_usize(m).unwrap();
                m.powf(beta) - (m + one).powf(beta)
            })
            .collect();
        let b0 = -dt.powf(-alpha) / (one + beta).gamma_fn();
        Ok(Self {
            alpha,
            dt,
            b0,
            weights,
        })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Leading coefficient `-dt^(-alpha) / Gamma(2 - alpha)`.
    pub fn b0(&self) -> T {
        self.b0
    }

    /// Coefficient on the unknown sample in either operator, `-b0 > 0`.
    pub fn diag(&self) -> T {
        -self.b0
    }

    /// Maximum number of steps this stencil covers.
    pub fn max_steps(&self) -> usize {
        self.weights.len() - 1
    }

    /// Weight at lag `m = k - j`.
    pub fn weight(&self, lag: usize) -> T {
        self.weights[lag]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    fn check_len(&self, k: usize, len: usize) -> Result<(), StencilError> {
        if k > self.max_steps() || k >= len {
            return Err(StencilError::OutOfRange {
                index: k,
                len: len.min(self.weights.len()),
            });
        }
        Ok(())
    }

    /// Left operator at node `k >= 1` over `samples[0..=k]`.
    pub fn caputo_left(&self, samples: &[T], k: usize) -> Result<T, StencilError> {
        let (diag, history) = self.caputo_left_split(samples, k)?;
        Ok(diag * samples[k] + history)
    }

    /// Splits the left operator at node `k` into the coefficient on `samples[k]`
    /// and the part that only depends on `samples[0..k]`.
    pub fn caputo_left_split(&self, samples: &[T], k: usize) -> Result<(T, T), StencilError> {
        if k == 0 {
            return Err(StencilError::NoHistory);
        }
        self.check_len(k, samples.len())?;
        Ok((self.diag(), self.left_history(&samples[..k])))
    }

    /// History part of the left operator at node `past.len()`, given the
    /// already known samples `past = phi_0 .. phi_{k-1}`.
    ///
    /// Panics if `past` is empty or longer than the stencil.
    pub fn left_history(&self, past: &[T]) -> T {
        let k = past.len();
        assert!(k >= 1 && k <= self.max_steps(), "history length {k} out of range");
        // j = k term contributes -phi_{k-1} * w[0] = +phi_{k-1}
        let mut acc = past[k - 1];
        for j in 1..k {
            acc = acc + (past[j] - past[j - 1]) * self.weights[k - j];
        }
        self.b0 * acc
    }

    /// Right operator at node `k < n` over `samples[0..=n]`.
    pub fn caputo_right(&self, samples: &[T], k: usize) -> Result<T, StencilError> {
        let (diag, history) = self.caputo_right_split(samples, k)?;
        Ok(diag * samples[k] + history)
    }

    /// Splits the right operator at node `k` into the coefficient on the
    /// unknown `samples[k]` and the part that only depends on
    /// `samples[k+1..=n]`, where `n = samples.len() - 1`.
    pub fn caputo_right_split(&self, samples: &[T], k: usize) -> Result<(T, T), StencilError> {
        let n = samples.len().saturating_sub(1);
        if k >= n {
            return Err(StencilError::TerminalNode(k));
        }
        if n > self.max_steps() {
            return Err(StencilError::OutOfRange {
                index: n,
                len: self.weights.len(),
            });
        }
        Ok((self.diag(), self.right_history(&samples[k + 1..])))
    }

    /// History part of the right operator given the future samples
    /// `future = lambda_{k+1} .. lambda_n`.
    ///
    /// Panics if `future` is empty or longer than the stencil.
    pub fn right_history(&self, future: &[T]) -> T {
        let len = future.len();
        assert!(len >= 1 && len <= self.max_steps(), "future length {len} out of range");
        // i = k+1 term contributes -lambda_{k+1}; the rest are full differences.
        let mut acc = -future[0];
        for m in 1..len {
            acc = acc + (future[m] - future[m - 1]) * self.weights[m];
        }
        self.diag() * acc
    }
}
