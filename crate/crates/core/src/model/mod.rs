//! Core domain types shared by every stage of the solver.

mod grid;
mod state;
mod trig;

pub use grid::{CharGrid, GridError, Segment};
pub use state::{CharState, NonlocalFields};
pub(crate) use state::sup_abs as state_sup;
pub use trig::{trig_powers, TrigPowers};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest admissible Y-grid.
pub const MIN_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("lambda must be an integer, got {0}")]
    NonIntegerLambda(f64),
    #[error("lambda must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("domain half-width L must be positive and finite, got {0}")]
    DomainTooSmall(f64),
    #[error("grid needs at least {MIN_POINTS} points, got {0}")]
    GridTooCoarse(usize),
}

/// Unvalidated parameter values as they arrive from a config file or flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawParams {
    pub lambda: f64,
    pub domain_half_width: f64,
    pub n_points: usize,
}

/// Validated model parameters. `k = 2(λ+1)` is derived, never stored independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    lambda: u32,
    domain_half_width: f64,
    n_points: usize,
}

impl ModelParams {
    pub fn new(lambda: u32, domain_half_width: f64, n_points: usize) -> Result<Self, ModelError> {
        validate_params(RawParams {
            lambda: f64::from(lambda),
            domain_half_width,
            n_points,
        })
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    /// The exponent `k = 2(λ+1)`; always even and at least 2.
    pub fn k(&self) -> u32 {
        2 * (self.lambda + 1)
    }

    pub fn domain_half_width(&self) -> f64 {
        self.domain_half_width
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn with_n_points(&self, n_points: usize) -> Result<Self, ModelError> {
        Self::new(self.lambda, self.domain_half_width, n_points)
    }

    /// Hölder exponent `1 − 1/k` of the conservative solution.
    pub fn holder_exponent(&self) -> f64 {
        1.0 - 1.0 / f64::from(self.k())
    }

    /// `u^n` for small integer `n`, with `u^0 = 1` including `u = 0`.
    #[inline]
    pub fn upow(u: f64, n: u32) -> f64 {
        let mut p = 1.0;
        for _ in 0..n {
            p *= u;
        }
        p
    }
}

pub fn validate_params(raw: RawParams) -> Result<ModelParams, ModelError> {
    if !raw.lambda.is_finite() || raw.lambda.fract() != 0.0 {
        return Err(ModelError::NonIntegerLambda(raw.lambda));
    }
    if raw.lambda < 0.0 {
        return Err(ModelError::NegativeLambda(raw.lambda));
    }
    if !(raw.domain_half_width.is_finite() && raw.domain_half_width > 0.0) {
        return Err(ModelError::DomainTooSmall(raw.domain_half_width));
    }
    if raw.n_points < MIN_POINTS {
        return Err(ModelError::GridTooCoarse(raw.n_points));
    }
    Ok(ModelParams {
        lambda: raw.lambda as u32,
        domain_half_width: raw.domain_half_width,
        n_points: raw.n_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(lambda: f64) -> RawParams {
        RawParams {
            lambda,
            domain_half_width: 10.0,
            n_points: 64,
        }
    }

    #[test]
    fn camassa_holm_and_novikov_exponents() {
        assert_eq!(validate_params(raw(0.0)).unwrap().k(), 2);
        assert_eq!(validate_params(raw(1.0)).unwrap().k(), 4);
        assert_eq!(validate_params(raw(0.0)).unwrap().holder_exponent(), 0.5);
        assert_eq!(validate_params(raw(1.0)).unwrap().holder_exponent(), 0.75);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(validate_params(raw(-1.0)), Err(ModelError::NegativeLambda(-1.0)));
        assert_eq!(validate_params(raw(0.5)), Err(ModelError::NonIntegerLambda(0.5)));
        assert!(matches!(
            validate_params(RawParams {
                domain_half_width: 0.0,
                ..raw(1.0)
            }),
            Err(ModelError::DomainTooSmall(_))
        ));
        assert_eq!(
            validate_params(RawParams {
                n_points: 8,
                ..raw(1.0)
            }),
            Err(ModelError::GridTooCoarse(8))
        );
    }

    #[test]
    fn k_is_even_for_every_lambda() {
        for lambda in 0..12 {
            let p = ModelParams::new(lambda, 1.0, 16).unwrap();
            assert_eq!(p.k() % 2, 0);
            assert_eq!(p.k(), 2 * (lambda + 1));
        }
    }

    #[test]
    fn upow_zero_power_is_one() {
        assert_eq!(ModelParams::upow(0.0, 0), 1.0);
        assert_eq!(ModelParams::upow(-2.0, 3), -8.0);
    }
}
