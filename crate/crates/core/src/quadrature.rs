//! Composite Simpson and trapezoid rules on uniform grids.

use crate::error::{Error, Result};

/// Composite Simpson weights for `intervals` uniform steps of width `step`.
///
/// `intervals` must be even and at least 2.
pub fn simpson_weights(intervals: usize, step: f64) -> Result<Vec<f64>> {
    if intervals < 2 {
        return Err(Error::GridTooSmall(intervals + 1));
    }
    if !intervals.is_multiple_of(2) {
        return Err(Error::OddIntervals(intervals));
    }
    let third = step / 3.0;
    Ok((0..=intervals)
        .map(|i| {
            if i == 0 || i == intervals {
                third
            } else if i % 2 == 1 {
                4.0 * third
            } else {
                2.0 * third
            }
        })
        .collect())
}

pub fn trapezoid_weights(intervals: usize, step: f64) -> Vec<f64> {
    (0..=intervals)
        .map(|i| if i == 0 || i == intervals { 0.5 * step } else { step })
        .collect()
}

/// Integrates uniformly spaced samples with the composite Simpson rule.
pub fn simpson(samples: &[f64], step: f64) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::GridTooSmall(samples.len()));
    }
    let weights = simpson_weights(samples.len() - 1, step)?;
    Ok(samples.iter().zip(&weights).map(|(y, w)| y * w).sum())
}
