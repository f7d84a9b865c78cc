//! Seasonal-naive baseline: the forecast for hour `t + h` is the observed
//! value at `t + h − period`. Free to "train", exact on any series that is
//! exactly period-periodic — which is what makes it the reference oracle for
//! the accuracy metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NaiveConfig {
    /// Season length in hours.
    pub period: usize,
    pub horizon: usize,
}

impl Default for NaiveConfig {
    fn default() -> Self {
        NaiveConfig { period: 24, horizon: 1 }
    }
}

impl NaiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.period < 1 {
            return Err(Error::Config("seasonal naive: period must be >= 1".into()));
        }
        if self.horizon < 1 || self.horizon > self.period {
            return Err(Error::Config(
                "seasonal naive: horizon must lie in [1, period] (longer horizons would need \
                 values newer than the window provides)"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Predict `horizon` values past the end of `window`: position `t + h` maps
/// to `window[len − period + h − 1]`.
pub fn predict(config: &NaiveConfig, window: &[f64]) -> Result<Vec<f64>> {
    config.validate().map_err(|e| Error::Contract(e.to_string()))?;
    if window.len() < config.period {
        return Err(Error::Contract(format!(
            "seasonal naive: window has {} values, need at least the period ({})",
            window.len(),
            config.period
        )));
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("seasonal naive: window contains non-finite values".into()));
    }
    Ok((1..=config.horizon)
        .map(|h| window[window.len() - config.period + h - 1].max(0.0))
        .collect())
}
