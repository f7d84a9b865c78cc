//! The AI-server function: per-series forecasting with a from-scratch LSTM
//! (primary), seasonal ARIMA and seasonal-naive baselines, the tolerance-band
//! accuracy metric, and deterministic model persistence.
//!
//! All three model kinds share one discipline: they train and predict in the
//! min-max normalized domain of their training series and de-normalize (and
//! clamp at zero — the targets are physical non-negatives) on the way out.

pub mod arima;
pub mod gemm;
pub mod lstm;
pub mod naive;
pub mod scalar;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{Channel, SliceSeries};
pub use arima::{ArimaFit, ArimaOrder};
pub use lstm::LstmConfig;
pub use naive::NaiveConfig;

use lstm::{LstmParams, TensorSpec};

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Min–max range of a training series. Degenerate ranges (max == min) map
/// everything to 0 and de-normalize to the constant, which makes constant
/// series exactly predictable regardless of the model behind them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
}

impl Normalization {
    pub fn fit(values: &[f64]) -> Normalization {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if min.is_finite() && max.is_finite() {
            Normalization { min, max }
        } else {
            Normalization { min: 0.0, max: 0.0 }
        }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        if self.max > self.min {
            (x - self.min) / (self.max - self.min)
        } else {
            0.0
        }
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        if self.max > self.min {
            self.min + z * (self.max - self.min)
        } else {
            self.min
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.max >= self.min) {
            return Err(Error::Contract(format!(
                "normalization: invalid range [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lstm,
    Arima,
    SeasonalNaive,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Arima => "arima",
            ModelKind::SeasonalNaive => "seasonal_naive",
        })
    }
}

/// Kind-specific trained state.
#[derive(Clone, Debug)]
pub enum ModelState {
    Lstm { config: LstmConfig, params: LstmParams<f32> },
    Arima { fit: ArimaFit },
    SeasonalNaive { config: NaiveConfig },
}

/// A trained forecaster for one scalar series.
#[derive(Clone, Debug)]
pub struct ForecastModel {
    pub kind: ModelKind,
    /// Identifier of the series the model was trained on
    /// (`<slice>/<cell>/<channel>` for pipeline series).
    pub trained_on: String,
    pub normalization: Normalization,
    pub state: ModelState,
}

/// Train an LSTM on one channel of a slice series.
pub fn train_lstm(series: &SliceSeries, channel: Channel, config: &LstmConfig) -> Result<ForecastModel> {
    train_lstm_values(series.channel(channel), &channel_id(series, channel), config)
}

/// Value-level variant of [`train_lstm`] for tests and oracles.
pub fn train_lstm_values(values: &[f64], trained_on: &str, config: &LstmConfig) -> Result<ForecastModel> {
    let trained = lstm::train_values(values, config)?;
    Ok(ForecastModel {
        kind: ModelKind::Lstm,
        trained_on: trained_on.to_string(),
        normalization: trained.normalization,
        state: ModelState::Lstm { config: config.clone(), params: trained.params },
    })
}

/// Fit a seasonal ARIMA by CSS + AIC over the candidate orders.
pub fn fit_arima(
    series: &SliceSeries,
    channel: Channel,
    candidates: &[ArimaOrder],
) -> Result<ForecastModel> {
    fit_arima_values(series.channel(channel), &channel_id(series, channel), candidates)
}

/// Value-level variant of [`fit_arima`].
pub fn fit_arima_values(
    values: &[f64],
    trained_on: &str,
    candidates: &[ArimaOrder],
) -> Result<ForecastModel> {
    let normalization = Normalization::fit(values);
    normalization.validate().map_err(|_| {
        Error::Contract("arima: series contains non-finite values".into())
    })?;
    let normalized: Vec<f64> = values.iter().map(|v| normalization.normalize(*v)).collect();
    let fit = arima::fit_candidates(&normalized, candidates)?;
    Ok(ForecastModel {
        kind: ModelKind::Arima,
        trained_on: trained_on.to_string(),
        normalization,
        state: ModelState::Arima { fit },
    })
}

/// "Train" the seasonal-naive baseline: records the season length and the
/// normalization pair; prediction is a pure lookup.
pub fn train_seasonal_naive(
    series: &SliceSeries,
    channel: Channel,
    config: &NaiveConfig,
) -> Result<ForecastModel> {
    train_seasonal_naive_values(series.channel(channel), &channel_id(series, channel), config)
}

/// Value-level variant of [`train_seasonal_naive`].
pub fn train_seasonal_naive_values(
    values: &[f64],
    trained_on: &str,
    config: &NaiveConfig,
) -> Result<ForecastModel> {
    config.validate()?;
    if values.len() < config.period + config.horizon {
        return Err(Error::Training(format!(
            "seasonal naive: series has {} points, need at least {}",
            values.len(),
            config.period + config.horizon
        )));
    }
    let normalization = Normalization::fit(values);
    normalization.validate().map_err(|_| {
        Error::Training("seasonal naive: series contains non-finite values".into())
    })?;
    Ok(ForecastModel {
        kind: ModelKind::SeasonalNaive,
        trained_on: trained_on.to_string(),
        normalization,
        state: ModelState::SeasonalNaive { config: *config },
    })
}

fn channel_id(series: &SliceSeries, channel: Channel) -> String {
    format!("{}/{}", series.series_id(), channel)
}

impl ForecastModel {
    /// Window length [`Self::predict_next`] expects. The LSTM needs exactly
    /// this many values; ARIMA and the naive baseline accept at least this
    /// many and use the tail.
    pub fn required_window(&self) -> usize {
        match &self.state {
            ModelState::Lstm { config, .. } => config.input_window,
            ModelState::Arima { fit } => fit.order.required_window(),
            ModelState::SeasonalNaive { config } => config.period,
        }
    }

    pub fn horizon(&self) -> usize {
        match &self.state {
            ModelState::Lstm { config, .. } => config.horizon,
            ModelState::Arima { .. } => 1,
            ModelState::SeasonalNaive { config } => config.horizon,
        }
    }

    /// Forecast the next `horizon` values from the most recent observations.
    /// Predictions are de-normalized and clamped to ≥ 0.
    pub fn predict_next(&self, recent_window: &[f64]) -> Result<Vec<f64>> {
        match &self.state {
            ModelState::Lstm { config, params } => lstm::predict(
                params,
                config.activation,
                &self.normalization,
                config.input_window,
                recent_window,
            ),
            ModelState::Arima { fit } => {
                if recent_window.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Contract(
                        "arima predict: window contains non-finite values".into(),
                    ));
                }
                let normalized: Vec<f64> =
                    recent_window.iter().map(|v| self.normalization.normalize(*v)).collect();
                let preds = arima::predict(fit, &normalized, 1)?;
                Ok(preds.iter().map(|z| self.normalization.denormalize(*z).max(0.0)).collect())
            }
            ModelState::SeasonalNaive { config } => naive::predict(config, recent_window),
        }
    }
}

// ---------------------------------------------------------------------------
// Accuracy
// ---------------------------------------------------------------------------

/// Tolerance-band accuracy: the fraction of predictions within
/// `0.01 × max(reference)` of their actuals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub tolerance_abs: f64,
    pub n_points: usize,
    pub n_within: usize,
    pub accuracy_pct: f64,
}

/// Accuracy with the tolerance anchored to the `actuals` passed in (they are
/// the reference series).
pub fn accuracy(predictions: &[f64], actuals: &[f64]) -> Result<AccuracyReport> {
    let max = check_accuracy_inputs(predictions, actuals)?;
    accuracy_with_tolerance(predictions, actuals, (0.01 * max).max(0.0))
}

/// Accuracy with an explicit tolerance, for callers anchoring to a longer
/// reference series than the evaluated segment.
pub fn accuracy_with_tolerance(
    predictions: &[f64],
    actuals: &[f64],
    tolerance_abs: f64,
) -> Result<AccuracyReport> {
    check_accuracy_inputs(predictions, actuals)?;
    if !(tolerance_abs.is_finite() && tolerance_abs >= 0.0) {
        return Err(Error::Contract(format!("accuracy: invalid tolerance {tolerance_abs}")));
    }
    let n_within = predictions
        .iter()
        .zip(actuals)
        .filter(|(p, a)| (*p - *a).abs() <= tolerance_abs)
        .count();
    Ok(AccuracyReport {
        tolerance_abs,
        n_points: predictions.len(),
        n_within,
        accuracy_pct: 100.0 * n_within as f64 / predictions.len() as f64,
    })
}

fn check_accuracy_inputs(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != actuals.len() {
        return Err(Error::Contract(format!(
            "accuracy: got {} predictions vs {} actuals (need equal, non-empty)",
            predictions.len(),
            actuals.len()
        )));
    }
    if predictions.iter().chain(actuals).any(|v| !v.is_finite()) {
        return Err(Error::Contract("accuracy: non-finite values".into()));
    }
    Ok(actuals.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// On-disk model envelope: kind + config + normalization + named parameter
/// tensors. Field and tensor order are fixed, values round-trip exactly
/// (f32 weights are exact in f64; the JSON parser is lossless for f64), so
/// save → load → save is byte-identical.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    kind: ModelKind,
    trained_on: String,
    normalization: Normalization,
    config: serde_json::Value,
    parameters: Vec<TensorFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorFile {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn tensor(name: &str, shape: Vec<usize>, data: Vec<f64>) -> TensorFile {
    TensorFile { name: name.to_string(), shape, data }
}

impl ForecastModel {
    pub fn to_json(&self) -> Result<String> {
        let (config, parameters) = match &self.state {
            ModelState::Lstm { config, params } => {
                let specs = params.tensor_specs();
                let tensors = params
                    .tensors()
                    .into_iter()
                    .zip(specs)
                    .map(|(t, TensorSpec { name, shape })| TensorFile {
                        name,
                        shape,
                        data: t.iter().map(|x| *x as f64).collect(),
                    })
                    .collect();
                (serde_json::to_value(config)?, tensors)
            }
            ModelState::Arima { fit } => (
                serde_json::to_value(fit.order)?,
                vec![
                    tensor("ar", vec![fit.ar.len()], fit.ar.clone()),
                    tensor("ma", vec![fit.ma.len()], fit.ma.clone()),
                    tensor("seasonal_ar", vec![fit.seasonal_ar.len()], fit.seasonal_ar.clone()),
                    tensor("seasonal_ma", vec![fit.seasonal_ma.len()], fit.seasonal_ma.clone()),
                    tensor("mean", vec![1], vec![fit.mean]),
                    tensor("aic", vec![1], vec![fit.aic]),
                ],
            ),
            ModelState::SeasonalNaive { config } => (serde_json::to_value(config)?, Vec::new()),
        };
        let file = ModelFile {
            kind: self.kind,
            trained_on: self.trained_on.clone(),
            normalization: self.normalization,
            config,
            parameters,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<ForecastModel> {
        let file: ModelFile = serde_json::from_str(s)
            .map_err(|e| Error::Parse(format!("model file: {e}")))?;
        file.normalization.validate()?;
        for t in &file.parameters {
            if t.shape.iter().product::<usize>() != t.data.len() {
                return Err(Error::Parse(format!(
                    "model file: tensor {} shape {:?} disagrees with {} values",
                    t.name,
                    t.shape,
                    t.data.len()
                )));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse(format!("model file: tensor {} has non-finite values", t.name)));
            }
        }
        let state = match file.kind {
            ModelKind::Lstm => {
                let config: LstmConfig = serde_json::from_value(file.config)
                    .map_err(|e| Error::Parse(format!("model file: lstm config: {e}")))?;
                config.validate()?;
                let mut rng = rand::SeedableRng::seed_from_u64(0);
                let mut params = LstmParams::<f32>::init(&config, &mut rng).zeros_like();
                let specs = params.tensor_specs();
                if file.parameters.len() != specs.len() {
                    return Err(Error::Parse(format!(
                        "model file: {} tensors, lstm config implies {}",
                        file.parameters.len(),
                        specs.len()
                    )));
                }
                for ((spec, dst), src) in
                    specs.iter().zip(params.tensors_mut()).zip(&file.parameters)
                {
                    if spec.name != src.name || spec.shape != src.shape {
                        return Err(Error::Parse(format!(
                            "model file: tensor {} {:?} does not match expected {} {:?}",
                            src.name, src.shape, spec.name, spec.shape
                        )));
                    }
                    for (d, s) in dst.iter_mut().zip(&src.data) {
                        *d = *s as f32;
                    }
                }
                ModelState::Lstm { config, params }
            }
            ModelKind::Arima => {
                let order: ArimaOrder = serde_json::from_value(file.config)
                    .map_err(|e| Error::Parse(format!("model file: arima order: {e}")))?;
                order.validate()?;
                let get = |name: &str, want: usize| -> Result<Vec<f64>> {
                    let t = file
                        .parameters
                        .iter()
                        .find(|t| t.name == name)
                        .ok_or_else(|| Error::Parse(format!("model file: missing tensor {name}")))?;
                    if t.data.len() != want {
                        return Err(Error::Parse(format!(
                            "model file: tensor {name} has {} values, order implies {want}",
                            t.data.len()
                        )));
                    }
                    Ok(t.data.clone())
                };
                let fit = ArimaFit {
                    order,
                    ar: get("ar", order.p)?,
                    ma: get("ma", order.q)?,
                    seasonal_ar: get("seasonal_ar", order.seasonal_p)?,
                    seasonal_ma: get("seasonal_ma", order.seasonal_q)?,
                    mean: get("mean", 1)?[0],
                    aic: get("aic", 1)?[0],
                };
                ModelState::Arima { fit }
            }
            ModelKind::SeasonalNaive => {
                let config: NaiveConfig = serde_json::from_value(file.config)
                    .map_err(|e| Error::Parse(format!("model file: naive config: {e}")))?;
                config.validate()?;
                ModelState::SeasonalNaive { config }
            }
        };
        Ok(ForecastModel {
            kind: file.kind,
            trained_on: file.trained_on,
            normalization: file.normalization,
            state,
        })
    }

    /// Atomic write (temp file + rename) so readers never observe a partial
    /// model.
    pub fn save_to(&self, path: &Path) -> Result<()> {
        crate::util::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load_from(path: &Path) -> Result<ForecastModel> {
        let s = std::fs::read_to_string(path)?;
        ForecastModel::from_json(&s)
    }
}
