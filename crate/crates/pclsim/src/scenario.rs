//! Experiment harness behind the `pclsim` CLI: scenario configuration, the
//! `generate` / `train` / `run` / `compare` commands, and their file
//! artifacts (dataset CSV, persisted models, accuracy tables, run reports,
//! plot data, SVG).
//!
//! Every command is reproducible from config + seed alone: file contents are
//! byte-identical across executions, and each output directory carries a
//! `manifest.json` recording the digest of the effective configuration.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forecast::{
    accuracy, fit_arima_values, train_lstm_values, train_seasonal_naive_values, ArimaOrder,
    ForecastModel, LstmConfig, ModelKind, NaiveConfig,
};
use crate::nodesim::{
    default_static_limits, estimate_prb_coefficients, run_dynamic, run_static, RunMode, RunReport,
    RunSetup,
};
use crate::pipeline::{tag_and_aggregate, Channel, SliceMapping, SliceSeries};
use crate::rapp::{CloudRatios, LoopConfig, Priority, SeriesForecaster};
use crate::traffic::{generate_synthetic_dataset, load_dataset, write_csv, GeneratorConfig};
use crate::types::Dataset;
use crate::util::write_atomic;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Where the KPI dataset comes from. Exactly one source must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    /// Synthetic generation; the scenario seed supersedes `generator.seed`
    /// so one `--seed` varies the whole experiment coherently.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    /// A CSV file in the dataset interchange format.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
}

fn default_train_fraction() -> f64 {
    0.8
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_seed() -> u64 {
    42
}

fn default_forecaster() -> ModelKind {
    ModelKind::Lstm
}

fn default_channels() -> Vec<Channel> {
    vec![Channel::ActiveUes]
}

fn default_cell_cap_pct() -> f64 {
    100.0
}

fn default_plmn_id() -> String {
    crate::rapp::DEFAULT_PLMN_ID.to_string()
}

fn default_vm_per_ue_block() -> u32 {
    10
}

/// One experiment, fully described: dataset source, slice mapping,
/// forecaster choice and per-kind settings, loop parameters, split, output
/// directory, and the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dataset: DatasetSource,
    #[serde(default = "SliceMapping::default_ab")]
    pub mapping: SliceMapping,
    /// Which model drives the dynamic loop (the other kinds are still
    /// trained for the comparison table).
    #[serde(default = "default_forecaster")]
    pub forecaster: ModelKind,
    #[serde(default)]
    pub lstm: LstmConfig,
    #[serde(default = "crate::forecast::arima::default_grid")]
    pub arima_orders: Vec<ArimaOrder>,
    #[serde(default)]
    pub naive: NaiveConfig,
    /// KPI channels to train and tabulate. The loop always forecasts
    /// `active_ues`; extra channels enlarge the accuracy table only.
    #[serde(default = "default_channels")]
    pub channels: Vec<Channel>,
    /// SLA headroom on top of the forecast.
    #[serde(default)]
    pub margin: f64,
    /// Explicit static limits per series id (`<slice>/<cell>`); series not
    /// listed use the documented default, the train-period mean rounded up.
    #[serde(default)]
    pub static_limits: BTreeMap<String, u32>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    // Loop parameters beyond the margin.
    #[serde(default = "default_cell_cap_pct")]
    pub cell_cap_pct: f64,
    #[serde(default = "default_plmn_id")]
    pub plmn_id: String,
    #[serde(default = "default_vm_per_ue_block")]
    pub vm_per_ue_block: u32,
    #[serde(default)]
    pub cloud: CloudRatios,
    #[serde(default)]
    pub slice_priority: BTreeMap<String, Priority>,
}

impl ScenarioConfig {
    /// A ready-to-run scenario over the default synthetic generator.
    pub fn default_scenario(seed: u64, out_dir: PathBuf) -> ScenarioConfig {
        ScenarioConfig {
            dataset: DatasetSource {
                generator: Some(GeneratorConfig::default_scenario(seed)),
                csv_path: None,
            },
            mapping: SliceMapping::default_ab(),
            forecaster: default_forecaster(),
            lstm: LstmConfig::default(),
            arima_orders: crate::forecast::arima::default_grid(),
            naive: NaiveConfig::default(),
            channels: default_channels(),
            margin: 0.0,
            static_limits: BTreeMap::new(),
            train_fraction: default_train_fraction(),
            out_dir,
            seed,
            cell_cap_pct: default_cell_cap_pct(),
            plmn_id: default_plmn_id(),
            vm_per_ue_block: default_vm_per_ue_block(),
            cloud: CloudRatios::default(),
            slice_priority: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset.generator, &self.dataset.csv_path) {
            (Some(_), None) | (None, Some(_)) => {}
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "dataset: both `generator` and `csv_path` given; choose exactly one".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "dataset: neither `generator` nor `csv_path` given; choose exactly one".into(),
                ))
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        if self.channels.is_empty() {
            return Err(Error::Config("channels must not be empty".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.channels {
            if !seen.insert(*c) {
                return Err(Error::Config(format!("channels: duplicate entry {c}")));
            }
        }
        if !self.channels.contains(&Channel::ActiveUes) {
            return Err(Error::Config(
                "channels must include active_ues (it drives the closed loop)".into(),
            ));
        }
        if self.arima_orders.is_empty() {
            return Err(Error::Config("arima_orders must not be empty".into()));
        }
        for order in &self.arima_orders {
            order.validate()?;
        }
        self.mapping.validate()?;
        self.loop_config().validate()?;
        Ok(())
    }

    /// The effective seed also overrides the generator and LSTM seeds.
    pub fn with_seed(mut self, seed: u64) -> ScenarioConfig {
        self.seed = seed;
        self
    }

    pub fn with_out_dir(mut self, out_dir: PathBuf) -> ScenarioConfig {
        self.out_dir = out_dir;
        self
    }

    fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            margin: self.margin,
            cell_cap_pct: self.cell_cap_pct,
            plmn_id: self.plmn_id.clone(),
            vm_per_ue_block: self.vm_per_ue_block,
            cloud: self.cloud,
            slice_priority: self.slice_priority.clone(),
        }
    }

    fn lstm_config(&self) -> LstmConfig {
        LstmConfig { seed: self.seed, ..self.lstm.clone() }
    }

    /// SHA-256 of the effective configuration's canonical JSON.
    pub fn digest(&self) -> Result<String> {
        let canonical = serde_json::to_string(self)?;
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        Ok(format!("{:x}", hasher.finalize()))
    }
}

/// Parses and validates a scenario config document, reporting the precise
/// JSON path of any schema violation.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ScenarioConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::Config(format!("config at `{}`: {}", e.path(), e.inner())))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

/// A scenario with its dataset materialized and pre-aggregated.
pub struct ResolvedScenario {
    pub config: ScenarioConfig,
    pub dataset: Dataset,
    pub series: Vec<SliceSeries>,
    /// Hours in the training period (`floor(hours × train_fraction)`).
    pub train_len: usize,
}

/// Materializes the dataset (regenerating synthetic data in memory, or
/// loading the configured CSV) and aggregates the slice series.
pub fn resolve(config: &ScenarioConfig) -> Result<ResolvedScenario> {
    config.validate()?;
    let dataset = match (&config.dataset.generator, &config.dataset.csv_path) {
        (Some(generator), None) => {
            let effective = GeneratorConfig { seed: config.seed, ..generator.clone() };
            generate_synthetic_dataset(&effective)?
        }
        (None, Some(path)) => {
            let file = fs::File::open(path).map_err(|e| {
                Error::Config(format!(
                    "dataset CSV {}: {e} (for generator-based configs, `generate` writes it)",
                    path.display()
                ))
            })?;
            load_dataset(BufReader::new(file))?
        }
        _ => unreachable!("validate() enforces exactly one source"),
    };
    let series = tag_and_aggregate(&dataset, &config.mapping)?;
    let train_len = (dataset.hours as f64 * config.train_fraction).floor() as usize;
    if train_len == 0 || train_len >= dataset.hours as usize {
        return Err(Error::Config(format!(
            "train_fraction {} leaves no {} hours in a {}-hour dataset",
            config.train_fraction,
            if train_len == 0 { "train" } else { "test" },
            dataset.hours
        )));
    }
    for key in config.static_limits.keys() {
        if !series.iter().any(|s| s.series_id() == *key) {
            return Err(Error::Config(format!(
                "static_limits: unknown series id `{key}` (expected `<slice>/<cell>`)"
            )));
        }
    }
    Ok(ResolvedScenario { config: config.clone(), dataset, series, train_len })
}

impl ResolvedScenario {
    fn setup(&self) -> RunSetup<'_> {
        RunSetup { dataset: &self.dataset, mapping: &self.config.mapping, train_len: self.train_len }
    }

    /// Static limits: explicit config entries override the per-series
    /// default (train-period mean, rounded up).
    fn static_limits(&self) -> Result<BTreeMap<String, u32>> {
        let mut limits = default_static_limits(&self.series, self.train_len)?;
        for (key, value) in &self.config.static_limits {
            limits.insert(key.clone(), *value);
        }
        Ok(limits)
    }
}

// ---------------------------------------------------------------------------
// Model store
// ---------------------------------------------------------------------------

/// The three models trained on one (series, channel).
pub struct ModelTriple {
    pub lstm: ForecastModel,
    pub arima: ForecastModel,
    pub naive: ForecastModel,
}

impl ModelTriple {
    pub fn get(&self, kind: ModelKind) -> &ForecastModel {
        match kind {
            ModelKind::Lstm => &self.lstm,
            ModelKind::Arima => &self.arima,
            ModelKind::SeasonalNaive => &self.naive,
        }
    }
}

/// All trained models of a scenario, keyed by (series id, channel).
pub struct TrainedModels {
    pub by_key: BTreeMap<(String, Channel), ModelTriple>,
}

const MODEL_KINDS: [ModelKind; 3] = [ModelKind::Lstm, ModelKind::Arima, ModelKind::SeasonalNaive];

fn kind_tag(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Lstm => "lstm",
        ModelKind::Arima => "arima",
        ModelKind::SeasonalNaive => "naive",
    }
}

/// Filesystem-safe model filename for one (series, channel, kind).
fn model_filename(series_id: &str, channel: Channel, kind: ModelKind) -> String {
    let safe: String = series_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.{channel}.{}.json", kind_tag(kind))
}

fn models_dir(out_dir: &Path) -> PathBuf {
    out_dir.join("models")
}

fn model_path(out_dir: &Path, series_id: &str, channel: Channel, kind: ModelKind) -> PathBuf {
    models_dir(out_dir).join(model_filename(series_id, channel, kind))
}

/// Trains all three kinds for every (series, channel), in parallel across
/// jobs, and persists them under `<out>/models/`.
fn train_all(resolved: &ResolvedScenario) -> Result<TrainedModels> {
    let config = &resolved.config;
    let lstm_config = config.lstm_config();
    let jobs: Vec<(&SliceSeries, Channel)> = resolved
        .series
        .iter()
        .flat_map(|s| config.channels.iter().map(move |c| (s, *c)))
        .collect();
    let trained: Vec<((String, Channel), ModelTriple)> = jobs
        .into_par_iter()
        .map(|(series, channel)| {
            let sid = series.series_id();
            let trained_on = format!("{sid}/{channel}");
            let train = &series.channel(channel)[..resolved.train_len];
            let triple = ModelTriple {
                lstm: train_lstm_values(train, &trained_on, &lstm_config)?,
                arima: fit_arima_values(train, &trained_on, &config.arima_orders)?,
                naive: train_seasonal_naive_values(train, &trained_on, &config.naive)?,
            };
            Ok(((sid, channel), triple))
        })
        .collect::<Result<_>>()?;
    let by_key: BTreeMap<(String, Channel), ModelTriple> = trained.into_iter().collect();
    for ((sid, channel), triple) in &by_key {
        for kind in MODEL_KINDS {
            triple.get(kind).save_to(&model_path(&config.out_dir, sid, *channel, kind))?;
        }
    }
    Ok(TrainedModels { by_key })
}

/// Loads the full model set from `<out>/models/`. A missing file yields a
/// `Config` error telling the operator to run `train` first; a model trained
/// on a different series (stale directory) is likewise rejected.
fn load_all(resolved: &ResolvedScenario) -> Result<TrainedModels> {
    let config = &resolved.config;
    let mut by_key = BTreeMap::new();
    for series in &resolved.series {
        let sid = series.series_id();
        for channel in &config.channels {
            let mut loaded = Vec::with_capacity(3);
            for kind in MODEL_KINDS {
                let path = model_path(&config.out_dir, &sid, *channel, kind);
                if !path.exists() {
                    return Err(Error::Config(format!(
                        "model file {} not found; run `pclsim train` with this config first",
                        path.display()
                    )));
                }
                let model = ForecastModel::load_from(&path)?;
                let expected = format!("{sid}/{channel}");
                if model.trained_on != expected {
                    return Err(Error::Config(format!(
                        "model {} was trained on `{}`, expected `{expected}`; \
                         re-run `pclsim train` with this config",
                        path.display(),
                        model.trained_on
                    )));
                }
                loaded.push(model);
            }
            let naive = loaded.pop().expect("three kinds");
            let arima = loaded.pop().expect("three kinds");
            let lstm = loaded.pop().expect("three kinds");
            by_key.insert((sid.clone(), *channel), ModelTriple { lstm, arima, naive });
        }
    }
    Ok(TrainedModels { by_key })
}

/// True when every model file for this scenario exists and the manifest
/// digest matches the effective config.
fn models_current(resolved: &ResolvedScenario) -> Result<bool> {
    let config = &resolved.config;
    match read_manifest(&config.out_dir)? {
        Some(manifest) if manifest.config_digest == config.digest()? => {}
        _ => return Ok(false),
    }
    for series in &resolved.series {
        for channel in &config.channels {
            for kind in MODEL_KINDS {
                if !model_path(&config.out_dir, &series.series_id(), *channel, kind).exists() {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// The per-series forecasters driving the dynamic loop: the configured model
/// kind on the active-UEs channel, plus the train-period PRB coefficient.
fn loop_forecasters(
    resolved: &ResolvedScenario,
    models: &TrainedModels,
) -> Result<BTreeMap<String, SeriesForecaster>> {
    let mut out = BTreeMap::new();
    for series in &resolved.series {
        let sid = series.series_id();
        let triple = models.by_key.get(&(sid.clone(), Channel::ActiveUes)).ok_or_else(|| {
            Error::Config(format!("no active_ues models for series {sid}; run `pclsim train`"))
        })?;
        let prb_per_ue_pct = crate::rapp::estimate_prb_per_ue(series, resolved.train_len)?;
        out.insert(
            sid,
            SeriesForecaster {
                model: triple.get(resolved.config.forecaster).clone(),
                prb_per_ue_pct,
            },
        );
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Accuracy table
// ---------------------------------------------------------------------------

/// Tolerance-band accuracy of the three models on one (series, channel),
/// evaluated by rolling one-step forecasts over the test hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub series_id: String,
    pub channel: Channel,
    pub tolerance_abs: f64,
    pub n_points: usize,
    pub lstm_pct: f64,
    pub arima_pct: f64,
    pub naive_pct: f64,
}

impl AccuracyRow {
    pub fn pct(&self, kind: ModelKind) -> f64 {
        match kind {
            ModelKind::Lstm => self.lstm_pct,
            ModelKind::Arima => self.arima_pct,
            ModelKind::SeasonalNaive => self.naive_pct,
        }
    }
}

/// The LSTM vs ARIMA vs seasonal-naive comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub rows: Vec<AccuracyRow>,
}

impl AccuracyTable {
    /// Mean accuracy of one model kind over all rows of a channel.
    pub fn mean_pct(&self, kind: ModelKind, channel: Channel) -> Option<f64> {
        let values: Vec<f64> =
            self.rows.iter().filter(|r| r.channel == channel).map(|r| r.pct(kind)).collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("series,channel,tolerance_abs,n_points,lstm_pct,arima_pct,naive_pct\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.series_id, r.channel, r.tolerance_abs, r.n_points, r.lstm_pct, r.arima_pct,
                r.naive_pct
            ));
        }
        out
    }

    /// Human-readable table, one row per (series, channel) plus per-channel
    /// means.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<22} {:<14} {:>10} {:>8} {:>8} {:>8}\n",
            "series", "channel", "tolerance", "lstm", "arima", "naive"
        ));
        let mut channels: Vec<Channel> = Vec::new();
        for r in &self.rows {
            if !channels.contains(&r.channel) {
                channels.push(r.channel);
            }
            out.push_str(&format!(
                "{:<22} {:<14} {:>10.3} {:>7.1}% {:>7.1}% {:>7.1}%\n",
                r.series_id, r.channel.to_string(), r.tolerance_abs, r.lstm_pct, r.arima_pct,
                r.naive_pct
            ));
        }
        for channel in channels {
            out.push_str(&format!(
                "{:<22} {:<14} {:>10} {:>7.1}% {:>7.1}% {:>7.1}%\n",
                "mean",
                channel.to_string(),
                "",
                self.mean_pct(ModelKind::Lstm, channel).unwrap_or(f64::NAN),
                self.mean_pct(ModelKind::Arima, channel).unwrap_or(f64::NAN),
                self.mean_pct(ModelKind::SeasonalNaive, channel).unwrap_or(f64::NAN),
            ));
        }
        out
    }
}

/// Evaluates all models by rolling one-step forecasts over the test hours,
/// each prediction fed the true history tail its model requires.
fn evaluate_models(resolved: &ResolvedScenario, models: &TrainedModels) -> Result<AccuracyTable> {
    let mut rows = Vec::new();
    for series in &resolved.series {
        let sid = series.series_id();
        for channel in &resolved.config.channels {
            let triple = &models.by_key[&(sid.clone(), *channel)];
            let values = series.channel(*channel);
            let (_, test) = values.split_at(resolved.train_len);
            let mut pcts = BTreeMap::new();
            let mut tolerance = 0.0;
            for kind in MODEL_KINDS {
                let model = triple.get(kind);
                let window = model.required_window();
                if window > resolved.train_len {
                    return Err(Error::Config(format!(
                        "model {} needs a {window}-hour window but the train period is only \
                         {} hours",
                        model.trained_on, resolved.train_len
                    )));
                }
                let mut predictions = Vec::with_capacity(test.len());
                for t in 0..test.len() {
                    let end = resolved.train_len + t;
                    predictions.push(model.predict_next(&values[end - window..end])?[0]);
                }
                let report = accuracy(&predictions, test)?;
                tolerance = report.tolerance_abs;
                pcts.insert(kind_tag(kind), report.accuracy_pct);
            }
            rows.push(AccuracyRow {
                series_id: sid.clone(),
                channel: *channel,
                tolerance_abs: tolerance,
                n_points: test.len(),
                lstm_pct: pcts["lstm"],
                arima_pct: pcts["arima"],
                naive_pct: pcts["naive"],
            });
        }
    }
    Ok(AccuracyTable { rows })
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

/// Reproducibility record written to every output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_digest: String,
    pub seed: u64,
    /// Wire schema identifiers this version speaks.
    pub schemas: Vec<String>,
}

fn manifest_for(config: &ScenarioConfig) -> Result<Manifest> {
    Ok(Manifest {
        tool: "pclsim".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_digest: config.digest()?,
        seed: config.seed,
        schemas: vec![
            "a1-policy-v1".into(),
            "e2-control-v1".into(),
            "o2-scale-v1".into(),
            "o1-ves-v1".into(),
        ],
    })
}

fn write_manifest(config: &ScenarioConfig) -> Result<PathBuf> {
    let path = config.out_dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest_for(config)?)?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

fn read_manifest(out_dir: &Path) -> Result<Option<Manifest>> {
    let path = out_dir.join("manifest.json");
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path)?;
    Ok(serde_json::from_str(&text).ok())
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct GenerateOutcome {
    pub dataset_path: PathBuf,
    pub hours: u32,
    pub cells: usize,
    pub samples: usize,
}

/// `generate`: materialize the synthetic dataset as CSV.
pub fn cmd_generate(config: &ScenarioConfig) -> Result<GenerateOutcome> {
    config.validate()?;
    if config.dataset.generator.is_none() {
        return Err(Error::Config(
            "dataset source is a CSV path; there is nothing to generate".into(),
        ));
    }
    let resolved = resolve(config)?;
    let mut bytes = Vec::new();
    write_csv(&resolved.dataset, &mut bytes)?;
    let dataset_path = config.out_dir.join("dataset.csv");
    write_atomic(&dataset_path, &bytes)?;
    write_manifest(config)?;
    Ok(GenerateOutcome {
        dataset_path,
        hours: resolved.dataset.hours,
        cells: resolved.dataset.cells.len(),
        samples: resolved.dataset.samples.len(),
    })
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub table: AccuracyTable,
    pub models_dir: PathBuf,
    pub model_files: usize,
    pub accuracy_csv: PathBuf,
}

/// `train`: fit LSTM, ARIMA, and seasonal-naive models for every
/// (series, channel), persist them, and tabulate test accuracy.
pub fn cmd_train(config: &ScenarioConfig) -> Result<TrainOutcome> {
    let resolved = resolve(config)?;
    let models = train_all(&resolved)?;
    let table = evaluate_models(&resolved, &models)?;
    let accuracy_csv = config.out_dir.join("accuracy.csv");
    write_atomic(&accuracy_csv, table.to_csv().as_bytes())?;
    write_manifest(config)?;
    Ok(TrainOutcome {
        table,
        models_dir: models_dir(&config.out_dir),
        model_files: models.by_key.len() * MODEL_KINDS.len(),
        accuracy_csv,
    })
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub report_csv: PathBuf,
    pub totals_json: PathBuf,
}

/// `run --mode static|dynamic`: replay the test period in one mode.
/// The dynamic mode requires previously trained models.
pub fn cmd_run(config: &ScenarioConfig, mode: RunMode) -> Result<RunOutcome> {
    let resolved = resolve(config)?;
    let report = match mode {
        RunMode::Static => run_static_mode(&resolved)?,
        RunMode::Dynamic => {
            if !models_current(&resolved)? {
                return Err(Error::Config(format!(
                    "models under {} are missing or were trained with a different config/seed; \
                     run `pclsim train` with this config first",
                    models_dir(&config.out_dir).display()
                )));
            }
            let models = load_all(&resolved)?;
            run_dynamic_mode(&resolved, &models)?
        }
    };
    let outcome = write_run_artifacts(config, &report)?;
    write_manifest(config)?;
    Ok(outcome)
}

fn run_static_mode(resolved: &ResolvedScenario) -> Result<RunReport> {
    let limits = resolved.static_limits()?;
    let coefficients = estimate_prb_coefficients(&resolved.series, resolved.train_len)?;
    run_static(&resolved.setup(), &limits, &coefficients, &resolved.config.loop_config())
}

fn run_dynamic_mode(resolved: &ResolvedScenario, models: &TrainedModels) -> Result<RunReport> {
    let forecasters = loop_forecasters(resolved, models)?;
    let limits = resolved.static_limits()?;
    run_dynamic(&resolved.setup(), &forecasters, &limits, &resolved.config.loop_config())
}

fn write_run_artifacts(config: &ScenarioConfig, report: &RunReport) -> Result<RunOutcome> {
    let report_csv = config.out_dir.join(format!("run-{}.csv", report.mode.as_str()));
    write_atomic(&report_csv, report.to_csv().as_bytes())?;
    let totals_json = config.out_dir.join(format!("totals-{}.json", report.mode.as_str()));
    let mut totals = report.totals_json()?;
    totals.push('\n');
    write_atomic(&totals_json, totals.as_bytes())?;
    Ok(RunOutcome { report: report.clone(), report_csv, totals_json })
}

#[derive(Debug)]
pub struct CompareOutcome {
    pub static_run: RunOutcome,
    pub dynamic_run: RunOutcome,
    pub table: AccuracyTable,
    /// dynamic grand non-optimal ÷ static grand non-optimal (1.0 when the
    /// static total is zero).
    pub non_optimal_ratio: f64,
    pub compare_json: PathBuf,
    pub plot_csvs: Vec<PathBuf>,
    pub svg_path: PathBuf,
    /// Whether models were trained by this invocation (false: reused).
    pub trained: bool,
}

/// `compare`: end-to-end static vs dynamic comparison. Prerequisites are
/// built on demand: the dataset is materialized from the config and models
/// are trained if the output directory does not already hold a current set.
pub fn cmd_compare(config: &ScenarioConfig) -> Result<CompareOutcome> {
    let resolved = resolve(config)?;
    let (models, trained) = if models_current(&resolved)? {
        (load_all(&resolved)?, false)
    } else {
        (train_all(&resolved)?, true)
    };
    let table = evaluate_models(&resolved, &models)?;
    let accuracy_csv = config.out_dir.join("accuracy.csv");
    write_atomic(&accuracy_csv, table.to_csv().as_bytes())?;

    let static_report = run_static_mode(&resolved)?;
    let dynamic_report = run_dynamic_mode(&resolved, &models)?;
    let static_run = write_run_artifacts(config, &static_report)?;
    let dynamic_run = write_run_artifacts(config, &dynamic_report)?;

    let ratio = if static_report.grand.non_optimal == 0 {
        1.0
    } else {
        dynamic_report.grand.non_optimal as f64 / static_report.grand.non_optimal as f64
    };
    let compare_json = config.out_dir.join("compare.json");
    {
        #[derive(Serialize)]
        struct Totals<'a> {
            #[serde(rename = "static")]
            static_totals: TotalsView<'a>,
            dynamic: TotalsView<'a>,
            non_optimal_ratio: f64,
        }
        #[derive(Serialize)]
        struct TotalsView<'a> {
            per_slice: &'a BTreeMap<String, crate::nodesim::SliceTotals>,
            grand: &'a crate::nodesim::SliceTotals,
        }
        let doc = Totals {
            static_totals: TotalsView {
                per_slice: &static_report.per_slice,
                grand: &static_report.grand,
            },
            dynamic: TotalsView {
                per_slice: &dynamic_report.per_slice,
                grand: &dynamic_report.grand,
            },
            non_optimal_ratio: ratio,
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        write_atomic(&compare_json, text.as_bytes())?;
    }

    let plot_csvs = write_plot_data(config, &static_report, &dynamic_report)?;
    let svg_path = config.out_dir.join("compare.svg");
    let svg = render_compare_svg(&static_report, &dynamic_report)?;
    write_atomic(&svg_path, svg.as_bytes())?;
    write_manifest(config)?;

    Ok(CompareOutcome {
        static_run,
        dynamic_run,
        table,
        non_optimal_ratio: ratio,
        compare_json,
        plot_csvs,
        svg_path,
        trained,
    })
}

// ---------------------------------------------------------------------------
// Plot data — exact projections of the run-report rows
// ---------------------------------------------------------------------------

/// Per-(hour, slice) sums over cells, in report row order.
fn sum_by_hour_slice(report: &RunReport) -> BTreeMap<(u32, String), (u64, u64, u64, u64)> {
    let mut out: BTreeMap<(u32, String), (u64, u64, u64, u64)> = BTreeMap::new();
    for r in &report.rows {
        let e = out.entry((r.hour, r.slice_id.clone())).or_default();
        e.0 += r.actual_ues as u64;
        e.1 += r.limit_ues as u64;
        e.2 += r.under_served as u64;
        e.3 += r.over_served as u64;
    }
    out
}

fn write_plot_data(
    config: &ScenarioConfig,
    static_report: &RunReport,
    dynamic_report: &RunReport,
) -> Result<Vec<PathBuf>> {
    let st = sum_by_hour_slice(static_report);
    let dy = sum_by_hour_slice(dynamic_report);
    if st.keys().ne(dy.keys()) {
        return Err(Error::Simulation(
            "static and dynamic reports cover different (hour, slice) sets".into(),
        ));
    }
    let mut paths = Vec::new();

    let mut actual_vs_limits = String::from("hour,slice,actual,static_limit,dynamic_limit\n");
    for (key, s) in &st {
        let d = &dy[key];
        if s.0 != d.0 {
            return Err(Error::Simulation(format!(
                "actual demand differs between modes at hour {} slice {}",
                key.0, key.1
            )));
        }
        actual_vs_limits.push_str(&format!("{},{},{},{},{}\n", key.0, key.1, s.0, s.1, d.1));
    }
    let p = config.out_dir.join("plot-actual-vs-limits.csv");
    write_atomic(&p, actual_vs_limits.as_bytes())?;
    paths.push(p);

    for (name, data) in [("plot-static-service.csv", &st), ("plot-dynamic-service.csv", &dy)] {
        let mut csv = String::from("hour,slice,under,over\n");
        for (key, v) in data {
            csv.push_str(&format!("{},{},{},{}\n", key.0, key.1, v.2, v.3));
        }
        let p = config.out_dir.join(name);
        write_atomic(&p, csv.as_bytes())?;
        paths.push(p);
    }

    let mut cumulative = String::from("hour,static_cum_non_optimal,dynamic_cum_non_optimal\n");
    let mut s_cum = 0u64;
    let mut d_cum = 0u64;
    let hours: Vec<u32> = {
        let mut h: Vec<u32> = st.keys().map(|k| k.0).collect();
        h.dedup();
        h
    };
    for hour in hours {
        for ((h, _), v) in st.range((hour, String::new())..(hour + 1, String::new())) {
            debug_assert_eq!(*h, hour);
            s_cum += v.2 + v.3;
        }
        for ((_, _), v) in dy.range((hour, String::new())..(hour + 1, String::new())) {
            d_cum += v.2 + v.3;
        }
        cumulative.push_str(&format!("{hour},{s_cum},{d_cum}\n"));
    }
    let p = config.out_dir.join("plot-cumulative.csv");
    write_atomic(&p, cumulative.as_bytes())?;
    paths.push(p);

    Ok(paths)
}

// ---------------------------------------------------------------------------
// SVG rendering
// ---------------------------------------------------------------------------

struct PlotSeries {
    label: String,
    color: &'static str,
    points: Vec<(f64, f64)>,
}

struct Panel {
    title: String,
    series: Vec<PlotSeries>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Renders Fig-3-style four panels: actual vs limits, static under/over,
/// dynamic under/over, and cumulative non-optimal UE-hours.
fn render_compare_svg(static_report: &RunReport, dynamic_report: &RunReport) -> Result<String> {
    let st = sum_by_hour_slice(static_report);
    let dy = sum_by_hour_slice(dynamic_report);
    let slices: Vec<String> = static_report.per_slice.keys().cloned().collect();

    let mut panel1 = Panel { title: "Active UEs: actual vs limits".into(), series: Vec::new() };
    for (i, slice) in slices.iter().enumerate() {
        let collect = |data: &BTreeMap<(u32, String), (u64, u64, u64, u64)>, field: usize| {
            data.iter()
                .filter(|((_, s), _)| s == slice)
                .map(|((h, _), v)| {
                    (*h as f64, [v.0, v.1][field] as f64)
                })
                .collect::<Vec<_>>()
        };
        panel1.series.push(PlotSeries {
            label: format!("{slice} actual"),
            color: PALETTE[(3 * i) % PALETTE.len()],
            points: collect(&st, 0),
        });
        panel1.series.push(PlotSeries {
            label: format!("{slice} static"),
            color: PALETTE[(3 * i + 1) % PALETTE.len()],
            points: collect(&st, 1),
        });
        panel1.series.push(PlotSeries {
            label: format!("{slice} dynamic"),
            color: PALETTE[(3 * i + 2) % PALETTE.len()],
            points: collect(&dy, 1),
        });
    }

    let service_panel = |title: &str, data: &BTreeMap<(u32, String), (u64, u64, u64, u64)>| {
        let mut under: BTreeMap<u32, u64> = BTreeMap::new();
        let mut over: BTreeMap<u32, u64> = BTreeMap::new();
        for ((h, _), v) in data {
            *under.entry(*h).or_default() += v.2;
            *over.entry(*h).or_default() += v.3;
        }
        Panel {
            title: title.into(),
            series: vec![
                PlotSeries {
                    label: "under-served".into(),
                    color: PALETTE[1],
                    points: under.iter().map(|(h, v)| (*h as f64, *v as f64)).collect(),
                },
                PlotSeries {
                    label: "over-served".into(),
                    color: PALETTE[0],
                    points: over.iter().map(|(h, v)| (*h as f64, *v as f64)).collect(),
                },
            ],
        }
    };
    let panel2 = service_panel("Static provisioning: under/over-served", &st);
    let panel3 = service_panel("Dynamic provisioning: under/over-served", &dy);

    let cumulative = |data: &BTreeMap<(u32, String), (u64, u64, u64, u64)>| {
        let mut by_hour: BTreeMap<u32, u64> = BTreeMap::new();
        for ((h, _), v) in data {
            *by_hour.entry(*h).or_default() += v.2 + v.3;
        }
        let mut cum = 0u64;
        by_hour
            .iter()
            .map(|(h, v)| {
                cum += v;
                (*h as f64, cum as f64)
            })
            .collect::<Vec<_>>()
    };
    let panel4 = Panel {
        title: "Cumulative non-optimally served UE-hours".into(),
        series: vec![
            PlotSeries { label: "static".into(), color: PALETTE[1], points: cumulative(&st) },
            PlotSeries { label: "dynamic".into(), color: PALETTE[2], points: cumulative(&dy) },
        ],
    };

    Ok(render_svg(&[panel1, panel2, panel3, panel4]))
}

fn render_svg(panels: &[Panel; 4]) -> String {
    const W: f64 = 1200.0;
    const H: f64 = 800.0;
    const PW: f64 = W / 2.0;
    const PH: f64 = H / 2.0;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"11\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    );
    for (i, panel) in panels.iter().enumerate() {
        let ox = (i % 2) as f64 * PW;
        let oy = (i / 2) as f64 * PH;
        svg.push_str(&render_panel(panel, ox, oy, PW, PH));
    }
    svg.push_str("</svg>\n");
    svg
}

fn render_panel(panel: &Panel, ox: f64, oy: f64, w: f64, h: f64) -> String {
    const ML: f64 = 60.0;
    const MR: f64 = 15.0;
    const MT: f64 = 48.0;
    const MB: f64 = 38.0;
    let plot_w = w - ML - MR;
    let plot_h = h - MT - MB;
    let x0 = ox + ML;
    let y0 = oy + MT;

    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymax = 0.0f64;
    for s in &panel.series {
        for (x, y) in &s.points {
            xmin = xmin.min(*x);
            xmax = xmax.max(*x);
            ymax = ymax.max(*y);
        }
    }
    if !xmin.is_finite() || xmax <= xmin {
        xmin = 0.0;
        xmax = 1.0;
    }
    if ymax <= 0.0 {
        ymax = 1.0;
    }
    ymax *= 1.05;

    let px = |x: f64| x0 + (x - xmin) / (xmax - xmin) * plot_w;
    let py = |y: f64| y0 + plot_h - (y / ymax) * plot_h;

    let mut out = String::new();
    out.push_str(&format!(
        "<g>\n<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\">{}</text>\n",
        x0,
        oy + 18.0,
        xml_escape(&panel.title)
    ));
    // Legend row.
    let mut lx = x0;
    let ly = oy + 32.0;
    for s in &panel.series {
        out.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{}\" \
             stroke-width=\"2\"/>\n<text x=\"{:.2}\" y=\"{:.2}\">{}</text>\n",
            lx,
            ly - 4.0,
            lx + 14.0,
            ly - 4.0,
            s.color,
            lx + 18.0,
            ly,
            xml_escape(&s.label)
        ));
        lx += 26.0 + 6.8 * s.label.len() as f64;
    }
    // Axes.
    out.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n\
         <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        x0,
        y0,
        x0,
        y0 + plot_h,
        x0,
        y0 + plot_h,
        x0 + plot_w,
        y0 + plot_h
    ));
    // Ticks.
    for i in 0..=4 {
        let xv = xmin + (xmax - xmin) * i as f64 / 4.0;
        let yv = ymax * i as f64 / 4.0;
        out.push_str(&format!(
            "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"black\"/>\n\
             <text x=\"{0:.2}\" y=\"{3:.2}\" text-anchor=\"middle\">{4}</text>\n",
            px(xv),
            y0 + plot_h,
            y0 + plot_h + 4.0,
            y0 + plot_h + 16.0,
            fmt_tick(xv)
        ));
        out.push_str(&format!(
            "<line x1=\"{1:.2}\" y1=\"{0:.2}\" x2=\"{2:.2}\" y2=\"{0:.2}\" stroke=\"black\"/>\n\
             <text x=\"{3:.2}\" y=\"{4:.2}\" text-anchor=\"end\">{5}</text>\n",
            py(yv),
            x0 - 4.0,
            x0,
            x0 - 7.0,
            py(yv) + 4.0,
            fmt_tick(yv)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">hour</text>\n",
        x0 + plot_w / 2.0,
        y0 + plot_h + 32.0
    ));
    // Series polylines.
    for s in &panel.series {
        if s.points.is_empty() {
            continue;
        }
        let mut points = String::new();
        for (x, y) in &s.points {
            points.push_str(&format!("{:.2},{:.2} ", px(*x), py(*y)));
        }
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1\" points=\"{}\"/>\n",
            s.color,
            points.trim_end()
        ));
    }
    out.push_str("</g>\n");
    out
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 10.0 || v == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
