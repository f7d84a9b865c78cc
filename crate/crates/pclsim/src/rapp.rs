//! The Non-RT-RIC Predictive Closed Loop application.
//!
//! Turns per-(slice, cell) forecasts into adaptive UE limits, PRB quotas,
//! RAN slice descriptors (A1 policies), and O-Cloud scaling directives.
//! Everything here is a pure function of its inputs; the loop driver owns
//! all state and invokes [`closed_loop_step`] once per simulated hour.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::forecast::ForecastModel;
use crate::pipeline::SliceSeries;
use crate::types::CellId;
use crate::util::proportional_rescale;

/// A1 policy type identifier carried by every serialized descriptor.
pub const A1_POLICY_TYPE: &str = "pcl-slice-v1";

/// Default PLMN identifier (MCC+MNC digits) stamped on descriptors.
pub const DEFAULT_PLMN_ID: &str = "40486";

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// The adaptive cap the loop places on one (slice, cell) for one hour:
/// a maximum number of active UEs plus the PRB quota reserved to serve them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveLimit {
    pub slice_id: String,
    pub cell: CellId,
    /// The hour this limit governs.
    pub hour: u32,
    pub max_active_ues: u32,
    /// PRB quota in percent of the cell's PRBs, in `[0, 100]`.
    pub prb_quota_pct: f64,
}

impl AdaptiveLimit {
    /// Checks field ranges and the zero-coupling invariant
    /// (no UEs admitted ⇒ no PRBs reserved).
    pub fn validate(&self) -> Result<()> {
        if !self.prb_quota_pct.is_finite()
            || self.prb_quota_pct < 0.0
            || self.prb_quota_pct > 100.0
        {
            return Err(Error::Contract(format!(
                "adaptive limit for {}/{}: prb_quota_pct {} outside [0, 100]",
                self.slice_id, self.cell, self.prb_quota_pct
            )));
        }
        if self.max_active_ues == 0 && self.prb_quota_pct != 0.0 {
            return Err(Error::Contract(format!(
                "adaptive limit for {}/{}: max_active_ues = 0 requires prb_quota_pct = 0, got {}",
                self.slice_id, self.cell, self.prb_quota_pct
            )));
        }
        Ok(())
    }
}

/// Enforcement state of one slice on one cell, as last applied to the node.
///
/// `build_slice_descriptor` diffs a target [`AdaptiveLimit`] against this to
/// decide which parameters to scale. Also embedded in E2 control frames,
/// hence the camelCase wire names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SliceState {
    pub slice_id: String,
    pub cell: CellId,
    pub max_active_ues: u32,
    pub prb_quota_pct: f64,
}

/// RAN layer a descriptor parameter addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layer {
    #[serde(rename = "MAC_SCHEDULER")]
    MacScheduler,
}

/// Slice parameter a descriptor adjusts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SliceParameter {
    #[serde(rename = "MAX_ACTIVE_UES")]
    MaxActiveUes,
    #[serde(rename = "PRB_QUOTA_PCT")]
    PrbQuotaPct,
}

/// Scaling direction relative to the currently applied value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "SCALE_UP")]
    ScaleUp,
    #[serde(rename = "SCALE_DOWN")]
    ScaleDown,
    #[serde(rename = "HOLD")]
    Hold,
}

/// One parameter adjustment inside a RAN slice descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDescriptor {
    pub layer: Layer,
    pub parameter: SliceParameter,
    /// New absolute target value. Serialized as a JSON integer when integral
    /// (a UE count of 13 reads `13`, not `13.0`).
    #[serde(serialize_with = "serialize_number", deserialize_with = "deserialize_number")]
    pub value: f64,
    pub direction: Direction,
}

/// The A1 policy payload: new absolute slice parameters for one slice,
/// stamped with the PLMN and the hour they take effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "A1PolicyWire", into = "A1PolicyWire")]
pub struct RanSliceDescriptor {
    pub slice_id: String,
    pub plmn_id: String,
    pub layer_descriptors: Vec<LayerDescriptor>,
    pub timestamp_hour: u32,
}

impl RanSliceDescriptor {
    /// Checks the non-empty and per-parameter range invariants.
    pub fn validate(&self) -> Result<()> {
        if self.layer_descriptors.is_empty() {
            return Err(Error::Contract(format!(
                "descriptor for slice {}: layer_descriptors must be non-empty",
                self.slice_id
            )));
        }
        for ld in &self.layer_descriptors {
            if !ld.value.is_finite() || ld.value < 0.0 {
                return Err(Error::Contract(format!(
                    "descriptor for slice {}: {:?} value {} must be a finite non-negative number",
                    self.slice_id, ld.parameter, ld.value
                )));
            }
            if ld.parameter == SliceParameter::PrbQuotaPct && ld.value > 100.0 {
                return Err(Error::Contract(format!(
                    "descriptor for slice {}: PRB quota {} exceeds 100",
                    self.slice_id, ld.value
                )));
            }
        }
        Ok(())
    }

    /// Serializes to the A1 policy JSON format (field names bit-exact, e.g.
    /// `{"policyType":"pcl-slice-v1","sliceId":"A",...}`).
    pub fn to_a1_json(&self) -> Result<String> {
        self.validate()?;
        Ok(serde_json::to_string(self)?)
    }

    /// Parses an A1 policy JSON document, validating the policy type and
    /// all field ranges.
    pub fn from_a1_json(s: &str) -> Result<RanSliceDescriptor> {
        let descriptor: RanSliceDescriptor = serde_json::from_str(s)?;
        descriptor.validate()?;
        Ok(descriptor)
    }
}

/// Wire form of the A1 policy document; field order here pins the JSON
/// key order.
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct A1PolicyWire {
    policy_type: String,
    slice_id: String,
    plmn_id: String,
    timestamp_hour: u32,
    layer_descriptors: Vec<LayerDescriptor>,
}

impl From<RanSliceDescriptor> for A1PolicyWire {
    fn from(d: RanSliceDescriptor) -> A1PolicyWire {
        A1PolicyWire {
            policy_type: A1_POLICY_TYPE.to_string(),
            slice_id: d.slice_id,
            plmn_id: d.plmn_id,
            timestamp_hour: d.timestamp_hour,
            layer_descriptors: d.layer_descriptors,
        }
    }
}

impl TryFrom<A1PolicyWire> for RanSliceDescriptor {
    type Error = Error;

    fn try_from(w: A1PolicyWire) -> Result<RanSliceDescriptor> {
        if w.policy_type != A1_POLICY_TYPE {
            return Err(Error::Parse(format!(
                "unsupported A1 policy type {:?}, expected {:?}",
                w.policy_type, A1_POLICY_TYPE
            )));
        }
        Ok(RanSliceDescriptor {
            slice_id: w.slice_id,
            plmn_id: w.plmn_id,
            layer_descriptors: w.layer_descriptors,
            timestamp_hour: w.timestamp_hour,
        })
    }
}

fn serialize_number<S: Serializer>(value: &f64, serializer: S) -> std::result::Result<S::Ok, S::Error> {
    // 2^53: largest magnitude below which every integer-valued f64 is exact.
    if value.is_finite() && value.fract() == 0.0 && value.abs() <= 9_007_199_254_740_992.0 {
        serializer.serialize_i64(*value as i64)
    } else {
        serializer.serialize_f64(*value)
    }
}

fn deserialize_number<'de, D: Deserializer<'de>>(deserializer: D) -> std::result::Result<f64, D::Error> {
    f64::deserialize(deserializer)
}

/// Priority class of a slice's service, deciding whether idle cloud
/// resources are released or kept warm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Priority {
    High,
    Low,
}

/// O2 request to size one slice's O-Cloud footprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CloudScalingDirective {
    pub slice_id: String,
    pub target_vm_count: u32,
    pub target_cpu_units: u32,
    pub target_mem_units: u32,
    pub activate: bool,
    pub timestamp_hour: u32,
}

impl CloudScalingDirective {
    /// Checks the deactivation invariant (inactive ⇒ all targets zero).
    pub fn validate(&self) -> Result<()> {
        if !self.activate
            && (self.target_vm_count != 0 || self.target_cpu_units != 0 || self.target_mem_units != 0)
        {
            return Err(Error::Contract(format!(
                "cloud directive for slice {}: activate = false requires zero targets",
                self.slice_id
            )));
        }
        Ok(())
    }
}

/// Linear per-VM resource ratios for cloud scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CloudRatios {
    pub cpu_per_vm: u32,
    pub mem_per_vm: u32,
}

impl Default for CloudRatios {
    fn default() -> CloudRatios {
        CloudRatios { cpu_per_vm: 4, mem_per_vm: 8 }
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Adaptive UE limit for a forecast demand: `ceil(forecast × (1 + margin))`.
///
/// The product is snapped to the nearest integer when it lands within 1e-9
/// of one, so headroom factors that are exact in real arithmetic (10.0 with
/// margin 0.1 is exactly 11) do not over-admit by a whole UE due to floating
/// point (10.0 × 1.1 = 11.000000000000002 would otherwise ceil to 12).
pub fn compute_adaptive_limit(forecast_ues: f64, margin: f64) -> Result<u32> {
    if !forecast_ues.is_finite() || forecast_ues < 0.0 {
        return Err(Error::Contract(format!(
            "compute_adaptive_limit: forecast_ues must be finite and >= 0, got {forecast_ues}"
        )));
    }
    if !margin.is_finite() || margin < 0.0 {
        return Err(Error::Contract(format!(
            "compute_adaptive_limit: margin must be finite and >= 0, got {margin}"
        )));
    }
    let scaled = forecast_ues * (1.0 + margin);
    let snapped = if (scaled - scaled.round()).abs() <= 1e-9 { scaled.round() } else { scaled.ceil() };
    if snapped > u32::MAX as f64 {
        return Err(Error::Contract(format!(
            "compute_adaptive_limit: limit {snapped} exceeds the representable UE count"
        )));
    }
    Ok(snapped as u32)
}

/// PRB quota needed to serve `limit_ues`: `min(limit × prb_per_ue_pct, cap)`.
pub fn derive_prb_quota(limit_ues: u32, prb_per_ue_pct: f64, cell_cap_pct: f64) -> Result<f64> {
    if !prb_per_ue_pct.is_finite() || prb_per_ue_pct <= 0.0 {
        return Err(Error::Contract(format!(
            "derive_prb_quota: prb_per_ue_pct must be finite and > 0, got {prb_per_ue_pct}"
        )));
    }
    if !cell_cap_pct.is_finite() || cell_cap_pct <= 0.0 || cell_cap_pct > 100.0 {
        return Err(Error::Contract(format!(
            "derive_prb_quota: cell_cap_pct must lie in (0, 100], got {cell_cap_pct}"
        )));
    }
    Ok((limit_ues as f64 * prb_per_ue_pct).min(cell_cap_pct))
}

/// Estimates the per-UE PRB share coefficient for one (slice, cell) as the
/// mean of `prb_share_pct / active_ues` over the first `train_len` hours
/// with `active_ues > 0`.
pub fn estimate_prb_per_ue(series: &SliceSeries, train_len: usize) -> Result<f64> {
    if train_len == 0 || train_len > series.len() {
        return Err(Error::Contract(format!(
            "estimate_prb_per_ue: train_len {} outside series of {} hours",
            train_len,
            series.len()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..train_len {
        let ues = series.active_ues[i];
        if ues > 0.0 {
            sum += series.prb_share_pct[i] / ues;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Contract(format!(
            "estimate_prb_per_ue: series {} has no training hours with active UEs",
            series.series_id()
        )));
    }
    let coeff = sum / count as f64;
    if !coeff.is_finite() || coeff <= 0.0 {
        return Err(Error::Contract(format!(
            "estimate_prb_per_ue: series {} yields non-positive coefficient {coeff}",
            series.series_id()
        )));
    }
    Ok(coeff)
}

/// Diffs `target` against the currently applied `current` state and emits
/// one layer descriptor per changed parameter (absolute target value,
/// direction relative to current). When nothing changed, a single HOLD
/// descriptor is emitted so the loop's heartbeat stays observable.
pub fn build_slice_descriptor(
    slice_id: &str,
    plmn_id: &str,
    current: &SliceState,
    target: &AdaptiveLimit,
) -> Result<RanSliceDescriptor> {
    if current.slice_id != slice_id || target.slice_id != slice_id {
        return Err(Error::Contract(format!(
            "build_slice_descriptor: slice mismatch (descriptor {slice_id}, current {}, target {})",
            current.slice_id, target.slice_id
        )));
    }
    if current.cell != target.cell {
        return Err(Error::Contract(format!(
            "build_slice_descriptor: cell mismatch (current {}, target {})",
            current.cell, target.cell
        )));
    }
    target.validate()?;

    let mut layer_descriptors = Vec::new();
    if target.max_active_ues != current.max_active_ues {
        layer_descriptors.push(LayerDescriptor {
            layer: Layer::MacScheduler,
            parameter: SliceParameter::MaxActiveUes,
            value: target.max_active_ues as f64,
            direction: if target.max_active_ues > current.max_active_ues {
                Direction::ScaleUp
            } else {
                Direction::ScaleDown
            },
        });
    }
    if target.prb_quota_pct != current.prb_quota_pct {
        layer_descriptors.push(LayerDescriptor {
            layer: Layer::MacScheduler,
            parameter: SliceParameter::PrbQuotaPct,
            value: target.prb_quota_pct,
            direction: if target.prb_quota_pct > current.prb_quota_pct {
                Direction::ScaleUp
            } else {
                Direction::ScaleDown
            },
        });
    }
    if layer_descriptors.is_empty() {
        layer_descriptors.push(LayerDescriptor {
            layer: Layer::MacScheduler,
            parameter: SliceParameter::MaxActiveUes,
            value: current.max_active_ues as f64,
            direction: Direction::Hold,
        });
    }

    Ok(RanSliceDescriptor {
        slice_id: slice_id.to_string(),
        plmn_id: plmn_id.to_string(),
        layer_descriptors,
        timestamp_hour: target.hour,
    })
}

/// Sizes one slice's O-Cloud footprint for a forecast demand.
///
/// VMs come in blocks of `vm_per_ue_block` UEs each; CPU and memory scale
/// linearly per VM. A low-priority slice with zero forecast releases its
/// resources entirely (`activate = false`, zero targets); a high-priority
/// slice stays activated so it can serve demand the moment it returns.
pub fn infer_cloud_scaling(
    slice_id: &str,
    forecast_ues: f64,
    vm_per_ue_block: u32,
    priority: Priority,
    ratios: &CloudRatios,
    hour: u32,
) -> Result<CloudScalingDirective> {
    if vm_per_ue_block == 0 {
        return Err(Error::Contract(
            "infer_cloud_scaling: vm_per_ue_block must be >= 1".into(),
        ));
    }
    if !forecast_ues.is_finite() || forecast_ues < 0.0 {
        return Err(Error::Contract(format!(
            "infer_cloud_scaling: forecast_ues must be finite and >= 0, got {forecast_ues}"
        )));
    }
    let activate = priority == Priority::High || forecast_ues > 0.0;
    let directive = if activate {
        let limit = compute_adaptive_limit(forecast_ues, 0.0)?;
        let vm_count = limit.div_ceil(vm_per_ue_block);
        CloudScalingDirective {
            slice_id: slice_id.to_string(),
            target_vm_count: vm_count,
            target_cpu_units: vm_count * ratios.cpu_per_vm,
            target_mem_units: vm_count * ratios.mem_per_vm,
            activate: true,
            timestamp_hour: hour,
        }
    } else {
        CloudScalingDirective {
            slice_id: slice_id.to_string(),
            target_vm_count: 0,
            target_cpu_units: 0,
            target_mem_units: 0,
            activate: false,
            timestamp_hour: hour,
        }
    };
    directive.validate()?;
    Ok(directive)
}

// ---------------------------------------------------------------------------
// The closed-loop step
// ---------------------------------------------------------------------------

/// Loop tunables; defaults reproduce the baseline scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    /// SLA headroom on top of the forecast (0.0 = admit exactly the forecast).
    pub margin: f64,
    /// Per-cell PRB cap each slice's quota is clamped to, in `(0, 100]`.
    pub cell_cap_pct: f64,
    /// PLMN stamped on every descriptor.
    pub plmn_id: String,
    /// UEs served per VM when sizing the cloud footprint.
    pub vm_per_ue_block: u32,
    /// Per-VM CPU/memory ratios.
    pub cloud: CloudRatios,
    /// Per-slice service priority; slices not listed default to `high`.
    pub slice_priority: BTreeMap<String, Priority>,
}

impl Default for LoopConfig {
    fn default() -> LoopConfig {
        LoopConfig {
            margin: 0.0,
            cell_cap_pct: 100.0,
            plmn_id: DEFAULT_PLMN_ID.to_string(),
            vm_per_ue_block: 10,
            cloud: CloudRatios::default(),
            slice_priority: BTreeMap::new(),
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.margin.is_finite() || self.margin < 0.0 {
            return Err(Error::Config(format!("loop margin must be >= 0, got {}", self.margin)));
        }
        if !self.cell_cap_pct.is_finite() || self.cell_cap_pct <= 0.0 || self.cell_cap_pct > 100.0 {
            return Err(Error::Config(format!(
                "cell_cap_pct must lie in (0, 100], got {}",
                self.cell_cap_pct
            )));
        }
        if self.vm_per_ue_block == 0 {
            return Err(Error::Config("vm_per_ue_block must be >= 1".into()));
        }
        Ok(())
    }

    /// Priority of `slice_id`, defaulting to high for unlisted slices.
    pub fn priority_of(&self, slice_id: &str) -> Priority {
        self.slice_priority.get(slice_id).copied().unwrap_or(Priority::High)
    }
}

/// Forecaster bound to one (slice, cell): the trained model plus the
/// PRB-per-UE coefficient estimated from the training window.
#[derive(Debug, Clone)]
pub struct SeriesForecaster {
    pub model: ForecastModel,
    pub prb_per_ue_pct: f64,
}

/// One (slice, cell) output of a loop step: the computed limit and the A1
/// descriptor that moves the node from its current state to that limit.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicePolicy {
    pub cell: CellId,
    pub limit: AdaptiveLimit,
    pub descriptor: RanSliceDescriptor,
}

/// Runs one closed-loop hour: for each (slice, cell) history, predict the
/// hour's demand, compute the adaptive limit and PRB quota (rescaling
/// quotas proportionally wherever a cell oversubscribes 100%), and emit the
/// A1 descriptors plus per-slice O-Cloud directives.
///
/// `histories` must each end at `hour - 1` and cover at least the bound
/// model's input window; anything less is a [`Error::Loop`] so the caller
/// can fall back to static limits for that hour. `models` and `current` are
/// keyed by `SliceSeries::series_id()`. Pure: identical inputs yield
/// identical outputs.
pub fn closed_loop_step(
    hour: u32,
    histories: &[SliceSeries],
    models: &BTreeMap<String, SeriesForecaster>,
    current: &BTreeMap<String, SliceState>,
    config: &LoopConfig,
) -> Result<(Vec<SlicePolicy>, Vec<CloudScalingDirective>)> {
    config.validate()?;

    // Deterministic processing order regardless of caller ordering.
    let mut ordered: Vec<&SliceSeries> = histories.iter().collect();
    ordered.sort_by(|a, b| (&a.slice_id, &a.cell).cmp(&(&b.slice_id, &b.cell)));

    struct Pending<'a> {
        series: &'a SliceSeries,
        limit_ues: u32,
        quota: f64,
    }

    let mut pending: Vec<Pending> = Vec::with_capacity(ordered.len());
    for series in ordered {
        let sid = series.series_id();
        let forecaster = models.get(&sid).ok_or_else(|| {
            Error::Contract(format!("closed_loop_step: no model bound for series {sid}"))
        })?;

        let window_len = forecaster.model.required_window();
        let end_hour = series.start_hour as usize + series.len();
        if end_hour != hour as usize {
            return Err(Error::Loop(format!(
                "history for {sid} ends at hour {} but the step computes hour {hour}",
                end_hour.saturating_sub(1)
            )));
        }
        if series.len() < window_len {
            return Err(Error::Loop(format!(
                "history for {sid} has {} hours, model needs {window_len}",
                series.len()
            )));
        }

        let window = &series.active_ues[series.len() - window_len..];
        let predictions = forecaster.model.predict_next(window)?;
        // Demand cannot be negative; a model extrapolating below zero means
        // "no UEs expected", not a contract violation.
        let forecast = predictions[0].max(0.0);

        let limit_ues = compute_adaptive_limit(forecast, config.margin)?;
        let quota = derive_prb_quota(limit_ues, forecaster.prb_per_ue_pct, config.cell_cap_pct)?;
        pending.push(Pending { series, limit_ues, quota });
    }

    // Per-cell PRB conservation: rescale quotas proportionally where the
    // slices of one cell together ask for more than 100%.
    let mut by_cell: BTreeMap<CellId, Vec<usize>> = BTreeMap::new();
    for (i, p) in pending.iter().enumerate() {
        by_cell.entry(p.series.cell).or_default().push(i);
    }
    for indices in by_cell.values() {
        let mut quotas: Vec<f64> = indices.iter().map(|&i| pending[i].quota).collect();
        proportional_rescale(&mut quotas, 100.0);
        for (&i, &q) in indices.iter().zip(quotas.iter()) {
            pending[i].quota = q;
        }
    }

    let mut policies = Vec::with_capacity(pending.len());
    let mut slice_totals: BTreeMap<&str, u64> = BTreeMap::new();
    for p in &pending {
        let sid = p.series.series_id();
        let limit = AdaptiveLimit {
            slice_id: p.series.slice_id.clone(),
            cell: p.series.cell,
            hour,
            max_active_ues: p.limit_ues,
            prb_quota_pct: p.quota,
        };
        let state = current.get(&sid).ok_or_else(|| {
            Error::Contract(format!("closed_loop_step: no current state for series {sid}"))
        })?;
        let descriptor =
            build_slice_descriptor(&p.series.slice_id, &config.plmn_id, state, &limit)?;
        *slice_totals.entry(&p.series.slice_id).or_insert(0) += p.limit_ues as u64;
        policies.push(SlicePolicy { cell: p.series.cell, limit, descriptor });
    }

    let mut directives = Vec::with_capacity(slice_totals.len());
    for (slice_id, total_ues) in &slice_totals {
        directives.push(infer_cloud_scaling(
            slice_id,
            *total_ues as f64,
            config.vm_per_ue_block,
            config.priority_of(slice_id),
            &config.cloud,
            hour,
        )?);
    }

    Ok((policies, directives))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{train_seasonal_naive_values, NaiveConfig};

    fn cell(enb: u32, c: u32) -> CellId {
        CellId::new(enb, c)
    }

    fn state(slice: &str, cl: CellId, ues: u32, quota: f64) -> SliceState {
        SliceState { slice_id: slice.into(), cell: cl, max_active_ues: ues, prb_quota_pct: quota }
    }

    fn limit(slice: &str, cl: CellId, hour: u32, ues: u32, quota: f64) -> AdaptiveLimit {
        AdaptiveLimit {
            slice_id: slice.into(),
            cell: cl,
            hour,
            max_active_ues: ues,
            prb_quota_pct: quota,
        }
    }

    // -- compute_adaptive_limit ---------------------------------------------

    #[test]
    fn adaptive_limit_spec_examples() {
        assert_eq!(compute_adaptive_limit(0.0, 0.0).unwrap(), 0);
        assert_eq!(compute_adaptive_limit(12.3, 0.0).unwrap(), 13);
        assert_eq!(compute_adaptive_limit(10.0, 0.1).unwrap(), 11);
    }

    #[test]
    fn adaptive_limit_rejects_negative_inputs() {
        assert!(matches!(compute_adaptive_limit(-0.1, 0.0), Err(Error::Contract(_))));
        assert!(matches!(compute_adaptive_limit(1.0, -0.5), Err(Error::Contract(_))));
        assert!(matches!(compute_adaptive_limit(f64::NAN, 0.0), Err(Error::Contract(_))));
    }

    #[test]
    fn adaptive_limit_monotone_in_forecast_and_margin() {
        let forecasts = [0.0, 0.3, 1.0, 7.7, 10.0, 10.1, 42.0, 99.9];
        let margins = [0.0, 0.05, 0.1, 0.25, 1.0];
        for m in margins {
            let mut prev = 0;
            for f in forecasts {
                let l = compute_adaptive_limit(f, m).unwrap();
                assert!(l >= prev, "limit not monotone in forecast at f={f} m={m}");
                prev = l;
            }
        }
        for f in forecasts {
            let mut prev = 0;
            for m in margins {
                let l = compute_adaptive_limit(f, m).unwrap();
                assert!(l >= prev, "limit not monotone in margin at f={f} m={m}");
                prev = l;
            }
        }
    }

    // -- derive_prb_quota -----------------------------------------------------

    #[test]
    fn prb_quota_spec_examples() {
        assert_eq!(derive_prb_quota(0, 2.0, 100.0).unwrap(), 0.0);
        assert_eq!(derive_prb_quota(20, 2.0, 100.0).unwrap(), 40.0);
        assert_eq!(derive_prb_quota(80, 2.0, 100.0).unwrap(), 100.0);
    }

    #[test]
    fn prb_quota_rejects_bad_contracts() {
        assert!(matches!(derive_prb_quota(1, 0.0, 100.0), Err(Error::Contract(_))));
        assert!(matches!(derive_prb_quota(1, -1.0, 100.0), Err(Error::Contract(_))));
        assert!(matches!(derive_prb_quota(1, 1.0, 0.0), Err(Error::Contract(_))));
        assert!(matches!(derive_prb_quota(1, 1.0, 100.5), Err(Error::Contract(_))));
    }

    #[test]
    fn prb_quota_never_exceeds_cap() {
        for limit in [0u32, 1, 5, 33, 80, 500] {
            for coeff in [0.01, 0.5, 2.0, 7.3] {
                for cap in [1.0, 37.5, 100.0] {
                    let q = derive_prb_quota(limit, coeff, cap).unwrap();
                    assert!(q <= cap && q >= 0.0);
                }
            }
        }
    }

    // -- estimate_prb_per_ue --------------------------------------------------

    fn series_for_estimation() -> SliceSeries {
        SliceSeries {
            slice_id: "A".into(),
            cell: cell(1, 1),
            start_hour: 0,
            active_ues: vec![10.0, 0.0, 20.0, 5.0],
            volume_gb: vec![0.0; 4],
            prb_share_pct: vec![20.0, 7.0, 30.0, 20.0],
        }
    }

    #[test]
    fn prb_per_ue_is_mean_over_active_hours() {
        let s = series_for_estimation();
        // Hours 0, 2, 3 are active: (20/10 + 30/20 + 20/5) / 3 = (2 + 1.5 + 4) / 3 = 2.5.
        let coeff = estimate_prb_per_ue(&s, 4).unwrap();
        assert!((coeff - 2.5).abs() < 1e-12);
        // Restricting to the first two hours uses only hour 0.
        let coeff = estimate_prb_per_ue(&s, 2).unwrap();
        assert!((coeff - 2.0).abs() < 1e-12);
    }

    #[test]
    fn prb_per_ue_requires_active_hours() {
        let mut s = series_for_estimation();
        s.active_ues = vec![0.0; 4];
        assert!(matches!(estimate_prb_per_ue(&s, 4), Err(Error::Contract(_))));
        assert!(matches!(estimate_prb_per_ue(&series_for_estimation(), 0), Err(Error::Contract(_))));
    }

    // -- build_slice_descriptor ----------------------------------------------

    #[test]
    fn descriptor_scale_up_single_parameter() {
        let cur = state("A", cell(1, 1), 10, 40.0);
        let tgt = limit("A", cell(1, 1), 595, 13, 40.0);
        let d = build_slice_descriptor("A", DEFAULT_PLMN_ID, &cur, &tgt).unwrap();
        assert_eq!(d.layer_descriptors.len(), 1);
        let ld = &d.layer_descriptors[0];
        assert_eq!(ld.parameter, SliceParameter::MaxActiveUes);
        assert_eq!(ld.value, 13.0);
        assert_eq!(ld.direction, Direction::ScaleUp);
        assert_eq!(d.timestamp_hour, 595);
    }

    #[test]
    fn descriptor_hold_when_nothing_changed() {
        let cur = state("A", cell(1, 1), 10, 40.0);
        let tgt = limit("A", cell(1, 1), 100, 10, 40.0);
        let d = build_slice_descriptor("A", DEFAULT_PLMN_ID, &cur, &tgt).unwrap();
        assert_eq!(d.layer_descriptors.len(), 1);
        assert_eq!(d.layer_descriptors[0].direction, Direction::Hold);
        assert_eq!(d.layer_descriptors[0].value, 10.0);
    }

    #[test]
    fn descriptor_two_changes_two_directions() {
        let cur = state("A", cell(1, 1), 10, 40.0);
        let tgt = limit("A", cell(1, 1), 7, 13, 20.0);
        let d = build_slice_descriptor("A", DEFAULT_PLMN_ID, &cur, &tgt).unwrap();
        assert_eq!(d.layer_descriptors.len(), 2);
        assert_eq!(d.layer_descriptors[0].parameter, SliceParameter::MaxActiveUes);
        assert_eq!(d.layer_descriptors[0].direction, Direction::ScaleUp);
        assert_eq!(d.layer_descriptors[1].parameter, SliceParameter::PrbQuotaPct);
        assert_eq!(d.layer_descriptors[1].direction, Direction::ScaleDown);
        assert_eq!(d.layer_descriptors[1].value, 20.0);
    }

    #[test]
    fn descriptor_rejects_mismatches() {
        let cur = state("B", cell(1, 1), 10, 40.0);
        let tgt = limit("A", cell(1, 1), 1, 13, 40.0);
        assert!(matches!(
            build_slice_descriptor("A", DEFAULT_PLMN_ID, &cur, &tgt),
            Err(Error::Contract(_))
        ));
        let cur = state("A", cell(1, 2), 10, 40.0);
        assert!(matches!(
            build_slice_descriptor("A", DEFAULT_PLMN_ID, &cur, &tgt),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn adaptive_limit_zero_ues_requires_zero_quota() {
        assert!(limit("A", cell(1, 1), 0, 0, 0.0).validate().is_ok());
        assert!(limit("A", cell(1, 1), 0, 0, 5.0).validate().is_err());
        assert!(limit("A", cell(1, 1), 0, 3, 101.0).validate().is_err());
    }

    // -- A1 JSON ---------------------------------------------------------------

    #[test]
    fn a1_json_matches_pinned_example_byte_for_byte() {
        let d = RanSliceDescriptor {
            slice_id: "A".into(),
            plmn_id: "40486".into(),
            layer_descriptors: vec![LayerDescriptor {
                layer: Layer::MacScheduler,
                parameter: SliceParameter::MaxActiveUes,
                value: 13.0,
                direction: Direction::ScaleUp,
            }],
            timestamp_hour: 595,
        };
        let json = d.to_a1_json().unwrap();
        assert_eq!(
            json,
            "{\"policyType\":\"pcl-slice-v1\",\"sliceId\":\"A\",\"plmnId\":\"40486\",\
             \"timestampHour\":595,\"layerDescriptors\":[{\"layer\":\"MAC_SCHEDULER\",\
             \"parameter\":\"MAX_ACTIVE_UES\",\"value\":13,\"direction\":\"SCALE_UP\"}]}"
        );
        let back = RanSliceDescriptor::from_a1_json(&json).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn a1_json_round_trips_fractional_values() {
        let d = RanSliceDescriptor {
            slice_id: "B".into(),
            plmn_id: "40486".into(),
            layer_descriptors: vec![LayerDescriptor {
                layer: Layer::MacScheduler,
                parameter: SliceParameter::PrbQuotaPct,
                value: 40.5,
                direction: Direction::ScaleDown,
            }],
            timestamp_hour: 7,
        };
        let json = d.to_a1_json().unwrap();
        assert!(json.contains("\"value\":40.5"));
        assert_eq!(RanSliceDescriptor::from_a1_json(&json).unwrap(), d);
    }

    #[test]
    fn a1_json_rejects_wrong_policy_type_and_bad_ranges() {
        let wrong = "{\"policyType\":\"other-v9\",\"sliceId\":\"A\",\"plmnId\":\"40486\",\
                     \"timestampHour\":1,\"layerDescriptors\":[{\"layer\":\"MAC_SCHEDULER\",\
                     \"parameter\":\"MAX_ACTIVE_UES\",\"value\":1,\"direction\":\"HOLD\"}]}";
        assert!(RanSliceDescriptor::from_a1_json(wrong).is_err());
        let out_of_range = "{\"policyType\":\"pcl-slice-v1\",\"sliceId\":\"A\",\"plmnId\":\"40486\",\
                            \"timestampHour\":1,\"layerDescriptors\":[{\"layer\":\"MAC_SCHEDULER\",\
                            \"parameter\":\"PRB_QUOTA_PCT\",\"value\":120,\"direction\":\"HOLD\"}]}";
        assert!(matches!(RanSliceDescriptor::from_a1_json(out_of_range), Err(Error::Contract(_))));
        let empty = "{\"policyType\":\"pcl-slice-v1\",\"sliceId\":\"A\",\"plmnId\":\"40486\",\
                     \"timestampHour\":1,\"layerDescriptors\":[]}";
        assert!(matches!(RanSliceDescriptor::from_a1_json(empty), Err(Error::Contract(_))));
    }

    // -- infer_cloud_scaling ----------------------------------------------------

    #[test]
    fn cloud_scaling_spec_examples() {
        let ratios = CloudRatios::default();
        let d = infer_cloud_scaling("B", 0.0, 10, Priority::Low, &ratios, 5).unwrap();
        assert!(!d.activate);
        assert_eq!((d.target_vm_count, d.target_cpu_units, d.target_mem_units), (0, 0, 0));

        let d = infer_cloud_scaling("A", 13.0, 10, Priority::High, &ratios, 5).unwrap();
        assert!(d.activate);
        assert_eq!(d.target_vm_count, 2);
        assert_eq!(d.target_cpu_units, 8);
        assert_eq!(d.target_mem_units, 16);
    }

    #[test]
    fn cloud_scaling_high_priority_stays_active_at_zero() {
        let d = infer_cloud_scaling("A", 0.0, 10, Priority::High, &CloudRatios::default(), 5)
            .unwrap();
        assert!(d.activate);
        assert_eq!(d.target_vm_count, 0);
    }

    #[test]
    fn cloud_scaling_reactivates_on_demand() {
        let ratios = CloudRatios::default();
        let down = infer_cloud_scaling("B", 0.0, 10, Priority::Low, &ratios, 5).unwrap();
        assert!(!down.activate);
        let up = infer_cloud_scaling("B", 3.0, 10, Priority::Low, &ratios, 6).unwrap();
        assert!(up.activate);
        assert_eq!(up.target_vm_count, 1);
    }

    #[test]
    fn cloud_scaling_rejects_zero_block() {
        assert!(matches!(
            infer_cloud_scaling("A", 1.0, 0, Priority::High, &CloudRatios::default(), 0),
            Err(Error::Contract(_))
        ));
    }

    // -- closed_loop_step --------------------------------------------------------

    /// Deterministic daily pattern with period 24.
    fn pattern(hour: usize) -> f64 {
        8.0 + 6.0 * (((hour % 24) as f64) * std::f64::consts::TAU / 24.0).sin().abs()
    }

    fn history(slice: &str, cl: CellId, hours: usize, scale: f64) -> SliceSeries {
        let active: Vec<f64> = (0..hours).map(|h| pattern(h) * scale).collect();
        let prb: Vec<f64> = active.iter().map(|u| u * 1.5).collect();
        SliceSeries {
            slice_id: slice.into(),
            cell: cl,
            start_hour: 0,
            active_ues: active.clone(),
            volume_gb: active.iter().map(|u| u * 0.1).collect(),
            prb_share_pct: prb,
        }
    }

    fn bind_naive(series: &SliceSeries) -> SeriesForecaster {
        let model = train_seasonal_naive_values(
            &series.active_ues,
            &series.series_id(),
            &NaiveConfig::default(),
        )
        .unwrap();
        let prb_per_ue_pct = estimate_prb_per_ue(series, series.len()).unwrap();
        SeriesForecaster { model, prb_per_ue_pct }
    }

    fn loop_fixture(hours: usize, scale_b: f64) -> (
        Vec<SliceSeries>,
        BTreeMap<String, SeriesForecaster>,
        BTreeMap<String, SliceState>,
    ) {
        let c = cell(1, 1);
        let histories = vec![history("A", c, hours, 1.0), history("B", c, hours, scale_b)];
        let mut models = BTreeMap::new();
        let mut current = BTreeMap::new();
        for s in &histories {
            models.insert(s.series_id(), bind_naive(s));
            current.insert(s.series_id(), state(&s.slice_id, s.cell, 0, 0.0));
        }
        (histories, models, current)
    }

    #[test]
    fn loop_step_forecasts_limits_and_stays_pure() {
        let (histories, models, current) = loop_fixture(48, 1.0);
        let config = LoopConfig::default();
        let (policies, directives) = closed_loop_step(48, &histories, &models, &current, &config).unwrap();
        assert_eq!(policies.len(), 2);
        assert_eq!(directives.len(), 2);

        // Seasonal naive on a periodic series: forecast = value 24 hours ago.
        let expected = compute_adaptive_limit(pattern(24), 0.0).unwrap();
        assert_eq!(policies[0].limit.max_active_ues, expected);
        assert_eq!(policies[0].limit.hour, 48);
        // prb_per_ue = 1.5 per construction, quota = limit * 1.5 (before any rescale).
        assert!((policies[0].limit.prb_quota_pct - expected as f64 * 1.5).abs() < 1e-9);

        // Purity: identical inputs, identical outputs.
        let again = closed_loop_step(48, &histories, &models, &current, &config).unwrap();
        assert_eq!(again.0, policies);
        assert_eq!(again.1, directives);

        // Directives cover both slices in sorted order.
        assert_eq!(directives[0].slice_id, "A");
        assert_eq!(directives[1].slice_id, "B");
        assert!(directives[0].activate);
    }

    #[test]
    fn loop_step_rescales_oversubscribed_cells() {
        // Scale slice B so that together the quotas exceed 100%:
        // A forecasts 8 UEs (quota 12), B forecasts 96 (raw quota 144).
        let (histories, models, current) = loop_fixture(48, 12.0);
        let config = LoopConfig::default();
        let (policies, _) = closed_loop_step(48, &histories, &models, &current, &config).unwrap();
        let sum: f64 = policies.iter().map(|p| p.limit.prb_quota_pct).sum();
        assert!(sum <= 100.0, "cell oversubscribed after rescale: {sum}");
        assert!(sum > 100.0 - 1e-6, "rescale should land on the cap, got {sum}");
        // Proportions preserved across the rescale. Each slice's raw ask is
        // min(limit × 1.5, 100): the per-slice cap applies before conservation.
        let ratio = policies[1].limit.prb_quota_pct / policies[0].limit.prb_quota_pct;
        let ask_a = (policies[0].limit.max_active_ues as f64 * 1.5).min(100.0);
        let ask_b = (policies[1].limit.max_active_ues as f64 * 1.5).min(100.0);
        assert!((ratio - ask_b / ask_a).abs() < 1e-9);
    }

    #[test]
    fn loop_step_insufficient_history_is_loop_error() {
        let (mut histories, models, current) = loop_fixture(48, 1.0);
        // Truncate below the naive model's 24-hour window.
        for s in &mut histories {
            s.active_ues.truncate(10);
            s.volume_gb.truncate(10);
            s.prb_share_pct.truncate(10);
        }
        let err = closed_loop_step(10, &histories, &models, &current, &LoopConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::Loop(_)), "got {err:?}");
    }

    #[test]
    fn loop_step_rejects_misaligned_history() {
        let (histories, models, current) = loop_fixture(48, 1.0);
        let err = closed_loop_step(50, &histories, &models, &current, &LoopConfig::default())
            .unwrap_err();
        assert!(matches!(err, Error::Loop(_)));
    }

    #[test]
    fn loop_step_holds_when_state_already_matches() {
        let (histories, models, mut current) = loop_fixture(48, 1.0);
        let config = LoopConfig::default();
        let (policies, _) = closed_loop_step(48, &histories, &models, &current, &config).unwrap();
        // Apply the computed limits as the new current state and step again
        // at the same hour: every descriptor must be a HOLD.
        for p in &policies {
            let sid = format!("{}/{}", p.limit.slice_id, p.cell);
            current.insert(
                sid,
                SliceState {
                    slice_id: p.limit.slice_id.clone(),
                    cell: p.cell,
                    max_active_ues: p.limit.max_active_ues,
                    prb_quota_pct: p.limit.prb_quota_pct,
                },
            );
        }
        let (policies2, _) = closed_loop_step(48, &histories, &models, &current, &config).unwrap();
        for p in &policies2 {
            assert_eq!(p.descriptor.layer_descriptors.len(), 1);
            assert_eq!(p.descriptor.layer_descriptors[0].direction, Direction::Hold);
        }
    }

    #[test]
    fn loop_step_low_priority_zero_demand_deactivates() {
        let c = cell(1, 1);
        // Slice B sees zero demand throughout.
        let mut b = history("B", c, 48, 1.0);
        b.active_ues = vec![0.0; 48];
        b.prb_share_pct = vec![0.0; 48];
        let a = history("A", c, 48, 1.0);

        let mut models = BTreeMap::new();
        let mut current = BTreeMap::new();
        models.insert(a.series_id(), bind_naive(&a));
        current.insert(a.series_id(), state("A", c, 0, 0.0));
        // B's coefficient cannot be estimated from an idle series; bind a
        // naive model with an explicit fallback coefficient.
        let model = train_seasonal_naive_values(&b.active_ues, &b.series_id(), &NaiveConfig::default())
            .unwrap();
        models.insert(b.series_id(), SeriesForecaster { model, prb_per_ue_pct: 1.0 });
        current.insert(b.series_id(), state("B", c, 0, 0.0));

        let mut config = LoopConfig::default();
        config.slice_priority.insert("B".into(), Priority::Low);
        let histories = vec![a, b];
        let (policies, directives) =
            closed_loop_step(48, &histories, &models, &current, &config).unwrap();

        let b_policy = policies.iter().find(|p| p.limit.slice_id == "B").unwrap();
        assert_eq!(b_policy.limit.max_active_ues, 0);
        assert_eq!(b_policy.limit.prb_quota_pct, 0.0);
        b_policy.limit.validate().unwrap();

        let b_directive = directives.iter().find(|d| d.slice_id == "B").unwrap();
        assert!(!b_directive.activate);
        assert_eq!(b_directive.target_vm_count, 0);
        let a_directive = directives.iter().find(|d| d.slice_id == "A").unwrap();
        assert!(a_directive.activate);
    }
}
