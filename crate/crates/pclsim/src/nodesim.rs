//! Slice-aware cell operation per hour: given the enforced `NodeSliceConfig`
//! and the hour's actual demand, determines served UEs / PRB usage, computes
//! the service metrics, and emits O1 reports — closing the loop.
//!
//! Two run modes share one report schema: `run_static` enforces a constant
//! per-(slice, cell) UE limit (the real-world baseline), `run_dynamic`
//! replays the full closed loop every hour — forecast, A1 policy, xApp
//! translation, E2 application, O2 scaling, and served-KPI VES feedback.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::control::{
    a1_publish, e2_apply, o2_scale, xapp_translate, ApplyOutcome, CloudState, Frame, Inbox,
    NodeSliceConfig, SequenceCounters, SliceParams,
};
use crate::error::{Error, Result};
use crate::pipeline::{
    ingest_ves_event, per_bearer_prb_share, tag_and_aggregate, SliceMapping, SliceSeries, VesEvent,
};
use crate::rapp::{
    closed_loop_step, compute_adaptive_limit, derive_prb_quota, Direction, LoopConfig,
    SeriesForecaster, SliceParameter, SlicePolicy, SliceState,
};
use crate::types::{CellId, Dataset, KpiSample};
use crate::util::proportional_rescale;

// ---------------------------------------------------------------------------
// Service metrics
// ---------------------------------------------------------------------------

/// Serving outcome of one (hour, slice, cell).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceMetrics {
    pub hour: u32,
    pub slice_id: String,
    pub cell: CellId,
    /// Rounded actual demand.
    pub actual_ues: u32,
    /// Enforced limit during the hour.
    pub limit_ues: u32,
    pub under_served: u32,
    pub over_served: u32,
    pub non_optimal: u32,
}

/// Under/over/non-optimal counts for one hour of one slice on one cell:
/// `under = max(actual − limit, 0)`, `over = max(limit − actual, 0)`,
/// `non_optimal = under + over = |actual − limit|`.
pub fn compute_service_metrics(actual_ues: i64, limit_ues: i64) -> Result<(u32, u32, u32)> {
    if actual_ues < 0 || limit_ues < 0 {
        return Err(Error::Contract(format!(
            "compute_service_metrics: counts must be >= 0, got actual {actual_ues}, limit {limit_ues}"
        )));
    }
    let under = (actual_ues - limit_ues).max(0) as u32;
    let over = (limit_ues - actual_ues).max(0) as u32;
    Ok((under, over, under + over))
}

// ---------------------------------------------------------------------------
// One simulated hour
// ---------------------------------------------------------------------------

/// Demand aggregated over one (cell, slice) for one hour.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SliceDemand {
    active_ues: f64,
    volume_gb: f64,
    prb_share_pct: f64,
}

/// Simulates one hour of slice-aware operation.
///
/// `samples_at_hour` is the hour's raw demand (four QCI rows per cell).
/// Every configured (cell, slice) must have demand and vice versa. Returns
/// the metrics per (slice, cell) — rounded actual demand vs enforced limit —
/// and the O1 VES events the cells would report: the *served* KPIs
/// (UEs and volume clipped by the UE limit, PRB usage clipped by the quota)
/// disaggregated back to QCIs proportionally to the demand mix.
pub fn step_hour(
    hour: u32,
    node: &NodeSliceConfig,
    samples_at_hour: &[KpiSample],
    mapping: &SliceMapping,
) -> Result<(Vec<ServiceMetrics>, Vec<VesEvent>)> {
    mapping.validate()?;
    if samples_at_hour.is_empty() || samples_at_hour.len() % 4 != 0 {
        return Err(Error::Simulation(format!(
            "hour {hour}: expected 4 QCI rows per cell, got {} rows",
            samples_at_hour.len()
        )));
    }

    // Aggregate demand per (cell, slice) and keep the per-QCI rows for the
    // served-KPI disaggregation.
    let mut demand: BTreeMap<(CellId, String), SliceDemand> = BTreeMap::new();
    let mut events = Vec::with_capacity(samples_at_hour.len() / 4);
    let mut cell_chunks = Vec::with_capacity(samples_at_hour.len() / 4);
    for chunk in samples_at_hour.chunks(4) {
        let cell = chunk[0].cell;
        if chunk.iter().any(|s| s.hour != hour) {
            return Err(Error::Simulation(format!(
                "demand rows for cell {cell} are not all at hour {hour}"
            )));
        }
        let shares = per_bearer_prb_share(chunk)?;
        for (slice_id, qcis) in &mapping.slices {
            let mut d = SliceDemand { active_ues: 0.0, volume_gb: 0.0, prb_share_pct: 0.0 };
            for s in chunk {
                if qcis.contains(&s.qci) {
                    d.active_ues += s.active_ues;
                    d.volume_gb += s.volume_gb;
                    d.prb_share_pct += shares[&s.qci];
                }
            }
            demand.insert((cell, slice_id.clone()), d);
        }
        cell_chunks.push((cell, chunk, shares));
    }

    // Demand and configuration must cover each other exactly.
    for (cell, slice_id) in demand.keys() {
        if node.get(*cell, slice_id).is_none() {
            return Err(Error::Simulation(format!(
                "hour {hour}: demand for unconfigured (cell {cell}, slice {slice_id})"
            )));
        }
    }

    let mut metrics = Vec::new();
    for (cell, slices) in &node.entries {
        for (slice_id, params) in slices {
            let d = demand.get(&(*cell, slice_id.clone())).ok_or_else(|| {
                Error::Simulation(format!(
                    "hour {hour}: no demand entry for configured (cell {cell}, slice {slice_id})"
                ))
            })?;
            let actual = d.active_ues.round() as i64;
            let (under, over, non_optimal) =
                compute_service_metrics(actual, params.max_active_ues as i64)?;
            metrics.push(ServiceMetrics {
                hour,
                slice_id: slice_id.clone(),
                cell: *cell,
                actual_ues: actual as u32,
                limit_ues: params.max_active_ues,
                under_served: under,
                over_served: over,
                non_optimal,
            });
        }
    }
    metrics.sort_by(|a, b| (&a.slice_id, a.cell).cmp(&(&b.slice_id, b.cell)));

    // Served-KPI feedback: per slice, UEs and volume are clipped by the UE
    // limit and PRBs by the quota; each QCI receives its demand-proportional
    // share of what the slice actually got.
    for (cell, chunk, shares) in cell_chunks {
        let mut ue_ratio: BTreeMap<&str, f64> = BTreeMap::new();
        let mut prb_ratio: BTreeMap<&str, f64> = BTreeMap::new();
        for (slice_id, _) in &mapping.slices {
            let d = &demand[&(cell, slice_id.clone())];
            let params = node.get(cell, slice_id).expect("covered above");
            let served_ues = d.active_ues.min(params.max_active_ues as f64);
            let served_prb = d.prb_share_pct.min(params.prb_quota_pct);
            ue_ratio.insert(
                slice_id,
                if d.active_ues > 0.0 { served_ues / d.active_ues } else { 1.0 },
            );
            prb_ratio.insert(
                slice_id,
                if d.prb_share_pct > 0.0 { served_prb / d.prb_share_pct } else { 1.0 },
            );
        }
        let mut served_cell_prb = 0.0;
        let mut served_samples = Vec::with_capacity(4);
        for s in chunk {
            let slice_id = mapping.slice_of(s.qci).ok_or_else(|| {
                Error::Simulation(format!("QCI {} not mapped to any slice", s.qci))
            })?;
            let r_ues = ue_ratio[slice_id];
            served_cell_prb += shares[&s.qci] * prb_ratio[slice_id];
            served_samples.push(KpiSample {
                hour,
                cell,
                qci: s.qci,
                active_ues: s.active_ues * r_ues,
                volume_gb: s.volume_gb * r_ues,
                dl_prb_util_pct: 0.0, // cell total patched below
            });
        }
        for s in &mut served_samples {
            s.dl_prb_util_pct = served_cell_prb;
        }
        events.push(VesEvent::from_samples(&served_samples)?);
    }

    Ok((metrics, events))
}

// ---------------------------------------------------------------------------
// Run reports
// ---------------------------------------------------------------------------

/// Provisioning mode of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Static,
    Dynamic,
}

impl RunMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Static => "static",
            RunMode::Dynamic => "dynamic",
        }
    }
}

/// Accumulated serving totals (UE-hours) for one slice or the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SliceTotals {
    pub under_served: u64,
    pub over_served: u64,
    pub non_optimal: u64,
    /// Σ rounded actual demand, for scale context.
    pub actual_ue_hours: u64,
    /// Σ raw (un-rounded) demand, retained for audit.
    pub actual_ue_hours_raw: f64,
}

/// Full run outcome: hourly metrics plus per-slice and grand totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: RunMode,
    pub test_start_hour: u32,
    pub test_hours: u32,
    pub rows: Vec<ServiceMetrics>,
    pub per_slice: BTreeMap<String, SliceTotals>,
    pub grand: SliceTotals,
}

impl RunReport {
    /// Builds a report from hourly rows (raw demand passed alongside each
    /// row for the audit totals), re-deriving all totals.
    fn assemble(
        mode: RunMode,
        test_start_hour: u32,
        test_hours: u32,
        rows: Vec<ServiceMetrics>,
        raw_demand: &[f64],
    ) -> RunReport {
        let mut per_slice: BTreeMap<String, SliceTotals> = BTreeMap::new();
        let mut grand = SliceTotals::default();
        for (row, raw) in rows.iter().zip(raw_demand) {
            let t = per_slice.entry(row.slice_id.clone()).or_default();
            for target in [&mut *t, &mut grand] {
                target.under_served += row.under_served as u64;
                target.over_served += row.over_served as u64;
                target.non_optimal += row.non_optimal as u64;
                target.actual_ue_hours += row.actual_ues as u64;
                target.actual_ue_hours_raw += raw;
            }
        }
        RunReport { mode, test_start_hour, test_hours, rows, per_slice, grand }
    }

    /// The run-report CSV: `hour,slice,enb,cell,actual,limit,under,over,non_optimal`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("hour,slice,enb,cell,actual,limit,under,over,non_optimal\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.hour,
                r.slice_id,
                r.cell.enb,
                r.cell.cell,
                r.actual_ues,
                r.limit_ues,
                r.under_served,
                r.over_served,
                r.non_optimal
            ));
        }
        out
    }

    /// Totals summary as pretty JSON (per-slice and grand totals).
    pub fn totals_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Totals<'a> {
            mode: &'a str,
            test_start_hour: u32,
            test_hours: u32,
            per_slice: &'a BTreeMap<String, SliceTotals>,
            grand: &'a SliceTotals,
        }
        Ok(serde_json::to_string_pretty(&Totals {
            mode: self.mode.as_str(),
            test_start_hour: self.test_start_hour,
            test_hours: self.test_hours,
            per_slice: &self.per_slice,
            grand: &self.grand,
        })?)
    }
}

// ---------------------------------------------------------------------------
// Run orchestration
// ---------------------------------------------------------------------------

/// Everything a run needs: the raw dataset, the slice mapping, and where the
/// train period ends (the runs replay the remaining test hours).
#[derive(Debug, Clone, Copy)]
pub struct RunSetup<'a> {
    pub dataset: &'a Dataset,
    pub mapping: &'a SliceMapping,
    /// Hours in the training period; test hours are the rest.
    pub train_len: usize,
}

impl RunSetup<'_> {
    fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        if self.train_len == 0 || self.train_len >= self.dataset.hours as usize {
            return Err(Error::Contract(format!(
                "train_len {} must split a {}-hour dataset into non-empty train and test",
                self.train_len, self.dataset.hours
            )));
        }
        Ok(())
    }

    fn test_range(&self) -> std::ops::Range<u32> {
        let start = self.dataset.start_hour() + self.train_len as u32;
        let end = self.dataset.start_hour() + self.dataset.hours;
        start..end
    }
}

/// Default static limit per series: the training-period mean demand,
/// rounded up — the constant a real-world operator would provision.
/// Keyed by `SliceSeries::series_id()`.
pub fn default_static_limits(
    series: &[SliceSeries],
    train_len: usize,
) -> Result<BTreeMap<String, u32>> {
    let mut limits = BTreeMap::new();
    for s in series {
        if train_len == 0 || train_len > s.len() {
            return Err(Error::Contract(format!(
                "default_static_limits: train_len {} outside series {} of {} hours",
                train_len,
                s.series_id(),
                s.len()
            )));
        }
        let mean = s.active_ues[..train_len].iter().sum::<f64>() / train_len as f64;
        limits.insert(s.series_id(), compute_adaptive_limit(mean, 0.0)?);
    }
    Ok(limits)
}

/// Estimates PRB-per-UE coefficients for every series over the train window.
pub fn estimate_prb_coefficients(
    series: &[SliceSeries],
    train_len: usize,
) -> Result<BTreeMap<String, f64>> {
    series
        .iter()
        .map(|s| Ok((s.series_id(), crate::rapp::estimate_prb_per_ue(s, train_len)?)))
        .collect()
}

/// Builds the node configuration enforcing `limits`: per series, quota =
/// `min(limit × coeff, cap)`, then per-cell proportional rescale to 100.
pub fn static_node_config(
    series: &[SliceSeries],
    limits: &BTreeMap<String, u32>,
    coefficients: &BTreeMap<String, f64>,
    config: &LoopConfig,
) -> Result<NodeSliceConfig> {
    config.validate()?;
    let mut node = NodeSliceConfig::default();
    let mut by_cell: BTreeMap<CellId, Vec<(String, u32, f64)>> = BTreeMap::new();
    for s in series {
        let sid = s.series_id();
        let limit = *limits.get(&sid).ok_or_else(|| {
            Error::Contract(format!("static_node_config: no limit for series {sid}"))
        })?;
        let coeff = *coefficients.get(&sid).ok_or_else(|| {
            Error::Contract(format!("static_node_config: no PRB coefficient for series {sid}"))
        })?;
        let quota = derive_prb_quota(limit, coeff, config.cell_cap_pct)?;
        by_cell.entry(s.cell).or_default().push((s.slice_id.clone(), limit, quota));
    }
    for (cell, mut entries) in by_cell {
        let mut quotas: Vec<f64> = entries.iter().map(|e| e.2).collect();
        proportional_rescale(&mut quotas, 100.0);
        for ((slice_id, limit, _), quota) in entries.drain(..).zip(quotas) {
            node.seed(cell, &slice_id, SliceParams { max_active_ues: limit, prb_quota_pct: quota });
        }
    }
    node.validate()?;
    Ok(node)
}

/// Replays the test period under a constant per-(slice, cell) UE limit.
pub fn run_static(
    setup: &RunSetup,
    limits: &BTreeMap<String, u32>,
    coefficients: &BTreeMap<String, f64>,
    config: &LoopConfig,
) -> Result<RunReport> {
    setup.validate()?;
    let series = tag_and_aggregate(setup.dataset, setup.mapping)?;
    let node = static_node_config(&series, limits, coefficients, config)?;

    let mut rows = Vec::new();
    let mut raw = Vec::new();
    for hour in setup.test_range() {
        let (metrics, _events) = step_hour(hour, &node, setup.dataset.hour_slice(hour), setup.mapping)?;
        collect_raw_demand(&metrics, &series, setup.dataset.start_hour(), &mut raw);
        rows.extend(metrics);
    }
    let test_hours = setup.test_range().len() as u32;
    Ok(RunReport::assemble(RunMode::Static, setup.test_range().start, test_hours, rows, &raw))
}

/// Replays the full closed loop over the test period.
///
/// Histories warm-start from the training period, so the first test hour
/// already has a full forecast window; should a step still report
/// insufficient history, the node simply keeps its current (initially
/// static) limits for that hour. Each hour: forecast → A1 policies → xApp
/// translation → E2 application → the hour is served → served-KPI VES
/// feedback extends the histories.
pub fn run_dynamic(
    setup: &RunSetup,
    models: &BTreeMap<String, SeriesForecaster>,
    static_limits: &BTreeMap<String, u32>,
    config: &LoopConfig,
) -> Result<RunReport> {
    setup.validate()?;
    let full = tag_and_aggregate(setup.dataset, setup.mapping)?;
    for s in &full {
        if !models.contains_key(&s.series_id()) {
            return Err(Error::Contract(format!(
                "run_dynamic: no model for series {}",
                s.series_id()
            )));
        }
    }
    let coefficients: BTreeMap<String, f64> = models
        .iter()
        .map(|(sid, f)| (sid.clone(), f.prb_per_ue_pct))
        .collect();
    let mut node = static_node_config(&full, static_limits, &coefficients, config)?;

    // Histories warm-start from the train period.
    let mut histories: Vec<SliceSeries> = full
        .iter()
        .map(|s| {
            let mut h = s.clone();
            h.active_ues.truncate(setup.train_len);
            h.volume_gb.truncate(setup.train_len);
            h.prb_share_pct.truncate(setup.train_len);
            h
        })
        .collect();
    let index_of: BTreeMap<String, usize> = histories
        .iter()
        .enumerate()
        .map(|(i, s)| (s.series_id(), i))
        .collect();

    let mut current: BTreeMap<String, SliceState> = BTreeMap::new();
    for s in &full {
        current.insert(
            s.series_id(),
            node.slice_state(s.cell, &s.slice_id).expect("seeded above"),
        );
    }

    let mut ric_inbox: Inbox<Frame> = Inbox::default();
    let mut seqs = SequenceCounters::new();
    let mut cloud = CloudState::default();
    let mut rows = Vec::new();
    let mut raw = Vec::new();

    for hour in setup.test_range() {
        // --- Non-RT RIC: forecast and publish (§3 steps 4–8).
        match closed_loop_step(hour, &histories, models, &current, config) {
            Ok((mut policies, directives)) => {
                order_policies_for_apply(&mut policies);
                for p in &policies {
                    a1_publish(&p.descriptor, &[p.cell], &mut ric_inbox)?;
                }
                for d in &directives {
                    cloud = o2_scale(d, &cloud)?;
                }
            }
            // Insufficient history: keep the currently enforced limits.
            Err(Error::Loop(_)) => {}
            Err(e) => return Err(e),
        }

        // --- Near-RT RIC: translate and apply (§3 steps 8–9).
        while let Some(frame) = ric_inbox.pop() {
            let Frame::A1Policy { target_cells, policy } = frame else {
                return Err(Error::Simulation("unexpected frame in RIC inbox".into()));
            };
            let cells = target_cells
                .iter()
                .map(|n| CellId::parse_name(n))
                .collect::<Result<Vec<_>>>()?;
            for msg in xapp_translate(&policy, &node, &cells, &mut seqs)? {
                let applied = e2_apply(&msg, &node)?;
                if applied.outcome == ApplyOutcome::Stale {
                    return Err(Error::Simulation(format!(
                        "stale E2 message in orderly replay (cell {}, seq {})",
                        msg.state.cell, msg.sequence_no
                    )));
                }
                node = applied.config;
            }
        }
        for s in &full {
            current.insert(
                s.series_id(),
                node.slice_state(s.cell, &s.slice_id).expect("entries never removed"),
            );
        }

        // --- The nodes serve the hour and report served KPIs over O1.
        let (metrics, events) =
            step_hour(hour, &node, setup.dataset.hour_slice(hour), setup.mapping)?;
        collect_raw_demand(&metrics, &full, setup.dataset.start_hour(), &mut raw);
        rows.extend(metrics);

        // --- VES collector: ingest feedback and extend the histories.
        for event in &events {
            let samples = ingest_ves_event(event)?;
            let shares = per_bearer_prb_share(&samples)?;
            let cell = samples[0].cell;
            for (slice_id, qcis) in &setup.mapping.slices {
                let mut ues = 0.0;
                let mut vol = 0.0;
                let mut prb = 0.0;
                for s in &samples {
                    if qcis.contains(&s.qci) {
                        ues += s.active_ues;
                        vol += s.volume_gb;
                        prb += shares[&s.qci];
                    }
                }
                let idx = index_of[&format!("{slice_id}/{cell}")];
                histories[idx].active_ues.push(ues);
                histories[idx].volume_gb.push(vol);
                histories[idx].prb_share_pct.push(prb);
            }
        }
    }

    let test_hours = setup.test_range().len() as u32;
    Ok(RunReport::assemble(RunMode::Dynamic, setup.test_range().start, test_hours, rows, &raw))
}

/// Orders one hour's policies so that, per cell, quota-decreasing policies
/// apply before quota-increasing ones. Slice quotas always sum to ≤ 100
/// before and after the hour's updates, and this order keeps every
/// intermediate state under the cap too, so the E2 conservation rescale
/// never distorts an exact target mid-sequence.
fn order_policies_for_apply(policies: &mut [SlicePolicy]) {
    policies.sort_by(|a, b| {
        let key = |p: &SlicePolicy| {
            let raises_quota = p.descriptor.layer_descriptors.iter().any(|ld| {
                ld.parameter == SliceParameter::PrbQuotaPct && ld.direction == Direction::ScaleUp
            });
            (p.cell, raises_quota, p.limit.slice_id.clone())
        };
        key(a).cmp(&key(b))
    });
}

/// Pushes each row's raw (un-rounded) demand, looked up from the aggregated
/// series, in row order.
fn collect_raw_demand(
    rows: &[ServiceMetrics],
    series: &[SliceSeries],
    dataset_start: u32,
    out: &mut Vec<f64>,
) {
    for row in rows {
        let raw = series
            .iter()
            .find(|s| s.slice_id == row.slice_id && s.cell == row.cell)
            .map(|s| s.active_ues[(row.hour - dataset_start) as usize])
            .unwrap_or_default();
        out.push(raw);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{train_seasonal_naive_values, NaiveConfig};
    use crate::traffic::{generate_synthetic_dataset, GeneratorConfig};

    fn cell(enb: u32, c: u32) -> CellId {
        CellId::new(enb, c)
    }

    // -- compute_service_metrics ------------------------------------------------

    #[test]
    fn metrics_spec_examples() {
        assert_eq!(compute_service_metrics(10, 10).unwrap(), (0, 0, 0));
        assert_eq!(compute_service_metrics(15, 10).unwrap(), (5, 0, 5));
        assert_eq!(compute_service_metrics(4, 10).unwrap(), (0, 6, 6));
        assert!(matches!(compute_service_metrics(-1, 5), Err(Error::Contract(_))));
        assert!(matches!(compute_service_metrics(5, -1), Err(Error::Contract(_))));
    }

    #[test]
    fn metrics_identity_over_grid() {
        for actual in 0..25i64 {
            for limit in 0..25i64 {
                let (u, o, n) = compute_service_metrics(actual, limit).unwrap();
                assert_eq!(n as i64, (actual - limit).abs());
                assert_eq!(n, u + o);
                assert!(u == 0 || o == 0);
            }
        }
    }

    // -- step_hour -----------------------------------------------------------------

    /// One cell, one hour, the default A/B mapping. QCI demand:
    /// 1 → 6 UEs, 2 → 10 UEs, 5 → 2 UEs, 9 → 12 UEs; A = {1,9} = 18, B = {2,5} = 12.
    fn demand_rows(hour: u32, c: CellId) -> Vec<KpiSample> {
        let specs = [
            (crate::types::BearerClass::Qci1, 6.0, 0.06),
            (crate::types::BearerClass::Qci2, 10.0, 4.0),
            (crate::types::BearerClass::Qci5, 2.0, 0.0),
            (crate::types::BearerClass::Qci9, 12.0, 9.94),
        ];
        specs
            .iter()
            .map(|&(qci, ues, vol)| KpiSample {
                hour,
                cell: c,
                qci,
                active_ues: ues,
                volume_gb: vol,
                dl_prb_util_pct: 70.0,
            })
            .collect()
    }

    fn two_slice_node(c: CellId, a: (u32, f64), b: (u32, f64)) -> NodeSliceConfig {
        let mut node = NodeSliceConfig::default();
        node.seed(c, "A", SliceParams { max_active_ues: a.0, prb_quota_pct: a.1 });
        node.seed(c, "B", SliceParams { max_active_ues: b.0, prb_quota_pct: b.1 });
        node
    }

    #[test]
    fn step_hour_no_underserving_when_limits_cover_demand() {
        let c = cell(0, 0);
        let node = two_slice_node(c, (20, 60.0), (15, 40.0));
        let mapping = SliceMapping::default_ab();
        let (metrics, events) = step_hour(5, &node, &demand_rows(5, c), &mapping).unwrap();
        assert_eq!(metrics.len(), 2);
        assert!(metrics.iter().all(|m| m.under_served == 0));
        // A: actual 18, limit 20 → over 2. B: actual 12, limit 15 → over 3.
        assert_eq!(metrics[0].over_served, 2);
        assert_eq!(metrics[1].over_served, 3);

        // Nothing clipped: feedback equals demand.
        assert_eq!(events.len(), 1);
        let fb = ingest_ves_event(&events[0]).unwrap();
        for (s, d) in fb.iter().zip(demand_rows(5, c)) {
            assert!((s.active_ues - d.active_ues).abs() < 1e-12);
            assert!((s.volume_gb - d.volume_gb).abs() < 1e-12);
        }
    }

    #[test]
    fn step_hour_zero_limit_starves_slice() {
        let c = cell(0, 0);
        let node = two_slice_node(c, (0, 0.0), (15, 40.0));
        let mapping = SliceMapping::default_ab();
        let (metrics, events) = step_hour(5, &node, &demand_rows(5, c), &mapping).unwrap();
        let a = &metrics[0];
        assert_eq!((a.under_served, a.over_served), (18, 0));

        // A's QCIs report zero served UEs and volume.
        let fb = ingest_ves_event(&events[0]).unwrap();
        for s in &fb {
            let starved = matches!(
                s.qci,
                crate::types::BearerClass::Qci1 | crate::types::BearerClass::Qci9
            );
            if starved {
                assert_eq!(s.active_ues, 0.0);
                assert_eq!(s.volume_gb, 0.0);
            } else {
                assert!(s.active_ues > 0.0);
            }
        }
    }

    #[test]
    fn step_hour_clips_proportionally_and_respects_quota() {
        let c = cell(0, 0);
        // A limited to 9 of 18 demanded UEs; quota 20 of ~70% PRB demand.
        let node = two_slice_node(c, (9, 20.0), (15, 40.0));
        let mapping = SliceMapping::default_ab();
        let (_, events) = step_hour(5, &node, &demand_rows(5, c), &mapping).unwrap();
        let fb = ingest_ves_event(&events[0]).unwrap();
        // QCI1 demand 6 → served 3, QCI9 demand 12 → served 6 (ratio 0.5).
        let qci1 = fb.iter().find(|s| s.qci == crate::types::BearerClass::Qci1).unwrap();
        let qci9 = fb.iter().find(|s| s.qci == crate::types::BearerClass::Qci9).unwrap();
        assert!((qci1.active_ues - 3.0).abs() < 1e-12);
        assert!((qci9.active_ues - 6.0).abs() < 1e-12);
        // Served cell PRB ≤ Σ quotas and ≤ 100.
        assert!(fb[0].dl_prb_util_pct <= 60.0 + 1e-9);
    }

    #[test]
    fn step_hour_missing_demand_is_simulation_error() {
        let c = cell(0, 0);
        let mut node = two_slice_node(c, (5, 10.0), (5, 10.0));
        // Configure an extra cell with no demand rows.
        node.seed(cell(0, 1), "A", SliceParams { max_active_ues: 1, prb_quota_pct: 1.0 });
        node.seed(cell(0, 1), "B", SliceParams { max_active_ues: 1, prb_quota_pct: 1.0 });
        let err = step_hour(5, &node, &demand_rows(5, c), &SliceMapping::default_ab()).unwrap_err();
        assert!(matches!(err, Error::Simulation(_)));

        // And the converse: demand for a cell the node does not configure.
        let node = two_slice_node(cell(7, 7), (5, 10.0), (5, 10.0));
        let err = step_hour(5, &node, &demand_rows(5, c), &SliceMapping::default_ab()).unwrap_err();
        assert!(matches!(err, Error::Simulation(_)));
    }

    // -- runs ------------------------------------------------------------------------

    fn small_scenario(sigma: f64, seed: u64) -> Dataset {
        let config = GeneratorConfig {
            n_enb: 1,
            cells_per_enb: 2,
            days: 6,
            seed,
            sigma,
            ..GeneratorConfig::default_scenario(seed)
        };
        generate_synthetic_dataset(&config).unwrap()
    }

    fn naive_models(
        series: &[SliceSeries],
        train_len: usize,
    ) -> BTreeMap<String, SeriesForecaster> {
        series
            .iter()
            .map(|s| {
                let model = train_seasonal_naive_values(
                    &s.active_ues[..train_len],
                    &s.series_id(),
                    &NaiveConfig::default(),
                )
                .unwrap();
                let prb_per_ue_pct = crate::rapp::estimate_prb_per_ue(s, train_len).unwrap();
                (s.series_id(), SeriesForecaster { model, prb_per_ue_pct })
            })
            .collect()
    }

    #[test]
    fn static_upper_envelope_never_underserves() {
        let dataset = small_scenario(0.05, 3);
        let mapping = SliceMapping::default_ab();
        let series = tag_and_aggregate(&dataset, &mapping).unwrap();
        let train_len = 96;
        let setup = RunSetup { dataset: &dataset, mapping: &mapping, train_len };

        // Limit = max demand over the whole run, per series.
        let limits: BTreeMap<String, u32> = series
            .iter()
            .map(|s| {
                let max = s.active_ues.iter().cloned().fold(0.0, f64::max);
                (s.series_id(), max.ceil() as u32)
            })
            .collect();
        let coeffs = estimate_prb_coefficients(&series, train_len).unwrap();
        let report = run_static(&setup, &limits, &coeffs, &LoopConfig::default()).unwrap();

        assert_eq!(report.grand.under_served, 0);
        assert_eq!(report.grand.non_optimal, report.grand.over_served);
        let expected_over: u64 = report
            .rows
            .iter()
            .map(|r| (r.limit_ues as u64) - (r.actual_ues as u64))
            .sum();
        assert_eq!(report.grand.over_served, expected_over);
        assert_eq!(report.rows.len(), report.test_hours as usize * series.len());
    }

    #[test]
    fn totals_equal_row_sums() {
        let dataset = small_scenario(0.05, 4);
        let mapping = SliceMapping::default_ab();
        let series = tag_and_aggregate(&dataset, &mapping).unwrap();
        let train_len = 96;
        let setup = RunSetup { dataset: &dataset, mapping: &mapping, train_len };
        let limits = default_static_limits(&series, train_len).unwrap();
        let coeffs = estimate_prb_coefficients(&series, train_len).unwrap();
        let report = run_static(&setup, &limits, &coeffs, &LoopConfig::default()).unwrap();

        let mut under = 0u64;
        let mut over = 0u64;
        for r in &report.rows {
            under += r.under_served as u64;
            over += r.over_served as u64;
        }
        assert_eq!(report.grand.under_served, under);
        assert_eq!(report.grand.over_served, over);
        assert_eq!(report.grand.non_optimal, under + over);
        let slice_sum: u64 = report.per_slice.values().map(|t| t.non_optimal).sum();
        assert_eq!(report.grand.non_optimal, slice_sum);
    }

    #[test]
    fn dynamic_zero_noise_with_naive_is_near_exact() {
        let dataset = small_scenario(0.0, 5);
        let mapping = SliceMapping::default_ab();
        let series = tag_and_aggregate(&dataset, &mapping).unwrap();
        let train_len = 96;
        let setup = RunSetup { dataset: &dataset, mapping: &mapping, train_len };
        let models = naive_models(&series, train_len);
        let static_limits = default_static_limits(&series, train_len).unwrap();
        let config = LoopConfig::default();

        let dynamic = run_dynamic(&setup, &models, &static_limits, &config).unwrap();
        // Zero-noise periodic demand + seasonal-naive forecasts: the limit
        // is ceil(actual), so the only slack is the ceiling residue.
        let avg = dynamic.grand.non_optimal as f64 / dynamic.rows.len() as f64;
        assert!(avg < 1.0, "average non-optimal {avg} per (slice, cell, hour)");
        assert_eq!(dynamic.grand.under_served, 0);

        // And the direction vs the static baseline.
        let coeffs = estimate_prb_coefficients(&series, train_len).unwrap();
        let static_report = run_static(&setup, &static_limits, &coeffs, &config).unwrap();
        assert!(dynamic.grand.non_optimal < static_report.grand.non_optimal);
    }

    #[test]
    fn dynamic_is_deterministic_and_csv_is_stable() {
        let dataset = small_scenario(0.05, 6);
        let mapping = SliceMapping::default_ab();
        let series = tag_and_aggregate(&dataset, &mapping).unwrap();
        let train_len = 96;
        let setup = RunSetup { dataset: &dataset, mapping: &mapping, train_len };
        let models = naive_models(&series, train_len);
        let static_limits = default_static_limits(&series, train_len).unwrap();
        let config = LoopConfig::default();

        let a = run_dynamic(&setup, &models, &static_limits, &config).unwrap();
        let b = run_dynamic(&setup, &models, &static_limits, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.totals_json().unwrap(), b.totals_json().unwrap());
        assert!(a.to_csv().starts_with("hour,slice,enb,cell,actual,limit,under,over,non_optimal\n"));
    }

    #[test]
    fn policy_ordering_puts_quota_raises_last_per_cell() {
        use crate::rapp::{AdaptiveLimit, Layer, LayerDescriptor, RanSliceDescriptor};
        let mk = |slice: &str, c: CellId, dir: Direction| SlicePolicy {
            cell: c,
            limit: AdaptiveLimit {
                slice_id: slice.into(),
                cell: c,
                hour: 0,
                max_active_ues: 1,
                prb_quota_pct: 1.0,
            },
            descriptor: RanSliceDescriptor {
                slice_id: slice.into(),
                plmn_id: "40486".into(),
                layer_descriptors: vec![LayerDescriptor {
                    layer: Layer::MacScheduler,
                    parameter: SliceParameter::PrbQuotaPct,
                    value: 1.0,
                    direction: dir,
                }],
                timestamp_hour: 0,
            },
        };
        let c0 = cell(0, 0);
        let c1 = cell(0, 1);
        let mut policies = vec![
            mk("A", c0, Direction::ScaleUp),
            mk("B", c0, Direction::ScaleDown),
            mk("A", c1, Direction::ScaleUp),
            mk("B", c1, Direction::ScaleDown),
        ];
        order_policies_for_apply(&mut policies);
        let order: Vec<(CellId, String)> =
            policies.iter().map(|p| (p.cell, p.limit.slice_id.clone())).collect();
        assert_eq!(
            order,
            vec![
                (c0, "B".to_string()),
                (c0, "A".to_string()),
                (c1, "B".to_string()),
                (c1, "A".to_string()),
            ]
        );
    }
}
