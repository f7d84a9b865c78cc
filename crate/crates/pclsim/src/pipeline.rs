//! SMO-side KPI pipeline: VES event ingest, per-bearer PRB attribution, and
//! slice-level aggregation.
//!
//! The collector receives one VES measurement event per (hour, cell) over
//! O1, converts it back into per-QCI KPI samples ("minimal processing"),
//! attributes the cell-level PRB utilization to bearers in proportion to
//! their delivered volume, tags each bearer with its slice, and emits a
//! per-(slice, cell) time series for the forecaster.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::types::{BearerClass, CellId, Dataset, KpiSample};

/// One O1 VES measurement event: everything one cell reports for one hour.
#[derive(Debug, Clone, PartialEq)]
pub struct VesEvent {
    /// Cell identifier string, canonical form `enb<i>-cell<j>`.
    pub source_name: String,
    pub start_epoch_hour: u32,
    /// Metric name → value; must contain `active_ues_qci<k>` and
    /// `volume_gb_qci<k>` for k ∈ {1,2,5,9} plus `dl_prb_util_pct`.
    pub measurement_fields: BTreeMap<String, f64>,
}

impl VesEvent {
    /// Builds the event a cell would report for the four samples of one
    /// (hour, cell).
    pub fn from_samples(samples: &[KpiSample]) -> Result<VesEvent> {
        if samples.len() != 4 {
            return Err(Error::Contract(format!(
                "expected 4 samples for one (hour, cell), got {}",
                samples.len()
            )));
        }
        let (hour, cell) = (samples[0].hour, samples[0].cell);
        let mut fields = BTreeMap::new();
        for s in samples {
            if s.hour != hour || s.cell != cell {
                return Err(Error::Contract(
                    "samples span multiple (hour, cell) pairs".into(),
                ));
            }
            fields.insert(format!("active_ues_qci{}", s.qci), s.active_ues);
            fields.insert(format!("volume_gb_qci{}", s.qci), s.volume_gb);
        }
        fields.insert("dl_prb_util_pct".to_string(), samples[0].dl_prb_util_pct);
        Ok(VesEvent {
            source_name: cell.name(),
            start_epoch_hour: hour,
            measurement_fields: fields,
        })
    }

    /// Serializes to the canonical single-line VES JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("VES serialization cannot fail")
    }

    /// Parses the canonical VES JSON (field order insensitive).
    pub fn from_json(s: &str) -> Result<VesEvent> {
        Ok(serde_json::from_str(s)?)
    }
}

impl<'de> Deserialize<'de> for VesEvent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = VesWireOwned::deserialize(d)?;
        Ok(VesEvent {
            source_name: wire.event.common_event_header.source_name,
            start_epoch_hour: wire.event.common_event_header.start_epoch_hour,
            measurement_fields: wire.event.measurement_fields.0,
        })
    }
}

// --- wire shapes -----------------------------------------------------------
//
// The emitted key order is fixed (active UEs, volumes, then the cell PRB
// total) so event files are byte-stable; parsing accepts any order.

impl Serialize for VesEvent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Header<'a> {
            #[serde(rename = "sourceName")]
            source_name: &'a str,
            #[serde(rename = "startEpochHour")]
            start_epoch_hour: u32,
        }
        struct Fields<'a>(&'a BTreeMap<String, f64>);
        impl Serialize for Fields<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut map = s.serialize_map(Some(self.0.len()))?;
                let canonical = ["active_ues_qci", "volume_gb_qci"];
                for prefix in canonical {
                    for qci in BearerClass::ALL {
                        let key = format!("{prefix}{qci}");
                        if let Some(v) = self.0.get(&key) {
                            map.serialize_entry(&key, v)?;
                        }
                    }
                }
                for (k, v) in self.0 {
                    let is_canonical =
                        k == "dl_prb_util_pct" || canonical.iter().any(|p| k.starts_with(p));
                    if !is_canonical {
                        map.serialize_entry(k, v)?;
                    }
                }
                if let Some(v) = self.0.get("dl_prb_util_pct") {
                    map.serialize_entry("dl_prb_util_pct", v)?;
                }
                map.end()
            }
        }
        #[derive(Serialize)]
        struct Event<'a> {
            #[serde(rename = "commonEventHeader")]
            header: Header<'a>,
            #[serde(rename = "measurementFields")]
            fields: Fields<'a>,
        }
        let mut st = s.serialize_map(Some(1))?;
        st.serialize_entry(
            "event",
            &Event {
                header: Header {
                    source_name: &self.source_name,
                    start_epoch_hour: self.start_epoch_hour,
                },
                fields: Fields(&self.measurement_fields),
            },
        )?;
        st.end()
    }
}

#[derive(Deserialize)]
struct VesWireOwned {
    event: VesWireEvent,
}

#[derive(Deserialize)]
struct VesWireEvent {
    #[serde(rename = "commonEventHeader")]
    common_event_header: VesWireHeader,
    #[serde(rename = "measurementFields")]
    measurement_fields: FieldMap,
}

#[derive(Deserialize)]
struct VesWireHeader {
    #[serde(rename = "sourceName")]
    source_name: String,
    #[serde(rename = "startEpochHour")]
    start_epoch_hour: u32,
}

struct FieldMap(BTreeMap<String, f64>);

impl<'de> Deserialize<'de> for FieldMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = FieldMap;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a map of metric name to number")
            }
            fn visit_map<A: MapAccess<'de>>(
                self,
                mut access: A,
            ) -> std::result::Result<FieldMap, A::Error> {
                let mut out = BTreeMap::new();
                while let Some((k, v)) = access.next_entry::<String, f64>()? {
                    out.insert(k, v);
                }
                Ok(FieldMap(out))
            }
        }
        d.deserialize_map(V)
    }
}

// --- ingest ----------------------------------------------------------------

/// Converts a dataset into the VES events its cells would have reported.
pub fn dataset_to_ves_events(dataset: &Dataset) -> Result<Vec<VesEvent>> {
    dataset
        .samples
        .chunks(4)
        .map(VesEvent::from_samples)
        .collect()
}

/// Ingests one VES event into four per-QCI KPI samples.
///
/// On failure the caller still owns the event and can dead-letter it; the
/// error carries the source and reason.
pub fn ingest_ves_event(event: &VesEvent) -> Result<Vec<KpiSample>> {
    let ingest_err = |reason: String| Error::Ingest {
        reason,
        source_name: event.source_name.clone(),
    };
    let cell = CellId::parse_name(&event.source_name)
        .map_err(|e| ingest_err(format!("malformed sourceName: {e}")))?;
    let get = |key: &str| -> Result<f64> {
        event
            .measurement_fields
            .get(key)
            .copied()
            .ok_or_else(|| ingest_err(format!("missing key {key:?}")))
    };
    let prb = get("dl_prb_util_pct")?;
    if !(0.0..=100.0).contains(&prb) {
        return Err(ingest_err(format!("dl_prb_util_pct {prb} outside [0,100]")));
    }
    let mut samples = Vec::with_capacity(4);
    for qci in BearerClass::ALL {
        let ues = get(&format!("active_ues_qci{qci}"))?;
        let vol = get(&format!("volume_gb_qci{qci}"))?;
        if ues < 0.0 || vol < 0.0 {
            return Err(ingest_err(format!("negative KPI for qci{qci}")));
        }
        samples.push(KpiSample {
            hour: event.start_epoch_hour,
            cell,
            qci,
            active_ues: ues,
            volume_gb: vol,
            dl_prb_util_pct: prb,
        });
    }
    Ok(samples)
}

// --- PRB attribution -------------------------------------------------------

/// Attributes a cell's total PRB utilization to its bearers in proportion to
/// delivered volume; zero total volume falls back to an even split.
///
/// Shares sum to the cell total by construction.
pub fn per_bearer_prb_share(samples_at_hour: &[KpiSample]) -> Result<BTreeMap<BearerClass, f64>> {
    if samples_at_hour.len() != 4 {
        return Err(Error::Contract(format!(
            "expected exactly 4 samples (one per QCI), got {}",
            samples_at_hour.len()
        )));
    }
    let (hour, cell, prb) = {
        let s = &samples_at_hour[0];
        (s.hour, s.cell, s.dl_prb_util_pct)
    };
    let mut seen = BTreeSet::new();
    for s in samples_at_hour {
        if s.hour != hour || s.cell != cell {
            return Err(Error::Contract(
                "samples span multiple (hour, cell) pairs".into(),
            ));
        }
        if !seen.insert(s.qci) {
            return Err(Error::Contract(format!("duplicate QCI {} in input", s.qci)));
        }
    }
    let total_volume: f64 = samples_at_hour.iter().map(|s| s.volume_gb).sum();
    let mut shares = BTreeMap::new();
    for s in samples_at_hour {
        let share = if total_volume == 0.0 {
            prb / 4.0
        } else {
            prb * s.volume_gb / total_volume
        };
        shares.insert(s.qci, share);
    }
    Ok(shares)
}

// --- slice mapping & aggregation -------------------------------------------

/// QCI → slice assignment; every QCI belongs to exactly one slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SliceMapping {
    pub slices: BTreeMap<String, BTreeSet<BearerClass>>,
}

impl SliceMapping {
    /// The default pairing: slice A carries voice + best-effort data
    /// (QCI 1, 9); slice B carries video + IMS signalling (QCI 2, 5).
    pub fn default_ab() -> SliceMapping {
        let mut slices = BTreeMap::new();
        slices.insert(
            "A".to_string(),
            BTreeSet::from([BearerClass::Qci1, BearerClass::Qci9]),
        );
        slices.insert(
            "B".to_string(),
            BTreeSet::from([BearerClass::Qci2, BearerClass::Qci5]),
        );
        SliceMapping { slices }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen: BTreeMap<BearerClass, &str> = BTreeMap::new();
        for (slice, qcis) in &self.slices {
            if qcis.is_empty() {
                return Err(Error::Config(format!("slice {slice:?} has no QCIs")));
            }
            for q in qcis {
                if let Some(other) = seen.insert(*q, slice) {
                    return Err(Error::Config(format!(
                        "QCI {q} mapped to both {other:?} and {slice:?}"
                    )));
                }
            }
        }
        for q in BearerClass::ALL {
            if !seen.contains_key(&q) {
                return Err(Error::Config(format!("QCI {q} not mapped to any slice")));
            }
        }
        Ok(())
    }

    /// Slice owning a bearer class (mapping must be valid).
    pub fn slice_of(&self, qci: BearerClass) -> Option<&str> {
        self.slices
            .iter()
            .find(|(_, qcis)| qcis.contains(&qci))
            .map(|(s, _)| s.as_str())
    }

    /// Sorted slice identifiers.
    pub fn slice_ids(&self) -> Vec<String> {
        self.slices.keys().cloned().collect()
    }
}

/// The three KPI channels of a slice series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    ActiveUes,
    VolumeGb,
    PrbSharePct,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::ActiveUes, Channel::VolumeGb, Channel::PrbSharePct];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::ActiveUes => "active_ues",
            Channel::VolumeGb => "volume_gb",
            Channel::PrbSharePct => "prb_share_pct",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hourly KPI series for one (slice, cell): the forecaster's unit of work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSeries {
    pub slice_id: String,
    pub cell: CellId,
    pub start_hour: u32,
    pub active_ues: Vec<f64>,
    pub volume_gb: Vec<f64>,
    pub prb_share_pct: Vec<f64>,
}

impl SliceSeries {
    pub fn len(&self) -> usize {
        self.active_ues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active_ues.is_empty()
    }

    pub fn hour_at(&self, index: usize) -> u32 {
        self.start_hour + index as u32
    }

    pub fn channel(&self, channel: Channel) -> &[f64] {
        match channel {
            Channel::ActiveUes => &self.active_ues,
            Channel::VolumeGb => &self.volume_gb,
            Channel::PrbSharePct => &self.prb_share_pct,
        }
    }

    /// Stable identifier used for model files and reports.
    pub fn series_id(&self) -> String {
        format!("{}/{}", self.slice_id, self.cell)
    }
}

/// Tags every sample with its slice and aggregates per (slice, cell):
/// active UEs and volume are summed over the slice's QCIs, PRB share over
/// the per-bearer attribution.
///
/// Output is sorted by (slice_id, cell).
pub fn tag_and_aggregate(dataset: &Dataset, mapping: &SliceMapping) -> Result<Vec<SliceSeries>> {
    mapping.validate()?;
    let start = dataset.start_hour();
    let hours = dataset.hours as usize;
    let mut series: BTreeMap<(String, CellId), SliceSeries> = BTreeMap::new();
    for slice_id in mapping.slices.keys() {
        for &cell in &dataset.cells {
            series.insert(
                (slice_id.clone(), cell),
                SliceSeries {
                    slice_id: slice_id.clone(),
                    cell,
                    start_hour: start,
                    active_ues: vec![0.0; hours],
                    volume_gb: vec![0.0; hours],
                    prb_share_pct: vec![0.0; hours],
                },
            );
        }
    }
    for chunk in dataset.samples.chunks(4) {
        let shares = per_bearer_prb_share(chunk)?;
        let idx = (chunk[0].hour - start) as usize;
        for s in chunk {
            let slice_id = mapping
                .slice_of(s.qci)
                .expect("validated mapping covers every QCI")
                .to_string();
            let entry = series
                .get_mut(&(slice_id, s.cell))
                .expect("series pre-populated for every (slice, cell)");
            entry.active_ues[idx] += s.active_ues;
            entry.volume_gb[idx] += s.volume_gb;
            entry.prb_share_pct[idx] += shares[&s.qci];
        }
    }
    Ok(series.into_values().collect())
}
