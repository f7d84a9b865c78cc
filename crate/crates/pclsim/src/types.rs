//! Shared domain types: bearer classes, cell identifiers, KPI samples and
//! datasets.
//!
//! A dataset is an hour-by-hour table of per-(cell, QCI) KPIs — the same
//! three measurements an SMO collector would assemble from O1 telemetry:
//! mean active UEs, downlink volume, and cell-level PRB utilization.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// LTE QoS Class Identifier used as the per-bearer traffic class.
///
/// The four classes modeled are conversational voice (QCI 1), live video
/// (QCI 2), IMS signalling (QCI 5) and best-effort data (QCI 9).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BearerClass {
    Qci1,
    Qci2,
    Qci5,
    Qci9,
}

impl BearerClass {
    pub const ALL: [BearerClass; 4] = [
        BearerClass::Qci1,
        BearerClass::Qci2,
        BearerClass::Qci5,
        BearerClass::Qci9,
    ];

    /// Numeric QCI value.
    pub fn qci(self) -> u8 {
        match self {
            BearerClass::Qci1 => 1,
            BearerClass::Qci2 => 2,
            BearerClass::Qci5 => 5,
            BearerClass::Qci9 => 9,
        }
    }

    /// Parses a numeric QCI value.
    pub fn from_qci(qci: u8) -> Option<BearerClass> {
        match qci {
            1 => Some(BearerClass::Qci1),
            2 => Some(BearerClass::Qci2),
            5 => Some(BearerClass::Qci5),
            9 => Some(BearerClass::Qci9),
            _ => None,
        }
    }
}

impl fmt::Display for BearerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.qci())
    }
}

impl Serialize for BearerClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.qci())
    }
}

impl<'de> Deserialize<'de> for BearerClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        BearerClass::from_qci(v)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid QCI {v}, expected 1|2|5|9")))
    }
}

/// Identifies one cell of one eNB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub enb: u32,
    pub cell: u32,
}

impl CellId {
    pub fn new(enb: u32, cell: u32) -> CellId {
        CellId { enb, cell }
    }

    /// Canonical string form used in VES `sourceName` and wire frames.
    pub fn name(&self) -> String {
        format!("enb{}-cell{}", self.enb, self.cell)
    }

    /// Parses the canonical `enb<i>-cell<j>` form.
    pub fn parse_name(s: &str) -> Result<CellId> {
        let err = || Error::Parse(format!("malformed cell name {s:?}, expected enb<i>-cell<j>"));
        let rest = s.strip_prefix("enb").ok_or_else(err)?;
        let (enb, cell) = rest.split_once("-cell").ok_or_else(err)?;
        Ok(CellId {
            enb: enb.parse().map_err(|_| err())?,
            cell: cell.parse().map_err(|_| err())?,
        })
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "enb{}-cell{}", self.enb, self.cell)
    }
}

/// One hour of KPIs for one (cell, QCI) pair.
///
/// `dl_prb_util_pct` is the *cell-level* total utilization, duplicated across
/// the four QCI rows that share (hour, cell); per-bearer attribution happens
/// downstream in the KPI pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpiSample {
    pub hour: u32,
    pub cell: CellId,
    pub qci: BearerClass,
    pub active_ues: f64,
    pub volume_gb: f64,
    pub dl_prb_util_pct: f64,
}

/// A gapless, sorted collection of KPI samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Sorted by (hour, cell, qci); exactly `hours × cells × 4` entries.
    pub samples: Vec<KpiSample>,
    /// Number of distinct hours covered (hours are contiguous).
    pub hours: u32,
    /// All cells present, sorted.
    pub cells: Vec<CellId>,
    /// Generator seed when synthetic; absent for loaded data.
    pub seed: Option<u64>,
}

impl Dataset {
    /// First hour of the dataset (0 for freshly generated data; the test
    /// half of a split keeps its original hour numbering).
    pub fn start_hour(&self) -> u32 {
        self.samples.first().map_or(0, |s| s.hour)
    }

    /// Samples for one absolute hour, in (cell, qci) order.
    pub fn hour_slice(&self, hour: u32) -> &[KpiSample] {
        let per_hour = self.cells.len() * BearerClass::ALL.len();
        let idx = (hour - self.start_hour()) as usize * per_hour;
        &self.samples[idx..idx + per_hour]
    }

    /// Checks every structural invariant; used after loads and by tests.
    pub fn validate(&self) -> Result<()> {
        let per_hour = self.cells.len() * BearerClass::ALL.len();
        if self.samples.len() != self.hours as usize * per_hour {
            return Err(Error::Parse(format!(
                "expected {} samples ({} hours x {} cells x 4 QCIs), found {}",
                self.hours as usize * per_hour,
                self.hours,
                self.cells.len(),
                self.samples.len()
            )));
        }
        let start = self.start_hour();
        let mut expect = Vec::with_capacity(per_hour);
        for cell in &self.cells {
            for qci in BearerClass::ALL {
                expect.push((*cell, qci));
            }
        }
        for (i, s) in self.samples.iter().enumerate() {
            let hour = start + (i / per_hour) as u32;
            let (cell, qci) = expect[i % per_hour];
            if s.hour != hour || s.cell != cell || s.qci != qci {
                return Err(Error::Parse(format!(
                    "sample {i} out of order: found (hour {}, {}, qci {}), expected (hour {hour}, {cell}, qci {qci})",
                    s.hour, s.cell, s.qci
                )));
            }
            if !(0.0..=100.0).contains(&s.dl_prb_util_pct) {
                return Err(Error::Parse(format!(
                    "sample {i}: dl_prb_util_pct {} outside [0,100]",
                    s.dl_prb_util_pct
                )));
            }
            if s.active_ues < 0.0 || s.volume_gb < 0.0 {
                return Err(Error::Parse(format!("sample {i}: negative KPI value")));
            }
        }
        // PRB duplication across the QCI rows of one (hour, cell).
        for chunk in self.samples.chunks(BearerClass::ALL.len()) {
            let first = chunk[0].dl_prb_util_pct;
            if chunk.iter().any(|s| s.dl_prb_util_pct != first) {
                return Err(Error::Parse(format!(
                    "dl_prb_util_pct differs across QCI rows of hour {} {}",
                    chunk[0].hour, chunk[0].cell
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bearer_class_round_trips_qci_numbers() {
        for b in BearerClass::ALL {
            assert_eq!(BearerClass::from_qci(b.qci()), Some(b));
        }
        assert_eq!(BearerClass::from_qci(3), None);
    }

    #[test]
    fn cell_id_name_round_trip() {
        let c = CellId::new(16, 17);
        assert_eq!(c.name(), "enb16-cell17");
        assert_eq!(CellId::parse_name(&c.name()).unwrap(), c);
        assert!(CellId::parse_name("enbX-cell0").is_err());
        assert!(CellId::parse_name("cell0-enb1").is_err());
        assert!(CellId::parse_name("enb1cell0").is_err());
    }

    #[test]
    fn qci_serde_uses_numbers() {
        let j = serde_json::to_string(&BearerClass::Qci5).unwrap();
        assert_eq!(j, "5");
        let b: BearerClass = serde_json::from_str("9").unwrap();
        assert_eq!(b, BearerClass::Qci9);
        assert!(serde_json::from_str::<BearerClass>("4").is_err());
    }
}
