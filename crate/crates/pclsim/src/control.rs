//! The transport and enforcement legs of the loop: A1 policy delivery
//! (Non-RT RIC → Near-RT RIC), xApp translation to E2 control messages,
//! E2 application to node state, and the O2 client/server pair mutating
//! O-Cloud state.
//!
//! Every message crosses component boundaries as an immutable JSON frame
//! tagged with a `schema` field. The default transport is an in-process
//! queue; an optional loopback TCP mode carries the identical
//! newline-delimited frames with identical semantics.

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pipeline::VesEvent;
use crate::rapp::{CloudScalingDirective, Direction, RanSliceDescriptor, SliceParameter, SliceState};
use crate::types::CellId;
use crate::util::proportional_rescale;

// ---------------------------------------------------------------------------
// Node and cloud state
// ---------------------------------------------------------------------------

/// Enforced parameters of one slice on one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SliceParams {
    pub max_active_ues: u32,
    pub prb_quota_pct: f64,
}

/// Slice configuration of the emulated E2 nodes: enforced parameters per
/// (cell, slice) plus, per cell, the sequence number of the last applied
/// control message (for staleness rejection).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NodeSliceConfig {
    pub entries: BTreeMap<CellId, BTreeMap<String, SliceParams>>,
    pub versions: BTreeMap<CellId, u64>,
}

impl NodeSliceConfig {
    /// Seeds the (cell, slice) entry, leaving the cell's version untouched.
    pub fn seed(&mut self, cell: CellId, slice_id: &str, params: SliceParams) {
        self.entries.entry(cell).or_default().insert(slice_id.to_string(), params);
    }

    pub fn get(&self, cell: CellId, slice_id: &str) -> Option<SliceParams> {
        self.entries.get(&cell).and_then(|m| m.get(slice_id)).copied()
    }

    /// Last applied sequence number for `cell` (0 when nothing applied yet).
    pub fn version(&self, cell: CellId) -> u64 {
        self.versions.get(&cell).copied().unwrap_or(0)
    }

    /// Enforced state of one slice as the rApp sees it.
    pub fn slice_state(&self, cell: CellId, slice_id: &str) -> Option<SliceState> {
        self.get(cell, slice_id).map(|p| SliceState {
            slice_id: slice_id.to_string(),
            cell,
            max_active_ues: p.max_active_ues,
            prb_quota_pct: p.prb_quota_pct,
        })
    }

    /// Sum of slice quotas on one cell.
    pub fn cell_quota_sum(&self, cell: CellId) -> f64 {
        self.entries
            .get(&cell)
            .map(|m| m.values().map(|p| p.prb_quota_pct).sum())
            .unwrap_or(0.0)
    }

    /// Checks the per-cell conservation invariant (Σ quotas ≤ 100).
    pub fn validate(&self) -> Result<()> {
        for (cell, slices) in &self.entries {
            let sum: f64 = slices.values().map(|p| p.prb_quota_pct).sum();
            if sum > 100.0 {
                return Err(Error::Protocol(format!(
                    "cell {cell}: slice quotas sum to {sum}, exceeding 100"
                )));
            }
            for (slice_id, p) in slices {
                if !p.prb_quota_pct.is_finite() || p.prb_quota_pct < 0.0 {
                    return Err(Error::Protocol(format!(
                        "cell {cell} slice {slice_id}: invalid quota {}",
                        p.prb_quota_pct
                    )));
                }
            }
        }
        Ok(())
    }
}

/// O-Cloud footprint of one slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CloudSliceState {
    pub vm_count: u32,
    pub cpu_units: u32,
    pub mem_units: u32,
    pub active: bool,
}

/// O-Cloud state across slices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CloudState {
    pub slices: BTreeMap<String, CloudSliceState>,
}

impl CloudState {
    /// Checks the deactivation invariant on every slice entry.
    pub fn validate(&self) -> Result<()> {
        for (slice_id, s) in &self.slices {
            if !s.active && (s.vm_count != 0 || s.cpu_units != 0 || s.mem_units != 0) {
                return Err(Error::Protocol(format!(
                    "cloud slice {slice_id}: inactive but holds resources"
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Messages and frames
// ---------------------------------------------------------------------------

/// E2 control event kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum E2Event {
    #[serde(rename = "SET_SLICE_PARAMS")]
    SetSliceParams,
}

/// One E2 control message: the event plus the absolute state it installs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct E2ControlMessage {
    pub event: E2Event,
    pub state: SliceState,
    pub sequence_no: u64,
    pub timestamp_hour: u32,
}

impl E2ControlMessage {
    /// Checks parameter ranges (counts are unsigned by construction;
    /// quotas must lie in [0, 100]).
    pub fn validate(&self) -> Result<()> {
        let q = self.state.prb_quota_pct;
        if !q.is_finite() || !(0.0..=100.0).contains(&q) {
            return Err(Error::Protocol(format!(
                "E2 message for {}/{}: quota {q} outside [0, 100]",
                self.state.slice_id, self.state.cell
            )));
        }
        Ok(())
    }
}

/// One inter-component JSON frame; the `schema` tag names the interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schema")]
pub enum Frame {
    /// Non-RT RIC → Near-RT RIC: one A1 policy plus the cells it targets.
    #[serde(rename = "a1-policy-v1")]
    A1Policy {
        #[serde(rename = "targetCells")]
        target_cells: Vec<String>,
        policy: RanSliceDescriptor,
    },
    /// Near-RT RIC → E2 node.
    #[serde(rename = "e2-control-v1")]
    E2Control {
        #[serde(flatten)]
        message: E2ControlMessage,
    },
    /// Non-RT RIC → O-Cloud.
    #[serde(rename = "o2-scale-v1")]
    O2Scale {
        #[serde(flatten)]
        directive: CloudScalingDirective,
    },
    /// E2 node → VES collector (O1 measurement feedback).
    #[serde(rename = "o1-ves-v1")]
    O1Ves {
        #[serde(flatten)]
        event: VesEvent,
    },
}

impl Frame {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Frame> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Serializes frames as newline-delimited JSON (one frame per line).
pub fn frames_to_ndjson(frames: &[Frame]) -> Result<String> {
    let mut out = String::new();
    for f in frames {
        out.push_str(&f.to_json()?);
        out.push('\n');
    }
    Ok(out)
}

/// Parses newline-delimited JSON frames (blank lines ignored).
pub fn frames_from_ndjson(s: &str) -> Result<Vec<Frame>> {
    s.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(Frame::from_json)
        .collect()
}

// ---------------------------------------------------------------------------
// In-process transport
// ---------------------------------------------------------------------------

/// Bounded FIFO inbox owned by one component's event loop.
#[derive(Debug, Clone)]
pub struct Inbox<T> {
    queue: VecDeque<T>,
    capacity: usize,
}

impl<T> Inbox<T> {
    pub fn new(capacity: usize) -> Inbox<T> {
        Inbox { queue: VecDeque::new(), capacity }
    }

    /// Enqueues one item; a full inbox is backpressure, not loss.
    pub fn push(&mut self, item: T) -> Result<()> {
        if self.queue.len() >= self.capacity {
            return Err(Error::Backpressure(format!(
                "inbox full ({} messages)",
                self.capacity
            )));
        }
        self.queue.push_back(item);
        Ok(())
    }

    pub fn pop(&mut self) -> Option<T> {
        self.queue.pop_front()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

impl<T> Default for Inbox<T> {
    /// Default capacity comfortably holds one simulated hour of traffic.
    fn default() -> Inbox<T> {
        Inbox::new(4096)
    }
}

/// Delivery receipt for one published A1 policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct A1Receipt {
    /// SHA-256 of the serialized policy JSON, hex-encoded; identical
    /// descriptors yield identical digests across runs.
    pub digest: String,
}

/// Serializes `descriptor` to the A1 JSON format and enqueues it (with its
/// routing) to the Near-RT RIC inbox.
pub fn a1_publish(
    descriptor: &RanSliceDescriptor,
    target_cells: &[CellId],
    inbox: &mut Inbox<Frame>,
) -> Result<A1Receipt> {
    let json = descriptor.to_a1_json()?;
    let digest = hex_digest(json.as_bytes());
    inbox.push(Frame::A1Policy {
        target_cells: target_cells.iter().map(CellId::name).collect(),
        policy: descriptor.clone(),
    })?;
    Ok(A1Receipt { digest })
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    let mut s = String::with_capacity(out.len() * 2);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

// ---------------------------------------------------------------------------
// xApp translation and E2 application
// ---------------------------------------------------------------------------

/// Per-cell E2 sequence counters owned by the translating xApp.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SequenceCounters {
    next: BTreeMap<CellId, u64>,
}

impl SequenceCounters {
    pub fn new() -> SequenceCounters {
        SequenceCounters::default()
    }

    /// Returns the next sequence number for `cell` (streams start at 1).
    pub fn next(&mut self, cell: CellId) -> u64 {
        let n = self.next.entry(cell).or_insert(0);
        *n += 1;
        *n
    }
}

/// Translates one A1 policy into absolute E2 control messages, one per
/// targeted cell. Directions are applied to the cell's current config:
/// SCALE_UP/SCALE_DOWN install the descriptor value as the new absolute
/// target, HOLD changes nothing (a HOLD-only descriptor yields no messages).
pub fn xapp_translate(
    descriptor: &RanSliceDescriptor,
    current: &NodeSliceConfig,
    cells: &[CellId],
    seqs: &mut SequenceCounters,
) -> Result<Vec<E2ControlMessage>> {
    descriptor.validate()?;
    let changes: Vec<_> = descriptor
        .layer_descriptors
        .iter()
        .filter(|ld| ld.direction != Direction::Hold)
        .collect();
    if changes.is_empty() {
        return Ok(Vec::new());
    }

    let mut messages = Vec::with_capacity(cells.len());
    for &cell in cells {
        let params = current.get(cell, &descriptor.slice_id).ok_or_else(|| {
            Error::Translation(format!(
                "cell {cell} has no slice {:?} to scale",
                descriptor.slice_id
            ))
        })?;
        let mut target = params;
        for ld in &changes {
            match ld.parameter {
                SliceParameter::MaxActiveUes => {
                    if ld.value.fract() != 0.0 {
                        return Err(Error::Translation(format!(
                            "MAX_ACTIVE_UES target {} is not an integer",
                            ld.value
                        )));
                    }
                    target.max_active_ues = ld.value as u32;
                }
                SliceParameter::PrbQuotaPct => target.prb_quota_pct = ld.value,
            }
        }
        messages.push(E2ControlMessage {
            event: E2Event::SetSliceParams,
            state: SliceState {
                slice_id: descriptor.slice_id.clone(),
                cell,
                max_active_ues: target.max_active_ues,
                prb_quota_pct: target.prb_quota_pct,
            },
            sequence_no: seqs.next(cell),
            timestamp_hour: descriptor.timestamp_hour,
        });
    }
    Ok(messages)
}

/// What happened to one E2 control message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApplyOutcome {
    Applied,
    /// Sequence number not newer than the cell's version; state unchanged.
    Stale,
}

/// Result of [`e2_apply`]: the (possibly updated) node config and whether
/// the message was applied or rejected as stale.
#[derive(Debug, Clone, PartialEq)]
pub struct E2ApplyResult {
    pub config: NodeSliceConfig,
    pub outcome: ApplyOutcome,
}

/// Applies one E2 control message to node state.
///
/// Stale messages (sequence number ≤ the cell's version) leave the state
/// unchanged and report [`ApplyOutcome::Stale`]; out-of-range parameters are
/// protocol errors. When the new per-cell quota sum would exceed 100, all
/// slice quotas in that cell are rescaled proportionally to sum to 100.
pub fn e2_apply(msg: &E2ControlMessage, node: &NodeSliceConfig) -> Result<E2ApplyResult> {
    msg.validate()?;
    let cell = msg.state.cell;
    if msg.sequence_no <= node.version(cell) {
        return Ok(E2ApplyResult { config: node.clone(), outcome: ApplyOutcome::Stale });
    }

    let mut config = node.clone();
    let slices = config.entries.entry(cell).or_default();
    slices.insert(
        msg.state.slice_id.clone(),
        SliceParams {
            max_active_ues: msg.state.max_active_ues,
            prb_quota_pct: msg.state.prb_quota_pct,
        },
    );
    let mut quotas: Vec<f64> = slices.values().map(|p| p.prb_quota_pct).collect();
    proportional_rescale(&mut quotas, 100.0);
    for (p, q) in slices.values_mut().zip(quotas) {
        p.prb_quota_pct = q;
    }
    config.versions.insert(cell, msg.sequence_no);
    Ok(E2ApplyResult { config, outcome: ApplyOutcome::Applied })
}

// ---------------------------------------------------------------------------
// O2 scaling
// ---------------------------------------------------------------------------

/// Applies one O-Cloud scaling directive: the slice entry is set to the
/// directive's targets; deactivation zeroes the entry, activation restores
/// whatever targets the directive carries. Idempotent.
pub fn o2_scale(directive: &CloudScalingDirective, cloud: &CloudState) -> Result<CloudState> {
    directive.validate()?;
    let mut next = cloud.clone();
    next.slices.insert(
        directive.slice_id.clone(),
        CloudSliceState {
            vm_count: directive.target_vm_count,
            cpu_units: directive.target_cpu_units,
            mem_units: directive.target_mem_units,
            active: directive.activate,
        },
    );
    next.validate()?;
    Ok(next)
}

// ---------------------------------------------------------------------------
// Loopback TCP transport
// ---------------------------------------------------------------------------

/// Sends frames to a listening peer as newline-delimited JSON and closes
/// the connection.
pub fn send_frames<A: ToSocketAddrs>(addr: A, frames: &[Frame]) -> Result<()> {
    let mut stream = TcpStream::connect(addr)?;
    stream.write_all(frames_to_ndjson(frames)?.as_bytes())?;
    stream.flush()?;
    Ok(())
}

/// Accepts one connection on `listener` and reads frames until the peer
/// closes. Semantics identical to the in-process queue: order preserved,
/// content untouched.
pub fn recv_frames(listener: &TcpListener) -> Result<Vec<Frame>> {
    let (stream, _) = listener.accept()?;
    let reader = BufReader::new(stream);
    let mut frames = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        frames.push(Frame::from_json(&line)?);
    }
    Ok(frames)
}
