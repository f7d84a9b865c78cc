//! Synthetic traffic model: seedable per-(cell, QCI) KPI series with the same
//! columns a live network would report.
//!
//! Each (cell, qci) active-UE series is
//! `base × diurnal(hour mod 24) × weekly(day mod 7) × (1 + noise)` with
//! `noise ~ uniform(−σ, σ)` from a seeded generator. The diurnal component is
//! a raised-cosine bump taken to an integer power — a finite sum of cosine
//! harmonics of the 24 h fundamental — so off-peak hours sit near a
//! configurable floor and the busy hour forms a narrow evening peak, the
//! regime in which per-bearer cellular KPIs actually live. Volume and PRB
//! utilization derive from active UEs via per-QCI per-UE coefficients.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BearerClass, CellId, Dataset, KpiSample};

/// Shape and scaling constants for one QCI's synthetic series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QciProfile {
    /// Mean active UEs at the diurnal peak.
    pub base_ues: f64,
    /// Off-peak level as a fraction of `base_ues` (0..=1).
    pub floor: f64,
    /// Hour of day of the diurnal peak.
    pub peak_hour: f64,
    /// Integer exponent of the raised-cosine bump; larger = narrower peak.
    pub sharpness: u32,
    /// Hourly downlink volume per active UE, in GB.
    pub gb_per_ue: f64,
    /// PRB utilization contribution per active UE, in percentage points.
    pub prb_per_ue: f64,
}

impl QciProfile {
    fn validate(&self, name: &str) -> Result<()> {
        if self.base_ues < 0.0
            || !(0.0..=1.0).contains(&self.floor)
            || !(0.0..24.0).contains(&self.peak_hour)
            || self.sharpness < 1
            || self.gb_per_ue < 0.0
            || self.prb_per_ue < 0.0
        {
            return Err(Error::Config(format!("invalid profile for {name}")));
        }
        Ok(())
    }

    /// Diurnal multiplier for an hour of day, in (0, 1].
    pub fn diurnal(&self, hour_of_day: f64) -> f64 {
        let bump = (1.0 + (2.0 * std::f64::consts::PI * (hour_of_day - self.peak_hour) / 24.0).cos()) / 2.0;
        self.floor + (1.0 - self.floor) * bump.powi(self.sharpness as i32)
    }
}

/// Per-QCI profiles for the four modeled bearer classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSet {
    pub qci1: QciProfile,
    pub qci2: QciProfile,
    pub qci5: QciProfile,
    pub qci9: QciProfile,
}

impl ProfileSet {
    pub fn get(&self, qci: BearerClass) -> &QciProfile {
        match qci {
            BearerClass::Qci1 => &self.qci1,
            BearerClass::Qci2 => &self.qci2,
            BearerClass::Qci5 => &self.qci5,
            BearerClass::Qci9 => &self.qci9,
        }
    }
}

impl Default for ProfileSet {
    /// Defaults model a residential macro cell: voice (QCI 1) and video
    /// (QCI 2) peaking in the evening, IMS signalling (QCI 5) slightly
    /// earlier with negligible volume, best-effort data (QCI 9) dominating
    /// both volume and PRB load late in the evening.
    fn default() -> ProfileSet {
        ProfileSet {
            qci1: QciProfile {
                base_ues: 10.0,
                floor: 0.05,
                peak_hour: 20.0,
                sharpness: 26,
                gb_per_ue: 0.012,
                prb_per_ue: 0.30,
            },
            qci2: QciProfile {
                base_ues: 12.0,
                floor: 0.05,
                peak_hour: 20.0,
                sharpness: 26,
                gb_per_ue: 0.45,
                prb_per_ue: 1.50,
            },
            qci5: QciProfile {
                base_ues: 8.0,
                floor: 0.08,
                peak_hour: 19.0,
                sharpness: 20,
                gb_per_ue: 0.0,
                prb_per_ue: 0.10,
            },
            qci9: QciProfile {
                base_ues: 30.0,
                floor: 0.05,
                peak_hour: 21.0,
                sharpness: 26,
                gb_per_ue: 0.80,
                prb_per_ue: 1.60,
            },
        }
    }
}

fn default_weekly() -> [f64; 7] {
    [1.0; 7]
}

fn default_sigma() -> f64 {
    0.05
}

/// Full generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_enb: u32,
    pub cells_per_enb: u32,
    pub days: u32,
    /// Generator seed; harness configs may omit it because the scenario
    /// seed supersedes it there.
    #[serde(default)]
    pub seed: u64,
    /// Half-width of the uniform multiplicative noise.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Day-of-week multipliers (Mon..Sun); flat by default so the default
    /// series is 24 h-periodic in the zero-noise limit.
    #[serde(default = "default_weekly")]
    pub weekly: [f64; 7],
    #[serde(default)]
    pub profiles: ProfileSet,
}

impl GeneratorConfig {
    /// The experiment harness default: 2 eNBs × 3 cells over 31 days.
    pub fn default_scenario(seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            n_enb: 2,
            cells_per_enb: 3,
            days: 31,
            seed,
            sigma: default_sigma(),
            weekly: default_weekly(),
            profiles: ProfileSet::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_enb < 1 || self.cells_per_enb < 1 {
            return Err(Error::Config(format!(
                "need at least 1 eNB and 1 cell per eNB, got {} x {}",
                self.n_enb, self.cells_per_enb
            )));
        }
        if self.days < 2 {
            return Err(Error::Config(format!("need at least 2 days, got {}", self.days)));
        }
        if !(0.0..1.0).contains(&self.sigma) {
            return Err(Error::Config(format!("sigma {} outside [0,1)", self.sigma)));
        }
        if self.weekly.iter().any(|w| *w <= 0.0) {
            return Err(Error::Config("weekly multipliers must be positive".into()));
        }
        for qci in BearerClass::ALL {
            self.profiles.get(qci).validate(&format!("qci{}", qci.qci()))?;
        }
        Ok(())
    }
}

/// Generates a complete synthetic dataset from a seeded configuration.
///
/// Identical configurations yield identical datasets: noise is drawn from a
/// ChaCha8 stream in strict (hour, cell, qci) order.
pub fn generate_synthetic_dataset(config: &GeneratorConfig) -> Result<Dataset> {
    config.validate()?;
    let hours = config.days * 24;
    let mut cells = Vec::new();
    for enb in 0..config.n_enb {
        for cell in 0..config.cells_per_enb {
            cells.push(CellId::new(enb, cell));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut samples = Vec::with_capacity(hours as usize * cells.len() * 4);
    for hour in 0..hours {
        let hour_of_day = (hour % 24) as f64;
        let weekly = config.weekly[((hour / 24) % 7) as usize];
        for &cell in &cells {
            let mut ues = [0.0f64; 4];
            for (i, qci) in BearerClass::ALL.into_iter().enumerate() {
                let p = config.profiles.get(qci);
                // One [0,1) draw per sample keeps the stream layout
                // independent of sigma.
                let u: f64 = rng.gen();
                let noise = (2.0 * u - 1.0) * config.sigma;
                ues[i] = p.base_ues * p.diurnal(hour_of_day) * weekly * (1.0 + noise);
            }
            let prb_total: f64 = BearerClass::ALL
                .iter()
                .zip(ues)
                .map(|(q, n)| n * config.profiles.get(*q).prb_per_ue)
                .sum();
            let prb_total = prb_total.clamp(0.0, 100.0);
            for (i, qci) in BearerClass::ALL.into_iter().enumerate() {
                samples.push(KpiSample {
                    hour,
                    cell,
                    qci,
                    active_ues: ues[i],
                    volume_gb: ues[i] * config.profiles.get(qci).gb_per_ue,
                    dl_prb_util_pct: prb_total,
                });
            }
        }
    }
    Ok(Dataset {
        samples,
        hours,
        cells,
        seed: Some(config.seed),
    })
}

/// CSV header for dataset files.
pub const CSV_HEADER: &str = "hour,enb,cell,qci,active_ues,volume_gb,dl_prb_util_pct";

/// Writes a dataset in the canonical CSV format (UTF-8, LF, `.` decimals).
pub fn write_csv<W: Write>(dataset: &Dataset, mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for s in &dataset.samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.hour, s.cell.enb, s.cell.cell, s.qci, s.active_ues, s.volume_gb, s.dl_prb_util_pct
        )?;
    }
    Ok(())
}

/// Loads a dataset from the canonical CSV format.
///
/// Rows may arrive unsorted; they are re-sorted before invariant checks.
/// Errors name the 1-based line number of the offending row.
pub fn load_dataset<R: BufRead>(r: R) -> Result<Dataset> {
    let mut lines = r.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(Error::Parse("empty file, expected CSV header".into())),
    };
    if header.trim_end() != CSV_HEADER {
        return Err(Error::Parse(format!(
            "line 1: bad header {header:?}, expected {CSV_HEADER:?}"
        )));
    }
    let mut rows: Vec<(usize, KpiSample)> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse(format!(
                "line {line_no}: expected 7 columns, found {}",
                fields.len()
            )));
        }
        fn num<T: std::str::FromStr>(line_no: usize, name: &str, s: &str) -> Result<T> {
            s.trim().parse().map_err(|_| {
                Error::Parse(format!("line {line_no}: non-numeric {name} field {s:?}"))
            })
        }
        let qci_raw: u8 = num(line_no, "qci", fields[3])?;
        let sample = KpiSample {
            hour: num(line_no, "hour", fields[0])?,
            cell: CellId::new(num(line_no, "enb", fields[1])?, num(line_no, "cell", fields[2])?),
            qci: BearerClass::from_qci(qci_raw)
                .ok_or_else(|| Error::Parse(format!("line {line_no}: invalid qci {qci_raw}")))?,
            active_ues: num(line_no, "active_ues", fields[4])?,
            volume_gb: num(line_no, "volume_gb", fields[5])?,
            dl_prb_util_pct: num(line_no, "dl_prb_util_pct", fields[6])?,
        };
        if !(0.0..=100.0).contains(&sample.dl_prb_util_pct) {
            return Err(Error::Parse(format!(
                "line {line_no}: dl_prb_util_pct {} outside [0,100]",
                sample.dl_prb_util_pct
            )));
        }
        if sample.active_ues < 0.0 || sample.volume_gb < 0.0 {
            return Err(Error::Parse(format!("line {line_no}: negative KPI value")));
        }
        rows.push((line_no, sample));
    }
    if rows.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    rows.sort_by_key(|(_, s)| (s.hour, s.cell, s.qci));
    let start_hour = rows[0].1.hour;
    let mut cells: Vec<CellId> = rows.iter().map(|(_, s)| s.cell).collect();
    cells.sort();
    cells.dedup();
    let mut hours = 0;
    let per_hour = cells.len() * 4;
    for (i, (line_no, s)) in rows.iter().enumerate() {
        let expect_hour = start_hour + (i / per_hour) as u32;
        if s.hour > expect_hour {
            return Err(Error::Parse(format!(
                "line {line_no}: hour gap — expected hour {expect_hour}, found {}",
                s.hour
            )));
        }
        if s.hour < expect_hour {
            return Err(Error::Parse(format!(
                "line {line_no}: duplicate or extra row for hour {}",
                s.hour
            )));
        }
        hours = s.hour - start_hour + 1;
    }
    let dataset = Dataset {
        samples: rows.into_iter().map(|(_, s)| s).collect(),
        hours,
        cells,
        seed: None,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Chronological train/test split at `floor(hours × train_fraction)`.
///
/// Both halves keep the original hour numbering, so the test half starts at
/// the split hour.
pub fn split_train_test(dataset: &Dataset, train_fraction: f64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction {train_fraction} outside (0,1)"
        )));
    }
    let cut = (dataset.hours as f64 * train_fraction).floor() as u32;
    if cut == 0 || cut >= dataset.hours {
        return Err(Error::Config(format!(
            "split at hour {cut} leaves an empty half (dataset has {} hours)",
            dataset.hours
        )));
    }
    let per_hour = dataset.cells.len() * 4;
    let at = cut as usize * per_hour;
    let start = dataset.start_hour();
    let train = Dataset {
        samples: dataset.samples[..at].to_vec(),
        hours: cut,
        cells: dataset.cells.clone(),
        seed: dataset.seed,
    };
    let test = Dataset {
        samples: dataset.samples[at..].to_vec(),
        hours: dataset.hours - cut,
        cells: dataset.cells.clone(),
        seed: dataset.seed,
    };
    debug_assert_eq!(test.start_hour(), start + cut);
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(days: u32, sigma: f64, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            n_enb: 1,
            cells_per_enb: 1,
            days,
            seed,
            sigma,
            weekly: default_weekly(),
            profiles: ProfileSet::default(),
        }
    }

    #[test]
    fn zero_noise_two_days_is_periodic() {
        let ds = generate_synthetic_dataset(&tiny(2, 0.0, 7)).unwrap();
        assert_eq!(ds.hours, 48);
        assert_eq!(ds.samples.len(), 192);
        for i in 0..4 {
            let a = ds.samples[i];
            let b = ds.samples[24 * 4 + i];
            assert_eq!(a.active_ues, b.active_ues, "hour 0 vs hour 24, qci {}", a.qci);
            assert_eq!(a.volume_gb, b.volume_gb);
            assert_eq!(a.dl_prb_util_pct, b.dl_prb_util_pct);
        }
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let a = generate_synthetic_dataset(&tiny(3, 0.05, 42)).unwrap();
        let b = generate_synthetic_dataset(&tiny(3, 0.05, 42)).unwrap();
        assert_eq!(a, b);
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_csv(&a, &mut csv_a).unwrap();
        write_csv(&b, &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        let c = generate_synthetic_dataset(&tiny(3, 0.05, 43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn paper_shape_sample_count() {
        let cfg = GeneratorConfig {
            n_enb: 17,
            cells_per_enb: 18,
            days: 31,
            seed: 1,
            sigma: 0.05,
            weekly: default_weekly(),
            profiles: ProfileSet::default(),
        };
        let ds = generate_synthetic_dataset(&cfg).unwrap();
        assert_eq!(ds.hours, 744);
        assert_eq!(ds.cells.len(), 306);
        // 744 hours x 306 cells x 4 QCIs.
        assert_eq!(ds.samples.len(), 910_656);
        ds.validate().unwrap();
    }

    #[test]
    fn invalid_dimensions_are_config_errors() {
        assert!(matches!(
            generate_synthetic_dataset(&tiny(1, 0.0, 1)),
            Err(Error::Config(_))
        ));
        let mut cfg = tiny(2, 0.0, 1);
        cfg.n_enb = 0;
        assert!(matches!(generate_synthetic_dataset(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let cfg = GeneratorConfig {
            n_enb: 2,
            cells_per_enb: 2,
            days: 2,
            seed: 9,
            sigma: 0.05,
            weekly: default_weekly(),
            profiles: ProfileSet::default(),
        };
        let ds = generate_synthetic_dataset(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert!(!text.contains('\r'));
        let loaded = load_dataset(&buf[..]).unwrap();
        assert_eq!(loaded.samples, ds.samples);
        assert_eq!(loaded.hours, ds.hours);
        assert_eq!(loaded.cells, ds.cells);
        assert_eq!(loaded.seed, None);
    }

    #[test]
    fn loader_reports_specific_rows() {
        let good = "hour,enb,cell,qci,active_ues,volume_gb,dl_prb_util_pct\n\
                    0,0,0,1,1.5,0.1,10\n0,0,0,2,1,0.1,10\n0,0,0,5,1,0,10\n0,0,0,9,1,0.5,10\n";
        assert!(load_dataset(good.as_bytes()).is_ok());

        let bad_prb = good.replace("0,0,0,9,1,0.5,10", "0,0,0,9,1,0.5,150");
        let err = load_dataset(bad_prb.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 5"), "{err}");
        assert!(err.to_string().contains("150"), "{err}");

        let bad_num = good.replace("0,0,0,2,1,0.1,10", "0,0,0,2,x,0.1,10");
        let err = load_dataset(bad_num.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(err.to_string().contains("active_ues"), "{err}");

        let missing_col = good.replace("0,0,0,5,1,0,10", "0,0,0,5,1,0");
        let err = load_dataset(missing_col.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");

        let mut gapped = String::from(good);
        gapped.push_str("2,0,0,1,1,0.1,10\n2,0,0,2,1,0.1,10\n2,0,0,5,1,0,10\n2,0,0,9,1,0.5,10\n");
        let err = load_dataset(gapped.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("hour gap"), "{err}");
        assert!(err.to_string().contains("line 6"), "{err}");
    }

    #[test]
    fn loader_resorts_rows() {
        let ds = generate_synthetic_dataset(&tiny(2, 0.02, 5)).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[1..].reverse();
        let shuffled = lines.join("\n") + "\n";
        let loaded = load_dataset(shuffled.as_bytes()).unwrap();
        assert_eq!(loaded.samples, ds.samples);
    }

    #[test]
    fn split_matches_documented_arithmetic() {
        let cfg = GeneratorConfig {
            n_enb: 1,
            cells_per_enb: 2,
            days: 31,
            seed: 3,
            sigma: 0.05,
            weekly: default_weekly(),
            profiles: ProfileSet::default(),
        };
        let ds = generate_synthetic_dataset(&cfg).unwrap();
        assert_eq!(ds.hours, 744);
        let (train, test) = split_train_test(&ds, 0.8).unwrap();
        assert_eq!(train.hours, 595);
        assert_eq!(test.hours, 149);
        assert_eq!(train.samples.last().unwrap().hour, 594);
        assert_eq!(test.samples.first().unwrap().hour, 595);
        assert_eq!(test.samples.last().unwrap().hour, 743);

        // Partition identity.
        let mut rejoined = train.samples.clone();
        rejoined.extend_from_slice(&test.samples);
        assert_eq!(rejoined, ds.samples);

        // 10 hours at 0.5 → 5/5.
        let small = generate_synthetic_dataset(&tiny(2, 0.0, 1)).unwrap();
        let trimmed = Dataset {
            samples: small.samples[..10 * 4].to_vec(),
            hours: 10,
            cells: small.cells.clone(),
            seed: small.seed,
        };
        let (a, b) = split_train_test(&trimmed, 0.5).unwrap();
        assert_eq!((a.hours, b.hours), (5, 5));

        assert!(split_train_test(&ds, 0.0).is_err());
        assert!(split_train_test(&ds, 1.0).is_err());
    }

    #[test]
    fn default_profile_peaks_in_the_evening() {
        let p = ProfileSet::default();
        for qci in BearerClass::ALL {
            let prof = p.get(qci);
            let peak = prof.diurnal(prof.peak_hour);
            assert!((peak - 1.0).abs() < 1e-12);
            assert!(prof.diurnal(5.0) < 0.15, "qci {qci} daytime level too high");
        }
    }
}
