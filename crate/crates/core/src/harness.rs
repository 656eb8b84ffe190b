//! Monte-Carlo experiment driver.
//!
//! An [`ExperimentSpec`] names a base link, a channel template, the
//! receivers to compare, one sweep axis with its values, and the seeds.
//! Every (value, seed) cell is simulated independently on the rayon pool;
//! rows are sorted before they are written, so output does not depend on
//! scheduling.
//!
//! A cell seed drives the data symbols and the noise; the channel geometry
//! stays fixed across seeds.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, ChannelSpec};
use crate::estimator::{EstimatorState, Pilots};
use crate::receivers::{frame_mse, run_receiver, ReceiverKind, ReceiverSettings};
use crate::rxfront::{front_end, FrontEndConfig, ReceivedFrame};
use crate::signal::{OfdmConfig, CARRIER_BLOCK_PRODUCT};
use crate::tx::Frame;
use crate::{Error, Result};

pub const CSV_HEADER: &str = "sweep,value,receiver,seed,mse_db,fe_hat,iters";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// In-band SNR in dB.
    Snr,
    /// Doppler factor.
    Alpha,
    /// Carrier count K, with N = 8192 / K blocks.
    Carriers,
    /// Fiducial offset in Hz used by F-FFT and as the A-FFT starting point.
    Fe,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Snr => "snr",
            Self::Alpha => "alpha",
            Self::Carriers => "carriers",
            Self::Fe => "fe",
        }
    }

    /// Values used when a sweep is requested without explicit values.
    pub fn default_values(self, link: &OfdmConfig) -> Vec<f64> {
        match self {
            Self::Snr => (0..=6).map(|i| 5.0 * i as f64).collect(),
            Self::Alpha => (1..=6).map(|i| 0.5e-4 * i as f64).collect(),
            Self::Carriers => (6..=11).map(|p| f64::from(1u32 << p)).collect(),
            Self::Fe => {
                let df = link.carrier_spacing();
                (1..=15).map(|i| 0.2 * df * i as f64).collect()
            }
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Snr, Self::Alpha, Self::Carriers, Self::Fe]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown sweep axis {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub link: OfdmConfig,
    pub channel: ChannelSpec,
    pub front_end: FrontEndConfig,
    pub receiver: ReceiverSettings,
    pub receivers: Vec<ReceiverKind>,
    pub sweep: SweepAxis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Also write the received baseband of every cell as a frame dump.
    pub dump_frames: bool,
    pub output: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            link: OfdmConfig::default(),
            channel: ChannelSpec::default().with_doppler(2.5e-4).with_snr(30.0),
            front_end: FrontEndConfig::default(),
            receiver: ReceiverSettings::default(),
            receivers: ReceiverKind::ALL.to_vec(),
            sweep: SweepAxis::Snr,
            values: vec![0.0, 10.0, 20.0, 30.0],
            seeds: (1..=10).collect(),
            dump_frames: false,
            output: PathBuf::from("results"),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        self.channel.validate(&self.link)?;
        self.receiver.validate()?;
        if self.receivers.is_empty() || self.values.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config(
                "receivers, values and seeds must all be non-empty".into(),
            ));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(Error::Config("duplicate seeds".into()));
        }
        for &v in &self.values {
            self.cell_link(v)?;
        }
        Ok(())
    }

    /// Link configuration of a cell; only the carriers axis changes it.
    pub fn cell_link(&self, value: f64) -> Result<OfdmConfig> {
        if self.sweep != SweepAxis::Carriers {
            return Ok(self.link.clone());
        }
        let k = value as usize;
        if value != k as f64 || !k.is_power_of_two() || !(2..=CARRIER_BLOCK_PRODUCT).contains(&k) {
            return Err(Error::Config(format!(
                "carrier count {value} must be a power of two in 2..={CARRIER_BLOCK_PRODUCT}"
            )));
        }
        let cfg = OfdmConfig {
            carriers: k,
            blocks: CARRIER_BLOCK_PRODUCT / k,
            pilot_count: self.link.pilot_count.min(k / 2).max(1),
            ..self.link.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn cell_channel(&self, value: f64, seed: u64) -> ChannelSpec {
        let mut ch = self.channel.clone();
        match self.sweep {
            SweepAxis::Snr => ch.snr_db = value,
            SweepAxis::Alpha => ch.doppler_factor = value,
            SweepAxis::Carriers | SweepAxis::Fe => {}
        }
        ch.seed = mix(self.channel.seed, seed);
        ch
    }

    fn cell_settings(&self, value: f64) -> ReceiverSettings {
        let mut s = self.receiver.clone();
        if self.sweep == SweepAxis::Fe {
            s.fiducial = Some(value);
            s.estimator.fe_init = Some(value);
        }
        s
    }
}

/// splitmix64 finalizer applied to the combination of two seeds.
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything a receiver needs for one (value, seed) cell.
#[derive(Debug, Clone)]
pub struct Cell {
    pub link: OfdmConfig,
    pub channel: ChannelSpec,
    pub settings: ReceiverSettings,
    pub frame: Frame,
    pub received: Vec<crate::C64>,
    pub rx: ReceivedFrame,
    pub pilots: Pilots,
}

pub fn prepare_cell(spec: &ExperimentSpec, value: f64, seed: u64) -> Result<Cell> {
    let link = spec.cell_link(value)?;
    let channel = spec.cell_channel(value, seed);
    let settings = spec.cell_settings(value);
    let frame = Frame::random(&link, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let received = apply_channel(&frame.baseband, &channel, &link)?;
    let rx = front_end(&received, &link, &spec.front_end, channel.doppler_factor)?;
    let pilots = Pilots::from_block(&frame.data[0], link.pilot_count)?;
    Ok(Cell {
        link,
        channel,
        settings,
        frame,
        received,
        rx,
        pilots,
    })
}

/// Runs the A-FFT estimator alone on the first block of a cell.
pub fn trace_cell(spec: &ExperimentSpec, value: f64, seed: u64) -> Result<EstimatorState> {
    let cell = prepare_cell(spec, value, seed)?;
    crate::estimator::estimate_fiducial_offset(
        &cell.rx.blocks[0],
        &cell.pilots,
        cell.settings.span,
        &cell.link,
        &cell.settings.estimator,
    )
}

/// One (value, receiver, seed) result. `mse_db` is `None` when the cell
/// failed; `error` then says why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseRow {
    pub sweep: SweepAxis,
    pub value: f64,
    pub receiver: ReceiverKind,
    pub seed: u64,
    pub mse_db: Option<f64>,
    pub fe_hat: Option<f64>,
    pub iters: Option<usize>,
    #[serde(skip)]
    pub error: Option<String>,
}

impl MseRow {
    pub fn failed(&self) -> bool {
        self.mse_db.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseReport {
    pub sweep: SweepAxis,
    pub rows: Vec<MseRow>,
}

impl MseReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Config(e.to_string()))
    }
}

fn run_cell(spec: &ExperimentSpec, vi: usize, seed: u64) -> Vec<(usize, MseRow)> {
    let value = spec.values[vi];
    let row = |receiver| MseRow {
        sweep: spec.sweep,
        value,
        receiver,
        seed,
        mse_db: None,
        fe_hat: None,
        iters: None,
        error: None,
    };
    let cell = match prepare_cell(spec, value, seed) {
        Ok(c) => c,
        Err(e) => {
            log::warn!("cell {}={value} seed {seed}: {e}", spec.sweep);
            return spec
                .receivers
                .iter()
                .map(|&k| {
                    let mut r = row(k);
                    r.error = Some(e.to_string());
                    (vi, r)
                })
                .collect();
        }
    };
    if spec.dump_frames {
        let dump = crate::framefile::FrameDump {
            carriers: cell.link.carriers as u64,
            blocks: cell.link.blocks as u64,
            sample_rate: cell.link.sample_rate,
            samples: cell.received.clone(),
        };
        let path = spec
            .output
            .join(format!("frame_{}_{vi}_{seed}.bin", spec.sweep));
        if let Err(e) = std::fs::File::create(&path)
            .map_err(Error::from)
            .and_then(|f| dump.write_to(std::io::BufWriter::new(f)))
        {
            log::warn!("frame dump {}: {e}", path.display());
        }
    }
    spec.receivers
        .iter()
        .map(|&kind| {
            let mut r = row(kind);
            let result = run_receiver(kind, &cell.rx, &cell.pilots, &cell.link, &cell.settings)
                .and_then(|out| {
                    Ok((
                        frame_mse(&out, &cell.frame.data, cell.link.pilot_count)?,
                        out,
                    ))
                });
            match result {
                Ok((mse, out)) => {
                    r.mse_db = Some(mse);
                    if kind == ReceiverKind::AFFT {
                        r.fe_hat = out.fe;
                        r.iters = out.estimator.as_ref().map(|s| s.iter);
                    } else {
                        r.fe_hat = out.fe;
                    }
                }
                Err(e) => {
                    log::warn!("{kind} at {}={value} seed {seed}: {e}", spec.sweep);
                    r.error = Some(e.to_string());
                }
            }
            (vi, r)
        })
        .collect()
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<MseReport> {
    spec.validate()?;
    let cells: Vec<(usize, u64)> = (0..spec.values.len())
        .flat_map(|vi| spec.seeds.iter().map(move |&s| (vi, s)))
        .collect();
    let mut rows: Vec<(usize, MseRow)> = cells
        .par_iter()
        .flat_map_iter(|&(vi, seed)| run_cell(spec, vi, seed))
        .collect();
    let seed_rank: BTreeMap<u64, usize> = spec
        .seeds
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i))
        .collect();
    rows.sort_by_key(|(vi, r)| (*vi, r.receiver, seed_rank[&r.seed]));
    Ok(MseReport {
        sweep: spec.sweep,
        rows: rows.into_iter().map(|(_, r)| r).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub value: f64,
    pub receiver: ReceiverKind,
    pub median_db: f64,
    pub mean_db: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub sweep: SweepAxis,
    pub rows: Vec<SummaryRow>,
    /// `(value, 1 - mse_lin(AFFT) / mse_lin(FFFT))` from the medians, for
    /// every value where both receivers produced results.
    pub reduction: Vec<(f64, f64)>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Linear-domain relative reduction of `a` against `b`, both in dB.
pub fn relative_reduction(a_db: f64, b_db: f64) -> f64 {
    1.0 - 10f64.powf((a_db - b_db) / 10.0)
}

pub fn summarize(report: &MseReport) -> Summary {
    let mut groups: BTreeMap<(usize, ReceiverKind), (f64, Vec<f64>)> = BTreeMap::new();
    let mut order: Vec<f64> = Vec::new();
    for r in &report.rows {
        let vi = match order.iter().position(|v| *v == r.value) {
            Some(i) => i,
            None => {
                order.push(r.value);
                order.len() - 1
            }
        };
        let entry = groups
            .entry((vi, r.receiver))
            .or_insert((r.value, Vec::new()));
        if let Some(m) = r.mse_db {
            entry.1.push(m);
        }
    }
    let mut rows = Vec::new();
    for ((_, receiver), (value, mut v)) in groups {
        let count = v.len();
        let Some(med) = median(&mut v) else { continue };
        rows.push(SummaryRow {
            value,
            receiver,
            median_db: med,
            mean_db: v.iter().sum::<f64>() / count as f64,
            count,
        });
    }
    let reduction = order
        .iter()
        .filter_map(|&value| {
            let get = |k| {
                rows.iter()
                    .find(|r: &&SummaryRow| r.value == value && r.receiver == k)
                    .map(|r| r.median_db)
            };
            Some((
                value,
                relative_reduction(get(ReceiverKind::AFFT)?, get(ReceiverKind::FFFT)?),
            ))
        })
        .collect();
    Summary {
        sweep: report.sweep,
        rows,
        reduction,
    }
}

impl Summary {
    /// `sweep,value,receiver,median_db,mean_db,count` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "sweep",
            "value",
            "receiver",
            "median_db",
            "mean_db",
            "count",
        ])?;
        for r in &self.rows {
            out.write_record([
                self.sweep.name().to_string(),
                r.value.to_string(),
                r.receiver.to_string(),
                r.median_db.to_string(),
                r.mean_db.to_string(),
                r.count.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// `sweep,value,afft_vs_ffft_reduction` rows.
    pub fn write_reduction_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["sweep", "value", "afft_vs_ffft_reduction"])?;
        for (v, r) in &self.reduction {
            out.write_record([self.sweep.name().to_string(), v.to_string(), r.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `iter,f_e,E_dB` rows; iteration 0 is the starting point.
pub fn write_trace_csv<W: Write>(state: &EstimatorState, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["iter", "f_e", "E_dB"])?;
    let db = |e: f64| 10.0 * e.max(1e-300).log10();
    out.write_record([
        "0".to_string(),
        state.initial_fe.to_string(),
        db(state.initial_mse).to_string(),
    ])?;
    for p in &state.trace {
        out.write_record([p.iter.to_string(), p.fe.to_string(), db(p.mse).to_string()])?;
    }
    out.flush()?;
    Ok(())
}
