//! End-to-end receivers: Conv-FFT, P-FFT, F-FFT and A-FFT.
//!
//! All four share the front end output and differ only in the demodulator
//! bank and combiner. P-FFT, F-FFT and A-FFT use the same weight adaptation
//! schedule, so with the offset step frozen A-FFT reproduces F-FFT exactly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bank::{combine, conv_fft, fractional_bank, partial_bank, DemodBank};
use crate::estimator::{
    adapt_weights_frame, estimate_fiducial_offset, AdaptConfig, EstimatorConfig, EstimatorState,
    Pilots,
};
use crate::rxfront::ReceivedFrame;
use crate::signal::{differential_ratios, OfdmConfig, SymbolVector};
use crate::{Error, Result, C64};

/// Lowest MSE reported, in dB.
pub const MSE_FLOOR_DB: f64 = -150.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReceiverKind {
    ConvFFT,
    PFFT,
    FFFT,
    AFFT,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 4] = [Self::ConvFFT, Self::PFFT, Self::FFFT, Self::AFFT];

    pub fn name(self) -> &'static str {
        match self {
            Self::ConvFFT => "ConvFFT",
            Self::PFFT => "PFFT",
            Self::FFFT => "FFFT",
            Self::AFFT => "AFFT",
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReceiverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown receiver {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverSettings {
    /// Segments per block for P-FFT.
    pub segments: usize,
    /// Half-width A of the fractional banks (2A+1 taps).
    pub span: usize,
    /// F-FFT offset in Hz; `None` means the carrier spacing.
    pub fiducial: Option<f64>,
    pub adapt: AdaptConfig,
    pub estimator: EstimatorConfig,
}

impl Default for ReceiverSettings {
    fn default() -> Self {
        Self {
            segments: 3,
            span: 1,
            fiducial: None,
            adapt: AdaptConfig::default(),
            estimator: EstimatorConfig::default(),
        }
    }
}

impl ReceiverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.segments == 0 {
            return Err(Error::Config("P-FFT needs at least one segment".into()));
        }
        if let Some(fe) = self.fiducial {
            if !(fe > 0.0) {
                return Err(Error::Config(format!(
                    "fiducial offset {fe} must be positive"
                )));
            }
        }
        if !(self.adapt.step_w > 0.0) {
            return Err(Error::Config("adaptation step must be positive".into()));
        }
        self.estimator.validate()
    }
}

/// Differential detections of one frame.
#[derive(Debug, Clone)]
pub struct ReceiverOutput {
    pub kind: ReceiverKind,
    /// Soft estimates `x_k / x_{k-1}` per block (K-1 each).
    pub estimates: Vec<Vec<C64>>,
    /// Offset used by the fractional bank, if any.
    pub fe: Option<f64>,
    /// Estimator diagnostics for A-FFT.
    pub estimator: Option<EstimatorState>,
}

fn detect(banks: &[DemodBank], weights: &[crate::bank::WeightSet]) -> Result<Vec<Vec<C64>>> {
    banks
        .iter()
        .zip(weights)
        .map(|(bank, w)| differential_ratios(&combine(bank, w)?))
        .collect()
}

fn impulse(taps: usize) -> Vec<C64> {
    let mut w = vec![C64::new(0.0, 0.0); taps];
    w[taps / 2] = C64::new(1.0, 0.0);
    w
}

/// Runs one receiver over a received frame. `pilots` are the known first
/// raw symbols of block 0.
pub fn run_receiver(
    kind: ReceiverKind,
    rx: &ReceivedFrame,
    pilots: &Pilots,
    cfg: &OfdmConfig,
    settings: &ReceiverSettings,
) -> Result<ReceiverOutput> {
    settings.validate()?;
    if rx.blocks.is_empty() {
        return Err(Error::InputShape("frame has no blocks".into()));
    }
    let adapt = AdaptConfig {
        psk_order: cfg.psk_order,
        ..settings.adapt.clone()
    };
    let mut estimator = None;
    let (banks, initial, fe) = match kind {
        ReceiverKind::ConvFFT => {
            let estimates = rx
                .blocks
                .iter()
                .map(|b| differential_ratios(&conv_fft(b, cfg)?))
                .collect::<Result<_>>()?;
            return Ok(ReceiverOutput {
                kind,
                estimates,
                fe: None,
                estimator: None,
            });
        }
        ReceiverKind::PFFT => {
            let banks = rx
                .blocks
                .iter()
                .map(|b| partial_bank(b, settings.segments, cfg))
                .collect::<Result<Vec<_>>>()?;
            (banks, vec![C64::new(1.0, 0.0); settings.segments], None)
        }
        ReceiverKind::FFFT | ReceiverKind::AFFT => {
            let fe = if kind == ReceiverKind::AFFT {
                let state = estimate_fiducial_offset(
                    &rx.blocks[0],
                    pilots,
                    settings.span,
                    cfg,
                    &settings.estimator,
                )?;
                let fe = state.fe;
                estimator = Some(state);
                fe
            } else {
                settings.fiducial.unwrap_or(cfg.carrier_spacing())
            };
            let banks = rx
                .blocks
                .iter()
                .map(|b| fractional_bank(b, settings.span, fe, cfg))
                .collect::<Result<Vec<_>>>()?;
            (banks, impulse(2 * settings.span + 1), Some(fe))
        }
    };
    let adapted = adapt_weights_frame(&banks, pilots, &initial, &adapt)?;
    Ok(ReceiverOutput {
        kind,
        estimates: detect(&banks, &adapted.blocks)?,
        fe,
        estimator,
    })
}

/// `10 log10(mean |bhat - b|^2)`, floored at [`MSE_FLOOR_DB`].
pub fn detection_mse(bhat: &[C64], b: &[C64]) -> Result<f64> {
    if bhat.len() != b.len() || b.is_empty() {
        return Err(Error::InputShape(format!(
            "cannot compare {} estimates with {} symbols",
            bhat.len(),
            b.len()
        )));
    }
    let mean = bhat
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        / b.len() as f64;
    Ok(to_db(mean))
}

fn to_db(mean: f64) -> f64 {
    if mean <= 0.0 {
        MSE_FLOOR_DB
    } else {
        (10.0 * mean.log10()).max(MSE_FLOOR_DB)
    }
}

/// Frame MSE in dB over data carriers only: the first `pilot_count` raw
/// symbols of block 0 are excluded.
pub fn frame_mse(
    output: &ReceiverOutput,
    truth: &[SymbolVector],
    pilot_count: usize,
) -> Result<f64> {
    if output.estimates.len() != truth.len() {
        return Err(Error::InputShape(format!(
            "{} detected blocks, {} transmitted",
            output.estimates.len(),
            truth.len()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (b, (est, raw)) in output.estimates.iter().zip(truth).enumerate() {
        if est.len() != raw.len() {
            return Err(Error::InputShape("block length mismatch".into()));
        }
        let skip = if b == 0 {
            pilot_count.min(raw.len())
        } else {
            0
        };
        for (x, y) in est[skip..].iter().zip(&raw.values[skip..]) {
            sum += (x - y).norm_sqr();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InputShape("no data carriers to score".into()));
    }
    Ok(to_db(sum / count as f64))
}
