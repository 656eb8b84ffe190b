//! Demodulator banks and the per-carrier linear combiner.
//!
//! Every bank entry is a left-Riemann sum over the block's sample grid with
//! `1 / Nsamp` normalization, evaluated at the block's own time base
//! `t_n = t0 + n dt`:
//!
//! ```text
//! z[k][a] = 1/Nsamp * sum_n v[n] exp(-j 2 pi (k df + a fe / (A + 1)) t_n)
//! ```
//!
//! The time-weighted bank replaces `v[n]` with `t_n v[n]`; the partial bank
//! restricts the sum to one of `I` contiguous segments. All sums run through
//! one `Nsamp`-point FFT per column, keeping the first K bins.

use std::f64::consts::PI;

use crate::fft;
use crate::signal::OfdmConfig;
use crate::tx::ComplexBlock;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankKind {
    Conventional,
    Partial,
    /// Fractional bank at fractions of the carrier spacing.
    Fractional,
    /// Fractional bank at fractions of an arbitrary fiducial offset.
    Adaptive,
    TimeWeighted,
}

/// K x M matrix of demodulator outputs, row `k` holding carrier `k`'s taps.
/// For fractional banks column `a + A` holds offset index `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodBank {
    values: Vec<C64>,
    carriers: usize,
    taps: usize,
    /// Half-width A of a fractional bank (0 for conventional and partial banks).
    pub span: usize,
    /// Fiducial frequency offset in Hz (0 where not applicable).
    pub fiducial: f64,
    pub kind: BankKind,
}

impl DemodBank {
    fn from_columns(columns: Vec<Vec<C64>>, span: usize, fiducial: f64, kind: BankKind) -> Self {
        let taps = columns.len();
        let carriers = columns.first().map_or(0, Vec::len);
        let mut values = vec![C64::new(0.0, 0.0); carriers * taps];
        for (c, col) in columns.iter().enumerate() {
            for (k, v) in col.iter().enumerate() {
                values[k * taps + c] = *v;
            }
        }
        Self {
            values,
            carriers,
            taps,
            span,
            fiducial,
            kind,
        }
    }

    pub fn carriers(&self) -> usize {
        self.carriers
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn row(&self, k: usize) -> &[C64] {
        &self.values[k * self.taps..(k + 1) * self.taps]
    }

    pub fn get(&self, k: usize, col: usize) -> C64 {
        self.values[k * self.taps + col]
    }

    pub fn column(&self, col: usize) -> Vec<C64> {
        (0..self.carriers).map(|k| self.get(k, col)).collect()
    }

    /// Entry `z_{k,a}` of a fractional bank, `a` in `-A..=A`.
    pub fn offset(&self, k: usize, a: i64) -> C64 {
        self.get(k, (a + self.span as i64) as usize)
    }
}

/// Per-carrier combiner weights, K x M.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    values: Vec<C64>,
    taps: usize,
}

impl WeightSet {
    /// Unit impulse on the center tap of every carrier.
    pub fn impulse(carriers: usize, taps: usize) -> Self {
        let mut w = vec![C64::new(0.0, 0.0); taps];
        w[taps / 2] = C64::new(1.0, 0.0);
        Self::shared(carriers, &w)
    }

    /// All-ones weights (plain sum of the taps).
    pub fn uniform(carriers: usize, taps: usize) -> Self {
        Self::shared(carriers, &vec![C64::new(1.0, 0.0); taps])
    }

    /// The same vector on every carrier.
    pub fn shared(carriers: usize, w: &[C64]) -> Self {
        Self {
            values: w.iter().copied().cycle().take(carriers * w.len()).collect(),
            taps: w.len(),
        }
    }

    pub fn carriers(&self) -> usize {
        if self.taps == 0 {
            0
        } else {
            self.values.len() / self.taps
        }
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn row(&self, k: usize) -> &[C64] {
        &self.values[k * self.taps..(k + 1) * self.taps]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [C64] {
        &mut self.values[k * self.taps..(k + 1) * self.taps]
    }

    pub fn set_row(&mut self, k: usize, w: &[C64]) {
        self.row_mut(k).copy_from_slice(w);
    }

    /// Largest entry-wise distance to another weight set.
    pub fn max_abs_diff(&self, other: &WeightSet) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// `w^H z`.
pub fn inner(w: &[C64], z: &[C64]) -> C64 {
    w.iter().zip(z).map(|(w, z)| w.conj() * z).sum()
}

fn check_block(block: &ComplexBlock, cfg: &OfdmConfig) -> Result<()> {
    if block.len() != cfg.samples_per_block() {
        return Err(Error::InputShape(format!(
            "block has {} samples, expected {}",
            block.len(),
            cfg.samples_per_block()
        )));
    }
    Ok(())
}

/// `1/Nsamp * sum_{n in range} g(t_n) v[n] exp(-j 2 pi (k df + shift) t_n)`
/// for k in 0..K, with `g(t) = t` when `time_weighted`, else 1.
fn shifted_transform(
    block: &ComplexBlock,
    shift: f64,
    time_weighted: bool,
    range: std::ops::Range<usize>,
    cfg: &OfdmConfig,
) -> Vec<C64> {
    let nsamp = block.len();
    let mut buf = vec![C64::new(0.0, 0.0); nsamp];
    for n in range {
        let t = block.time(n);
        let mut v = block.samples[n];
        if shift != 0.0 {
            v *= C64::from_polar(1.0, -2.0 * PI * shift * t);
        }
        if time_weighted {
            v *= t;
        }
        buf[n] = v;
    }
    fft::fft_in_place(&mut buf);
    let df = cfg.carrier_spacing();
    let scale = 1.0 / nsamp as f64;
    buf.truncate(cfg.carriers);
    if block.t0 == 0.0 {
        buf.iter_mut().for_each(|v| *v *= scale);
    } else {
        for (k, v) in buf.iter_mut().enumerate() {
            *v *= scale * C64::from_polar(1.0, -2.0 * PI * k as f64 * df * block.t0);
        }
    }
    buf
}

/// Conventional FFT demodulation: K outputs normalized so that a clean
/// loopback returns the transmitted symbols.
pub fn conv_fft(block: &ComplexBlock, cfg: &OfdmConfig) -> Result<Vec<C64>> {
    check_block(block, cfg)?;
    Ok(shifted_transform(block, 0.0, false, 0..block.len(), cfg))
}

fn fractional_columns(
    block: &ComplexBlock,
    span: usize,
    fiducial: f64,
    time_weighted: bool,
    cfg: &OfdmConfig,
) -> Result<Vec<Vec<C64>>> {
    check_block(block, cfg)?;
    if !(fiducial > 0.0) && span > 0 {
        return Err(Error::Config(format!(
            "fiducial offset {fiducial} must be positive"
        )));
    }
    let a_max = span as i64;
    Ok((-a_max..=a_max)
        .map(|a| {
            let shift = a as f64 * fiducial / (span + 1) as f64;
            shifted_transform(block, shift, time_weighted, 0..block.len(), cfg)
        })
        .collect())
}

/// Fractional bank with `2A + 1` columns at offsets `a fe / (A + 1)`.
pub fn fractional_bank(
    block: &ComplexBlock,
    span: usize,
    fiducial: f64,
    cfg: &OfdmConfig,
) -> Result<DemodBank> {
    let cols = fractional_columns(block, span, fiducial, false, cfg)?;
    let kind = if fiducial == cfg.carrier_spacing() {
        BankKind::Fractional
    } else {
        BankKind::Adaptive
    };
    Ok(DemodBank::from_columns(cols, span, fiducial, kind))
}

/// Fractional bank applied to `t v(t)`; the fiducial-offset gradient needs it.
pub fn time_weighted_bank(
    block: &ComplexBlock,
    span: usize,
    fiducial: f64,
    cfg: &OfdmConfig,
) -> Result<DemodBank> {
    let cols = fractional_columns(block, span, fiducial, true, cfg)?;
    Ok(DemodBank::from_columns(
        cols,
        span,
        fiducial,
        BankKind::TimeWeighted,
    ))
}

/// Partial-FFT bank: column `i` integrates over the `i`-th of `segments`
/// contiguous slices. Slice `i` spans samples
/// `floor(i Nsamp / I) .. floor((i + 1) Nsamp / I)`, so the slices always
/// partition the block even when `I` does not divide `Nsamp`.
pub fn partial_bank(block: &ComplexBlock, segments: usize, cfg: &OfdmConfig) -> Result<DemodBank> {
    check_block(block, cfg)?;
    if segments == 0 || segments > block.len() {
        return Err(Error::Config(format!("invalid segment count {segments}")));
    }
    let n = block.len();
    let cols = (0..segments)
        .map(|i| {
            let range = i * n / segments..(i + 1) * n / segments;
            shifted_transform(block, 0.0, false, range, cfg)
        })
        .collect();
    Ok(DemodBank::from_columns(cols, 0, 0.0, BankKind::Partial))
}

/// `x_k = w_k^H z_k` for every carrier.
pub fn combine(bank: &DemodBank, w: &WeightSet) -> Result<Vec<C64>> {
    if bank.taps() != w.taps() || bank.carriers() != w.carriers() {
        return Err(Error::Dimension(format!(
            "bank is {}x{}, weights are {}x{}",
            bank.carriers(),
            bank.taps(),
            w.carriers(),
            w.taps()
        )));
    }
    Ok((0..bank.carriers())
        .map(|k| inner(w.row(k), bank.row(k)))
        .collect())
}
