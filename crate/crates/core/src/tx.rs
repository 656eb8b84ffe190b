//! Transmitter: block modulation, cyclic prefix insertion and passband conversion.
//!
//! The complex envelope of a block is
//! `s[n] = sum_k d_k exp(j 2 pi k df n / fs)` with no normalization, so the
//! mean sample power of a block equals `sum_k |d_k|^2` (K for PSK).
//! Passband conversion mixes that envelope up by the frequency of carrier 0.

use std::f64::consts::PI;

use rand::Rng;

use crate::fft;
use crate::signal::{differential_encode, psk_point, OfdmConfig, SymbolRole, SymbolVector};
use crate::{Error, Result, C64};

/// Uniformly sampled complex baseband with its time base: sample `n` is at
/// `t0 + n * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexBlock {
    pub samples: Vec<C64>,
    pub t0: f64,
    pub dt: f64,
}

impl ComplexBlock {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }
}

/// Modulates the K encoded symbols of one block onto the carrier grid via a
/// zero-padded inverse FFT of length `K * fs / B`.
pub fn modulate_block(d: &SymbolVector, cfg: &OfdmConfig) -> Result<ComplexBlock> {
    if d.len() != cfg.carriers {
        return Err(Error::InputShape(format!(
            "block has {} symbols, expected {}",
            d.len(),
            cfg.carriers
        )));
    }
    let mut buf = vec![C64::new(0.0, 0.0); cfg.samples_per_block()];
    buf[..d.len()].copy_from_slice(&d.values);
    fft::ifft_in_place(&mut buf);
    Ok(ComplexBlock {
        samples: buf,
        t0: 0.0,
        dt: cfg.sample_period(),
    })
}

/// Prepends a cyclic prefix of `ceil(T_g * fs)` samples copied from the block tail.
pub fn add_guard_interval(block: &ComplexBlock, cfg: &OfdmConfig) -> ComplexBlock {
    let ncp = cfg.guard_samples();
    let n = block.len();
    let mut samples = Vec::with_capacity(n + ncp);
    // guard longer than the block wraps around more than once
    for i in 0..ncp {
        samples.push(block.samples[(n - (ncp - i) % n) % n]);
    }
    samples.extend_from_slice(&block.samples);
    ComplexBlock {
        samples,
        t0: block.t0 - ncp as f64 * block.dt,
        dt: block.dt,
    }
}

fn nyquist_check(cfg: &OfdmConfig) -> Result<()> {
    if cfg.center_freq + cfg.bandwidth / 2.0 >= cfg.sample_rate / 2.0 {
        return Err(Error::Config(format!(
            "band edge {} Hz exceeds Nyquist {} Hz",
            cfg.center_freq + cfg.bandwidth / 2.0,
            cfg.sample_rate / 2.0
        )));
    }
    if cfg.lowest_carrier() <= cfg.bandwidth / 2.0 {
        return Err(Error::Config(
            "lowest carrier too close to DC for passband conversion".into(),
        ));
    }
    Ok(())
}

/// `x[n] = Re{ s[n] exp(j 2 pi f0 n / fs) }` with `f0` the carrier-0 frequency.
pub fn upconvert(baseband: &[C64], cfg: &OfdmConfig) -> Result<Vec<f64>> {
    nyquist_check(cfg)?;
    let w = 2.0 * PI * cfg.lowest_carrier() / cfg.sample_rate;
    Ok(baseband
        .iter()
        .enumerate()
        .map(|(n, s)| (s * C64::from_polar(1.0, w * n as f64)).re)
        .collect())
}

/// Inverse of [`upconvert`]: mixes down by the carrier-0 frequency and keeps
/// the DFT bins in `[-B/2, 3B/2]` (ideal low-pass around the occupied band).
pub fn downconvert(passband: &[f64], cfg: &OfdmConfig) -> Result<Vec<C64>> {
    nyquist_check(cfg)?;
    let w = -2.0 * PI * cfg.lowest_carrier() / cfg.sample_rate;
    let mut buf: Vec<C64> = passband
        .iter()
        .enumerate()
        .map(|(n, &x)| 2.0 * x * C64::from_polar(1.0, w * n as f64))
        .collect();
    band_limit(
        &mut buf,
        cfg.sample_rate,
        -cfg.bandwidth / 2.0,
        1.5 * cfg.bandwidth,
    );
    Ok(buf)
}

/// Zeroes every DFT bin whose frequency lies outside `[lo, hi]`.
pub fn band_limit(buf: &mut [C64], fs: f64, lo: f64, hi: f64) {
    let n = buf.len();
    if n == 0 {
        return;
    }
    fft::fft_in_place(buf);
    let scale = 1.0 / n as f64;
    for (i, v) in buf.iter_mut().enumerate() {
        let f = if i <= n / 2 {
            i as f64
        } else {
            i as f64 - n as f64
        } * fs
            / n as f64;
        if f < lo || f > hi {
            *v = C64::new(0.0, 0.0);
        } else {
            *v *= scale;
        }
    }
    fft::ifft_in_place(buf);
}

/// Analytic signal of a real sequence (negative-frequency bins removed).
pub fn analytic_signal(x: &[f64]) -> Vec<C64> {
    let n = x.len();
    let mut buf: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
    if n == 0 {
        return buf;
    }
    fft::fft_in_place(&mut buf);
    let scale = 1.0 / n as f64;
    for (i, v) in buf.iter_mut().enumerate() {
        let gain = if i == 0 || (n % 2 == 0 && i == n / 2) {
            1.0
        } else if i < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *v *= gain * scale;
    }
    fft::ifft_in_place(&mut buf);
    buf
}

/// A transmitted frame of N blocks.
#[derive(Debug, Clone)]
pub struct Frame {
    /// Raw symbols `b` of every block (K-1 each, carriers 1..K).
    pub data: Vec<SymbolVector>,
    /// Differentially encoded symbols `d` of every block (K each).
    pub blocks: Vec<SymbolVector>,
    /// Concatenated baseband of all blocks with their cyclic prefixes.
    pub baseband: Vec<C64>,
}

impl Frame {
    pub fn from_data(data: Vec<SymbolVector>, cfg: &OfdmConfig) -> Result<Self> {
        if data.len() != cfg.blocks {
            return Err(Error::InputShape(format!(
                "{} data blocks, expected {}",
                data.len(),
                cfg.blocks
            )));
        }
        let mut blocks = Vec::with_capacity(data.len());
        let mut baseband = Vec::with_capacity(cfg.frame_samples());
        for b in &data {
            if b.len() != cfg.carriers - 1 {
                return Err(Error::InputShape(format!(
                    "data block has {} symbols, expected {}",
                    b.len(),
                    cfg.carriers - 1
                )));
            }
            let d = differential_encode(b, cfg.reference);
            let body = modulate_block(&d, cfg)?;
            baseband.extend(add_guard_interval(&body, cfg).samples);
            blocks.push(d);
        }
        Ok(Self {
            data,
            blocks,
            baseband,
        })
    }

    /// Frame of uniformly random Q-PSK data.
    pub fn random<R: Rng + ?Sized>(cfg: &OfdmConfig, rng: &mut R) -> Result<Self> {
        let data = (0..cfg.blocks)
            .map(|_| {
                let values = (0..cfg.carriers - 1)
                    .map(|_| psk_point(rng.random_range(0..cfg.psk_order), cfg.psk_order))
                    .collect();
                SymbolVector::new(values, SymbolRole::Raw)
            })
            .collect();
        Self::from_data(data, cfg)
    }

    pub fn passband(&self, cfg: &OfdmConfig) -> Result<Vec<f64>> {
        upconvert(&self.baseband, cfg)
    }
}
