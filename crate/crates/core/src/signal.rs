//! Waveform configuration, PSK mapping and frequency-domain differential coding.
//!
//! Carrier 0 of every block carries the known reference symbol `c`; data and
//! pilot symbols occupy carriers `1..K`. Raw symbol vectors therefore have
//! `K - 1` entries, entry `i` belonging to carrier `i + 1`.
//!
//! PSK constellations are Gray mapped. Symbol index `m` (Gray-decoded from
//! the bit group, MSB first) maps to `exp(j(theta0 + 2*pi*m/Q))` with
//! `theta0 = 0` for BPSK and `pi/Q` otherwise, so QPSK bits
//! `00, 01, 11, 10` land on `45, 135, 225, 315` degrees.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// All waveform constants of one simulated link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmConfig {
    /// Number of carriers per block (K).
    pub carriers: usize,
    /// Number of blocks per frame (N).
    pub blocks: usize,
    /// Signal bandwidth in Hz (B).
    pub bandwidth: f64,
    /// Band center frequency in Hz.
    pub center_freq: f64,
    /// Sample rate in Hz; an integer multiple of the bandwidth.
    pub sample_rate: f64,
    /// Cyclic prefix duration in seconds.
    pub guard_interval: f64,
    /// PSK order Q, one of 2, 4, 8.
    pub psk_order: usize,
    /// Number of pilot carriers P in block 0 (carriers `1..=P`).
    pub pilot_count: usize,
    /// Known differential reference symbol on carrier 0.
    pub reference: C64,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self::table_defaults(1024)
    }
}

/// Product of carriers and blocks kept fixed when sweeping the carrier count.
pub const CARRIER_BLOCK_PRODUCT: usize = 1 << 13;

impl OfdmConfig {
    /// Reference link: 32 kHz center, 12 kHz bandwidth, 192 kHz sampling,
    /// 16 ms guard, QPSK, 200 pilots, `K * N = 2^13`.
    pub fn table_defaults(carriers: usize) -> Self {
        let carriers = carriers.max(2);
        Self {
            carriers,
            blocks: (CARRIER_BLOCK_PRODUCT / carriers).max(1),
            bandwidth: 12_000.0,
            center_freq: 32_000.0,
            sample_rate: 192_000.0,
            guard_interval: 0.016,
            psk_order: 4,
            pilot_count: default_pilot_count(carriers),
            reference: C64::new(1.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.carriers < 2 {
            return bad(format!(
                "carrier count {} must be at least 2",
                self.carriers
            ));
        }
        if self.blocks == 0 {
            return bad("block count must be positive".into());
        }
        if !(self.bandwidth > 0.0 && self.sample_rate > 0.0) {
            return bad("bandwidth and sample rate must be positive".into());
        }
        let ratio = self.sample_rate / self.bandwidth;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return bad(format!(
                "sample rate {} is not an integer multiple of bandwidth {}",
                self.sample_rate, self.bandwidth
            ));
        }
        if !(self.guard_interval >= 0.0) {
            return bad("guard interval must be non-negative".into());
        }
        if !matches!(self.psk_order, 2 | 4 | 8) {
            return bad(format!("PSK order {} not in {{2, 4, 8}}", self.psk_order));
        }
        if self.pilot_count < 2 || self.pilot_count > self.carriers - 1 {
            return bad(format!(
                "pilot count {} must lie in [2, K-1 = {}]",
                self.pilot_count,
                self.carriers - 1
            ));
        }
        if (self.reference.norm() - 1.0).abs() > 1e-12 {
            return bad("reference symbol must have unit modulus".into());
        }
        Ok(())
    }

    /// Carrier spacing `B / K` in Hz.
    pub fn carrier_spacing(&self) -> f64 {
        self.bandwidth / self.carriers as f64
    }

    /// Useful block duration `1 / carrier_spacing` in seconds.
    pub fn block_duration(&self) -> f64 {
        1.0 / self.carrier_spacing()
    }

    /// Sample-rate to bandwidth ratio.
    pub fn oversampling(&self) -> usize {
        (self.sample_rate / self.bandwidth).round() as usize
    }

    /// Samples in the useful part of one block, `K * fs / B`.
    pub fn samples_per_block(&self) -> usize {
        self.carriers * self.oversampling()
    }

    /// Cyclic prefix length in samples, `ceil(T_g * fs)`.
    pub fn guard_samples(&self) -> usize {
        let exact = self.guard_interval * self.sample_rate;
        // absorb representation error such as 0.016 * 192000 = 3072.0000000000005
        (exact - 1e-9).ceil().max(0.0) as usize
    }

    /// Samples per block including the cyclic prefix.
    pub fn block_stride(&self) -> usize {
        self.samples_per_block() + self.guard_samples()
    }

    /// Total samples in one transmitted frame.
    pub fn frame_samples(&self) -> usize {
        self.blocks * self.block_stride()
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Passband frequency of carrier 0. The K carriers sit symmetrically
    /// about `center_freq`.
    pub fn lowest_carrier(&self) -> f64 {
        self.center_freq - self.bandwidth / 2.0 + self.carrier_spacing() / 2.0
    }

    pub fn bits_per_symbol(&self) -> usize {
        bits_per_symbol(self.psk_order)
    }
}

/// Default pilot count for a carrier count: 200, capped at half the carriers.
pub fn default_pilot_count(carriers: usize) -> usize {
    200.min(carriers / 2).max(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolRole {
    /// Raw data symbols `b_k` for carriers `1..K`.
    Raw,
    /// Differentially encoded symbols `d_k` for carriers `0..K`.
    Encoded,
    /// Soft estimates produced by a differential detector.
    Detected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolVector {
    pub values: Vec<C64>,
    pub role: SymbolRole,
}

impl SymbolVector {
    pub fn new(values: Vec<C64>, role: SymbolRole) -> Self {
        Self { values, role }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn bits_per_symbol(q: usize) -> usize {
    q.trailing_zeros() as usize
}

fn phase_offset(q: usize) -> f64 {
    if q == 2 {
        0.0
    } else {
        PI / q as f64
    }
}

/// Constellation point for symbol index `m`.
pub fn psk_point(m: usize, q: usize) -> C64 {
    C64::from_polar(1.0, phase_offset(q) + 2.0 * PI * (m % q) as f64 / q as f64)
}

fn check_order(q: usize) -> Result<()> {
    if matches!(q, 2 | 4 | 8) {
        Ok(())
    } else {
        Err(Error::InputShape(format!(
            "PSK order {q} not in {{2, 4, 8}}"
        )))
    }
}

/// Gray-maps a bit sequence (one `bool` per bit, MSB first within a group)
/// onto unit-modulus Q-PSK symbols.
pub fn map_bits_to_psk(bits: &[bool], q: usize) -> Result<SymbolVector> {
    check_order(q)?;
    let width = bits_per_symbol(q);
    if bits.len() % width != 0 {
        return Err(Error::InputShape(format!(
            "{} bits is not a multiple of {width}",
            bits.len()
        )));
    }
    let values = bits
        .chunks(width)
        .map(|group| {
            let gray = group.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            psk_point(gray_to_binary(gray), q)
        })
        .collect();
    Ok(SymbolVector::new(values, SymbolRole::Raw))
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

/// `d_0 = c`, `d_k = b_k d_{k-1}`. `b` holds the K-1 symbols of carriers 1..K.
pub fn differential_encode(b: &SymbolVector, c: C64) -> SymbolVector {
    let mut values = Vec::with_capacity(b.len() + 1);
    let mut prev = c;
    values.push(prev);
    for &bk in &b.values {
        prev *= bk;
        values.push(prev);
    }
    SymbolVector::new(values, SymbolRole::Encoded)
}

/// `b_k = d_k / d_{k-1}` for carriers 1..K; fails on a zero denominator.
pub fn differential_decode(d: &SymbolVector) -> Result<SymbolVector> {
    let values = differential_ratios(&d.values)?;
    Ok(SymbolVector::new(values, SymbolRole::Detected))
}

/// Ratios of adjacent entries, `out[i] = x[i+1] / x[i]`.
pub fn differential_ratios(x: &[C64]) -> Result<Vec<C64>> {
    x.windows(2)
        .enumerate()
        .map(|(i, w)| {
            if w[0] == C64::new(0.0, 0.0) {
                Err(Error::DegenerateDivision { carrier: i })
            } else {
                Ok(w[1] / w[0])
            }
        })
        .collect()
}

/// Hard decision onto the nearest Q-PSK point; equidistant points resolve to
/// the one with the smaller phase angle in `[0, 2*pi)`.
pub fn slice_psk(bhat: &SymbolVector, q: usize) -> SymbolVector {
    let points: Vec<C64> = (0..q).map(|m| psk_point(m, q)).collect();
    let values = bhat
        .values
        .iter()
        .map(|&v| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (m, p) in points.iter().enumerate() {
                let d = (v - p).norm_sqr();
                if d < best_d - 1e-12 {
                    best = m;
                    best_d = d;
                }
            }
            points[best]
        })
        .collect();
    SymbolVector::new(values, SymbolRole::Raw)
}
