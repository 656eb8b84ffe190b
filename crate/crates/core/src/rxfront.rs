//! Idealized receiver front end.
//!
//! Frame timing is known. The front end optionally undoes a coarse Doppler
//! estimate by resampling, removes the matching carrier rotation, and cuts
//! each block's FFT window out of the stream. The window may start
//! `window_advance` seconds inside the cyclic prefix; the block's time base
//! records that offset so the demodulators stay phase-aligned.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::resample::resample_doppler;
use crate::signal::OfdmConfig;
use crate::tx::ComplexBlock;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontEndConfig {
    /// Doppler factor removed by resampling before demodulation.
    pub coarse_alpha: f64,
    /// How far the FFT window starts ahead of the nominal block start, in
    /// seconds. Must not exceed the guard interval.
    pub window_advance: f64,
}

impl Default for FrontEndConfig {
    fn default() -> Self {
        Self {
            coarse_alpha: 0.0,
            window_advance: 0.004,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReceivedFrame {
    /// One FFT window per block, `K * fs / B` samples each.
    pub blocks: Vec<ComplexBlock>,
    /// Doppler factor left after coarse compensation; diagnostics only.
    pub residual_doppler: f64,
}

pub fn front_end(
    received: &[C64],
    cfg: &OfdmConfig,
    fe: &FrontEndConfig,
    true_alpha: f64,
) -> Result<ReceivedFrame> {
    let expected = cfg.frame_samples();
    if received.len() != expected {
        return Err(Error::Framing {
            expected,
            actual: received.len(),
        });
    }
    let advance = (fe.window_advance * cfg.sample_rate).round() as usize;
    let ncp = cfg.guard_samples();
    if advance > ncp {
        return Err(Error::Config(format!(
            "window advance of {advance} samples exceeds the {ncp}-sample guard"
        )));
    }
    let ac = fe.coarse_alpha;
    let stream = if ac == 0.0 {
        received.to_vec()
    } else {
        let mut y = resample_doppler(received, -ac / (1.0 + ac))?;
        let w = -2.0 * PI * cfg.lowest_carrier() * ac / (1.0 + ac) / cfg.sample_rate;
        for (n, v) in y.iter_mut().enumerate() {
            *v *= C64::from_polar(1.0, w * n as f64);
        }
        y.resize(expected, C64::new(0.0, 0.0));
        y
    };

    let nsamp = cfg.samples_per_block();
    let dt = cfg.sample_period();
    let blocks = (0..cfg.blocks)
        .map(|b| {
            let start = b * cfg.block_stride() + ncp - advance;
            ComplexBlock {
                samples: stream[start..start + nsamp].to_vec(),
                t0: -(advance as f64) * dt,
                dt,
            }
        })
        .collect();
    Ok(ReceivedFrame {
        blocks,
        residual_doppler: (true_alpha - ac) / (1.0 + ac),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, ChannelSpec};
    use crate::tx::{modulate_block, Frame};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (OfdmConfig, Frame) {
        let cfg = OfdmConfig {
            blocks: 3,
            ..OfdmConfig::table_defaults(64)
        };
        let f = Frame::random(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        (cfg, f)
    }

    #[test]
    fn loopback_returns_transmitted_blocks() {
        let (cfg, f) = setup(1);
        let fe = FrontEndConfig {
            window_advance: 0.0,
            ..Default::default()
        };
        let rx = front_end(&f.baseband, &cfg, &fe, 0.0).unwrap();
        assert_eq!(rx.blocks.len(), cfg.blocks);
        for (blk, d) in rx.blocks.iter().zip(&f.blocks) {
            let tx = modulate_block(d, &cfg).unwrap();
            for (a, b) in blk.samples.iter().zip(&tx.samples) {
                assert!((a - b).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn advanced_window_samples_the_cyclic_waveform() {
        let (cfg, f) = setup(2);
        let rx = front_end(&f.baseband, &cfg, &FrontEndConfig::default(), 0.0).unwrap();
        let tx = modulate_block(&f.blocks[1], &cfg).unwrap();
        let blk = &rx.blocks[1];
        assert!(blk.t0 < 0.0);
        let n = tx.len() as i64;
        let shift = (blk.t0 / blk.dt).round() as i64;
        for (i, v) in blk.samples.iter().enumerate() {
            let j = (i as i64 + shift).rem_euclid(n) as usize;
            assert!((v - tx.samples[j]).norm() <= 1e-9);
        }
    }

    #[test]
    fn residual_doppler_bookkeeping() {
        let (cfg, f) = setup(3);
        let alpha = 2.5e-4;
        let ch = ChannelSpec::ideal().with_doppler(alpha);
        let r = apply_channel(&f.baseband, &ch, &cfg).unwrap();
        let full = front_end(&r, &cfg, &FrontEndConfig::default(), alpha).unwrap();
        assert_eq!(full.residual_doppler, alpha);
        let fe = FrontEndConfig {
            coarse_alpha: alpha,
            ..Default::default()
        };
        let comp = front_end(&r, &cfg, &fe, alpha).unwrap();
        assert_eq!(comp.residual_doppler, 0.0);
    }

    #[test]
    fn framing_errors() {
        let (cfg, f) = setup(4);
        let err = front_end(&f.baseband[1..], &cfg, &FrontEndConfig::default(), 0.0).unwrap_err();
        assert!(matches!(err, Error::Framing { .. }));
        let fe = FrontEndConfig {
            window_advance: 1.0,
            ..Default::default()
        };
        assert!(front_end(&f.baseband, &cfg, &fe, 0.0).is_err());
    }
}
