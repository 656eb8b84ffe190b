//! Multipath propagation with uniform Doppler scaling and additive noise.
//!
//! Path `l` contributes `h_l s((1 + alpha) t - tau_l)` to the passband
//! signal. On the complex envelope (referenced to the carrier-0 frequency
//! `f0`) that becomes a time-scaled, delayed copy rotated by
//! `exp(j 2 pi f0 (alpha t - tau_l))`, optionally with a slow phase drift.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::resample::SincInterpolator;
use crate::signal::OfdmConfig;
use crate::tx::{analytic_signal, downconvert, upconvert};
use crate::{Error, Result, C64};

/// Largest accepted Doppler factor magnitude.
pub const MAX_DOPPLER: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub gain: C64,
    /// Delay in seconds; must stay below the guard interval.
    pub delay: f64,
    /// Phase drift rate in rad/s.
    #[serde(default)]
    pub phase_drift: f64,
    /// Per-path Doppler factor overriding the channel-wide value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doppler_factor: Option<f64>,
}

impl PathSpec {
    pub fn new(gain: C64, delay: f64) -> Self {
        Self {
            gain,
            delay,
            phase_drift: 0.0,
            doppler_factor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSpec {
    pub paths: Vec<PathSpec>,
    pub doppler_factor: f64,
    /// In-band SNR in dB; `inf` disables noise.
    pub snr_db: f64,
    pub seed: u64,
}

impl Default for ChannelSpec {
    /// Three-path desk channel with no Doppler and no noise.
    fn default() -> Self {
        Self {
            paths: vec![
                PathSpec::new(C64::new(1.0, 0.0), 0.0),
                PathSpec::new(C64::from_polar(0.5, PI / 4.0), 0.002),
                PathSpec::new(C64::from_polar(0.25, -PI / 3.0), 0.005),
            ],
            doppler_factor: 0.0,
            snr_db: f64::INFINITY,
            seed: 0,
        }
    }
}

impl ChannelSpec {
    /// Single unit-gain, zero-delay path.
    pub fn ideal() -> Self {
        Self {
            paths: vec![PathSpec::new(C64::new(1.0, 0.0), 0.0)],
            ..Self::default()
        }
    }

    pub fn with_doppler(mut self, alpha: f64) -> Self {
        self.doppler_factor = alpha;
        self
    }

    pub fn with_snr(mut self, snr_db: f64) -> Self {
        self.snr_db = snr_db;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn path_doppler(&self, p: &PathSpec) -> f64 {
        p.doppler_factor.unwrap_or(self.doppler_factor)
    }

    pub fn validate(&self, cfg: &OfdmConfig) -> Result<()> {
        if self.paths.is_empty() {
            return Err(Error::Config("channel needs at least one path".into()));
        }
        for (l, p) in self.paths.iter().enumerate() {
            let a = self.path_doppler(p);
            if !(a.abs() <= MAX_DOPPLER) {
                return Err(Error::Config(format!(
                    "path {l}: Doppler factor {a} out of range"
                )));
            }
            if !(p.delay >= 0.0 && p.delay < cfg.guard_interval) {
                return Err(Error::Config(format!(
                    "path {l}: delay {} s outside [0, guard interval {} s)",
                    p.delay, cfg.guard_interval
                )));
            }
        }
        if self.snr_db.is_nan() {
            return Err(Error::Config("SNR is NaN".into()));
        }
        Ok(())
    }
}

/// Noiseless multipath propagation on the complex envelope. Output has the
/// same length as the input; positions past either end read zeros.
pub fn propagate(input: &[C64], spec: &ChannelSpec, cfg: &OfdmConfig) -> Result<Vec<C64>> {
    spec.validate(cfg)?;
    if input.is_empty() {
        return Err(Error::InputShape("empty frame".into()));
    }
    let interp = SincInterpolator::shared();
    let fs = cfg.sample_rate;
    let f0 = cfg.lowest_carrier();
    let mut out = vec![C64::new(0.0, 0.0); input.len()];
    for p in &spec.paths {
        let alpha = spec.path_doppler(p);
        let rate = 1.0 + alpha;
        let shift = p.delay * fs;
        for (n, o) in out.iter_mut().enumerate() {
            let t = n as f64 / fs;
            let pos = rate * n as f64 - shift;
            let phase = 2.0 * PI * f0 * (alpha * t - p.delay) + p.phase_drift * t;
            *o += p.gain * interp.sample(input, pos) * C64::from_polar(1.0, phase);
        }
    }
    Ok(out)
}

/// Channel output: propagation plus circular complex Gaussian noise at the
/// spec's in-band SNR. The noise is white over the full sample rate, so its
/// total variance is `P_signal * (fs / B) / snr`.
pub fn apply_channel(input: &[C64], spec: &ChannelSpec, cfg: &OfdmConfig) -> Result<Vec<C64>> {
    let clean = propagate(input, spec, cfg)?;
    if spec.snr_db.is_infinite() && spec.snr_db > 0.0 {
        return Ok(clean);
    }
    let full_band_snr = spec.snr_db - 10.0 * (cfg.sample_rate / cfg.bandwidth).log10();
    add_noise(&clean, full_band_snr, spec.seed)
}

/// Adds circular complex Gaussian noise with variance
/// `mean(|signal|^2) / 10^(snr_db / 10)`; `snr_db = +inf` returns the input.
pub fn add_noise(signal: &[C64], snr_db: f64, seed: u64) -> Result<Vec<C64>> {
    if snr_db == f64::INFINITY {
        return Ok(signal.to_vec());
    }
    let power = signal.iter().map(|s| s.norm_sqr()).sum::<f64>() / signal.len().max(1) as f64;
    if !(power > 0.0) {
        return Err(Error::InputShape(
            "noise reference signal has zero power".into(),
        ));
    }
    let variance = power / 10f64.powf(snr_db / 10.0);
    let normal = Normal::new(0.0, (variance / 2.0).sqrt())
        .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(signal
        .iter()
        .map(|s| s + C64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect())
}

/// Cross-check path: the same channel applied to the real passband waveform
/// and brought back to baseband. Noise is not added.
pub fn apply_channel_passband(
    input: &[C64],
    spec: &ChannelSpec,
    cfg: &OfdmConfig,
) -> Result<Vec<C64>> {
    spec.validate(cfg)?;
    let passband = upconvert(input, cfg)?;
    // complex gains act on the analytic passband signal
    let analytic = analytic_signal(&passband);
    let interp = SincInterpolator::shared();
    let fs = cfg.sample_rate;
    let mut received = vec![0.0; passband.len()];
    for p in &spec.paths {
        let rate = 1.0 + spec.path_doppler(p);
        let shift = p.delay * fs;
        for (n, r) in received.iter_mut().enumerate() {
            let t = n as f64 / fs;
            let v = p.gain
                * interp.sample(&analytic, rate * n as f64 - shift)
                * C64::from_polar(1.0, p.phase_drift * t);
            *r += v.re;
        }
    }
    downconvert(&received, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tx::{band_limit, Frame};

    fn cfg64() -> OfdmConfig {
        OfdmConfig {
            blocks: 4,
            ..OfdmConfig::table_defaults(64)
        }
    }

    fn frame(cfg: &OfdmConfig, seed: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Frame::random(cfg, &mut rng).unwrap()
    }

    fn rel_err_db(a: &[C64], b: &[C64], range: std::ops::Range<usize>) -> f64 {
        let err: f64 = range.clone().map(|i| (a[i] - b[i]).norm_sqr()).sum();
        let sig: f64 = range.map(|i| b[i].norm_sqr()).sum();
        10.0 * (err / sig).log10()
    }

    #[test]
    fn identity_channel_is_bit_exact() {
        let cfg = cfg64();
        let f = frame(&cfg, 1);
        let out = apply_channel(&f.baseband, &ChannelSpec::ideal(), &cfg).unwrap();
        assert_eq!(out, f.baseband);
    }

    #[test]
    fn two_path_matches_direct_convolution() {
        let cfg = cfg64();
        let f = frame(&cfg, 2);
        let spec = ChannelSpec {
            paths: vec![
                PathSpec::new(C64::new(1.0, 0.0), 0.0),
                PathSpec::new(C64::new(0.5, 0.0), 0.002),
            ],
            ..ChannelSpec::ideal()
        };
        let out = apply_channel(&f.baseband, &spec, &cfg).unwrap();
        // h(t) = delta(t) + 0.5 exp(-j 2 pi f0 tau) delta(t - tau) on the envelope
        let lag = (0.002 * cfg.sample_rate).round() as usize;
        let rot = C64::from_polar(0.5, -2.0 * PI * cfg.lowest_carrier() * 0.002);
        for n in 0..out.len() {
            let mut want = f.baseband[n];
            if n >= lag {
                want += rot * f.baseband[n - lag];
            }
            assert!((out[n] - want).norm() <= 1e-9 * want.norm().max(1.0));
        }
    }

    #[test]
    fn delay_beyond_guard_is_rejected() {
        let cfg = cfg64();
        let spec = ChannelSpec {
            paths: vec![PathSpec::new(C64::new(1.0, 0.0), cfg.guard_interval)],
            ..ChannelSpec::ideal()
        };
        let err = apply_channel(&[C64::new(1.0, 0.0); 8], &spec, &cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(ChannelSpec::ideal()
            .with_doppler(0.02)
            .validate(&cfg)
            .is_err());
    }

    #[test]
    fn noise_variance_matches_snr() {
        let signal = vec![C64::new(1.0, 0.0); 1_000_000];
        let noisy = add_noise(&signal, 10.0, 42).unwrap();
        let p: f64 = noisy
            .iter()
            .zip(&signal)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / signal.len() as f64;
        let db = 10.0 * p.log10();
        assert!((db + 10.0).abs() <= 0.1, "noise power {db} dB");
    }

    #[test]
    fn noise_is_seeded() {
        let signal = vec![C64::new(0.3, -0.2); 1000];
        assert_eq!(
            add_noise(&signal, 5.0, 7).unwrap(),
            add_noise(&signal, 5.0, 7).unwrap()
        );
        assert_ne!(
            add_noise(&signal, 5.0, 7).unwrap(),
            add_noise(&signal, 5.0, 8).unwrap()
        );
        assert_eq!(add_noise(&signal, f64::INFINITY, 7).unwrap(), signal);
        assert!(add_noise(&[C64::new(0.0, 0.0); 4], 5.0, 1).is_err());
    }

    #[test]
    fn in_band_snr_definition() {
        let cfg = cfg64();
        let f = frame(&cfg, 3);
        let spec = ChannelSpec::ideal().with_snr(20.0).with_seed(5);
        let noisy = apply_channel(&f.baseband, &spec, &cfg).unwrap();
        let mut noise: Vec<C64> = noisy.iter().zip(&f.baseband).map(|(a, b)| a - b).collect();
        band_limit(&mut noise, cfg.sample_rate, 0.0, cfg.bandwidth);
        let pn = noise.iter().map(|v| v.norm_sqr()).sum::<f64>();
        let ps = f.baseband.iter().map(|v| v.norm_sqr()).sum::<f64>();
        let snr = 10.0 * (ps / pn).log10();
        assert!((snr - 20.0).abs() < 0.3, "in-band snr {snr}");
    }

    #[test]
    fn noiseless_unit_path_preserves_power() {
        let cfg = cfg64();
        let f = frame(&cfg, 4);
        let out = apply_channel(
            &f.baseband,
            &ChannelSpec::ideal().with_doppler(2.5e-4),
            &cfg,
        )
        .unwrap();
        let guard = 200;
        let n = out.len() - 2 * guard;
        let p_in = f.baseband[guard..guard + n]
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            / n as f64;
        let p_out = out[guard..guard + n]
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((10.0 * (p_out / p_in).log10()).abs() <= 0.01);
    }

    #[test]
    fn channel_is_linear() {
        let cfg = cfg64();
        let x = frame(&cfg, 5).baseband;
        let y = frame(&cfg, 6).baseband;
        let spec = ChannelSpec::default().with_doppler(1.7e-4);
        let (a, b) = (C64::new(0.7, -0.2), C64::new(-1.3, 0.4));
        let mix: Vec<C64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let lhs = apply_channel(&mix, &spec, &cfg).unwrap();
        let cx = apply_channel(&x, &spec, &cfg).unwrap();
        let cy = apply_channel(&y, &spec, &cfg).unwrap();
        for i in 0..lhs.len() {
            let rhs = a * cx[i] + b * cy[i];
            assert!((lhs[i] - rhs).norm() <= 1e-9 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn baseband_and_passband_paths_agree() {
        let cfg = cfg64();
        // 18432 samples puts both mixing images on DFT bins; the input is
        // band-limited so the two models see the same spectrum
        let mut x = frame(&cfg, 7).baseband;
        x.resize(18_432, C64::new(0.0, 0.0));
        band_limit(
            &mut x,
            cfg.sample_rate,
            -cfg.bandwidth / 4.0,
            1.25 * cfg.bandwidth,
        );
        let spec = ChannelSpec::default().with_doppler(2.5e-4);
        let mut bb = apply_channel(&x, &spec, &cfg).unwrap();
        band_limit(
            &mut bb,
            cfg.sample_rate,
            -cfg.bandwidth / 2.0,
            1.5 * cfg.bandwidth,
        );
        let pb = apply_channel_passband(&x, &spec, &cfg).unwrap();
        let edge = bb.len() / 20;
        let db = rel_err_db(&pb, &bb, edge..bb.len() - edge);
        assert!(db <= -50.0, "baseband/passband mismatch {db} dB");
    }
}
