//! Band-limited interpolation with a Kaiser-windowed sinc kernel.
//!
//! The kernel is tabulated on a fine grid and linearly interpolated. Table
//! entries at nonzero integer offsets are exactly zero, so evaluating the
//! signal at an integer position returns that sample unchanged.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::{Error, Result, C64};

#[derive(Debug, Clone)]
pub struct SincInterpolator {
    half_width: usize,
    resolution: usize,
    table: Vec<f64>,
}

fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

impl SincInterpolator {
    /// `half_width` taps on each side (2 * half_width total), `resolution`
    /// table points per unit offset, Kaiser shape `beta`.
    pub fn new(half_width: usize, resolution: usize, beta: f64) -> Self {
        let h = half_width as f64;
        let norm = bessel_i0(beta);
        let table = (0..=half_width * resolution + 1)
            .map(|i| {
                if i == 0 {
                    return 1.0;
                }
                if i % resolution == 0 {
                    return 0.0;
                }
                let x = i as f64 / resolution as f64;
                if x >= h {
                    return 0.0;
                }
                let r = x / h;
                let window = bessel_i0(beta * (1.0 - r * r).sqrt()) / norm;
                (PI * x).sin() / (PI * x) * window
            })
            .collect();
        Self {
            half_width,
            resolution,
            table,
        }
    }

    /// Shared 64-tap interpolator used by the channel and front end.
    pub fn shared() -> &'static SincInterpolator {
        static INTERP: OnceLock<SincInterpolator> = OnceLock::new();
        INTERP.get_or_init(|| SincInterpolator::new(32, 4096, 10.0))
    }

    pub fn taps(&self) -> usize {
        2 * self.half_width
    }

    fn kernel(&self, x: f64) -> f64 {
        let p = x.abs() * self.resolution as f64;
        let i = p as usize;
        if i >= self.half_width * self.resolution {
            return 0.0;
        }
        let frac = p - i as f64;
        self.table[i] + (self.table[i + 1] - self.table[i]) * frac
    }

    /// Value of the band-limited continuation of `signal` at fractional
    /// index `pos`; samples outside the sequence count as zero.
    pub fn sample(&self, signal: &[C64], pos: f64) -> C64 {
        let base = pos.floor();
        let frac = pos - base;
        let base = base as i64;
        let hw = self.half_width as i64;
        let len = signal.len() as i64;
        let lo = (base - hw + 1).max(0);
        let hi = (base + hw).min(len - 1);
        let mut acc = C64::new(0.0, 0.0);
        if lo > hi {
            return acc;
        }
        if frac == 0.0 {
            // every other tap sits on a kernel zero
            return if (0..len).contains(&base) {
                signal[base as usize]
            } else {
                acc
            };
        }
        for m in lo..=hi {
            let w = self.kernel(frac + (base - m) as f64);
            acc += signal[m as usize] * w;
        }
        acc
    }

    /// Real-valued counterpart of [`SincInterpolator::sample`].
    pub fn sample_real(&self, signal: &[f64], pos: f64) -> f64 {
        let base = pos.floor();
        let frac = pos - base;
        let base = base as i64;
        let hw = self.half_width as i64;
        let len = signal.len() as i64;
        if frac == 0.0 {
            return if (0..len).contains(&base) {
                signal[base as usize]
            } else {
                0.0
            };
        }
        let lo = (base - hw + 1).max(0);
        let hi = (base + hw).min(len - 1);
        (lo..=hi)
            .map(|m| signal[m as usize] * self.kernel(frac + (base - m) as f64))
            .sum()
    }
}

/// Resamples by rate `1 + factor`: `out[n] = s(n * (1 + factor))`, with
/// `floor(len / (1 + factor))` output samples. A positive factor compresses
/// the waveform in time and scales every frequency by `1 + factor`.
pub fn resample_doppler(signal: &[C64], factor: f64) -> Result<Vec<C64>> {
    if !(factor.abs() < 1e-2) {
        return Err(Error::Config(format!(
            "resampling factor {factor} outside (-1e-2, 1e-2)"
        )));
    }
    if factor == 0.0 {
        return Ok(signal.to_vec());
    }
    let rate = 1.0 + factor;
    let out_len = (signal.len() as f64 / rate).floor() as usize;
    let interp = SincInterpolator::shared();
    Ok((0..out_len)
        .map(|n| interp.sample(signal, n as f64 * rate))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(f: f64, fs: f64, n: usize) -> Vec<C64> {
        (0..n)
            .map(|i| C64::from_polar(1.0, 2.0 * PI * f * i as f64 / fs))
            .collect()
    }

    /// Peak of |DTFT| located by golden-section search around a coarse guess.
    fn peak_frequency(x: &[C64], fs: f64, guess: f64, span: f64) -> f64 {
        let mag = |f: f64| {
            x.iter()
                .enumerate()
                .map(|(n, v)| v * C64::from_polar(1.0, -2.0 * PI * f * n as f64 / fs))
                .sum::<C64>()
                .norm()
        };
        let (mut a, mut b) = (guess - span, guess + span);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..80 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if mag(c) > mag(d) {
                b = d;
            } else {
                a = c;
            }
        }
        (a + b) / 2.0
    }

    #[test]
    fn zero_factor_is_bit_exact() {
        let x = tone(1234.0, 192_000.0, 500);
        assert_eq!(resample_doppler(&x, 0.0).unwrap(), x);
    }

    #[test]
    fn rejects_large_factor() {
        assert!(resample_doppler(&[C64::new(1.0, 0.0)], 0.02).is_err());
    }

    #[test]
    fn integer_positions_are_exact() {
        let x = tone(3000.0, 192_000.0, 200);
        let it = SincInterpolator::shared();
        for n in [0usize, 1, 50, 199] {
            assert_eq!(it.sample(&x, n as f64), x[n]);
        }
        assert_eq!(it.sample(&x, -1.0), C64::new(0.0, 0.0));
    }

    #[test]
    fn output_length() {
        let x = vec![C64::new(1.0, 0.0); 10_000];
        assert_eq!(
            resample_doppler(&x, 2.5e-4).unwrap().len(),
            (10_000.0 / 1.00025f64) as usize
        );
        assert_eq!(
            resample_doppler(&x, -2.5e-4).unwrap().len(),
            (10_000.0 / 0.99975f64) as usize
        );
    }

    #[test]
    fn tone_frequency_scales_with_factor() {
        let fs = 192_000.0;
        let n = 19_200; // bin width 10 Hz
        let f = 6_000.0;
        let alpha = 3e-4;
        let x = tone(f, fs, n + 200);
        let y = resample_doppler(&x, alpha).unwrap();
        let y = &y[64..64 + n];
        let est = peak_frequency(y, fs, f * (1.0 + alpha), 5.0);
        let bin = fs / n as f64;
        assert!(
            (est - f * (1.0 + alpha)).abs() < 0.01 * bin,
            "estimated {est}, expected {}",
            f * (1.0 + alpha)
        );
    }

    #[test]
    fn inverse_pair_recovers_signal() {
        let fs = 192_000.0;
        let x: Vec<C64> = (0..20_000)
            .map(|i| {
                let t = i as f64 / fs;
                C64::from_polar(1.0, 2.0 * PI * 1_500.0 * t)
                    + 0.5 * C64::from_polar(1.0, 2.0 * PI * 7_300.0 * t + 0.4)
                    + 0.25 * C64::from_polar(1.0, -2.0 * PI * 3_100.0 * t)
            })
            .collect();
        let alpha = 2.5e-4;
        let y = resample_doppler(&x, alpha).unwrap();
        let z = resample_doppler(&y, -alpha / (1.0 + alpha)).unwrap();
        let (a, b) = (200, z.len().min(x.len()) - 200);
        let err: f64 = (a..b).map(|i| (z[i] - x[i]).norm_sqr()).sum();
        let sig: f64 = (a..b).map(|i| x[i].norm_sqr()).sum();
        let db = 10.0 * (err / sig).log10();
        assert!(db <= -80.0, "round trip error {db} dB");
    }
}
