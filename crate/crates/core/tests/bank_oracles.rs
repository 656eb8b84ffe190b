//! Demodulator banks against brute-force direct summation.

use std::f64::consts::PI;

use icilab::bank::{conv_fft, fractional_bank, partial_bank, time_weighted_bank, DemodBank};
use icilab::signal::OfdmConfig;
use icilab::tx::ComplexBlock;
use icilab::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CASES: u64 = 100;
const TOL: f64 = 1e-9;

fn cfg() -> OfdmConfig {
    OfdmConfig::table_defaults(64)
}

fn random_block(cfg: &OfdmConfig, rng: &mut impl Rng) -> ComplexBlock {
    let n = cfg.samples_per_block();
    ComplexBlock {
        samples: (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect(),
        // exercise the window time base as the front end sets it
        t0: -rng.random_range(0.0..0.01),
        dt: cfg.sample_period(),
    }
}

/// `1/Nsamp * sum_{n in range} g(t_n) v[n] exp(-j 2 pi f t_n)`.
fn direct(block: &ComplexBlock, f: f64, timed: bool, range: std::ops::Range<usize>) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for n in range {
        let t = block.t0 + n as f64 * block.dt;
        let g = if timed { t } else { 1.0 };
        acc += block.samples[n] * g * C64::from_polar(1.0, -2.0 * PI * f * t);
    }
    acc / block.len() as f64
}

fn relative_error(got: &[C64], want: &[C64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let scale = want.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let err = got
        .iter()
        .zip(want)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    err / scale
}

fn bank_values(bank: &DemodBank) -> Vec<C64> {
    (0..bank.carriers())
        .flat_map(|k| bank.row(k).to_vec())
        .collect()
}

fn fractional_oracle(
    block: &ComplexBlock,
    span: usize,
    fe: f64,
    timed: bool,
    cfg: &OfdmConfig,
) -> Vec<C64> {
    let df = cfg.carrier_spacing();
    let a_max = span as i64;
    (0..cfg.carriers)
        .flat_map(|k| {
            (-a_max..=a_max).map(move |a| {
                let f = k as f64 * df + a as f64 * fe / (span + 1) as f64;
                direct(block, f, timed, 0..block.len())
            })
        })
        .collect()
}

#[test]
fn conv_fft_matches_direct_sum() {
    let cfg = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..CASES {
        let block = random_block(&cfg, &mut rng);
        let want: Vec<C64> = (0..cfg.carriers)
            .map(|k| {
                direct(
                    &block,
                    k as f64 * cfg.carrier_spacing(),
                    false,
                    0..block.len(),
                )
            })
            .collect();
        let got = conv_fft(&block, &cfg).unwrap();
        assert!(relative_error(&got, &want) <= TOL);
    }
}

#[test]
fn fractional_bank_matches_direct_sum() {
    let cfg = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..CASES {
        let block = random_block(&cfg, &mut rng);
        let span = rng.random_range(0..=2);
        let fe = cfg.carrier_spacing() * rng.random_range(0.2..3.0);
        let got = fractional_bank(&block, span, fe, &cfg).unwrap();
        let err = relative_error(
            &bank_values(&got),
            &fractional_oracle(&block, span, fe, false, &cfg),
        );
        assert!(err <= TOL, "A={span} fe={fe}: {err}");
    }
}

#[test]
fn time_weighted_bank_matches_direct_sum() {
    let cfg = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..CASES {
        let block = random_block(&cfg, &mut rng);
        let span = rng.random_range(0..=2);
        let fe = cfg.carrier_spacing() * rng.random_range(0.2..3.0);
        let got = time_weighted_bank(&block, span, fe, &cfg).unwrap();
        let err = relative_error(
            &bank_values(&got),
            &fractional_oracle(&block, span, fe, true, &cfg),
        );
        assert!(err <= TOL, "A={span} fe={fe}: {err}");
    }
}

#[test]
fn partial_bank_matches_direct_sum() {
    let cfg = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..CASES {
        let block = random_block(&cfg, &mut rng);
        let segments = rng.random_range(1..=5);
        let n = block.len();
        let want: Vec<C64> = (0..cfg.carriers)
            .flat_map(|k| {
                let block = &block;
                let f = k as f64 * cfg.carrier_spacing();
                (0..segments)
                    .map(move |i| direct(block, f, false, i * n / segments..(i + 1) * n / segments))
            })
            .collect();
        let got = partial_bank(&block, segments, &cfg).unwrap();
        assert!(
            relative_error(&bank_values(&got), &want) <= TOL,
            "I={segments}"
        );
    }
}

/// With `A = I - 1` and `fe = df`, the fractional bank holds the I-way
/// fractional FFT outputs `y_{k,i}` at `(k + i/I) df`: `z_{k,a} = y_{k,a}`
/// and `z_{k,-a} = y_{k-1,I-a}`.
#[test]
fn fractional_bank_index_mapping() {
    let cfg = cfg();
    let df = cfg.carrier_spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for fractions in 2..=4usize {
        let block = random_block(&cfg, &mut rng);
        let span = fractions - 1;
        let bank = fractional_bank(&block, span, df, &cfg).unwrap();
        let y = |k: usize, i: usize| {
            direct(
                &block,
                (k as f64 + i as f64 / fractions as f64) * df,
                false,
                0..block.len(),
            )
        };
        let scale = (0..cfg.carriers)
            .map(|k| y(k, 0).norm())
            .fold(0.0, f64::max);
        for k in 1..cfg.carriers {
            for a in 0..=span as i64 {
                let pos = bank.offset(k, a);
                let neg = bank.offset(k, -a);
                assert!((pos - y(k, a as usize)).norm() <= TOL * scale);
                let want = if a == 0 {
                    y(k, 0)
                } else {
                    y(k - 1, fractions - a as usize)
                };
                assert!(
                    (neg - want).norm() <= TOL * scale,
                    "I={fractions} k={k} a=-{a}"
                );
            }
        }
    }
}

fn tone(cfg: &OfdmConfig, freq: f64, t0: f64) -> ComplexBlock {
    let dt = cfg.sample_period();
    ComplexBlock {
        samples: (0..cfg.samples_per_block())
            .map(|n| C64::from_polar(1.0, 2.0 * PI * freq * (t0 + n as f64 * dt)))
            .collect(),
        t0,
        dt,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn banks_are_linear(seed in any::<u64>(), ar in -2.0..2.0f64, ai in -2.0..2.0f64, fe_frac in 0.3..2.0f64) {
        let cfg = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_block(&cfg, &mut rng);
        let y = ComplexBlock { t0: x.t0, ..random_block(&cfg, &mut rng) };
        let a = C64::new(ar, ai);
        let mix = ComplexBlock {
            samples: x.samples.iter().zip(&y.samples).map(|(u, v)| a * u + v).collect(),
            ..x.clone()
        };
        let fe = fe_frac * cfg.carrier_spacing();
        let bx = bank_values(&fractional_bank(&x, 1, fe, &cfg).unwrap());
        let by = bank_values(&fractional_bank(&y, 1, fe, &cfg).unwrap());
        let bm = bank_values(&fractional_bank(&mix, 1, fe, &cfg).unwrap());
        let want: Vec<C64> = bx.iter().zip(&by).map(|(u, v)| a * u + v).collect();
        prop_assert!(relative_error(&bm, &want) <= TOL);
    }

    /// A tone offset by `eps` from carrier k is seen more strongly by the
    /// nearest fractional column than by the centre one whenever `eps` lies
    /// inside the bank's reach but past half a column spacing.
    #[test]
    fn compensation_range(k in 4usize..60, span in 1usize..=2, fe_frac in 0.5..2.0f64, pos in 0.0..1.0f64, sign in prop::bool::ANY) {
        let cfg = cfg();
        let df = cfg.carrier_spacing();
        let fe = fe_frac * df;
        let step = fe / (span + 1) as f64;
        let lo = 0.5 * step;
        let hi = span as f64 * step;
        // stay clear of the boundaries where the two columns tie
        let mag = lo + (hi - lo) * (0.02 + 0.96 * pos);
        // and of the neighbouring carrier, which the Dirichlet kernel would hit exactly
        prop_assume!((mag / df - (mag / df).round()).abs() > 0.05);
        let eps = if sign { mag } else { -mag };
        let block = tone(&cfg, k as f64 * df + eps, 0.0);
        let bank = fractional_bank(&block, span, fe, &cfg).unwrap();
        let centre = bank.offset(k, 0).norm();
        let best = (-(span as i64)..=span as i64)
            .filter(|&a| a != 0)
            .map(|a| bank.offset(k, a).norm())
            .fold(0.0, f64::max);
        prop_assert!(best > centre, "eps {eps}: best {best} centre {centre}");
    }

    /// Shifting the input by `a fe / (A + 1)` moves the content of column a
    /// onto column 0.
    #[test]
    fn frequency_shift_theorem(seed in any::<u64>(), fe_frac in 0.3..2.0f64) {
        let cfg = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let block = random_block(&cfg, &mut rng);
        let fe = fe_frac * cfg.carrier_spacing();
        let bank = fractional_bank(&block, 1, fe, &cfg).unwrap();
        let shift = fe / 2.0;
        let moved = ComplexBlock {
            samples: block
                .samples
                .iter()
                .enumerate()
                .map(|(n, v)| v * C64::from_polar(1.0, -2.0 * PI * shift * block.time(n)))
                .collect(),
            ..block.clone()
        };
        let centre = conv_fft(&moved, &cfg).unwrap();
        let col = bank.column(2);
        prop_assert!(relative_error(&centre, &col) <= 1e-6);
    }
}
