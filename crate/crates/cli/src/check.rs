//! Quick self-checks run by `icilab check`. Each prints one PASS/FAIL line.

use std::f64::consts::PI;
use std::time::Instant;

use icilab::bank::{conv_fft, fractional_bank, WeightSet};
use icilab::channel::{apply_channel, ChannelSpec};
use icilab::estimator::{
    estimate_fiducial_offset, fe_gradient_scale, EstimatorConfig, PilotProblem, Pilots,
};
use icilab::harness::{run_experiment, ExperimentSpec, SweepAxis};
use icilab::receivers::{frame_mse, run_receiver, ReceiverKind, ReceiverSettings};
use icilab::rxfront::{front_end, FrontEndConfig, ReceivedFrame};
use icilab::signal::OfdmConfig;
use icilab::tx::{ComplexBlock, Frame};
use icilab::{Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<std::result::Result<String, String>>;

pub fn run_all() -> bool {
    let checks: [(&str, Check); 6] = [
        ("loopback", loopback),
        ("bank oracle", bank_oracle),
        ("frozen A-FFT", frozen_afft),
        ("fe gradient", fe_gradient),
        ("monotone trace", monotone_trace),
        ("determinism", determinism),
    ];
    let mut ok = true;
    for (name, check) in checks {
        let outcome = check().unwrap_or_else(|e| Err(e.to_string()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                ok = false;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    ok
}

fn link(cfg: &OfdmConfig, ch: &ChannelSpec, seed: u64) -> Result<(Frame, ReceivedFrame, Pilots)> {
    let frame = Frame::random(cfg, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let r = apply_channel(&frame.baseband, ch, cfg)?;
    let rx = front_end(&r, cfg, &FrontEndConfig::default(), ch.doppler_factor)?;
    let pilots = Pilots::from_block(&frame.data[0], cfg.pilot_count)?;
    Ok((frame, rx, pilots))
}

fn loopback() -> Result<std::result::Result<String, String>> {
    let cfg = OfdmConfig::table_defaults(256);
    let start = Instant::now();
    let (frame, rx, pilots) = link(&cfg, &ChannelSpec::ideal(), 1)?;
    let mut worst = f64::NEG_INFINITY;
    for kind in ReceiverKind::ALL {
        let out = run_receiver(kind, &rx, &pilots, &cfg, &ReceiverSettings::default())?;
        worst = worst.max(frame_mse(&out, &frame.data, cfg.pilot_count)?);
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("worst {worst:.1} dB in {secs:.2} s");
    Ok(if worst <= -100.0 && secs < 1.0 {
        Ok(detail)
    } else {
        Err(detail)
    })
}

fn bank_oracle() -> Result<std::result::Result<String, String>> {
    let cfg = OfdmConfig::table_defaults(64);
    let df = cfg.carrier_spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let block = ComplexBlock {
            samples: (0..cfg.samples_per_block())
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
            t0: -rng.random_range(0.0..0.01),
            dt: cfg.sample_period(),
        };
        let fe = df * rng.random_range(0.2..3.0);
        let bank = fractional_bank(&block, 1, fe, &cfg)?;
        let centre = conv_fft(&block, &cfg)?;
        let direct = |f: f64| {
            block
                .samples
                .iter()
                .enumerate()
                .map(|(n, v)| v * C64::from_polar(1.0, -2.0 * PI * f * block.time(n)))
                .sum::<C64>()
                / block.len() as f64
        };
        for k in 0..cfg.carriers {
            let scale = centre[k].norm().max(1e-3);
            for a in -1..=1i64 {
                let want = direct(k as f64 * df + a as f64 * fe / 2.0);
                worst = worst.max((bank.offset(k, a) - want).norm() / scale);
            }
            worst = worst.max((centre[k] - direct(k as f64 * df)).norm() / scale);
        }
    }
    let detail = format!("max relative error {worst:.1e}");
    Ok(if worst <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    })
}

fn frozen_afft() -> Result<std::result::Result<String, String>> {
    let cfg = OfdmConfig {
        blocks: 2,
        ..OfdmConfig::table_defaults(128)
    };
    let settings = ReceiverSettings {
        estimator: EstimatorConfig {
            step_fe: Some(0.0),
            fe_init: Some(cfg.carrier_spacing()),
            ..Default::default()
        },
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let ch = ChannelSpec::default()
            .with_doppler(1.5e-4)
            .with_snr(20.0)
            .with_seed(seed);
        let (_, rx, pilots) = link(&cfg, &ch, seed)?;
        let f = run_receiver(ReceiverKind::FFFT, &rx, &pilots, &cfg, &settings)?;
        let a = run_receiver(ReceiverKind::AFFT, &rx, &pilots, &cfg, &settings)?;
        for (x, y) in f
            .estimates
            .iter()
            .flatten()
            .zip(a.estimates.iter().flatten())
        {
            worst = worst.max((x - y).norm());
        }
    }
    let detail = format!("max difference {worst:.1e}");
    Ok(if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    })
}

fn fe_gradient() -> Result<std::result::Result<String, String>> {
    let cfg = OfdmConfig {
        blocks: 1,
        pilot_count: 16,
        ..OfdmConfig::table_defaults(64)
    };
    let df = cfg.carrier_spacing();
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let ch = ChannelSpec::default()
            .with_doppler(2e-3)
            .with_snr(30.0)
            .with_seed(seed);
        let (_, rx, pilots) = link(&cfg, &ch, seed)?;
        let prob = PilotProblem {
            block: &rx.blocks[0],
            pilots: &pilots,
            span: 1,
            cfg: &cfg,
            gate: f64::INFINITY,
        };
        let mut w = WeightSet::impulse(cfg.carriers, 3);
        w.row_mut(1)[0] = C64::new(0.1, -0.05);
        let fe = 1.3 * df;
        let analytic = fe_gradient_scale(1) * prob.grad_fe(&w, fe)?;
        let h = 1e-4 * df;
        let fd = (prob.composite_mse(&w, fe + h)? - prob.composite_mse(&w, fe - h)?) / (2.0 * h);
        let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-300);
        worst = worst.max(rel);
    }
    let detail = format!("max relative error {worst:.1e}");
    Ok(if worst <= 1e-3 {
        Ok(detail)
    } else {
        Err(detail)
    })
}

fn monotone_trace() -> Result<std::result::Result<String, String>> {
    let cfg = OfdmConfig {
        blocks: 1,
        ..OfdmConfig::table_defaults(256)
    };
    let est = EstimatorConfig::default();
    let mut iters = 0;
    for seed in 0..5u64 {
        let ch = ChannelSpec::default()
            .with_doppler(2.5e-4)
            .with_snr(20.0)
            .with_seed(seed);
        let (_, rx, pilots) = link(&cfg, &ch, seed)?;
        let s = estimate_fiducial_offset(&rx.blocks[0], &pilots, 1, &cfg, &est)?;
        let mut prev = s.initial_mse;
        for &m in &s.mse_trace {
            if !(m <= prev) {
                return Ok(Err(format!("seed {seed}: trace rose from {prev} to {m}")));
            }
            prev = m;
        }
        iters += s.iter;
    }
    Ok(Ok(format!("5 traces, {iters} iterations")))
}

fn determinism() -> Result<std::result::Result<String, String>> {
    let mut spec = ExperimentSpec {
        sweep: SweepAxis::Snr,
        values: vec![10.0, 20.0],
        seeds: vec![1, 2],
        ..Default::default()
    };
    spec.link = OfdmConfig {
        blocks: 2,
        ..OfdmConfig::table_defaults(256)
    };
    let a = run_experiment(&spec)?.to_csv_string()?;
    let b = run_experiment(&spec)?.to_csv_string()?;
    let detail = format!("{} bytes", a.len());
    Ok(if a == b {
        Ok(detail)
    } else {
        Err("two runs differ".into())
    })
}
