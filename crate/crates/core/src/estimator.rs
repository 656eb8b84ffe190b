//! Fiducial frequency offset estimation and combiner weight adaptation.
//!
//! The objective is the composite pilot error
//!
//! ```text
//! E(w, fe) = sum_{k in pilots} |b_k - x_k / x_{k-1}|^2,   x_k = w_k^H z_k(fe)
//! ```
//!
//! with pilots on carriers `1..=P` and carrier 0 (the known reference) as the
//! first differential denominator. Its partial derivatives are
//!
//! ```text
//! dE/dfe   = -4 pi / (A + 1) * gamma
//! gamma    = sum_k Im{ (xt_k x_{k-1} - xt_{k-1} x_k) / x_{k-1}^2 * conj(e_k) }
//! xt_k     = w_k^H (beta o zt_k),  beta = [-A, ..., A]
//! dE/dw_k* = -g_k
//! g_k      = z_k conj(e_k) / x_{k-1}  -  z_k x_{k+1} conj(e_{k+1}) / x_k^2
//! ```
//!
//! where `zt` is the time-weighted bank and each term of `g_k` is present
//! only when the corresponding error belongs to a pilot. The squares are
//! complex squares. Stepping `fe += mu * gamma` and `w += mu * g` descends.
//!
//! Every LMS update skips carriers whose error exceeds a threshold `T`. The
//! loss consistent with that rule is the truncated error
//! `E_T = sum_k min(|e_k|^2, T^2)`, whose gradients are the ones above with
//! the gated terms dropped. The estimator minimizes `E_T`; `T = inf` gives E.
//!
//! The estimator alternates a weight phase and an offset phase. The weight
//! phase runs one LMS pass over the pilots from the impulse, with one
//! combiner vector carried from carrier to carrier, and keeps it if it
//! lowers the objective. The offset phase takes gradient steps on `fe` with
//! those weights held, halving a step (up to 8 times) whenever it would
//! raise the objective, so the recorded trace is non-increasing.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bank::{fractional_bank, inner, time_weighted_bank, DemodBank, WeightSet};
use crate::signal::OfdmConfig;
use crate::signal::{psk_point, SymbolVector};
use crate::tx::ComplexBlock;
use crate::{Error, Result, C64};

const MAX_BACKTRACKS: u32 = 8;
const STALL_TOL: f64 = 1e-6;
const NLMS_EPS: f64 = 1e-8;
const DEFAULT_REGULARIZATION: f64 = 1.0;
/// Automatic offset steps try a move of this fraction of the carrier spacing.
const AUTO_STEP: f64 = 0.05;
/// E may not rise this many dB above its starting value.
const DIVERGENCE_DB: f64 = 20.0;

/// Pilot carriers `1..=P` of block 0 and their known raw symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Pilots {
    symbols: Vec<C64>,
}

impl Pilots {
    /// Pilots on carriers `1..=symbols.len()`.
    pub fn new(symbols: Vec<C64>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InputShape("empty pilot set".into()));
        }
        Ok(Self { symbols })
    }

    /// The first `count` raw symbols of a block.
    pub fn from_block(raw: &SymbolVector, count: usize) -> Result<Self> {
        if count > raw.len() {
            return Err(Error::InputShape(format!(
                "{count} pilots requested from a {}-symbol block",
                raw.len()
            )));
        }
        Self::new(raw.values[..count].to_vec())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Highest pilot carrier index, P.
    pub fn last_carrier(&self) -> usize {
        self.symbols.len()
    }

    /// Carrier index of pilot `p` (0-based).
    pub fn carrier(&self, p: usize) -> usize {
        p + 1
    }

    /// Known symbol on carrier `k` (1..=P).
    pub fn symbol(&self, k: usize) -> C64 {
        self.symbols[k - 1]
    }

    pub fn truncated(&self, count: usize) -> Self {
        Self {
            symbols: self.symbols[..count.clamp(1, self.symbols.len())].to_vec(),
        }
    }
}

/// Combiner outputs on carriers `0..=P` and the pilot errors.
#[derive(Debug, Clone)]
struct PilotFit {
    x: Vec<C64>,
    /// `e[k]` for carriers `1..=P`; `e[0]` is unused.
    e: Vec<C64>,
    /// Truncated at the gate used for the fit.
    mse: f64,
}

fn check_dims(bank: &DemodBank, w: &WeightSet, pilots: &Pilots) -> Result<()> {
    if bank.taps() != w.taps() {
        return Err(Error::Dimension(format!(
            "bank has {} taps, weights {}",
            bank.taps(),
            w.taps()
        )));
    }
    let need = pilots.last_carrier() + 1;
    if bank.carriers() < need || w.carriers() < need {
        return Err(Error::Dimension(format!(
            "pilots need {need} carriers, bank has {}, weights {}",
            bank.carriers(),
            w.carriers()
        )));
    }
    Ok(())
}

fn fit(bank: &DemodBank, w: &WeightSet, pilots: &Pilots, gate: f64) -> Result<PilotFit> {
    check_dims(bank, w, pilots)?;
    let last = pilots.last_carrier();
    let x: Vec<C64> = (0..=last).map(|k| inner(w.row(k), bank.row(k))).collect();
    let mut e = vec![C64::new(0.0, 0.0); last + 1];
    let mut mse = 0.0;
    for k in 1..=last {
        if x[k - 1] == C64::new(0.0, 0.0) {
            return Err(Error::DegenerateDivision { carrier: k - 1 });
        }
        e[k] = pilots.symbol(k) - x[k] / x[k - 1];
        mse += e[k].norm_sqr().min(gate * gate);
    }
    Ok(PilotFit { x, e, mse })
}

/// Composite pilot error of an already computed bank.
pub fn bank_mse(bank: &DemodBank, w: &WeightSet, pilots: &Pilots) -> Result<f64> {
    bank_mse_gated(bank, w, pilots, f64::INFINITY)
}

/// Truncated composite error `sum min(|e_k|^2, gate^2)`.
pub fn bank_mse_gated(bank: &DemodBank, w: &WeightSet, pilots: &Pilots, gate: f64) -> Result<f64> {
    Ok(fit(bank, w, pilots, gate)?.mse)
}

/// Offset gradient `gamma` from a bank and its time-weighted companion.
/// Pilots with `|e_k| > gate` contribute nothing.
pub fn bank_fe_gradient(
    bank: &DemodBank,
    timed: &DemodBank,
    w: &WeightSet,
    pilots: &Pilots,
    gate: f64,
) -> Result<f64> {
    let f = fit(bank, w, pilots, gate)?;
    let span = bank.span as i64;
    let beta: Vec<f64> = (-span..=span).map(|a| a as f64).collect();
    let xt: Vec<C64> = (0..=pilots.last_carrier())
        .map(|k| {
            w.row(k)
                .iter()
                .zip(timed.row(k))
                .zip(&beta)
                .map(|((w, z), b)| w.conj() * z * *b)
                .sum()
        })
        .collect();
    Ok((1..=pilots.last_carrier())
        .filter(|&k| f.e[k].norm() <= gate)
        .map(|k| {
            let den = f.x[k - 1] * f.x[k - 1];
            ((xt[k] * f.x[k - 1] - xt[k - 1] * f.x[k]) / den * f.e[k].conj()).im
        })
        .sum())
}

/// Factor converting `gamma` into `dE/dfe`.
pub fn fe_gradient_scale(span: usize) -> f64 {
    -4.0 * PI / (span + 1) as f64
}

/// `g_k` for any carrier `k` in `0..=P`, dropping terms whose error
/// exceeds `gate`.
pub fn bank_weight_gradient(
    bank: &DemodBank,
    w: &WeightSet,
    pilots: &Pilots,
    k: usize,
    gate: f64,
) -> Result<Vec<C64>> {
    let f = fit(bank, w, pilots, gate)?;
    weight_gradient_at(&f, bank, pilots, k, gate)
}

fn weight_gradient_at(
    f: &PilotFit,
    bank: &DemodBank,
    pilots: &Pilots,
    k: usize,
    gate: f64,
) -> Result<Vec<C64>> {
    let last = pilots.last_carrier();
    if k > last {
        return Err(Error::InputShape(format!(
            "carrier {k} outside the pilot band"
        )));
    }
    let mut coef = C64::new(0.0, 0.0);
    if k >= 1 && f.e[k].norm() <= gate {
        coef += f.e[k].conj() / f.x[k - 1];
    }
    if k < last && f.e[k + 1].norm() <= gate {
        if f.x[k] == C64::new(0.0, 0.0) {
            return Err(Error::DegenerateDivision { carrier: k });
        }
        coef -= f.x[k + 1] * f.e[k + 1].conj() / (f.x[k] * f.x[k]);
    }
    Ok(bank.row(k).iter().map(|z| z * coef).collect())
}

/// Composite error for weights `w` evaluated on one block at offset `fe`.
#[derive(Debug, Clone, Copy)]
pub struct PilotProblem<'a> {
    pub block: &'a ComplexBlock,
    pub pilots: &'a Pilots,
    /// Bank half-width A.
    pub span: usize,
    pub cfg: &'a OfdmConfig,
    /// Error gate `T`; infinite for the plain composite error.
    pub gate: f64,
}

impl PilotProblem<'_> {
    pub fn bank(&self, fe: f64) -> Result<DemodBank> {
        fractional_bank(self.block, self.span, fe, self.cfg)
    }

    pub fn composite_mse(&self, w: &WeightSet, fe: f64) -> Result<f64> {
        bank_mse_gated(&self.bank(fe)?, w, self.pilots, self.gate)
    }

    /// `gamma`; `dE/dfe = fe_gradient_scale(A) * gamma`.
    pub fn grad_fe(&self, w: &WeightSet, fe: f64) -> Result<f64> {
        let timed = time_weighted_bank(self.block, self.span, fe, self.cfg)?;
        bank_fe_gradient(&self.bank(fe)?, &timed, w, self.pilots, self.gate)
    }

    /// `g` for pilot index `p`; `dE/dw* = -g`.
    pub fn grad_w(&self, w: &WeightSet, fe: f64, p: usize) -> Result<Vec<C64>> {
        if p >= self.pilots.len() {
            return Err(Error::InputShape(format!("pilot index {p} out of range")));
        }
        bank_weight_gradient(
            &self.bank(fe)?,
            w,
            self.pilots,
            self.pilots.carrier(p),
            self.gate,
        )
    }
}

/// One normalized-LMS step rule shared by pilot training and the
/// decision-directed sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmsSettings {
    pub step: f64,
    /// Normalize each update by the regressor energy.
    pub gradient_scaling: bool,
    /// Updates are skipped when `|e_k|` exceeds this.
    pub error_threshold: f64,
    /// Added to the normalizer as a multiple of `|w|^2`.
    pub regularization: f64,
}

struct Sweep {
    weights: WeightSet,
    end: Vec<C64>,
    updates: usize,
    skipped: usize,
}

/// Walks carriers `1..rows` once, carrying one combiner vector. Carrier `k`
/// is detected with the vector as it stands (recorded as row `k`), then the
/// vector takes a gradient step on `|e_k|^2`, where `e_k` is measured against
/// `reference(k, bhat)`. The step direction `conj(e_k) u_k`, with
/// `u_k = (z_k - bhat_k z_{k-1}) / x_{k-1}`, is the weight gradient restricted
/// to the terms of `e_k`, taken with the same vector on both carriers.
///
/// With scaling on, the step is divided by `|u|^2 + rho |w|^2`. Since
/// `w^H u = 0`, a small `u` would otherwise swing `w` by more than its own
/// length on a single noisy error.
fn lms_sweep(
    bank: &DemodBank,
    rows: usize,
    start: &[C64],
    s: &LmsSettings,
    reference: impl Fn(usize, C64) -> C64,
) -> Sweep {
    let mut ws = WeightSet::shared(rows, start);
    let mut w = start.to_vec();
    let mut prev = inner(&w, bank.row(0));
    let (mut updates, mut skipped) = (0, 0);
    for k in 1..rows {
        ws.set_row(k, &w);
        let x = inner(&w, bank.row(k));
        if prev == C64::new(0.0, 0.0) {
            skipped += 1;
            prev = x;
            continue;
        }
        let bhat = x / prev;
        let e = reference(k, bhat) - bhat;
        if e.norm() > s.error_threshold {
            skipped += 1;
        } else {
            let u: Vec<C64> = bank
                .row(k)
                .iter()
                .zip(bank.row(k - 1))
                .map(|(zk, zp)| (zk - bhat * zp) / prev)
                .collect();
            let norm = if s.gradient_scaling {
                let energy: f64 = u.iter().map(|v| v.norm_sqr()).sum();
                energy + s.regularization * w.iter().map(|v| v.norm_sqr()).sum::<f64>() + NLMS_EPS
            } else {
                1.0
            };
            let mu = s.step / norm;
            for (wi, ui) in w.iter_mut().zip(&u) {
                *wi += ui * e.conj() * mu;
            }
            updates += 1;
        }
        prev = x;
    }
    Sweep {
        weights: ws,
        end: w,
        updates,
        skipped,
    }
}

/// Pilot-band weights: row `k` is the vector used to detect carrier `k`.
#[derive(Debug, Clone)]
pub struct PilotWeights {
    /// Rows `0..=P`.
    pub weights: WeightSet,
    /// Vector the accepted pass started from.
    pub start: Vec<C64>,
    /// Vector left after the accepted pass.
    pub end: Vec<C64>,
    pub mse: f64,
    /// Accepted passes.
    pub passes: usize,
}

impl PilotWeights {
    /// Every row set to `w`, as before any adaptation. `mse` is truncated
    /// at `gate`.
    pub fn fixed(bank: &DemodBank, pilots: &Pilots, w: &[C64], gate: f64) -> Result<Self> {
        let weights = WeightSet::shared(pilots.last_carrier() + 1, w);
        let mse = bank_mse_gated(bank, &weights, pilots, gate)?;
        Ok(Self {
            weights,
            start: w.to_vec(),
            end: w.to_vec(),
            mse,
            passes: 0,
        })
    }

    /// One LMS pass over the pilots from `start`, kept whatever its error.
    pub fn single_pass(
        bank: &DemodBank,
        pilots: &Pilots,
        start: &[C64],
        s: &LmsSettings,
    ) -> Result<Self> {
        let sweep = lms_sweep(bank, pilots.last_carrier() + 1, start, s, |k, _| {
            pilots.symbol(k)
        });
        check_dims(bank, &sweep.weights, pilots)?;
        let mse = bank_mse_gated(bank, &sweep.weights, pilots, s.error_threshold)?;
        Ok(Self {
            weights: sweep.weights,
            start: start.to_vec(),
            end: sweep.end,
            mse,
            passes: 1,
        })
    }

    /// Repeats LMS passes over the pilots, each starting where the last
    /// accepted one ended. A pass is kept only if it lowers the error
    /// truncated at `s.error_threshold` (the gate `self.mse` was measured
    /// with); otherwise the step is halved, up to 8 times, before giving up.
    /// Stops after `max_passes` or on a relative gain below 1e-6.
    pub fn refine(
        &mut self,
        bank: &DemodBank,
        pilots: &Pilots,
        s: &LmsSettings,
        max_passes: usize,
    ) -> Result<()> {
        check_dims(bank, &self.weights, pilots)?;
        let rows = pilots.last_carrier() + 1;
        for _ in 0..max_passes {
            if self.mse == 0.0 {
                break;
            }
            // E ignores the overall weight scale, which otherwise creeps up
            let norm = self.end.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
            if !(norm > 0.0) {
                break;
            }
            let from: Vec<C64> = self.end.iter().map(|w| w / norm).collect();
            let mut accepted = None;
            for h in 0..=MAX_BACKTRACKS {
                let trial = LmsSettings {
                    step: s.step / f64::from(1u32 << h),
                    ..*s
                };
                let sweep = lms_sweep(bank, rows, &from, &trial, |k, _| pilots.symbol(k));
                if sweep.updates == 0 {
                    break;
                }
                if let Ok(m) = bank_mse_gated(bank, &sweep.weights, pilots, s.error_threshold) {
                    if m < self.mse {
                        accepted = Some((sweep, m));
                        break;
                    }
                }
            }
            let Some((sweep, m)) = accepted else { break };
            let gain = self.mse - m;
            self.start = from;
            self.end = sweep.end;
            self.weights = sweep.weights;
            self.mse = m;
            self.passes += 1;
            if gain < STALL_TOL * (m + gain) {
                break;
            }
        }
        Ok(())
    }
}

/// Pilot weights trained from `initial` on one bank.
pub fn train_pilot_weights(
    bank: &DemodBank,
    pilots: &Pilots,
    initial: &[C64],
    s: &LmsSettings,
    max_passes: usize,
) -> Result<PilotWeights> {
    let mut pw = PilotWeights::fixed(bank, pilots, initial, s.error_threshold)?;
    pw.refine(bank, pilots, s, max_passes)?;
    Ok(pw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Offset step size in Hz per unit gradient. `None` rescales it at
    /// every step so the trial move is 5% of the carrier spacing;
    /// `Some(0.0)` freezes the offset.
    pub step_fe: Option<f64>,
    /// Weight step size (normalized when `gradient_scaling` is on).
    pub step_w: f64,
    /// Outer-loop stopping threshold in dB of E improvement.
    pub threshold_db: f64,
    /// Maximum outer iterations.
    pub max_outer: usize,
    /// Maximum iterations of each inner phase.
    pub max_inner: usize,
    /// Starting offset in Hz; `None` means the carrier spacing.
    pub fe_init: Option<f64>,
    /// Pilots used by the estimator; `None` uses all training pilots.
    pub pilots_used: Option<usize>,
    pub gradient_scaling: bool,
    /// Error gate `T` of the LMS updates and of the objective.
    pub error_threshold: f64,
    /// NLMS regularization, a multiple of `|w|^2`.
    pub regularization: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            step_fe: None,
            step_w: 0.5,
            threshold_db: 0.01,
            max_outer: 50,
            max_inner: 50,
            fe_init: None,
            pilots_used: None,
            gradient_scaling: true,
            error_threshold: 1.0,
            regularization: DEFAULT_REGULARIZATION,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(mu) = self.step_fe {
            if !(mu >= 0.0) {
                return Err(Error::Config(format!(
                    "offset step {mu} must be non-negative"
                )));
            }
        }
        if !(self.step_w > 0.0 && self.threshold_db > 0.0) || self.max_outer == 0 {
            return Err(Error::Config(
                "estimator needs positive step_w, threshold_db and max_outer".into(),
            ));
        }
        if !(self.error_threshold > 0.0) || !(self.regularization >= 0.0) {
            return Err(Error::Config(
                "error_threshold must be positive and regularization non-negative".into(),
            ));
        }
        if let Some(fe) = self.fe_init {
            if !(fe > 0.0) {
                return Err(Error::Config(format!(
                    "initial offset {fe} must be positive"
                )));
            }
        }
        Ok(())
    }

    fn lms(&self) -> LmsSettings {
        LmsSettings {
            step: self.step_w,
            gradient_scaling: self.gradient_scaling,
            error_threshold: self.error_threshold,
            regularization: self.regularization,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iter: usize,
    pub fe: f64,
    pub mse: f64,
}

/// Result of [`estimate_fiducial_offset`].
#[derive(Debug, Clone)]
pub struct EstimatorState {
    pub fe: f64,
    /// Offset the search started from.
    pub initial_fe: f64,
    /// Per-carrier weights over the pilot band, rows `0..=P`.
    pub weights: WeightSet,
    /// Objective `E_T` at the start, before any update.
    pub initial_mse: f64,
    /// `E_T` after each outer iteration.
    pub mse_trace: Vec<f64>,
    /// Untruncated E at the final point.
    pub plain_mse: f64,
    pub trace: Vec<TracePoint>,
    pub iter: usize,
}

impl EstimatorState {
    pub fn final_mse(&self) -> f64 {
        self.mse_trace.last().copied().unwrap_or(self.initial_mse)
    }
}

/// Coordinate descent over (pilot weights, fiducial offset) on one block.
pub fn estimate_fiducial_offset(
    block: &ComplexBlock,
    pilots: &Pilots,
    span: usize,
    cfg: &OfdmConfig,
    est: &EstimatorConfig,
) -> Result<EstimatorState> {
    est.validate()?;
    if pilots.len() < 2 {
        return Err(Error::InputShape(
            "the estimator needs at least 2 pilots".into(),
        ));
    }
    let pilots = match est.pilots_used {
        Some(n) => pilots.truncated(n.max(2)),
        None => pilots.clone(),
    };
    let gate = est.error_threshold;
    let problem = PilotProblem {
        block,
        pilots: &pilots,
        span,
        cfg,
        gate,
    };
    let taps = 2 * span + 1;
    let df = cfg.carrier_spacing();
    let initial_fe = est.fe_init.unwrap_or(df);
    let mut fe = initial_fe;
    let mut impulse = vec![C64::new(0.0, 0.0); taps];
    impulse[span] = C64::new(1.0, 0.0);
    let mut bank = problem.bank(fe)?;
    let mut pw = PilotWeights::fixed(&bank, &pilots, &impulse, gate)?;
    let initial_mse = pw.mse;
    let mut mse_trace = Vec::new();
    let mut trace = Vec::new();
    let lms = est.lms();

    let mut iter = 0;
    while iter < est.max_outer {
        iter += 1;
        let before = pw.mse;

        let fresh = PilotWeights::single_pass(&bank, &pilots, &impulse, &lms)?;
        if fresh.mse < pw.mse {
            pw = fresh;
        }

        for _ in 0..est.max_inner {
            if span == 0 || pw.mse == 0.0 {
                break;
            }
            let timed = time_weighted_bank(block, span, fe, cfg)?;
            let gamma = bank_fe_gradient(&bank, &timed, &pw.weights, &pilots, gate)?;
            if gamma == 0.0 || !gamma.is_finite() {
                break;
            }
            let mu = est.step_fe.unwrap_or(AUTO_STEP * df / gamma.abs());
            if mu == 0.0 {
                break;
            }
            let mut accepted = None;
            for h in 0..=MAX_BACKTRACKS {
                let cand = fe + mu * gamma / f64::from(1u32 << h);
                if !(cand > 0.0) {
                    continue;
                }
                let cand_bank = problem.bank(cand)?;
                // held weights, or a fresh pass at the candidate offset
                let held =
                    bank_mse_gated(&cand_bank, &pw.weights, &pilots, gate).map(|m| PilotWeights {
                        mse: m,
                        ..pw.clone()
                    });
                let fresh = PilotWeights::single_pass(&cand_bank, &pilots, &impulse, &lms);
                let best = match (held, fresh) {
                    (Ok(h), Ok(f)) => Some(if f.mse < h.mse { f } else { h }),
                    (Ok(h), Err(_)) => Some(h),
                    (Err(_), Ok(f)) => Some(f),
                    (Err(_), Err(_)) => None,
                };
                if let Some(next) = best.filter(|n| n.mse < pw.mse) {
                    accepted = Some((cand, cand_bank, next));
                    break;
                }
            }
            let Some((cand, cand_bank, next)) = accepted else {
                break;
            };
            let gain = pw.mse - next.mse;
            fe = cand;
            bank = cand_bank;
            pw = next;
            let m = pw.mse;
            if gain < STALL_TOL * (m + gain) {
                break;
            }
        }

        let mse = pw.mse;
        mse_trace.push(mse);
        trace.push(TracePoint { iter, fe, mse });
        if !mse.is_finite() || 10.0 * (mse / initial_mse).log10() > DIVERGENCE_DB {
            return Err(Error::EstimatorDiverged { trace: mse_trace });
        }
        if mse == 0.0 || 10.0 * (before / mse).log10().abs() < est.threshold_db {
            break;
        }
    }

    let plain_mse = bank_mse(&bank, &pw.weights, &pilots)?;
    Ok(EstimatorState {
        fe,
        initial_fe,
        weights: pw.weights,
        initial_mse,
        mse_trace,
        plain_mse,
        trace,
        iter,
    })
}

/// Settings of the per-frame combiner adaptation shared by the P-FFT,
/// F-FFT and A-FFT receivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptConfig {
    pub step_w: f64,
    /// Normalize each update by the regressor energy (NLMS).
    pub gradient_scaling: bool,
    /// Updates are skipped when `|e_k|` exceeds this.
    pub error_threshold: f64,
    /// NLMS regularization, a multiple of `|w|^2`.
    pub regularization: f64,
    /// Maximum pilot passes on block 0 before the frame sweep.
    pub training_passes: usize,
    /// PSK order used for decision-directed references.
    pub psk_order: usize,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            step_w: 0.5,
            gradient_scaling: true,
            error_threshold: 1.0,
            regularization: DEFAULT_REGULARIZATION,
            training_passes: 50,
            psk_order: 4,
        }
    }
}

impl AdaptConfig {
    fn lms(&self) -> LmsSettings {
        LmsSettings {
            step: self.step_w,
            gradient_scaling: self.gradient_scaling,
            error_threshold: self.error_threshold,
            regularization: self.regularization,
        }
    }
}

/// Weights actually used on every carrier of every block.
#[derive(Debug, Clone)]
pub struct AdaptedWeights {
    pub blocks: Vec<WeightSet>,
    /// Pilot training result on block 0.
    pub training: PilotWeights,
    pub updates: usize,
    pub skipped: usize,
}

fn nearest_psk(v: C64, q: usize) -> C64 {
    (0..q)
        .map(|m| psk_point(m, q))
        .min_by(|a, b| (v - a).norm_sqr().total_cmp(&(v - b).norm_sqr()))
        .unwrap_or(v)
}

/// Trains on the block-0 pilots, then sweeps every block carrier by carrier
/// (see [`lms_sweep`]): against the pilot on training carriers and against
/// the hard decision elsewhere. Block 0 starts from the vector the accepted
/// training pass started from, so its pilot band reproduces that pass. Each
/// later block starts from the vector the previous block reached after
/// carrier 1.
pub fn adapt_weights_frame(
    banks: &[DemodBank],
    pilots: &Pilots,
    initial: &[C64],
    settings: &AdaptConfig,
) -> Result<AdaptedWeights> {
    let first = banks
        .first()
        .ok_or_else(|| Error::InputShape("no blocks to adapt over".into()))?;
    let carriers = first.carriers();
    if initial.len() != first.taps() {
        return Err(Error::Dimension(format!(
            "initial weights have {} taps, bank {}",
            initial.len(),
            first.taps()
        )));
    }
    let lms = settings.lms();
    let training = train_pilot_weights(first, pilots, initial, &lms, settings.training_passes)?;

    let mut start = training.start.clone();
    let mut blocks = Vec::with_capacity(banks.len());
    let (mut updates, mut skipped) = (0, 0);
    for (b, bank) in banks.iter().enumerate() {
        if bank.carriers() != carriers || bank.taps() != initial.len() {
            return Err(Error::Dimension(format!("bank {b} has a different shape")));
        }
        let sweep = lms_sweep(bank, carriers, &start, &lms, |k, bhat| {
            if b == 0 && k <= pilots.last_carrier() {
                pilots.symbol(k)
            } else {
                nearest_psk(bhat, settings.psk_order)
            }
        });
        updates += sweep.updates;
        skipped += sweep.skipped;
        start = sweep.weights.row(2.min(carriers - 1)).to_vec();
        blocks.push(sweep.weights);
    }
    log::debug!("weight adaptation: {updates} updates, {skipped} skipped");
    Ok(AdaptedWeights {
        blocks,
        training,
        updates,
        skipped,
    })
}
