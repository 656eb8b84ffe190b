//! Thread-local FFT plan cache.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::C64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub fn inverse(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Unnormalized forward DFT, in place.
pub fn fft_in_place(buf: &mut [C64]) {
    forward(buf.len()).process(buf);
}

/// Unnormalized inverse DFT, in place.
pub fn ifft_in_place(buf: &mut [C64]) {
    inverse(buf.len()).process(buf);
}
