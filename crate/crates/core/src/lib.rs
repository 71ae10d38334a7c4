//! Signal-processing pipelines for a medical fog node.
//!
//! Everything in this crate is pure computation over in-memory buffers and
//! builds without `std` (an allocator is required). File formats, sockets,
//! storage and the CLI live in the `fog-node` crate.
//!
//! - [`signal`]: shared DSP primitives (framing, filters, envelopes,
//!   smoothing, spectra, autocorrelation).
//! - [`speech`]: the clinical speech chain, from denoising to a
//!   [`speech::SpeechFeatureSet`].
//! - [`pcg`]: heart rate from phonocardiogram recordings.
//! - [`ecg`]: Pan-Tompkins QRS detection, DTW and DTW pattern mining.
//! - [`synth`]: seeded synthetic signal generators used by tests, benches
//!   and the demo corpus.
#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod fft;

pub mod ecg;
pub mod pcg;
pub mod signal;
pub mod speech;
pub mod synth;

pub use error::{Error, Result};
pub use signal::{FrameGrid, SampledSignal};
