//! Instantaneous phase estimation by complex demodulation and detection of
//! abrupt phase shifts in the demodulated phase.

pub mod detect;
pub mod error;
pub mod eval;
pub mod io;
pub mod phase;
pub mod seed;
pub mod signals;

pub use error::{Error, Result};
