//! Cross-polarized four-wave mixing in birefringent fiber: dispersion,
//! phase matching, joint spectra, photon statistics and stimulated-emission
//! tomography data.

pub mod error;
pub mod exec;
pub mod fiber;
pub mod io;
pub mod jointspectrum;
pub mod phasematch;
pub mod photonstats;
pub mod setdata;
pub mod units;

pub use error::{Error, ErrorKind, Result};
pub use exec::Execution;
