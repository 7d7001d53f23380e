//! Spectral KAM solver for invariant curves of the standard map with complex rotation number.

pub mod error;
pub mod fourier;
pub mod frequency;
pub mod operators;
pub mod kam;
pub mod continuation;
pub mod obstruction;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use fourier::FourierSeries;
pub use frequency::{DiophantineClass, Frequency};
