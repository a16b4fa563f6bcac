//! Numerical laboratory for transport, vorticity dynamics and
//! Kantorovich–Rubinstein stability estimates on the periodic square.

pub mod analysis;
pub mod biot_savart;
pub mod cli;
pub mod error;
pub mod fields;
pub mod kr_ot;
pub mod ns_euler;
pub mod presets;
pub mod spectral;
pub mod transport;

pub use error::{Error, Result};
