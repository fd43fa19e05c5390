//! Scenario files in, result files out.

mod bundle;
mod coil;
mod file;

pub use bundle::*;
pub use coil::*;
pub use file::*;

/// Raw scenario document, before defaults and validation.
pub use toml::Table;
