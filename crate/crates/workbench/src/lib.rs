//! Configuration, file formats, bundled scenarios, manufactured-solution
//! checks and the `nematic` command line.

pub mod cli;
pub mod config;
pub mod io;
pub mod mms;
pub mod presets;
pub mod scenario;
