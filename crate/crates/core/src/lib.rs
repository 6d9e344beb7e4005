//! Rolling-horizon production-cost simulation for power systems with short- and
//! long-duration storage.

pub mod audit;
pub mod builtin;
pub mod engine;
mod error;
pub mod forecast;
pub mod io;
pub mod metrics;
pub mod mt;
pub mod system;
pub mod ucd;

pub use builtin::{builtin_system, BuiltinName, Profile};
pub use error::{Error, Result, Violation};
pub use io::{load_system, parse_system, save_system};
pub use system::{validate_system, PowerSystem};
