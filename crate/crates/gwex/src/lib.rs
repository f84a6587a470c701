//! Batch front end for `gwex-core`: JSON experiment configs, parallel
//! replicas with deterministic seeding, and JSON/CSV reports.
//!
//! ```no_run
//! use gwex::{commands, Command, Config};
//!
//! let cfg = Config::from_json(r#"{
//!     "model": "variable", "offspring": {"2": 1.0}, "rho": 0.0,
//!     "horizon": 50, "replicas": 100
//! }"#).unwrap();
//! let record = commands::run(Command::Speed, &cfg, None).unwrap();
//! println!("{}", record.passed);
//! ```

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod runner;

pub use commands::Command;
pub use config::Config;
pub use error::{Error, Result};
