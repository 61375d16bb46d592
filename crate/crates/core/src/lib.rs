//! Resource-interval metering: meters that report per consumed quantum,
//! concentrators that relay their frames, and a monitoring center that
//! deduplicates, detects losses and reconstructs consumption. Includes a
//! deterministic simulator and the time-interval polling baseline.

pub mod center;
pub mod concentrator;
pub mod domain;
pub mod io;
pub mod meter;
pub mod sim;
