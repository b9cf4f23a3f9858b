//! Physical constants used across the model.

/// Faraday constant [C/mol].
pub const FARADAY: f64 = 96485.33212;

/// Universal gas constant [J/(mol K)].
pub const GAS_CONSTANT: f64 = 8.314462618;

/// Seconds per hour, for Ah conversions.
pub const SECONDS_PER_HOUR: f64 = 3600.0;
