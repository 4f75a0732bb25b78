//! Command orchestration for the nugget-bank pipeline and evaluation tools.

pub mod align;
pub mod compare;
pub mod config;
pub mod evaluate;
pub mod manifest;
pub mod pipeline;
pub mod trainsvm;

/// Process exit codes: 0 success, 1 partial topic failures, 2 configuration
/// or contract errors.
pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
