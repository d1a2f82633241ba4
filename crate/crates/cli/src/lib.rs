//! Batch front end for the axisymmetric Boussinesq laboratory.
//!
//! The library half of the `axbq` binary: config parsing, binary snapshot
//! codec, and the command implementations. Everything here is ordinary
//! synchronous code returning exit codes, so integration tests can drive
//! commands in-process as well as through the binary.

pub mod commands;
pub mod config;
pub mod snapshot;

/// Every gated quantity passed.
pub const EXIT_OK: i32 = 0;
/// A numerical verdict failed (check margin, stability gate, order fit).
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Usage or configuration error (bad key, bad value, bad parameters).
pub const EXIT_CONFIG: i32 = 2;
/// A computation aborted: NaN, CFL violation, diverging solve.
pub const EXIT_NUMERICAL: i32 = 3;
