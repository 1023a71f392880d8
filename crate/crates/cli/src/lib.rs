//! Command implementations behind the `ssc` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod generate;
pub mod stylebank;
pub mod verify;
