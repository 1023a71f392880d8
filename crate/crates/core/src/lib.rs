//! Foreground-stabilized latent trajectory control.
//!
//! A page is a grid of latent tokens evolved from noise (`t = 1`) to a final
//! state (`t = 0`) by Euler steps of a drift field. Tokens covered by layout
//! boxes are slowed by a late-growing gate and pulled toward a fixed backing
//! latent, while the rest of the page evolves freely under the drift and a
//! cached style direction.

// NaN must fail range checks, so `!(x > 0.0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod field;
pub mod latent;
pub mod layout;
pub mod render;
pub mod rng;
pub mod style;
pub mod suite;

pub use control::{Controller, Schedule, StyleMode, TrajectoryRecord};
pub use error::{Result, SscError};
pub use exec::ExecMode;
pub use field::VelocityField;
pub use latent::{BackingLatent, ForegroundMask, Grid, LatentState, TokenMatrix};
pub use layout::{LayoutDocument, LayoutPage};
pub use render::{PageImage, ToyDecoder};
pub use style::{StyleBank, StyleDirection};
