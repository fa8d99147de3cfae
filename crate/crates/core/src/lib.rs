//! Generalized Radon transforms over surfaces of revolution whose axes lie
//! on a cylinder: profiles and their microlocal audit, the factored forward
//! model, inversion, experiments and file I/O.

// NaN must fail validation, so `!(x > 0.0)` is used on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod inversion;
pub mod io;
pub mod microlocal;
pub mod operators;

pub use error::{Error, Result};
