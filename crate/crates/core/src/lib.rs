//! Simulation toolkit for a dual-channel tactile skin.
//!
//! The sensing model pairs an impedance-imaging layer (a conductive square
//! sheet read out through boundary electrodes) with an air-pressure channel
//! that reports the total applied force. This crate provides:
//!
//! - a finite-element forward solver for two-terminal voltage frames
//!   ([`fem`], [`mesh`], [`geometry`]),
//! - linearized difference imaging: sensitivity computation, Tikhonov
//!   reconstruction and pre-processing ([`grid`], [`jacobian`], [`recon`]),
//! - synthetic contact scenarios, datasets and the pressure channel model
//!   ([`phantom`]),
//! - segmentation of reconstructed images into contact regions ([`segment`]),
//! - per-contact force allocation fusing both channels ([`fuse`]),
//! - metrics and simulated experiment suites ([`eval`]),
//! - file formats for frames, images, meshes and reports ([`io`]).

// Validation guards use the negated forms (`!(x > 0.0)`) on purpose: they
// reject NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod eval;
pub mod fem;
pub mod fuse;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod jacobian;
pub mod mesh;
pub mod phantom;
pub mod recon;
pub mod segment;

pub use error::{Error, Result};

/// Default nodes per side of the forward-model mesh.
pub const DEFAULT_MESH_DENSITY: usize = 121;

/// Default reconstruction grid resolution.
pub const DEFAULT_GRID_SIZE: usize = 64;
