//! # magvox
//!
//! A desk-scale toolchain for voxel-by-voxel magnetic soft-robot printing.
//!
//! A design is a set of axis-aligned voxels, each carrying a 3D
//! magnetization direction. This crate turns such designs into motion
//! programs for a five-motor stereolithography printer (three linear
//! stages plus a two-axis permanent-magnet gimbal), verifies the emitted
//! programs on a virtual printer, and predicts the magnetostatic
//! actuation (forces, torques, chain bending) of the printed part.
//!
//! Pipeline stages, each its own module:
//!
//! - [`ingest`] — parse the two exported CSV datasets (magnetization,
//!   geometry) into records.
//! - [`voxel_model`] — core domain types, dataset merging, adjacency
//!   classification, and design validation.
//! - [`path_planner`] — order voxels into the cure sequence (layers by
//!   descending z, nearest-to-origin first within a layer).
//! - [`kinematics`] — convert target poses into motor steps with
//!   sub-step residual carry.
//! - [`gcode`] — emit and parse the printer's instruction dialect.
//! - [`virtual_printer`] — execute a program against a simulated
//!   machine and check round-trip fidelity.
//! - [`magnetostatics`] — field sources, flux density, force and torque
//!   on magnetized bodies.
//! - [`actuation_preview`] — quasi-static bending of chain-like designs
//!   via torsional-spring energy minimization.

pub mod actuation_preview;
pub mod error;
pub mod gcode;
pub mod ingest;
pub mod kinematics;
pub mod magnetostatics;
pub mod path_planner;
pub mod virtual_printer;
pub mod voxel_model;

pub use error::{Error, Result};
