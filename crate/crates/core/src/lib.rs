//! Geometric impedance control on SE(3).
//!
//! Layers, bottom-up: [`se3`] (Lie-group maps), [`kinematics`]
//! (product-of-exponentials arms), [`dynamics`] (joint and task-space
//! dynamics), [`geometry`] (SE(3) error quantities), [`controllers`],
//! [`simulation`], [`io`] (file formats) and [`verify`] (the numerical
//! identity suite).

pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kinematics;
pub mod se3;
pub mod simulation;
pub mod verify;

pub use error::{GicError, Result};
