//! Model-free data-driven solid mechanics.
//!
//! The crate covers the full cycle: a plane-strain finite-element kernel
//! ([`fe`]), the strain–stress phase space with its metric and searchable
//! material databases ([`phase_space`]), the distance-minimizing solver
//! ([`ddcm`]), identification of material databases from displacement
//! snapshots ([`ddi`]), generators for meshes, synthetic databases and virtual
//! experiments ([`datagen`]), file formats ([`io`]) and the end-to-end study
//! runner ([`study`]).
//!
//! Tensors are stored in Mandel form `(xx, yy, √2·xy)` throughout so that
//! tensor contractions are plain dot products.

pub mod cli;
pub mod datagen;
pub mod ddcm;
pub mod ddi;
pub mod error;
pub mod fe;
pub mod io;
pub mod par;
pub mod phase_space;
pub mod study;

pub use error::{Error, Result};
pub use phase_space::{LocalState, Mandel, MaterialDatabase, Metric};
