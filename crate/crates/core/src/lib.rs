//! Exemplar-based image inpainting: priority-ordered patch copying with
//! an exact pruned search, plus level-set segmentation and SOM layer
//! separation as structure-aware front ends.

pub mod bilateral;
pub mod energy;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod front;
pub mod io;
pub mod raster;
pub mod sat;
pub mod search;
pub mod seg;
pub mod som;
pub mod threads;

pub use error::{Error, Result};
pub use raster::{Mask, PatchBox, Raster};
