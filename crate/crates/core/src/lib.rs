//! Visual Mesh: sampling images at a constant density per target object.
//!
//! - [`geometry`] places sample rings so every object of a known size spans
//!   the same number of them at any distance.
//! - [`mesh`] links the samples into a six-neighbour graph and projects it
//!   through a camera.
//! - [`engine`] runs graph-convolution networks over the projected graph.
//! - [`oracle`] holds independent brute-force counters used to validate the
//!   mesh, and a hexagonal-lattice baseline.
//! - [`pipeline`] ties one frame together and times it.

pub mod engine;
pub mod geometry;
pub mod mesh;
pub mod oracle;
pub mod pipeline;
