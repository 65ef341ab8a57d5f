//! Batch pipeline and HTTP service for vacation rental quality ratings,
//! built on the `vr-rating` crate.

pub mod batch;
pub mod cli;
pub mod server;
