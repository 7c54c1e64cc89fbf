//! File formats, persistence, batch pipeline and review service built on
//! `pvlens-core`.

pub mod pipeline;
pub mod report;
pub mod repository;
pub mod service;
pub mod spl;
pub mod srlc_io;
pub mod synth;
pub mod terms_io;
