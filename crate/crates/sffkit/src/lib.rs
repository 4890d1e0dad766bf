//! Safety-register verification toolkit: specification extraction,
//! area-optimized merging of protected register slices, SystemVerilog
//! assertion generation, and a behavioral reference model with a bounded
//! property checker.

pub mod bits;
pub mod cli;
pub mod ecc;
pub mod optimizer;
pub mod propgen;
pub mod refmodel;
pub mod spec_model;
