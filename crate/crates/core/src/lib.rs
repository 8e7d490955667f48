#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod coreset;
pub mod embedding;
pub mod error;
pub mod estimation;
pub mod model;
pub mod severity;
pub mod synth;
