// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::large_enum_variant)]

pub mod geometry;
pub mod navigation;
pub mod net_harness;
pub mod protocol;
pub mod scene;
pub mod session_state;
