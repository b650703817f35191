// NaN-rejecting comparisons are written as `!(x > 0.0)` throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod convexcurve;
pub mod cutoff;
pub mod flexcore;
pub mod jet;
pub mod multijet;
pub mod quad;
pub mod report;
pub mod staircase;
pub mod tangent;
