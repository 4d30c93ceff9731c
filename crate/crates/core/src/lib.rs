//! Completeness thresholds for array memory safety.
//!
//! A program over arrays `a` of size `s` is reduced to the statements that
//! can influence out-of-bounds accesses to `a`, a constraint set over `s` is
//! extracted from the reduced program, and a bounded check at one model of
//! each satisfiable constraint then stands in for a check at every size.

pub mod frontend;
pub mod semantics;
pub mod dataflow;
pub mod slicer;
pub mod extract;
pub mod solver;
pub mod checker;
pub mod oracle;
