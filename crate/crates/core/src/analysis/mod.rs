//! Weighting-function analysis: weights, the packing oracle and the bound search.

pub mod bound;
pub mod feasibility;
pub mod weights;
