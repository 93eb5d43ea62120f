//! Model multi-isometries on finite-dimensional spaces.
//!
//! An n-tuple of pairs `(U_j, P_j)` of unitaries and projections defines
//! isometric multiplication operators `V_j(z) = U_j(zP_j + P_j⊥)` on the
//! vector-valued Hardy space. This crate builds, validates, truncates and
//! classifies such tuples.

pub mod classify;
pub mod hardy;
pub mod model;
pub mod numcore;
pub mod pivotal;
pub mod sample;
pub mod structure;
