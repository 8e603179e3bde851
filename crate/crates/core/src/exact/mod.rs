//! Exact inference over the whole model space: CTW evidence, the MAP model
//! and the k most probable models.

mod bct;
mod ctw;
mod kbct;

pub use bct::bct_map;
pub use ctw::{ctw, ctw_update, CtwState};
pub use kbct::{kbct, kbct_with_cap, PositionVector, DEFAULT_WORK_CAP};
