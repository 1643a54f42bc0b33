//! Scene-text editing at desk scale: a deterministic paired synthetic
//! renderer, a style/content-decomposing encoder with recognition and
//! adversarial heads, the full multi-branch training objective, a trainer,
//! and evaluation metrics and diagnostics.

pub mod data;
pub mod error;
pub mod eval;
pub mod image;
pub mod losses;
pub mod model;
pub mod synth;
pub mod trainer;
