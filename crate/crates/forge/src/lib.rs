//! forge: turn Android application packages into fused RGB feature images
//! and train/evaluate a lightweight classifier on the result.

pub mod apk;
pub mod axml;
pub mod byteplot;
pub mod classify;
pub mod dex;
pub mod enhance;
pub mod fuse;
pub mod mutf8;
pub mod pipeline;
pub mod raster;
pub mod synth;
