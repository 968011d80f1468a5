//! Spatialization: binaural (HRTF), loudspeaker array (VBAP), diotic and mono.

mod hrtf;
mod render;
mod vbap;

pub use hrtf::{HrtfSet, HEAD_RADIUS};
pub use render::{binauralize, diotic, diotic_array, render_array, render_mono, ChannelSemantics, ImpulseResponse};
pub use vbap::{array_preset_86, vbap_gains, Calibration, LoudspeakerLayout, VbapGains};
