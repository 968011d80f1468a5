//! Room impulse response rendering at a configurable acoustic level of
//! detail: image sources, feedback delay network tails, coupled rooms,
//! binaural and loudspeaker-array spatialization, plus the stimuli and
//! objective metrics used to evaluate the renders.

pub mod analysis;
pub mod bands;
pub mod coupled;
pub mod dsp;
pub mod error;
pub mod fdn;
pub mod geom;
pub mod io;
pub mod ism;
pub mod pipeline;
pub mod postproc;
pub mod rng;
pub mod scene;
pub mod spatial;
pub mod stimuli;

pub use error::{Error, Result};
pub use geom::Vec3;
pub use ism::{ReflectionTap, SpatialIR};
pub use pipeline::{simulate, SimulationOptions};
pub use scene::{OutputMode, RenderingProfile, SceneSpec};
pub use spatial::{ChannelSemantics, HrtfSet, ImpulseResponse, LoudspeakerLayout};
