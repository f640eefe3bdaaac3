//! Region-based rate control for a block video codec: global-motion
//! screening, macroblock region maps, per-region linear rate/distortion
//! models, and an exact constrained step-size allocator, closed against a
//! small built-in encoder.

pub mod codec;
pub mod config;
pub mod controller;
pub mod error;
pub mod gmv;
pub mod lagrange;
pub mod model;
pub mod qs;
pub mod rate;
pub mod region;
pub mod report;
pub mod solver;
pub mod yuv;

pub use config::RunConfig;
pub use controller::{ControllerMode, EncoderConfig, FrameReport, FrameType, RunOutput};
pub use error::{Error, Result};
pub use gmv::GlobalMotionVector;
pub use model::{ModelWindow, RegionModel, RegionObservation};
pub use qs::QsLadder;
pub use region::{DiffMap, RegionLabel, RegionMap};
pub use solver::RateControlDecision;
pub use yuv::{FrameY, MbGrid, Plane, VideoSpec};
