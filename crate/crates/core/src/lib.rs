//! Deterministic, seedable simulator of ray-tracing-based outdoor
//! positioning.
//!
//! The crate models multipath radio propagation through a 3D urban scene,
//! synthesizes per-base-station angle-of-arrival measurements, and fuses
//! them at a central unit via ray re-tracing, probabilistic weighting,
//! clustering, and angular-domain tracking to localize a moving user
//! terminal.
//!
//! Modules follow the processing chain:
//!
//! - [`geometry`]: primitives, ray-triangle intersection, BVH, spatial grid
//! - [`scene`]: scene files, materials, RRU/UE placement, map perturbation
//! - [`propagation`]: the ray-tracing channel engine (paths with physics)
//! - [`array_signal`]: steering vectors, snapshots, MUSIC, CA-CFAR
//! - [`positioning`]: ray re-tracing with bias search, candidate fusion
//! - [`clustering`]: connected-component grouping of candidates
//! - [`tracking`]: robust Lp trend tracking of angle and center streams
//! - [`harness`]: experiment pipeline, sweeps, and error metrics

pub mod array_signal;
pub mod clustering;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod positioning;
pub mod propagation;
pub mod rng;
pub mod scene;
pub mod tracking;

pub use error::{Error, Result};
pub use geometry::{Aabb, Ray, Triangle, Vec3};
pub use propagation::{PathComponent, TraceConfig};
pub use scene::{Material, PerturbationSpec, RruConfig, SceneBundle, SceneModel, UeTrajectory};
