//! The ray-tracing channel engine: launches rays through the scene, applies
//! free-space, reflection, scattering, and diffraction physics, and emits
//! the multipath components between a transmitter and a receiver.

mod physics;
mod trace;

pub use physics::{
    diffraction_loss_db, diffraction_v, free_space_field, fresnel_integral_ratio,
    fresnel_reflection, reflection_amplitude, scattering_gain, DiffractionGeometry,
    SPEED_OF_LIGHT,
};
pub use trace::{fibonacci_sphere, specular_polyline, trace_paths};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// What happened at one surface interaction along a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionKind {
    Reflection,
    Scattering,
    Diffraction,
}

#[derive(Debug, Clone, Copy)]
pub struct Interaction {
    pub kind: InteractionKind,
    pub point: Vec3,
    pub material_id: u32,
}

/// One traced propagation path between UE and RRU.
#[derive(Debug, Clone)]
pub struct PathComponent {
    /// Linear complex amplitude including 1/r spreading and all interaction
    /// losses; never exceeds the free-space value for the same length.
    pub complex_gain: Complex64,
    /// Propagation delay in seconds (path_length / c).
    pub delay: f64,
    /// Arrival direction at the receiver (global azimuth/elevation, radians).
    pub aoa_azimuth: f64,
    pub aoa_elevation: f64,
    /// Departure direction at the transmitter.
    pub aod_azimuth: f64,
    pub aod_elevation: f64,
    pub interactions: Vec<Interaction>,
    pub path_length: f64,
    pub is_los: bool,
}

impl PathComponent {
    /// Received power of this component relative to unit transmit power.
    pub fn power(&self) -> f64 {
        self.complex_gain.norm_sqr()
    }

    /// Gain in dB relative to free space at one meter.
    pub fn gain_db(&self) -> f64 {
        20.0 * self.complex_gain.norm().log10()
    }

    pub fn bounce_count(&self) -> usize {
        self.interactions
            .iter()
            .filter(|i| i.kind == InteractionKind::Reflection)
            .count()
    }
}

/// Ray-launching and physics switches for one trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceConfig {
    pub carrier_frequency_hz: f64,
    /// Maximum specular bounces along one path.
    pub max_reflections: usize,
    /// Number of launch directions on the Fibonacci sphere.
    pub ray_count: usize,
    /// Capture sphere radius = coefficient * unfolded length * angular step.
    pub capture_radius_coefficient: f64,
    /// Paths weaker than this (dB relative to free space at 1 m) are pruned.
    pub min_path_gain_db: f64,
    pub enable_scattering: bool,
    /// Edge length of the scattering surface tiles, meters.
    pub scattering_tile_size: f64,
    pub enable_diffraction: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            carrier_frequency_hz: 3.5e9,
            max_reflections: 3,
            ray_count: 20_000,
            capture_radius_coefficient: 1.0,
            min_path_gain_db: -160.0,
            enable_scattering: false,
            scattering_tile_size: 5.0,
            enable_diffraction: true,
        }
    }
}

impl TraceConfig {
    pub fn lambda(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency_hz
    }

    /// Mean angular spacing of the launch direction set, radians.
    pub fn angular_step(&self) -> f64 {
        (4.0 * std::f64::consts::PI / self.ray_count as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.carrier_frequency_hz <= 0.0 {
            return Err(Error::Invalid("carrier frequency must be positive".into()));
        }
        if self.ray_count == 0 {
            return Err(Error::Invalid("ray_count must be positive".into()));
        }
        if self.capture_radius_coefficient <= 0.0 {
            return Err(Error::Invalid(
                "capture_radius_coefficient must be positive".into(),
            ));
        }
        if self.scattering_tile_size <= 0.0 {
            return Err(Error::Invalid("scattering_tile_size must be positive".into()));
        }
        Ok(())
    }
}
