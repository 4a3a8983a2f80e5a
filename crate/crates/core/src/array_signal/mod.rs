//! Per-RRU signal layer: array geometry and steering vectors, synthesis of
//! noisy channel snapshots from traced paths, MUSIC angular spectra, and
//! CA-CFAR peak detection producing angle reports.

mod cfar;
mod music;
mod snapshots;

pub use cfar::{cfar_detect, CfarConfig, Peak};
pub use music::{music_spectrum, music_spectrum_from_cov, AngularSpectrum, SpectrumGrid};
pub use snapshots::{synthesize_snapshots, Impairments, SnapshotSet, SrsConfig};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::propagation::PathComponent;
use crate::scene::RruConfig;
use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Element displacements of a rotated, tilted rectangular panel.
///
/// Element (i_h = 1, i_v = 1) sits at the origin; the element order is
/// row-major over (i_v, i_h).
#[derive(Debug, Clone)]
pub struct ArrayGeometry {
    displacements: Vec<Vec3>,
}

impl ArrayGeometry {
    pub fn from_rru(rru: &RruConfig) -> ArrayGeometry {
        let (sin_rot, cos_rot) = rru.rotation_azimuth.sin_cos();
        let (sin_tilt, cos_tilt) = rru.tilt.sin_cos();
        let mut displacements = Vec::with_capacity(rru.rows * rru.cols);
        for iv in 0..rru.rows {
            for ih in 0..rru.cols {
                let h = ih as f64 * rru.spacing_h;
                let v = iv as f64 * rru.spacing_v;
                displacements.push(Vec3::new(
                    h * cos_rot + v * sin_rot * sin_tilt,
                    h * sin_rot - v * cos_rot * sin_tilt,
                    v * cos_tilt,
                ));
            }
        }
        ArrayGeometry { displacements }
    }

    pub fn element_count(&self) -> usize {
        self.displacements.len()
    }

    pub fn displacements(&self) -> &[Vec3] {
        &self.displacements
    }
}

/// Steering vector: element m is exp(i k (dx cos(el) sin(az) +
/// dy cos(el) cos(az) + dz sin(el))); the first element is always 1.
pub fn steering_vector(
    geom: &ArrayGeometry,
    azimuth: f64,
    elevation: f64,
    lambda: f64,
) -> DVector<Complex64> {
    let k = 2.0 * std::f64::consts::PI / lambda;
    let u = Vec3::from_angles(azimuth, elevation);
    DVector::from_iterator(
        geom.element_count(),
        geom.displacements.iter().map(|d| {
            let phase = k * d.dot(u);
            Complex64::from_polar(1.0, phase)
        }),
    )
}

/// 3GPP-style element power pattern: parabolic rolloff per axis, floored at
/// the front-to-back level, plus a boresight gain.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ElementPattern {
    pub max_gain_dbi: f64,
    pub beamwidth_az_deg: f64,
    pub beamwidth_el_deg: f64,
    pub floor_db: f64,
}

impl Default for ElementPattern {
    fn default() -> Self {
        ElementPattern {
            max_gain_dbi: 8.0,
            beamwidth_az_deg: 65.0,
            beamwidth_el_deg: 65.0,
            floor_db: 30.0,
        }
    }
}

impl ElementPattern {
    /// Gain in dBi for offsets from boresight (radians).
    pub fn gain_dbi(&self, d_az: f64, d_el: f64) -> f64 {
        let az = d_az.to_degrees();
        let el = d_el.to_degrees();
        let a_h = -(12.0 * (az / self.beamwidth_az_deg).powi(2)).min(self.floor_db);
        let a_v = -(12.0 * (el / self.beamwidth_el_deg).powi(2)).min(self.floor_db);
        self.max_gain_dbi - (-(a_h + a_v)).min(self.floor_db)
    }

    /// Linear amplitude multiplier for offsets from boresight.
    pub fn amplitude(&self, d_az: f64, d_el: f64) -> f64 {
        10f64.powf(self.gain_dbi(d_az, d_el) / 20.0)
    }
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(std::f64::consts::TAU);
    if x > std::f64::consts::PI {
        x -= std::f64::consts::TAU;
    }
    x
}

/// One RRU's detected arrivals for one TTI.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleReport {
    pub rru_id: usize,
    pub tti: u64,
    /// Peaks sorted by descending power.
    pub peaks: Vec<Peak>,
}

/// End-to-end AoA estimation config for one RRU.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AoaConfig {
    pub srs: SrsConfig,
    pub cfar: CfarConfig,
    pub pattern: ElementPattern,
    /// Sector half-width around boresight for the azimuth grid, radians.
    pub grid_half_width_az: f64,
    /// Absolute elevation span of the grid, radians.
    pub grid_el_min: f64,
    pub grid_el_max: f64,
    /// Grid step for both axes, radians.
    pub grid_step: f64,
    /// Eigenvalues above `noise estimate * model_order_factor` count as
    /// signals; capped at `max_model_order`.
    pub model_order_factor: f64,
    pub max_model_order: usize,
}

impl Default for AoaConfig {
    fn default() -> Self {
        AoaConfig {
            srs: SrsConfig::default(),
            cfar: CfarConfig::default(),
            pattern: ElementPattern::default(),
            grid_half_width_az: 60f64.to_radians(),
            grid_el_min: (-30f64).to_radians(),
            grid_el_max: 10f64.to_radians(),
            grid_step: 0.5f64.to_radians(),
            model_order_factor: 10.0,
            max_model_order: 8,
        }
    }
}

/// Precomputed estimator for one RRU: the spectrum grid and its steering
/// matrix are built once and reused across TTIs and seeds.
pub struct AoaEstimator {
    rru: RruConfig,
    geom: ArrayGeometry,
    cfg: AoaConfig,
    grid: SpectrumGrid,
    plan: music::SteeringPlan,
}

impl AoaEstimator {
    pub fn new(rru: &RruConfig, cfg: &AoaConfig) -> Result<AoaEstimator> {
        rru.validate()?;
        cfg.srs.validate(rru.element_count())?;
        let geom = ArrayGeometry::from_rru(rru);
        let grid = SpectrumGrid::sector(
            rru.rotation_azimuth,
            cfg.grid_half_width_az,
            cfg.grid_el_min,
            cfg.grid_el_max,
            cfg.grid_step,
        )?;
        let plan = music::SteeringPlan::new(&geom, &grid, cfg.srs.lambda());
        Ok(AoaEstimator {
            rru: rru.clone(),
            geom,
            cfg: cfg.clone(),
            grid,
            plan,
        })
    }

    pub fn rru(&self) -> &RruConfig {
        &self.rru
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geom
    }

    pub fn grid(&self) -> &SpectrumGrid {
        &self.grid
    }

    /// Synthesize snapshots, estimate the spectrum, and detect peaks.
    pub fn estimate(
        &self,
        tti: u64,
        paths: &[PathComponent],
        impairments: &Impairments,
        rng_seed: u64,
    ) -> Result<AngleReport> {
        let snapshots = synthesize_snapshots(paths, &self.rru, &self.cfg.srs, impairments, rng_seed)?;
        let cov = snapshots.sample_covariance();
        let eig = music::hermitian_eigen(&cov)?;
        let order = music::model_order_from_eigenvalues(
            &eig.0,
            self.cfg.model_order_factor,
            self.cfg.max_model_order,
        );
        let peaks = if order == 0 {
            Vec::new()
        } else {
            let spectrum = music::spectrum_from_eigen(&eig, order, &self.grid, &self.plan)?;
            cfar_detect(&spectrum, &self.cfg.cfar)
        };
        Ok(AngleReport {
            rru_id: self.rru.id,
            tti,
            peaks,
        })
    }
}

/// One-shot composition of snapshot synthesis, MUSIC, and CFAR detection.
pub fn estimate_aoa(
    rru: &RruConfig,
    tti: u64,
    paths: &[PathComponent],
    impairments: &Impairments,
    cfg: &AoaConfig,
    rng_seed: u64,
) -> Result<AngleReport> {
    AoaEstimator::new(rru, cfg)?.estimate(tti, paths, impairments, rng_seed)
}

/// Builds an exact (noise-free) report straight from traced path angles,
/// bypassing the signal chain. Peaks of nearly equal direction are merged.
pub fn exact_report(
    rru: &RruConfig,
    tti: u64,
    paths: &[PathComponent],
    width: f64,
    max_peaks: usize,
) -> AngleReport {
    let mut by_power: Vec<&PathComponent> = paths.iter().collect();
    by_power.sort_by(|a, b| b.power().partial_cmp(&a.power()).unwrap());
    let mut peaks: Vec<Peak> = Vec::new();
    let merge = 1f64.to_radians();
    for p in by_power {
        if peaks.len() >= max_peaks {
            break;
        }
        let dup = peaks.iter().any(|q| {
            (wrap_angle(q.azimuth - p.aoa_azimuth)).abs() < merge
                && (q.elevation - p.aoa_elevation).abs() < merge
        });
        if !dup {
            peaks.push(Peak {
                azimuth: p.aoa_azimuth,
                elevation: p.aoa_elevation,
                power: p.power(),
                width,
            });
        }
    }
    AngleReport {
        rru_id: rru.id,
        tti,
        peaks,
    }
}
