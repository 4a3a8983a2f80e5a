//! Frequency-domain channel snapshot synthesis.
//!
//! Each snapshot is one SRS tone: the per-path array response scaled by the
//! tone's delay phase, plus fixed per-element calibration phase errors and
//! white noise. Noise power is held at `noise_variance`; the signal is
//! scaled to meet the configured SNR, which leaves MUSIC (scale-invariant)
//! untouched while keeping snapshot statistics interpretable.

use super::{steering_vector, ArrayGeometry, ElementPattern};
use crate::error::{Error, Result};
use crate::propagation::PathComponent;
use crate::rng::derive_rng;
use crate::scene::RruConfig;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Sounding-signal dimensioning: which tones become snapshots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SrsConfig {
    pub carrier_frequency_hz: f64,
    pub subcarrier_spacing_hz: f64,
    /// Allocated resource blocks.
    pub n_rb: usize,
    /// Transmission comb: every k_tc-th subcarrier carries the sounding signal.
    pub k_tc: usize,
    /// Number of tones kept as snapshots (evenly subsampled from the comb).
    pub n_snapshots: usize,
}

impl Default for SrsConfig {
    fn default() -> Self {
        SrsConfig {
            carrier_frequency_hz: 3.5e9,
            subcarrier_spacing_hz: 30e3,
            n_rb: 272,
            k_tc: 2,
            n_snapshots: 64,
        }
    }
}

impl SrsConfig {
    pub fn lambda(&self) -> f64 {
        crate::propagation::SPEED_OF_LIGHT / self.carrier_frequency_hz
    }

    /// Total sounding tones available: n_rb * 12 / k_tc.
    pub fn total_tones(&self) -> usize {
        self.n_rb * 12 / self.k_tc
    }

    pub fn validate(&self, element_count: usize) -> Result<()> {
        if self.carrier_frequency_hz <= 0.0 || self.subcarrier_spacing_hz <= 0.0 {
            return Err(Error::Invalid("carrier/subcarrier frequency must be positive".into()));
        }
        if self.k_tc == 0 || self.n_rb == 0 {
            return Err(Error::Invalid("n_rb and k_tc must be positive".into()));
        }
        if self.n_snapshots < element_count {
            return Err(Error::Invalid(format!(
                "snapshot count {} below element count {}: covariance would be rank-deficient",
                self.n_snapshots, element_count
            )));
        }
        if self.n_snapshots > self.total_tones() {
            return Err(Error::Invalid(format!(
                "snapshot count {} exceeds available tones {}",
                self.n_snapshots,
                self.total_tones()
            )));
        }
        Ok(())
    }

    /// Baseband frequency of snapshot `s`, Hz (tones evenly subsampled and
    /// centered on the carrier).
    pub fn tone_frequency(&self, s: usize) -> f64 {
        let tones = self.total_tones();
        let tone_spacing = self.subcarrier_spacing_hz * self.k_tc as f64;
        let idx = if self.n_snapshots == 1 {
            (tones - 1) as f64 / 2.0
        } else {
            s as f64 * (tones - 1) as f64 / (self.n_snapshots - 1) as f64
        };
        (idx - (tones - 1) as f64 / 2.0) * tone_spacing
    }
}

/// Receiver-side imperfections applied during synthesis.
#[derive(Debug, Clone, Default)]
pub struct Impairments {
    /// Per-element calibration phase error spec: three-sigma value, degrees.
    pub calibration_deg_3sigma: f64,
    /// Seed for the calibration draw; fixed per RRU so the error pattern
    /// stays constant across TTIs.
    pub calibration_seed: u64,
    /// Per-element per-snapshot complex noise variance.
    pub noise_variance: f64,
    /// Signal-to-noise ratio (mean element power over noise variance), dB.
    pub snr_db: f64,
    /// Extra paths injected into synthesis (interference directions).
    pub interference_paths: Vec<PathComponent>,
}

impl Impairments {
    pub fn clean(snr_db: f64) -> Impairments {
        Impairments {
            calibration_deg_3sigma: 0.0,
            calibration_seed: 0,
            noise_variance: 1.0,
            snr_db,
            interference_paths: Vec::new(),
        }
    }
}

/// Complex baseband observations, elements x snapshots.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    pub data: DMatrix<Complex64>,
    pub calibration_phases: Vec<f64>,
    pub noise_variance: f64,
}

impl SnapshotSet {
    pub fn element_count(&self) -> usize {
        self.data.nrows()
    }

    pub fn snapshot_count(&self) -> usize {
        self.data.ncols()
    }

    /// Sample covariance (Hermitian by construction).
    pub fn sample_covariance(&self) -> DMatrix<Complex64> {
        let s = self.snapshot_count() as f64;
        let r = &self.data * self.data.adjoint() / Complex64::new(s, 0.0);
        // Symmetrize to guard the eigensolver against rounding drift.
        (&r + r.adjoint()) * Complex64::new(0.5, 0.0)
    }
}

/// Synthesizes one TTI worth of snapshots for an RRU.
///
/// `rng_seed` drives the noise; the calibration pattern comes from the
/// impairments' own seed so it stays fixed across TTIs. With no paths the
/// output is pure noise at the configured variance.
pub fn synthesize_snapshots(
    paths: &[PathComponent],
    rru: &RruConfig,
    srs: &SrsConfig,
    impairments: &Impairments,
    rng_seed: u64,
) -> Result<SnapshotSet> {
    srs.validate(rru.element_count())?;
    if impairments.noise_variance < 0.0 {
        return Err(Error::Invalid("noise_variance must be >= 0".into()));
    }
    let geom = ArrayGeometry::from_rru(rru);
    let pattern = ElementPattern::default();
    let m = geom.element_count();
    let s_count = srs.n_snapshots;
    let lambda = srs.lambda();

    // Per-path array response (pattern-weighted steering times path gain).
    let mut responses: Vec<(DVector<Complex64>, f64)> = Vec::new();
    for p in paths.iter().chain(impairments.interference_paths.iter()) {
        let d_az = super::wrap_angle(p.aoa_azimuth - rru.rotation_azimuth);
        let d_el = p.aoa_elevation + rru.tilt;
        let amp = pattern.amplitude(d_az, d_el);
        let a = steering_vector(&geom, p.aoa_azimuth, p.aoa_elevation, lambda)
            * (p.complex_gain * amp);
        responses.push((a, p.delay));
    }

    let mut signal = DMatrix::<Complex64>::zeros(m, s_count);
    for s in 0..s_count {
        let f_s = srs.tone_frequency(s);
        let mut col = signal.column_mut(s);
        for (a, delay) in &responses {
            let rot = Complex64::from_polar(1.0, -std::f64::consts::TAU * f_s * delay);
            col.axpy(rot, a, Complex64::new(1.0, 0.0));
        }
    }

    // Scale signal to hit the requested SNR against the fixed noise floor.
    let sig_power: f64 = signal.iter().map(|v| v.norm_sqr()).sum::<f64>() / (m * s_count) as f64;
    if sig_power > 0.0 && impairments.noise_variance > 0.0 {
        let target = 10f64.powf(impairments.snr_db / 10.0) * impairments.noise_variance;
        let scale = (target / sig_power).sqrt();
        signal *= Complex64::new(scale, 0.0);
    }

    // Fixed per-element calibration phases.
    let sigma_rad = impairments.calibration_deg_3sigma.to_radians() / 3.0;
    let mut cal_rng = derive_rng(impairments.calibration_seed, &[rru.id as u64, 0xca11]);
    let calibration_phases: Vec<f64> = if sigma_rad > 0.0 {
        let n = Normal::new(0.0, sigma_rad).expect("sigma validated");
        (0..m).map(|_| n.sample(&mut cal_rng)).collect()
    } else {
        vec![0.0; m]
    };
    for (row, &phi) in calibration_phases.iter().enumerate() {
        if phi != 0.0 {
            let rot = Complex64::from_polar(1.0, phi);
            for v in signal.row_mut(row).iter_mut() {
                *v *= rot;
            }
        }
    }

    // Additive white noise.
    if impairments.noise_variance > 0.0 {
        let mut rng = derive_rng(rng_seed, &[rru.id as u64, 0x4015e]);
        let n = Normal::new(0.0, (impairments.noise_variance / 2.0).sqrt()).unwrap();
        for v in signal.iter_mut() {
            *v += Complex64::new(n.sample(&mut rng), n.sample(&mut rng));
        }
    }

    Ok(SnapshotSet {
        data: signal,
        calibration_phases,
        noise_variance: impairments.noise_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use approx::assert_relative_eq;

    fn rru() -> RruConfig {
        RruConfig {
            id: 0,
            position: Vec3::new(0.0, 0.0, 20.0),
            rotation_azimuth: 0.0,
            tilt: 10f64.to_radians(),
            rows: 4,
            cols: 8,
            spacing_h: 0.0428,
            spacing_v: 0.0428,
        }
    }

    fn los_path(az: f64, el: f64) -> PathComponent {
        PathComponent {
            complex_gain: Complex64::new(0.01, 0.0),
            delay: 500e-9,
            aoa_azimuth: az,
            aoa_elevation: el,
            aod_azimuth: 0.0,
            aod_elevation: 0.0,
            interactions: Vec::new(),
            path_length: 150.0,
            is_los: true,
        }
    }

    #[test]
    fn single_path_rank_one() {
        let mut imp = Impairments::clean(20.0);
        imp.noise_variance = 0.0; // noiseless
        let set =
            synthesize_snapshots(&[los_path(0.2, -0.1)], &rru(), &SrsConfig::default(), &imp, 1)
                .unwrap();
        let r = set.sample_covariance();
        let eig = r.symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(vals[0] > 0.0);
        assert!(vals[1] / vals[0] < 1e-10, "rank-1 expected: {vals:?}");

        // Principal eigenvector is proportional to the steering vector.
        let idx = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let v = eig.eigenvectors.column(idx);
        let geom = ArrayGeometry::from_rru(&rru());
        let a = steering_vector(&geom, 0.2, -0.1, SrsConfig::default().lambda());
        let corr = (a.adjoint() * v)[(0, 0)].norm() / (a.norm() * v.norm());
        assert_relative_eq!(corr, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn no_paths_pure_noise_variance() {
        let mut srs = SrsConfig::default();
        srs.n_snapshots = 320; // 32 elements x 320 snapshots = 10240 samples
        let imp = Impairments {
            noise_variance: 2.0,
            ..Impairments::clean(10.0)
        };
        let set = synthesize_snapshots(&[], &rru(), &srs, &imp, 7).unwrap();
        let n = (set.element_count() * set.snapshot_count()) as f64;
        let var: f64 = set.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
        assert!((var - 2.0).abs() / 2.0 < 0.05, "sample variance {var}");
    }

    #[test]
    fn two_delay_paths_decorrelate_to_rank_two() {
        let mut imp = Impairments::clean(20.0);
        imp.noise_variance = 0.0;
        let p1 = los_path(0.3, -0.05);
        let mut p2 = los_path(-0.25, -0.08);
        p2.delay = 900e-9;
        let set = synthesize_snapshots(&[p1, p2], &rru(), &SrsConfig::default(), &imp, 3).unwrap();
        let eig = set.sample_covariance().symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(vals[1] / vals[0] > 1e-4, "second source visible: {vals:?}");
        assert!(vals[2] / vals[0] < 1e-10, "rank 2 expected: {vals:?}");
    }

    #[test]
    fn snapshot_count_validation() {
        let mut srs = SrsConfig::default();
        srs.n_snapshots = 8; // below 32 elements
        let err = synthesize_snapshots(&[], &rru(), &srs, &Impairments::clean(0.0), 1);
        assert!(err.is_err());
    }

    #[test]
    fn calibration_fixed_across_ttis() {
        let imp = Impairments {
            calibration_deg_3sigma: 3.0,
            calibration_seed: 99,
            ..Impairments::clean(20.0)
        };
        let a = synthesize_snapshots(&[los_path(0.1, 0.0)], &rru(), &SrsConfig::default(), &imp, 1)
            .unwrap();
        let b = synthesize_snapshots(&[los_path(0.1, 0.0)], &rru(), &SrsConfig::default(), &imp, 2)
            .unwrap();
        assert_eq!(a.calibration_phases, b.calibration_phases);
        assert!(a.calibration_phases.iter().any(|&p| p != 0.0));
        // Different noise seeds still change the data.
        assert_ne!(a.data[(0, 0)], b.data[(0, 0)]);
    }
}
