//! MUSIC pseudo-spectrum on an azimuth/elevation grid.
//!
//! The sample covariance is eigendecomposed; the eigenvectors of the
//! smallest (elements - model_order) eigenvalues span the noise subspace V,
//! and the spectrum is S(az, el) = 1 / ||V^H a(az, el)||^2.

use super::{steering_vector, ArrayGeometry, SnapshotSet};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Strictly increasing evaluation grid. Azimuths may run outside (-pi, pi]
/// for sectors that straddle the wrap; consumers re-wrap reported angles.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub azimuths: Vec<f64>,
    pub elevations: Vec<f64>,
}

impl SpectrumGrid {
    pub fn new(azimuths: Vec<f64>, elevations: Vec<f64>) -> Result<SpectrumGrid> {
        for axis in [&azimuths, &elevations] {
            if axis.is_empty() {
                return Err(Error::Invalid("empty spectrum grid axis".into()));
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Invalid("spectrum grid must be strictly increasing".into()));
            }
        }
        Ok(SpectrumGrid { azimuths, elevations })
    }

    /// Sector grid centered on the panel boresight azimuth.
    pub fn sector(
        boresight_az: f64,
        half_width_az: f64,
        el_min: f64,
        el_max: f64,
        step: f64,
    ) -> Result<SpectrumGrid> {
        if step <= 0.0 || half_width_az <= 0.0 || el_max <= el_min {
            return Err(Error::Invalid("degenerate spectrum grid spec".into()));
        }
        let n_az = (2.0 * half_width_az / step).round() as usize + 1;
        let n_el = ((el_max - el_min) / step).round() as usize + 1;
        let azimuths = (0..n_az)
            .map(|i| boresight_az - half_width_az + i as f64 * step)
            .collect();
        let elevations = (0..n_el).map(|i| el_min + i as f64 * step).collect();
        SpectrumGrid::new(azimuths, elevations)
    }

    pub fn len(&self) -> usize {
        self.azimuths.len() * self.elevations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn az_step(&self) -> f64 {
        if self.azimuths.len() > 1 {
            self.azimuths[1] - self.azimuths[0]
        } else {
            0.0
        }
    }

    pub fn el_step(&self) -> f64 {
        if self.elevations.len() > 1 {
            self.elevations[1] - self.elevations[0]
        } else {
            0.0
        }
    }
}

/// Power values over a grid; row index = elevation, column index = azimuth.
#[derive(Debug, Clone)]
pub struct AngularSpectrum {
    pub grid: SpectrumGrid,
    values: Vec<f64>,
}

impl AngularSpectrum {
    pub fn new(grid: SpectrumGrid, values: Vec<f64>) -> Result<AngularSpectrum> {
        if values.len() != grid.len() {
            return Err(Error::Invalid("spectrum value count mismatch".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Invalid("spectrum values must be finite and positive".into()));
        }
        Ok(AngularSpectrum { grid, values })
    }

    pub fn value(&self, el_idx: usize, az_idx: usize) -> f64 {
        self.values[el_idx * self.grid.azimuths.len() + az_idx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_az(&self) -> usize {
        self.grid.azimuths.len()
    }

    pub fn n_el(&self) -> usize {
        self.grid.elevations.len()
    }
}

/// Precomputed steering matrix over a grid (elements x grid points).
pub(crate) struct SteeringPlan {
    matrix: DMatrix<Complex64>,
}

impl SteeringPlan {
    pub fn new(geom: &ArrayGeometry, grid: &SpectrumGrid, lambda: f64) -> SteeringPlan {
        let m = geom.element_count();
        let g = grid.len();
        let mut matrix = DMatrix::<Complex64>::zeros(m, g);
        let n_az = grid.azimuths.len();
        for (col, chunk) in matrix.column_iter_mut().enumerate() {
            let el = grid.elevations[col / n_az];
            let az = grid.azimuths[col % n_az];
            let a = steering_vector(geom, az, el, lambda);
            let mut chunk = chunk;
            chunk.copy_from(&a);
        }
        SteeringPlan { matrix }
    }
}

pub(crate) type Eigen = (DVector<f64>, DMatrix<Complex64>);

/// Hermitian eigendecomposition with eigenvalues clamped at zero.
pub(crate) fn hermitian_eigen(cov: &DMatrix<Complex64>) -> Result<Eigen> {
    if cov.nrows() != cov.ncols() || cov.is_empty() {
        return Err(Error::Invalid("covariance must be square and non-empty".into()));
    }
    let eig = cov.clone().symmetric_eigen();
    Ok((eig.eigenvalues.map(|v| v.max(0.0)), eig.eigenvectors))
}

/// Eigenvalue-gap model order: eigenvalues above
/// `factor * (mean of the smallest quartile)` count as signals, with a
/// relative floor so numerically-zero values never count, capped.
pub(crate) fn model_order_from_eigenvalues(
    eigenvalues: &DVector<f64>,
    factor: f64,
    cap: usize,
) -> usize {
    let mut sorted: Vec<f64> = eigenvalues.iter().copied().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = sorted.len();
    let lambda_max = sorted[m - 1];
    if lambda_max <= 0.0 {
        return 0;
    }
    let quartile = (m / 4).max(1);
    let noise_est: f64 = sorted[..quartile].iter().sum::<f64>() / quartile as f64;
    let threshold = (factor * noise_est).max(1e-6 * lambda_max);
    let order = sorted.iter().filter(|&&v| v > threshold).count();
    order.min(cap).min(m.saturating_sub(1))
}

/// Spectrum from a precomputed eigendecomposition and steering plan.
pub(crate) fn spectrum_from_eigen(
    eigen: &Eigen,
    model_order: usize,
    grid: &SpectrumGrid,
    plan: &SteeringPlan,
) -> Result<AngularSpectrum> {
    let (values_vec, vectors) = eigen;
    let m = values_vec.len();
    if model_order >= m {
        return Err(Error::RankDeficient {
            rank: m,
            model_order,
        });
    }
    // Guard against claiming signal dimensions the data cannot support.
    let mut sorted: Vec<f64> = values_vec.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let numeric_rank = sorted.iter().filter(|&&v| v > 1e-12 * sorted[0].max(f64::MIN_POSITIVE)).count();
    if model_order > numeric_rank {
        return Err(Error::RankDeficient {
            rank: numeric_rank,
            model_order,
        });
    }

    // Noise subspace: eigenvectors of the m - order smallest eigenvalues.
    let mut order_idx: Vec<usize> = (0..m).collect();
    order_idx.sort_by(|&a, &b| values_vec[a].partial_cmp(&values_vec[b]).unwrap().then(a.cmp(&b)));
    let noise_dim = m - model_order;
    let mut noise = DMatrix::<Complex64>::zeros(m, noise_dim);
    for (k, &idx) in order_idx[..noise_dim].iter().enumerate() {
        noise.column_mut(k).copy_from(&vectors.column(idx));
    }

    // S = 1 / ||V^H a||^2 per grid point.
    let projected = noise.adjoint() * &plan.matrix;
    let mut values = Vec::with_capacity(grid.len());
    for col in projected.column_iter() {
        let denom: f64 = col.iter().map(|v| v.norm_sqr()).sum();
        values.push(1.0 / denom.max(1e-30));
    }
    AngularSpectrum::new(grid.clone(), values)
}

/// MUSIC spectrum of a snapshot set over the grid.
pub fn music_spectrum(
    snapshots: &SnapshotSet,
    geom: &ArrayGeometry,
    model_order: usize,
    grid: &SpectrumGrid,
) -> Result<AngularSpectrum> {
    let cov = snapshots.sample_covariance();
    music_spectrum_from_cov(&cov, geom, model_order, grid, None)
}

/// MUSIC spectrum straight from a covariance matrix. `lambda` defaults to
/// the value implied by half-wavelength spacing being unknown, so callers
/// should pass it when the covariance does not come from a SnapshotSet.
pub fn music_spectrum_from_cov(
    cov: &DMatrix<Complex64>,
    geom: &ArrayGeometry,
    model_order: usize,
    grid: &SpectrumGrid,
    lambda: Option<f64>,
) -> Result<AngularSpectrum> {
    let lambda = lambda.unwrap_or_else(|| super::SrsConfig::default().lambda());
    let eigen = hermitian_eigen(cov)?;
    let plan = SteeringPlan::new(geom, grid, lambda);
    spectrum_from_eigen(&eigen, model_order, grid, &plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_signal::{synthesize_snapshots, Impairments, SrsConfig};
    use crate::geometry::Vec3;
    use crate::propagation::PathComponent;
    use crate::scene::RruConfig;

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

    fn path(az: f64, el: f64, delay: f64) -> PathComponent {
        PathComponent {
            complex_gain: num_complex::Complex64::new(0.01, 0.0),
            delay,
            aoa_azimuth: az,
            aoa_elevation: el,
            aod_azimuth: 0.0,
            aod_elevation: 0.0,
            interactions: Vec::new(),
            path_length: 150.0,
            is_los: true,
        }
    }

    fn grid() -> SpectrumGrid {
        SpectrumGrid::sector(
            0.0,
            60f64.to_radians(),
            (-30f64).to_radians(),
            10f64.to_radians(),
            0.5f64.to_radians(),
        )
        .unwrap()
    }

    fn argmax(spec: &AngularSpectrum) -> (f64, f64) {
        let mut best = (0usize, 0usize);
        let mut best_v = f64::MIN;
        for e in 0..spec.n_el() {
            for a in 0..spec.n_az() {
                if spec.value(e, a) > best_v {
                    best_v = spec.value(e, a);
                    best = (e, a);
                }
            }
        }
        (spec.grid.azimuths[best.1], spec.grid.elevations[best.0])
    }

    #[test]
    fn single_source_on_grid_peaks_there() {
        // Truth placed exactly on grid points.
        let az0 = 10f64.to_radians();
        let el0 = -5f64.to_radians();
        let mut imp = Impairments::clean(20.0);
        imp.noise_variance = 0.0;
        let set =
            synthesize_snapshots(&[path(az0, el0, 0.4e-6)], &rru(), &SrsConfig::default(), &imp, 1)
                .unwrap();
        let geom = crate::array_signal::ArrayGeometry::from_rru(&rru());
        let spec = music_spectrum(&set, &geom, 1, &grid()).unwrap();
        let (az, el) = argmax(&spec);
        assert!((az - az0).abs() < 1e-9, "az {az} vs {az0}");
        assert!((el - el0).abs() < 1e-9, "el {el} vs {el0}");
    }

    #[test]
    fn spectrum_finite_with_noise() {
        let set = synthesize_snapshots(
            &[path(0.1, -0.05, 0.2e-6)],
            &rru(),
            &SrsConfig::default(),
            &Impairments::clean(10.0),
            5,
        )
        .unwrap();
        let geom = crate::array_signal::ArrayGeometry::from_rru(&rru());
        let spec = music_spectrum(&set, &geom, 1, &grid()).unwrap();
        assert!(spec.values().iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn phase_rotation_invariance() {
        let set = synthesize_snapshots(
            &[path(0.15, -0.03, 0.3e-6)],
            &rru(),
            &SrsConfig::default(),
            &Impairments::clean(15.0),
            9,
        )
        .unwrap();
        let geom = crate::array_signal::ArrayGeometry::from_rru(&rru());
        let spec_a = music_spectrum(&set, &geom, 1, &grid()).unwrap();

        let rot = num_complex::Complex64::from_polar(1.0, 1.2345);
        let mut rotated = set.clone();
        rotated.data *= rot;
        let spec_b = music_spectrum(&rotated, &geom, 1, &grid()).unwrap();
        for (a, b) in spec_a.values().iter().zip(spec_b.values()) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn model_order_too_large_errors() {
        let mut imp = Impairments::clean(20.0);
        imp.noise_variance = 0.0; // rank-1 covariance
        let set =
            synthesize_snapshots(&[path(0.1, 0.0, 0.1e-6)], &rru(), &SrsConfig::default(), &imp, 2)
                .unwrap();
        let geom = crate::array_signal::ArrayGeometry::from_rru(&rru());
        // Order 5 on a rank-1 covariance is rejected.
        let err = music_spectrum(&set, &geom, 5, &grid()).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
        // Order >= element count is rejected outright.
        let err = music_spectrum(&set, &geom, 32, &grid()).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
    }

    #[test]
    fn model_order_heuristic() {
        let v = DVector::from_vec(vec![1e-3, 1.1e-3, 0.9e-3, 1.0e-3, 0.5, 2.0]);
        assert_eq!(model_order_from_eigenvalues(&v, 10.0, 8), 2);
        let noise_only = DVector::from_vec(vec![1.0e-3, 1.1e-3, 0.9e-3, 1.05e-3]);
        assert_eq!(model_order_from_eigenvalues(&noise_only, 10.0, 8), 0);
    }
}
