//! Propagation physics: free space, Fresnel reflection, directive
//! scattering, and knife-edge diffraction.

use crate::error::{Error, Result};
use crate::scene::Material;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Spherical-wave field for a unit point source: e^(-i k r) / r with
/// k = 2 pi / lambda. The antenna-pattern factor is applied separately at
/// the array stage.
pub fn free_space_field(path_length: f64, lambda: f64) -> Result<Complex64> {
    if path_length <= 0.0 {
        return Err(Error::Domain(format!(
            "free_space_field: path length {path_length} <= 0"
        )));
    }
    if lambda <= 0.0 {
        return Err(Error::Domain(format!("free_space_field: lambda {lambda} <= 0")));
    }
    let k = 2.0 * PI / lambda;
    Ok(Complex64::from_polar(1.0 / path_length, -k * path_length))
}

/// Fresnel power reflection coefficients and the transmission angle from
/// Snell's law. Returns `(r_perp, r_par, theta_t)`; both coefficients are in
/// [0, 1] and total internal reflection yields (1, 1, pi/2).
pub fn fresnel_reflection(n1: f64, n2: f64, theta_i: f64) -> Result<(f64, f64, f64)> {
    if n1 < 1.0 || n2 < 1.0 {
        return Err(Error::Domain(format!(
            "fresnel_reflection: refractive indices ({n1}, {n2}) below 1"
        )));
    }
    if !(0.0..PI / 2.0).contains(&theta_i) {
        return Err(Error::Domain(format!(
            "fresnel_reflection: incidence angle {theta_i} outside [0, pi/2)"
        )));
    }
    let sin_t = n1 * theta_i.sin() / n2;
    if sin_t > 1.0 {
        return Ok((1.0, 1.0, PI / 2.0));
    }
    let theta_t = sin_t.asin();
    let (ci, ct) = (theta_i.cos(), theta_t.cos());
    let r_par = ((n2 * ci - n1 * ct) / (n2 * ci + n1 * ct)).powi(2);
    let r_perp = ((n1 * ci - n2 * ct) / (n1 * ci + n2 * ct)).powi(2);
    Ok((r_perp, r_par, theta_t))
}

/// Amplitude multiplier used by the tracer for a reflection: square root of
/// the mean of the two power coefficients (scalar polarization model).
pub fn reflection_amplitude(material: &Material, theta_i: f64) -> Result<f64> {
    let (r_perp, r_par, _) = fresnel_reflection(1.0, material.refractive_index, theta_i)?;
    Ok(((r_perp + r_par) * 0.5).sqrt())
}

/// Single-lobe directive scattering power scale:
/// E_S0^2 * ((1 + cos psi) / 2)^alpha, with psi the angle between the
/// scattered ray and the specular direction.
pub fn scattering_gain(psi: f64, material: &Material) -> f64 {
    debug_assert!((0.0..=PI + 1e-9).contains(&psi));
    let lobe = ((1.0 + psi.cos()) * 0.5).max(0.0);
    material.scattering_amplitude.powi(2) * lobe.powf(material.scattering_exponent)
}

/// Knife-edge geometry: signed clearance `h` (negative = unobstructed),
/// distances `d1`, `d2` from the terminals to the edge, and the wavelength.
#[derive(Debug, Clone, Copy)]
pub struct DiffractionGeometry {
    pub h: f64,
    pub d1: f64,
    pub d2: f64,
    pub lambda: f64,
}

impl DiffractionGeometry {
    pub fn new(h: f64, d1: f64, d2: f64, lambda: f64) -> Result<DiffractionGeometry> {
        if d1 <= 0.0 || d2 <= 0.0 || lambda <= 0.0 {
            return Err(Error::Domain(
                "diffraction geometry requires d1, d2, lambda > 0".into(),
            ));
        }
        Ok(DiffractionGeometry { h, d1, d2, lambda })
    }
}

/// Dimensionless diffraction parameter v = h sqrt(2/lambda (1/d1 + 1/d2)).
pub fn diffraction_v(geom: &DiffractionGeometry) -> f64 {
    geom.h * (2.0 / geom.lambda * (1.0 / geom.d1 + 1.0 / geom.d2)).sqrt()
}

/// Knife-edge diffraction loss in dB:
/// J(v) = 6.9 + 20 log10(sqrt((v-0.1)^2 + 1) + v - 0.1), valid for
/// v >= -0.7; below that the loss is taken as 0 dB.
pub fn diffraction_loss_db(v: f64) -> f64 {
    if v < -0.7 {
        return 0.0;
    }
    let x = v - 0.1;
    6.9 + 20.0 * ((x * x + 1.0).sqrt() + x).log10()
}

/// Field ratio of the diffracted wave to free space:
/// F(v) = (1+i)/2 * integral_v^inf exp(-i pi t^2 / 2) dt,
/// evaluated by adaptive quadrature plus an asymptotic tail. Serves as the
/// independent oracle for the J(v) approximation.
pub fn fresnel_integral_ratio(v: f64) -> Complex64 {
    let t_max = 40.0f64.max(v + 10.0);
    // The integrand oscillates with local frequency pi*t; panel boundaries
    // are chosen so the phase pi*t^2/2 advances at most pi/2 per panel,
    // otherwise equally spaced Simpson nodes can alias to a constant.
    let f = |t: f64| Complex64::from_polar(1.0, -PI * t * t / 2.0);
    let mut body = Complex64::new(0.0, 0.0);
    let mut a = v;
    while a < t_max {
        let b = if a >= 0.0 {
            (a * a + 1.0).sqrt().min(t_max)
        } else if a * a > 1.0 {
            -((a * a - 1.0).sqrt())
        } else {
            0.0f64.min(t_max)
        };
        body += adaptive_simpson(&f, a, b, 1e-12, 24);
        a = b;
    }
    // Integration by parts: int_T^inf e^{-i pi t^2/2} dt =
    // e^{-i pi T^2/2} [1/(i pi T) - 1/((i pi)^2 T^3)] + O(T^-5).
    let i_pi = Complex64::new(0.0, PI);
    let phase = Complex64::from_polar(1.0, -PI * t_max * t_max / 2.0);
    let tail = phase * (1.0 / (i_pi * t_max) - 1.0 / (i_pi * i_pi * t_max.powi(3)));
    Complex64::new(0.5, 0.5) * (body + tail)
}

fn adaptive_simpson(
    f: &dyn Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
) -> Complex64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + fm * 4.0 + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    fa: Complex64,
    fm: Complex64,
    fb: Complex64,
    whole: Complex64,
    tol: f64,
    depth: u32,
) -> Complex64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + flm * 4.0 + fm);
    let right = (b - m) / 6.0 * (fm + frm * 4.0 + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.norm() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn concrete() -> Material {
        Material {
            name: "concrete".into(),
            refractive_index: 2.4,
            scattering_amplitude: 0.4,
            scattering_exponent: 4.0,
        }
    }

    #[test]
    fn free_space_magnitude_and_phase() {
        let lambda = 0.1;
        let f = free_space_field(lambda, lambda).unwrap();
        assert_relative_eq!(f.norm(), 1.0 / lambda, epsilon = 1e-12);
        // k*r = 2 pi: phase wraps to zero.
        assert!(f.arg().abs() < 1e-9 || (f.arg().abs() - 2.0 * PI).abs() < 1e-9);

        let f2 = free_space_field(2.0 * lambda, lambda).unwrap();
        assert_relative_eq!(f2.norm(), f.norm() / 2.0, epsilon = 1e-12);

        // r = lambda/4 gives k*r = pi/2, so the phase is -pi/2.
        let f3 = free_space_field(lambda / 4.0, lambda).unwrap();
        assert_relative_eq!(f3.arg(), -PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn free_space_domain() {
        assert!(free_space_field(0.0, 0.1).is_err());
        assert!(free_space_field(-1.0, 0.1).is_err());
    }

    #[test]
    fn fresnel_normal_incidence() {
        let (rp, rl, tt) = fresnel_reflection(1.0, 2.0, 0.0).unwrap();
        assert_relative_eq!(rp, 1.0 / 9.0, epsilon = 1e-12);
        assert_relative_eq!(rl, 1.0 / 9.0, epsilon = 1e-12);
        assert_relative_eq!(tt, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fresnel_brewster_kills_parallel() {
        let theta_b = (1.5f64).atan();
        let (_, r_par, _) = fresnel_reflection(1.0, 1.5, theta_b).unwrap();
        assert!(r_par < 1e-12, "r_par at Brewster = {r_par}");
    }

    #[test]
    fn fresnel_grazing_limit() {
        let (rp, rl, _) = fresnel_reflection(1.0, 1.5, PI / 2.0 - 1e-6).unwrap();
        assert!(rp > 0.999 && rl > 0.999);
    }

    #[test]
    fn fresnel_total_internal() {
        let (rp, rl, _) = fresnel_reflection(2.0, 1.0, 0.6).unwrap();
        assert_eq!((rp, rl), (1.0, 1.0));
    }

    #[test]
    fn fresnel_domain() {
        assert!(fresnel_reflection(1.0, 2.0, PI / 2.0).is_err());
        assert!(fresnel_reflection(1.0, 2.0, -0.1).is_err());
        assert!(fresnel_reflection(0.5, 2.0, 0.1).is_err());
    }

    #[test]
    fn scattering_lobe() {
        let m = concrete();
        let e0_sq = 0.4f64 * 0.4;
        assert_relative_eq!(scattering_gain(0.0, &m), e0_sq, epsilon = 1e-12);
        assert_relative_eq!(scattering_gain(PI, &m), 0.0, epsilon = 1e-12);
        assert_relative_eq!(scattering_gain(PI / 2.0, &m), e0_sq * 0.0625, epsilon = 1e-12);
    }

    #[test]
    fn diffraction_parameter() {
        let g = DiffractionGeometry::new(0.0, 100.0, 100.0, 0.1).unwrap();
        assert_eq!(diffraction_v(&g), 0.0);

        let g = DiffractionGeometry::new(1.0, 100.0, 100.0, 0.1).unwrap();
        assert_relative_eq!(diffraction_v(&g), 0.4f64.sqrt(), epsilon = 1e-12);

        let g2 = DiffractionGeometry::new(2.0, 100.0, 100.0, 0.1).unwrap();
        assert_relative_eq!(diffraction_v(&g2), 2.0 * diffraction_v(&g), epsilon = 1e-12);
    }

    #[test]
    fn diffraction_loss_values() {
        assert_relative_eq!(diffraction_loss_db(0.0), 6.0329, epsilon = 1e-3);
        assert_relative_eq!(diffraction_loss_db(-0.7), 0.5363, epsilon = 1e-3);
        assert_relative_eq!(diffraction_loss_db(2.4), 20.5383, epsilon = 1e-3);
        assert_eq!(diffraction_loss_db(-0.8), 0.0);
    }

    #[test]
    fn fresnel_integral_limits() {
        // Far below any obstruction the full wave passes.
        let f = fresnel_integral_ratio(-12.0);
        assert_relative_eq!(f.norm(), 1.0, epsilon = 2e-2);
        // Half-plane edge: |F(0)| = 1/2 (-6.02 dB).
        let f0 = fresnel_integral_ratio(0.0);
        assert_relative_eq!(f0.norm(), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn approximation_tracks_quadrature() {
        // |20 log10 |F(v)| + J(v)| <= 0.5 dB over the stated validity range.
        let mut v = -0.7;
        while v <= 3.0 {
            let exact_db = -20.0 * fresnel_integral_ratio(v).norm().log10();
            let approx_db = diffraction_loss_db(v);
            assert!(
                (exact_db - approx_db).abs() <= 0.5,
                "v={v}: exact {exact_db:.3} vs approx {approx_db:.3}"
            );
            v += 0.1;
        }
    }
}
