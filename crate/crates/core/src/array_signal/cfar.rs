//! Cell-averaging CFAR detection on the angular spectrum.
//!
//! A cell is flagged when its power exceeds C/(N_az * N_el) times the sum of
//! the window around it, excluding a guard ring around the cell under test;
//! window indices are clamped at the grid edges. Flagged cells are reduced
//! to local maxima and reported with their half-power widths.

use super::music::AngularSpectrum;
use super::wrap_angle;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CfarConfig {
    /// Threshold factor C.
    pub c_threshold: f64,
    /// Window extent in azimuth cells (N_az; the window spans -N/2..N/2).
    pub window_az: usize,
    /// Window extent in elevation cells.
    pub window_el: usize,
    /// Guard ring half-width around the cell under test, cells.
    pub guard: usize,
    /// Keep at most this many peaks (strongest first).
    pub max_peaks: usize,
}

impl Default for CfarConfig {
    fn default() -> Self {
        CfarConfig {
            c_threshold: 8.0,
            window_az: 16,
            window_el: 16,
            guard: 1,
            max_peaks: 8,
        }
    }
}

/// One detected spectral peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Global azimuth, radians, wrapped to (-pi, pi].
    pub azimuth: f64,
    pub elevation: f64,
    pub power: f64,
    /// Half-power extent, radians (mean of the two axes, floored at one
    /// grid step).
    pub width: f64,
}

/// Cell-averaging CFAR over the spectrum; returns local-maximum peaks
/// sorted by descending power.
pub fn cfar_detect(spectrum: &AngularSpectrum, cfg: &CfarConfig) -> Vec<Peak> {
    let n_az = spectrum.n_az();
    let n_el = spectrum.n_el();
    debug_assert!(cfg.window_az < n_az && cfg.window_el < n_el, "window larger than grid");
    let half_az = (cfg.window_az / 2) as isize;
    let half_el = (cfg.window_el / 2) as isize;
    let guard = cfg.guard as isize;
    let norm = cfg.c_threshold / (cfg.window_az.max(1) * cfg.window_el.max(1)) as f64;

    let flagged: Vec<bool> = (0..n_el * n_az)
        .map(|idx| {
            let (e, a) = (idx / n_az, idx % n_az);
            let mut sum = 0.0;
            for de in -half_el..=half_el {
                for da in -half_az..=half_az {
                    if de.abs() <= guard && da.abs() <= guard {
                        continue;
                    }
                    let ee = (e as isize + de).clamp(0, n_el as isize - 1) as usize;
                    let aa = (a as isize + da).clamp(0, n_az as isize - 1) as usize;
                    sum += spectrum.value(ee, aa);
                }
            }
            spectrum.value(e, a) > norm * sum
        })
        .collect();

    let mut peaks = Vec::new();
    for e in 0..n_el {
        for a in 0..n_az {
            if !flagged[e * n_az + a] {
                continue;
            }
            let v = spectrum.value(e, a);
            let mut is_max = true;
            'nb: for de in -1isize..=1 {
                for da in -1isize..=1 {
                    if de == 0 && da == 0 {
                        continue;
                    }
                    let ee = e as isize + de;
                    let aa = a as isize + da;
                    if ee < 0 || aa < 0 || ee >= n_el as isize || aa >= n_az as isize {
                        continue;
                    }
                    let w = spectrum.value(ee as usize, aa as usize);
                    if w > v || (w == v && (ee as usize, aa as usize) < (e, a)) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if !is_max {
                continue;
            }
            peaks.push(Peak {
                azimuth: wrap_angle(spectrum.grid.azimuths[a]),
                elevation: spectrum.grid.elevations[e],
                power: v,
                width: half_power_width(spectrum, e, a),
            });
        }
    }
    peaks.sort_by(|x, y| {
        y.power
            .partial_cmp(&x.power)
            .unwrap()
            .then(x.azimuth.partial_cmp(&y.azimuth).unwrap())
    });
    peaks.truncate(cfg.max_peaks);
    peaks
}

/// Mean of the contiguous half-power extents along the two axes, floored at
/// one grid step.
fn half_power_width(spectrum: &AngularSpectrum, e: usize, a: usize) -> f64 {
    let half = spectrum.value(e, a) / 2.0;
    let n_az = spectrum.n_az();
    let n_el = spectrum.n_el();

    let mut lo_a = a;
    while lo_a > 0 && spectrum.value(e, lo_a - 1) >= half {
        lo_a -= 1;
    }
    let mut hi_a = a;
    while hi_a + 1 < n_az && spectrum.value(e, hi_a + 1) >= half {
        hi_a += 1;
    }
    let mut lo_e = e;
    while lo_e > 0 && spectrum.value(lo_e - 1, a) >= half {
        lo_e -= 1;
    }
    let mut hi_e = e;
    while hi_e + 1 < n_el && spectrum.value(hi_e + 1, a) >= half {
        hi_e += 1;
    }
    let w_az = (hi_a - lo_a) as f64 * spectrum.grid.az_step();
    let w_el = (hi_e - lo_e) as f64 * spectrum.grid.el_step();
    let floor = spectrum.grid.az_step().max(spectrum.grid.el_step());
    ((w_az + w_el) * 0.5).max(floor)
}
