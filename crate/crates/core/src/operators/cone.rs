//! Cone transform
//! `R_C f(s, y) = sqrt(1 + s^2) int_0^inf int t f(t Theta + y', y3 - s t) dphi dt`
//! and the recovery of circular means from its axial Fourier transform.
//!
//! The axial shift `y3 - s t` is applied with band-limited (trigonometric)
//! interpolation of each `z` lane, so the forward data are exact for the
//! discrete spectrum of `f`; transverse sampling is bilinear.

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use super::fft::{axial_frequencies, fft_lanes};
use super::grid::{SinoGrid, Sinogram, SpectralSinogram, UniformGrid, Volume};
use crate::error::{Error, Result};
use crate::geometry::CenterSurface;

/// Radial and angular sample density of [`cone_forward`], per voxel width.
const T_OVERSAMPLE: f64 = 2.0;
const PHI_OVERSAMPLE: f64 = 2.0;
const MIN_PHI: usize = 64;

/// Cone data on `s_grid x theta_j x y3`, with `y3` on the volume's `z` axis.
///
/// Any real `s` is accepted (negative `s` opens the cone downwards). The
/// surfaces must not wrap around the periodic `y3` axis.
pub fn cone_forward(
    vol: &Volume,
    s_grid: &UniformGrid,
    n_theta: usize,
    surface: &CenterSurface,
) -> Result<Sinogram> {
    s_grid.validate()?;
    let grid = SinoGrid {
        s: *s_grid,
        n_theta,
        y: vol.grid.z_axis(),
        radius: surface.radius,
    };
    grid.validate()?;
    let shape = grid.shape();
    let ext = match vol.support_extent() {
        Some(e) => e,
        None => return Sinogram::new(Array3::zeros(shape), grid),
    };
    let plane = vol.grid.xy_axis();
    let zaxis = vol.grid.z_axis();
    let dx = plane.step();
    let nz = zaxis.n;
    let r_sup = ext.radius + dx * std::f64::consts::SQRT_2;
    let t_lo = (surface.radius - r_sup).max(0.0);
    let t_hi = surface.radius + r_sup;
    let s_abs = s_grid.min.abs().max(s_grid.max.abs());
    let reach = s_abs * t_hi + ext.z_max.max(-ext.z_min);
    if reach >= zaxis.max + zaxis.step() {
        return Err(Error::Precondition(format!(
            "y3 extent {} too short for cone data: |s| t reaches {}",
            zaxis.max, reach
        )));
    }
    let n_t = ((t_hi - t_lo) / dx * T_OVERSAMPLE).ceil().max(1.0) as usize;
    let dt = (t_hi - t_lo) / n_t as f64;
    let ts: Vec<f64> = (0..n_t).map(|m| t_lo + (m as f64 + 0.5) * dt).collect();
    let xi = axial_frequencies(nz, zaxis.step());
    let svals = s_grid.values();

    let per_theta: Vec<Vec<f64>> = (0..n_theta)
        .into_par_iter()
        .map(|j| {
            let theta = grid.theta(j);
            let c = surface.center(theta, 0.0);
            // spectra of t-weighted ring sums, one lane per t sample
            let mut spectra: Vec<Complex64> = Vec::with_capacity(n_t * nz);
            for &t in &ts {
                let n_phi = MIN_PHI.max((2.0 * PI * t / dx * PHI_OVERSAMPLE).ceil() as usize);
                let dphi = 2.0 * PI / n_phi as f64;
                let mut lane = vec![0.0; nz];
                for q in 0..n_phi {
                    let phi = theta + q as f64 * dphi;
                    vol.accumulate_lane(
                        c[0] + t * phi.cos(),
                        c[1] + t * phi.sin(),
                        t * dphi * dt,
                        &mut lane,
                    );
                }
                spectra.extend(lane.into_iter().map(|v| Complex64::new(v, 0.0)));
            }
            fft_lanes(&mut spectra, nz, false);
            let mut out = vec![0.0; svals.len() * nz];
            for (i, &s) in svals.iter().enumerate() {
                let mut acc = vec![Complex64::new(0.0, 0.0); nz];
                for (m, &t) in ts.iter().enumerate() {
                    let lane = &spectra[m * nz..(m + 1) * nz];
                    for k in 0..nz {
                        acc[k] += lane[k] * Complex64::from_polar(1.0, -xi[k] * s * t);
                    }
                }
                fft_lanes(&mut acc, nz, true);
                let scale = (1.0 + s * s).sqrt();
                for k in 0..nz {
                    out[i * nz + k] = scale * acc[k].re;
                }
            }
            out
        })
        .collect();
    let values = Array3::from_shape_fn(shape, |(i, j, k)| per_theta[j][i * shape[2] + k]);
    Sinogram::new(values, grid)
}

/// Hann taper on `[-1, 1]`.
fn hann(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (0.5 * PI * r).cos().powi(2)
    }
}

/// Circular means `M f_hat_xi(t, theta_j)` from the spectral plane `k` of cone
/// data:
/// `u(t) = (1/2 pi) int w(s') G(s') exp(i s' t) ds'`, `s' = xi s`,
/// `G = R_hat(s, xi) / sqrt(1 + s^2)`, with a Hann window `w` over the
/// sampled `s'` range. Output is `[t, theta]`.
pub fn cone_slice_recover(
    spec: &SpectralSinogram,
    k: usize,
    t_grid: &[f64],
) -> Result<Array2<Complex64>> {
    let xi = *spec.xi.get(k).ok_or_else(|| Error::Shape {
        expected: format!("frequency index < {}", spec.xi.len()),
        got: k.to_string(),
    })?;
    if xi == 0.0 {
        return Err(Error::ExcludedFrequency(xi));
    }
    let s = spec.grid.s;
    let ds = s.step();
    let half = s.min.abs().max(s.max.abs());
    let n_theta = spec.grid.n_theta;
    let weights: Vec<f64> = s
        .values()
        .iter()
        .map(|&sv| hann(sv / half) * xi.abs() * ds / (2.0 * PI) / (1.0 + sv * sv).sqrt())
        .collect();
    let svals = s.values();
    Ok(Array2::from_shape_fn((t_grid.len(), n_theta), |(it, j)| {
        let t = t_grid[it];
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &sv) in svals.iter().enumerate() {
            acc += spec.values[[i, j, k]] * weights[i] * Complex64::from_polar(1.0, xi * sv * t);
        }
        acc
    }))
}
