//! Axial Fourier transforms.
//!
//! Convention: the forward transform is the plain DFT
//! `F_k = sum_m f_m exp(-2 pi i k m / N)` along the third axis, the inverse
//! carries the `1/N`. Slice `k` sits at angular frequency
//! `xi_k = 2 pi k' / (N dz)` with `k' = k` for `k <= N/2` and `k - N`
//! otherwise (FFT order). A shift `f(z + c)` multiplies slice `k` by
//! `exp(i xi_k c)`, so every continuous Fourier-domain identity carries over
//! with no extra constants; the `1/(2 pi)` of the inverse continuous
//! transform only appears in the cone recovery.

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rustfft::FftPlanner;

use super::grid::{Sinogram, SpectralSinogram, SpectralSlice, Volume, VolumeGrid};
use crate::error::{Error, Result};

/// Angular frequencies of an `n`-point axis with spacing `dz`, FFT order.
pub fn axial_frequencies(n: usize, dz: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            2.0 * std::f64::consts::PI * kk / (n as f64 * dz)
        })
        .collect()
}

/// Index of the slice carrying `-xi_k`.
pub fn mirror_index(k: usize, n: usize) -> usize {
    (n - k) % n
}

/// Transform every contiguous lane of length `n` in place.
pub(crate) fn fft_lanes(data: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    plan.process(data);
    if inverse {
        let scale = 1.0 / n as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Forward transform along the last axis of a real array.
pub(crate) fn fft_last_axis(values: &Array3<f64>) -> Array3<Complex64> {
    let n = values.shape()[2];
    let mut data: Vec<Complex64> = values
        .as_standard_layout()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft_lanes(&mut data, n, false);
    Array3::from_shape_vec(values.raw_dim(), data).expect("shape preserved")
}

/// Inverse transform along the last axis.
pub(crate) fn ifft_last_axis(values: &Array3<Complex64>) -> Array3<Complex64> {
    let n = values.shape()[2];
    let mut data: Vec<Complex64> = values.as_standard_layout().iter().copied().collect();
    fft_lanes(&mut data, n, true);
    Array3::from_shape_vec(values.raw_dim(), data).expect("shape preserved")
}

/// Split a volume into axial-frequency slices (FFT order).
pub fn axial_fft(vol: &Volume) -> Vec<SpectralSlice> {
    let spec = fft_last_axis(&vol.values);
    let xi = axial_frequencies(vol.grid.n_z, vol.grid.z_axis().step());
    xi.iter()
        .enumerate()
        .map(|(k, &x)| SpectralSlice {
            values: spec.index_axis(ndarray::Axis(2), k).to_owned(),
            xi: x,
        })
        .collect()
}

/// Reassemble slices into a complex volume.
pub fn axial_ifft(slices: &[SpectralSlice], grid: &VolumeGrid) -> Result<Array3<Complex64>> {
    let n = grid.n_xy;
    if slices.len() != grid.n_z || slices.iter().any(|s| s.values.shape() != [n, n]) {
        return Err(Error::Shape {
            expected: format!("{} slices of {n}x{n}", grid.n_z),
            got: format!("{} slices", slices.len()),
        });
    }
    let spec = Array3::from_shape_fn(grid.shape(), |(i, j, k)| slices[k].values[[i, j]]);
    Ok(ifft_last_axis(&spec))
}

/// Real part of a complex array, together with the norm of the discarded
/// imaginary part.
pub fn real_part(values: &Array3<Complex64>) -> (Array3<f64>, f64) {
    let imag = values.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
    (values.mapv(|v| v.re), imag)
}

/// Axial transform of a sinogram along `y3`.
pub fn spectral_sinogram(sino: &Sinogram) -> SpectralSinogram {
    SpectralSinogram {
        values: fft_last_axis(&sino.values),
        xi: axial_frequencies(sino.grid.y.n, sino.grid.y.step()),
        grid: sino.grid,
    }
}

/// One `xi` plane of a spectral sinogram as an `[s, theta]` array.
pub fn spectral_plane(spec: &SpectralSinogram, k: usize) -> Array2<Complex64> {
    spec.values.index_axis(ndarray::Axis(2), k).to_owned()
}
