//! Discrete circular-mean transform `M` and its matched adjoint.
//!
//! Row `(t_i, theta_j)` of `M` is `t_i * sum_phi f(y'_j + t_i (cos phi, sin phi)) dphi`
//! with bilinear interpolation of `f` on the slice grid. The matrix is stored
//! once in CSR form together with its exact transpose.

use std::ops::{AddAssign, Mul};

use ndarray::Array2;
use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;

use super::grid::{SpectralSlice, UniformGrid};
use crate::error::{Error, Result};
use crate::geometry::CenterSurface;

/// Minimum number of angular samples per circle.
pub const MIN_PHI_SAMPLES: usize = 64;

/// Scalars the real operators act on.
pub trait Field:
    Copy + Send + Sync + Zero + AddAssign + Mul<f64, Output = Self> + std::fmt::Debug
{
}

impl Field for f64 {}
impl Field for Complex64 {}

/// Compressed sparse rows with real weights.
#[derive(Clone, Debug)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub data: Vec<f64>,
}

impl Csr {
    fn from_rows(rows: Vec<Vec<(u32, f64)>>, ncols: usize) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut data = Vec::with_capacity(nnz);
        indptr.push(0);
        for row in rows {
            for (c, w) in row {
                indices.push(c);
                data.push(w);
            }
            indptr.push(indices.len());
        }
        Csr {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut indices = vec![0u32; self.indices.len()];
        let mut data = vec![0.0; self.data.len()];
        for r in 0..self.nrows {
            for p in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[p] as usize;
                let dst = next[c];
                indices[dst] = r as u32;
                data[dst] = self.data[p];
                next[c] += 1;
            }
        }
        Csr {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr: counts,
            indices,
            data,
        }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn matvec<T: Field>(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        out.par_iter_mut().enumerate().for_each(|(r, o)| {
            let mut acc = T::zero();
            for p in self.indptr[r]..self.indptr[r + 1] {
                acc += x[self.indices[p] as usize] * self.data[p];
            }
            *o = acc;
        });
    }
}

/// Circular means of slices over circles centered on the cylinder section.
#[derive(Clone, Debug)]
pub struct CircularMean {
    plane: UniformGrid,
    t: Vec<f64>,
    thetas: Vec<f64>,
    forward: Csr,
    adjoint: Csr,
}

impl CircularMean {
    /// `plane` is the (shared) sample axis for `x1` and `x2`; circles of
    /// radius `t[i]` are centered at `r (cos theta_j, sin theta_j)` with
    /// `theta_j = 2 pi j / n_theta`.
    pub fn new(
        plane: UniformGrid,
        t: &[f64],
        n_theta: usize,
        surface: &CenterSurface,
    ) -> Result<Self> {
        plane.validate()?;
        if let Some(&bad) = t.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!(
                "circle radius must be positive, got t = {bad}"
            )));
        }
        if n_theta == 0 {
            return Err(Error::Config("n_theta must be positive".into()));
        }
        let n = plane.n;
        let dx = plane.step();
        let thetas: Vec<f64> = (0..n_theta)
            .map(|j| 2.0 * std::f64::consts::PI * j as f64 / n_theta as f64)
            .collect();
        let rows: Vec<Vec<(u32, f64)>> = t
            .iter()
            .flat_map(|&ti| thetas.iter().map(move |&th| (ti, th)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(ti, th)| circle_row(&plane, n, dx, ti, th, surface.radius))
            .collect();
        let forward = Csr::from_rows(rows, n * n);
        let adjoint = forward.transpose();
        Ok(CircularMean {
            plane,
            t: t.to_vec(),
            thetas,
            forward,
            adjoint,
        })
    }

    pub fn n_t(&self) -> usize {
        self.t.len()
    }

    pub fn n_theta(&self) -> usize {
        self.thetas.len()
    }

    pub fn n_pixels(&self) -> usize {
        self.plane.n * self.plane.n
    }

    pub fn plane(&self) -> UniformGrid {
        self.plane
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn matrix(&self) -> &Csr {
        &self.forward
    }

    /// `M x`; `x` is a flattened `[i1, i2]` slice, output is `[t_i, theta_j]`.
    pub fn apply<T: Field>(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.forward.nrows];
        self.forward.matvec(x, &mut out);
        out
    }

    /// `M^T y`, the exact transpose of [`CircularMean::apply`].
    pub fn apply_adjoint<T: Field>(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.adjoint.nrows];
        self.adjoint.matvec(y, &mut out);
        out
    }

    pub fn forward_slice(&self, slice: &SpectralSlice) -> Result<Array2<Complex64>> {
        let n = self.plane.n;
        if slice.values.shape() != [n, n] {
            return Err(Error::Shape {
                expected: format!("[{n}, {n}]"),
                got: format!("{:?}", slice.values.shape()),
            });
        }
        let x: Vec<Complex64> = slice.values.iter().copied().collect();
        let y = self.apply(&x);
        Ok(Array2::from_shape_vec((self.n_t(), self.n_theta()), y).expect("row count"))
    }

    pub fn adjoint_slice(&self, data: &Array2<Complex64>, xi: f64) -> Result<SpectralSlice> {
        if data.shape() != [self.n_t(), self.n_theta()] {
            return Err(Error::Shape {
                expected: format!("[{}, {}]", self.n_t(), self.n_theta()),
                got: format!("{:?}", data.shape()),
            });
        }
        let y: Vec<Complex64> = data.iter().copied().collect();
        let x = self.apply_adjoint(&y);
        let n = self.plane.n;
        Ok(SpectralSlice {
            values: Array2::from_shape_vec((n, n), x).expect("pixel count"),
            xi,
        })
    }

    /// Power-method estimate of `||M||_2^2` (deterministic start vector).
    pub fn norm_sq_estimate(&self, iterations: usize) -> f64 {
        let mut v = vec![1.0f64; self.n_pixels()];
        let mut est = 0.0;
        for _ in 0..iterations.max(1) {
            let nv = norm(&v);
            if nv == 0.0 {
                return 0.0;
            }
            v.iter_mut().for_each(|a| *a /= nv);
            let w = self.apply_adjoint(&self.apply(&v));
            est = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            v = w;
        }
        est
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn circle_row(
    plane: &UniformGrid,
    n: usize,
    dx: f64,
    t: f64,
    theta: f64,
    radius: f64,
) -> Vec<(u32, f64)> {
    let n_phi = MIN_PHI_SAMPLES.max((2.0 * std::f64::consts::PI * t / dx).ceil() as usize);
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let (cx, cy) = (radius * theta.cos(), radius * theta.sin());
    let mut entries: Vec<(u32, f64)> = Vec::with_capacity(4 * n_phi);
    for m in 0..n_phi {
        let phi = theta + m as f64 * dphi;
        let u = plane.position(cx + t * phi.cos());
        let v = plane.position(cy + t * phi.sin());
        if !(u > -1.0 && u < n as f64 && v > -1.0 && v < n as f64) {
            continue;
        }
        let (i0, j0) = (u.floor(), v.floor());
        let (a, b) = (u - i0, v - j0);
        let (i0, j0) = (i0 as isize, j0 as isize);
        for (di, dj, w) in [
            (0, 0, (1.0 - a) * (1.0 - b)),
            (1, 0, a * (1.0 - b)),
            (0, 1, (1.0 - a) * b),
            (1, 1, a * b),
        ] {
            let (ii, jj) = (i0 + di, j0 + dj);
            if w == 0.0 || ii < 0 || jj < 0 || ii >= n as isize || jj >= n as isize {
                continue;
            }
            entries.push(((ii as usize * n + jj as usize) as u32, w * t * dphi));
        }
    }
    entries.sort_unstable_by_key(|e| e.0);
    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
    for (c, w) in entries {
        match merged.last_mut() {
            Some(last) if last.0 == c => last.1 += w,
            _ => merged.push((c, w)),
        }
    }
    merged
}
