use ndarray::{Array2, Array3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CenterSurface;

/// `n` equispaced samples on `[min, max]`, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl UniformGrid {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        let g = UniformGrid { min, max, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || !(self.max > self.min) || !self.min.is_finite() || !self.max.is_finite()
        {
            return Err(Error::Config(format!(
                "grid [{}, {}] with {} samples is not strictly increasing",
                self.min, self.max, self.n
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    pub fn value(&self, i: usize) -> f64 {
        self.min + self.step() * i as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i)).collect()
    }

    /// Fractional index of `v`.
    pub fn position(&self, v: f64) -> f64 {
        (v - self.min) / self.step()
    }

    pub fn same_as(&self, other: &UniformGrid) -> bool {
        let tol = 1e-9 * (1.0 + self.min.abs().max(self.max.abs()));
        self.n == other.n && (self.min - other.min).abs() < tol && (self.max - other.max).abs() < tol
    }
}

/// Voxel-center grid `[-L, L]^2 x [-Z, Z]` with `n_xy^2 x n_z` samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeGrid {
    pub n_xy: usize,
    pub n_z: usize,
    pub half_width_xy: f64,
    pub half_width_z: f64,
}

impl VolumeGrid {
    /// Cube of `n^3` voxels with the given transverse and axial half-widths.
    pub fn cube(n: usize, half_width_xy: f64, half_width_z: f64) -> Result<Self> {
        let g = VolumeGrid {
            n_xy: n,
            n_z: n,
            half_width_xy,
            half_width_z,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("n_xy", self.n_xy), ("n_z", self.n_z)] {
            if n < 3 || n % 2 == 0 {
                return Err(Error::Config(format!("{name} must be odd and >= 3, got {n}")));
            }
        }
        if !(self.half_width_xy > 0.0 && self.half_width_z > 0.0) {
            return Err(Error::Config("volume half-widths must be positive".into()));
        }
        Ok(())
    }

    pub fn xy_axis(&self) -> UniformGrid {
        UniformGrid {
            min: -self.half_width_xy,
            max: self.half_width_xy,
            n: self.n_xy,
        }
    }

    pub fn z_axis(&self) -> UniformGrid {
        UniformGrid {
            min: -self.half_width_z,
            max: self.half_width_z,
            n: self.n_z,
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.n_xy, self.n_xy, self.n_z]
    }

    pub fn voxel_volume(&self) -> f64 {
        let d = self.xy_axis().step();
        d * d * self.z_axis().step()
    }

    pub fn point(&self, idx: [usize; 3]) -> [f64; 3] {
        let a = self.xy_axis();
        [a.value(idx[0]), a.value(idx[1]), self.z_axis().value(idx[2])]
    }
}

/// Real field sampled at voxel centers, indexed `[i1, i2, i3]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    pub values: Array3<f64>,
    pub grid: VolumeGrid,
    /// Declared minimum distance of the support from the cylinder.
    pub support_margin: f64,
}

impl Volume {
    pub fn new(values: Array3<f64>, grid: VolumeGrid) -> Result<Self> {
        grid.validate()?;
        if values.shape() != grid.shape() {
            return Err(Error::Shape {
                expected: format!("{:?}", grid.shape()),
                got: format!("{:?}", values.shape()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("volume contains non-finite values".into()));
        }
        Ok(Volume {
            values,
            grid,
            support_margin: 0.0,
        })
    }

    pub fn zeros(grid: VolumeGrid) -> Result<Self> {
        Volume::new(Array3::zeros(grid.shape()), grid)
    }

    /// Sample `f` at every voxel center.
    pub fn from_fn(grid: VolumeGrid, f: impl Fn([f64; 3]) -> f64) -> Result<Self> {
        let values = Array3::from_shape_fn(grid.shape(), |(i, j, k)| f(grid.point([i, j, k])));
        Volume::new(values, grid)
    }

    /// Declare a support margin, checking that every voxel closer than
    /// `margin` to the cylinder vanishes.
    pub fn with_support_margin(mut self, margin: f64, surface: &CenterSurface) -> Result<Self> {
        self.check_support(margin, surface)?;
        self.support_margin = margin;
        Ok(self)
    }

    /// Voxels with nonzero value within `margin` of the cylinder.
    pub fn support_violations(&self, margin: f64, surface: &CenterSurface) -> Vec<[usize; 3]> {
        let mut bad = Vec::new();
        for ((i, j, k), &v) in self.values.indexed_iter() {
            if v != 0.0 && surface.distance(self.grid.point([i, j, k])) < margin {
                bad.push([i, j, k]);
            }
        }
        bad
    }

    pub fn check_support(&self, margin: f64, surface: &CenterSurface) -> Result<()> {
        let bad = self.support_violations(margin, surface);
        if bad.is_empty() {
            return Ok(());
        }
        let shown: Vec<String> = bad.iter().take(5).map(|b| format!("{b:?}")).collect();
        Err(Error::Precondition(format!(
            "{} voxel(s) within {margin} of the cylinder are nonzero, e.g. {}",
            bad.len(),
            shown.join(", ")
        )))
    }

    /// Smallest `z` interval and transverse radius containing the nonzero
    /// voxels, or `None` for an all-zero volume.
    pub fn support_extent(&self) -> Option<SupportExtent> {
        let mut ext: Option<SupportExtent> = None;
        for ((i, j, k), &v) in self.values.indexed_iter() {
            if v == 0.0 {
                continue;
            }
            let p = self.grid.point([i, j, k]);
            let r = p[0].hypot(p[1]);
            let e = ext.get_or_insert(SupportExtent {
                z_min: p[2],
                z_max: p[2],
                radius: r,
            });
            e.z_min = e.z_min.min(p[2]);
            e.z_max = e.z_max.max(p[2]);
            e.radius = e.radius.max(r);
        }
        ext
    }

    /// Trilinear interpolation; nodes outside the grid read as zero.
    pub fn sample(&self, p: [f64; 3]) -> f64 {
        let a = self.grid.xy_axis();
        let z = self.grid.z_axis();
        let u = [a.position(p[0]), a.position(p[1]), z.position(p[2])];
        let dims = self.grid.shape();
        let mut base = [0isize; 3];
        let mut frac = [0.0; 3];
        for d in 0..3 {
            if !(u[d] > -1.0 && u[d] < dims[d] as f64) {
                return 0.0;
            }
            let f = u[d].floor();
            base[d] = f as isize;
            frac[d] = u[d] - f;
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            let mut inside = true;
            for d in 0..3 {
                let bit = (corner >> d) & 1;
                let ii = base[d] + bit as isize;
                if ii < 0 || ii >= dims[d] as isize {
                    inside = false;
                    break;
                }
                idx[d] = ii as usize;
                w *= if bit == 1 { frac[d] } else { 1.0 - frac[d] };
            }
            if inside && w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }

    /// Add `w * f(x1, x2, .)` to a `z` lane, bilinear in the plane.
    pub(crate) fn accumulate_lane(&self, x1: f64, x2: f64, w: f64, lane: &mut [f64]) {
        let plane = self.grid.xy_axis();
        let n = plane.n;
        let (u, v) = (plane.position(x1), plane.position(x2));
        if !(u > -1.0 && u < n as f64 && v > -1.0 && v < n as f64) {
            return;
        }
        let (i0, j0) = (u.floor(), v.floor());
        let (a, b) = (u - i0, v - j0);
        let (i0, j0) = (i0 as isize, j0 as isize);
        for (di, dj, c) in [
            (0, 0, (1.0 - a) * (1.0 - b)),
            (1, 0, a * (1.0 - b)),
            (0, 1, (1.0 - a) * b),
            (1, 1, a * b),
        ] {
            let (ii, jj) = (i0 + di, j0 + dj);
            if c == 0.0 || ii < 0 || jj < 0 || ii >= n as isize || jj >= n as isize {
                continue;
            }
            let src = self.values.slice(ndarray::s![ii as usize, jj as usize, ..]);
            for (l, &f) in lane.iter_mut().zip(src.iter()) {
                *l += w * c * f;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportExtent {
    pub z_min: f64,
    pub z_max: f64,
    pub radius: f64,
}

/// One axial-frequency slice `f_hat(x1, x2, xi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSlice {
    pub values: Array2<Complex64>,
    pub xi: f64,
}

/// Sampling of the data coordinates `(s, theta, y3)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinoGrid {
    pub s: UniformGrid,
    /// `theta_j = 2 pi j / n_theta`.
    pub n_theta: usize,
    pub y: UniformGrid,
    /// Radius of the cylinder of centers.
    #[serde(default = "unit_radius")]
    pub radius: f64,
}

fn unit_radius() -> f64 {
    1.0
}

impl SinoGrid {
    /// Data grid matching a volume: `n_s = n_z` radii on `[s_min, s_max]` and
    /// `y3` on the volume's axial samples.
    pub fn for_volume(grid: &VolumeGrid, s_min: f64, s_max: f64, n_theta: usize) -> Result<Self> {
        let g = SinoGrid {
            s: UniformGrid::new(s_min, s_max, grid.n_z)?,
            n_theta,
            y: grid.z_axis(),
            radius: 1.0,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        self.s.validate()?;
        self.y.validate()?;
        if self.n_theta < 1 {
            return Err(Error::Config("n_theta must be positive".into()));
        }
        CenterSurface::new(self.radius)?;
        Ok(())
    }

    pub fn surface(&self) -> CenterSurface {
        CenterSurface {
            radius: self.radius,
        }
    }

    pub fn theta(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * j as f64 / self.n_theta as f64
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n_theta).map(|j| self.theta(j)).collect()
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.s.n, self.n_theta, self.y.n]
    }
}

/// Real data indexed `[s_i, theta_j, y3_k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinogram {
    pub values: Array3<f64>,
    pub grid: SinoGrid,
}

impl Sinogram {
    pub fn new(values: Array3<f64>, grid: SinoGrid) -> Result<Self> {
        grid.validate()?;
        if values.shape() != grid.shape() {
            return Err(Error::Shape {
                expected: format!("{:?}", grid.shape()),
                got: format!("{:?}", values.shape()),
            });
        }
        Ok(Sinogram { values, grid })
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Axially transformed data indexed `[s_i, theta_j, k]` (FFT order in `k`).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSinogram {
    pub values: Array3<Complex64>,
    pub xi: Vec<f64>,
    pub grid: SinoGrid,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(VolumeGrid::cube(4, 1.0, 1.0).is_err());
        assert!(VolumeGrid::cube(1, 1.0, 1.0).is_err());
        assert!(VolumeGrid::cube(5, 0.0, 1.0).is_err());
        let g = VolumeGrid::cube(5, 1.0, 2.0).unwrap();
        assert_eq!(g.point([2, 2, 2]), [0.0, 0.0, 0.0]);
        assert_eq!(g.point([0, 4, 0]), [-1.0, 1.0, -2.0]);
    }

    #[test]
    fn trilinear_reproduces_affine_fields() {
        let g = VolumeGrid::cube(7, 1.0, 2.0).unwrap();
        let v = Volume::from_fn(g, |p| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[2]).unwrap();
        for p in [[0.13, -0.4, 0.9], [0.5, 0.5, -1.7], [-0.99, 0.01, 1.99]] {
            let want = 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[2];
            assert!((v.sample(p) - want).abs() < 1e-12);
        }
        assert_eq!(v.sample([3.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn support_margin_is_enforced() {
        let g = VolumeGrid::cube(11, 1.0, 1.0).unwrap();
        let cyl = CenterSurface::default();
        let v = Volume::from_fn(g, |p| if p[0].hypot(p[1]) < 0.5 { 1.0 } else { 0.0 }).unwrap();
        assert!(v.clone().with_support_margin(0.2, &cyl).is_ok());
        let err = v.with_support_margin(0.7, &cyl).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }
}
