//! Forward models for the symmetric-curve transform.
//!
//! [`forward_project`] runs the factored pipeline
//! `R_mu f = F3^{-1} V_xi M F3 f`; [`forward_project_direct`] integrates over
//! the surfaces of revolution directly and serves as its oracle.

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rayon::prelude::*;

use super::circular::CircularMean;
use super::fft::{axial_fft, axial_frequencies, fft_lanes, ifft_last_axis, mirror_index, real_part};
use super::grid::{SinoGrid, Sinogram, Volume, VolumeGrid};
use super::volterra::{volterra_matrix, VolterraMatrix};
use crate::error::{Error, Result};
use crate::geometry::{MuSpec, Profile};

/// Each surface meets a horizontal plane in two circles, at heights `+mu` and
/// `-mu`; their contributions add up to `2 cos(xi mu)` in the Fourier domain.
pub const SHEETS: f64 = 2.0;

/// Cached operators of the factored pipeline for one family and grid.
#[derive(Clone, Debug)]
pub struct FactoredModel {
    pub mu: MuSpec,
    pub volume: VolumeGrid,
    pub sino: SinoGrid,
    pub circular: CircularMean,
    /// `V_xi` for `k = 0..=n_z/2`; negative frequencies reuse them.
    pub volterra: Vec<VolterraMatrix>,
    pub xi: Vec<f64>,
}

impl FactoredModel {
    pub fn new(mu: &MuSpec, volume: &VolumeGrid, sino: &SinoGrid) -> Result<Self> {
        mu.validate()?;
        volume.validate()?;
        sino.validate()?;
        if !sino.y.same_as(&volume.z_axis()) {
            return Err(Error::Config(format!(
                "data y3 grid {:?} must equal the volume z grid {:?}",
                sino.y,
                volume.z_axis()
            )));
        }
        let s = sino.s.values();
        let circular = CircularMean::new(volume.xy_axis(), &s, sino.n_theta, &sino.surface())?;
        let xi = axial_frequencies(volume.n_z, volume.z_axis().step());
        let volterra = (0..=volume.n_z / 2)
            .into_par_iter()
            .map(|k| volterra_matrix(mu, xi[k], &s))
            .collect::<Result<Vec<_>>>()?;
        Ok(FactoredModel {
            mu: *mu,
            volume: *volume,
            sino: *sino,
            circular,
            volterra,
            xi,
        })
    }

    /// Largest `mu` reached on the data grid.
    pub fn max_height(&self) -> f64 {
        let a = self.sino.s.min;
        self.sino
            .s
            .values()
            .iter()
            .map(|&s| self.mu.mu(s, a))
            .fold(0.0, f64::max)
    }

    /// Preconditions on `f`: it vanishes within `s_min` of the cylinder, and
    /// the surfaces never wrap around the periodic `y3` axis.
    pub fn check_volume(&self, vol: &Volume) -> Result<()> {
        if vol.grid != self.volume {
            return Err(Error::Config("volume grid differs from the model grid".into()));
        }
        vol.check_support(self.sino.s.min, &self.sino.surface())?;
        if let Some(ext) = vol.support_extent() {
            let z = self.volume.z_axis();
            let reach = self.max_height() + ext.z_max.max(-ext.z_min);
            if reach >= z.max + z.step() {
                return Err(Error::Precondition(format!(
                    "y3 extent {} too short: support reaches |z| = {} and surfaces extend {} axially",
                    z.max,
                    ext.z_max.max(-ext.z_min),
                    self.max_height()
                )));
            }
        }
        Ok(())
    }

    /// `M f_hat_xi` for every retained frequency, as `[t, theta]` arrays.
    fn circular_means(&self, vol: &Volume) -> Vec<Array2<Complex64>> {
        let slices = axial_fft(vol);
        (0..self.volterra.len())
            .into_par_iter()
            .map(|k| self.circular.forward_slice(&slices[k]).expect("model grid"))
            .collect()
    }

    /// Apply `SHEETS * V_xi` column by column to `[t, theta]` data.
    pub fn apply_volterra(&self, k: usize, u: &Array2<Complex64>) -> Array2<Complex64> {
        let v = &self.volterra[k].entries;
        let (n, nth) = (u.nrows(), u.ncols());
        Array2::from_shape_fn((n, nth), |(i, j)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for kk in 0..=i {
                acc += u[[kk, j]] * v[(i, kk)];
            }
            acc * SHEETS
        })
    }

    pub fn project(&self, vol: &Volume) -> Result<Sinogram> {
        self.check_volume(vol)?;
        let means = self.circular_means(vol);
        let data: Vec<Array2<Complex64>> = means
            .par_iter()
            .enumerate()
            .map(|(k, u)| self.apply_volterra(k, u))
            .collect();
        let nz = self.volume.n_z;
        let shape = self.sino.shape();
        let spec = Array3::from_shape_fn(shape, |(i, j, k)| {
            if k < data.len() {
                data[k][[i, j]]
            } else {
                data[mirror_index(k, nz)][[i, j]].conj()
            }
        });
        let (values, _imag) = real_part(&ifft_last_axis(&spec));
        Sinogram::new(values, self.sino)
    }
}

/// Factored-pipeline forward projection.
pub fn forward_project(vol: &Volume, mu: &MuSpec, sino: &SinoGrid) -> Result<Sinogram> {
    FactoredModel::new(mu, &vol.grid, sino)?.project(vol)
}

/// Sample counts of the direct surface quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectQuadrature {
    /// Midpoint samples along the profile coordinate `x`.
    pub n_x: usize,
    /// Angular samples per voxel width of circumference.
    pub phi_oversample: f64,
    pub min_phi: usize,
}

impl Default for DirectQuadrature {
    fn default() -> Self {
        DirectQuadrature {
            n_x: 256,
            phi_oversample: 2.0,
            min_phi: 64,
        }
    }
}

/// Midpoint nodes `(x, rho, weight)` on the meridian `rho = sqrt(h)`, with
/// `weight = rho * d(arc length)`.
///
/// Lemons are integrated in the arc angle: for `p < 0` the meridian is more
/// than half a circle and is not a graph over `x`.
fn meridian_nodes(
    profile: &Profile,
    param: f64,
    n: usize,
    z_reach: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    if let Profile::Lemon { alpha } = profile {
        let p = param;
        let r = alpha.hypot(p);
        let b0 = (p / r).acos();
        let db = 2.0 * b0 / n as f64;
        return Ok((0..n)
            .map(|m| {
                let b = -b0 + (m as f64 + 0.5) * db;
                let rho = -p + r * b.cos();
                (r * b.sin(), rho, rho * r * db)
            })
            .collect());
    }
    let dom = profile.x_domain(param)?;
    let hi = if dom.hi.is_finite() { dom.hi } else { dom.lo + z_reach };
    let step = (hi - dom.lo) / n as f64;
    (0..n)
        .map(|m| {
            let x = dom.lo + (m as f64 + 0.5) * step;
            let h = profile.h(param, x)?;
            let (_, hx) = profile.grad(param, x)?;
            Ok((x, h.sqrt(), (h + 0.25 * hx * hx).sqrt() * step))
        })
        .collect()
}

/// Brute-force surface integral
/// `int int sqrt(h + h_x^2 / 4) f(sqrt(h) Theta + y', y3 + x) dphi dx`.
///
/// `f` is sampled bilinearly in the plane and interpolated trigonometrically
/// along `z`, the same continuous model of the voxel data that the factored
/// pipeline sees; the `x` shift is applied as a phase on each ring's `z` lane.
/// The data coordinate `s` is mapped to the profile's own parameter with
/// [`Profile::native_param`]. The `y3` grid must be the volume's `z` axis.
pub fn forward_project_direct(
    vol: &Volume,
    profile: &Profile,
    sino: &SinoGrid,
    quad: &DirectQuadrature,
) -> Result<Sinogram> {
    sino.validate()?;
    profile.validate()?;
    let zaxis = vol.grid.z_axis();
    if !sino.y.same_as(&zaxis) {
        return Err(Error::Config(format!(
            "data y3 grid {:?} must equal the volume z grid {:?}",
            sino.y, zaxis
        )));
    }
    vol.check_support(sino.s.min.max(0.0), &sino.surface())?;
    let surface = sino.surface();
    let shape = sino.shape();
    let ext = match vol.support_extent() {
        Some(e) => e,
        None => return Sinogram::new(Array3::zeros(shape), *sino),
    };
    let dxy = vol.grid.xy_axis().step();
    let nz = zaxis.n;
    let xi = axial_frequencies(nz, zaxis.step());
    let r_support = ext.radius + dxy * std::f64::consts::SQRT_2;
    let thetas = sino.thetas();
    let z_reach = 2.0 * vol.grid.half_width_z;

    let rows = sino
        .s
        .values()
        .into_par_iter()
        .map(|s| -> Result<Vec<f64>> {
            let samples = meridian_nodes(profile, profile.native_param(s), quad.n_x, z_reach)?;
            let mut out = vec![0.0; shape[1] * nz];
            for (j, &theta) in thetas.iter().enumerate() {
                let c = surface.center(theta, 0.0);
                let mut acc = vec![Complex64::new(0.0, 0.0); nz];
                let mut lane = vec![Complex64::new(0.0, 0.0); nz];
                let mut real = vec![0.0; nz];
                for &(x, rho, w) in &samples {
                    if (rho - surface.radius).abs() > r_support || rho + surface.radius < ext.radius - dxy {
                        continue;
                    }
                    let n_phi = quad
                        .min_phi
                        .max((2.0 * std::f64::consts::PI * rho / dxy * quad.phi_oversample).ceil()
                            as usize);
                    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
                    real.iter_mut().for_each(|v| *v = 0.0);
                    let mut hit = false;
                    for q in 0..n_phi {
                        let phi = theta + q as f64 * dphi;
                        let p = [c[0] + rho * phi.cos(), c[1] + rho * phi.sin()];
                        if p[0].hypot(p[1]) <= r_support {
                            vol.accumulate_lane(p[0], p[1], w * dphi, &mut real);
                            hit = true;
                        }
                    }
                    if !hit {
                        continue;
                    }
                    for (l, &r) in lane.iter_mut().zip(&real) {
                        *l = Complex64::new(r, 0.0);
                    }
                    fft_lanes(&mut lane, nz, false);
                    // f(., y3 + x): multiply slice k by exp(i xi_k x)
                    for k in 0..nz {
                        acc[k] += lane[k] * Complex64::from_polar(1.0, xi[k] * x);
                    }
                }
                fft_lanes(&mut acc, nz, true);
                for k in 0..nz {
                    out[j * nz + k] = acc[k].re;
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Sinogram::new(
        Array3::from_shape_vec(shape, flat).expect("row layout"),
        *sino,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CenterSurface;

    fn small_grid() -> VolumeGrid {
        VolumeGrid::cube(17, 1.0, 5.0).unwrap()
    }

    fn sino(g: &VolumeGrid, n_theta: usize) -> SinoGrid {
        SinoGrid::for_volume(g, 0.2, 2.2, n_theta).unwrap()
    }

    fn bump(g: VolumeGrid, c: [f64; 3]) -> Volume {
        Volume::from_fn(g, |p| {
            let r2 = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) / 0.25
                + (p[2] - c[2]).powi(2) / 2.25;
            if r2 < 1.0 {
                (1.0 - r2).powi(3)
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn zero_volume_projects_to_zero() {
        let g = small_grid();
        let v = Volume::zeros(g).unwrap();
        let sg = sino(&g, 8);
        let out = forward_project(&v, &MuSpec::Sphere, &sg).unwrap();
        assert!(out.values.iter().all(|&x| x == 0.0));
        let out = forward_project_direct(&v, &Profile::Sphere, &sg, &DirectQuadrature::default())
            .unwrap();
        assert!(out.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn axially_mirrored_pair_gives_even_data() {
        let g = small_grid();
        let mut v = Volume::zeros(g).unwrap();
        // z index 8 is the center; 8 +- 2 are mirror images
        v.values[[8, 10, 6]] = 1.0;
        v.values[[8, 10, 10]] = 1.0;
        let sg = sino(&g, 8);
        let out = forward_project(&v, &MuSpec::Spheroid { c: 2.0 }, &sg).unwrap();
        let n = g.n_z;
        let scale = out.norm();
        for i in 0..sg.s.n {
            for j in 0..sg.n_theta {
                for k in 0..n {
                    let d = out.values[[i, j, k]] - out.values[[i, j, n - 1 - k]];
                    assert!(d.abs() <= 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn support_violation_is_reported() {
        let g = small_grid();
        let mut v = Volume::zeros(g).unwrap();
        v.values[[16, 8, 8]] = 1.0; // x1 = 1, on the cylinder
        let err = forward_project(&v, &MuSpec::Sphere, &sino(&g, 4)).unwrap_err();
        match err {
            Error::Precondition(msg) => assert!(msg.contains("[16, 8, 8]"), "{msg}"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn short_axial_extent_is_rejected() {
        let g = VolumeGrid::cube(17, 1.0, 1.5).unwrap();
        let v = bump(g, [0.0, 0.0, 0.0]);
        let err = forward_project(&v, &MuSpec::Spheroid { c: 2.0 }, &sino(&g, 4)).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn axial_ball_gives_theta_independent_data() {
        let g = small_grid();
        let v = Volume::from_fn(g, |p| {
            if p[0].hypot(p[1]) < 0.45 && p[2].abs() < 0.8 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        // grid is symmetric under quarter turns, so use 4 angles
        let sg = sino(&g, 4);
        let quad = DirectQuadrature {
            n_x: 64,
            ..Default::default()
        };
        let out = forward_project_direct(&v, &Profile::Sphere, &sg, &quad).unwrap();
        let scale = out.norm();
        for i in 0..sg.s.n {
            for k in 0..sg.y.n {
                for j in 1..4 {
                    let d = out.values[[i, j, k]] - out.values[[i, 0, k]];
                    assert!(d.abs() <= 1e-9 * scale);
                }
            }
        }
    }

    #[test]
    fn linearity() {
        let g = small_grid();
        let sg = sino(&g, 8);
        let a = bump(g, [0.1, 0.0, 0.3]);
        let b = bump(g, [-0.1, 0.15, -0.5]);
        let combo = Volume::new(&a.values * 2.0 - &b.values * 0.5, g).unwrap();
        let mu = MuSpec::Lemon { alpha: 2.0 };
        let model = FactoredModel::new(&mu, &g, &sg).unwrap();
        let pa = model.project(&a).unwrap();
        let pb = model.project(&b).unwrap();
        let pc = model.project(&combo).unwrap();
        let want = &pa.values * 2.0 - &pb.values * 0.5;
        let err = (&pc.values - &want).iter().map(|d| d * d).sum::<f64>().sqrt();
        assert!(err <= 1e-10 * pc.norm());
    }

    #[test]
    fn quarter_turn_shifts_theta() {
        let g = small_grid();
        let sg = sino(&g, 8);
        let a = bump(g, [0.2, -0.1, 0.0]);
        // rotate by +90 degrees: (x1, x2) -> (-x2, x1) on the voxel lattice
        let n = g.n_xy;
        let rotated = Volume::new(
            Array3::from_shape_fn(g.shape(), |(i, j, k)| a.values[[j, n - 1 - i, k]]),
            g,
        )
        .unwrap();
        let model = FactoredModel::new(&MuSpec::Sphere, &g, &sg).unwrap();
        let pa = model.project(&a).unwrap();
        let pr = model.project(&rotated).unwrap();
        let scale = pa.norm();
        for i in 0..sg.s.n {
            for j in 0..8 {
                for k in 0..sg.y.n {
                    let d = pr.values[[i, (j + 2) % 8, k]] - pa.values[[i, j, k]];
                    assert!(d.abs() <= 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn axial_shift_shifts_y3() {
        let g = small_grid();
        let sg = sino(&g, 4);
        let a = bump(g, [0.0, 0.1, 0.0]);
        let n = g.n_z;
        let shifted = Volume::new(
            Array3::from_shape_fn(g.shape(), |(i, j, k)| a.values[[i, j, (k + n - 1) % n]]),
            g,
        )
        .unwrap();
        let model = FactoredModel::new(&MuSpec::Spheroid { c: 2.0 }, &g, &sg).unwrap();
        let pa = model.project(&a).unwrap();
        let ps = model.project(&shifted).unwrap();
        let scale = pa.norm();
        for i in 0..sg.s.n {
            for j in 0..4 {
                for k in 0..n {
                    let d = ps.values[[i, j, (k + 1) % n]] - pa.values[[i, j, k]];
                    assert!(d.abs() <= 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn direct_rejects_support_violation() {
        let g = small_grid();
        let mut v = Volume::zeros(g).unwrap();
        v.values[[0, 8, 8]] = 1.0;
        let e = forward_project_direct(
            &v,
            &Profile::Sphere,
            &sino(&g, 4),
            &DirectQuadrature::default(),
        );
        assert!(e.is_err());
        let _ = CenterSurface::default();
    }
}
