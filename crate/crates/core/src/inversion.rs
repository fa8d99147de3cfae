//! Inversion of the factored pipeline: Tikhonov solves of `V_xi`, iterative
//! inversion of the circular-mean operator, inverse axial transform.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MuSpec;
use crate::operators::circular::CircularMean;
use crate::operators::fft::{ifft_last_axis, mirror_index, real_part, spectral_sinogram};
use crate::operators::forward::{FactoredModel, SHEETS};
use crate::operators::grid::{Sinogram, SpectralSlice, Volume, VolumeGrid};
use crate::operators::volterra::VolterraMatrix;

/// Power iterations used to estimate `||M||^2`.
pub const NORM_ESTIMATE_ITERATIONS: usize = 20;
/// Dual step of the TV projection scheme (stable for `tau <= 1/8`).
const TV_TAU: f64 = 0.125;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MSolver {
    Landweber {
        iterations: usize,
        /// `None` means `1 / ||M||^2`.
        #[serde(default)]
        relaxation: Option<f64>,
    },
    CglsTv {
        cg_iterations: usize,
        /// TV weight in units of the voxel values.
        tv_weight: f64,
        denoise_interval: usize,
        tv_inner_iterations: usize,
    },
}

impl MSolver {
    pub fn landweber_default() -> Self {
        MSolver::Landweber {
            iterations: 200,
            relaxation: None,
        }
    }

    pub fn cgls_tv_default(tv_weight: f64) -> Self {
        MSolver::CglsTv {
            cg_iterations: 30,
            tv_weight,
            denoise_interval: 5,
            tv_inner_iterations: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub volterra_alpha: f64,
    /// Per-frequency override of `volterra_alpha`, indexed by `k = 0..=n_z/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_schedule: Option<Vec<f64>>,
    pub m_solver: MSolver,
}

/// `(gamma, alpha, beta)` rows of the default parameter table. Each row
/// minimizes the mean hollow-cuboid error over the three families at 33^3.
pub const DEFAULT_PARAMETERS: [(f64, f64, f64); 5] = [
    (0.0, 1e-8, 0.0),
    (1.0, 1e-4, 5e-3),
    (2.0, 3e-4, 5e-3),
    (5.0, 3e-3, 1e-2),
    (10.0, 1e-2, 2e-2),
];

impl InversionConfig {
    /// Default Tikhonov and TV weights for a noise level `gamma` (percent):
    /// the first table row at or above `gamma`, else the last row.
    pub fn defaults_for_noise(gamma: f64, landweber: bool) -> Self {
        let row = DEFAULT_PARAMETERS
            .iter()
            .find(|r| r.0 >= gamma)
            .unwrap_or(&DEFAULT_PARAMETERS[DEFAULT_PARAMETERS.len() - 1]);
        InversionConfig {
            volterra_alpha: row.1,
            alpha_schedule: None,
            m_solver: if landweber {
                MSolver::landweber_default()
            } else {
                MSolver::cgls_tv_default(row.2)
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad_alpha = |a: f64| !(a >= 0.0) || !a.is_finite();
        if bad_alpha(self.volterra_alpha) {
            return Err(Error::Config(format!(
                "volterra_alpha must be >= 0, got {}",
                self.volterra_alpha
            )));
        }
        if let Some(s) = &self.alpha_schedule {
            if s.iter().any(|&a| bad_alpha(a)) {
                return Err(Error::Config("alpha_schedule entries must be >= 0".into()));
            }
        }
        match &self.m_solver {
            MSolver::Landweber {
                iterations,
                relaxation,
            } => {
                if *iterations < 1 {
                    return Err(Error::Config("Landweber needs at least one iteration".into()));
                }
                if let Some(r) = relaxation {
                    if !(*r > 0.0) {
                        return Err(Error::Config(format!("relaxation must be positive, got {r}")));
                    }
                }
            }
            MSolver::CglsTv {
                cg_iterations,
                tv_weight,
                denoise_interval,
                ..
            } => {
                if *cg_iterations < 1 || *denoise_interval < 1 {
                    return Err(Error::Config(
                        "cg_iterations and denoise_interval must be at least 1".into(),
                    ));
                }
                if !(*tv_weight >= 0.0) {
                    return Err(Error::Config(format!("tv_weight must be >= 0, got {tv_weight}")));
                }
            }
        }
        Ok(())
    }

    fn alpha(&self, k: usize) -> Result<f64> {
        match &self.alpha_schedule {
            None => Ok(self.volterra_alpha),
            Some(s) => s.get(k).copied().ok_or_else(|| {
                Error::Config(format!("alpha_schedule has {} entries, need index {k}", s.len()))
            }),
        }
    }
}

/// Factorization of `V^T V + alpha I`, reusable across right-hand sides.
pub struct TikhonovSolver {
    inner: TikhonovInner,
    vt: DMatrix<f64>,
}

enum TikhonovInner {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    /// `alpha = 0`: forward substitution on the triangular `V` itself.
    Triangular(DMatrix<f64>),
}

impl TikhonovSolver {
    pub fn new(v: &VolterraMatrix, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be >= 0, got {alpha}")));
        }
        let a = &v.entries;
        let vt = a.transpose();
        if alpha == 0.0 {
            // the normal equations have the same solution as V x = b when V is
            // nonsingular; solve the triangular system to avoid squaring cond
            let d = a.diagonal();
            let dmax = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let dmin = d.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
            if !(dmin > 1e-12 * dmax) {
                return Err(Error::IllConditioned {
                    condition: dmax / dmin,
                    detail: format!(
                        "V_xi at xi = {} has a vanishing diagonal; use alpha > 0",
                        v.xi
                    ),
                });
            }
            return Ok(TikhonovSolver {
                inner: TikhonovInner::Triangular(a.clone()),
                vt,
            });
        }
        let mut normal = &vt * a;
        for i in 0..normal.nrows() {
            normal[(i, i)] += alpha;
        }
        let inner = match normal.clone().cholesky() {
            Some(c) => TikhonovInner::Cholesky(c),
            None => TikhonovInner::Lu(normal.lu()),
        };
        Ok(TikhonovSolver { inner, vt })
    }

    fn solve_real(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.inner {
            TikhonovInner::Triangular(a) => a.solve_lower_triangular(b).ok_or_else(|| {
                Error::IllConditioned {
                    condition: f64::INFINITY,
                    detail: "triangular solve failed".into(),
                }
            }),
            TikhonovInner::Cholesky(c) => Ok(c.solve(&(&self.vt * b))),
            TikhonovInner::Lu(lu) => lu.solve(&(&self.vt * b)).ok_or_else(|| Error::IllConditioned {
                condition: f64::INFINITY,
                detail: "normal equations are singular".into(),
            }),
        }
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let re = DVector::from_iterator(rhs.len(), rhs.iter().map(|c| c.re));
        let im = DVector::from_iterator(rhs.len(), rhs.iter().map(|c| c.im));
        let (xr, xi) = (self.solve_real(&re)?, self.solve_real(&im)?);
        Ok(xr.iter().zip(xi.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect())
    }
}

/// `argmin ||V x - rhs||^2 + alpha ||x||^2`.
pub fn tikhonov_solve(v: &VolterraMatrix, rhs: &[Complex64], alpha: f64) -> Result<Vec<Complex64>> {
    if rhs.len() != v.n() {
        return Err(Error::Shape {
            expected: v.n().to_string(),
            got: rhs.len().to_string(),
        });
    }
    TikhonovSolver::new(v, alpha)?.solve(rhs)
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn residual(m: &CircularMean, x: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    m.apply(x).iter().zip(b).map(|(mx, bb)| bb - mx).collect()
}

/// Result of an iterative `M` solve.
#[derive(Clone, Debug)]
pub struct IterativeSolution {
    pub x: Vec<Complex64>,
    /// `||b - M x_k||` for `k = 0..=iterations`.
    pub residuals: Vec<f64>,
}

fn check_data(m: &CircularMean, b: &[Complex64]) -> Result<()> {
    let want = m.n_t() * m.n_theta();
    if b.len() != want {
        return Err(Error::Shape {
            expected: want.to_string(),
            got: b.len().to_string(),
        });
    }
    Ok(())
}

/// Landweber iteration `x <- x + lambda M^T (b - M x)` from `x_0 = 0`.
///
/// `norm_sq` is an estimate of `||M||^2`; `relaxation` defaults to its inverse
/// and must stay below `2 / norm_sq`.
pub fn landweber(
    m: &CircularMean,
    b: &[Complex64],
    iterations: usize,
    relaxation: Option<f64>,
    norm_sq: f64,
) -> Result<IterativeSolution> {
    check_data(m, b)?;
    if iterations < 1 {
        return Err(Error::Config("Landweber needs at least one iteration".into()));
    }
    let lambda = relaxation.unwrap_or(1.0 / norm_sq);
    if !(lambda > 0.0 && lambda < 2.0 / norm_sq) {
        return Err(Error::Config(format!(
            "relaxation {lambda} outside (0, 2/||M||^2 = {})",
            2.0 / norm_sq
        )));
    }
    let mut x = vec![Complex64::new(0.0, 0.0); m.n_pixels()];
    let mut r = b.to_vec();
    let mut residuals = vec![norm(&r)];
    let mut growth = 0;
    for it in 0..iterations {
        let g = m.apply_adjoint(&r);
        x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi += gi * lambda);
        r = residual(m, &x, b);
        let (prev, cur) = (residuals[residuals.len() - 1], norm(&r));
        residuals.push(cur);
        if cur > prev * (1.0 + 1e-12) {
            growth += 1;
            if growth >= 2 {
                return Err(Error::Diverged {
                    iteration: it + 1,
                    previous: prev,
                    current: cur,
                });
            }
        } else {
            growth = 0;
        }
    }
    Ok(IterativeSolution { x, residuals })
}

/// CGLS on `||M x - b||^2` starting from `x0`.
pub fn cgls(
    m: &CircularMean,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    iterations: usize,
) -> Result<IterativeSolution> {
    check_data(m, b)?;
    let mut x = match x0 {
        Some(v) => v.to_vec(),
        None => vec![Complex64::new(0.0, 0.0); m.n_pixels()],
    };
    let mut r = residual(m, &x, b);
    let mut residuals = vec![norm(&r)];
    // M is real, so its adjoint on complex vectors is the plain transpose
    let mut s = m.apply_adjoint(&r);
    let mut p = s.clone();
    let mut gamma = norm(&s).powi(2);
    for _ in 0..iterations {
        if gamma == 0.0 {
            residuals.push(residuals[residuals.len() - 1]);
            continue;
        }
        let q = m.apply(&p);
        let qq = norm(&q).powi(2);
        if qq == 0.0 {
            residuals.push(residuals[residuals.len() - 1]);
            continue;
        }
        let step = gamma / qq;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += pi * step);
        r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= qi * step);
        residuals.push(norm(&r));
        s = m.apply_adjoint(&r);
        let gamma_new = norm(&s).powi(2);
        let beta = gamma_new / gamma;
        p.iter_mut().zip(&s).for_each(|(pi, si)| *pi = si + *pi * beta);
        gamma = gamma_new;
    }
    Ok(IterativeSolution { x, residuals })
}

fn gradient(u: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (n, m) = u.dim();
    let gx = Array2::from_shape_fn((n, m), |(i, j)| if i + 1 < n { u[[i + 1, j]] - u[[i, j]] } else { 0.0 });
    let gy = Array2::from_shape_fn((n, m), |(i, j)| if j + 1 < m { u[[i, j + 1]] - u[[i, j]] } else { 0.0 });
    (gx, gy)
}

/// Negative adjoint of [`gradient`].
fn divergence(px: &Array2<f64>, py: &Array2<f64>) -> Array2<f64> {
    let (n, m) = px.dim();
    Array2::from_shape_fn((n, m), |(i, j)| {
        let dx = if i == 0 {
            px[[i, j]]
        } else if i + 1 == n {
            -px[[i - 1, j]]
        } else {
            px[[i, j]] - px[[i - 1, j]]
        };
        let dy = if j == 0 {
            py[[i, j]]
        } else if j + 1 == m {
            -py[[i, j - 1]]
        } else {
            py[[i, j]] - py[[i, j - 1]]
        };
        dx + dy
    })
}

/// Isotropic discrete total variation (forward differences).
pub fn total_variation(u: &Array2<f64>) -> f64 {
    let (gx, gy) = gradient(u);
    gx.iter().zip(gy.iter()).map(|(a, b)| a.hypot(*b)).sum()
}

/// `argmin 1/2 ||u - f||^2 + weight TV(u)` by Chambolle's dual projection.
pub fn tv_denoise(f: &Array2<f64>, weight: f64, iterations: usize) -> Array2<f64> {
    if weight <= 0.0 || iterations == 0 {
        return f.clone();
    }
    let (n, m) = f.dim();
    let mut px = Array2::zeros((n, m));
    let mut py = Array2::zeros((n, m));
    let fw = f / weight;
    for _ in 0..iterations {
        let d = divergence(&px, &py) - &fw;
        let (gx, gy) = gradient(&d);
        for ((a, b), (ga, gb)) in px.iter_mut().zip(py.iter_mut()).zip(gx.iter().zip(gy.iter())) {
            let den = 1.0 + TV_TAU * ga.hypot(*gb);
            *a = (*a + TV_TAU * ga) / den;
            *b = (*b + TV_TAU * gb) / den;
        }
    }
    f - &(divergence(&px, &py) * weight)
}

/// CGLS with TV denoising of the real and imaginary parts every
/// `denoise_interval` iterations; CGLS restarts from the denoised iterate.
pub fn cgls_tv(
    m: &CircularMean,
    b: &[Complex64],
    cg_iterations: usize,
    tv_weight: f64,
    denoise_interval: usize,
    tv_inner_iterations: usize,
) -> Result<IterativeSolution> {
    if denoise_interval < 1 {
        return Err(Error::Config("denoise_interval must be at least 1".into()));
    }
    let n = m.plane().n;
    let mut x: Option<Vec<Complex64>> = None;
    let mut residuals = Vec::new();
    let mut done = 0;
    while done < cg_iterations {
        let block = denoise_interval.min(cg_iterations - done);
        let sol = cgls(m, b, x.as_deref(), block)?;
        if residuals.is_empty() {
            residuals.push(sol.residuals[0]);
        }
        residuals.extend_from_slice(&sol.residuals[1..]);
        done += block;
        let mut xs = sol.x;
        if block == denoise_interval && tv_weight > 0.0 {
            let re = Array2::from_shape_fn((n, n), |(i, j)| xs[i * n + j].re);
            let im = Array2::from_shape_fn((n, n), |(i, j)| xs[i * n + j].im);
            let (re, im) = (
                tv_denoise(&re, tv_weight, tv_inner_iterations),
                tv_denoise(&im, tv_weight, tv_inner_iterations),
            );
            for i in 0..n {
                for j in 0..n {
                    xs[i * n + j] = Complex64::new(re[[i, j]], im[[i, j]]);
                }
            }
        }
        x = Some(xs);
    }
    Ok(IterativeSolution {
        x: x.unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); m.n_pixels()]),
        residuals,
    })
}

/// Per-frequency diagnostics of a reconstruction.
#[derive(Clone, Debug, Serialize)]
pub struct SliceReport {
    pub k: usize,
    pub xi: f64,
    pub alpha: f64,
    pub initial_residual: f64,
    pub final_residual: f64,
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub volume: Volume,
    /// Norm of the imaginary part dropped by the final real projection.
    pub imag_norm: f64,
    pub slices: Vec<SliceReport>,
}

/// Run the `M` solver of `config` on one frequency plane.
fn solve_m(
    model: &FactoredModel,
    config: &InversionConfig,
    b: &[Complex64],
    norm_sq: f64,
) -> Result<IterativeSolution> {
    match &config.m_solver {
        MSolver::Landweber {
            iterations,
            relaxation,
        } => landweber(&model.circular, b, *iterations, *relaxation, norm_sq),
        MSolver::CglsTv {
            cg_iterations,
            tv_weight,
            denoise_interval,
            tv_inner_iterations,
        } => cgls_tv(
            &model.circular,
            b,
            *cg_iterations,
            // slices are DFT sums over n_z samples
            tv_weight * model.volume.n_z as f64,
            *denoise_interval,
            *tv_inner_iterations,
        ),
    }
}

/// Invert data on `grid`: axial DFT, per-`xi` Tikhonov solves of `V_xi` for
/// every `theta` column, `M` inversion per slice, inverse DFT, real part.
pub fn reconstruct(
    sino: &Sinogram,
    mu: &MuSpec,
    config: &InversionConfig,
    grid: &VolumeGrid,
) -> Result<Reconstruction> {
    let model = FactoredModel::new(mu, grid, &sino.grid)?;
    reconstruct_with(&model, sino, config)
}

/// [`reconstruct`] with a prebuilt model.
pub fn reconstruct_with(
    model: &FactoredModel,
    sino: &Sinogram,
    config: &InversionConfig,
) -> Result<Reconstruction> {
    config.validate()?;
    if sino.grid != model.sino {
        return Err(Error::Config("sinogram grid differs from the model grid".into()));
    }
    let grid = model.volume;
    let spec = spectral_sinogram(sino);
    let (n_s, n_theta) = (model.sino.s.n, model.sino.n_theta);
    let norm_sq = match config.m_solver {
        MSolver::Landweber { .. } => model.circular.norm_sq_estimate(NORM_ESTIMATE_ITERATIONS),
        MSolver::CglsTv { .. } => 0.0,
    };
    let solved: Vec<(SpectralSlice, SliceReport)> = (0..model.volterra.len())
        .into_par_iter()
        .map(|k| -> Result<(SpectralSlice, SliceReport)> {
            let alpha = config.alpha(k)?;
            let solver = TikhonovSolver::new(&model.volterra[k], alpha)?;
            let mut u = vec![Complex64::new(0.0, 0.0); n_s * n_theta];
            for j in 0..n_theta {
                let rhs: Vec<Complex64> =
                    (0..n_s).map(|i| spec.values[[i, j, k]] / SHEETS).collect();
                for (i, v) in solver.solve(&rhs)?.into_iter().enumerate() {
                    u[i * n_theta + j] = v;
                }
            }
            let sol = solve_m(model, config, &u, norm_sq)?;
            let n = grid.n_xy;
            let report = SliceReport {
                k,
                xi: model.xi[k],
                alpha,
                initial_residual: sol.residuals[0],
                final_residual: sol.residuals[sol.residuals.len() - 1],
            };
            Ok((
                SpectralSlice {
                    values: Array2::from_shape_vec((n, n), sol.x).expect("pixel count"),
                    xi: model.xi[k],
                },
                report,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let nz = grid.n_z;
    let full = Array3::from_shape_fn(grid.shape(), |(i, j, k)| {
        if k < solved.len() {
            solved[k].0.values[[i, j]]
        } else {
            solved[mirror_index(k, nz)].0.values[[i, j]].conj()
        }
    });
    let (values, imag_norm) = real_part(&ifft_last_axis(&full));
    Ok(Reconstruction {
        volume: Volume::new(values, grid)?,
        imag_norm,
        slices: solved.into_iter().map(|(_, r)| r).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CenterSurface;
    use crate::operators::grid::UniformGrid;
    use crate::operators::volterra::volterra_matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s_grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| 0.2 + 2.0 * i as f64 / (n - 1) as f64).collect()
    }

    fn random_c(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn apply_c(v: &VolterraMatrix, x: &[Complex64]) -> Vec<Complex64> {
        let re: Vec<f64> = x.iter().map(|c| c.re).collect();
        let im: Vec<f64> = x.iter().map(|c| c.im).collect();
        v.apply(&re)
            .into_iter()
            .zip(v.apply(&im))
            .map(|(a, b)| Complex64::new(a, b))
            .collect()
    }

    fn small_m() -> CircularMean {
        let t: Vec<f64> = (0..12).map(|i| 0.2 + 0.15 * i as f64).collect();
        CircularMean::new(UniformGrid::new(-1.0, 1.0, 17).unwrap(), &t, 24, &CenterSurface::default())
            .unwrap()
    }

    #[test]
    fn exact_solve_recovers_x0() {
        let v = volterra_matrix(&MuSpec::Sphere, 0.0, &s_grid(41)).unwrap();
        let x0 = random_c(41, 1);
        let x = tikhonov_solve(&v, &apply_c(&v, &x0), 0.0).unwrap();
        let err: Vec<Complex64> = x.iter().zip(&x0).map(|(a, b)| a - b).collect();
        assert!(norm(&err) <= 1e-8 * norm(&x0));
    }

    #[test]
    fn zero_rhs_and_large_alpha() {
        let v = volterra_matrix(&MuSpec::Lemon { alpha: 2.0 }, 3.0, &s_grid(31)).unwrap();
        let zero = vec![Complex64::new(0.0, 0.0); 31];
        for a in [0.0, 1e-3, 10.0] {
            assert!(tikhonov_solve(&v, &zero, a).unwrap().iter().all(|c| c.norm() == 0.0));
        }
        let b = random_c(31, 2);
        let x = tikhonov_solve(&v, &b, 1e12).unwrap();
        assert!(norm(&x) <= 1e-9 * norm(&b));
    }

    #[test]
    fn normal_equation_residual() {
        for mu in MuSpec::standard_families() {
            let v = volterra_matrix(&mu, 4.0, &s_grid(51)).unwrap();
            let b = random_c(51, 3);
            let alpha = 1e-3;
            let x = tikhonov_solve(&v, &b, alpha).unwrap();
            let a = &v.entries;
            let re = DVector::from_iterator(51, x.iter().map(|c| c.re));
            let br = DVector::from_iterator(51, b.iter().map(|c| c.re));
            let vtb = a.transpose() * &br;
            let lhs = a.transpose() * (a * &re) + &re * alpha;
            assert!((lhs - &vtb).norm() <= 1e-10 * vtb.norm());
        }
    }

    #[test]
    fn singular_diagonal_is_reported_at_zero_alpha() {
        let mut v = volterra_matrix(&MuSpec::Sphere, 0.0, &s_grid(11)).unwrap();
        v.entries[(4, 4)] = 0.0;
        let b = random_c(11, 4);
        assert!(matches!(
            tikhonov_solve(&v, &b, 0.0),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn landweber_zero_and_monotone() {
        let m = small_m();
        let ns = m.norm_sq_estimate(NORM_ESTIMATE_ITERATIONS);
        let zero = vec![Complex64::new(0.0, 0.0); m.n_t() * m.n_theta()];
        let sol = landweber(&m, &zero, 10, None, ns).unwrap();
        assert!(sol.x.iter().all(|c| c.norm() == 0.0));
        let x0 = m.apply_adjoint(&random_c(m.n_t() * m.n_theta(), 5));
        let b = m.apply(&x0);
        let sol = landweber(&m, &b, 100, None, ns).unwrap();
        for w in sol.residuals.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        assert!(sol.residuals[100] < 0.2 * sol.residuals[0]);
    }

    #[test]
    fn landweber_rejects_large_step_and_detects_divergence() {
        let m = small_m();
        let ns = m.norm_sq_estimate(NORM_ESTIMATE_ITERATIONS);
        let b = random_c(m.n_t() * m.n_theta(), 6);
        assert!(matches!(
            landweber(&m, &b, 5, Some(2.5 / ns), ns),
            Err(Error::Config(_))
        ));
        // an underestimated norm lets an unstable step through
        let e = landweber(&m, &b, 200, None, ns / 3.0);
        assert!(matches!(e, Err(Error::Diverged { .. })), "{e:?}");
    }

    #[test]
    fn cgls_residual_is_nonincreasing() {
        let m = small_m();
        let b = random_c(m.n_t() * m.n_theta(), 7);
        let sol = cgls(&m, &b, None, 40).unwrap();
        for w in sol.residuals.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10));
        }
        let zero = vec![Complex64::new(0.0, 0.0); b.len()];
        assert!(cgls(&m, &zero, None, 5).unwrap().x.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn cgls_tv_without_denoising_is_plain_cgls() {
        let m = small_m();
        let b = random_c(m.n_t() * m.n_theta(), 8);
        let a = cgls(&m, &b, None, 12).unwrap();
        let c = cgls_tv(&m, &b, 12, 0.0, 13, 20).unwrap();
        assert_eq!(a.x, c.x);
    }

    #[test]
    fn tv_reduces_total_variation_of_noisy_piecewise_constant_slice() {
        let m = small_m();
        let n = m.plane().n;
        let truth: Vec<Complex64> = (0..n * n)
            .map(|p| {
                let (i, j) = (p / n, p % n);
                let inside = (4..13).contains(&i) && (5..12).contains(&j);
                Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0)
            })
            .collect();
        let mut b = m.apply(&truth);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let scale = 0.05 * norm(&b) / (b.len() as f64).sqrt();
        b.iter_mut().for_each(|v| *v += scale * rng.random_range(-1.7..1.7));
        let plain = cgls(&m, &b, None, 30).unwrap();
        let tv = cgls_tv(&m, &b, 30, 0.05, 5, 30).unwrap();
        let tv_of = |x: &[Complex64]| total_variation(&Array2::from_shape_fn((n, n), |(i, j)| x[i * n + j].re));
        assert!(tv_of(&tv.x) < tv_of(&plain.x), "{} vs {}", tv_of(&tv.x), tv_of(&plain.x));
    }

    #[test]
    fn tv_denoise_keeps_constants_and_shrinks_steps() {
        let c = Array2::from_elem((8, 8), 3.0);
        let d = tv_denoise(&c, 0.5, 50);
        assert!(d.iter().all(|v| (v - 3.0).abs() < 1e-12));
        let step = Array2::from_shape_fn((8, 8), |(i, _)| if i < 4 { 0.0 } else { 1.0 });
        let d = tv_denoise(&step, 0.2, 100);
        assert!(total_variation(&d) < total_variation(&step));
        // mean is preserved by the dual scheme
        assert!((d.sum() - step.sum()).abs() < 1e-9);
    }

    #[test]
    fn config_validation_and_json() {
        let c = InversionConfig::defaults_for_noise(5.0, false);
        c.validate().unwrap();
        let js = serde_json::to_string(&c).unwrap();
        assert!(js.contains("\"method\":\"cgls_tv\""));
        let back: InversionConfig = serde_json::from_str(&js).unwrap();
        assert_eq!(back, c);
        let mut bad = c.clone();
        bad.volterra_alpha = -1.0;
        assert!(bad.validate().is_err());
        let l = InversionConfig::defaults_for_noise(1.0, true);
        assert_eq!(l.m_solver, MSolver::landweber_default());
    }
}
