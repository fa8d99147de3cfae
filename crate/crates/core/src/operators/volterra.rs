//! Per-frequency Volterra operator
//! `V_xi u(s) = int_a^s K_xi(s, t) / sqrt(s - t) u(t) dt`,
//! `K_xi(s, t) = kappa(s, t) cos(xi mu(s, t))`.
//!
//! Product integration on the uniform grid `t_k = s_k`: `u` is interpolated
//! linearly between nodes (hat functions) and each hat is integrated against
//! the full kernel `K_xi(s_i, t) / sqrt(s_i - t)`. On every cell the
//! substitution `t = s_i - w^2` removes the singularity,
//! `int hat(t) K / sqrt(s_i - t) dt = 2 int hat(s_i - w^2) K(s_i, s_i - w^2) dw`,
//! and the smooth `w` integrand is integrated with 6-point Gauss-Legendre
//! panels, refined so each panel spans at most one radian of `xi mu`.
//! At `xi = 0` and `K` frozen this reduces to the exact weights
//! `2/3 (a - b)^2 (2a + b) / dt` and `2/3 (a - b)^2 (a + 2b) / dt`.
//! Row 0 has an empty integration interval; it carries `2 sqrt(dt) K(a, a)`,
//! the integral over a virtual cell `[a - dt, a]` with `u` held constant, so
//! the matrix stays invertible.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::MuSpec;

pub const QUADRATURE: &str = "piecewise-linear product integration, Gauss-Legendre in sqrt(s-t), virtual first cell";

const GL_NODES: [f64; 6] = [
    -0.932_469_514_203_152,
    -0.661_209_386_466_264_5,
    -0.238_619_186_083_196_9,
    0.238_619_186_083_196_9,
    0.661_209_386_466_264_5,
    0.932_469_514_203_152,
];
const GL_WEIGHTS: [f64; 6] = [
    0.171_324_492_379_170_3,
    0.360_761_573_048_138_6,
    0.467_913_934_572_691,
    0.467_913_934_572_691,
    0.360_761_573_048_138_6,
    0.171_324_492_379_170_3,
];

#[derive(Clone, Debug)]
pub struct VolterraMatrix {
    /// Lower-triangular `N_t x N_t` matrix.
    pub entries: DMatrix<f64>,
    pub xi: f64,
    pub mu: MuSpec,
    pub s: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VolterraDescriptor {
    pub family: &'static str,
    pub xi: f64,
    pub n: usize,
    pub quadrature: &'static str,
}

impl VolterraMatrix {
    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn descriptor(&self) -> VolterraDescriptor {
        VolterraDescriptor {
            family: self.mu.name(),
            xi: self.xi,
            n: self.n(),
            quadrature: QUADRATURE,
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| (0..=i).map(|k| self.entries[(i, k)] * u[k]).sum())
            .collect()
    }
}

/// Check that `s` is uniform and starts above zero; returns the spacing.
pub fn check_s_grid(s: &[f64]) -> Result<f64> {
    if s.len() < 2 {
        return Err(Error::Config("s grid needs at least two samples".into()));
    }
    if !(s[0] > 0.0) {
        return Err(Error::Config(format!("s grid must start above 0, got {}", s[0])));
    }
    let ds = s[1] - s[0];
    if !(ds > 0.0) {
        return Err(Error::Config("s grid must be increasing".into()));
    }
    for w in s.windows(2) {
        if ((w[1] - w[0]) - ds).abs() > 1e-9 * ds {
            return Err(Error::Config("s grid must be uniform".into()));
        }
    }
    Ok(ds)
}

pub fn volterra_matrix(mu: &MuSpec, xi: f64, s: &[f64]) -> Result<VolterraMatrix> {
    mu.validate()?;
    let dt = check_s_grid(s)?;
    let n = s.len();
    let mut m = DMatrix::zeros(n, n);
    let kernel = |si: f64, t: f64| mu.kappa(si, t) * (xi * mu.mu(si, t)).cos();
    m[(0, 0)] = 2.0 * dt.sqrt() * kernel(s[0], s[0]);
    for i in 1..n {
        let si = s[i];
        for k in 1..=i {
            let (lo, hi) = (s[k - 1], s[k]);
            // w runs over [b, a]
            let a = (si - lo).sqrt();
            let b = (si - hi).max(0.0).sqrt();
            let phase = (xi * (mu.mu(si, lo) - mu.mu(si, hi.min(si)))).abs();
            let panels = 1 + phase.ceil() as usize;
            let pw = (a - b) / panels as f64;
            let (mut to_hi, mut to_lo) = (0.0, 0.0);
            for q in 0..panels {
                let c = b + (q as f64 + 0.5) * pw;
                for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
                    let w = c + 0.5 * pw * x;
                    let t = si - w * w;
                    let f = 2.0 * kernel(si, t) * 0.5 * pw * wt;
                    let lam = ((t - lo) / dt).clamp(0.0, 1.0);
                    to_hi += f * lam;
                    to_lo += f * (1.0 - lam);
                }
            }
            m[(i, k)] += to_hi;
            m[(i, k - 1)] += to_lo;
        }
    }
    Ok(VolterraMatrix {
        entries: m,
        xi,
        mu: *mu,
        s: s.to_vec(),
    })
}
