//! Grid audit of the derivative conditions under which the transform adds no
//! new singularities, and the mirror-artifact geometry for point sources.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CenterSurface, Profile};

/// Default relative tolerance; scaled by the grid maximum of each quantity.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Width of the `x` window audited for the cone profile, whose domain is
/// unbounded above.
const CONE_X_WINDOW: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `h(s, .) -> 0` on the boundary of `Omega_{h,s}`.
    BoundaryLimit,
    /// `h_s != 0`.
    NonvanishingHs,
    /// `x -> (h_x / h_s)(s, x)` injective.
    RatioInjective,
    /// `d/dx (h_x / h_s) != 0`.
    RatioDerivNonzero,
}

impl Condition {
    pub fn label(&self) -> &'static str {
        match self {
            Condition::BoundaryLimit => "(1) h -> 0 on boundary",
            Condition::NonvanishingHs => "(3) h_s != 0",
            Condition::RatioInjective => "(4) h_x/h_s injective",
            Condition::RatioDerivNonzero => "(5) d/dx(h_x/h_s) != 0",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub condition: Condition,
    pub passed: bool,
    /// Grid point where the audited quantity is closest to violation.
    pub witness_s: f64,
    pub witness_x: f64,
    pub worst_value: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BolkerReport {
    pub profile: String,
    pub s_range: (f64, f64),
    pub s_resolution: usize,
    pub x_resolution: usize,
    pub tol: f64,
    pub injectivity_proxy: String,
    pub verdicts: Vec<Verdict>,
}

impl BolkerReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, c: Condition) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.condition == c)
    }
}

impl fmt::Display for BolkerReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "profile {}  s in [{}, {}]  grid {}x{}  tol {:.1e}",
            self.profile,
            self.s_range.0,
            self.s_range.1,
            self.s_resolution,
            self.x_resolution,
            self.tol
        )?;
        writeln!(
            f,
            "{:<28} {:<6} {:>12} {:>12} {:>14} {:>12}",
            "condition", "result", "s", "x", "worst", "threshold"
        )?;
        for v in &self.verdicts {
            writeln!(
                f,
                "{:<28} {:<6} {:>12.6} {:>12.6} {:>14.6e} {:>12.3e}",
                v.condition.label(),
                if v.passed { "pass" } else { "FAIL" },
                v.witness_s,
                v.witness_x,
                v.worst_value,
                v.threshold
            )?;
        }
        write!(f, "injectivity certified by: {}", self.injectivity_proxy)
    }
}

struct Grid {
    s: Vec<f64>,
    rows: Vec<RowDomain>,
}

struct RowDomain {
    lo: f64,
    hi: f64,
    lo_boundary: bool,
    hi_boundary: bool,
}

impl RowDomain {
    fn cell(&self, n: usize) -> f64 {
        (self.hi - self.lo) / n as f64
    }

    fn x(&self, n: usize, j: usize) -> f64 {
        self.lo + (j as f64 + 0.5) * self.cell(n)
    }
}

fn build_grid(profile: &Profile, s_range: (f64, f64), n: usize) -> Result<Grid> {
    let (a, b) = s_range;
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(Error::Config(format!(
            "degenerate parameter range [{a}, {b}]"
        )));
    }
    let s: Vec<f64> = (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect();
    let rows = s
        .iter()
        .map(|&si| {
            let d = profile.x_domain(si)?;
            let hi = if d.hi.is_finite() {
                d.hi
            } else {
                d.lo + CONE_X_WINDOW
            };
            if !(hi > d.lo) {
                return Err(Error::Config(format!("empty x domain at s = {si}")));
            }
            Ok(RowDomain {
                lo: d.lo,
                hi,
                lo_boundary: d.lo_is_boundary,
                hi_boundary: d.hi_is_boundary && d.hi.is_finite(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Grid { s, rows })
}

/// Smallest-magnitude audit of a quantity that must stay away from zero.
fn audit_nonzero(
    condition: Condition,
    grid: &Grid,
    nx: usize,
    tol: f64,
    eval: impl Fn(f64, f64) -> Option<f64>,
) -> Verdict {
    let mut scale = 0.0f64;
    let mut worst = (f64::INFINITY, f64::NAN, f64::NAN);
    for (i, row) in grid.rows.iter().enumerate() {
        let s = grid.s[i];
        for j in 0..nx {
            let x = row.x(nx, j);
            let mag = match eval(s, x) {
                Some(v) if v.is_finite() => v.abs(),
                _ => 0.0,
            };
            scale = scale.max(mag);
            if mag < worst.0 {
                worst = (mag, s, x);
            }
        }
    }
    let threshold = tol * scale;
    Verdict {
        condition,
        passed: worst.0 > threshold,
        witness_s: worst.1,
        witness_x: worst.2,
        worst_value: worst.0,
        threshold,
    }
}

fn audit_monotone(profile: &Profile, grid: &Grid, nx: usize, tol: f64) -> Verdict {
    let mut passed = true;
    // worst normalized step: min over rows of (consistent-sign step) / row scale
    let mut worst = (f64::INFINITY, f64::NAN, f64::NAN);
    let mut threshold = tol;
    for (i, row) in grid.rows.iter().enumerate() {
        let s = grid.s[i];
        let values: Vec<Option<f64>> = (0..nx)
            .map(|j| profile.ratio(s, row.x(nx, j)).ok().filter(|v| v.is_finite()))
            .collect();
        let scale = values
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let thr = tol * scale;
        let mut direction = 0.0;
        for j in 0..nx - 1 {
            let x = row.x(nx, j);
            let step = match (values[j], values[j + 1]) {
                (Some(a), Some(b)) => b - a,
                _ => f64::NAN,
            };
            if direction == 0.0 && step.is_finite() && step != 0.0 {
                direction = step.signum();
            }
            let signed = if step.is_finite() { step * direction } else { f64::NEG_INFINITY };
            let normalized = if scale > 0.0 { signed / scale } else { signed };
            if normalized < worst.0 {
                worst = (normalized, s, x);
                threshold = thr;
            }
            if !(signed > thr) {
                passed = false;
            }
        }
    }
    Verdict {
        condition: Condition::RatioInjective,
        passed,
        witness_s: worst.1,
        witness_x: worst.2,
        worst_value: worst.0,
        threshold,
    }
}

fn audit_boundary(profile: &Profile, grid: &Grid, nx: usize) -> Verdict {
    // Level 1 probes the boundary-adjacent cell centers; level 2 a 4x finer cell.
    let probe = |level: f64| -> (f64, f64, f64) {
        let mut best = (0.0f64, f64::NAN, f64::NAN);
        for (i, row) in grid.rows.iter().enumerate() {
            let s = grid.s[i];
            let d = 0.5 * row.cell(nx) / level;
            let mut ends = Vec::with_capacity(2);
            if row.lo_boundary {
                ends.push(row.lo + d);
            }
            if row.hi_boundary {
                ends.push(row.hi - d);
            }
            for x in ends {
                let h = profile.h(s, x).unwrap_or(f64::INFINITY).abs();
                if h > best.0 || best.1.is_nan() {
                    best = (h, s, x);
                }
            }
        }
        best
    };
    let coarse = probe(1.0);
    let fine = probe(4.0);
    let no_boundary = coarse.1.is_nan();
    let passed = no_boundary || (fine.0.is_finite() && fine.0 <= 0.5 * coarse.0);
    Verdict {
        condition: Condition::BoundaryLimit,
        passed,
        witness_s: fine.1,
        witness_x: fine.2,
        worst_value: fine.0,
        threshold: 0.5 * coarse.0,
    }
}

/// Audit conditions (1), (3), (4) and (5) on an `x_resolution`-square grid.
///
/// `s_range` is in the profile's own parameter (`p` for lemons). Condition
/// (4) is certified through strict monotonicity along each grid row.
pub fn check_bolker(
    profile: &Profile,
    s_range: (f64, f64),
    x_resolution: usize,
    tol: Option<f64>,
) -> Result<BolkerReport> {
    if x_resolution < 16 {
        return Err(Error::Config(format!(
            "x_resolution must be at least 16, got {x_resolution}"
        )));
    }
    let tol = tol.unwrap_or(DEFAULT_TOL);
    if !(tol >= 0.0) {
        return Err(Error::Config(format!("tolerance must be >= 0, got {tol}")));
    }
    profile.validate()?;
    let nx = x_resolution;
    let grid = build_grid(profile, s_range, x_resolution)?;

    let boundary = audit_boundary(profile, &grid, nx);
    let hs = audit_nonzero(Condition::NonvanishingHs, &grid, nx, tol, |s, x| {
        profile.grad(s, x).ok().map(|g| g.0)
    });
    let injective = audit_monotone(profile, &grid, nx, tol);
    let deriv = audit_nonzero(Condition::RatioDerivNonzero, &grid, nx, tol, |s, x| {
        profile.ratio_deriv(s, x).ok()
    });

    Ok(BolkerReport {
        profile: profile.name().to_string(),
        s_range,
        s_resolution: x_resolution,
        x_resolution,
        tol,
        injectivity_proxy: "strict monotonicity of x -> h_x/h_s along each grid row".into(),
        verdicts: vec![boundary, hs, injective, deriv],
    })
}

/// Default audited parameter range: the data range `s in [0.2, 2.2]`, or
/// `p in [0, 5]` for lemons.
pub fn default_param_range(profile: &Profile) -> (f64, f64) {
    match profile {
        Profile::Lemon { .. } => (0.0, 5.0),
        Profile::Tabulated(t) => t.s_range(),
        _ => (0.2, 2.2),
    }
}

/// Reflection of `point` in the plane tangent to the cylinder at angle `theta`.
pub fn tangent_reflection(point: [f64; 3], theta: f64, surface: &CenterSurface) -> [f64; 3] {
    let n = surface.normal(theta);
    let d = point[0] * n[0] + point[1] * n[1] - surface.radius;
    [point[0] - 2.0 * d * n[0], point[1] - 2.0 * d * n[1], point[2]]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactSample {
    pub theta: f64,
    pub point: [f64; 3],
}

/// Predicted mirror images of a point singularity, one per tangent plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactCurve {
    pub source: [f64; 3],
    pub samples: Vec<ArtifactSample>,
}

/// Sweep `theta` uniformly over `[0, 2 pi]`; the last sample repeats the first
/// so the curve closes.
pub fn predict_artifact_curve(
    point: [f64; 3],
    theta_samples: usize,
    surface: &CenterSurface,
) -> Result<ArtifactCurve> {
    if theta_samples < 8 {
        return Err(Error::Config(format!(
            "theta_samples must be at least 8, got {theta_samples}"
        )));
    }
    let samples = (0..=theta_samples)
        .map(|m| {
            let theta = 2.0 * std::f64::consts::PI * m as f64 / theta_samples as f64;
            ArtifactSample {
                theta,
                point: tangent_reflection(point, theta, surface),
            }
        })
        .collect();
    Ok(ArtifactCurve {
        source: point,
        samples,
    })
}
