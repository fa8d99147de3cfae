//! Cylinder of centers, revolution profiles `h(s, x)` and the symmetric-curve
//! parametrizations `mu(s, t) = sqrt(s - t) * tau(s, t)`.
//!
//! A surface of revolution is the set of points `x` with
//! `|x' - y'|^2 = h(s, x_3 - y_3)`, i.e. the rotation of the curve
//! `x_3 -> sqrt(h(s, x_3 - y_3))` about the vertical line through the center
//! `y = (r cos(theta), r sin(theta), y_3)`.
//!
//! All derivatives are closed forms; the tests pin them with finite
//! differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack allowed when testing closure of a domain.
const DOMAIN_SLACK: f64 = 1e-12;

/// The cylinder `S = Q x R` carrying all rotation axes, with `Q` a circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterSurface {
    pub radius: f64,
}

impl Default for CenterSurface {
    fn default() -> Self {
        CenterSurface { radius: 1.0 }
    }
}

impl CenterSurface {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!(
                "cylinder radius must be positive, got {radius}"
            )));
        }
        Ok(CenterSurface { radius })
    }

    /// Center `(r cos(theta), r sin(theta), y3)`.
    pub fn center(&self, theta: f64, y3: f64) -> [f64; 3] {
        [self.radius * theta.cos(), self.radius * theta.sin(), y3]
    }

    /// Unit outward normal of the tangent plane at angle `theta`.
    pub fn normal(&self, theta: f64) -> [f64; 2] {
        [theta.cos(), theta.sin()]
    }

    /// Distance of a point from the cylinder.
    pub fn distance(&self, p: [f64; 3]) -> f64 {
        (p[0].hypot(p[1]) - self.radius).abs()
    }
}

/// The open interval of admissible `x` for one profile parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XDomain {
    pub lo: f64,
    pub hi: f64,
    /// Whether `lo` is a finite boundary point where `h` is expected to vanish.
    pub lo_is_boundary: bool,
    pub hi_is_boundary: bool,
}

impl XDomain {
    fn symmetric(half: f64) -> Self {
        XDomain {
            lo: -half,
            hi: half,
            lo_is_boundary: true,
            hi_is_boundary: true,
        }
    }

    fn slack(&self) -> f64 {
        let scale = [self.lo, self.hi]
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        DOMAIN_SLACK * (1.0 + scale)
    }

    pub fn contains_closed(&self, x: f64) -> bool {
        let e = self.slack();
        x >= self.lo - e && x <= self.hi + e
    }

    pub fn contains_open(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

/// A revolution-profile family `h(s, x)`.
///
/// For [`Profile::Lemon`] the first argument of every evaluator is the arc
/// parameter `p`; use [`lemon_s_from_p`] and [`lemon_p_from_s`] to move
/// between `p` and the lemon height `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Profile {
    /// `h = s^2 - x^2`: spheres of radius `s`.
    Sphere,
    /// Spheroids of minor radius `s` and fixed linear eccentricity `c`.
    Spheroid { c: f64 },
    /// Circular arcs with tips a distance `alpha` apart.
    Lemon { alpha: f64 },
    /// `h = s x` on `x > 0`.
    Cone,
    /// Sampled profile, used to audit user-supplied surfaces.
    Tabulated(TabulatedProfile),
}

/// Lemon height `s = sqrt(alpha^2 + p^2) - p`; strictly decreasing in `p`.
pub fn lemon_s_from_p(alpha: f64, p: f64) -> f64 {
    // Stable for large p: alpha^2 / (sqrt(alpha^2 + p^2) + p).
    if p >= 0.0 {
        alpha * alpha / (alpha.hypot(p) + p)
    } else {
        alpha.hypot(p) - p
    }
}

/// Inverse of [`lemon_s_from_p`]: `p = (alpha^2 - s^2) / (2 s)`.
pub fn lemon_p_from_s(alpha: f64, s: f64) -> f64 {
    (alpha * alpha - s * s) / (2.0 * s)
}

impl Profile {
    pub fn name(&self) -> &'static str {
        match self {
            Profile::Sphere => "sphere",
            Profile::Spheroid { .. } => "spheroid",
            Profile::Lemon { .. } => "lemon",
            Profile::Cone => "cone",
            Profile::Tabulated(_) => "tabulated",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Profile::Spheroid { c } if !(*c > 0.0 && c.is_finite()) => Err(Error::Config(
                format!("spheroid eccentricity c must be positive, got {c}"),
            )),
            Profile::Lemon { alpha } if !(*alpha > 0.0 && alpha.is_finite()) => Err(
                Error::Config(format!("lemon tip distance alpha must be positive, got {alpha}")),
            ),
            _ => Ok(()),
        }
    }

    /// Map a data coordinate `s` (sphere radius, spheroid minor radius, lemon
    /// height, cone slope) to this profile's own first parameter.
    pub fn native_param(&self, s: f64) -> f64 {
        match self {
            Profile::Lemon { alpha } => lemon_p_from_s(*alpha, s),
            _ => s,
        }
    }

    /// The slice `Omega_{h,s}` of the domain.
    pub fn x_domain(&self, s: f64) -> Result<XDomain> {
        let bad = |detail: &str| Error::OutOfDomain {
            s,
            x: f64::NAN,
            detail: detail.to_string(),
        };
        if !s.is_finite() {
            return Err(bad("parameter is not finite"));
        }
        match self {
            Profile::Sphere => {
                if s <= 0.0 {
                    return Err(bad("sphere radius must be positive"));
                }
                Ok(XDomain::symmetric(s))
            }
            Profile::Spheroid { c } => {
                if s <= 0.0 {
                    return Err(bad("spheroid minor radius must be positive"));
                }
                Ok(XDomain::symmetric(s.hypot(*c)))
            }
            Profile::Lemon { alpha } => {
                if p_is_lemon_arc(s) {
                    Ok(XDomain::symmetric(*alpha))
                } else {
                    // p < 0: the arc is longer than a half circle and ends where
                    // it meets the vertical through its center.
                    Ok(XDomain {
                        lo: -alpha.hypot(s),
                        hi: alpha.hypot(s),
                        lo_is_boundary: true,
                        hi_is_boundary: true,
                    })
                }
            }
            Profile::Cone => {
                if s <= 0.0 {
                    return Err(bad("cone slope must be positive for h = s x >= 0"));
                }
                Ok(XDomain {
                    lo: 0.0,
                    hi: f64::INFINITY,
                    lo_is_boundary: true,
                    hi_is_boundary: false,
                })
            }
            Profile::Tabulated(t) => t.x_domain(s),
        }
    }

    fn check_closed(&self, s: f64, x: f64) -> Result<XDomain> {
        let dom = self.x_domain(s)?;
        if !x.is_finite() || !dom.contains_closed(x) {
            return Err(Error::OutOfDomain {
                s,
                x,
                detail: format!("x must lie in [{}, {}]", dom.lo, dom.hi),
            });
        }
        Ok(dom)
    }

    fn check_open(&self, s: f64, x: f64) -> Result<XDomain> {
        let dom = self.x_domain(s)?;
        if !x.is_finite() || !dom.contains_open(x) {
            return Err(Error::OutOfDomain {
                s,
                x,
                detail: format!("x must lie in the open interval ({}, {})", dom.lo, dom.hi),
            });
        }
        Ok(dom)
    }

    /// `h(s, x)`, exactly zero on finite boundary points of the domain.
    pub fn h(&self, s: f64, x: f64) -> Result<f64> {
        let dom = self.check_closed(s, x)?;
        let x = x.clamp(dom.lo, dom.hi);
        if (x == dom.lo && dom.lo_is_boundary) || (x == dom.hi && dom.hi_is_boundary) {
            return Ok(0.0);
        }
        Ok(self.h_unchecked(s, x))
    }

    /// `h` without domain checks; callers guarantee `x` is in the closed domain.
    pub(crate) fn h_unchecked(&self, s: f64, x: f64) -> f64 {
        match self {
            Profile::Sphere => ((s - x) * (s + x)).max(0.0),
            Profile::Spheroid { c } => {
                let a2 = s * s + c * c;
                (s * s / a2 * (a2 - x * x)).max(0.0)
            }
            Profile::Lemon { alpha } => {
                let r2 = alpha * alpha + s * s - x * x;
                let d = r2.max(0.0).sqrt() - s;
                if p_is_lemon_arc(s) && d <= 0.0 {
                    0.0
                } else {
                    d * d
                }
            }
            Profile::Cone => s * x,
            Profile::Tabulated(t) => t.interp(&t.h, s, x),
        }
    }

    /// Partial derivatives `(h_s, h_x)`; for lemons the first entry is `h_p`.
    pub fn grad(&self, s: f64, x: f64) -> Result<(f64, f64)> {
        self.check_open(s, x)?;
        Ok(match self {
            Profile::Sphere => (2.0 * s, -2.0 * x),
            Profile::Spheroid { c } => {
                let c2 = c * c;
                let s2 = s * s;
                let a2 = s2 + c2;
                let hs = 2.0 * s * (c2 * c2 - c2 * (x * x - 2.0 * s2) + s2 * s2) / (a2 * a2);
                let hx = -2.0 * x * s2 / a2;
                (hs, hx)
            }
            Profile::Lemon { alpha } => {
                let r = (alpha * alpha + s * s - x * x).sqrt();
                let hp = 2.0 * (s / r - 1.0) * (r - s);
                let hx = -2.0 * (r - s) * x / r;
                (hp, hx)
            }
            Profile::Cone => (x, s),
            Profile::Tabulated(t) => (t.interp(&t.hs, s, x), t.interp(&t.hx, s, x)),
        })
    }

    /// `d/dx (h_x / h_s)`, the quantity that must not vanish for artifact-free
    /// backprojection.
    pub fn ratio_deriv(&self, s: f64, x: f64) -> Result<f64> {
        let (hs, _) = self.grad(s, x)?;
        if hs == 0.0 {
            return Err(Error::SingularRatio { s, x });
        }
        let value = match self {
            Profile::Sphere => -1.0 / s,
            Profile::Spheroid { c } => {
                let c2 = c * c;
                let s2 = s * s;
                let num = c2 * c2 + c2 * (x * x + 2.0 * s2) + s2 * s2;
                let den = c2 * c2 - c2 * (x * x - 2.0 * s2) + s2 * s2;
                -s * (s2 + c2) * num / (den * den)
            }
            Profile::Lemon { alpha } => {
                let q = alpha * alpha + s * s;
                let r = (q - x * x).sqrt();
                (q - s * r) / (r * (r - s) * (r - s))
            }
            Profile::Cone => -s / (x * x),
            Profile::Tabulated(t) => t.interp(&t.ratio_dx, s, x),
        };
        if !value.is_finite() {
            return Err(Error::SingularRatio { s, x });
        }
        Ok(value)
    }

    /// `h_x / h_s` (Tabulated: interpolated from node values).
    pub fn ratio(&self, s: f64, x: f64) -> Result<f64> {
        let (hs, hx) = self.grad(s, x)?;
        if hs == 0.0 {
            return Err(Error::SingularRatio { s, x });
        }
        match self {
            Profile::Tabulated(t) => {
                let v = t.interp(&t.ratio, s, x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::SingularRatio { s, x })
                }
            }
            _ => Ok(hx / hs),
        }
    }
}

fn p_is_lemon_arc(p: f64) -> bool {
    p >= 0.0
}

/// Point on the surface of revolution `R(s, y)` at azimuth `phi` and height `x3`.
///
/// Returns `y' + sqrt(h(s, x3 - y3)) (cos(phi), sin(phi))` in the first two
/// coordinates and `x3` in the third.
pub fn surface_point(
    profile: &Profile,
    surface: &CenterSurface,
    s: f64,
    center: (f64, f64),
    phi: f64,
    x3: f64,
) -> Result<[f64; 3]> {
    let (theta, y3) = center;
    let h = profile.h(s, x3 - y3)?;
    let rho = h.sqrt();
    let y = surface.center(theta, y3);
    Ok([y[0] + rho * phi.cos(), y[1] + rho * phi.sin(), x3])
}

/// `Psi(s, y; x) = |x' - y'|^2 - h(s, x3 - y3)`; zero on the surface.
pub fn defining_function(
    profile: &Profile,
    surface: &CenterSurface,
    s: f64,
    center: (f64, f64),
    point: [f64; 3],
) -> Result<f64> {
    let y = surface.center(center.0, center.1);
    let dx = point[0] - y[0];
    let dy = point[1] - y[1];
    Ok(dx * dx + dy * dy - profile.h(s, point[2] - y[2])?)
}

/// Profile sampled on a rectangular `(s, x)` grid.
///
/// Values between nodes are bilinear; derivatives come from central
/// differences of the table (one-sided on the edges).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedRaw", into = "TabulatedRaw")]
pub struct TabulatedProfile {
    s: Vec<f64>,
    x: Vec<f64>,
    h: Vec<Vec<f64>>,
    hs: Vec<Vec<f64>>,
    hx: Vec<Vec<f64>>,
    ratio: Vec<Vec<f64>>,
    ratio_dx: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TabulatedRaw {
    s: Vec<f64>,
    x: Vec<f64>,
    h: Vec<Vec<f64>>,
}

impl TryFrom<TabulatedRaw> for TabulatedProfile {
    type Error = Error;

    fn try_from(raw: TabulatedRaw) -> Result<Self> {
        TabulatedProfile::new(raw.s, raw.x, raw.h)
    }
}

impl From<TabulatedProfile> for TabulatedRaw {
    fn from(t: TabulatedProfile) -> Self {
        TabulatedRaw {
            s: t.s,
            x: t.x,
            h: t.h,
        }
    }
}

fn check_uniform(name: &str, v: &[f64]) -> Result<()> {
    if v.len() < 3 {
        return Err(Error::Config(format!("{name} grid needs at least 3 nodes")));
    }
    let step = v[1] - v[0];
    if !(step > 0.0) {
        return Err(Error::Config(format!("{name} grid must be increasing")));
    }
    for w in v.windows(2) {
        if ((w[1] - w[0]) - step).abs() > 1e-9 * step.max(1.0) {
            return Err(Error::Config(format!("{name} grid must be uniform")));
        }
    }
    Ok(())
}

fn diff(values: &[f64], step: f64, i: usize) -> f64 {
    let n = values.len();
    if i == 0 {
        (values[1] - values[0]) / step
    } else if i == n - 1 {
        (values[n - 1] - values[n - 2]) / step
    } else {
        (values[i + 1] - values[i - 1]) / (2.0 * step)
    }
}

impl TabulatedProfile {
    /// `h[i][j]` is the value at `(s[i], x[j])`; both grids uniform.
    pub fn new(s: Vec<f64>, x: Vec<f64>, h: Vec<Vec<f64>>) -> Result<Self> {
        check_uniform("s", &s)?;
        check_uniform("x", &x)?;
        if h.len() != s.len() || h.iter().any(|row| row.len() != x.len()) {
            return Err(Error::Shape {
                expected: format!("{} x {}", s.len(), x.len()),
                got: format!("{} rows", h.len()),
            });
        }
        let ds = s[1] - s[0];
        let dx = x[1] - x[0];
        let (ns, nx) = (s.len(), x.len());
        let mut hs = vec![vec![0.0; nx]; ns];
        let mut hx = vec![vec![0.0; nx]; ns];
        for j in 0..nx {
            let col: Vec<f64> = h.iter().map(|row| row[j]).collect();
            for i in 0..ns {
                hs[i][j] = diff(&col, ds, i);
            }
        }
        for i in 0..ns {
            for j in 0..nx {
                hx[i][j] = diff(&h[i], dx, j);
            }
        }
        // differences of equal values that only differ by rounding
        let hmax = h.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let snap = |table: &mut Vec<Vec<f64>>, step: f64| {
            let eps = 64.0 * f64::EPSILON * hmax / step;
            table.iter_mut().flatten().for_each(|v| {
                if v.abs() <= eps {
                    *v = 0.0
                }
            });
        };
        snap(&mut hs, ds);
        snap(&mut hx, dx);
        let ratio: Vec<Vec<f64>> = (0..ns)
            .map(|i| {
                (0..nx)
                    .map(|j| {
                        if hs[i][j] == 0.0 {
                            f64::NAN
                        } else {
                            hx[i][j] / hs[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let ratio_dx = ratio
            .iter()
            .map(|row| (0..nx).map(|j| diff(row, dx, j)).collect())
            .collect();
        Ok(TabulatedProfile {
            s,
            x,
            h,
            hs,
            hx,
            ratio,
            ratio_dx,
        })
    }

    /// Sample `f` on `ns x nx` uniform nodes.
    pub fn from_fn(
        f: impl Fn(f64, f64) -> f64,
        s_range: (f64, f64),
        ns: usize,
        x_range: (f64, f64),
        nx: usize,
    ) -> Result<Self> {
        let grid = |(a, b): (f64, f64), n: usize| -> Vec<f64> {
            (0..n)
                .map(|i| a + (b - a) * i as f64 / (n.max(2) - 1) as f64)
                .collect()
        };
        let s = grid(s_range, ns);
        let x = grid(x_range, nx);
        let h = s
            .iter()
            .map(|&si| x.iter().map(|&xj| f(si, xj)).collect())
            .collect();
        TabulatedProfile::new(s, x, h)
    }

    pub fn s_range(&self) -> (f64, f64) {
        (self.s[0], self.s[self.s.len() - 1])
    }

    fn x_domain(&self, s: f64) -> Result<XDomain> {
        let (lo, hi) = self.s_range();
        if s < lo - DOMAIN_SLACK || s > hi + DOMAIN_SLACK {
            return Err(Error::OutOfDomain {
                s,
                x: f64::NAN,
                detail: format!("tabulated profile covers s in [{lo}, {hi}]"),
            });
        }
        Ok(XDomain {
            lo: self.x[0],
            hi: self.x[self.x.len() - 1],
            lo_is_boundary: true,
            hi_is_boundary: true,
        })
    }

    fn locate(grid: &[f64], v: f64) -> (usize, f64) {
        let step = grid[1] - grid[0];
        let u = ((v - grid[0]) / step).clamp(0.0, (grid.len() - 1) as f64);
        let i = (u.floor() as usize).min(grid.len() - 2);
        (i, u - i as f64)
    }

    fn interp(&self, table: &[Vec<f64>], s: f64, x: f64) -> f64 {
        let (i, a) = Self::locate(&self.s, s);
        let (j, b) = Self::locate(&self.x, x);
        let pick = |ii: usize, jj: usize, w: f64| if w == 0.0 { 0.0 } else { w * table[ii][jj] };
        pick(i, j, (1.0 - a) * (1.0 - b))
            + pick(i + 1, j, a * (1.0 - b))
            + pick(i, j + 1, (1.0 - a) * b)
            + pick(i + 1, j + 1, a * b)
    }
}

/// The five quantities attached to a symmetric curve at `(s, t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuValues {
    pub mu: f64,
    pub tau: f64,
    pub mu_t: f64,
    /// `sqrt(1 + mu_t^2)`; `+inf` at `t = s`.
    pub g: f64,
    /// `g * sqrt(s - t)`, finite and positive on the whole triangle.
    pub kappa: f64,
}

/// Symmetric-curve form `mu(s, t) = sqrt(s - t) * tau(s, t)` of a profile.
///
/// `s` is the data coordinate (sphere radius, spheroid minor radius, lemon
/// height) and `t` the circle radius in the horizontal plane; the surface
/// meets that plane's circle at heights `+-mu(s, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum MuSpec {
    Sphere,
    Spheroid { c: f64 },
    Lemon { alpha: f64 },
}

impl MuSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MuSpec::Sphere => "sphere",
            MuSpec::Spheroid { .. } => "spheroid",
            MuSpec::Lemon { .. } => "lemon",
        }
    }

    /// The three families used in the reconstruction experiments.
    pub fn standard_families() -> [MuSpec; 3] {
        [
            MuSpec::Sphere,
            MuSpec::Spheroid { c: 2.0 },
            MuSpec::Lemon { alpha: 2.0 },
        ]
    }

    pub fn profile(&self) -> Profile {
        match *self {
            MuSpec::Sphere => Profile::Sphere,
            MuSpec::Spheroid { c } => Profile::Spheroid { c },
            MuSpec::Lemon { alpha } => Profile::Lemon { alpha },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.profile().validate()
    }

    pub fn tau(&self, s: f64, t: f64) -> f64 {
        match *self {
            MuSpec::Sphere => (s + t).sqrt(),
            MuSpec::Spheroid { c } => (1.0 + (c / s).powi(2)).sqrt() * (s + t).sqrt(),
            MuSpec::Lemon { alpha } => ((s * t + alpha * alpha) / s).sqrt(),
        }
    }

    /// `d tau / d t`.
    pub fn tau_t(&self, s: f64, t: f64) -> f64 {
        match *self {
            MuSpec::Sphere => 0.5 / (s + t).sqrt(),
            MuSpec::Spheroid { c } => 0.5 * (1.0 + (c / s).powi(2)).sqrt() / (s + t).sqrt(),
            MuSpec::Lemon { .. } => 0.5 / self.tau(s, t),
        }
    }

    /// `mu(s, t)`; callers guarantee `t <= s`.
    pub fn mu(&self, s: f64, t: f64) -> f64 {
        (s - t).max(0.0).sqrt() * self.tau(s, t)
    }

    /// `kappa(s, t) = sqrt((s - t) + ((s - t) tau_t - tau / 2)^2)`.
    pub fn kappa(&self, s: f64, t: f64) -> f64 {
        let d = (s - t).max(0.0);
        let b = d * self.tau_t(s, t) - 0.5 * self.tau(s, t);
        (d + b * b).sqrt()
    }

    pub fn eval(&self, s: f64, t: f64) -> Result<MuValues> {
        if !(s > 0.0) || !(t >= 0.0) || t > s || !s.is_finite() {
            return Err(Error::MuDomain { s, t });
        }
        let tau = self.tau(s, t);
        let kappa = self.kappa(s, t);
        let d = s - t;
        if d == 0.0 {
            return Ok(MuValues {
                mu: 0.0,
                tau,
                mu_t: f64::NEG_INFINITY,
                g: f64::INFINITY,
                kappa,
            });
        }
        let sq = d.sqrt();
        let mu_t = (d * self.tau_t(s, t) - 0.5 * tau) / sq;
        Ok(MuValues {
            mu: sq * tau,
            tau,
            mu_t,
            g: kappa / sq,
            kappa,
        })
    }
}

impl TryFrom<&Profile> for MuSpec {
    type Error = Error;

    fn try_from(p: &Profile) -> Result<Self> {
        match *p {
            Profile::Sphere => Ok(MuSpec::Sphere),
            Profile::Spheroid { c } => Ok(MuSpec::Spheroid { c }),
            Profile::Lemon { alpha } => Ok(MuSpec::Lemon { alpha }),
            _ => Err(Error::Config(format!(
                "the {} profile has no symmetric-curve form",
                p.name()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fd<F: Fn(f64) -> f64>(f: F, v: f64, step: f64) -> f64 {
        (f(v + step) - f(v - step)) / (2.0 * step)
    }

    #[test]
    fn h_examples() {
        assert_abs_diff_eq!(Profile::Sphere.h(2.0, 1.0).unwrap(), 3.0);
        assert_abs_diff_eq!(Profile::Spheroid { c: 2.0 }.h(1.0, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(Profile::Lemon { alpha: 2.0 }.h(0.0, 0.0).unwrap(), 4.0);
        assert_abs_diff_eq!(Profile::Cone.h(3.0, 2.0).unwrap(), 6.0);
    }

    #[test]
    fn h_vanishes_on_boundary() {
        assert_eq!(Profile::Sphere.h(1.5, 1.5).unwrap(), 0.0);
        let c = 2.0;
        let w = 1.0f64.hypot(c);
        assert_eq!(Profile::Spheroid { c }.h(1.0, -w).unwrap(), 0.0);
        assert_eq!(Profile::Lemon { alpha: 2.0 }.h(0.7, 2.0).unwrap(), 0.0);
        assert_eq!(Profile::Cone.h(0.7, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn h_rejects_points_outside_domain() {
        let err = Profile::Sphere.h(1.0, 1.5).unwrap_err();
        match err {
            Error::OutOfDomain { s, x, .. } => {
                assert_eq!(s, 1.0);
                assert_eq!(x, 1.5);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(Profile::Cone.h(1.0, -0.1).is_err());
        assert!(Profile::Sphere.grad(1.0, 1.0).is_err());
    }

    #[test]
    fn grad_examples() {
        assert_eq!(Profile::Sphere.grad(2.0, 1.0).unwrap(), (4.0, -2.0));
        let (hs, hx) = Profile::Spheroid { c: 2.0 }.grad(1.0, 0.0).unwrap();
        assert_abs_diff_eq!(hs, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hx, 0.0);
        assert_eq!(Profile::Cone.grad(3.0, 2.0).unwrap(), (2.0, 3.0));
    }

    #[test]
    fn spheroid_grad_matches_finite_differences() {
        let p = Profile::Spheroid { c: 2.0 };
        let fd_s = fd(|s| p.h(s, 0.0).unwrap(), 1.0, 1e-5);
        assert!((fd_s - 2.0).abs() < 1e-6);
        let (hs, _) = p.grad(1.0, 0.0).unwrap();
        assert!((fd_s - hs).abs() < 1e-6);
    }

    #[test]
    fn ratio_deriv_examples() {
        let v = Profile::Spheroid { c: 2.0 }.ratio_deriv(1.0, 0.0).unwrap();
        assert_abs_diff_eq!(v, -0.2, epsilon = 1e-15);
        // finite-difference confirmation of the closed form
        let p = Profile::Spheroid { c: 2.0 };
        let fd_v = fd(|x| p.ratio(1.0, x).unwrap(), 0.0, 1e-5);
        assert!((fd_v - v).abs() < 1e-8);

        assert_abs_diff_eq!(Profile::Cone.ratio_deriv(3.0, 2.0).unwrap(), -0.75);
        // h_x / h_s = -x / s for the sphere
        assert_abs_diff_eq!(Profile::Sphere.ratio_deriv(2.0, 0.5).unwrap(), -0.5);
        assert_abs_diff_eq!(Profile::Sphere.ratio(2.0, 0.5).unwrap(), -0.25);
    }

    #[test]
    fn singular_ratio_is_reported() {
        let t = TabulatedProfile::from_fn(
            |s, x| (s - 1.0).powi(2) * (1.0 - x * x),
            (0.5, 1.5),
            11,
            (-1.0, 1.0),
            11,
        )
        .unwrap();
        let p = Profile::Tabulated(t);
        assert!(matches!(
            p.ratio_deriv(1.0, 0.0),
            Err(Error::SingularRatio { .. })
        ));
    }

    #[test]
    fn mu_examples() {
        let v = MuSpec::Sphere.eval(2.0, 2.0).unwrap();
        assert_eq!(v.mu, 0.0);
        assert_abs_diff_eq!(v.tau, 2.0);
        assert_abs_diff_eq!(v.kappa, 1.0);
        assert!(v.g.is_infinite() && v.g > 0.0);

        let v = MuSpec::Sphere.eval(5.0, 3.0).unwrap();
        assert_abs_diff_eq!(v.mu, 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.mu_t, -0.75, epsilon = 1e-14);
        assert_abs_diff_eq!(v.g, 1.25, epsilon = 1e-14);

        let v = MuSpec::Lemon { alpha: 2.0 }.eval(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(v.tau, 5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(v.kappa, 5f64.sqrt() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn mu_rejects_t_above_s() {
        assert!(matches!(
            MuSpec::Sphere.eval(1.0, 1.5),
            Err(Error::MuDomain { .. })
        ));
    }

    #[test]
    fn spheroid_mu_matches_closed_form() {
        let c = 2.0;
        let m = MuSpec::Spheroid { c };
        for &(s, t) in &[(0.5, 0.2), (1.3, 0.9), (2.2, 2.0)] {
            let expect = (1.0 + (c / s).powi(2)).sqrt() * (s * s - t * t).sqrt();
            assert_abs_diff_eq!(m.mu(s, t), expect, epsilon = 1e-13);
        }
    }

    #[test]
    fn surface_point_examples() {
        let cyl = CenterSurface::default();
        let p = surface_point(&Profile::Sphere, &cyl, 1.0, (0.0, 0.0), std::f64::consts::PI, 0.0)
            .unwrap();
        assert_abs_diff_eq!(p[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-15);

        // boundary of the domain: point on the axis through the center
        let p = surface_point(&Profile::Sphere, &cyl, 0.8, (0.3, 0.1), 1.0, 0.9).unwrap();
        let y = cyl.center(0.3, 0.1);
        assert_abs_diff_eq!(p[0], y[0]);
        assert_abs_diff_eq!(p[1], y[1]);

        let lemon = Profile::Lemon { alpha: 2.0 };
        let p = surface_point(&lemon, &cyl, 0.0, (0.0, 0.0), std::f64::consts::PI, 0.0).unwrap();
        assert_abs_diff_eq!(p[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn lemon_parametrizations_agree() {
        let alpha = 2.0;
        for k in 0..=50 {
            let p = 5.0 * k as f64 / 50.0;
            let s = lemon_s_from_p(alpha, p);
            let h0 = Profile::Lemon { alpha }.h(p, 0.0).unwrap();
            assert!((h0 - s * s).abs() < 1e-12 * (1.0 + s * s));
            assert!((lemon_p_from_s(alpha, s) - p).abs() < 1e-10);
            if k > 0 {
                assert!(s < lemon_s_from_p(alpha, 5.0 * (k - 1) as f64 / 50.0));
            }
        }
    }

    #[test]
    fn profile_json_schema() {
        let p: Profile = serde_json::from_str(r#"{"family": "spheroid", "c": 2.0}"#).unwrap();
        assert_eq!(p, Profile::Spheroid { c: 2.0 });
        let p: Profile = serde_json::from_str(r#"{"family": "lemon", "alpha": 2.0}"#).unwrap();
        assert_eq!(p, Profile::Lemon { alpha: 2.0 });
        assert_eq!(
            serde_json::to_string(&Profile::Sphere).unwrap(),
            r#"{"family":"sphere"}"#
        );
        let t: Profile = serde_json::from_str(
            r#"{"family":"tabulated","s":[0,1,2],"x":[-1,0,1],"h":[[0,1,0],[0,2,0],[0,3,0]]}"#,
        )
        .unwrap();
        assert_eq!(t.name(), "tabulated");
        let back: Profile = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        match (back, t) {
            (Profile::Tabulated(a), Profile::Tabulated(b)) => {
                assert_eq!((a.s, a.x, a.h), (b.s, b.x, b.h));
            }
            _ => panic!("family changed in round trip"),
        }
        let m: MuSpec = serde_json::from_str(r#"{"family":"lemon","alpha":2.0}"#).unwrap();
        assert_eq!(m, MuSpec::Lemon { alpha: 2.0 });
    }

    fn mu_strategy() -> impl Strategy<Value = MuSpec> {
        prop_oneof![
            Just(MuSpec::Sphere),
            (0.5f64..3.0).prop_map(|c| MuSpec::Spheroid { c }),
            (0.5f64..3.0).prop_map(|alpha| MuSpec::Lemon { alpha }),
        ]
    }

    proptest! {
        #[test]
        fn profiles_are_even(s in 0.2f64..2.2, u in -1.0f64..1.0, c in 0.5f64..3.0) {
            for p in [Profile::Sphere, Profile::Spheroid { c }, Profile::Lemon { alpha: c }] {
                let dom = p.x_domain(s).unwrap();
                let x = u * dom.hi;
                prop_assert!((p.h(s, x).unwrap() - p.h(s, -x).unwrap()).abs() <= 1e-12);
            }
        }

        #[test]
        fn mu_consistent_with_h(m in mu_strategy(), s in 0.2f64..2.2, frac in 0.0f64..1.0) {
            let t = 0.2 + frac * (s - 0.2);
            let mu = m.mu(s, t);
            let profile = m.profile();
            let param = profile.native_param(s);
            match m {
                MuSpec::Lemon { alpha } if param < 0.0 => {
                    // apple-shaped lemon: (t, mu) lies on the full meridian circle
                    let lhs = (t + param).powi(2) + mu * mu;
                    prop_assert!((lhs - alpha * alpha - param * param).abs() <= 1e-10 * (1.0 + lhs));
                }
                _ => {
                    let h = profile.h(param, mu).unwrap();
                    prop_assert!((h - t * t).abs() <= 1e-10 * (1.0 + t * t));
                }
            }
            let v = m.eval(s, t).unwrap();
            prop_assert!((v.mu - (s - t).sqrt() * v.tau).abs() <= 1e-12 * (1.0 + v.mu));
            if t < s {
                prop_assert!((v.g - (1.0 + v.mu_t * v.mu_t).sqrt()).abs() <= 1e-9 * v.g);
                prop_assert!((v.g * (s - t).sqrt() - v.kappa).abs() <= 1e-9 * v.kappa);
            }
        }

        #[test]
        fn surface_points_satisfy_defining_function(
            s in 0.2f64..2.2, theta in 0.0f64..6.3, y3 in -2.0f64..2.0,
            phi in 0.0f64..6.3, u in -0.999f64..0.999,
        ) {
            let cyl = CenterSurface::default();
            for p in [Profile::Sphere, Profile::Spheroid { c: 2.0 }, Profile::Lemon { alpha: 2.0 }] {
                let dom = p.x_domain(s).unwrap();
                let x3 = y3 + u * dom.hi;
                let pt = surface_point(&p, &cyl, s, (theta, y3), phi, x3).unwrap();
                let psi = defining_function(&p, &cyl, s, (theta, y3), pt).unwrap();
                prop_assert!(psi.abs() <= 1e-12 * (1.0 + p.h(s, 0.0).unwrap()));
            }
        }
    }

    #[test]
    fn kappa_positive_on_triangle() {
        let (a, b) = (0.2, 2.2);
        for m in MuSpec::standard_families() {
            let mut min = f64::INFINITY;
            for i in 0..200 {
                let s = a + (b - a) * i as f64 / 199.0;
                for j in 0..200 {
                    let t = a + (s - a) * j as f64 / 199.0;
                    min = min.min(m.kappa(s, t));
                }
            }
            assert!(min > 0.0, "{}: min kappa {min}", m.name());
        }
    }
}
