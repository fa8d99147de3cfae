//! Phantoms, noise, error metrics, condition-number curves and artifact
//! matching.

use nalgebra::DMatrix;
use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CenterSurface, MuSpec};
use crate::microlocal::ArtifactCurve;
use crate::operators::grid::{Sinogram, Volume, VolumeGrid};
use crate::operators::volterra::volterra_matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhantomSpec {
    /// Unit mass at the voxel center nearest `position`.
    Delta { position: [f64; 3] },
    /// Outer box minus the box shrunk by `wall` on every side.
    HollowCuboid {
        half_widths: [f64; 3],
        wall: f64,
        center: [f64; 3],
    },
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec::HollowCuboid {
            half_widths: [0.45, 0.45, 0.9],
            wall: 0.15,
            center: [0.0; 3],
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PhantomSpec::Delta { position } => {
                if position.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config("delta position must be finite".into()));
                }
            }
            PhantomSpec::HollowCuboid {
                half_widths,
                wall,
                center,
            } => {
                if half_widths.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
                    return Err(Error::Config(format!(
                        "cuboid half-widths must be positive, got {half_widths:?}"
                    )));
                }
                if !(*wall > 0.0) || center.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config(format!("cuboid wall must be positive, got {wall}")));
                }
            }
        }
        Ok(())
    }
}

/// Nearest voxel index to `p`, or `None` outside the grid.
fn nearest_voxel(grid: &VolumeGrid, p: [f64; 3]) -> Option<[usize; 3]> {
    let axes = [grid.xy_axis(), grid.xy_axis(), grid.z_axis()];
    let mut idx = [0usize; 3];
    for a in 0..3 {
        let r = axes[a].position(p[a]).round();
        if r < 0.0 || r > (axes[a].n - 1) as f64 {
            return None;
        }
        idx[a] = r as usize;
    }
    Some(idx)
}

/// Sample a phantom on `grid`; nonzero voxels must keep `margin` from the
/// cylinder.
pub fn make_phantom(
    spec: &PhantomSpec,
    grid: VolumeGrid,
    margin: f64,
    surface: &CenterSurface,
) -> Result<Volume> {
    spec.validate()?;
    let vol = match spec {
        PhantomSpec::Delta { position } => {
            let idx = nearest_voxel(&grid, *position).ok_or_else(|| {
                Error::Precondition(format!("delta at {position:?} lies outside the volume"))
            })?;
            let mut values = Array3::zeros(grid.shape());
            values[idx] = 1.0 / grid.voxel_volume();
            Volume::new(values, grid)?
        }
        PhantomSpec::HollowCuboid {
            half_widths,
            wall,
            center,
        } => {
            let tol = 1e-9 * (1.0 + grid.half_width_xy.max(grid.half_width_z));
            Volume::from_fn(grid, |p| {
                let d: Vec<f64> = (0..3).map(|a| (p[a] - center[a]).abs()).collect();
                let outer = (0..3).all(|a| d[a] <= half_widths[a] + tol);
                let inner = (0..3).all(|a| d[a] < half_widths[a] - wall - tol);
                if outer && !inner {
                    1.0
                } else {
                    0.0
                }
            })?
        }
    };
    vol.with_support_margin(margin, surface)
}

/// `sino + (gamma/100) (||sino|| / ||w||) w` with `w` standard normal from
/// ChaCha20 seeded by `seed`.
pub fn add_noise(sino: &Sinogram, gamma: f64, seed: u64) -> Result<Sinogram> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::Config(format!("noise level must be >= 0, got {gamma}")));
    }
    if gamma == 0.0 {
        return Ok(sino.clone());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let w = Array3::from_shape_simple_fn(sino.values.raw_dim(), || {
        StandardNormal.sample(&mut rng)
    });
    let wn = w.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
    if wn == 0.0 {
        return Ok(sino.clone());
    }
    let scale = gamma / 100.0 * sino.norm() / wn;
    Sinogram::new(&sino.values + &(w * scale), sino.grid)
}

/// `||rec - truth|| / ||truth||`.
pub fn rel_error(rec: &Volume, truth: &Volume) -> Result<f64> {
    if rec.grid != truth.grid {
        return Err(Error::Shape {
            expected: format!("{:?}", truth.grid),
            got: format!("{:?}", rec.grid),
        });
    }
    let tn = truth.norm();
    if tn == 0.0 {
        return Err(Error::UndefinedMetric("relative error of a zero ground truth".into()));
    }
    let d = rec
        .values
        .iter()
        .zip(truth.values.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(d / tn)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CondPoint {
    pub xi: f64,
    /// `+inf` when `V_xi` is numerically singular.
    pub cond: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCurve {
    pub family: String,
    pub points: Vec<CondPoint>,
}

impl ConditionCurve {
    pub fn peak(&self) -> f64 {
        self.points.iter().map(|p| p.cond).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Trapezoid area over the points sorted by `xi`.
    pub fn area(&self) -> f64 {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| a.xi.total_cmp(&b.xi));
        pts.windows(2)
            .map(|w| 0.5 * (w[1].xi - w[0].xi) * (w[0].cond + w[1].cond))
            .sum()
    }

    /// The curve restricted to `|xi| <= xi_max`.
    pub fn band(&self, xi_max: f64) -> ConditionCurve {
        ConditionCurve {
            family: self.family.clone(),
            points: self.points.iter().copied().filter(|p| p.xi.abs() <= xi_max).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("xi,cond\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.xi, p.cond));
        }
        out
    }
}

/// Spectral condition number; `+inf` once the smallest singular value is
/// below the rounding floor `n eps sigma_max`.
pub fn cond2(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if !(max > 0.0) || !(min > max * m.nrows() as f64 * f64::EPSILON) {
        return f64::INFINITY;
    }
    max / min
}

/// `cond2(V_xi)` for every `xi` in `xi_grid`.
pub fn condition_curve(mu: &MuSpec, s_grid: &[f64], xi_grid: &[f64]) -> Result<ConditionCurve> {
    let points = xi_grid
        .par_iter()
        .map(|&xi| {
            let v = volterra_matrix(mu, xi, s_grid)?;
            Ok(CondPoint {
                xi,
                cond: cond2(&v.entries),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionCurve {
        family: mu.name().to_string(),
        points,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    /// Maxima below `threshold` times the largest `|rec|` outside the
    /// exclusion ball are ignored.
    pub threshold: f64,
    /// Radius of the ball around the source, in voxels.
    pub exclusion_voxels: f64,
    /// Maxima farther than this from the curve and the source are off-curve.
    pub off_curve_voxels: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            threshold: 0.1,
            exclusion_voxels: 2.0,
            off_curve_voxels: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    /// Curve samples inside the volume.
    pub samples_in_volume: usize,
    /// Of those, samples within one voxel of an extracted maximum.
    pub samples_matched: usize,
    pub fraction: f64,
    pub maxima: Vec<[f64; 3]>,
    /// Median `|rec|` at the voxels nearest the curve samples.
    pub artifact_amplitude: f64,
    /// Maxima above half the artifact amplitude that are off the curve.
    pub off_curve_maxima: Vec<[f64; 3]>,
}

/// Ridge maxima: voxels at least as large as both neighbours along two or
/// more axes. A curve-shaped artifact is a ridge, so requiring a maximum in
/// all directions would miss most of it.
fn ridge_maxima(a: &Array3<f64>) -> Vec<[usize; 3]> {
    let sh = a.shape().to_vec();
    let mut out = Vec::new();
    for ((i, j, k), &v) in a.indexed_iter() {
        if v <= 0.0 {
            continue;
        }
        let idx = [i, j, k];
        let mut axes = 0;
        for ax in 0..3 {
            let mut ok = true;
            for d in [-1i64, 1] {
                let n = idx[ax] as i64 + d;
                if n >= 0 && (n as usize) < sh[ax] {
                    let mut nb = idx;
                    nb[ax] = n as usize;
                    if a[nb] > v {
                        ok = false;
                    }
                }
            }
            if ok {
                axes += 1;
            }
        }
        if axes >= 2 {
            out.push(idx);
        }
    }
    out
}

/// Compare local maxima of `|rec|` with a predicted mirror curve.
pub fn artifact_match(rec: &Volume, curve: &ArtifactCurve, opts: &MatchOptions) -> MatchReport {
    let g = rec.grid;
    let steps = [g.xy_axis().step(), g.xy_axis().step(), g.z_axis().step()];
    // distance in voxel units (Chebyshev), so "within one voxel" is per axis
    let vdist = |a: [f64; 3], b: [f64; 3]| {
        (0..3).map(|i| ((a[i] - b[i]) / steps[i]).abs()).fold(0.0, f64::max)
    };
    let abs = rec.values.mapv(f64::abs);
    let outside_ball = |p: [f64; 3]| vdist(p, curve.source) > opts.exclusion_voxels;
    let peak = abs
        .indexed_iter()
        .filter(|((i, j, k), _)| outside_ball(g.point([*i, *j, *k])))
        .map(|(_, &v)| v)
        .fold(0.0, f64::max);
    let maxima: Vec<[f64; 3]> = if peak > 0.0 {
        ridge_maxima(&abs)
            .into_iter()
            .filter(|&idx| abs[idx] >= opts.threshold * peak)
            .map(|idx| g.point(idx))
            .filter(|&p| outside_ball(p))
            .collect()
    } else {
        Vec::new()
    };
    let inside: Vec<[f64; 3]> = curve
        .samples
        .iter()
        .map(|s| s.point)
        .filter(|&p| nearest_voxel(&g, p).is_some())
        .collect();
    let matched = inside
        .iter()
        .filter(|&&p| maxima.iter().any(|&m| vdist(p, m) <= 1.0 + 1e-9))
        .count();
    let mut amps: Vec<f64> = inside
        .iter()
        .filter_map(|&p| nearest_voxel(&g, p).map(|idx| abs[idx]))
        .collect();
    amps.sort_by(f64::total_cmp);
    let amplitude = if amps.is_empty() { 0.0 } else { amps[amps.len() / 2] };
    let off_curve_maxima = if amplitude > 0.0 {
        ridge_maxima(&abs)
            .into_iter()
            .filter(|&idx| abs[idx] > 0.5 * amplitude)
            .map(|idx| g.point(idx))
            .filter(|&p| {
                vdist(p, curve.source) > opts.off_curve_voxels
                    && curve.samples.iter().all(|s| vdist(p, s.point) > opts.off_curve_voxels)
            })
            .collect()
    } else {
        Vec::new()
    };
    MatchReport {
        samples_in_volume: inside.len(),
        samples_matched: matched,
        fraction: if inside.is_empty() {
            0.0
        } else {
            matched as f64 / inside.len() as f64
        },
        maxima,
        artifact_amplitude: amplitude,
        off_curve_maxima,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microlocal::predict_artifact_curve;
    use crate::operators::forward::forward_project;
    use crate::operators::grid::SinoGrid;
    use proptest::prelude::*;

    fn grid() -> VolumeGrid {
        VolumeGrid::cube(33, 1.0, 5.0).unwrap()
    }

    #[test]
    fn delta_at_origin_is_one_center_voxel() {
        let g = grid();
        let d = make_phantom(&PhantomSpec::Delta { position: [0.01, -0.02, 0.03] }, g, 0.2, &CenterSurface::default()).unwrap();
        let nz: Vec<_> = d.values.indexed_iter().filter(|(_, &v)| v != 0.0).collect();
        assert_eq!(nz.len(), 1);
        assert_eq!(nz[0].0, (16, 16, 16));
        assert!((nz[0].1 * g.voxel_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn thick_wall_gives_solid_cuboid() {
        let spec = PhantomSpec::HollowCuboid {
            half_widths: [0.3, 0.3, 0.6],
            wall: 0.7,
            center: [0.0; 3],
        };
        let v = make_phantom(&spec, grid(), 0.2, &CenterSurface::default()).unwrap();
        let g = grid();
        for ((i, j, k), &val) in v.values.indexed_iter() {
            let p = g.point([i, j, k]);
            let inside = p[0].abs() <= 0.3 + 1e-9 && p[1].abs() <= 0.3 + 1e-9 && p[2].abs() <= 0.6 + 1e-9;
            assert_eq!(val, if inside { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn hollow_cuboid_volume_fraction() {
        let g = grid();
        let v = make_phantom(&PhantomSpec::default(), g, 0.2, &CenterSurface::default()).unwrap();
        let count = v.values.iter().filter(|&&x| x != 0.0).count() as f64;
        let voxels = count * g.voxel_volume();
        let outer = 8.0 * 0.45 * 0.45 * 0.9;
        let inner = 8.0 * 0.3 * 0.3 * 0.75;
        // one voxel layer on every face of both boxes
        let (dx, dz) = (g.xy_axis().step(), g.z_axis().step());
        let slack = 2.0 * (2.0 * 0.9 * 0.9 * 2.0 * dx + 0.9 * 0.9 * dz) + 2.0 * (2.0 * 0.6 * 1.5 * 2.0 * dx + 0.6 * 0.6 * dz);
        assert!((voxels - (outer - inner)).abs() <= slack, "{voxels} vs {}", outer - inner);
    }

    #[test]
    fn phantom_outside_margin_is_rejected() {
        let spec = PhantomSpec::Delta { position: [0.9, 0.0, 0.0] };
        assert!(matches!(
            make_phantom(&spec, grid(), 0.2, &CenterSurface::default()),
            Err(Error::Precondition(_))
        ));
    }

    fn small_sino() -> Sinogram {
        let g = VolumeGrid::cube(9, 1.0, 2.0).unwrap();
        let sg = SinoGrid::for_volume(&g, 0.2, 1.0, 8).unwrap();
        let vals = Array3::from_shape_fn(sg.shape(), |(i, j, k)| (i as f64 - 0.3 * j as f64 + 0.1 * k as f64).sin());
        Sinogram::new(vals, sg).unwrap()
    }

    #[test]
    fn noise_contract() {
        let s = small_sino();
        assert_eq!(add_noise(&s, 0.0, 7).unwrap(), s);
        for gamma in [1.0, 5.0, 10.0] {
            let n = add_noise(&s, gamma, 3).unwrap();
            let d = (&n.values - &s.values).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((d / s.norm() - gamma / 100.0).abs() <= 1e-14);
        }
        let a = add_noise(&s, 5.0, 11).unwrap();
        let b = add_noise(&s, 5.0, 11).unwrap();
        assert!(a.values.iter().zip(b.values.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(add_noise(&s, -1.0, 0).is_err());
    }

    #[test]
    fn rel_error_cases() {
        let g = grid();
        let t = make_phantom(&PhantomSpec::default(), g, 0.2, &CenterSurface::default()).unwrap();
        assert_eq!(rel_error(&t, &t).unwrap(), 0.0);
        assert_eq!(rel_error(&Volume::zeros(g).unwrap(), &t).unwrap(), 1.0);
        let two = Volume::new(&t.values * 2.0, g).unwrap();
        assert!((rel_error(&two, &t).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            rel_error(&t, &Volume::zeros(g).unwrap()),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn condition_curve_is_even_and_at_least_one() {
        let s: Vec<f64> = (0..41).map(|i| 0.2 + 0.05 * i as f64).collect();
        let xi = [-3.0, -1.0, 0.0, 1.0, 3.0];
        for mu in MuSpec::standard_families() {
            let c = condition_curve(&mu, &s, &xi).unwrap();
            for p in &c.points {
                assert!(p.cond >= 1.0);
            }
            for (a, b) in [(0, 4), (1, 3)] {
                let (x, y) = (c.points[a].cond, c.points[b].cond);
                assert!((x - y).abs() <= 1e-8 * x, "{x} {y}");
            }
        }
    }

    #[test]
    fn singular_matrix_reports_infinity() {
        let mut m = DMatrix::identity(4, 4);
        m[(2, 2)] = 0.0;
        assert_eq!(cond2(&m), f64::INFINITY);
        assert_eq!(cond2(&DMatrix::identity(3, 3)), 1.0);
    }

    #[test]
    fn curve_area_and_csv() {
        let c = ConditionCurve {
            family: "x".into(),
            points: vec![
                CondPoint { xi: 1.0, cond: 3.0 },
                CondPoint { xi: -1.0, cond: 3.0 },
                CondPoint { xi: 0.0, cond: 1.0 },
            ],
        };
        assert_eq!(c.area(), 4.0);
        assert_eq!(c.peak(), 3.0);
        assert!(c.to_csv().starts_with("xi,cond\n"));
    }

    #[test]
    fn painted_curve_matches_fully_and_zero_matches_nothing() {
        let g = VolumeGrid::cube(41, 2.5, 1.0).unwrap();
        let curve = predict_artifact_curve([0.3, 0.1, 0.0], 120, &CenterSurface::default()).unwrap();
        let mut vals = Array3::zeros(g.shape());
        for s in &curve.samples {
            if let Some(idx) = nearest_voxel(&g, s.point) {
                vals[idx] = 1.0;
            }
        }
        let rec = Volume::new(vals, g).unwrap();
        let rep = artifact_match(&rec, &curve, &MatchOptions::default());
        assert!(rep.samples_in_volume > 100);
        assert_eq!(rep.fraction, 1.0);
        assert!(rep.off_curve_maxima.is_empty());
        let zero = artifact_match(&Volume::zeros(g).unwrap(), &curve, &MatchOptions::default());
        assert_eq!(zero.fraction, 0.0);
        assert!(zero.maxima.is_empty());
    }

    #[test]
    fn hollow_cuboid_sinogram_is_quarter_turn_periodic() {
        let g = VolumeGrid::cube(17, 1.0, 5.0).unwrap();
        let v = make_phantom(&PhantomSpec::default(), g, 0.2, &CenterSurface::default()).unwrap();
        let sg = SinoGrid::for_volume(&g, 0.2, 2.2, 16).unwrap();
        let d = forward_project(&v, &MuSpec::Spheroid { c: 2.0 }, &sg).unwrap();
        let n = d.norm();
        for j in 0..16 {
            let q = (j + 4) % 16;
            for i in 0..sg.s.n {
                for k in 0..sg.y.n {
                    assert!((d.values[[i, j, k]] - d.values[[i, q, k]]).abs() <= 1e-10 * n);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn noise_norm_is_exact(gamma in 0.01f64..50.0, seed in any::<u64>()) {
            let s = small_sino();
            let n = add_noise(&s, gamma, seed).unwrap();
            let d = (&n.values - &s.values).iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((d / s.norm() - gamma / 100.0).abs() <= 1e-13 * (1.0 + gamma));
        }
    }
}
