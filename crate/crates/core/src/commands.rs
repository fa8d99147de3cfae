//! Batch commands. Each one validates its inputs, computes everything in
//! memory, then writes its outputs; a failure leaves no output files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{
    add_noise, artifact_match, condition_curve, make_phantom, rel_error, ConditionCurve,
    MatchReport, PhantomSpec,
};
use crate::inversion::{reconstruct, SliceReport};
use crate::io::{read_sinogram, read_volume, write_atomic, write_json, write_sinogram, write_volume, Sidecar};
use crate::microlocal::{check_bolker, default_param_range, predict_artifact_curve, ArtifactCurve, BolkerReport};
use crate::operators::fft::axial_frequencies;
use crate::operators::forward::forward_project;

pub const SINOGRAM_FILE: &str = "sinogram.f64";
pub const PHANTOM_FILE: &str = "phantom.f64";
pub const VOLUME_FILE: &str = "volume.f64";
pub const RECON_REPORT_FILE: &str = "reconstruction.json";
pub const BOLKER_FILE: &str = "bolker.json";
pub const ARTIFACTS_FILE: &str = "artifacts.csv";

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    Ok(cfg.output_dir.clone())
}

fn sidecar(command: &str, cfg: &RunConfig) -> Sidecar {
    Sidecar::new(command, Some(cfg.family), cfg.to_json_value())
}

/// Phantom -> forward projection -> noise. Writes the sinogram and the
/// phantom; returns the sinogram path.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let grid = cfg.grid.volume()?;
    let sg = cfg.grid.sino()?;
    let phantom = make_phantom(&cfg.phantom, grid, cfg.grid.s_min, &sg.surface())?;
    let clean = forward_project(&phantom, &cfg.family, &sg)?;
    let noisy = add_noise(&clean, cfg.noise.gamma, cfg.noise.seed)?;
    let dir = out_dir(cfg)?;
    let side = sidecar("simulate", cfg);
    write_volume(&dir.join(PHANTOM_FILE), &phantom, side.clone())?;
    let path = dir.join(SINOGRAM_FILE);
    write_sinogram(&path, &noisy, side)?;
    Ok(path)
}

#[derive(Clone, Debug, Serialize)]
pub struct ReconstructionReport {
    pub family: String,
    pub imag_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub artifact_match: Option<MatchReport>,
    pub slices: Vec<SliceReport>,
}

/// Invert the sinogram at `sino_path`. With `truth`, the report carries the
/// relative error; with a delta phantom, the artifact match.
pub fn cmd_reconstruct(
    cfg: &RunConfig,
    sino_path: &Path,
    truth: Option<&Path>,
) -> Result<ReconstructionReport> {
    cfg.validate()?;
    let (sino, _) = read_sinogram(sino_path)?;
    let truth = truth.map(read_volume).transpose()?;
    let grid = cfg.grid.volume()?;
    if sino.grid != cfg.grid.sino()? {
        return Err(Error::Config(format!(
            "sinogram grid {:?} differs from the configured grid {:?}",
            sino.grid,
            cfg.grid.sino()?
        )));
    }
    let rec = reconstruct(&sino, &cfg.family, &cfg.inversion(), &grid)?;
    let rel = match &truth {
        Some((t, _)) => Some(rel_error(&rec.volume, t)?),
        None => None,
    };
    let matching = match cfg.phantom {
        PhantomSpec::Delta { .. } => {
            let source = delta_center(cfg)?;
            let curve = predict_artifact_curve(source, cfg.artifacts.theta_samples, &sino.grid.surface())?;
            Some(artifact_match(&rec.volume, &curve, &cfg.artifacts.matching))
        }
        _ => None,
    };
    let report = ReconstructionReport {
        family: cfg.family.name().to_string(),
        imag_norm: rec.imag_norm,
        rel_error: rel,
        artifact_match: matching,
        slices: rec.slices,
    };
    let dir = out_dir(cfg)?;
    write_volume(&dir.join(VOLUME_FILE), &rec.volume, sidecar("reconstruct", cfg))?;
    write_json(&dir.join(RECON_REPORT_FILE), &report)?;
    Ok(report)
}

/// Voxel center of the configured delta phantom.
fn delta_center(cfg: &RunConfig) -> Result<[f64; 3]> {
    let grid = cfg.grid.volume()?;
    let sg = cfg.grid.sino()?;
    let d = make_phantom(&cfg.phantom, grid, cfg.grid.s_min, &sg.surface())?;
    let (idx, _) = d
        .values
        .indexed_iter()
        .find(|(_, &v)| v != 0.0)
        .ok_or_else(|| Error::Precondition("delta phantom is empty".into()))?;
    Ok(grid.point([idx.0, idx.1, idx.2]))
}

pub fn cmd_check_bolker(cfg: &RunConfig) -> Result<BolkerReport> {
    cfg.validate()?;
    let profile = cfg.bolker.profile.clone().unwrap_or_else(|| cfg.family.profile());
    let range = cfg.bolker.param_range.unwrap_or_else(|| default_param_range(&profile));
    let report = check_bolker(&profile, range, cfg.bolker.x_resolution.unwrap_or(64), None)?;
    let dir = out_dir(cfg)?;
    write_json(&dir.join(BOLKER_FILE), &report)?;
    Ok(report)
}

/// Condition-number curves on the configured grids, `xi` over the full
/// axial band in ascending order. Writes `cond_<family>.csv` per family.
pub fn cmd_condnum(cfg: &RunConfig) -> Result<Vec<ConditionCurve>> {
    cfg.validate()?;
    let r = cfg.resolved();
    let n_t = r.condnum.n_t.expect("resolved");
    if n_t < 2 {
        return Err(Error::Config("condnum.n_t must be at least 2".into()));
    }
    let s: Vec<f64> = (0..n_t)
        .map(|i| cfg.grid.s_min + (cfg.grid.s_max - cfg.grid.s_min) * i as f64 / (n_t - 1) as f64)
        .collect();
    let z = cfg.grid.volume()?.z_axis();
    let mut xi = axial_frequencies(z.n, z.step());
    xi.sort_by(f64::total_cmp);
    let curves = r
        .condnum
        .families
        .iter()
        .map(|mu| condition_curve(mu, &s, &xi))
        .collect::<Result<Vec<_>>>()?;
    let dir = out_dir(cfg)?;
    for (mu, c) in r.condnum.families.iter().zip(&curves) {
        let path = dir.join(format!("cond_{}.csv", c.family));
        write_atomic(&path, c.to_csv().as_bytes())?;
        let side = Sidecar::new("condnum", Some(*mu), cfg.to_json_value());
        write_json(&path.with_extension("json"), &side)?;
    }
    Ok(curves)
}

pub fn artifacts_csv(curve: &ArtifactCurve) -> String {
    let mut out = String::from("theta,x1,x2,x3\n");
    for s in &curve.samples {
        out.push_str(&format!("{},{},{},{}\n", s.theta, s.point[0], s.point[1], s.point[2]));
    }
    out
}

/// Predicted mirror-artifact curve of the configured point (or delta).
pub fn cmd_predict_artifacts(cfg: &RunConfig) -> Result<ArtifactCurve> {
    cfg.validate()?;
    let point = match (cfg.artifacts.point, &cfg.phantom) {
        (Some(p), _) => p,
        (None, PhantomSpec::Delta { position }) => *position,
        (None, _) => {
            return Err(Error::Config(
                "artifacts.point is required unless the phantom is a delta".into(),
            ))
        }
    };
    let curve = predict_artifact_curve(point, cfg.artifacts.theta_samples, &cfg.grid.sino()?.surface())?;
    let dir = out_dir(cfg)?;
    let path = dir.join(ARTIFACTS_FILE);
    write_atomic(&path, artifacts_csv(&curve).as_bytes())?;
    write_json(&path.with_extension("json"), &sidecar("predict_artifacts", cfg))?;
    Ok(curve)
}
