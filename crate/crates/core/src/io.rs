//! Raw `.f64` arrays (little-endian, C order) with JSON sidecars.
//!
//! Files are written under a temporary name and renamed into place, so an
//! interrupted run never leaves a truncated output behind.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MuSpec;
use crate::operators::grid::{SinoGrid, Sinogram, Volume, VolumeGrid};

pub const FORMAT_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const FREQUENCY_CONVENTION: &str =
    "angular xi_k = 2 pi k / (n dz), k in FFT order; forward DFT unnormalized, inverse scaled by 1/n";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    Volume,
    Sinogram,
}

/// Metadata written next to every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u32,
    pub code_version: String,
    /// Producing command, e.g. `simulate`.
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub array: Option<ArrayMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<MuSpec>,
    pub frequency_convention: String,
    /// Full run configuration, enough to re-run the command.
    pub config: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayMeta {
    pub kind: ArrayKind,
    pub dtype: String,
    pub order: String,
    pub shape: Vec<usize>,
    pub axes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume_grid: Option<VolumeGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sino_grid: Option<SinoGrid>,
}

impl Sidecar {
    pub fn new(command: &str, family: Option<MuSpec>, config: serde_json::Value) -> Self {
        Sidecar {
            format_version: FORMAT_VERSION,
            code_version: CODE_VERSION.to_string(),
            command: command.to_string(),
            array: None,
            family,
            frequency_convention: FREQUENCY_CONVENTION.to_string(),
            config,
        }
    }

    pub fn for_volume(mut self, vol: &Volume) -> Self {
        self.array = Some(ArrayMeta {
            kind: ArrayKind::Volume,
            dtype: "f64le".into(),
            order: "C".into(),
            shape: vol.grid.shape().to_vec(),
            axes: vec!["x1".into(), "x2".into(), "x3".into()],
            volume_grid: Some(vol.grid),
            sino_grid: None,
        });
        self
    }

    pub fn for_sinogram(mut self, sino: &Sinogram) -> Self {
        self.array = Some(ArrayMeta {
            kind: ArrayKind::Sinogram,
            dtype: "f64le".into(),
            order: "C".into(),
            shape: sino.grid.shape().to_vec(),
            axes: vec!["s".into(), "theta".into(), "y3".into()],
            volume_grid: None,
            sino_grid: Some(sino.grid),
        });
        self
    }
}

/// `<stem>.json` for a data path `<stem>.<ext>`.
pub fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("json")
}

/// Write `bytes` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

fn encode(values: &Array3<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    // logical iteration order is C order whatever the memory layout
    for v in values.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode(path: &Path, shape: &[usize]) -> Result<Array3<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fmt = |detail: String| Error::Format {
        path: path.display().to_string(),
        detail,
    };
    if shape.len() != 3 {
        return Err(fmt(format!("expected a 3-d shape, got {shape:?}")));
    }
    let n: usize = shape.iter().product();
    if bytes.len() != n * 8 {
        return Err(fmt(format!(
            "{} bytes do not hold {n} f64 values of shape {shape:?}",
            bytes.len()
        )));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Array3::from_shape_vec((shape[0], shape[1], shape[2]), vals).map_err(|e| fmt(e.to_string()))
}

pub fn write_volume(path: &Path, vol: &Volume, sidecar: Sidecar) -> Result<()> {
    write_atomic(path, &encode(&vol.values))?;
    write_json(&sidecar_path(path), &sidecar.for_volume(vol))
}

pub fn write_sinogram(path: &Path, sino: &Sinogram, sidecar: Sidecar) -> Result<()> {
    write_atomic(path, &encode(&sino.values))?;
    write_json(&sidecar_path(path), &sidecar.for_sinogram(sino))
}

fn array_meta(path: &Path, side: &Sidecar, kind: ArrayKind) -> Result<ArrayMeta> {
    let fmt = |detail: String| Error::Format {
        path: sidecar_path(path).display().to_string(),
        detail,
    };
    if side.format_version != FORMAT_VERSION {
        return Err(fmt(format!(
            "format version {} is not supported (expected {FORMAT_VERSION})",
            side.format_version
        )));
    }
    let meta = side.array.clone().ok_or_else(|| fmt("sidecar has no array metadata".into()))?;
    if meta.kind != kind {
        return Err(fmt(format!("expected a {kind:?} array, found {:?}", meta.kind)));
    }
    Ok(meta)
}

pub fn read_volume(path: &Path) -> Result<(Volume, Sidecar)> {
    let side: Sidecar = read_json(&sidecar_path(path))?;
    let meta = array_meta(path, &side, ArrayKind::Volume)?;
    let grid = meta.volume_grid.ok_or_else(|| Error::Format {
        path: sidecar_path(path).display().to_string(),
        detail: "volume sidecar lacks volume_grid".into(),
    })?;
    let values = decode(path, &meta.shape)?;
    Ok((Volume::new(values, grid)?, side))
}

pub fn read_sinogram(path: &Path) -> Result<(Sinogram, Sidecar)> {
    let side: Sidecar = read_json(&sidecar_path(path))?;
    let meta = array_meta(path, &side, ArrayKind::Sinogram)?;
    let grid = meta.sino_grid.ok_or_else(|| Error::Format {
        path: sidecar_path(path).display().to_string(),
        detail: "sinogram sidecar lacks sino_grid".into(),
    })?;
    let values = decode(path, &meta.shape)?;
    Ok((Sinogram::new(values, grid)?, side))
}
