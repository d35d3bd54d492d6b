//! Scene ingestion, band alignment, and reflectance normalization.
//!
//! A scene is a set of single-band rasters keyed by Sentinel-2 band id.
//! Bands arrive at their native ground resolution (10/20/60 m) and are
//! brought onto a common grid with [`align_to_common_grid`] before any
//! rendering. The mandatory on-disk band format is a flat little-endian
//! u16 matrix with a JSON sidecar at `<payload>.json`; other decoders can
//! be plugged in through [`BandFileDecoder`].

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentinel-2 L2A band identifiers. B10 is absent from L2A products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BandId {
    B01,
    B02,
    B03,
    B04,
    B05,
    B06,
    B07,
    B08,
    B8A,
    B09,
    B11,
    B12,
}

impl BandId {
    /// All twelve band ids, in ascending code order.
    pub const ALL: [BandId; 12] = [
        BandId::B01,
        BandId::B02,
        BandId::B03,
        BandId::B04,
        BandId::B05,
        BandId::B06,
        BandId::B07,
        BandId::B08,
        BandId::B8A,
        BandId::B09,
        BandId::B11,
        BandId::B12,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            BandId::B01 => "B01",
            BandId::B02 => "B02",
            BandId::B03 => "B03",
            BandId::B04 => "B04",
            BandId::B05 => "B05",
            BandId::B06 => "B06",
            BandId::B07 => "B07",
            BandId::B08 => "B08",
            BandId::B8A => "B8A",
            BandId::B09 => "B09",
            BandId::B11 => "B11",
            BandId::B12 => "B12",
        }
    }

    /// Catalog ground resolution in meters per pixel.
    pub fn native_resolution(&self) -> u32 {
        match self {
            BandId::B02 | BandId::B03 | BandId::B04 | BandId::B08 => 10,
            BandId::B05 | BandId::B06 | BandId::B07 | BandId::B8A | BandId::B11 | BandId::B12 => 20,
            BandId::B01 | BandId::B09 => 60,
        }
    }
}

impl fmt::Display for BandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for BandId {
    type Err = RasterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BandId::ALL
            .iter()
            .find(|b| b.code() == s)
            .copied()
            .ok_or_else(|| RasterError::UnknownBandCode(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("decode error in {path}: {reason}")]
    DecodeError { path: PathBuf, reason: String },
    #[error("band {0} listed more than once")]
    DuplicateBand(BandId),
    #[error("unknown band code: {0:?}")]
    UnknownBandCode(String),
    #[error("incompatible geometry for band {band}: {detail}")]
    IncompatibleGeometry { band: BandId, detail: String },
    #[error("degenerate normalization range: lo={lo}, hi={hi}")]
    DegenerateRange { lo: f32, hi: f32 },
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// One band's raster grid. `resolution` is the catalog-native value right
/// after loading and the target value after alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct BandRaster {
    pub band: BandId,
    pub width: usize,
    pub height: usize,
    pub values: Vec<u16>,
    pub resolution: u32,
}

impl BandRaster {
    pub fn new(band: BandId, width: usize, height: usize, values: Vec<u16>) -> Self {
        assert_eq!(values.len(), width * height, "values must fill the grid");
        Self {
            band,
            width,
            height,
            values,
            resolution: band.native_resolution(),
        }
    }

    pub fn min_max(&self) -> Option<(u16, u16)> {
        let mut it = self.values.iter();
        let first = *it.next()?;
        let mut lo = first;
        let mut hi = first;
        for &v in it {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        Some((lo, hi))
    }
}

/// Row-major grid of values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct UnitGrid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

/// A multi-band scene. `grid_width`/`grid_height` track the finest grid among
/// the stored bands; every band matches them once the scene is aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSpectralScene {
    pub scene_id: String,
    pub bands: BTreeMap<BandId, BandRaster>,
    pub grid_width: usize,
    pub grid_height: usize,
}

impl MultiSpectralScene {
    pub fn from_bands(scene_id: impl Into<String>, bands: Vec<BandRaster>) -> Self {
        let mut map = BTreeMap::new();
        let mut gw = 0;
        let mut gh = 0;
        for raster in bands {
            gw = gw.max(raster.width);
            gh = gh.max(raster.height);
            map.insert(raster.band, raster);
        }
        Self {
            scene_id: scene_id.into(),
            bands: map,
            grid_width: gw,
            grid_height: gh,
        }
    }

    pub fn band(&self, id: BandId) -> Option<&BandRaster> {
        self.bands.get(&id)
    }

    /// True when every stored band sits on the common grid.
    pub fn is_aligned(&self) -> bool {
        self.bands
            .values()
            .all(|r| r.width == self.grid_width && r.height == self.grid_height)
    }
}

// ---------------------------------------------------------------------------
// Manifest + flat-matrix ingestion
// ---------------------------------------------------------------------------

/// Parsed scene manifest, band codes validated against [`BandId`].
#[derive(Debug, Clone)]
pub struct SceneManifest {
    pub scene_id: String,
    pub bands: Vec<(BandId, PathBuf)>,
}

#[derive(Deserialize)]
struct ManifestDoc {
    scene_id: String,
    bands: Vec<ManifestBandDoc>,
}

#[derive(Deserialize)]
struct ManifestBandDoc {
    band: String,
    path: PathBuf,
}

/// Parses and validates the manifest JSON: `{"scene_id": ..., "bands": [{"band": "B04", "path": ...}]}`.
///
/// Rejects unknown band codes and duplicate listings; band files are not
/// touched here.
pub fn parse_manifest_json(json: &str) -> Result<SceneManifest, RasterError> {
    let doc: ManifestDoc = serde_json::from_str(json).map_err(|e| RasterError::DecodeError {
        path: PathBuf::from("<manifest>"),
        reason: e.to_string(),
    })?;
    let mut bands = Vec::with_capacity(doc.bands.len());
    let mut seen = BTreeMap::new();
    for entry in doc.bands {
        let id = BandId::from_str(&entry.band)?;
        if seen.insert(id, ()).is_some() {
            return Err(RasterError::DuplicateBand(id));
        }
        bands.push((id, entry.path));
    }
    Ok(SceneManifest {
        scene_id: doc.scene_id,
        bands,
    })
}

/// Sidecar for the flat-matrix band format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatMatrixSidecar {
    pub width: usize,
    pub height: usize,
    pub dtype: String,
    pub order: String,
}

/// Decodes a flat-matrix band: JSON sidecar text plus the raw little-endian
/// u16 payload. Rejects dtype/order mismatches and short or oversized payloads.
pub fn decode_flat_matrix(
    sidecar_json: &str,
    payload: &[u8],
) -> Result<(usize, usize, Vec<u16>), RasterError> {
    let err = |reason: String| RasterError::DecodeError {
        path: PathBuf::from("<flat-matrix>"),
        reason,
    };
    let sidecar: FlatMatrixSidecar =
        serde_json::from_str(sidecar_json).map_err(|e| err(e.to_string()))?;
    if sidecar.dtype != "u16" {
        return Err(err(format!("unsupported dtype {:?}", sidecar.dtype)));
    }
    if sidecar.order != "row-major" {
        return Err(err(format!("unsupported order {:?}", sidecar.order)));
    }
    let expected = sidecar
        .width
        .checked_mul(sidecar.height)
        .and_then(|n| n.checked_mul(2))
        .ok_or_else(|| err("grid dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(err(format!(
            "payload length {} does not match {}x{} u16 grid ({} bytes)",
            payload.len(),
            sidecar.width,
            sidecar.height,
            expected
        )));
    }
    let values = payload
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    Ok((sidecar.width, sidecar.height, values))
}

/// Decodes one band file into a raster grid.
pub trait BandFileDecoder {
    fn decode(&self, band: BandId, path: &Path) -> Result<BandRaster, RasterError>;
}

/// The mandatory format: raw little-endian u16 payload at `path`, JSON
/// sidecar at `<path>.json`.
pub struct FlatMatrixDecoder;

fn sidecar_path(payload: &Path) -> PathBuf {
    let mut name = payload.as_os_str().to_os_string();
    name.push(".json");
    PathBuf::from(name)
}

impl BandFileDecoder for FlatMatrixDecoder {
    fn decode(&self, band: BandId, path: &Path) -> Result<BandRaster, RasterError> {
        let sidecar = sidecar_path(path);
        if !path.exists() {
            return Err(RasterError::MissingFile(path.to_path_buf()));
        }
        if !sidecar.exists() {
            return Err(RasterError::MissingFile(sidecar));
        }
        let sidecar_json = fs::read_to_string(&sidecar).map_err(|e| RasterError::Io {
            path: sidecar.clone(),
            source: e,
        })?;
        let payload = fs::read(path).map_err(|e| RasterError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let (width, height, values) =
            decode_flat_matrix(&sidecar_json, &payload).map_err(|e| match e {
                RasterError::DecodeError { reason, .. } => RasterError::DecodeError {
                    path: path.to_path_buf(),
                    reason,
                },
                other => other,
            })?;
        Ok(BandRaster::new(band, width, height, values))
    }
}

/// Writes a band raster in the flat-matrix format (payload + sidecar).
pub fn write_band_file(path: &Path, raster: &BandRaster) -> Result<(), RasterError> {
    let mut payload = Vec::with_capacity(raster.values.len() * 2);
    for v in &raster.values {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let sidecar = FlatMatrixSidecar {
        width: raster.width,
        height: raster.height,
        dtype: "u16".into(),
        order: "row-major".into(),
    };
    let io_err = |path: &Path, e: std::io::Error| RasterError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    fs::write(path, &payload).map_err(|e| io_err(path, e))?;
    let sc_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&sc_path, json).map_err(|e| io_err(&sc_path, e))?;
    Ok(())
}

/// Loads a scene from a manifest file using the flat-matrix decoder.
/// Band paths are resolved relative to the manifest's directory.
pub fn load_scene(manifest_path: &Path) -> Result<MultiSpectralScene, RasterError> {
    load_scene_with_decoder(manifest_path, &FlatMatrixDecoder)
}

/// As [`load_scene`] but with a caller-supplied band decoder.
pub fn load_scene_with_decoder(
    manifest_path: &Path,
    decoder: &dyn BandFileDecoder,
) -> Result<MultiSpectralScene, RasterError> {
    if !manifest_path.exists() {
        return Err(RasterError::MissingFile(manifest_path.to_path_buf()));
    }
    let json = fs::read_to_string(manifest_path).map_err(|e| RasterError::Io {
        path: manifest_path.to_path_buf(),
        source: e,
    })?;
    let manifest = parse_manifest_json(&json).map_err(|e| match e {
        RasterError::DecodeError { reason, .. } => RasterError::DecodeError {
            path: manifest_path.to_path_buf(),
            reason,
        },
        other => other,
    })?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut bands = Vec::with_capacity(manifest.bands.len());
    for (id, rel) in &manifest.bands {
        let path = if rel.is_absolute() {
            rel.clone()
        } else {
            base.join(rel)
        };
        bands.push(decoder.decode(*id, &path)?);
    }
    Ok(MultiSpectralScene::from_bands(manifest.scene_id, bands))
}

// ---------------------------------------------------------------------------
// Alignment
// ---------------------------------------------------------------------------

/// Upsamples every band onto the target grid by nearest-neighbor pixel
/// replication. A band already at the target resolution passes through
/// unchanged. The replication factor is `resolution / target`, which must be
/// a whole number, and all bands must land on one common grid.
pub fn align_to_common_grid(
    scene: &MultiSpectralScene,
    target_resolution: u32,
) -> Result<MultiSpectralScene, RasterError> {
    assert!(target_resolution > 0, "target resolution must be positive");
    let mut aligned: Vec<BandRaster> = Vec::with_capacity(scene.bands.len());
    let mut common: Option<(usize, usize)> = None;
    for raster in scene.bands.values() {
        if raster.resolution % target_resolution != 0 {
            return Err(RasterError::IncompatibleGeometry {
                band: raster.band,
                detail: format!(
                    "resolution {} m is not an integer multiple of target {} m",
                    raster.resolution, target_resolution
                ),
            });
        }
        let factor = (raster.resolution / target_resolution) as usize;
        let out = if factor == 1 {
            let mut r = raster.clone();
            r.resolution = target_resolution;
            r
        } else {
            replicate(raster, factor, target_resolution)
        };
        match common {
            None => common = Some((out.width, out.height)),
            Some((w, h)) => {
                if out.width != w || out.height != h {
                    return Err(RasterError::IncompatibleGeometry {
                        band: out.band,
                        detail: format!(
                            "aligned to {}x{} but the scene grid is {}x{}",
                            out.width, out.height, w, h
                        ),
                    });
                }
            }
        }
        aligned.push(out);
    }
    let (gw, gh) = common.unwrap_or((0, 0));
    let mut map = BTreeMap::new();
    for r in aligned {
        map.insert(r.band, r);
    }
    Ok(MultiSpectralScene {
        scene_id: scene.scene_id.clone(),
        bands: map,
        grid_width: gw,
        grid_height: gh,
    })
}

fn replicate(raster: &BandRaster, factor: usize, target_resolution: u32) -> BandRaster {
    let out_w = raster.width * factor;
    let out_h = raster.height * factor;
    let mut values = Vec::with_capacity(out_w * out_h);
    for row in 0..out_h {
        let src_row = row / factor;
        for col in 0..out_w {
            let src_col = col / factor;
            values.push(raster.values[src_row * raster.width + src_col]);
        }
    }
    BandRaster {
        band: raster.band,
        width: out_w,
        height: out_h,
        values,
        resolution: target_resolution,
    }
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// How normalization bounds are chosen when rendering.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum NormalizationBounds {
    /// Per-band min/max over the scene's own values. A constant band maps
    /// entirely to 0.
    #[default]
    PerScene,
    /// Fixed `lo`/`hi` digital numbers, with optional per-band overrides.
    Fixed {
        lo: f32,
        hi: f32,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        per_band: BTreeMap<BandId, (f32, f32)>,
    },
}

impl NormalizationBounds {
    fn for_band(&self, raster: &BandRaster) -> Option<(f32, f32)> {
        match self {
            NormalizationBounds::PerScene => {
                let (lo, hi) = raster.min_max()?;
                Some((lo as f32, hi as f32))
            }
            NormalizationBounds::Fixed { lo, hi, per_band } => {
                Some(per_band.get(&raster.band).copied().unwrap_or((*lo, *hi)))
            }
        }
    }
}

/// Maps each value to `clamp((v - lo) / (hi - lo), 0, 1)`.
pub fn normalize_band(raster: &BandRaster, lo: f32, hi: f32) -> Result<UnitGrid, RasterError> {
    if hi <= lo {
        return Err(RasterError::DegenerateRange { lo, hi });
    }
    let values = raster
        .values
        .iter()
        .map(|&v| ((v as f32 - lo) / (hi - lo)).clamp(0.0, 1.0))
        .collect();
    Ok(UnitGrid {
        width: raster.width,
        height: raster.height,
        values,
    })
}

/// Normalizes one scene band under the given bounds mode. Under per-scene
/// bounds a constant band maps to all zeros instead of erroring, so index
/// math never sees NaN.
pub fn band_unit_grid(
    scene: &MultiSpectralScene,
    band: BandId,
    bounds: &NormalizationBounds,
) -> Result<UnitGrid, RasterError> {
    let raster = scene
        .band(band)
        .ok_or_else(|| RasterError::IncompatibleGeometry {
            band,
            detail: "band not present in scene".into(),
        })?;
    let (lo, hi) = bounds.for_band(raster).unwrap_or((0.0, 0.0));
    if hi <= lo {
        if matches!(bounds, NormalizationBounds::PerScene) {
            return Ok(UnitGrid {
                width: raster.width,
                height: raster.height,
                values: vec![0.0; raster.values.len()],
            });
        }
        return Err(RasterError::DegenerateRange { lo, hi });
    }
    normalize_band(raster, lo, hi)
}
