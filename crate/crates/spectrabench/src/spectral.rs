//! Spectral indices and pseudo-image rendering.
//!
//! Six modalities are rendered from an aligned scene: two band composites
//! (true color, false color) and four colormapped normalized-difference
//! indices (NDVI, NDWI, NDMI-1, NDMI-2). Channel quantization is
//! `round(255 * c)` with ties away from zero everywhere, so rendered pixels
//! are reproducible byte-for-byte.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{
    band_unit_grid, BandId, MultiSpectralScene, NormalizationBounds, RasterError, UnitGrid,
};

/// The six pseudo-image modalities, in canonical presentation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalityKind {
    TrueColor,
    FalseColor,
    Ndvi,
    Ndwi,
    Ndmi1,
    Ndmi2,
}

impl ModalityKind {
    pub const ALL: [ModalityKind; 6] = [
        ModalityKind::TrueColor,
        ModalityKind::FalseColor,
        ModalityKind::Ndvi,
        ModalityKind::Ndwi,
        ModalityKind::Ndmi1,
        ModalityKind::Ndmi2,
    ];

    /// Bands consumed by this modality. For composites the order is the
    /// (R, G, B) channel assignment; for indices it is the (a, b) pair of
    /// the normalized difference.
    pub fn required_bands(&self) -> &'static [BandId] {
        match self {
            ModalityKind::TrueColor => &[BandId::B04, BandId::B03, BandId::B02],
            ModalityKind::FalseColor => &[BandId::B08, BandId::B04, BandId::B03],
            ModalityKind::Ndvi => &[BandId::B08, BandId::B04],
            ModalityKind::Ndwi => &[BandId::B03, BandId::B08],
            ModalityKind::Ndmi1 => &[BandId::B8A, BandId::B11],
            ModalityKind::Ndmi2 => &[BandId::B8A, BandId::B12],
        }
    }

    /// Short label used in prompt text.
    pub fn label(&self) -> &'static str {
        match self {
            ModalityKind::TrueColor => "RGB",
            ModalityKind::FalseColor => "False Color",
            ModalityKind::Ndvi => "NDVI",
            ModalityKind::Ndwi => "NDWI",
            ModalityKind::Ndmi1 => "NDMI-1",
            ModalityKind::Ndmi2 => "NDMI-2",
        }
    }

    /// Stable token used in file names and configs.
    pub fn token(&self) -> &'static str {
        match self {
            ModalityKind::TrueColor => "truecolor",
            ModalityKind::FalseColor => "falsecolor",
            ModalityKind::Ndvi => "ndvi",
            ModalityKind::Ndwi => "ndwi",
            ModalityKind::Ndmi1 => "ndmi1",
            ModalityKind::Ndmi2 => "ndmi2",
        }
    }

    /// Canonical one-line description naming every constituent band and the
    /// physical meaning of the rendering.
    pub fn descriptor(&self) -> &'static str {
        match self {
            ModalityKind::TrueColor => "RGB: Composited from B04, B03, B02",
            ModalityKind::FalseColor => "False Color: Composited from B08, B04, B03",
            ModalityKind::Ndvi => {
                "NDVI: Normalized Difference Vegetation Index (Red-Yellow-Green map) using B08, B04; \
                 high values represent green vegetation"
            }
            ModalityKind::Ndwi => {
                "NDWI: Normalized Difference Water Index (range -0.8 to 0.8) using B03, B08 \
                 with linear colormap [(1, 1, 1) to (0, 0, 1)]; high values indicate open water"
            }
            ModalityKind::Ndmi1 => {
                "NDMI-1: Moisture Index using B8A, B11 with linear colormap [(1, 0, 0) to (0, 0, 1)]; \
                 high values are indicative of moisture"
            }
            ModalityKind::Ndmi2 => {
                "NDMI-2: Moisture Index using B8A, B12 with linear colormap [(1, 0, 0) to (0, 0, 1)]; \
                 high values are indicative of moisture"
            }
        }
    }
}

impl fmt::Display for ModalityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ModalityKind {
    type Err = SpectralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModalityKind::ALL
            .iter()
            .find(|k| k.token() == s)
            .copied()
            .ok_or_else(|| SpectralError::UnknownModality(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("band {band} required by {kind} is missing from scene {scene_id}")]
    MissingBand {
        scene_id: String,
        kind: ModalityKind,
        band: BandId,
    },
    #[error("scene {scene_id} is not aligned to a common grid")]
    UnalignedScene { scene_id: String },
    #[error("grid dimensions differ: {a_width}x{a_height} vs {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: usize,
        a_height: usize,
        b_width: usize,
        b_height: usize,
    },
    #[error("unknown modality token: {0:?}")]
    UnknownModality(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("png encode failed: {0}")]
    PngEncode(String),
}

/// Row-major grid of normalized-difference values in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct IndexGrid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

/// Computes `(a - b) / (a + b)` per pixel over unit-interval grids.
/// Pixels where `a + b == 0` map to 0 so the output stays within [-1, 1].
pub fn normalized_difference(a: &UnitGrid, b: &UnitGrid) -> Result<IndexGrid, SpectralError> {
    if a.width != b.width || a.height != b.height {
        return Err(SpectralError::DimensionMismatch {
            a_width: a.width,
            a_height: a.height,
            b_width: b.width,
            b_height: b.height,
        });
    }
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| {
            let sum = x + y;
            if sum > 0.0 {
                (x - y) / sum
            } else {
                0.0
            }
        })
        .collect();
    Ok(IndexGrid {
        width: a.width,
        height: a.height,
        values,
    })
}

/// Two-stop linear colormap over a value domain. Values outside the domain
/// clamp to the endpoint colors.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearColormap {
    pub start_color: [f32; 3],
    pub end_color: [f32; 3],
    pub domain_lo: f32,
    pub domain_hi: f32,
}

impl LinearColormap {
    pub fn new(start_color: [f32; 3], end_color: [f32; 3], domain_lo: f32, domain_hi: f32) -> Self {
        assert!(domain_hi > domain_lo, "colormap domain must be non-empty");
        Self {
            start_color,
            end_color,
            domain_lo,
            domain_hi,
        }
    }

    /// NDWI map: white to blue over [-0.8, 0.8].
    pub fn ndwi() -> Self {
        Self::new([1.0, 1.0, 1.0], [0.0, 0.0, 1.0], -0.8, 0.8)
    }

    /// NDMI map: red to blue over the full index range [-1, 1].
    pub fn ndmi() -> Self {
        Self::new([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], -1.0, 1.0)
    }

    pub fn color_at(&self, v: f32) -> [u8; 3] {
        let t = ((v - self.domain_lo) / (self.domain_hi - self.domain_lo)).clamp(0.0, 1.0);
        lerp_quantize(self.start_color, self.end_color, t)
    }
}

/// Piecewise-linear colormap through ordered stops. Used for the three-stop
/// NDVI map (red at -1, yellow at 0, green at +1).
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedColormap {
    pub stops: Vec<(f32, [f32; 3])>,
}

impl SegmentedColormap {
    pub fn new(stops: Vec<(f32, [f32; 3])>) -> Self {
        assert!(stops.len() >= 2, "need at least two stops");
        assert!(
            stops.windows(2).all(|w| w[1].0 > w[0].0),
            "stops must be strictly increasing"
        );
        Self { stops }
    }

    /// Red-Yellow-Green NDVI map over [-1, 1].
    pub fn ndvi() -> Self {
        Self::new(vec![
            (-1.0, [1.0, 0.0, 0.0]),
            (0.0, [1.0, 1.0, 0.0]),
            (1.0, [0.0, 1.0, 0.0]),
        ])
    }

    pub fn color_at(&self, v: f32) -> [u8; 3] {
        let first = &self.stops[0];
        let last = &self.stops[self.stops.len() - 1];
        if v <= first.0 {
            return quantize_color(first.1);
        }
        if v >= last.0 {
            return quantize_color(last.1);
        }
        let seg = self
            .stops
            .windows(2)
            .find(|w| v <= w[1].0)
            .expect("value inside stop range");
        let (lo, start) = seg[0];
        let (hi, end) = seg[1];
        let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        lerp_quantize(start, end, t)
    }
}

fn lerp_quantize(start: [f32; 3], end: [f32; 3], t: f32) -> [u8; 3] {
    [
        quantize_channel(start[0] + t * (end[0] - start[0])),
        quantize_channel(start[1] + t * (end[1] - start[1])),
        quantize_channel(start[2] + t * (end[2] - start[2])),
    ]
}

/// `round(255 * c)`, half away from zero, clamped to u8.
#[inline]
pub fn quantize_channel(c: f32) -> u8 {
    (255.0 * c).round().clamp(0.0, 255.0) as u8
}

fn quantize_color(c: [f32; 3]) -> [u8; 3] {
    [
        quantize_channel(c[0]),
        quantize_channel(c[1]),
        quantize_channel(c[2]),
    ]
}

/// Maps an index grid through a linear colormap into an interleaved RGB buffer.
pub fn apply_colormap(index: &IndexGrid, map: &LinearColormap) -> Vec<u8> {
    let mut pixels = Vec::with_capacity(index.values.len() * 3);
    for &v in &index.values {
        pixels.extend_from_slice(&map.color_at(v));
    }
    pixels
}

fn apply_segmented_colormap(index: &IndexGrid, map: &SegmentedColormap) -> Vec<u8> {
    let mut pixels = Vec::with_capacity(index.values.len() * 3);
    for &v in &index.values {
        pixels.extend_from_slice(&map.color_at(v));
    }
    pixels
}

/// An 8-bit RGB rendering of one modality, plus its descriptor text.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoImage {
    pub kind: ModalityKind,
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB, row-major, length `width * height * 3`.
    pub pixels: Vec<u8>,
    pub descriptor: String,
}

impl PseudoImage {
    /// Encodes the image as an 8-bit RGB PNG without alpha.
    pub fn png_bytes(&self) -> Result<Vec<u8>, SpectralError> {
        let mut out = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            encoder.set_color(png::ColorType::Rgb);
            encoder.set_depth(png::BitDepth::Eight);
            let mut writer = encoder
                .write_header()
                .map_err(|e| SpectralError::PngEncode(e.to_string()))?;
            writer
                .write_image_data(&self.pixels)
                .map_err(|e| SpectralError::PngEncode(e.to_string()))?;
        }
        Ok(out)
    }

    /// Writes `<scene_id>_<kind>.png` under `dir` and returns the path.
    pub fn write_png(
        &self,
        dir: &Path,
        scene_id: &str,
    ) -> Result<std::path::PathBuf, SpectralError> {
        let path = dir.join(format!("{}_{}.png", scene_id, self.kind.token()));
        let bytes = self.png_bytes()?;
        let mut file = std::fs::File::create(&path)
            .map_err(|e| SpectralError::PngEncode(format!("{}: {e}", path.display())))?;
        file.write_all(&bytes)
            .map_err(|e| SpectralError::PngEncode(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

fn check_dependencies(scene: &MultiSpectralScene, kind: ModalityKind) -> Result<(), SpectralError> {
    for &band in kind.required_bands() {
        let raster = scene.band(band).ok_or(SpectralError::MissingBand {
            scene_id: scene.scene_id.clone(),
            kind,
            band,
        })?;
        if raster.width != scene.grid_width || raster.height != scene.grid_height {
            return Err(SpectralError::UnalignedScene {
                scene_id: scene.scene_id.clone(),
            });
        }
    }
    Ok(())
}

/// Renders a band composite: channels are the kind's band triple in listed
/// order, each normalized then scaled to [0, 255].
pub fn render_composite(
    scene: &MultiSpectralScene,
    kind: ModalityKind,
    bounds: &NormalizationBounds,
) -> Result<PseudoImage, SpectralError> {
    assert!(
        matches!(kind, ModalityKind::TrueColor | ModalityKind::FalseColor),
        "render_composite only handles band composites"
    );
    check_dependencies(scene, kind)?;
    let bands = kind.required_bands();
    let r = band_unit_grid(scene, bands[0], bounds)?;
    let g = band_unit_grid(scene, bands[1], bounds)?;
    let b = band_unit_grid(scene, bands[2], bounds)?;
    let mut pixels = Vec::with_capacity(r.values.len() * 3);
    for i in 0..r.values.len() {
        pixels.push(quantize_channel(r.values[i]));
        pixels.push(quantize_channel(g.values[i]));
        pixels.push(quantize_channel(b.values[i]));
    }
    Ok(PseudoImage {
        kind,
        width: scene.grid_width,
        height: scene.grid_height,
        pixels,
        descriptor: kind.descriptor().to_string(),
    })
}

fn render_index(
    scene: &MultiSpectralScene,
    kind: ModalityKind,
    bounds: &NormalizationBounds,
) -> Result<PseudoImage, SpectralError> {
    check_dependencies(scene, kind)?;
    let bands = kind.required_bands();
    let a = band_unit_grid(scene, bands[0], bounds)?;
    let b = band_unit_grid(scene, bands[1], bounds)?;
    let index = normalized_difference(&a, &b)?;
    let pixels = match kind {
        ModalityKind::Ndvi => apply_segmented_colormap(&index, &SegmentedColormap::ndvi()),
        ModalityKind::Ndwi => apply_colormap(&index, &LinearColormap::ndwi()),
        ModalityKind::Ndmi1 | ModalityKind::Ndmi2 => {
            apply_colormap(&index, &LinearColormap::ndmi())
        }
        _ => unreachable!("composites do not take the index path"),
    };
    Ok(PseudoImage {
        kind,
        width: index.width,
        height: index.height,
        pixels,
        descriptor: kind.descriptor().to_string(),
    })
}

/// Renders one modality from an aligned scene.
pub fn render_modality(
    scene: &MultiSpectralScene,
    kind: ModalityKind,
    bounds: &NormalizationBounds,
) -> Result<PseudoImage, SpectralError> {
    match kind {
        ModalityKind::TrueColor | ModalityKind::FalseColor => render_composite(scene, kind, bounds),
        _ => render_index(scene, kind, bounds),
    }
}

/// Renders a set of modalities in canonical order.
pub fn render_modalities(
    scene: &MultiSpectralScene,
    kinds: &[ModalityKind],
    bounds: &NormalizationBounds,
) -> Result<Vec<PseudoImage>, SpectralError> {
    let mut ordered: Vec<ModalityKind> = kinds.to_vec();
    ordered.sort();
    ordered.dedup();
    ordered
        .into_iter()
        .map(|kind| render_modality(scene, kind, bounds))
        .collect()
}
