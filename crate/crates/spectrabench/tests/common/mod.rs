//! Shared fixtures for the integration suites: synthetic scenes on disk in
//! the flat-matrix format, in-memory aligned scenes, and toy datasets.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectrabench::raster::{write_band_file, BandId, BandRaster, MultiSpectralScene};

pub fn synthetic_values(rng: &mut ChaCha8Rng, len: usize, max: u16) -> Vec<u16> {
    (0..len).map(|_| rng.gen_range(0..=max)).collect()
}

/// Pre-aligned 12-band scene held in memory; every band sits on the same
/// `w` x `h` grid.
pub fn aligned_scene(scene_id: &str, w: usize, h: usize, seed: u64) -> MultiSpectralScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bands = Vec::new();
    for (i, id) in BandId::ALL.iter().enumerate() {
        // One constant band per third scene exercises the min==max rule.
        let values = if seed.is_multiple_of(3) && i == 9 {
            vec![1500u16; w * h]
        } else {
            synthetic_values(&mut rng, w * h, 3000)
        };
        let mut raster = BandRaster::new(*id, w, h, values);
        raster.resolution = 10;
        bands.push(raster);
    }
    MultiSpectralScene::from_bands(scene_id, bands)
}

/// Writes a native-resolution 12-band scene (10 m bands at `grid`,
/// 20 m at `grid`/2, 60 m at `grid`/6) plus its manifest. `grid` must be a
/// multiple of 6. Returns the manifest path.
pub fn write_scene(dir: &Path, scene_id: &str, grid: usize, seed: u64) -> PathBuf {
    assert_eq!(grid % 6, 0, "grid must be a multiple of 6");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fs::create_dir_all(dir).unwrap();
    let mut manifest_bands = String::new();
    for (i, id) in BandId::ALL.iter().enumerate() {
        let side = grid / (id.native_resolution() as usize / 10);
        let values = synthetic_values(&mut rng, side * side, 3000);
        let raster = BandRaster::new(*id, side, side, values);
        let file = format!("{}_{}.raw", scene_id, id.code().to_lowercase());
        write_band_file(&dir.join(&file), &raster).unwrap();
        if i > 0 {
            manifest_bands.push(',');
        }
        let _ = write!(
            manifest_bands,
            r#"{{"band":"{}","path":"{}"}}"#,
            id.code(),
            file
        );
    }
    let manifest = format!(r#"{{"scene_id":"{scene_id}","bands":[{manifest_bands}]}}"#);
    let path = dir.join(format!("{scene_id}.json"));
    fs::write(&path, manifest).unwrap();
    path
}

pub const ML_CLASSES: [&str; 4] = ["Forest", "Water", "Urban", "Cropland"];
pub const MC_CLASSES: [&str; 4] = ["Forest", "River", "Highway", "Residential"];

pub fn multilabel_vocab_json() -> String {
    let classes: Vec<String> = ML_CLASSES
        .iter()
        .map(|name| format!(r#"{{"name":"{name}","definition":"definition of {name}"}}"#))
        .collect();
    format!(
        r#"{{"task":"multi-label","classes":[{}]}}"#,
        classes.join(",")
    )
}

pub fn multiclass_vocab_json() -> String {
    let classes: Vec<String> = MC_CLASSES
        .iter()
        .map(|name| format!(r#"{{"name":"{name}","definition":"definition of {name}"}}"#))
        .collect();
    format!(
        r#"{{"task":"multi-class","classes":[{}]}}"#,
        classes.join(",")
    )
}

/// Ground truth for multi-label sample `i`: one or two classes, cycling.
pub fn ml_truth(i: usize) -> Vec<String> {
    let a = ML_CLASSES[i % ML_CLASSES.len()].to_string();
    if i.is_multiple_of(2) {
        let b = ML_CLASSES[(i + 1) % ML_CLASSES.len()].to_string();
        vec![a, b]
    } else {
        vec![a]
    }
}

pub fn mc_truth(i: usize) -> Vec<String> {
    vec![MC_CLASSES[i % MC_CLASSES.len()].to_string()]
}

/// Writes `n` scenes, a vocabulary, and an index CSV under `dir`. Returns
/// (index path, vocabulary path).
pub fn write_dataset(dir: &Path, n: usize, multilabel: bool) -> (PathBuf, PathBuf) {
    let scenes = dir.join("scenes");
    fs::create_dir_all(&scenes).unwrap();
    let mut index = String::from("sample_id,manifest,labels\n");
    for i in 0..n {
        let scene_id = format!("scene{i:03}");
        write_scene(&scenes, &scene_id, 12, 1000 + i as u64);
        let truth = if multilabel { ml_truth(i) } else { mc_truth(i) };
        let _ = writeln!(
            index,
            "{scene_id},scenes/{scene_id}.json,{}",
            truth.join(";")
        );
    }
    let index_path = dir.join("index.csv");
    fs::write(&index_path, index).unwrap();
    let vocab_path = dir.join("vocab.json");
    let vocab = if multilabel {
        multilabel_vocab_json()
    } else {
        multiclass_vocab_json()
    };
    fs::write(&vocab_path, vocab).unwrap();
    (index_path, vocab_path)
}
