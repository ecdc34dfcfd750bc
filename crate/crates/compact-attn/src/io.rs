//! Reading and writing the on-disk formats.
//!
//! * tensors: `CTF1` files;
//! * attention config: JSON, e.g. `{"p":128,"s":3,"lambda":0.9,"eps":1e-12,"seed":42}`
//!   (missing fields take their defaults);
//! * encoder weights: a directory with `encoder.json` plus
//!   `layer{i}_kernel.ctf` / `layer{i}_bias.ctf` for `i = 0..layers`;
//! * landmarks: JSON lines, `{"frame": <int>, "points": [[x, y], ...]}`;
//! * appearance maps: JSON with `points` (`frame_id`, `x`, `y`) and
//!   `triangles` (index triples into `points`).

use std::fs;
use std::path::{Path, PathBuf};

use compact_attn_core::format;
use compact_attn_core::refselect::{AppearanceMap, EmbeddedFrame, Point};
use compact_attn_core::{AttentionConfig, EncoderConfig, EncoderWeights, FeatureTensor};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const ENCODER_CONFIG_FILE: &str = "encoder.json";

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json { path: path.into(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("in-memory values always serialize");
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<FeatureTensor> {
    let path = path.as_ref();
    format::decode(&read_bytes(path)?).map_err(|e| Error::data(path, e))
}

pub fn write_tensor(path: impl AsRef<Path>, t: &FeatureTensor) -> Result<()> {
    let path = path.as_ref();
    let bytes = format::encode(t).map_err(|e| Error::data(path, e))?;
    write_bytes(path, &bytes)
}

pub fn read_attention_config(path: impl AsRef<Path>) -> Result<AttentionConfig> {
    let path = path.as_ref();
    let cfg: AttentionConfig = read_json(path)?;
    cfg.validate().map_err(|e| Error::data(path, e))?;
    Ok(cfg)
}

pub fn read_encoder_config(path: impl AsRef<Path>) -> Result<EncoderConfig> {
    let path = path.as_ref();
    let cfg: EncoderConfig = read_json(path)?;
    cfg.validate().map_err(|e| Error::data(path, e))?;
    Ok(cfg)
}

fn kernel_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("layer{i}_kernel.ctf"))
}

fn bias_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("layer{i}_bias.ctf"))
}

/// Loads the layer tensors for `cfg` from `dir` and checks their shapes.
pub fn load_weights(dir: impl AsRef<Path>, cfg: &EncoderConfig) -> Result<EncoderWeights> {
    let dir = dir.as_ref();
    let mut kernels = Vec::with_capacity(cfg.layers);
    let mut biases = Vec::with_capacity(cfg.layers);
    for i in 0..cfg.layers {
        kernels.push(read_tensor(kernel_path(dir, i))?);
        biases.push(read_tensor(bias_path(dir, i))?);
    }
    let weights = EncoderWeights { kernels, biases };
    weights.check(cfg).map_err(|e| Error::data(dir, e))?;
    Ok(weights)
}

/// Loads `encoder.json` and the layer tensors from `dir`.
pub fn load_encoder(dir: impl AsRef<Path>) -> Result<(EncoderConfig, EncoderWeights)> {
    let dir = dir.as_ref();
    let cfg = read_encoder_config(dir.join(ENCODER_CONFIG_FILE))?;
    let weights = load_weights(dir, &cfg)?;
    Ok((cfg, weights))
}

pub fn save_encoder(dir: impl AsRef<Path>, cfg: &EncoderConfig, weights: &EncoderWeights) -> Result<()> {
    let dir = dir.as_ref();
    weights.check(cfg).map_err(|e| Error::data(dir, e))?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join(ENCODER_CONFIG_FILE), cfg)?;
    for (i, (k, b)) in weights.kernels.iter().zip(&weights.biases).enumerate() {
        write_tensor(kernel_path(dir, i), k)?;
        write_tensor(bias_path(dir, i), b)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkFrame {
    pub frame: u64,
    pub points: Vec<Point>,
}

/// One [`LandmarkFrame`] per non-blank line.
pub fn read_landmarks(path: impl AsRef<Path>) -> Result<Vec<LandmarkFrame>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| Error::JsonLine { path: path.into(), line: i + 1, source })
        })
        .collect()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum QueryLandmarks {
    Bare(Vec<Point>),
    Wrapped { points: Vec<Point> },
}

/// A single frame's landmarks: either a bare `[[x, y], ...]` array or an
/// object with a `points` field (so a line of a landmarks file also works).
pub fn read_query_landmarks(path: impl AsRef<Path>) -> Result<Vec<Point>> {
    Ok(match read_json(path.as_ref())? {
        QueryLandmarks::Bare(p) | QueryLandmarks::Wrapped { points: p } => p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub frame_id: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFile {
    pub points: Vec<MapPoint>,
    pub triangles: Vec<[usize; 3]>,
}

impl MapFile {
    pub fn from_map(map: &AppearanceMap) -> Self {
        MapFile {
            points: map
                .points()
                .iter()
                .map(|p| MapPoint { frame_id: p.frame_id, x: p.coord.0, y: p.coord.1 })
                .collect(),
            triangles: map.triangles().to_vec(),
        }
    }

    pub fn frames(&self) -> Vec<EmbeddedFrame> {
        self.points.iter().map(|p| EmbeddedFrame::new(p.frame_id, p.x, p.y)).collect()
    }

    pub fn into_map(self) -> compact_attn_core::Result<AppearanceMap> {
        AppearanceMap::from_parts(self.frames(), self.triangles)
    }
}

pub fn read_map(path: impl AsRef<Path>) -> Result<AppearanceMap> {
    let path = path.as_ref();
    let file: MapFile = read_json(path)?;
    file.into_map().map_err(|e| Error::data(path, e))
}

pub fn write_map(path: impl AsRef<Path>, map: &AppearanceMap) -> Result<()> {
    write_json(path.as_ref(), &MapFile::from_map(map))
}

/// Pre-embedded frames: a JSON array of `{"frame_id", "x", "y"}` objects.
pub fn read_coords(path: impl AsRef<Path>) -> Result<Vec<EmbeddedFrame>> {
    let pts: Vec<MapPoint> = read_json(path.as_ref())?;
    Ok(pts.iter().map(|p| EmbeddedFrame::new(p.frame_id, p.x, p.y)).collect())
}
