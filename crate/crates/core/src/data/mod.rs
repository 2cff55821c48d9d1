//! Datasets: phantom generation, PPM/PGM I/O, manifests, cropping and
//! label colorization.
//!
//! On disk a dataset is a directory holding `manifest.csv` with columns
//! `slice_id,image_path,label_path`, images as `.ppm` and label maps as
//! `.pgm`, all paths relative to the manifest.

mod phantom;
mod pnm;

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::labels::{LabelMap, NUM_CLASSES};
use crate::tensor::Tensor;

pub use phantom::{generate_phantom, PhantomParams};
pub use pnm::{
    decode_pgm, decode_ppm, encode_pgm, encode_ppm, load_image, load_labels, rgb_bytes, save_image,
    save_labels,
};

pub const MANIFEST_NAME: &str = "manifest.csv";

/// One cross-section: an RGB image `[3, H, W]` and its label map.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub id: String,
    pub image: Tensor,
    pub labels: LabelMap,
}

impl Slice {
    pub fn new(id: impl Into<String>, image: Tensor, labels: LabelMap) -> Result<Self> {
        let (c, h, w) = image.chw()?;
        if c != 3 || (h, w) != (labels.height(), labels.width()) {
            return Err(Error::Shape(format!(
                "image {:?} and {}x{} label map are not aligned",
                image.shape(),
                labels.height(),
                labels.width()
            )));
        }
        Ok(Self {
            id: id.into(),
            image,
            labels,
        })
    }
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("path has no file name")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes slices under `dir` as `images/<id>.ppm`, `labels/<id>.pgm` plus the manifest.
pub fn write_dataset(slices: &[Slice], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    for sub in ["images", "labels"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let mut manifest = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Manifest {
        path: dir.join(MANIFEST_NAME),
        message: e.to_string(),
    };
    manifest
        .write_record(["slice_id", "image_path", "label_path"])
        .map_err(csv_err)?;
    for s in slices {
        let image_rel = format!("images/{}.ppm", s.id);
        let label_rel = format!("labels/{}.pgm", s.id);
        save_image(&s.image, dir.join(&image_rel))?;
        save_labels(&s.labels, dir.join(&label_rel))?;
        manifest
            .write_record([s.id.as_str(), &image_rel, &label_rel])
            .map_err(csv_err)?;
    }
    let bytes = manifest.into_inner().map_err(|e| Error::Manifest {
        path: dir.join(MANIFEST_NAME),
        message: e.to_string(),
    })?;
    write_atomic(&dir.join(MANIFEST_NAME), &bytes)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub slice_id: String,
    pub image_path: PathBuf,
    pub label_path: PathBuf,
}

/// Reads `manifest.csv`, resolving paths against its directory.
pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_NAME);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let headers = reader.headers().map_err(|e| Error::Manifest {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != ["slice_id", "image_path", "label_path"] {
        return Err(Error::Manifest {
            path,
            message: format!("unexpected header {headers:?}"),
        });
    }
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Manifest {
            path: path.clone(),
            message: e.to_string(),
        })?;
        entries.push(ManifestEntry {
            slice_id: record[0].to_string(),
            image_path: dir.join(&record[1]),
            label_path: dir.join(&record[2]),
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(entries)
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Vec<Slice>> {
    read_manifest(dir)?
        .into_iter()
        .map(|e| Slice::new(e.slice_id, load_image(&e.image_path)?, load_labels(&e.label_path)?))
        .collect()
}

fn center_offsets(h: usize, w: usize, size: usize) -> Result<(usize, usize)> {
    if size == 0 || size > h || size > w {
        return Err(Error::Shape(format!(
            "cannot crop {size}x{size} from {h}x{w}"
        )));
    }
    Ok(((h - size) / 2, (w - size) / 2))
}

/// Square `size × size` window centred at `floor((extent - size) / 2)`.
pub fn crop_center(image: &Tensor, size: usize) -> Result<Tensor> {
    let (_, h, w) = image.chw()?;
    let (top, left) = center_offsets(h, w, size)?;
    crate::ops::crop_spatial(image, top, left, size, size)
}

pub fn crop_center_labels(labels: &LabelMap, size: usize) -> Result<LabelMap> {
    let (top, left) = center_offsets(labels.height(), labels.width(), size)?;
    labels.crop(top, left, size, size)
}

/// Overlay colours per class, in 8-bit RGB.
pub const PALETTE: [[u8; 3]; NUM_CLASSES] = [
    [0, 0, 0],       // background
    [255, 255, 255], // skull
    [255, 255, 0],   // teeth
    [255, 0, 0],     // cerebrum
    [0, 255, 0],     // cerebellum
    [0, 255, 255],   // nasal cavities
    [0, 0, 255],     // eyeballs
    [255, 0, 255],   // lenses
];

pub fn colorize_labels(labels: &LabelMap) -> Tensor {
    let plane = labels.height() * labels.width();
    let mut values = vec![0.0; 3 * plane];
    for (p, &l) in labels.values().iter().enumerate() {
        for ch in 0..3 {
            values[ch * plane + p] = PALETTE[l as usize][ch] as f64 / 255.0;
        }
    }
    Tensor::from_parts(vec![3, labels.height(), labels.width()], values)
}

/// Blends the colorized labels over `image` with weight `alpha`.
pub fn overlay(image: &Tensor, labels: &LabelMap, alpha: f64) -> Result<Tensor> {
    let colors = colorize_labels(labels);
    image.require_same_shape(&colors)?;
    let values = image
        .values()
        .iter()
        .zip(colors.values())
        .map(|(i, c)| (1.0 - alpha) * i + alpha * c)
        .collect();
    Tensor::from_values(image.shape(), values)
}
