//! Labelled image datasets: IDX ingestion, synthetic generation, and
//! stratified subsetting.
//!
//! Images are kept as raw 0–255 intensity vectors; mapping intensities to
//! firing rates happens in the encoder only, so there is a single place of
//! truth for that scaling. The IDX format is the big-endian binary layout
//! handwritten-digit corpora ship in; gzip-compressed files are detected by
//! their two-byte prefix and unpacked transparently.

use std::io::Read;
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, WriteBytesExt};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;
const GZIP_PREFIX: [u8; 2] = [0x1F, 0x8B];

/// Labelled intensity images, all of one dimension, with class ids 0–9.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    pub images: Vec<Vec<u8>>,
    pub labels: Vec<u8>,
    pub name: String,
}

impl LabeledDataset {
    /// Number of samples.
    pub fn len(&self) -> usize {
        self.images.len()
    }

    /// True when the dataset holds no samples.
    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Pixels per image (0 for an empty dataset).
    pub fn input_dim(&self) -> usize {
        self.images.first().map_or(0, Vec::len)
    }

    /// Samples per class id.
    pub fn class_counts(&self) -> [usize; 10] {
        let mut counts = [0usize; 10];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Checks the structural invariants: matching image/label counts, a
    /// uniform positive image dimension, and class ids within 0–9.
    pub fn validate(&self) -> Result<()> {
        if self.images.len() != self.labels.len() {
            return Err(Error::Format(format!(
                "dataset '{}' has {} images but {} labels",
                self.name,
                self.images.len(),
                self.labels.len()
            )));
        }
        let dim = self.input_dim();
        if !self.images.is_empty() && dim == 0 {
            return Err(Error::Format(format!(
                "dataset '{}' has zero-dimensional images",
                self.name
            )));
        }
        for (k, img) in self.images.iter().enumerate() {
            if img.len() != dim {
                return Err(Error::Format(format!(
                    "dataset '{}': image {k} has {} pixels, expected {dim}",
                    self.name,
                    img.len()
                )));
            }
        }
        for (k, &l) in self.labels.iter().enumerate() {
            if l > 9 {
                return Err(Error::Format(format!(
                    "dataset '{}': label {k} is {l}, outside 0-9",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Reads a file, transparently unpacking gzip when the magic prefix says so.
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&GZIP_PREFIX) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Format(format!("gzip stream in {}: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Parses the image half of an IDX pair: magic, count, rows, columns, then
/// `count * rows * cols` raw bytes, flattened row-major per image.
fn parse_idx_images(data: &[u8], origin: &str) -> Result<Vec<Vec<u8>>> {
    if data.len() < 16 {
        return Err(Error::Format(format!(
            "{origin}: image header needs 16 bytes, file has {}",
            data.len()
        )));
    }
    let magic = BigEndian::read_u32(&data[0..4]);
    if magic != IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "{origin}: image magic 0x{magic:08X}, expected 0x{IMAGE_MAGIC:08X}"
        )));
    }
    let count = BigEndian::read_u32(&data[4..8]) as u64;
    let rows = BigEndian::read_u32(&data[8..12]) as u64;
    let cols = BigEndian::read_u32(&data[12..16]) as u64;
    let pixels = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format(format!("{origin}: image size {rows}x{cols} overflows")))?;
    if count > 0 && pixels == 0 {
        return Err(Error::Format(format!(
            "{origin}: {count} images of size {rows}x{cols} (zero pixels)"
        )));
    }
    let expected = count
        .checked_mul(pixels)
        .ok_or_else(|| Error::Format(format!("{origin}: image payload size overflows")))?;
    let body = &data[16..];
    if (body.len() as u64) < expected {
        return Err(Error::Format(format!(
            "{origin}: image payload truncated, need {expected} bytes, have {}",
            body.len()
        )));
    }
    if (body.len() as u64) > expected {
        return Err(Error::Format(format!(
            "{origin}: {} bytes of trailing data after the image payload",
            body.len() as u64 - expected
        )));
    }
    Ok(body
        .chunks_exact(pixels as usize)
        .map(<[u8]>::to_vec)
        .collect())
}

/// Parses the label half of an IDX pair: magic, count, then raw class ids.
fn parse_idx_labels(data: &[u8], origin: &str) -> Result<Vec<u8>> {
    if data.len() < 8 {
        return Err(Error::Format(format!(
            "{origin}: label header needs 8 bytes, file has {}",
            data.len()
        )));
    }
    let magic = BigEndian::read_u32(&data[0..4]);
    if magic != LABEL_MAGIC {
        return Err(Error::Format(format!(
            "{origin}: label magic 0x{magic:08X}, expected 0x{LABEL_MAGIC:08X}"
        )));
    }
    let count = BigEndian::read_u32(&data[4..8]) as u64;
    let body = &data[8..];
    if (body.len() as u64) < count {
        return Err(Error::Format(format!(
            "{origin}: label payload truncated, need {count} bytes, have {}",
            body.len()
        )));
    }
    if (body.len() as u64) > count {
        return Err(Error::Format(format!(
            "{origin}: {} bytes of trailing data after the label payload",
            body.len() as u64 - count
        )));
    }
    Ok(body.to_vec())
}

/// Loads a dataset from an IDX image/label file pair, either file
/// optionally gzip-compressed.
///
/// Every structural defect — wrong magic (the observed value is named),
/// truncated or oversized payloads, image/label count mismatches, class
/// ids above 9 — is reported as a typed error; no input can panic the
/// parser.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let image_data = read_maybe_gz(images_path)?;
    let label_data = read_maybe_gz(labels_path)?;
    let images = parse_idx_images(&image_data, &images_path.display().to_string())?;
    let labels = parse_idx_labels(&label_data, &labels_path.display().to_string())?;
    if images.len() != labels.len() {
        return Err(Error::Format(format!(
            "{} holds {} images but {} holds {} labels",
            images_path.display(),
            images.len(),
            labels_path.display(),
            labels.len()
        )));
    }
    let name = images_path
        .file_stem()
        .map_or_else(|| "idx".to_string(), |s| s.to_string_lossy().into_owned());
    let ds = LabeledDataset {
        images,
        labels,
        name,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes a dataset as an IDX image/label file pair; paths ending in `.gz`
/// are gzip-compressed. Square image dimensions are written as a square
/// raster, anything else as a single row.
pub fn write_idx(ds: &LabeledDataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    ds.validate()?;
    let dim = ds.input_dim();
    let side = (dim as f64).sqrt().round() as usize;
    let (rows, cols) = if side * side == dim && dim > 0 {
        (side, side)
    } else {
        (1, dim)
    };

    let mut image_bytes = Vec::with_capacity(16 + ds.len() * dim);
    image_bytes.write_u32::<BigEndian>(IMAGE_MAGIC).unwrap();
    image_bytes.write_u32::<BigEndian>(ds.len() as u32).unwrap();
    image_bytes.write_u32::<BigEndian>(rows as u32).unwrap();
    image_bytes.write_u32::<BigEndian>(cols as u32).unwrap();
    for img in &ds.images {
        image_bytes.extend_from_slice(img);
    }

    let mut label_bytes = Vec::with_capacity(8 + ds.len());
    label_bytes.write_u32::<BigEndian>(LABEL_MAGIC).unwrap();
    label_bytes.write_u32::<BigEndian>(ds.len() as u32).unwrap();
    label_bytes.extend_from_slice(&ds.labels);

    write_maybe_gz(images_path, &image_bytes)?;
    write_maybe_gz(labels_path, &label_bytes)
}

fn write_maybe_gz(path: &Path, bytes: &[u8]) -> Result<()> {
    let is_gz = path.extension().is_some_and(|e| e == "gz");
    if is_gz {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc = GzEncoder::new(file, flate2::Compression::default());
        std::io::Write::write_all(&mut enc, bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?;
        Ok(())
    } else {
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

/// Generates a deterministic synthetic dataset of `n_classes` classes.
///
/// Each class owns a disjoint contiguous block of bright pixels (so class
/// prototypes never overlap); samples jitter the block's brightness and
/// sprinkle dim background noise. Intended as a desk-scale stand-in
/// workload where a real corpus is unnecessary.
pub fn synth_dataset(
    n_classes: u32,
    samples_per_class: u32,
    image_dim: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if !(2..=10).contains(&n_classes) {
        return Err(Error::Config(format!(
            "n_classes must be within 2-10, got {n_classes}"
        )));
    }
    if samples_per_class < 1 {
        return Err(Error::Config("samples_per_class must be >= 1".into()));
    }
    if image_dim < n_classes as usize {
        return Err(Error::Config(format!(
            "image_dim {image_dim} cannot hold {n_classes} disjoint class patches"
        )));
    }
    let mut rng = stream_rng(seed, "synth");
    let n_classes = n_classes as usize;
    let mut images = Vec::with_capacity(n_classes * samples_per_class as usize);
    let mut labels = Vec::with_capacity(images.capacity());
    for class in 0..n_classes {
        let patch_start = class * image_dim / n_classes;
        let patch_end = (class + 1) * image_dim / n_classes;
        for _ in 0..samples_per_class {
            let mut img = vec![0u8; image_dim];
            for (px, slot) in img.iter_mut().enumerate() {
                if (patch_start..patch_end).contains(&px) {
                    *slot = 180 + rng.random_range(0..=75u8);
                } else if rng.random::<f64>() < 0.08 {
                    *slot = rng.random_range(1..=40u8);
                }
            }
            images.push(img);
            labels.push(class as u8);
        }
    }
    Ok(LabeledDataset {
        images,
        labels,
        name: format!("synth-{n_classes}x{samples_per_class}"),
    })
}

/// Draws a class-stratified random subset of `n` samples.
///
/// Per-class quotas follow the dataset's class proportions by largest
/// remainder, each class's members are drawn without replacement, and the
/// final selection is shuffled so downstream training never sees samples
/// grouped by class. Deterministic given the seed.
pub fn subset(ds: &LabeledDataset, n: usize, seed: u64) -> Result<LabeledDataset> {
    if n < 1 || n > ds.len() {
        return Err(Error::Contract(format!(
            "subset size {n} outside 1..={}",
            ds.len()
        )));
    }
    let mut by_class: [Vec<usize>; 10] = Default::default();
    for (idx, &l) in ds.labels.iter().enumerate() {
        by_class[l as usize].push(idx);
    }
    // Largest-remainder apportionment of n over the class counts.
    let total = ds.len();
    let mut quotas = [0usize; 10];
    let mut remainders: Vec<(f64, usize)> = Vec::new();
    let mut assigned = 0usize;
    for (c, members) in by_class.iter().enumerate() {
        let exact = n as f64 * members.len() as f64 / total as f64;
        let floor = exact.floor() as usize;
        quotas[c] = floor;
        assigned += floor;
        remainders.push((exact - floor as f64, c));
    }
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, c) in remainders.iter() {
        if assigned == n {
            break;
        }
        if quotas[c] < by_class[c].len() {
            quotas[c] += 1;
            assigned += 1;
        }
    }
    // Under heavy rounding pressure some classes may be exhausted; top up
    // wherever capacity remains to keep the requested size exact.
    if assigned < n {
        for c in 0..10 {
            while assigned < n && quotas[c] < by_class[c].len() {
                quotas[c] += 1;
                assigned += 1;
            }
        }
    }

    let mut rng = stream_rng(seed, "subset");
    let mut picked = Vec::with_capacity(n);
    for (c, members) in by_class.iter().enumerate() {
        let mut pool = members.clone();
        pool.shuffle(&mut rng);
        picked.extend(pool.into_iter().take(quotas[c]));
    }
    picked.shuffle(&mut rng);

    Ok(LabeledDataset {
        images: picked.iter().map(|&i| ds.images[i].clone()).collect(),
        labels: picked.iter().map(|&i| ds.labels[i]).collect(),
        name: format!("{}-sub{n}", ds.name),
    })
}
