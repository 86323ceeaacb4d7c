use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::{standardize, MultiViewDataset};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

/// Parse a numeric CSV block: one sample per row.
///
/// The first record is treated as a header when none of its cells parse as
/// numbers.
pub fn parse_csv<R: Read>(reader: R) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::format(format!("csv row {}: {e}", line + 1)))?;
        if line == 0 && !record.is_empty() && record.iter().all(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::format(format!("csv row {}: {} cells, expected {c}", line + 1, record.len())))
            }
            _ => {}
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::format(format!("csv row {} column {}: {cell:?} is not a number", line + 1, col + 1))
            })?;
            data.push(v);
        }
        rows += 1;
    }
    Matrix::new(rows, cols.unwrap_or(0), data)
}

pub fn load_csv_view(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(Error::from)?;
    parse_csv(file).map_err(|e| e.with_path(path))
}

/// Write a matrix as CSV with an optional header row.
pub fn write_csv_view(path: impl AsRef<Path>, m: &Matrix, header: Option<&[String]>) -> Result<()> {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// One label per line.
pub fn parse_labels_csv<R: Read>(reader: R) -> Result<Vec<u32>> {
    let m = parse_csv(reader)?;
    if m.cols() != 1 {
        return Err(Error::format(format!("label csv must have one column, found {}", m.cols())));
    }
    m.data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(Error::format(format!("csv row {}: label {v} is not a non-negative integer", i + 1)))
            }
        })
        .collect()
}

/// Decoded IDX payload.
#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    /// One flattened image per row, scaled to `[0, 1]`.
    Images {
        images: Matrix,
        rows: usize,
        cols: usize,
    },
    Labels(Vec<u32>),
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(format!("idx truncated at byte {offset}")))
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    let magic = be_u32(bytes, 0)?;
    match magic {
        IDX_IMAGES => {
            let n = be_u32(bytes, 4)? as usize;
            let rows = be_u32(bytes, 8)? as usize;
            let cols = be_u32(bytes, 12)? as usize;
            let pixels = rows * cols;
            let body = &bytes[16..];
            if body.len() != n * pixels {
                return Err(Error::format(format!(
                    "idx image payload at byte 16 holds {} bytes, header declares {n}×{rows}×{cols}",
                    body.len()
                )));
            }
            let data = body.iter().map(|&b| f64::from(b) / 255.0).collect();
            Ok(IdxData::Images { images: Matrix::new(n, pixels, data)?, rows, cols })
        }
        IDX_LABELS => {
            let n = be_u32(bytes, 4)? as usize;
            let body = &bytes[8..];
            if body.len() != n {
                return Err(Error::format(format!(
                    "idx label payload at byte 8 holds {} bytes, header declares {n}",
                    body.len()
                )));
            }
            Ok(IdxData::Labels(body.iter().map(|&b| u32::from(b)).collect()))
        }
        other => Err(Error::format(format!("bad idx magic {other:#010x} at byte 0"))),
    }
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<IdxData> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    parse_idx(&bytes).map_err(|e| e.with_path(path))
}

/// Encode images with values in `[0, 1]` as an unsigned-byte IDX file.
pub fn encode_idx_images(images: &Matrix, rows: usize, cols: usize) -> Result<Vec<u8>> {
    if rows * cols != images.cols() {
        return Err(Error::ShapeMismatch(format!("{rows}×{cols} images vs {} columns", images.cols())));
    }
    let mut out = Vec::with_capacity(16 + images.data().len());
    for v in [IDX_IMAGES, images.rows() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend(images.data().iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u32]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    for &l in labels {
        out.push(u8::try_from(l).map_err(|_| Error::InvalidConfig(format!("label {l} does not fit a byte")))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Csv,
    Idx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub name: String,
    pub path: PathBuf,
    pub format: FileFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub path: PathBuf,
    pub format: FileFormat,
}

/// TOML description of a dataset on disk. Relative paths resolve against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(default)]
    pub provenance: String,
    #[serde(default)]
    pub standardize: bool,
    pub views: Vec<ViewEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<LabelEntry>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(Error::InvalidConfig("manifest lists no views".into()));
        }
        let mut paths: Vec<&PathBuf> = self.views.iter().map(|v| &v.path).collect();
        paths.extend(self.labels.as_ref().map(|l| &l.path));
        let total = paths.len();
        paths.sort();
        paths.dedup();
        if paths.len() != total {
            return Err(Error::InvalidConfig("manifest paths must be distinct".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::format(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::format(format!("manifest: {e}")))
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    DatasetManifest::from_toml(&fs::read_to_string(path)?).map_err(|e| e.with_path(path))
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &DatasetManifest) -> Result<()> {
    manifest.validate()?;
    let mut f = fs::File::create(path)?;
    f.write_all(manifest.to_toml()?.as_bytes())?;
    Ok(())
}

fn load_view(path: &Path, format: FileFormat) -> Result<Matrix> {
    match format {
        FileFormat::Csv => load_csv_view(path),
        FileFormat::Idx => match load_idx(path)? {
            IdxData::Images { images, .. } => Ok(images),
            IdxData::Labels(_) => Err(Error::format("expected an image idx file, found labels").with_path(path)),
        },
    }
}

fn load_labels(path: &Path, format: FileFormat) -> Result<Vec<u32>> {
    match format {
        FileFormat::Csv => parse_labels_csv(fs::File::open(path)?).map_err(|e| e.with_path(path)),
        FileFormat::Idx => match load_idx(path)? {
            IdxData::Labels(l) => Ok(l),
            IdxData::Images { .. } => Err(Error::format("expected a label idx file, found images").with_path(path)),
        },
    }
}

/// Load every file named by the manifest, standardizing when it asks to.
pub fn load_dataset(manifest: &DatasetManifest, base_dir: impl AsRef<Path>) -> Result<MultiViewDataset> {
    manifest.validate()?;
    let base = base_dir.as_ref();
    let views = manifest.views.iter().map(|v| load_view(&base.join(&v.path), v.format)).collect::<Result<Vec<_>>>()?;
    let labels = manifest.labels.as_ref().map(|l| load_labels(&base.join(&l.path), l.format)).transpose()?;
    let names = manifest.views.iter().map(|v| v.name.clone()).collect();
    let mut data =
        MultiViewDataset::new(views, labels)?.with_names(names)?.with_provenance(manifest.provenance.clone());
    if manifest.standardize {
        data = standardize(&data)?.0;
    }
    Ok(data)
}

/// Load a dataset from a manifest file.
pub fn load_dataset_from(path: impl AsRef<Path>) -> Result<MultiViewDataset> {
    let path = path.as_ref();
    let manifest = load_manifest(path)?;
    load_dataset(&manifest, path.parent().unwrap_or(Path::new(".")))
}
