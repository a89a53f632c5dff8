//! TOML manifest describing the tensors exported for one document.
//!
//! ```toml
//! [export]
//! low_layer = 8
//! head_reduction = "mean"
//! attention_stage = "post-softmax"
//!
//! [[sub_images]]
//! id = "doc0-r0c0"
//! dataset = "docvqa"
//! image_id = "doc0"
//! crop = [0, 0]
//! grid = [24, 24]
//! is_global = false
//! y_last = "doc0-r0c0/y_last.tkzt"
//! keys_low = "doc0-r0c0/keys_low.tkzt"
//! attn_low = "doc0-r0c0/attn_low.tkzt"
//! keys_deep = "doc0-r0c0/keys_deep.tkzt"
//! attn_deep = "doc0-r0c0/attn_deep.tkzt"
//! ```
//!
//! Tensor paths are relative to the manifest's directory. Key and token
//! tensors are `[N, D]`, attention tensors are `[N]` with the CLS column
//! already removed.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use tokenpress_core::pipeline::find_global;
use tokenpress_core::{AttentionVector, GridShape, KeyMatrix, SubImageBundle, TokenMatrix};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Layer conventional for the low-layer keys and attention.
pub const DEFAULT_LOW_LAYER: u32 = 8;
/// Allowed deviation of an attention vector's sum from 1 before warning.
const ATTN_SUM_TOLERANCE: f64 = 1e-3;

/// How the tensors were extracted from the vision encoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportInfo {
    #[serde(default = "default_low_layer")]
    pub low_layer: u32,
    /// `None` means the encoder's last layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deep_layer: Option<u32>,
    #[serde(default = "default_head_reduction")]
    pub head_reduction: String,
    #[serde(default = "default_attention_stage")]
    pub attention_stage: String,
}

fn default_low_layer() -> u32 {
    DEFAULT_LOW_LAYER
}

fn default_head_reduction() -> String {
    "mean".into()
}

fn default_attention_stage() -> String {
    "post-softmax".into()
}

impl Default for ExportInfo {
    fn default() -> Self {
        ExportInfo {
            low_layer: DEFAULT_LOW_LAYER,
            deep_layer: None,
            head_reduction: default_head_reduction(),
            attention_stage: default_attention_stage(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubImageEntry {
    pub id: String,
    #[serde(default)]
    pub dataset: String,
    #[serde(default)]
    pub image_id: String,
    /// Crop position as `[row, col]` in the crop layout.
    #[serde(default)]
    pub crop: [u32; 2],
    /// Patch grid as `[rows, cols]`.
    pub grid: [usize; 2],
    #[serde(default)]
    pub is_global: bool,
    pub y_last: PathBuf,
    pub keys_low: PathBuf,
    pub attn_low: PathBuf,
    pub keys_deep: PathBuf,
    pub attn_deep: PathBuf,
}

impl SubImageEntry {
    /// Entry whose tensors live under `<id>/` with the default file names.
    pub fn with_default_paths(id: &str, dataset: &str, grid: GridShape) -> Self {
        let file = |name: &str| PathBuf::from(id).join(format!("{name}.tkzt"));
        SubImageEntry {
            id: id.to_string(),
            dataset: dataset.to_string(),
            image_id: String::new(),
            crop: [0, 0],
            grid: [grid.rows, grid.cols],
            is_global: false,
            y_last: file("y_last"),
            keys_low: file("keys_low"),
            attn_low: file("attn_low"),
            keys_deep: file("keys_deep"),
            attn_deep: file("attn_deep"),
        }
    }

    pub fn grid_shape(&self) -> GridShape {
        GridShape::new(self.grid[0], self.grid[1])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub export: ExportInfo,
    #[serde(default)]
    pub sub_images: Vec<SubImageEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest =
            toml::from_str(&text).map_err(|e| Error::parse(path, e.message()))?;
        let mut seen = HashSet::new();
        for e in &manifest.sub_images {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::parse(
                    path,
                    format!("duplicate sub-image id {:?}", e.id),
                ));
            }
            if e.id.is_empty() || e.id.contains(['/', '\\']) || e.id == "." || e.id == ".." {
                return Err(Error::parse(
                    path,
                    format!("sub-image id {:?} is not a plain name", e.id),
                ));
            }
        }
        Ok(manifest)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest is always representable")
    }
}

/// A manifest together with its validated bundles, in manifest order.
#[derive(Debug, Clone)]
pub struct Document {
    pub manifest: Manifest,
    pub bundles: Vec<SubImageBundle>,
}

impl Document {
    pub fn entries(&self) -> impl Iterator<Item = (&SubImageEntry, &SubImageBundle)> {
        self.manifest.sub_images.iter().zip(&self.bundles)
    }
}

/// Reads a manifest and every tensor it references, validating shapes,
/// finiteness and key norms. `keys_low` is the reference for `N`.
pub fn load_bundle(manifest_path: &Path) -> Result<Document> {
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    if manifest.export.low_layer != DEFAULT_LOW_LAYER {
        warn!(
            "{}: low-layer tensors come from layer {}, not the conventional {DEFAULT_LOW_LAYER}",
            manifest_path.display(),
            manifest.export.low_layer
        );
    }
    let bundles = manifest
        .sub_images
        .iter()
        .map(|e| load_entry(manifest_path, base, e))
        .collect::<Result<Vec<_>>>()?;
    find_global(&bundles).map_err(|e| Error::core(manifest_path.display().to_string(), e))?;
    Ok(Document { manifest, bundles })
}

struct Loaded {
    path: PathBuf,
    tensor: Tensor,
}

impl Loaded {
    fn read(base: &Path, rel: &Path) -> Result<Self> {
        let path = base.join(rel);
        let tensor = Tensor::read(&path)?;
        if let Some(index) = tensor.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { file: path, index });
        }
        Ok(Loaded { path, tensor })
    }

    fn mismatch(
        &self,
        reference: &Path,
        what: &'static str,
        expected: usize,
        found: usize,
    ) -> Error {
        Error::DimensionMismatch {
            file: self.path.clone(),
            reference: reference.to_path_buf(),
            what,
            expected,
            found,
        }
    }

    /// Checks the rank and returns the dims as `usize`.
    fn shape(&self, reference: &Path, rank: usize) -> Result<Vec<usize>> {
        if self.tensor.dims.len() != rank {
            return Err(self.mismatch(reference, "rank", rank, self.tensor.dims.len()));
        }
        Ok(self.tensor.dims.iter().map(|&d| d as usize).collect())
    }

    fn rows(&self, reference: &Path, n: usize) -> Result<(usize, usize)> {
        let dims = self.shape(reference, 2)?;
        if dims[0] != n {
            return Err(self.mismatch(reference, "row count", n, dims[0]));
        }
        if dims[1] == 0 {
            return Err(self.mismatch(reference, "column count", 1, 0));
        }
        Ok((dims[0], dims[1]))
    }

    fn tokens(&self, reference: &Path, n: usize) -> Result<TokenMatrix> {
        let (r, c) = self.rows(reference, n)?;
        TokenMatrix::from_f32(r, c, &self.tensor.data).map_err(|source| self.invalid(source))
    }

    fn keys(&self, reference: &Path, n: usize) -> Result<KeyMatrix> {
        let (r, c) = self.rows(reference, n)?;
        KeyMatrix::from_f32(r, c, &self.tensor.data).map_err(|source| match source {
            tokenpress_core::Error::ZeroRow { index } => Error::ZeroKeyRow {
                file: self.path.clone(),
                row: index,
            },
            other => self.invalid(other),
        })
    }

    fn attention(&self, reference: &Path, n: usize) -> Result<AttentionVector> {
        let dims = self.shape(reference, 1)?;
        if dims[0] != n {
            return Err(self.mismatch(reference, "length", n, dims[0]));
        }
        let a =
            AttentionVector::from_f32(&self.tensor.data).map_err(|source| self.invalid(source))?;
        if (a.sum() - 1.0).abs() > ATTN_SUM_TOLERANCE {
            warn!(
                "{}: attention sums to {:.6}, not 1",
                self.path.display(),
                a.sum()
            );
        }
        Ok(a)
    }

    fn invalid(&self, source: tokenpress_core::Error) -> Error {
        Error::InvalidTensor {
            file: self.path.clone(),
            source,
        }
    }
}

fn load_entry(manifest_path: &Path, base: &Path, e: &SubImageEntry) -> Result<SubImageBundle> {
    let keys_low = Loaded::read(base, &e.keys_low)?;
    let reference = keys_low.path.clone();
    let n = keys_low.shape(&reference, 2)?[0];
    let keys_low = keys_low.keys(&reference, n)?;
    let y_last = Loaded::read(base, &e.y_last)?.tokens(&reference, n)?;
    let attn_low = Loaded::read(base, &e.attn_low)?.attention(&reference, n)?;
    let keys_deep = Loaded::read(base, &e.keys_deep)?.keys(&reference, n)?;
    let attn_deep = Loaded::read(base, &e.attn_deep)?.attention(&reference, n)?;
    SubImageBundle::new(
        y_last,
        keys_low,
        attn_low,
        keys_deep,
        attn_deep,
        e.grid_shape(),
        e.is_global,
    )
    .map_err(|source| {
        Error::core(
            format!("{}: sub-image {:?}", manifest_path.display(), e.id),
            source,
        )
    })
}

/// Writes every bundle's tensors (as `f32`) at the paths named by its entry,
/// relative to the manifest, then the manifest itself.
pub fn write_bundle(
    manifest_path: &Path,
    manifest: &Manifest,
    bundles: &[SubImageBundle],
) -> Result<()> {
    if manifest.sub_images.len() != bundles.len() {
        return Err(Error::Usage(format!(
            "{} manifest entries but {} bundles",
            manifest.sub_images.len(),
            bundles.len()
        )));
    }
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    for (e, b) in manifest.sub_images.iter().zip(bundles) {
        let matrix = |m: &TokenMatrix| Tensor::matrix(m.rows(), m.cols(), m.to_f32_vec());
        let vector =
            |a: &AttentionVector| Tensor::vector(a.scores().iter().map(|&v| v as f32).collect());
        matrix(b.y_last()).write(&base.join(&e.y_last))?;
        matrix(b.keys_low().as_tokens()).write(&base.join(&e.keys_low))?;
        vector(b.attn_low()).write(&base.join(&e.attn_low))?;
        matrix(b.keys_deep().as_tokens()).write(&base.join(&e.keys_deep))?;
        vector(b.attn_deep()).write(&base.join(&e.attn_deep))?;
    }
    if !base.as_os_str().is_empty() {
        fs::create_dir_all(base).map_err(|e| Error::io(base, e))?;
    }
    fs::write(manifest_path, manifest.to_toml()).map_err(|e| Error::io(manifest_path, e))
}
