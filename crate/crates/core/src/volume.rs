//! Dense voxel containers and the UQV on-disk format.
//!
//! A UQV volume is a pair of files: a JSON sidecar describing the array and
//! a raw little-endian payload in a sibling file with the `.raw` extension.
//!
//! ```json
//! {"shape":[2,8,8,8],"dtype":"f32","order":"C","endianness":"little",
//!  "kind":"prob","classes":2,"spacing":[1.0,1.0,1.0]}
//! ```
//!
//! Label maps are stored as `u8` with shape `[Z, Y, X]`; probability maps
//! are `f32` with the class axis leading, `[C, Z, Y, X]`. The payload is
//! row-major with no header or padding.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Voxel grid extent as `[Z, Y, X]`.
pub type Shape = [usize; 3];

/// Maximum deviation of a voxel's class-probability sum from one.
pub const PROB_TOLERANCE: f64 = 1e-4;

const UNIT_SPACING: [f64; 3] = [1.0, 1.0, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    shape: Shape,
    spacing: [f64; 3],
    data: Vec<T>,
}

/// Real-valued voxel map (confidence, entropy, rater variance).
pub type ScalarMap = Volume<f64>;

fn voxel_count(shape: Shape) -> Result<usize> {
    if shape.contains(&0) {
        return Err(Error::ShapeViolation(format!(
            "every extent must be at least 1, got {shape:?}"
        )));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::ShapeViolation(format!("shape {shape:?} overflows")))
}

fn check_spacing(spacing: [f64; 3]) -> Result<()> {
    if spacing.iter().all(|s| s.is_finite() && *s > 0.0) {
        Ok(())
    } else {
        Err(Error::ShapeViolation(format!(
            "spacing must be positive and finite, got {spacing:?}"
        )))
    }
}

impl<T> Volume<T> {
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        let n = voxel_count(shape)?;
        if data.len() != n {
            return Err(Error::ShapeViolation(format!(
                "shape {shape:?} needs {n} voxels, payload has {}",
                data.len()
            )));
        }
        Ok(Self {
            shape,
            spacing: UNIT_SPACING,
            data,
        })
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Result<Self> {
        check_spacing(spacing)?;
        self.spacing = spacing;
        Ok(self)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major offset of voxel `(z, y, x)`.
    pub fn offset(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.shape[1] + y) * self.shape[2] + x
    }

    pub fn get(&self, z: usize, y: usize, x: usize) -> &T {
        &self.data[self.offset(z, y, x)]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Volume<U> {
        Volume {
            shape: self.shape,
            spacing: self.spacing,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Clone> Volume<T> {
    pub fn filled(shape: Shape, value: T) -> Result<Self> {
        let n = voxel_count(shape)?;
        Self::new(shape, vec![value; n])
    }
}

/// Integer segmentation with labels in `0..classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    volume: Volume<u8>,
    classes: usize,
}

fn check_classes(classes: usize) -> Result<()> {
    if (2..=256).contains(&classes) {
        Ok(())
    } else {
        Err(Error::ShapeViolation(format!(
            "class count must be in 2..=256, got {classes}"
        )))
    }
}

impl LabelMap {
    pub fn new(volume: Volume<u8>, classes: usize) -> Result<Self> {
        check_classes(classes)?;
        if let Some((voxel, &label)) = volume
            .data()
            .iter()
            .enumerate()
            .find(|(_, &l)| usize::from(l) >= classes)
        {
            return Err(Error::LabelOutOfRange {
                voxel,
                label,
                classes,
            });
        }
        Ok(Self { volume, classes })
    }

    pub fn from_vec(shape: Shape, labels: Vec<u8>, classes: usize) -> Result<Self> {
        Self::new(Volume::new(shape, labels)?, classes)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn shape(&self) -> Shape {
        self.volume.shape()
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.volume.spacing()
    }

    pub fn labels(&self) -> &[u8] {
        self.volume.data()
    }

    pub fn volume(&self) -> &Volume<u8> {
        &self.volume
    }

    pub fn len(&self) -> usize {
        self.volume.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volume.is_empty()
    }
}

/// Per-voxel class distribution, stored class-major as `[C, Z, Y, X]`.
///
/// [`ProbMap::new`] enforces the full softmax contract. [`ProbMap::from_parts`]
/// only checks the extent; pass its result through [`validate_prob_map`]
/// before trusting the values.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    classes: usize,
    shape: Shape,
    spacing: [f64; 3],
    data: Vec<f32>,
}

impl ProbMap {
    pub fn from_parts(classes: usize, shape: Shape, data: Vec<f32>) -> Result<Self> {
        check_classes(classes)?;
        let voxels = voxel_count(shape)?;
        if data.len() != voxels * classes {
            return Err(Error::ShapeViolation(format!(
                "({classes}, {}, {}, {}) needs {} values, payload has {}",
                shape[0],
                shape[1],
                shape[2],
                voxels * classes,
                data.len()
            )));
        }
        Ok(Self {
            classes,
            shape,
            spacing: UNIT_SPACING,
            data,
        })
    }

    pub fn new(classes: usize, shape: Shape, data: Vec<f32>) -> Result<Self> {
        validate_prob_map(Self::from_parts(classes, shape, data)?)
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Result<Self> {
        check_spacing(spacing)?;
        self.spacing = spacing;
        Ok(self)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn voxels(&self) -> usize {
        self.data.len() / self.classes
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Probabilities of class `c` over all voxels.
    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.voxels();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn prob(&self, class: usize, voxel: usize) -> f32 {
        self.data[class * self.voxels() + voxel]
    }

    /// Extent `(C, Z, Y, X)` as stored.
    pub fn dims(&self) -> [usize; 4] {
        [self.classes, self.shape[0], self.shape[1], self.shape[2]]
    }
}

/// Checks the softmax contract: every value in `[0, 1]` and every voxel's
/// class sum within [`PROB_TOLERANCE`] of one.
pub fn validate_prob_map(map: ProbMap) -> Result<ProbMap> {
    let n = map.voxels();
    for c in 0..map.classes {
        if let Some((voxel, &value)) = map
            .channel(c)
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::RangeViolation {
                voxel,
                class: c,
                value: f64::from(value),
            });
        }
    }
    for v in 0..n {
        let sum: f64 = (0..map.classes).map(|c| f64::from(map.prob(c, v))).sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::SumViolation {
                voxel: v,
                sum,
                tolerance: PROB_TOLERANCE,
            });
        }
    }
    Ok(map)
}

/// Degenerate distribution putting all mass on each voxel's label.
pub fn one_hot(labels: &LabelMap, classes: usize) -> Result<ProbMap> {
    check_classes(classes)?;
    let n = labels.len();
    let mut data = vec![0.0f32; n * classes];
    for (v, &l) in labels.labels().iter().enumerate() {
        let l = usize::from(l);
        if l >= classes {
            return Err(Error::LabelOutOfRange {
                voxel: v,
                label: l as u8,
                classes,
            });
        }
        data[l * n + v] = 1.0;
    }
    Ok(ProbMap {
        classes,
        shape: labels.shape(),
        spacing: labels.spacing(),
        data,
    })
}

/// What a UQV sidecar says the payload holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeKind {
    Label,
    Prob,
    /// Plain real-valued map, e.g. an emitted entropy map.
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dtype {
    F32,
    U8,
}

impl Dtype {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Dtype::F32),
            "u8" => Ok(Dtype::U8),
            other => Err(Error::UnsupportedDtype(other.to_owned())),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::U8 => "u8",
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U8 => 1,
        }
    }
}

/// JSON header of a UQV volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub shape: Vec<usize>,
    pub dtype: String,
    pub order: String,
    pub endianness: String,
    pub kind: VolumeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    #[serde(default = "unit_spacing")]
    pub spacing: [f64; 3],
}

fn unit_spacing() -> [f64; 3] {
    UNIT_SPACING
}

/// A volume as it lives on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredVolume {
    Label(LabelMap),
    Prob(ProbMap),
    Scalar(Volume<f32>),
}

/// Path of the raw payload that belongs to a sidecar.
pub fn payload_path(sidecar: &Path) -> PathBuf {
    sidecar.with_extension("raw")
}

impl StoredVolume {
    fn sidecar(&self) -> Sidecar {
        let (shape, dtype, kind, classes, spacing) = match self {
            StoredVolume::Label(m) => (
                m.shape().to_vec(),
                Dtype::U8,
                VolumeKind::Label,
                Some(m.classes()),
                m.spacing(),
            ),
            StoredVolume::Prob(p) => (
                p.dims().to_vec(),
                Dtype::F32,
                VolumeKind::Prob,
                Some(p.classes()),
                p.spacing(),
            ),
            StoredVolume::Scalar(v) => (
                v.shape().to_vec(),
                Dtype::F32,
                VolumeKind::Scalar,
                None,
                v.spacing(),
            ),
        };
        Sidecar {
            shape,
            dtype: dtype.name().to_owned(),
            order: "C".to_owned(),
            endianness: "little".to_owned(),
            kind,
            classes,
            spacing,
        }
    }

    fn payload(&self) -> Vec<u8> {
        match self {
            StoredVolume::Label(m) => m.labels().to_vec(),
            StoredVolume::Prob(p) => p.data().iter().flat_map(|v| v.to_le_bytes()).collect(),
            StoredVolume::Scalar(v) => v.data().iter().flat_map(|v| v.to_le_bytes()).collect(),
        }
    }

    /// Writes the sidecar to `path` and the payload next to it.
    pub fn store(&self, path: &Path) -> Result<()> {
        let header = serde_json::to_vec(&self.sidecar())
            .map_err(|e| Error::Schema(format!("cannot encode sidecar: {e}")))?;
        fs::write(path, header).map_err(|e| Error::io(path, e))?;
        let raw = payload_path(path);
        fs::write(&raw, self.payload()).map_err(|e| Error::io(&raw, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read(path).map_err(|e| Error::io(path, e))?;
        let header: Sidecar = serde_json::from_slice(&text)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        let raw_path = payload_path(path);
        let raw = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
        Self::decode(&header, &raw)
    }

    pub fn decode(header: &Sidecar, raw: &[u8]) -> Result<Self> {
        if header.order != "C" {
            return Err(Error::UnsupportedLayout(format!("order `{}`", header.order)));
        }
        if header.endianness != "little" {
            return Err(Error::UnsupportedLayout(format!(
                "endianness `{}`",
                header.endianness
            )));
        }
        let dtype = Dtype::parse(&header.dtype)?;
        let count = header
            .shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::HeaderMismatch("shape overflows".into()))?;
        if count.checked_mul(dtype.width()) != Some(raw.len()) {
            return Err(Error::HeaderMismatch(format!(
                "shape {:?} of {} needs {} bytes, payload has {}",
                header.shape,
                dtype.name(),
                count * dtype.width(),
                raw.len()
            )));
        }
        let floats = || -> Vec<f32> {
            raw.chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect()
        };
        let shape3 = |dims: &[usize]| -> Result<Shape> {
            <[usize; 3]>::try_from(dims).map_err(|_| {
                Error::HeaderMismatch(format!("expected 3 extents, got {dims:?}"))
            })
        };
        match (header.kind, dtype) {
            (VolumeKind::Label, Dtype::U8) => {
                let classes = header
                    .classes
                    .ok_or_else(|| Error::HeaderMismatch("label volume without classes".into()))?;
                let vol = Volume::new(shape3(&header.shape)?, raw.to_vec())?
                    .with_spacing(header.spacing)?;
                Ok(StoredVolume::Label(LabelMap::new(vol, classes)?))
            }
            (VolumeKind::Prob, Dtype::F32) => {
                if header.shape.len() != 4 {
                    return Err(Error::HeaderMismatch(format!(
                        "probability volume needs (C, Z, Y, X), got {:?}",
                        header.shape
                    )));
                }
                let classes = header.shape[0];
                if header.classes.is_some_and(|c| c != classes) {
                    return Err(Error::HeaderMismatch(format!(
                        "classes {:?} disagrees with leading extent {classes}",
                        header.classes
                    )));
                }
                let map = ProbMap::from_parts(classes, shape3(&header.shape[1..])?, floats())?
                    .with_spacing(header.spacing)?;
                Ok(StoredVolume::Prob(validate_prob_map(map)?))
            }
            (VolumeKind::Scalar, Dtype::F32) => Ok(StoredVolume::Scalar(
                Volume::new(shape3(&header.shape)?, floats())?.with_spacing(header.spacing)?,
            )),
            (kind, dtype) => Err(Error::UnsupportedDtype(format!(
                "{} for {kind:?} volumes",
                dtype.name()
            ))),
        }
    }
}

pub fn store_label_map(map: &LabelMap, path: &Path) -> Result<()> {
    StoredVolume::Label(map.clone()).store(path)
}

pub fn store_prob_map(map: &ProbMap, path: &Path) -> Result<()> {
    StoredVolume::Prob(map.clone()).store(path)
}

pub fn load_label_map(path: &Path) -> Result<LabelMap> {
    match StoredVolume::load(path)? {
        StoredVolume::Label(m) => Ok(m),
        _ => Err(Error::HeaderMismatch(format!(
            "{} is not a label volume",
            path.display()
        ))),
    }
}

pub fn load_prob_map(path: &Path) -> Result<ProbMap> {
    match StoredVolume::load(path)? {
        StoredVolume::Prob(p) => Ok(p),
        _ => Err(Error::HeaderMismatch(format!(
            "{} is not a probability volume",
            path.display()
        ))),
    }
}
