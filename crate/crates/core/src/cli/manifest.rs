use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleKind;
use crate::error::{Error, Result};
use crate::metrics::majority_consensus;
use crate::volume::{load_label_map, load_prob_map, payload_path, LabelMap, ProbMap, Shape};

pub const MANIFEST_SCHEMA: &str = "uqseg-manifest/v1";

/// On-disk manifest layout. Paths are relative to the manifest's directory
/// unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    #[serde(rename = "$schema", default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub dataset: String,
    pub classes: usize,
    /// Free-form provenance, e.g. `"surrogate"` for simulated predictions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub cases: Vec<ManifestFileCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFileCase {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default)]
    pub ood: bool,
    pub members: MemberPaths,
    pub raters: Vec<String>,
    /// A label-map path or `"majority"`.
    #[serde(default = "majority")]
    pub consensus: String,
}

fn majority() -> String {
    "majority".to_owned()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberPaths {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cv: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub de: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Consensus {
    Majority,
    Path(PathBuf),
}

/// A validated case with resolved paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestCase {
    pub id: String,
    /// Image or patient group; defaults to the case id.
    pub group: String,
    pub ood: bool,
    pub cv: Vec<PathBuf>,
    pub de: Vec<PathBuf>,
    pub raters: Vec<PathBuf>,
    pub consensus: Consensus,
}

impl ManifestCase {
    pub fn members(&self, kind: EnsembleKind) -> &[PathBuf] {
        match kind {
            EnsembleKind::Cv => &self.cv,
            EnsembleKind::De => &self.de,
            EnsembleKind::Other => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub dataset: String,
    pub classes: usize,
    pub source: Option<String>,
    pub cases: Vec<ManifestCase>,
}

/// Volumes of one case, loaded and checked for shape consistency.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCase {
    pub cv: Vec<ProbMap>,
    pub de: Vec<ProbMap>,
    pub raters: Vec<LabelMap>,
    pub consensus: LabelMap,
}

impl LoadedCase {
    pub fn members(&self, kind: EnsembleKind) -> &[ProbMap] {
        match kind {
            EnsembleKind::Cv => &self.cv,
            EnsembleKind::De => &self.de,
            EnsembleKind::Other => &[],
        }
    }
}

impl Manifest {
    /// Ensemble kinds every case provides, CV first.
    pub fn kinds(&self) -> Vec<EnsembleKind> {
        let mut kinds = Vec::new();
        if self.cases.first().is_some_and(|c| !c.cv.is_empty()) {
            kinds.push(EnsembleKind::Cv);
        }
        if self.cases.first().is_some_and(|c| !c.de.is_empty()) {
            kinds.push(EnsembleKind::De);
        }
        kinds
    }

    /// Loads every volume of `case`. Shape and class mismatches surface
    /// here rather than at parse time.
    pub fn load_case(&self, case: &ManifestCase) -> Result<LoadedCase> {
        let inconsistent = |detail: String| Error::ShapeInconsistency {
            case: case.id.clone(),
            detail,
        };
        let mut shape: Option<(Shape, PathBuf)> = None;
        let mut check = |s: Shape, classes: usize, path: &Path| -> Result<()> {
            if classes != self.classes {
                return Err(inconsistent(format!(
                    "{} has {classes} classes, manifest declares {}",
                    path.display(),
                    self.classes
                )));
            }
            match &shape {
                Some((first, first_path)) if *first != s => Err(inconsistent(format!(
                    "{} has shape {s:?}, {} has {first:?}",
                    path.display(),
                    first_path.display()
                ))),
                Some(_) => Ok(()),
                None => {
                    shape = Some((s, path.to_owned()));
                    Ok(())
                }
            }
        };
        let mut probs = |paths: &[PathBuf]| -> Result<Vec<ProbMap>> {
            paths
                .iter()
                .map(|p| {
                    let map = load_prob_map(p)?;
                    check(map.shape(), map.classes(), p)?;
                    Ok(map)
                })
                .collect()
        };
        let cv = probs(&case.cv)?;
        let de = probs(&case.de)?;
        let mut labels = |p: &Path| -> Result<LabelMap> {
            let map = load_label_map(p)?;
            check(map.shape(), map.classes(), p)?;
            Ok(map)
        };
        let raters = case
            .raters
            .iter()
            .map(|p| labels(p))
            .collect::<Result<Vec<_>>>()?;
        let consensus = match &case.consensus {
            Consensus::Majority => majority_consensus(&raters, self.classes)?,
            Consensus::Path(p) => labels(p)?,
        };
        Ok(LoadedCase {
            cv,
            de,
            raters,
            consensus,
        })
    }
}

/// Reads and validates a manifest; see [`parse_manifest_str`].
pub fn parse_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest_str(&text, base)
}

/// Parses manifest JSON, resolving relative paths against `base`.
///
/// Every referenced volume (sidecar and payload) must exist. Shapes are
/// only checked when a case is loaded.
pub fn parse_manifest_str(text: &str, base: &Path) -> Result<Manifest> {
    let file: ManifestFile =
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    if let Some(schema) = &file.schema {
        if schema != MANIFEST_SCHEMA {
            return Err(Error::Schema(format!(
                "unsupported $schema `{schema}`, expected `{MANIFEST_SCHEMA}`"
            )));
        }
    }
    if !(2..=256).contains(&file.classes) {
        return Err(Error::Schema(format!("classes must be in 2..=256, got {}", file.classes)));
    }
    if file.cases.is_empty() {
        return Err(Error::Schema("manifest lists no cases".into()));
    }

    let mut seen = BTreeSet::new();
    let first = &file.cases[0].members;
    let (n_cv, n_de) = (first.cv.len(), first.de.len());
    if n_cv == 0 && n_de == 0 {
        return Err(Error::Schema(format!(
            "case `{}` lists no ensemble members",
            file.cases[0].id
        )));
    }
    let mut cases = Vec::with_capacity(file.cases.len());
    for c in &file.cases {
        if !seen.insert(c.id.as_str()) {
            return Err(Error::Schema(format!("duplicate case id `{}`", c.id)));
        }
        if c.members.cv.len() != n_cv || c.members.de.len() != n_de {
            return Err(Error::Schema(format!(
                "case `{}` has {} CV and {} DE members, the first case has {n_cv} and {n_de}",
                c.id,
                c.members.cv.len(),
                c.members.de.len()
            )));
        }
        if c.raters.is_empty() {
            return Err(Error::Schema(format!("case `{}` lists no raters", c.id)));
        }
        let resolve = |p: &str| -> Result<PathBuf> {
            let path = base.join(p);
            for required in [path.clone(), payload_path(&path)] {
                if !required.is_file() {
                    return Err(Error::DanglingPath {
                        case: c.id.clone(),
                        path: required,
                    });
                }
            }
            Ok(path)
        };
        let all = |ps: &[String]| ps.iter().map(|p| resolve(p)).collect::<Result<Vec<_>>>();
        cases.push(ManifestCase {
            id: c.id.clone(),
            group: c.group.clone().unwrap_or_else(|| c.id.clone()),
            ood: c.ood,
            cv: all(&c.members.cv)?,
            de: all(&c.members.de)?,
            raters: all(&c.raters)?,
            consensus: if c.consensus == "majority" {
                Consensus::Majority
            } else {
                Consensus::Path(resolve(&c.consensus)?)
            },
        });
    }
    Ok(Manifest {
        dataset: file.dataset,
        classes: file.classes,
        source: file.source,
        cases,
    })
}
