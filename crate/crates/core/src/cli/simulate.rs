use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simkit::{build_ensembles, make_phantom_dataset, ExperimentConfig, PhantomSpec, SurrogateMember};
use crate::splits::{audit_leakage, de_plan, grouped_kfold, DePlan, Fold, TrainingItem};
use crate::volume::{store_label_map, store_prob_map, StoredVolume, Volume};

use super::manifest::{ManifestFile, ManifestFileCase, MemberPaths, MANIFEST_SCHEMA};

/// Input of `simulate`: the phantom dataset and the two surrogate ensembles.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub dataset: Option<String>,
    pub phantom: PhantomSpec,
    pub experiment: ExperimentConfig,
}

#[derive(Serialize)]
struct MembersFile<'a> {
    /// The members are parametric stand-ins, not trained networks.
    source: &'static str,
    cv: &'a [SurrogateMember],
    de: &'a [SurrogateMember],
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("json encoding: {e}")))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Generates a phantom dataset with CV and DE surrogate predictions and
/// writes it as a manifest plus UQV volumes. Returns the manifest path.
pub fn cmd_simulate(config: &SimulationConfig, out_dir: &Path) -> Result<PathBuf> {
    let data = make_phantom_dataset(&config.phantom)?;
    let ensembles = build_ensembles(&data, &config.experiment)?;
    let vol_dir = out_dir.join("volumes");
    fs::create_dir_all(&vol_dir).map_err(|e| Error::io(&vol_dir, e))?;

    let mut cases = Vec::with_capacity(data.cases.len());
    for case in &data.cases {
        let rel = |name: String| format!("volumes/{}_{name}.json", case.id);
        let abs = |r: &str| out_dir.join(r);

        let image = rel("image".into());
        StoredVolume::Scalar(case.image.clone()).store(&abs(&image))?;
        let distance = rel("distance".into());
        let d32 = Volume::new(
            case.distance.shape(),
            case.distance.data().iter().map(|&v| v as f32).collect(),
        )?;
        StoredVolume::Scalar(d32).store(&abs(&distance))?;

        let mut raters = Vec::new();
        for (n, r) in case.raters.iter().enumerate() {
            let p = rel(format!("rater{n}"));
            store_label_map(r, &abs(&p))?;
            raters.push(p);
        }
        let consensus = rel("consensus".into());
        store_label_map(&case.consensus, &abs(&consensus))?;

        let (cv, de) = ensembles.predict(case, &data.thresholds)?;
        let store = |tag: &str, maps: &[crate::volume::ProbMap]| -> Result<Vec<String>> {
            maps.iter()
                .enumerate()
                .map(|(k, m)| {
                    let p = rel(format!("{tag}{k}"));
                    store_prob_map(m, &abs(&p))?;
                    Ok(p)
                })
                .collect()
        };
        let members = MemberPaths {
            cv: store("cv", &cv)?,
            de: store("de", &de)?,
        };
        cases.push(ManifestFileCase {
            id: case.id.clone(),
            group: Some(case.id.clone()),
            ood: case.ood,
            members,
            raters,
            consensus,
        });
    }

    let manifest = ManifestFile {
        schema: Some(MANIFEST_SCHEMA.to_owned()),
        dataset: config.dataset.clone().unwrap_or_else(|| "phantom".to_owned()),
        classes: data.spec.classes,
        source: Some("surrogate".to_owned()),
        cases,
    };
    let manifest_path = out_dir.join("manifest.json");
    write_json(&manifest_path, &manifest)?;
    write_json(&out_dir.join("splits.json"), &ensembles.plan.folds)?;
    write_json(
        &out_dir.join("members.json"),
        &MembersFile {
            source: "surrogate",
            cv: &ensembles.cv,
            de: &ensembles.de,
        },
    )?;
    Ok(manifest_path)
}

/// Output of `split-plan`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlanFile {
    pub folds: Vec<Fold>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub de: Option<DePlan>,
}

/// Reads an `item_id,image_id,rater_id` CSV.
pub fn read_items(path: &Path) -> Result<Vec<TrainingItem>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Schema(format!("{}: {other:?}", path.display())),
    })?;
    reader
        .deserialize()
        .map(|row| row.map_err(|e| Error::Schema(format!("{}: {e}", path.display()))))
        .collect()
}

/// Image-grouped folds for `items`, audited for leakage, plus an optional
/// deep-ensemble plan of `members` members.
pub fn split_plan(items: &[TrainingItem], folds: usize, members: Option<usize>, seed: u64) -> Result<SplitPlanFile> {
    let plan = grouped_kfold(items, folds, seed)?;
    let violations = audit_leakage(&plan);
    if !violations.is_empty() {
        return Err(Error::InvalidArgument(format!("split plan failed its audit: {violations:?}")));
    }
    let de = members.map(|m| de_plan(items, m, seed)).transpose()?;
    Ok(SplitPlanFile { folds: plan.folds, de })
}
