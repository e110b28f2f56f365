use crate::error::{Error, Result};
use crate::volume::{LabelMap, Volume};

pub(crate) fn check_same_shape(maps: &[&LabelMap]) -> Result<()> {
    if let Some(first) = maps.first() {
        if let Some(other) = maps.iter().find(|m| m.shape() != first.shape()) {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                first.shape(),
                other.shape()
            )));
        }
    }
    Ok(())
}

/// Per-voxel majority label across raters; ties go to the lowest class.
pub fn majority_consensus(raters: &[LabelMap], classes: usize) -> Result<LabelMap> {
    let first = raters.first().ok_or(Error::TooFewRaters(0))?;
    check_same_shape(&raters.iter().collect::<Vec<_>>())?;
    let n = first.len();
    let mut votes = vec![0u32; classes];
    let mut out = Vec::with_capacity(n);
    for v in 0..n {
        votes.iter_mut().for_each(|c| *c = 0);
        for r in raters {
            let l = usize::from(r.labels()[v]);
            if l >= classes {
                return Err(Error::LabelOutOfRange {
                    voxel: v,
                    label: l as u8,
                    classes,
                });
            }
            votes[l] += 1;
        }
        let mut best = 0;
        for c in 1..classes {
            if votes[c] > votes[best] {
                best = c;
            }
        }
        out.push(best as u8);
    }
    LabelMap::new(
        Volume::new(first.shape(), out)?.with_spacing(first.spacing())?,
        classes,
    )
}
