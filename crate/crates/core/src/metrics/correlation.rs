use crate::error::{Error, Result};
use crate::volume::ScalarMap;

/// Pearson correlation between two voxel maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub value: f64,
    /// Set when either map is constant over the domain; `value` is then 0.
    pub degenerate: bool,
}

/// Normalized cross-correlation over the voxels selected by `mask`
/// (all voxels when `None`).
pub fn ncc(a: &ScalarMap, b: &ScalarMap, mask: Option<&[bool]>) -> Result<Correlation> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if mask.is_some_and(|m| m.len() != a.len()) {
        return Err(Error::ShapeMismatch("mask length".into()));
    }
    let pairs: Vec<(f64, f64)> = a
        .data()
        .iter()
        .zip(b.data())
        .enumerate()
        .filter(|(v, _)| mask.map_or(true, |m| m[*v]))
        .map(|(_, (&x, &y))| (x, y))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::TooFewVoxels(pairs.len()));
    }
    let constant = |pick: fn(&(f64, f64)) -> f64| {
        let first = pick(&pairs[0]);
        pairs.iter().all(|p| pick(p) == first)
    };
    if constant(|p| p.0) || constant(|p| p.1) {
        log::warn!("ncc: constant input map, reporting 0");
        return Ok(Correlation {
            value: 0.0,
            degenerate: true,
        });
    }
    let n = pairs.len() as f64;
    let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        let (da, db) = (x - mean_a, y - mean_b);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    Ok(Correlation {
        value: (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0),
        degenerate: false,
    })
}
