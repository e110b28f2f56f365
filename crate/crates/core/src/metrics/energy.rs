use crate::error::{Error, Result};
use crate::metrics::consensus::check_same_shape;
use crate::metrics::overlap::SegDistance;
use crate::volume::LabelMap;

/// Mean distance over all ordered pairs of one set, diagonal included.
fn within_set(set: &[LabelMap], classes: usize, distance: SegDistance) -> Result<f64> {
    let mut sum = 0.0;
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            sum += distance.distance(&set[i], &set[j], classes)?;
        }
    }
    let n = set.len() as f64;
    Ok(2.0 * sum / (n * n))
}

/// Generalized energy distance between ensemble member predictions and
/// rater annotations:
///
/// `sqrt(max(0, 2 E[d(y_m, y_n)] - E[d(y_m, y_m')] - E[d(y_n, y_n')]))`
///
/// Within-set expectations include identical pairs, whose distance is 0.
pub fn ged(
    members: &[LabelMap],
    raters: &[LabelMap],
    classes: usize,
    distance: SegDistance,
) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if raters.is_empty() {
        return Err(Error::TooFewRaters(0));
    }
    check_same_shape(&members.iter().chain(raters).collect::<Vec<_>>())?;

    let mut cross = 0.0;
    for m in members {
        for r in raters {
            cross += distance.distance(m, r, classes)?;
        }
    }
    cross /= (members.len() * raters.len()) as f64;
    let inside = 2.0 * cross
        - within_set(members, classes, distance)?
        - within_set(raters, classes, distance)?;
    Ok(inside.max(0.0).sqrt())
}
