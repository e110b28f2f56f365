use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::majority_consensus;
use crate::rng::{derive_seed, shuffle, stream_rng, unit_f64, uniform_index, StreamRng};
use crate::volume::{LabelMap, ScalarMap, Shape, Volume};

const CASE_STREAM: u64 = 0x5ca5e;
const OOD_STREAM: u64 = 0x00d;

/// Configuration of a synthetic multi-rater dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    /// Grid extent `[Z, Y, X]`.
    pub grid: Shape,
    pub classes: usize,
    pub n_cases: usize,
    pub raters: usize,
    /// Spread of rater boundary offsets, in voxels.
    pub sigma_rater: f64,
    /// Number of distinct concept variants ID cases draw from.
    pub n_concepts: usize,
    /// Probability that an ID case carries a concept variant.
    pub concept_rate: f64,
    /// Fraction of cases held out as out-of-distribution.
    pub ood_fraction: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            grid: [32, 32, 32],
            classes: 2,
            n_cases: 60,
            raters: 3,
            sigma_rater: 1.0,
            n_concepts: 200,
            concept_rate: 1.0,
            ood_fraction: 0.0,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    /// Concept tag reserved for out-of-distribution cases; no training set
    /// ever contains it.
    pub fn ood_concept(&self) -> u32 {
        self.n_concepts as u32
    }

    pub fn validate(&self) -> Result<()> {
        let min_dim = self.grid.iter().copied().min().unwrap_or(0);
        if min_dim < 8 {
            return Err(Error::DegenerateSpec(format!(
                "grid {:?} is too small for the phantom object (every extent must be >= 8)",
                self.grid
            )));
        }
        if !(2..=8).contains(&self.classes) {
            return Err(Error::DegenerateSpec(format!(
                "classes must be in 2..=8, got {}",
                self.classes
            )));
        }
        if self.n_cases == 0 || self.raters == 0 {
            return Err(Error::DegenerateSpec("need at least one case and one rater".into()));
        }
        if !(self.sigma_rater >= 0.0 && self.sigma_rater.is_finite()) {
            return Err(Error::DegenerateSpec("sigma_rater must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.concept_rate) || !(0.0..=1.0).contains(&self.ood_fraction) {
            return Err(Error::DegenerateSpec(
                "concept_rate and ood_fraction must lie in [0, 1]".into(),
            ));
        }
        if self.n_concepts == 0 && self.concept_rate > 0.0 {
            return Err(Error::DegenerateSpec("concept_rate > 0 needs n_concepts > 0".into()));
        }
        Ok(())
    }

    /// Number of out-of-distribution cases.
    pub fn ood_cases(&self) -> usize {
        (self.ood_fraction * self.n_cases as f64).round() as usize
    }
}

/// Where a concept variant lives in a case: a protrusion of the object
/// whose neighbourhood (a ball of radius `reach`) is the region a member
/// without exposure to the concept gets wrong.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConceptRegion {
    pub tag: u32,
    pub center: [f64; 3],
    pub radius: f64,
    pub reach: f64,
}

impl ConceptRegion {
    /// Smooth weight in `[0, 1]`, 1 at the centre and 0 from `reach` on.
    pub fn weight(&self, p: [f64; 3]) -> f64 {
        let d2: f64 = (0..3).map(|a| (p[a] - self.center[a]).powi(2)).sum();
        let s = d2 / (self.reach * self.reach);
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - s) * (1.0 - s)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomCase {
    pub id: String,
    pub index: usize,
    pub ood: bool,
    /// Noisy intensity image.
    pub image: Volume<f32>,
    /// Signed distance to the ground-truth surface, positive inside.
    pub distance: ScalarMap,
    pub raters: Vec<LabelMap>,
    pub consensus: LabelMap,
    pub concepts: Vec<ConceptRegion>,
}

impl PhantomCase {
    pub fn concept_tags(&self) -> impl Iterator<Item = u32> + '_ {
        self.concepts.iter().map(|c| c.tag)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomDataset {
    pub spec: PhantomSpec,
    pub cases: Vec<PhantomCase>,
    /// Distance thresholds separating class `c - 1` from class `c`.
    pub thresholds: Vec<f64>,
}

pub(crate) fn coords(shape: Shape, v: usize) -> [f64; 3] {
    [
        (v / (shape[1] * shape[2])) as f64,
        ((v / shape[2]) % shape[1]) as f64,
        (v % shape[2]) as f64,
    ]
}

fn uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit_f64(rng)
}

fn normal(rng: &mut StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

fn unit_vector(rng: &mut StreamRng) -> [f64; 3] {
    loop {
        let v = [normal(rng), normal(rng), normal(rng)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-9 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Sum of three random plane waves, a smooth field of unit-order amplitude.
struct WaveField {
    waves: Vec<([f64; 3], f64, f64)>,
}

impl WaveField {
    fn new(rng: &mut StreamRng, grid_min: f64, amplitude: f64) -> Self {
        let waves = (0..3)
            .map(|_| {
                let dir = unit_vector(rng);
                let k = 2.0 * std::f64::consts::PI / (grid_min * uniform(rng, 0.5, 1.0));
                let phase = uniform(rng, 0.0, 2.0 * std::f64::consts::PI);
                ([dir[0] * k, dir[1] * k, dir[2] * k], phase, amplitude)
            })
            .collect();
        Self { waves }
    }

    fn at(&self, p: [f64; 3]) -> f64 {
        self.waves
            .iter()
            .map(|(k, phase, a)| a * (k[0] * p[0] + k[1] * p[1] + k[2] * p[2] + phase).sin())
            .sum()
    }
}

/// Class of a voxel with signed distance `d`: how many thresholds it clears.
pub(crate) fn class_of(d: f64, thresholds: &[f64]) -> u8 {
    thresholds.iter().filter(|&&t| d > t).count() as u8
}

/// Generates the dataset. Case `i` draws everything from stream `i` of a
/// seed derived from `spec.seed`, so cases can be produced independently.
pub fn make_phantom_dataset(spec: &PhantomSpec) -> Result<PhantomDataset> {
    spec.validate()?;
    let grid_min = spec.grid.iter().copied().min().unwrap_or(0) as f64;
    let case_seed = derive_seed(spec.seed, CASE_STREAM);

    let mut order: Vec<usize> = (0..spec.n_cases).collect();
    shuffle(&mut stream_rng(derive_seed(spec.seed, OOD_STREAM), 0), &mut order);
    let mut ood = vec![false; spec.n_cases];
    for &i in order.iter().take(spec.ood_cases()) {
        ood[i] = true;
    }

    // radius range; the inner shells of multi-class phantoms split it evenly
    let r_lo = 0.22 * grid_min;
    let r_hi = 0.3 * grid_min;
    let thresholds: Vec<f64> = (1..spec.classes)
        .map(|c| (c - 1) as f64 * r_lo / spec.classes as f64)
        .collect();

    let cases = (0..spec.n_cases)
        .map(|i| {
            let mut rng = stream_rng(case_seed, i as u64);
            make_case(spec, i, ood[i], &thresholds, (r_lo, r_hi), &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhantomDataset {
        spec: spec.clone(),
        cases,
        thresholds,
    })
}

fn make_case(
    spec: &PhantomSpec,
    index: usize,
    ood: bool,
    thresholds: &[f64],
    (r_lo, r_hi): (f64, f64),
    rng: &mut StreamRng,
) -> Result<PhantomCase> {
    let shape = spec.grid;
    let grid_min = shape.iter().copied().min().unwrap_or(0) as f64;
    let radius = uniform(rng, r_lo, r_hi);
    // jitter the centre as far as the protrusion still fits
    let center: [f64; 3] = std::array::from_fn(|a| {
        let dim = shape[a] as f64;
        let slack = (dim / 2.0 - 1.5 * radius - 1.0).clamp(0.0, 2.0);
        (dim - 1.0) / 2.0 + uniform(rng, -slack, slack)
    });

    let tag = if ood {
        Some(spec.ood_concept())
    } else if spec.concept_rate > 0.0 && unit_f64(rng) < spec.concept_rate {
        Some(uniform_index(rng, spec.n_concepts) as u32)
    } else {
        None
    };
    let concepts: Vec<ConceptRegion> = tag
        .map(|tag| {
            let dir = unit_vector(rng);
            let bump = uniform(rng, 0.3, 0.7) * radius;
            ConceptRegion {
                tag,
                center: std::array::from_fn(|a| center[a] + radius * dir[a]),
                radius: bump,
                reach: 2.0 * bump,
            }
        })
        .into_iter()
        .collect();

    let n: usize = shape.iter().product();
    let distance: Vec<f64> = (0..n)
        .map(|v| {
            let p = coords(shape, v);
            let dist = |c: [f64; 3]| (0..3).map(|a| (p[a] - c[a]).powi(2)).sum::<f64>().sqrt();
            concepts
                .iter()
                .fold(radius - dist(center), |d, c| d.max(c.radius - dist(c.center)))
        })
        .collect();

    let raters = (0..spec.raters)
        .map(|_| {
            let offset = spec.sigma_rater * normal(rng);
            let field = WaveField::new(rng, grid_min, 0.4 * spec.sigma_rater);
            let labels: Vec<u8> = distance
                .iter()
                .enumerate()
                .map(|(v, &d)| {
                    let shifted = if spec.sigma_rater > 0.0 {
                        d + offset + field.at(coords(shape, v))
                    } else {
                        d
                    };
                    class_of(shifted, thresholds)
                })
                .collect();
            LabelMap::from_vec(shape, labels, spec.classes)
        })
        .collect::<Result<Vec<_>>>()?;
    let consensus = majority_consensus(&raters, spec.classes)?;

    let image: Vec<f32> = distance
        .iter()
        .map(|&d| (1.0 / (1.0 + (-d).exp()) + 0.1 * normal(rng)) as f32)
        .collect();

    Ok(PhantomCase {
        id: format!("case{index:03}"),
        index,
        ood,
        image: Volume::new(shape, image)?,
        distance: Volume::new(shape, distance)?,
        raters,
        consensus,
        concepts,
    })
}
