//! Brute-force reference implementations and random fixtures shared by the
//! integration tests. Everything here works on plain vectors and loops over
//! voxels, pairs and bins explicitly; none of it calls the library's metric
//! code.

#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;

use uqseg::rng::{stream_rng, uniform_index, unit_f64};
use uqseg::volume::{LabelMap, ProbMap, Shape};

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

// ---------------------------------------------------------------- overlap

fn class_overlap(a: &[u8], b: &[u8], c: u8) -> (usize, usize, usize) {
    let mut inter = 0;
    let mut na = 0;
    let mut nb = 0;
    for v in 0..a.len() {
        if a[v] == c {
            na += 1;
        }
        if b[v] == c {
            nb += 1;
        }
        if a[v] == c && b[v] == c {
            inter += 1;
        }
    }
    (inter, na, nb)
}

pub fn dsc(a: &[u8], b: &[u8], classes: usize) -> f64 {
    let mut total = 0.0;
    for c in 1..classes {
        let (inter, na, nb) = class_overlap(a, b, c as u8);
        total += if na + nb == 0 {
            1.0
        } else {
            2.0 * inter as f64 / (na + nb) as f64
        };
    }
    total / (classes - 1) as f64
}

pub fn iou(a: &[u8], b: &[u8], classes: usize) -> f64 {
    let mut total = 0.0;
    for c in 1..classes {
        let (inter, na, nb) = class_overlap(a, b, c as u8);
        let union = na + nb - inter;
        total += if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        };
    }
    total / (classes - 1) as f64
}

// ------------------------------------------------------------- ensembles

/// Member maps are class-major: `p[c * n + v]`.
pub fn mean_probs(members: &[Vec<f32>]) -> Vec<f32> {
    let len = members[0].len();
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let mut sum = 0.0f64;
        for m in members {
            sum += f64::from(m[i]);
        }
        out.push((sum / members.len() as f64) as f32);
    }
    out
}

pub fn argmax(p: &[f32], classes: usize) -> Vec<u8> {
    let n = p.len() / classes;
    (0..n)
        .map(|v| {
            let mut best = 0;
            for c in 1..classes {
                if p[c * n + v] > p[best * n + v] {
                    best = c;
                }
            }
            best as u8
        })
        .collect()
}

pub fn confidence(p: &[f32], classes: usize) -> Vec<f64> {
    let n = p.len() / classes;
    (0..n)
        .map(|v| (0..classes).map(|c| f64::from(p[c * n + v])).fold(f64::MIN, f64::max))
        .collect()
}

pub fn entropy(p: &[f32], classes: usize) -> Vec<f64> {
    let n = p.len() / classes;
    (0..n)
        .map(|v| {
            let mut h = 0.0;
            for c in 0..classes {
                let q = f64::from(p[c * n + v]);
                if q > 0.0 {
                    h -= q * q.ln();
                }
            }
            h / (classes as f64).ln()
        })
        .collect()
}

pub fn rater_variance(raters: &[Vec<u8>], classes: usize) -> Vec<f64> {
    let n = raters[0].len();
    (0..n)
        .map(|v| {
            let mut total = 0.0;
            for c in 0..classes {
                let f = raters.iter().filter(|r| r[v] as usize == c).count() as f64 / raters.len() as f64;
                total += f * (1.0 - f);
            }
            total
        })
        .collect()
}

pub fn disagreement(labels: &[Vec<u8>], classes: usize) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            total += 1.0 - dsc(&labels[i], &labels[j], classes);
            pairs += 1;
        }
    }
    total / pairs as f64
}

pub fn majority(raters: &[Vec<u8>], classes: usize) -> Vec<u8> {
    (0..raters[0].len())
        .map(|v| {
            let mut best = 0;
            let mut best_count = 0;
            for c in 0..classes {
                let count = raters.iter().filter(|r| r[v] as usize == c).count();
                if count > best_count {
                    best = c;
                    best_count = count;
                }
            }
            best as u8
        })
        .collect()
}

// ------------------------------------------------------------ calibration

/// Bin `m` of `n` holds `m/n <= conf < (m+1)/n`; the last bin also holds 1.
fn in_equal_width_bin(conf: f64, m: usize, n: usize) -> bool {
    let lo = m as f64 / n as f64;
    let hi = (m + 1) as f64 / n as f64;
    if m == n - 1 {
        conf >= lo
    } else if m == 0 {
        conf < hi
    } else {
        conf >= lo && conf < hi
    }
}

/// `(count, mean confidence, rater-averaged accuracy)` per bin.
pub fn bins(
    conf: &[f64],
    pred: &[u8],
    raters: &[Vec<u8>],
    domain: &[bool],
    n_bins: usize,
    equal_mass: bool,
) -> Vec<(usize, f64, f64)> {
    let members: Vec<Vec<usize>> = if equal_mass {
        let mut ranked: Vec<usize> = (0..conf.len()).filter(|&v| domain[v]).collect();
        ranked.sort_by(|&a, &b| conf[a].partial_cmp(&conf[b]).unwrap().then(a.cmp(&b)));
        let total = ranked.len();
        (0..n_bins)
            .map(|m| {
                ranked
                    .iter()
                    .enumerate()
                    .filter(|(rank, _)| rank * n_bins / total == m)
                    .map(|(_, &v)| v)
                    .collect()
            })
            .collect()
    } else {
        (0..n_bins)
            .map(|m| {
                (0..conf.len())
                    .filter(|&v| domain[v] && in_equal_width_bin(conf[v], m, n_bins))
                    .collect()
            })
            .collect()
    };
    members
        .iter()
        .map(|voxels| {
            if voxels.is_empty() {
                return (0, 0.0, 0.0);
            }
            let mut conf_sum = 0.0;
            let mut agree = 0usize;
            for &v in voxels {
                conf_sum += conf[v];
                for r in raters {
                    if r[v] == pred[v] {
                        agree += 1;
                    }
                }
            }
            (
                voxels.len(),
                conf_sum / voxels.len() as f64,
                agree as f64 / (voxels.len() * raters.len()) as f64,
            )
        })
        .collect()
}

pub fn ace(conf: &[f64], pred: &[u8], raters: &[Vec<u8>], domain: &[bool], n_bins: usize, equal_mass: bool) -> f64 {
    let filled: Vec<_> = bins(conf, pred, raters, domain, n_bins, equal_mass)
        .into_iter()
        .filter(|b| b.0 > 0)
        .collect();
    filled.iter().map(|b| (b.2 - b.1).abs()).sum::<f64>() / filled.len() as f64
}

pub fn ece(conf: &[f64], pred: &[u8], raters: &[Vec<u8>], domain: &[bool], n_bins: usize, equal_mass: bool) -> f64 {
    let total = domain.iter().filter(|&&d| d).count() as f64;
    bins(conf, pred, raters, domain, n_bins, equal_mass)
        .into_iter()
        .filter(|b| b.0 > 0)
        .map(|b| b.0 as f64 / total * (b.2 - b.1).abs())
        .sum()
}

fn coords(shape: Shape, v: usize) -> [i64; 3] {
    [
        (v / (shape[1] * shape[2])) as i64,
        ((v / shape[2]) % shape[1]) as i64,
        (v % shape[2]) as i64,
    ]
}

fn chebyshev(a: [i64; 3], b: [i64; 3]) -> i64 {
    (0..3).map(|i| (a[i] - b[i]).abs()).max().unwrap()
}

/// Voxels within Chebyshev distance `radius` of a voxel that has a
/// differently labelled neighbour among its 26.
pub fn band(labels: &[u8], shape: Shape, radius: usize) -> Vec<bool> {
    let n = labels.len();
    let boundary: Vec<bool> = (0..n)
        .map(|v| {
            let cv = coords(shape, v);
            (0..n).any(|w| chebyshev(cv, coords(shape, w)) == 1 && labels[w] != labels[v])
        })
        .collect();
    (0..n)
        .map(|v| {
            let cv = coords(shape, v);
            (0..n).any(|w| boundary[w] && chebyshev(cv, coords(shape, w)) <= radius as i64)
        })
        .collect()
}

// ------------------------------------------------------------ correlation

/// Pearson correlation over `domain`; 0 when either side is constant.
pub fn ncc(a: &[f64], b: &[f64], domain: &[bool]) -> f64 {
    let idx: Vec<usize> = (0..a.len()).filter(|&v| domain[v]).collect();
    let n = idx.len() as f64;
    let ma = idx.iter().map(|&v| a[v]).sum::<f64>() / n;
    let mb = idx.iter().map(|&v| b[v]).sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for &v in &idx {
        sab += (a[v] - ma) * (b[v] - mb);
        saa += (a[v] - ma).powi(2);
        sbb += (b[v] - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

// ----------------------------------------------------------------- energy

pub fn ged(members: &[Vec<u8>], raters: &[Vec<u8>], classes: usize, dice: bool) -> f64 {
    let d = |a: &[u8], b: &[u8]| {
        if dice {
            1.0 - dsc(a, b, classes)
        } else {
            1.0 - iou(a, b, classes)
        }
    };
    let mean_over = |xs: &[Vec<u8>], ys: &[Vec<u8>]| {
        let mut total = 0.0;
        for x in xs {
            for y in ys {
                total += d(x, y);
            }
        }
        total / (xs.len() * ys.len()) as f64
    };
    let value = 2.0 * mean_over(members, raters) - mean_over(members, members) - mean_over(raters, raters);
    value.max(0.0).sqrt()
}

// -------------------------------------------------------------- selective

/// Risks in retention order: ascending `u`, then case id.
pub fn retained_risks(scores: &[(String, f64, f64)]) -> Vec<f64> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    sorted.into_iter().map(|s| s.2).collect()
}

pub fn curve(scores: &[(String, f64, f64)]) -> Vec<f64> {
    let risks = retained_risks(scores);
    (1..=risks.len())
        .map(|k| {
            let mut sum = 0.0;
            for r in &risks[..k] {
                sum += r;
            }
            sum / k as f64
        })
        .collect()
}

pub fn aurc(scores: &[(String, f64, f64)]) -> f64 {
    let c = curve(scores);
    let mut sum = 0.0;
    for r in &c {
        sum += r;
    }
    sum / c.len() as f64
}

// ------------------------------------------------------------------ stats

/// Case indices of resample `b`, drawn from the documented stream.
pub fn draw(seed: u64, b: usize, n: usize) -> Vec<usize> {
    let mut rng = stream_rng(seed, b as u64);
    (0..n).map(|_| uniform_index(&mut rng, n)).collect()
}

pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 >= s.len() {
        return s[lo];
    }
    s[lo] + (h - lo as f64) * (s[lo + 1] - s[lo])
}

/// `(ci_low, ci_high, p)` of resampled statistics.
pub fn summarize(stats: &[f64]) -> (f64, f64, f64) {
    let below = stats.iter().filter(|&&d| d <= 0.0).count();
    let above = stats.iter().filter(|&&d| d >= 0.0).count();
    let p = (2.0 * (below.min(above) + 1) as f64 / (stats.len() + 1) as f64).min(1.0);
    (percentile(stats, 0.025), percentile(stats, 0.975), p)
}

// --------------------------------------------------------------- fixtures

pub struct RandomCase {
    pub shape: Shape,
    pub classes: usize,
    pub members: Vec<Vec<f32>>,
    pub raters: Vec<Vec<u8>>,
    pub consensus: Vec<u8>,
}

impl RandomCase {
    pub fn member_maps(&self) -> Vec<ProbMap> {
        self.members
            .iter()
            .map(|m| ProbMap::new(self.classes, self.shape, m.clone()).unwrap())
            .collect()
    }

    pub fn rater_maps(&self) -> Vec<LabelMap> {
        self.raters
            .iter()
            .map(|r| LabelMap::from_vec(self.shape, r.clone(), self.classes).unwrap())
            .collect()
    }

    pub fn consensus_map(&self) -> LabelMap {
        LabelMap::from_vec(self.shape, self.consensus.clone(), self.classes).unwrap()
    }
}

/// A noisy nested-sphere case: raters and members jitter the sphere radius
/// and flip a few voxels; members are softmaxed noisy logits.
pub fn random_case(seed: u64, index: u64, shape: Shape, classes: usize, m: usize, raters: usize) -> RandomCase {
    let mut rng = stream_rng(seed, index);
    let n = shape[0] * shape[1] * shape[2];
    let center: Vec<f64> = shape.iter().map(|&d| d as f64 / 2.0 + unit_f64(&mut rng) * 2.0 - 1.0).collect();
    let radius = 1.5 + 2.0 * unit_f64(&mut rng);
    let labels_for = |rng: &mut uqseg::rng::StreamRng, jitter: f64, flip: f64| -> Vec<u8> {
        let r: f64 = radius + jitter * rng.sample::<f64, _>(StandardNormal);
        (0..n)
            .map(|v| {
                let p = coords(shape, v);
                let d = (0..3).map(|i| (p[i] as f64 - center[i]).powi(2)).sum::<f64>().sqrt();
                let mut l = 0u8;
                for c in 1..classes {
                    if d < r * (classes - c) as f64 / (classes - 1) as f64 {
                        l = c as u8;
                    }
                }
                if unit_f64(rng) < flip {
                    l = uniform_index(rng, classes) as u8;
                }
                l
            })
            .collect()
    };
    let rater_labels: Vec<Vec<u8>> = (0..raters).map(|_| labels_for(&mut rng, 0.6, 0.05)).collect();
    let consensus = labels_for(&mut rng, 0.0, 0.0);
    let members = (0..m)
        .map(|_| {
            let base = labels_for(&mut rng, 0.4, 0.03);
            let scale = 0.5 + 2.5 * unit_f64(&mut rng);
            let mut p = vec![0f32; classes * n];
            for v in 0..n {
                let logits: Vec<f64> = (0..classes)
                    .map(|c| {
                        let hit = if base[v] as usize == c { scale } else { 0.0 };
                        hit + rng.sample::<f64, _>(StandardNormal)
                    })
                    .collect();
                let top = logits.iter().cloned().fold(f64::MIN, f64::max);
                let z: f64 = logits.iter().map(|l| (l - top).exp()).sum();
                for c in 0..classes {
                    p[c * n + v] = ((logits[c] - top).exp() / z) as f32;
                }
            }
            p
        })
        .collect();
    RandomCase {
        shape,
        classes,
        members,
        raters: rater_labels,
        consensus,
    }
}

/// Reference values for one case, mirroring the case pipeline.
#[derive(Debug, Clone, Copy)]
pub struct OracleRecord {
    pub dsc: f64,
    pub ace: f64,
    pub ba_ece: Option<f64>,
    pub ncc: f64,
    pub ged: f64,
    pub u: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub n_bins: usize,
    pub equal_mass: bool,
    pub band_radius: usize,
    pub foreground_calibration: bool,
    pub foreground_ncc: bool,
    pub dice_ged: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            n_bins: 10,
            equal_mass: false,
            band_radius: 2,
            foreground_calibration: false,
            foreground_ncc: false,
            dice_ged: false,
        }
    }
}

pub fn score_case(case: &RandomCase, opts: OracleOptions) -> OracleRecord {
    let classes = case.classes;
    let n = case.consensus.len();
    let mean = mean_probs(&case.members);
    let pred = argmax(&mean, classes);
    let conf = confidence(&mean, classes);
    let everywhere = vec![true; n];
    let foreground: Vec<bool> = (0..n)
        .map(|v| pred[v] != 0 || case.raters.iter().any(|r| r[v] != 0))
        .collect();
    let calib_domain = if opts.foreground_calibration { &foreground } else { &everywhere };
    let ncc_domain = if opts.foreground_ncc { &foreground } else { &everywhere };
    let band = band(&case.consensus, case.shape, opts.band_radius);
    let ba_ece = band
        .iter()
        .any(|&b| b)
        .then(|| ece(&conf, &pred, &case.raters, &band, opts.n_bins, opts.equal_mass));
    let member_labels: Vec<Vec<u8>> = case.members.iter().map(|m| argmax(m, classes)).collect();
    OracleRecord {
        dsc: dsc(&pred, &case.consensus, classes),
        ace: ace(&conf, &pred, &case.raters, calib_domain, opts.n_bins, opts.equal_mass),
        ba_ece,
        ncc: ncc(&entropy(&mean, classes), &rater_variance(&case.raters, classes), ncc_domain),
        ged: ged(&member_labels, &case.raters, classes, opts.dice_ged),
        u: (member_labels.len() > 1).then(|| disagreement(&member_labels, classes)),
    }
}
