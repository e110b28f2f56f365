//! C ABI for `uqseg`.
//!
//! Volumes cross the boundary as opaque handles created by the
//! `*_new`/`*_load` functions and released with the matching `*_free`.
//! Every fallible call returns a [`UqsegStatus`]; on failure
//! [`uqseg_last_error`] describes the most recent error on the calling
//! thread. Outputs are written through pointers only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use uqseg::case::{evaluate_case, CaseInput, EvalOptions, MaskMode};
use uqseg::ensemble::{aggregate_mean, confidence_map, hard_prediction, EnsembleBundle, EnsembleKind};
use uqseg::metrics::{ace, ba_ece, dsc, ged, majority_consensus, Binning, SegDistance};
use uqseg::selective::{aurc, risk_coverage_curve, CaseScore};
use uqseg::stats::{paired_bootstrap, BootstrapConfig, PairedSample, Tier};
use uqseg::volume::{load_label_map, load_prob_map, LabelMap, ProbMap};
use uqseg::{Error, ErrorKind};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UqsegStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Inputs violate a precondition (shape, range, sum, schema).
    Validation = 2,
    /// The computation is undefined for these inputs.
    Computation = 3,
    Io = 4,
    /// A panic was caught at the boundary.
    Internal = 5,
}

/// Probability map, class-major `(C, Z, Y, X)` `f32`.
pub struct UqsegProbMap(ProbMap);

/// Label map, `(Z, Y, X)` `u8`.
pub struct UqsegLabelMap(LabelMap);

/// Metric values of one case. `has_*` flags are 0 when the value is undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UqsegMetricRecord {
    pub dsc: f64,
    pub ace: f64,
    pub ba_ece: f64,
    pub has_ba_ece: i32,
    pub ncc: f64,
    pub ncc_degenerate: i32,
    pub ged: f64,
    pub u: f64,
    pub has_u: i32,
    pub r: f64,
}

/// Case-evaluation settings; pass null for the defaults (10 equal-width
/// bins, band radius 2, whole-volume masks, IoU distance).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UqsegEvalOptions {
    pub n_bins: usize,
    pub band_radius: usize,
    /// 0 whole volume, 1 foreground union.
    pub calibration_mask: i32,
    /// 0 whole volume, 1 foreground union.
    pub ncc_mask: i32,
    /// 0 IoU, 1 Dice.
    pub ged_distance: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UqsegBootstrapResult {
    pub mean_delta: f64,
    pub bootstrap_mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    /// 0 not significant, 1 p < 0.05, 2 p < 0.001.
    pub tier: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> UqsegStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UqsegStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            UqsegStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            match e.kind() {
                ErrorKind::Validation => UqsegStatus::Validation,
                ErrorKind::Computation => UqsegStatus::Computation,
                ErrorKind::Io => UqsegStatus::Io,
            }
        }
        Err(_) => {
            set_last_error("internal panic".to_owned());
            UqsegStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &'static str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn array<'a, T>(p: *const T, len: usize, what: &'static str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn handles<'a, T>(p: *const *const T, len: usize, what: &'static str) -> FfiResult<Vec<&'a T>> {
    array(p, len, what)?
        .iter()
        .map(|&h| deref(h, what))
        .collect()
}

unsafe fn to_path<'a>(p: *const c_char) -> FfiResult<&'a Path> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::InvalidArgument("path is not valid UTF-8".into()))?;
    Ok(Path::new(s))
}

fn labels_of(maps: &[&UqsegLabelMap]) -> Vec<LabelMap> {
    maps.iter().map(|m| m.0.clone()).collect()
}

fn probs_of(maps: &[&UqsegProbMap]) -> Vec<ProbMap> {
    maps.iter().map(|m| m.0.clone()).collect()
}

fn eval_options(opts: Option<&UqsegEvalOptions>) -> FfiResult<EvalOptions> {
    let Some(o) = opts else {
        return Ok(EvalOptions::default());
    };
    let mask = |v: i32| match v {
        0 => Ok(MaskMode::All),
        1 => Ok(MaskMode::Foreground),
        other => Err(Error::InvalidArgument(format!("unknown mask mode {other}"))),
    };
    Ok(EvalOptions {
        binning: Binning::new(o.n_bins, uqseg::metrics::BinningScheme::EqualWidth)?,
        band_radius: o.band_radius,
        calibration_mask: mask(o.calibration_mask)?,
        ncc_mask: mask(o.ncc_mask)?,
        ged_distance: seg_distance(o.ged_distance)?,
    })
}

fn seg_distance(v: i32) -> std::result::Result<SegDistance, Error> {
    match v {
        0 => Ok(SegDistance::Iou),
        1 => Ok(SegDistance::Dice),
        other => Err(Error::InvalidArgument(format!("unknown distance {other}"))),
    }
}

/// Message of the last error on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn uqseg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Copies and validates a probability map of `classes * z * y * x` values.
///
/// # Safety
/// `data` must point to `len` readable floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uqseg_probmap_new(
    classes: usize,
    z: usize,
    y: usize,
    x: usize,
    data: *const f32,
    len: usize,
    out: *mut *mut UqsegProbMap,
) -> UqsegStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let values = array(data, len, "data")?.to_vec();
        let map = ProbMap::new(classes, [z, y, x], values)?;
        *out = Box::into_raw(Box::new(UqsegProbMap(map)));
        Ok(())
    })
}

/// Loads a probability map from a UQV sidecar path.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uqseg_probmap_load(path: *const c_char, out: *mut *mut UqsegProbMap) -> UqsegStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let map = load_prob_map(to_path(path)?)?;
        *out = Box::into_raw(Box::new(UqsegProbMap(map)));
        Ok(())
    })
}

/// # Safety
/// `map` must come from this library and not be freed twice. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn uqseg_probmap_free(map: *mut UqsegProbMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Number of classes, or 0 for null.
///
/// # Safety
/// `map` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uqseg_probmap_classes(map: *const UqsegProbMap) -> usize {
    map.as_ref().map_or(0, |m| m.0.classes())
}

/// Pointer to the `classes * voxels` values, or null; valid while `map` lives.
///
/// # Safety
/// `map` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uqseg_probmap_data(map: *const UqsegProbMap, len: *mut usize) -> *const f32 {
    match map.as_ref() {
        Some(m) => {
            if let Some(l) = len.as_mut() {
                *l = m.0.data().len();
            }
            m.0.data().as_ptr()
        }
        None => ptr::null(),
    }
}

/// Copies a label map of `z * y * x` labels, each below `classes`.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uqseg_labelmap_new(
    classes: usize,
    z: usize,
    y: usize,
    x: usize,
    data: *const u8,
    len: usize,
    out: *mut *mut UqsegLabelMap,
) -> UqsegStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let values = array(data, len, "data")?.to_vec();
        let map = LabelMap::from_vec([z, y, x], values, classes)?;
        *out = Box::into_raw(Box::new(UqsegLabelMap(map)));
        Ok(())
    })
}

/// Loads a label map from a UQV sidecar path.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uqseg_labelmap_load(path: *const c_char, out: *mut *mut UqsegLabelMap) -> UqsegStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let map = load_label_map(to_path(path)?)?;
        *out = Box::into_raw(Box::new(UqsegLabelMap(map)));
        Ok(())
    })
}

/// # Safety
/// `map` must come from this library and not be freed twice. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn uqseg_labelmap_free(map: *mut UqsegLabelMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Voxelwise mean of `n` member maps; the result is a new handle.
///
/// # Safety
/// `members` must point to `n` live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uqseg_aggregate_mean(
    members: *const *const UqsegProbMap,
    n: usize,
    out: *mut *mut UqsegProbMap,
) -> UqsegStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let maps = probs_of(&handles(members, n, "members")?);
        let mean = aggregate_mean(&EnsembleBundle::new(EnsembleKind::Other, maps)?)?;
        *out = Box::into_raw(Box::new(UqsegProbMap(mean)));
        Ok(())
    })
}

/// Foreground-averaged Dice between two label maps.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uqseg_dsc(
    prediction: *const UqsegLabelMap,
    reference: *const UqsegLabelMap,
    classes: usize,
    out: *mut f64,
) -> UqsegStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = dsc(&deref(prediction, "prediction")?.0, &deref(reference, "reference")?.0, classes)?;
        Ok(())
    })
}

/// ACE of a mean probability map against `n_raters` rater maps.
///
/// # Safety
/// Handles must be live; `raters` must point to `n_raters` handles.
#[no_mangle]
pub unsafe extern "C" fn uqseg_ace(
    mean: *const UqsegProbMap,
    raters: *const *const UqsegLabelMap,
    n_raters: usize,
    n_bins: usize,
    out: *mut f64,
) -> UqsegStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let mean = &deref(mean, "mean")?.0;
        let raters = labels_of(&handles(raters, n_raters, "raters")?);
        let binning = Binning::new(n_bins, uqseg::metrics::BinningScheme::EqualWidth)?;
        *out = ace(&confidence_map(mean), &hard_prediction(mean), &raters, None, binning)?;
        Ok(())
    })
}

/// Boundary-aware ECE in a band of Chebyshev radius `band_radius` around
/// the consensus boundary.
///
/// # Safety
/// Handles must be live; `raters` must point to `n_raters` handles.
#[no_mangle]
pub unsafe extern "C" fn uqseg_ba_ece(
    mean: *const UqsegProbMap,
    raters: *const *const UqsegLabelMap,
    n_raters: usize,
    consensus: *const UqsegLabelMap,
    band_radius: usize,
    n_bins: usize,
    out: *mut f64,
) -> UqsegStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let mean = &deref(mean, "mean")?.0;
        let raters = labels_of(&handles(raters, n_raters, "raters")?);
        let consensus = &deref(consensus, "consensus")?.0;
        let binning = Binning::new(n_bins, uqseg::metrics::BinningScheme::EqualWidth)?;
        *out = ba_ece(
            &confidence_map(mean),
            &hard_prediction(mean),
            &raters,
            consensus,
            band_radius,
            binning,
        )?;
        Ok(())
    })
}

/// Generalized energy distance between member and rater label sets;
/// `distance` is 0 for IoU, 1 for Dice.
///
/// # Safety
/// Array arguments must point to the given number of live handles.
#[no_mangle]
pub unsafe extern "C" fn uqseg_ged(
    members: *const *const UqsegLabelMap,
    n_members: usize,
    raters: *const *const UqsegLabelMap,
    n_raters: usize,
    classes: usize,
    distance: i32,
    out: *mut f64,
) -> UqsegStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let m = labels_of(&handles(members, n_members, "members")?);
        let r = labels_of(&handles(raters, n_raters, "raters")?);
        *out = ged(&m, &r, classes, seg_distance(distance)?)?;
        Ok(())
    })
}

/// Scores one case. A null `consensus` uses the raters' majority vote; null
/// `options` uses the defaults.
///
/// # Safety
/// Array arguments must point to the given number of live handles; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn uqseg_evaluate_case(
    members: *const *const UqsegProbMap,
    n_members: usize,
    raters: *const *const UqsegLabelMap,
    n_raters: usize,
    consensus: *const UqsegLabelMap,
    options: *const UqsegEvalOptions,
    out: *mut UqsegMetricRecord,
) -> UqsegStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let members = probs_of(&handles(members, n_members, "members")?);
        let raters = labels_of(&handles(raters, n_raters, "raters")?);
        let classes = members.first().map_or(0, ProbMap::classes);
        let consensus = match consensus.as_ref() {
            Some(c) => c.0.clone(),
            None => majority_consensus(&raters, classes)?,
        };
        let options = eval_options(options.as_ref())?;
        let eval = evaluate_case(
            &CaseInput {
                case_id: "",
                ood: false,
                classes,
                members: &members,
                raters: &raters,
                consensus: &consensus,
            },
            &options,
        )?;
        let r = eval.record;
        *out = UqsegMetricRecord {
            dsc: r.dsc,
            ace: r.ace,
            ba_ece: r.ba_ece.unwrap_or(0.0),
            has_ba_ece: r.ba_ece.is_some() as i32,
            ncc: r.ncc,
            ncc_degenerate: eval.ncc_degenerate as i32,
            ged: r.ged,
            u: r.u.unwrap_or(0.0),
            has_u: r.u.is_some() as i32,
            r: r.r,
        };
        Ok(())
    })
}

/// AURC of `n` cases with uncertainty `u` and risk `r`; ties in `u` are
/// broken by case index.
///
/// # Safety
/// `u` and `r` must point to `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn uqseg_aurc(u: *const f64, r: *const f64, n: usize, out: *mut f64) -> UqsegStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let scores = index_scores(array(u, n, "u")?, array(r, n, "r")?);
        *out = aurc(&risk_coverage_curve(&scores)?);
        Ok(())
    })
}

fn index_scores(u: &[f64], r: &[f64]) -> Vec<CaseScore> {
    // zero-padded ids keep lexicographic order equal to index order
    u.iter()
        .zip(r)
        .enumerate()
        .map(|(i, (&u, &r))| CaseScore::new(format!("{i:020}"), u, r))
        .collect()
}

/// Paired case bootstrap of `mean(b - a)` over `n` cases.
///
/// # Safety
/// `a` and `b` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uqseg_paired_bootstrap(
    a: *const f64,
    b: *const f64,
    n: usize,
    resamples: usize,
    seed: u64,
    out: *mut UqsegBootstrapResult,
) -> UqsegStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let ids = (0..n).map(|i| i.to_string()).collect();
        let sample = PairedSample::new(ids, array(a, n, "a")?.to_vec(), array(b, n, "b")?.to_vec())?;
        let res = paired_bootstrap(&sample, &BootstrapConfig::new(resamples, seed))?;
        *out = UqsegBootstrapResult {
            mean_delta: res.mean_delta,
            bootstrap_mean: res.bootstrap_mean,
            ci_low: res.ci_low,
            ci_high: res.ci_high,
            p_value: res.p_value,
            tier: match res.tier {
                Tier::NotSignificant => 0,
                Tier::Significant => 1,
                Tier::HighlySignificant => 2,
            },
        };
        Ok(())
    })
}
