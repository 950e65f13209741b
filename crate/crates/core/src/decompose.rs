//! Parsing / OCR / interaction decomposition of the page-level error, the
//! area-based COTe approximation and the triage rule built on both.
//!
//! Four vectors describe a page:
//!
//! | vector | contents |
//! |--------|----------|
//! | `Q`  | ground-truth text |
//! | `R`  | ground-truth characters seen through the predicted regions |
//! | `S*` | OCR output on the ground-truth regions |
//! | `S`  | OCR output on the predicted regions |
//!
//! and the components are `d_pars = d(R‖Q)`, `d_ocr = d(S*‖Q)`,
//! `d_int = d(S‖R)` and `d_total = d(S‖Q)`, always written
//! `d(prediction‖reference)`. The components are not additive, so `d_total`
//! is reported on its own.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::charvec::{char_vector, normalize_text, to_distribution, CharVector, CountUnit, NormalizationPolicy};
use crate::error::{Error, Result};
use crate::geometry::{
    assign_characters, infer_char_positions, iou, point_in_geometry, word_tokens, Granularity,
    InferenceOptions, PageLayout, Point, Region,
};
use crate::metrics::{cdd_jsd, spacd, spacd_symmetric, spacer_macro, DivergenceMeasure};

/// OCR transcriptions keyed by region id.
pub type OcrMap = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorSet {
    pub q: CharVector,
    pub r: Option<CharVector>,
    pub s_star: Option<CharVector>,
    pub s: Option<CharVector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BuildOptions {
    pub policy: NormalizationPolicy,
    pub unit: CountUnit,
    pub inference: InferenceOptions,
    /// Ground-truth level used for `Q` and `R`; the finest level present when
    /// unset, so that nested word/line/paragraph regions are counted once.
    pub granularity: Option<Granularity>,
}

impl BuildOptions {
    pub fn new(policy: NormalizationPolicy, unit: CountUnit) -> Self {
        Self {
            policy,
            unit,
            ..Self::default()
        }
    }

    fn vector(&self, raw: &str) -> CharVector {
        char_vector(&normalize_text(raw, &self.policy), self.unit, self.policy.count_spaces)
    }
}

fn ocr_vector(
    map: &OcrMap,
    known: &BTreeSet<&str>,
    opts: &BuildOptions,
) -> Result<CharVector> {
    let mut v = CharVector::new(opts.unit);
    for (id, text) in map {
        if !known.contains(id.as_str()) {
            return Err(Error::UnknownRegion(id.clone()));
        }
        v += &opts.vector(text);
    }
    Ok(v)
}

/// Builds `Q`, and `R`, `S*`, `S` where their inputs exist.
///
/// `R` needs `page.pred_regions`; an empty prediction list gives an empty
/// `R`. Characters are placed by [`infer_char_positions`] on the normalized
/// ground-truth text and counted once per prediction containing them.
pub fn build_vectors(
    page: &PageLayout,
    ocr_on_gt: Option<&OcrMap>,
    ocr_on_pred: Option<&OcrMap>,
    opts: &BuildOptions,
) -> Result<VectorSet> {
    let level = opts.granularity.or_else(|| page.finest_gt_granularity());
    let gt: Vec<&Region> = match level {
        Some(level) => page.gt_at(level).collect(),
        None => Vec::new(),
    };

    let mut q = CharVector::new(opts.unit);
    for region in &gt {
        q += &opts.vector(&region.text);
    }

    let r = match &page.pred_regions {
        None => None,
        Some(preds) => {
            let mut tokens = Vec::new();
            for region in &gt {
                let mut normalized = (*region).clone();
                normalized.text = normalize_text(&region.text, &opts.policy);
                tokens.extend(infer_char_positions(&normalized, &opts.inference)?);
            }
            let tokens = match opts.unit {
                CountUnit::Character if !opts.policy.count_spaces => tokens
                    .into_iter()
                    .filter(|t| !t.token.chars().all(char::is_whitespace))
                    .collect(),
                CountUnit::Character => tokens,
                CountUnit::Word => word_tokens(&tokens),
            };
            Some(assign_characters(&tokens, preds, opts.unit).aggregate)
        }
    };

    let s_star = match ocr_on_gt {
        None => None,
        Some(map) => {
            let known: BTreeSet<&str> = page.gt_regions.iter().map(|r| r.id.as_str()).collect();
            Some(ocr_vector(map, &known, opts)?)
        }
    };

    let s = match ocr_on_pred {
        None => None,
        Some(map) => {
            let preds = page
                .pred_regions
                .as_ref()
                .ok_or_else(|| Error::MissingPredictions(page.page_id.clone()))?;
            let known: BTreeSet<&str> = preds.iter().map(|r| r.id.as_str()).collect();
            Some(ocr_vector(map, &known, opts)?)
        }
    };

    Ok(VectorSet { q, r, s_star, s })
}

/// Which distance scores each component.
#[derive(Clone)]
pub enum Measure {
    Spacer,
    Spacd,
    /// [`spacd_symmetric`], a true distance.
    SpacdSymmetric,
    CddJsd,
    Custom(Arc<dyn DivergenceMeasure>),
}

impl Measure {
    pub fn name(&self) -> String {
        match self {
            Measure::Spacer => "spacer".to_string(),
            Measure::Spacd => "spacd".to_string(),
            Measure::SpacdSymmetric => "spacd-symmetric".to_string(),
            Measure::CddJsd => "cdd-jsd".to_string(),
            Measure::Custom(m) => m.name().to_string(),
        }
    }

    /// `d(prediction‖reference)`, or `None` with a reason when undefined.
    ///
    /// Two empty vectors are at distance 0. An empty reference leaves
    /// SpACER undefined; one empty side gives 1 for bounded distributional
    /// measures.
    pub fn distance(&self, prediction: &CharVector, reference: &CharVector) -> Result<Distance> {
        prediction.check_unit(reference)?;
        if prediction.is_empty() && reference.is_empty() {
            return Ok(Distance::Value(0.0));
        }
        match self {
            Measure::Spacer => {
                if reference.is_empty() {
                    Ok(Distance::Undefined("empty reference"))
                } else {
                    spacer_macro(reference, prediction).map(Distance::Value)
                }
            }
            Measure::Spacd => spacd(reference, prediction).map(Distance::Value),
            Measure::SpacdSymmetric => spacd_symmetric(reference, prediction).map(Distance::Value),
            Measure::CddJsd => {
                if prediction.is_empty() || reference.is_empty() {
                    return Ok(Distance::TotalLoss(1.0));
                }
                cdd_jsd(&to_distribution(prediction)?, &to_distribution(reference)?).map(Distance::Value)
            }
            Measure::Custom(m) => {
                if prediction.is_empty() || reference.is_empty() {
                    return Ok(if m.is_bounded_unit() {
                        Distance::TotalLoss(1.0)
                    } else {
                        Distance::Undefined("empty distribution")
                    });
                }
                Ok(Distance::Value(
                    m.evaluate(&to_distribution(prediction)?, &to_distribution(reference)?),
                ))
            }
        }
    }
}

impl fmt::Debug for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distance {
    Value(f64),
    /// One side was empty; the measure's maximum is returned.
    TotalLoss(f64),
    Undefined(&'static str),
}

impl Distance {
    pub fn value(self) -> Option<f64> {
        match self {
            Distance::Value(v) | Distance::TotalLoss(v) => Some(v),
            Distance::Undefined(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub metric: String,
    pub d_pars: Option<f64>,
    pub d_ocr: Option<f64>,
    pub d_int: Option<f64>,
    pub d_total: Option<f64>,
    /// Always set: `d_total` is not the sum of the other components.
    pub non_additive: bool,
    /// Components that hit an empty-vector convention.
    pub flags: Vec<String>,
}

/// Scores every component whose two vectors are present.
pub fn decompose(v: &VectorSet, measure: &Measure) -> Result<DecompositionReport> {
    if v.q.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let mut flags = Vec::new();
    let mut score = |name: &str, pred: Option<&CharVector>, reference: Option<&CharVector>| -> Result<Option<f64>> {
        let (Some(pred), Some(reference)) = (pred, reference) else {
            return Ok(None);
        };
        let d = measure.distance(pred, reference)?;
        match d {
            Distance::TotalLoss(_) => flags.push(format!("{name}: total loss (one side empty)")),
            Distance::Undefined(why) => flags.push(format!("{name}: undefined ({why})")),
            Distance::Value(_) => {}
        }
        Ok(d.value())
    };
    let d_pars = score("d_pars", v.r.as_ref(), Some(&v.q))?;
    let d_ocr = score("d_ocr", v.s_star.as_ref(), Some(&v.q))?;
    let d_int = score("d_int", v.s.as_ref(), v.r.as_ref())?;
    let d_total = score("d_total", v.s.as_ref(), Some(&v.q))?;
    Ok(DecompositionReport {
        metric: measure.name(),
        d_pars,
        d_ocr,
        d_int,
        d_total,
        non_additive: true,
        flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoteComponents {
    pub coverage: f64,
    pub overlap: f64,
    pub trespass: f64,
    pub excess: f64,
    /// `coverage - overlap - trespass`
    pub score: f64,
}

fn unit_key(r: &Region) -> &str {
    r.semantic_class.as_deref().unwrap_or(r.id.as_str())
}

/// Area-based COTe approximation.
///
/// All fractions except `excess` are of the ground-truth union area:
/// coverage is the part under at least one prediction, overlap the part under
/// two or more, trespass the part under predictions that reach into two or
/// more semantic units (a region's `semantic_class`, or the region itself when
/// unlabelled). Excess is prediction area outside every ground-truth region
/// as a fraction of `page_area`.
///
/// Areas are integrated on the grid formed by all bounding-box edges, which is
/// exact when every geometry is a box; cells are subdivided 8x8 when polygons
/// are present.
pub fn cote_approx(gt_regions: &[Region], pred_regions: &[Region], page_area: f64) -> Result<CoteComponents> {
    let gt_bounds: Vec<_> = gt_regions.iter().map(|r| r.geometry.bounds()).collect();
    let pred_bounds: Vec<_> = pred_regions.iter().map(|r| r.geometry.bounds()).collect();
    let has_polygon = gt_regions
        .iter()
        .chain(pred_regions)
        .any(|r| matches!(r.geometry, crate::geometry::RegionGeometry::Polygon { .. }));
    let sub = if has_polygon { 8 } else { 1 };

    let mut xs: Vec<f64> = gt_bounds.iter().chain(&pred_bounds).flat_map(|b| [b.x0, b.x1]).collect();
    let mut ys: Vec<f64> = gt_bounds.iter().chain(&pred_bounds).flat_map(|b| [b.y0, b.y1]).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }

    let mut gt_area = 0.0;
    let mut covered = 0.0;
    let mut overlapped = 0.0;
    let mut outside = 0.0;
    let mut touched: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); pred_regions.len()];
    // (area, predictions) for every cell inside the ground truth
    let mut inside_cells: Vec<(f64, Vec<usize>)> = Vec::new();

    for xi in 0..xs.len().saturating_sub(1) {
        let (xa, xb) = (xs[xi], xs[xi + 1]);
        let xm = (xa + xb) / 2.0;
        let gt_col: Vec<usize> = (0..gt_regions.len())
            .filter(|&i| gt_bounds[i].x0 <= xm && xm <= gt_bounds[i].x1)
            .collect();
        let pred_col: Vec<usize> = (0..pred_regions.len())
            .filter(|&i| pred_bounds[i].x0 <= xm && xm <= pred_bounds[i].x1)
            .collect();
        if gt_col.is_empty() && pred_col.is_empty() {
            continue;
        }
        for yi in 0..ys.len().saturating_sub(1) {
            let (ya, yb) = (ys[yi], ys[yi + 1]);
            let sw = (xb - xa) / sub as f64;
            let sh = (yb - ya) / sub as f64;
            let a = sw * sh;
            for sx in 0..sub {
                for sy in 0..sub {
                    let c = Point::new(xa + (sx as f64 + 0.5) * sw, ya + (sy as f64 + 0.5) * sh);
                    let g: Vec<usize> = gt_col
                        .iter()
                        .copied()
                        .filter(|&i| gt_bounds[i].contains(c) && point_in_geometry(c, &gt_regions[i].geometry))
                        .collect();
                    let p: Vec<usize> = pred_col
                        .iter()
                        .copied()
                        .filter(|&i| pred_bounds[i].contains(c) && point_in_geometry(c, &pred_regions[i].geometry))
                        .collect();
                    if g.is_empty() {
                        if !p.is_empty() {
                            outside += a;
                        }
                        continue;
                    }
                    gt_area += a;
                    if !p.is_empty() {
                        covered += a;
                    }
                    if p.len() >= 2 {
                        overlapped += a;
                    }
                    for &pi in &p {
                        for &gi in &g {
                            touched[pi].insert(unit_key(&gt_regions[gi]));
                        }
                    }
                    if !p.is_empty() {
                        inside_cells.push((a, p));
                    }
                }
            }
        }
    }

    if gt_area <= 0.0 {
        return Err(Error::ZeroGroundTruthArea);
    }
    let trespassing: Vec<bool> = touched.iter().map(|t| t.len() >= 2).collect();
    let trespass_area: f64 = inside_cells
        .iter()
        .filter(|(_, p)| p.iter().any(|&i| trespassing[i]))
        .map(|(a, _)| *a)
        .sum();

    let coverage = (covered / gt_area).clamp(0.0, 1.0);
    let overlap = (overlapped / gt_area).clamp(0.0, 1.0);
    let trespass = (trespass_area / gt_area).clamp(0.0, 1.0);
    let excess = if page_area > 0.0 {
        (outside / page_area).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(CoteComponents {
        coverage,
        overlap,
        trespass,
        excess,
        score: coverage - overlap - trespass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominant {
    Parsing,
    Ocr,
    Indeterminate,
}

impl Dominant {
    pub fn as_str(self) -> &'static str {
        match self {
            Dominant::Parsing => "parsing",
            Dominant::Ocr => "ocr",
            Dominant::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriageThresholds {
    pub ratio: f64,
    pub cote: f64,
}

impl Default for TriageThresholds {
    fn default() -> Self {
        Self { ratio: 0.5, cote: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriageVerdict {
    pub dominant: Dominant,
    /// `d_ocr / d_total`; absent when `d_total` is missing or zero.
    pub ratio: Option<f64>,
    /// Whether the COTe score reached its threshold; absent without COTe.
    pub cote_gate_passed: Option<bool>,
}

/// OCR is the dominant error source when `d_ocr / d_total >= ratio` and, if a
/// COTe score is given, it is at least `cote`. A low COTe score marks a
/// degenerate parse and forces a parsing verdict even when the ratio is
/// undefined.
pub fn triage(report: &DecompositionReport, cote: Option<&CoteComponents>, thresholds: TriageThresholds) -> TriageVerdict {
    let gate = cote.map(|c| c.score >= thresholds.cote);
    let ratio = match (report.d_ocr, report.d_total) {
        (Some(ocr), Some(total)) if total > 0.0 => Some(ocr / total),
        _ => None,
    };
    let dominant = match ratio {
        _ if gate == Some(false) => Dominant::Parsing,
        None => Dominant::Indeterminate,
        Some(r) if r >= thresholds.ratio => Dominant::Ocr,
        Some(_) => Dominant::Parsing,
    };
    TriageVerdict {
        dominant,
        ratio,
        cote_gate_passed: gate,
    }
}

/// Pairs each ground-truth region with the prediction of highest IoU (ties
/// to the earlier prediction); `None` when no prediction overlaps it.
pub fn pair_by_iou(gt_regions: &[Region], pred_regions: &[Region]) -> Vec<Option<usize>> {
    gt_regions
        .iter()
        .map(|g| {
            let mut best: Option<(f64, usize)> = None;
            for (j, p) in pred_regions.iter().enumerate() {
                let v = iou(&g.geometry, &p.geometry);
                if v > 0.0 && best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, j));
                }
            }
            best.map(|(_, j)| j)
        })
        .collect()
}

/// Per-prediction `(g_j, p_j)` pairs for micro SpACER.
///
/// `g_j` holds the text of the ground-truth regions paired to prediction `j`
/// by [`pair_by_iou`]; `p_j` is the OCR text of prediction `j`. Unpaired
/// ground truth becomes a pair with an empty prediction, so the pairs always
/// sum to the page vectors.
pub fn micro_pairs(
    gt_regions: &[Region],
    pred_regions: &[Region],
    ocr_on_pred: &OcrMap,
    opts: &BuildOptions,
) -> Vec<(CharVector, CharVector)> {
    let pairing = pair_by_iou(gt_regions, pred_regions);
    let mut pairs: Vec<(CharVector, CharVector)> = pred_regions
        .iter()
        .map(|p| {
            let text = ocr_on_pred.get(&p.id).map(String::as_str).unwrap_or("");
            (CharVector::new(opts.unit), opts.vector(text))
        })
        .collect();
    for (g, pair) in gt_regions.iter().zip(&pairing) {
        let v = opts.vector(&g.text);
        match pair {
            Some(j) => pairs[*j].0 += &v,
            None => pairs.push((v, CharVector::new(opts.unit))),
        }
    }
    pairs
}
