//! Scalar metrics over character vectors, strings and region sets.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::charvec::{l1_distance, CharDistribution, CharVector};
use crate::error::{Error, Result};
use crate::geometry::{iou, Region};

/// Ground truth `g`, prediction `p` and, for micro averaging, the
/// per-prediction pairs `(g_j, p_j)` that sum to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacerInputs {
    pub g: CharVector,
    pub p: CharVector,
    pub per_prediction: Option<Vec<(CharVector, CharVector)>>,
}

impl SpacerInputs {
    /// Page vectors taken as the sums of the pairs.
    pub fn from_pairs(pairs: Vec<(CharVector, CharVector)>) -> Result<Self> {
        let unit = pairs.first().ok_or(Error::MissingPairs)?.0.unit();
        let mut g = CharVector::new(unit);
        let mut p = CharVector::new(unit);
        for (gj, pj) in &pairs {
            gj.check_unit(&g)?;
            pj.check_unit(&p)?;
            g += gj;
            p += pj;
        }
        Ok(Self {
            g,
            p,
            per_prediction: Some(pairs),
        })
    }
}

fn deletions(g: &CharVector, p: &CharVector) -> u64 {
    g.total().saturating_sub(p.total())
}

/// Page-level SpACER, `(D + E) / 2C`, where `E = |g - p|_1`, `C = |g|` and
/// `D = max(0, |g| - |p|)`.
///
/// Order-blind by construction: a permutation of the ground truth scores 0.
pub fn spacer_macro(g: &CharVector, p: &CharVector) -> Result<f64> {
    let e = l1_distance(g, p)?;
    let c = g.total();
    if c == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    Ok((deletions(g, p) + e) as f64 / (2 * c) as f64)
}

/// Micro SpACER: deletions summed per prediction so that losses in one
/// prediction are not cancelled by insertions in another. `E` and `C` stay
/// page-level.
pub fn spacer_micro(inputs: &SpacerInputs) -> Result<f64> {
    let pairs = inputs.per_prediction.as_ref().ok_or(Error::MissingPairs)?;
    if pairs.is_empty() {
        return Err(Error::MissingPairs);
    }
    let unit = inputs.g.unit();
    let mut g_sum = CharVector::new(unit);
    let mut p_sum = CharVector::new(unit);
    let mut d = 0u64;
    for (gj, pj) in pairs {
        inputs.g.check_unit(gj)?;
        inputs.g.check_unit(pj)?;
        g_sum += gj;
        p_sum += pj;
        d += deletions(gj, pj);
    }
    if g_sum != inputs.g {
        return Err(Error::InconsistentPairs("ground truth"));
    }
    if p_sum != inputs.p {
        return Err(Error::InconsistentPairs("prediction"));
    }
    let e = l1_distance(&inputs.g, &inputs.p)?;
    let c = inputs.g.total();
    if c == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    Ok((d + e) as f64 / (2 * c) as f64)
}

/// SpACER numerator without the rate denominator: `(D + E) / 2`.
///
/// `D` is one-sided, so this is not symmetric; see [`spacd_symmetric`].
pub fn spacd(g: &CharVector, p: &CharVector) -> Result<f64> {
    let e = l1_distance(g, p)?;
    Ok((deletions(g, p) + e) as f64 / 2.0)
}

/// `(| |g| - |p| | + E) / 2`, the symmetric reading of [`spacd`].
pub fn spacd_symmetric(g: &CharVector, p: &CharVector) -> Result<f64> {
    let e = l1_distance(g, p)?;
    Ok((g.total().abs_diff(p.total()) + e) as f64 / 2.0)
}

/// Shannon entropy in bits.
pub fn shannon_entropy(d: &CharDistribution) -> f64 {
    -d.iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|(_, p)| p * libm::log2(p))
        .sum::<f64>()
}

/// `(1+t)ln(1+t) + (1-t)ln(1-t)`, with a series near 0 where the direct form
/// cancels.
fn js_kernel(t: f64) -> f64 {
    let t = t.abs();
    if t >= 1.0 {
        return 2.0 * core::f64::consts::LN_2;
    }
    if t < 1e-3 {
        // sum_k t^2k / (k (2k - 1))
        let t2 = t * t;
        return t2 * (1.0 + t2 * (1.0 / 6.0 + t2 * (1.0 / 15.0 + t2 / 28.0)));
    }
    (1.0 + t) * libm::log1p(t) + (1.0 - t) * libm::log1p(-t)
}

/// Jensen-Shannon distance in bits: `sqrt(H(M) - (H(S) + H(Q)) / 2)` with
/// `M = (S + Q) / 2`; always in `[0, 1]`.
///
/// Evaluated per token as `(s + q)/4 * k(t) / ln 2` with
/// `t = (s - q)/(s + q)`, which equals the entropy form but keeps full
/// precision for nearly equal distributions. Tokens missing from one side
/// have probability 0.
pub fn cdd_jsd(s: &CharDistribution, q: &CharDistribution) -> Result<f64> {
    if s.unit() != q.unit() {
        return Err(Error::UnitMismatch {
            left: s.unit().as_str(),
            right: q.unit().as_str(),
        });
    }
    // Sum over the key union in sorted order so that swapping the arguments
    // gives bit-identical results.
    let keys: BTreeSet<&str> = s.iter().chain(q.iter()).map(|(k, _)| k).collect();
    let mut div = 0.0;
    for k in keys {
        let (a, b) = (s.get(k), q.get(k));
        let sum = a + b;
        if sum > 0.0 {
            div += sum / 4.0 * js_kernel((a - b) / sum);
        }
    }
    let div = div / core::f64::consts::LN_2;
    Ok(libm::sqrt(div.clamp(0.0, 1.0)))
}

/// A divergence or distance between two character distributions.
pub trait DivergenceMeasure: Send + Sync {
    fn name(&self) -> &str;
    fn evaluate(&self, a: &CharDistribution, b: &CharDistribution) -> f64;
    fn is_true_metric(&self) -> bool;
    fn is_bounded_unit(&self) -> bool;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct JensenShannon;

impl DivergenceMeasure for JensenShannon {
    fn name(&self) -> &str {
        "cdd-jsd"
    }

    fn evaluate(&self, a: &CharDistribution, b: &CharDistribution) -> f64 {
        cdd_jsd(a, b).unwrap_or(f64::NAN)
    }

    fn is_true_metric(&self) -> bool {
        true
    }

    fn is_bounded_unit(&self) -> bool {
        true
    }
}

/// Half the L1 distance between distributions.
#[derive(Debug, Clone, Copy, Default)]
pub struct TotalVariation;

impl DivergenceMeasure for TotalVariation {
    fn name(&self) -> &str {
        "total-variation"
    }

    fn evaluate(&self, a: &CharDistribution, b: &CharDistribution) -> f64 {
        let mut sum = 0.0;
        for (k, pa) in a.iter() {
            sum += (pa - b.get(k)).abs();
        }
        for (k, pb) in b.iter() {
            if a.get(k) == 0.0 {
                sum += pb;
            }
        }
        (sum / 2.0).min(1.0)
    }

    fn is_true_metric(&self) -> bool {
        true
    }

    fn is_bounded_unit(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub gt_length: usize,
}

impl EditCounts {
    pub fn distance(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Unit-cost Levenshtein alignment of two character sequences.
///
/// Operation counts come from a backtrace that prefers a match, then a
/// substitution, then a deletion, then an insertion.
pub fn edit_counts(gt: &[char], pred: &[char]) -> EditCounts {
    let (n, m) = (gt.len(), pred.len());
    let w = m + 1;
    let mut dp = vec![0u32; (n + 1) * w];
    for (j, cell) in dp.iter_mut().take(w).enumerate() {
        *cell = j as u32;
    }
    for i in 1..=n {
        dp[i * w] = i as u32;
        for j in 1..=m {
            let sub = dp[(i - 1) * w + j - 1] + u32::from(gt[i - 1] != pred[j - 1]);
            let del = dp[(i - 1) * w + j] + 1;
            let ins = dp[i * w + j - 1] + 1;
            dp[i * w + j] = sub.min(del).min(ins);
        }
    }

    let mut counts = EditCounts {
        gt_length: n,
        ..EditCounts::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dp[i * w + j];
        if i > 0 && j > 0 {
            let diag = dp[(i - 1) * w + j - 1];
            if gt[i - 1] == pred[j - 1] && diag == here {
                i -= 1;
                j -= 1;
                continue;
            }
            if diag + 1 == here {
                counts.substitutions += 1;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dp[(i - 1) * w + j] + 1 == here {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

/// Character error rate `(S + D + I) / |gt|` over Unicode scalar values.
pub fn cer(gt: &str, pred: &str) -> Result<(f64, EditCounts)> {
    let g: Vec<char> = gt.chars().collect();
    if g.is_empty() {
        return Err(Error::UndefinedCer);
    }
    let p: Vec<char> = pred.chars().collect();
    let counts = edit_counts(&g, &p);
    Ok((counts.distance() as f64 / g.len() as f64, counts))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub true_positives: usize,
}

/// Region detection F1 with greedy one-to-one matching by descending IoU.
///
/// Pairs below `iou_threshold` never match; IoU ties go to the earlier
/// ground-truth region, then the earlier prediction.
pub fn detection_f1(gt_regions: &[Region], pred_regions: &[Region], iou_threshold: f64) -> Result<DetectionScore> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "IoU threshold {iou_threshold} outside (0, 1]"
        )));
    }
    let mut candidates = Vec::new();
    for (gi, g) in gt_regions.iter().enumerate() {
        for (pi, p) in pred_regions.iter().enumerate() {
            let v = iou(&g.geometry, &p.geometry);
            if v >= iou_threshold {
                candidates.push((v, gi, pi));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gt_used = vec![false; gt_regions.len()];
    let mut pred_used = vec![false; pred_regions.len()];
    let mut tp = 0usize;
    for (_, gi, pi) in candidates {
        if !gt_used[gi] && !pred_used[pi] {
            gt_used[gi] = true;
            pred_used[pi] = true;
            tp += 1;
        }
    }
    let precision = if pred_regions.is_empty() { 0.0 } else { tp as f64 / pred_regions.len() as f64 };
    let recall = if gt_regions.is_empty() { 0.0 } else { tp as f64 / gt_regions.len() as f64 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(DetectionScore {
        f1,
        precision,
        recall,
        true_positives: tp,
    })
}

/// Fractional ranks (1-based), tied values sharing their average rank.
pub fn fractional_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of fractional ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::TooFewObservations);
    }
    let rx = fractional_ranks(x);
    let ry = fractional_ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantSeries);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}
