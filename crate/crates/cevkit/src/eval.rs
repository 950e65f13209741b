//! Page-level scoring and decomposition shared by the `score`, `decompose`
//! and `triage` commands.

use cevkit_core::charvec::{char_vector, normalize_text};
use cevkit_core::decompose::{
    build_vectors, cote_approx, decompose, micro_pairs, triage, BuildOptions, Measure, OcrMap, TriageThresholds,
};
use cevkit_core::geometry::{Granularity, Region};
use cevkit_core::metrics::{cer, spacer_micro, SpacerInputs};

use crate::io::{reading_order_text, LoadedPage};
use crate::report::{PageReport, PageScores};

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub build: BuildOptions,
    pub measure: Measure,
    pub thresholds: TriageThresholds,
    /// Also compute micro SpACER from IoU-paired regions.
    pub micro: bool,
}

fn prediction_text(page: &LoadedPage) -> Option<(String, bool)> {
    let preds = page.layout.pred_regions.as_deref();
    match (&page.ocr_on_pred, preds) {
        (Some(ocr), Some(preds)) => Some((ordered(preds, Some(ocr)), true)),
        (Some(ocr), None) => Some((ocr.values().cloned().collect::<Vec<_>>().join("\n"), true)),
        (None, Some(preds)) if preds.iter().any(|r| !r.text.is_empty()) => Some((ordered(preds, None), false)),
        _ => None,
    }
}

fn ordered(regions: &[Region], ocr: Option<&OcrMap>) -> String {
    reading_order_text(regions, |r| match ocr {
        Some(map) => map.get(&r.id).map(String::as_str),
        None => Some(r.text.as_str()),
    })
}

fn gt_level(page: &LoadedPage, opts: &BuildOptions) -> Option<Granularity> {
    opts.granularity.or_else(|| page.layout.finest_gt_granularity())
}

/// SpACER, SpACD, CDD and CER of the page's prediction against its ground
/// truth. The prediction is `ocr_on_pred` when present, otherwise the text
/// of the predicted regions.
pub fn score_page(page: &LoadedPage, opts: &EvalOptions) -> Result<PageScores, String> {
    let (pred_text, from_ocr) = prediction_text(page).ok_or("page has no prediction text (ocr_on_pred or pred_regions text)")?;
    let b = &opts.build;
    let q = build_vectors(&page.layout, None, None, b).map_err(|e| e.to_string())?.q;
    let s = char_vector(&normalize_text(&pred_text, &b.policy), b.unit, b.policy.count_spaces);
    let value = |m: Measure| m.distance(&s, &q).map(|d| d.value()).map_err(|e| e.to_string());

    let level = gt_level(page, b);
    let gt: Vec<Region> = level.map(|l| page.layout.gt_at(l).cloned().collect()).unwrap_or_default();
    let gt_text = normalize_text(&ordered(&gt, None), &b.policy);
    let cer_value = if gt_text.is_empty() {
        None
    } else {
        Some(cer(&gt_text, &normalize_text(&pred_text, &b.policy)).map_err(|e| e.to_string())?.0)
    };

    let spacer_micro_value = if opts.micro {
        let preds = page.layout.pred_regions.as_deref().ok_or("micro SpACER needs pred_regions")?;
        let ocr = match (&page.ocr_on_pred, from_ocr) {
            (Some(ocr), true) => ocr.clone(),
            _ => preds.iter().map(|r| (r.id.clone(), r.text.clone())).collect(),
        };
        let inputs = SpacerInputs::from_pairs(micro_pairs(&gt, preds, &ocr, b)).map_err(|e| e.to_string())?;
        Some(spacer_micro(&inputs).map_err(|e| e.to_string())?)
    } else {
        None
    };

    Ok(PageScores {
        spacer: value(Measure::Spacer)?,
        spacer_micro: spacer_micro_value,
        spacd: value(Measure::Spacd)?,
        cdd_jsd: value(Measure::CddJsd)?,
        cer: cer_value,
    })
}

/// Decomposition, COTe and triage for one page. Components whose inputs are
/// missing are left empty and logged.
pub fn decompose_page(page: &LoadedPage, source: &str, opts: &EvalOptions) -> PageReport {
    let id = page.layout.page_id.clone();
    let run = || -> Result<PageReport, String> {
        let vectors = build_vectors(&page.layout, page.ocr_on_gt.as_ref(), page.ocr_on_pred.as_ref(), &opts.build)
            .map_err(|e| e.to_string())?;
        let report = decompose(&vectors, &opts.measure).map_err(|e| e.to_string())?;
        for (name, missing) in [
            ("d_pars", vectors.r.is_none()),
            ("d_ocr", vectors.s_star.is_none()),
            ("d_int", vectors.r.is_none() || vectors.s.is_none()),
            ("d_total", vectors.s.is_none()),
        ] {
            if missing {
                log::warn!("page {id:?}: {name} omitted, inputs missing");
            }
        }
        let cote = match &page.layout.pred_regions {
            Some(preds) => {
                let units: Vec<Region> = page
                    .layout
                    .coarsest_gt_granularity()
                    .map(|g| page.layout.gt_at(g).cloned().collect())
                    .unwrap_or_default();
                Some(cote_approx(&units, preds, page.layout.area()).map_err(|e| e.to_string())?)
            }
            None => None,
        };
        let verdict = triage(&report, cote.as_ref(), opts.thresholds);
        Ok(PageReport {
            page_id: id.clone(),
            source: source.to_string(),
            scores: None,
            decomposition: Some(report),
            cote,
            triage: Some(verdict),
            error: None,
        })
    };
    run().unwrap_or_else(|e| PageReport::failed(id.clone(), source, e))
}
