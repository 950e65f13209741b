//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use cevkit::eval::{decompose_page, EvalOptions};
use cevkit::io::{
    load_alto, load_page_json, page_to_json, GeometryKind, GeometryRecord, PageDocument, PageInfo, RegionRecord,
    SCHEMA_VERSION,
};
use cevkit::report::{report_from_json, report_to_json, PageReport, PageScores, ReportDocument};
use cevkit_core::charvec::{char_vector, normalize_text, CharDistribution, CountUnit, NormalizationPolicy};
use cevkit_core::decompose::{
    build_vectors, decompose, triage, BuildOptions, CoteComponents, DecompositionReport, Dominant, Measure, OcrMap,
    TriageThresholds, TriageVerdict,
};
use cevkit_core::geometry::{
    assign_characters, infer_char_positions, point_in_geometry, CharToken, Granularity, InferenceOptions, OrderHint,
    PageLayout, Point, Region, RegionGeometry,
};
use cevkit_core::metrics::{cdd_jsd, cer, edit_counts, spacer_macro, TotalVariation};
use cevkit_core::simulate::{
    classification_f1, corrupt_ocr, generate_page, generate_pages, latin_alphabet, run_granularity_experiment,
    simulate_pipeline_corpus, ConfusionModel, LayoutSpec, PipelineConfig, EXPERIMENT_GRANULARITIES,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<u64>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    }};
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pick(rng: &mut ChaCha8Rng, alphabet: &[char]) -> char {
    alphabet[rng.random_range(0..alphabet.len())]
}

fn random_string(rng: &mut ChaCha8Rng, alphabet: &[char], len: usize) -> String {
    (0..len).map(|_| pick(rng, alphabet)).collect()
}

// ---------------------------------------------------------------- 1

fn spacer_bounded_by_cer() -> Outcome {
    const PAIRS: usize = 10_000;
    let policy = NormalizationPolicy {
        count_spaces: true,
        ..NormalizationPolicy::default()
    };
    let gt_alphabet: Vec<char> = "abcdefghijklmnopqrstuvwxyz   ,.;'-".chars().collect();
    let foreign: Vec<char> = "0123456789#@%&".chars().collect();
    let mut r = rng(0xC0FF_EE01);
    let (mut deletion_cases, mut substitution_cases, mut strict) = (0, 0, 0);

    for i in 0..PAIRS {
        let gt = loop {
            let len = r.random_range(1..=500);
            let g = normalize_text(&random_string(&mut r, &gt_alphabet, len), &policy);
            if (1..=500).contains(&g.chars().count()) {
                break g;
            }
        };
        let g: Vec<char> = gt.chars().collect();
        let mode = i % 5;
        let raw: String = match mode {
            // free edits
            0 => {
                let mut p = g.clone();
                for _ in 0..r.random_range(0..=g.len().div_ceil(4)) {
                    let at = r.random_range(0..=p.len());
                    match r.random_range(0..3) {
                        0 if at < p.len() => p[at] = pick(&mut r, &gt_alphabet),
                        1 if at < p.len() => {
                            p.remove(at);
                        }
                        _ => p.insert(at, pick(&mut r, &gt_alphabet)),
                    }
                }
                p.into_iter().collect()
            }
            // unrelated text
            1 => {
                let len = r.random_range(0..=600);
                random_string(&mut r, &gt_alphabet, len)
            }
            // permutation of the ground truth
            2 => {
                let mut p = g.clone();
                p.shuffle(&mut r);
                p.into_iter().collect()
            }
            // deletions only
            3 => g.iter().filter(|_| r.random_bool(0.8)).collect(),
            // substitutions into characters the ground truth never uses
            _ => g
                .iter()
                .map(|&c| if r.random_bool(0.2) { pick(&mut r, &foreign) } else { c })
                .collect(),
        };
        // a shuffled normalized string is compared as is: normalizing it
        // again would trim the spaces moved to its ends
        let pred = if mode == 2 { raw } else { normalize_text(&raw, &policy) };
        let (rate, _) = cer(&gt, &pred).map_err(|e| e.to_string())?;
        let q = char_vector(&gt, CountUnit::Character, true);
        let s = char_vector(&pred, CountUnit::Character, true);
        let spacer = spacer_macro(&q, &s).map_err(|e| e.to_string())?;
        ensure!(spacer <= rate, "pair {i}: spacer {spacer} > cer {rate} (gt {gt:?}, pred {pred:?})");
        strict += usize::from(spacer < rate);
        match mode {
            2 => ensure!(spacer == 0.0, "pair {i}: permutation scored {spacer}"),
            3 => {
                ensure!(spacer == rate, "pair {i}: deletion-only spacer {spacer} != cer {rate}");
                deletion_cases += 1;
            }
            4 => {
                ensure!(spacer == rate, "pair {i}: substitution-only spacer {spacer} != cer {rate}");
                substitution_cases += 1;
            }
            _ => {}
        }
    }
    Ok(format!(
        "{PAIRS} pairs, {strict} strictly below CER, equality on {deletion_cases} deletion and {substitution_cases} substitution cases"
    ))
}

// ---------------------------------------------------------------- 2

fn random_distribution(r: &mut ChaCha8Rng, alphabet: &[char]) -> CharDistribution {
    loop {
        let mut weights: Vec<(String, f64)> = Vec::new();
        for c in alphabet {
            if !r.random_bool(0.6) {
                continue;
            }
            let w = match r.random_range(0..10) {
                0 => 1e-12 * r.random::<f64>(),
                1 => 1e6 * r.random::<f64>(),
                _ => r.random::<f64>(),
            };
            if w > 0.0 {
                weights.push((c.to_string(), w));
            }
        }
        if let Ok(d) = CharDistribution::from_weights(CountUnit::Character, weights) {
            return d;
        }
    }
}

fn jsd_metric_axioms() -> Outcome {
    const TRIPLES: usize = 5_000;
    let alphabet: Vec<char> = "abcdefghijkl".chars().collect();
    let mut r = rng(0xC0FF_EE02);
    let d = |a: &CharDistribution, b: &CharDistribution| cdd_jsd(a, b).map_err(|e| e.to_string());
    let mut worst_slack = f64::INFINITY;
    for i in 0..TRIPLES {
        let xs = [
            random_distribution(&mut r, &alphabet),
            random_distribution(&mut r, &alphabet),
            random_distribution(&mut r, &alphabet),
        ];
        for x in &xs {
            ensure!(d(x, x)? == 0.0, "triple {i}: d(x,x) = {}", d(x, x)?);
        }
        for a in 0..3 {
            for b in 0..3 {
                let ab = d(&xs[a], &xs[b])?;
                ensure!(ab == d(&xs[b], &xs[a])?, "triple {i}: asymmetric");
                ensure!((-1e-12..=1.0 + 1e-12).contains(&ab), "triple {i}: {ab} outside [0,1]");
                for c in 0..3 {
                    let slack = d(&xs[a], &xs[c])? + d(&xs[c], &xs[b])? - ab;
                    worst_slack = worst_slack.min(slack);
                    ensure!(slack >= -1e-9, "triple {i}: triangle violated by {slack}");
                }
            }
        }
        let (left, right) = alphabet.split_at(r.random_range(1..alphabet.len()));
        let (p, q) = (random_distribution(&mut r, left), random_distribution(&mut r, right));
        let v = d(&p, &q)?;
        ensure!((v - 1.0).abs() <= 1e-12, "triple {i}: disjoint supports gave {v}");
    }
    Ok(format!("{TRIPLES} triples, smallest triangle slack {worst_slack:.3e}"))
}

// ---------------------------------------------------------------- 3

fn measures() -> Vec<Measure> {
    vec![Measure::Spacer, Measure::Spacd, Measure::SpacdSymmetric, Measure::CddJsd, Measure::Custom(Arc::new(TotalVariation))]
}

fn handmade_layout() -> PageLayout {
    let words = [("w1", "Alpha", 10.0, 10.0), ("w2", "beta,", 40.0, 10.0), ("w3", "Gamma", 10.0, 30.0), ("w4", "delta!", 40.0, 30.0)];
    let mut gt: Vec<Region> = words
        .iter()
        .enumerate()
        .map(|(i, (id, t, x, y))| Region::new(*id, RegionGeometry::rect(*x, *y, x + 25.0, y + 10.0), *t, Granularity::Word).with_order(0, i as i64))
        .collect();
    gt.push(Region::new("l1", RegionGeometry::rect(10.0, 10.0, 65.0, 20.0), "Alpha beta,", Granularity::Line));
    gt.push(Region::new("l2", RegionGeometry::rect(10.0, 30.0, 65.0, 40.0), "Gamma delta!", Granularity::Line));
    gt.push(Region::new("p1", RegionGeometry::rect(5.0, 5.0, 70.0, 45.0), "Alpha beta, Gamma delta!", Granularity::Paragraph));
    PageLayout {
        page_id: "handmade".into(),
        width: 100.0,
        height: 60.0,
        gt_regions: gt,
        pred_regions: None,
    }
}

fn fixtures() -> Result<Vec<PageLayout>, String> {
    let mut out = vec![handmade_layout()];
    for (i, columns) in [1usize, 2, 3].into_iter().enumerate() {
        let spec = LayoutSpec {
            columns,
            ..LayoutSpec::default()
        };
        out.push(generate_page(&spec, 40 + i as u64).map_err(|e| e.to_string())?.layout);
    }
    Ok(out)
}

fn word_ocr(layout: &PageLayout, noise: &ConfusionModel, seed: u64) -> OcrMap {
    layout
        .gt_at(Granularity::Word)
        .enumerate()
        .map(|(k, r)| (r.id.clone(), corrupt_ocr(&r.text, noise, seed + k as u64)))
        .collect()
}

fn decomposition_zero_identities() -> Outcome {
    let noise = ConfusionModel::uniform(&latin_alphabet(), 0.1, 0.03, 0.02, 0.01);
    let mut checks = 0;
    for (fi, base) in fixtures()?.iter().enumerate() {
        // Spaces are left out: word-level ground truth has none to match
        // the spaces inside line and paragraph transcriptions.
        let verbatim = NormalizationPolicy {
            count_spaces: false,
            ..NormalizationPolicy::raw()
        };
        for policy in [NormalizationPolicy::default(), verbatim] {
            let opts = BuildOptions::new(policy, CountUnit::Character);

            // Perfect parsing: predictions are the ground-truth words, read
            // by the same noisy OCR.
            let mut layout = base.clone();
            let preds: Vec<Region> = base
                .gt_at(Granularity::Word)
                .map(|r| Region { id: format!("pred-{}", r.id), ..r.clone() })
                .collect();
            layout.pred_regions = Some(preds);
            let on_gt = word_ocr(base, &noise, 7 * fi as u64);
            let on_pred: OcrMap = on_gt.iter().map(|(k, v)| (format!("pred-{k}"), v.clone())).collect();
            let v = build_vectors(&layout, Some(&on_gt), Some(&on_pred), &opts).map_err(|e| e.to_string())?;
            for m in measures() {
                let d = decompose(&v, &m).map_err(|e| e.to_string())?;
                ensure!(d.d_pars == Some(0.0), "fixture {fi} {}: perfect parsing d_pars = {:?}", m.name(), d.d_pars);
                ensure!(d.d_total.is_some() && d.d_total == d.d_ocr, "fixture {fi} {}: d_total {:?} != d_ocr {:?}", m.name(), d.d_total, d.d_ocr);
                checks += 1;
            }

            // Perfect OCR: every transcription equals its region text, with
            // predictions at line and paragraph level, partial and complete.
            let lines: Vec<Region> = base.gt_at(Granularity::Line).cloned().collect();
            let paragraphs: Vec<Region> = base.gt_at(Granularity::Paragraph).cloned().collect();
            let pred_sets = [lines.clone(), paragraphs.clone(), lines.iter().step_by(2).cloned().collect(), paragraphs.iter().skip(1).cloned().collect()];
            let on_gt: OcrMap = base.gt_at(Granularity::Word).map(|r| (r.id.clone(), r.text.clone())).collect();
            for preds in pred_sets {
                let on_pred: OcrMap = preds.iter().map(|r| (r.id.clone(), r.text.clone())).collect();
                let mut layout = base.clone();
                layout.pred_regions = Some(preds);
                let v = build_vectors(&layout, Some(&on_gt), Some(&on_pred), &opts).map_err(|e| e.to_string())?;
                for m in measures() {
                    let d = decompose(&v, &m).map_err(|e| e.to_string())?;
                    ensure!(d.d_ocr == Some(0.0), "fixture {fi} {}: perfect OCR d_ocr = {:?}", m.name(), d.d_ocr);
                    ensure!(d.d_int == Some(0.0), "fixture {fi} {}: perfect OCR d_int = {:?}", m.name(), d.d_int);
                    checks += 1;
                }
            }
        }
    }
    Ok(format!("{checks} fixture/measure combinations"))
}

// ---------------------------------------------------------------- 4

fn granularity_reproduction() -> Outcome {
    const SEED: u64 = 2024;
    let fracs = [0.1, 0.2, 0.3, 0.4, 0.5];
    let pages = generate_pages(&LayoutSpec::default(), 27, SEED).map_err(|e| e.to_string())?;
    let report = run_granularity_experiment(&pages, &fracs, &fracs, 10, SEED, &InferenceOptions::default()).map_err(|e| e.to_string())?;
    let median = |g, w, h| report.summary_for(g, w, h).map(|s| s.median).unwrap_or(f64::NAN);
    let [word, line, paragraph] = EXPERIMENT_GRANULARITIES;
    let mut ratios = Vec::new();
    for &w in &fracs {
        for &h in &fracs {
            let (mw, ml, mp) = (median(word, w, h), median(line, w, h), median(paragraph, w, h));
            ensure!(mw < ml && ml < mp, "crop {w}x{h}: medians word {mw} line {ml} paragraph {mp} out of order");
            ensure!(mp > 0.5, "crop {w}x{h}: paragraph median {mp} <= 0.5");
            if w >= 0.2 {
                ensure!(mw < 0.05, "crop {w}x{h}: word median {mw} >= 0.05");
            }
        }
    }
    for &h in &fracs {
        for g in [word, line] {
            let ratio = median(g, 0.2, h) / median(g, 0.1, h);
            ensure!((0.35..=0.65).contains(&ratio), "{} error ratio w0.2/w0.1 at h{h} = {ratio}", g.as_str());
            ratios.push(ratio);
        }
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(format!(
        "{} pages, {} crops; word {:.4} < line {:.4} < paragraph {:.4} at 0.1x0.1; halving ratios {lo:.3}..{hi:.3}",
        pages.len(),
        report.samples.len(),
        median(word, 0.1, 0.1),
        median(line, 0.1, 0.1),
        median(paragraph, 0.1, 0.1)
    ))
}

// ---------------------------------------------------------------- 5

fn degenerate_parse_detection() -> Outcome {
    let spec = LayoutSpec {
        columns: 3,
        ..LayoutSpec::default()
    };
    let page = generate_page(&spec, 5).map_err(|e| e.to_string())?;
    let mut layout = page.layout.clone();
    layout.pred_regions = Some(vec![Region::new("full", RegionGeometry::rect(0.0, 0.0, layout.width, layout.height), "", Granularity::Page)]);
    let noise = ConfusionModel::uniform(&latin_alphabet(), 0.02, 0.005, 0.005, 0.0);
    let paragraphs = page.paragraphs();
    let on_gt: OcrMap = paragraphs.iter().enumerate().map(|(k, p)| (p.id.clone(), corrupt_ocr(&p.text, &noise, k as u64))).collect();
    let all: Vec<&str> = paragraphs.iter().map(|p| p.text.as_str()).collect();
    let on_pred = OcrMap::from([("full".to_string(), corrupt_ocr(&all.join(" "), &noise, 99))]);

    // through the JSON loader, as the CLI would see it
    let doc = PageDocument::from_layout(&layout, Some(on_gt), Some(on_pred));
    let loaded = load_page_json(page_to_json(&doc).as_bytes()).map_err(|e| e.to_string())?;
    let opts = EvalOptions {
        build: BuildOptions::new(NormalizationPolicy::default(), CountUnit::Character),
        measure: Measure::Spacer,
        thresholds: TriageThresholds::default(),
        micro: false,
    };
    let report = decompose_page(&loaded, "fixture", &opts);
    ensure!(report.error.is_none(), "decomposition failed: {:?}", report.error);
    let d_pars = report.decomposition.as_ref().and_then(|d| d.d_pars).ok_or("no d_pars")?;
    let cote = report.cote.ok_or("no COTe")?;
    let verdict = report.triage.ok_or("no triage")?;
    ensure!(d_pars <= 0.05, "d_pars {d_pars} > 0.05");
    ensure!(cote.trespass >= 0.5, "trespass {} < 0.5", cote.trespass);
    ensure!(verdict.dominant == Dominant::Parsing, "triage says {}", verdict.dominant.as_str());
    Ok(format!("d_pars {d_pars:.4}, trespass {:.3}, COTe {:.3}, verdict parsing", cote.trespass, cote.score))
}

// ---------------------------------------------------------------- 6

fn triage_classifier() -> Outcome {
    let config = PipelineConfig::desk_scale(49, 17);
    let cells = simulate_pipeline_corpus(&config).map_err(|e| e.to_string())?;
    let thresholds = TriageThresholds::default();
    let mut plain = Vec::new();
    let mut gated = Vec::new();
    for cell in &cells {
        let report = decompose(&cell.vectors, &Measure::Spacer).map_err(|e| e.to_string())?;
        if !cell.degenerate {
            plain.push((triage(&report, None, thresholds).dominant, cell.label));
        }
        gated.push((triage(&report, Some(&cell.cote), thresholds).dominant, cell.label));
    }
    ensure!(plain.len() >= 900, "only {} non-degenerate cells", plain.len());
    let f1 = |pairs: &[(Dominant, Dominant)], d| classification_f1(pairs.iter().copied(), d);
    let (po, pp) = (f1(&plain, Dominant::Ocr), f1(&plain, Dominant::Parsing));
    let (go, gp) = (f1(&gated, Dominant::Ocr), f1(&gated, Dominant::Parsing));
    ensure!(po >= 0.85 && pp >= 0.85, "ratio-only F1 ocr {po:.3} parsing {pp:.3} below 0.85");
    ensure!(go >= 0.88 && gp >= 0.88, "gated F1 ocr {go:.3} parsing {gp:.3} below 0.88");
    Ok(format!(
        "{} cells ({} non-degenerate); ratio F1 ocr {po:.3} parsing {pp:.3}; gated F1 ocr {go:.3} parsing {gp:.3}",
        cells.len(),
        plain.len()
    ))
}

// ---------------------------------------------------------------- 7

fn is_left(a: Point, b: Point, p: Point) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)
}

/// Winding-number containment, boundary included.
fn winding_contains(p: Point, ring: &[Point]) -> bool {
    let mut winding = 0i32;
    for (i, &a) in ring.iter().enumerate() {
        let b = ring[(i + 1) % ring.len()];
        let on_edge = is_left(a, b, p) == 0.0
            && (a.x.min(b.x)..=a.x.max(b.x)).contains(&p.x)
            && (a.y.min(b.y)..=a.y.max(b.y)).contains(&p.y);
        if on_edge {
            return true;
        }
        if a.y <= p.y {
            if b.y > p.y && is_left(a, b, p) > 0.0 {
                winding += 1;
            }
        } else if b.y <= p.y && is_left(a, b, p) < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

fn random_geometry(r: &mut ChaCha8Rng) -> RegionGeometry {
    loop {
        let g = if r.random_bool(0.3) {
            let (x, y) = (r.random_range(0..60) as f64, r.random_range(0..60) as f64);
            RegionGeometry::rect(x, y, x + r.random_range(1..40) as f64, y + r.random_range(1..40) as f64)
        } else {
            // star-shaped around a center, integer vertices
            let (cx, cy) = (r.random_range(20..80) as f64, r.random_range(20..80) as f64);
            let n = r.random_range(3..12);
            let mut angles: Vec<f64> = (0..n).map(|_| r.random::<f64>() * std::f64::consts::TAU).collect();
            angles.sort_by(f64::total_cmp);
            let vertices = angles
                .iter()
                .map(|a| {
                    let radius = r.random_range(3.0..30.0);
                    Point::new((cx + radius * a.cos()).round(), (cy + radius * a.sin()).round())
                })
                .collect();
            RegionGeometry::polygon(vertices)
        };
        if g.validate().is_ok() {
            return g;
        }
    }
}

/// A grid, half-grid or arbitrary point in the bounding box of `g` grown by 2.
fn point_near(r: &mut ChaCha8Rng, g: &RegionGeometry) -> Point {
    let b = g.bounds();
    let (x0, y0) = (b.x0 - 2.0, b.y0 - 2.0);
    let (w, h) = (b.width() + 4.0, b.height() + 4.0);
    let grid = |r: &mut ChaCha8Rng, lo: f64, span: f64, step: f64| lo + (r.random_range(0..=(span / step) as usize) as f64) * step;
    match r.random_range(0..3) {
        0 => Point::new(grid(r, x0, w, 1.0), grid(r, y0, h, 1.0)),
        1 => Point::new(grid(r, x0, w, 0.5), grid(r, y0, h, 0.5)),
        _ => Point::new(x0 + r.random::<f64>() * w, y0 + r.random::<f64>() * h),
    }
}

/// Plain Wagner-Fischer distance over the full matrix.
fn levenshtein(a: &[char], b: &[char]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn oracle_equivalence() -> Outcome {
    let mut r = rng(0xC0FF_EE07);

    let mut inside = 0;
    for i in 0..10_000 {
        let g = random_geometry(&mut r);
        let p = point_near(&mut r, &g);
        let expected = winding_contains(p, &g.ring());
        ensure!(point_in_geometry(p, &g) == expected, "sample {i}: {p:?} in {g:?} should be {expected}");
        inside += usize::from(expected);
    }

    let mut assigned = 0;
    for page in 0..1_000 {
        let preds: Vec<Region> = (0..r.random_range(0..7))
            .map(|k| Region::new(format!("p{k}"), random_geometry(&mut r), "", Granularity::Paragraph))
            .collect();
        let tokens: Vec<CharToken> = (0..r.random_range(0..80))
            .map(|k| CharToken {
                token: pick(&mut r, &['a', 'b', 'c', 'd']).to_string(),
                position: match preds.is_empty() {
                    true => Point::new(r.random::<f64>() * 100.0, r.random::<f64>() * 100.0),
                    false => {
                        let k = r.random_range(0..preds.len());
                        point_near(&mut r, &preds[k].geometry)
                    }
                },
                source_region: "g".into(),
                sequence_index: k,
            })
            .collect();
        let table = assign_characters(&tokens, &preds, CountUnit::Character);
        let mut per_pred: Vec<BTreeMap<String, u64>> = vec![BTreeMap::new(); preds.len()];
        let mut total: BTreeMap<String, u64> = BTreeMap::new();
        for (t, hits) in tokens.iter().zip(&table.hits) {
            let expected: Vec<String> = preds
                .iter()
                .filter(|p| winding_contains(t.position, &p.geometry.ring()))
                .map(|p| p.id.clone())
                .collect();
            ensure!(*hits == expected, "page {page}: token at {:?} hits {hits:?}, expected {expected:?}", t.position);
            for id in &expected {
                let k: usize = id[1..].parse().unwrap();
                *per_pred[k].entry(t.token.clone()).or_default() += 1;
                *total.entry(t.token.clone()).or_default() += 1;
                assigned += 1;
            }
        }
        for (k, (_, v)) in table.per_prediction.iter().enumerate() {
            let got: BTreeMap<String, u64> = v.iter().map(|(t, n)| (t.to_string(), n)).collect();
            ensure!(got == per_pred[k], "page {page}: prediction {k} vector {got:?} != {:?}", per_pred[k]);
        }
        let got: BTreeMap<String, u64> = table.aggregate.iter().map(|(t, n)| (t.to_string(), n)).collect();
        ensure!(got == total, "page {page}: aggregate {got:?} != {total:?}");
    }

    let alphabet: Vec<char> = "abcde ".chars().collect();
    for i in 0..1_000 {
        let (n, m) = (r.random_range(0..80), r.random_range(0..80));
        let a: Vec<char> = random_string(&mut r, &alphabet, n).chars().collect();
        let b: Vec<char> = random_string(&mut r, &alphabet, m).chars().collect();
        let c = edit_counts(&a, &b);
        let expected = levenshtein(&a, &b);
        ensure!(c.substitutions + c.deletions + c.insertions == expected, "pair {i}: counts {c:?} sum != distance {expected}");
        ensure!(c.distance() == expected && c.gt_length == n, "pair {i}: {c:?}");
        ensure!(c.insertions + n == c.deletions + m, "pair {i}: counts {c:?} inconsistent with lengths {n}, {m}");
    }
    Ok(format!("10000 containment samples ({inside} inside), 1000 pages ({assigned} assignments), 1000 CER pairs"))
}

// ---------------------------------------------------------------- 8

const TEXT_POOL: &[&str] = &["plain", "Ünïcödé", "quote \" and \\ slash", "tab\tnew\nline", "emoji 🦀", "", "  spaced  ", "控制\u{1}char"];

fn random_text(r: &mut ChaCha8Rng) -> String {
    let parts: Vec<&str> = (0..r.random_range(1..4)).map(|_| TEXT_POOL[r.random_range(0..TEXT_POOL.len())]).collect();
    parts.join(" ")
}

fn random_coord(r: &mut ChaCha8Rng) -> f64 {
    match r.random_range(0..3) {
        0 => r.random_range(0..1000) as f64,
        1 => r.random::<f64>() * 1000.0,
        _ => r.random::<f64>() * 1e-3,
    }
}

fn random_record(r: &mut ChaCha8Rng, id: String, with_text: bool) -> RegionRecord {
    let geometry = if r.random_bool(0.5) {
        let (x, y) = (random_coord(r), random_coord(r));
        GeometryRecord {
            kind: GeometryKind::Box,
            coords: vec![x, y, x + 1.0 + random_coord(r), y + 1.0 + random_coord(r)],
        }
    } else {
        let (cx, cy) = (500.0 + random_coord(r), 500.0 + random_coord(r));
        let n = r.random_range(3..9);
        let coords = (0..n)
            .flat_map(|k| {
                let a = std::f64::consts::TAU * (k as f64 + 0.5 * r.random::<f64>()) / n as f64;
                let radius = 10.0 + 100.0 * r.random::<f64>();
                [cx + radius * a.cos(), cy + radius * a.sin()]
            })
            .collect();
        GeometryRecord {
            kind: GeometryKind::Polygon,
            coords,
        }
    };
    let granularity = [Granularity::Word, Granularity::Line, Granularity::Paragraph, Granularity::Page][r.random_range(0..4)];
    RegionRecord {
        id,
        geometry,
        text: with_text.then(|| random_text(r)),
        granularity,
        semantic_class: r.random_bool(0.3).then(|| random_text(r)),
        order_hint: r.random_bool(0.5).then(|| OrderHint {
            column: r.random_range(-3..5),
            index: r.random_range(0..1000),
        }),
    }
}

fn random_page_document(r: &mut ChaCha8Rng, n: usize) -> PageDocument {
    let gt: Vec<RegionRecord> = (0..r.random_range(0..12)).map(|k| random_record(r, format!("g{n}-{k}"), true)).collect();
    let pred: Option<Vec<RegionRecord>> = r.random_bool(0.7).then(|| {
        (0..r.random_range(0..8))
            .map(|k| {
                let with_text = r.random_bool(0.5);
                random_record(r, format!("p{n}-{k}"), with_text)
            })
            .collect()
    });
    let ocr = |r: &mut ChaCha8Rng, ids: Vec<String>| -> OcrMap { ids.into_iter().map(|id| (id, random_text(r))).collect() };
    let gt_ids = gt.iter().map(|g| g.id.clone()).collect();
    let pred_ids = pred.iter().flatten().map(|p| p.id.clone()).collect();
    PageDocument {
        schema_version: SCHEMA_VERSION.to_string(),
        page: PageInfo {
            id: random_text(r),
            width: 1000.0 + random_coord(r),
            height: 1000.0 + random_coord(r),
            unit: r.random_bool(0.5).then(|| "px".to_string()),
        },
        gt_regions: gt,
        ocr_on_gt: r.random_bool(0.6).then(|| ocr(r, gt_ids)),
        ocr_on_pred: r.random_bool(0.6).then(|| ocr(r, pred_ids)),
        pred_regions: pred,
    }
}

fn random_option(r: &mut ChaCha8Rng) -> Option<f64> {
    match r.random_range(0..4) {
        0 => None,
        1 => Some(r.random::<f64>()),
        2 => Some(r.random::<f64>() * 1e-300),
        _ => Some(r.random_range(0..5) as f64),
    }
}

fn random_page_report(r: &mut ChaCha8Rng, n: usize) -> PageReport {
    if r.random_bool(0.1) {
        return PageReport::failed(format!("page{n}"), random_text(r), random_text(r));
    }
    let dominant = [Dominant::Ocr, Dominant::Parsing, Dominant::Indeterminate][r.random_range(0..3)];
    PageReport {
        page_id: format!("page{n}"),
        source: random_text(r),
        scores: r.random_bool(0.5).then(|| PageScores {
            spacer: random_option(r),
            spacer_micro: random_option(r),
            spacd: random_option(r),
            cdd_jsd: random_option(r),
            cer: random_option(r),
        }),
        decomposition: r.random_bool(0.5).then(|| DecompositionReport {
            metric: "spacer".into(),
            d_pars: random_option(r),
            d_ocr: random_option(r),
            d_int: random_option(r),
            d_total: random_option(r),
            non_additive: true,
            flags: (0..r.random_range(0..3)).map(|_| random_text(r)).collect(),
        }),
        cote: r.random_bool(0.5).then(|| CoteComponents {
            coverage: r.random(),
            overlap: r.random(),
            trespass: r.random(),
            excess: r.random(),
            score: r.random::<f64>() * 3.0 - 2.0,
        }),
        triage: r.random_bool(0.5).then(|| TriageVerdict {
            dominant,
            ratio: random_option(r),
            cote_gate_passed: [None, Some(true), Some(false)][r.random_range(0..3)],
        }),
        error: None,
    }
}

fn format_round_trips() -> Outcome {
    let mut r = rng(0xC0FF_EE08);
    for n in 0..500 {
        let doc = random_page_document(&mut r, n);
        let json = page_to_json(&doc);
        let back: PageDocument = serde_json::from_str(&json).map_err(|e| format!("document {n}: {e}"))?;
        ensure!(back == doc, "document {n} changed in round trip");
        let loaded = load_page_json(json.as_bytes()).map_err(|e| format!("document {n}: {e}"))?;
        ensure!(loaded.layout.gt_regions.len() == doc.gt_regions.len(), "document {n}: region count changed");

        let pages = (0..r.random_range(0..6)).map(|k| random_page_report(&mut r, k)).collect();
        let report = ReportDocument::new("decompose", "spacer", "character", pages);
        let back = report_from_json(report_to_json(&report).as_bytes()).map_err(|e| format!("report {n}: {e}"))?;
        ensure!(back == report, "report {n} changed in round trip");
    }

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/two_blocks.alto.xml");
    let xml = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let layout = load_alto(xml.as_bytes()).map_err(|e| e.to_string())?;
    let json = page_to_json(&PageDocument::from_layout(&layout, None, None));
    let loaded = load_page_json(json.as_bytes()).map_err(|e| e.to_string())?.layout;
    ensure!(loaded == layout, "ALTO layout changed through JSON");

    // boxes straight from the XML attributes
    let doc = roxmltree::Document::parse(&xml).map_err(|e| e.to_string())?;
    let mut expected = Vec::new();
    for node in doc.descendants().filter(|n| n.is_element()) {
        let level = match node.tag_name().name() {
            "String" => Granularity::Word,
            "TextLine" => Granularity::Line,
            "TextBlock" => Granularity::Paragraph,
            _ => continue,
        };
        let num = |a: &str| node.attribute(a).unwrap().parse::<f64>().unwrap();
        let (x, y) = (num("HPOS"), num("VPOS"));
        expected.push((node.attribute("ID").unwrap().to_string(), level, [x, y, x + num("WIDTH"), y + num("HEIGHT")]));
    }
    ensure!(loaded.gt_regions.len() == expected.len(), "{} regions loaded, {} in the XML", loaded.gt_regions.len(), expected.len());
    for (id, level, coords) in &expected {
        let region = loaded.gt_regions.iter().find(|g| &g.id == id).ok_or(format!("{id} missing"))?;
        ensure!(region.granularity == *level, "{id}: granularity {:?}", region.granularity);
        let b = region.geometry.bounds();
        ensure!([b.x0, b.y0, b.x1, b.y1] == *coords, "{id}: bounds {b:?} != {coords:?}");
    }

    // loaded regions feed inference and assignment directly: every word's
    // characters land in its line and block
    let opts = InferenceOptions::default();
    for word in loaded.gt_at(Granularity::Word) {
        let tokens = infer_char_positions(word, &opts).map_err(|e| e.to_string())?;
        let parents: Vec<Region> = loaded
            .gt_regions
            .iter()
            .filter(|g| g.granularity != Granularity::Word && point_in_geometry(tokens[0].position, &g.geometry))
            .cloned()
            .collect();
        ensure!(parents.len() == 2, "{}: inside {} parents", word.id, parents.len());
        let table = assign_characters(&tokens, &parents, CountUnit::Character);
        ensure!(table.aggregate.total() == 2 * tokens.len() as u64, "{}: characters escape their parents", word.id);
    }
    Ok(format!("500 page and 500 report documents; ALTO fixture with {} regions", expected.len()))
}

// ---------------------------------------------------------------- 9

fn run_cli(args: &[&str], out: &Path, summary: &Path) -> Result<(Vec<u8>, Vec<u8>), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_cevkit"))
        .args(args)
        .args(["--out", out.to_str().unwrap(), "--summary", summary.to_str().unwrap()])
        .env("CEVKIT_LOG", "error")
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    let read = |p: &Path| std::fs::read(p).map_err(|e| e.to_string());
    Ok((read(out)?, read(summary)?))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (out, summary) = (dir.path().join("out.csv"), dir.path().join("summary.csv"));
    let commands: [&[&str]; 2] = [
        &["--seed", "31", "simulate-granularity", "--pages", "6", "--repeats", "3"],
        &["--seed", "31", "simulate-pipeline", "--pages", "4"],
    ];
    let mut bytes = 0;
    for cmd in commands {
        let runs = [["--jobs", "1"], ["--jobs", "4"], ["--jobs", "4"], ["--jobs", "1"]]
            .iter()
            .map(|jobs| run_cli(&[&jobs[..], cmd].concat(), &out, &summary))
            .collect::<Result<Vec<_>, _>>()?;
        for (k, run) in runs.iter().enumerate().skip(1) {
            ensure!(*run == runs[0], "{} output differs on run {k}", cmd[2]);
        }
        ensure!(runs[0].0.len() > 100, "{} wrote almost nothing", cmd[2]);
        bytes += runs[0].0.len() + runs[0].1.len();
    }
    Ok(format!("both simulators byte-identical over 4 runs at --jobs 1 and 4 ({bytes} bytes)"))
}

// ----------------------------------------------------------------

fn main() {
    let criteria: [Criterion; 9] = [
        ("SpACER <= CER theorem", spacer_bounded_by_cer, Some(10)),
        ("JSD metric axioms", jsd_metric_axioms, None),
        ("decomposition zero identities", decomposition_zero_identities, None),
        ("spatial granularity reproduction", granularity_reproduction, Some(120)),
        ("degenerate parse detection", degenerate_parse_detection, None),
        ("triage classifier F1", triage_classifier, Some(180)),
        ("oracle equivalence", oracle_equivalence, None),
        ("format round trips", format_round_trips, None),
        ("determinism", determinism, None),
    ];
    let mut failed = 0;
    for (n, (name, run, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(limit)) if elapsed > Duration::from_secs(limit) => Err(format!("took {elapsed:.1?}, budget {limit} s")),
            (o, _) => o,
        };
        let secs = elapsed.as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({secs:.2} s): {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.2} s): {why}", n + 1);
            }
        }
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
