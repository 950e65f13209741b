//! Synthetic pages and noise models for validating the metrics without real
//! layout or OCR models.
//!
//! Pages are abstract: glyphs are rectangles with a per-character advance
//! width, laid out into columns of words, lines and paragraphs. Each glyph's
//! true center is kept as an oracle position, which lets the spatial
//! granularity experiment measure how far mono-spaced inference from word,
//! line and paragraph boxes is from the truth.
//!
//! Everything here is a pure function of its inputs and a seed; per-item
//! seeds are derived with [`derive_seed`] so results do not depend on
//! evaluation order.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::charvec::{char_vector, CountUnit, NormalizationPolicy};
use crate::decompose::{build_vectors, cote_approx, BuildOptions, CoteComponents, Dominant, OcrMap, VectorSet};
use crate::error::{Error, Result};
use crate::geometry::{
    assign_characters, infer_char_positions, CharToken, Granularity,
    InferenceOptions, PageLayout, Point, Rect, Region, RegionGeometry,
};
use crate::metrics::spacer_macro;

/// SplitMix64 over the master seed and a path of indices.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    Left,
    Centered,
    Justified,
}

impl Alignment {
    pub const ALL: [Alignment; 3] = [Alignment::Left, Alignment::Centered, Alignment::Justified];

    pub fn as_str(self) -> &'static str {
        match self {
            Alignment::Left => "left",
            Alignment::Centered => "centered",
            Alignment::Justified => "justified",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextSource {
    pub min_word_len: usize,
    pub max_word_len: usize,
    pub min_paragraph_words: usize,
    pub max_paragraph_words: usize,
    /// Probability that a word ends with `,` or `.`.
    pub punctuation_rate: f64,
}

impl Default for TextSource {
    fn default() -> Self {
        Self {
            min_word_len: 1,
            max_word_len: 11,
            min_paragraph_words: 30,
            max_paragraph_words: 150,
            punctuation_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub page_width: f64,
    pub page_height: f64,
    pub columns: usize,
    pub alignment: Alignment,
    /// Mean glyph advance; individual glyphs scale it by [`advance_factor`].
    pub char_width: f64,
    pub line_height: f64,
    /// Height of the ink band that word and line boxes cover.
    pub glyph_height: f64,
    pub margin: f64,
    pub gutter: f64,
    pub paragraph_gap: f64,
    /// Use the proportional advance table; otherwise every glyph is
    /// `char_width` wide.
    pub proportional: bool,
    pub text: TextSource,
}

impl Default for LayoutSpec {
    fn default() -> Self {
        Self {
            page_width: 280.0,
            page_height: 430.0,
            columns: 2,
            alignment: Alignment::Left,
            char_width: 2.2,
            line_height: 5.0,
            glyph_height: 3.6,
            margin: 15.0,
            gutter: 6.0,
            paragraph_gap: 5.0,
            proportional: true,
            text: TextSource::default(),
        }
    }
}

impl LayoutSpec {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("page_width", self.page_width),
            ("page_height", self.page_height),
            ("char_width", self.char_width),
            ("line_height", self.line_height),
            ("glyph_height", self.glyph_height),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.columns == 0 {
            return Err(Error::InvalidParameter("columns must be at least 1".into()));
        }
        if self.glyph_height > self.line_height {
            return Err(Error::InvalidParameter("glyph_height exceeds line_height".into()));
        }
        let t = &self.text;
        if t.min_word_len == 0 || t.min_word_len > t.max_word_len {
            return Err(Error::InvalidParameter("word length range is empty".into()));
        }
        if t.min_paragraph_words == 0 || t.min_paragraph_words > t.max_paragraph_words {
            return Err(Error::InvalidParameter("paragraph length range is empty".into()));
        }
        if !(0.0..=1.0).contains(&t.punctuation_rate) {
            return Err(Error::InvalidParameter("punctuation_rate outside [0, 1]".into()));
        }
        let widest_word = t.max_word_len as f64 * self.char_width * MAX_ADVANCE + self.char_width;
        if self.column_width() < widest_word {
            return Err(Error::LayoutTooSmall(format!(
                "column width {:.2} < longest word {:.2}",
                self.column_width(),
                widest_word
            )));
        }
        if self.page_height - 2.0 * self.margin < self.line_height {
            return Err(Error::LayoutTooSmall("no room for one line".into()));
        }
        Ok(())
    }

    pub fn column_width(&self) -> f64 {
        (self.page_width - 2.0 * self.margin - (self.columns as f64 - 1.0) * self.gutter) / self.columns as f64
    }

    fn column_x0(&self, col: usize) -> f64 {
        self.margin + col as f64 * (self.column_width() + self.gutter)
    }

    fn advance(&self, c: char) -> f64 {
        if self.proportional {
            self.char_width * advance_factor(c)
        } else {
            self.char_width
        }
    }
}

const MAX_ADVANCE: f64 = 1.6;

/// Relative advance widths of a generic proportional serif face.
pub fn advance_factor(c: char) -> f64 {
    match c {
        'i' | 'j' | 'l' | '.' | ',' | '\'' => 0.5,
        'f' | 't' | 'r' => 0.7,
        ' ' => 0.6,
        's' | 'c' | 'z' | 'e' | 'a' => 0.9,
        'm' => 1.6,
        'w' => 1.45,
        _ => 1.05,
    }
}

// English letter frequencies (per mille).
const LETTERS: &[(char, u32)] = &[
    ('e', 127), ('t', 91), ('a', 82), ('o', 75), ('i', 70), ('n', 67), ('s', 63), ('h', 61),
    ('r', 60), ('d', 43), ('l', 40), ('c', 28), ('u', 28), ('m', 24), ('w', 24), ('f', 22),
    ('g', 20), ('y', 20), ('p', 19), ('b', 15), ('v', 10), ('k', 8), ('j', 2), ('x', 2),
    ('q', 1), ('z', 1),
];

/// The 26 lowercase letters.
pub fn latin_alphabet() -> Vec<char> {
    LETTERS.iter().map(|(c, _)| *c).collect()
}

fn random_letter(rng: &mut ChaCha8Rng) -> char {
    let total: u32 = LETTERS.iter().map(|(_, w)| w).sum();
    let mut r = rng.random_range(0..total);
    for &(c, w) in LETTERS {
        if r < w {
            return c;
        }
        r -= w;
    }
    'e'
}

fn random_word(src: &TextSource, rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(src.min_word_len..=src.max_word_len);
    let mut w: String = (0..len).map(|_| random_letter(rng)).collect();
    if rng.random::<f64>() < src.punctuation_rate {
        w.push(if rng.random::<bool>() { ',' } else { '.' });
    }
    w
}

/// A generated page with the true position of every glyph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPage {
    /// Word, line and paragraph regions; no predictions.
    pub layout: PageLayout,
    /// One token per non-space glyph; `sequence_index` is its oracle id and
    /// `source_region` its word region.
    pub oracle: Vec<CharToken>,
    /// Oracle ids of the non-space characters of each region, in text order.
    pub region_chars: BTreeMap<String, Vec<usize>>,
    pub columns: usize,
    pub alignment: Alignment,
}

impl SyntheticPage {
    pub fn regions_at(&self, g: Granularity) -> Vec<&Region> {
        self.layout.gt_at(g).collect()
    }

    pub fn paragraphs(&self) -> Vec<Region> {
        self.layout.gt_at(Granularity::Paragraph).cloned().collect()
    }
}

struct PlacedWord {
    text: String,
    x0: f64,
    glyph_x: Vec<f64>,
    x1: f64,
}

/// Lays out random paragraphs column by column until the page is full.
///
/// Words are wrapped greedily; justified lines (except a paragraph's last)
/// stretch inter-word spaces to the column width and centered lines are
/// offset by half the slack. A paragraph broken by a column end becomes one
/// paragraph region per column.
pub fn generate_page(spec: &LayoutSpec, seed: u64) -> Result<SyntheticPage> {
    spec.validate()?;
    let mut rng = rng_for(seed);
    let col_w = spec.column_width();
    let top = spec.margin;
    let bottom = spec.page_height - spec.margin;
    let space = spec.advance(' ');
    let band_pad = (spec.line_height - spec.glyph_height) / 2.0;

    let mut regions: Vec<Region> = Vec::new();
    let mut oracle: Vec<CharToken> = Vec::new();
    let mut region_chars: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let (mut n_word, mut n_line, mut n_para) = (0usize, 0usize, 0usize);

    let mut col = 0usize;
    let mut y = top;
    let mut full = false;

    while !full {
        let n_words = rng.random_range(spec.text.min_paragraph_words..=spec.text.max_paragraph_words);
        let words: Vec<String> = (0..n_words).map(|_| random_word(&spec.text, &mut rng)).collect();

        // greedy wrap
        let mut lines: Vec<Vec<&str>> = vec![Vec::new()];
        let mut width = 0.0;
        for w in &words {
            let ww: f64 = w.chars().map(|c| spec.advance(c)).sum();
            let cur = lines.last_mut().unwrap();
            let needed = if cur.is_empty() { ww } else { width + space + ww };
            if needed <= col_w || cur.is_empty() {
                cur.push(w);
                width = needed;
            } else {
                lines.push(vec![w]);
                width = ww;
            }
        }

        if y > top {
            y += spec.paragraph_gap;
        }
        let mut piece: Option<(String, Vec<String>, Rect, Vec<usize>)> = None;
        let n_lines = lines.len();
        for (li, words) in lines.iter().enumerate() {
            if y + spec.line_height > bottom {
                if let Some(p) = piece.take() {
                    push_paragraph(&mut regions, &mut region_chars, p, col);
                }
                col += 1;
                y = top;
                if col >= spec.columns {
                    full = true;
                    break;
                }
            }
            let natural: f64 = words.iter().map(|w| w.chars().map(|c| spec.advance(c)).sum::<f64>()).sum::<f64>()
                + space * (words.len() as f64 - 1.0);
            let slack = (col_w - natural).max(0.0);
            let (mut x, gap) = match spec.alignment {
                Alignment::Left => (spec.column_x0(col), space),
                Alignment::Centered => (spec.column_x0(col) + slack / 2.0, space),
                Alignment::Justified if li + 1 < n_lines && words.len() > 1 => {
                    (spec.column_x0(col), space + slack / (words.len() as f64 - 1.0))
                }
                Alignment::Justified => (spec.column_x0(col), space),
            };

            let cy = y + spec.line_height / 2.0;
            let mut placed: Vec<PlacedWord> = Vec::new();
            for (wi, w) in words.iter().enumerate() {
                if wi > 0 {
                    x += gap;
                }
                let x0 = x;
                let mut glyph_x = Vec::new();
                for c in w.chars() {
                    let adv = spec.advance(c);
                    glyph_x.push(x + adv / 2.0);
                    x += adv;
                }
                placed.push(PlacedWord {
                    text: (*w).to_string(),
                    x0,
                    glyph_x,
                    x1: x,
                });
            }

            let line_id = format!("l{n_line}");
            n_line += 1;
            let (y0, y1) = (y + band_pad, y + band_pad + spec.glyph_height);
            let mut line_ids = Vec::new();
            for pw in &placed {
                let word_id = format!("w{n_word}");
                let mut ids = Vec::new();
                for (c, gx) in pw.text.chars().zip(&pw.glyph_x) {
                    let id = oracle.len();
                    oracle.push(CharToken {
                        token: c.to_string(),
                        position: Point::new(*gx, cy),
                        source_region: word_id.clone(),
                        sequence_index: id,
                    });
                    ids.push(id);
                }
                regions.push(
                    Region::new(word_id.clone(), RegionGeometry::rect(pw.x0, y0, pw.x1, y1), pw.text.clone(), Granularity::Word)
                        .with_order(col as i64, n_word as i64),
                );
                line_ids.extend_from_slice(&ids);
                region_chars.insert(word_id, ids);
                n_word += 1;
            }
            let line_text = words.join(" ");
            let (lx0, lx1) = (placed[0].x0, placed[placed.len() - 1].x1);
            regions.push(
                Region::new(line_id.clone(), RegionGeometry::rect(lx0, y0, lx1, y1), line_text.clone(), Granularity::Line)
                    .with_order(col as i64, n_line as i64),
            );
            region_chars.insert(line_id, line_ids.clone());

            let p = piece.get_or_insert_with(|| {
                let id = format!("p{n_para}");
                n_para += 1;
                (id, Vec::new(), Rect { x0: lx0, y0, x1: lx1, y1 }, Vec::new())
            });
            p.1.push(line_text);
            p.2.x0 = p.2.x0.min(lx0);
            p.2.x1 = p.2.x1.max(lx1);
            p.2.y1 = y1;
            p.3.extend_from_slice(&line_ids);

            y += spec.line_height;
        }
        if let Some(p) = piece.take() {
            push_paragraph(&mut regions, &mut region_chars, p, col.min(spec.columns - 1));
        }
        if y + spec.paragraph_gap + spec.line_height > bottom && col + 1 >= spec.columns {
            full = true;
        }
    }

    if oracle.is_empty() {
        return Err(Error::LayoutTooSmall("no text fits on the page".into()));
    }

    Ok(SyntheticPage {
        layout: PageLayout {
            page_id: format!("synthetic-{seed:016x}"),
            width: spec.page_width,
            height: spec.page_height,
            gt_regions: regions,
            pred_regions: None,
        },
        oracle,
        region_chars,
        columns: spec.columns,
        alignment: spec.alignment,
    })
}

fn push_paragraph(
    regions: &mut Vec<Region>,
    region_chars: &mut BTreeMap<String, Vec<usize>>,
    (id, lines, rect, ids): (String, Vec<String>, Rect, Vec<usize>),
    col: usize,
) {
    let index = regions.iter().filter(|r| r.granularity == Granularity::Paragraph).count();
    regions.push(
        Region::new(id.clone(), RegionGeometry::rect(rect.x0, rect.y0, rect.x1, rect.y1), lines.join(" "), Granularity::Paragraph)
            .with_order(col as i64, index as i64),
    );
    region_chars.insert(id, ids);
}

/// Page `i` of a corpus: 1-3 columns and the three alignments in turn.
pub fn cycled_spec(base: &LayoutSpec, i: usize) -> LayoutSpec {
    let mut spec = base.clone();
    spec.columns = 1 + i % 3;
    spec.alignment = Alignment::ALL[(i / 3) % 3];
    spec
}

/// Seed of page `i` in a corpus generated from `seed`.
pub fn page_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, &[i as u64])
}

/// `n` pages built with [`cycled_spec`] and [`page_seed`].
pub fn generate_pages(base: &LayoutSpec, n: usize, seed: u64) -> Result<Vec<SyntheticPage>> {
    (0..n).map(|i| generate_page(&cycled_spec(base, i), page_seed(seed, i))).collect()
}

pub const EXPERIMENT_GRANULARITIES: [Granularity; 3] = [Granularity::Word, Granularity::Line, Granularity::Paragraph];

/// Inferred position of every oracle glyph, per experiment granularity.
pub fn inferred_positions(page: &SyntheticPage, opts: &InferenceOptions) -> Result<[Vec<Point>; 3]> {
    let mut out: [Vec<Point>; 3] = Default::default();
    for (slot, g) in out.iter_mut().zip(EXPERIMENT_GRANULARITIES) {
        let mut pos = vec![Point::new(f64::NAN, f64::NAN); page.oracle.len()];
        for region in page.layout.gt_at(g) {
            let ids = &page.region_chars[&region.id];
            let tokens = infer_char_positions(region, opts)?;
            let glyphs = tokens.iter().filter(|t| !t.token.chars().all(char::is_whitespace));
            for (t, &id) in glyphs.zip(ids) {
                pos[id] = t.position;
            }
        }
        *slot = pos;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropSample {
    pub page: usize,
    pub columns: usize,
    pub alignment: Alignment,
    pub width_frac: f64,
    pub height_frac: f64,
    pub repeat: usize,
    pub crop: Rect,
    pub truth_count: usize,
    /// Membership error for word, line and paragraph inference; `None` when
    /// the crop holds no glyph.
    pub errors: [Option<f64>; 3],
}

/// `(|truth \ inferred| + |inferred \ truth|) / |truth|`.
pub fn membership_error(truth: &[Point], inferred: &[Point], crop: &Rect) -> Option<f64> {
    let mut n_truth = 0usize;
    let mut wrong = 0usize;
    for (t, i) in truth.iter().zip(inferred) {
        let a = crop.contains(*t);
        let b = crop.contains(*i);
        n_truth += usize::from(a);
        wrong += usize::from(a != b);
    }
    (n_truth > 0).then(|| wrong as f64 / n_truth as f64)
}

/// Random crops of one page, for every width/height fraction and repeat.
///
/// Crops are placed uniformly among positions that keep them on the page.
pub fn crop_samples_for_page(
    page_index: usize,
    page: &SyntheticPage,
    width_fracs: &[f64],
    height_fracs: &[f64],
    repeats: usize,
    seed: u64,
    opts: &InferenceOptions,
) -> Result<Vec<CropSample>> {
    for f in width_fracs.iter().chain(height_fracs) {
        if !(*f > 0.0 && *f <= 1.0) {
            return Err(Error::InvalidParameter(format!("crop fraction {f} outside (0, 1]")));
        }
    }
    let truth: Vec<Point> = page.oracle.iter().map(|t| t.position).collect();
    let inferred = inferred_positions(page, opts)?;
    let (pw, ph) = (page.layout.width, page.layout.height);
    let mut out = Vec::with_capacity(width_fracs.len() * height_fracs.len() * repeats);
    for (wi, &wf) in width_fracs.iter().enumerate() {
        for (hi, &hf) in height_fracs.iter().enumerate() {
            for r in 0..repeats {
                let mut rng = rng_for(derive_seed(seed, &[page_index as u64, wi as u64, hi as u64, r as u64]));
                let (cw, ch) = (wf * pw, hf * ph);
                let x0 = rng.random::<f64>() * (pw - cw);
                let y0 = rng.random::<f64>() * (ph - ch);
                let crop = Rect {
                    x0,
                    y0,
                    x1: x0 + cw,
                    y1: y0 + ch,
                };
                let mut errors = [None; 3];
                let mut truth_count = 0;
                for (k, inf) in inferred.iter().enumerate() {
                    errors[k] = membership_error(&truth, inf, &crop);
                }
                if errors[0].is_some() {
                    truth_count = truth.iter().filter(|p| crop.contains(**p)).count();
                }
                out.push(CropSample {
                    page: page_index,
                    columns: page.columns,
                    alignment: page.alignment,
                    width_frac: wf,
                    height_frac: hf,
                    repeat: r,
                    crop,
                    truth_count,
                    errors,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GranularitySummary {
    pub granularity: Granularity,
    pub width_frac: f64,
    pub height_frac: f64,
    pub mean: f64,
    pub median: f64,
    pub samples: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GranularityReport {
    pub samples: Vec<CropSample>,
    pub summary: Vec<GranularitySummary>,
}

impl GranularityReport {
    pub fn summary_for(&self, g: Granularity, width_frac: f64, height_frac: f64) -> Option<&GranularitySummary> {
        self.summary
            .iter()
            .find(|s| s.granularity == g && s.width_frac == width_frac && s.height_frac == height_frac)
    }
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Groups samples by granularity and crop size.
pub fn summarize_crops(samples: Vec<CropSample>, width_fracs: &[f64], height_fracs: &[f64]) -> GranularityReport {
    let mut summary = Vec::new();
    for (k, g) in EXPERIMENT_GRANULARITIES.iter().enumerate() {
        for &wf in width_fracs {
            for &hf in height_fracs {
                let cell: Vec<&CropSample> = samples
                    .iter()
                    .filter(|s| s.width_frac == wf && s.height_frac == hf)
                    .collect();
                let errs: Vec<f64> = cell.iter().filter_map(|s| s.errors[k]).collect();
                summary.push(GranularitySummary {
                    granularity: *g,
                    width_frac: wf,
                    height_frac: hf,
                    mean: mean(&errs),
                    median: median(&errs),
                    samples: errs.len(),
                    skipped: cell.len() - errs.len(),
                });
            }
        }
    }
    GranularityReport { samples, summary }
}

/// Random-crop comparison of oracle against inferred glyph membership.
pub fn run_granularity_experiment(
    pages: &[SyntheticPage],
    width_fracs: &[f64],
    height_fracs: &[f64],
    repeats: usize,
    seed: u64,
    opts: &InferenceOptions,
) -> Result<GranularityReport> {
    let mut samples = Vec::new();
    for (i, page) in pages.iter().enumerate() {
        samples.extend(crop_samples_for_page(i, page, width_fracs, height_fracs, repeats, seed, opts)?);
    }
    Ok(summarize_crops(samples, width_fracs, height_fracs))
}

/// Character-level OCR noise.
///
/// Every character is deleted with `deletion_rate`; a surviving character
/// with a substitution row is replaced according to it (the remainder of the
/// row is the keep probability). Each of the `n + 1` gaps independently
/// receives a random letter from `insertion_alphabet` with `insertion_rate`
/// and a symbol from `noise_symbols` with `symbol_noise_rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionModel {
    pub substitution: BTreeMap<char, Vec<(char, f64)>>,
    pub insertion_rate: f64,
    pub deletion_rate: f64,
    pub symbol_noise_rate: f64,
    pub insertion_alphabet: Vec<char>,
    pub noise_symbols: Vec<char>,
}

impl Default for ConfusionModel {
    fn default() -> Self {
        Self::identity()
    }
}

impl ConfusionModel {
    pub fn identity() -> Self {
        Self {
            substitution: BTreeMap::new(),
            insertion_rate: 0.0,
            deletion_rate: 0.0,
            symbol_noise_rate: 0.0,
            insertion_alphabet: latin_alphabet(),
            noise_symbols: vec!['$', '#', '%', '|', '~', '^', '§'],
        }
    }

    /// Every letter of `alphabet` turns into one of the others, uniformly,
    /// with total probability `substitution_rate`.
    pub fn uniform(alphabet: &[char], substitution_rate: f64, deletion_rate: f64, insertion_rate: f64, symbol_noise_rate: f64) -> Self {
        let mut substitution = BTreeMap::new();
        if alphabet.len() > 1 && substitution_rate > 0.0 {
            let each = substitution_rate / (alphabet.len() - 1) as f64;
            for &c in alphabet {
                substitution.insert(c, alphabet.iter().filter(|&&d| d != c).map(|&d| (d, each)).collect());
            }
        }
        Self {
            substitution,
            insertion_rate,
            deletion_rate,
            symbol_noise_rate,
            insertion_alphabet: alphabet.to_vec(),
            ..Self::identity()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("insertion_rate", self.insertion_rate),
            ("deletion_rate", self.deletion_rate),
            ("symbol_noise_rate", self.symbol_noise_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name}={v} outside [0, 1]")));
            }
        }
        for (c, row) in &self.substitution {
            let total: f64 = row.iter().map(|(_, p)| *p).sum();
            if row.iter().any(|(_, p)| p.is_nan() || *p < 0.0) || total > 1.0 + 1e-12 {
                return Err(Error::InvalidParameter(format!("substitution row for {c:?} is not a sub-distribution")));
            }
        }
        if self.insertion_rate > 0.0 && self.insertion_alphabet.is_empty() {
            return Err(Error::InvalidParameter("insertion alphabet is empty".into()));
        }
        if self.symbol_noise_rate > 0.0 && self.noise_symbols.is_empty() {
            return Err(Error::InvalidParameter("noise symbol set is empty".into()));
        }
        Ok(())
    }

    /// Expected edit operations per non-space character of `text`.
    pub fn expected_error_rate(&self, text: &str) -> f64 {
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        if chars.is_empty() {
            return 0.0;
        }
        let per_char: f64 = chars
            .iter()
            .map(|c| {
                let sub: f64 = self.substitution.get(c).map(|r| r.iter().map(|(_, p)| p).sum()).unwrap_or(0.0);
                self.deletion_rate + (1.0 - self.deletion_rate) * sub
            })
            .sum::<f64>()
            / chars.len() as f64;
        per_char + self.insertion_rate + self.symbol_noise_rate
    }
}

/// Applies `model` to `text`; deterministic for a seed.
pub fn corrupt_ocr(text: &str, model: &ConfusionModel, seed: u64) -> String {
    let mut rng = rng_for(seed);
    let mut out = String::with_capacity(text.len());
    let gap = |rng: &mut ChaCha8Rng, out: &mut String| {
        if model.insertion_rate > 0.0 && rng.random::<f64>() < model.insertion_rate {
            out.push(model.insertion_alphabet[rng.random_range(0..model.insertion_alphabet.len())]);
        }
        if model.symbol_noise_rate > 0.0 && rng.random::<f64>() < model.symbol_noise_rate {
            out.push(model.noise_symbols[rng.random_range(0..model.noise_symbols.len())]);
        }
    };
    for c in text.chars() {
        gap(&mut rng, &mut out);
        if model.deletion_rate > 0.0 && rng.random::<f64>() < model.deletion_rate {
            continue;
        }
        match model.substitution.get(&c) {
            Some(row) if !row.is_empty() => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut replaced = c;
                for &(d, p) in row {
                    acc += p;
                    if u < acc {
                        replaced = d;
                        break;
                    }
                }
                out.push(replaced);
            }
            _ => out.push(c),
        }
    }
    gap(&mut rng, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbKind {
    /// Each region is dropped with probability `p`.
    DropRegions { p: f64 },
    /// Regions are merged into one box per horizontal band of the page, so
    /// predictions run across columns.
    MergeColumns { bands: usize },
    /// Box edges (polygon vertices) move by N(0, sigma).
    Jitter { sigma: f64 },
    /// One prediction covering the whole page.
    DegenerateFullPage,
    /// Each region shrinks to a random sub-box keeping between `min_keep`
    /// and all of its width and height.
    CropRandom { min_keep: f64 },
}

impl PerturbKind {
    /// Structural failures whose dominant error is parsing by definition.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, PerturbKind::DegenerateFullPage | PerturbKind::MergeColumns { .. })
    }

    pub fn label(&self) -> String {
        match self {
            PerturbKind::DropRegions { p } => format!("drop({p})"),
            PerturbKind::MergeColumns { bands } => format!("merge({bands})"),
            PerturbKind::Jitter { sigma } => format!("jitter({sigma})"),
            PerturbKind::DegenerateFullPage => "full-page".to_string(),
            PerturbKind::CropRandom { min_keep } => format!("crop({min_keep})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParsePerturbation {
    pub kind: PerturbKind,
    pub seed: u64,
}

impl ParsePerturbation {
    pub fn new(kind: PerturbKind) -> Self {
        Self { kind, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            PerturbKind::DropRegions { p } => (0.0..=1.0).contains(&p),
            PerturbKind::MergeColumns { bands } => bands >= 1,
            PerturbKind::Jitter { sigma } => sigma >= 0.0 && sigma.is_finite(),
            PerturbKind::DegenerateFullPage => true,
            PerturbKind::CropRandom { min_keep } => min_keep > 0.0 && min_keep <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid perturbation {:?}", self.kind)))
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

fn pred(id: usize, geometry: RegionGeometry, source: &Region) -> Region {
    Region {
        id: format!("pred{id}"),
        geometry,
        text: String::new(),
        granularity: source.granularity,
        semantic_class: None,
        order_hint: source.order_hint,
    }
}

/// Simulated layout-analysis output derived from ground-truth `regions`.
pub fn perturb_parsing(regions: &[Region], p: &ParsePerturbation, page_width: f64, page_height: f64) -> Result<Vec<Region>> {
    p.validate()?;
    let mut rng = rng_for(p.seed);
    let out = match p.kind {
        PerturbKind::DropRegions { p } => regions
            .iter()
            .filter(|_| rng.random::<f64>() >= p)
            .enumerate()
            .map(|(i, r)| pred(i, r.geometry.clone(), r))
            .collect(),
        PerturbKind::Jitter { sigma } => regions
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if sigma == 0.0 {
                    return pred(i, r.geometry.clone(), r);
                }
                let geometry = match &r.geometry {
                    RegionGeometry::Box { x0, y0, x1, y1 } => {
                        let mut e = [*x0, *y0, *x1, *y1];
                        for v in &mut e {
                            *v += sigma * gaussian(&mut rng);
                        }
                        let (x0, x1) = (e[0].min(e[2]), e[0].max(e[2]));
                        let (y0, y1) = (e[1].min(e[3]), e[1].max(e[3]));
                        RegionGeometry::rect(x0, y0, x1.max(x0 + 1e-6), y1.max(y0 + 1e-6))
                    }
                    RegionGeometry::Polygon { vertices } => {
                        let (dx, dy) = (sigma * gaussian(&mut rng), sigma * gaussian(&mut rng));
                        RegionGeometry::polygon(vertices.iter().map(|v| Point::new(v.x + dx, v.y + dy)).collect())
                    }
                };
                pred(i, geometry, r)
            })
            .collect(),
        PerturbKind::DegenerateFullPage => match regions.first() {
            None => Vec::new(),
            Some(first) => {
                let mut r = pred(0, RegionGeometry::rect(0.0, 0.0, page_width, page_height), first);
                r.id = "full-page".to_string();
                r.granularity = Granularity::Page;
                r.order_hint = None;
                alloc::vec![r]
            }
        },
        PerturbKind::MergeColumns { bands } => {
            let mut out = Vec::new();
            let h = page_height / bands as f64;
            for b in 0..bands {
                let (ya, yb) = (b as f64 * h, (b + 1) as f64 * h);
                let mut acc: Option<Rect> = None;
                for r in regions {
                    let rb = r.geometry.bounds();
                    if rb.y1 <= ya || rb.y0 >= yb {
                        continue;
                    }
                    let clipped = Rect {
                        x0: rb.x0,
                        y0: rb.y0.max(ya),
                        x1: rb.x1,
                        y1: rb.y1.min(yb),
                    };
                    acc = Some(match acc {
                        None => clipped,
                        Some(a) => Rect {
                            x0: a.x0.min(clipped.x0),
                            y0: a.y0.min(clipped.y0),
                            x1: a.x1.max(clipped.x1),
                            y1: a.y1.max(clipped.y1),
                        },
                    });
                }
                if let (Some(a), Some(first)) = (acc, regions.first()) {
                    let mut r = pred(out.len(), RegionGeometry::rect(a.x0, a.y0, a.x1, a.y1), first);
                    r.order_hint = None;
                    out.push(r);
                }
            }
            out
        }
        PerturbKind::CropRandom { min_keep } => regions
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let b = r.geometry.bounds();
                let kw = min_keep + (1.0 - min_keep) * rng.random::<f64>();
                let kh = min_keep + (1.0 - min_keep) * rng.random::<f64>();
                let (w, h) = (b.width() * kw, b.height() * kh);
                let x0 = b.x0 + (b.width() - w) * rng.random::<f64>();
                let y0 = b.y0 + (b.height() - h) * rng.random::<f64>();
                pred(i, RegionGeometry::rect(x0, y0, x0 + w, y0 + h), r)
            })
            .collect(),
    };
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub n_pages: usize,
    pub layout: LayoutSpec,
    pub parse_grid: Vec<ParsePerturbation>,
    pub ocr_grid: Vec<ConfusionModel>,
    pub seed: u64,
    pub policy: NormalizationPolicy,
    pub inference: InferenceOptions,
}

impl PipelineConfig {
    /// A mixed grid: jitter, three drop rates, random crops and a full-page
    /// prediction against four OCR noise levels.
    pub fn desk_scale(n_pages: usize, seed: u64) -> Self {
        let kinds = [
            PerturbKind::Jitter { sigma: 0.3 },
            PerturbKind::DropRegions { p: 0.08 },
            PerturbKind::DropRegions { p: 0.2 },
            PerturbKind::DropRegions { p: 0.4 },
            PerturbKind::CropRandom { min_keep: 0.7 },
            PerturbKind::DegenerateFullPage,
        ];
        let alphabet = latin_alphabet();
        let levels = [(0.01, 0.005, 0.003, 0.002), (0.04, 0.01, 0.005, 0.005), (0.12, 0.03, 0.01, 0.01), (0.3, 0.06, 0.02, 0.02)];
        Self {
            n_pages,
            layout: LayoutSpec::default(),
            parse_grid: kinds.iter().map(|k| ParsePerturbation::new(*k)).collect(),
            ocr_grid: levels
                .iter()
                .map(|&(s, d, i, n)| ConfusionModel::uniform(&alphabet, s, d, i, n))
                .collect(),
            seed,
            policy: NormalizationPolicy::default(),
            inference: InferenceOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.parse_grid.is_empty() || self.ocr_grid.is_empty() {
            return Err(Error::InvalidParameter("parse and OCR grids must be non-empty".into()));
        }
        for p in &self.parse_grid {
            p.validate()?;
        }
        for m in &self.ocr_grid {
            m.validate()?;
        }
        Ok(())
    }
}

/// One (page, parse perturbation, OCR model) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineCell {
    pub page: usize,
    pub parse: usize,
    pub ocr: usize,
    pub parse_label: String,
    pub degenerate: bool,
    /// SpACER of the parse alone, measured with oracle glyph positions.
    pub parse_magnitude: f64,
    /// SpACER of the injected OCR noise on the ground-truth regions.
    pub ocr_magnitude: f64,
    /// Dominant source known by construction.
    pub label: Dominant,
    pub vectors: VectorSet,
    pub cote: CoteComponents,
}

fn oracle_text(page: &SyntheticPage, ids: &[usize]) -> String {
    let mut s = String::new();
    let mut last_word: Option<&str> = None;
    for &id in ids {
        let t = &page.oracle[id];
        if last_word.is_some_and(|w| w != t.source_region) {
            s.push(' ');
        }
        s.push_str(&t.token);
        last_word = Some(&t.source_region);
    }
    s
}

fn layout_text(regions: &[Region]) -> String {
    regions.iter().map(|r| r.text.as_str()).collect::<Vec<_>>().join(" ")
}

/// Evaluates one corpus cell.
///
/// Predictions come from perturbing the paragraph regions. `S*` is OCR noise
/// applied to each paragraph's text, `S` the same noise applied to the glyphs
/// whose oracle positions fall in each prediction. `R` is built the way a
/// user would, by mono-spaced inference from word boxes. The label compares
/// the parse error measured with oracle positions to the OCR error on the
/// ground-truth regions; degenerate parses are labelled parsing.
pub fn simulate_cell(page: &SyntheticPage, page_index: usize, parse_index: usize, ocr_index: usize, config: &PipelineConfig) -> Result<PipelineCell> {
    let paragraphs = page.paragraphs();
    let mut perturbation = config.parse_grid[parse_index];
    perturbation.seed = derive_seed(config.seed, &[1, page_index as u64, parse_index as u64]);
    let preds = perturb_parsing(&paragraphs, &perturbation, page.layout.width, page.layout.height)?;
    let model = &config.ocr_grid[ocr_index];

    let mut ocr_on_gt = OcrMap::new();
    for (k, p) in paragraphs.iter().enumerate() {
        let s = derive_seed(config.seed, &[2, page_index as u64, ocr_index as u64, k as u64]);
        ocr_on_gt.insert(p.id.clone(), corrupt_ocr(&p.text, model, s));
    }

    let table = assign_characters(&page.oracle, &preds, CountUnit::Character);
    let mut ocr_on_pred = OcrMap::new();
    for (j, p) in preds.iter().enumerate() {
        let ids: Vec<usize> = table
            .hits
            .iter()
            .enumerate()
            .filter(|(_, h)| h.contains(&p.id))
            .map(|(i, _)| page.oracle[i].sequence_index)
            .collect();
        let truth = oracle_text(page, &ids);
        let s = derive_seed(config.seed, &[3, page_index as u64, parse_index as u64, ocr_index as u64, j as u64]);
        ocr_on_pred.insert(p.id.clone(), corrupt_ocr(&truth, model, s));
    }

    let mut layout = page.layout.clone();
    layout.pred_regions = Some(preds.clone());
    let opts = BuildOptions {
        policy: config.policy,
        unit: CountUnit::Character,
        inference: config.inference,
        granularity: Some(Granularity::Word),
    };
    let vectors = build_vectors(&layout, Some(&ocr_on_gt), Some(&ocr_on_pred), &opts)?;

    // Oracle glyphs carry no spaces, so compare against a space-free Q.
    let q_glyphs = char_vector(&layout_text(&paragraphs), CountUnit::Character, false);
    let parse_magnitude = spacer_macro(&q_glyphs, &table.aggregate)?;
    let ocr_magnitude = spacer_macro(&vectors.q, vectors.s_star.as_ref().expect("S* is built"))?;
    let degenerate = perturbation.kind.is_degenerate();
    let label = if degenerate || parse_magnitude > ocr_magnitude {
        Dominant::Parsing
    } else {
        Dominant::Ocr
    };
    let cote = cote_approx(&paragraphs, &preds, page.layout.area())?;

    Ok(PipelineCell {
        page: page_index,
        parse: parse_index,
        ocr: ocr_index,
        parse_label: perturbation.kind.label(),
        degenerate,
        parse_magnitude,
        ocr_magnitude,
        label,
        vectors,
        cote,
    })
}

impl PipelineConfig {
    /// Seed from which the corpus pages are generated.
    pub fn page_seed(&self) -> u64 {
        derive_seed(self.seed, &[0])
    }
}

/// Pages generated from `config.layout`, as used by the corpus.
pub fn pipeline_pages(config: &PipelineConfig) -> Result<Vec<SyntheticPage>> {
    generate_pages(&config.layout, config.n_pages, config.page_seed())
}

/// Every (page, parse, OCR) cell, in page-major order.
pub fn simulate_pipeline_corpus(config: &PipelineConfig) -> Result<Vec<PipelineCell>> {
    config.validate()?;
    let pages = pipeline_pages(config)?;
    let mut cells = Vec::new();
    for (pi, page) in pages.iter().enumerate() {
        for parse in 0..config.parse_grid.len() {
            for ocr in 0..config.ocr_grid.len() {
                cells.push(simulate_cell(page, pi, parse, ocr, config)?);
            }
        }
    }
    Ok(cells)
}

/// F1 of predicted against true labels, with `positive` as the positive class.
pub fn classification_f1(pairs: impl IntoIterator<Item = (Dominant, Dominant)>, positive: Dominant) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (predicted, truth) in pairs {
        match (predicted == positive, truth == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}
