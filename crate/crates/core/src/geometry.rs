//! Region geometry, mono-spaced character placement and character-to-region
//! assignment.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::charvec::{CharVector, CountUnit};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned bounding rectangle, inclusive on all sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RegionGeometry {
    Box { x0: f64, y0: f64, x1: f64, y1: f64 },
    Polygon { vertices: Vec<Point> },
}

impl RegionGeometry {
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        RegionGeometry::Box { x0, y0, x1, y1 }
    }

    pub fn polygon(vertices: Vec<Point>) -> Self {
        RegionGeometry::Polygon { vertices }
    }

    pub fn bounds(&self) -> Rect {
        match self {
            RegionGeometry::Box { x0, y0, x1, y1 } => Rect {
                x0: *x0,
                y0: *y0,
                x1: *x1,
                y1: *y1,
            },
            RegionGeometry::Polygon { vertices } => {
                let mut r = Rect {
                    x0: f64::INFINITY,
                    y0: f64::INFINITY,
                    x1: f64::NEG_INFINITY,
                    y1: f64::NEG_INFINITY,
                };
                for v in vertices {
                    r.x0 = r.x0.min(v.x);
                    r.y0 = r.y0.min(v.y);
                    r.x1 = r.x1.max(v.x);
                    r.y1 = r.y1.max(v.y);
                }
                r
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            RegionGeometry::Box { .. } => self.bounds().area(),
            RegionGeometry::Polygon { vertices } => signed_area(vertices).abs(),
        }
    }

    /// Vertex ring; boxes are returned counter-clockwise (y up).
    pub fn ring(&self) -> Vec<Point> {
        match self {
            RegionGeometry::Box { x0, y0, x1, y1 } => alloc::vec![
                Point::new(*x0, *y0),
                Point::new(*x1, *y0),
                Point::new(*x1, *y1),
                Point::new(*x0, *y1),
            ],
            RegionGeometry::Polygon { vertices } => vertices.clone(),
        }
    }

    /// Checks finiteness, box ordering, vertex count and polygon simplicity.
    pub fn validate(&self) -> core::result::Result<(), String> {
        match self {
            RegionGeometry::Box { x0, y0, x1, y1 } => {
                if ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
                    return Err("non-finite box coordinate".to_string());
                }
                if !(x0 < x1 && y0 < y1) {
                    return Err(format!("box needs x0<x1 and y0<y1, got ({x0},{y0},{x1},{y1})"));
                }
                Ok(())
            }
            RegionGeometry::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(format!("polygon needs at least 3 vertices, got {}", vertices.len()));
                }
                if !vertices.iter().all(|v| v.x.is_finite() && v.y.is_finite()) {
                    return Err("non-finite polygon vertex".to_string());
                }
                if signed_area(vertices) == 0.0 {
                    return Err("polygon has zero area".to_string());
                }
                if !is_simple(vertices) {
                    return Err("polygon is self-intersecting".to_string());
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Word,
    Line,
    Paragraph,
    Page,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Word => "word",
            Granularity::Line => "line",
            Granularity::Paragraph => "paragraph",
            Granularity::Page => "page",
        }
    }
}

/// Reading-order position supplied with the data; never inferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrderHint {
    pub column: i64,
    pub index: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub geometry: RegionGeometry,
    pub text: String,
    pub granularity: Granularity,
    pub semantic_class: Option<String>,
    pub order_hint: Option<OrderHint>,
}

impl Region {
    pub fn new(
        id: impl Into<String>,
        geometry: RegionGeometry,
        text: impl Into<String>,
        granularity: Granularity,
    ) -> Self {
        Self {
            id: id.into(),
            geometry,
            text: text.into(),
            granularity,
            semantic_class: None,
            order_hint: None,
        }
    }

    pub fn with_order(mut self, column: i64, index: i64) -> Self {
        self.order_hint = Some(OrderHint { column, index });
        self
    }

    pub fn with_class(mut self, class: impl Into<String>) -> Self {
        self.semantic_class = Some(class.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageLayout {
    pub page_id: String,
    pub width: f64,
    pub height: f64,
    pub gt_regions: Vec<Region>,
    pub pred_regions: Option<Vec<Region>>,
}

impl PageLayout {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Ids of regions whose bounds leave `[0,width]x[0,height]`.
    pub fn out_of_page_regions(&self) -> Vec<&str> {
        let page = Rect {
            x0: 0.0,
            y0: 0.0,
            x1: self.width,
            y1: self.height,
        };
        self.gt_regions
            .iter()
            .chain(self.pred_regions.iter().flatten())
            .filter(|r| {
                let b = r.geometry.bounds();
                !(page.contains(Point::new(b.x0, b.y0)) && page.contains(Point::new(b.x1, b.y1)))
            })
            .map(|r| r.id.as_str())
            .collect()
    }

    /// Finest granularity present among the ground-truth regions.
    pub fn finest_gt_granularity(&self) -> Option<Granularity> {
        self.gt_regions.iter().map(|r| r.granularity).min()
    }

    /// Coarsest granularity present among the ground-truth regions.
    pub fn coarsest_gt_granularity(&self) -> Option<Granularity> {
        self.gt_regions.iter().map(|r| r.granularity).max()
    }

    pub fn gt_at(&self, granularity: Granularity) -> impl Iterator<Item = &Region> + '_ {
        self.gt_regions
            .iter()
            .filter(move |r| r.granularity == granularity)
    }
}

/// One positioned token (a character, or a word after [`word_tokens`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharToken {
    pub token: String,
    pub position: Point,
    pub source_region: String,
    pub sequence_index: usize,
}

/// How many virtual lines a paragraph without explicit newlines spans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LineEstimate {
    /// Assume glyph cells `glyph_aspect` times taller than wide that tile the
    /// box: `k = sqrt(n * height / (glyph_aspect * width))`.
    FromArea { glyph_aspect: f64 },
    /// `k = round(n * ratio)`.
    CharRatio(f64),
    /// `k = round(height / line_height)`.
    LineHeight(f64),
}

impl Default for LineEstimate {
    fn default() -> Self {
        LineEstimate::FromArea { glyph_aspect: 2.0 }
    }
}

impl LineEstimate {
    fn lines(&self, n_chars: usize, width: f64, height: f64) -> usize {
        let k = match *self {
            LineEstimate::FromArea { glyph_aspect } => {
                libm::sqrt(n_chars as f64 * height / (glyph_aspect * width))
            }
            LineEstimate::CharRatio(r) => n_chars as f64 * r,
            LineEstimate::LineHeight(lh) => height / lh,
        };
        let k = if k.is_finite() { libm::round(k) } else { 1.0 };
        (k.max(1.0) as usize).min(n_chars.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InferenceOptions {
    pub paragraph_lines: LineEstimate,
}

/// Places every character of `region.text` by equal spacing.
///
/// Word and line regions put the characters (spaces included) on the vertical
/// midline of the bounding box, centers at `x0 + (i + 0.5) * w / n`.
/// Paragraph and page regions are split into virtual lines, either at
/// explicit newlines or into `k` equal chunks with `k` from
/// [`InferenceOptions::paragraph_lines`]; each virtual line is then placed the
/// same way inside its horizontal band. A newline occupies the last slot of
/// the line it ends.
///
/// Polygons are laid out in their bounding box and any character that lands
/// outside the polygon is moved to the nearest point inside it.
pub fn infer_char_positions(region: &Region, opts: &InferenceOptions) -> Result<Vec<CharToken>> {
    let chars: Vec<char> = region.text.chars().collect();
    if chars.is_empty() {
        return Ok(Vec::new());
    }
    let b = region.geometry.bounds();
    if !(b.width() > 0.0 && b.height() > 0.0) || region.geometry.area() <= 0.0 {
        return Err(Error::DegenerateGeometry(region.id.clone()));
    }

    // (start, end) char ranges of each virtual line
    let lines: Vec<(usize, usize)> = match region.granularity {
        Granularity::Word | Granularity::Line => alloc::vec![(0, chars.len())],
        Granularity::Paragraph | Granularity::Page => {
            if chars.contains(&'\n') {
                let mut out = Vec::new();
                let mut start = 0;
                for (i, c) in chars.iter().enumerate() {
                    if *c == '\n' {
                        out.push((start, i + 1));
                        start = i + 1;
                    }
                }
                if start < chars.len() {
                    out.push((start, chars.len()));
                }
                out
            } else {
                let n = chars.len();
                let k = opts.paragraph_lines.lines(n, b.width(), b.height());
                (0..k).map(|j| (j * n / k, (j + 1) * n / k)).collect()
            }
        }
    };

    let band = b.height() / lines.len() as f64;
    let mut tokens = Vec::with_capacity(chars.len());
    for (j, &(start, end)) in lines.iter().enumerate() {
        let y = b.y0 + (j as f64 + 0.5) * band;
        let n = (end - start) as f64;
        for (i, c) in chars.iter().enumerate().take(end).skip(start) {
            let x = b.x0 + ((i - start) as f64 + 0.5) * b.width() / n;
            tokens.push(CharToken {
                token: c.to_string(),
                position: Point::new(x, y),
                source_region: region.id.clone(),
                sequence_index: i,
            });
        }
    }

    if let RegionGeometry::Polygon { vertices } = &region.geometry {
        for t in &mut tokens {
            if !point_in_polygon(t.position, vertices) {
                t.position = snap_inside(t.position, vertices);
            }
        }
    }
    Ok(tokens)
}

/// Groups character tokens into whitespace-separated words, each placed at
/// the midpoint of its first and last character.
pub fn word_tokens(chars: &[CharToken]) -> Vec<CharToken> {
    let mut out = Vec::new();
    let mut current: Option<(String, Point, Point, String, usize)> = None;
    let flush = |cur: &mut Option<(String, Point, Point, String, usize)>, out: &mut Vec<CharToken>| {
        if let Some((word, first, last, region, idx)) = cur.take() {
            out.push(CharToken {
                token: word,
                position: Point::new((first.x + last.x) / 2.0, (first.y + last.y) / 2.0),
                source_region: region,
                sequence_index: idx,
            });
        }
    };
    for t in chars {
        let is_space = t.token.chars().all(char::is_whitespace);
        let same_region = current
            .as_ref()
            .is_some_and(|c| c.3 == t.source_region);
        if is_space || !same_region {
            flush(&mut current, &mut out);
        }
        if is_space {
            continue;
        }
        match &mut current {
            Some(c) => {
                c.0.push_str(&t.token);
                c.2 = t.position;
            }
            None => {
                current = Some((
                    t.token.clone(),
                    t.position,
                    t.position,
                    t.source_region.clone(),
                    t.sequence_index,
                ))
            }
        }
    }
    flush(&mut current, &mut out);
    out
}

/// Boundary-inclusive containment test.
pub fn point_in_geometry(p: Point, g: &RegionGeometry) -> bool {
    match g {
        RegionGeometry::Box { .. } => g.bounds().contains(p),
        RegionGeometry::Polygon { vertices } => point_in_polygon(p, vertices),
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    orient(a, b, p) == 0.0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

/// Even-odd ray casting with an explicit boundary check first.
pub(crate) fn point_in_polygon(p: Point, vertices: &[Point]) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[j]);
        if on_segment(p, a, b) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn closest_on_segment(p: Point, a: Point, b: Point) -> Point {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return a;
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    Point::new(a.x + t * dx, a.y + t * dy)
}

fn snap_inside(p: Point, vertices: &[Point]) -> Point {
    let n = vertices.len();
    let mut best = (f64::INFINITY, vertices[0], 0usize);
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        let q = closest_on_segment(p, a, b);
        let d = (q.x - p.x) * (q.x - p.x) + (q.y - p.y) * (q.y - p.y);
        if d < best.0 {
            best = (d, q, i);
        }
    }
    let (_, q, i) = best;
    if point_in_polygon(q, vertices) {
        return q;
    }
    // rounding put the projection just outside: step along the inward normal
    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
    let sign = if signed_area(vertices) > 0.0 { 1.0 } else { -1.0 };
    let (nx, ny) = (-(b.y - a.y) * sign, (b.x - a.x) * sign);
    let norm = libm::sqrt(nx * nx + ny * ny);
    let scale = {
        let r = RegionGeometry::Polygon {
            vertices: vertices.to_vec(),
        }
        .bounds();
        r.width().max(r.height())
    };
    let mut eps = scale * 1e-12;
    while eps < scale * 1e-3 {
        let c = Point::new(q.x + nx / norm * eps, q.y + ny / norm * eps);
        if point_in_polygon(c, vertices) {
            return c;
        }
        eps *= 10.0;
    }
    q
}

/// Which predictions contain which tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentTable {
    /// For each input token, the ids of the predictions that contain it.
    pub hits: Vec<Vec<String>>,
    /// Per-prediction vectors, in the order of the `predictions` argument.
    pub per_prediction: Vec<(String, CharVector)>,
    /// Sum of the per-prediction vectors.
    pub aggregate: CharVector,
}

/// Assigns every token to each prediction whose geometry contains it.
///
/// A token inside `k` overlapping predictions counts `k` times in the
/// aggregate; tokens outside every prediction are dropped.
pub fn assign_characters(tokens: &[CharToken], predictions: &[Region], unit: CountUnit) -> AssignmentTable {
    let bounds: Vec<Rect> = predictions.iter().map(|p| p.geometry.bounds()).collect();
    let mut per_prediction: Vec<(String, CharVector)> = predictions
        .iter()
        .map(|p| (p.id.clone(), CharVector::new(unit)))
        .collect();
    let mut hits = Vec::with_capacity(tokens.len());
    for t in tokens {
        let mut ids = Vec::new();
        for (k, pred) in predictions.iter().enumerate() {
            if bounds[k].contains(t.position) && point_in_geometry(t.position, &pred.geometry) {
                ids.push(pred.id.clone());
                per_prediction[k].1.add_count(t.token.as_str(), 1);
            }
        }
        hits.push(ids);
    }
    let mut aggregate = CharVector::new(unit);
    for (_, v) in &per_prediction {
        aggregate += v;
    }
    AssignmentTable {
        hits,
        per_prediction,
        aggregate,
    }
}

/// Shoelace area, positive for counter-clockwise rings (y up).
pub(crate) fn signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        s += a.x * b.y - b.x * a.y;
    }
    s / 2.0
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    on_segment(p1, q1, q2) || on_segment(p2, q1, q2) || on_segment(q1, p1, p2) || on_segment(q2, p1, p2)
}

fn is_simple(ring: &[Point]) -> bool {
    let n = ring.len();
    for i in 0..n {
        let (a1, a2) = (ring[i], ring[(i + 1) % n]);
        if a1 == a2 {
            return false;
        }
        for j in (i + 1)..n {
            let (b1, b2) = (ring[j], ring[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // shared vertex only; reject folding back along the same line
                let shared = if j == i + 1 { a2 } else { a1 };
                let (other_a, other_b) = if j == i + 1 { (a1, b2) } else { (a2, b1) };
                if orient(other_a, shared, other_b) == 0.0 {
                    let dot = (other_a.x - shared.x) * (other_b.x - shared.x)
                        + (other_a.y - shared.y) * (other_b.y - shared.y);
                    if dot > 0.0 {
                        return false;
                    }
                }
                continue;
            }
            if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

fn is_convex(ring: &[Point]) -> bool {
    let n = ring.len();
    let mut sign = 0.0f64;
    for i in 0..n {
        let o = orient(ring[i], ring[(i + 1) % n], ring[(i + 2) % n]);
        if o != 0.0 {
            if sign == 0.0 {
                sign = o.signum();
            } else if o.signum() != sign {
                return false;
            }
        }
    }
    true
}

fn ccw(mut ring: Vec<Point>) -> Vec<Point> {
    if signed_area(&ring) < 0.0 {
        ring.reverse();
    }
    ring
}

/// Sutherland-Hodgman clipping of `subject` by the convex counter-clockwise
/// ring `clip`.
fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % n]);
        let input = core::mem::take(&mut output);
        let m = input.len();
        for k in 0..m {
            let cur = input[k];
            let prev = input[(k + m - 1) % m];
            let cur_in = orient(a, b, cur) >= 0.0;
            let prev_in = orient(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(line_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

fn line_intersection(p: Point, q: Point, a: Point, b: Point) -> Point {
    let op = orient(a, b, p);
    let oq = orient(a, b, q);
    let t = op / (op - oq);
    Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y))
}

/// Ear-clipping triangulation of a simple counter-clockwise ring.
fn triangulate(ring: &[Point]) -> Vec<[Point; 3]> {
    let mut idx: Vec<usize> = (0..ring.len()).collect();
    let mut tris = Vec::with_capacity(ring.len().saturating_sub(2));
    let mut guard = 0;
    while idx.len() > 3 && guard < ring.len() * ring.len() {
        guard += 1;
        let m = idx.len();
        let mut clipped = false;
        for i in 0..m {
            let (ia, ib, ic) = (idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]);
            let (a, b, c) = (ring[ia], ring[ib], ring[ic]);
            let o = orient(a, b, c);
            if o < 0.0 {
                continue;
            }
            if o == 0.0 {
                // collinear vertex contributes no area
                idx.remove(i);
                clipped = true;
                break;
            }
            let blocked = idx.iter().any(|&k| {
                k != ia && k != ib && k != ic && {
                    let p = ring[k];
                    orient(a, b, p) >= 0.0 && orient(b, c, p) >= 0.0 && orient(c, a, p) >= 0.0
                }
            });
            if !blocked {
                tris.push([a, b, c]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            break;
        }
    }
    if idx.len() == 3 {
        tris.push([ring[idx[0]], ring[idx[1]], ring[idx[2]]]);
    }
    tris
}

/// Area of `a ∩ b`.
///
/// Box pairs are exact. Otherwise the convex operand (if any) clips the other
/// with Sutherland-Hodgman; two concave polygons are handled by triangulating
/// one of them and summing the clipped pieces.
pub fn intersection_area(a: &RegionGeometry, b: &RegionGeometry) -> f64 {
    if let (RegionGeometry::Box { .. }, RegionGeometry::Box { .. }) = (a, b) {
        let (ra, rb) = (a.bounds(), b.bounds());
        let w = ra.x1.min(rb.x1) - ra.x0.max(rb.x0);
        let h = ra.y1.min(rb.y1) - ra.y0.max(rb.y0);
        return if w > 0.0 && h > 0.0 { w * h } else { 0.0 };
    }
    if !a.bounds().intersects(&b.bounds()) {
        return 0.0;
    }
    let ra = ccw(a.ring());
    let rb = ccw(b.ring());
    let area = if is_convex(&rb) {
        signed_area(&clip_convex(&ra, &rb))
    } else if is_convex(&ra) {
        signed_area(&clip_convex(&rb, &ra))
    } else {
        triangulate(&rb)
            .iter()
            .map(|t| signed_area(&clip_convex(&ra, t)))
            .sum()
    };
    area.max(0.0)
}

/// Intersection over union; 0 when both areas vanish.
pub fn iou(a: &RegionGeometry, b: &RegionGeometry) -> f64 {
    let inter = intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}
