//! Page file formats: the native `PageDocument` JSON and the ALTO subset.
//!
//! The JSON layout is described by `schema/page_document.schema.json`.
//! Coordinates are stored as given; `page.unit` is recorded but never used
//! for conversion since every metric is a ratio.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use cevkit_core::decompose::OcrMap;
use cevkit_core::geometry::{Granularity, OrderHint, PageLayout, Point, Region, RegionGeometry};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "1.0";
const KNOWN_VERSIONS: &[&str] = &["1.0"];

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON at `{path}`: {message}")]
    Json { path: String, message: String },
    #[error("unsupported schema_version {0:?}")]
    UnsupportedVersion(String),
    #[error("duplicate region id {0:?}")]
    DuplicateId(String),
    #[error("region {id:?}: {kind} geometry needs {expected}, got {got} numbers")]
    Arity {
        id: String,
        kind: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("region {id:?}: {reason}")]
    Geometry { id: String, reason: String },
    #[error("ground-truth region {0:?} has no text")]
    MissingText(String),
    #[error("page dimensions must be positive and finite")]
    PageSize,
    #[error("malformed XML: {0}")]
    Xml(#[from] roxmltree::Error),
    #[error("ALTO: {0}")]
    Alto(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Box,
    Polygon,
}

/// `box` is `[x0, y0, x1, y1]`; `polygon` is `[x1, y1, x2, y2, ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryRecord {
    #[serde(rename = "type")]
    pub kind: GeometryKind,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub id: String,
    pub geometry: GeometryRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub granularity: Granularity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_hint: Option<OrderHint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageInfo {
    pub id: String,
    pub width: f64,
    pub height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageDocument {
    pub schema_version: String,
    pub page: PageInfo,
    pub gt_regions: Vec<RegionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_regions: Option<Vec<RegionRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr_on_gt: Option<OcrMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr_on_pred: Option<OcrMap>,
}

/// A validated page plus its optional OCR transcriptions.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPage {
    pub layout: PageLayout,
    pub unit: Option<String>,
    pub ocr_on_gt: Option<OcrMap>,
    pub ocr_on_pred: Option<OcrMap>,
    /// Paths of fields that were ignored.
    pub ignored_fields: Vec<String>,
}

impl GeometryRecord {
    pub fn from_geometry(g: &RegionGeometry) -> Self {
        match g {
            RegionGeometry::Box { x0, y0, x1, y1 } => Self {
                kind: GeometryKind::Box,
                coords: vec![*x0, *y0, *x1, *y1],
            },
            RegionGeometry::Polygon { vertices } => Self {
                kind: GeometryKind::Polygon,
                coords: vertices.iter().flat_map(|p| [p.x, p.y]).collect(),
            },
        }
    }

    fn to_geometry(&self, id: &str) -> Result<RegionGeometry, IoError> {
        let n = self.coords.len();
        let g = match self.kind {
            GeometryKind::Box => {
                if n != 4 {
                    return Err(IoError::Arity {
                        id: id.to_string(),
                        kind: "box",
                        expected: "4",
                        got: n,
                    });
                }
                let c = &self.coords;
                RegionGeometry::rect(c[0], c[1], c[2], c[3])
            }
            GeometryKind::Polygon => {
                if n < 6 || !n.is_multiple_of(2) {
                    return Err(IoError::Arity {
                        id: id.to_string(),
                        kind: "polygon",
                        expected: "an even count of at least 6",
                        got: n,
                    });
                }
                RegionGeometry::polygon(self.coords.chunks(2).map(|c| Point::new(c[0], c[1])).collect())
            }
        };
        g.validate().map_err(|reason| IoError::Geometry {
            id: id.to_string(),
            reason,
        })?;
        Ok(g)
    }
}

impl RegionRecord {
    pub fn from_region(r: &Region, with_text: bool) -> Self {
        Self {
            id: r.id.clone(),
            geometry: GeometryRecord::from_geometry(&r.geometry),
            text: with_text.then(|| r.text.clone()),
            granularity: r.granularity,
            semantic_class: r.semantic_class.clone(),
            order_hint: r.order_hint,
        }
    }

    fn to_region(&self, require_text: bool) -> Result<Region, IoError> {
        if require_text && self.text.is_none() {
            return Err(IoError::MissingText(self.id.clone()));
        }
        Ok(Region {
            id: self.id.clone(),
            geometry: self.geometry.to_geometry(&self.id)?,
            text: self.text.clone().unwrap_or_default(),
            granularity: self.granularity,
            semantic_class: self.semantic_class.clone(),
            order_hint: self.order_hint,
        })
    }
}

fn regions(records: &[RegionRecord], require_text: bool) -> Result<Vec<Region>, IoError> {
    let mut seen = BTreeSet::new();
    records
        .iter()
        .map(|r| {
            if !seen.insert(r.id.as_str()) {
                return Err(IoError::DuplicateId(r.id.clone()));
            }
            r.to_region(require_text)
        })
        .collect()
}

impl PageDocument {
    pub fn from_layout(layout: &PageLayout, ocr_on_gt: Option<OcrMap>, ocr_on_pred: Option<OcrMap>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            page: PageInfo {
                id: layout.page_id.clone(),
                width: layout.width,
                height: layout.height,
                unit: None,
            },
            gt_regions: layout.gt_regions.iter().map(|r| RegionRecord::from_region(r, true)).collect(),
            pred_regions: layout
                .pred_regions
                .as_ref()
                .map(|p| p.iter().map(|r| RegionRecord::from_region(r, !r.text.is_empty())).collect()),
            ocr_on_gt,
            ocr_on_pred,
        }
    }

    pub fn validate(&self) -> Result<LoadedPage, IoError> {
        if !KNOWN_VERSIONS.contains(&self.schema_version.as_str()) {
            return Err(IoError::UnsupportedVersion(self.schema_version.clone()));
        }
        let (w, h) = (self.page.width, self.page.height);
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(IoError::PageSize);
        }
        Ok(LoadedPage {
            layout: PageLayout {
                page_id: self.page.id.clone(),
                width: w,
                height: h,
                gt_regions: regions(&self.gt_regions, true)?,
                pred_regions: self.pred_regions.as_deref().map(|p| regions(p, false)).transpose()?,
            },
            unit: self.page.unit.clone(),
            ocr_on_gt: self.ocr_on_gt.clone(),
            ocr_on_pred: self.ocr_on_pred.clone(),
            ignored_fields: Vec::new(),
        })
    }
}

/// Parses and validates a `PageDocument`. Unknown fields are logged and
/// listed in [`LoadedPage::ignored_fields`].
pub fn load_page_json(bytes: &[u8]) -> Result<LoadedPage, IoError> {
    let mut ignored = Vec::new();
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let mut record = |path: serde_ignored::Path<'_>| ignored.push(path.to_string());
    let tracked = serde_ignored::Deserializer::new(de, &mut record);
    let doc: PageDocument = serde_path_to_error::deserialize(tracked).map_err(|e| IoError::Json {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    for path in &ignored {
        log::warn!("page {:?}: ignoring unknown field `{path}`", doc.page.id);
    }
    let mut page = doc.validate()?;
    page.ignored_fields = ignored;
    Ok(page)
}

pub fn page_to_json(doc: &PageDocument) -> String {
    serde_json::to_string_pretty(doc).expect("page documents always serialize")
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn attr<'a>(node: roxmltree::Node<'a, '_>, name: &str) -> Option<&'a str> {
    node.attributes().find(|a| a.name() == name).map(|a| a.value())
}

fn num_attr(node: roxmltree::Node, name: &str) -> Result<Option<f64>, IoError> {
    match attr(node, name) {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse::<f64>()
            .map(Some)
            .map_err(|_| IoError::Alto(format!("<{}> {name}={v:?} is not a number", node.tag_name().name()))),
    }
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == name)
}

/// Polygon points as `"x1,y1 x2,y2 ..."` or a flat `"x1 y1 x2 y2 ..."` list.
pub fn parse_points(points: &str) -> Result<Vec<Point>, String> {
    let nums: Vec<f64> = points
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("bad coordinate {s:?}")))
        .collect::<Result<_, _>>()?;
    if nums.len() < 6 || !nums.len().is_multiple_of(2) {
        return Err(format!("polygon needs an even count of at least 6 numbers, got {}", nums.len()));
    }
    Ok(nums.chunks(2).map(|c| Point::new(c[0], c[1])).collect())
}

fn alto_geometry(node: roxmltree::Node, id: &str) -> Result<RegionGeometry, IoError> {
    let polygon = child(node, "Shape").and_then(|s| child(s, "Polygon"));
    let g = if let Some(poly) = polygon {
        let points = attr(poly, "POINTS").ok_or_else(|| IoError::Alto(format!("{id}: Polygon without POINTS")))?;
        RegionGeometry::polygon(parse_points(points).map_err(|e| IoError::Alto(format!("{id}: {e}")))?)
    } else {
        let get = |n| num_attr(node, n)?.ok_or_else(|| IoError::Alto(format!("{id}: missing {n}")));
        let (x, y, w, h) = (get("HPOS")?, get("VPOS")?, get("WIDTH")?, get("HEIGHT")?);
        RegionGeometry::rect(x, y, x + w, y + h)
    };
    g.validate().map_err(|reason| IoError::Geometry {
        id: id.to_string(),
        reason,
    })?;
    Ok(g)
}

struct AltoIds {
    seen: BTreeSet<String>,
    counters: BTreeMap<&'static str, usize>,
}

impl AltoIds {
    fn next(&mut self, node: roxmltree::Node, prefix: &'static str) -> Result<String, IoError> {
        let id = match attr(node, "ID") {
            Some(id) => id.to_string(),
            None => loop {
                let n = self.counters.entry(prefix).or_default();
                *n += 1;
                let candidate = format!("{prefix}{n}");
                if !self.seen.contains(&candidate) {
                    break candidate;
                }
            },
        };
        if !self.seen.insert(id.clone()) {
            return Err(IoError::DuplicateId(id));
        }
        Ok(id)
    }
}

fn line_text(line: roxmltree::Node) -> String {
    let mut text = String::new();
    for c in line.children().filter(|c| c.is_element()) {
        match c.tag_name().name() {
            "String" => {
                if !text.is_empty() && !text.ends_with(' ') {
                    text.push(' ');
                }
                text.push_str(attr(c, "CONTENT").unwrap_or(""));
            }
            "HYP" => text.push_str(attr(c, "CONTENT").unwrap_or("-")),
            _ => {}
        }
    }
    text
}

/// Reads the first `Page` of an ALTO document (v2 to v4, any namespace).
///
/// `TextBlock`, `TextLine` and `String` become paragraph, line and word
/// regions. A `Shape/Polygon` takes precedence over the HPOS/VPOS box.
/// Paragraph text is its lines joined by newlines; order hints number the
/// regions of each level in document order.
pub fn load_alto(bytes: &[u8]) -> Result<PageLayout, IoError> {
    let text = std::str::from_utf8(bytes).map_err(|e| IoError::Alto(format!("not UTF-8: {e}")))?;
    let doc = roxmltree::Document::parse(text)?;
    let page = doc
        .descendants()
        .find(|n| n.is_element() && n.tag_name().name() == "Page")
        .ok_or_else(|| IoError::Alto("no Page element".into()))?;
    let width = num_attr(page, "WIDTH")?.ok_or_else(|| IoError::Alto("Page has no WIDTH".into()))?;
    let height = num_attr(page, "HEIGHT")?.ok_or_else(|| IoError::Alto("Page has no HEIGHT".into()))?;
    if !(width > 0.0 && height > 0.0) {
        return Err(IoError::PageSize);
    }

    let mut ids = AltoIds {
        seen: BTreeSet::new(),
        counters: BTreeMap::new(),
    };
    let mut regions = Vec::new();
    let mut index = [0i64; 3];
    let mut push = |regions: &mut Vec<Region>, id: String, g, text: String, level: Granularity| {
        let k = match level {
            Granularity::Word => 0,
            Granularity::Line => 1,
            _ => 2,
        };
        regions.push(Region::new(id, g, text, level).with_order(0, index[k]));
        index[k] += 1;
    };

    for block in page.descendants().filter(|n| n.is_element() && n.tag_name().name() == "TextBlock") {
        let block_id = ids.next(block, "block")?;
        let block_geometry = alto_geometry(block, &block_id)?;
        let mut lines = Vec::new();
        for line in block.children().filter(|n| n.is_element() && n.tag_name().name() == "TextLine") {
            let line_id = ids.next(line, "line")?;
            let g = alto_geometry(line, &line_id)?;
            let text = line_text(line);
            for s in line.children().filter(|n| n.is_element() && n.tag_name().name() == "String") {
                let sid = ids.next(s, "string")?;
                let sg = alto_geometry(s, &sid)?;
                push(&mut regions, sid, sg, attr(s, "CONTENT").unwrap_or("").to_string(), Granularity::Word);
            }
            push(&mut regions, line_id, g, text.clone(), Granularity::Line);
            lines.push(text);
        }
        push(&mut regions, block_id, block_geometry, lines.join("\n"), Granularity::Paragraph);
    }

    Ok(PageLayout {
        page_id: attr(page, "ID").unwrap_or("page").to_string(),
        width,
        height,
        gt_regions: regions,
        pred_regions: None,
    })
}

/// Texts joined in reading order: by `(column, index)` hint, then regions
/// without a hint in input order.
pub fn reading_order_text<'a>(regions: impl IntoIterator<Item = &'a Region>, text: impl Fn(&'a Region) -> Option<&'a str>) -> String {
    let mut hinted = Vec::new();
    let mut rest = Vec::new();
    for (i, r) in regions.into_iter().enumerate() {
        match r.order_hint {
            Some(h) => hinted.push(((h.column, h.index, i), r)),
            None => rest.push(r),
        }
    }
    hinted.sort_by_key(|(k, _)| *k);
    hinted
        .into_iter()
        .map(|(_, r)| r)
        .chain(rest)
        .filter_map(text)
        .collect::<Vec<_>>()
        .join("\n")
}
