//! Text normalization and the count vectors every metric consumes.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use core::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnicodeForm {
    /// Canonical composition (NFC).
    ComposedCanonical,
    None,
}

/// How raw text is cleaned before counting.
///
/// The default lowercases, unifies typographic punctuation, collapses
/// whitespace, composes to NFC and leaves spaces out of character vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationPolicy {
    pub lowercase: bool,
    pub unify_punctuation: bool,
    pub collapse_whitespace: bool,
    pub unicode_form: UnicodeForm,
    pub count_spaces: bool,
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        Self {
            lowercase: true,
            unify_punctuation: true,
            collapse_whitespace: true,
            unicode_form: UnicodeForm::ComposedCanonical,
            count_spaces: false,
        }
    }
}

impl NormalizationPolicy {
    /// Leaves text untouched and counts spaces.
    pub fn raw() -> Self {
        Self {
            lowercase: false,
            unify_punctuation: false,
            collapse_whitespace: false,
            unicode_form: UnicodeForm::None,
            count_spaces: true,
        }
    }
}

/// Typographic punctuation folded to ASCII when `unify_punctuation` is set.
pub const PUNCTUATION_TABLE: &[(char, &str)] = &[
    ('\u{2018}', "'"),   // left single quotation mark
    ('\u{2019}', "'"),   // right single quotation mark
    ('\u{201A}', "'"),   // single low-9 quotation mark
    ('\u{201B}', "'"),   // single high-reversed-9 quotation mark
    ('\u{2032}', "'"),   // prime
    ('\u{00B4}', "'"),   // acute accent
    ('\u{0060}', "'"),   // grave accent
    ('\u{201C}', "\""),  // left double quotation mark
    ('\u{201D}', "\""),  // right double quotation mark
    ('\u{201E}', "\""),  // double low-9 quotation mark
    ('\u{201F}', "\""),  // double high-reversed-9 quotation mark
    ('\u{2033}', "\""),  // double prime
    ('\u{00AB}', "\""),  // left guillemet
    ('\u{00BB}', "\""),  // right guillemet
    ('\u{2010}', "-"),   // hyphen
    ('\u{2011}', "-"),   // non-breaking hyphen
    ('\u{2012}', "-"),   // figure dash
    ('\u{2013}', "-"),   // en dash
    ('\u{2014}', "-"),   // em dash
    ('\u{2015}', "-"),   // horizontal bar
    ('\u{2212}', "-"),   // minus sign
    ('\u{00AD}', "-"),   // soft hyphen
    ('\u{2026}', "..."), // horizontal ellipsis
];

fn unify_char(c: char) -> Option<&'static str> {
    PUNCTUATION_TABLE
        .iter()
        .find(|(from, _)| *from == c)
        .map(|(_, to)| *to)
}

/// Applies `policy` to `raw`. Idempotent for every policy.
pub fn normalize_text(raw: &str, policy: &NormalizationPolicy) -> String {
    let mut text: String = match policy.unicode_form {
        UnicodeForm::ComposedCanonical => raw.nfc().collect(),
        UnicodeForm::None => raw.to_string(),
    };

    if policy.unify_punctuation {
        let mut out = String::with_capacity(text.len());
        for c in text.chars() {
            match unify_char(c) {
                Some(rep) => out.push_str(rep),
                None => out.push(c),
            }
        }
        text = out;
    }

    if policy.lowercase {
        let mut out = String::with_capacity(text.len());
        for c in text.chars() {
            out.extend(c.to_lowercase());
        }
        text = out;
        // lowercasing can emit combining sequences ('İ' -> "i\u{307}")
        if policy.unicode_form == UnicodeForm::ComposedCanonical {
            text = text.nfc().collect();
        }
    }

    if policy.collapse_whitespace {
        let mut out = String::with_capacity(text.len());
        for word in text.split_whitespace() {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(word);
        }
        text = out;
    }

    text
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountUnit {
    #[default]
    Character,
    Word,
}

impl CountUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            CountUnit::Character => "character",
            CountUnit::Word => "word",
        }
    }
}

/// Sparse token counts. Keys with a zero count are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CharVector {
    counts: BTreeMap<String, u64>,
    unit: CountUnit,
}

impl CharVector {
    pub fn new(unit: CountUnit) -> Self {
        Self {
            counts: BTreeMap::new(),
            unit,
        }
    }

    /// Builds a vector from explicit counts; zero counts are dropped.
    pub fn from_counts<I, K>(unit: CountUnit, counts: I) -> Self
    where
        I: IntoIterator<Item = (K, u64)>,
        K: Into<String>,
    {
        let mut v = Self::new(unit);
        for (k, n) in counts {
            v.add_count(k, n);
        }
        v
    }

    pub fn unit(&self) -> CountUnit {
        self.unit
    }

    pub fn add_count(&mut self, token: impl Into<String>, n: u64) {
        if n == 0 {
            return;
        }
        *self.counts.entry(token.into()).or_insert(0) += n;
    }

    pub fn get(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Number of distinct tokens.
    pub fn support_len(&self) -> usize {
        self.counts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.counts.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn check_unit(&self, other: &CharVector) -> Result<()> {
        if self.unit != other.unit {
            return Err(Error::UnitMismatch {
                left: self.unit.as_str(),
                right: other.unit.as_str(),
            });
        }
        Ok(())
    }
}

impl AddAssign<&CharVector> for CharVector {
    fn add_assign(&mut self, rhs: &CharVector) {
        debug_assert_eq!(self.unit, rhs.unit);
        for (k, n) in rhs.iter() {
            self.add_count(k, n);
        }
    }
}

impl Add<&CharVector> for CharVector {
    type Output = CharVector;

    fn add(mut self, rhs: &CharVector) -> CharVector {
        self += rhs;
        self
    }
}

/// Counts tokens of already-normalized `text`.
///
/// Character mode counts Unicode scalar values and skips whitespace unless
/// `count_spaces` is set. Word mode splits on whitespace.
pub fn char_vector(text: &str, unit: CountUnit, count_spaces: bool) -> CharVector {
    let mut v = CharVector::new(unit);
    match unit {
        CountUnit::Character => {
            let mut buf = [0u8; 4];
            for c in text.chars() {
                if !count_spaces && c.is_whitespace() {
                    continue;
                }
                v.add_count(&*c.encode_utf8(&mut buf), 1);
            }
        }
        CountUnit::Word => {
            for w in text.split_whitespace() {
                v.add_count(w, 1);
            }
        }
    }
    v
}

/// `sum |a[t] - b[t]|` over the union of tokens.
pub fn l1_distance(a: &CharVector, b: &CharVector) -> Result<u64> {
    a.check_unit(b)?;
    let mut total = 0u64;
    for (k, na) in a.iter() {
        total += na.abs_diff(b.get(k));
    }
    for (k, nb) in b.iter() {
        if a.get(k) == 0 {
            total += nb;
        }
    }
    Ok(total)
}

/// A normalized [`CharVector`]; probabilities are in (0, 1] and sum to 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CharDistribution {
    probs: BTreeMap<String, f64>,
    unit: CountUnit,
}

impl CharDistribution {
    /// Builds a distribution from non-negative weights, renormalizing them.
    pub fn from_weights<I, K>(unit: CountUnit, weights: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, f64)>,
        K: Into<String>,
    {
        let mut probs = BTreeMap::new();
        for (k, w) in weights {
            if w.is_nan() || w < 0.0 || !w.is_finite() {
                return Err(Error::InvalidParameter(alloc::format!(
                    "weight {w} is not a finite non-negative number"
                )));
            }
            if w > 0.0 {
                *probs.entry(k.into()).or_insert(0.0) += w;
            }
        }
        let total: f64 = probs.values().sum();
        if probs.is_empty() || total <= 0.0 {
            return Err(Error::EmptyDistribution);
        }
        for p in probs.values_mut() {
            *p /= total;
        }
        Ok(Self { probs, unit })
    }

    pub fn unit(&self) -> CountUnit {
        self.unit
    }

    pub fn get(&self, token: &str) -> f64 {
        self.probs.get(token).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.probs.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn support_len(&self) -> usize {
        self.probs.len()
    }
}

pub fn to_distribution(v: &CharVector) -> Result<CharDistribution> {
    let total = v.total();
    if total == 0 {
        return Err(Error::EmptyDistribution);
    }
    let total = total as f64;
    let probs = v
        .counts
        .iter()
        .map(|(k, n)| (k.clone(), *n as f64 / total))
        .collect();
    Ok(CharDistribution {
        probs,
        unit: v.unit,
    })
}
