//! Bag-of-characters evaluation of page-level text extraction.
//!
//! A page's text is reduced to a *character error vector*: counts of each
//! character (or word) irrespective of order. Comparing the ground-truth
//! vector with vectors obtained through a predicted page parsing and through
//! OCR splits the total extraction error into parsing, OCR and interaction
//! components, each scored with a count-based rate ([`metrics::spacer_macro`])
//! or a distributional distance ([`metrics::cdd_jsd`]).
//!
//! The crate is `no_std` and only needs an allocator. File formats, reports
//! and the command-line front end live in the `cevkit` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod charvec;
pub mod decompose;
mod error;
pub mod geometry;
pub mod metrics;
pub mod simulate;

pub use charvec::{
    char_vector, l1_distance, normalize_text, to_distribution, CharDistribution, CharVector,
    CountUnit, NormalizationPolicy, UnicodeForm,
};
pub use decompose::{
    build_vectors, cote_approx, decompose, triage, CoteComponents, DecompositionReport, Dominant,
    Measure, TriageVerdict, VectorSet,
};
pub use error::{Error, Result};
pub use geometry::{
    assign_characters, infer_char_positions, intersection_area, point_in_geometry, CharToken,
    Granularity, OrderHint, PageLayout, Point, Region, RegionGeometry,
};
