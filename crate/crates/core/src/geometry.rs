//! Placement primitives for hypercubes inside the unit bin.
//!
//! Faces may touch; only open interiors are forbidden to intersect. All
//! comparisons are exact.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Rational, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacedItem {
    pub item_id: usize,
    /// 1..=N for large types, N+1 for small items.
    pub type_index: usize,
    pub size: Rational,
    pub anchor: Vec<Rational>,
}

impl PlacedItem {
    pub fn new(item_id: usize, type_index: usize, size: Rational, anchor: Vec<Rational>) -> Self {
        Self { item_id, type_index, size, anchor }
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn contained(&self) -> bool {
        self.size > Rational::zero()
            && self
                .anchor
                .iter()
                .all(|x| *x >= Rational::zero() && x + self.size <= Rational::one())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinContents {
    pub bin_id: usize,
    pub items: Vec<PlacedItem>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    OutOfBounds { bin_id: usize, item_id: usize },
    Overlap { bin_id: usize, first: usize, second: usize },
    DimensionMismatch { bin_id: usize, item_id: usize },
}

/// True iff the open interiors of `a` and `b` intersect on every axis.
pub fn overlaps(a: &PlacedItem, b: &PlacedItem) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), actual: b.dim() });
    }
    Ok(open_overlap(a, b))
}

fn open_overlap(a: &PlacedItem, b: &PlacedItem) -> bool {
    a.anchor
        .iter()
        .zip(&b.anchor)
        .all(|(x, y)| *x < y + b.size && *y < x + a.size)
}

/// Lists every containment and overlap breach in `bin`; empty means valid.
pub fn validate_bin(bin: &BinContents) -> Vec<Violation> {
    let mut violations = Vec::new();
    let Some(first) = bin.items.first() else {
        return violations;
    };
    let d = first.dim();
    let mut usable: Vec<&PlacedItem> = Vec::with_capacity(bin.items.len());
    for item in &bin.items {
        if item.dim() != d {
            violations.push(Violation::DimensionMismatch { bin_id: bin.bin_id, item_id: item.item_id });
            continue;
        }
        if !item.contained() {
            violations.push(Violation::OutOfBounds { bin_id: bin.bin_id, item_id: item.item_id });
        }
        usable.push(item);
    }
    if d == 0 {
        return violations;
    }

    // Sweep along the first axis: only items whose axis-0 spans intersect can overlap.
    usable.sort_by(|a, b| a.anchor[0].cmp(&b.anchor[0]).then(a.item_id.cmp(&b.item_id)));
    let mut pairs = Vec::new();
    for (i, a) in usable.iter().enumerate() {
        let end = a.anchor[0] + a.size;
        for b in &usable[i + 1..] {
            if b.anchor[0] >= end {
                break;
            }
            if open_overlap(a, b) {
                let (lo, hi) = if a.item_id <= b.item_id { (a.item_id, b.item_id) } else { (b.item_id, a.item_id) };
                pairs.push((lo, hi));
            }
        }
    }
    pairs.sort_unstable();
    violations.extend(
        pairs
            .into_iter()
            .map(|(first, second)| Violation::Overlap { bin_id: bin.bin_id, first, second }),
    );
    violations
}
