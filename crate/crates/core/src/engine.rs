//! Online driver: routes each arriving item to the small or large packer and
//! keeps the statistics a run report needs.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::bins::{BinGroup, BinRecord, BinStore};
use crate::geometry::{validate_bin, Violation};
use crate::large::{red_quota, Color, LargePacker, Tally};
use crate::params::{type_of, validate, ParameterInstance};
use crate::rational::{parse_rational, render, rendered};
use crate::small::SmallPacker;
use crate::{Error, Rational, Result};

/// Sizes finer than this are rejected so that exact coordinates stay within `i128`.
pub const MAX_DENOMINATOR: i128 = 1_000_000_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Placement {
    pub item_id: usize,
    #[serde(serialize_with = "rendered::one")]
    pub size: Rational,
    pub type_index: usize,
    pub bin_id: usize,
    #[serde(serialize_with = "rendered::many")]
    pub anchor: Vec<Rational>,
    /// `None` for small items.
    pub color: Option<Color>,
    pub group: BinGroup,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GroupCount {
    pub open: usize,
    pub closed: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PackingReport {
    pub algorithm: String,
    pub version: String,
    pub params: String,
    pub d: usize,
    pub items: usize,
    pub total_bins: usize,
    pub small_bins: usize,
    pub large_bins: usize,
    pub bins_by_group: BTreeMap<String, GroupCount>,
    pub max_open_small: usize,
    pub max_open_bi_per_group: usize,
    pub arrivals: Vec<u64>,
    pub reds: Vec<u64>,
    /// Geometric violations; only checked when coordinates are retained.
    pub violations: Vec<Violation>,
    /// Broken counter or group-cardinality invariants, in order of detection.
    pub breaches: Vec<String>,
    pub geometry_checked: bool,
}

impl PackingReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.breaches.is_empty()
    }
}

const MAX_BREACHES: usize = 100;

#[derive(Clone, Debug)]
pub struct Engine {
    params: ParameterInstance,
    store: BinStore,
    small: SmallPacker,
    large: LargePacker,
    items: usize,
    max_open_small: usize,
    breaches: Vec<String>,
}

impl Engine {
    /// Engine that keeps every coordinate; refuses parameters that fail validation.
    pub fn new(params: &ParameterInstance) -> Result<Self> {
        Self::with_store(params, BinStore::new())
    }

    /// Engine that keeps bin tallies only, for runs too long to hold coordinates.
    pub fn counting_only(params: &ParameterInstance) -> Result<Self> {
        Self::with_store(params, BinStore::counting_only())
    }

    fn with_store(params: &ParameterInstance, store: BinStore) -> Result<Self> {
        let problems = validate(params);
        if !problems.is_empty() {
            let text = problems.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            return Err(Error::InvalidParams(text));
        }
        Ok(Self {
            params: params.clone(),
            store,
            small: SmallPacker::new(params.d, params.m),
            large: LargePacker::new(params),
            items: 0,
            max_open_small: 0,
            breaches: Vec::new(),
        })
    }

    pub fn params(&self) -> &ParameterInstance {
        &self.params
    }

    pub fn store(&self) -> &BinStore {
        &self.store
    }

    pub fn small(&self) -> &SmallPacker {
        &self.small
    }

    pub fn large(&self) -> &LargePacker {
        &self.large
    }

    /// Packs the next item. `size` must lie in `(0, 1]`.
    pub fn push(&mut self, size: Rational) -> Result<Placement> {
        let item_id = self.items;
        check_size(item_id, &size)?;
        let type_index = type_of(&self.params, &size)?;
        let placement = if type_index == self.params.small_type() {
            let placed = self.small.assign(&mut self.store, item_id, type_index, size)?;
            self.max_open_small = self.max_open_small.max(self.small.active_bins());
            if self.small.active_bins() > self.params.m as usize {
                self.breach(format!("item {item_id}: {} active small bins", self.small.active_bins()));
            }
            Placement {
                item_id,
                size,
                type_index,
                bin_id: placed.bin_id,
                anchor: placed.anchor,
                color: None,
                group: self.store.get(placed.bin_id).group,
            }
        } else {
            let placed = self.large.assign(&mut self.store, item_id, type_index, size)?;
            let counters = self.large.counters();
            let (arrived, red) = (counters.arrived[type_index - 1], counters.red[type_index - 1]);
            if red != red_quota(self.params.alpha(type_index), arrived) {
                self.breach(format!("item {item_id}: type {type_index} has {red} reds after {arrived} arrivals"));
            }
            for (tally, count) in self.large.tally_breaches() {
                self.breach(format!("item {item_id}: {} bins in {}", count, describe(tally)));
            }
            Placement {
                item_id,
                size,
                type_index,
                bin_id: placed.bin_id,
                anchor: placed.anchor,
                color: Some(placed.color),
                group: placed.group,
            }
        };
        self.items += 1;
        Ok(placement)
    }

    fn breach(&mut self, message: String) {
        log::warn!("{message}");
        if self.breaches.len() < MAX_BREACHES {
            self.breaches.push(message);
        }
    }

    pub fn report(&self) -> PackingReport {
        let mut by_group: BTreeMap<String, GroupCount> = BTreeMap::new();
        let mut small_bins = 0;
        for bin in self.store.iter() {
            if matches!(bin.group, BinGroup::Small { .. }) {
                small_bins += 1;
            }
            let entry = by_group.entry(bin.group.to_string()).or_default();
            if bin.open {
                entry.open += 1;
            } else {
                entry.closed += 1;
            }
        }
        let geometry_checked = self.store.keeps_items();
        let violations = if geometry_checked {
            (0..self.store.len()).flat_map(|id| validate_bin(&self.store.contents(id))).collect()
        } else {
            Vec::new()
        };
        let counters = self.large.counters();
        PackingReport {
            algorithm: "harmonic-hypercube".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            params: self.params.name.clone(),
            d: self.params.d,
            items: self.items,
            total_bins: self.store.len(),
            small_bins,
            large_bins: self.store.len() - small_bins,
            bins_by_group: by_group,
            max_open_small: self.max_open_small,
            max_open_bi_per_group: self.large.max_open_bi(),
            arrivals: counters.arrived.clone(),
            reds: counters.red.clone(),
            violations,
            breaches: self.breaches.clone(),
            geometry_checked,
        }
    }

    pub fn into_bins(self) -> Vec<BinRecord> {
        self.store.into_records()
    }
}

fn describe(tally: Tally) -> String {
    match tally {
        Tally::OpenMono { blue } => format!("open ({blue})"),
        Tally::PartialIndBlue { blue } => format!("partial ({blue},?)"),
        Tally::PartialIndRed { red } => format!("partial (?,{red})"),
        Tally::OpenBi { blue, red } => format!("open ({blue},{red})"),
    }
}

fn check_size(index: usize, size: &Rational) -> Result<()> {
    let reason = if *size <= Rational::zero() || *size > Rational::one() {
        format!("size {} is outside (0, 1]", render(size))
    } else if *size.denom() > MAX_DENOMINATOR {
        format!("size {} is finer than 1/{MAX_DENOMINATOR}", render(size))
    } else {
        return Ok(());
    };
    Err(Error::InvalidItem { index, reason })
}

/// Packs `sizes` in order, returning the report and every placement.
pub fn pack_sequence(params: &ParameterInstance, sizes: &[Rational]) -> Result<(PackingReport, Vec<Placement>)> {
    let mut engine = Engine::new(params)?;
    let placements = sizes.iter().map(|s| engine.push(*s)).collect::<Result<Vec<_>>>()?;
    Ok((engine.report(), placements))
}

/// `A(L) / LB`. Since `LB <= OPT`, this over-estimates the true ratio.
pub fn empirical_ratio(report: &PackingReport, opt_lower_bound: u64) -> f64 {
    report.total_bins as f64 / opt_lower_bound.max(1) as f64
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub d: Option<usize>,
    pub sizes: Vec<Rational>,
}

/// Reads a trace: an optional `dim <d>` header, then one size per line; `#` starts a comment.
pub fn parse_trace(text: &str) -> Result<Trace> {
    let mut d = None;
    let mut sizes = Vec::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse { line: number + 1, reason };
        if let Some(rest) = line.strip_prefix("dim") {
            if d.is_some() || !sizes.is_empty() {
                return Err(parse_err("`dim` must be the first entry".into()));
            }
            let value: usize = rest.trim().parse().map_err(|_| parse_err(format!("bad dimension `{}`", rest.trim())))?;
            if value < 2 {
                return Err(parse_err(format!("dimension {value} must be at least 2")));
            }
            d = Some(value);
            continue;
        }
        let size = parse_rational(line).map_err(|_| parse_err(format!("bad size `{line}`")))?;
        sizes.push(size);
    }
    Ok(Trace { d, sizes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::builtin;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn type_one_items_each_take_a_bin() {
        let (report, _) = pack_sequence(&builtin(2).unwrap(), &vec![r(95, 100); 100]).unwrap();
        assert_eq!(report.total_bins, 100);
        assert_eq!(report.bins_by_group["(1)"], GroupCount { open: 0, closed: 100 });
        assert!(report.is_clean());
        assert_eq!(empirical_ratio(&report, 100), 1.0);
    }

    #[test]
    fn four_type_five_items_share_a_bin() {
        let (report, _) = pack_sequence(&builtin(2).unwrap(), &[r(45, 100); 4]).unwrap();
        assert_eq!(report.total_bins, 1);
        assert_eq!(report.bins_by_group["(5)"], GroupCount { open: 0, closed: 1 });
    }

    #[test]
    fn large_then_thirds() {
        let sizes = [r(55, 100), r(34, 100), r(34, 100), r(34, 100)];
        let (report, placements) = pack_sequence(&builtin(2).unwrap(), &sizes).unwrap();
        assert_eq!(report.total_bins, 2);
        assert!(placements.iter().all(|p| p.color == Some(Color::Blue)));
        assert!(report.is_clean());
    }

    #[test]
    fn rejects_bad_sizes_with_position() {
        let err = pack_sequence(&builtin(2).unwrap(), &[r(1, 2), r(3, 2)]).unwrap_err();
        assert!(matches!(err, Error::InvalidItem { index: 1, .. }));
    }

    #[test]
    fn ratio_example() {
        let (mut report, _) = pack_sequence(&builtin(2).unwrap(), &[]).unwrap();
        report.total_bins = 100;
        assert_eq!(empirical_ratio(&report, 50), 2.0);
    }

    #[test]
    fn trace_parsing() {
        let t = parse_trace("# header\ndim 3\n0.5 # half\n\n1/3\n").unwrap();
        assert_eq!(t.d, Some(3));
        assert_eq!(t.sizes, vec![r(1, 2), r(1, 3)]);
        assert_eq!(parse_trace("").unwrap(), Trace { d: None, sizes: vec![] });
        assert!(matches!(parse_trace("dim 2\nfoo"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_trace("0.5\ndim 2"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn replay_is_deterministic() {
        let sizes: Vec<Rational> = (1..500).map(|k| r((k * 7919) % 1000 + 1, 1000)).collect();
        let p = builtin(3).unwrap();
        let a = pack_sequence(&p, &sizes).unwrap();
        let b = pack_sequence(&p, &sizes).unwrap();
        assert_eq!(serde_json::to_string(&a.0).unwrap(), serde_json::to_string(&b.0).unwrap());
        assert_eq!(a.1, b.1);
        assert!(a.0.is_clean());
    }
}
