//! Exact decision procedure for packing a multiset of hypercubes into one unit bin.
//!
//! Sizes are either exact or "just above" a value (`t + ε` for an arbitrarily
//! small `ε > 0`). Coordinates are pairs `(a, b)` meaning `a/L + bε`, compared
//! lexicographically, which decides every comparison for all small enough `ε`.
//!
//! The search places items largest first. Every packing can be compacted
//! towards the origin until each coordinate is a sum of sizes of other items,
//! so coordinates are drawn from those sums. On top of that:
//! - the largest item may be reflected and the axes permuted, so its
//!   coordinates are non-decreasing and it sits in the lower half of every axis;
//! - identical items take strictly increasing positions;
//! - lattice points `j/k` strictly inside items are counted: each item covers a
//!   known minimum number of them, and interiors are disjoint.

use std::fmt;

use num_integer::Integer;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::rational::{pow, render};
use crate::{Error, Rational, Result};

/// Bits reserved for the `ε` multiplicity in the packed coordinate encoding.
const EPS_BITS: u32 = 6;
/// Largest common denominator the packed encoding accepts.
const MAX_SCALE: i128 = 1 << 40;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    /// Queries with more items are refused with [`Verdict::Cap`].
    pub max_items: usize,
    /// Search nodes before giving up with [`Verdict::Cap`].
    pub node_limit: u64,
    /// Lattice-point counting, both as an upfront test and during the search.
    pub dff_pruning: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { max_items: 30, node_limit: 20_000_000, dff_pruning: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Feasible,
    Infeasible,
    /// The query exceeded the configured limits; nothing is claimed.
    Cap,
}

/// A coordinate `base + eps·ε`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Coord {
    pub base: Rational,
    pub eps: u32,
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.eps {
            0 => write!(f, "{}", render(&self.base)),
            1 => write!(f, "{}+e", render(&self.base)),
            n => write!(f, "{}+{n}e", render(&self.base)),
        }
    }
}

impl Serialize for Coord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OracleReport {
    pub verdict: Verdict,
    pub nodes: u64,
    /// Anchors in input order when the verdict is feasible.
    pub placement: Option<Vec<Vec<Coord>>>,
}

impl OracleReport {
    fn decided(verdict: Verdict) -> Self {
        Self { verdict, nodes: 0, placement: None }
    }
}

/// Can items of exactly these sizes share one bin?
pub fn feasible(sizes: &[Rational], d: usize, cfg: &OracleConfig) -> Result<OracleReport> {
    solve(sizes, false, d, cfg)
}

/// Can items of sizes `s + ε` share one bin for some `ε > 0`?
pub fn feasible_above(sizes: &[Rational], d: usize, cfg: &OracleConfig) -> Result<OracleReport> {
    solve(sizes, true, d, cfg)
}

fn solve(sizes: &[Rational], strict: bool, d: usize, cfg: &OracleConfig) -> Result<OracleReport> {
    if d == 0 {
        return Err(Error::UnsupportedDimension(d));
    }
    for s in sizes {
        let limit_ok = if strict { *s < Rational::one() } else { *s <= Rational::one() };
        if *s < Rational::zero() || (*s == Rational::zero() && !strict) {
            return Err(Error::InvalidSize { size: render(s) });
        }
        if !limit_ok {
            return Ok(OracleReport::decided(Verdict::Infeasible));
        }
    }
    if sizes.is_empty() {
        return Ok(OracleReport { verdict: Verdict::Feasible, nodes: 0, placement: Some(Vec::new()) });
    }
    // Placed items are tracked in a 64-bit set.
    if sizes.len() > cfg.max_items.min(63) {
        return Ok(OracleReport::decided(Verdict::Cap));
    }
    let volume: Rational = sizes.iter().map(|s| pow(s, d)).sum();
    if volume > Rational::one() || (strict && volume == Rational::one()) {
        return Ok(OracleReport::decided(Verdict::Infeasible));
    }
    let scale = sizes.iter().fold(1i128, |acc, s| acc.lcm(s.denom()));
    if scale > MAX_SCALE {
        return Err(Error::Invariant(format!("common denominator {scale} is too large for the packing oracle")));
    }
    let mut search = Search::new(sizes, strict, d, scale, cfg);
    if cfg.dff_pruning && !search.static_counts_ok() {
        return Ok(OracleReport::decided(Verdict::Infeasible));
    }
    Ok(search.run())
}

/// Lattice points `j/k` (`1 <= j < k`) an item covers wherever it is placed.
fn guaranteed_points(k: i128, scaled: i128, strict: bool, scale: i128) -> i128 {
    let count = if strict {
        Integer::div_floor(&(k * scaled), &scale)
    } else {
        Integer::div_ceil(&(k * scaled), &scale) - 1
    };
    count.clamp(0, k - 1)
}

struct Grid {
    /// All lattice points of the grid.
    full: u128,
    /// `need_after[idx]`: points still required by items `idx..`.
    need_after: Vec<u32>,
    /// `slab[a][τ][p]`: points covered on axis `a` by type `τ` at position `p`.
    slab: Vec<Vec<Vec<u128>>>,
}

struct Search {
    d: usize,
    n: usize,
    scale: i128,
    strict: bool,
    /// Packed size per type (descending) and bin width.
    type_size: Vec<i64>,
    width: i64,
    /// Type of each item in placement order.
    item_type: Vec<usize>,
    /// Input index of each item in placement order.
    item_origin: Vec<usize>,
    positions: Vec<Vec<i64>>,
    grids: Vec<Grid>,
    // Search state.
    placed: Vec<Vec<usize>>,
    occupied: Vec<u128>,
    nodes: u64,
    node_limit: u64,
    capped: bool,
}

impl Search {
    fn new(sizes: &[Rational], strict: bool, d: usize, scale: i128, cfg: &OracleConfig) -> Self {
        let pack = |s: &Rational| -> i64 { (((s * scale).to_integer()) << EPS_BITS) as i64 + i64::from(strict) };
        let mut order: Vec<usize> = (0..sizes.len()).collect();
        order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
        let mut type_size: Vec<i64> = Vec::new();
        let mut type_count: Vec<usize> = Vec::new();
        let mut item_type = Vec::with_capacity(sizes.len());
        for &idx in &order {
            let v = pack(&sizes[idx]);
            if type_size.last() != Some(&v) {
                type_size.push(v);
                type_count.push(0);
            }
            *type_count.last_mut().expect("type pushed") += 1;
            item_type.push(type_size.len() - 1);
        }
        let width = (scale << EPS_BITS) as i64;
        let positions = (0..type_size.len())
            .map(|tau| {
                let mut sums = vec![0i64];
                for (sigma, (&size, &count)) in type_size.iter().zip(&type_count).enumerate() {
                    let uses = count - usize::from(sigma == tau);
                    let base = sums.clone();
                    for c in 1..=uses as i64 {
                        sums.extend(base.iter().map(|x| x + c * size).filter(|x| x + type_size[tau] <= width));
                    }
                    sums.sort_unstable();
                    sums.dedup();
                }
                sums
            })
            .collect::<Vec<_>>();
        let mut search = Self {
            d,
            n: sizes.len(),
            scale,
            strict,
            type_size,
            width,
            item_type,
            item_origin: order,
            positions,
            grids: Vec::new(),
            placed: Vec::new(),
            occupied: Vec::new(),
            nodes: 0,
            node_limit: cfg.node_limit,
            capped: false,
        };
        if cfg.dff_pruning {
            search.grids = search.build_grids();
            search.occupied = vec![0; search.grids.len()];
        }
        search
    }

    fn base_of(&self, tau: usize) -> i128 {
        i128::from(self.type_size[tau] >> EPS_BITS)
    }

    fn need(&self, tau: usize, ks: &[i128]) -> i128 {
        ks.iter().map(|&k| guaranteed_points(k, self.base_of(tau), self.strict, self.scale)).product()
    }

    /// Counting test over every grid with up to 12 steps per axis.
    fn static_counts_ok(&self) -> bool {
        let mut ks = vec![2i128; self.d];
        loop {
            let capacity: i128 = ks.iter().map(|k| k - 1).product();
            let used: i128 = self.item_type.iter().map(|&tau| self.need(tau, &ks)).sum();
            if used > capacity {
                return false;
            }
            // Non-decreasing tuples suffice: the count is symmetric in the axes.
            let mut axis = self.d;
            loop {
                if axis == 0 {
                    return true;
                }
                axis -= 1;
                if ks[axis] < 12 {
                    ks[axis] += 1;
                    let v = ks[axis];
                    ks[axis + 1..].iter_mut().for_each(|k| *k = v);
                    break;
                }
            }
        }
    }

    /// Grids that fit in 128 bits, tightest first.
    fn build_grids(&self) -> Vec<Grid> {
        let mut tuples: Vec<Vec<i128>> = vec![Vec::new()];
        for _ in 0..self.d {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    (2..=12i128).map(move |k| {
                        let mut next = t.clone();
                        next.push(k);
                        next
                    })
                })
                .filter(|t| t.iter().map(|k| k - 1).product::<i128>() <= 128)
                .collect();
        }
        let mut scored: Vec<(i128, Vec<i128>)> = tuples
            .into_iter()
            .map(|ks| {
                let capacity: i128 = ks.iter().map(|k| k - 1).product();
                let used: i128 = self.item_type.iter().map(|&tau| self.need(tau, &ks)).sum();
                (capacity - used, ks)
            })
            .filter(|(_, ks)| ks.iter().map(|k| k - 1).product::<i128>() > 1)
            .collect();
        scored.sort();
        scored.truncate(24);
        scored.into_iter().map(|(_, ks)| self.grid(ks)).collect()
    }

    fn grid(&self, ks: Vec<i128>) -> Grid {
        let d = self.d;
        // Stride of axis a in the bit index.
        let mut stride = vec![1usize; d];
        for a in (0..d.saturating_sub(1)).rev() {
            stride[a] = stride[a + 1] * (ks[a + 1] - 1) as usize;
        }
        let total: usize = ks.iter().map(|k| (k - 1) as usize).product();
        let full = if total == 128 { u128::MAX } else { (1u128 << total) - 1 };
        let bits_with = |axis: usize, lo: i128, hi: i128| -> u128 {
            (0..total)
                .filter(|&bit| {
                    let j = ((bit / stride[axis]) % (ks[axis] - 1) as usize) as i128 + 1;
                    (lo..=hi).contains(&j)
                })
                .fold(0u128, |m, bit| m | (1u128 << bit))
        };
        let slab = (0..d)
            .map(|axis| {
                let k = ks[axis];
                let ranges: Vec<Vec<u128>> = (0..=k)
                    .map(|lo| (0..=k).map(|hi| if lo <= hi { bits_with(axis, lo, hi) } else { 0 }).collect())
                    .collect();
                (0..self.type_size.len())
                    .map(|tau| {
                        self.positions[tau]
                            .iter()
                            .map(|&x| {
                                let (lo, hi) = self.covered(x, x + self.type_size[tau], k);
                                if lo > hi { 0 } else { ranges[lo as usize][hi as usize] }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mut need_after = vec![0u32; self.n + 1];
        for idx in (0..self.n).rev() {
            need_after[idx] = need_after[idx + 1] + self.need(self.item_type[idx], &ks) as u32;
        }
        Grid { full, need_after, slab }
    }

    /// Range of `j` in `1..k` with `start < j/k < end` for packed coordinates.
    fn covered(&self, start: i64, end: i64, k: i128) -> (i128, i128) {
        let (sa, ea) = (i128::from(start >> EPS_BITS), i128::from(end >> EPS_BITS));
        let eb = end & ((1 << EPS_BITS) - 1);
        let lo = Integer::div_floor(&(sa * k), &self.scale) + 1;
        let hi = if (ea * k) % self.scale == 0 && eb > 0 { ea * k / self.scale } else { Integer::div_ceil(&(ea * k), &self.scale) - 1 };
        (lo.max(1), hi.min(k - 1))
    }

    fn run(&mut self) -> OracleReport {
        let found = self.place(0);
        let verdict = if found {
            Verdict::Feasible
        } else if self.capped {
            Verdict::Cap
        } else {
            Verdict::Infeasible
        };
        let placement = found.then(|| self.placement());
        OracleReport { verdict, nodes: self.nodes, placement }
    }

    fn placement(&self) -> Vec<Vec<Coord>> {
        let mut out = vec![Vec::new(); self.n];
        for (idx, pos) in self.placed.iter().enumerate() {
            let tau = self.item_type[idx];
            out[self.item_origin[idx]] = pos
                .iter()
                .map(|&p| {
                    let x = self.positions[tau][p];
                    Coord {
                        base: Rational::new(i128::from(x >> EPS_BITS), self.scale),
                        eps: (x & ((1 << EPS_BITS) - 1)) as u32,
                    }
                })
                .collect();
        }
        out
    }

    fn place(&mut self, idx: usize) -> bool {
        if idx == self.n {
            return true;
        }
        self.nodes += 1;
        if self.nodes > self.node_limit {
            self.capped = true;
            return false;
        }
        let tau = self.item_type[idx];
        // Item 0 carries the symmetry restriction, so ordering among equals starts at item 1.
        let floor: Option<Vec<usize>> = (idx > 1 && self.item_type[idx - 1] == tau).then(|| self.placed[idx - 1].clone());
        let mut chosen = vec![0usize; self.d];
        let conflicts = (1u64 << idx) - 1;
        self.axis(idx, tau, 0, conflicts, floor.as_deref(), true, &mut chosen)
    }

    /// Chooses the coordinate on `axis`, narrowing the set of placed items that could still overlap.
    #[allow(clippy::too_many_arguments)]
    fn axis(&mut self, idx: usize, tau: usize, axis: usize, conflicts: u64, floor: Option<&[usize]>, tight: bool, chosen: &mut Vec<usize>) -> bool {
        if axis == self.d {
            if conflicts != 0 {
                return false;
            }
            return self.commit(idx, tau, chosen);
        }
        let size = self.type_size[tau];
        let start = match floor {
            Some(f) if tight => f[axis],
            _ => 0,
        };
        let count = self.positions[tau].len();
        for p in start..count {
            let x = self.positions[tau][p];
            if idx == 0 {
                // Lower half of the axis, coordinates non-decreasing across axes.
                if 2 * x + size > self.width {
                    break;
                }
                if axis > 0 && p < chosen[axis - 1] {
                    continue;
                }
            }
            let mut remaining = conflicts;
            let mut bits = conflicts;
            while bits != 0 {
                let q = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let qt = self.item_type[q];
                let qx = self.positions[qt][self.placed[q][axis]];
                if x >= qx + self.type_size[qt] || qx >= x + size {
                    remaining &= !(1u64 << q);
                }
            }
            if axis + 1 == self.d && remaining != 0 {
                continue;
            }
            chosen[axis] = p;
            let still_tight = tight && floor.is_some_and(|f| f[axis] == p);
            // Identical items must take a strictly larger position tuple.
            if axis + 1 == self.d && still_tight {
                continue;
            }
            if self.axis(idx, tau, axis + 1, remaining, floor, still_tight, chosen) {
                return true;
            }
            if self.capped {
                return false;
            }
        }
        false
    }

    fn commit(&mut self, idx: usize, tau: usize, chosen: &[usize]) -> bool {
        let mut masks = Vec::with_capacity(self.grids.len());
        for (g, grid) in self.grids.iter().enumerate() {
            let cover = (0..self.d).fold(grid.full, |m, a| m & grid.slab[a][tau][chosen[a]]);
            let occupied = self.occupied[g] | cover;
            if (grid.full & !occupied).count_ones() < grid.need_after[idx + 1] {
                return false;
            }
            masks.push(occupied);
        }
        let saved = std::mem::replace(&mut self.occupied, masks);
        self.placed.push(chosen.to_vec());
        if self.place(idx + 1) {
            return true;
        }
        self.placed.pop();
        self.occupied = saved;
        false
    }
}
