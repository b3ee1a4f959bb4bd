//! Recursive sub-bin allocator for small items.
//!
//! A small item of side `s` belongs to class `i` in `M..2M` at level `k`, where
//! `2^k s` lands in `(1/(i+1), 1/i]`. Each class fills its own bins, which start
//! as a grid of `i^d` cells of side `1/i`; a cell is split into `2^d` children
//! whenever a deeper level needs room.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use serde::Serialize;

use crate::bins::{BinGroup, BinStore};
use crate::geometry::PlacedItem;
use crate::rational::{big_volume, render, to_big, BigRational};
use crate::{Error, Rational, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SmallClass {
    pub group: u32,
    pub level: u32,
}

/// Finds the unique `(i, k)` with `i` in `M..2M` and `2^k size` in `(1/(i+1), 1/i]`.
pub fn classify_small(m: u32, size: &Rational) -> Result<SmallClass> {
    let cap = Rational::new(1, i128::from(m));
    if *size <= Rational::zero() || *size > cap {
        return Err(Error::NotSmall { size: render(size), m });
    }
    let floor = cap / 2;
    let mut scaled = *size;
    let mut level = 0;
    while scaled <= floor {
        scaled *= 2;
        level += 1;
    }
    let group = (Rational::one() / scaled).floor().to_integer() as u32;
    Ok(SmallClass { group, level })
}

/// Cell coordinates on the level grid of pitch `1/(2^level i)`.
type Cell = Vec<u64>;

#[derive(Clone, Debug)]
struct ActiveBin {
    bin_id: usize,
    /// Empty cells per level, in lexicographic order.
    free: Vec<BTreeSet<Cell>>,
    volume: BigRational,
}

impl ActiveBin {
    fn open(bin_id: usize, group: u32, d: usize) -> Self {
        let top = (0..d).fold(vec![Vec::new()], |cells: Vec<Cell>, _| {
            cells
                .into_iter()
                .flat_map(|prefix| {
                    (0..u64::from(group)).map(move |c| {
                        let mut next = prefix.clone();
                        next.push(c);
                        next
                    })
                })
                .collect()
        });
        Self { bin_id, free: vec![top.into_iter().collect()], volume: BigRational::zero() }
    }

    fn free_at(&self, level: usize) -> usize {
        self.free.get(level).map_or(0, BTreeSet::len)
    }

    fn take(&mut self, level: usize) -> Option<Cell> {
        self.free.get_mut(level)?.pop_first()
    }
}

#[derive(Clone, Debug, Default)]
struct ClassState {
    active: Option<ActiveBin>,
    closed: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SmallPlacement {
    pub bin_id: usize,
    pub class: SmallClass,
    pub anchor: Vec<Rational>,
    pub cell_side: Rational,
    /// Bin closed to make room for this item, if any.
    pub closed_bin: Option<usize>,
}

/// Item volume of a bin at the moment it closed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosedOccupancy {
    pub bin_id: usize,
    pub group: u32,
    pub volume: BigRational,
}

#[derive(Clone, Debug)]
pub struct SmallPacker {
    d: usize,
    m: u32,
    classes: BTreeMap<u32, ClassState>,
    closed_volumes: Vec<ClosedOccupancy>,
}

impl SmallPacker {
    pub fn new(d: usize, m: u32) -> Self {
        Self { d, m, classes: BTreeMap::new(), closed_volumes: Vec::new() }
    }

    pub fn assign(&mut self, store: &mut BinStore, item_id: usize, type_index: usize, size: Rational) -> Result<SmallPlacement> {
        let class = classify_small(self.m, &size)?;
        let d = self.d;
        let k = class.level as usize;
        let state = self.classes.entry(class.group).or_default();
        let mut closed_bin = None;

        let has_room = |bin: &ActiveBin| (0..=k).any(|j| bin.free_at(j) > 0);
        if !state.active.as_ref().is_some_and(has_room) {
            if let Some(old) = state.active.take() {
                store.close(old.bin_id);
                state.closed.push(old.bin_id);
                self.closed_volumes.push(ClosedOccupancy { bin_id: old.bin_id, group: class.group, volume: old.volume });
                closed_bin = Some(old.bin_id);
            }
            let bin_id = store.open(BinGroup::Small { class: class.group });
            state.active = Some(ActiveBin::open(bin_id, class.group, d));
        }
        let bin = state.active.as_mut().expect("active bin present");

        if bin.free_at(k) == 0 {
            // Deepest level above k that still has an empty cell; split down one chain.
            let mut j = (0..k).rev().find(|&j| bin.free_at(j) > 0).expect("room checked above");
            while j < k {
                let parent = bin.take(j).expect("free cell at level j");
                if bin.free.len() <= j + 1 {
                    bin.free.resize_with(j + 2, BTreeSet::new);
                }
                let children = (0..1u32 << d).map(|bits| {
                    parent
                        .iter()
                        .enumerate()
                        .map(|(axis, c)| 2 * c + u64::from((bits >> (d - 1 - axis)) & 1))
                        .collect::<Cell>()
                });
                bin.free[j + 1].extend(children);
                j += 1;
            }
        }
        let cell = bin.take(k).expect("cell at target level");
        let pitch = Rational::new(1, (1i128 << k) * i128::from(class.group));
        let anchor: Vec<Rational> = cell.iter().map(|&c| pitch * Rational::from_integer(c as i128)).collect();
        bin.volume += big_volume(&size, d);
        let bin_id = bin.bin_id;
        store.place(bin_id, PlacedItem::new(item_id, type_index, size, anchor.clone()));
        Ok(SmallPlacement { bin_id, class, anchor, cell_side: pitch, closed_bin })
    }

    pub fn active_bins(&self) -> usize {
        self.classes.values().filter(|s| s.active.is_some()).count()
    }

    pub fn closed_bins(&self) -> usize {
        self.closed_volumes.len()
    }

    pub fn closed_occupancy(&self) -> &[ClosedOccupancy] {
        &self.closed_volumes
    }

    /// Empty cells at `level` in the active bin of class `group`.
    pub fn free_cells(&self, group: u32, level: usize) -> usize {
        self.classes
            .get(&group)
            .and_then(|s| s.active.as_ref())
            .map_or(0, |b| b.free_at(level))
    }

    /// Deepest level currently tracked in the active bin of class `group`.
    pub fn depth(&self, group: u32) -> usize {
        self.classes.get(&group).and_then(|s| s.active.as_ref()).map_or(0, |b| b.free.len())
    }

    /// Closed bins of class `group`, in closing order.
    pub fn closed_in(&self, group: u32) -> &[usize] {
        self.classes.get(&group).map_or(&[], |s| s.closed.as_slice())
    }
}

/// Occupancy every closed bin of class `group` is guaranteed: `(i^d - 1)/(i+1)^d`.
pub fn occupancy_floor(group: u32, d: usize) -> BigRational {
    let i = i128::from(group);
    let d = d as u32;
    to_big(&Rational::new(i.pow(d) - 1, (i + 1).pow(d)))
}
