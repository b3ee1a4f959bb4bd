//! Harmonic-style packer for large items with red/blue colouring.
//!
//! Blue items of type `i` fill a `β_i^d` corner grid anchored at the origin.
//! Red items of type `j` fill the boundary shell of a grid anchored at the
//! opposite corner, so a bin can hold blue items of one type and red items of
//! another whenever the red shell fits in the slack the blue grid leaves.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::One;
use serde::Serialize;

use crate::bins::{BinGroup, BinStore};
use crate::geometry::PlacedItem;
use crate::params::{derive, DerivedType, ParameterInstance};
use crate::{Error, Rational, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Blue,
}

/// Arrival counts `s_i` and red counts `e_i`, indexed by type minus one.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub arrived: Vec<u64>,
    pub red: Vec<u64>,
}

impl Counters {
    pub fn new(n: usize) -> Self {
        Self { arrived: vec![0; n], red: vec![0; n] }
    }

    /// Registers an arrival of type `i` and decides its colour, keeping
    /// `red_i = ⌊α_i arrived_i⌋`.
    pub fn color(&mut self, alpha: Rational, i: usize) -> Color {
        self.arrived[i - 1] += 1;
        if self.red[i - 1] < red_quota(alpha, self.arrived[i - 1]) {
            self.red[i - 1] += 1;
            Color::Red
        } else {
            Color::Blue
        }
    }
}

pub fn red_quota(alpha: Rational, arrived: u64) -> u64 {
    (alpha * Rational::from_integer(arrived as i128)).floor().to_integer() as u64
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct LargeBin {
    blue_type: Option<usize>,
    red_type: Option<usize>,
    blue: u64,
    red: u64,
}

/// Per-group quantities whose bounds are checked after every arrival.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Tally {
    OpenMono { blue: usize },
    PartialIndBlue { blue: usize },
    PartialIndRed { red: usize },
    OpenBi { blue: usize, red: usize },
}

impl Tally {
    fn limit(self) -> usize {
        match self {
            Tally::OpenBi { .. } => 3,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LargePlacement {
    pub bin_id: usize,
    pub color: Color,
    pub anchor: Vec<Rational>,
    pub group: BinGroup,
    /// Group the bin had before this item converted it.
    pub converted_from: Option<BinGroup>,
}

#[derive(Clone, Debug)]
pub struct LargePacker {
    params: ParameterInstance,
    derived: Vec<DerivedType>,
    /// `β_i^d` per type.
    blue_cap: Vec<u64>,
    counters: Counters,
    bins: BTreeMap<usize, LargeBin>,
    mono_open: Vec<Option<usize>>,
    ind_blue: Vec<BTreeSet<usize>>,
    ind_blue_partial: Vec<Option<usize>>,
    ind_red: Vec<BTreeSet<usize>>,
    ind_red_partial: Vec<Option<usize>>,
    bi_blue_room: Vec<BTreeSet<usize>>,
    bi_red_room: Vec<BTreeSet<usize>>,
    shell: Vec<Option<Vec<Vec<u64>>>>,
    tallies: BTreeMap<Tally, usize>,
    max_open_bi: usize,
}

impl LargePacker {
    pub fn new(params: &ParameterInstance) -> Self {
        let n = params.n();
        let derived = derive(params);
        let blue_cap = derived.iter().map(|t| t.beta.pow(params.d as u32)).collect();
        Self {
            params: params.clone(),
            derived,
            blue_cap,
            counters: Counters::new(n),
            bins: BTreeMap::new(),
            mono_open: vec![None; n],
            ind_blue: vec![BTreeSet::new(); n],
            ind_blue_partial: vec![None; n],
            ind_red: vec![BTreeSet::new(); n],
            ind_red_partial: vec![None; n],
            bi_blue_room: vec![BTreeSet::new(); n],
            bi_red_room: vec![BTreeSet::new(); n],
            shell: vec![None; n],
            tallies: BTreeMap::new(),
            max_open_bi: 0,
        }
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn derived(&self) -> &[DerivedType] {
        &self.derived
    }

    /// Largest number of simultaneously open bins seen in any single `(i, j)` group.
    pub fn max_open_bi(&self) -> usize {
        self.max_open_bi
    }

    pub fn tallies(&self) -> &BTreeMap<Tally, usize> {
        &self.tallies
    }

    /// Tallies currently above their limit; empty in a healthy run.
    pub fn tally_breaches(&self) -> Vec<(Tally, usize)> {
        self.tallies.iter().filter(|(t, c)| **c > t.limit()).map(|(t, c)| (*t, *c)).collect()
    }

    pub fn assign(&mut self, store: &mut BinStore, item_id: usize, type_index: usize, size: Rational) -> Result<LargePlacement> {
        let alpha = self.params.alpha(type_index);
        match self.counters.color(alpha, type_index) {
            Color::Red => self.place_red(store, item_id, type_index, size),
            Color::Blue => self.place_blue(store, item_id, type_index, size),
        }
    }

    fn admissible(&self, blue: usize, red: usize) -> bool {
        crate::params::admits(&self.params, &self.derived, blue, red)
    }

    fn reserve_slack(&self, blue: usize, red: usize) -> Rational {
        let g = Rational::from_integer(self.derived[red - 1].gamma as i128);
        self.params.delta_level(self.params.phi(blue)) - g * self.params.t(red)
    }

    fn place_blue(&mut self, store: &mut BinStore, item_id: usize, i: usize, size: Rational) -> Result<LargePlacement> {
        let mut converted_from = None;
        let bin_id = if self.params.phi(i) == 0 {
            match self.mono_open[i - 1] {
                Some(id) => id,
                None => {
                    let id = self.open_bin(store, LargeBin { blue_type: Some(i), red_type: None, blue: 0, red: 0 });
                    self.mono_open[i - 1] = Some(id);
                    id
                }
            }
        } else if let Some(&id) = self.bi_blue_room[i - 1].first() {
            id
        } else if let Some(id) = self.ind_blue_partial[i - 1] {
            id
        } else if let Some(id) = self.convertible_red_bin(i) {
            converted_from = Some(self.group_of(id));
            self.update(store, id, |bin| bin.blue_type = Some(i));
            id
        } else {
            self.open_bin(store, LargeBin { blue_type: Some(i), red_type: None, blue: 0, red: 0 })
        };

        let beta = self.derived[i - 1].beta;
        let slot = self.bins[&bin_id].blue;
        if slot >= self.blue_cap[i - 1] {
            return Err(Error::Invariant(format!("blue grid of bin {bin_id} is already full")));
        }
        let t = self.params.t(i);
        let anchor = digits(slot, beta, self.params.d)
            .into_iter()
            .map(|c| t * Rational::from_integer(c as i128))
            .collect::<Vec<_>>();
        self.update(store, bin_id, |bin| bin.blue += 1);
        store.place(bin_id, PlacedItem::new(item_id, i, size, anchor.clone()));
        Ok(LargePlacement { bin_id, color: Color::Blue, anchor, group: self.group_of(bin_id), converted_from })
    }

    fn place_red(&mut self, store: &mut BinStore, item_id: usize, j: usize, size: Rational) -> Result<LargePlacement> {
        let theta = self.derived[j - 1].theta;
        if theta == 0 {
            return Err(Error::Invariant(format!("type {j} was coloured red but has no red slots")));
        }
        let mut converted_from = None;
        let bin_id = if let Some(id) = self.ind_red_partial[j - 1] {
            id
        } else if let Some(&id) = self.bi_red_room[j - 1].first() {
            id
        } else if let Some(id) = self.convertible_blue_bin(j) {
            converted_from = Some(self.group_of(id));
            self.update(store, id, |bin| bin.red_type = Some(j));
            id
        } else {
            self.open_bin(store, LargeBin { blue_type: None, red_type: Some(j), blue: 0, red: 0 })
        };

        let slot = self.bins[&bin_id].red as usize;
        let cell = self.shell_cell(j, slot)?;
        let one = Rational::one();
        let t = self.params.t(j);
        let anchor = cell.iter().map(|&c| one - t * Rational::from_integer(c as i128 + 1)).collect::<Vec<_>>();
        self.update(store, bin_id, |bin| bin.red += 1);
        store.place(bin_id, PlacedItem::new(item_id, j, size, anchor.clone()));
        Ok(LargePlacement { bin_id, color: Color::Red, anchor, group: self.group_of(bin_id), converted_from })
    }

    /// Lowest-id `(?, j)` bin whose red type fits the reserve of blue type `i`.
    fn convertible_red_bin(&self, i: usize) -> Option<usize> {
        (1..=self.params.n())
            .filter(|&j| self.admissible(i, j))
            .filter_map(|j| self.ind_red[j - 1].first().copied())
            .min()
    }

    /// `(i, ?)` bin with the tightest fitting reserve for red type `j`, lowest id on ties.
    fn convertible_blue_bin(&self, j: usize) -> Option<usize> {
        (1..=self.params.n())
            .filter(|&i| self.admissible(i, j))
            .filter_map(|i| self.ind_blue[i - 1].first().map(|&id| (self.reserve_slack(i, j), id)))
            .min()
            .map(|(_, id)| id)
    }

    fn shell_cell(&mut self, j: usize, slot: usize) -> Result<Vec<u64>> {
        let d = self.params.d;
        let DerivedType { beta, gamma, .. } = self.derived[j - 1];
        let cells = self.shell[j - 1].get_or_insert_with(|| {
            (0..beta.pow(d as u32))
                .map(|n| digits(n, beta, d))
                .filter(|c| c.iter().any(|&x| x < gamma))
                .collect()
        });
        cells
            .get(slot)
            .cloned()
            .ok_or_else(|| Error::Invariant(format!("red shell of type {j} has no slot {slot}")))
    }

    fn group_of(&self, bin_id: usize) -> BinGroup {
        group(&self.bins[&bin_id], &self.params)
    }

    fn open_bin(&mut self, store: &mut BinStore, bin: LargeBin) -> usize {
        let id = store.open(group(&bin, &self.params));
        self.register(id, &bin);
        self.bins.insert(id, bin);
        id
    }

    /// Applies `change` to a bin and refreshes every registry and tally it touches.
    fn update(&mut self, store: &mut BinStore, bin_id: usize, change: impl FnOnce(&mut LargeBin)) {
        let before = self.bins[&bin_id].clone();
        self.unregister(bin_id, &before);
        let bin = self.bins.get_mut(&bin_id).expect("known bin");
        change(bin);
        let after = bin.clone();
        self.register(bin_id, &after);
        let g = group(&after, &self.params);
        store.regroup(bin_id, g);
        if !self.is_open(&after) {
            store.close(bin_id);
        }
    }

    fn is_open(&self, bin: &LargeBin) -> bool {
        match (bin.blue_type, bin.red_type) {
            (Some(i), None) if self.params.phi(i) == 0 => bin.blue < self.blue_cap[i - 1],
            (Some(i), Some(j)) => bin.blue < self.blue_cap[i - 1] || bin.red < self.derived[j - 1].theta,
            // Single-colour bins wait for a partner.
            _ => true,
        }
    }

    fn bin_tallies(&self, bin: &LargeBin) -> Option<Tally> {
        match (bin.blue_type, bin.red_type) {
            (Some(i), None) if self.params.phi(i) == 0 => {
                (bin.blue < self.blue_cap[i - 1]).then_some(Tally::OpenMono { blue: i })
            }
            (Some(i), None) => (bin.blue < self.blue_cap[i - 1]).then_some(Tally::PartialIndBlue { blue: i }),
            (None, Some(j)) => (bin.red < self.derived[j - 1].theta).then_some(Tally::PartialIndRed { red: j }),
            (Some(i), Some(j)) => self.is_open(bin).then_some(Tally::OpenBi { blue: i, red: j }),
            (None, None) => None,
        }
    }

    fn unregister(&mut self, id: usize, bin: &LargeBin) {
        if let Some(t) = self.bin_tallies(bin) {
            let count = self.tallies.get_mut(&t).expect("tally registered");
            *count -= 1;
            if *count == 0 {
                self.tallies.remove(&t);
            }
        }
        match (bin.blue_type, bin.red_type) {
            (Some(i), None) if self.params.phi(i) == 0 => {
                if self.mono_open[i - 1] == Some(id) {
                    self.mono_open[i - 1] = None;
                }
            }
            (Some(i), None) => {
                self.ind_blue[i - 1].remove(&id);
                if self.ind_blue_partial[i - 1] == Some(id) {
                    self.ind_blue_partial[i - 1] = None;
                }
            }
            (None, Some(j)) => {
                self.ind_red[j - 1].remove(&id);
                if self.ind_red_partial[j - 1] == Some(id) {
                    self.ind_red_partial[j - 1] = None;
                }
            }
            (Some(i), Some(j)) => {
                self.bi_blue_room[i - 1].remove(&id);
                self.bi_red_room[j - 1].remove(&id);
            }
            (None, None) => {}
        }
    }

    fn register(&mut self, id: usize, bin: &LargeBin) {
        if let Some(t) = self.bin_tallies(bin) {
            let count = self.tallies.entry(t).or_insert(0);
            *count += 1;
            if let Tally::OpenBi { .. } = t {
                self.max_open_bi = self.max_open_bi.max(*count);
            }
        }
        match (bin.blue_type, bin.red_type) {
            (Some(i), None) if self.params.phi(i) == 0 => {
                if bin.blue < self.blue_cap[i - 1] {
                    self.mono_open[i - 1] = Some(id);
                }
            }
            (Some(i), None) => {
                self.ind_blue[i - 1].insert(id);
                if bin.blue < self.blue_cap[i - 1] {
                    self.ind_blue_partial[i - 1] = Some(id);
                }
            }
            (None, Some(j)) => {
                self.ind_red[j - 1].insert(id);
                if bin.red < self.derived[j - 1].theta {
                    self.ind_red_partial[j - 1] = Some(id);
                }
            }
            (Some(i), Some(j)) => {
                if bin.blue < self.blue_cap[i - 1] {
                    self.bi_blue_room[i - 1].insert(id);
                }
                if bin.red < self.derived[j - 1].theta {
                    self.bi_red_room[j - 1].insert(id);
                }
            }
            (None, None) => {}
        }
    }
}

fn group(bin: &LargeBin, params: &ParameterInstance) -> BinGroup {
    match (bin.blue_type, bin.red_type) {
        (Some(blue), None) if params.phi(blue) == 0 => BinGroup::Mono { blue },
        (Some(blue), None) => BinGroup::IndBlue { blue },
        (None, Some(red)) => BinGroup::IndRed { red },
        (Some(blue), Some(red)) => BinGroup::Bi { blue, red },
        (None, None) => unreachable!("every large bin holds at least one colour"),
    }
}

/// Base-`beta` digits of `n`, most significant first, padded to `d` places.
fn digits(mut n: u64, beta: u64, d: usize) -> Vec<u64> {
    let mut out = vec![0; d];
    for slot in out.iter_mut().rev() {
        *slot = n % beta;
        n /= beta;
    }
    out
}
