//! Shared bin registry used by both packers.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{BinContents, PlacedItem};

/// Which packer group a bin belongs to. Large-item groups can change when a
/// bin waiting for a partner gets one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "group", rename_all = "kebab-case")]
pub enum BinGroup {
    Small { class: u32 },
    Mono { blue: usize },
    IndBlue { blue: usize },
    IndRed { red: usize },
    Bi { blue: usize, red: usize },
}

impl fmt::Display for BinGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinGroup::Small { class } => write!(f, "small({class})"),
            BinGroup::Mono { blue } => write!(f, "({blue})"),
            BinGroup::IndBlue { blue } => write!(f, "({blue},?)"),
            BinGroup::IndRed { red } => write!(f, "(?,{red})"),
            BinGroup::Bi { blue, red } => write!(f, "({blue},{red})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinRecord {
    pub bin_id: usize,
    pub group: BinGroup,
    pub open: bool,
    pub item_count: usize,
    pub items: Vec<PlacedItem>,
}

/// Bins in opening order; `bin_id` is the index.
#[derive(Clone, Debug, Default)]
pub struct BinStore {
    bins: Vec<BinRecord>,
    drop_items: bool,
}

impl BinStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// A store that counts items but forgets their coordinates, for long runs.
    pub fn counting_only() -> Self {
        Self { bins: Vec::new(), drop_items: true }
    }

    pub fn keeps_items(&self) -> bool {
        !self.drop_items
    }

    pub fn open(&mut self, group: BinGroup) -> usize {
        let bin_id = self.bins.len();
        self.bins.push(BinRecord { bin_id, group, open: true, item_count: 0, items: Vec::new() });
        bin_id
    }

    pub fn place(&mut self, bin_id: usize, item: PlacedItem) {
        let bin = &mut self.bins[bin_id];
        bin.item_count += 1;
        if !self.drop_items {
            bin.items.push(item);
        }
    }

    pub fn close(&mut self, bin_id: usize) {
        self.bins[bin_id].open = false;
    }

    pub fn regroup(&mut self, bin_id: usize, group: BinGroup) {
        self.bins[bin_id].group = group;
    }

    pub fn get(&self, bin_id: usize) -> &BinRecord {
        &self.bins[bin_id]
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BinRecord> {
        self.bins.iter()
    }

    pub fn contents(&self, bin_id: usize) -> BinContents {
        let bin = &self.bins[bin_id];
        BinContents { bin_id, items: bin.items.clone() }
    }

    pub fn into_records(self) -> Vec<BinRecord> {
        self.bins
    }
}
