//! One machine, parts by start, per-part internal-chain tables rebuilt
//! naively on every internal mutation. Queries jump part to part through the
//! global successor index.

use crate::domain::{Endpoint, Interval, IntervalId, Result, TraceOp};
use crate::engine::Engine;
use crate::index::GlobalIndex;
use crate::partition::{KeyMode, Partition, Signal};
use std::cell::Cell;
use std::collections::{BTreeMap, HashMap};

/// chain_len and chain_exit for the maximal LC-int iteration from each
/// internal interval.
pub fn compute_chains(internals: &[Interval]) -> HashMap<IntervalId, (u64, IntervalId)> {
    let mut by_start: Vec<(Endpoint, usize)> =
        internals.iter().enumerate().map(|(i, iv)| (iv.start, i)).collect();
    by_start.sort();
    let starts: Vec<Endpoint> = by_start.iter().map(|(s, _)| *s).collect();
    // suffix argmin of end over the start order
    let mut suffix_min: Vec<usize> = vec![0; by_start.len()];
    for k in (0..by_start.len()).rev() {
        let idx = by_start[k].1;
        suffix_min[k] = if k + 1 == by_start.len() {
            idx
        } else {
            let best = suffix_min[k + 1];
            if internals[idx].end < internals[best].end { idx } else { best }
        };
    }
    let lc_int = |cutoff: Endpoint| -> Option<usize> {
        let k = starts.partition_point(|s| *s < cutoff);
        if k == by_start.len() { None } else { Some(suffix_min[k]) }
    };
    let mut order: Vec<usize> = (0..internals.len()).collect();
    order.sort_by_key(|&i| internals[i].end);
    let mut table: HashMap<IntervalId, (u64, IntervalId)> = HashMap::new();
    for &i in order.iter().rev() {
        let iv = &internals[i];
        let entry = match lc_int(iv.end) {
            Some(nx) => {
                let (len, exit) = table[&internals[nx].id];
                (len + 1, exit)
            }
            None => (1, iv.id),
        };
        table.insert(iv.id, entry);
    }
    table
}

struct PartData {
    members: BTreeMap<Endpoint, IntervalId>, // by start
    chains: HashMap<IntervalId, (u64, IntervalId)>,
    dirty: bool,
}

impl PartData {
    fn new() -> Self {
        PartData { members: BTreeMap::new(), chains: HashMap::new(), dirty: true }
    }
}

pub struct SqrtEngine {
    index: GlobalIndex,
    partition: Partition,
    parts: Vec<Option<PartData>>,
    rebuilds: u64,
    ops: Cell<u64>,
}

impl SqrtEngine {
    pub fn new() -> Self {
        SqrtEngine {
            index: GlobalIndex::new(),
            partition: Partition::new_epoch(&[], 1, 2, KeyMode::ByStart),
            parts: vec![Some(PartData::new())],
            rebuilds: 0,
            ops: Cell::new(0),
        }
    }

    fn tick(&self, n: u64) {
        self.ops.set(self.ops.get() + n);
    }

    fn is_internal(&self, j: usize, iv: &Interval) -> bool {
        iv.end < self.partition.upper_of(j)
    }

    fn rebuild_part(&mut self, j: usize) {
        let upper = self.partition.upper_of(j);
        let internals: Vec<Interval> = {
            let part = self.parts[j].as_ref().unwrap();
            part.members
                .values()
                .filter_map(|id| self.index.get(*id))
                .filter(|iv| iv.end < upper)
                .copied()
                .collect()
        };
        self.tick(internals.len() as u64 * 2 + 1);
        let part = self.parts[j].as_mut().unwrap();
        part.chains = compute_chains(&internals);
        part.dirty = false;
        self.rebuilds += 1;
    }

    fn ensure_fresh(&mut self, j: usize) {
        if self.parts[j].as_ref().unwrap().dirty {
            self.rebuild_part(j);
        }
    }

    fn rebuild_epoch(&mut self) {
        let mut keys: Vec<Endpoint> = self.index.iter_live().map(|iv| iv.start).collect();
        keys.sort();
        self.tick(keys.len() as u64 + 1);
        self.partition = Partition::new_epoch(&keys, 1, 2, KeyMode::ByStart);
        self.parts = (0..self.partition.slab_len()).map(|_| Some(PartData::new())).collect();
        for iv in self.index.iter_live() {
            let j = self.partition.locate(iv.start);
            self.parts[j].as_mut().unwrap().members.insert(iv.start, iv.id);
        }
    }

    fn handle_signal(&mut self, sig: Signal) {
        match sig {
            Signal::None => {}
            Signal::EpochRebuild => self.rebuild_epoch(),
            Signal::Split(j) => {
                let size = self.partition.size_of(j) as usize;
                let median = {
                    let part = self.parts[j].as_ref().unwrap();
                    *part.members.keys().nth(size.div_ceil(2) - 1).unwrap()
                };
                // median key becomes the new separator: left part keeps keys
                // below it
                let left_members: BTreeMap<Endpoint, IntervalId>;
                let right_members: BTreeMap<Endpoint, IntervalId>;
                {
                    let part = self.parts[j].as_mut().unwrap();
                    let right: BTreeMap<_, _> = part.members.split_off(&median);
                    left_members = std::mem::take(&mut part.members);
                    right_members = right;
                }
                let new_id = self.partition.apply_split(
                    j,
                    median,
                    left_members.len() as u64,
                    right_members.len() as u64,
                );
                if new_id >= self.parts.len() {
                    self.parts.resize_with(new_id + 1, || None);
                }
                self.parts[j] = Some(PartData {
                    members: left_members,
                    chains: HashMap::new(),
                    dirty: true,
                });
                self.parts[new_id] = Some(PartData {
                    members: right_members,
                    chains: HashMap::new(),
                    dirty: true,
                });
                self.tick(size as u64);
            }
            Signal::Merge(a, b) => {
                let mut pair = (a, b);
                loop {
                    let (x, y) = pair;
                    let bdata = self.parts[y].take().unwrap();
                    self.partition.apply_merge(x, y);
                    self.tick(bdata.members.len() as u64);
                    let part = self.parts[x].as_mut().unwrap();
                    part.members.extend(bdata.members);
                    part.dirty = true;
                    match self.partition.pending_merge_around(x) {
                        Some(next) => pair = next,
                        None => break,
                    }
                }
            }
        }
    }

    fn traverse_query(&mut self) -> u64 {
        let mut total = 0u64;
        let mut cur = self.index.earliest();
        while let Some(iv) = cur {
            self.tick(1);
            let j = self.partition.locate(iv.start);
            let next_cutoff = if self.is_internal(j, &iv) {
                self.ensure_fresh(j);
                let (len, exit) = self.parts[j].as_ref().unwrap().chains[&iv.id];
                total += len;
                self.index.get(exit).unwrap().end
            } else {
                total += 1;
                iv.end
            };
            cur = self.index.global_lc(next_cutoff);
        }
        total
    }

    pub fn validate_partition(&self) {
        self.partition.validate();
    }
}

impl Default for SqrtEngine {
    fn default() -> Self {
        Self::new()
    }
}

impl Engine for SqrtEngine {
    fn apply(&mut self, op: &TraceOp) -> Result<Option<u64>> {
        match op {
            TraceOp::Insert(iv) => {
                self.index.insert(*iv)?;
                let j = self.partition.locate(iv.start);
                self.parts[j].as_mut().unwrap().members.insert(iv.start, iv.id);
                if self.is_internal(j, iv) {
                    self.parts[j].as_mut().unwrap().dirty = true;
                }
                let sig = self.partition.note_mutation(j, 1);
                self.handle_signal(sig);
                Ok(None)
            }
            TraceOp::Delete(id) => {
                let iv = self.index.delete(*id)?;
                let j = self.partition.locate(iv.start);
                self.parts[j].as_mut().unwrap().members.remove(&iv.start);
                if self.is_internal(j, &iv) {
                    self.parts[j].as_mut().unwrap().dirty = true;
                }
                let sig = self.partition.note_mutation(j, -1);
                self.handle_signal(sig);
                Ok(None)
            }
            TraceOp::Query => Ok(Some(self.traverse_query())),
        }
    }

    fn elementary_ops(&self) -> u64 {
        self.ops.get() + self.index.elementary_ops()
    }

    fn rebuild_count(&self) -> u64 {
        self.rebuilds
    }

    fn machines(&self) -> usize {
        1
    }

    fn name(&self) -> &'static str {
        "sqrt"
    }
}
