//! Separator bookkeeping shared by the part-based engines: epoch sizing,
//! part lookup by key, and split / merge / epoch-rebuild signals with the
//! standard size invariants (parts at most 2·⌈N^α⌉, any two neighbours not
//! both under ⌈N^α/2⌉, live count within [N/2, 2N]).

use crate::domain::Endpoint;
use std::collections::BTreeMap;
use std::ops::Bound::{Excluded, Included, Unbounded};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum KeyMode {
    ByStart,
    ByEnd,
}

pub type PartId = usize;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Signal {
    None,
    Split(PartId),
    Merge(PartId, PartId),
    EpochRebuild,
}

#[derive(Clone, Debug)]
struct PartState {
    count: u64,
    /// lower separator; None for the leftmost part
    low: Option<Endpoint>,
    muts_since_event: u64,
    created_size: u64,
}

pub struct Partition {
    pub key_mode: KeyMode,
    epoch_n: u64,
    unit: u64,
    threshold: u64,
    separators: BTreeMap<Endpoint, PartId>,
    parts: Vec<Option<PartState>>,
    free: Vec<PartId>,
    first: PartId,
    live: u64,
    epoch_count: u64,
    split_count: u64,
    merge_count: u64,
}

/// Smallest u >= n^(num/den).
pub fn ceil_pow(n: u64, num: u32, den: u32) -> u64 {
    if n <= 1 {
        return n.max(1);
    }
    let target = (n as u128).pow(num);
    let mut lo = 1u64;
    let mut hi = n;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if (mid as u128).pow(den) >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

impl Partition {
    /// Chunks the sorted keys into parts of ⌈N^α⌉, folding an undersized tail
    /// into its predecessor so every fresh part starts at full size.
    pub fn new_epoch(keys: &[Endpoint], alpha_num: u32, alpha_den: u32, key_mode: KeyMode) -> Self {
        debug_assert!(keys.windows(2).all(|w| w[0] < w[1]), "keys must be sorted");
        let n = keys.len() as u64;
        let epoch_n = n;
        let unit = ceil_pow(epoch_n.max(1), alpha_num, alpha_den);
        let threshold = unit.div_ceil(2);
        let mut p = Partition {
            key_mode,
            epoch_n,
            unit,
            threshold,
            separators: BTreeMap::new(),
            parts: Vec::new(),
            free: Vec::new(),
            first: 0,
            live: n,
            epoch_count: 0,
            split_count: 0,
            merge_count: 0,
        };
        let mut chunk_starts: Vec<usize> = (0..keys.len()).step_by(unit as usize).collect();
        if chunk_starts.is_empty() {
            chunk_starts.push(0);
        }
        // fold a short tail chunk into the previous one
        if chunk_starts.len() >= 2 && keys.len() - chunk_starts[chunk_starts.len() - 1] < unit as usize
        {
            chunk_starts.pop();
        }
        for (c, &lo) in chunk_starts.iter().enumerate() {
            let hi = chunk_starts.get(c + 1).copied().unwrap_or(keys.len());
            let low = if c == 0 { None } else { Some(keys[lo]) };
            let id = p.parts.len();
            p.parts.push(Some(PartState {
                count: (hi - lo) as u64,
                low,
                muts_since_event: 0,
                created_size: (hi - lo) as u64,
            }));
            if let Some(k) = low {
                p.separators.insert(k, id);
            } else {
                p.first = id;
            }
        }
        p
    }

    pub fn epoch_n(&self) -> u64 {
        self.epoch_n
    }

    pub fn unit(&self) -> u64 {
        self.unit
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    pub fn live(&self) -> u64 {
        self.live
    }

    pub fn slab_len(&self) -> usize {
        self.parts.len()
    }

    pub fn part_ids(&self) -> Vec<PartId> {
        let mut ids = vec![self.first];
        ids.extend(self.separators.values().copied());
        ids
    }

    pub fn part_count(&self) -> usize {
        self.separators.len() + 1
    }

    pub fn size_of(&self, j: PartId) -> u64 {
        self.parts[j].as_ref().unwrap().count
    }

    pub fn locate(&self, key: Endpoint) -> PartId {
        self.separators
            .range((Unbounded, Included(key)))
            .next_back()
            .map(|(_, id)| *id)
            .unwrap_or(self.first)
    }

    /// [low, high) key range of a part.
    pub fn range_of(&self, j: PartId) -> (Option<Endpoint>, Option<Endpoint>) {
        let low = self.parts[j].as_ref().unwrap().low;
        let high = match low {
            Some(l) => self.separators.range((Excluded(l), Unbounded)).next().map(|(k, _)| *k),
            None => self.separators.keys().next().copied(),
        };
        (low, high)
    }

    /// Upper key bound of a part (POS_INF for the last one).
    pub fn upper_of(&self, j: PartId) -> Endpoint {
        self.range_of(j).1.unwrap_or(Endpoint::POS_INF)
    }

    fn neighbor_after(&self, j: PartId) -> Option<PartId> {
        self.range_of(j).1.map(|k| self.separators[&k])
    }

    fn neighbor_before(&self, j: PartId) -> Option<PartId> {
        let low = self.parts[j].as_ref().unwrap().low?;
        Some(
            self.separators
                .range((Unbounded, Excluded(low)))
                .next_back()
                .map(|(_, id)| *id)
                .unwrap_or(self.first),
        )
    }

    /// Records one mutation in part j (delta ±1) and reports the repair
    /// signal, priority epoch rebuild > split > merge.
    pub fn note_mutation(&mut self, j: PartId, delta: i64) -> Signal {
        {
            let st = self.parts[j].as_mut().unwrap();
            st.count = st.count.checked_add_signed(delta).expect("part count underflow");
            st.muts_since_event += 1;
        }
        self.live = self.live.checked_add_signed(delta).expect("live underflow");
        if 2 * self.live < self.epoch_n || self.live > 2 * self.epoch_n {
            return Signal::EpochRebuild;
        }
        if self.parts[j].as_ref().unwrap().count > 2 * self.unit {
            return Signal::Split(j);
        }
        if delta < 0 {
            let under = |p: PartId| self.parts[p].as_ref().unwrap().count < self.threshold;
            if under(j) {
                if let Some(nx) = self.neighbor_after(j) {
                    if under(nx) {
                        return Signal::Merge(j, nx);
                    }
                }
                if let Some(pv) = self.neighbor_before(j) {
                    if under(pv) {
                        return Signal::Merge(pv, j);
                    }
                }
            }
        }
        Signal::None
    }

    /// Splits part j at `median` (a stored key; it becomes the new
    /// separator), returning the id of the new right part.
    pub fn apply_split(&mut self, j: PartId, median: Endpoint, left: u64, right: u64) -> PartId {
        debug_assert_eq!(self.locate(median), j);
        let id = if let Some(id) = self.free.pop() {
            id
        } else {
            self.parts.push(None);
            self.parts.len() - 1
        };
        self.parts[id] = Some(PartState {
            count: right,
            low: Some(median),
            muts_since_event: 0,
            created_size: right,
        });
        let st = self.parts[j].as_mut().unwrap();
        debug_assert_eq!(st.count, left + right);
        st.count = left;
        st.muts_since_event = 0;
        st.created_size = left;
        self.separators.insert(median, id);
        self.split_count += 1;
        id
    }

    /// Merges adjacent parts (a, b) into a, removing b's separator.
    pub fn apply_merge(&mut self, a: PartId, b: PartId) -> PartId {
        let blow = self.parts[b].as_ref().unwrap().low.expect("right part has a separator");
        debug_assert_eq!(self.neighbor_after(a), Some(b));
        self.separators.remove(&blow);
        let bcount = self.parts[b].as_ref().unwrap().count;
        let st = self.parts[a].as_mut().unwrap();
        st.count += bcount;
        st.muts_since_event = 0;
        st.created_size = st.count;
        self.parts[b] = None;
        self.free.push(b);
        self.merge_count += 1;
        a
    }

    /// A neighbouring pair around `x` that still violates the pair
    /// invariant (merge products can stay under the threshold when an empty
    /// part was folded in); engines repair by merging until this is None.
    pub fn pending_merge_around(&self, x: PartId) -> Option<(PartId, PartId)> {
        let under = |p: PartId| self.parts[p].as_ref().unwrap().count < self.threshold;
        if under(x) {
            if let Some(nx) = self.neighbor_after(x) {
                if under(nx) {
                    return Some((x, nx));
                }
            }
            if let Some(pv) = self.neighbor_before(x) {
                if under(pv) {
                    return Some((pv, x));
                }
            }
        }
        None
    }

    pub fn counters(&self) -> (u64, u64, u64) {
        (self.epoch_count, self.split_count, self.merge_count)
    }

    pub fn mutations_since_event(&self, j: PartId) -> u64 {
        self.parts[j].as_ref().unwrap().muts_since_event
    }

    pub fn created_size(&self, j: PartId) -> u64 {
        self.parts[j].as_ref().unwrap().created_size
    }

    /// Asserts the size invariants; `n` is the current live count.
    pub fn validate(&self) {
        let ids = self.part_ids();
        for &j in &ids {
            assert!(self.size_of(j) <= 2 * self.unit, "part over 2·unit");
        }
        for w in ids.windows(2) {
            let (a, b) = (self.size_of(w[0]), self.size_of(w[1]));
            assert!(
                a >= self.threshold || b >= self.threshold,
                "adjacent parts both under threshold: {a} {b}"
            );
        }
        assert!(
            2 * self.live >= self.epoch_n && self.live <= 2 * self.epoch_n,
            "live count {} left epoch range around {}",
            self.live,
            self.epoch_n
        );
        // part count bound given the pair invariant: every other part holds
        // at least `threshold` members
        let n = self.live.max(1);
        let bound = 2 * n.div_ceil(self.threshold.max(1)) + 1;
        assert!(
            self.part_count() as u64 <= bound.max(3),
            "part count {} exceeds bound {}",
            self.part_count(),
            bound
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(c: i64) -> Endpoint {
        Endpoint::new(c, c as u64)
    }

    #[test]
    fn ceil_pow_values() {
        assert_eq!(ceil_pow(9, 1, 2), 3);
        assert_eq!(ceil_pow(8, 2, 3), 4);
        assert_eq!(ceil_pow(10, 1, 2), 4); // 3^2 = 9 < 10
        assert_eq!(ceil_pow(1, 2, 3), 1);
        assert_eq!(ceil_pow(27, 1, 3), 3);
        assert_eq!(ceil_pow(28, 1, 3), 4);
    }

    #[test]
    fn epoch_chunking_examples() {
        // 9 keys at alpha = 1/2: parts of 3,3,3
        let keys: Vec<Endpoint> = (0..9).map(ep).collect();
        let p = Partition::new_epoch(&keys, 1, 2, KeyMode::ByStart);
        let sizes: Vec<u64> = p.part_ids().iter().map(|j| p.size_of(*j)).collect();
        assert_eq!(sizes, vec![3, 3, 3]);

        // single interval: one part
        let p = Partition::new_epoch(&[ep(5)], 1, 2, KeyMode::ByStart);
        assert_eq!(p.part_count(), 1);

        // 8 keys at alpha = 2/3: unit 4, two parts
        let keys: Vec<Endpoint> = (0..8).map(ep).collect();
        let p = Partition::new_epoch(&keys, 2, 3, KeyMode::ByStart);
        let sizes: Vec<u64> = p.part_ids().iter().map(|j| p.size_of(*j)).collect();
        assert_eq!(sizes, vec![4, 4]);

        // short tail folds into the previous chunk
        let keys: Vec<Endpoint> = (0..10).map(ep).collect();
        let p = Partition::new_epoch(&keys, 2, 3, KeyMode::ByStart);
        let sizes: Vec<u64> = p.part_ids().iter().map(|j| p.size_of(*j)).collect();
        assert_eq!(sizes.iter().sum::<u64>(), 10);
        assert!(sizes.iter().all(|s| *s >= p.unit()));
        p.validate();
    }

    #[test]
    fn locate_examples() {
        let keys: Vec<Endpoint> = vec![ep(0), ep(3), ep(7)];
        let mut p = Partition::new_epoch(&keys, 1, 2, KeyMode::ByStart);
        // force separators {3} by splitting when needed; with unit 2 the
        // chunks are [0,3] and [7]->folded, so build a clean case instead
        let _ = &mut p;
        let keys: Vec<Endpoint> = (0..4).map(ep).collect();
        let p = Partition::new_epoch(&keys, 1, 2, KeyMode::ByStart);
        // unit 2: parts {0,1}, {2,3}: separator at key 2
        assert_eq!(p.locate(ep(1)), p.part_ids()[0]);
        assert_eq!(p.locate(ep(2)), p.part_ids()[1]);
        assert_eq!(p.locate(ep(10)), p.part_ids()[1]);
    }

    #[test]
    fn signals_fire_in_priority_order() {
        let keys: Vec<Endpoint> = (0..16).map(ep).collect();
        let mut p = Partition::new_epoch(&keys, 1, 2, KeyMode::ByStart);
        assert_eq!(p.unit(), 4);
        let parts = p.part_ids();
        // grow one part to 2*unit, next insert splits
        let j = parts[0];
        let mut sig = Signal::None;
        for k in 0..5 {
            sig = p.note_mutation(j, 1);
            let _ = k;
            if sig != Signal::None {
                break;
            }
        }
        assert_eq!(sig, Signal::Split(j));
        // execute the split at the median
        let id = p.apply_split(j, ep(2), 5, 4);
        assert_eq!(p.locate(ep(2)), id);
        p.validate();

        // epoch rebuild takes priority once live leaves [N/2, 2N]
        let mut p = Partition::new_epoch(&(0..4).map(ep).collect::<Vec<_>>(), 1, 2, KeyMode::ByStart);
        let j = p.part_ids()[0];
        let mut last = Signal::None;
        for k in 0..5 {
            last = p.note_mutation(j, 1);
            let _ = k;
            if last == Signal::EpochRebuild {
                break;
            }
            if let Signal::Split(s) = last {
                // perform the split to keep invariants while growing
                let med = ep(0); // placeholder median inside part s
                let sz = p.size_of(s);
                p.apply_split(s, med, sz / 2, sz - sz / 2);
            }
        }
        assert_eq!(last, Signal::EpochRebuild);
    }

    #[test]
    fn rebuild_accounting_bounded() {
        // per epoch, the intervals re-chunked by splits and merges stay
        // within 4x the mutations of that epoch
        use rand::{Rng, SeedableRng};
        use std::collections::BTreeSet;
        let mut rng = rand::rngs::StdRng::seed_from_u64(103);
        for (alpha_num, alpha_den) in [(1u32, 2u32), (2, 3), (1, 3)] {
            let mut keys: BTreeSet<Endpoint> = (0..64).map(|k| ep(k * 7)).collect();
            let sorted: Vec<Endpoint> = keys.iter().copied().collect();
            let mut p = Partition::new_epoch(&sorted, alpha_num, alpha_den, KeyMode::ByStart);
            let mut next_coord = 10_000i64;
            let mut ops_in_epoch = 0u64;
            let mut rebuilt_in_epoch = 0u64;
            for _ in 0..20_000 {
                let insert = rng.gen_bool(0.55) || keys.len() < 4;
                let key = if insert {
                    next_coord += rng.gen_range(1..50);
                    let k = ep(next_coord);
                    keys.insert(k);
                    k
                } else {
                    let pick = *keys
                        .iter()
                        .nth(rng.gen_range(0..keys.len()))
                        .unwrap();
                    keys.remove(&pick);
                    pick
                };
                let j = p.locate(key);
                ops_in_epoch += 1;
                match p.note_mutation(j, if insert { 1 } else { -1 }) {
                    Signal::None => {}
                    Signal::EpochRebuild => {
                        if ops_in_epoch >= 8 {
                            assert!(
                                rebuilt_in_epoch <= 4 * ops_in_epoch,
                                "rebuilt {rebuilt_in_epoch} for {ops_in_epoch} ops"
                            );
                        }
                        let sorted: Vec<Endpoint> = keys.iter().copied().collect();
                        p = Partition::new_epoch(&sorted, alpha_num, alpha_den, KeyMode::ByStart);
                        ops_in_epoch = 0;
                        rebuilt_in_epoch = 0;
                    }
                    Signal::Split(x) => {
                        let (lo, hi) = p.range_of(x);
                        let members: Vec<Endpoint> = keys
                            .iter()
                            .copied()
                            .filter(|k| lo.map_or(true, |l| *k >= l) && hi.map_or(true, |h| *k < h))
                            .collect();
                        rebuilt_in_epoch += members.len() as u64;
                        let median = members[members.len().div_ceil(2) - 1];
                        let left = members.iter().filter(|k| **k < median).count() as u64;
                        p.apply_split(x, median, left, members.len() as u64 - left);
                    }
                    Signal::Merge(a, b) => {
                        let mut pair = (a, b);
                        loop {
                            let (x, y) = pair;
                            rebuilt_in_epoch += p.size_of(x) + p.size_of(y);
                            p.apply_merge(x, y);
                            match p.pending_merge_around(x) {
                                Some(next) => pair = next,
                                None => break,
                            }
                        }
                    }
                }
                p.validate();
            }
        }
    }

    #[test]
    fn merge_signal_on_underflow() {
        let keys: Vec<Endpoint> = (0..16).map(ep).collect();
        let mut p = Partition::new_epoch(&keys, 1, 2, KeyMode::ByStart);
        // unit 4, threshold 2: delete from two adjacent parts until both are 1
        let parts = p.part_ids();
        let (a, b) = (parts[0], parts[1]);
        let mut merged = false;
        for _ in 0..3 {
            if p.note_mutation(a, -1) != Signal::None {
                break;
            }
        }
        for _ in 0..3 {
            match p.note_mutation(b, -1) {
                Signal::Merge(x, y) => {
                    assert_eq!((x, y), (a, b));
                    p.apply_merge(x, y);
                    merged = true;
                    break;
                }
                Signal::EpochRebuild => break,
                _ => {}
            }
        }
        assert!(merged);
        p.validate();
    }
}
