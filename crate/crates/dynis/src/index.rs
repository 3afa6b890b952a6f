//! Augmented ordered maps.
//!
//! `AugMap` is a treap keyed by `Endpoint` storing `(IntervalId, aux)` with a
//! subtree-minimum over `aux` and subtree sizes. The global successor index
//! keys by start with `aux = end`, so the leftmost-compatible query is one
//! aggregate descent. The same shape serves the dominance front's collection
//! tree (minimum end over a start range) and the active staircase
//! (rank/select over the `≺` order).

use crate::domain::{Endpoint, Error, Interval, IntervalId, Result};
use std::cell::Cell;
use std::collections::HashMap;

const NIL: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Node {
    key: Endpoint,
    id: IntervalId,
    aux: Endpoint,
    prio: u64,
    left: u32,
    right: u32,
    size: u32,
    min_aux: Endpoint,
}

/// Ordered map Endpoint -> (IntervalId, Endpoint) with min-aux and size
/// aggregates. Keys must be unique.
pub struct AugMap {
    nodes: Vec<Node>,
    free: Vec<u32>,
    root: u32,
    seed: u64,
    ops: Cell<u64>,
}

impl AugMap {
    pub fn new() -> Self {
        AugMap { nodes: Vec::new(), free: Vec::new(), root: NIL, seed: 0x9e3779b97f4a7c15, ops: Cell::new(0) }
    }

    pub fn len(&self) -> usize {
        if self.root == NIL { 0 } else { self.nodes[self.root as usize].size as usize }
    }

    pub fn is_empty(&self) -> bool {
        self.root == NIL
    }

    pub fn elementary_ops(&self) -> u64 {
        self.ops.get()
    }

    fn tick(&self) {
        self.ops.set(self.ops.get() + 1);
    }

    fn next_prio(&mut self) -> u64 {
        // splitmix64
        self.seed = self.seed.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.seed;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn pull(&mut self, v: u32) {
        let (l, r) = (self.nodes[v as usize].left, self.nodes[v as usize].right);
        let mut size = 1;
        let mut min_aux = self.nodes[v as usize].aux;
        if l != NIL {
            size += self.nodes[l as usize].size;
            min_aux = min_aux.min(self.nodes[l as usize].min_aux);
        }
        if r != NIL {
            size += self.nodes[r as usize].size;
            min_aux = min_aux.min(self.nodes[r as usize].min_aux);
        }
        let n = &mut self.nodes[v as usize];
        n.size = size;
        n.min_aux = min_aux;
    }

    fn alloc(&mut self, key: Endpoint, id: IntervalId, aux: Endpoint) -> u32 {
        let prio = self.next_prio();
        let node = Node { key, id, aux, prio, left: NIL, right: NIL, size: 1, min_aux: aux };
        if let Some(idx) = self.free.pop() {
            self.nodes[idx as usize] = node;
            idx
        } else {
            self.nodes.push(node);
            (self.nodes.len() - 1) as u32
        }
    }

    /// (keys < key, keys >= key)
    fn split(&mut self, t: u32, key: Endpoint) -> (u32, u32) {
        if t == NIL {
            return (NIL, NIL);
        }
        self.tick();
        if self.nodes[t as usize].key < key {
            let r = self.nodes[t as usize].right;
            let (a, b) = self.split(r, key);
            self.nodes[t as usize].right = a;
            self.pull(t);
            (t, b)
        } else {
            let l = self.nodes[t as usize].left;
            let (a, b) = self.split(l, key);
            self.nodes[t as usize].left = b;
            self.pull(t);
            (a, t)
        }
    }

    fn merge(&mut self, a: u32, b: u32) -> u32 {
        if a == NIL {
            return b;
        }
        if b == NIL {
            return a;
        }
        self.tick();
        if self.nodes[a as usize].prio > self.nodes[b as usize].prio {
            let ar = self.nodes[a as usize].right;
            let m = self.merge(ar, b);
            self.nodes[a as usize].right = m;
            self.pull(a);
            a
        } else {
            let bl = self.nodes[b as usize].left;
            let m = self.merge(a, bl);
            self.nodes[b as usize].left = m;
            self.pull(b);
            b
        }
    }

    pub fn insert(&mut self, key: Endpoint, id: IntervalId, aux: Endpoint) {
        let node = self.alloc(key, id, aux);
        let (l, r) = self.split(self.root, key);
        let lr = self.merge(l, node);
        self.root = self.merge(lr, r);
    }

    /// Removes the entry with exactly this key; returns its (id, aux).
    pub fn remove(&mut self, key: Endpoint) -> Option<(IntervalId, Endpoint)> {
        let (l, r) = self.split(self.root, key);
        // first node of r has the smallest key >= key
        let mut cur = r;
        let mut prev_path = Vec::new();
        while cur != NIL && self.nodes[cur as usize].left != NIL {
            self.tick();
            prev_path.push(cur);
            cur = self.nodes[cur as usize].left;
        }
        if cur == NIL || self.nodes[cur as usize].key != key {
            // not found, restore
            self.root = self.merge(l, r);
            return None;
        }
        let out = (self.nodes[cur as usize].id, self.nodes[cur as usize].aux);
        // replace cur by its right child
        let rc = self.nodes[cur as usize].right;
        let new_r = if let Some(&p) = prev_path.last() {
            self.nodes[p as usize].left = rc;
            for &v in prev_path.iter().rev() {
                self.pull(v);
            }
            r
        } else {
            rc
        };
        self.free.push(cur);
        self.root = self.merge(l, new_r);
        Some(out)
    }

    pub fn get(&self, key: Endpoint) -> Option<(IntervalId, Endpoint)> {
        let mut cur = self.root;
        while cur != NIL {
            self.tick();
            let n = &self.nodes[cur as usize];
            if key < n.key {
                cur = n.left;
            } else if n.key < key {
                cur = n.right;
            } else {
                return Some((n.id, n.aux));
            }
        }
        None
    }

    /// Smallest key >= bound.
    pub fn succ(&self, bound: Endpoint) -> Option<(Endpoint, IntervalId, Endpoint)> {
        let mut cur = self.root;
        let mut best = None;
        while cur != NIL {
            self.tick();
            let n = &self.nodes[cur as usize];
            if n.key >= bound {
                best = Some((n.key, n.id, n.aux));
                cur = n.left;
            } else {
                cur = n.right;
            }
        }
        best
    }

    /// Largest key < bound.
    pub fn pred(&self, bound: Endpoint) -> Option<(Endpoint, IntervalId, Endpoint)> {
        let mut cur = self.root;
        let mut best = None;
        while cur != NIL {
            self.tick();
            let n = &self.nodes[cur as usize];
            if n.key < bound {
                best = Some((n.key, n.id, n.aux));
                cur = n.right;
            } else {
                cur = n.left;
            }
        }
        best
    }

    /// Number of keys < bound.
    pub fn rank(&self, bound: Endpoint) -> usize {
        let mut cur = self.root;
        let mut acc = 0usize;
        while cur != NIL {
            self.tick();
            let n = &self.nodes[cur as usize];
            if n.key < bound {
                acc += 1 + if n.left != NIL { self.nodes[n.left as usize].size as usize } else { 0 };
                cur = n.right;
            } else {
                cur = n.left;
            }
        }
        acc
    }

    /// k-th smallest entry (0-based).
    pub fn select(&self, k: usize) -> Option<(Endpoint, IntervalId, Endpoint)> {
        if k >= self.len() {
            return None;
        }
        let mut cur = self.root;
        let mut k = k;
        loop {
            self.tick();
            let n = &self.nodes[cur as usize];
            let ls = if n.left != NIL { self.nodes[n.left as usize].size as usize } else { 0 };
            if k < ls {
                cur = n.left;
            } else if k == ls {
                return Some((n.key, n.id, n.aux));
            } else {
                k -= ls + 1;
                cur = n.right;
            }
        }
    }

    /// Entry with minimum aux among keys >= cutoff.
    pub fn min_aux_at_or_above(&self, cutoff: Endpoint) -> Option<(Endpoint, IntervalId, Endpoint)> {
        self.min_aux_in(Some(cutoff), None)
    }

    /// Entry with minimum aux among keys in [lo, hi) (None = unbounded).
    pub fn min_aux_in(
        &self,
        lo: Option<Endpoint>,
        hi: Option<Endpoint>,
    ) -> Option<(Endpoint, IntervalId, Endpoint)> {
        self.min_aux_filtered(
            |k| lo.map_or(false, |l| k < l),
            |k| hi.map_or(false, |h| k >= h),
        )
    }

    /// Entry with minimum aux among keys with lo < key < hi (exclusive).
    pub fn min_aux_range_excl(
        &self,
        lo: Option<Endpoint>,
        hi: Option<Endpoint>,
    ) -> Option<(Endpoint, IntervalId, Endpoint)> {
        self.min_aux_filtered(
            |k| lo.map_or(false, |l| k <= l),
            |k| hi.map_or(false, |h| k >= h),
        )
    }

    /// Range minimum over aux: `below(k)` / `above(k)` describe keys under /
    /// over the contiguous range. O(log n): two boundary descents collect
    /// single nodes and whole-subtree aggregates, then one descent extracts
    /// the witness from the best subtree.
    fn min_aux_filtered<B: Fn(Endpoint) -> bool, A: Fn(Endpoint) -> bool>(
        &self,
        below: B,
        above: A,
    ) -> Option<(Endpoint, IntervalId, Endpoint)> {
        enum Cand {
            Node(u32),
            Subtree(u32),
        }
        let mut cands: Vec<Cand> = Vec::new();
        // descent where only the lower bound can cut: node keys all satisfy
        // the upper bound
        let lo_side = |map: &AugMap, mut t: u32, cands: &mut Vec<Cand>| {
            while t != NIL {
                map.tick();
                let n = &map.nodes[t as usize];
                if below(n.key) {
                    t = n.right;
                } else {
                    cands.push(Cand::Node(t));
                    if n.right != NIL {
                        cands.push(Cand::Subtree(n.right));
                    }
                    t = n.left;
                }
            }
        };
        let hi_side = |map: &AugMap, mut t: u32, cands: &mut Vec<Cand>| {
            while t != NIL {
                map.tick();
                let n = &map.nodes[t as usize];
                if above(n.key) {
                    t = n.left;
                } else {
                    cands.push(Cand::Node(t));
                    if n.left != NIL {
                        cands.push(Cand::Subtree(n.left));
                    }
                    t = n.right;
                }
            }
        };
        // outer descent until the range splits
        let mut t = self.root;
        loop {
            if t == NIL {
                break;
            }
            self.tick();
            let n = &self.nodes[t as usize];
            if below(n.key) {
                t = n.right;
            } else if above(n.key) {
                t = n.left;
            } else {
                cands.push(Cand::Node(t));
                lo_side(self, n.left, &mut cands);
                hi_side(self, n.right, &mut cands);
                break;
            }
        }
        let mut best: Option<(Endpoint, u32, bool)> = None; // (aux, idx, is_subtree)
        for c in cands {
            let (aux, idx, sub) = match c {
                Cand::Node(i) => (self.nodes[i as usize].aux, i, false),
                Cand::Subtree(i) => (self.nodes[i as usize].min_aux, i, true),
            };
            if best.map_or(true, |b| aux < b.0) {
                best = Some((aux, idx, sub));
            }
        }
        let (aux, mut t, sub) = best?;
        if sub {
            // walk down to the element realizing the subtree minimum
            loop {
                self.tick();
                let n = &self.nodes[t as usize];
                if n.aux == aux {
                    break;
                }
                if n.left != NIL && self.nodes[n.left as usize].min_aux == aux {
                    t = n.left;
                } else {
                    t = n.right;
                }
            }
        }
        let n = &self.nodes[t as usize];
        Some((n.key, n.id, n.aux))
    }

    /// First entry (in key order) where `pred` holds, assuming `pred` is
    /// monotone (false..false true..true) along the key order.
    pub fn partition_point<F: Fn(Endpoint, IntervalId, Endpoint) -> bool>(
        &self,
        pred: F,
    ) -> Option<(Endpoint, IntervalId, Endpoint)> {
        let mut cur = self.root;
        let mut best = None;
        while cur != NIL {
            self.tick();
            let n = &self.nodes[cur as usize];
            if pred(n.key, n.id, n.aux) {
                best = Some((n.key, n.id, n.aux));
                cur = n.left;
            } else {
                cur = n.right;
            }
        }
        best
    }

    pub fn iter(&self) -> Vec<(Endpoint, IntervalId, Endpoint)> {
        let mut out = Vec::with_capacity(self.len());
        fn walk(map: &AugMap, t: u32, out: &mut Vec<(Endpoint, IntervalId, Endpoint)>) {
            if t == NIL {
                return;
            }
            let n = &map.nodes[t as usize];
            walk(map, n.left, out);
            out.push((n.key, n.id, n.aux));
            walk(map, n.right, out);
        }
        walk(self, self.root, &mut out);
        out
    }

    pub fn first(&self) -> Option<(Endpoint, IntervalId, Endpoint)> {
        self.select(0)
    }
}

impl Default for AugMap {
    fn default() -> Self {
        Self::new()
    }
}

/// The global successor structure over all live intervals: a start-keyed
/// `AugMap` augmented with suffix-minimum of end, plus an end-keyed map.
pub struct GlobalIndex {
    by_start: AugMap,
    by_end: AugMap,
    live: HashMap<IntervalId, Interval>,
}

impl GlobalIndex {
    pub fn new() -> Self {
        GlobalIndex { by_start: AugMap::new(), by_end: AugMap::new(), live: HashMap::new() }
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    pub fn elementary_ops(&self) -> u64 {
        self.by_start.elementary_ops() + self.by_end.elementary_ops()
    }

    pub fn insert(&mut self, iv: Interval) -> Result<()> {
        if self.live.contains_key(&iv.id) {
            return Err(Error::DuplicateId(iv.id));
        }
        self.by_start.insert(iv.start, iv.id, iv.end);
        self.by_end.insert(iv.end, iv.id, iv.start);
        self.live.insert(iv.id, iv);
        Ok(())
    }

    pub fn delete(&mut self, id: IntervalId) -> Result<Interval> {
        let iv = self.live.remove(&id).ok_or(Error::UnknownId(id))?;
        self.by_start.remove(iv.start);
        self.by_end.remove(iv.end);
        Ok(iv)
    }

    pub fn get(&self, id: IntervalId) -> Option<&Interval> {
        self.live.get(&id)
    }

    /// The live interval with minimum end among those with start >= cutoff.
    pub fn global_lc(&self, cutoff: Endpoint) -> Option<Interval> {
        self.by_start
            .min_aux_at_or_above(cutoff)
            .map(|(start, id, end)| Interval { id, start, end, weight: self.live[&id].weight })
    }

    /// The earliest-ending live interval.
    pub fn earliest(&self) -> Option<Interval> {
        self.by_end.first().map(|(_, id, _)| self.live[&id])
    }

    pub fn iter_live(&self) -> impl Iterator<Item = &Interval> {
        self.live.values()
    }
}

impl Default for GlobalIndex {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{self, fixtures::*};

    #[test]
    fn insert_then_delete_restores() {
        let mut idx = GlobalIndex::new();
        for iv in fix1() {
            idx.insert(iv).unwrap();
        }
        let before: Vec<_> = {
            let mut v: Vec<_> = idx.iter_live().copied().collect();
            v.sort_by_key(|i| i.id);
            v
        };
        let extra = Interval::new(IntervalId(9), Endpoint::new(1, 20), Endpoint::new(9, 21), 1);
        idx.insert(extra).unwrap();
        idx.delete(IntervalId(9)).unwrap();
        let mut after: Vec<_> = idx.iter_live().copied().collect();
        after.sort_by_key(|i| i.id);
        assert_eq!(before, after);
        assert_eq!(idx.global_lc(Endpoint::new(2, 100)).unwrap().id, FIX1_B);
    }

    #[test]
    fn global_lc_matches_fixture_examples() {
        let mut idx = GlobalIndex::new();
        for iv in fix1() {
            idx.insert(iv).unwrap();
        }
        assert_eq!(idx.global_lc(Endpoint::new(2, 100)).unwrap().id, FIX1_B);
        assert!(idx.global_lc(Endpoint::new(7, 100)).is_none());
        assert_eq!(idx.global_lc(Endpoint::new(4, 100)).unwrap().id, FIX1_D);
        idx.delete(FIX1_B).unwrap();
        assert_eq!(idx.global_lc(Endpoint::new(2, 100)).unwrap().id, FIX1_D);
    }

    #[test]
    fn errors_on_bad_ids() {
        let mut idx = GlobalIndex::new();
        idx.insert(fix1()[0]).unwrap();
        assert!(matches!(idx.insert(fix1()[0]), Err(Error::DuplicateId(_))));
        assert!(matches!(idx.delete(IntervalId(77)), Err(Error::UnknownId(_))));
    }

    #[test]
    fn global_lc_matches_scan_on_random_sets() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let mut idx = GlobalIndex::new();
            let mut set = Vec::new();
            let mut tie = 0;
            for id in 0..40u64 {
                let s = rng.gen_range(0..100);
                let f = s + rng.gen_range(1..30);
                let iv = Interval::new(
                    IntervalId(id),
                    Endpoint::new(s, tie),
                    Endpoint::new(f, tie + 1),
                    1,
                );
                tie += 2;
                idx.insert(iv).unwrap();
                set.push(iv);
            }
            // interleave deletions
            for _ in 0..10 {
                let k = rng.gen_range(0..set.len());
                let iv = set.swap_remove(k);
                idx.delete(iv.id).unwrap();
            }
            for c in 0..110 {
                let cutoff = Endpoint::new(c, rng.gen_range(0..200));
                let expect = oracle::lc_scan(&set, cutoff).map(|i| i.id);
                assert_eq!(idx.global_lc(cutoff).map(|i| i.id), expect);
            }
        }
    }

    #[test]
    fn augmap_rank_select_roundtrip() {
        let mut m = AugMap::new();
        for i in 0..100u64 {
            m.insert(Endpoint::new((i * 7 % 31) as i64, i), IntervalId(i), Endpoint::new(0, i));
        }
        let items = m.iter();
        for (k, item) in items.iter().enumerate() {
            assert_eq!(m.select(k).unwrap().0, item.0);
            assert_eq!(m.rank(item.0), k);
        }
    }
}
