//! Balanced Euler-tour sequence for rooted forests.
//!
//! Every tree node contributes an open and a close element carrying a signed
//! weight delta (+w at open, -w at close). Prefix sums of deltas give weighted
//! depth, prefix counts of weight-1 opens give preorder ranks, and range
//! minima of prefix sums give ancestor searches. Structural edits are
//! sequence splits and concatenations, so a contiguous child range moves in
//! O(log n).

use std::cell::Cell;

pub const NIL: u32 = u32::MAX;

/// Stable handle to one tour element.
pub type ElemId = u32;

#[derive(Clone, Debug)]
struct Elem {
    node: u32,
    open: bool,
    delta: i8,
    /// mark channel delta: +1 at a marked node's open, -1 at its close
    mdelta: i8,
    ropen: bool,
    prio: u64,
    left: u32,
    right: u32,
    parent: u32,
    cnt: u32,
    wsum: i32,
    /// minimum prefix sum over positions inside this subtree (prefixes are
    /// relative to the subtree start)
    wmin: i32,
    msum: i32,
    mmin: i32,
    ropen_cnt: u32,
}

pub struct Tour {
    elems: Vec<Elem>,
    free: Vec<u32>,
    pub root: u32,
    seed: u64,
    ops: Cell<u64>,
}

impl Tour {
    pub fn new() -> Self {
        Tour { elems: Vec::new(), free: Vec::new(), root: NIL, seed: 0x853c49e6748fea9b, ops: Cell::new(0) }
    }

    pub fn elementary_ops(&self) -> u64 {
        self.ops.get()
    }

    fn tick(&self) {
        self.ops.set(self.ops.get() + 1);
    }

    pub fn len(&self) -> usize {
        if self.root == NIL { 0 } else { self.elems[self.root as usize].cnt as usize }
    }

    fn next_prio(&mut self) -> u64 {
        self.seed = self.seed.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.seed;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn node_of(&self, e: ElemId) -> u32 {
        self.elems[e as usize].node
    }

    pub fn set_node(&mut self, e: ElemId, node: u32) {
        self.elems[e as usize].node = node;
    }

    /// Sets the mark-channel delta on an element and repairs aggregates up
    /// to the root.
    pub fn set_mdelta(&mut self, e: ElemId, mdelta: i8) {
        self.elems[e as usize].mdelta = mdelta;
        let mut cur = e;
        loop {
            self.tick();
            self.pull(cur);
            let p = self.elems[cur as usize].parent;
            if p == NIL {
                break;
            }
            cur = p;
        }
        debug_assert_eq!(cur, self.root);
    }

    /// Sum of mark deltas over positions [1..=pos].
    pub fn prefix_msum(&self, pos: u32) -> i32 {
        let mut t = self.root;
        let mut k = pos;
        let mut acc = 0i32;
        while t != NIL && k > 0 {
            self.tick();
            let n = &self.elems[t as usize];
            let ls = self.size(n.left);
            if k < ls {
                t = n.left;
            } else if k == ls {
                acc += if n.left != NIL { self.elems[n.left as usize].msum } else { 0 };
                break;
            } else {
                acc += if n.left != NIL { self.elems[n.left as usize].msum } else { 0 };
                acc += n.mdelta as i32;
                k -= ls + 1;
                t = n.right;
            }
        }
        acc
    }

    /// Rightmost position p <= bound with prefix_msum(p) <= target.
    pub fn rightmost_mprefix_le(&self, bound: u32, target: i32) -> Option<u32> {
        fn unbounded(tour: &Tour, t: u32, off: u32, base: i32, target: i32) -> Option<u32> {
            let mut t = t;
            let mut off = off;
            let mut base = base;
            loop {
                if t == NIL {
                    return None;
                }
                tour.tick();
                let n = &tour.elems[t as usize];
                let ls = tour.size(n.left);
                let lsum = if n.left != NIL { tour.elems[n.left as usize].msum } else { 0 };
                let rmin = if n.right != NIL { tour.elems[n.right as usize].mmin } else { i32::MAX };
                if n.right != NIL && base + lsum + n.mdelta as i32 + rmin <= target {
                    off += ls + 1;
                    base += lsum + n.mdelta as i32;
                    t = n.right;
                    continue;
                }
                if base + lsum + n.mdelta as i32 <= target {
                    return Some(off + ls + 1);
                }
                if n.left != NIL && base + tour.elems[n.left as usize].mmin <= target {
                    t = n.left;
                    continue;
                }
                return None;
            }
        }
        fn bounded(tour: &Tour, t: u32, off: u32, base: i32, bound: u32, target: i32) -> Option<u32> {
            if t == NIL {
                return None;
            }
            tour.tick();
            let n = &tour.elems[t as usize];
            let ls = tour.size(n.left);
            let epos = off + ls + 1;
            let lsum = if n.left != NIL { tour.elems[n.left as usize].msum } else { 0 };
            if epos <= bound {
                if let Some(pp) =
                    bounded(tour, n.right, epos, base + lsum + n.mdelta as i32, bound, target)
                {
                    return Some(pp);
                }
                if base + lsum + n.mdelta as i32 <= target {
                    return Some(epos);
                }
                unbounded(tour, n.left, off, base, target)
            } else {
                bounded(tour, n.left, off, base, bound, target)
            }
        }
        bounded(self, self.root, 0, 0, bound, target)
    }

    /// Element ids of a detached segment in order.
    pub fn seg_elems(&self, seg: u32) -> Vec<ElemId> {
        let mut out = Vec::new();
        fn go(tour: &Tour, t: u32, out: &mut Vec<ElemId>) {
            if t == NIL {
                return;
            }
            go(tour, tour.elems[t as usize].left, out);
            out.push(t);
            go(tour, tour.elems[t as usize].right, out);
        }
        go(self, seg, &mut out);
        out
    }

    pub fn is_open(&self, e: ElemId) -> bool {
        self.elems[e as usize].open
    }

    pub fn alloc(&mut self, node: u32, open: bool, weight: u8) -> ElemId {
        let prio = self.next_prio();
        let delta = if open { weight as i8 } else { -(weight as i8) };
        let e = Elem {
            node,
            open,
            delta,
            mdelta: 0,
            ropen: open && weight == 1,
            prio,
            left: NIL,
            right: NIL,
            parent: NIL,
            cnt: 1,
            wsum: delta as i32,
            wmin: delta as i32,
            msum: 0,
            mmin: 0,
            ropen_cnt: (open && weight == 1) as u32,
        };
        if let Some(i) = self.free.pop() {
            self.elems[i as usize] = e;
            i
        } else {
            self.elems.push(e);
            (self.elems.len() - 1) as u32
        }
    }

    pub fn free_elem(&mut self, e: ElemId) {
        self.free.push(e);
    }

    fn pull(&mut self, t: u32) {
        let (l, r) = (self.elems[t as usize].left, self.elems[t as usize].right);
        let mut cnt = 1u32;
        let d = self.elems[t as usize].delta as i32;
        let md = self.elems[t as usize].mdelta as i32;
        let (mut wsum, mut wmin, mut msum, mut mmin, mut ropen_cnt);
        if l != NIL {
            let ln = &self.elems[l as usize];
            cnt += ln.cnt;
            wsum = ln.wsum;
            wmin = ln.wmin.min(ln.wsum + d);
            msum = ln.msum;
            mmin = ln.mmin.min(ln.msum + md);
            ropen_cnt = ln.ropen_cnt;
        } else {
            wsum = 0;
            wmin = d;
            msum = 0;
            mmin = md;
            ropen_cnt = 0;
        }
        wsum += d;
        msum += md;
        ropen_cnt += self.elems[t as usize].ropen as u32;
        if r != NIL {
            let rn = &self.elems[r as usize];
            cnt += rn.cnt;
            wmin = wmin.min(wsum + rn.wmin);
            wsum += rn.wsum;
            mmin = mmin.min(msum + rn.mmin);
            msum += rn.msum;
            ropen_cnt += rn.ropen_cnt;
        }
        let e = &mut self.elems[t as usize];
        e.cnt = cnt;
        e.wsum = wsum;
        e.wmin = wmin;
        e.msum = msum;
        e.mmin = mmin;
        e.ropen_cnt = ropen_cnt;
    }

    fn set_left(&mut self, p: u32, c: u32) {
        self.elems[p as usize].left = c;
        if c != NIL {
            self.elems[c as usize].parent = p;
        }
    }

    fn set_right(&mut self, p: u32, c: u32) {
        self.elems[p as usize].right = c;
        if c != NIL {
            self.elems[c as usize].parent = p;
        }
    }

    fn size(&self, t: u32) -> u32 {
        if t == NIL { 0 } else { self.elems[t as usize].cnt }
    }

    /// (first k elements, rest)
    pub fn split_at(&mut self, t: u32, k: u32) -> (u32, u32) {
        if t == NIL {
            return (NIL, NIL);
        }
        self.tick();
        let l = self.elems[t as usize].left;
        let ls = self.size(l);
        if k <= ls {
            let (a, b) = self.split_at(l, k);
            self.set_left(t, b);
            self.pull(t);
            self.elems[t as usize].parent = NIL;
            if a != NIL {
                self.elems[a as usize].parent = NIL;
            }
            (a, t)
        } else {
            let r = self.elems[t as usize].right;
            let (a, b) = self.split_at(r, k - ls - 1);
            self.set_right(t, a);
            self.pull(t);
            self.elems[t as usize].parent = NIL;
            if b != NIL {
                self.elems[b as usize].parent = NIL;
            }
            (t, b)
        }
    }

    pub fn merge(&mut self, a: u32, b: u32) -> u32 {
        if a == NIL {
            if b != NIL {
                self.elems[b as usize].parent = NIL;
            }
            return b;
        }
        if b == NIL {
            self.elems[a as usize].parent = NIL;
            return a;
        }
        self.tick();
        if self.elems[a as usize].prio > self.elems[b as usize].prio {
            let ar = self.elems[a as usize].right;
            let m = self.merge(ar, b);
            self.set_right(a, m);
            self.pull(a);
            self.elems[a as usize].parent = NIL;
            a
        } else {
            let bl = self.elems[b as usize].left;
            let m = self.merge(a, bl);
            self.set_left(b, m);
            self.pull(b);
            self.elems[b as usize].parent = NIL;
            b
        }
    }

    /// 1-based position of an element (climbs to the root).
    pub fn pos(&self, e: ElemId) -> u32 {
        let mut acc = self.size(self.elems[e as usize].left) + 1;
        let mut cur = e;
        loop {
            self.tick();
            let p = self.elems[cur as usize].parent;
            if p == NIL {
                break;
            }
            if self.elems[p as usize].right == cur {
                acc += self.size(self.elems[p as usize].left) + 1;
            }
            cur = p;
        }
        acc
    }

    pub fn elem_at(&self, pos: u32) -> Option<ElemId> {
        if pos == 0 || pos > self.len() as u32 {
            return None;
        }
        let mut t = self.root;
        let mut k = pos;
        loop {
            self.tick();
            let ls = self.size(self.elems[t as usize].left);
            if k <= ls {
                t = self.elems[t as usize].left;
            } else if k == ls + 1 {
                return Some(t);
            } else {
                k -= ls + 1;
                t = self.elems[t as usize].right;
            }
        }
    }

    /// Sum of deltas over positions [1..=pos].
    pub fn prefix_wsum(&self, pos: u32) -> i32 {
        debug_assert!(pos <= self.len() as u32);
        let mut t = self.root;
        let mut k = pos;
        let mut acc = 0i32;
        while t != NIL && k > 0 {
            self.tick();
            let n = &self.elems[t as usize];
            let ls = self.size(n.left);
            if k < ls {
                t = n.left;
            } else if k == ls {
                acc += if n.left != NIL { self.elems[n.left as usize].wsum } else { 0 };
                break;
            } else {
                acc += if n.left != NIL { self.elems[n.left as usize].wsum } else { 0 };
                acc += n.delta as i32;
                k -= ls + 1;
                t = n.right;
            }
        }
        acc
    }

    /// Count of weight-1 opens in positions [1..=pos].
    pub fn ropen_prefix(&self, pos: u32) -> u32 {
        let mut t = self.root;
        let mut k = pos;
        let mut acc = 0u32;
        while t != NIL && k > 0 {
            self.tick();
            let n = &self.elems[t as usize];
            let ls = self.size(n.left);
            if k < ls {
                t = n.left;
            } else if k == ls {
                acc += if n.left != NIL { self.elems[n.left as usize].ropen_cnt } else { 0 };
                break;
            } else {
                acc += if n.left != NIL { self.elems[n.left as usize].ropen_cnt } else { 0 };
                acc += n.ropen as u32;
                k -= ls + 1;
                t = n.right;
            }
        }
        acc
    }

    /// Rightmost position p <= bound with prefix_wsum(p) <= target.
    pub fn rightmost_prefix_le(&self, bound: u32, target: i32) -> Option<u32> {
        fn unbounded(tour: &Tour, t: u32, off: u32, base: i32, target: i32) -> Option<u32> {
            // rightmost position in subtree t with prefix <= target;
            // base = prefix sum before the subtree
            let mut t = t;
            let mut off = off;
            let mut base = base;
            loop {
                if t == NIL {
                    return None;
                }
                tour.tick();
                let n = &tour.elems[t as usize];
                let ls = tour.size(n.left);
                let lsum = if n.left != NIL { tour.elems[n.left as usize].wsum } else { 0 };
                let rmin = if n.right != NIL { tour.elems[n.right as usize].wmin } else { i32::MAX };
                if n.right != NIL && base + lsum + n.delta as i32 + rmin <= target {
                    off += ls + 1;
                    base += lsum + n.delta as i32;
                    t = n.right;
                    continue;
                }
                if base + lsum + n.delta as i32 <= target {
                    return Some(off + ls + 1);
                }
                if n.left != NIL && base + tour.elems[n.left as usize].wmin <= target {
                    t = n.left;
                    continue;
                }
                return None;
            }
        }
        fn bounded(tour: &Tour, t: u32, off: u32, base: i32, bound: u32, target: i32) -> Option<u32> {
            if t == NIL {
                return None;
            }
            tour.tick();
            let n = &tour.elems[t as usize];
            let ls = tour.size(n.left);
            let epos = off + ls + 1;
            let lsum = if n.left != NIL { tour.elems[n.left as usize].wsum } else { 0 };
            if epos <= bound {
                // right side first (bounded there), then elem, then left
                if let Some(p) =
                    bounded(tour, n.right, epos, base + lsum + n.delta as i32, bound, target)
                {
                    return Some(p);
                }
                if base + lsum + n.delta as i32 <= target {
                    return Some(epos);
                }
                unbounded(tour, n.left, off, base, target)
            } else {
                bounded(tour, n.left, off, base, bound, target)
            }
        }
        bounded(self, self.root, 0, 0, bound, target)
    }

    /// Minimum prefix sum over positions in [lo..=hi].
    pub fn range_min_prefix(&self, lo: u32, hi: u32) -> i32 {
        fn go(tour: &Tour, t: u32, off: u32, base: i32, lo: u32, hi: u32) -> i32 {
            if t == NIL {
                return i32::MAX;
            }
            tour.tick();
            let n = &tour.elems[t as usize];
            let begin = off + 1;
            let end = off + n.cnt;
            if lo <= begin && end <= hi {
                return base + n.wmin;
            }
            if end < lo || begin > hi {
                return i32::MAX;
            }
            let ls = tour.size(n.left);
            let lsum = if n.left != NIL { tour.elems[n.left as usize].wsum } else { 0 };
            let epos = off + ls + 1;
            let mut best = go(tour, n.left, off, base, lo, hi);
            if lo <= epos && epos <= hi {
                best = best.min(base + lsum + n.delta as i32);
            }
            best = best.min(go(tour, n.right, epos, base + lsum + n.delta as i32, lo, hi));
            best
        }
        go(self, self.root, 0, 0, lo, hi)
    }

    /// Detaches [l..=r] and returns its root.
    pub fn extract(&mut self, l: u32, r: u32) -> u32 {
        let (a, b) = self.split_at(self.root, l - 1);
        let (m, c) = self.split_at(b, r - l + 1);
        self.root = self.merge(a, c);
        m
    }

    /// Inserts a detached segment so its first element lands at position pos.
    pub fn insert_seg(&mut self, pos: u32, seg: u32) {
        let (a, b) = self.split_at(self.root, pos - 1);
        let am = self.merge(a, seg);
        self.root = self.merge(am, b);
    }

    /// Builds a tour from elements in order; returns their ids.
    pub fn build(&mut self, items: &[(u32, bool, u8)]) -> Vec<ElemId> {
        let ids: Vec<ElemId> =
            items.iter().map(|&(node, open, w)| self.alloc(node, open, w)).collect();
        // cartesian tree by priority over the sequence
        let mut stack: Vec<u32> = Vec::new();
        for &id in &ids {
            let mut last = NIL;
            while let Some(&top) = stack.last() {
                if self.elems[top as usize].prio < self.elems[id as usize].prio {
                    last = top;
                    stack.pop();
                } else {
                    break;
                }
            }
            if last != NIL {
                self.set_left(id, last);
            }
            if let Some(&top) = stack.last() {
                self.set_right(top, id);
            }
            stack.push(id);
        }
        let new_root = stack.first().copied().unwrap_or(NIL);
        // restore aggregates bottom-up along the right spine paths:
        // a full post-order pull is simplest and still O(n)
        fn pull_rec(tour: &mut Tour, t: u32) {
            if t == NIL {
                return;
            }
            let (l, r) = (tour.elems[t as usize].left, tour.elems[t as usize].right);
            pull_rec(tour, l);
            pull_rec(tour, r);
            tour.pull(t);
        }
        pull_rec(self, new_root);
        if new_root != NIL {
            self.elems[new_root as usize].parent = NIL;
        }
        debug_assert!(self.root == NIL, "build on a non-empty tour");
        self.root = new_root;
        ids
    }

    /// In-order element walk (test support).
    pub fn walk(&self) -> Vec<ElemId> {
        let mut out = Vec::with_capacity(self.len());
        fn go(tour: &Tour, t: u32, out: &mut Vec<ElemId>) {
            if t == NIL {
                return;
            }
            go(tour, tour.elems[t as usize].left, out);
            out.push(t);
            go(tour, tour.elems[t as usize].right, out);
        }
        go(self, self.root, &mut out);
        out
    }

    #[cfg(test)]
    fn check(&self) {
        fn go(tour: &Tour, t: u32, parent: u32) -> (u32, i32, i32, u32) {
            if t == NIL {
                return (0, 0, i32::MAX, 0);
            }
            let n = &tour.elems[t as usize];
            assert_eq!(n.parent, parent, "bad parent link");
            let (lc, ls, lm, lro) = go(tour, n.left, t);
            let (rc, rs, rm, rro) = go(tour, n.right, t);
            let cnt = lc + 1 + rc;
            let wsum = ls + n.delta as i32 + rs;
            let mut wmin = lm.min(ls + n.delta as i32);
            if rm != i32::MAX {
                wmin = wmin.min(ls + n.delta as i32 + rm);
            }
            let ro = lro + n.ropen as u32 + rro;
            assert_eq!(n.cnt, cnt);
            assert_eq!(n.wsum, wsum);
            assert_eq!(n.wmin, wmin);
            assert_eq!(n.ropen_cnt, ro);
            (cnt, wsum, wmin, ro)
        }
        go(self, self.root, NIL);
    }
}

impl Default for Tour {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn build_and_positions() {
        let mut t = Tour::new();
        // root(0) [ a(1) [ b(2) ] ] with unit weights except the root
        let items = vec![
            (0, true, 0),
            (1, true, 1),
            (2, true, 1),
            (2, false, 1),
            (1, false, 1),
            (0, false, 0),
        ];
        let ids = t.build(&items);
        t.check();
        for (i, &id) in ids.iter().enumerate() {
            assert_eq!(t.pos(id), i as u32 + 1);
        }
        assert_eq!(t.prefix_wsum(2), 1); // a open
        assert_eq!(t.prefix_wsum(3), 2); // b open
        assert_eq!(t.prefix_wsum(6), 0);
        assert_eq!(t.ropen_prefix(3), 2);
    }

    #[test]
    fn rightmost_prefix_searches() {
        let mut t = Tour::new();
        let items = vec![
            (0, true, 0),  // prefix 0
            (1, true, 1),  // 1
            (2, true, 1),  // 2
            (3, true, 1),  // 3
            (3, false, 1), // 2
            (2, false, 1), // 1
            (4, true, 1),  // 2
            (4, false, 1), // 1
            (1, false, 1), // 0
            (0, false, 0), // 0
        ];
        let ids = t.build(&items);
        // ancestor of node 3 (open at pos 4) at depth 1: rightmost p <= 4
        // with prefix <= 0 is pos 1, so the ancestor opens at pos 2 (node 1)
        let p = t.rightmost_prefix_le(4, 0).unwrap();
        assert_eq!(p, 1);
        assert_eq!(t.node_of(t.elem_at(p + 1).unwrap()), 1);
        // depth-2 ancestor of node 3: rightmost p <= 4 with prefix <= 1 is 2
        let p = t.rightmost_prefix_le(4, 1).unwrap();
        assert_eq!(t.node_of(t.elem_at(p + 1).unwrap()), 2);
        // lca(3,4): min prefix in (open(3), open(4)] = positions 5..7
        assert_eq!(t.range_min_prefix(5, 7), 1);
        let _ = ids;
    }

    #[test]
    fn random_edit_consistency() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let mut t = Tour::new();
        let items: Vec<(u32, bool, u8)> =
            (0..40).map(|i| (i, i % 2 == 0, (i % 3 == 0) as u8)).collect();
        let _ = t.build(&items);
        let mut mirror: Vec<(u32, bool, u8)> = items.clone();
        for _ in 0..200 {
            t.check();
            let n = mirror.len() as u32;
            if n >= 2 && rng.gen_bool(0.7) {
                let l = rng.gen_range(1..=n);
                let r = rng.gen_range(l..=n);
                let seg = t.extract(l, r);
                let cut: Vec<_> = mirror.drain((l as usize - 1)..(r as usize)).collect();
                let at = rng.gen_range(1..=mirror.len() as u32 + 1);
                t.insert_seg(at, seg);
                for (i, x) in cut.into_iter().enumerate() {
                    mirror.insert(at as usize - 1 + i, x);
                }
            }
            // verify sums against the mirror
            let pos = rng.gen_range(0..=mirror.len() as u32);
            let expect: i32 = mirror[..pos as usize]
                .iter()
                .map(|&(_, open, w)| if open { w as i32 } else { -(w as i32) })
                .sum();
            assert_eq!(t.prefix_wsum(pos), expect);
            let ro: u32 =
                mirror[..pos as usize].iter().map(|&(_, o, w)| (o && w == 1) as u32).sum();
            assert_eq!(t.ropen_prefix(pos), ro);
            // rightmost prefix search against a scan
            let bound = rng.gen_range(1..=mirror.len() as u32);
            let target = rng.gen_range(-2..6);
            let mut run = 0i32;
            let mut want = None;
            for (i, &(_, open, w)) in mirror.iter().enumerate().take(bound as usize) {
                run += if open { w as i32 } else { -(w as i32) };
                if run <= target {
                    want = Some(i as u32 + 1);
                }
            }
            assert_eq!(t.rightmost_prefix_le(bound, target), want);
        }
    }
}
