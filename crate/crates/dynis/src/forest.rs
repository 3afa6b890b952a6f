//! The greedy forest: one node per active interval plus an artificial root,
//! parent = leftmost compatible within the active set. Backed by a balanced
//! Euler tour, so path weights, weighted level ancestors, preorder ranks and
//! contiguous child-range moves are all O(log n).
//!
//! Weight-0 marker leaves stand for rounded entry states in part forests;
//! structural edits (`on_delete` / `on_insert`) are only legal on
//! marker-free forests.

use crate::domain::{Endpoint, Error, Interval, IntervalId, Result};
use crate::tour::{ElemId, Tour};
use std::collections::{BTreeMap, HashMap};
use std::ops::Bound::{Excluded, Included, Unbounded};

pub type NodeRef = u32;
pub const ROOT: NodeRef = 0;

#[derive(Clone, Debug)]
enum NodeKind {
    Root,
    Real(Interval),
    Marker(Endpoint),
}

#[derive(Clone, Debug)]
struct NodeData {
    kind: NodeKind,
    open: ElemId,
    close: ElemId,
}

pub struct GreedyForest {
    tour: Tour,
    nodes: Vec<NodeData>,
    free: Vec<NodeRef>,
    /// active (real) members keyed by end / by start
    by_end: BTreeMap<Endpoint, NodeRef>,
    by_start: BTreeMap<Endpoint, NodeRef>,
    ids: HashMap<IntervalId, NodeRef>,
    markers: BTreeMap<Endpoint, NodeRef>,
    /// counts child-range moves (amortization witness)
    reparent_invocations: u64,
    ops: u64,
}

impl GreedyForest {
    /// Builds the forest for a monotonic active set, with optional weight-0
    /// marker leaves (one per distinct busy endpoint).
    pub fn build(actives: &[Interval], marker_keys: &[Endpoint]) -> Result<Self> {
        let mut act = actives.to_vec();
        act.sort_by_key(|i| i.end);
        for w in act.windows(2) {
            if w[0].start >= w[1].start {
                return Err(Error::NotMonotonic);
            }
        }
        let starts: Vec<Endpoint> = act.iter().map(|i| i.start).collect();
        let parent_of = |key: Endpoint| -> usize {
            // first active with start >= key; act.len() means root
            starts.partition_point(|s| *s < key)
        };
        let n = act.len();
        // children of index p (or n for root), each child keyed for ≺ order
        #[derive(Clone, Copy)]
        enum Child {
            Real(usize),
            Marker(usize),
        }
        let mut children: Vec<Vec<(Endpoint, Child)>> = vec![Vec::new(); n + 1];
        for (i, iv) in act.iter().enumerate() {
            children[parent_of(iv.end)].push((iv.end, Child::Real(i)));
        }
        let mut marks: Vec<Endpoint> = marker_keys.to_vec();
        marks.sort();
        marks.dedup();
        for (j, t) in marks.iter().enumerate() {
            children[parent_of(*t)].push((*t, Child::Marker(j)));
        }
        for ch in children.iter_mut() {
            ch.sort_by_key(|(k, _)| *k);
        }
        // preallocate node slots: 0 = root, 1..=n reals, then markers
        let mut forest = GreedyForest {
            tour: Tour::new(),
            nodes: Vec::with_capacity(n + marks.len() + 1),
            free: Vec::new(),
            by_end: BTreeMap::new(),
            by_start: BTreeMap::new(),
            ids: HashMap::with_capacity(n),
            markers: BTreeMap::new(),
            reparent_invocations: 0,
            ops: 0,
        };
        let dummy = NodeData { kind: NodeKind::Root, open: 0, close: 0 };
        forest.nodes.push(dummy.clone());
        for iv in &act {
            forest.nodes.push(NodeData { kind: NodeKind::Real(*iv), open: 0, close: 0 });
        }
        for t in &marks {
            forest.nodes.push(NodeData { kind: NodeKind::Marker(*t), open: 0, close: 0 });
        }
        let real_ref = |i: usize| (i + 1) as NodeRef;
        let marker_ref = |j: usize| (n + 1 + j) as NodeRef;
        // iterative preorder emit: (node, weight) opens, children in ≺ order
        let mut items: Vec<(u32, bool, u8)> = Vec::with_capacity(2 * (n + marks.len() + 1));
        let mut open_at: Vec<usize> = vec![0; forest.nodes.len()];
        let mut close_at: Vec<usize> = vec![0; forest.nodes.len()];
        struct Frame {
            node: NodeRef,
            child_list: usize, // index into children, n+1 = none (markers)
            next: usize,
        }
        let mut stack = vec![Frame { node: ROOT, child_list: n, next: 0 }];
        open_at[ROOT as usize] = items.len();
        items.push((ROOT, true, 0));
        while let Some(top) = stack.last_mut() {
            let list = top.child_list;
            if list <= n && top.next < children[list].len() {
                let (_, c) = children[list][top.next];
                top.next += 1;
                match c {
                    Child::Real(i) => {
                        let r = real_ref(i);
                        open_at[r as usize] = items.len();
                        items.push((r, true, 1));
                        stack.push(Frame { node: r, child_list: i, next: 0 });
                    }
                    Child::Marker(j) => {
                        let m = marker_ref(j);
                        open_at[m as usize] = items.len();
                        items.push((m, true, 0));
                        close_at[m as usize] = items.len();
                        items.push((m, false, 0));
                    }
                }
            } else {
                let node = top.node;
                let w = if node == ROOT { 0 } else { 1 };
                close_at[node as usize] = items.len();
                items.push((node, false, w));
                stack.pop();
            }
        }
        let ids = forest.tour.build(&items);
        for (nref, nd) in forest.nodes.iter_mut().enumerate() {
            nd.open = ids[open_at[nref]];
            nd.close = ids[close_at[nref]];
        }
        for (i, iv) in act.iter().enumerate() {
            forest.by_end.insert(iv.end, real_ref(i));
            forest.by_start.insert(iv.start, real_ref(i));
            forest.ids.insert(iv.id, real_ref(i));
        }
        for (j, t) in marks.iter().enumerate() {
            forest.markers.insert(*t, marker_ref(j));
        }
        Ok(forest)
    }

    pub fn len(&self) -> usize {
        self.by_end.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_end.is_empty()
    }

    pub fn elementary_ops(&self) -> u64 {
        self.tour.elementary_ops() + self.ops
    }

    pub fn reparent_invocations(&self) -> u64 {
        self.reparent_invocations
    }

    pub fn node_of(&self, id: IntervalId) -> Option<NodeRef> {
        self.ids.get(&id).copied()
    }

    pub fn marker_at(&self, busy: Endpoint) -> Option<NodeRef> {
        self.markers.get(&busy).copied()
    }

    pub fn is_marker(&self, v: NodeRef) -> bool {
        matches!(self.nodes[v as usize].kind, NodeKind::Marker(_))
    }

    pub fn interval(&self, v: NodeRef) -> Option<&Interval> {
        match &self.nodes[v as usize].kind {
            NodeKind::Real(iv) => Some(iv),
            _ => None,
        }
    }

    /// Busy-until endpoint of a node: interval end for reals, key for markers.
    pub fn busy(&self, v: NodeRef) -> Endpoint {
        match &self.nodes[v as usize].kind {
            NodeKind::Real(iv) => iv.end,
            NodeKind::Marker(t) => *t,
            NodeKind::Root => Endpoint::POS_INF,
        }
    }

    fn weight(&self, v: NodeRef) -> u32 {
        matches!(self.nodes[v as usize].kind, NodeKind::Real(_)) as u32
    }

    /// Number of weight-1 nodes on the path v -> root, inclusive.
    pub fn depth(&self, v: NodeRef) -> u32 {
        if v == ROOT {
            return 0;
        }
        self.tour.prefix_wsum(self.tour.pos(self.nodes[v as usize].open)) as u32
    }

    /// (count of real intervals on the path to the root including v,
    ///  shallowest real interval on that path).
    pub fn path_stats(&self, v: NodeRef) -> (u64, Option<NodeRef>) {
        let d = self.depth(v);
        if d == 0 {
            return (0, None);
        }
        (d as u64, Some(self.level_ancestor(v, 1).expect("depth >= 1")))
    }

    /// The real ancestor of v at weighted depth d (v itself when d equals
    /// its depth and v is real).
    pub fn level_ancestor(&self, v: NodeRef, d: u32) -> Result<NodeRef> {
        let depth = self.depth(v);
        if d == 0 || d > depth {
            return Err(Error::DepthOutOfRange { depth: d as usize, max: depth as usize });
        }
        let pos = self.tour.pos(self.nodes[v as usize].open);
        let p = self
            .tour
            .rightmost_prefix_le(pos, d as i32 - 1)
            .expect("prefix 0 exists at the root open");
        let elem = self.tour.elem_at(p + 1).expect("ancestor open follows the dip");
        debug_assert!(self.tour.is_open(elem));
        Ok(self.tour.node_of(elem))
    }

    /// Parent node (the artificial root for top-level nodes).
    pub fn parent(&self, v: NodeRef) -> NodeRef {
        let d = self.depth(v);
        let pd = d - self.weight(v).min(d);
        if pd == 0 {
            ROOT
        } else {
            self.level_ancestor(v, pd).expect("parent depth is valid")
        }
    }

    /// Lowest common ancestor (markers are leaves, so the result is real or
    /// the root).
    pub fn lca(&self, a: NodeRef, b: NodeRef) -> NodeRef {
        if a == b {
            return a;
        }
        let pa = self.tour.pos(self.nodes[a as usize].open);
        let pb = self.tour.pos(self.nodes[b as usize].open);
        let (first, fpos, other, opos) =
            if pa < pb { (a, pa, b, pb) } else { (b, pb, a, pa) };
        if self.tour.pos(self.nodes[first as usize].close) > opos {
            return first; // first's subtree contains the other node
        }
        let dmin = self.tour.range_min_prefix(fpos + 1, opos);
        if dmin <= 0 {
            return ROOT;
        }
        self.level_ancestor(other, dmin as u32).expect("dmin is a valid ancestor depth")
    }

    /// Preorder rank over real nodes (root is 0).
    pub fn preorder(&self, v: NodeRef) -> u32 {
        self.tour.ropen_prefix(self.tour.pos(self.nodes[v as usize].open))
    }

    /// (depth, preorder, subtree preorder window).
    pub fn node_info(&self, v: NodeRef) -> (u32, u32, (u32, u32)) {
        let d = self.depth(v);
        let pre = self.preorder(v);
        let hi = self.tour.ropen_prefix(self.tour.pos(self.nodes[v as usize].close));
        (d, pre, (pre, hi))
    }

    /// Active members in `≺` order (test support).
    pub fn members(&self) -> Vec<Interval> {
        self.by_end.values().map(|v| *self.interval(*v).unwrap()).collect()
    }

    /// Active `≺`-successor of an end bound.
    pub fn member_after_end(&self, bound: Endpoint) -> Option<NodeRef> {
        self.by_end.range((Excluded(bound), Unbounded)).next().map(|(_, v)| *v)
    }

    pub fn member_before_end(&self, bound: Endpoint) -> Option<NodeRef> {
        self.by_end.range((Unbounded, Excluded(bound))).next_back().map(|(_, v)| *v)
    }

    /// First active member with start >= bound (the LC within this forest).
    pub fn lc_member(&self, bound: Endpoint) -> Option<NodeRef> {
        self.by_start.range((Included(bound), Unbounded)).next().map(|(_, v)| *v)
    }

    /// Child key range of a parent: children of p are exactly the members
    /// with end in (lo, hi]. For the root, lo is the last member's start.
    fn child_bounds(&self, p: NodeRef) -> (Option<Endpoint>, Endpoint) {
        if p == ROOT {
            let lo = self.by_end.iter().next_back().map(|(_, v)| self.interval(*v).unwrap().start);
            (lo, Endpoint::POS_INF)
        } else {
            let iv = self.interval(p).expect("marker nodes have no children");
            let lo = self
                .by_end
                .range((Unbounded, Excluded(iv.end)))
                .next_back()
                .map(|(_, v)| self.interval(*v).unwrap().start);
            (lo, iv.start)
        }
    }

    /// First child of p with end > bound (by the member-range derivation).
    fn first_child_after(&self, p: NodeRef, bound: Endpoint) -> Option<NodeRef> {
        let (lo, hi) = self.child_bounds(p);
        let lo_key = match lo {
            Some(l) => l.max(bound),
            None => bound,
        };
        self.by_end.range((Excluded(lo_key), Included(hi))).next().map(|(_, v)| *v)
    }

    /// Splices a detached segment as children of p, before p's first child
    /// ending after `last_end` (or as the last block). Only valid when the
    /// member map reflects the tour for p's children past `last_end`.
    fn splice_under(&mut self, p: NodeRef, seg: u32, last_end: Endpoint) {
        let at = match self.first_child_after(p, last_end) {
            Some(c) => self.tour.pos(self.nodes[c as usize].open),
            None => self.tour.pos(self.nodes[p as usize].close),
        };
        self.tour.insert_seg(at, seg);
    }

    /// Splices a detached segment as the first children of p.
    fn splice_front(&mut self, p: NodeRef, seg: u32) {
        let at = self.tour.pos(self.nodes[p as usize].open) + 1;
        self.tour.insert_seg(at, seg);
    }

    /// Moves the contiguous child range [c_lo ..= c_hi] of one node under
    /// `new_parent`, preserving `≺` order.
    pub fn reparent_range(&mut self, c_lo: NodeRef, c_hi: NodeRef, new_parent: NodeRef) -> Result<()> {
        let pl = self.parent(c_lo);
        let ph = self.parent(c_hi);
        if pl != ph {
            return Err(Error::NonContiguousRange);
        }
        let lo_pos = self.tour.pos(self.nodes[c_lo as usize].open);
        let hi_pos = self.tour.pos(self.nodes[c_hi as usize].close);
        if lo_pos > hi_pos {
            return Err(Error::NonContiguousRange);
        }
        if self.busy(new_parent) <= self.busy(c_hi) && new_parent != ROOT {
            return Err(Error::NonContiguousRange);
        }
        let last_end = self.busy(c_hi);
        let seg = self.tour.extract(lo_pos, hi_pos);
        self.splice_under(new_parent, seg, last_end);
        self.reparent_invocations += 1;
        Ok(())
    }

    fn alloc_node(&mut self, kind: NodeKind, open: ElemId, close: ElemId) -> NodeRef {
        let nd = NodeData { kind, open, close };
        if let Some(r) = self.free.pop() {
            self.nodes[r as usize] = nd;
            r
        } else {
            self.nodes.push(nd);
            (self.nodes.len() - 1) as NodeRef
        }
    }

    /// Members with end in (lo, hi], as (first, last) nodes.
    fn member_range(&self, lo: Option<Endpoint>, hi: Endpoint) -> Option<(NodeRef, NodeRef)> {
        let lo_bound = match lo {
            Some(l) => Excluded(l),
            None => Unbounded,
        };
        let mut it = self.by_end.range((lo_bound, Included(hi)));
        let first = it.next().map(|(_, v)| *v)?;
        let last = it.next_back().map(|(_, v)| *v).unwrap_or(first);
        Some((first, last))
    }

    /// Handles the deletion of active interval `id`, given the intervals the
    /// active set reports as newly activated (all of which contained `id`).
    ///
    /// Exactly the children of the deleted node change parent: a contiguous
    /// prefix range goes to each activated interval in `≺` order (its start
    /// is the compatibility boundary) and the leftover suffix goes to the
    /// deleted node's active `≺`-successor.
    pub fn on_delete(&mut self, id: IntervalId, activated: &[Interval]) -> Result<()> {
        let v = self.node_of(id).ok_or(Error::UnknownId(id))?;
        let iv = *self.interval(v).expect("only real nodes are deleted");
        for w in activated.windows(2) {
            if w[0].end >= w[1].end {
                return Err(Error::InconsistentActivation);
            }
        }
        let fallback = self.member_after_end(iv.end); // None -> root
        for a in activated {
            if !(a.start <= iv.start && iv.end <= a.end) {
                return Err(Error::InconsistentActivation);
            }
            if let Some(f) = fallback {
                if a.end >= self.busy(f) {
                    return Err(Error::InconsistentActivation);
                }
            }
        }
        let pred_start =
            self.member_before_end(iv.end).map(|u| self.interval(u).unwrap().start);
        // partition the children of v at the activated starts
        let mut cut_points: Vec<Endpoint> = activated.iter().map(|a| a.start).collect();
        cut_points.push(iv.start);
        let mut segs: Vec<(u32, usize)> = Vec::new(); // (seg, target idx)
        let mut lo = pred_start;
        for (t, hi) in cut_points.iter().enumerate() {
            if let Some((first, last)) = self.member_range(lo, *hi) {
                let lp = self.tour.pos(self.nodes[first as usize].open);
                let hp = self.tour.pos(self.nodes[last as usize].close);
                let seg = self.tour.extract(lp, hp);
                segs.push((seg, t));
                self.reparent_invocations += 1;
            }
            lo = Some(*hi);
        }
        // remove v itself (now a leaf)
        let op = self.tour.pos(self.nodes[v as usize].open);
        let cl = self.tour.pos(self.nodes[v as usize].close);
        debug_assert_eq!(cl, op + 1, "deleted node must be a leaf by now");
        let dead = self.tour.extract(op, cl);
        self.free_two(dead);
        self.by_end.remove(&iv.end);
        self.by_start.remove(&iv.start);
        self.ids.remove(&id);
        self.free.push(v);
        // insert activated nodes in ≺ order; their parents are found among
        // old members (activated intervals pairwise overlap)
        let mut new_nodes: Vec<NodeRef> = Vec::with_capacity(activated.len());
        for a in activated {
            let open = self.tour.alloc(0, true, 1);
            let close = self.tour.alloc(0, false, 1);
            let node = self.alloc_node(NodeKind::Real(*a), open, close);
            self.tour.set_node(open, node);
            self.tour.set_node(close, node);
            let seg = self.tour.merge(open, close);
            let parent = self.lc_member(a.end).unwrap_or(ROOT);
            // detached (stolen) members all end at or before iv.start < a.end,
            // so the position bisect sees only attached members
            self.splice_under(parent, seg, a.end);
            self.by_end.insert(a.end, node);
            self.by_start.insert(a.start, node);
            self.ids.insert(a.id, node);
            new_nodes.push(node);
        }
        // splice the child segments: each target receives ends strictly below
        // its existing children, so blocks go to the front
        for (seg, t) in segs.into_iter().rev() {
            let target = if t < new_nodes.len() {
                new_nodes[t]
            } else {
                fallback.unwrap_or(ROOT)
            };
            self.splice_front(target, seg);
        }
        Ok(())
    }

    fn free_two(&mut self, seg: u32) {
        // seg holds exactly the two tour elements of a removed node
        let items = self.tour.seg_elems(seg);
        for e in items {
            self.tour.free_elem(e);
        }
    }

    /// Handles an insertion in insert-only mode, given the intervals the
    /// active set reports as deactivated (all of which contain `iv`).
    ///
    /// Every child of a deactivated container ends at or before the
    /// container's start <= iv.start, so all such children (and a range
    /// stolen from at most one surviving node) become children of `iv`.
    pub fn on_insert(&mut self, iv: Interval, deactivated: &[Interval]) -> Result<()> {
        if self.ids.contains_key(&iv.id) {
            return Err(Error::DuplicateId(iv.id));
        }
        // a born-inactive interval changes nothing
        let dominated = self
            .by_start
            .range((Excluded(iv.start), Unbounded))
            .next()
            .map_or(false, |(_, u)| self.interval(*u).unwrap().end < iv.end);
        if dominated {
            if !deactivated.is_empty() {
                return Err(Error::InconsistentActivation);
            }
            return Ok(());
        }
        for d in deactivated {
            if !(d.start <= iv.start && iv.end <= d.end) {
                return Err(Error::InconsistentActivation);
            }
        }
        let mut dead: Vec<NodeRef> = Vec::with_capacity(deactivated.len());
        for d in deactivated {
            dead.push(self.node_of(d.id).ok_or(Error::UnknownId(d.id))?);
        }
        // steal everything with end in (pred(iv).start, iv.start]: walk the
        // range grouped by current parent (one contiguous child run each)
        let pred_start =
            self.member_before_end(iv.end).map(|u| self.interval(u).unwrap().start);
        let mut stash: Vec<u32> = Vec::new();
        let lo_bound = match pred_start {
            Some(l) => Excluded(l),
            None => Unbounded,
        };
        let mut cur = self.by_end.range((lo_bound, Included(iv.start))).next().map(|(_, v)| *v);
        while let Some(c) = cur {
            let p = self.parent(c);
            let cap = if p == ROOT {
                iv.start
            } else {
                self.interval(p).map(|pi| pi.start).unwrap_or(Endpoint::POS_INF).min(iv.start)
            };
            let run_last = self
                .by_end
                .range((Included(self.busy(c)), Included(cap)))
                .next_back()
                .map(|(_, v)| *v)
                .expect("run contains at least c");
            let lp = self.tour.pos(self.nodes[c as usize].open);
            let hp = self.tour.pos(self.nodes[run_last as usize].close);
            let seg = self.tour.extract(lp, hp);
            stash.push(seg);
            self.reparent_invocations += 1;
            cur = self
                .by_end
                .range((Excluded(self.busy(run_last)), Included(iv.start)))
                .next()
                .map(|(_, v)| *v);
        }
        // deactivated containers are childless now: drop them
        for (d, &node) in deactivated.iter().zip(&dead) {
            self.by_end.remove(&d.end);
            self.by_start.remove(&d.start);
            self.ids.remove(&d.id);
            let op = self.tour.pos(self.nodes[node as usize].open);
            let cl = self.tour.pos(self.nodes[node as usize].close);
            debug_assert_eq!(cl, op + 1, "container still has children");
            let seg = self.tour.extract(op, cl);
            self.free_two(seg);
            self.free.push(node);
        }
        // assemble iv's node around the stash (already in ≺ order)
        let open = self.tour.alloc(0, true, 1);
        let close = self.tour.alloc(0, false, 1);
        let node = self.alloc_node(NodeKind::Real(iv), open, close);
        self.tour.set_node(open, node);
        self.tour.set_node(close, node);
        let mut seg = open;
        for s in &stash {
            seg = self.tour.merge(seg, *s);
        }
        seg = self.tour.merge(seg, close);
        let parent = self.lc_member(iv.end).unwrap_or(ROOT);
        self.splice_under(parent, seg, iv.end);
        self.by_end.insert(iv.end, node);
        self.by_start.insert(iv.start, node);
        self.ids.insert(iv.id, node);
        Ok(())
    }

    /// Marks or unmarks a node for nearest-marked-ancestor queries.
    pub fn set_mark(&mut self, v: NodeRef, marked: bool) {
        let nd = &self.nodes[v as usize];
        let (open, close) = (nd.open, nd.close);
        let d = if marked { 1 } else { 0 };
        self.tour.set_mdelta(open, d);
        self.tour.set_mdelta(close, -d);
    }

    /// Deepest marked node on the path v -> root, including v itself.
    pub fn nearest_marked_ancestor(&self, v: NodeRef) -> Option<NodeRef> {
        let pos = self.tour.pos(self.nodes[v as usize].open);
        let marked_depth = self.tour.prefix_msum(pos);
        if marked_depth <= 0 {
            return None;
        }
        let p = self
            .tour
            .rightmost_mprefix_le(pos, marked_depth - 1)
            .expect("mark prefix starts at zero");
        let elem = self.tour.elem_at(p + 1).expect("marked open follows the dip");
        debug_assert!(self.tour.is_open(elem));
        Some(self.tour.node_of(elem))
    }

    /// Full parent map (test support): interval id -> parent id (None = root).
    pub fn parent_map(&self) -> Vec<(IntervalId, Option<IntervalId>)> {
        let mut out: Vec<(IntervalId, Option<IntervalId>)> = self
            .ids
            .iter()
            .map(|(id, v)| {
                let p = self.parent(*v);
                (*id, self.interval(p).map(|iv| iv.id))
            })
            .collect();
        out.sort_by_key(|(id, _)| *id);
        out
    }
}
