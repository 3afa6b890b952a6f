//! Shared per-part machinery for the multi-machine engines: the part
//! universe (real intervals plus one zero-length pseudo marker per distinct
//! start and one inert marker), the part forest, rounding of entry states,
//! `Next`-state stepping and the greedy-tree skip over all-active states.

use crate::domain::{Endpoint, Interval};
use crate::forest::{GreedyForest, NodeRef, ROOT};
use std::collections::HashMap;

/// A part-universe member: a real interval (by `≺` position) or a pseudo
/// marker (by key position; the last pseudo is the inert +inf marker).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Member {
    Real(u32),
    Pseudo(u32),
}

/// Static min-end queries over a point set: minimum end among points with
/// start >= x and end > y.
pub struct MinEndAboveRight {
    starts: Vec<Endpoint>,
    /// segment tree over start-sorted points, each node holding its ends
    /// sorted ascending
    nodes: Vec<Vec<(Endpoint, u32)>>,
    n: usize,
}

impl MinEndAboveRight {
    pub fn build(points: &[(Endpoint, Endpoint, u32)]) -> Self {
        let mut pts = points.to_vec();
        pts.sort_by_key(|p| p.0);
        let n = pts.len();
        let starts = pts.iter().map(|p| p.0).collect();
        let mut nodes = vec![Vec::new(); 2 * n.max(1)];
        for (i, p) in pts.iter().enumerate() {
            let mut k = i + n;
            while k >= 1 {
                nodes[k].push((p.1, p.2));
                if k == 1 {
                    break;
                }
                k /= 2;
            }
        }
        for v in nodes.iter_mut() {
            v.sort();
        }
        MinEndAboveRight { starts, nodes, n }
    }

    /// Minimum end strictly above `y` among points with start >= `x`.
    pub fn query(&self, x: Endpoint, y: Endpoint) -> Option<(Endpoint, u32)> {
        if self.n == 0 {
            return None;
        }
        let mut lo = self.starts.partition_point(|s| *s < x) + self.n;
        let mut hi = self.n + self.n; // exclusive
        let mut best: Option<(Endpoint, u32)> = None;
        let mut consider = |v: &Vec<(Endpoint, u32)>| {
            let k = v.partition_point(|(e, _)| *e <= y);
            if k < v.len() && best.map_or(true, |b| v[k] < b) {
                best = Some(v[k]);
            }
        };
        while lo < hi {
            if lo & 1 == 1 {
                consider(&self.nodes[lo]);
                lo += 1;
            }
            if hi & 1 == 1 {
                hi -= 1;
                consider(&self.nodes[hi]);
            }
            lo /= 2;
            hi /= 2;
        }
        best
    }
}

pub struct PartUniverse {
    /// real part intervals in `≺` order
    pub reals: Vec<Interval>,
    pub active: Vec<bool>,
    /// pseudo keys sorted ascending; the last entry is POS_INF (inert)
    pub pseudo_keys: Vec<Endpoint>,
    pub forest: GreedyForest,
    /// per real: the latest active interval nested inside it (for inactive
    /// reals this always exists)
    pub latest_active_inside: Vec<Option<u32>>,
    /// earliest active real ending strictly after x, for any forest node x
    pub succ_active: HashMap<Member, Option<u32>>,
    /// earliest active real after x not on x's root path
    pub escape_active: HashMap<Member, Option<u32>>,
    pub mear_all: MinEndAboveRight,
    pub mear_inactive: MinEndAboveRight,
    /// universe index in busy-until order (reals and pseudos interleaved)
    pub order_index: HashMap<Member, u32>,
    active_by_end: Vec<u32>,
    id_to_idx: HashMap<crate::domain::IntervalId, u32>,
}

impl PartUniverse {
    pub fn build(intervals: &[Interval]) -> Self {
        let mut reals = intervals.to_vec();
        reals.sort_by_key(|iv| iv.end);
        let n = reals.len();
        // activity scan: active iff no earlier-ending member starts later
        let mut active = vec![true; n];
        let mut max_start = Endpoint::NEG_INF;
        for (i, iv) in reals.iter().enumerate() {
            if iv.start < max_start {
                active[i] = false;
            }
            max_start = max_start.max(iv.start);
        }
        let actives: Vec<Interval> =
            reals.iter().zip(&active).filter(|(_, a)| **a).map(|(iv, _)| *iv).collect();
        let mut pseudo_keys: Vec<Endpoint> = reals.iter().map(|iv| iv.start).collect();
        pseudo_keys.sort();
        pseudo_keys.dedup();
        pseudo_keys.push(Endpoint::POS_INF);
        let forest = GreedyForest::build(&actives, &pseudo_keys).expect("actives are monotonic");
        // latest active inside: the last active ending before f_i, provided
        // it starts after s_i
        let mut latest_active_inside = vec![None; n];
        let mut last_active: Option<u32> = None;
        for i in 0..n {
            if let Some(j) = last_active {
                if reals[j as usize].start > reals[i].start {
                    latest_active_inside[i] = Some(j);
                }
            }
            if active[i] {
                last_active = Some(i as u32);
            }
        }
        let active_by_end: Vec<u32> =
            (0..n as u32).filter(|i| active[*i as usize]).collect();
        // succ_active per member
        let succ_of_end = |bound: Endpoint| -> Option<u32> {
            let k = active_by_end.partition_point(|i| reals[*i as usize].end <= bound);
            active_by_end.get(k).copied()
        };
        let mut members: Vec<(Endpoint, Member)> = Vec::with_capacity(n + pseudo_keys.len());
        for (i, iv) in reals.iter().enumerate() {
            members.push((iv.end, Member::Real(i as u32)));
        }
        for (k, t) in pseudo_keys.iter().enumerate() {
            members.push((*t, Member::Pseudo(k as u32)));
        }
        members.sort_by_key(|(b, _)| *b);
        let order_index: HashMap<Member, u32> =
            members.iter().enumerate().map(|(k, (_, m))| (*m, k as u32)).collect();
        let mut succ_active: HashMap<Member, Option<u32>> = HashMap::with_capacity(members.len());
        for (busy, m) in &members {
            succ_active.insert(*m, succ_of_end(*busy));
        }
        let id_to_idx: HashMap<crate::domain::IntervalId, u32> =
            reals.iter().enumerate().map(|(i, iv)| (iv.id, i as u32)).collect();
        // escape DP in decreasing busy order: escape(x) = succ_active(x) when
        // that is not x's parent (hence off the path), else escape(parent)
        let mut escape_active: HashMap<Member, Option<u32>> = HashMap::with_capacity(members.len());
        for (_, m) in members.iter().rev() {
            let node = match m {
                Member::Real(i) => {
                    if !active[*i as usize] {
                        escape_active.insert(*m, None);
                        continue;
                    }
                    forest.node_of(reals[*i as usize].id).unwrap()
                }
                Member::Pseudo(k) => forest.marker_at(pseudo_keys[*k as usize]).unwrap(),
            };
            let esc = match succ_active[m] {
                None => None,
                Some(s) => {
                    let parent = forest.parent(node);
                    let parent_id =
                        if parent == ROOT { None } else { forest.interval(parent).map(|iv| iv.id) };
                    if parent_id == Some(reals[s as usize].id) {
                        escape_active[&Member::Real(s)]
                    } else {
                        Some(s)
                    }
                }
            };
            escape_active.insert(*m, esc);
        }
        let all_points: Vec<(Endpoint, Endpoint, u32)> =
            reals.iter().enumerate().map(|(i, iv)| (iv.start, iv.end, i as u32)).collect();
        let inactive_points: Vec<(Endpoint, Endpoint, u32)> = reals
            .iter()
            .enumerate()
            .filter(|(i, _)| !active[*i])
            .map(|(i, iv)| (iv.start, iv.end, i as u32))
            .collect();
        PartUniverse {
            reals,
            active,
            pseudo_keys,
            forest,
            latest_active_inside,
            succ_active,
            escape_active,
            mear_all: MinEndAboveRight::build(&all_points),
            mear_inactive: MinEndAboveRight::build(&inactive_points),
            order_index,
            active_by_end,
            id_to_idx,
        }
    }

    pub fn len(&self) -> usize {
        self.reals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reals.is_empty()
    }

    pub fn busy(&self, m: Member) -> Endpoint {
        match m {
            Member::Real(i) => self.reals[i as usize].end,
            Member::Pseudo(k) => self.pseudo_keys[k as usize],
        }
    }

    /// Start for compatibility tests; pseudos act as (-inf, t) intervals.
    pub fn start_sem(&self, m: Member) -> Endpoint {
        match m {
            Member::Real(i) => self.reals[i as usize].start,
            Member::Pseudo(_) => Endpoint::NEG_INF,
        }
    }

    pub fn is_active(&self, m: Member) -> bool {
        match m {
            Member::Real(i) => self.active[i as usize],
            Member::Pseudo(_) => true,
        }
    }

    pub fn node_of(&self, m: Member) -> Option<NodeRef> {
        match m {
            Member::Real(i) => {
                if self.active[i as usize] {
                    self.forest.node_of(self.reals[i as usize].id)
                } else {
                    None
                }
            }
            Member::Pseudo(k) => self.forest.marker_at(self.pseudo_keys[k as usize]),
        }
    }

    pub fn member_of_node(&self, node: NodeRef) -> Member {
        match self.forest.interval(node) {
            Some(iv) => Member::Real(self.id_to_idx[&iv.id]),
            None => {
                let t = self.forest.busy(node);
                let k = self.pseudo_keys.partition_point(|x| *x < t);
                Member::Pseudo(k as u32)
            }
        }
    }

    pub fn idx(&self, m: Member) -> u32 {
        self.order_index[&m]
    }

    /// Rounds a busy-until up to the part's pseudo at the earliest start at
    /// or after it (the inert marker when none exists).
    pub fn round(&self, e: Endpoint) -> Member {
        let k = self.pseudo_keys.partition_point(|t| *t < e);
        Member::Pseudo(k.min(self.pseudo_keys.len() - 1) as u32)
    }

    /// Earliest active real ending strictly after `bound`.
    pub fn active_after(&self, bound: Endpoint) -> Option<u32> {
        let k = self.active_by_end.partition_point(|i| self.reals[*i as usize].end <= bound);
        self.active_by_end.get(k).copied()
    }
}

/// One machine of an in-flight part query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Comp {
    pub member: Member,
    /// true once this machine accepted something inside the part
    pub accepted: bool,
}

/// Sorts components by busy-until.
pub fn sort_comps(u: &PartUniverse, comps: &mut [Comp]) {
    comps.sort_by_key(|c| u.busy(c.member));
}

/// One `Next` step: per machine, the leftmost compatible interval not held
/// by the state and ending past the time floor (the last acceptance time);
/// the earliest-ending of those is accepted and replaces the busiest
/// compatible machine. Returns the accepted real index or None when the part
/// is exhausted.
pub fn next_state(u: &PartUniverse, comps: &mut Vec<Comp>, floor: Endpoint) -> Option<u32> {
    let mut best: Option<(Endpoint, u32)> = None;
    for c in comps.iter() {
        let cutoff = u.busy(c.member);
        let mut bound = floor;
        loop {
            match u.mear_all.query(cutoff, bound) {
                None => break,
                Some((e, k)) => {
                    if comps.iter().any(|x| x.member == Member::Real(k)) {
                        bound = e; // look past a held component
                        continue;
                    }
                    if best.map_or(true, |b| (e, k) < b) {
                        best = Some((e, k));
                    }
                    break;
                }
            }
        }
    }
    let (_, k) = best?;
    let kiv = u.reals[k as usize];
    // busiest compatible machine; markers lose ties to real components (a
    // marker rounds up a pre-part busy time, which precedes any in-part end)
    let slot = comps
        .iter()
        .enumerate()
        .filter(|(_, c)| u.busy(c.member) <= kiv.start)
        .max_by_key(|(_, c)| (matches!(c.member, Member::Real(_)), u.busy(c.member)))
        .map(|(i, _)| i)
        .expect("accepted interval is compatible with some machine");
    comps[slot] = Comp { member: Member::Real(k), accepted: true };
    Some(k)
}

/// Greedy-tree skip (all components active or markers): advances every chain
/// through its path nodes ending inside (floor, f*) — past the time floor and
/// before the earliest pairwise meeting interval — and returns the number of
/// intervals accepted on the way. For two machines the meeting interval is
/// the pair LCA; duplicated markers meet at their parent.
pub fn skip_common_ancestor(u: &PartUniverse, comps: &mut [Comp], floor: Endpoint) -> u64 {
    let nodes: Vec<NodeRef> =
        comps.iter().map(|c| u.node_of(c.member).expect("component is active")).collect();
    let meet_key = |n: NodeRef| -> Endpoint {
        if n == ROOT {
            Endpoint::POS_INF
        } else {
            u.forest.busy(n)
        }
    };
    let mut star: Option<NodeRef> = None;
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            // two machines on the same marker contend for its parent first
            let l = if nodes[i] == nodes[j] {
                u.forest.parent(nodes[i])
            } else {
                u.forest.lca(nodes[i], nodes[j])
            };
            if star.map_or(true, |cur| meet_key(l) < meet_key(cur)) {
                star = Some(l);
            }
        }
    }
    let star = match star {
        Some(s) => s,
        None => return 0,
    };
    let f_star = meet_key(star);
    if f_star <= floor {
        return 0;
    }
    // consumed-candidate guard: if some machine's earliest pending candidate
    // ends at or before the floor, that candidate was already processed and
    // the chain walk is no longer faithful; the caller single-steps instead
    for c in comps.iter() {
        let cutoff = u.busy(c.member);
        let mut bound = Endpoint::NEG_INF;
        loop {
            match u.mear_all.query(cutoff, bound) {
                None => break,
                Some((e, k)) => {
                    if comps.iter().any(|x| x.member == Member::Real(k)) {
                        bound = e;
                        continue;
                    }
                    if e <= floor {
                        return 0;
                    }
                    break;
                }
            }
        }
    }
    let mut accepted = 0u64;
    for (c, node) in comps.iter_mut().zip(&nodes) {
        let depth = u.forest.depth(*node);
        if depth == 0 {
            continue; // marker under the root: nothing real on its path
        }
        // path reals with end in (floor, f_star): ancestor ends decrease
        // with depth, so the window is a depth range [d_hi, d_lo]
        let end_at = |d: u32| u.forest.busy(u.forest.level_ancestor(*node, d).unwrap());
        if end_at(depth) >= f_star {
            continue; // the component itself ends at or past the meeting point
        }
        let mut lo = 1u32;
        let mut hi = depth; // find min d with end(anc(d)) < f_star
        while lo < hi {
            let mid = (lo + hi) / 2;
            if end_at(mid) < f_star {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let d_hi = lo;
        // find max d with end(anc(d)) > floor (0 when even anc(1) fails)
        let d_lo = if end_at(1) > floor {
            let mut a = 1u32;
            let mut b = depth;
            while a < b {
                let mid = (a + b).div_ceil(2);
                if end_at(mid) > floor {
                    a = mid;
                } else {
                    b = mid - 1;
                }
            }
            a
        } else {
            0
        };
        if d_lo < d_hi {
            continue; // every pending path node was already consumed
        }
        // held real components end at or before the floor, so the counted
        // window never includes the component itself
        accepted += (d_lo - d_hi + 1) as u64;
        let target = u.forest.level_ancestor(*node, d_hi).unwrap();
        if target != *node {
            let tiv = u.forest.interval(target).expect("level ancestors are real");
            c.member = Member::Real(u.id_to_idx[&tiv.id]);
            c.accepted = true;
        }
    }
    accepted
}

impl PartUniverse {
    pub fn id_to_idx(&self) -> &HashMap<crate::domain::IntervalId, u32> {
        &self.id_to_idx
    }
}

/// Reverts the rounding after a part query: machines whose component sat out
/// the part keep their raw busy-untils (the smallest raws stay leftover,
/// matching the latest-busy rule inside the part); the rest take the accepted
/// intervals' ends.
pub fn unround_generic(
    u: &PartUniverse,
    raws: &[Endpoint],
    entry_members: &[Member],
    exit: &[Comp],
) -> Vec<Endpoint> {
    let mut leftover: std::collections::HashMap<Member, usize> = Default::default();
    let mut accepted_ends: Vec<Endpoint> = Vec::new();
    for c in exit {
        if c.accepted {
            accepted_ends.push(u.busy(c.member));
        } else {
            *leftover.entry(c.member).or_insert(0) += 1;
        }
    }
    let mut order: Vec<usize> = (0..raws.len()).collect();
    order.sort_by_key(|&i| (entry_members[i], raws[i]));
    let mut out = vec![Endpoint::NEG_INF; raws.len()];
    let mut take = accepted_ends.into_iter();
    for &i in &order {
        let slot = leftover.entry(entry_members[i]).or_insert(0);
        if *slot > 0 {
            *slot -= 1;
            out[i] = raws[i];
        } else {
            out[i] = take.next().expect("every non-leftover machine accepted");
        }
    }
    out
}
