//! Three to six machines: parts by end, per-part first-machine-replacement
//! tables over all member pairs, and cached part-query results for every
//! compressible greedy state (inactive-max, tree-edge, or FMR-implied forms).
//! The general query pushes a state forward with Next steps, the greedy-tree
//! skip, and the replacement chain walk until it can read a cached entry.

use crate::domain::{Endpoint, Error, Interval, IntervalId, Result, TraceOp};
use crate::engine::Engine;
use crate::part_universe::{
    next_state, skip_common_ancestor, sort_comps, unround_generic, Comp, Member, PartUniverse,
};
use crate::partition::{KeyMode, Partition, Signal};
use std::cell::Cell;
use std::collections::{BTreeMap, HashMap};

/// First-machine replacement over ordered member pairs: the interval that
/// replaces the earlier component when the two-machine greedy resumes from
/// the pair, plus the number of intervals accepted through it.
pub struct FmrTable {
    map: HashMap<(Member, Member), (Option<u32>, u64)>,
}

impl FmrTable {
    pub fn get(&self, a: Member, b: Member) -> (Option<u32>, u64) {
        self.map.get(&(a, b)).copied().unwrap_or((None, 0))
    }
}

/// All-pairs FMR by dynamic programming in decreasing index sums.
pub fn fmr_build(u: &PartUniverse, ops: &Cell<u64>) -> FmrTable {
    let mut members: Vec<Member> = Vec::with_capacity(u.reals.len() + u.pseudo_keys.len());
    for i in 0..u.reals.len() as u32 {
        members.push(Member::Real(i));
    }
    for k in 0..u.pseudo_keys.len() as u32 {
        members.push(Member::Pseudo(k));
    }
    members.sort_by_key(|m| u.idx(*m));
    let mut map = HashMap::new();
    let s = members.len();
    // iterate pairs (a, b) with idx(a) < idx(b), by decreasing idx(a)+idx(b)
    let mut pairs: Vec<(u32, usize, usize)> = Vec::with_capacity(s * (s - 1) / 2);
    for ai in 0..s {
        for bi in (ai + 1)..s {
            pairs.push((ai as u32 + bi as u32, ai, bi));
        }
    }
    pairs.sort_by(|x, y| y.0.cmp(&x.0));
    for (_, ai, bi) in pairs {
        ops.set(ops.get() + 1);
        let (a, b) = (members[ai], members[bi]);
        let entry = match u.mear_all.query(u.busy(a), u.busy(b)) {
            None => (None, 0),
            Some((_, k)) => {
                let kiv = u.reals[k as usize];
                // K replaces the earlier machine when the later one cannot
                // take it: K overlaps b, or b is a marker (markers lose
                // busiest-ties to the real component a)
                let overlaps_b = kiv.start < u.busy(b);
                let a_wins_tie = matches!(a, Member::Real(_)) && matches!(b, Member::Pseudo(_));
                if overlaps_b || a_wins_tie {
                    (Some(k), 1)
                } else {
                    let (f, h): (Option<u32>, u64) = map
                        .get(&(a, Member::Real(k)))
                        .copied()
                        .expect("larger-sum pair already computed");
                    if f.is_none() {
                        (None, 0)
                    } else {
                        (f, h + 1)
                    }
                }
            }
        };
        map.insert((a, b), entry);
    }
    FmrTable { map }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum CompressedKey {
    /// state minus the latest interval nested inside the inactive maximum
    A(Vec<Member>),
    /// state minus a greedy-tree edge (child stored, parent implied)
    B(Vec<Member>, Member),
    /// state minus the maximum, implied by FMR(min, second-max)
    C(Vec<Member>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableComp {
    Accepted(u32),
    Leftover(Member),
}

#[derive(Clone, Debug)]
pub struct TableEntry {
    pub count: u64,
    pub exit: Vec<TableComp>,
}

pub struct MultiTables {
    map: HashMap<CompressedKey, TableEntry>,
}

fn sorted_members(u: &PartUniverse, comps: &[Comp]) -> Vec<Member> {
    let mut ms: Vec<Member> = comps.iter().map(|c| c.member).collect();
    ms.sort_by_key(|m| u.idx(*m));
    ms
}

fn remove_one(ms: &mut Vec<Member>, m: Member) -> bool {
    if let Some(p) = ms.iter().position(|x| *x == m) {
        ms.remove(p);
        true
    } else {
        false
    }
}

/// First matching compressibility clause of the sorted state, or None.
pub fn classify_compressible(
    u: &PartUniverse,
    fmr: &FmrTable,
    comps: &[Comp],
) -> Option<CompressedKey> {
    let ms = sorted_members(u, comps);
    let im = *ms.last().unwrap();
    // (a): the maximum is inactive; drop the latest interval inside it
    if let Member::Real(i) = im {
        if !u.active[i as usize] {
            let w = u.latest_active_inside[i as usize]?;
            let mut rest = ms.clone();
            if remove_one(&mut rest, Member::Real(w)) {
                return Some(CompressedKey::A(rest));
            }
            return None;
        }
    }
    // (b): some component's greedy-tree parent is the maximum
    let im_node = u.node_of(im)?;
    let mut child: Option<Member> = None;
    for m in &ms[..ms.len() - 1] {
        if let Some(n) = u.node_of(*m) {
            if u.forest.parent(n) == im_node {
                child = Some(*m);
                break;
            }
        }
    }
    if let Some(c) = child {
        let mut rest = ms.clone();
        remove_one(&mut rest, c);
        remove_one(&mut rest, im);
        return Some(CompressedKey::B(rest, c));
    }
    // (c): the maximum equals FMR(min, second-max)
    let (i1, im1) = (ms[0], ms[ms.len() - 2]);
    if let (Some(f), _) = fmr.get(i1, im1) {
        if Member::Real(f) == im {
            let mut rest = ms.clone();
            rest.pop();
            return Some(CompressedKey::C(rest));
        }
    }
    None
}

/// Reconstructs the full member multiset of a key.
pub fn decompress(u: &PartUniverse, fmr: &FmrTable, key: &CompressedKey) -> Option<Vec<Member>> {
    match key {
        CompressedKey::A(rest) => {
            let im = *rest.last()?;
            let i = match im {
                Member::Real(i) if !u.active[i as usize] => i,
                _ => return None,
            };
            let w = u.latest_active_inside[i as usize]?;
            let mut full = rest.clone();
            full.push(Member::Real(w));
            full.sort_by_key(|m| u.idx(*m));
            Some(full)
        }
        CompressedKey::B(rest, c) => {
            let n = u.node_of(*c)?;
            let p = u.forest.parent(n);
            let piv = u.forest.interval(p)?;
            let pm = Member::Real(u.id_to_idx()[&piv.id]);
            if let Some(mx) = rest.last() {
                if u.idx(pm) < u.idx(*mx) {
                    return None;
                }
            }
            let mut full = rest.clone();
            full.push(*c);
            full.push(pm);
            full.sort_by_key(|m| u.idx(*m));
            Some(full)
        }
        CompressedKey::C(rest) => {
            let (i1, im1) = (*rest.first()?, *rest.last()?);
            let (f, _) = fmr.get(i1, im1);
            let mut full = rest.clone();
            full.push(Member::Real(f?));
            full.sort_by_key(|m| u.idx(*m));
            Some(full)
        }
    }
}

enum ChainOutcome {
    /// the chain topped out: accepted count, part exhausted
    Exhausted(u64),
    /// a cross-machine event fired after this many accepts
    Advanced(u64),
}

/// Replacement chain walk for the compatible-accept subcase: the newly
/// accepted `k` runs its greedy path until something lands on a different
/// machine.
fn push_chain(u: &PartUniverse, comps: &mut [Comp], k: u32, ops: &Cell<u64>) -> ChainOutcome {
    let slot = comps.iter().position(|c| c.member == Member::Real(k)).unwrap();
    let node = u.node_of(Member::Real(k)).expect("case-four accept is active");
    let depth = u.forest.depth(node);
    let mut best: Option<u32> = u.escape_active[&Member::Real(k)];
    for (i, c) in comps.iter().enumerate() {
        if i == slot {
            continue;
        }
        if let Some((_, j)) = u.mear_inactive.query(u.busy(c.member), u.reals[k as usize].end) {
            if best.map_or(true, |b| u.reals[j as usize].end < u.reals[b as usize].end) {
                best = Some(j);
            }
        }
    }
    let j = match best {
        None => {
            // the chain tops out; every other machine idles for the part
            let (count, last) = u.forest.path_stats(node);
            let newly = count - 1;
            if newly > 0 {
                let id = u.forest.interval(last.unwrap()).unwrap().id;
                comps[slot] =
                    Comp { member: Member::Real(u.id_to_idx()[&id]), accepted: true };
            }
            return ChainOutcome::Exhausted(newly);
        }
        Some(j) => j,
    };
    let jiv = u.reals[j as usize];
    let end_at = |d: u32| {
        ops.set(ops.get() + 1);
        u.forest.busy(u.forest.level_ancestor(node, d).unwrap())
    };
    let (mut lo, mut hi) = (1u32, depth);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if end_at(mid) < jiv.end {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let x = u.forest.level_ancestor(node, lo).unwrap();
    let hops = (depth - lo) as u64;
    if x != node {
        let id = u.forest.interval(x).unwrap().id;
        comps[slot] = Comp { member: Member::Real(u.id_to_idx()[&id]), accepted: true };
    }
    // J lands on the busiest other compatible machine (markers lose ties)
    let tslot = comps
        .iter()
        .enumerate()
        .filter(|(i, c)| *i != slot && u.busy(c.member) <= jiv.start)
        .max_by_key(|(_, c)| (matches!(c.member, Member::Real(_)), u.busy(c.member)))
        .map(|(i, _)| i)
        .expect("the replacement is compatible with another machine");
    comps[tslot] = Comp { member: Member::Real(j), accepted: true };
    ChainOutcome::Advanced(hops + 1)
}

/// Runs the general multi-machine part query from `entry` until a cached
/// compressible state or part exhaustion.
pub fn part_query_multi(
    u: &PartUniverse,
    fmr: &FmrTable,
    tables: &MultiTables,
    entry: &[Comp],
    ops: &Cell<u64>,
) -> Result<(u64, Vec<Comp>)> {
    let mut comps: Vec<Comp> = entry.to_vec();
    let mut acc = 0u64;
    let mut consecutive_partial = 0usize;
    loop {
        ops.set(ops.get() + 1);
        sort_comps(u, &mut comps);
        // the time floor: the last acceptance is the latest-ending real held
        let floor = comps
            .iter()
            .filter(|c| matches!(c.member, Member::Real(_)))
            .map(|c| u.busy(c.member))
            .max()
            .unwrap_or(Endpoint::NEG_INF);
        let all_active = comps.iter().all(|c| u.is_active(c.member));
        let im = comps.last().unwrap().member;
        let im_active = u.is_active(im);
        if all_active {
            acc += skip_common_ancestor(u, &mut comps, floor);
            match next_state(u, &mut comps, floor) {
                None => return Ok((acc, comps)),
                Some(_) => acc += 1,
            }
        } else if !im_active {
            match next_state(u, &mut comps, floor) {
                None => return Ok((acc, comps)),
                Some(_) => acc += 1,
            }
        } else {
            let im_busy = u.busy(im);
            let had_min = comps.first().unwrap().member;
            match next_state(u, &mut comps, floor) {
                None => return Ok((acc, comps)),
                Some(k) => {
                    acc += 1;
                    let kiv = u.reals[k as usize];
                    if u.active[k as usize] && kiv.start >= im_busy {
                        // accepted compatible with the old maximum: walk its
                        // replacement chain to the next cross-machine event
                        consecutive_partial = 0;
                        match push_chain(u, &mut comps, k, ops) {
                            ChainOutcome::Exhausted(extra) => return Ok((acc + extra, comps)),
                            ChainOutcome::Advanced(extra) => acc += extra,
                        }
                    } else if u.active[k as usize]
                        && comps.iter().all(|c| c.member != had_min)
                    {
                        // the earliest component was replaced by an active
                        // overlapping interval: the active suffix grows, so
                        // only a bounded run of these can occur in a row
                        consecutive_partial += 1;
                        debug_assert!(
                            consecutive_partial <= comps.len(),
                            "active-suffix growth exceeded the machine count"
                        );
                    } else {
                        consecutive_partial = 0;
                    }
                }
            }
        }
        if let Some(key) = classify_compressible(u, fmr, &comps) {
            let entry = tables
                .map
                .get(&key)
                .unwrap_or_else(|| panic!("missing table entry for {:?}", key));
            // bind leftovers against the current multiset
            let mut pool: Vec<(Member, Comp)> =
                comps.iter().map(|c| (c.member, *c)).collect();
            let mut exit = Vec::with_capacity(comps.len());
            for tc in &entry.exit {
                match tc {
                    TableComp::Accepted(r) => {
                        exit.push(Comp { member: Member::Real(*r), accepted: true })
                    }
                    TableComp::Leftover(mem) => {
                        let p = pool
                            .iter()
                            .position(|(m, _)| m == mem)
                            .expect("leftover binds to a state component");
                        exit.push(pool.remove(p).1);
                    }
                }
            }
            return Ok((acc + entry.count, exit));
        }
    }
}

fn to_table_exit(comps: &[Comp]) -> Vec<TableComp> {
    comps
        .iter()
        .map(|c| {
            if c.accepted {
                match c.member {
                    Member::Real(r) => TableComp::Accepted(r),
                    Member::Pseudo(_) => unreachable!("markers are never accepted"),
                }
            } else {
                TableComp::Leftover(c.member)
            }
        })
        .collect()
}

/// Enumerates every compressible key and fills the table in decreasing order
/// of the decompressed state's index sum.
pub fn build_multi_tables(
    u: &PartUniverse,
    fmr: &FmrTable,
    m: usize,
    ops: &Cell<u64>,
) -> MultiTables {
    let mut members: Vec<Member> = Vec::with_capacity(u.reals.len() + u.pseudo_keys.len());
    for i in 0..u.reals.len() as u32 {
        members.push(Member::Real(i));
    }
    for k in 0..u.pseudo_keys.len() as u32 {
        members.push(Member::Pseudo(k));
    }
    members.sort_by_key(|mm| u.idx(*mm));
    let mut keys: Vec<CompressedKey> = Vec::new();
    // multisets of a given size in non-decreasing index order
    fn multisets(members: &[Member], size: usize) -> Vec<Vec<Member>> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(size);
        fn go(members: &[Member], size: usize, from: usize, cur: &mut Vec<Member>, out: &mut Vec<Vec<Member>>) {
            if cur.len() == size {
                out.push(cur.clone());
                return;
            }
            for i in from..members.len() {
                cur.push(members[i]);
                go(members, size, i, cur, out);
                cur.pop();
            }
        }
        go(members, size, 0, &mut cur, &mut out);
        out
    }
    for ms in multisets(&members, m - 1) {
        // A: maximum inactive real
        if let Some(Member::Real(i)) = ms.last().copied() {
            if !u.active[i as usize] && u.latest_active_inside[i as usize].is_some() {
                keys.push(CompressedKey::A(ms.clone()));
            }
        }
        // C: FMR(min, max) defined
        if let (Some(a), Some(b)) = (ms.first(), ms.last()) {
            if fmr.get(*a, *b).0.is_some() {
                keys.push(CompressedKey::C(ms.clone()));
            }
        }
    }
    // B: (m-2)-multisets with any tree edge whose parent clears the multiset
    let children: Vec<Member> = members
        .iter()
        .filter(|mm| {
            u.node_of(**mm)
                .map_or(false, |n| u.forest.interval(u.forest.parent(n)).is_some())
        })
        .copied()
        .collect();
    for ms in multisets(&members, m - 2) {
        for c in &children {
            let key = CompressedKey::B(ms.clone(), *c);
            if decompress(u, fmr, &key).is_some() {
                keys.push(key);
            }
        }
    }
    let mut work: Vec<(u64, CompressedKey, Vec<Member>)> = keys
        .into_iter()
        .filter_map(|k| {
            let full = decompress(u, fmr, &k)?;
            let sum = full.iter().map(|mm| u.idx(*mm) as u64).sum();
            Some((sum, k, full))
        })
        .collect();
    work.sort_by(|a, b| b.0.cmp(&a.0));
    let mut tables = MultiTables { map: HashMap::with_capacity(work.len()) };
    for (_, key, full) in work {
        if tables.map.contains_key(&key) {
            continue;
        }
        let state: Vec<Comp> =
            full.iter().map(|mm| Comp { member: *mm, accepted: false }).collect();
        let (count, exit) =
            part_query_multi(u, fmr, &tables, &state, ops).expect("table states advance");
        tables.map.insert(key, TableEntry { count, exit: to_table_exit(&exit) });
    }
    tables
}

struct MultiPart {
    members: BTreeMap<Endpoint, IntervalId>,
    data: Option<(PartUniverse, FmrTable, MultiTables)>,
}

impl MultiPart {
    fn new() -> Self {
        MultiPart { members: BTreeMap::new(), data: None }
    }
}

pub struct MultiEngine {
    m: usize,
    partition: Partition,
    parts: Vec<Option<MultiPart>>,
    live: HashMap<IntervalId, Interval>,
    rebuilds: u64,
    ops: Cell<u64>,
}

impl MultiEngine {
    pub fn new(machines: usize) -> Result<Self> {
        if !(3..=6).contains(&machines) {
            return Err(Error::UnsupportedMachineCount(machines));
        }
        Ok(MultiEngine {
            m: machines,
            partition: Partition::new_epoch(&[], 1, machines as u32, KeyMode::ByEnd),
            parts: vec![Some(MultiPart::new())],
            live: HashMap::new(),
            rebuilds: 0,
            ops: Cell::new(0),
        })
    }

    fn tick(&self, n: u64) {
        self.ops.set(self.ops.get() + n);
    }

    fn ensure_fresh(&mut self, j: usize) {
        if self.parts[j].as_ref().unwrap().data.is_some() {
            return;
        }
        let items: Vec<Interval> = self.parts[j]
            .as_ref()
            .unwrap()
            .members
            .values()
            .map(|id| self.live[id])
            .collect();
        self.tick(items.len() as u64 + 1);
        let u = PartUniverse::build(&items);
        let fmr = fmr_build(&u, &self.ops);
        let t = build_multi_tables(&u, &fmr, self.m, &self.ops);
        self.parts[j].as_mut().unwrap().data = Some((u, fmr, t));
        self.rebuilds += 1;
    }

    fn rebuild_epoch(&mut self) {
        let mut keys: Vec<Endpoint> = self.live.values().map(|iv| iv.end).collect();
        keys.sort();
        self.tick(keys.len() as u64 + 1);
        self.partition = Partition::new_epoch(&keys, 1, self.m as u32, KeyMode::ByEnd);
        self.parts = (0..self.partition.slab_len()).map(|_| Some(MultiPart::new())).collect();
        for iv in self.live.values() {
            let j = self.partition.locate(iv.end);
            self.parts[j].as_mut().unwrap().members.insert(iv.end, iv.id);
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
                let (lm, rm) = {
                    let part = self.parts[j].as_mut().unwrap();
                    let right = part.members.split_off(&median);
                    (std::mem::take(&mut part.members), right)
                };
                let new_id =
                    self.partition.apply_split(j, median, lm.len() as u64, rm.len() as u64);
                if new_id >= self.parts.len() {
                    self.parts.resize_with(new_id + 1, || None);
                }
                self.parts[j] = Some(MultiPart { members: lm, data: None });
                self.parts[new_id] = Some(MultiPart { members: rm, data: None });
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
                    part.data = None;
                    match self.partition.pending_merge_around(x) {
                        Some(next) => pair = next,
                        None => break,
                    }
                }
            }
        }
    }

    fn query(&mut self) -> Result<u64> {
        let mut total = 0u64;
        let mut raws: Vec<Endpoint> = vec![Endpoint::NEG_INF; self.m];
        for j in self.partition.part_ids() {
            if self.parts[j].as_ref().unwrap().members.is_empty() {
                continue;
            }
            self.ensure_fresh(j);
            let part = self.parts[j].as_ref().unwrap();
            let (u, fmr, tables) = part.data.as_ref().unwrap();
            let entry_members: Vec<Member> = raws.iter().map(|e| u.round(*e)).collect();
            if entry_members.iter().all(|mm| u.busy(*mm) == Endpoint::POS_INF) {
                continue;
            }
            let entry: Vec<Comp> = entry_members
                .iter()
                .map(|mm| Comp { member: *mm, accepted: false })
                .collect();
            let (cnt, exit) = part_query_multi(u, fmr, tables, &entry, &self.ops)?;
            total += cnt;
            raws = unround_generic(u, &raws, &entry_members, &exit);
        }
        Ok(total)
    }
}

impl Engine for MultiEngine {
    fn apply(&mut self, op: &TraceOp) -> Result<Option<u64>> {
        match op {
            TraceOp::Insert(iv) => {
                if self.live.contains_key(&iv.id) {
                    return Err(Error::DuplicateId(iv.id));
                }
                self.live.insert(iv.id, *iv);
                let j = self.partition.locate(iv.end);
                let part = self.parts[j].as_mut().unwrap();
                part.members.insert(iv.end, iv.id);
                part.data = None;
                let sig = self.partition.note_mutation(j, 1);
                self.handle_signal(sig);
                Ok(None)
            }
            TraceOp::Delete(id) => {
                let iv = self.live.remove(id).ok_or(Error::UnknownId(*id))?;
                let j = self.partition.locate(iv.end);
                let part = self.parts[j].as_mut().unwrap();
                part.members.remove(&iv.end);
                part.data = None;
                let sig = self.partition.note_mutation(j, -1);
                self.handle_signal(sig);
                Ok(None)
            }
            TraceOp::Query => self.query().map(Some),
        }
    }

    fn elementary_ops(&self) -> u64 {
        self.ops.get()
    }

    fn rebuild_count(&self) -> u64 {
        self.rebuilds
    }

    fn machines(&self) -> usize {
        self.m
    }

    fn name(&self) -> &'static str {
        "multi"
    }
}
