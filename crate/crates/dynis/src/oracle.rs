//! Brute-force and textbook reference algorithms. Every engine is tested
//! against these; nothing here is allowed to share code with the engines.

use crate::domain::{compatible, contains, Component, Endpoint, GreedyState, Interval, IntervalId};

/// Result of the multi-machine greedy: per-machine accepted ids in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineAssignment {
    pub machines: Vec<Vec<IntervalId>>,
    pub count: usize,
}

fn sorted_by_end(set: &[Interval]) -> Vec<Interval> {
    let mut v = set.to_vec();
    v.sort_by_key(|i| i.end);
    v
}

/// Leftmost compatible interval by linear scan: minimum end among live
/// intervals starting at or after `cutoff`.
pub fn lc_scan(set: &[Interval], cutoff: Endpoint) -> Option<Interval> {
    set.iter()
        .filter(|i| i.start >= cutoff)
        .min_by_key(|i| i.end)
        .copied()
}

/// Size of the maximum compatible subset (earliest-end greedy).
pub fn static_is(set: &[Interval]) -> u64 {
    let mut count = 0;
    let mut busy = Endpoint::NEG_INF;
    for iv in sorted_by_end(set) {
        if iv.start >= busy {
            count += 1;
            busy = iv.end;
        }
    }
    count
}

/// The maximal LC-iteration chain starting at `from` (which must be in `set`).
pub fn greedy_chain(set: &[Interval], from: IntervalId) -> Option<Vec<Interval>> {
    let mut cur = *set.iter().find(|i| i.id == from)?;
    let mut chain = vec![cur];
    while let Some(next) = lc_scan(set, cur.end) {
        chain.push(next);
        cur = next;
    }
    Some(chain)
}

/// Picks the accepting machine for an interval starting at `start`:
/// the compatible machine that was busy latest, ties by largest endpoint tie.
fn pick_machine(busy: &[Endpoint], start: Endpoint) -> Option<usize> {
    busy.iter()
        .enumerate()
        .filter(|(_, b)| **b <= start)
        .max_by_key(|(_, b)| **b)
        .map(|(i, _)| i)
}

/// The IS+ greedy on `m` machines; the count it produces is optimal.
pub fn static_multi(set: &[Interval], m: usize) -> MachineAssignment {
    assert!(m >= 1);
    let mut machines: Vec<Vec<IntervalId>> = vec![Vec::new(); m];
    let mut busy = vec![Endpoint::NEG_INF; m];
    let mut count = 0;
    for iv in sorted_by_end(set) {
        if let Some(k) = pick_machine(&busy, iv.start) {
            machines[k].push(iv.id);
            busy[k] = iv.end;
            count += 1;
        }
    }
    MachineAssignment { machines, count }
}

/// The greedy state after each considered interval (in `≺` order), starting
/// from the all-idle state of `m` barred machines.
pub fn state_trace(set: &[Interval], m: usize) -> Vec<GreedyState> {
    assert!(m >= 1);
    let mut state = GreedyState::initial(m);
    let by_end = sorted_by_end(set);
    let mut out = Vec::with_capacity(by_end.len() + 1);
    out.push(state.clone());
    for iv in by_end {
        let pos = state
            .busy_untils()
            .iter()
            .enumerate()
            .filter(|(_, b)| **b <= iv.start)
            .max_by_key(|(_, b)| **b)
            .map(|(i, _)| i);
        if let Some(k) = pos {
            state.replace(k, Component::Real(iv.id), iv.end);
        }
        out.push(state.clone());
    }
    out
}

/// Maximum total weight of a compatible subset: sort by end, predecessor DP.
pub fn static_wis(set: &[Interval]) -> u64 {
    static_wis_witness(set).0
}

/// Weighted IS with a witness subset (ids in end order).
pub fn static_wis_witness(set: &[Interval]) -> (u64, Vec<IntervalId>) {
    let by_end = sorted_by_end(set);
    let n = by_end.len();
    if n == 0 {
        return (0, Vec::new());
    }
    // pred[i]: number of intervals ending at or before by_end[i].start
    let ends: Vec<Endpoint> = by_end.iter().map(|i| i.end).collect();
    let mut best = vec![0u64; n + 1];
    let mut take = vec![false; n];
    let mut pred = vec![0usize; n];
    for i in 0..n {
        pred[i] = ends.partition_point(|e| *e <= by_end[i].start);
        let with = best[pred[i]] + by_end[i].weight;
        if with > best[i] {
            best[i + 1] = with;
            take[i] = true;
        } else {
            best[i + 1] = best[i];
        }
    }
    let mut ids = Vec::new();
    let mut i = n;
    while i > 0 {
        if take[i - 1] {
            ids.push(by_end[i - 1].id);
            i = pred[i - 1];
        } else {
            i -= 1;
        }
    }
    ids.reverse();
    (best[n], ids)
}

/// Simulates the IS+ greedy over one part from entry state `state`.
///
/// Intervals already named by the state are never re-accepted; candidates are
/// processed in `≺` order starting just after the earliest busy machine, which
/// is what a resumed global run sees once the entry state has been rounded.
/// A `Barred(t)` component acts as a machine free for starts at or after `t`,
/// but on busiest-machine ties it loses to real components: a barred time is
/// a rounded-up stand-in for a busy moment before every in-part end, so the
/// machine behind it was in truth the least busy.
/// Returns the accepted count and the exit state.
pub fn part_sim(universe: &[Interval], state: &GreedyState, m: usize) -> (u64, GreedyState) {
    let (accepted, exit) = part_sim_full(universe, state, m);
    (accepted.len() as u64, exit)
}

/// As `part_sim`, returning the accepted ids in order.
pub fn part_sim_full(
    universe: &[Interval],
    state: &GreedyState,
    m: usize,
) -> (Vec<IntervalId>, GreedyState) {
    assert_eq!(state.machines(), m);
    let mut cur = state.clone();
    let mut accepted = Vec::new();
    let floor = cur.min_busy();
    for iv in sorted_by_end(universe) {
        if iv.end <= floor || cur.contains_real(iv.id) {
            continue;
        }
        let pos = cur
            .busy_untils()
            .iter()
            .zip(cur.components())
            .enumerate()
            .filter(|(_, (b, _))| **b <= iv.start)
            .max_by_key(|(_, (b, c))| (matches!(c, Component::Real(_)), **b))
            .map(|(i, _)| i);
        if let Some(k) = pos {
            cur.replace(k, Component::Real(iv.id), iv.end);
            accepted.push(iv.id);
        }
    }
    (accepted, cur)
}

/// True iff `iv` is active in `set`: no other member nested inside it.
pub fn is_active_scan(set: &[Interval], iv: &Interval) -> bool {
    !set.iter().any(|j| j.id != iv.id && contains(iv, j))
}

/// The active subset by the O(n^2) definition.
pub fn active_scan(set: &[Interval]) -> Vec<Interval> {
    set.iter().filter(|i| is_active_scan(set, i)).copied().collect()
}

/// Exhaustive maximum compatible subset size; only for tiny sets.
pub fn exhaustive_is(set: &[Interval]) -> u64 {
    assert!(set.len() <= 20);
    let n = set.len();
    let mut best = 0u64;
    for mask in 0u32..(1 << n) {
        let chosen: Vec<&Interval> =
            (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &set[i]).collect();
        let ok = chosen
            .iter()
            .enumerate()
            .all(|(i, a)| chosen[i + 1..].iter().all(|b| compatible(a, b)));
        if ok {
            best = best.max(chosen.len() as u64);
        }
    }
    best
}

/// Exhaustive optimum over all machine colorings; only for tiny sets.
pub fn exhaustive_multi(set: &[Interval], m: usize) -> u64 {
    assert!(set.len() <= 12 && m <= 4);
    let n = set.len();
    let mut best = 0u64;
    // assignment[i] in 0..=m, where m means "discarded"
    let mut assign = vec![0usize; n];
    loop {
        let mut busy = vec![Vec::<&Interval>::new(); m];
        let mut ok = true;
        let mut cnt = 0u64;
        'outer: for i in 0..n {
            if assign[i] == m {
                continue;
            }
            for other in &busy[assign[i]] {
                if !compatible(other, &set[i]) {
                    ok = false;
                    break 'outer;
                }
            }
            busy[assign[i]].push(&set[i]);
            cnt += 1;
        }
        if ok {
            best = best.max(cnt);
        }
        // increment mixed-radix counter
        let mut i = 0;
        while i < n {
            assign[i] += 1;
            if assign[i] <= m {
                break;
            }
            assign[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    best
}

/// Exhaustive maximum-weight compatible subset; only for tiny sets.
pub fn exhaustive_wis(set: &[Interval]) -> u64 {
    assert!(set.len() <= 20);
    let n = set.len();
    let mut best = 0u64;
    for mask in 0u32..(1 << n) {
        let chosen: Vec<&Interval> =
            (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &set[i]).collect();
        let ok = chosen
            .iter()
            .enumerate()
            .all(|(i, a)| chosen[i + 1..].iter().all(|b| compatible(a, b)));
        if ok {
            best = best.max(chosen.iter().map(|i| i.weight).sum());
        }
    }
    best
}

#[cfg(test)]
pub mod fixtures {
    use super::*;

    pub fn iv(id: u64, s: i64, f: i64, tie: u64) -> Interval {
        Interval::new(IntervalId(id), Endpoint::new(s, tie), Endpoint::new(f, tie + 1), 1)
    }

    /// A=(0,2), C=(1,4), B=(3,5), D=(6,7); ids 1..=4 in that listed order.
    pub fn fix1() -> Vec<Interval> {
        vec![iv(1, 0, 2, 0), iv(2, 1, 4, 2), iv(3, 3, 5, 4), iv(4, 6, 7, 6)]
    }

    pub const FIX1_A: IntervalId = IntervalId(1);
    pub const FIX1_C: IntervalId = IntervalId(2);
    pub const FIX1_B: IntervalId = IntervalId(3);
    pub const FIX1_D: IntervalId = IntervalId(4);

    /// P=(0,10), Q=(2,3), R=(4,6).
    pub fn fix2() -> Vec<Interval> {
        vec![iv(1, 0, 10, 0), iv(2, 2, 3, 2), iv(3, 4, 6, 4)]
    }

    pub const FIX2_P: IntervalId = IntervalId(1);
    pub const FIX2_Q: IntervalId = IntervalId(2);
    pub const FIX2_R: IntervalId = IntervalId(3);

    /// {(1,2),(0,3),(2,4),(3,5)}.
    pub fn fix3() -> Vec<Interval> {
        vec![iv(1, 1, 2, 0), iv(2, 0, 3, 2), iv(3, 2, 4, 4), iv(4, 3, 5, 6)]
    }

    /// FIXF = {I1=(0,2), I2=(4,6), I3=(5,8), I4=(7,10)}.
    pub fn fixf() -> Vec<Interval> {
        vec![iv(1, 0, 2, 0), iv(2, 4, 6, 2), iv(3, 5, 8, 4), iv(4, 7, 10, 6)]
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn static_is_fixtures() {
        assert_eq!(static_is(&fix1()), 3);
        assert_eq!(static_is(&[]), 0);
        assert_eq!(static_is(&fix2()), 2);
        assert_eq!(static_is(&fix1()), exhaustive_is(&fix1()));
        assert_eq!(static_is(&fix2()), exhaustive_is(&fix2()));
    }

    #[test]
    fn greedy_chain_fixtures() {
        let chain: Vec<IntervalId> =
            greedy_chain(&fix1(), FIX1_A).unwrap().iter().map(|i| i.id).collect();
        assert_eq!(chain, vec![FIX1_A, FIX1_B, FIX1_D]);
        let chain: Vec<IntervalId> =
            greedy_chain(&fix1(), FIX1_D).unwrap().iter().map(|i| i.id).collect();
        assert_eq!(chain, vec![FIX1_D]);
        let chain: Vec<IntervalId> =
            greedy_chain(&fix2(), FIX2_Q).unwrap().iter().map(|i| i.id).collect();
        assert_eq!(chain, vec![FIX2_Q, FIX2_R]);
        assert!(greedy_chain(&fix1(), IntervalId(99)).is_none());
    }

    #[test]
    fn global_lc_examples() {
        let f = fix1();
        // cutoff 2 with a tie above A's endpoints
        assert_eq!(lc_scan(&f, Endpoint::new(2, 100)).unwrap().id, FIX1_B);
        assert_eq!(lc_scan(&f, Endpoint::new(7, 100)), None);
        assert_eq!(lc_scan(&f, Endpoint::new(4, 100)).unwrap().id, FIX1_D);
    }

    #[test]
    fn static_multi_fixtures() {
        assert_eq!(static_multi(&fix3(), 2).count, 4);
        assert_eq!(static_multi(&fix1(), 2).count, 4);
        assert_eq!(static_multi(&fix1(), 10).count, 4);
        assert_eq!(static_multi(&fix3(), 2).count as u64, exhaustive_multi(&fix3(), 2));
        assert_eq!(static_multi(&fix1(), 2).count as u64, exhaustive_multi(&fix1(), 2));
        // A, B and D share a machine under the latest-busy rule
        let asg = static_multi(&fix1(), 2);
        let with_a = asg.machines.iter().find(|m| m.contains(&FIX1_A)).unwrap();
        assert_eq!(*with_a, vec![FIX1_A, FIX1_B, FIX1_D]);
        let other = asg.machines.iter().find(|m| m.contains(&FIX1_C)).unwrap();
        assert_eq!(*other, vec![FIX1_C]);
    }

    #[test]
    fn state_trace_fixtures() {
        let t = state_trace(&fix3(), 2);
        // after the first considered interval (1,2)
        let s = &t[1];
        assert!(matches!(s.components()[0], Component::Barred(e) if e == Endpoint::NEG_INF));
        assert!(matches!(s.components()[1], Component::Real(IntervalId(1))));

        let t = state_trace(&fix1(), 1);
        let reals: Vec<Option<IntervalId>> = t
            .iter()
            .map(|s| match s.components()[0] {
                Component::Real(id) => Some(id),
                _ => None,
            })
            .collect();
        assert_eq!(reals, vec![None, Some(FIX1_A), Some(FIX1_A), Some(FIX1_B), Some(FIX1_D)]);

        let t = state_trace(&[], 3);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0], GreedyState::initial(3));
    }

    #[test]
    fn static_wis_fixtures() {
        let single = vec![Interval::new(
            IntervalId(1),
            Endpoint::new(0, 0),
            Endpoint::new(2, 1),
            5,
        )];
        assert_eq!(static_wis(&single), 5);
        let two = vec![
            Interval::new(IntervalId(1), Endpoint::new(0, 0), Endpoint::new(3, 1), 3),
            Interval::new(IntervalId(2), Endpoint::new(1, 2), Endpoint::new(4, 3), 4),
        ];
        assert_eq!(static_wis(&two), 4);
        assert_eq!(static_wis(&two), exhaustive_wis(&two));
        let (v, w) = static_wis_witness(&two);
        assert_eq!(v, 4);
        assert_eq!(w, vec![IntervalId(2)]);
    }

    #[test]
    fn part_sim_fix1_from_two_reals() {
        let f = fix1();
        let g = GreedyState::from_components(
            &[Component::Real(FIX1_A), Component::Real(FIX1_B)],
            |id| f.iter().find(|i| i.id == id).unwrap().end,
        );
        let (count, exit) = part_sim(&f, &g, 2);
        assert_eq!(count, 1);
        assert!(exit.contains_real(FIX1_A));
        assert!(exit.contains_real(FIX1_D));
    }

    #[test]
    fn part_sim_all_barred_posinf() {
        let f = fix1();
        let g = GreedyState::from_components(
            &[Component::Barred(Endpoint::POS_INF), Component::Barred(Endpoint::POS_INF)],
            |_| unreachable!(),
        );
        let (count, exit) = part_sim(&f, &g, 2);
        assert_eq!(count, 0);
        assert_eq!(exit, g);
    }

    #[test]
    fn part_sim_fix2_with_barred() {
        let f = fix2();
        let g = GreedyState::from_components(
            &[Component::Real(FIX2_Q), Component::Barred(Endpoint::new(4, 3))],
            |id| f.iter().find(|i| i.id == id).unwrap().end,
        );
        let (count, exit) = part_sim(&f, &g, 2);
        assert_eq!(count, 1);
        // R lands on the real machine: the barred 4 stands in for a busy
        // moment before Q's end, so Q's machine is the busier one
        assert!(exit.contains_real(FIX2_R));
        assert!(exit.components().iter().any(|c| matches!(c, Component::Barred(_))));
    }

    #[test]
    fn active_scan_fixtures() {
        let f2 = fix2();
        let act: Vec<IntervalId> = active_scan(&f2).iter().map(|i| i.id).collect();
        assert_eq!(act, vec![FIX2_Q, FIX2_R]);
        assert_eq!(active_scan(&fix1()).len(), 4);
    }
}
