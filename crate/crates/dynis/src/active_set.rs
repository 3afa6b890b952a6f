//! Active-subset maintenance for delete-only or insert-only collections via
//! the dominance staircase: interval (s, f) maps to the point (s, -f), and an
//! interval is active exactly when its point is non-dominated.

use crate::domain::{Endpoint, Error, Interval, IntervalId, Result};
use crate::index::AugMap;
use std::collections::HashMap;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mode {
    DeleteOnly,
    InsertOnly,
}

pub struct DominanceFront {
    mode: Mode,
    /// all live points, keyed by start, aux = end (range minimum of end)
    collection: AugMap,
    /// the staircase of non-dominated points, keyed by end, aux = start
    staircase: AugMap,
    live: HashMap<IntervalId, (Interval, bool)>,
    activations: u64,
    deactivations: u64,
}

impl DominanceFront {
    /// Builds the front over `items`; active subset equals the containment
    /// scan. O(n log n).
    pub fn build(mode: Mode, items: &[Interval]) -> Self {
        let mut f = DominanceFront {
            mode,
            collection: AugMap::new(),
            staircase: AugMap::new(),
            live: HashMap::with_capacity(items.len()),
            activations: 0,
            deactivations: 0,
        };
        let mut by_start = items.to_vec();
        by_start.sort_by_key(|i| i.start);
        for iv in &by_start {
            f.collection.insert(iv.start, iv.id, iv.end);
            f.live.insert(iv.id, (*iv, false));
        }
        // sweep right-to-left: active iff end is below every end seen so far
        let mut min_end = Endpoint::POS_INF;
        for iv in by_start.iter().rev() {
            if iv.end < min_end {
                min_end = iv.end;
                f.staircase.insert(iv.end, iv.id, iv.start);
                f.live.get_mut(&iv.id).unwrap().1 = true;
            }
        }
        f
    }

    pub fn new(mode: Mode) -> Self {
        Self::build(mode, &[])
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.staircase.len()
    }

    pub fn elementary_ops(&self) -> u64 {
        self.collection.elementary_ops() + self.staircase.elementary_ops()
    }

    /// Total activation events so far (amortization witness: bounded by the
    /// collection size over a delete-only lifetime).
    pub fn activation_events(&self) -> u64 {
        self.activations
    }

    pub fn deactivation_events(&self) -> u64 {
        self.deactivations
    }

    pub fn get(&self, id: IntervalId) -> Option<&Interval> {
        self.live.get(&id).map(|(iv, _)| iv)
    }

    pub fn is_active(&self, id: IntervalId) -> Result<bool> {
        self.live.get(&id).map(|(_, a)| *a).ok_or(Error::UnknownId(id))
    }

    /// Earliest-ending active interval with start >= cutoff.
    pub fn active_succ(&self, cutoff: Endpoint) -> Option<Interval> {
        self.staircase
            .partition_point(|_end, _id, start| start >= cutoff)
            .map(|(_, id, _)| self.live[&id].0)
    }

    /// Earliest-ending active interval with end > bound.
    pub fn active_after_end(&self, bound: Endpoint) -> Option<Interval> {
        self.staircase
            .partition_point(|end, _id, _start| end > bound)
            .map(|(_, id, _)| self.live[&id].0)
    }

    /// Latest-ending active interval with end < bound.
    pub fn active_before_end(&self, bound: Endpoint) -> Option<Interval> {
        self.staircase.pred(bound).map(|(_, id, _)| self.live[&id].0)
    }

    /// Number of actives with end < bound (the `≺` rank).
    pub fn active_rank(&self, bound: Endpoint) -> usize {
        self.staircase.rank(bound)
    }

    /// k-th active in `≺` order.
    pub fn active_select(&self, k: usize) -> Option<Interval> {
        self.staircase.select(k).map(|(_, id, _)| self.live[&id].0)
    }

    /// Actives in `≺` order (test support).
    pub fn actives(&self) -> Vec<Interval> {
        self.staircase.iter().iter().map(|(_, id, _)| self.live[id].0).collect()
    }

    /// Deletes a live interval; returns the newly activated intervals in `≺`
    /// order. Amortized O(log n) per activation.
    pub fn delete(&mut self, id: IntervalId) -> Result<Vec<Interval>> {
        if self.mode != Mode::DeleteOnly {
            return Err(Error::ModeViolation("delete on an insert-only front"));
        }
        let (iv, was_active) = self.live.remove(&id).ok_or(Error::UnknownId(id))?;
        self.collection.remove(iv.start);
        if !was_active {
            // a dominated point dominates nothing exclusively: containment is
            // transitive, so nothing activates
            return Ok(Vec::new());
        }
        self.staircase.remove(iv.end);
        let left = self.staircase.pred(iv.end).map(|(_, _, start)| start);
        let right = self.staircase.succ(iv.end).map(|(end, _, start)| (end, start));
        let mut activated = Vec::new();
        let mut lo = left;
        loop {
            let hi = right.map(|(_, s)| s);
            let cand = self.collection.min_aux_range_excl(lo, hi);
            let (start, cid, end) = match cand {
                Some(c) => c,
                None => break,
            };
            if let Some((rend, _)) = right {
                if end > rend {
                    break; // dominated by the right staircase neighbor
                }
            }
            self.staircase.insert(end, cid, start);
            self.live.get_mut(&cid).unwrap().1 = true;
            activated.push(self.live[&cid].0);
            self.activations += 1;
            lo = Some(start);
        }
        activated.sort_by_key(|i| i.end);
        Ok(activated)
    }

    /// Inserts an interval; returns the intervals deactivated by it (those
    /// that now contain it) in `≺` order.
    pub fn insert(&mut self, iv: Interval) -> Result<Vec<Interval>> {
        if self.mode != Mode::InsertOnly {
            return Err(Error::ModeViolation("insert on a delete-only front"));
        }
        if self.live.contains_key(&iv.id) {
            return Err(Error::DuplicateId(iv.id));
        }
        self.collection.insert(iv.start, iv.id, iv.end);
        // iv is dominated iff some active starts later and ends earlier
        let dominated = self
            .staircase
            .partition_point(|_e, _i, start| start > iv.start)
            .map_or(false, |(end, _, _)| end < iv.end);
        self.live.insert(iv.id, (iv, !dominated));
        if dominated {
            return Ok(Vec::new());
        }
        // actives now containing iv end later but start earlier: they are the
        // staircase run just after iv's end position
        let mut deactivated = Vec::new();
        while let Some((end, pid, start)) = self.staircase.succ(iv.end) {
            if start < iv.start {
                self.staircase.remove(end);
                self.live.get_mut(&pid).unwrap().1 = false;
                deactivated.push(self.live[&pid].0);
                self.deactivations += 1;
            } else {
                break;
            }
        }
        self.staircase.insert(iv.end, iv.id, iv.start);
        deactivated.sort_by_key(|i| i.end);
        Ok(deactivated)
    }

    pub fn iter_live(&self) -> impl Iterator<Item = &Interval> {
        self.live.values().map(|(iv, _)| iv)
    }
}
