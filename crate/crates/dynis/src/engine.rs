//! The engine contract shared by every scheduler, plus the naive
//! recompute-from-scratch baseline.

use crate::domain::{Endpoint, Error, Interval, IntervalId, Result, TraceOp};
use std::cell::Cell;
use std::collections::HashMap;

/// Uniform interface: feed one trace op, get an answer for queries.
/// Engines also expose an elementary-operation counter (one tick per
/// comparison or tree-node visit) for the complexity smoke tests.
pub trait Engine {
    fn apply(&mut self, op: &TraceOp) -> Result<Option<u64>>;
    fn elementary_ops(&self) -> u64;
    fn rebuild_count(&self) -> u64 {
        0
    }
    fn machines(&self) -> usize;
    fn name(&self) -> &'static str;
}

/// Recomputes the folklore greedy from scratch after every update, which is
/// the report-after-each-update contract taken literally: collect, sort by
/// end (comparisons ticked), sweep the machines. Queries return the cached
/// answer.
pub struct NaiveEngine {
    m: usize,
    live: HashMap<IntervalId, Interval>,
    cached: u64,
    ops: Cell<u64>,
}

impl NaiveEngine {
    pub fn new(machines: usize) -> Result<Self> {
        if machines == 0 {
            return Err(Error::UnsupportedMachineCount(0));
        }
        Ok(NaiveEngine { m: machines, live: HashMap::new(), cached: 0, ops: Cell::new(0) })
    }

    fn recompute(&mut self) {
        let mut items: Vec<(Endpoint, Endpoint)> =
            self.live.values().map(|iv| (iv.end, iv.start)).collect();
        let ops = &self.ops;
        items.sort_unstable_by(|a, b| {
            ops.set(ops.get() + 1);
            a.cmp(b)
        });
        let mut busy = vec![Endpoint::NEG_INF; self.m];
        let mut count = 0u64;
        for (end, start) in items {
            // pick the busiest compatible machine
            let mut best: Option<usize> = None;
            for (k, b) in busy.iter().enumerate() {
                ops.set(ops.get() + 1);
                if *b <= start && best.map_or(true, |x| busy[x] < *b) {
                    best = Some(k);
                }
            }
            if let Some(k) = best {
                busy[k] = end;
                count += 1;
            }
        }
        self.cached = count;
    }
}

impl Engine for NaiveEngine {
    fn apply(&mut self, op: &TraceOp) -> Result<Option<u64>> {
        match op {
            TraceOp::Insert(iv) => {
                if self.live.contains_key(&iv.id) {
                    return Err(Error::DuplicateId(iv.id));
                }
                self.live.insert(iv.id, *iv);
                self.recompute();
                Ok(None)
            }
            TraceOp::Delete(id) => {
                self.live.remove(id).ok_or(Error::UnknownId(*id))?;
                self.recompute();
                Ok(None)
            }
            TraceOp::Query => Ok(Some(self.cached)),
        }
    }

    fn elementary_ops(&self) -> u64 {
        self.ops.get()
    }

    fn machines(&self) -> usize {
        self.m
    }

    fn name(&self) -> &'static str {
        "naive"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{self, fixtures::*};

    #[test]
    fn naive_matches_oracle() {
        let mut e = NaiveEngine::new(1).unwrap();
        for iv in fix1() {
            e.apply(&TraceOp::Insert(iv)).unwrap();
        }
        assert_eq!(e.apply(&TraceOp::Query).unwrap(), Some(3));
        e.apply(&TraceOp::Delete(FIX1_B)).unwrap();
        let left: Vec<_> = fix1().into_iter().filter(|i| i.id != FIX1_B).collect();
        assert_eq!(e.apply(&TraceOp::Query).unwrap(), Some(oracle::static_is(&left)));

        let mut e2 = NaiveEngine::new(2).unwrap();
        for iv in fix3() {
            e2.apply(&TraceOp::Insert(iv)).unwrap();
        }
        assert_eq!(e2.apply(&TraceOp::Query).unwrap(), Some(4));
    }

    #[test]
    fn naive_rejects_bad_ids() {
        let mut e = NaiveEngine::new(1).unwrap();
        e.apply(&TraceOp::Insert(fix1()[0])).unwrap();
        assert!(e.apply(&TraceOp::Insert(fix1()[0])).is_err());
        assert!(e.apply(&TraceOp::Delete(IntervalId(42))).is_err());
    }
}
