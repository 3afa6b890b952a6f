//! Polylog engines for the restricted update modes: the greedy forest over
//! the whole active set answers queries, no partitioning or buffering needed.
//! The insert-only engine is fully incremental; the delete-only engine runs
//! incrementally through its build phase, then swaps the front into
//! delete-only mode once.

use crate::active_set::{DominanceFront, Mode};
use crate::domain::{Endpoint, Error, Interval, IntervalId, Result, TraceOp};
use crate::engine::Engine;
use crate::forest::GreedyForest;
use std::collections::BTreeMap;

struct ModeCore {
    front: DominanceFront,
    forest: GreedyForest,
    live_by_end: BTreeMap<Endpoint, IntervalId>,
}

impl ModeCore {
    fn new() -> Self {
        ModeCore {
            front: DominanceFront::new(Mode::InsertOnly),
            forest: GreedyForest::build(&[], &[]).unwrap(),
            live_by_end: BTreeMap::new(),
        }
    }

    fn insert(&mut self, iv: Interval) -> Result<()> {
        let deactivated = self.front.insert(iv)?;
        self.forest.on_insert(iv, &deactivated)?;
        self.live_by_end.insert(iv.end, iv.id);
        Ok(())
    }

    fn query(&self) -> u64 {
        // the earliest-ending live interval is always active
        match self.live_by_end.values().next() {
            None => 0,
            Some(id) => {
                let node = self.forest.node_of(*id).expect("earliest live is active");
                self.forest.path_stats(node).0
            }
        }
    }

    fn elementary_ops(&self) -> u64 {
        self.front.elementary_ops() + self.forest.elementary_ops()
    }
}

pub struct InsertOnlyEngine {
    core: ModeCore,
}

impl InsertOnlyEngine {
    pub fn new() -> Self {
        InsertOnlyEngine { core: ModeCore::new() }
    }
}

impl Default for InsertOnlyEngine {
    fn default() -> Self {
        Self::new()
    }
}

impl Engine for InsertOnlyEngine {
    fn apply(&mut self, op: &TraceOp) -> Result<Option<u64>> {
        match op {
            TraceOp::Insert(iv) => {
                self.core.insert(*iv)?;
                Ok(None)
            }
            TraceOp::Delete(_) => Err(Error::ModeViolation("delete in insert-only engine")),
            TraceOp::Query => Ok(Some(self.core.query())),
        }
    }

    fn elementary_ops(&self) -> u64 {
        self.core.elementary_ops()
    }

    fn machines(&self) -> usize {
        1
    }

    fn name(&self) -> &'static str {
        "insertonly"
    }
}

pub struct DeleteOnlyEngine {
    core: ModeCore,
    deleting: bool,
    rebuilds: u64,
}

impl DeleteOnlyEngine {
    pub fn new() -> Self {
        DeleteOnlyEngine { core: ModeCore::new(), deleting: false, rebuilds: 0 }
    }
}

impl Default for DeleteOnlyEngine {
    fn default() -> Self {
        Self::new()
    }
}

impl Engine for DeleteOnlyEngine {
    fn apply(&mut self, op: &TraceOp) -> Result<Option<u64>> {
        match op {
            TraceOp::Insert(iv) => {
                if self.deleting {
                    return Err(Error::ModeViolation("insert after delete in delete-only engine"));
                }
                self.core.insert(*iv)?;
                Ok(None)
            }
            TraceOp::Delete(id) => {
                if !self.deleting {
                    // one-time switch: same forest, delete-mode front
                    let items: Vec<Interval> =
                        self.core.front.iter_live().copied().collect();
                    self.core.front = DominanceFront::build(Mode::DeleteOnly, &items);
                    self.deleting = true;
                    self.rebuilds += 1;
                }
                let was_active = self.core.front.is_active(*id)?;
                let iv = *self.core.front.get(*id).unwrap();
                let activated = self.core.front.delete(*id)?;
                if was_active {
                    self.core.forest.on_delete(*id, &activated)?;
                } else {
                    debug_assert!(activated.is_empty());
                }
                self.core.live_by_end.remove(&iv.end);
                Ok(None)
            }
            TraceOp::Query => Ok(Some(self.core.query())),
        }
    }

    fn elementary_ops(&self) -> u64 {
        self.core.elementary_ops()
    }

    fn rebuild_count(&self) -> u64 {
        self.rebuilds
    }

    fn machines(&self) -> usize {
        1
    }

    fn name(&self) -> &'static str {
        "deleteonly"
    }
}

pub fn delete_witness(engine: &DeleteOnlyEngine) -> (u64, u64) {
    (engine.core.forest.reparent_invocations(), engine.core.front.activation_events())
}
