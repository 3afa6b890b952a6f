//! Deterministic workload generators producing legal traces.

use crate::domain::{Endpoint, Error, Interval, IntervalId, Result, TraceOp};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum WorkloadModel {
    Uniform,
    /// containment chains to stress the active sets
    Nested,
    /// advancing window, deletes biased toward the oldest live intervals
    Sliding,
    /// hammers one key region to stress split and merge
    PartChurn,
}

impl WorkloadModel {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(WorkloadModel::Uniform),
            "nested" => Ok(WorkloadModel::Nested),
            "sliding" => Ok(WorkloadModel::Sliding),
            "partchurn" => Ok(WorkloadModel::PartChurn),
            other => Err(Error::BadMix(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GenParams {
    pub ops: usize,
    /// insert/delete/query weights; normalized internally
    pub mix: (u32, u32, u32),
    pub coord_range: i64,
    pub seed: u64,
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        let (i, d, q) = self.mix;
        if i + d + q == 0 {
            return Err(Error::BadMix("mix weights sum to zero".into()));
        }
        if i == 0 && self.ops > 0 {
            return Err(Error::BadMix("mix without inserts cannot stay legal".into()));
        }
        Ok(())
    }
}

/// Generates a legal trace: deletes always target live ids; when nothing is
/// live a scheduled delete becomes an insert.
pub fn gen(model: WorkloadModel, params: GenParams) -> Result<Vec<TraceOp>> {
    params.validate()?;
    let mut rng = StdRng::seed_from_u64(params.seed);
    let (wi, wd, wq) = params.mix;
    let total = (wi + wd + wq) as f64;
    let p_ins = wi as f64 / total;
    let p_del = wd as f64 / total;
    let mut live: Vec<Interval> = Vec::new();
    let mut ops = Vec::with_capacity(params.ops);
    let mut next_id = 0u64;
    let mut tie = 1u64;
    let range = params.coord_range.max(4);
    let mut window_lo = 0i64;
    let mk = |s: i64, len: i64, next_id: &mut u64, tie: &mut u64| {
        let iv = Interval::new(
            IntervalId(*next_id),
            Endpoint::new(s, *tie),
            Endpoint::new(s + len.max(1), *tie + 1),
            1,
        );
        *next_id += 1;
        *tie += 2;
        iv
    };
    for step in 0..params.ops {
        let r: f64 = rng.gen();
        if r < p_ins || (r < p_ins + p_del && live.is_empty()) {
            let iv = match model {
                WorkloadModel::Uniform => {
                    let s = rng.gen_range(0..range);
                    let len = rng.gen_range(1..=range / 4 + 1);
                    mk(s, len, &mut next_id, &mut tie)
                }
                WorkloadModel::Nested => {
                    if !live.is_empty() && rng.gen_bool(0.6) {
                        // nest strictly inside a random live interval
                        let host = live[rng.gen_range(0..live.len())];
                        let span = host.end.coord - host.start.coord;
                        if span >= 3 {
                            let off = rng.gen_range(1..span.max(2));
                            let len = rng.gen_range(1..=(span - off).max(1));
                            mk(host.start.coord + off, len, &mut next_id, &mut tie)
                        } else {
                            let s = rng.gen_range(0..range);
                            mk(s, rng.gen_range(1..=range / 2 + 1), &mut next_id, &mut tie)
                        }
                    } else {
                        let s = rng.gen_range(0..range);
                        mk(s, rng.gen_range(range / 4 + 1..=range / 2 + 1), &mut next_id, &mut tie)
                    }
                }
                WorkloadModel::Sliding => {
                    window_lo += rng.gen_range(0..=2);
                    let s = window_lo + rng.gen_range(0..range / 8 + 2);
                    mk(s, rng.gen_range(1..=range / 8 + 1), &mut next_id, &mut tie)
                }
                WorkloadModel::PartChurn => {
                    // most inserts crowd one narrow band
                    if rng.gen_bool(0.8) {
                        let s = rng.gen_range(0..range / 16 + 2);
                        mk(s, rng.gen_range(1..=4), &mut next_id, &mut tie)
                    } else {
                        let s = rng.gen_range(0..range);
                        mk(s, rng.gen_range(1..=range / 4 + 1), &mut next_id, &mut tie)
                    }
                }
            };
            live.push(iv);
            ops.push(TraceOp::Insert(iv));
        } else if r < p_ins + p_del {
            let k = match model {
                WorkloadModel::Sliding => {
                    // bias toward the oldest live decile
                    let cap = (live.len() / 10 + 1).min(live.len());
                    rng.gen_range(0..cap)
                }
                _ => rng.gen_range(0..live.len()),
            };
            let victim = live.remove(k);
            ops.push(TraceOp::Delete(victim.id));
        } else {
            ops.push(TraceOp::Query);
        }
        let _ = step;
    }
    Ok(ops)
}

/// Insert-only prefix then deletes, queries sprinkled through both phases.
pub fn gen_delete_only(ops: usize, coord_range: i64, query_every: usize, seed: u64) -> Vec<TraceOp> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(ops);
    let inserts = ops / 2;
    let mut live: Vec<IntervalId> = Vec::new();
    let mut tie = 1u64;
    for id in 0..inserts as u64 {
        let s = rng.gen_range(0..coord_range);
        let f = s + rng.gen_range(1..=coord_range / 4 + 1);
        out.push(TraceOp::Insert(Interval::new(
            IntervalId(id),
            Endpoint::new(s, tie),
            Endpoint::new(f, tie + 1),
            1,
        )));
        tie += 2;
        live.push(IntervalId(id));
        if id as usize % query_every == 0 {
            out.push(TraceOp::Query);
        }
    }
    while out.len() < ops && !live.is_empty() {
        let k = rng.gen_range(0..live.len());
        out.push(TraceOp::Delete(live.swap_remove(k)));
        if out.len() % query_every == 0 {
            out.push(TraceOp::Query);
        }
    }
    out.truncate(ops);
    out
}

pub fn gen_insert_only(ops: usize, coord_range: i64, query_every: usize, seed: u64) -> Vec<TraceOp> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(ops);
    let mut tie = 1u64;
    let mut id = 0u64;
    while out.len() < ops {
        let s = rng.gen_range(0..coord_range);
        let f = s + rng.gen_range(1..=coord_range / 4 + 1);
        out.push(TraceOp::Insert(Interval::new(
            IntervalId(id),
            Endpoint::new(s, tie),
            Endpoint::new(f, tie + 1),
            1,
        )));
        id += 1;
        tie += 2;
        if out.len() % query_every == 0 {
            out.push(TraceOp::Query);
        }
    }
    out.truncate(ops);
    out
}
