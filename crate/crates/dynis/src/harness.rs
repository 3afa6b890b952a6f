//! Trace execution, engine cross-verification and benchmark records.

use crate::domain::{Error, Result, TraceOp};
use crate::engine::{Engine, NaiveEngine};
use crate::engine_cuberoot::CubeRootEngine;
use crate::engine_multi::MultiEngine;
use crate::engine_sqrt::SqrtEngine;
use crate::engine_two::TwoEngine;
use crate::mode_engines::{DeleteOnlyEngine, InsertOnlyEngine};
use crate::oracle;
use std::time::Instant;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EngineKind {
    Naive,
    Sqrt,
    CubeRoot,
    Two,
    Multi,
    DeleteOnly,
    InsertOnly,
}

impl EngineKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(EngineKind::Naive),
            "sqrt" => Ok(EngineKind::Sqrt),
            "cuberoot" => Ok(EngineKind::CubeRoot),
            "two" => Ok(EngineKind::Two),
            "multi" => Ok(EngineKind::Multi),
            "deleteonly" => Ok(EngineKind::DeleteOnly),
            "insertonly" => Ok(EngineKind::InsertOnly),
            other => Err(Error::BadMix(format!("unknown engine `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EngineKind::Naive => "naive",
            EngineKind::Sqrt => "sqrt",
            EngineKind::CubeRoot => "cuberoot",
            EngineKind::Two => "two",
            EngineKind::Multi => "multi",
            EngineKind::DeleteOnly => "deleteonly",
            EngineKind::InsertOnly => "insertonly",
        }
    }
}

/// Instantiates an engine, validating the machine count it supports.
pub fn make_engine(kind: EngineKind, machines: usize) -> Result<Box<dyn Engine>> {
    let mismatch = |engine: &'static str| Error::EngineMachineMismatch { engine, machines };
    match kind {
        EngineKind::Naive => Ok(Box::new(NaiveEngine::new(machines)?)),
        EngineKind::Sqrt => {
            if machines != 1 {
                return Err(mismatch("sqrt"));
            }
            Ok(Box::new(SqrtEngine::new()))
        }
        EngineKind::CubeRoot => {
            if machines != 1 {
                return Err(mismatch("cuberoot"));
            }
            Ok(Box::new(CubeRootEngine::new()))
        }
        EngineKind::Two => {
            if machines != 2 {
                return Err(mismatch("two"));
            }
            Ok(Box::new(TwoEngine::new()))
        }
        EngineKind::Multi => Ok(Box::new(MultiEngine::new(machines)?)),
        EngineKind::DeleteOnly => {
            if machines != 1 {
                return Err(mismatch("deleteonly"));
            }
            Ok(Box::new(DeleteOnlyEngine::new()))
        }
        EngineKind::InsertOnly => {
            if machines != 1 {
                return Err(mismatch("insertonly"));
            }
            Ok(Box::new(InsertOnlyEngine::new()))
        }
    }
}

/// 64-bit rolling hash over the answer stream: h = h * 1099511628211 xor a,
/// starting from 14695981039346656037 (FNV-1a order with the answer mixed in
/// as a full word).
pub fn digest_answers(answers: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for a in answers {
        h = h.wrapping_mul(0x100000001b3) ^ a;
    }
    h
}

pub struct RunOutcome {
    pub answers: Vec<u64>,
    pub elementary_ops: u64,
    pub rebuild_count: u64,
    pub wall_ns: u128,
}

/// Feeds the trace to the engine; `shadow` re-derives every answer with the
/// reference oracle and panics on divergence.
pub fn run_trace(engine: &mut dyn Engine, ops: &[TraceOp], shadow: bool) -> Result<RunOutcome> {
    let mut answers = Vec::new();
    let mut live: Vec<crate::domain::Interval> = Vec::new();
    let start = Instant::now();
    for (k, op) in ops.iter().enumerate() {
        let out = engine.apply(op)?;
        if shadow {
            match op {
                TraceOp::Insert(iv) => live.push(*iv),
                TraceOp::Delete(id) => {
                    let at = live.iter().position(|iv| iv.id == *id).unwrap();
                    live.swap_remove(at);
                }
                TraceOp::Query => {
                    let want = if engine.machines() == 1 {
                        oracle::static_is(&live)
                    } else {
                        oracle::static_multi(&live, engine.machines()).count as u64
                    };
                    assert_eq!(
                        out,
                        Some(want),
                        "shadow divergence at op {k} for engine {}",
                        engine.name()
                    );
                }
            }
        }
        if let Some(a) = out {
            answers.push(a);
        }
    }
    Ok(RunOutcome {
        answers,
        elementary_ops: engine.elementary_ops(),
        rebuild_count: engine.rebuild_count(),
        wall_ns: start.elapsed().as_nanos(),
    })
}

/// Streaming comparison of two engines' answers on one trace.
pub fn verify_trace(
    ops: &[TraceOp],
    a: EngineKind,
    b: EngineKind,
    machines: usize,
) -> Result<std::result::Result<(), usize>> {
    let mut ea = make_engine(a, machines)?;
    let mut eb = make_engine(b, machines)?;
    let mut qidx = 0usize;
    for op in ops {
        let ra = ea.apply(op)?;
        let rb = eb.apply(op)?;
        if matches!(op, TraceOp::Query) {
            if ra != rb {
                return Ok(Err(qidx));
            }
            qidx += 1;
        }
    }
    Ok(Ok(()))
}

#[derive(Clone, Debug)]
pub struct BenchRecord {
    pub engine: &'static str,
    pub machines: usize,
    pub ops: usize,
    pub seed: u64,
    pub elementary_ops: u64,
    pub rebuild_count: u64,
    pub wall_ns: u128,
    pub answers_digest: u64,
}

pub const BENCH_CSV_HEADER: &str =
    "engine,machines,ops,seed,elementary_ops,rebuild_count,wall_ns,answers_digest";

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:016x}",
            self.engine,
            self.machines,
            self.ops,
            self.seed,
            self.elementary_ops,
            self.rebuild_count,
            self.wall_ns,
            self.answers_digest
        )
    }
}

pub fn bench_one(
    kind: EngineKind,
    machines: usize,
    ops: &[TraceOp],
    seed: u64,
) -> Result<BenchRecord> {
    let mut engine = make_engine(kind, machines)?;
    let out = run_trace(engine.as_mut(), ops, false)?;
    Ok(BenchRecord {
        engine: kind.name(),
        machines,
        ops: ops.len(),
        seed,
        elementary_ops: out.elementary_ops,
        rebuild_count: out.rebuild_count,
        wall_ns: out.wall_ns,
        answers_digest: digest_answers(&out.answers),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{gen, GenParams, WorkloadModel};

    fn trace(seed: u64, ops: usize) -> Vec<TraceOp> {
        gen(
            WorkloadModel::Uniform,
            GenParams { ops, mix: (45, 35, 20), coord_range: 400, seed },
        )
        .unwrap()
    }

    #[test]
    fn verify_all_single_machine_engines() {
        for seed in 0..4 {
            let t = trace(seed, 300);
            for kind in [EngineKind::Sqrt, EngineKind::CubeRoot] {
                let r = verify_trace(&t, kind, EngineKind::Naive, 1).unwrap();
                assert!(r.is_ok(), "{:?} diverged on seed {seed}", kind);
            }
        }
    }

    #[test]
    fn verify_multi_machine_engines() {
        for seed in 0..3 {
            let t = trace(seed, 200);
            assert!(verify_trace(&t, EngineKind::Two, EngineKind::Naive, 2).unwrap().is_ok());
            assert!(verify_trace(&t, EngineKind::Multi, EngineKind::Naive, 3).unwrap().is_ok());
        }
    }

    #[test]
    fn all_models_verify_across_engines() {
        for model in [
            WorkloadModel::Nested,
            WorkloadModel::Sliding,
            WorkloadModel::PartChurn,
        ] {
            for seed in 0..3 {
                let t = gen(
                    model,
                    GenParams { ops: 400, mix: (40, 40, 20), coord_range: 600, seed: 70 + seed },
                )
                .unwrap();
                for kind in [EngineKind::Sqrt, EngineKind::CubeRoot] {
                    let r = verify_trace(&t, kind, EngineKind::Naive, 1).unwrap();
                    assert!(r.is_ok(), "{kind:?} diverged on {model:?} seed {seed}");
                }
                assert!(verify_trace(&t, EngineKind::Two, EngineKind::Naive, 2)
                    .unwrap()
                    .is_ok());
                assert!(verify_trace(&t, EngineKind::Multi, EngineKind::Naive, 3)
                    .unwrap()
                    .is_ok());
            }
        }
    }

    #[test]
    fn digests_agree_across_engines() {
        let t = trace(5, 250);
        let a = bench_one(EngineKind::Naive, 1, &t, 5).unwrap();
        let b = bench_one(EngineKind::Sqrt, 1, &t, 5).unwrap();
        let c = bench_one(EngineKind::CubeRoot, 1, &t, 5).unwrap();
        assert_eq!(a.answers_digest, b.answers_digest);
        assert_eq!(a.answers_digest, c.answers_digest);
        let row = a.csv_row();
        assert_eq!(row.split(',').count(), 8);
    }

    #[test]
    fn machine_mismatch_rejected() {
        assert!(matches!(
            make_engine(EngineKind::Sqrt, 2),
            Err(Error::EngineMachineMismatch { .. })
        ));
        assert!(matches!(
            make_engine(EngineKind::Two, 3),
            Err(Error::EngineMachineMismatch { .. })
        ));
        assert!(make_engine(EngineKind::Multi, 2).is_err());
        assert!(make_engine(EngineKind::Naive, 4).is_ok());
    }

    #[test]
    fn shadow_checking_runs() {
        let t = trace(9, 150);
        let mut e = make_engine(EngineKind::CubeRoot, 1).unwrap();
        run_trace(e.as_mut(), &t, true).unwrap();
    }
}
