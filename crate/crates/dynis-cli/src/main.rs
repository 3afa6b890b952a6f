//! Command-line harness: generate traces, run engines, cross-verify,
//! benchmark, and exercise the weighted-case hardness construction.

use clap::{Args, Parser, Subcommand};
use dynis::domain::{format_trace, parse_trace, Error, TraceOp};
use dynis::harness::{
    bench_one, digest_answers, make_engine, run_trace, verify_trace, EngineKind,
    BENCH_CSV_HEADER,
};
use dynis::reduction;
use dynis::workload::{gen, GenParams, WorkloadModel};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dynis", about = "dynamic interval scheduling engines and harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct EngineArgs {
    /// engine: naive, sqrt, cuberoot, two, multi, deleteonly, insertonly
    #[arg(long, default_value = "naive")]
    engine: String,
    /// machine count (sqrt/cuberoot: 1, two: 2, multi: 3..=6)
    #[arg(long, default_value_t = 1)]
    machines: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a trace file
    Gen {
        #[arg(long, default_value = "uniform")]
        model: String,
        #[arg(long, default_value_t = 1000)]
        ops: usize,
        /// insert:delete:query weights
        #[arg(long, default_value = "45:35:20")]
        mix: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        coord_range: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a trace through one engine, printing one answer per query
    Run {
        trace: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a trace through two engines and compare their answers
    Verify {
        trace: PathBuf,
        #[arg(long, default_value = "cuberoot")]
        engine_a: String,
        #[arg(long, default_value = "naive")]
        engine_b: String,
        #[arg(long, default_value_t = 1)]
        machines: usize,
    },
    /// Benchmark engines over traces, emitting CSV records
    Bench {
        traces: Vec<PathBuf>,
        /// comma-separated engine list
        #[arg(long, default_value = "naive,sqrt,cuberoot")]
        engines: String,
        #[arg(long, default_value_t = 1)]
        machines: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a circle-layered graph, solve the encoded instance for every
    /// first-layer guess, and compare with brute-force cycle enumeration
    Reduce {
        #[arg(long, default_value_t = 1)]
        l: usize,
        #[arg(long, default_value_t = 3)]
        nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 9)]
        max_weight: u64,
        #[arg(long, default_value_t = 0.6)]
        density: f64,
    },
}

fn parse_mix(s: &str) -> Result<(u32, u32, u32), Error> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::BadMix(format!("mix must be i:d:q, got `{s}`")));
    }
    let nums: Result<Vec<u32>, _> = parts.iter().map(|p| p.parse()).collect();
    match nums {
        Ok(v) => Ok((v[0], v[1], v[2])),
        Err(_) => Err(Error::BadMix(format!("bad mix `{s}`"))),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> std::io::Result<()> {
    match out {
        Some(p) => fs::write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fallible() -> Result<ExitCode, Box<dyn std::error::Error>> {
    let cli = Cli::parse();
    let shadow = std::env::var("DYNISCHED_DEBUG_ASSERT").map_or(false, |v| v == "1");
    match cli.cmd {
        Cmd::Gen { model, ops, mix, seed, coord_range, out } => {
            let model = WorkloadModel::parse(&model)?;
            let mix = parse_mix(&mix)?;
            let trace = gen(model, GenParams { ops, mix, coord_range, seed })?;
            emit(&out, &format_trace(&trace))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Run { trace, engine, out } => {
            let ops = parse_trace(&fs::read_to_string(&trace)?)?;
            let kind = EngineKind::parse(&engine.engine)?;
            let mut e = make_engine(kind, engine.machines)?;
            let outcome = run_trace(e.as_mut(), &ops, shadow)?;
            let mut text = String::new();
            for a in &outcome.answers {
                text.push_str(&format!("{a}\n"));
            }
            emit(&out, &text)?;
            eprintln!(
                "# engine={} machines={} elementary_ops={} rebuilds={} wall_ns={} digest={:016x}",
                kind.name(),
                engine.machines,
                outcome.elementary_ops,
                outcome.rebuild_count,
                outcome.wall_ns,
                digest_answers(&outcome.answers)
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { trace, engine_a, engine_b, machines } => {
            let ops = parse_trace(&fs::read_to_string(&trace)?)?;
            let a = EngineKind::parse(&engine_a)?;
            let b = EngineKind::parse(&engine_b)?;
            match verify_trace(&ops, a, b, machines)? {
                Ok(()) => {
                    println!("PASS");
                    Ok(ExitCode::SUCCESS)
                }
                Err(q) => {
                    println!("FAIL at query index {q}");
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Cmd::Bench { traces, engines, machines, out } => {
            let kinds: Result<Vec<EngineKind>, Error> =
                engines.split(',').map(EngineKind::parse).collect();
            let kinds = kinds?;
            let mut text = String::from(BENCH_CSV_HEADER);
            text.push('\n');
            for path in &traces {
                let ops: Vec<TraceOp> = parse_trace(&fs::read_to_string(path)?)?;
                for kind in &kinds {
                    let rec = bench_one(*kind, machines, &ops, 0)?;
                    text.push_str(&rec.csv_row());
                    text.push('\n');
                }
            }
            emit(&out, &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Reduce { l, nodes, seed, max_weight, density } => {
            let g = reduction::gen_graph(l, nodes, max_weight, density, seed);
            let (got, want, ok) = reduction::verify(&g);
            println!(
                "graph: l={l} layers={} nodes/layer={nodes} edges={} seed={seed}",
                g.layers(),
                g.edge_count()
            );
            match got {
                Some((w, s)) => println!("encoded solver: min cycle weight {w} via node {s}"),
                None => println!("encoded solver: no cycle"),
            }
            match want {
                Some(w) => println!("brute force:    min cycle weight {w}"),
                None => println!("brute force:    no cycle"),
            }
            println!("{}", if ok { "PASS" } else { "FAIL" });
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn main() -> ExitCode {
    match fallible() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
