//! Desk-scale verifier for the weighted-case hardness construction: encode a
//! circle-layered graph's minimum-weight odd cycle as a weighted interval
//! scheduling instance, solve it with the naive weighted engine, decode the
//! cycle weight, and cross-check an exhaustive cycle enumeration.

use crate::domain::{Endpoint, Error, Interval, IntervalId, Result};
use crate::oracle;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// k-partite digraph, k = 2l+1, edges from layer p to layer (p mod k)+1.
#[derive(Clone, Debug)]
pub struct CircleLayeredGraph {
    pub l: usize,
    pub nodes_per_part: usize,
    pub max_weight: u64,
    /// edges[p][u][v]: weight of the edge from node u of layer p+1 to node v
    /// of the next layer (None = absent)
    pub edges: Vec<Vec<Vec<Option<u64>>>>,
}

impl CircleLayeredGraph {
    pub fn layers(&self) -> usize {
        2 * self.l + 1
    }

    pub fn edge_count(&self) -> usize {
        self.edges
            .iter()
            .flat_map(|layer| layer.iter())
            .flat_map(|row| row.iter())
            .filter(|w| w.is_some())
            .count()
    }
}

/// Deterministic random instance; `density` is the per-edge keep probability.
pub fn gen_graph(
    l: usize,
    nodes_per_part: usize,
    max_weight: u64,
    density: f64,
    seed: u64,
) -> CircleLayeredGraph {
    assert!(l >= 1 && nodes_per_part >= 1 && max_weight >= 1);
    let k = 2 * l + 1;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut edges = vec![vec![vec![None; nodes_per_part]; nodes_per_part]; k];
    for layer in edges.iter_mut() {
        for row in layer.iter_mut() {
            for w in row.iter_mut() {
                if rng.gen_bool(density.clamp(0.0, 1.0)) {
                    *w = Some(rng.gen_range(1..=max_weight));
                }
            }
        }
    }
    CircleLayeredGraph { l, nodes_per_part, max_weight, edges }
}

/// The weighted interval instance for one guess of the first-layer node `s`.
#[derive(Clone, Debug)]
pub struct ReductionInstance {
    pub intervals: Vec<Interval>,
    pub scale: u64,
    pub total_span: u64,
}

/// Builds the instance for guess `s`: every forward edge becomes an interval,
/// the guess contributes [-1, s), and the closing edges into `s` land on
/// [2l*n + u, (2l+1)*n).
pub fn build_instance(g: &CircleLayeredGraph, s: usize) -> Result<ReductionInstance> {
    let n = g.nodes_per_part as i64;
    if s >= g.nodes_per_part {
        return Err(Error::NodeOutOfRange { node: s, part_size: g.nodes_per_part });
    }
    let k = g.layers() as u64;
    let scale = k * (g.max_weight + 1);
    let mut intervals = Vec::new();
    let mut seq = 0u64;
    // ends perturb below starts at equal coordinates so that consecutive
    // edge intervals chain without gaps
    let mut push = |lo: i64, hi: i64, w: u64, intervals: &mut Vec<Interval>| {
        let id = IntervalId(intervals.len() as u64);
        intervals.push(Interval::new(
            id,
            Endpoint::new(lo, (1 << 32) + seq),
            Endpoint::new(hi, seq),
            w,
        ));
        seq += 1;
    };
    // forward edges: layer p (1-based) node u -> node v of layer p+1
    for p in 1..=(2 * g.l) {
        for u in 0..g.nodes_per_part {
            for v in 0..g.nodes_per_part {
                if let Some(w) = g.edges[p - 1][u][v] {
                    let lo = (p as i64 - 1) * n + u as i64;
                    let hi = p as i64 * n + v as i64;
                    let weight = (hi - lo) as u64 * scale + (g.max_weight - w);
                    push(lo, hi, weight, &mut intervals);
                }
            }
        }
    }
    // the guess interval [-1, s)
    let guess_len = (s as i64 + 1) as u64;
    push(-1, s as i64, guess_len * scale, &mut intervals);
    // closing edges into s: [2l*n + u, (2l+1)*n)
    for u in 0..g.nodes_per_part {
        if let Some(w) = g.edges[2 * g.l][u][s] {
            let lo = 2 * g.l as i64 * n + u as i64;
            let hi = (2 * g.l as i64 + 1) * n;
            let weight = (hi - lo) as u64 * scale + (g.max_weight - w);
            push(lo, hi, weight, &mut intervals);
        }
    }
    let total_span = (k as i64 * n + 1) as u64;
    Ok(ReductionInstance { intervals, scale, total_span })
}

/// Decodes a full-span optimum back into the cycle weight.
pub fn decode(g: &CircleLayeredGraph, inst: &ReductionInstance, value: u64) -> Option<u64> {
    let k = g.layers() as u64;
    let threshold = inst.total_span * inst.scale;
    if value < threshold {
        return None;
    }
    Some(k * g.max_weight - (value - threshold))
}

/// For every guess of the first-layer node: rebuild the guess-dependent
/// intervals, solve weighted interval scheduling from scratch, keep the best
/// full-span solution. Returns (min cycle weight, witness node).
pub fn solve(g: &CircleLayeredGraph) -> Option<(u64, usize)> {
    let mut best: Option<(u64, usize)> = None;
    for s in 0..g.nodes_per_part {
        let inst = build_instance(g, s).expect("s in range");
        let value = oracle::static_wis(&inst.intervals);
        if let Some(cycle) = decode(g, &inst, value) {
            if best.map_or(true, |(b, _)| cycle < b) {
                best = Some((cycle, s));
            }
        }
    }
    best
}

/// Exhaustive minimum-weight layered cycle, for cross-checking.
pub fn brute_cycle(g: &CircleLayeredGraph) -> Result<Option<u64>> {
    let n = g.nodes_per_part as u64;
    let k = g.layers() as u32;
    let tuples = n.checked_pow(k).unwrap_or(u64::MAX);
    if tuples > 1_000_000 {
        return Err(Error::TooLarge { cycles: tuples, limit: 1_000_000 });
    }
    let mut best: Option<u64> = None;
    let mut pick = vec![0usize; k as usize];
    loop {
        let mut total = Some(0u64);
        for p in 0..k as usize {
            let u = pick[p];
            let v = pick[(p + 1) % k as usize];
            total = match (total, g.edges[p][u][v]) {
                (Some(t), Some(w)) => Some(t + w),
                _ => None,
            };
            if total.is_none() {
                break;
            }
        }
        if let Some(t) = total {
            if best.map_or(true, |b| t < b) {
                best = Some(t);
            }
        }
        // next tuple
        let mut i = 0;
        while i < pick.len() {
            pick[i] += 1;
            if pick[i] < g.nodes_per_part {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
        if i == pick.len() {
            break;
        }
    }
    Ok(best)
}

/// Runs the encoded solver against the brute-force enumeration.
pub fn verify(g: &CircleLayeredGraph) -> (Option<(u64, usize)>, Option<u64>, bool) {
    let got = solve(g);
    let want = brute_cycle(g).expect("desk scale");
    let ok = got.map(|(w, _)| w) == want;
    (got, want, ok)
}
