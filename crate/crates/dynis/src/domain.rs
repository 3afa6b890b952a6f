//! Core domain types: perturbed endpoints, intervals, greedy states and the
//! trace format shared by every engine and the reference oracles.

use std::fmt;

/// A point on the time axis. Stored endpoints are made pairwise distinct by
/// the `(coord, tie)` lexicographic order; `tie` is a sequence number assigned
/// when the owning interval enters a trace.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Endpoint {
    pub coord: i64,
    pub tie: u64,
}

impl Endpoint {
    pub const NEG_INF: Endpoint = Endpoint { coord: i64::MIN, tie: 0 };
    pub const POS_INF: Endpoint = Endpoint { coord: i64::MAX, tie: u64::MAX };

    pub fn new(coord: i64, tie: u64) -> Self {
        Endpoint { coord, tie }
    }

    pub fn is_finite(&self) -> bool {
        *self != Endpoint::NEG_INF && *self != Endpoint::POS_INF
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Endpoint::NEG_INF {
            write!(f, "-inf")
        } else if *self == Endpoint::POS_INF {
            write!(f, "+inf")
        } else {
            write!(f, "{}.{}", self.coord, self.tie)
        }
    }
}

/// Opaque interval handle, unique among live intervals.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct IntervalId(pub u64);

impl fmt::Display for IntervalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Interval {
    pub id: IntervalId,
    pub start: Endpoint,
    pub end: Endpoint,
    pub weight: u64,
}

impl Interval {
    pub fn new(id: IntervalId, start: Endpoint, end: Endpoint, weight: u64) -> Self {
        assert!(start < end, "interval must have start < end");
        Interval { id, start, end, weight }
    }
}

/// Disjoint intervals can share a machine.
pub fn compatible(a: &Interval, b: &Interval) -> bool {
    a.end <= b.start || b.end <= a.start
}

/// `outer` strictly contains `inner` under the perturbed order.
pub fn contains(outer: &Interval, inner: &Interval) -> bool {
    outer.start <= inner.start && inner.end <= outer.end
}

/// The `≺` order used throughout: earlier end time first.
pub fn precedes(a: &Interval, b: &Interval) -> bool {
    a.end < b.end
}

/// One machine of a greedy state: either a concrete accepted interval or a
/// marker recording only the time up to which the machine is busy.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Component {
    Real(IntervalId),
    Barred(Endpoint),
}

/// Multiset of exactly `m` machine components, kept sorted by busy-until.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GreedyState {
    components: Vec<Component>,
    busy: Vec<Endpoint>,
}

impl GreedyState {
    /// The all-idle state: `m` machines busy up to minus infinity.
    pub fn initial(m: usize) -> Self {
        assert!(m >= 1);
        GreedyState {
            components: vec![Component::Barred(Endpoint::NEG_INF); m],
            busy: vec![Endpoint::NEG_INF; m],
        }
    }

    /// Builds a state from components; `busy_of` resolves a Real id to its
    /// busy-until endpoint.
    pub fn from_components<F: Fn(IntervalId) -> Endpoint>(comps: &[Component], busy_of: F) -> Self {
        let mut pairs: Vec<(Endpoint, Component)> = comps
            .iter()
            .map(|c| {
                let b = match c {
                    Component::Real(id) => busy_of(*id),
                    Component::Barred(t) => *t,
                };
                (b, *c)
            })
            .collect();
        pairs.sort_by_key(|p| p.0);
        GreedyState {
            components: pairs.iter().map(|p| p.1).collect(),
            busy: pairs.iter().map(|p| p.0).collect(),
        }
    }

    pub fn machines(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn busy_untils(&self) -> &[Endpoint] {
        &self.busy
    }

    /// Smallest busy-until over the machines.
    pub fn min_busy(&self) -> Endpoint {
        self.busy[0]
    }

    pub fn max_busy(&self) -> Endpoint {
        *self.busy.last().unwrap()
    }

    /// Replaces the machine at sorted position `idx` and restores order.
    pub fn replace(&mut self, idx: usize, comp: Component, busy: Endpoint) {
        self.components[idx] = comp;
        self.busy[idx] = busy;
        let mut i = idx;
        while i + 1 < self.busy.len() && self.busy[i] > self.busy[i + 1] {
            self.components.swap(i, i + 1);
            self.busy.swap(i, i + 1);
            i += 1;
        }
        while i > 0 && self.busy[i] < self.busy[i - 1] {
            self.components.swap(i, i - 1);
            self.busy.swap(i, i - 1);
            i -= 1;
        }
    }

    pub fn contains_real(&self, id: IntervalId) -> bool {
        self.components.iter().any(|c| matches!(c, Component::Real(x) if *x == id))
    }
}

/// One operation of a trace.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TraceOp {
    Insert(Interval),
    Delete(IntervalId),
    Query,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Error {
    UnknownId(IntervalId),
    DuplicateId(IntervalId),
    ModeViolation(&'static str),
    NotMonotonic,
    DepthOutOfRange { depth: usize, max: usize },
    NonContiguousRange,
    InconsistentActivation,
    UnclassifiableState,
    InactiveEntry(IntervalId),
    NodeOutOfRange { node: usize, part_size: usize },
    TooLarge { cycles: u64, limit: u64 },
    BadMix(String),
    ParseError { line: usize, message: String },
    EngineMachineMismatch { engine: &'static str, machines: usize },
    UnsupportedMachineCount(usize),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnknownId(id) => write!(f, "unknown interval id {id}"),
            Error::DuplicateId(id) => write!(f, "duplicate interval id {id}"),
            Error::ModeViolation(m) => write!(f, "mode violation: {m}"),
            Error::NotMonotonic => write!(f, "interval set is not monotonic"),
            Error::DepthOutOfRange { depth, max } => {
                write!(f, "depth {depth} out of range (max {max})")
            }
            Error::NonContiguousRange => write!(f, "child range is not contiguous"),
            Error::InconsistentActivation => write!(f, "activation list disagrees with active set"),
            Error::UnclassifiableState => write!(f, "greedy state matches no known form"),
            Error::InactiveEntry(id) => write!(f, "query entered part at inactive interval {id}"),
            Error::NodeOutOfRange { node, part_size } => {
                write!(f, "node {node} out of range for part of {part_size} nodes")
            }
            Error::TooLarge { cycles, limit } => {
                write!(f, "cycle enumeration of {cycles} tuples exceeds limit {limit}")
            }
            Error::BadMix(m) => write!(f, "bad operation mix: {m}"),
            Error::ParseError { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::EngineMachineMismatch { engine, machines } => {
                write!(f, "engine {engine} does not support {machines} machines")
            }
            Error::UnsupportedMachineCount(m) => write!(f, "unsupported machine count {m}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;

/// Parses the line-oriented trace format:
/// `I <id> <s> <f> [<w>]`, `D <id>`, `Q`, `#` comments.
///
/// Endpoint ties are assigned from the op index, so every engine replaying the
/// same trace sees identical perturbed endpoints.
pub fn parse_trace(text: &str) -> Result<Vec<TraceOp>> {
    let mut ops = Vec::new();
    let mut tie: u64 = 1;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let kind = tok.next().unwrap();
        let err = |message: String| Error::ParseError { line: lineno + 1, message };
        match kind {
            "I" => {
                let id: u64 = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err("missing or bad id".into()))?;
                let s: i64 = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err("missing or bad start".into()))?;
                let f: i64 = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err("missing or bad end".into()))?;
                let w: u64 = match tok.next() {
                    Some(t) => t.parse().map_err(|_| err("bad weight".into()))?,
                    None => 1,
                };
                if s > f {
                    return Err(err(format!("start {s} after end {f}")));
                }
                let start = Endpoint::new(s, tie);
                let end = Endpoint::new(f, tie + 1);
                tie += 2;
                ops.push(TraceOp::Insert(Interval::new(IntervalId(id), start, end, w)));
            }
            "D" => {
                let id: u64 = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err("missing or bad id".into()))?;
                tie += 2; // keep tie assignment aligned with op index
                ops.push(TraceOp::Delete(IntervalId(id)));
            }
            "Q" => {
                tie += 2;
                ops.push(TraceOp::Query);
            }
            other => return Err(err(format!("unknown op `{other}`"))),
        }
        if tok.next().is_some() && kind != "I" {
            return Err(Error::ParseError { line: lineno + 1, message: "trailing tokens".into() });
        }
    }
    Ok(ops)
}

/// Renders ops back into the trace format (weights of 1 are omitted).
pub fn format_trace(ops: &[TraceOp]) -> String {
    let mut out = String::new();
    for op in ops {
        match op {
            TraceOp::Insert(iv) => {
                if iv.weight == 1 {
                    out.push_str(&format!("I {} {} {}\n", iv.id, iv.start.coord, iv.end.coord));
                } else {
                    out.push_str(&format!(
                        "I {} {} {} {}\n",
                        iv.id, iv.start.coord, iv.end.coord, iv.weight
                    ));
                }
            }
            TraceOp::Delete(id) => out.push_str(&format!("D {id}\n")),
            TraceOp::Query => out.push_str("Q\n"),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub fn iv(id: u64, s: i64, f: i64, tie: u64) -> Interval {
        Interval::new(
            IntervalId(id),
            Endpoint::new(s, tie),
            Endpoint::new(f, tie + 1),
            1,
        )
    }

    #[test]
    fn endpoint_order_and_sentinels() {
        let a = Endpoint::new(0, 5);
        let b = Endpoint::new(0, 6);
        assert!(a < b);
        assert!(Endpoint::NEG_INF < a && a < Endpoint::POS_INF);
        assert!(Endpoint::NEG_INF < Endpoint::new(i64::MIN, 1));
    }

    #[test]
    fn compatible_basic() {
        let a = iv(1, 0, 2, 0);
        let b = iv(2, 3, 5, 2);
        let c = iv(3, 1, 4, 4);
        assert!(compatible(&a, &b));
        assert!(compatible(&b, &a));
        assert!(!compatible(&a, &c));
    }

    #[test]
    fn compatible_touching_depends_on_ties() {
        // (0,2) inserted first, (2,3) second: end tie 1 < start tie 2.
        let a = iv(1, 0, 2, 0);
        let b = iv(2, 2, 3, 2);
        assert!(compatible(&a, &b));
        // Reversed insertion order: (2,3) first, so its start tie 0 < end tie 3.
        let b2 = iv(2, 2, 3, 0);
        let a2 = iv(1, 0, 2, 2);
        assert!(!compatible(&a2, &b2));
    }

    #[test]
    fn contains_basic() {
        let outer = iv(1, 0, 10, 0);
        let inner = iv(2, 2, 3, 2);
        let cross = iv(3, 5, 12, 4);
        assert!(contains(&outer, &inner));
        assert!(!contains(&outer, &cross));
    }

    #[test]
    fn contains_equal_coords_is_asymmetric() {
        let first = iv(1, 0, 10, 0);
        let second = iv(2, 0, 10, 2);
        assert!(!contains(&first, &second)); // second.end tie 3 > first.end tie 1
        assert!(!contains(&second, &first)); // first.start tie 0 < second.start tie 2
    }

    #[test]
    fn precedes_is_by_end() {
        let a = iv(1, 0, 2, 0);
        let c = iv(2, 1, 4, 2);
        assert!(precedes(&a, &c));
        assert!(!precedes(&c, &a));
    }

    #[test]
    fn trace_roundtrip() {
        let text = "# demo\nI 1 0 2\nI 2 3 5 7\nQ\nD 1\nQ\n";
        let ops = parse_trace(text).unwrap();
        assert_eq!(ops.len(), 5);
        match ops[1] {
            TraceOp::Insert(iv) => assert_eq!(iv.weight, 7),
            _ => panic!(),
        }
        let rendered = format_trace(&ops);
        let reparsed = parse_trace(&rendered).unwrap();
        assert_eq!(ops, reparsed);
    }

    #[test]
    fn trace_parse_errors_carry_line_numbers() {
        let e = parse_trace("I 1 0 2\nX nope\n").unwrap_err();
        match e {
            Error::ParseError { line, .. } => assert_eq!(line, 2),
            _ => panic!("wrong error {e}"),
        }
    }

    #[test]
    fn greedy_state_replace_keeps_sorted() {
        let mut g = GreedyState::initial(3);
        g.replace(0, Component::Barred(Endpoint::new(5, 1)), Endpoint::new(5, 1));
        g.replace(0, Component::Barred(Endpoint::new(3, 2)), Endpoint::new(3, 2));
        let busys: Vec<i64> = g.busy_untils().iter().map(|e| e.coord).collect();
        assert_eq!(busys, vec![i64::MIN, 3, 5]);
    }
}
