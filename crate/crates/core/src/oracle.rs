//! Exhaustive breadth-first synthesis for small registers.
//!
//! States are circuit unitaries reached from the identity, deduplicated up to
//! global phase by [`CanonicalKey`]. Only the current frontier keeps full
//! matrices; visited states are remembered by key and parent pointer.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::Circuit;
use crate::datagen::{phase_normalize, unflatten, Dataset, PHASE_THRESHOLD};
use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::metrics::fidelity_from_trace;
use crate::par::{map_slice, Execution};
use crate::unitary::Unitary;

/// Decimal digits kept per real component when hashing.
pub const KEY_DIGITS: i32 = 6;
pub const DEFAULT_MAX_STATES: usize = 4_000_000;
/// Fidelity accepted as exact equality up to phase.
pub const EXACT_THRESHOLD: f64 = 1.0 - 1e-6;

/// Phase-invariant 128-bit digest of a unitary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalKey([u8; 16]);

impl CanonicalKey {
    pub fn of(u: &Unitary) -> Result<CanonicalKey> {
        let normalized = phase_normalize(u, PHASE_THRESHOLD)?;
        let scale = 10f64.powi(KEY_DIGITS);
        let mut hasher = Sha256::new();
        hasher.update([u.qubits() as u8]);
        for z in normalized.entries() {
            hasher.update(((z.re * scale).round() as i64).to_le_bytes());
            hasher.update(((z.im * scale).round() as i64).to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut out = [0u8; 16];
        out.copy_from_slice(&digest[..16]);
        Ok(CanonicalKey(out))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OracleOutcome {
    Found {
        depth: usize,
        circuit: Circuit,
        fidelity: f64,
        visited: usize,
    },
    /// No circuit of length `<= lower_bound - 1` reaches the threshold.
    NotFound { lower_bound: usize, visited: usize },
}

impl OracleOutcome {
    pub fn depth(&self) -> Option<usize> {
        match self {
            OracleOutcome::Found { depth, .. } => Some(*depth),
            OracleOutcome::NotFound { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    pub max_depth: usize,
    pub threshold: f64,
    pub max_states: usize,
    pub exec: Execution,
}

impl OracleOptions {
    pub fn new(max_depth: usize, threshold: f64) -> Self {
        OracleOptions {
            max_depth,
            threshold,
            max_states: DEFAULT_MAX_STATES,
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Copy)]
struct Node {
    parent: u32,
    gate: Option<Gate>,
}

struct Child {
    parent: usize,
    gate: Gate,
    key: CanonicalKey,
    hit: bool,
    unitary: Option<Unitary>,
}

/// Level-synchronous BFS over the action graph from the identity.
///
/// `hit` is evaluated on every newly generated state; the search stops at the
/// first hit in deterministic (frontier, action) order. `on_level` sees each
/// completed level's new keys.
struct Bfs<'a, H> {
    n: usize,
    opts: &'a OracleOptions,
    hit: H,
    keys: HashMap<CanonicalKey, u32>,
    nodes: Vec<Node>,
}

enum BfsEnd {
    Hit(u32, usize),
    Exhausted,
}

impl<H> Bfs<'_, H>
where
    H: Fn(&Unitary) -> bool + Sync,
{
    fn run(&mut self, mut on_level: impl FnMut(usize, &[CanonicalKey])) -> Result<BfsEnd> {
        const CHUNK: usize = 512;
        let actions = Gate::all_actions(self.n);
        let root = Unitary::identity(self.n);
        let root_key = CanonicalKey::of(&root)?;
        self.keys.insert(root_key, 0);
        self.nodes.push(Node {
            parent: u32::MAX,
            gate: None,
        });
        on_level(0, &[root_key]);
        if (self.hit)(&root) {
            return Ok(BfsEnd::Hit(0, 0));
        }
        let mut frontier: Vec<(u32, Unitary)> = vec![(0, root)];
        for depth in 1..=self.opts.max_depth {
            let keep = depth < self.opts.max_depth;
            let mut next = Vec::new();
            let mut level_keys = Vec::new();
            for chunk in frontier.chunks(CHUNK) {
                let per_parent = map_slice(self.opts.exec, chunk, |(idx, u)| {
                    actions
                        .iter()
                        .map(|&g| {
                            let mut child = u.clone();
                            child.apply_gate(g);
                            let key = CanonicalKey::of(&child)?;
                            let hit = (self.hit)(&child);
                            Ok(Child {
                                parent: *idx as usize,
                                gate: g,
                                key,
                                hit,
                                unitary: keep.then_some(child),
                            })
                        })
                        .collect::<Result<Vec<Child>>>()
                });
                for children in per_parent {
                    for c in children? {
                        if self.keys.contains_key(&c.key) {
                            continue;
                        }
                        let id = self.nodes.len() as u32;
                        self.keys.insert(c.key, id);
                        self.nodes.push(Node {
                            parent: c.parent as u32,
                            gate: Some(c.gate),
                        });
                        level_keys.push(c.key);
                        if c.hit {
                            return Ok(BfsEnd::Hit(id, depth));
                        }
                        if let Some(u) = c.unitary {
                            next.push((id, u));
                        }
                        if self.nodes.len() > self.opts.max_states {
                            return Err(Error::StateBudget {
                                visited: self.nodes.len(),
                                frontier: next.len(),
                            });
                        }
                    }
                }
            }
            on_level(depth, &level_keys);
            if level_keys.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(BfsEnd::Exhausted)
    }

    fn witness(&self, mut id: u32) -> Result<Circuit> {
        let mut gates = Vec::new();
        while let Some(g) = self.nodes[id as usize].gate {
            gates.push(g);
            id = self.nodes[id as usize].parent;
        }
        gates.reverse();
        Circuit::new(self.n, gates)
    }
}

fn fidelity(u: &Unitary, target: &Unitary) -> f64 {
    let overlap = u.trace_overlap(target).expect("same dimension");
    fidelity_from_trace(overlap.norm_sqr(), u.dim()).0
}

/// Minimum gate count of a circuit within `threshold` average fidelity of
/// `target`, searching exhaustively up to `max_depth` gates.
pub fn exact_mdl(target: &Unitary, max_depth: usize, threshold: f64) -> Result<OracleOutcome> {
    exact_mdl_with(target, &OracleOptions::new(max_depth, threshold))
}

pub fn exact_mdl_with(target: &Unitary, opts: &OracleOptions) -> Result<OracleOutcome> {
    let mut bfs = Bfs {
        n: target.qubits(),
        opts,
        hit: |u: &Unitary| fidelity(u, target) >= opts.threshold,
        keys: HashMap::new(),
        nodes: Vec::new(),
    };
    match bfs.run(|_, _| {})? {
        BfsEnd::Hit(id, depth) => {
            let circuit = bfs.witness(id)?;
            let fidelity = fidelity(&circuit.unitary(), target);
            Ok(OracleOutcome::Found {
                depth,
                circuit,
                fidelity,
                visited: bfs.nodes.len(),
            })
        }
        BfsEnd::Exhausted => Ok(OracleOutcome::NotFound {
            lower_bound: opts.max_depth + 1,
            visited: bfs.nodes.len(),
        }),
    }
}

/// A shortest circuit for every distinct state reachable within `max_depth`
/// gates, in breadth-first order.
pub fn enumerate_states(
    qubits: usize,
    max_depth: usize,
    max_states: usize,
    exec: Execution,
) -> Result<Vec<Circuit>> {
    let opts = OracleOptions {
        max_depth,
        threshold: f64::INFINITY,
        max_states,
        exec,
    };
    let mut bfs = Bfs {
        n: qubits,
        opts: &opts,
        hit: |_: &Unitary| false,
        keys: HashMap::new(),
        nodes: Vec::new(),
    };
    bfs.run(|_, _| {})?;
    (0..bfs.nodes.len() as u32)
        .map(|id| bfs.witness(id))
        .collect()
}

/// Exact depth of every state reachable within `max_depth` gates.
pub struct MdlTable {
    qubits: usize,
    max_depth: usize,
    depths: HashMap<CanonicalKey, u8>,
    level_sizes: Vec<usize>,
}

impl MdlTable {
    pub fn build(
        qubits: usize,
        max_depth: usize,
        max_states: usize,
        exec: Execution,
    ) -> Result<Self> {
        let opts = OracleOptions {
            max_depth,
            threshold: f64::INFINITY,
            max_states,
            exec,
        };
        let mut bfs = Bfs {
            n: qubits,
            opts: &opts,
            hit: |_: &Unitary| false,
            keys: HashMap::new(),
            nodes: Vec::new(),
        };
        let mut depths = HashMap::new();
        let mut level_sizes = Vec::new();
        bfs.run(|d, keys| {
            level_sizes.push(keys.len());
            depths.extend(keys.iter().map(|&k| (k, d as u8)));
        })?;
        Ok(MdlTable {
            qubits,
            max_depth,
            depths,
            level_sizes,
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    /// Number of distinct states first reached at each depth.
    pub fn level_sizes(&self) -> &[usize] {
        &self.level_sizes
    }

    pub fn lookup(&self, u: &Unitary) -> Result<Option<usize>> {
        if u.qubits() != self.qubits {
            return Err(Error::DimensionMismatch {
                left: 1 << self.qubits,
                right: u.dim(),
            });
        }
        Ok(self.depths.get(&CanonicalKey::of(u)?).map(|&d| d as usize))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelBoundReport {
    /// Examples whose exact MDL is at most the search depth.
    pub checked: usize,
    /// Examples whose MDL exceeds the search depth.
    pub beyond_depth: usize,
    /// Indices of examples whose label undercuts the exact MDL.
    pub violations: Vec<usize>,
    /// `label - exact` over checked examples.
    pub gap_histogram: BTreeMap<i64, usize>,
    pub mean_gap: f64,
}

impl LabelBoundReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Exact MDL of `r` up to `max_depth`: table lookup with a breadth-first
/// fallback for residuals whose rounded key misses the table.
fn exact_depth(table: &MdlTable, r: &Unitary, max_depth: usize) -> Result<Option<usize>> {
    if let Some(d) = table.lookup(r)? {
        return Ok(Some(d));
    }
    let opts = OracleOptions {
        exec: Execution::Sequential,
        ..OracleOptions::new(max_depth, EXACT_THRESHOLD)
    };
    Ok(exact_mdl_with(r, &opts)?.depth())
}

/// Checks `exact MDL <= label` for every example whose MDL is at most
/// `max_depth` and reports the gap distribution.
pub fn verify_label_bound(dataset: &Dataset, max_depth: usize) -> Result<LabelBoundReport> {
    if dataset.examples.is_empty() {
        return Ok(LabelBoundReport::default());
    }
    let table = MdlTable::build(
        dataset.qubits,
        max_depth,
        DEFAULT_MAX_STATES,
        Execution::default(),
    )?;
    verify_label_bound_with(dataset, &table)
}

pub fn verify_label_bound_with(dataset: &Dataset, table: &MdlTable) -> Result<LabelBoundReport> {
    let mut report = LabelBoundReport::default();
    let mut gap_sum = 0i64;
    for (i, ex) in dataset.examples.iter().enumerate() {
        let r = unflatten(&ex.features)?;
        match exact_depth(table, &r, table.max_depth())? {
            Some(d) => {
                report.checked += 1;
                let gap = ex.label as i64 - d as i64;
                if gap < 0 {
                    report.violations.push(i);
                }
                gap_sum += gap;
                *report.gap_histogram.entry(gap).or_default() += 1;
            }
            None => report.beyond_depth += 1,
        }
    }
    if report.checked > 0 {
        report.mean_gap = gap_sum as f64 / report.checked as f64;
    }
    Ok(report)
}
