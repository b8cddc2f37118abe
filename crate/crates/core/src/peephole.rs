//! Local rewrite-rule optimizer.
//!
//! Rules, applied greedily left to right until nothing changes:
//!
//! * `H H -> ()` and `CX(c,t) CX(c,t) -> ()` once the pair is adjacent.
//! * A run of S/T gates on one qubit is a power `T^e`, `e` mod 8, and is
//!   rewritten to its shortest S/T spelling when that is shorter.
//! * Gates slide past each other when their supports are disjoint, when both
//!   are diagonal, or when a diagonal gate sits on the control of a CX.
//!
//! The optimizer defines the training labels, so its output is deterministic
//! and a fixed point of itself.

use std::sync::LazyLock;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::metrics::avg_fidelity;

/// A verified rewrite: `pattern` and `replacement` implement the same unitary
/// up to global phase and the replacement is never longer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteRule {
    pub name: &'static str,
    pub pattern: Vec<Gate>,
    pub replacement: Vec<Gate>,
}

impl RewriteRule {
    /// Registers a rule after checking it numerically on a 2-qubit register.
    pub fn new(name: &'static str, pattern: Vec<Gate>, replacement: Vec<Gate>) -> Result<Self> {
        if replacement.len() > pattern.len() {
            return Err(Error::Config(format!("rule {name} lengthens the circuit")));
        }
        let n = pattern
            .iter()
            .chain(&replacement)
            .map(|g| g.max_qubit() + 1)
            .max()
            .unwrap_or(1)
            .max(2);
        let a = Circuit::new(n, pattern.clone())?.unitary();
        let b = Circuit::new(n, replacement.clone())?.unitary();
        let f = avg_fidelity(&a, &b)?.0;
        if (1.0 - f).abs() > 1e-10 {
            return Err(Error::Config(format!(
                "rule {name} is not unitary-preserving (fidelity {f})"
            )));
        }
        Ok(RewriteRule {
            name,
            pattern,
            replacement,
        })
    }
}

/// Shortest S/T spelling of `T^e` for `e` in `0..8`.
fn diagonal_spelling(q: u8, e: u8) -> Vec<Gate> {
    let mut out = vec![Gate::S(q); (e / 2) as usize];
    if e % 2 == 1 {
        out.push(Gate::T(q));
    }
    out
}

/// The rule inventory in its concrete form on qubits 0 and 1, each checked
/// at construction.
pub fn rules() -> &'static [RewriteRule] {
    static RULES: LazyLock<Vec<RewriteRule>> = LazyLock::new(|| {
        let mut rules = vec![
            RewriteRule::new("h-cancel", vec![Gate::H(0); 2], vec![]),
            RewriteRule::new("cx-cancel", vec![Gate::Cx(0, 1); 2], vec![]),
            RewriteRule::new("t-pair", vec![Gate::T(0); 2], vec![Gate::S(0)]),
            RewriteRule::new("s-cycle", vec![Gate::S(0); 4], vec![]),
            RewriteRule::new("t-cycle", vec![Gate::T(0); 8], vec![]),
            RewriteRule::new(
                "commute-disjoint",
                vec![Gate::H(0), Gate::T(1)],
                vec![Gate::T(1), Gate::H(0)],
            ),
            RewriteRule::new(
                "commute-diagonal",
                vec![Gate::S(0), Gate::T(0)],
                vec![Gate::T(0), Gate::S(0)],
            ),
            RewriteRule::new(
                "commute-control",
                vec![Gate::T(0), Gate::Cx(0, 1)],
                vec![Gate::Cx(0, 1), Gate::T(0)],
            ),
        ];
        // Every accumulated exponent pair collapses to the canonical spelling.
        for a in 0..8u8 {
            for b in 0..8u8 {
                let mut pattern = diagonal_spelling(0, a);
                pattern.extend(diagonal_spelling(0, b));
                let replacement = diagonal_spelling(0, (a + b) % 8);
                if replacement.len() <= pattern.len() {
                    rules.push(RewriteRule::new("diagonal-merge", pattern, replacement));
                }
            }
        }
        rules
            .into_iter()
            .collect::<Result<Vec<_>>>()
            .expect("built-in rewrite rules verify")
    });
    &RULES
}

fn is_diagonal(g: &Gate) -> bool {
    matches!(g, Gate::S(_) | Gate::T(_))
}

/// Syntactic commutation used to bring gates together.
pub fn commutes(a: &Gate, b: &Gate) -> bool {
    if a.support() & b.support() == 0 {
        return true;
    }
    match (a, b) {
        _ if is_diagonal(a) && is_diagonal(b) => true,
        (Gate::S(q) | Gate::T(q), Gate::Cx(c, t)) | (Gate::Cx(c, t), Gate::S(q) | Gate::T(q)) => {
            q == c && q != t
        }
        _ => false,
    }
}

/// Tries every rule anchored at `i`. Returns true when `gates` changed.
fn rewrite_at(gates: &mut Vec<Gate>, i: usize) -> bool {
    let g = gates[i];
    match g {
        Gate::H(_) | Gate::Cx(..) => {
            for j in i + 1..gates.len() {
                if gates[j] == g {
                    gates.remove(j);
                    gates.remove(i);
                    return true;
                }
                if !commutes(&g, &gates[j]) {
                    break;
                }
            }
            false
        }
        Gate::S(q) | Gate::T(q) => {
            let mut exponent = g.t_exponent().expect("diagonal").1;
            let mut run = Vec::new();
            for j in i + 1..gates.len() {
                match gates[j].t_exponent() {
                    Some((p, e)) if p == q => {
                        exponent += e;
                        run.push(j);
                    }
                    _ if commutes(&g, &gates[j]) => {}
                    _ => break,
                }
            }
            let spelled = diagonal_spelling(q, exponent % 8);
            if spelled.len() > run.len() {
                return false;
            }
            for &j in run.iter().rev() {
                gates.remove(j);
            }
            gates.splice(i..=i, spelled);
            true
        }
    }
}

/// Rewrites `c` to a fixed point of the rule set. The result implements the
/// same unitary up to global phase and is never longer than `c`.
pub fn optimize(c: &Circuit) -> Circuit {
    let mut gates = c.gates().to_vec();
    'outer: loop {
        for i in 0..gates.len() {
            if rewrite_at(&mut gates, i) {
                continue 'outer;
            }
        }
        break;
    }
    Circuit::from_parts_unchecked(c.qubits(), gates)
}

/// Number of T gates.
pub fn t_count(c: &Circuit) -> usize {
    c.t_count()
}
