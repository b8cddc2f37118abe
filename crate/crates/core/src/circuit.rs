//! Gate sequences and the plain-text circuit format.
//!
//! ```text
//! # comments start with '#'
//! QUBITS 2
//! H 0
//! CX 0 1
//! T 1
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::{Gate, GateKind, MAX_QUBITS};
use crate::unitary::Unitary;

/// An ordered gate sequence on `n` qubits. `gates[0]` is applied first, so
/// the implemented unitary is `G_m ... G_1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Circuit {
    n: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn empty(n: usize) -> Result<Self> {
        Self::new(n, Vec::new())
    }

    pub fn new(n: usize, gates: Vec<Gate>) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::QubitCount(n));
        }
        for g in &gates {
            g.validate(n)?;
        }
        Ok(Circuit { n, gates })
    }

    pub(crate) fn from_parts_unchecked(n: usize, gates: Vec<Gate>) -> Self {
        debug_assert!(gates.iter().all(|g| g.validate(n).is_ok()));
        Circuit { n, gates }
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn into_gates(self) -> Vec<Gate> {
        self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, g: Gate) -> Result<()> {
        g.validate(self.n)?;
        self.gates.push(g);
        Ok(())
    }

    /// Number of T gates.
    pub fn t_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| g.kind() == GateKind::T)
            .count()
    }

    /// Gates `start..end` as a circuit on the same register.
    pub fn slice(&self, start: usize, end: usize) -> Circuit {
        Circuit {
            n: self.n,
            gates: self.gates[start..end].to_vec(),
        }
    }

    pub fn unitary(&self) -> Unitary {
        let mut u = Unitary::identity(self.n);
        for &g in &self.gates {
            u.apply_gate(g);
        }
        u
    }

    /// Renames qubit `q` to `map[q]` in every gate.
    pub fn relabel(&self, map: &[usize]) -> Result<Circuit> {
        crate::unitary::validate_permutation(map, self.n)?;
        Ok(Circuit {
            n: self.n,
            gates: self.gates.iter().map(|g| g.relabel(map)).collect(),
        })
    }

    /// Re-homes the circuit on a register of `n` qubits.
    pub fn with_qubits(&self, n: usize) -> Result<Circuit> {
        Circuit::new(n, self.gates.clone())
    }

    /// Highest qubit index touched plus one (0 for the empty circuit).
    pub fn used_qubits(&self) -> usize {
        self.gates
            .iter()
            .map(|g| g.max_qubit() + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

/// `U(C) = G_m ... G_1`.
pub fn circuit_unitary(c: &Circuit) -> Unitary {
    c.unitary()
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "QUBITS {}", self.n)?;
        for g in &self.gates {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

impl FromStr for Circuit {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut gates = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line, msg };
            let toks: Vec<&str> = body.split_whitespace().collect();
            let num = |s: &str| -> Result<usize> {
                s.parse::<usize>()
                    .map_err(|_| err(format!("expected an integer, got {s:?}")))
            };
            let op = toks[0].to_ascii_uppercase();
            if op == "QUBITS" {
                if n.is_some() {
                    return Err(err("duplicate QUBITS header".into()));
                }
                if toks.len() != 2 {
                    return Err(err("expected `QUBITS <n>`".into()));
                }
                let q = num(toks[1])?;
                if q == 0 || q > MAX_QUBITS {
                    return Err(Error::QubitCount(q));
                }
                n = Some(q);
                continue;
            }
            let nq = n.ok_or_else(|| err("gate before QUBITS header".into()))?;
            let arity = if op == "CX" { 3 } else { 2 };
            if toks.len() != arity {
                return Err(err(format!("wrong operand count for {op}")));
            }
            let q = |s: &str| -> Result<u8> {
                let v = num(s)?;
                if v >= nq {
                    return Err(err(format!("qubit {v} out of range for {nq} qubits")));
                }
                Ok(v as u8)
            };
            let g = match op.as_str() {
                "H" => Gate::H(q(toks[1])?),
                "S" => Gate::S(q(toks[1])?),
                "T" => Gate::T(q(toks[1])?),
                "CX" => {
                    let (c, t) = (q(toks[1])?, q(toks[2])?);
                    if c == t {
                        return Err(err("CX control equals target".into()));
                    }
                    Gate::Cx(c, t)
                }
                other => return Err(err(format!("unknown gate {other:?}"))),
            };
            gates.push(g);
        }
        let n = n.ok_or(Error::Parse {
            line: 1,
            msg: "missing QUBITS header".into(),
        })?;
        Circuit::new(n, gates)
    }
}
