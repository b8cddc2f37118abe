//! The Clifford+T gate alphabet.
//!
//! Qubit 0 is the most significant tensor factor throughout the crate: basis
//! index `b` has qubit `q` in bit position `n - 1 - q`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    H,
    S,
    T,
    Cx,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::S => "S",
            GateKind::T => "T",
            GateKind::Cx => "CX",
        }
    }
}

/// A single gate together with the qubits it acts on.
///
/// The derived ordering (H < S < T < CX, then by qubit indices) is the
/// lexicographic order used to break ties between equally good circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gate {
    H(u8),
    S(u8),
    T(u8),
    /// `Cx(control, target)`
    Cx(u8, u8),
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::H(_) => GateKind::H,
            Gate::S(_) => GateKind::S,
            Gate::T(_) => GateKind::T,
            Gate::Cx(..) => GateKind::Cx,
        }
    }

    /// Bitmask of the qubits this gate touches (bit `q` for qubit `q`).
    pub fn support(&self) -> u8 {
        match *self {
            Gate::H(q) | Gate::S(q) | Gate::T(q) => 1 << q,
            Gate::Cx(c, t) => (1 << c) | (1 << t),
        }
    }

    pub fn max_qubit(&self) -> usize {
        match *self {
            Gate::H(q) | Gate::S(q) | Gate::T(q) => q as usize,
            Gate::Cx(c, t) => c.max(t) as usize,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if let Gate::Cx(c, t) = *self {
            if c == t {
                return Err(Error::CxSameQubit(c as usize));
            }
        }
        let q = self.max_qubit();
        if q >= n {
            return Err(Error::QubitOutOfRange {
                index: q,
                qubits: n,
            });
        }
        Ok(())
    }

    /// Diagonal gates (S, T) are powers of T; returns the exponent of T.
    pub fn t_exponent(&self) -> Option<(u8, u8)> {
        match *self {
            Gate::S(q) => Some((q, 2)),
            Gate::T(q) => Some((q, 1)),
            _ => None,
        }
    }

    /// The 2x2 matrix of a single-qubit gate, `None` for CX.
    pub fn single_qubit_matrix(&self) -> Option<[Complex64; 4]> {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        match self {
            Gate::H(_) => {
                let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                Some([h, h, h, -h])
            }
            Gate::S(_) => Some([one, zero, zero, Complex64::new(0.0, 1.0)]),
            Gate::T(_) => Some([
                one,
                zero,
                zero,
                Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4),
            ]),
            Gate::Cx(..) => None,
        }
    }

    /// Expresses the adjoint of this gate as a sequence over the alphabet.
    pub fn adjoint_expansion(&self) -> Vec<Gate> {
        match *self {
            Gate::H(_) | Gate::Cx(..) => vec![*self],
            Gate::S(q) => vec![Gate::S(q); 3],
            Gate::T(q) => vec![Gate::S(q), Gate::S(q), Gate::S(q), Gate::T(q)],
        }
    }

    /// Applies `map` to every qubit index.
    pub fn relabel(&self, map: &[usize]) -> Gate {
        let m = |q: u8| map[q as usize] as u8;
        match *self {
            Gate::H(q) => Gate::H(m(q)),
            Gate::S(q) => Gate::S(m(q)),
            Gate::T(q) => Gate::T(m(q)),
            Gate::Cx(c, t) => Gate::Cx(m(c), m(t)),
        }
    }

    /// Every gate on an `n`-qubit register: H, S, T on each qubit, then CX on
    /// each ordered pair. `3n + n(n-1)` actions.
    pub fn all_actions(n: usize) -> Vec<Gate> {
        let mut actions = Vec::with_capacity(3 * n + n * n.saturating_sub(1));
        for q in 0..n as u8 {
            actions.push(Gate::H(q));
            actions.push(Gate::S(q));
            actions.push(Gate::T(q));
        }
        for c in 0..n as u8 {
            for t in 0..n as u8 {
                if c != t {
                    actions.push(Gate::Cx(c, t));
                }
            }
        }
        actions
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::H(q) => write!(f, "H {q}"),
            Gate::S(q) => write!(f, "S {q}"),
            Gate::T(q) => write!(f, "T {q}"),
            Gate::Cx(c, t) => write!(f, "CX {c} {t}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Gate::H(1).validate(2).is_ok());
        assert!(matches!(
            Gate::H(2).validate(2),
            Err(Error::QubitOutOfRange {
                index: 2,
                qubits: 2
            })
        ));
        assert!(matches!(
            Gate::Cx(1, 1).validate(3),
            Err(Error::CxSameQubit(1))
        ));
        assert!(Gate::Cx(0, 4).validate(5).is_ok());
        assert!(Gate::Cx(0, 5).validate(5).is_err());
    }

    #[test]
    fn action_counts() {
        assert_eq!(Gate::all_actions(1).len(), 3);
        assert_eq!(Gate::all_actions(2).len(), 8);
        assert_eq!(Gate::all_actions(5).len(), 35);
    }

    #[test]
    fn lexicographic_order() {
        assert!(Gate::H(3) < Gate::S(0));
        assert!(Gate::T(4) < Gate::Cx(0, 1));
        assert!(Gate::Cx(0, 2) < Gate::Cx(1, 0));
    }
}
