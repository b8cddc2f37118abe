//! Distances and fidelities between unitaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::unitary::Unitary;

/// Default success threshold on average gate fidelity.
pub const DEFAULT_THRESHOLD: f64 = 0.99;

/// Average gate fidelity, in `[0, 1]` up to rounding.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct FidelityScore(pub f64);

impl FidelityScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Frobenius norm of `u - v`. Not invariant under global phase.
pub fn hs_distance(u: &Unitary, v: &Unitary) -> Result<f64> {
    u.check_same_dim(v)?;
    Ok(u.entries()
        .iter()
        .zip(v.entries())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Spectral norm of `u - v`: `max ||(U - V) psi||` over unit vectors.
pub fn worst_case_distance(u: &Unitary, v: &Unitary) -> Result<f64> {
    u.check_same_dim(v)?;
    let dim = u.dim();
    let diff: Vec<_> = u
        .entries()
        .iter()
        .zip(v.entries())
        .map(|(a, b)| a - b)
        .collect();
    // Gram matrix G = A^dagger A is Hermitian; embed it as the real symmetric
    // matrix [[Re G, -Im G], [Im G, Re G]], whose spectrum is that of G with
    // every eigenvalue doubled.
    let m = 2 * dim;
    let mut sym = vec![0.0; m * m];
    for r in 0..dim {
        for c in 0..dim {
            let mut g = num_complex::Complex64::new(0.0, 0.0);
            for k in 0..dim {
                g += diff[k * dim + r].conj() * diff[k * dim + c];
            }
            sym[r * m + c] = g.re;
            sym[(r + dim) * m + c + dim] = g.re;
            sym[r * m + c + dim] = -g.im;
            sym[(r + dim) * m + c] = g.im;
        }
    }
    let eig = symmetric_eigenvalues(&mut sym, m)?;
    let top = eig.into_iter().fold(0.0, f64::max);
    Ok(top.max(0.0).sqrt())
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigenvalue iteration for a real symmetric `m x m` matrix.
/// The input is overwritten.
fn symmetric_eigenvalues(a: &mut [f64], m: usize) -> Result<Vec<f64>> {
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        return Ok(vec![0.0; m]);
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..m)
            .flat_map(|r| (0..m).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| a[r * m + c] * a[r * m + c])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-14 * scale {
            return Ok((0..m).map(|i| a[i * m + i]).collect());
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[p * m + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(Error::NoConvergence(JACOBI_MAX_SWEEPS))
}

/// `(|Tr(U^dagger V)|^2 + D) / (D (D + 1))` with `D = 2^n`.
pub fn avg_fidelity(u: &Unitary, v: &Unitary) -> Result<FidelityScore> {
    let overlap = u.trace_overlap(v)?;
    Ok(fidelity_from_trace(overlap.norm_sqr(), u.dim()))
}

pub(crate) fn fidelity_from_trace(trace_sq: f64, dim: usize) -> FidelityScore {
    let d = dim as f64;
    FidelityScore((trace_sq + d) / (d * (d + 1.0)))
}

/// Average gate fidelity of a residual against the identity.
pub fn fidelity_to_identity(r: &Unitary) -> FidelityScore {
    fidelity_from_trace(r.trace().norm_sqr(), r.dim())
}

/// Whether a residual is close enough to the identity to count as solved.
pub fn is_converged(r: &Unitary, threshold: f64) -> bool {
    fidelity_to_identity(r).0 >= threshold
}
