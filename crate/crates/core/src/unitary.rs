//! Dense complex matrices for registers of up to five qubits.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gate::{Gate, MAX_QUBITS};

/// A dense `2^n x 2^n` complex matrix stored row-major.
///
/// No global phase is tracked; two unitaries differing by `e^{i phi}` are
/// distinct values of this type.
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary {
    n: usize,
    data: Vec<Complex64>,
}

impl Unitary {
    pub fn identity(n: usize) -> Self {
        let dim = 1usize << n;
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Unitary { n, data }
    }

    /// Wraps row-major entries. Unitarity is not checked here.
    pub fn from_entries(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::QubitCount(n));
        }
        let dim = 1usize << n;
        if data.len() != dim * dim {
            return Err(Error::Shape {
                expected: dim * dim,
                got: data.len(),
            });
        }
        Ok(Unitary { n, data })
    }

    /// Builds a matrix from a function of (row, column).
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let dim = 1usize << n;
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Unitary { n, data }
    }

    /// Draws a Haar-distributed unitary by Gram-Schmidt orthonormalization of
    /// a complex Gaussian matrix.
    pub fn random<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        use rand_distr::{Distribution, StandardNormal};
        let dim = 1usize << n;
        let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
        while cols.len() < dim {
            let mut v: Vec<Complex64> = (0..dim)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex64::new(re, im)
                })
                .collect();
            for _ in 0..2 {
                for u in &cols {
                    let proj: Complex64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    for (x, a) in v.iter_mut().zip(u) {
                        *x -= proj * a;
                    }
                }
            }
            let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-8 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            cols.push(v);
        }
        Unitary::from_fn(n, |r, c| cols[c][r])
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim() + col]
    }

    pub(crate) fn check_same_dim(&self, other: &Unitary) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    pub fn adjoint(&self) -> Unitary {
        let dim = self.dim();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                data[c * dim + r] = self.data[r * dim + c].conj();
            }
        }
        Unitary { n: self.n, data }
    }

    /// `self * rhs`
    pub fn matmul(&self, rhs: &Unitary) -> Result<Unitary> {
        self.check_same_dim(rhs)?;
        let dim = self.dim();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            let out = &mut data[r * dim..(r + 1) * dim];
            for k in 0..dim {
                let a = self.data[r * dim + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &rhs.data[k * dim..(k + 1) * dim];
                for (o, b) in out.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Ok(Unitary { n: self.n, data })
    }

    /// `self^dagger * rhs` without materializing the adjoint.
    pub fn adjoint_mul(&self, rhs: &Unitary) -> Result<Unitary> {
        self.check_same_dim(rhs)?;
        let dim = self.dim();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for k in 0..dim {
            let row = &rhs.data[k * dim..(k + 1) * dim];
            for r in 0..dim {
                let a = self.data[k * dim + r].conj();
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let out = &mut data[r * dim..(r + 1) * dim];
                for (o, b) in out.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Ok(Unitary { n: self.n, data })
    }

    pub fn scale(&self, z: Complex64) -> Unitary {
        Unitary {
            n: self.n,
            data: self.data.iter().map(|x| x * z).collect(),
        }
    }

    /// Kronecker product `self (x) rhs`; `self` occupies the leading qubits.
    pub fn kron(&self, rhs: &Unitary) -> Result<Unitary> {
        let n = self.n + rhs.n;
        if n > MAX_QUBITS {
            return Err(Error::QubitCount(n));
        }
        let (da, db) = (self.dim(), rhs.dim());
        Ok(Unitary::from_fn(n, |r, c| {
            self.data[(r / db) * da + c / db] * rhs.data[(r % db) * db + c % db]
        }))
    }

    /// `Tr(self^dagger * other)`
    pub fn trace_overlap(&self, other: &Unitary) -> Result<Complex64> {
        self.check_same_dim(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Unitary) -> Result<f64> {
        self.check_same_dim(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// `max |(U^dagger U - I)_ij|`
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.adjoint_mul(self).expect("same matrix");
        prod.max_abs_diff(&Unitary::identity(self.n))
            .expect("same dimension")
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    /// Left-multiplies by the full-register matrix of `g`, in place.
    pub fn apply_gate(&mut self, g: Gate) {
        self.apply_left(g, false);
    }

    /// Left-multiplies by the adjoint of `g`, in place.
    pub fn apply_gate_adjoint(&mut self, g: Gate) {
        self.apply_left(g, true);
    }

    /// Residual update `R <- R * G^dagger`: commits `g` as the next gate of
    /// the circuit, leaving the part still to be synthesized.
    pub fn peel_gate(&mut self, g: Gate) {
        let dim = self.dim();
        let n = self.n;
        debug_assert!(g.validate(n).is_ok());
        match g {
            Gate::Cx(c, t) => {
                let cmask = 1usize << (n - 1 - c as usize);
                let tmask = 1usize << (n - 1 - t as usize);
                for col in 0..dim {
                    if col & cmask != 0 && col & tmask == 0 {
                        let col2 = col | tmask;
                        for r in 0..dim {
                            self.data.swap(r * dim + col, r * dim + col2);
                        }
                    }
                }
            }
            Gate::S(q) | Gate::T(q) => {
                let phase = g.single_qubit_matrix().expect("single qubit")[3].conj();
                let mask = 1usize << (n - 1 - q as usize);
                for row in self.data.chunks_exact_mut(dim) {
                    for (col, x) in row.iter_mut().enumerate() {
                        if col & mask != 0 {
                            *x *= phase;
                        }
                    }
                }
            }
            Gate::H(q) => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let mask = 1usize << (n - 1 - q as usize);
                for row in self.data.chunks_exact_mut(dim) {
                    for c0 in 0..dim {
                        if c0 & mask != 0 {
                            continue;
                        }
                        let c1 = c0 | mask;
                        let (a, b) = (row[c0], row[c1]);
                        row[c0] = (a + b) * s;
                        row[c1] = (a - b) * s;
                    }
                }
            }
        }
    }

    fn apply_left(&mut self, g: Gate, adjoint: bool) {
        let dim = self.dim();
        let n = self.n;
        debug_assert!(g.validate(n).is_ok());
        match g {
            Gate::Cx(c, t) => {
                let cmask = 1usize << (n - 1 - c as usize);
                let tmask = 1usize << (n - 1 - t as usize);
                for r in 0..dim {
                    if r & cmask != 0 && r & tmask == 0 {
                        let r2 = r | tmask;
                        for col in 0..dim {
                            self.data.swap(r * dim + col, r2 * dim + col);
                        }
                    }
                }
            }
            Gate::S(q) | Gate::T(q) => {
                let m = g.single_qubit_matrix().expect("single qubit");
                let phase = if adjoint { m[3].conj() } else { m[3] };
                let mask = 1usize << (n - 1 - q as usize);
                for r in 0..dim {
                    if r & mask != 0 {
                        for x in &mut self.data[r * dim..(r + 1) * dim] {
                            *x *= phase;
                        }
                    }
                }
            }
            Gate::H(q) => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let mask = 1usize << (n - 1 - q as usize);
                for r0 in 0..dim {
                    if r0 & mask != 0 {
                        continue;
                    }
                    let r1 = r0 | mask;
                    for col in 0..dim {
                        let a = self.data[r0 * dim + col];
                        let b = self.data[r1 * dim + col];
                        self.data[r0 * dim + col] = (a + b) * s;
                        self.data[r1 * dim + col] = (a - b) * s;
                    }
                }
            }
        }
    }

    /// Conjugates by the qubit permutation: returns `P U P^dagger` where `P`
    /// moves qubit `q` to position `perm[q]`.
    pub fn permute_qubits(&self, perm: &[usize]) -> Result<Unitary> {
        validate_permutation(perm, self.n)?;
        let n = self.n;
        let map_index = |b: usize| -> usize {
            let mut out = 0;
            for (q, &p) in perm.iter().enumerate() {
                if b & (1 << (n - 1 - q)) != 0 {
                    out |= 1 << (n - 1 - p);
                }
            }
            out
        };
        let dim = self.dim();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                data[map_index(r) * dim + map_index(c)] = self.data[r * dim + c];
            }
        }
        Ok(Unitary { n, data })
    }

    /// Serializes as the `.mat` text format: `UNITARY <n>` then one `re im`
    /// pair per line in row-major order.
    pub fn to_mat_text(&self) -> String {
        let mut s = format!("UNITARY {}\n", self.n);
        for z in &self.data {
            let _ = writeln!(s, "{:e} {:e}", z.re, z.im);
        }
        s
    }

    pub fn from_mat_text(text: &str) -> Result<Unitary> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing UNITARY header".into(),
        })?;
        let mut parts = header.split_whitespace();
        let n = match (parts.next(), parts.next(), parts.next()) {
            (Some("UNITARY"), Some(n), None) => n.parse::<usize>().map_err(|e| Error::Parse {
                line: hline,
                msg: format!("bad qubit count: {e}"),
            })?,
            _ => {
                return Err(Error::Parse {
                    line: hline,
                    msg: format!("expected `UNITARY <n>`, got {header:?}"),
                })
            }
        };
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::QubitCount(n));
        }
        let expected = 1usize << (2 * n);
        let mut data = Vec::with_capacity(expected);
        for (line, l) in lines {
            let mut it = l.split_whitespace();
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::Parse {
                    line,
                    msg: "expected `re im`".into(),
                })?
                .parse::<f64>()
                .map_err(|e| Error::Parse {
                    line,
                    msg: e.to_string(),
                })
            };
            let re = parse(it.next())?;
            let im = parse(it.next())?;
            if it.next().is_some() {
                return Err(Error::Parse {
                    line,
                    msg: "trailing tokens".into(),
                });
            }
            data.push(Complex64::new(re, im));
        }
        Unitary::from_entries(n, data)
    }
}

pub(crate) fn validate_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = [false; MAX_QUBITS];
    if perm.len() != n || n > MAX_QUBITS {
        return Err(Error::InvalidPermutation(perm.to_vec()));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidPermutation(perm.to_vec()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// The full-register operator of a single gate.
pub fn gate_matrix(g: Gate, n: usize) -> Result<Unitary> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::QubitCount(n));
    }
    g.validate(n)?;
    let mut u = Unitary::identity(n);
    u.apply_gate(g);
    Ok(u)
}

/// `R_t = U_target * U_prefix^dagger`, the part of the target still to be
/// applied after the prefix, so that `U_target = R_t * U_prefix` and the
/// suffix circuit implements `R_t`.
pub fn residual(prefix: &Unitary, target: &Unitary) -> Result<Unitary> {
    target.matmul(&prefix.adjoint())
}

/// Embeds an `m`-qubit unitary into `total` qubits as `U (x) I`, acting
/// trivially on the trailing qubits.
pub fn kron_pad(u: &Unitary, total: usize) -> Result<Unitary> {
    if u.qubits() > total {
        return Err(Error::PadTooSmall {
            from: u.qubits(),
            to: total,
        });
    }
    if total > MAX_QUBITS {
        return Err(Error::QubitCount(total));
    }
    if u.qubits() == total {
        return Ok(u.clone());
    }
    u.kron(&Unitary::identity(total - u.qubits()))
}
