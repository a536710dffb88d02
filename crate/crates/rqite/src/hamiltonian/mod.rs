//! Pauli-sum Hamiltonians, product and semi-classical guiding states, and
//! shallow circuits.

mod circuit;
mod parse;
mod state;

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use circuit::{conjugate_by_circuit, Gate, ShallowCircuit};
pub use parse::{parse_hamiltonian, serialize_hamiltonian, ParseOptions, Parsed};
pub use state::{apply_pauli, ProductState, SemiClassicalState};

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Row-major 2x2 matrix.
    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }

    /// Symplectic bits `(x, z)` with `P = i^{x z} X^x Z^z`.
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }
}

/// Tensor product of Pauli letters, stored sparsely as `(qubit, letter)`
/// pairs sorted by qubit with identities omitted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString {
    n_qubits: usize,
    ops: Vec<(usize, Pauli)>,
}

impl PauliString {
    /// Builds a string from `(qubit, letter)` pairs in any order. Identity
    /// letters are dropped.
    pub fn new(n_qubits: usize, ops: impl IntoIterator<Item = (usize, Pauli)>) -> Result<Self> {
        let mut v: Vec<(usize, Pauli)> = Vec::new();
        for (q, p) in ops {
            if q >= n_qubits {
                return invalid(format!("qubit index {q} >= n_qubits {n_qubits}"));
            }
            if v.iter().any(|&(r, _)| r == q) {
                return invalid(format!("duplicate qubit index {q}"));
            }
            v.push((q, p));
        }
        v.retain(|&(_, p)| p != Pauli::I);
        v.sort_unstable();
        Ok(PauliString { n_qubits, ops: v })
    }

    pub fn identity(n_qubits: usize) -> Self {
        PauliString {
            n_qubits,
            ops: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[(usize, Pauli)] {
        &self.ops
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.ops.iter().map(|&(q, _)| q)
    }

    pub fn weight(&self) -> usize {
        self.ops.len()
    }

    pub fn is_identity(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn letter(&self, q: usize) -> Pauli {
        self.ops
            .binary_search_by_key(&q, |&(r, _)| r)
            .map(|i| self.ops[i].1)
            .unwrap_or(Pauli::I)
    }

    /// Symplectic masks `(x, z)` and the number of Y letters; only defined
    /// for registers of at most 64 qubits.
    pub fn masks(&self) -> (u64, u64, u32) {
        debug_assert!(self.n_qubits <= 64);
        let (mut x, mut z, mut ny) = (0u64, 0u64, 0u32);
        for &(q, p) in &self.ops {
            let (bx, bz) = p.bits();
            if bx {
                x |= 1 << q;
            }
            if bz {
                z |= 1 << q;
            }
            if p == Pauli::Y {
                ny += 1;
            }
        }
        (x, z, ny)
    }
}

impl std::fmt::Display for PauliString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.ops.is_empty() {
            return write!(f, "I");
        }
        for (i, &(q, p)) in self.ops.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}{}", p.as_char(), q)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub op: PauliString,
}

/// `H = Σ λ_X h_X` with distinct, non-identity Pauli strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalHamiltonian {
    n_qubits: usize,
    terms: Vec<Term>,
}

impl LocalHamiltonian {
    /// Merges duplicate strings by adding coefficients (first-occurrence
    /// order), prunes exact zeros and rejects identity strings.
    pub fn new(n_qubits: usize, terms: impl IntoIterator<Item = (f64, PauliString)>) -> Result<Self> {
        let mut index: HashMap<PauliString, usize> = HashMap::new();
        let mut merged: Vec<Term> = Vec::new();
        for (coeff, op) in terms {
            if op.n_qubits != n_qubits {
                return Err(Error::DimensionMismatch {
                    expected: n_qubits,
                    got: op.n_qubits,
                });
            }
            if op.is_identity() {
                return invalid("identity terms are not supported; apply them as an energy shift");
            }
            if !coeff.is_finite() {
                return invalid(format!("non-finite coefficient on {op}"));
            }
            match index.get(&op) {
                Some(&i) => merged[i].coeff += coeff,
                None => {
                    index.insert(op.clone(), merged.len());
                    merged.push(Term { coeff, op });
                }
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        if merged.is_empty() {
            return invalid("empty after merge");
        }
        Ok(LocalHamiltonian {
            n_qubits,
            terms: merged,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Locality `k`: the largest support size.
    pub fn locality(&self) -> usize {
        self.terms.iter().map(|t| t.op.weight()).max().unwrap_or(0)
    }

    /// `Σ |λ_X|`, an upper bound on the spectral norm.
    pub fn coeff_l1(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        LocalHamiltonian::new(
            self.n_qubits,
            self.terms.iter().map(|t| (t.coeff * factor, t.op.clone())),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    Exact,
    Bound,
}

/// Returns `(H / scale, scale)` with `scale = ‖H‖` (exact) or `Σ|λ|` (bound).
pub fn normalize_hamiltonian(
    h: &LocalHamiltonian,
    mode: NormMode,
    caps: &crate::caps::Caps,
) -> Result<(LocalHamiltonian, f64)> {
    let scale = match mode {
        NormMode::Bound => h.coeff_l1(),
        NormMode::Exact => crate::oracle::spectral_norm(h, caps)?,
    };
    if !(scale > 0.0) {
        return invalid("zero Hamiltonian");
    }
    Ok((h.scaled(1.0 / scale)?, scale))
}
