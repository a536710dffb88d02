use indexmap::IndexMap;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{LocalHamiltonian, Pauli, PauliString};
use crate::caps::check_cap;
use crate::error::{invalid, Error, Result};

const UNITARY_TOL: f64 = 1e-10;
const DROP_TOL: f64 = 1e-14;

/// One- or two-qubit unitary. For two qubits the row index is
/// `2·b(targets[0]) + b(targets[1])`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    targets: Vec<usize>,
    matrix: Vec<Complex64>,
}

impl Gate {
    pub fn new(targets: Vec<usize>, matrix: Vec<Complex64>) -> Result<Self> {
        let k = targets.len();
        if !(1..=2).contains(&k) {
            return invalid("gates act on one or two qubits");
        }
        if k == 2 && targets[0] == targets[1] {
            return invalid("two-qubit gate with repeated target");
        }
        let d = 1usize << k;
        if matrix.len() != d * d {
            return invalid(format!("gate on {k} qubits needs a {d}x{d} matrix"));
        }
        for i in 0..d {
            for j in 0..d {
                let mut s = Complex64::new(0.0, 0.0);
                for r in 0..d {
                    s += matrix[r * d + i].conj() * matrix[r * d + j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                if (s - want).norm() > UNITARY_TOL {
                    return invalid("gate matrix is not unitary");
                }
            }
        }
        Ok(Gate { targets, matrix })
    }

    pub fn hadamard(q: usize) -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Gate::new(vec![q], vec![h, h, h, -h]).expect("unitary")
    }

    pub fn pauli(q: usize, p: Pauli) -> Self {
        let m = p.matrix();
        Gate::new(vec![q], vec![m[0][0], m[0][1], m[1][0], m[1][1]]).expect("unitary")
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        #[rustfmt::skip]
        let m = vec![
            l, o, o, o,
            o, l, o, o,
            o, o, o, l,
            o, o, l, o,
        ];
        Gate::new(vec![control, target], m).expect("unitary")
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    fn dim(&self) -> usize {
        1 << self.targets.len()
    }

    /// Applies the gate to a dense state vector (bit `q` of the index is
    /// qubit `q`).
    pub fn apply_dense(&self, v: &mut [Complex64]) {
        let d = self.dim();
        let bits: Vec<usize> = self.targets.iter().map(|&q| 1usize << q).collect();
        let mask: usize = bits.iter().sum();
        let global = |base: usize, l: usize| -> usize {
            let k = bits.len();
            bits.iter()
                .enumerate()
                .fold(base, |acc, (j, &b)| if l >> (k - 1 - j) & 1 == 1 { acc | b } else { acc })
        };
        let mut buf = vec![Complex64::new(0.0, 0.0); d];
        for base in 0..v.len() {
            if base & mask != 0 {
                continue;
            }
            for (l, slot) in buf.iter_mut().enumerate() {
                *slot = v[global(base, l)];
            }
            for r in 0..d {
                let mut s = Complex64::new(0.0, 0.0);
                for c in 0..d {
                    s += self.matrix[r * d + c] * buf[c];
                }
                v[global(base, r)] = s;
            }
        }
    }
}

/// Ordered gate list; gate 0 acts first, so `U = G_L ⋯ G_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShallowCircuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

#[derive(Serialize, Deserialize)]
struct CircuitFile {
    n_qubits: usize,
    gates: Vec<GateFile>,
}

#[derive(Serialize, Deserialize)]
struct GateFile {
    targets: Vec<usize>,
    /// Row-major entries as `[re, im]`.
    matrix: Vec<[f64; 2]>,
}

impl ShallowCircuit {
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            if let Some(&q) = g.targets.iter().find(|&&q| q >= n_qubits) {
                return invalid(format!("gate target {q} >= n_qubits {n_qubits}"));
            }
        }
        Ok(ShallowCircuit { n_qubits, gates })
    }

    pub fn identity(n_qubits: usize) -> Self {
        ShallowCircuit {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Depth under greedy layering.
    pub fn depth(&self) -> usize {
        let mut level = vec![0usize; self.n_qubits];
        for g in &self.gates {
            let l = g.targets.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
            for &q in &g.targets {
                level[q] = l;
            }
        }
        level.into_iter().max().unwrap_or(0)
    }

    /// `U|v⟩` on a dense vector.
    pub fn apply_dense(&self, v: &mut [Complex64]) {
        for g in &self.gates {
            g.apply_dense(v);
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: CircuitFile = serde_json::from_str(text)?;
        let gates = f
            .gates
            .into_iter()
            .map(|g| {
                Gate::new(
                    g.targets,
                    g.matrix.iter().map(|e| Complex64::new(e[0], e[1])).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        ShallowCircuit::new(f.n_qubits, gates)
    }

    pub fn to_json(&self) -> String {
        let f = CircuitFile {
            n_qubits: self.n_qubits,
            gates: self
                .gates
                .iter()
                .map(|g| GateFile {
                    targets: g.targets.clone(),
                    matrix: g.matrix.iter().map(|c| [c.re, c.im]).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&f).expect("circuit serializes")
    }
}

const LETTERS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

/// Kronecker product of local letters, first letter most significant.
fn local_matrix(letters: &[Pauli]) -> Vec<Complex64> {
    let mut m = vec![Complex64::new(1.0, 0.0)];
    let mut d = 1;
    for p in letters {
        let pm = p.matrix();
        let mut next = vec![Complex64::new(0.0, 0.0); d * d * 4];
        for i in 0..d {
            for j in 0..d {
                for a in 0..2 {
                    for b in 0..2 {
                        next[(2 * i + a) * (2 * d) + 2 * j + b] = m[i * d + j] * pm[a][b];
                    }
                }
            }
        }
        m = next;
        d *= 2;
    }
    m
}

/// Pauli expansion of `G† P_T G` as (letters, coefficient) pairs.
fn conjugate_local(g: &Gate, letters: &[Pauli]) -> Result<Vec<(Vec<Pauli>, f64)>> {
    let d = g.dim();
    let p = local_matrix(letters);
    let u = &g.matrix;
    let mut a = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        for j in 0..d {
            let mut s = Complex64::new(0.0, 0.0);
            for r in 0..d {
                for c in 0..d {
                    s += u[r * d + i].conj() * p[r * d + c] * u[c * d + j];
                }
            }
            a[i * d + j] = s;
        }
    }
    let k = letters.len();
    let mut out = Vec::new();
    for code in 0..(1usize << (2 * k)) {
        let q: Vec<Pauli> = (0..k).map(|j| LETTERS[(code >> (2 * (k - 1 - j))) & 3]).collect();
        let qm = local_matrix(&q);
        let mut tr = Complex64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                tr += qm[i * d + j] * a[j * d + i];
            }
        }
        let c = tr / d as f64;
        if c.im.abs() > 1e-9 {
            return Err(Error::InvalidInput(
                "conjugated Pauli has a complex coefficient".into(),
            ));
        }
        if c.re.abs() >= DROP_TOL {
            out.push((q, c.re));
        }
    }
    Ok(out)
}

/// `H′ = U† H U`, expanded exactly in the Pauli basis.
pub fn conjugate_by_circuit(
    h: &LocalHamiltonian,
    u: &ShallowCircuit,
    term_cap: usize,
) -> Result<LocalHamiltonian> {
    let n = h.n_qubits();
    if u.n_qubits != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: u.n_qubits,
        });
    }
    let mut current: IndexMap<PauliString, f64> =
        h.terms().iter().map(|t| (t.op.clone(), t.coeff)).collect();
    for g in u.gates.iter().rev() {
        let mut next: IndexMap<PauliString, f64> = IndexMap::new();
        for (op, coeff) in &current {
            let letters: Vec<Pauli> = g.targets.iter().map(|&q| op.letter(q)).collect();
            if letters.iter().all(|&p| p == Pauli::I) {
                *next.entry(op.clone()).or_insert(0.0) += coeff;
                continue;
            }
            let rest: Vec<(usize, Pauli)> = op
                .ops()
                .iter()
                .copied()
                .filter(|(q, _)| !g.targets.contains(q))
                .collect();
            for (local, c) in conjugate_local(g, &letters)? {
                let mut ops = rest.clone();
                ops.extend(g.targets.iter().copied().zip(local));
                let key = PauliString::new(n, ops)?;
                *next.entry(key).or_insert(0.0) += coeff * c;
            }
        }
        next.retain(|op, c| c.abs() >= DROP_TOL && !op.is_identity());
        check_cap("circuit term", term_cap, next.len())?;
        current = next;
    }
    LocalHamiltonian::new(n, current.into_iter().map(|(op, c)| (c, op)))
}
