//! Independent oracles and instance generators shared by the integration
//! tests. Nothing here calls into the library's numerics.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rqite::hamiltonian::{LocalHamiltonian, Pauli, PauliString, ProductState, SemiClassicalState};

pub type C = Complex64;

pub fn c(re: f64) -> C {
    C::new(re, 0.0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense square matrix, row-major.
#[derive(Clone, Debug)]
pub struct Dense {
    pub n: usize,
    pub a: Vec<C>,
}

impl Dense {
    pub fn zeros(n: usize) -> Self {
        Dense {
            n,
            a: vec![c(0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = c(1.0);
        }
        m
    }

    pub fn at(&self, i: usize, j: usize) -> C {
        self.a[i * self.n + j]
    }

    pub fn mul(&self, o: &Dense) -> Dense {
        let n = self.n;
        let mut r = Dense::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let v = self.a[i * n + k];
                if v == c(0.0) {
                    continue;
                }
                for j in 0..n {
                    r.a[i * n + j] += v * o.a[k * n + j];
                }
            }
        }
        r
    }

    pub fn scale(&self, s: C) -> Dense {
        Dense {
            n: self.n,
            a: self.a.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn add(&self, o: &Dense) -> Dense {
        Dense {
            n: self.n,
            a: self.a.iter().zip(&o.a).map(|(x, y)| x + y).collect(),
        }
    }

    pub fn adjoint(&self) -> Dense {
        let n = self.n;
        let mut r = Dense::zeros(n);
        for i in 0..n {
            for j in 0..n {
                r.a[j * n + i] = self.a[i * n + j].conj();
            }
        }
        r
    }

    pub fn apply(&self, v: &[C]) -> Vec<C> {
        let n = self.n;
        (0..n).map(|i| (0..n).map(|j| self.a[i * n + j] * v[j]).sum()).collect()
    }

    pub fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.at(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `exp(s·A)` by scaling and squaring with a Taylor kernel.
    pub fn expm(&self, s: C) -> Dense {
        let a = self.scale(s);
        let norm = a.norm1();
        let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
        let a = a.scale(c(0.5f64.powi(squarings as i32)));
        let mut result = Dense::identity(self.n);
        let mut term = Dense::identity(self.n);
        for k in 1..30 {
            term = term.mul(&a).scale(c(1.0 / k as f64));
            result = result.add(&term);
        }
        for _ in 0..squarings {
            result = result.mul(&result);
        }
        result
    }
}

fn pauli2(p: Pauli) -> [[C; 2]; 2] {
    let o = c(0.0);
    let l = c(1.0);
    let i = C::new(0.0, 1.0);
    match p {
        Pauli::I => [[l, o], [o, l]],
        Pauli::X => [[o, l], [l, o]],
        Pauli::Y => [[o, -i], [i, o]],
        Pauli::Z => [[l, o], [o, -l]],
    }
}

/// Kronecker product `A ⊗ B` (A on the more significant bits).
fn kron(a: &Dense, b: &Dense) -> Dense {
    let n = a.n * b.n;
    let mut r = Dense::zeros(n);
    for i in 0..a.n {
        for j in 0..a.n {
            for k in 0..b.n {
                for l in 0..b.n {
                    r.a[(i * b.n + k) * n + j * b.n + l] = a.at(i, j) * b.at(k, l);
                }
            }
        }
    }
    r
}

/// Dense Hamiltonian built by explicit Kronecker products; qubit `q` is bit
/// `q` of the basis index, so qubit `n−1` is the leftmost factor.
pub fn dense_hamiltonian(h: &LocalHamiltonian) -> Dense {
    let n = h.n_qubits();
    let mut total = Dense::zeros(1 << n);
    for t in h.terms() {
        let mut m = Dense::identity(1);
        for q in (0..n).rev() {
            let p = pauli2(t.op.letter(q));
            let f = Dense {
                n: 2,
                a: vec![p[0][0], p[0][1], p[1][0], p[1][1]],
            };
            m = kron(&m, &f);
        }
        total = total.add(&m.scale(c(t.coeff)));
    }
    total
}

pub fn inner(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Dense product state vector by explicit Kronecker products.
pub fn dense_product(x: &ProductState) -> Vec<C> {
    let mut v = vec![c(1.0)];
    for q in (0..x.n_qubits()).rev() {
        let p = x.qubit(q);
        v = v.iter().flat_map(|&a| [a * p[0], a * p[1]]).collect();
    }
    v
}

pub fn dense_state(psi: &SemiClassicalState) -> Vec<C> {
    let mut v = vec![c(0.0); 1 << psi.n_qubits()];
    for (a, x) in psi.components() {
        for (vi, xi) in v.iter_mut().zip(dense_product(x)) {
            *vi += a * xi;
        }
    }
    v
}

/// `⟨ψ|e^{−β(H − x)}|ψ⟩` from the dense matrix exponential.
pub fn dense_partition(h: &LocalHamiltonian, shift: f64, beta: C, psi: &SemiClassicalState) -> C {
    let m = dense_hamiltonian(h).expm(-beta);
    let v = dense_state(psi);
    inner(&v, &m.apply(&v)) * (beta * shift).exp()
}

/// Smallest eigenvalue by power iteration on `c·I − H` with a Rayleigh
/// quotient readout.
pub fn power_iteration_ground(h: &LocalHamiltonian, iters: usize) -> f64 {
    let m = dense_hamiltonian(h);
    let shift = h.coeff_l1();
    let n = m.n;
    let mut v: Vec<C> = (0..n).map(|i| c(1.0 + 0.01 * (i as f64).sin())).collect();
    for _ in 0..iters {
        let hv = m.apply(&v);
        let w: Vec<C> = v.iter().zip(&hv).map(|(a, b)| a * shift - b).collect();
        let norm = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        v = w.iter().map(|a| a / norm).collect();
    }
    inner(&v, &m.apply(&v)).re
}

/// Composite Gauss–Legendre quadrature (5 nodes per panel).
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for k in 0..5 {
            s += W[k] * f(mid + 0.5 * h * X[k]);
        }
    }
    s * 0.5 * h
}

const LETTERS: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

/// Random 2-local open chain: every bond and site gets a few random Pauli
/// terms with coefficients in [−1, 1]; at most `max_terms` terms.
pub fn random_chain(r: &mut impl Rng, n: usize, max_terms: usize) -> LocalHamiltonian {
    loop {
        let mut terms = Vec::new();
        for q in 0..n.saturating_sub(1) {
            let p = LETTERS[r.gen_range(0..3)];
            let s = LETTERS[r.gen_range(0..3)];
            terms.push((r.gen_range(-1.0..1.0), PauliString::new(n, [(q, p), (q + 1, s)]).unwrap()));
        }
        while terms.len() < max_terms {
            let q = r.gen_range(0..n);
            terms.push((r.gen_range(-1.0..1.0), PauliString::new(n, [(q, LETTERS[r.gen_range(0..3)])]).unwrap()));
        }
        terms.truncate(max_terms);
        if let Ok(h) = LocalHamiltonian::new(n, terms) {
            return h;
        }
    }
}

/// Random Hamiltonian with `n_terms` random 1- or 2-local terms.
pub fn random_local(r: &mut impl Rng, n: usize, n_terms: usize) -> LocalHamiltonian {
    loop {
        let terms: Vec<_> = (0..n_terms)
            .map(|_| {
                let a = r.gen_range(0..n);
                let mut ops = vec![(a, LETTERS[r.gen_range(0..3)])];
                if n > 1 && r.gen_bool(0.6) {
                    let mut b = r.gen_range(0..n);
                    while b == a {
                        b = r.gen_range(0..n);
                    }
                    ops.push((b, LETTERS[r.gen_range(0..3)]));
                }
                (r.gen_range(-1.0..1.0), PauliString::new(n, ops).unwrap())
            })
            .collect();
        if let Ok(h) = LocalHamiltonian::new(n, terms) {
            return h;
        }
    }
}

pub fn random_qubit(r: &mut impl Rng) -> [C; 2] {
    let theta: f64 = r.gen_range(0.0..std::f64::consts::PI);
    let phi: f64 = r.gen_range(0.0..2.0 * std::f64::consts::PI);
    [c((theta / 2.0).cos()), C::from_polar((theta / 2.0).sin(), phi)]
}

pub fn random_product(r: &mut impl Rng, n: usize) -> ProductState {
    ProductState::new((0..n).map(|_| random_qubit(r)).collect()).unwrap()
}

pub fn random_basis(r: &mut impl Rng, n: usize) -> ProductState {
    ProductState::basis(&(0..n).map(|_| r.gen_range(0..2u8)).collect::<Vec<_>>())
}

/// Random `R`-configuration state: basis or general product components
/// with random complex amplitudes, normalized.
pub fn random_semiclassical(r: &mut impl Rng, n: usize, configs: usize, basis: bool) -> SemiClassicalState {
    let comps = (0..configs)
        .map(|_| {
            let a = C::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
            let x = if basis { random_basis(r, n) } else { random_product(r, n) };
            (a, x)
        })
        .collect();
    SemiClassicalState::normalized(comps).unwrap()
}

/// TFIM open chain `−Σ Z_i Z_{i+1} − Σ X_i`.
pub fn tfim(n: usize, coupling: f64, field: f64) -> LocalHamiltonian {
    let mut terms = Vec::new();
    for q in 0..n - 1 {
        terms.push((coupling, PauliString::new(n, [(q, Pauli::Z), (q + 1, Pauli::Z)]).unwrap()));
    }
    for q in 0..n {
        terms.push((field, PauliString::new(n, [(q, Pauli::X)]).unwrap()));
    }
    LocalHamiltonian::new(n, terms).unwrap()
}
