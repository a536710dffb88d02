use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Pauli, PauliString};
use crate::error::{invalid, Error, Result};

const QUBIT_NORM_TOL: f64 = 1e-12;
const STATE_NORM_TOL: f64 = 1e-10;

/// `⊗_q (a_q|0⟩ + b_q|1⟩)` with every pair of unit norm.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductState {
    qubits: Vec<[Complex64; 2]>,
}

fn pair_norm(p: &[Complex64; 2]) -> f64 {
    (p[0].norm_sqr() + p[1].norm_sqr()).sqrt()
}

/// Phase of the first component that is not negligible.
fn gauge(p: &[Complex64; 2]) -> Complex64 {
    let c = if p[0].norm() > 1e-12 { p[0] } else { p[1] };
    c / c.norm()
}

impl ProductState {
    pub fn new(qubits: Vec<[Complex64; 2]>) -> Result<Self> {
        for (q, p) in qubits.iter().enumerate() {
            if (pair_norm(p) - 1.0).abs() > QUBIT_NORM_TOL {
                return invalid(format!("qubit {q} amplitude pair is not normalized"));
            }
        }
        Ok(ProductState { qubits })
    }

    /// Normalizes each pair and returns the product of the removed norms.
    pub fn normalized(mut qubits: Vec<[Complex64; 2]>) -> Result<(Self, f64)> {
        let mut scale = 1.0;
        for (q, p) in qubits.iter_mut().enumerate() {
            let n = pair_norm(p);
            if !(n > 0.0) || !n.is_finite() {
                return invalid(format!("qubit {q} has a zero or non-finite amplitude pair"));
            }
            p[0] /= n;
            p[1] /= n;
            scale *= n;
        }
        Ok((ProductState { qubits }, scale))
    }

    /// Computational basis state; `bits[q]` is the value of qubit `q`.
    pub fn basis(bits: &[u8]) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        ProductState {
            qubits: bits
                .iter()
                .map(|&b| if b == 0 { [one, zero] } else { [zero, one] })
                .collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::basis(&vec![0; n])
    }

    /// `|+⟩^{⊗n}`.
    pub fn plus(n: usize) -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        ProductState {
            qubits: vec![[h, h]; n],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn qubits(&self) -> &[[Complex64; 2]] {
        &self.qubits
    }

    pub fn qubit(&self, q: usize) -> [Complex64; 2] {
        self.qubits[q]
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &ProductState) -> Complex64 {
        self.qubits
            .iter()
            .zip(&other.qubits)
            .map(|(a, b)| a[0].conj() * b[0] + a[1].conj() * b[1])
            .product()
    }

    /// Dense amplitudes; basis index bit `q` is the value of qubit `q`.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(1.0, 0.0)];
        for (q, p) in self.qubits.iter().enumerate() {
            let mut next = vec![Complex64::new(0.0, 0.0); v.len() * 2];
            let bit = 1usize << q;
            for (i, &a) in v.iter().enumerate() {
                next[i] = a * p[0];
                next[i | bit] = a * p[1];
            }
            v = next;
        }
        v
    }
}

/// Applies a Pauli string to a product state. Acted-on qubits keep the gauge
/// of the input (the phase of their first non-negligible component); the
/// scalar removed to achieve this is returned as `phase`.
pub fn apply_pauli(p: &PauliString, s: &ProductState) -> Result<(Complex64, ProductState)> {
    if p.n_qubits() != s.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: p.n_qubits(),
            got: s.n_qubits(),
        });
    }
    let mut phase = Complex64::new(1.0, 0.0);
    let mut out = s.qubits.clone();
    for &(q, letter) in p.ops() {
        let m = letter.matrix();
        let a = s.qubits[q];
        let b = [
            m[0][0] * a[0] + m[0][1] * a[1],
            m[1][0] * a[0] + m[1][1] * a[1],
        ];
        let rel = gauge(&b) / gauge(&a);
        phase *= rel;
        out[q] = [b[0] / rel, b[1] / rel];
    }
    debug_assert!(p.ops().iter().all(|&(_, l)| l != Pauli::I));
    Ok((phase, ProductState { qubits: out }))
}

/// `Σ_j a_j |x_j⟩` over product states.
#[derive(Clone, Debug, PartialEq)]
pub struct SemiClassicalState {
    components: Vec<(Complex64, ProductState)>,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    n_qubits: usize,
    components: Vec<ComponentFile>,
}

#[derive(Serialize, Deserialize)]
struct ComponentFile {
    amp_re: f64,
    amp_im: f64,
    qubits: Vec<[f64; 4]>,
}

impl SemiClassicalState {
    /// Validates the components. The norm checked is the true state norm
    /// `Σ_jk a_j* a_k ⟨x_j|x_k⟩`, which reduces to `Σ|a_j|²` for mutually
    /// orthogonal components.
    pub fn new(components: Vec<(Complex64, ProductState)>) -> Result<Self> {
        let s = Self::unchecked(components)?;
        let n2 = s.norm_sqr();
        if (n2 - 1.0).abs() > STATE_NORM_TOL {
            return invalid(format!("state norm² = {n2}, expected 1"));
        }
        Ok(s)
    }

    /// Rescales the amplitudes to unit norm.
    pub fn normalized(components: Vec<(Complex64, ProductState)>) -> Result<Self> {
        let mut s = Self::unchecked(components)?;
        let n2 = s.norm_sqr();
        if !(n2 > 1e-300) {
            return invalid("state has zero norm");
        }
        let inv = 1.0 / n2.sqrt();
        for c in &mut s.components {
            c.0 *= inv;
        }
        Ok(s)
    }

    fn unchecked(components: Vec<(Complex64, ProductState)>) -> Result<Self> {
        let Some(first) = components.first() else {
            return invalid("semi-classical state needs at least one component");
        };
        let n = first.1.n_qubits();
        if let Some(c) = components.iter().find(|c| c.1.n_qubits() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.1.n_qubits(),
            });
        }
        Ok(SemiClassicalState { components })
    }

    pub fn single(x: ProductState) -> Self {
        SemiClassicalState {
            components: vec![(Complex64::new(1.0, 0.0), x)],
        }
    }

    pub fn components(&self) -> &[(Complex64, ProductState)] {
        &self.components
    }

    /// Configuration count `R`.
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn n_qubits(&self) -> usize {
        self.components[0].1.n_qubits()
    }

    pub fn norm_sqr(&self) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (aj, xj) in &self.components {
            for (ak, xk) in &self.components {
                acc += aj.conj() * ak * xj.overlap(xk);
            }
        }
        acc.re
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); 1usize << self.n_qubits()];
        for (a, x) in &self.components {
            for (vi, xi) in v.iter_mut().zip(x.to_dense()) {
                *vi += a * xi;
            }
        }
        v
    }

    /// Parses the JSON state format. Qubit pairs and the overall amplitude
    /// are normalized; a noticeable rescale is logged.
    pub fn from_json(text: &str) -> Result<Self> {
        let f: StateFile = serde_json::from_str(text)?;
        let mut comps = Vec::with_capacity(f.components.len());
        for c in f.components {
            if c.qubits.len() != f.n_qubits {
                return Err(Error::DimensionMismatch {
                    expected: f.n_qubits,
                    got: c.qubits.len(),
                });
            }
            let pairs = c
                .qubits
                .iter()
                .map(|q| [Complex64::new(q[0], q[1]), Complex64::new(q[2], q[3])])
                .collect();
            let (x, scale) = ProductState::normalized(pairs)?;
            comps.push((Complex64::new(c.amp_re, c.amp_im) * scale, x));
        }
        let raw = Self::unchecked(comps)?;
        let n2 = raw.norm_sqr();
        if (n2 - 1.0).abs() > STATE_NORM_TOL {
            log::warn!("state file norm² = {n2}; rescaling to 1");
        }
        Self::normalized(raw.components)
    }

    pub fn to_json(&self) -> String {
        let f = StateFile {
            n_qubits: self.n_qubits(),
            components: self
                .components
                .iter()
                .map(|(a, x)| ComponentFile {
                    amp_re: a.re,
                    amp_im: a.im,
                    qubits: x
                        .qubits()
                        .iter()
                        .map(|p| [p[0].re, p[0].im, p[1].re, p[1].im])
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&f).expect("state serializes")
    }
}
