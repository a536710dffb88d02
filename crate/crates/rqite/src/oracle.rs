//! Dense exact diagonalization: spectra, partition functions, residues,
//! Loschmidt amplitudes and zero-free scans.

use faer::{c64, Mat, Side};
use num_complex::Complex64;
use serde::Serialize;

use crate::caps::{check_cap, Caps};
use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{LocalHamiltonian, SemiClassicalState};

/// Relative tolerance separating the ground eigenspace from excited levels.
pub const DEGENERACY_TOL: f64 = 1e-9;

fn cx(c: c64) -> Complex64 {
    Complex64::new(c.re, c.im)
}

/// Dense matrix with basis index bit `q` holding qubit `q`.
pub fn dense_matrix(h: &LocalHamiltonian, caps: &Caps) -> Result<Mat<c64>> {
    let n = h.n_qubits();
    check_cap("oracle qubit", caps.oracle_qubits, n)?;
    let dim = 1usize << n;
    let mut m = Mat::<c64>::zeros(dim, dim);
    let i_pow = [
        c64::new(1.0, 0.0),
        c64::new(0.0, 1.0),
        c64::new(-1.0, 0.0),
        c64::new(0.0, -1.0),
    ];
    for t in h.terms() {
        let (x, z, ny) = t.op.masks();
        let base = i_pow[(ny % 4) as usize] * t.coeff;
        for i in 0..dim {
            let sign = if (i as u64 & z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            m[(i ^ x as usize, i)] += base * sign;
        }
    }
    Ok(m)
}

/// Eigenvalues (ascending) and eigenvectors of a Hamiltonian.
pub struct EigenSystem {
    eigenvalues: Vec<f64>,
    vectors: Mat<c64>,
}

impl EigenSystem {
    pub fn new(h: &LocalHamiltonian, caps: &Caps) -> Result<Self> {
        let m = dense_matrix(h, caps)?;
        let e = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
        let s = e.S().column_vector();
        let eigenvalues: Vec<f64> = (0..s.nrows()).map(|i| s[i].re).collect();
        debug_assert!(eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        Ok(EigenSystem {
            eigenvalues,
            vectors: e.U().to_owned(),
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvector `j` as a dense vector.
    pub fn eigenvector(&self, j: usize) -> Vec<Complex64> {
        (0..self.dim()).map(|i| cx(self.vectors[(i, j)])).collect()
    }

    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues
            .first()
            .map(|e| e.abs())
            .unwrap_or(0.0)
            .max(self.eigenvalues.last().map(|e| e.abs()).unwrap_or(0.0))
    }

    /// Spectral data for a normalized dense state.
    pub fn spectral_data(&self, state: &[Complex64]) -> Result<SpectralData> {
        let dim = self.dim();
        if state.len() != dim {
            return invalid(format!("state has {} amplitudes, expected {dim}", state.len()));
        }
        let amplitudes: Vec<Complex64> = (0..dim)
            .map(|j| {
                let col = self.vectors.col(j);
                (0..dim).map(|i| cx(col[i]).conj() * state[i]).sum()
            })
            .collect();
        let overlaps: Vec<f64> = amplitudes.iter().map(|a| a.norm_sqr()).collect();
        let total: f64 = overlaps.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("state is not normalized: Σ p_j = {total}"));
        }
        let e0 = self.eigenvalues[0];
        let tol = DEGENERACY_TOL * self.spectral_norm().max(f64::MIN_POSITIVE);
        let degeneracy = self.eigenvalues.iter().take_while(|&&e| e <= e0 + tol).count();
        let gap = self
            .eigenvalues
            .get(degeneracy)
            .map_or(0.0, |&e1| e1 - e0);
        let p0 = overlaps[..degeneracy].iter().sum();
        Ok(SpectralData {
            eigenvalues: self.eigenvalues.clone(),
            ground_energy: e0,
            gap,
            ground_degeneracy: degeneracy,
            p0,
            overlaps,
        })
    }
}

/// Spectrum of `H` together with the guiding-state weights `p_j`.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub ground_energy: f64,
    /// Gap to the first level strictly above the ground eigenspace.
    pub gap: f64,
    pub ground_degeneracy: usize,
    /// Weight on the whole ground eigenspace.
    pub p0: f64,
    /// `p_j = |⟨ψ_j|ψ⟩|²` per eigenvector.
    pub overlaps: Vec<f64>,
}

impl SpectralData {
    /// Builds spectral data directly from levels and weights.
    pub fn from_levels(levels: &[(f64, f64)]) -> Result<Self> {
        let mut v = levels.to_vec();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let eigenvalues: Vec<f64> = v.iter().map(|l| l.0).collect();
        let overlaps: Vec<f64> = v.iter().map(|l| l.1).collect();
        let total: f64 = overlaps.iter().sum();
        if eigenvalues.is_empty() || (total - 1.0).abs() > 1e-9 {
            return invalid("levels must be nonempty with weights summing to 1");
        }
        let e0 = eigenvalues[0];
        let norm = eigenvalues.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        let tol = DEGENERACY_TOL * norm.max(f64::MIN_POSITIVE);
        let degeneracy = eigenvalues.iter().take_while(|&&e| e <= e0 + tol).count();
        Ok(SpectralData {
            gap: eigenvalues.get(degeneracy).map_or(0.0, |&e1| e1 - e0),
            p0: overlaps[..degeneracy].iter().sum(),
            ground_energy: e0,
            ground_degeneracy: degeneracy,
            eigenvalues,
            overlaps,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `D_β(H − x) = Σ_j p_j e^{−β(E_j − x)}`.
    pub fn partition(&self, shift: f64, beta: Complex64) -> Complex64 {
        self.eigenvalues
            .iter()
            .zip(&self.overlaps)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&e, &p)| (-beta * (e - shift)).exp() * p)
            .sum()
    }

    /// `R(x) = D_β(H − x) − D_{2β}(H − x)` for real β.
    pub fn residue(&self, x: f64, beta: f64) -> f64 {
        let b = Complex64::new(beta, 0.0);
        (self.partition(x, b) - self.partition(x, b * 2.0)).re
    }

    /// `Σ_j p_j e^{−i E_j t}`.
    pub fn loschmidt(&self, t: f64) -> Complex64 {
        self.eigenvalues
            .iter()
            .zip(&self.overlaps)
            .map(|(&e, &p)| Complex64::new(0.0, -e * t).exp() * p)
            .sum()
    }

    /// `Σ_j p_j e^{−β(E_j − E_0)}`, the ground-referenced partition sum.
    pub fn ground_referenced(&self, beta: Complex64) -> Complex64 {
        self.partition(self.ground_energy, beta)
    }
}

pub fn spectral_norm(h: &LocalHamiltonian, caps: &Caps) -> Result<f64> {
    Ok(EigenSystem::new(h, caps)?.spectral_norm())
}

pub fn spectrum(h: &LocalHamiltonian, psi: &SemiClassicalState, caps: &Caps) -> Result<SpectralData> {
    if psi.n_qubits() != h.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: h.n_qubits(),
            got: psi.n_qubits(),
        });
    }
    EigenSystem::new(h, caps)?.spectral_data(&psi.to_dense())
}

pub fn exact_partition(
    h: &LocalHamiltonian,
    shift: f64,
    beta: Complex64,
    psi: &SemiClassicalState,
    caps: &Caps,
) -> Result<Complex64> {
    Ok(spectrum(h, psi, caps)?.partition(shift, beta))
}

pub fn exact_residue(h: &LocalHamiltonian, x: f64, beta: f64, psi: &SemiClassicalState, caps: &Caps) -> Result<f64> {
    if !(beta > 0.0) {
        return invalid("residue needs β > 0");
    }
    Ok(spectrum(h, psi, caps)?.residue(x, beta))
}

pub fn exact_loschmidt(h: &LocalHamiltonian, t: f64, psi: &SemiClassicalState, caps: &Caps) -> Result<Complex64> {
    Ok(spectrum(h, psi, caps)?.loschmidt(t))
}

/// Rectangle of complex β values sampled on a uniform grid (endpoints
/// included).
#[derive(Clone, Debug, Serialize)]
pub struct BetaGrid {
    pub re: (f64, f64),
    pub im: (f64, f64),
    pub n_re: usize,
    pub n_im: usize,
}

impl BetaGrid {
    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        let step = |(a, b): (f64, f64), n: usize, k: usize| {
            if n <= 1 {
                a
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        };
        (0..self.n_re).flat_map(move |i| {
            (0..self.n_im).map(move |j| Complex64::new(step(self.re, self.n_re, i), step(self.im, self.n_im, j)))
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ZeroFreeScan {
    pub min_modulus: f64,
    pub argmin: Complex64,
    pub p0: f64,
    /// `2p_0 − 1`; only a bound when `p_0 > 1/2`.
    pub lower_bound: f64,
    pub bound_ok: bool,
}

/// Minimum of `|Σ_j p_j e^{−β(E_j − E_0)}|` over the grid.
pub fn zero_free_scan(spec: &SpectralData, grid: &BetaGrid) -> Result<ZeroFreeScan> {
    if !(grid.re.0 > 0.0 && grid.re.1 > 0.0) {
        return invalid("zero-free scan grid must have Re β > 0");
    }
    if grid.n_re == 0 || grid.n_im == 0 {
        return invalid("empty grid");
    }
    // Aggregate equal levels to cut work on degenerate spectra.
    let mut levels: Vec<(f64, f64)> = Vec::new();
    for (&e, &p) in spec.eigenvalues.iter().zip(&spec.overlaps) {
        if p == 0.0 {
            continue;
        }
        match levels.last_mut() {
            Some(l) if (e - l.0).abs() <= 1e-12 * (1.0 + e.abs()) => l.1 += p,
            _ => levels.push((e, p)),
        }
    }
    let e0 = spec.ground_energy;
    let mut best = (f64::INFINITY, Complex64::new(0.0, 0.0));
    for beta in grid.points() {
        let s: Complex64 = levels.iter().map(|&(e, p)| (-beta * (e - e0)).exp() * p).sum();
        if s.norm() < best.0 {
            best = (s.norm(), beta);
        }
    }
    let lower_bound = 2.0 * spec.p0 - 1.0;
    Ok(ZeroFreeScan {
        min_modulus: best.0,
        argmin: best.1,
        p0: spec.p0,
        lower_bound,
        bound_ok: spec.p0 <= 0.5 || best.0 >= lower_bound - 1e-9,
    })
}
