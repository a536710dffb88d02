//! Truncated-series estimates of `d_{x,y,β} = ⟨y|e^{−βH}|x⟩` and of the
//! guiding-state partition function `D_β(H − x)`.
//!
//! Coefficients come from the formal logarithm of the moment series
//! `Σ_m (−β)^m μ_m / m!` with `μ_m = ⟨y|H^m|x⟩`; the cluster expansion
//! supplies the truncation order and the tail bound.

use std::f64::consts::E;

use indexmap::IndexMap;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::caps::{check_cap, Caps};
use crate::error::{invalid, Error, Result};
use crate::graph::{beta_star, build_graph};
use crate::hamiltonian::{LocalHamiltonian, ProductState, SemiClassicalState};
use crate::series::{series_eval, series_log, TruncatedSeries, LOG_FLOOR};

/// Which backend produced a partition estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Cluster,
    Exact,
    HadamardMc,
    Continuation,
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionEstimate {
    pub value: Complex64,
    pub additive_error_bound: f64,
    /// Truncation order, or the sample count for the Monte-Carlo backend.
    pub order: usize,
    pub backend: BackendKind,
    /// Component pairs evaluated by the direct (non-logarithmic) series.
    pub direct_pairs: usize,
}

/// `μ_0..μ_M` with `μ_m = ⟨y|H^m|x⟩`.
#[derive(Clone, Debug, Serialize)]
pub struct MomentTable {
    pub moments: Vec<Complex64>,
}

impl MomentTable {
    pub fn order(&self) -> usize {
        self.moments.len() - 1
    }
}

/// Orthonormal single-qubit basis whose first vector is the given state.
fn adapted_basis(p: [Complex64; 2]) -> [[Complex64; 2]; 2] {
    [p, [-p[1].conj(), p[0].conj()]]
}

struct LocalOp {
    bit: u64,
    shift: u32,
    /// `m[i][j] = ⟨e_i|σ|e_j⟩`.
    m: [[Complex64; 2]; 2],
}

struct TermAction {
    coeff: f64,
    ops: Vec<LocalOp>,
}

/// Repeated application of `H` to a product state, stored sparsely over
/// bitstrings in the product basis adapted to that state.
pub struct MomentPropagator {
    basis: Vec<[[Complex64; 2]; 2]>,
    actions: Vec<TermAction>,
    current: IndexMap<u64, Complex64>,
    power: usize,
    entry_cap: usize,
}

impl MomentPropagator {
    pub fn new(h: &LocalHamiltonian, x: &ProductState, caps: &Caps) -> Result<Self> {
        let n = h.n_qubits();
        if x.n_qubits() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.n_qubits(),
            });
        }
        check_cap("sparse qubit", caps.sparse_qubits.min(64), n)?;
        let basis: Vec<_> = x.qubits().iter().map(|&p| adapted_basis(p)).collect();
        let actions = h
            .terms()
            .iter()
            .map(|t| TermAction {
                coeff: t.coeff,
                ops: t
                    .op
                    .ops()
                    .iter()
                    .map(|&(q, letter)| {
                        let s = letter.matrix();
                        let e = basis[q];
                        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
                        for (i, row) in m.iter_mut().enumerate() {
                            for (j, slot) in row.iter_mut().enumerate() {
                                let se = [
                                    s[0][0] * e[j][0] + s[0][1] * e[j][1],
                                    s[1][0] * e[j][0] + s[1][1] * e[j][1],
                                ];
                                *slot = e[i][0].conj() * se[0] + e[i][1].conj() * se[1];
                            }
                        }
                        LocalOp {
                            bit: 1 << q,
                            shift: q as u32,
                            m,
                        }
                    })
                    .collect(),
            })
            .collect();
        let mut current = IndexMap::new();
        current.insert(0u64, Complex64::new(1.0, 0.0));
        Ok(MomentPropagator {
            basis,
            actions,
            current,
            power: 0,
            entry_cap: caps.sparse_entries,
        })
    }

    /// The power `m` of the currently held vector `H^m|x⟩`.
    pub fn power(&self) -> usize {
        self.power
    }

    pub fn sparse_len(&self) -> usize {
        self.current.len()
    }

    /// Replaces the held vector `v` by `H v`.
    pub fn step(&mut self) -> Result<()> {
        let zero = Complex64::new(0.0, 0.0);
        let mut next: IndexMap<u64, Complex64> = IndexMap::with_capacity(self.current.len() * 2);
        let mut branches: Vec<(u64, Complex64)> = Vec::new();
        let mut scratch: Vec<(u64, Complex64)> = Vec::new();
        for (&s, &c) in &self.current {
            for act in &self.actions {
                branches.clear();
                branches.push((s, c * act.coeff));
                for op in &act.ops {
                    scratch.clear();
                    for &(b, a) in &branches {
                        let j = ((b & op.bit) >> op.shift) as usize;
                        for i in 0..2 {
                            let v = op.m[i][j];
                            if v != zero {
                                scratch.push(((b & !op.bit) | ((i as u64) << op.shift), a * v));
                            }
                        }
                    }
                    std::mem::swap(&mut branches, &mut scratch);
                }
                for &(b, a) in &branches {
                    *next.entry(b).or_insert(zero) += a;
                }
            }
        }
        check_cap("sparse entry", self.entry_cap, next.len())?;
        self.current = next;
        self.power += 1;
        Ok(())
    }

    /// Per-qubit overlaps `⟨y_q|e_i⟩` used by [`Self::overlap`].
    pub fn overlap_table(&self, y: &ProductState) -> Vec<[Complex64; 2]> {
        self.basis
            .iter()
            .zip(y.qubits())
            .map(|(e, yq)| {
                let ip = |v: &[Complex64; 2]| yq[0].conj() * v[0] + yq[1].conj() * v[1];
                [ip(&e[0]), ip(&e[1])]
            })
            .collect()
    }

    /// `⟨y|H^m|x⟩` for the held power `m`.
    pub fn overlap(&self, table: &[[Complex64; 2]]) -> Complex64 {
        self.current
            .iter()
            .map(|(&s, &c)| {
                let mut a = c;
                for (q, t) in table.iter().enumerate() {
                    a *= t[((s >> q) & 1) as usize];
                    if a == Complex64::new(0.0, 0.0) {
                        break;
                    }
                }
                a
            })
            .sum()
    }
}

pub fn compute_moments(
    h: &LocalHamiltonian,
    x: &ProductState,
    y: &ProductState,
    order: usize,
    caps: &Caps,
) -> Result<MomentTable> {
    let mut p = MomentPropagator::new(h, x, caps)?;
    if y.n_qubits() != h.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: h.n_qubits(),
            got: y.n_qubits(),
        });
    }
    let table = p.overlap_table(y);
    let mut moments = vec![p.overlap(&table)];
    for _ in 0..order {
        p.step()?;
        moments.push(p.overlap(&table));
    }
    Ok(MomentTable { moments })
}

/// `M = ⌈ln(|S|/(ε(1 − β/β*))) / ln(β*/β)⌉`, at least 1.
pub fn truncation_order(n_terms: usize, beta: f64, beta_star: f64, eps: f64) -> Result<usize> {
    if !(eps > 0.0) || beta < 0.0 {
        return invalid("truncation order needs ε > 0 and β ≥ 0");
    }
    if beta >= beta_star {
        return Err(Error::BetaOutOfRange(format!(
            "β = {beta} ≥ β* = {beta_star}; the cluster series does not converge"
        )));
    }
    if beta == 0.0 {
        return Ok(1);
    }
    let r = beta / beta_star;
    let m = (n_terms as f64 / (eps * (1.0 - r))).ln() / (1.0 / r).ln();
    Ok((m.ceil().max(1.0)) as usize)
}

/// `|S| r^{M+1}/(1 − r)` with `r = 2e²𝔡(𝔡+1)|β|`.
pub fn cluster_tail_bound(n_terms: usize, degree_eff: usize, beta: f64, order: usize) -> Result<f64> {
    let d = degree_eff.max(1) as f64;
    let r = 2.0 * E * E * d * (d + 1.0) * beta.abs();
    if r >= 1.0 {
        return Err(Error::BetaOutOfRange(format!("cluster ratio {r} ≥ 1")));
    }
    Ok(n_terms as f64 * r.powi(order as i32 + 1) / (1.0 - r))
}

/// Taylor coefficients in β of `Σ_m (−β)^m μ_m / m!`.
pub fn moment_series(moments: &[Complex64]) -> TruncatedSeries {
    let mut fact = 1.0;
    TruncatedSeries::new(
        moments
            .iter()
            .enumerate()
            .map(|(m, &mu)| {
                if m > 0 {
                    fact *= m as f64;
                }
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                mu * (sign / fact)
            })
            .collect(),
    )
}

/// Taylor series in β of `log⟨y|e^{−βH}|x⟩` from its moments.
pub fn log_series_from_moments(moments: &[Complex64], floor: f64) -> Result<TruncatedSeries> {
    series_log(&moment_series(moments), floor)
}

pub fn log_amplitude_series(
    h: &LocalHamiltonian,
    x: &ProductState,
    y: &ProductState,
    order: usize,
    caps: &Caps,
) -> Result<TruncatedSeries> {
    let t = compute_moments(h, x, y, order, caps)?;
    log_series_from_moments(&t.moments, LOG_FLOOR)
}

/// `Σ_{m>M} a^m/m!` bounded above in closed form.
fn exp_tail(a: f64, order: usize) -> f64 {
    let m1 = order as f64 + 1.0;
    let mut term = 1.0;
    for k in 1..=order + 1 {
        term *= a / k as f64;
    }
    if a < m1 + 1.0 {
        term / (1.0 - a / (m1 + 1.0))
    } else {
        // Geometric domination fails; sum explicitly until terms vanish.
        let mut sum = term;
        let mut k = order + 2;
        while term > 1e-300 && k < 100_000 {
            term *= a / k as f64;
            sum += term;
            k += 1;
        }
        sum
    }
}

#[derive(Clone, Debug)]
pub struct ExpansionOptions {
    pub caps: Caps,
    pub log_floor: f64,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        ExpansionOptions {
            caps: Caps::default(),
            log_floor: LOG_FLOOR,
        }
    }
}

struct PairPlan {
    j: usize,
    k: usize,
    weight: Complex64,
    beta_eff: f64,
    log_mode: bool,
}

/// Estimate of `D_β(H − x) = Σ_{j,k} a_j a_k* ⟨x_k|e^{−β(H−x)}|x_j⟩`.
///
/// Each diagonal pair and each off-diagonal pair with `⟨x_k|x_j⟩ ≠ 0` and a
/// convergent cluster series is evaluated through the logarithmic series;
/// the remaining pairs use the direct exponential series. The order `M`
/// starts at the cluster truncation order and is raised until the summed
/// error bound is at most `ε`.
pub fn estimate_partition(
    h: &LocalHamiltonian,
    shift: f64,
    beta: Complex64,
    psi: &SemiClassicalState,
    eps: f64,
    opts: &ExpansionOptions,
) -> Result<PartitionEstimate> {
    let n = h.n_qubits();
    if psi.n_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: psi.n_qubits(),
        });
    }
    if beta.re < 0.0 || !beta.re.is_finite() || !beta.im.is_finite() {
        return invalid("estimate_partition needs Re β ≥ 0");
    }
    if !(eps > 0.0) {
        return invalid("ε must be positive");
    }
    let r = psi.len();
    check_cap("component pair", opts.caps.pairs, r * r)?;
    if beta == Complex64::new(0.0, 0.0) {
        return Ok(PartitionEstimate {
            value: Complex64::new(psi.norm_sqr(), 0.0),
            additive_error_bound: 0.0,
            order: 0,
            backend: BackendKind::Cluster,
            direct_pairs: 0,
        });
    }

    let graph = build_graph(h);
    let d_eff = graph.effective_degree();
    let bstar = beta_star(graph.max_degree());
    let n_terms = h.n_terms();
    let lambda_l1 = h.coeff_l1();
    let comps = psi.components();

    // Per-qubit overlap magnitudes give each term's off-diagonal scaling
    // κ_X = Π_{q∈X} 1/|⟨y_q|x_q⟩|.
    let mut plans: Vec<PairPlan> = Vec::new();
    for j in 0..r {
        for k in j..r {
            let (aj, xj) = (&comps[j].0, &comps[j].1);
            let (ak, xk) = (&comps[k].0, &comps[k].1);
            let ov: Vec<f64> = xk
                .qubits()
                .iter()
                .zip(xj.qubits())
                .map(|(y, x)| (y[0].conj() * x[0] + y[1].conj() * x[1]).norm())
                .collect();
            let scale = h
                .terms()
                .iter()
                .map(|t| {
                    let kappa: f64 = t.op.support().map(|q| 1.0 / ov[q]).product();
                    t.coeff.abs() * kappa
                })
                .fold(0.0, f64::max);
            let beta_eff = beta.norm() * scale;
            let mu0: f64 = ov.iter().product();
            let log_mode = beta_eff.is_finite()
                && beta_eff < bstar
                && mu0 >= opts.log_floor
                && (j == k || truncation_order(n_terms, beta_eff, bstar, eps)? <= opts.caps.truncation_order);
            if j == k && !log_mode {
                return Err(Error::BetaOutOfRange(format!(
                    "|β|·max|λ| = {beta_eff:.6} ≥ β* = {bstar:.6}; use the continuation or exact backend"
                )));
            }
            plans.push(PairPlan {
                j,
                k,
                weight: aj * ak.conj(),
                beta_eff,
                log_mode,
            });
        }
    }

    let worst = plans
        .iter()
        .filter(|p| p.j == p.k)
        .map(|p| p.beta_eff)
        .fold(0.0, f64::max);
    let mut order = truncation_order(n_terms, worst, bstar, eps)?;
    let cap = opts.caps.truncation_order;
    if order > cap {
        return Err(Error::CapExceeded {
            what: "truncation order",
            limit: cap,
            actual: order,
        });
    }

    // One propagator per ket component; moments for every bra k >= j.
    let mut props: Vec<MomentPropagator> = Vec::with_capacity(r);
    let mut tables: Vec<Vec<Vec<[Complex64; 2]>>> = Vec::with_capacity(r);
    let mut moments: Vec<Vec<Vec<Complex64>>> = Vec::with_capacity(r);
    for j in 0..r {
        let p = MomentPropagator::new(h, &comps[j].1, &opts.caps)?;
        let t: Vec<_> = (j..r).map(|k| p.overlap_table(&comps[k].1)).collect();
        moments.push(t.iter().map(|tab| vec![p.overlap(tab)]).collect());
        tables.push(t);
        props.push(p);
    }

    let damping = (beta * shift).exp();
    let damp_abs = damping.norm();
    loop {
        for j in 0..r {
            while props[j].power() < order {
                props[j].step()?;
                for (idx, tab) in tables[j].iter().enumerate() {
                    let mu = props[j].overlap(tab);
                    moments[j][idx].push(mu);
                }
            }
        }
        let mut value = Complex64::new(0.0, 0.0);
        let mut bound = 0.0;
        let mut direct = 0;
        for p in &plans {
            let mu = &moments[p.j][p.k - p.j][..=order];
            let pair_weight = if p.j == p.k { p.weight.norm() } else { 2.0 * p.weight.norm() };
            let (d_fwd, d_rev, err) = if p.log_mode {
                let s = log_series_from_moments(mu, opts.log_floor)?;
                let d_fwd = series_eval(&s, beta).exp();
                let d_rev = series_eval(&s.conj(), beta).exp();
                let t = cluster_tail_bound(n_terms, d_eff, p.beta_eff, order)?;
                let mag = d_fwd.norm().max(d_rev.norm());
                (d_fwd, d_rev, mag * t.exp() * t.exp_m1())
            } else {
                direct += 1;
                let s = moment_series(mu);
                let d_fwd = series_eval(&s, beta);
                let d_rev = series_eval(&s.conj(), beta);
                (d_fwd, d_rev, exp_tail(beta.norm() * lambda_l1, order))
            };
            if p.j == p.k {
                value += p.weight * d_fwd;
            } else {
                value += p.weight * d_fwd + p.weight.conj() * d_rev;
            }
            bound += pair_weight * err;
        }
        let value = value * damping;
        let bound = bound * damp_abs;
        if bound <= eps {
            return Ok(PartitionEstimate {
                value,
                additive_error_bound: bound,
                order,
                backend: BackendKind::Cluster,
                direct_pairs: direct,
            });
        }
        if order >= cap {
            return Err(Error::TruncationNotMet {
                order,
                bound,
                target: eps,
            });
        }
        order += 1;
    }
}
