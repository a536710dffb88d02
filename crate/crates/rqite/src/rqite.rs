//! The ε-step residue scan for the ground-state energy.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::continuation::{
    continuation_order, continued_log_partition, select_continuation_params, zero_free_certificate,
    ContinuationOptions,
};
use crate::error::{invalid, Error, Result};
use crate::expansion::{estimate_partition, BackendKind, ExpansionOptions, PartitionEstimate};
use crate::graph::{beta_star, build_graph};
use crate::hadamard::{
    cauchy_norm, estimate_z, sample_count, truncation_time, HadamardSimulator, McMode, McSampleSet, SampleSpec,
};
use crate::hamiltonian::{LocalHamiltonian, ProductState, SemiClassicalState};
use crate::oracle::{spectrum, SpectralData};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RqiteConfig {
    /// Lower bound on the guiding-state overlap amplitude.
    pub gamma: f64,
    /// Lower bound on the spectral gap.
    pub gap: f64,
    pub eps: f64,
    pub ea: f64,
    pub eb: f64,
    pub backend: BackendKind,
    /// Failure probability for the Monte-Carlo backend.
    pub mu: f64,
    pub seed: u64,
    pub mc_mode: McMode,
    pub workers: usize,
    pub caps: Caps,
}

impl RqiteConfig {
    pub fn new(gamma: f64, gap: f64, eps: f64, ea: f64, eb: f64, backend: BackendKind) -> Self {
        RqiteConfig {
            gamma,
            gap,
            eps,
            ea,
            eb,
            backend,
            mu: 0.1,
            seed: 0,
            mc_mode: McMode::Expectation,
            workers: 1,
            caps: Caps::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return invalid("γ must lie in (0, 1]");
        }
        if !pos(self.gap) || !pos(self.eps) {
            return invalid("Δ and ε must be positive");
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return invalid("μ must lie in (0, 1)");
        }
        if !(self.ea.is_finite() && self.eb.is_finite() && self.ea <= self.eb) {
            return invalid("interval needs finite E_a ≤ E_b");
        }
        Ok(())
    }
}

/// `Δ/ε ≥ ln(1/(γ²ε))`.
pub fn validate_gap_assumption(gap: f64, eps: f64, gamma: f64) -> bool {
    gap / eps >= (1.0 / (gamma * gamma * eps)).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RqiteParameters {
    pub beta: f64,
    /// Maximal evolution time `4/(πγ²ε)`.
    pub t_max: f64,
    /// Termination threshold `(β/2 + 1)γ²ε`.
    pub xi: f64,
    /// Tolerance of each partition estimate, `γ²βε/2`.
    pub point_tolerance: f64,
    pub gap_assumption_ok: bool,
}

/// `β = ln(1/(γ²ε))/Δ`, `T = 4/(πγ²ε)`, `Ξ = (β/2 + 1)γ²ε`.
pub fn derive_parameters(gap: f64, eps: f64, gamma: f64) -> Result<RqiteParameters> {
    let g2e = gamma * gamma * eps;
    if !(gap > 0.0 && eps > 0.0 && gamma > 0.0) {
        return invalid("Δ, ε and γ must be positive");
    }
    if g2e >= 1.0 {
        return invalid(format!("γ²ε = {g2e} must be below 1 for a positive β"));
    }
    let ok = validate_gap_assumption(gap, eps, gamma);
    if !ok {
        log::warn!("gap assumption Δ/ε ≥ ln(1/(γ²ε)) fails; proceeding");
    }
    let beta = (1.0 / g2e).ln() / gap;
    Ok(RqiteParameters {
        beta,
        t_max: 4.0 / (std::f64::consts::PI * g2e),
        xi: (beta / 2.0 + 1.0) * g2e,
        point_tolerance: g2e * beta / 2.0,
        gap_assumption_ok: ok,
    })
}

/// The scan grid `E_a, E_a + ε, …` up to `E_b`.
pub fn scan_grid(ea: f64, eb: f64, eps: f64) -> Vec<f64> {
    let steps = ((eb - ea) / eps + 1e-9).floor() as usize;
    (0..=steps).map(|k| ea + k as f64 * eps).collect()
}

/// Source of `D_β(H − x)` estimates for the scan.
pub trait PartitionBackend {
    fn kind(&self) -> BackendKind;

    /// Called once with the whole grid, both β values and the per-point
    /// tolerance before any [`estimate`](Self::estimate).
    fn prepare(&mut self, _grid: &[f64], _betas: &[f64], _tol: f64) -> Result<()> {
        Ok(())
    }

    fn estimate(&mut self, x: f64, beta: f64, tol: f64) -> Result<PartitionEstimate>;
}

pub struct ExactBackend {
    spec: SpectralData,
}

impl ExactBackend {
    pub fn new(h: &LocalHamiltonian, psi: &SemiClassicalState, caps: &Caps) -> Result<Self> {
        Ok(ExactBackend {
            spec: spectrum(h, psi, caps)?,
        })
    }

    pub fn spectrum(&self) -> &SpectralData {
        &self.spec
    }
}

impl PartitionBackend for ExactBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Exact
    }

    fn estimate(&mut self, x: f64, beta: f64, _tol: f64) -> Result<PartitionEstimate> {
        Ok(PartitionEstimate {
            value: self.spec.partition(x, Complex64::new(beta, 0.0)),
            additive_error_bound: 0.0,
            order: 0,
            backend: BackendKind::Exact,
            direct_pairs: 0,
        })
    }
}

/// Cluster backend. `D_β(H − x) = e^{βx} D_β(H)`, so each β is expanded
/// once at the accuracy the rightmost grid point needs.
pub struct ClusterBackend {
    h: LocalHamiltonian,
    psi: SemiClassicalState,
    opts: ExpansionOptions,
    cache: HashMap<u64, PartitionEstimate>,
}

impl ClusterBackend {
    pub fn new(h: &LocalHamiltonian, psi: &SemiClassicalState, opts: ExpansionOptions) -> Self {
        ClusterBackend {
            h: h.clone(),
            psi: psi.clone(),
            opts,
            cache: HashMap::new(),
        }
    }

    fn base(&mut self, beta: f64, eps: f64) -> Result<&PartitionEstimate> {
        let key = beta.to_bits();
        let fresh = match self.cache.get(&key) {
            Some(e) => e.additive_error_bound > eps,
            None => true,
        };
        if fresh {
            let e = estimate_partition(&self.h, 0.0, Complex64::new(beta, 0.0), &self.psi, eps, &self.opts)?;
            self.cache.insert(key, e);
        }
        Ok(&self.cache[&key])
    }
}

impl PartitionBackend for ClusterBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Cluster
    }

    fn prepare(&mut self, grid: &[f64], betas: &[f64], tol: f64) -> Result<()> {
        let bstar = beta_star(build_graph(&self.h).max_degree());
        let lam = self.h.max_abs_coeff();
        let top = betas.iter().fold(0.0f64, |a, &b| a.max(b));
        if top * lam >= bstar {
            return Err(Error::BetaOutOfRange(format!(
                "cluster backend needs 2β·max|λ| < β*, got {:.6} ≥ {bstar:.6}; normalize H or relax ε",
                top * lam
            )));
        }
        let x_max = grid.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x));
        for &b in betas {
            self.base(b, tol * (-b * x_max).exp().min(1.0).max(f64::MIN_POSITIVE))
                .map_err(|e| Error::Backend {
                    x: x_max,
                    source: Box::new(e),
                })?;
        }
        Ok(())
    }

    fn estimate(&mut self, x: f64, beta: f64, tol: f64) -> Result<PartitionEstimate> {
        let damp = (beta * x).exp();
        let base = self.base(beta, tol / damp)?;
        Ok(PartitionEstimate {
            value: base.value * damp,
            additive_error_bound: base.additive_error_bound * damp,
            ..base.clone()
        })
    }
}

/// Monte-Carlo backend with one shared sample set per β.
pub struct McBackend {
    sim: HadamardSimulator,
    mode: McMode,
    mu: f64,
    seed: u64,
    workers: usize,
    caps: Caps,
    sets: Vec<(f64, McSampleSet)>,
}

impl McBackend {
    pub fn new(h: &LocalHamiltonian, psi: &SemiClassicalState, cfg: &RqiteConfig) -> Result<Self> {
        Ok(McBackend {
            sim: HadamardSimulator::new(h, psi, &cfg.caps)?,
            mode: cfg.mc_mode,
            mu: cfg.mu,
            seed: cfg.seed,
            workers: cfg.workers,
            caps: cfg.caps.clone(),
            sets: Vec::new(),
        })
    }
}

impl PartitionBackend for McBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::HadamardMc
    }

    fn prepare(&mut self, grid: &[f64], betas: &[f64], tol: f64) -> Result<()> {
        self.sets.clear();
        let m_points = grid.len() * betas.len();
        for (i, &beta) in betas.iter().enumerate() {
            let t_max = truncation_time(beta, (tol / 2.0).min(0.5))?;
            let count = sample_count(cauchy_norm(beta, t_max), tol / 2.0, m_points, self.mu)?;
            let spec = SampleSpec {
                beta,
                t_max,
                count,
                mode: self.mode,
                m_points,
                mu: self.mu,
                seed: self.seed.wrapping_add(i as u64),
            };
            let set = McSampleSet::generate(&self.sim, &spec, self.workers, &self.caps)?;
            self.sets.push((beta, set));
        }
        Ok(())
    }

    fn estimate(&mut self, x: f64, beta: f64, _tol: f64) -> Result<PartitionEstimate> {
        let set = self
            .sets
            .iter()
            .find(|(b, _)| *b == beta)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::InvalidInput(format!("no sample set prepared for β = {beta}")))?;
        estimate_z(set, x)
    }
}

/// Continuation backend on a conjugated Hamiltonian with guiding state
/// `|0ⁿ⟩`. The zero-free certificate uses `γ²` for `p_0`.
pub struct ContinuationBackend {
    h: LocalHamiltonian,
    p0_lower: f64,
    gap: f64,
    opts: ContinuationOptions,
    cache: HashMap<u64, PartitionEstimate>,
}

impl ContinuationBackend {
    pub fn new(
        h: &LocalHamiltonian,
        psi: &SemiClassicalState,
        p0_lower: f64,
        gap: f64,
        opts: ContinuationOptions,
    ) -> Result<Self> {
        let zero = ProductState::zeros(h.n_qubits());
        let ok = psi.len() == 1 && (psi.components()[0].1.overlap(&zero).norm() - 1.0).abs() < 1e-12;
        if !ok {
            return invalid("continuation backend needs the guiding state |0…0⟩; conjugate H by the preparation circuit");
        }
        Ok(ContinuationBackend {
            h: h.clone(),
            p0_lower,
            gap,
            opts,
            cache: HashMap::new(),
        })
    }
}

impl PartitionBackend for ContinuationBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Continuation
    }

    fn prepare(&mut self, grid: &[f64], betas: &[f64], tol: f64) -> Result<()> {
        let bstar = beta_star(build_graph(&self.h).max_degree());
        let x_max = grid.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x));
        let l1 = self.h.coeff_l1();
        for &beta in betas {
            let wrap = |e| Error::Backend {
                x: x_max,
                source: Box::new(e),
            };
            let params = select_continuation_params(beta, bstar).map_err(wrap)?;
            let cert = zero_free_certificate(self.p0_lower, self.gap, Complex64::new(beta, 0.0)).map_err(wrap)?;
            // |D_β(H − x)| ≤ e^{β(‖λ‖₁ + x)} and e^r − 1 ≤ 2r for r ≤ 1.
            let eps_log = tol / (2.0 * (beta * (l1 + x_max)).exp().max(1.0));
            let choice = continuation_order(&params, eps_log, self.h.n_terms(), beta * l1, &self.opts).map_err(wrap)?;
            if !choice.feasible {
                return Err(wrap(Error::CapExceeded {
                    what: "continuation order",
                    limit: self.opts.caps.continuation_order,
                    actual: choice.order.min(usize::MAX as f64) as usize,
                }));
            }
            let est = continued_log_partition(&self.h, 0.0, &params, choice.order as usize, &cert, &self.opts)
                .map_err(wrap)?;
            self.cache.insert(beta.to_bits(), est.to_partition_estimate());
        }
        Ok(())
    }

    fn estimate(&mut self, x: f64, beta: f64, _tol: f64) -> Result<PartitionEstimate> {
        let base = self
            .cache
            .get(&beta.to_bits())
            .ok_or_else(|| Error::InvalidInput(format!("no continuation prepared for β = {beta}")))?;
        let damp = (beta * x).exp();
        Ok(PartitionEstimate {
            value: base.value * damp,
            additive_error_bound: base.additive_error_bound * damp,
            ..base.clone()
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub x: f64,
    pub r: f64,
    pub error_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RqiteResult {
    pub e0_estimate: f64,
    pub terminated_at: usize,
    /// Grid point where the estimated residue peaks.
    pub e_max: f64,
    pub trace: Vec<TracePoint>,
    pub params: RqiteParameters,
    pub backend: BackendKind,
    /// Largest truncation order, sample count or continuation order used.
    pub max_order: usize,
}

/// Builds the backend named in `cfg`.
pub fn make_backend(h: &LocalHamiltonian, psi: &SemiClassicalState, cfg: &RqiteConfig) -> Result<Box<dyn PartitionBackend>> {
    Ok(match cfg.backend {
        BackendKind::Exact => Box::new(ExactBackend::new(h, psi, &cfg.caps)?),
        BackendKind::Cluster => Box::new(ClusterBackend::new(
            h,
            psi,
            ExpansionOptions {
                caps: cfg.caps.clone(),
                ..ExpansionOptions::default()
            },
        )),
        BackendKind::HadamardMc => Box::new(McBackend::new(h, psi, cfg)?),
        BackendKind::Continuation => Box::new(ContinuationBackend::new(
            h,
            psi,
            cfg.gamma * cfg.gamma,
            cfg.gap,
            ContinuationOptions {
                caps: cfg.caps.clone(),
                ..ContinuationOptions::default()
            },
        )?),
    })
}

pub fn scan(h: &LocalHamiltonian, psi: &SemiClassicalState, cfg: &RqiteConfig) -> Result<RqiteResult> {
    cfg.validate()?;
    let mut backend = make_backend(h, psi, cfg)?;
    scan_with(backend.as_mut(), cfg)
}

/// Evaluates `R̂(x) = D̂_β(H − x) − D̂_{2β}(H − x)` along the grid and stops
/// at the first point where `R̂ < Ξ` after the trace has risen above zero
/// and started to fall.
pub fn scan_with(backend: &mut dyn PartitionBackend, cfg: &RqiteConfig) -> Result<RqiteResult> {
    cfg.validate()?;
    let params = derive_parameters(cfg.gap, cfg.eps, cfg.gamma)?;
    let grid = scan_grid(cfg.ea, cfg.eb, cfg.eps);
    let (b1, b2) = (params.beta, 2.0 * params.beta);
    let tol = params.point_tolerance;
    backend.prepare(&grid, &[b1, b2], tol)?;

    let mut trace = Vec::with_capacity(grid.len());
    let mut running_max = f64::NEG_INFINITY;
    let mut max_order = 0;
    for (k, &x) in grid.iter().enumerate() {
        let wrap = |e| Error::Backend {
            x,
            source: Box::new(e),
        };
        let d1 = backend.estimate(x, b1, tol).map_err(wrap)?;
        let d2 = backend.estimate(x, b2, tol).map_err(wrap)?;
        max_order = max_order.max(d1.order).max(d2.order);
        let r = (d1.value - d2.value).re;
        trace.push(TracePoint {
            x,
            r,
            error_bound: d1.additive_error_bound + d2.additive_error_bound,
        });
        log::debug!("x = {x:.6}: R = {r:.6e}");
        if r < params.xi && running_max > 0.0 && r < running_max {
            let e_max = trace
                .iter()
                .fold(&trace[0], |best, p| if p.r > best.r { p } else { best })
                .x;
            return Ok(RqiteResult {
                e0_estimate: x,
                terminated_at: k,
                e_max,
                trace,
                params,
                backend: backend.kind(),
                max_order,
            });
        }
        running_max = running_max.max(r);
    }
    Err(Error::ScanExhausted {
        ea: cfg.ea,
        eb: cfg.eb,
    })
}
