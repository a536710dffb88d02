//! Monte-Carlo partition-function estimates from simulated Hadamard tests.
//!
//! Evolution times are drawn from the Cauchy–Lorentz density
//! `β/(π(β² + t²))` truncated to `[−T, T]`. Each sample carries the
//! outcomes `(X, Y)` of the Hadamard test on `e^{−iHt}`, and
//! `Z̄(x) = (‖ĝ_T‖/S) Σ e^{i t x}(X + iY)` estimates
//! `⟨ψ|e^{−β|H − x|}|ψ⟩`, which equals `D_β(H − x)` for `x ≤ E_0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::caps::{check_cap, Caps};
use crate::error::{invalid, Result};
use crate::expansion::{BackendKind, PartitionEstimate};
use crate::hamiltonian::{LocalHamiltonian, SemiClassicalState};
use crate::oracle::{spectrum, SpectralData};

/// Samples per independent PRNG stream; fixed so results do not depend on
/// the worker count.
const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMode {
    /// Outcomes are the exact means `(Re L, Im L)`.
    Expectation,
    /// Outcomes are single-shot `±1` measurements.
    Bernoulli,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct McSampleSet {
    pub samples: Vec<McSample>,
    /// `‖ĝ_T‖ = (2/π) arctan(T/β)`.
    pub norm: f64,
    pub t_max: f64,
    pub beta: f64,
    pub mode: McMode,
    /// Number of grid points the union bound covers.
    pub m_points: usize,
    /// Failure probability of the union bound.
    pub mu: f64,
}

/// Mass of the Cauchy density of scale `β` inside `[−T, T]`.
pub fn cauchy_norm(beta: f64, t_max: f64) -> f64 {
    2.0 / PI * (t_max / beta).atan()
}

/// `T = β tan(π(1 − ε_t)/2)`, so the excluded Cauchy mass is exactly `ε_t`.
pub fn truncation_time(beta: f64, eps_t: f64) -> Result<f64> {
    if !(beta > 0.0) || !(eps_t > 0.0 && eps_t < 1.0) {
        return invalid("truncation time needs β > 0 and ε_t ∈ (0, 1)");
    }
    Ok(beta * (PI * (1.0 - eps_t) / 2.0).tan())
}

/// Inverse-CDF draws `t = β tan((2u − 1) arctan(T/β))`.
pub fn sample_times(beta: f64, t_max: f64, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = (t_max / beta).atan();
    (0..count)
        .map(|_| {
            let u: f64 = rng.gen();
            (beta * ((2.0 * u - 1.0) * a).tan()).clamp(-t_max, t_max)
        })
        .collect()
}

/// `S = ⌈‖ĝ_T‖² ln(4M/μ) / ε′²⌉`.
pub fn sample_count(norm: f64, eps: f64, m_points: usize, mu: f64) -> Result<usize> {
    if !(norm > 0.0 && eps > 0.0 && mu > 0.0 && mu < 1.0) || m_points == 0 {
        return invalid("sample count needs positive inputs and μ ∈ (0, 1)");
    }
    let s = (norm * norm * (4.0 * m_points as f64 / mu).ln() / (eps * eps)).ceil();
    if !s.is_finite() || s > usize::MAX as f64 {
        return invalid("sample count overflows");
    }
    Ok(s as usize)
}

/// Hadamard-test simulator backed by the exact Loschmidt amplitude
/// `L(t) = ⟨ψ|e^{−iHt}|ψ⟩`.
#[derive(Clone, Debug)]
pub struct HadamardSimulator {
    spec: SpectralData,
}

impl HadamardSimulator {
    pub fn new(h: &LocalHamiltonian, psi: &SemiClassicalState, caps: &Caps) -> Result<Self> {
        Ok(HadamardSimulator {
            spec: spectrum(h, psi, caps)?,
        })
    }

    pub fn from_spectrum(spec: SpectralData) -> Self {
        HadamardSimulator { spec }
    }

    pub fn spectrum(&self) -> &SpectralData {
        &self.spec
    }

    /// Outcome pair for the `W = I` and `W = S†` circuits at time `t`.
    pub fn simulate(&self, t: f64, mode: McMode, rng: &mut impl Rng) -> (f64, f64) {
        let l = self.spec.loschmidt(t);
        match mode {
            McMode::Expectation => (l.re, l.im),
            McMode::Bernoulli => (shot(l.re, rng), shot(l.im, rng)),
        }
    }
}

/// `±1` with mean `m`.
fn shot(m: f64, rng: &mut impl Rng) -> f64 {
    let p = ((1.0 + m) / 2.0).clamp(0.0, 1.0);
    if rng.gen_bool(p) {
        1.0
    } else {
        -1.0
    }
}

pub fn simulate_hadamard(
    h: &LocalHamiltonian,
    psi: &SemiClassicalState,
    t: f64,
    mode: McMode,
    seed: u64,
    caps: &Caps,
) -> Result<(f64, f64)> {
    let sim = HadamardSimulator::new(h, psi, caps)?;
    Ok(sim.simulate(t, mode, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Parameters of one shared sample set.
#[derive(Clone, Copy, Debug)]
pub struct SampleSpec {
    pub beta: f64,
    pub t_max: f64,
    pub count: usize,
    pub mode: McMode,
    pub m_points: usize,
    pub mu: f64,
    pub seed: u64,
}

impl McSampleSet {
    /// Draws `count` times and simulates their outcomes. Shot noise for
    /// chunk `c` comes from stream `c + 1` of the seed, so the set is the
    /// same for any `workers`.
    pub fn generate(sim: &HadamardSimulator, spec: &SampleSpec, workers: usize, caps: &Caps) -> Result<Self> {
        if spec.count == 0 {
            return invalid("sample set must be nonempty");
        }
        check_cap("sample", caps.samples, spec.count)?;
        let times = sample_times(spec.beta, spec.t_max, spec.count, spec.seed);
        let chunks: Vec<&[f64]> = times.chunks(CHUNK).collect();
        let run = |c: usize, ts: &[f64]| -> Vec<McSample> {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(c as u64 + 1);
            ts.iter()
                .map(|&t| {
                    let (x, y) = sim.simulate(t, spec.mode, &mut rng);
                    McSample { t, x, y }
                })
                .collect()
        };
        let workers = workers.clamp(1, chunks.len());
        let mut parts: Vec<Vec<McSample>> = vec![Vec::new(); chunks.len()];
        if workers == 1 {
            for (c, ts) in chunks.iter().enumerate() {
                parts[c] = run(c, ts);
            }
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = (0..workers)
                    .map(|w| {
                        let chunks = &chunks;
                        let run = &run;
                        s.spawn(move || {
                            (w..chunks.len())
                                .step_by(workers)
                                .map(|c| (c, run(c, chunks[c])))
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect();
                for h in handles {
                    for (c, v) in h.join().expect("sampling worker panicked") {
                        parts[c] = v;
                    }
                }
            });
        }
        Ok(McSampleSet {
            samples: parts.concat(),
            norm: cauchy_norm(spec.beta, spec.t_max),
            t_max: spec.t_max,
            beta: spec.beta,
            mode: spec.mode,
            m_points: spec.m_points,
            mu: spec.mu,
        })
    }

    /// Builds a set from explicit samples.
    pub fn from_samples(samples: Vec<McSample>, beta: f64, t_max: f64, mode: McMode, m_points: usize, mu: f64) -> Self {
        McSampleSet {
            samples,
            norm: cauchy_norm(beta, t_max),
            t_max,
            beta,
            mode,
            m_points,
            mu,
        }
    }

    /// `ε′ = ‖ĝ_T‖ sqrt(ln(4M/μ)/S)`, the inverse of [`sample_count`].
    pub fn statistical_error(&self) -> f64 {
        self.norm * ((4.0 * self.m_points as f64 / self.mu).ln() / self.samples.len() as f64).sqrt()
    }

    /// Excluded Cauchy mass `1 − ‖ĝ_T‖`.
    pub fn tail_error(&self) -> f64 {
        1.0 - self.norm
    }
}

pub fn estimate_z(set: &McSampleSet, x: f64) -> Result<PartitionEstimate> {
    if set.samples.is_empty() {
        return invalid("sample set must be nonempty");
    }
    let sum: Complex64 = set
        .samples
        .iter()
        .map(|s| Complex64::new(0.0, s.t * x).exp() * Complex64::new(s.x, s.y))
        .sum();
    Ok(PartitionEstimate {
        value: sum * (set.norm / set.samples.len() as f64),
        additive_error_bound: set.statistical_error() + set.tail_error(),
        order: set.samples.len(),
        backend: BackendKind::HadamardMc,
        direct_pairs: 0,
    })
}
