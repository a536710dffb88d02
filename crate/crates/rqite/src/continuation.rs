//! Analytic continuation of `log D_β` past the cluster radius `β*`.
//!
//! The map `φ(z) = ln(1 − z/ν′)/ln(1 − 1/ν′)` sends `0 ↦ 0` and `1 ↦ 1`
//! and keeps `|Im βφ(z)| < wβ = β*/2` on its disk of analyticity. The
//! Taylor series of `f(z) = log⟨0ⁿ|e^{−βφ(z)H′}|0ⁿ⟩` is obtained by
//! composing the cluster log-series with `βφ`, then summed at `z = 1`.
//! The linear part `A_1 β` of the log-series is entire and is added
//! exactly rather than through the map.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::caps::Caps;
use crate::error::{invalid, Error, Result};
use crate::expansion::{log_amplitude_series, BackendKind, PartitionEstimate};
use crate::hamiltonian::{LocalHamiltonian, ProductState};
use crate::series::{series_compose, TruncatedSeries};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContinuationParams {
    pub nu: f64,
    pub nu_prime: f64,
    /// Strip half-width in units of β: `w = −π/(2 ln(1 − 1/ν′))`.
    pub w: f64,
    pub alpha: f64,
    pub beta: f64,
    pub beta_star: f64,
}

impl ContinuationParams {
    /// `ln(1 − 1/ν′)`, which equals `−πβ/β*` for the default choice.
    fn log_denominator(&self) -> f64 {
        (-1.0 / self.nu_prime).ln_1p()
    }
}

/// `w = β*/(2β)`, `ν′ = 1/(1 − e^{−πβ/β*})`, `ν = (1 + ν′)/2`.
pub fn select_continuation_params(beta: f64, beta_star: f64) -> Result<ContinuationParams> {
    select_with_nu(beta, beta_star, None)
}

/// Like [`select_continuation_params`] with an optional `ν ∈ (1, ν′)`
/// replacing the midpoint.
pub fn select_with_nu(beta: f64, beta_star: f64, nu: Option<f64>) -> Result<ContinuationParams> {
    if !(beta > 0.0 && beta_star > 0.0) || !beta.is_finite() {
        return invalid("continuation needs β > 0 and β* > 0");
    }
    let ratio = PI * beta / beta_star;
    let nu_prime = 1.0 / -(-ratio).exp_m1();
    let nu = match nu {
        Some(v) if v > 1.0 && v < nu_prime => v,
        Some(v) => return invalid(format!("ν = {v} must lie in (1, ν′ = {nu_prime})")),
        None => 0.5 * (1.0 + nu_prime),
    };
    Ok(ContinuationParams {
        nu,
        nu_prime,
        w: beta_star / (2.0 * beta),
        alpha: 1.0 / nu,
        beta,
        beta_star,
    })
}

/// `φ_l = −1/(l ν′^l ln(1 − 1/ν′))` for `1 ≤ l ≤ L`.
pub fn conformal_map_coeffs(params: &ContinuationParams, order: usize) -> Result<TruncatedSeries> {
    if order == 0 {
        return invalid("map order must be at least 1");
    }
    let den = params.log_denominator();
    let mut c = vec![Complex64::new(0.0, 0.0); order + 1];
    let mut pw = 1.0;
    for (l, cl) in c.iter_mut().enumerate().skip(1) {
        pw /= params.nu_prime;
        *cl = Complex64::new(-pw / (l as f64 * den), 0.0);
    }
    Ok(TruncatedSeries::new(c))
}

/// Closed form `φ(z)` on the principal branch.
pub fn conformal_map(params: &ContinuationParams, z: Complex64) -> Complex64 {
    (Complex64::new(1.0, 0.0) - z / params.nu_prime).ln() / params.log_denominator()
}

/// `max |Im βφ(z)|` over `points` equispaced points of `|z| = ν`.
pub fn strip_max_imag(params: &ContinuationParams, points: usize) -> f64 {
    (0..points)
        .map(|k| {
            let z = Complex64::from_polar(params.nu, 2.0 * PI * k as f64 / points as f64);
            (conformal_map(params, z) * params.beta).im.abs()
        })
        .fold(0.0, f64::max)
}

/// `max |Re βφ(z)|` over the circle `|z| = ν`.
fn max_real_part(params: &ContinuationParams, points: usize) -> f64 {
    (0..points)
        .map(|k| {
            let z = Complex64::from_polar(params.nu, 2.0 * PI * k as f64 / points as f64);
            (conformal_map(params, z) * params.beta).re.abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct ContinuationOptions {
    pub caps: Caps,
    /// Multiplier on `|S|` in the order formula.
    pub poly_s_multiplier: f64,
    /// Amplitude-floor term added to `F_max`; zero unless set by the user.
    pub poly_n: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            caps: Caps::default(),
            poly_s_multiplier: 1.0,
            poly_n: 0.0,
        }
    }
}

/// `F_max = max|Re βφ|·E_bound + |S| r/(1 − r) + poly_n` over `|z| ≤ ν`,
/// with `r = wβ/β*`.
pub fn f_max(params: &ContinuationParams, e_bound: f64, n_terms: usize, opts: &ContinuationOptions) -> f64 {
    let r = params.w * params.beta / params.beta_star;
    max_real_part(params, 360) * e_bound + n_terms as f64 * r / (1.0 - r) + opts.poly_n
}

/// `α^{M+1}/(1 − α) · F_max`.
pub fn remainder_bound(params: &ContinuationParams, order: usize, f_max: f64) -> f64 {
    params.alpha.powi(order as i32 + 1) / (1.0 - params.alpha) * f_max
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrderChoice {
    /// `⌈e^{2πβ/β*} ln((e^{2πβ/β*}/ε)(|βE| + c|S|))⌉` as a float, since it
    /// overflows integers quickly.
    pub formula_order: f64,
    /// Smallest `M` whose Taylor remainder is at most `ε`.
    pub remainder_order: f64,
    pub order: f64,
    /// `order` is within the configured cap.
    pub feasible: bool,
}

/// Order for target `ε`; `beta_e_bound` is `|β|·E_bound`.
pub fn continuation_order(
    params: &ContinuationParams,
    eps: f64,
    n_terms: usize,
    beta_e_bound: f64,
    opts: &ContinuationOptions,
) -> Result<OrderChoice> {
    if !(eps > 0.0) || n_terms == 0 || beta_e_bound < 0.0 {
        return invalid("continuation order needs ε > 0 and |S| ≥ 1");
    }
    let g = (2.0 * PI * params.beta / params.beta_star).exp();
    let inner = g / eps * (beta_e_bound + opts.poly_s_multiplier * n_terms as f64);
    let formula_order = (g * inner.ln().max(0.0)).ceil().max(1.0);
    let e_bound = beta_e_bound / params.beta;
    let fm = f_max(params, e_bound, n_terms, opts);
    // α^{M+1} ≤ ε(1 − α)/F_max.
    let need = (eps * (1.0 - params.alpha) / fm).ln() / params.alpha.ln() - 1.0;
    let remainder_order = need.ceil().max(1.0);
    let order = formula_order.max(remainder_order);
    Ok(OrderChoice {
        formula_order,
        remainder_order,
        order,
        feasible: order.is_finite() && order <= opts.caps.continuation_order as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZeroFreeCertificate {
    pub certified: bool,
    pub p0: f64,
    pub gap: f64,
    pub beta_re: f64,
    pub beta_im: f64,
    /// Real part of the rightmost zero `(±iπ + ln((1 − p_0)/p_0))/Δ`;
    /// `None` when `p_0 = 1` and there are no zeros.
    pub worst_zero_re: Option<f64>,
    pub worst_zero_im: f64,
}

/// Certifies `D_β ≠ 0` near the positive axis: true iff `p_0 ≥ 1/2` and
/// `Re β > 0`.
pub fn zero_free_certificate(p0: f64, gap: f64, beta: Complex64) -> Result<ZeroFreeCertificate> {
    if !(p0 > 0.0 && p0 <= 1.0) || !(gap > 0.0) {
        return invalid("certificate needs p_0 ∈ (0, 1] and Δ > 0");
    }
    let worst_zero_re = (p0 < 1.0).then(|| ((1.0 - p0) / p0).ln() / gap);
    Ok(ZeroFreeCertificate {
        certified: p0 >= 0.5 && beta.re > 0.0,
        p0,
        gap,
        beta_re: beta.re,
        beta_im: beta.im,
        worst_zero_re,
        worst_zero_im: PI / gap,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuedEstimate {
    pub log_value: Complex64,
    pub value: Complex64,
    /// Bound on `|log D − log D̂|`.
    pub remainder: f64,
    /// Bound on `|D − D̂|` implied by `remainder`.
    pub additive_error_bound: f64,
    pub order: usize,
    pub f_max: f64,
    pub params: ContinuationParams,
    pub caveat: Option<String>,
}

impl ContinuedEstimate {
    pub fn to_partition_estimate(&self) -> PartitionEstimate {
        PartitionEstimate {
            value: self.value,
            additive_error_bound: self.additive_error_bound,
            order: self.order,
            backend: BackendKind::Continuation,
            direct_pairs: 0,
        }
    }
}

/// Continued estimate of `log⟨0ⁿ|e^{−β(H′ − x)}|0ⁿ⟩` at `β = params.beta`.
pub fn continued_log_partition(
    h: &LocalHamiltonian,
    shift: f64,
    params: &ContinuationParams,
    order: usize,
    cert: &ZeroFreeCertificate,
    opts: &ContinuationOptions,
) -> Result<ContinuedEstimate> {
    if !cert.certified {
        return Err(Error::CertificateRefused(format!(
            "p_0 = {} and Re β = {} do not certify a zero-free region",
            cert.p0, cert.beta_re
        )));
    }
    if order == 0 {
        return invalid("continuation order must be at least 1");
    }
    if order > opts.caps.continuation_order {
        return Err(Error::CapExceeded {
            what: "continuation order",
            limit: opts.caps.continuation_order,
            actual: order,
        });
    }
    let beta = params.beta;
    let zero = ProductState::zeros(h.n_qubits());
    let a = log_amplitude_series(h, &zero, &zero, order, &opts.caps)?;
    let linear = a.coeff(1) * beta;
    let mut rest = a.coeffs().to_vec();
    rest[0] = Complex64::new(0.0, 0.0);
    rest[1] = Complex64::new(0.0, 0.0);
    let inner = conformal_map_coeffs(params, order)?.scale(Complex64::new(beta, 0.0));
    let composed = series_compose(&TruncatedSeries::new(rest), &inner)?;
    let at_one: Complex64 = composed.coeffs().iter().sum();
    let log_value = a.coeff(0) + linear + at_one + beta * shift;

    let fm = f_max(params, h.coeff_l1(), h.n_terms(), opts);
    let remainder = remainder_bound(params, order, fm);
    let value = log_value.exp();
    let caveat = (opts.poly_n == 0.0)
        .then(|| "F_max omits the amplitude-floor term; pass poly_n to include it".to_string());
    if caveat.is_some() {
        log::warn!("continuation remainder excludes the amplitude-floor term");
    }
    Ok(ContinuedEstimate {
        log_value,
        value,
        remainder,
        additive_error_bound: value.norm() * remainder.exp_m1(),
        order,
        f_max: fm,
        params: *params,
        caveat,
    })
}
