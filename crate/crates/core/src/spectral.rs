//! κ, φ and the spectral ratio λ that sets the width of the Markov-chain
//! Hoeffding bound, plus the cheap retention-probability lower estimate λ̲.

use std::fmt;
use std::str::FromStr;

use crate::data::{AssumptionKind, AssumptionParams};
use crate::error::{Error, Result};
use crate::window::{exit_prob, incoming_prob, next_state_coeffs, StationaryMixture, WindowKind};

/// λ is clamped to at most this value so that `1 − λ > 0`.
pub const LAMBDA_CEILING: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaMethod {
    /// λ from the inner-product ratio for `h(x) = x − μ̄`.
    #[default]
    Full,
    /// π-weighted probability that the state is retained (nothing leaves,
    /// nothing arrives).
    Degenerate,
    /// Unweighted `Σ_{n=0}^{N} (1 − n/N)(1 − p)` with `N = m·w`. Debug only;
    /// can exceed 1 before clamping.
    PaperDegenerate,
}

impl fmt::Display for LambdaMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LambdaMethod::Full => "full",
            LambdaMethod::Degenerate => "degenerate",
            LambdaMethod::PaperDegenerate => "paper-degenerate",
        })
    }
}

impl FromStr for LambdaMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "degenerate" => Ok(Self::Degenerate),
            "paper-degenerate" => Ok(Self::PaperDegenerate),
            other => Err(Error::Config(format!("unknown lambda method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralQuantities {
    /// Coefficient of `x` in `E[W_{i+1} | W_i = x]`. NaN unless the full
    /// method ran.
    pub kappa: f64,
    /// Coefficient of `μ` in the same expectation. NaN unless the full method
    /// ran.
    pub phi: f64,
    /// λ in `[0, LAMBDA_CEILING]`.
    pub lambda: f64,
    /// λ before clamping (NaN for a degenerate chain).
    pub lambda_raw: f64,
    pub lambda_lower: f64,
    /// `(1 + λ) / (1 − λ)`.
    pub alpha: f64,
    pub method: LambdaMethod,
    pub clamped: bool,
    /// Zero stationary variance; bounds must fall back to the real bound.
    pub degenerate: bool,
}

pub fn alpha(lambda: f64) -> f64 {
    (1.0 + lambda) / (1.0 - lambda)
}

impl SpectralQuantities {
    pub fn compute(
        kind: WindowKind,
        params: &AssumptionParams,
        mixture: &StationaryMixture,
        w: usize,
        method: LambdaMethod,
    ) -> Self {
        let lambda_lower = degenerate_lambda(params, mixture, w);
        let (kappa, phi, raw, degenerate) = match method {
            LambdaMethod::Full => {
                let (kappa, phi) = kappa_phi(kind, params, mixture, w);
                match spectral_lambda(mixture, kappa, phi) {
                    Ok(raw) => (kappa, phi, raw, false),
                    Err(_) => (kappa, phi, f64::NAN, true),
                }
            }
            LambdaMethod::Degenerate => (f64::NAN, f64::NAN, lambda_lower, false),
            LambdaMethod::PaperDegenerate => {
                (f64::NAN, f64::NAN, paper_degenerate_lambda(params, w), false)
            }
        };
        let (lambda, clamped) = if degenerate {
            (LAMBDA_CEILING, true)
        } else {
            clamp_lambda(raw)
        };
        Self {
            kappa,
            phi,
            lambda,
            lambda_raw: raw,
            lambda_lower,
            alpha: alpha(lambda),
            method,
            clamped,
            degenerate,
        }
    }

    /// Same quantities with λ replaced; used to probe width monotonicity.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        let (lambda, clamped) = clamp_lambda(lambda);
        Self { lambda, lambda_raw: lambda, clamped, alpha: alpha(lambda), ..*self }
    }
}

fn clamp_lambda(raw: f64) -> (f64, bool) {
    let clamped = raw.clamp(0.0, LAMBDA_CEILING);
    (clamped, clamped != raw)
}

/// κ and φ from explicit situation laws.
///
/// `weights[n]` is the stationary probability of `S(W) = n`; `leaving(n)` is
/// the largest number of records that can leave a window holding `n`;
/// `incoming[b]` is `P(b records arrive)`; `exit(n, a)` is
/// `P(a leave | S(W) = n)`. The sum over arrivals is folded first so memory
/// stays O(1) per (n, a).
pub fn kappa_phi_with<L, E>(
    kind: WindowKind,
    weights: &[f64],
    leaving: L,
    incoming: &[f64],
    exit: E,
) -> (f64, f64)
where
    L: Fn(usize) -> usize,
    E: Fn(usize, usize) -> f64,
{
    let mut kappa = 0.0;
    let mut phi = 0.0;
    for (n, &a_n) in weights.iter().enumerate() {
        if a_n == 0.0 {
            continue;
        }
        let (mut kx_n, mut kmu_n) = (0.0, 0.0);
        for a in 0..=leaving(n).min(n) {
            let pa = exit(n, a);
            if pa == 0.0 {
                continue;
            }
            let (mut kx_a, mut kmu_a) = (0.0, 0.0);
            for (b, &pb) in incoming.iter().enumerate() {
                let (kx, kmu) = next_state_coeffs(kind, n, a, b);
                kx_a += pb * kx;
                kmu_a += pb * kmu;
            }
            kx_n += pa * kx_a;
            kmu_n += pa * kmu_a;
        }
        kappa += a_n * kx_n;
        phi += a_n * kmu_n;
    }
    (kappa, phi)
}

fn incoming_law(params: &AssumptionParams) -> Vec<f64> {
    let top = match params.kind {
        AssumptionKind::Poisson => params.m.max(1),
        _ => 1,
    };
    (0..=top).map(|b| incoming_prob(params, b)).collect()
}

pub fn kappa_phi(
    kind: WindowKind,
    params: &AssumptionParams,
    mixture: &StationaryMixture,
    w: usize,
) -> (f64, f64) {
    let incoming = incoming_law(params);
    let leaving = |n: usize| match params.kind {
        AssumptionKind::Poisson => n,
        _ => 1,
    };
    kappa_phi_with(kind, &mixture.weights, leaving, &incoming, |n, a| {
        exit_prob(params, n, a, w).expect("a <= n by construction")
    })
}

/// λ = ‖∫h(y)P(·,dy)‖_π / ‖h‖_π for `h(x) = x − μ̄`, unclamped.
///
/// The numerator is evaluated as `Σ aₙ(κ²cₙσ² + (κbₙ − (b̄ − φ))²μ²)`, which is
/// the same quantity without dividing by κ.
pub fn spectral_lambda(mixture: &StationaryMixture, kappa: f64, phi: f64) -> Result<f64> {
    let b_bar = mixture.b_bar();
    let var = mixture.sigma * mixture.sigma;
    let mu2 = mixture.mu * mixture.mu;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut scale = 0.0;
    for n in 0..mixture.len() {
        let a = mixture.weights[n];
        let b = mixture.scale_means[n];
        let c = mixture.scale_vars[n];
        let shifted = kappa * b - (b_bar - phi);
        num += a * (kappa * kappa * c * var + shifted * shifted * mu2);
        den += a * (c * var + (b - b_bar) * (b - b_bar) * mu2);
        scale += a * (c * var + b * b * mu2);
    }
    if den.is_nan() || den <= 1e-14 * scale || den <= 0.0 {
        return Err(Error::DegenerateChain);
    }
    Ok((num / den).sqrt())
}

/// π-weighted probability that a slide leaves the window unchanged.
pub fn degenerate_lambda(params: &AssumptionParams, mixture: &StationaryMixture, w: usize) -> f64 {
    if params.kind == AssumptionKind::Always {
        return 0.0;
    }
    let stay_in = incoming_prob(params, 0);
    let retained: f64 = mixture
        .weights
        .iter()
        .enumerate()
        .map(|(n, a)| a * exit_prob(params, n, 0, w).expect("a = 0"))
        .sum();
    (retained * stay_in).clamp(0.0, 1.0)
}

/// The unweighted retention sum, kept only for comparison runs.
pub fn paper_degenerate_lambda(params: &AssumptionParams, w: usize) -> f64 {
    let top = crate::window::max_count(params, w) as f64;
    (0..=top as usize)
        .map(|n| (1.0 - n as f64 / top) * (1.0 - params.p))
        .sum()
}
