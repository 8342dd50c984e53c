//! Window chain model: the Gaussian-mixture stationary law of a sum/avg
//! sliding window and the discrete situation probabilities of one slide.

use std::fmt;
use std::str::FromStr;

use statrs::function::factorial::ln_factorial;

use crate::data::{AssumptionKind, AssumptionParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WindowKind {
    /// Sum of all record values in the window.
    Sum,
    /// Mean of all record values in the window.
    Avg,
}

impl WindowKind {
    pub const ALL: [WindowKind; 2] = [WindowKind::Sum, WindowKind::Avg];

    pub fn as_str(self) -> &'static str {
        match self {
            WindowKind::Sum => "sum",
            WindowKind::Avg => "avg",
        }
    }
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(WindowKind::Sum),
            "avg" => Ok(WindowKind::Avg),
            other => Err(Error::Config(format!("unknown window `{other}`"))),
        }
    }
}

/// `π = Σ aₙ N(bₙ μ, cₙ σ²)` over window record counts `n = 0..=m·w`.
/// Component 0 is the point mass at 0 (empty window).
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryMixture {
    pub kind: WindowKind,
    pub weights: Vec<f64>,
    pub scale_means: Vec<f64>,
    pub scale_vars: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
    pub w: usize,
    pub m: usize,
}

impl StationaryMixture {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `b̄ = Σ aₙ bₙ`.
    pub fn b_bar(&self) -> f64 {
        self.weights.iter().zip(&self.scale_means).map(|(a, b)| a * b).sum()
    }

    /// Stationary mean `b̄ μ`.
    pub fn mean(&self) -> f64 {
        self.b_bar() * self.mu
    }

    /// Probability of a non-empty window.
    pub fn nonempty_mass(&self) -> f64 {
        self.weights.iter().skip(1).sum()
    }

    pub fn component_mean(&self, n: usize) -> f64 {
        self.scale_means[n] * self.mu
    }

    pub fn component_sd(&self, n: usize) -> f64 {
        self.scale_vars[n].sqrt() * self.sigma
    }

    /// Probability that a draw conditioned on a non-empty window lies in
    /// `[lo, hi)`.
    pub fn nonempty_mass_between(&self, lo: f64, hi: f64) -> f64 {
        let total = self.nonempty_mass();
        if total <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for n in 1..self.len() {
            let (mean, sd) = (self.component_mean(n), self.component_sd(n));
            let inside = if sd > 0.0 {
                normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd)
            } else if mean >= lo && mean < hi {
                1.0
            } else {
                0.0
            };
            acc += self.weights[n] * inside;
        }
        acc / total
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

fn ln_binomial_pmf(trials: usize, k: usize, p: f64) -> f64 {
    if p <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p >= 1.0 {
        return if k == trials { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_factorial(trials as u64) - ln_factorial(k as u64) - ln_factorial((trials - k) as u64)
        + k as f64 * p.ln()
        + (trials - k) as f64 * (1.0 - p).ln()
}

fn ln_poisson_pmf(k: usize, rate: f64) -> f64 {
    if rate <= 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * rate.ln() - rate - ln_factorial(k as u64)
}

/// Largest window record count `m·w` (`w` for Binomial/Always).
pub fn max_count(params: &AssumptionParams, w: usize) -> usize {
    match params.kind {
        AssumptionKind::Poisson => params.m.max(1) * w,
        _ => w,
    }
}

/// Stationary law of the window record count `S(W)`, indices `0..=m·w`.
pub fn count_distribution(params: &AssumptionParams, w: usize) -> Vec<f64> {
    let top = max_count(params, w);
    match params.kind {
        AssumptionKind::Always => {
            let mut a = vec![0.0; top + 1];
            a[w] = 1.0;
            a
        }
        AssumptionKind::Binomial => {
            let p = params.p.clamp(0.0, 1.0);
            (0..=top).map(|n| ln_binomial_pmf(w, n, p).exp()).collect()
        }
        AssumptionKind::Poisson => {
            let rate = w as f64 * params.p.max(0.0);
            let raw: Vec<f64> = (0..=top).map(|n| ln_poisson_pmf(n, rate).exp()).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|a| a / total).collect()
        }
    }
}

pub fn stationary_mixture(kind: WindowKind, params: &AssumptionParams, w: usize) -> StationaryMixture {
    let weights = count_distribution(params, w);
    let (scale_means, scale_vars) = (0..weights.len())
        .map(|n| match (kind, n) {
            (_, 0) => (0.0, 0.0),
            (WindowKind::Sum, n) => (n as f64, n as f64),
            (WindowKind::Avg, n) => (1.0, 1.0 / n as f64),
        })
        .unzip();
    StationaryMixture {
        kind,
        weights,
        scale_means,
        scale_vars,
        mu: params.mu,
        sigma: params.sigma,
        w,
        m: params.m,
    }
}

/// `P(a records leave | S(W) = n)` when the window slides by one bucket.
pub fn exit_prob(params: &AssumptionParams, n: usize, a: usize, w: usize) -> Result<f64> {
    if a > n {
        return Err(Error::Domain(format!("{a} records cannot leave a window holding {n}")));
    }
    if w == 0 {
        return Err(Error::Domain("period must be at least 1".into()));
    }
    Ok(match params.kind {
        AssumptionKind::Always | AssumptionKind::Binomial => {
            let share = (n as f64 / w as f64).min(1.0);
            match a {
                0 => 1.0 - share,
                1 => share,
                _ => 0.0,
            }
        }
        AssumptionKind::Poisson => {
            if w == 1 {
                // The departing bucket is the whole window.
                return Ok(if a == n { 1.0 } else { 0.0 });
            }
            let wf = w as f64;
            let ln = ln_factorial(n as u64)
                - ln_factorial(a as u64)
                - ln_factorial((n - a) as u64)
                + (n - a) as f64 * (wf - 1.0).ln()
                - n as f64 * wf.ln();
            ln.exp()
        }
    })
}

/// `P(b records arrive)` in the incoming bucket. For Poisson, the tail mass
/// beyond `m` is folded into `b = m`.
pub fn incoming_prob(params: &AssumptionParams, b: usize) -> f64 {
    match params.kind {
        AssumptionKind::Always | AssumptionKind::Binomial => {
            let p = params.p.clamp(0.0, 1.0);
            match b {
                0 => 1.0 - p,
                1 => p,
                _ => 0.0,
            }
        }
        AssumptionKind::Poisson => {
            let m = params.m.max(1);
            let rate = params.p.max(0.0);
            match b.cmp(&m) {
                std::cmp::Ordering::Less => ln_poisson_pmf(b, rate).exp(),
                std::cmp::Ordering::Equal => {
                    let below: f64 = (0..m).map(|k| ln_poisson_pmf(k, rate).exp()).sum();
                    (1.0 - below).max(0.0)
                }
                std::cmp::Ordering::Greater => 0.0,
            }
        }
    }
}

/// Coefficients `(k_x, k_μ)` with
/// `E[W_{i+1} | W_i = x, S(W_i) = n, a leaving, b arriving] = k_x·x + k_μ·μ`.
pub fn next_state_coeffs(kind: WindowKind, n: usize, a: usize, b: usize) -> (f64, f64) {
    match kind {
        WindowKind::Sum => {
            let kx = if n == 0 { 1.0 } else { (n - a) as f64 / n as f64 };
            (kx, b as f64)
        }
        WindowKind::Avg => {
            let d = n - a + b;
            if d == 0 {
                // Nothing left and nothing arrives: the state is retained.
                (1.0, 0.0)
            } else {
                ((n - a) as f64 / d as f64, b as f64 / d as f64)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(kind: AssumptionKind, p: f64, m: usize) -> AssumptionParams {
        AssumptionParams { kind, mu: 10.0, sigma: 1.0, p, m, ell: 100, c_min: 7.0, c_max: 13.0 }
    }

    #[test]
    fn binomial_counts() {
        let a = count_distribution(&params(AssumptionKind::Binomial, 0.5, 1), 2);
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip([0.25, 0.5, 0.25]) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn always_counts_are_point_mass() {
        let a = count_distribution(&params(AssumptionKind::Always, 1.0, 1), 5);
        assert_eq!(a, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let mix = stationary_mixture(WindowKind::Avg, &params(AssumptionKind::Always, 1.0, 1), 5);
        assert_eq!(mix.weights[5], 1.0);
        assert_eq!(mix.component_mean(5), 10.0);
        assert!((mix.component_sd(5) - (1.0f64 / 5.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn poisson_counts_truncated_and_renormalized() {
        let a = count_distribution(&params(AssumptionKind::Poisson, 0.5, 3), 2);
        assert_eq!(a.len(), 7);
        // Poisson(1) pmf at 0..=6 by direct evaluation, then renormalized.
        let mut fact = 1.0;
        let raw: Vec<f64> = (0..7)
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                (-1.0f64).exp() / fact
            })
            .collect();
        let total: f64 = raw.iter().sum();
        for (x, r) in a.iter().zip(&raw) {
            assert!((x - r / total).abs() < 1e-14);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_poisson_counts_do_not_overflow() {
        let a = count_distribution(&params(AssumptionKind::Poisson, 4.0, 10), 60);
        assert_eq!(a.len(), 601);
        assert!(a.iter().all(|x| x.is_finite() && *x >= 0.0));
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn avg_mixture_construction() {
        let mix = stationary_mixture(WindowKind::Avg, &params(AssumptionKind::Binomial, 0.5, 1), 2);
        assert_eq!(mix.scale_means, vec![0.0, 1.0, 1.0]);
        assert_eq!(mix.scale_vars, vec![0.0, 1.0, 0.5]);
        let sum = stationary_mixture(WindowKind::Sum, &params(AssumptionKind::Binomial, 0.3, 1), 10);
        assert_eq!(sum.len(), 11);
        assert_eq!(sum.scale_means[7], 7.0);
        assert_eq!(sum.scale_vars[7], 7.0);
        assert!((sum.b_bar() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn exit_probabilities() {
        let bin = params(AssumptionKind::Binomial, 0.3, 1);
        assert_eq!(exit_prob(&bin, 2, 1, 4).unwrap(), 0.5);
        assert_eq!(exit_prob(&bin, 0, 0, 4).unwrap(), 1.0);
        let poi = params(AssumptionKind::Poisson, 0.3, 3);
        assert!((exit_prob(&poi, 1, 0, 2).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(exit_prob(&poi, 0, 0, 2).unwrap(), 1.0);
        assert!(matches!(exit_prob(&poi, 1, 2, 2), Err(Error::Domain(_))));
        assert_eq!(exit_prob(&poi, 3, 3, 1).unwrap(), 1.0);
        assert_eq!(exit_prob(&poi, 3, 1, 1).unwrap(), 0.0);
    }

    #[test]
    fn incoming_probabilities() {
        assert_eq!(incoming_prob(&params(AssumptionKind::Binomial, 0.3, 1), 1), 0.3);
        assert_eq!(incoming_prob(&params(AssumptionKind::Poisson, 0.0, 3), 2), 0.0);
        let e1 = incoming_prob(&params(AssumptionKind::Poisson, 1.0, 3), 0);
        assert!((e1 - 0.367_879_441_171_442_3).abs() < 1e-15);
        let poi = params(AssumptionKind::Poisson, 1.3, 4);
        let total: f64 = (0..=4).map(|b| incoming_prob(&poi, b)).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn next_state_coefficients() {
        for n in 1..6 {
            assert_eq!(
                next_state_coeffs(WindowKind::Sum, n, 1, 1),
                ((n - 1) as f64 / n as f64, 1.0)
            );
        }
        assert_eq!(next_state_coeffs(WindowKind::Avg, 2, 2, 0), (1.0, 0.0));
        assert_eq!(next_state_coeffs(WindowKind::Avg, 3, 1, 2), (0.5, 0.5));
        assert_eq!(next_state_coeffs(WindowKind::Sum, 0, 0, 2), (1.0, 2.0));
    }

    proptest! {
        #[test]
        fn situation_probabilities_sum_to_one(
            poisson in any::<bool>(),
            p in 0.0f64..3.0,
            m in 1usize..6,
            w in 1usize..15,
            n_frac in 0.0f64..1.0,
        ) {
            let pr = if poisson {
                params(AssumptionKind::Poisson, p, m)
            } else {
                params(AssumptionKind::Binomial, p.min(1.0), 1)
            };
            let top = max_count(&pr, w);
            let n = ((top as f64) * n_frac).floor() as usize;
            let mut total = 0.0;
            for a in 0..=n {
                let e = exit_prob(&pr, n, a, w).unwrap();
                for b in 0..=pr.m {
                    total += e * incoming_prob(&pr, b);
                }
            }
            prop_assert!((total - 1.0).abs() < 1e-10, "total {}", total);
            let a = count_distribution(&pr, w);
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(a.iter().all(|&x| x >= 0.0));
        }
    }
}
