//! Small-ball probabilities of exponential sums and related functionals.

mod bessel;
pub mod quad;

pub use bessel::bessel_k1;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outage::par_count;
use crate::rng::{SeedSpec, TrialRng};

/// Samples used when an exact evaluation fails.
pub const FALLBACK_SAMPLES: u64 = 10_000_000;
const FALLBACK_SEED: SeedSpec = SeedSpec {
    master_seed: 0x05ee_d0f1_e33a,
    stream_id: 0,
    trial_index: 0,
};

const QUAD_ABS_TOL: f64 = 1e-12;
const QUAD_REL_TOL: f64 = 1e-8;
const EQUAL_MEAN_TOL: f64 = 1e-9;

/// Means of independent exponential variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ExpMeanVector(Vec<f64>);

impl ExpMeanVector {
    pub fn new(means: Vec<f64>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::Domain("at least one mean is required".into()));
        }
        if let Some(m) = means.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::Domain(format!("means must be positive, got {m}")));
        }
        Ok(Self(means))
    }

    pub fn means(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl TryFrom<Vec<f64>> for ExpMeanVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ExpMeanVector> for Vec<f64> {
    fn from(v: ExpMeanVector) -> Self {
        v.0
    }
}

/// An exact (or Monte Carlo fallback) probability next to its small-ball asymptote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheckReport {
    pub exact_or_mc: f64,
    pub asymptotic: f64,
    pub ratio: f64,
    /// Present only when the value is a Monte Carlo estimate.
    pub mc_std_err: Option<f64>,
}

impl LemmaCheckReport {
    fn exact(p: f64, asymptotic: f64) -> Self {
        Self {
            exact_or_mc: p,
            asymptotic,
            ratio: p / asymptotic,
            mc_std_err: None,
        }
    }

    fn monte_carlo(hits: u64, n: u64, asymptotic: f64) -> Self {
        let p = hits as f64 / n as f64;
        Self {
            exact_or_mc: p,
            asymptotic,
            ratio: p / asymptotic,
            mc_std_err: Some((p * (1.0 - p) / n as f64).sqrt()),
        }
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Regularized lower incomplete gamma `P(n, x)` for integer `n`: the Erlang CDF.
fn erlang_cdf(n: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    if x < nf + 1.0 {
        // e^{-x} x^n/n! * sum_k x^k / ((n+1)...(n+k))
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..1000 {
            term *= x / (nf + k as f64);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        (nf * x.ln() - x - ln_factorial(n)).exp() * sum
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..n {
            term *= x / k as f64;
            sum += term;
        }
        1.0 - (-x).exp() * sum
    }
}

/// Hypoexponential CDF by the closed-form partial-fraction expansion.
fn hypoexp_closed_form(rates: &[f64], t: f64) -> f64 {
    let tail: f64 = rates
        .iter()
        .enumerate()
        .map(|(i, &li)| {
            let coef: f64 = rates
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &lj)| lj / (lj - li))
                .product();
            coef * (-li * t).exp()
        })
        .sum();
    1.0 - tail
}

/// Hypoexponential CDF by uniformization; every term is non-negative.
fn hypoexp_uniformized(rates: &[f64], t: f64) -> f64 {
    let n = rates.len();
    let lam = rates.iter().cloned().fold(0.0, f64::max);
    let lt = lam * t;
    let stay: Vec<f64> = rates.iter().map(|r| 1.0 - r / lam).collect();
    // phase occupation of the embedded chain; last slot is absorbed mass
    let mut dist = vec![0.0; n + 1];
    dist[0] = 1.0;
    let k_max = (lt + 12.0 * lt.sqrt() + 60.0).ceil() as usize + n;
    let ln_lt = lt.ln();
    let mut total = 0.0;
    for k in 0..=k_max {
        if k >= n {
            let w = (k as f64 * ln_lt - lt - ln_factorial(k)).exp();
            total += w * dist[n];
        }
        for i in (0..n).rev() {
            let moved = dist[i] * (1.0 - stay[i]);
            dist[i + 1] += moved;
            dist[i] -= moved;
        }
    }
    total.min(1.0)
}

/// `P{x_1 + ... + x_n < t}` for independent exponentials with the given rates.
pub fn hypoexp_cdf(rates: &[f64], t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let hi = rates.iter().cloned().fold(0.0, f64::max);
    let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    if (hi - lo) / hi < EQUAL_MEAN_TOL {
        return erlang_cdf(rates.len(), hi * t);
    }
    let separated = rates.iter().enumerate().all(|(i, a)| {
        rates[i + 1..]
            .iter()
            .all(|b| (a - b).abs() >= 1e-3 * a.max(*b))
    });
    if separated && hi * t >= 0.05 {
        hypoexp_closed_form(rates, t)
    } else {
        hypoexp_uniformized(rates, t)
    }
}

/// `P{sum x_i < t}` for independent exponentials with the given means, and
/// its small-ball asymptote `t^n / (n! prod mu_i)`.
pub fn exp_sum_small_ball(means: &ExpMeanVector, t: f64) -> Result<LemmaCheckReport> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let rates: Vec<f64> = means.means().iter().map(|m| 1.0 / m).collect();
    let n = rates.len();
    let ln_asym = n as f64 * t.ln() - ln_factorial(n) - means.means().iter().map(|m| m.ln()).sum::<f64>();
    Ok(LemmaCheckReport::exact(hypoexp_cdf(&rates, t), ln_asym.exp()))
}

/// `P{u + v > tau}` for independent exponentials with means `mu_u`, `mu_v`.
pub fn exp_sum_tail(mu_u: f64, mu_v: f64, tau: f64) -> Result<f64> {
    if !(mu_u > 0.0 && mu_v > 0.0) {
        return Err(Error::Domain("means must be positive".into()));
    }
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::Domain(format!("tau must be non-negative, got {tau}")));
    }
    if (mu_u - mu_v).abs() / mu_u.max(mu_v) < EQUAL_MEAN_TOL {
        let mu = 0.5 * (mu_u + mu_v);
        return Ok((1.0 + tau / mu) * (-tau / mu).exp());
    }
    Ok((mu_u * (-tau / mu_u).exp() - mu_v * (-tau / mu_v).exp()) / (mu_u - mu_v))
}

fn check_means(ms: &[f64]) -> Result<()> {
    if ms.iter().all(|m| *m > 0.0 && m.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain("means must be positive".into()))
    }
}

/// `P{v w / (v + w + delta) < h}`. The event fails only when both `v > h`
/// and `w > h` with `(v-h)(w-h) > h(h+delta)`, which by memorylessness and
/// the integral identity for `K1` gives `1 - e^{-(a+b)h} z K1(z)` with
/// `z = 2 sqrt(a b h (h+delta))` and rates `a`, `b`.
fn harmonic_cdf(mu_v: f64, mu_w: f64, delta: f64, h: f64) -> f64 {
    if h <= 0.0 {
        return 0.0;
    }
    let (a, b) = (1.0 / mu_v, 1.0 / mu_w);
    let s = (a + b) * h;
    let z = 2.0 * (a * b * h * (h + delta)).sqrt();
    // 1 - e^{-s}(1 - d) = (1 - e^{-s}) + e^{-s} d
    -(-s).exp_m1() + (-s).exp() * bessel::one_minus_x_k1(z)
}

fn harmonic_mc(mu_v: f64, mu_w: f64, delta: f64, h: f64, n: u64, seed: SeedSpec) -> u64 {
    par_count(n, 1, |i, acc| {
        let mut r = TrialRng::new(seed.with_trial(seed.trial_index + i));
        let v = mu_v * r.exp1();
        let w = mu_w * r.exp1();
        if v * w / (v + w + delta) < h {
            acc[0] += 1;
        }
    })[0]
}

fn lemma_a3_mc(mu: [f64; 3], eps: f64, g: f64, n: u64, seed: SeedSpec) -> u64 {
    par_count(n, 1, |i, acc| {
        let mut r = TrialRng::new(seed.with_trial(seed.trial_index + i));
        let u = mu[0] * r.exp1();
        let v = mu[1] * r.exp1();
        let w = mu[2] * r.exp1();
        if u + v * w / (v + w + eps) < g {
            acc[0] += 1;
        }
    })[0]
}

/// `P{v w / (v + w + delta) < h}` with the asymptote `h (1/mu_v + 1/mu_w)`.
pub fn harmonic_product_small_ball(mu_v: f64, mu_w: f64, delta: f64, h: f64) -> Result<LemmaCheckReport> {
    check_means(&[mu_v, mu_w])?;
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::Domain(format!("delta must be non-negative, got {delta}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("h must be positive, got {h}")));
    }
    let asym = h * (1.0 / mu_v + 1.0 / mu_w);
    let p = harmonic_cdf(mu_v, mu_w, delta, h);
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(LemmaCheckReport::exact(p, asym))
    } else {
        let hits = harmonic_mc(mu_v, mu_w, delta, h, FALLBACK_SAMPLES, FALLBACK_SEED);
        Ok(LemmaCheckReport::monte_carlo(hits, FALLBACK_SAMPLES, asym))
    }
}

/// `P{u + v w / (v + w + eps) < g}` by quadrature over the density of `u`,
/// with the asymptote `g^2 (1/mu_v + 1/mu_w) / (2 mu_u)`.
pub fn lemma_a3_small_ball(mu_u: f64, mu_v: f64, mu_w: f64, eps: f64, g: f64) -> Result<LemmaCheckReport> {
    check_means(&[mu_u, mu_v, mu_w])?;
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::Domain(format!("eps must be non-negative, got {eps}")));
    }
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::Domain(format!("g must be positive, got {g}")));
    }
    let asym = g * g * (1.0 / mu_v + 1.0 / mu_w) / (2.0 * mu_u);
    let a = 1.0 / mu_u;
    let integrand = |x: f64| a * (-a * x).exp() * harmonic_cdf(mu_v, mu_w, eps, g - x);
    match quad::integrate(integrand, 0.0, g, QUAD_ABS_TOL * asym.min(1.0), QUAD_REL_TOL) {
        Ok(p) if (0.0..=1.0 + 1e-12).contains(&p) => Ok(LemmaCheckReport::exact(p.min(1.0), asym)),
        _ => {
            let hits = lemma_a3_mc([mu_u, mu_v, mu_w], eps, g, FALLBACK_SAMPLES, FALLBACK_SEED);
            Ok(LemmaCheckReport::monte_carlo(hits, FALLBACK_SAMPLES, asym))
        }
    }
}
