//! Monte Carlo outage estimation.
//!
//! Trial `i` of an experiment always reads the random stream addressed by
//! `seed.with_trial(seed.trial_index + i)`. Work is split into fixed-size
//! chunks of consecutive trials and only integer hit counts are combined,
//! so results do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{ChannelDraw, FadingProfile, KRelayProfile, PathGain, SnrScalar};
use crate::error::{config_err, Error, Result};
use crate::rates::{self, BafParams, FullCsiParams, Rate, DEFAULT_GRID_RESOLUTION};
use crate::rng::{SeedSpec, TrialRng};

/// Trials per work unit. Fixed so that partitioning never depends on the pool size.
const CHUNK: u64 = 1 << 14;

/// Largest trial count for which per-draw rates are held in memory.
const MATERIALIZE_LIMIT: u64 = 1 << 25;

/// Monte Carlo outage probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub p_hat: f64,
    pub n_trials: u64,
    pub n_outages: u64,
    pub std_err: f64,
}

impl OutageEstimate {
    pub fn from_counts(n_outages: u64, n_trials: u64) -> Self {
        assert!(n_trials > 0 && n_outages <= n_trials);
        let p = n_outages as f64 / n_trials as f64;
        Self {
            p_hat: p,
            n_trials,
            n_outages,
            std_err: (p * (1.0 - p) / n_trials as f64).sqrt(),
        }
    }
}

/// Result of an epsilon-outage rate search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSolution {
    pub rate: Rate,
    pub achieved_outage: OutageEstimate,
    pub iterations: u32,
}

/// Empirical small-ball ratios `P(rate < t SNR) / t^d` and their extrapolation to `t -> 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub thresholds: Vec<f64>,
    pub ratios: Vec<f64>,
    pub hits: Vec<u64>,
    pub n_trials: u64,
    pub extrapolated: f64,
    pub d: u32,
}

impl ConstantEstimate {
    /// Binomial standard error of each ratio.
    pub fn ratio_std_errs(&self) -> Vec<f64> {
        self.thresholds
            .iter()
            .zip(&self.hits)
            .map(|(&t, &h)| {
                let p = h as f64 / self.n_trials as f64;
                (p * (1.0 - p) / self.n_trials as f64).sqrt() / t.powi(self.d as i32)
            })
            .collect()
    }

    /// Standard error of the extrapolated constant. The two smallest
    /// thresholds give nested outage events, so their counts are correlated.
    pub fn extrapolated_std_err(&self) -> f64 {
        let k = self.thresholds.len();
        let n = self.n_trials as f64;
        let se = self.ratio_std_errs();
        if k < 2 {
            return se[0];
        }
        let (t1, t2) = (self.thresholds[k - 1], self.thresholds[k - 2]);
        let (p1, p2) = (self.hits[k - 1] as f64 / n, self.hits[k - 2] as f64 / n);
        let a = t2 / (t2 - t1);
        let b = t1 / (t2 - t1);
        let d = self.d as i32;
        let cov = (p1.min(p2) - p1 * p2) / n / (t1.powi(d) * t2.powi(d));
        let var = a * a * se[k - 1].powi(2) + b * b * se[k - 2].powi(2) - 2.0 * a * b * cov;
        var.max(0.0).sqrt()
    }
}

/// How BAF picks its duty cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRule {
    Fixed(f64),
    /// `alpha = min(1, sqrt(R SNR))` for the rate `R` under test.
    Auto,
}

impl Serialize for AlphaRule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AlphaRule::Fixed(a) => s.serialize_f64(*a),
            AlphaRule::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for AlphaRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(a) => Ok(AlphaRule::Fixed(a)),
            Raw::Word(w) if w == "auto" => Ok(AlphaRule::Auto),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "alpha must be a number or \"auto\", got \"{w}\""
            ))),
        }
    }
}

fn default_grid() -> f64 {
    DEFAULT_GRID_RESOLUTION
}

/// Which per-realization rate an outage is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolSpec {
    Direct,
    Miso,
    ReceiveDiversity { antennas: usize },
    Af,
    Df,
    Baf { alpha: AlphaRule },
    BafBeamform { alpha: f64, beta: f64, rho: f64 },
    CutsetFd,
    CutsetFullCsi {
        #[serde(default = "default_grid")]
        grid_resolution: f64,
    },
    /// Full-CSI cutset with `(beta, rho)` held fixed across realizations.
    CutsetFullCsiFixed { beta: f64, rho: f64 },
    CutsetKRelay { k: usize },
    CutsetPowerSplit { beta: f64 },
}

impl ProtocolSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProtocolSpec::Direct => "direct",
            ProtocolSpec::Miso => "miso",
            ProtocolSpec::ReceiveDiversity { .. } => "receive_diversity",
            ProtocolSpec::Af => "af",
            ProtocolSpec::Df => "df",
            ProtocolSpec::Baf { .. } => "baf",
            ProtocolSpec::BafBeamform { .. } => "baf_beamform",
            ProtocolSpec::CutsetFd => "cutset_fd",
            ProtocolSpec::CutsetFullCsi { .. } => "cutset_full_csi",
            ProtocolSpec::CutsetFullCsiFixed { .. } => "cutset_full_csi_fixed",
            ProtocolSpec::CutsetKRelay { .. } => "cutset_k_relay",
            ProtocolSpec::CutsetPowerSplit { .. } => "cutset_power_split",
        }
    }

    /// Short parameter summary, empty when the protocol has none.
    pub fn params_label(&self) -> String {
        match self {
            ProtocolSpec::ReceiveDiversity { antennas } => format!("L={antennas}"),
            ProtocolSpec::Baf { alpha: AlphaRule::Auto } => "alpha=auto".into(),
            ProtocolSpec::Baf { alpha: AlphaRule::Fixed(a) } => format!("alpha={a}"),
            ProtocolSpec::BafBeamform { alpha, beta, rho } => {
                format!("alpha={alpha};beta={beta};rho={rho}")
            }
            ProtocolSpec::CutsetFullCsi { grid_resolution } => format!("grid={grid_resolution}"),
            ProtocolSpec::CutsetFullCsiFixed { beta, rho } => format!("beta={beta};rho={rho}"),
            ProtocolSpec::CutsetKRelay { k } => format!("k={k}"),
            ProtocolSpec::CutsetPowerSplit { beta } => format!("beta={beta}"),
            _ => String::new(),
        }
    }

    /// Checks parameter ranges.
    pub fn validate(&self) -> Result<()> {
        match *self {
            ProtocolSpec::ReceiveDiversity { antennas: 0 } => {
                Err(config_err("receive diversity needs at least one antenna"))
            }
            ProtocolSpec::Baf { alpha: AlphaRule::Fixed(a) } => BafParams::new(a).map(|_| ()),
            ProtocolSpec::BafBeamform { alpha, beta, rho } => {
                BafParams::new(alpha)?;
                if !(beta > 0.0 && beta <= 1.0) {
                    return Err(config_err(format!("beta must lie in (0, 1], got {beta}")));
                }
                if !(0.0..=1.0).contains(&rho) {
                    return Err(config_err(format!("rho must lie in [0, 1], got {rho}")));
                }
                Ok(())
            }
            ProtocolSpec::CutsetFullCsi { grid_resolution } => {
                if grid_resolution > 0.0 && grid_resolution <= 0.1 {
                    Ok(())
                } else {
                    Err(config_err(format!(
                        "grid resolution must lie in (0, 0.1], got {grid_resolution}"
                    )))
                }
            }
            ProtocolSpec::CutsetFullCsiFixed { beta, rho } => FullCsiParams::new(beta, rho).map(|_| ()),
            ProtocolSpec::CutsetKRelay { k: 0 } => {
                Err(config_err("k-relay cutset needs k >= 1"))
            }
            ProtocolSpec::CutsetPowerSplit { beta } if !(0.0..=1.0).contains(&beta) => {
                Err(config_err(format!("beta must lie in [0, 1], got {beta}")))
            }
            _ => Ok(()),
        }
    }

    /// Whether the per-realization rate depends on the rate under test.
    pub fn depends_on_target(&self) -> bool {
        matches!(self, ProtocolSpec::Df | ProtocolSpec::Baf { alpha: AlphaRule::Auto })
    }
}

/// Channel statistics an experiment draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkProfile {
    Single(FadingProfile),
    KRelay(KRelayProfile),
}

impl From<FadingProfile> for NetworkProfile {
    fn from(p: FadingProfile) -> Self {
        NetworkProfile::Single(p)
    }
}

impl From<KRelayProfile> for NetworkProfile {
    fn from(p: KRelayProfile) -> Self {
        NetworkProfile::KRelay(p)
    }
}

/// `alpha = min(1, sqrt(R SNR))`.
pub fn auto_alpha(target_rate: Rate, snr: SnrScalar) -> Result<BafParams> {
    let r = target_rate.value();
    if r <= 0.0 {
        return Err(config_err("the automatic duty cycle needs a positive rate"));
    }
    BafParams::new((r * snr.value()).sqrt().min(1.0))
}

/// What one trial needs from the channel.
#[derive(Debug, Clone, Copy)]
enum Sample {
    Link { sd: f64, rd: f64, sr: f64 },
    /// Sum of squared gains over the receive antennas.
    Diversity(f64),
    /// `|h_sd|^2 + sum_i min(|h_sr_i|^2, |h_rd_i|^2)`.
    KRelay(f64),
}

/// A validated (protocol, channel, SNR) triple that can evaluate trials.
#[derive(Debug, Clone)]
pub struct TrialEvaluator {
    spec: ProtocolSpec,
    profile: NetworkProfile,
    snr: f64,
}

impl TrialEvaluator {
    pub fn new(spec: ProtocolSpec, profile: &NetworkProfile, snr: SnrScalar) -> Result<Self> {
        spec.validate()?;
        match (profile, &spec) {
            (NetworkProfile::KRelay(p), ProtocolSpec::CutsetKRelay { k }) => {
                p.validate()?;
                if p.k() != *k {
                    return Err(config_err(format!(
                        "k-relay cutset with k={k} needs a profile with {k} relays, got {}",
                        p.k()
                    )));
                }
            }
            (NetworkProfile::KRelay(_), other) => {
                return Err(config_err(format!(
                    "protocol {} needs a single-relay profile",
                    other.name()
                )))
            }
            (NetworkProfile::Single(_), ProtocolSpec::CutsetKRelay { .. }) => {
                return Err(config_err(
                    "k-relay cutset needs a k-relay profile, got a single-relay profile",
                ))
            }
            (NetworkProfile::Single(p), _) => p.validate()?,
        }
        Ok(Self {
            spec,
            profile: profile.clone(),
            snr: snr.value(),
        })
    }

    /// Identifies which channel quantities a trial draws; protocols with
    /// the same kind consume identical variates.
    fn sample_kind(&self) -> (u8, usize) {
        match (&self.profile, &self.spec) {
            (NetworkProfile::Single(_), ProtocolSpec::ReceiveDiversity { antennas }) => (1, *antennas),
            (NetworkProfile::Single(_), _) => (0, 0),
            (NetworkProfile::KRelay(p), _) => (2, p.k()),
        }
    }

    #[inline]
    fn sample(&self, rng: &mut TrialRng) -> Sample {
        match (&self.profile, &self.spec) {
            (NetworkProfile::Single(p), ProtocolSpec::ReceiveDiversity { antennas }) => {
                let total = (0..*antennas)
                    .map(|_| PathGain::sample(rng, p.g_sd).power())
                    .sum();
                Sample::Diversity(total)
            }
            (NetworkProfile::Single(p), _) => {
                let d = ChannelDraw::sample_with(p, rng);
                Sample::Link {
                    sd: d.sd_power(),
                    rd: d.rd_power(),
                    sr: d.sr_power(),
                }
            }
            (NetworkProfile::KRelay(p), _) => {
                let mut acc = PathGain::sample(rng, p.g_sd).power();
                for &(g_sr, g_rd) in &p.relays {
                    let sr = PathGain::sample(rng, g_sr).power();
                    let rd = PathGain::sample(rng, g_rd).power();
                    acc += sr.min(rd);
                }
                Sample::KRelay(acc)
            }
        }
    }

    #[inline]
    fn rate(&self, s: &Sample, target: f64) -> f64 {
        let snr = self.snr;
        match (*s, self.spec) {
            (Sample::Diversity(total), _) => (total * snr).ln_1p(),
            (Sample::KRelay(sum), _) => sum * snr,
            (Sample::Link { sd, rd, sr }, spec) => match spec {
                ProtocolSpec::Direct => rates::direct_from_powers(sd, snr),
                ProtocolSpec::Miso => rates::miso_from_powers(sd, rd, snr),
                ProtocolSpec::Af => rates::af_from_powers(sd, rd, sr, snr),
                ProtocolSpec::Df => rates::df_from_powers(sd, rd, sr, snr, target),
                ProtocolSpec::Baf { alpha: AlphaRule::Fixed(a) } => {
                    rates::baf_from_powers(sd, rd, sr, snr, a)
                }
                ProtocolSpec::Baf { alpha: AlphaRule::Auto } => {
                    if target <= 0.0 {
                        // alpha -> 0 leaves a non-negative rate; nothing is below zero.
                        0.0
                    } else {
                        let a = (target * snr).sqrt().min(1.0);
                        rates::baf_from_powers(sd, rd, sr, snr, a)
                    }
                }
                ProtocolSpec::BafBeamform { alpha, beta, rho } => {
                    rates::baf_beamform_from_powers(sd, rd, sr, snr, alpha, beta, rho)
                }
                ProtocolSpec::CutsetFd => rates::cutset_fd_from_powers(sd, rd, sr, snr),
                ProtocolSpec::CutsetFullCsi { grid_resolution } => {
                    rates::full_csi_from_powers(sd, rd, sr, grid_resolution).0 * snr
                }
                ProtocolSpec::CutsetFullCsiFixed { beta, rho } => {
                    rates::full_csi_objective(sd, rd, sr, beta, rho.abs()) * snr
                }
                ProtocolSpec::CutsetPowerSplit { beta } => {
                    rates::power_split_from_powers(sd, rd, sr, snr, beta)
                }
                ProtocolSpec::ReceiveDiversity { .. } | ProtocolSpec::CutsetKRelay { .. } => {
                    unreachable!("rejected by TrialEvaluator::new")
                }
            },
        }
    }

    /// Rate of trial `trial` measured against `target`.
    pub fn trial_rate(&self, seed: SeedSpec, target: f64) -> f64 {
        let mut rng = TrialRng::new(seed);
        let s = self.sample(&mut rng);
        self.rate(&s, target)
    }

    fn count_outages(&self, seed: SeedSpec, n: u64, target: f64) -> u64 {
        par_count(n, 1, |i, acc| {
            let mut rng = TrialRng::new(seed.with_trial(seed.trial_index + i));
            let s = self.sample(&mut rng);
            if self.rate(&s, target) < target {
                acc[0] += 1;
            }
        })[0]
    }

    /// Per-trial rates for target-independent protocols, in trial order.
    fn materialize(&self, seed: SeedSpec, n: u64) -> Vec<f64> {
        let chunks = n.div_ceil(CHUNK);
        let parts: Vec<Vec<f64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(n);
                (lo..hi)
                    .map(|i| {
                        let mut rng = TrialRng::new(seed.with_trial(seed.trial_index + i));
                        let s = self.sample(&mut rng);
                        self.rate(&s, 0.0)
                    })
                    .collect()
            })
            .collect();
        parts.concat()
    }

    /// A rate that most realizations fall below, to seed the bracket search.
    fn bracket_hint(&self) -> f64 {
        let g = match &self.profile {
            NetworkProfile::Single(p) => match self.spec {
                ProtocolSpec::ReceiveDiversity { antennas } => antennas as f64 * p.g_sd,
                _ => p.g_sd + p.g_rd + p.g_sr,
            },
            NetworkProfile::KRelay(p) => {
                p.g_sd + p.relays.iter().map(|(a, b)| a.max(*b)).sum::<f64>()
            }
        };
        (g * self.snr).ln_1p().max(f64::MIN_POSITIVE)
    }
}

/// Runs `f(trial_offset, counters)` over `0..n`, summing `k` counters.
/// Work is split into fixed chunks, so the totals do not depend on the
/// thread count.
pub fn par_count<F>(n: u64, k: usize, f: F) -> Vec<u64>
where
    F: Fn(u64, &mut [u64]) + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0u64; k];
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            for i in lo..hi {
                f(i, &mut acc);
            }
            acc
        })
        .reduce(
            || vec![0u64; k],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

fn check_trials(n: u64) -> Result<()> {
    if n == 0 {
        Err(config_err("the number of trials must be at least one"))
    } else {
        Ok(())
    }
}

/// Fraction of draws whose rate falls strictly below `target_rate`.
pub fn estimate_outage(
    spec: ProtocolSpec,
    profile: &NetworkProfile,
    snr: SnrScalar,
    target_rate: Rate,
    n_trials: u64,
    seed: SeedSpec,
) -> Result<OutageEstimate> {
    check_trials(n_trials)?;
    let eval = TrialEvaluator::new(spec, profile, snr)?;
    let hits = eval.count_outages(seed, n_trials, target_rate.value());
    Ok(OutageEstimate::from_counts(hits, n_trials))
}

/// Outage counter over a fixed set of draws (common random numbers).
enum DrawSet<'a> {
    Stored(Vec<f64>),
    Streamed(&'a TrialEvaluator, SeedSpec, u64),
}

impl DrawSet<'_> {
    fn count_below(&self, target: f64) -> u64 {
        match self {
            DrawSet::Stored(rates) => rates.par_iter().filter(|&&r| r < target).count() as u64,
            DrawSet::Streamed(eval, seed, n) => eval.count_outages(*seed, *n, target),
        }
    }
}

/// Largest rate whose empirical outage does not exceed `epsilon`, by
/// bisection over a single shared set of draws. Returns the lower end of
/// the final bracket.
pub fn epsilon_outage_rate(
    spec: ProtocolSpec,
    profile: &NetworkProfile,
    snr: SnrScalar,
    epsilon: f64,
    n_trials: u64,
    rate_tolerance: f64,
    seed: SeedSpec,
) -> Result<RateSolution> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(config_err(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    check_trials(n_trials)?;
    if epsilon * (n_trials as f64) < 100.0 {
        return Err(config_err(format!(
            "epsilon * trials = {} < 100: too few expected outages",
            epsilon * n_trials as f64
        )));
    }
    if !(rate_tolerance > 0.0 && rate_tolerance.is_finite()) {
        return Err(config_err(format!(
            "rate tolerance must be positive, got {rate_tolerance}"
        )));
    }
    let eval = TrialEvaluator::new(spec, profile, snr)?;
    let set = if !spec.depends_on_target() && n_trials <= MATERIALIZE_LIMIT {
        DrawSet::Stored(eval.materialize(seed, n_trials))
    } else {
        DrawSet::Streamed(&eval, seed, n_trials)
    };
    let allowed = (epsilon * n_trials as f64).floor() as u64;

    let mut lo = 0.0f64;
    let mut lo_hits = 0u64;
    let mut hi = eval.bracket_hint();
    let mut iterations = 0u32;
    loop {
        iterations += 1;
        let h = set.count_below(hi);
        if h > allowed {
            break;
        }
        lo = hi;
        lo_hits = h;
        hi *= 2.0;
        if iterations > 64 || !hi.is_finite() {
            return Err(Error::Solver(format!(
                "no rate with outage above {epsilon} found up to {lo}"
            )));
        }
    }
    while hi - lo > rate_tolerance {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let h = set.count_below(mid);
        if h <= allowed {
            lo = mid;
            lo_hits = h;
        } else {
            hi = mid;
        }
    }
    Ok(RateSolution {
        rate: Rate::from_raw(lo),
        achieved_outage: OutageEstimate::from_counts(lo_hits, n_trials),
        iterations,
    })
}

/// Estimates `lim P(rate < t SNR) / t^d` at each threshold `t` (which must
/// be strictly decreasing) and extrapolates linearly in `t` through the two
/// smallest thresholds.
pub fn small_ball_constant(
    spec: ProtocolSpec,
    profile: &NetworkProfile,
    snr: SnrScalar,
    order_d: u32,
    thresholds: &[f64],
    n_trials: u64,
    seed: SeedSpec,
) -> Result<ConstantEstimate> {
    let mut v = small_ball_constants(&[spec], profile, snr, order_d, thresholds, n_trials, seed)?;
    Ok(v.remove(0))
}

/// [`small_ball_constant`] for several protocols over one pass of shared
/// draws. Each result equals the corresponding single-protocol call.
pub fn small_ball_constants(
    specs: &[ProtocolSpec],
    profile: &NetworkProfile,
    snr: SnrScalar,
    order_d: u32,
    thresholds: &[f64],
    n_trials: u64,
    seed: SeedSpec,
) -> Result<Vec<ConstantEstimate>> {
    if order_d == 0 {
        return Err(config_err("the small-ball order d must be at least 1"));
    }
    if thresholds.is_empty() {
        return Err(config_err("at least one threshold is required"));
    }
    if thresholds.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(config_err("thresholds must be positive"));
    }
    if thresholds.windows(2).any(|w| w[1] >= w[0]) {
        return Err(config_err("thresholds must be strictly decreasing"));
    }
    check_trials(n_trials)?;
    let evals = specs
        .iter()
        .map(|&s| TrialEvaluator::new(s, profile, snr))
        .collect::<Result<Vec<_>>>()?;
    // one pass per distinct set of channel quantities
    let mut all = vec![Vec::new(); evals.len()];
    let mut done = vec![false; evals.len()];
    for i in 0..evals.len() {
        if done[i] {
            continue;
        }
        let kind = evals[i].sample_kind();
        let members: Vec<usize> = (i..evals.len()).filter(|&j| evals[j].sample_kind() == kind).collect();
        let group: Vec<TrialEvaluator> = members.iter().map(|&j| evals[j].clone()).collect();
        for (j, h) in members.into_iter().zip(count_hits(&group, thresholds, n_trials, seed)) {
            all[j] = h;
            done[j] = true;
        }
    }

    let mut out = Vec::with_capacity(evals.len());
    for (j, eval) in evals.iter().enumerate() {
        let mut ts = thresholds.to_vec();
        let mut hits = all[j].clone();
        if hits.contains(&0) {
            ts.iter_mut().for_each(|t| *t *= 2.0);
            hits = count_hits(std::slice::from_ref(eval), &ts, n_trials, seed).remove(0);
            if hits.contains(&0) {
                return Err(Error::Solver(format!(
                    "{}: no outage hits at threshold(s) even after widening to {ts:?}",
                    eval.spec.name()
                )));
            }
        }
        out.push(constant_from_hits(ts, hits, n_trials, order_d));
    }
    Ok(out)
}

/// Hit counts `[protocol][threshold]` for `rate < t SNR`.
fn count_hits(evals: &[TrialEvaluator], ts: &[f64], n_trials: u64, seed: SeedSpec) -> Vec<Vec<u64>> {
    let Some(first) = evals.first() else {
        return Vec::new();
    };
    let k = ts.len();
    let targets: Vec<f64> = ts.iter().map(|t| t * first.snr).collect();
    let flat = par_count(n_trials, k * evals.len(), |i, acc| {
        let mut rng = TrialRng::new(seed.with_trial(seed.trial_index + i));
        let s = first.sample(&mut rng);
        for (eval, acc) in evals.iter().zip(acc.chunks_mut(k)) {
            if eval.spec.depends_on_target() {
                for (a, &r) in acc.iter_mut().zip(&targets) {
                    if eval.rate(&s, r) < r {
                        *a += 1;
                    }
                }
            } else {
                let rate = eval.rate(&s, 0.0);
                for (a, &r) in acc.iter_mut().zip(&targets) {
                    if rate < r {
                        *a += 1;
                    }
                }
            }
        }
    });
    flat.chunks(k).map(<[u64]>::to_vec).collect()
}

fn constant_from_hits(ts: Vec<f64>, hits: Vec<u64>, n_trials: u64, order_d: u32) -> ConstantEstimate {
    let n = n_trials as f64;
    let ratios: Vec<f64> = ts
        .iter()
        .zip(&hits)
        .map(|(&t, &h)| h as f64 / n / t.powi(order_d as i32))
        .collect();
    let k = ts.len();
    let extrapolated = if k >= 2 {
        let (t1, r1) = (ts[k - 1], ratios[k - 1]);
        let (t2, r2) = (ts[k - 2], ratios[k - 2]);
        r1 - t1 * (r2 - r1) / (t2 - t1)
    } else {
        ratios[0]
    };
    ConstantEstimate {
        thresholds: ts,
        ratios,
        hits,
        n_trials,
        extrapolated,
        d: order_d,
    }
}

/// Coefficient of the outage small-ball term under a source/relay power split `beta`.
pub fn power_split_objective(profile: &FadingProfile, beta: f64) -> f64 {
    (beta * profile.g_sr + (1.0 - beta) * profile.g_rd) / (beta * beta * (1.0 - beta))
}

/// Source share `beta*` of a sum-power budget minimizing the outage small-ball constant.
pub fn optimize_power_split(profile: &FadingProfile) -> Result<f64> {
    profile.validate()?;
    let f = |b: f64| power_split_objective(profile, b);
    let grid: Vec<f64> = (1..100).map(|i| f(i as f64 / 100.0)).collect();
    let best = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let unimodal = grid[..=best].windows(2).all(|w| w[1] <= w[0])
        && grid[best..].windows(2).all(|w| w[1] >= w[0]);
    let (lo, hi) = if unimodal {
        (1e-9, 1.0 - 1e-9)
    } else {
        ((best as f64) / 100.0, (best as f64 + 2.0) / 100.0)
    };
    Ok(rates::golden_section_max(|b| -f(b), lo, hi, 1e-10))
}

/// Per-draw squared gains, held in memory for repeated evaluation.
struct StoredDraws {
    sd: Vec<f64>,
    rd: Vec<f64>,
    sr: Vec<f64>,
}

impl StoredDraws {
    fn generate(profile: &FadingProfile, n: u64, seed: SeedSpec) -> Self {
        let chunks = n.div_ceil(CHUNK);
        let parts: Vec<Vec<(f64, f64, f64)>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(n);
                (lo..hi)
                    .map(|i| {
                        let mut rng = TrialRng::new(seed.with_trial(seed.trial_index + i));
                        let d = ChannelDraw::sample_with(profile, &mut rng);
                        (d.sd_power(), d.rd_power(), d.sr_power())
                    })
                    .collect()
            })
            .collect();
        let mut out = Self {
            sd: Vec::with_capacity(n as usize),
            rd: Vec::with_capacity(n as usize),
            sr: Vec::with_capacity(n as usize),
        };
        for (a, b, c) in parts.into_iter().flatten() {
            out.sd.push(a);
            out.rd.push(b);
            out.sr.push(c);
        }
        out
    }

    /// Exact empirical epsilon-rate (in units of P) of the fixed-parameter
    /// full-CSI cutset: the `floor(eps n)`-th smallest value.
    fn full_csi_quantile(&self, beta: f64, rho: f64, k: usize, scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        scratch.extend(
            self.sd
                .iter()
                .zip(&self.rd)
                .zip(&self.sr)
                .map(|((&a, &b), &c)| rates::full_csi_objective(a, b, c, beta, rho)),
        );
        let (_, v, _) = scratch.select_nth_unstable_by(k, |x, y| x.total_cmp(y));
        *v
    }
}

/// Grid search over fixed `(beta, rho)` for the largest epsilon-outage rate
/// of the full-CSI cutset. A 0.05 grid over the unit square is refined with
/// a 0.01 grid around its best point. All points share one draw set.
pub fn optimize_full_csi(
    profile: &FadingProfile,
    snr: SnrScalar,
    epsilon: f64,
    n_trials: u64,
    seed: SeedSpec,
) -> Result<(FullCsiParams, RateSolution)> {
    profile.validate()?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(config_err(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if epsilon * (n_trials as f64) < 100.0 {
        return Err(config_err(format!(
            "epsilon * trials = {} < 100: too few expected outages",
            epsilon * n_trials as f64
        )));
    }
    let draws = StoredDraws::generate(profile, n_trials, seed);
    let k = (epsilon * n_trials as f64).floor() as usize;
    let mut scratch = Vec::with_capacity(n_trials as usize);
    let mut evaluations = 0u32;
    let mut best = (f64::NEG_INFINITY, 1.0, 0.0);
    let mut search = |betas: &[f64], rhos: &[f64], best: &mut (f64, f64, f64)| {
        for &beta in betas {
            for &rho in rhos {
                evaluations += 1;
                let q = draws.full_csi_quantile(beta, rho, k, &mut scratch);
                if q > best.0 {
                    *best = (q, beta, rho);
                }
            }
        }
    };
    let coarse: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
    search(&coarse, &coarse, &mut best);
    let around = |c: f64| -> Vec<f64> {
        (-5..=5)
            .map(|j| ((c * 100.0).round() + j as f64) / 100.0)
            .filter(|v| (0.0..=1.0).contains(v))
            .collect()
    };
    let (fine_b, fine_r) = (around(best.1), around(best.2));
    search(&fine_b, &fine_r, &mut best);

    let (q, beta, rho) = best;
    let rate = q * snr.value();
    let below = draws
        .sd
        .iter()
        .zip(&draws.rd)
        .zip(&draws.sr)
        .filter(|((&a, &b), &c)| rates::full_csi_objective(a, b, c, beta, rho) * snr.value() < rate)
        .count() as u64;
    Ok((
        FullCsiParams { beta, rho },
        RateSolution {
            rate: Rate::from_raw(rate),
            achieved_outage: OutageEstimate::from_counts(below, n_trials),
            iterations: evaluations,
        },
    ))
}
