//! One runner per experiment kind. Each returns the CSV columns and rows.

use relaysim_core::asymptotics::{self, ConstantTag, ScenarioTag, TheoryConstant};
use relaysim_core::channel::{received_snrs, ChannelDraw, FadingProfile, KRelayProfile, SnrScalar};
use relaysim_core::outage::{self, AlphaRule, ConstantEstimate, NetworkProfile, ProtocolSpec};
use relaysim_core::ppm::{self, RelayRegime};
use relaysim_core::probkit::{self, ExpMeanVector};
use relaysim_core::rates::Rate;
use relaysim_core::rng::{SeedSpec, TrialRng};
use relaysim_core::Error;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::table::{Cell, ResultRow};

/// Default bisection width, relative to the SNR.
pub const DEFAULT_RATE_TOLERANCE: f64 = 1e-5;

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<ResultRow>,
}

fn snr(v: f64) -> Result<SnrScalar, Error> {
    SnrScalar::new(v)
}

pub fn profile_label(p: &FadingProfile) -> String {
    format!("g_sd={};g_rd={};g_sr={}", p.g_sd, p.g_rd, p.g_sr)
}

pub fn k_profile_label(p: &KRelayProfile) -> String {
    let relays: Vec<String> = p.relays.iter().map(|(sr, rd)| format!("({sr},{rd})")).collect();
    format!("g_sd={};relays={}", p.g_sd, relays.join("|"))
}

fn single_as_k(p: &FadingProfile) -> KRelayProfile {
    KRelayProfile {
        g_sd: p.g_sd,
        relays: vec![(p.g_sr, p.g_rd)],
    }
}

/// (label, profile, protocols) for every compatible pairing, in config order.
fn pairings(cfg: &ExperimentConfig) -> Vec<(String, NetworkProfile, Vec<ProtocolSpec>)> {
    let mut out = Vec::new();
    for p in &cfg.profiles {
        let specs: Vec<ProtocolSpec> = cfg
            .protocols
            .iter()
            .copied()
            .filter(|s| !matches!(s, ProtocolSpec::CutsetKRelay { .. }))
            .collect();
        if !specs.is_empty() {
            out.push((profile_label(p), NetworkProfile::Single(*p), specs));
        }
    }
    for p in &cfg.k_relay_profiles {
        let specs: Vec<ProtocolSpec> = cfg
            .protocols
            .iter()
            .copied()
            .filter(|s| matches!(s, ProtocolSpec::CutsetKRelay { k } if *k == p.k()))
            .collect();
        if !specs.is_empty() {
            out.push((k_profile_label(p), NetworkProfile::KRelay(p.clone()), specs));
        }
    }
    out
}

fn g_sd(profile: &NetworkProfile) -> f64 {
    match profile {
        NetworkProfile::Single(p) => p.g_sd,
        NetworkProfile::KRelay(p) => p.g_sd,
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Small-ball constant of `P(rate < t SNR) ~ C t^d`, where the theory has one.
pub fn theory_constant(spec: &ProtocolSpec, profile: &NetworkProfile) -> Option<TheoryConstant> {
    let tag = match spec {
        ProtocolSpec::Direct => {
            return Some(TheoryConstant {
                value: 1.0 / g_sd(profile),
                d: 1,
            })
        }
        ProtocolSpec::ReceiveDiversity { antennas } => {
            return Some(TheoryConstant {
                value: 1.0 / (factorial(*antennas) * g_sd(profile).powi(*antennas as i32)),
                d: *antennas as u32,
            })
        }
        ProtocolSpec::CutsetFd => ConstantTag::Scenario(ScenarioTag::CutsetUpper),
        ProtocolSpec::Baf { alpha: AlphaRule::Auto } => ConstantTag::Scenario(ScenarioTag::Baf),
        ProtocolSpec::Df => ConstantTag::Scenario(ScenarioTag::Df),
        ProtocolSpec::Miso => ConstantTag::Miso,
        ProtocolSpec::CutsetKRelay { .. } => ConstantTag::KRelay,
        _ => return None,
    };
    let kp = match profile {
        NetworkProfile::Single(p) => single_as_k(p),
        NetworkProfile::KRelay(p) => p.clone(),
    };
    asymptotics::small_ball_theory_constant(tag, &kp).ok()
}

/// `t` with `P{sum of L unit exponentials < t} = eps`.
fn erlang_quantile(l: usize, eps: f64) -> f64 {
    let rates = vec![1.0; l];
    let (mut lo, mut hi) = (0.0, 1.0);
    while probkit::hypoexp_cdf(&rates, hi) < eps {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if probkit::hypoexp_cdf(&rates, mid) < eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn antennas(spec: &ProtocolSpec) -> Option<usize> {
    match spec {
        ProtocolSpec::Direct => Some(1),
        ProtocolSpec::ReceiveDiversity { antennas } => Some(*antennas),
        _ => None,
    }
}

fn outage_theory(spec: &ProtocolSpec, profile: &NetworkProfile, snr: f64, t: f64) -> Option<f64> {
    if let Some(l) = antennas(spec) {
        let x = (t * snr).exp_m1() / (g_sd(profile) * snr);
        return Some(probkit::hypoexp_cdf(&vec![1.0; l], x));
    }
    theory_constant(spec, profile).map(|c| c.value * t.powi(c.d as i32))
}

fn eps_rate_theory(spec: &ProtocolSpec, profile: &NetworkProfile, snr: f64, eps: f64) -> Option<f64> {
    if let Some(l) = antennas(spec) {
        return Some((g_sd(profile) * snr * erlang_quantile(l, eps)).ln_1p());
    }
    if let (ProtocolSpec::Af, NetworkProfile::Single(p)) = (spec, profile) {
        return Some(eps * p.g_sd * snr);
    }
    theory_constant(spec, profile).map(|c| (eps / c.value).powf(1.0 / c.d as f64) * snr)
}

fn base_seed(cfg: &ExperimentConfig) -> SeedSpec {
    SeedSpec::new(cfg.master_seed, 0, 0)
}

fn rate_tol(cfg: &ExperimentConfig, snr: f64) -> f64 {
    cfg.rate_tolerance.unwrap_or(DEFAULT_RATE_TOLERANCE) * snr
}

pub fn run(cfg: &ExperimentConfig) -> Result<Table, Error> {
    match cfg.kind {
        ExperimentKind::OutageCurve => outage_curve(cfg),
        ExperimentKind::EpsilonRate => epsilon_rate(cfg),
        ExperimentKind::SmallBall => small_ball(cfg),
        ExperimentKind::Table1 => table1(cfg),
        ExperimentKind::Ppm => ppm_errors(cfg),
        ExperimentKind::Lemmas => lemmas(cfg),
        ExperimentKind::PowerSplit => power_split(cfg),
        ExperimentKind::FullCsi => full_csi(cfg),
        ExperimentKind::KRelay => k_relay(cfg),
    }
}

fn finish(rows: Vec<ResultRow>, fallback: &[&'static str]) -> Table {
    let columns = rows.first().map(|r| r.columns()).unwrap_or_else(|| fallback.to_vec());
    Table { columns, rows }
}

const OUTPUTS: [&str; 4] = ["estimate", "std_err", "theory", "ratio"];

fn with_outputs(cols: &[&'static str]) -> Vec<&'static str> {
    cols.iter().copied().chain(OUTPUTS).collect()
}

fn outage_curve(cfg: &ExperimentConfig) -> Result<Table, Error> {
    let n = cfg.trials_or_default();
    let mut rows = Vec::new();
    for (label, profile, specs) in pairings(cfg) {
        for &s in &cfg.snrs {
            let snr_v = snr(s)?;
            for spec in &specs {
                for &t in &cfg.normalized_rates {
                    let rate = Rate::new(t * s)?;
                    let est = outage::estimate_outage(*spec, &profile, snr_v, rate, n, base_seed(cfg))?;
                    rows.push(
                        ResultRow::new()
                            .with("profile", label.as_str())
                            .with("protocol", spec.name())
                            .with("params", spec.params_label())
                            .with("snr", s)
                            .with("normalized_rate", t)
                            .with("rate", rate.value())
                            .with("n_trials", n)
                            .with("outages", est.n_outages)
                            .outputs(Some(est.p_hat), Some(est.std_err), outage_theory(spec, &profile, s, t)),
                    );
                }
            }
        }
    }
    Ok(finish(
        rows,
        &with_outputs(&["profile", "protocol", "params", "snr", "normalized_rate", "rate", "n_trials", "outages"]),
    ))
}

fn epsilon_rate(cfg: &ExperimentConfig) -> Result<Table, Error> {
    let n = cfg.trials_or_default();
    let mut rows = Vec::new();
    for (label, profile, specs) in pairings(cfg) {
        for &s in &cfg.snrs {
            let snr_v = snr(s)?;
            for spec in &specs {
                for &eps in &cfg.epsilons {
                    let sol =
                        outage::epsilon_outage_rate(*spec, &profile, snr_v, eps, n, rate_tol(cfg, s), base_seed(cfg))?;
                    let r = sol.rate.value();
                    rows.push(
                        ResultRow::new()
                            .with("profile", label.as_str())
                            .with("protocol", spec.name())
                            .with("params", spec.params_label())
                            .with("snr", s)
                            .with("epsilon", eps)
                            .with("n_trials", n)
                            .with("normalized_rate", r / s)
                            .with("achieved_outage", sol.achieved_outage.p_hat)
                            .with("iterations", sol.iterations as u64)
                            .outputs(Some(r), None, eps_rate_theory(spec, &profile, s, eps)),
                    );
                }
            }
        }
    }
    Ok(finish(
        rows,
        &with_outputs(&[
            "profile",
            "protocol",
            "params",
            "snr",
            "epsilon",
            "n_trials",
            "normalized_rate",
            "achieved_outage",
            "iterations",
        ]),
    ))
}

/// Threshold rows followed by one `threshold = 0` row for the extrapolation.
fn constant_rows(
    est: &ConstantEstimate,
    theory: Option<f64>,
    prefix: impl Fn() -> ResultRow,
) -> Vec<ResultRow> {
    let se = est.ratio_std_errs();
    let mut rows: Vec<ResultRow> = est
        .thresholds
        .iter()
        .zip(&est.ratios)
        .zip(&est.hits)
        .zip(&se)
        .map(|(((&t, &r), &h), &e)| {
            prefix()
                .with("d", est.d as u64)
                .with("threshold", t)
                .with("n_trials", est.n_trials)
                .with("hits", h)
                .outputs(Some(r), Some(e), theory)
        })
        .collect();
    rows.push(
        prefix()
            .with("d", est.d as u64)
            .with("threshold", 0.0)
            .with("n_trials", est.n_trials)
            .with("hits", Cell::Empty)
            .outputs(Some(est.extrapolated), Some(est.extrapolated_std_err()), theory),
    );
    rows
}

fn small_ball(cfg: &ExperimentConfig) -> Result<Table, Error> {
    let n = cfg.trials_or_default();
    let mut rows = Vec::new();
    for (label, profile, specs) in pairings(cfg) {
        let theory: Vec<Option<TheoryConstant>> = specs.iter().map(|s| theory_constant(s, &profile)).collect();
        let orders: Vec<u32> = theory
            .iter()
            .map(|c| cfg.order_d.or(c.map(|c| c.d)).unwrap_or(2))
            .collect();
        for &s in &cfg.snrs {
            let snr_v = snr(s)?;
            let mut results: Vec<Option<ConstantEstimate>> = vec![None; specs.len()];
            let mut distinct = orders.clone();
            distinct.dedup();
            distinct.sort_unstable();
            distinct.dedup();
            for d in distinct {
                let idx: Vec<usize> = (0..specs.len()).filter(|&i| orders[i] == d).collect();
                let group: Vec<ProtocolSpec> = idx.iter().map(|&i| specs[i]).collect();
                let ests = outage::small_ball_constants(&group, &profile, snr_v, d, &cfg.thresholds, n, base_seed(cfg))?;
                for (i, e) in idx.into_iter().zip(ests) {
                    results[i] = Some(e);
                }
            }
            for ((spec, est), c) in specs.iter().zip(results).zip(&theory) {
                let est = est.expect("every protocol belongs to one order group");
                let theory = c.filter(|c| c.d == est.d).map(|c| c.value);
                rows.extend(constant_rows(&est, theory, || {
                    ResultRow::new()
                        .with("profile", label.as_str())
                        .with("protocol", spec.name())
                        .with("params", spec.params_label())
                        .with("snr", s)
                }));
            }
        }
    }
    Ok(finish(
        rows,
        &with_outputs(&["profile", "protocol", "params", "snr", "d", "threshold", "n_trials", "hits"]),
    ))
}

fn table1(cfg: &ExperimentConfig) -> Result<Table, Error> {
    let mut rows = Vec::new();
    for p in &cfg.profiles {
        for &s in &cfg.snrs {
            let snr_v = snr(s)?;
            let triple = received_snrs(p, snr_v)?;
            for &eps in &cfg.epsilons {
                for tag in ScenarioTag::RATE_ROWS {
                    let e = asymptotics::table1_entry(tag, &triple, eps, snr_v)?;
                    rows.push(
                        ResultRow::new()
                            .with("profile", profile_label(p))
                            .with("snr", s)
                            .with("epsilon", eps)
                            .with("scenario", tag.name())
                            .with("normalized_rate", e.rate.value() / s)
                            .with("regime_warning", e.regime_warning)
                            .outputs(None, None, Some(e.rate.value())),
                    );
                }
            }
        }
    }
    Ok(finish(
        rows,
        &with_outputs(&["profile", "snr", "epsilon", "scenario", "normalized_rate", "regime_warning"]),
    ))
}

fn ppm_errors(cfg: &ExperimentConfig) -> Result<Table, Error> {
    let sec = cfg.ppm.as_ref().ok_or_else(|| Error::Config("missing ppm section".into()))?;
    let scheme = sec.scheme();
    let n = cfg.trials_or_default();
    let mut rows = Vec::new();
    for (i, d) in sec.draws.iter().enumerate() {
        let draw = ChannelDraw::from_powers(d.sd, d.rd, d.sr);
        let feas = ppm::ppm_feasibility(&scheme, &draw)?;
        let tau = match sec.tau {
            Some(t) => t,
            None => ppm::choose_threshold(&scheme, &draw)?,
        };
        let seed = SeedSpec::new(cfg.master_seed, i as u32, 0);
        let c = ppm::ppm_error_counts(&scheme, tau, &draw, n, seed)?;
        let regime = match feas.regime {
            RelayRegime::LinkLimited => "link_limited",
            RelayRegime::Saturated => "saturated",
        };
        for (decoder, errors, erasures) in [
            ("threshold", c.threshold_errors, Cell::from(c.erasures)),
            ("argmax", c.argmax_errors, Cell::Empty),
        ] {
            let est = outage::OutageEstimate::from_counts(errors, n);
            rows.push(
                ResultRow::new()
                    .with("draw", i)
                    .with("sd", d.sd)
                    .with("rd", d.rd)
                    .with("sr", d.sr)
                    .with("margin", feas.margin)
                    .with("feasible", feas.feasible)
                    .with("regime", regime)
                    .with("tau", tau)
                    .with("false_alarm_bound", ppm::false_alarm_bound(&scheme, &draw, tau))
                    .with("decoder", decoder)
                    .with("n_trials", n)
                    .with("errors", errors)
                    .with("erasures", erasures)
                    .outputs(Some(est.p_hat), Some(est.std_err), None),
            );
        }
    }
    Ok(finish(rows, &[]))
}

/// Brute-force hit count for one lemma row, on its own stream.
fn lemma_mc<F>(n: u64, seed: SeedSpec, event: F) -> Option<(f64, f64)>
where
    F: Fn(&mut TrialRng) -> bool + Sync,
{
    if n == 0 {
        return None;
    }
    let hits = outage::par_count(n, 1, |i, acc| {
        let mut rng = TrialRng::new(seed.with_trial(seed.trial_index + i));
        if event(&mut rng) {
            acc[0] += 1;
        }
    })[0];
    let e = outage::OutageEstimate::from_counts(hits, n);
    Some((e.p_hat, e.std_err))
}

fn lemma_row(
    lemma: &'static str,
    params: String,
    value: f64,
    value_err: Option<f64>,
    theory: Option<f64>,
    n: u64,
    mc: Option<(f64, f64)>,
) -> ResultRow {
    ResultRow::new()
        .with("lemma", lemma)
        .with("params", params)
        .with("n_trials", n)
        .with("mc_estimate", mc.map(|m| m.0))
        .with("mc_std_err", mc.map(|m| m.1))
        .outputs(Some(value), value_err, theory)
}

fn lemmas(cfg: &ExperimentConfig) -> Result<Table, Error> {
    let b = cfg.lemmas.clone().unwrap_or_default();
    let n = cfg.trials_or_default();
    let mut stream = 0u32;
    let mut next_seed = || {
        stream += 1;
        SeedSpec::new(cfg.master_seed, stream, 0)
    };
    let mut rows = Vec::new();
    for p in &b.exp_sum {
        let rep = probkit::exp_sum_small_ball(&ExpMeanVector::new(p.means.clone())?, p.t)?;
        let means = p.means.clone();
        let t = p.t;
        let mc = lemma_mc(n, next_seed(), |r| means.iter().map(|m| m * r.exp1()).sum::<f64>() < t);
        let label = p.means.iter().map(|m| m.to_string()).collect::<Vec<_>>().join("|");
        rows.push(lemma_row(
            "exp_sum",
            format!("means={label};t={t}"),
            rep.exact_or_mc,
            rep.mc_std_err,
            Some(rep.asymptotic),
            n,
            mc,
        ));
    }
    for p in &b.exp_sum_tail {
        let v = probkit::exp_sum_tail(p.mu_u, p.mu_v, p.tau)?;
        let q = *p;
        let mc = lemma_mc(n, next_seed(), |r| q.mu_u * r.exp1() + q.mu_v * r.exp1() > q.tau);
        rows.push(lemma_row(
            "exp_sum_tail",
            format!("mu_u={};mu_v={};tau={}", p.mu_u, p.mu_v, p.tau),
            v,
            None,
            None,
            n,
            mc,
        ));
    }
    for p in &b.harmonic {
        let rep = probkit::harmonic_product_small_ball(p.mu_v, p.mu_w, p.delta, p.h)?;
        let q = *p;
        let mc = lemma_mc(n, next_seed(), |r| {
            let v = q.mu_v * r.exp1();
            let w = q.mu_w * r.exp1();
            v * w / (v + w + q.delta) < q.h
        });
        rows.push(lemma_row(
            "harmonic",
            format!("mu_v={};mu_w={};delta={};h={}", p.mu_v, p.mu_w, p.delta, p.h),
            rep.exact_or_mc,
            rep.mc_std_err,
            Some(rep.asymptotic),
            n,
            mc,
        ));
    }
    for p in &b.lemma_a3 {
        let rep = probkit::lemma_a3_small_ball(p.mu_u, p.mu_v, p.mu_w, p.eps, p.g)?;
        let q = *p;
        let mc = lemma_mc(n, next_seed(), |r| {
            let u = q.mu_u * r.exp1();
            let v = q.mu_v * r.exp1();
            let w = q.mu_w * r.exp1();
            u + v * w / (v + w + q.eps) < q.g
        });
        rows.push(lemma_row(
            "lemma_a3",
            format!("mu_u={};mu_v={};mu_w={};eps={};g={}", p.mu_u, p.mu_v, p.mu_w, p.eps, p.g),
            rep.exact_or_mc,
            rep.mc_std_err,
            Some(rep.asymptotic),
            n,
            mc,
        ));
    }
    for &x in &b.bessel_k1 {
        let xk = x * probkit::bessel_k1(x)?;
        rows.push(lemma_row("x_bessel_k1", format!("x={x}"), xk, None, Some(1.0), n, None));
    }
    Ok(finish(
        rows,
        &with_outputs(&["lemma", "params", "n_trials", "mc_estimate", "mc_std_err"]),
    ))
}

/// Root in (0, 1) of `2(a-b) b^2 - (a-4b) b - 2b = 0`, `a = g_sr`, `b = g_rd`.
pub fn power_split_root(profile: &FadingProfile) -> f64 {
    let (a, b) = (profile.g_sr, profile.g_rd);
    let qa = 2.0 * (a - b);
    let qb = -(a - 4.0 * b);
    let qc = -2.0 * b;
    if qa.abs() < 1e-12 * (a + b) {
        return -qc / qb;
    }
    let disc = (qb * qb - 4.0 * qa * qc).sqrt();
    let r1 = (-qb + disc) / (2.0 * qa);
    let r2 = (-qb - disc) / (2.0 * qa);
    if r1 > 0.0 && r1 < 1.0 {
        r1
    } else {
        r2
    }
}

fn power_split(cfg: &ExperimentConfig) -> Result<Table, Error> {
    let mut rows = Vec::new();
    for p in &cfg.profiles {
        let beta = outage::optimize_power_split(p)?;
        rows.push(
            ResultRow::new()
                .with("profile", profile_label(p))
                .with("objective", outage::power_split_objective(p, beta))
                .outputs(Some(beta), None, Some(power_split_root(p))),
        );
    }
    Ok(finish(rows, &with_outputs(&["profile", "objective"])))
}

fn full_csi(cfg: &ExperimentConfig) -> Result<Table, Error> {
    let n = cfg.trials_or_default();
    let mut rows = Vec::new();
    for p in &cfg.profiles {
        for &s in &cfg.snrs {
            let snr_v = snr(s)?;
            let triple = received_snrs(p, snr_v)?;
            for &eps in &cfg.epsilons {
                let (params, sol) = outage::optimize_full_csi(p, snr_v, eps, n, base_seed(cfg))?;
                let no_csi = if eps <= asymptotics::MAX_EPSILON {
                    Some(asymptotics::table1_rate(ScenarioTag::CutsetUpper, &triple, eps)?.value())
                } else {
                    None
                };
                rows.push(
                    ResultRow::new()
                        .with("profile", profile_label(p))
                        .with("snr", s)
                        .with("epsilon", eps)
                        .with("n_trials", n)
                        .with("beta", params.beta)
                        .with("rho", params.rho)
                        .with("achieved_outage", sol.achieved_outage.p_hat)
                        .with("evaluations", sol.iterations as u64)
                        .outputs(Some(sol.rate.value()), None, no_csi),
                );
            }
        }
    }
    Ok(finish(
        rows,
        &with_outputs(&["profile", "snr", "epsilon", "n_trials", "beta", "rho", "achieved_outage", "evaluations"]),
    ))
}

fn k_relay(cfg: &ExperimentConfig) -> Result<Table, Error> {
    let n = cfg.trials_or_default();
    let mut rows = Vec::new();
    for p in &cfg.k_relay_profiles {
        let spec = ProtocolSpec::CutsetKRelay { k: p.k() };
        let profile = NetworkProfile::KRelay(p.clone());
        let c = asymptotics::small_ball_theory_constant(ConstantTag::KRelay, p)?;
        for &s in &cfg.snrs {
            let snr_v = snr(s)?;
            let est = outage::small_ball_constant(spec, &profile, snr_v, c.d, &cfg.thresholds, n, base_seed(cfg))?;
            let label = k_profile_label(p);
            rows.extend(constant_rows(&est, Some(c.value), || {
                ResultRow::new()
                    .with("profile", label.as_str())
                    .with("k", p.k())
                    .with("snr", s)
                    .with("quantity", "constant")
                    .with("epsilon", Cell::Empty)
            }));
            for &eps in &cfg.epsilons {
                let sol = outage::epsilon_outage_rate(spec, &profile, snr_v, eps, n, rate_tol(cfg, s), base_seed(cfg))?;
                let theory = if eps <= asymptotics::MAX_EPSILON {
                    Some(asymptotics::k_relay_capacity(p, eps, snr_v)?.value())
                } else {
                    None
                };
                rows.push(
                    ResultRow::new()
                        .with("profile", label.as_str())
                        .with("k", p.k())
                        .with("snr", s)
                        .with("quantity", "epsilon_rate")
                        .with("epsilon", eps)
                        .with("d", c.d as u64)
                        .with("threshold", Cell::Empty)
                        .with("n_trials", n)
                        .with("hits", sol.achieved_outage.n_outages)
                        .outputs(Some(sol.rate.value()), None, theory),
                );
            }
        }
    }
    Ok(finish(
        rows,
        &with_outputs(&["profile", "k", "snr", "quantity", "epsilon", "d", "threshold", "n_trials", "hits"]),
    ))
}
