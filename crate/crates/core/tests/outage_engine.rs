use relaysim_core::channel::{FadingProfile, KRelayProfile, SnrScalar};
use relaysim_core::outage::*;
use relaysim_core::rates::Rate;
use relaysim_core::rng::SeedSpec;
use relaysim_core::{probkit, Error};

fn snr(v: f64) -> SnrScalar {
    SnrScalar::new(v).unwrap()
}

fn unit() -> NetworkProfile {
    FadingProfile::unit().into()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn direct_outage(g: f64, s: f64, r: f64) -> f64 {
    -(-r.exp_m1() / (g * s)).exp_m1()
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let seed = SeedSpec::new(3, 0, 0);
    let p = unit();
    let run = || {
        let e = estimate_outage(ProtocolSpec::Df, &p, snr(0.01), Rate::new(1e-3).unwrap(), 100_003, seed).unwrap();
        let r = epsilon_outage_rate(ProtocolSpec::CutsetFd, &p, snr(0.01), 0.01, 50_000, 1e-9, seed).unwrap();
        let c = small_ball_constants(
            &[ProtocolSpec::CutsetFd, ProtocolSpec::Miso],
            &p,
            snr(0.01),
            2,
            &[0.2, 0.1],
            70_000,
            seed,
        )
        .unwrap();
        (e, r, c)
    };
    let one = in_pool(1, run);
    for threads in [2, 4, 16] {
        assert_eq!(in_pool(threads, run), one, "{threads} threads");
    }
}

#[test]
fn same_seed_same_estimate() {
    let seed = SeedSpec::new(8, 2, 1000);
    let a = estimate_outage(ProtocolSpec::Af, &unit(), snr(0.1), Rate::new(0.01).unwrap(), 40_000, seed).unwrap();
    let b = estimate_outage(ProtocolSpec::Af, &unit(), snr(0.1), Rate::new(0.01).unwrap(), 40_000, seed).unwrap();
    assert_eq!(a, b);
    let c = estimate_outage(ProtocolSpec::Af, &unit(), snr(0.1), Rate::new(0.01).unwrap(), 40_000, seed.with_stream(3))
        .unwrap();
    assert_ne!(a.n_outages, c.n_outages);
}

#[test]
fn empirical_outage_is_monotone_in_rate() {
    let seed = SeedSpec::new(12, 0, 0);
    let specs = [
        ProtocolSpec::Direct,
        ProtocolSpec::Miso,
        ProtocolSpec::Af,
        ProtocolSpec::Df,
        ProtocolSpec::Baf { alpha: AlphaRule::Fixed(0.3) },
        ProtocolSpec::CutsetFd,
        ProtocolSpec::CutsetFullCsi { grid_resolution: 0.05 },
        ProtocolSpec::ReceiveDiversity { antennas: 3 },
    ];
    for spec in specs {
        let mut prev = 0;
        for i in 0..25 {
            let r = 1e-4 * 1.3f64.powi(i);
            let e = estimate_outage(spec, &unit(), snr(0.01), Rate::new(r).unwrap(), 20_000, seed).unwrap();
            assert!(e.n_outages >= prev, "{}: {} < {prev} at R = {r}", spec.name(), e.n_outages);
            prev = e.n_outages;
        }
    }
}

#[test]
fn protocol_dominance_under_common_draws() {
    let seed = SeedSpec::new(13, 0, 0);
    let p: NetworkProfile = FadingProfile::new(1.0, 0.5, 2.0).unwrap().into();
    for i in 0..15 {
        let r = Rate::new(2e-4 * 1.4f64.powi(i)).unwrap();
        let est = |spec| estimate_outage(spec, &p, snr(0.01), r, 30_000, seed).unwrap().n_outages;
        let (cut, af, direct) = (est(ProtocolSpec::CutsetFd), est(ProtocolSpec::Af), est(ProtocolSpec::Direct));
        assert!(cut <= af && af <= direct, "R = {}: {cut} {af} {direct}", r.value());
        let (df, miso) = (est(ProtocolSpec::Df), est(ProtocolSpec::Miso));
        assert!(miso <= df, "R = {}: miso {miso} > df {df}", r.value());
        let baf = est(ProtocolSpec::Baf { alpha: AlphaRule::Fixed(0.2) });
        assert!(cut <= baf);
        let full = est(ProtocolSpec::CutsetFullCsi { grid_resolution: 0.05 });
        assert!(full <= cut);
    }
}

#[test]
fn direct_link_matches_closed_form() {
    let g = 0.7;
    let p: NetworkProfile = FadingProfile::new(g, 1.0, 1.0).unwrap().into();
    let n = 1_000_000;
    for (s, r) in [(0.01, 1e-4), (0.01, 1e-3), (1.0, 0.05), (10.0, 2.0)] {
        let e = estimate_outage(ProtocolSpec::Direct, &p, snr(s), Rate::new(r).unwrap(), n, SeedSpec::new(21, 0, 0))
            .unwrap();
        let want = direct_outage(g, s, r);
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((e.p_hat - want).abs() < 4.0 * se, "SNR {s}, R {r}: {} vs {want}", e.p_hat);
    }
}

#[test]
fn receive_diversity_matches_erlang() {
    let p = unit();
    let n = 1_000_000;
    for l in [1usize, 2, 4] {
        let (s, r) = (0.05, 0.02);
        let e = estimate_outage(
            ProtocolSpec::ReceiveDiversity { antennas: l },
            &p,
            snr(s),
            Rate::new(r).unwrap(),
            n,
            SeedSpec::new(22, 0, 0),
        )
        .unwrap();
        let want = probkit::hypoexp_cdf(&vec![1.0; l], r.exp_m1() / s);
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((e.p_hat - want).abs() < 4.0 * se, "L = {l}: {} vs {want}", e.p_hat);
    }
}

#[test]
fn binomial_variance_is_consistent() {
    let (g, s) = (1.0, 0.01);
    // R with direct-link outage 0.01
    let r = (g * s * -(0.99f64.ln())).ln_1p();
    let p = direct_outage(g, s, r);
    let n = 100_000u64;
    let reps = 200;
    let xs: Vec<f64> = (0..reps)
        .map(|k| {
            estimate_outage(ProtocolSpec::Direct, &unit(), snr(s), Rate::new(r).unwrap(), n, SeedSpec::new(1000 + k, 0, 0))
                .unwrap()
                .p_hat
        })
        .collect();
    let m = xs.iter().sum::<f64>() / reps as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    let ratio = v / (p * (1.0 - p) / n as f64);
    assert!((1.0 / 1.5..1.5).contains(&ratio), "variance ratio {ratio}");
}

#[test]
fn epsilon_rate_matches_direct_quantile() {
    let (g, s, eps) = (1.0, 0.01, 0.01);
    let n = 2_000_000;
    let sol = epsilon_outage_rate(ProtocolSpec::Direct, &unit(), snr(s), eps, n, 1e-10, SeedSpec::new(23, 0, 0)).unwrap();
    let want = (g * s * -(1.0 - eps).ln()).ln_1p();
    // quantile standard error: sqrt(eps (1-eps) / n) / density
    let dens_rate = (1.0 - eps) * (want.exp()) / (g * s);
    let se = (eps * (1.0 - eps) / n as f64).sqrt() / dens_rate;
    assert!((sol.rate.value() - want).abs() < 4.0 * se, "{} vs {want}", sol.rate.value());
    assert!(sol.achieved_outage.p_hat <= eps);
}

#[test]
fn epsilon_rate_brackets_the_quantile() {
    let seed = SeedSpec::new(24, 0, 0);
    let n = 200_000;
    let tol = 1e-9;
    for spec in [ProtocolSpec::Df, ProtocolSpec::Af, ProtocolSpec::Baf { alpha: AlphaRule::Auto }] {
        let sol = epsilon_outage_rate(spec, &unit(), snr(0.01), 0.01, n, tol, seed).unwrap();
        let r = sol.rate.value();
        let at = estimate_outage(spec, &unit(), snr(0.01), Rate::new(r).unwrap(), n, seed).unwrap();
        let above = estimate_outage(spec, &unit(), snr(0.01), Rate::new(r + tol).unwrap(), n, seed).unwrap();
        assert_eq!(at, sol.achieved_outage, "{}", spec.name());
        assert!(at.n_outages <= 2000, "{}", spec.name());
        assert!(above.n_outages > 2000, "{}: {}", spec.name(), above.n_outages);
    }
}

#[test]
fn epsilon_rate_needs_enough_outages() {
    let e = epsilon_outage_rate(ProtocolSpec::Direct, &unit(), snr(0.01), 1e-3, 99_999, 1e-6, SeedSpec::new(1, 0, 0));
    assert!(matches!(e, Err(Error::Config(_))), "{e:?}");
    let e = epsilon_outage_rate(ProtocolSpec::Direct, &unit(), snr(0.01), 1.5, 1000, 1e-6, SeedSpec::new(1, 0, 0));
    assert!(matches!(e, Err(Error::Config(_))));
}

#[test]
fn shared_pass_equals_single_calls() {
    let seed = SeedSpec::new(25, 0, 0);
    let specs = [
        ProtocolSpec::CutsetFd,
        ProtocolSpec::Df,
        ProtocolSpec::ReceiveDiversity { antennas: 2 },
        ProtocolSpec::Baf { alpha: AlphaRule::Auto },
    ];
    let ts = [0.3, 0.2, 0.1];
    let all = small_ball_constants(&specs, &unit(), snr(0.01), 2, &ts, 100_000, seed).unwrap();
    for (spec, c) in specs.iter().zip(&all) {
        let single = small_ball_constant(*spec, &unit(), snr(0.01), 2, &ts, 100_000, seed).unwrap();
        assert_eq!(&single, c, "{}", spec.name());
    }
}

#[test]
fn small_ball_counts_match_outage_estimates() {
    let seed = SeedSpec::new(26, 0, 0);
    let ts = [0.2, 0.1];
    let c = small_ball_constant(ProtocolSpec::Df, &unit(), snr(0.01), 2, &ts, 150_000, seed).unwrap();
    for (t, h) in ts.iter().zip(&c.hits) {
        let e = estimate_outage(ProtocolSpec::Df, &unit(), snr(0.01), Rate::new(t * 0.01).unwrap(), 150_000, seed).unwrap();
        assert_eq!(e.n_outages, *h);
    }
    let r1 = c.ratios[1];
    let r2 = c.ratios[0];
    assert!((c.extrapolated - (2.0 * r1 - r2)).abs() < 1e-12);
}

#[test]
fn small_ball_widens_once_then_fails() {
    let seed = SeedSpec::new(27, 0, 0);
    // ~1e-5 expected hits even at the widened thresholds
    let e = small_ball_constant(ProtocolSpec::CutsetFd, &unit(), snr(0.01), 2, &[2e-4, 1e-4], 1000, seed);
    assert!(matches!(e, Err(Error::Solver(_))), "{e:?}");
    // direct link (d = 1): 3000 trials at t = 0.0008 expect ~2.4 hits; widening rescues
    let c = small_ball_constant(ProtocolSpec::Direct, &unit(), snr(0.01), 1, &[0.002, 0.0008], 3000, seed).unwrap();
    assert!(c.hits.iter().all(|&h| h > 0));
}

#[test]
fn extrapolated_error_accounts_for_nesting() {
    let c = ConstantEstimate {
        thresholds: vec![0.02, 0.01],
        ratios: vec![1.0, 1.0],
        hits: vec![400, 100],
        n_trials: 1_000_000,
        extrapolated: 1.0,
        d: 2,
    };
    let se = c.ratio_std_errs();
    let indep = (4.0 * se[1].powi(2) + se[0].powi(2)).sqrt();
    let got = c.extrapolated_std_err();
    assert!(got < indep && got > 0.0, "{got} vs {indep}");
}

#[test]
fn mismatched_profile_is_rejected() {
    let k2: NetworkProfile = KRelayProfile::unit(2).into();
    let e = estimate_outage(ProtocolSpec::Df, &k2, snr(0.1), Rate::new(0.01).unwrap(), 10, SeedSpec::new(1, 0, 0));
    assert!(matches!(e, Err(Error::Config(_))));
    let e = estimate_outage(
        ProtocolSpec::CutsetKRelay { k: 3 },
        &k2,
        snr(0.1),
        Rate::new(0.01).unwrap(),
        10,
        SeedSpec::new(1, 0, 0),
    );
    assert!(matches!(e, Err(Error::Config(_))));
}

#[test]
fn k_relay_with_one_relay_is_cutset() {
    let seed = SeedSpec::new(28, 0, 0);
    let k1: NetworkProfile = KRelayProfile::unit(1).into();
    for r in [1e-3, 4e-3] {
        let a = estimate_outage(ProtocolSpec::CutsetKRelay { k: 1 }, &k1, snr(0.01), Rate::new(r).unwrap(), 400_000, seed)
            .unwrap();
        let b = estimate_outage(ProtocolSpec::CutsetFd, &unit(), snr(0.01), Rate::new(r).unwrap(), 400_000, seed).unwrap();
        let se = (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
        assert!((a.p_hat - b.p_hat).abs() < 4.0 * se);
    }
}

#[test]
fn power_split_optimum() {
    let p = FadingProfile::unit();
    assert!((optimize_power_split(&p).unwrap() - 2.0 / 3.0).abs() < 1e-6);
    let p = FadingProfile::new(1.0, 1.0, 2.0).unwrap();
    let want = (5f64.sqrt() - 1.0) / 2.0;
    assert!((optimize_power_split(&p).unwrap() - want).abs() < 1e-6);
}
