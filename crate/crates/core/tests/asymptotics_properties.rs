use proptest::prelude::*;
use relaysim_core::asymptotics::*;
use relaysim_core::channel::{received_snrs, FadingProfile, KRelayProfile, SnrScalar};

fn gain() -> impl Strategy<Value = f64> {
    0.05f64..20.0
}

fn profile() -> impl Strategy<Value = FadingProfile> {
    (gain(), gain(), gain()).prop_map(|(a, b, c)| FadingProfile::new(a, b, c).unwrap())
}

proptest! {
    #[test]
    fn outage_capacity_is_energy_capacity_times_snr(p in profile(), eps in 1e-6f64..=0.1, s in 1e-5f64..0.1) {
        let snr = SnrScalar::new(s).unwrap();
        let r = table1_rate(ScenarioTag::OutageCapacity, &received_snrs(&p, snr).unwrap(), eps).unwrap().value();
        let e = capacity_per_unit_energy(&p, eps).unwrap() * s;
        prop_assert!((r - e).abs() <= 1e-12 * e, "{r} vs {e}");
    }

    #[test]
    fn df_row_below_outage_capacity(p in profile(), eps in 0.0f64..=0.1, s in 1e-5f64..0.1) {
        let t = received_snrs(&p, SnrScalar::new(s).unwrap()).unwrap();
        let df = table1_rate(ScenarioTag::Df, &t, eps).unwrap().value();
        let oc = table1_rate(ScenarioTag::OutageCapacity, &t, eps).unwrap().value();
        prop_assert!(df <= oc);
        let nc = table1_rate(ScenarioTag::NonCooperative, &t, eps).unwrap().value();
        prop_assert_eq!(nc, table1_rate(ScenarioTag::Af, &t, eps).unwrap().value());
    }

    #[test]
    fn single_relay_k_formula_is_cutset(p in profile()) {
        let k1 = KRelayProfile::new(p.g_sd, vec![(p.g_sr, p.g_rd)]).unwrap();
        let general = small_ball_theory_constant(ConstantTag::KRelay, &k1).unwrap();
        let cutset = small_ball_theory_constant(ConstantTag::Scenario(ScenarioTag::CutsetUpper), &k1).unwrap();
        prop_assert_eq!(general.d, 2);
        prop_assert!((general.value - cutset.value).abs() <= 1e-15 * cutset.value);
    }

    #[test]
    fn k_relay_capacity_matches_constant(p in profile(), eps in 1e-6f64..=0.1, s in 1e-5f64..0.1) {
        let k1 = KRelayProfile::new(p.g_sd, vec![(p.g_sr, p.g_rd)]).unwrap();
        let snr = SnrScalar::new(s).unwrap();
        let r = k_relay_capacity(&k1, eps, snr).unwrap().value();
        let oc = table1_rate(ScenarioTag::OutageCapacity, &received_snrs(&p, snr).unwrap(), eps).unwrap().value();
        prop_assert!((r - oc).abs() <= 1e-12 * oc);
    }
}

#[test]
fn adding_relays_raises_capacity() {
    let snr = SnrScalar::new(0.01).unwrap();
    for eps in [1e-4, 1e-3, 5e-3] {
        let caps: Vec<f64> = (1..=3)
            .map(|k| k_relay_capacity(&KRelayProfile::unit(k), eps, snr).unwrap().value())
            .collect();
        assert!(caps.windows(2).all(|w| w[1] > w[0]), "eps {eps}: {caps:?}");
    }
}

#[test]
fn k_relay_unit_constants() {
    for (k, want) in [(1usize, 1.0), (2, 2.0 / 3.0), (3, 1.0 / 3.0)] {
        let c = small_ball_theory_constant(ConstantTag::KRelay, &KRelayProfile::unit(k)).unwrap();
        assert_eq!(c.d, k as u32 + 1);
        assert!((c.value - want).abs() < 1e-15);
    }
}

#[test]
fn single_relay_tags_need_one_relay() {
    let k2 = KRelayProfile::unit(2);
    assert!(small_ball_theory_constant(ConstantTag::Scenario(ScenarioTag::Df), &k2).is_err());
    assert!(small_ball_theory_constant(ConstantTag::Scenario(ScenarioTag::Af), &KRelayProfile::unit(1)).is_err());
}

#[test]
fn diversity_fractions() {
    assert!((diversity_outage_fraction(1, 0.01).unwrap() - 0.01).abs() < 1e-15);
    assert!((diversity_outage_fraction(2, 0.01).unwrap() - 0.02f64.sqrt()).abs() < 1e-15);
}

#[test]
fn af_row_flagged_outside_regime() {
    let p = FadingProfile::unit();
    let snr = SnrScalar::new(0.01).unwrap();
    let t = received_snrs(&p, snr).unwrap();
    assert!(table1_entry(ScenarioTag::Af, &t, 0.01, snr).unwrap().regime_warning);
    assert!(!table1_entry(ScenarioTag::Af, &t, 0.05, snr).unwrap().regime_warning);
    assert!(!table1_entry(ScenarioTag::Df, &t, 0.001, snr).unwrap().regime_warning);
}
