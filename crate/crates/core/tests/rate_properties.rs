use num_complex::Complex64;
use proptest::prelude::*;
use relaysim_core::channel::{ChannelDraw, SnrScalar};
use relaysim_core::rates::*;

fn snr(v: f64) -> SnrScalar {
    SnrScalar::new(v).unwrap()
}

fn gain() -> impl Strategy<Value = f64> {
    prop_oneof![1e-6f64..1e-2, 1e-2f64..10.0, 10.0f64..100.0]
}

fn draw() -> impl Strategy<Value = ChannelDraw> {
    (gain(), gain(), gain()).prop_map(|(sd, rd, sr)| ChannelDraw::from_powers(sd, rd, sr))
}

fn snr_value() -> impl Strategy<Value = f64> {
    prop_oneof![1e-6f64..1e-3, 1e-3f64..1.0, 1.0f64..100.0]
}

const TOL: f64 = 1e-12;

fn le(a: f64, b: f64) -> bool {
    a <= b + TOL * b.abs().max(1e-300)
}

fn all_rates(d: &ChannelDraw, s: f64, alpha: f64, target: f64) -> Vec<f64> {
    let s = snr(s);
    vec![
        rate_direct(d, s).value(),
        rate_miso(d, s).value(),
        rate_af(d, s).value(),
        rate_df(d, s, Rate::new(target).unwrap()).value(),
        rate_baf(d, s, BafParams::new(alpha).unwrap()).unwrap().value(),
        cutset_fd(d, s).value(),
        cutset_full_csi(d, s, 0.05).unwrap().value(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn rates_nondecreasing_in_snr(d in draw(), s in snr_value(), f in 1.0f64..10.0, alpha in 0.01f64..=1.0, t in 0.0f64..1.0) {
        let lo = all_rates(&d, s, alpha, t);
        let hi = all_rates(&d, s * f, alpha, t);
        for (i, (a, b)) in lo.iter().zip(&hi).enumerate() {
            prop_assert!(le(*a, *b), "rate #{i}: {a} > {b}");
        }
    }

    #[test]
    fn rates_nondecreasing_in_gains(
        sd in gain(), rd in gain(), sr in gain(), which in 0usize..3, f in 1.0f64..10.0,
        s in snr_value(), alpha in 0.01f64..=1.0, t in 0.0f64..1.0,
    ) {
        let mut g = [sd, rd, sr];
        let base = ChannelDraw::from_powers(g[0], g[1], g[2]);
        g[which] *= f;
        let bigger = ChannelDraw::from_powers(g[0], g[1], g[2]);
        let lo = all_rates(&base, s, alpha, t);
        let hi = all_rates(&bigger, s, alpha, t);
        for (i, (a, b)) in lo.iter().zip(&hi).enumerate() {
            prop_assert!(le(*a, *b), "rate #{i}, gain {which}: {a} > {b}");
        }
    }

    #[test]
    fn per_draw_ordering(d in draw(), s in snr_value(), alpha in 0.01f64..=1.0, t in 0.0f64..1.0) {
        let sn = snr(s);
        let direct = rate_direct(&d, sn).value();
        let af = rate_af(&d, sn).value();
        let cut = cutset_fd(&d, sn).value();
        let df = rate_df(&d, sn, Rate::new(t).unwrap()).value();
        let miso = rate_miso(&d, sn).value();
        let baf = rate_baf(&d, sn, BafParams::new(alpha).unwrap()).unwrap().value();
        let full = cutset_full_csi(&d, sn, 0.01).unwrap().value();
        let outer = ((d.sd_power().sqrt() + d.rd_power().sqrt()).powi(2) + d.sr_power()) * s;
        prop_assert!(le(direct, af));
        prop_assert!(le(af, cut));
        prop_assert!(le(df, miso));
        prop_assert!(le(baf, cut));
        prop_assert!(le(cut, full));
        prop_assert!(le(full, outer));
    }

    #[test]
    fn baf_full_duty_cycle_is_af(d in draw(), s in snr_value()) {
        let sn = snr(s);
        let af = rate_af(&d, sn).value();
        let baf = rate_baf(&d, sn, BafParams::new(1.0).unwrap()).unwrap().value();
        prop_assert!((af - baf).abs() <= 1e-12 * af.abs().max(f64::MIN_POSITIVE), "{af} vs {baf}");
    }

    // Every grid is followed by a local search that converges to the same
    // optimum, so refinements can only differ by roundoff.
    #[test]
    fn full_csi_grid_refinement(d in draw(), s in snr_value()) {
        let sn = snr(s);
        let mut prev = 0.0;
        for r in [0.1, 0.05, 0.02, 0.01, 0.005] {
            let v = cutset_full_csi(&d, sn, r).unwrap().value();
            prop_assert!(prev <= v * (1.0 + 1e-9), "resolution {r}: {v} < {prev}");
            prev = v;
        }
    }

    // Unit-order gains: the second-order relay terms scale like g_rd g_sr SNR / g_sd.
    #[test]
    fn small_snr_linearization(
        d in (0.1f64..5.0, 0.1f64..5.0, 0.1f64..5.0).prop_map(|(a, b, c)| ChannelDraw::from_powers(a, b, c)),
        alpha in 0.5f64..=1.0,
    ) {
        let s = 1e-6;
        let sn = snr(s);
        let (sd, rd, sr) = (d.sd_power(), d.rd_power(), d.sr_power());
        let close = |got: f64, want: f64| (got / s - want).abs() <= 1e-3 * want;
        prop_assert!(close(rate_direct(&d, sn).value(), sd));
        prop_assert!(close(rate_miso(&d, sn).value(), sd + rd));
        prop_assert!(close(rate_af(&d, sn).value(), sd));
        prop_assert!(close(rate_baf(&d, sn, BafParams::new(alpha).unwrap()).unwrap().value(), sd));
        prop_assert!((cutset_fd(&d, sn).value() / s - (sd + rd.min(sr))).abs() <= 1e-15 * (sd + rd));
        // target below and above what the relay link supports
        let helps = rate_df(&d, sn, Rate::new(0.5 * sr * s).unwrap()).value();
        let alone = rate_df(&d, sn, Rate::new(2.0 * sr * s).unwrap()).value();
        prop_assert!(close(helps, sd + rd));
        prop_assert!(close(alone, sd));
    }
}

/// `alpha ln det(I + N^-1 H Q H^*)` with explicit complex matrices.
fn baf_beamform_logdet(d: &ChannelDraw, p: f64, alpha: f64, beta: f64, rho: f64) -> f64 {
    let (sd, rd, sr) = (d.sd_power(), d.rd_power(), d.sr_power());
    let c1 = (sd * (1.0 - beta) * rho * rho / (beta * sr * rd)).sqrt();
    let k_sq = p / (sr * beta * p + alpha);
    let k = k_sq.sqrt();
    let h = [
        [d.h_sd(), Complex64::new(0.0, 0.0)],
        [d.h_sr() * d.h_rd() * (c1 + k), d.h_sd()],
    ];
    let q = [beta * p / alpha, (1.0 - rho * rho) * (1.0 - beta) * p / alpha];
    let n = [1.0, rd * k_sq + 1.0];
    // M = I + N^-1 H Q H^*
    let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, ql) in q.iter().enumerate() {
                acc += h[i][l] * *ql * h[j][l].conj();
            }
            m[i][j] = acc / n[i] + if i == j { 1.0 } else { 0.0 };
        }
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    assert!(det.im.abs() < 1e-9 * det.re.abs());
    alpha * det.re.ln()
}

#[test]
fn baf_beamform_matches_explicit_logdet() {
    let cases = [
        (1.0, 1.0, 1.0, 0.01, 0.1, 0.9, 0.5),
        (0.3, 2.0, 0.7, 0.1, 0.5, 0.5, 0.0),
        (2.0, 0.2, 5.0, 1.0, 1.0, 0.2, 1.0),
        (0.01, 3.0, 3.0, 1e-3, 0.03, 0.99, 0.3),
    ];
    for (sd, rd, sr, p, alpha, beta, rho) in cases {
        for phase in [0.0, 0.7, -2.1] {
            let d = ChannelDraw::from_gains(
                Complex64::from_polar(f64::sqrt(sd), phase),
                Complex64::from_polar(f64::sqrt(rd), 0.0),
                Complex64::from_polar(f64::sqrt(sr), 0.0),
            );
            let got = rate_baf_beamform(&d, snr(p), BafParams::new(alpha).unwrap(), FullCsiParams::new(beta, rho).unwrap())
                .unwrap()
                .value();
            let want = baf_beamform_logdet(&d, p, alpha, beta, rho);
            assert!((got - want).abs() <= 1e-12 * want.abs(), "{got} vs {want}");
        }
    }
}

#[test]
fn baf_beamform_without_beamforming_is_baf_shape() {
    // rho = 0, beta = 1: the source sends only the amplified stream.
    let d = ChannelDraw::from_powers(0.8, 1.3, 0.4);
    let (p, alpha) = (0.02, 0.2);
    let got = rate_baf_beamform(&d, snr(p), BafParams::new(alpha).unwrap(), FullCsiParams::new(1.0, 0.0).unwrap())
        .unwrap()
        .value();
    let want = baf_beamform_logdet(&d, p, alpha, 1.0, 0.0);
    assert!((got - want).abs() < 1e-14);
}
