//! Rayleigh block-fading model of the frequency-division relay channel.
//!
//! Three links: source to destination (`sd`), relay to destination (`rd`)
//! and source to relay (`sr`). Each path gain is a circularly-symmetric
//! complex Gaussian fixed for the whole codeword; its squared magnitude is
//! exponential with mean equal to the link variance. Noise variance is
//! normalized to one everywhere, so the transmit SNR equals the power `P`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{config_err, Result};
use crate::rng::{SeedSpec, TrialRng};

fn check_variance(name: &str, g: f64) -> Result<()> {
    if g.is_finite() && g > 0.0 {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be positive and finite, got {g}")))
    }
}

/// Variances of the three Rayleigh links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingProfile {
    pub g_sd: f64,
    pub g_rd: f64,
    pub g_sr: f64,
}

impl FadingProfile {
    pub fn new(g_sd: f64, g_rd: f64, g_sr: f64) -> Result<Self> {
        let p = Self { g_sd, g_rd, g_sr };
        p.validate()?;
        Ok(p)
    }

    /// All three variances equal to one.
    pub fn unit() -> Self {
        Self {
            g_sd: 1.0,
            g_rd: 1.0,
            g_sr: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_variance("g_sd", self.g_sd)?;
        check_variance("g_rd", self.g_rd)?;
        check_variance("g_sr", self.g_sr)
    }
}

/// Linear transmit SNR per complex degree of freedom (unit noise, so P = SNR).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SnrScalar(f64);

impl SnrScalar {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(config_err(format!("SNR must be positive and finite, got {value}")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for SnrScalar {
    type Error = crate::Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SnrScalar> for f64 {
    fn from(s: SnrScalar) -> f64 {
        s.0
    }
}

/// Average received SNR on each link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceivedSnrTriple {
    pub snr_sd: f64,
    pub snr_rd: f64,
    pub snr_sr: f64,
}

impl ReceivedSnrTriple {
    pub fn new(snr_sd: f64, snr_rd: f64, snr_sr: f64) -> Result<Self> {
        for (name, v) in [("snr_sd", snr_sd), ("snr_rd", snr_rd), ("snr_sr", snr_sr)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(config_err(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            snr_sd,
            snr_rd,
            snr_sr,
        })
    }
}

/// `snr_xy = g_xy * SNR`, with the relay-to-destination SNR paired with `g_rd`.
pub fn received_snrs(profile: &FadingProfile, snr: SnrScalar) -> Result<ReceivedSnrTriple> {
    profile.validate()?;
    let s = snr.value();
    ReceivedSnrTriple::new(profile.g_sd * s, profile.g_rd * s, profile.g_sr * s)
}

/// A complex path gain held in polar form.
///
/// The squared magnitude is kept exactly as sampled so that rate formulas,
/// which only need `|h|^2`, never pay for trigonometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGain {
    power: f64,
    phase: f64,
}

impl PathGain {
    pub const ZERO: PathGain = PathGain {
        power: 0.0,
        phase: 0.0,
    };

    pub fn from_complex(h: Complex64) -> Self {
        Self {
            power: h.norm_sqr(),
            phase: h.arg(),
        }
    }

    /// Real, non-negative gain with the given squared magnitude.
    pub fn from_power(power: f64) -> Self {
        Self { power, phase: 0.0 }
    }

    #[inline]
    pub(crate) fn sample(rng: &mut TrialRng, variance: f64) -> Self {
        let power = variance * rng.exp1();
        let phase = TAU * rng.open01();
        Self { power, phase }
    }

    /// `|h|^2`
    #[inline]
    pub fn power(&self) -> f64 {
        self.power
    }

    #[inline]
    pub fn magnitude(&self) -> f64 {
        self.power.sqrt()
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn complex(&self) -> Complex64 {
        Complex64::from_polar(self.power.sqrt(), self.phase)
    }
}

/// One realization of the three path gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDraw {
    pub sd: PathGain,
    pub rd: PathGain,
    pub sr: PathGain,
}

impl ChannelDraw {
    pub fn from_gains(h_sd: Complex64, h_rd: Complex64, h_sr: Complex64) -> Self {
        Self {
            sd: PathGain::from_complex(h_sd),
            rd: PathGain::from_complex(h_rd),
            sr: PathGain::from_complex(h_sr),
        }
    }

    /// Real gains with prescribed squared magnitudes `(|h_sd|^2, |h_rd|^2, |h_sr|^2)`.
    pub fn from_powers(sd: f64, rd: f64, sr: f64) -> Self {
        Self {
            sd: PathGain::from_power(sd),
            rd: PathGain::from_power(rd),
            sr: PathGain::from_power(sr),
        }
    }

    pub fn h_sd(&self) -> Complex64 {
        self.sd.complex()
    }
    pub fn h_rd(&self) -> Complex64 {
        self.rd.complex()
    }
    pub fn h_sr(&self) -> Complex64 {
        self.sr.complex()
    }

    #[inline]
    pub fn sd_power(&self) -> f64 {
        self.sd.power
    }
    #[inline]
    pub fn rd_power(&self) -> f64 {
        self.rd.power
    }
    #[inline]
    pub fn sr_power(&self) -> f64 {
        self.sr.power
    }

    #[inline]
    pub(crate) fn sample_with(profile: &FadingProfile, rng: &mut TrialRng) -> Self {
        let sd = PathGain::sample(rng, profile.g_sd);
        let rd = PathGain::sample(rng, profile.g_rd);
        let sr = PathGain::sample(rng, profile.g_sr);
        Self { sd, rd, sr }
    }
}

/// Draws one channel realization. Pure in `(profile, seed)`.
pub fn sample_draw(profile: &FadingProfile, seed: SeedSpec) -> Result<ChannelDraw> {
    profile.validate()?;
    let mut rng = TrialRng::new(seed);
    Ok(ChannelDraw::sample_with(profile, &mut rng))
}

/// Per-relay variances `(g_sr_i, g_rd_i)` of a parallel k-relay network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KRelayProfile {
    pub g_sd: f64,
    /// `(g_sr_i, g_rd_i)` for each relay.
    pub relays: Vec<(f64, f64)>,
}

impl KRelayProfile {
    pub fn new(g_sd: f64, relays: Vec<(f64, f64)>) -> Result<Self> {
        let p = Self { g_sd, relays };
        p.validate()?;
        Ok(p)
    }

    /// `k` relays, every variance one.
    pub fn unit(k: usize) -> Self {
        Self {
            g_sd: 1.0,
            relays: vec![(1.0, 1.0); k],
        }
    }

    pub fn k(&self) -> usize {
        self.relays.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.relays.is_empty() {
            return Err(config_err("a k-relay profile needs at least one relay"));
        }
        check_variance("g_sd", self.g_sd)?;
        for (i, &(sr, rd)) in self.relays.iter().enumerate() {
            check_variance(&format!("g_sr[{i}]"), sr)?;
            check_variance(&format!("g_rd[{i}]"), rd)?;
        }
        Ok(())
    }
}

impl From<&FadingProfile> for KRelayProfile {
    fn from(p: &FadingProfile) -> Self {
        Self {
            g_sd: p.g_sd,
            relays: vec![(p.g_sr, p.g_rd)],
        }
    }
}

/// One realization of a k-relay network.
#[derive(Debug, Clone, PartialEq)]
pub struct KRelayDraw {
    pub sd: PathGain,
    /// `(h_sr_i, h_rd_i)` for each relay.
    pub relays: Vec<(PathGain, PathGain)>,
}

impl KRelayDraw {
    pub fn from_powers(sd: f64, relays: &[(f64, f64)]) -> Result<Self> {
        if relays.is_empty() {
            return Err(config_err("a k-relay draw needs at least one relay"));
        }
        Ok(Self {
            sd: PathGain::from_power(sd),
            relays: relays
                .iter()
                .map(|&(sr, rd)| (PathGain::from_power(sr), PathGain::from_power(rd)))
                .collect(),
        })
    }

    pub fn k(&self) -> usize {
        self.relays.len()
    }
}

impl From<&ChannelDraw> for KRelayDraw {
    fn from(d: &ChannelDraw) -> Self {
        Self {
            sd: d.sd,
            relays: vec![(d.sr, d.rd)],
        }
    }
}

/// Draws a k-relay realization; variates are consumed as `sd`, then
/// `(sr_i, rd_i)` relay by relay.
pub fn sample_k_relay_draw(profile: &KRelayProfile, seed: SeedSpec) -> Result<KRelayDraw> {
    profile.validate()?;
    let mut rng = TrialRng::new(seed);
    let sd = PathGain::sample(&mut rng, profile.g_sd);
    let relays = profile
        .relays
        .iter()
        .map(|&(g_sr, g_rd)| {
            let sr = PathGain::sample(&mut rng, g_sr);
            let rd = PathGain::sample(&mut rng, g_rd);
            (sr, rd)
        })
        .collect();
    Ok(KRelayDraw { sd, relays })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn received_snrs_scale_componentwise() {
        let t = received_snrs(&FadingProfile::unit(), SnrScalar::new(0.01).unwrap()).unwrap();
        assert_eq!((t.snr_sd, t.snr_rd, t.snr_sr), (0.01, 0.01, 0.01));
        let p = FadingProfile::new(1.0, 4.0, 2.0).unwrap();
        let t = received_snrs(&p, SnrScalar::new(0.01).unwrap()).unwrap();
        assert!((t.snr_sd - 0.01).abs() < 1e-15);
        assert!((t.snr_rd - 0.04).abs() < 1e-15);
        assert!((t.snr_sr - 0.02).abs() < 1e-15);
    }

    #[test]
    fn zero_snr_rejected() {
        assert!(SnrScalar::new(0.0).is_err());
        assert!(SnrScalar::new(-1.0).is_err());
        assert!(SnrScalar::new(f64::NAN).is_err());
    }

    #[test]
    fn bad_variance_rejected() {
        assert!(FadingProfile::new(0.0, 1.0, 1.0).is_err());
        assert!(FadingProfile::new(1.0, -1.0, 1.0).is_err());
        assert!(FadingProfile::new(1.0, 1.0, f64::INFINITY).is_err());
        let bad = FadingProfile {
            g_sd: 1.0,
            g_rd: 0.0,
            g_sr: 1.0,
        };
        assert!(sample_draw(&bad, SeedSpec::new(0, 0, 0)).is_err());
        assert!(KRelayProfile::new(1.0, vec![]).is_err());
    }

    #[test]
    fn same_seed_same_draw() {
        let s = SeedSpec::new(0xDEAD_BEEF, 2, 99);
        let a = sample_draw(&FadingProfile::unit(), s).unwrap();
        let b = sample_draw(&FadingProfile::unit(), s).unwrap();
        assert_eq!(a, b);
        let c = sample_draw(&FadingProfile::unit(), s.with_trial(100)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn polar_and_complex_agree() {
        let d = sample_draw(&FadingProfile::new(1.0, 4.0, 2.0).unwrap(), SeedSpec::new(3, 0, 5))
            .unwrap();
        for g in [d.sd, d.rd, d.sr] {
            let h = g.complex();
            assert!((h.norm_sqr() - g.power()).abs() <= 1e-12 * g.power().max(1e-300));
        }
        let back = ChannelDraw::from_gains(d.h_sd(), d.h_rd(), d.h_sr());
        assert!((back.sd_power() - d.sd_power()).abs() < 1e-12);
    }

    #[test]
    fn single_relay_k_profile_matches_draw_layout() {
        let p = FadingProfile::new(1.0, 2.0, 3.0).unwrap();
        let kp = KRelayProfile::from(&p);
        let s = SeedSpec::new(1, 1, 1);
        let k = sample_k_relay_draw(&kp, s).unwrap();
        assert_eq!(k.k(), 1);
        assert!(k.sd.power() > 0.0);
    }
}
