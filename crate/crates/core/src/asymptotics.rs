//! Closed-form low-SNR, low-outage approximations.

use serde::{Deserialize, Serialize};

use crate::channel::{FadingProfile, KRelayProfile, ReceivedSnrTriple, SnrScalar};
use crate::error::{config_err, Error, Result};
use crate::rates::Rate;

/// Upper end of the outage range where the leading-order formulas are used.
pub const MAX_EPSILON: f64 = 0.1;

/// Rows of the approximate outage-rate table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioTag {
    NonCooperative,
    Af,
    Df,
    Baf,
    CutsetUpper,
    OutageCapacity,
    PerUnitEnergy,
}

impl ScenarioTag {
    /// Rows that carry a rate, in table order.
    pub const RATE_ROWS: [ScenarioTag; 6] = [
        ScenarioTag::NonCooperative,
        ScenarioTag::Af,
        ScenarioTag::Df,
        ScenarioTag::Baf,
        ScenarioTag::CutsetUpper,
        ScenarioTag::OutageCapacity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioTag::NonCooperative => "non_cooperative",
            ScenarioTag::Af => "af",
            ScenarioTag::Df => "df",
            ScenarioTag::Baf => "baf",
            ScenarioTag::CutsetUpper => "cutset_upper",
            ScenarioTag::OutageCapacity => "outage_capacity",
            ScenarioTag::PerUnitEnergy => "per_unit_energy",
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if (0.0..=MAX_EPSILON).contains(&epsilon) {
        Ok(())
    } else {
        Err(config_err(format!(
            "epsilon must lie in (0, {MAX_EPSILON}], got {epsilon}"
        )))
    }
}

/// Table row value for `tag`.
pub fn table1_rate(tag: ScenarioTag, snrs: &ReceivedSnrTriple, epsilon: f64) -> Result<Rate> {
    check_epsilon(epsilon)?;
    let (sd, rd, sr) = (snrs.snr_sd, snrs.snr_rd, snrs.snr_sr);
    let v = match tag {
        ScenarioTag::NonCooperative | ScenarioTag::Af => epsilon * sd,
        ScenarioTag::Df => (2.0 * sd * rd * sr / (2.0 * rd + sr) * epsilon).sqrt(),
        ScenarioTag::Baf | ScenarioTag::CutsetUpper | ScenarioTag::OutageCapacity => {
            (2.0 * sd * rd * sr / (rd + sr) * epsilon).sqrt()
        }
        ScenarioTag::PerUnitEnergy => {
            return Err(Error::Domain(
                "per-unit-energy row is not a rate; use capacity_per_unit_energy".into(),
            ))
        }
    };
    // 0/0 when both relay links are silent
    Ok(Rate::from_raw(if v.is_nan() { 0.0 } else { v }))
}

/// A table row together with a flag for rows used outside their regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table1Entry {
    pub tag: ScenarioTag,
    pub rate: Rate,
    /// Set for the AF row when `epsilon <= SNR`; that row only holds for `epsilon > SNR`.
    pub regime_warning: bool,
}

pub fn table1_entry(
    tag: ScenarioTag,
    snrs: &ReceivedSnrTriple,
    epsilon: f64,
    snr: SnrScalar,
) -> Result<Table1Entry> {
    Ok(Table1Entry {
        tag,
        rate: table1_rate(tag, snrs, epsilon)?,
        regime_warning: tag == ScenarioTag::Af && epsilon <= snr.value(),
    })
}

/// Outage capacity per unit energy, in nats per unit energy.
pub fn capacity_per_unit_energy(profile: &FadingProfile, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    profile.validate()?;
    let FadingProfile { g_sd, g_rd, g_sr } = *profile;
    Ok((2.0 * g_sd * g_rd * g_sr / (g_rd + g_sr) * epsilon).sqrt())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Fraction of the AWGN capacity kept by `L`-branch receive diversity at outage `epsilon`.
pub fn diversity_outage_fraction(l: usize, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if l == 0 {
        return Err(config_err("diversity order must be at least one"));
    }
    Ok((factorial(l) * epsilon).powf(1.0 / l as f64))
}

/// High-SNR outage of `L`-branch receive diversity, `(e^R - 1)^L / (L! SNR^L)`.
pub fn highsnr_diversity_outage(l: usize, rate: Rate, snr: SnrScalar) -> Result<f64> {
    if l == 0 {
        return Err(config_err("diversity order must be at least one"));
    }
    let li = l as i32;
    Ok(rate.value().exp_m1().powi(li) / (factorial(l) * snr.value().powi(li)))
}

/// Low-SNR epsilon-outage capacity of the network with `k` parallel relays.
pub fn k_relay_capacity(profile: &KRelayProfile, epsilon: f64, snr: SnrScalar) -> Result<Rate> {
    check_epsilon(epsilon)?;
    profile.validate()?;
    let n = profile.k() + 1;
    let c = 1.0 / k_relay_constant(profile);
    let e = 1.0 / n as f64;
    Ok(Rate::from_raw(c.powf(e) * epsilon.powf(e) * snr.value()))
}

fn k_relay_constant(profile: &KRelayProfile) -> f64 {
    let n = profile.k() + 1;
    let (num, den) = profile
        .relays
        .iter()
        .fold((1.0, profile.g_sd * factorial(n)), |(num, den), &(g_sr, g_rd)| {
            (num * (g_sr + g_rd), den * g_sr * g_rd)
        });
    num / den
}

/// What a theoretical small-ball constant is requested for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantTag {
    Scenario(ScenarioTag),
    Miso,
    KRelay,
}

/// Limit of `P_out / (R/SNR)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstant {
    pub value: f64,
    pub d: u32,
}

/// Analytic small-ball constant. Single-relay tags need a one-relay profile.
pub fn small_ball_theory_constant(tag: ConstantTag, profile: &KRelayProfile) -> Result<TheoryConstant> {
    profile.validate()?;
    if tag == ConstantTag::KRelay {
        return Ok(TheoryConstant {
            value: k_relay_constant(profile),
            d: profile.k() as u32 + 1,
        });
    }
    if profile.k() != 1 {
        return Err(config_err(format!(
            "{tag:?} needs a single-relay profile, got {} relays",
            profile.k()
        )));
    }
    let g_sd = profile.g_sd;
    let (g_sr, g_rd) = profile.relays[0];
    let value = match tag {
        ConstantTag::Scenario(
            ScenarioTag::Baf | ScenarioTag::CutsetUpper | ScenarioTag::OutageCapacity,
        ) => (g_rd + g_sr) / (2.0 * g_sd * g_rd * g_sr),
        ConstantTag::Scenario(ScenarioTag::Df) => (2.0 * g_rd + g_sr) / (2.0 * g_sd * g_rd * g_sr),
        ConstantTag::Miso => 1.0 / (2.0 * g_sd * g_rd),
        ConstantTag::Scenario(ScenarioTag::Af) => {
            return Err(Error::Domain(
                "the AF small-ball constant diverges as SNR -> 0".into(),
            ))
        }
        ConstantTag::Scenario(other) => {
            return Err(Error::Domain(format!(
                "no second-order small-ball constant for {}",
                other.name()
            )))
        }
        ConstantTag::KRelay => unreachable!(),
    };
    Ok(TheoryConstant { value, d: 2 })
}
