//! Experiment configuration: one JSON document per run.

use std::fmt;
use std::path::PathBuf;

use relaysim_core::channel::{FadingProfile, KRelayProfile, SnrScalar};
use relaysim_core::outage::ProtocolSpec;
use relaysim_core::ppm::PpmScheme;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ExperimentKind {
    OutageCurve,
    EpsilonRate,
    SmallBall,
    Table1,
    Ppm,
    Lemmas,
    PowerSplit,
    FullCsi,
    KRelay,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::OutageCurve => "outage_curve",
            ExperimentKind::EpsilonRate => "epsilon_rate",
            ExperimentKind::SmallBall => "small_ball",
            ExperimentKind::Table1 => "table1",
            ExperimentKind::Ppm => "ppm",
            ExperimentKind::Lemmas => "lemmas",
            ExperimentKind::PowerSplit => "power_split",
            ExperimentKind::FullCsi => "full_csi",
            ExperimentKind::KRelay => "k_relay",
        }
    }

    fn default_trials(self) -> Option<u64> {
        match self {
            ExperimentKind::OutageCurve | ExperimentKind::EpsilonRate | ExperimentKind::FullCsi => Some(1_000_000),
            ExperimentKind::SmallBall | ExperimentKind::KRelay => Some(10_000_000),
            ExperimentKind::Ppm => Some(10_000),
            ExperimentKind::Lemmas => Some(0),
            ExperimentKind::Table1 | ExperimentKind::PowerSplit => None,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Squared gains of one fixed channel realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrawPowers {
    pub sd: f64,
    pub rd: f64,
    pub sr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpmSection {
    pub alphabet_size: usize,
    pub half_block: usize,
    pub power: f64,
    /// Fixed threshold; chosen per draw from the feasibility margin when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub draws: Vec<DrawPowers>,
}

impl PpmSection {
    pub fn scheme(&self) -> PpmScheme {
        PpmScheme {
            alphabet_size: self.alphabet_size,
            half_block: self.half_block,
            power: self.power,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpSumPoint {
    pub means: Vec<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailPoint {
    pub mu_u: f64,
    pub mu_v: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicPoint {
    pub mu_v: f64,
    pub mu_w: f64,
    pub delta: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct A3Point {
    pub mu_u: f64,
    pub mu_v: f64,
    pub mu_w: f64,
    pub eps: f64,
    pub g: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaBattery {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exp_sum: Vec<ExpSumPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exp_sum_tail: Vec<TailPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub harmonic: Vec<HarmonicPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lemma_a3: Vec<A3Point>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bessel_k1: Vec<f64>,
}

/// Written into run manifests; ignored on input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildInfo {
    pub program: String,
    pub version: String,
}

impl BuildInfo {
    pub fn current() -> Self {
        Self {
            program: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profiles: Vec<FadingProfile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k_relay_profiles: Vec<KRelayProfile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snrs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epsilons: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub protocols: Vec<ProtocolSpec>,
    /// Target rates as multiples of the SNR.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub normalized_rates: Vec<f64>,
    /// Small-ball thresholds `t`, strictly decreasing.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub thresholds: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_d: Option<u32>,
    /// Bisection stopping width, relative to the rate scale `SNR`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ppm: Option<PpmSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemmas: Option<LemmaBattery>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build: Option<BuildInfo>,
}

/// A configuration problem, located in the source text when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parses a config document. Syntax and type errors carry serde's position.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| {
        let full = e.to_string();
        let suffix = format!(" at line {} column {}", e.line(), e.column());
        ConfigError {
            line: Some(e.line()),
            message: full.strip_suffix(&suffix).unwrap_or(&full).to_owned(),
        }
    })
}

/// 1-based line of the `nth` occurrence of the key `"key"`, if present.
pub fn line_of_key(text: &str, key: &str, nth: usize) -> Option<usize> {
    let pat = format!("\"{key}\"");
    let mut from = 0;
    let mut pos = None;
    for _ in 0..=nth {
        let p = from + text[from..].find(&pat)?;
        pos = Some(p);
        from = p + pat.len();
    }
    pos.map(|p| text[..p].matches('\n').count() + 1)
}

/// A validation failure, pointing at a key (and occurrence) in the source.
struct Issue {
    key: &'static str,
    nth: usize,
    message: String,
}

fn issue(key: &'static str, message: impl Into<String>) -> Issue {
    Issue {
        key,
        nth: 0,
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn kind_uses_trials(&self) -> bool {
        self.kind.default_trials().is_some()
    }

    /// Trial count after defaults.
    pub fn trials_or_default(&self) -> u64 {
        self.trials.or(self.kind.default_trials()).unwrap_or(0)
    }

    /// Range and presence checks. `text` is the source document, used only
    /// to locate the offending key.
    pub fn validate(&self, text: &str) -> Result<(), ConfigError> {
        self.check().map_err(|i| ConfigError {
            line: line_of_key(text, i.key, i.nth),
            message: i.message,
        })
    }

    fn check(&self) -> Result<(), Issue> {
        use ExperimentKind as K;
        let k = self.kind;
        let allowed: &[&str] = match k {
            K::OutageCurve => &["profiles", "k_relay_profiles", "snrs", "protocols", "normalized_rates", "trials"],
            K::EpsilonRate => &["profiles", "k_relay_profiles", "snrs", "epsilons", "protocols", "trials", "rate_tolerance"],
            K::SmallBall => &["profiles", "k_relay_profiles", "snrs", "protocols", "thresholds", "order_d", "trials"],
            K::Table1 => &["profiles", "snrs", "epsilons"],
            K::Ppm => &["ppm", "trials"],
            K::Lemmas => &["lemmas", "trials"],
            K::PowerSplit => &["profiles"],
            K::FullCsi => &["profiles", "snrs", "epsilons", "trials"],
            K::KRelay => &["k_relay_profiles", "snrs", "thresholds", "epsilons", "trials", "rate_tolerance"],
        };
        let present: [(&'static str, bool); 13] = [
            ("profiles", !self.profiles.is_empty()),
            ("k_relay_profiles", !self.k_relay_profiles.is_empty()),
            ("snrs", !self.snrs.is_empty()),
            ("epsilons", !self.epsilons.is_empty()),
            ("protocols", !self.protocols.is_empty()),
            ("normalized_rates", !self.normalized_rates.is_empty()),
            ("thresholds", !self.thresholds.is_empty()),
            ("order_d", self.order_d.is_some()),
            ("rate_tolerance", self.rate_tolerance.is_some()),
            ("ppm", self.ppm.is_some()),
            ("lemmas", self.lemmas.is_some()),
            ("trials", self.trials.is_some()),
            ("output", false),
        ];
        for (name, is_set) in present {
            if is_set && !allowed.contains(&name) {
                return Err(issue(name, format!("\"{name}\" is not used by a {k} experiment")));
            }
        }
        let require = |name: &'static str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(issue("kind", format!("a {k} experiment needs a non-empty \"{name}\"")))
            }
        };

        if let Some(n) = self.trials {
            if n == 0 && k != K::Lemmas {
                return Err(issue("trials", "trials must be at least 1"));
            }
        }
        for (i, p) in self.profiles.iter().enumerate() {
            p.validate().map_err(|e| Issue {
                key: "g_sd",
                nth: i,
                message: format!("profiles[{i}]: {e}"),
            })?;
        }
        for (i, p) in self.k_relay_profiles.iter().enumerate() {
            p.validate().map_err(|e| Issue {
                key: "relays",
                nth: i,
                message: format!("k_relay_profiles[{i}]: {e}"),
            })?;
        }
        for (i, &s) in self.snrs.iter().enumerate() {
            SnrScalar::new(s).map_err(|e| issue("snrs", format!("snrs[{i}]: {e}")))?;
        }
        for (i, p) in self.protocols.iter().enumerate() {
            p.validate().map_err(|e| Issue {
                key: "protocol",
                nth: i,
                message: format!("protocols[{i}] ({}): {e}", p.name()),
            })?;
        }
        for (i, &e) in self.epsilons.iter().enumerate() {
            let ok = match k {
                K::Table1 => e > 0.0 && e <= relaysim_core::asymptotics::MAX_EPSILON,
                _ => e > 0.0 && e < 1.0,
            };
            if !ok {
                return Err(issue("epsilons", format!("epsilons[{i}] = {e} is out of range")));
            }
        }
        if let Some(t) = self.rate_tolerance {
            if !(t > 0.0 && t < 1.0) {
                return Err(issue("rate_tolerance", format!("rate_tolerance must lie in (0, 1), got {t}")));
            }
        }
        if self.thresholds.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(issue("thresholds", "thresholds must be positive"));
        }
        if self.thresholds.windows(2).any(|w| w[1] >= w[0]) {
            return Err(issue("thresholds", "thresholds must be strictly decreasing"));
        }
        if self.normalized_rates.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
            return Err(issue("normalized_rates", "normalized rates must be non-negative"));
        }
        if self.order_d == Some(0) {
            return Err(issue("order_d", "order_d must be at least 1"));
        }

        match k {
            K::OutageCurve | K::EpsilonRate | K::SmallBall => {
                require("protocols", !self.protocols.is_empty())?;
                require("snrs", !self.snrs.is_empty())?;
                require("profiles", !self.profiles.is_empty() || !self.k_relay_profiles.is_empty())?;
                if k == K::OutageCurve {
                    require("normalized_rates", !self.normalized_rates.is_empty())?;
                }
                if k == K::EpsilonRate {
                    require("epsilons", !self.epsilons.is_empty())?;
                }
                if k == K::SmallBall {
                    require("thresholds", !self.thresholds.is_empty())?;
                }
                for (i, p) in self.protocols.iter().enumerate() {
                    let paired = match p {
                        ProtocolSpec::CutsetKRelay { k } => self.k_relay_profiles.iter().any(|q| q.k() == *k),
                        _ => !self.profiles.is_empty(),
                    };
                    if !paired {
                        return Err(Issue {
                            key: "protocol",
                            nth: i,
                            message: format!("protocols[{i}] ({}) has no compatible profile", p.name()),
                        });
                    }
                }
            }
            K::Table1 | K::FullCsi => {
                require("profiles", !self.profiles.is_empty())?;
                require("snrs", !self.snrs.is_empty())?;
                require("epsilons", !self.epsilons.is_empty())?;
            }
            K::PowerSplit => require("profiles", !self.profiles.is_empty())?,
            K::KRelay => {
                require("k_relay_profiles", !self.k_relay_profiles.is_empty())?;
                require("snrs", !self.snrs.is_empty())?;
                require("thresholds", !self.thresholds.is_empty())?;
            }
            K::Ppm => {
                let Some(p) = &self.ppm else {
                    return Err(issue("kind", "a ppm experiment needs a \"ppm\" section"));
                };
                p.scheme().validate().map_err(|e| issue("ppm", e.to_string()))?;
                if let Some(t) = p.tau {
                    if !(t > 0.0 && t.is_finite()) {
                        return Err(issue("tau", format!("tau must be positive, got {t}")));
                    }
                }
                if p.draws.is_empty() {
                    return Err(issue("ppm", "the ppm section needs at least one draw"));
                }
                for (i, d) in p.draws.iter().enumerate() {
                    if [d.sd, d.rd, d.sr].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                        return Err(Issue {
                            key: "sd",
                            nth: i,
                            message: format!("draws[{i}]: squared gains must be non-negative"),
                        });
                    }
                }
            }
            K::Lemmas => {
                let Some(b) = &self.lemmas else {
                    return Err(issue("kind", "a lemmas experiment needs a \"lemmas\" section"));
                };
                check_lemmas(b)?;
            }
        }

        // enough expected outages for the quantile searches
        if matches!(k, K::EpsilonRate | K::FullCsi | K::KRelay) {
            let n = self.trials_or_default() as f64;
            for &e in &self.epsilons {
                if e * n < 100.0 {
                    return Err(issue(
                        "epsilons",
                        format!("epsilon {e} with {n} trials expects fewer than 100 outages"),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn check_lemmas(b: &LemmaBattery) -> Result<(), Issue> {
    let pos = |v: f64| v > 0.0 && v.is_finite();
    let nonneg = |v: f64| v >= 0.0 && v.is_finite();
    for (i, p) in b.exp_sum.iter().enumerate() {
        if p.means.is_empty() || !p.means.iter().all(|&m| pos(m)) || !pos(p.t) {
            return Err(issue("exp_sum", format!("exp_sum[{i}]: means and t must be positive")));
        }
    }
    for (i, p) in b.exp_sum_tail.iter().enumerate() {
        if !(pos(p.mu_u) && pos(p.mu_v) && nonneg(p.tau)) {
            return Err(issue("exp_sum_tail", format!("exp_sum_tail[{i}]: invalid parameters")));
        }
    }
    for (i, p) in b.harmonic.iter().enumerate() {
        if !(pos(p.mu_v) && pos(p.mu_w) && nonneg(p.delta) && pos(p.h)) {
            return Err(issue("harmonic", format!("harmonic[{i}]: invalid parameters")));
        }
    }
    for (i, p) in b.lemma_a3.iter().enumerate() {
        if !(pos(p.mu_u) && pos(p.mu_v) && pos(p.mu_w) && nonneg(p.eps) && pos(p.g)) {
            return Err(issue("lemma_a3", format!("lemma_a3[{i}]: invalid parameters")));
        }
    }
    if b.bessel_k1.iter().any(|&x| !pos(x)) {
        return Err(issue("bessel_k1", "bessel_k1 arguments must be positive"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn syntax_errors_carry_lines() {
        let text = "{\n  \"kind\": \"table1\",\n  \"master_seed\": 1,\n  \"bogus\": 3\n}";
        let e = parse_config(text).unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(e.message.contains("bogus"), "{}", e.message);
    }

    #[test]
    fn validation_points_at_key() {
        let text = r#"{
  "kind": "small_ball",
  "master_seed": 1,
  "profiles": [{"g_sd": 1, "g_rd": 1, "g_sr": 1}],
  "snrs": [0.01],
  "thresholds": [0.02, 0.01],
  "protocols": [
    {"protocol": "cutset_fd"},
    {"protocol": "baf", "alpha": 1.5}
  ]
}"#;
        let cfg = parse_config(text).unwrap();
        let e = cfg.validate(text).unwrap_err();
        assert_eq!(e.line, Some(9), "{e}");
        assert!(e.to_string().starts_with("line 9: protocols[1] (baf)"), "{e}");
    }

    #[test]
    fn unused_fields_rejected() {
        let text = r#"{"kind": "power_split", "master_seed": 1,
 "profiles": [{"g_sd": 1, "g_rd": 1, "g_sr": 1}],
 "snrs": [0.01]}"#;
        let e = parse_config(text).unwrap().validate(text).unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn key_lines() {
        let t = "{\n\"a\": 1,\n\"b\": {\"a\": 2}\n}";
        assert_eq!(line_of_key(t, "a", 0), Some(2));
        assert_eq!(line_of_key(t, "a", 1), Some(3));
        assert_eq!(line_of_key(t, "a", 2), None);
    }
}
