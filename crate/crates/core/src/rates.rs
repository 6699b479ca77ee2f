//! Per-realization achievable rates and cutset bounds.
//!
//! Everything is in nats per complex degree of freedom with unit noise
//! variance. Each public function has a `*_from_powers` twin working on the
//! squared gain magnitudes directly; the outage engine calls those in its
//! inner loop.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelDraw, KRelayDraw, SnrScalar};
use crate::error::{config_err, Result};

/// Default step of the full-CSI cutset maximization.
pub const DEFAULT_GRID_RESOLUTION: f64 = 0.01;

/// Non-negative rate in nats per degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Rate(f64);

impl Rate {
    pub const ZERO: Rate = Rate(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(config_err(format!("rate must be finite and non-negative, got {value}")))
        }
    }

    /// Internal constructor for values that are non-negative by construction.
    #[inline]
    pub(crate) fn from_raw(value: f64) -> Self {
        debug_assert!(value >= 0.0 || value.is_nan(), "negative rate {value}");
        Self(value.max(0.0))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Rate {
    type Error = crate::Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Rate> for f64 {
    fn from(r: Rate) -> f64 {
        r.0
    }
}

/// Burstiness of the source: it transmits a fraction `alpha` of the time at power `P/alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BafParams {
    pub alpha: f64,
}

impl BafParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
            Ok(Self { alpha })
        } else {
            Err(config_err(format!("alpha must lie in (0, 1], got {alpha}")))
        }
    }
}

/// Power split `beta` between the two source components and the
/// beamforming correlation `rho` between the source's second-band signal
/// and the relay signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullCsiParams {
    pub beta: f64,
    pub rho: f64,
}

impl FullCsiParams {
    pub fn new(beta: f64, rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(config_err(format!("beta must lie in [0, 1], got {beta}")));
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(config_err(format!("rho must lie in [-1, 1], got {rho}")));
        }
        Ok(Self { beta, rho })
    }
}

#[inline]
pub(crate) fn direct_from_powers(sd: f64, snr: f64) -> f64 {
    (sd * snr).ln_1p()
}

pub fn rate_direct(draw: &ChannelDraw, snr: SnrScalar) -> Rate {
    Rate::from_raw(direct_from_powers(draw.sd_power(), snr.value()))
}

/// `ln(1 + ||h||^2 SNR)` for L receive antennas.
pub fn rate_receive_diversity(gains: &[Complex64], snr: SnrScalar) -> Result<Rate> {
    if gains.is_empty() {
        return Err(config_err("receive diversity needs at least one antenna"));
    }
    let total: f64 = gains.iter().map(|h| h.norm_sqr()).sum();
    Ok(Rate::from_raw((total * snr.value()).ln_1p()))
}

#[inline]
pub(crate) fn miso_from_powers(sd: f64, rd: f64, snr: f64) -> f64 {
    ((sd + rd) * snr).ln_1p()
}

pub fn rate_miso(draw: &ChannelDraw, snr: SnrScalar) -> Rate {
    Rate::from_raw(miso_from_powers(draw.sd_power(), draw.rd_power(), snr.value()))
}

#[inline]
pub(crate) fn af_from_powers(sd: f64, rd: f64, sr: f64, snr: f64) -> f64 {
    let relay = rd * sr * snr / (rd * snr + sr * snr + 1.0);
    (snr * (sd + relay)).ln_1p()
}

pub fn rate_af(draw: &ChannelDraw, snr: SnrScalar) -> Rate {
    Rate::from_raw(af_from_powers(
        draw.sd_power(),
        draw.rd_power(),
        draw.sr_power(),
        snr.value(),
    ))
}

/// Whether the relay decodes a rate-`target` codeword: `|h_sr|^2 SNR >= e^R - 1`.
#[inline]
pub(crate) fn df_relay_decodes(sr: f64, snr: f64, target: f64) -> bool {
    sr * snr >= target.exp_m1()
}

#[inline]
pub(crate) fn df_from_powers(sd: f64, rd: f64, sr: f64, snr: f64, target: f64) -> f64 {
    if df_relay_decodes(sr, snr, target) {
        miso_from_powers(sd, rd, snr)
    } else {
        direct_from_powers(sd, snr)
    }
}

/// Decode-forward: the relay helps only when it decodes the target rate.
pub fn rate_df(draw: &ChannelDraw, snr: SnrScalar, target_rate: Rate) -> Rate {
    Rate::from_raw(df_from_powers(
        draw.sd_power(),
        draw.rd_power(),
        draw.sr_power(),
        snr.value(),
        target_rate.value(),
    ))
}

#[inline]
pub(crate) fn baf_from_powers(sd: f64, rd: f64, sr: f64, snr: f64, alpha: f64) -> f64 {
    let p = snr;
    let denom = (rd + sr) * p + alpha;
    let relay = if denom > 0.0 { rd * sr * p / denom } else { 0.0 };
    alpha * (p / alpha * (sd + relay)).ln_1p()
}

/// Bursty amplify-forward with duty cycle `alpha`.
pub fn rate_baf(draw: &ChannelDraw, snr: SnrScalar, params: BafParams) -> Result<Rate> {
    let BafParams { alpha } = BafParams::new(params.alpha)?;
    Ok(Rate::from_raw(baf_from_powers(
        draw.sd_power(),
        draw.rd_power(),
        draw.sr_power(),
        snr.value(),
        alpha,
    )))
}

/// Bursty amplify-forward combined with source/relay beamforming.
///
/// The destination sees the 2x2 channel
///
/// ```text
/// [Y1]   [ h_sd              0    ] [X1 ]   [ Z1                 ]
/// [Y2] = [ h_sr h_rd (c1+k)  h_sd ] [X2^] + [ h_rd k Z_R + Z2    ]
/// ```
///
/// with `k^2 = P / (|h_sr|^2 beta P + alpha)`, inputs of power `beta P/alpha`
/// and `(1-rho^2)(1-beta) P/alpha`, and
/// `c1^2 = |h_sd|^2 (1-beta) rho^2 / (beta |h_sr|^2 |h_rd|^2)`. The rate is
/// `alpha` times the log-determinant capacity of that system.
pub fn rate_baf_beamform(
    draw: &ChannelDraw,
    snr: SnrScalar,
    baf: BafParams,
    csi: FullCsiParams,
) -> Result<Rate> {
    let BafParams { alpha } = BafParams::new(baf.alpha)?;
    let FullCsiParams { beta, rho } = csi;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(config_err(format!(
            "beamforming needs beta in (0, 1], got {beta}"
        )));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(config_err(format!("beamforming needs rho in [0, 1], got {rho}")));
    }
    Ok(Rate::from_raw(baf_beamform_from_powers(
        draw.sd_power(),
        draw.rd_power(),
        draw.sr_power(),
        snr.value(),
        alpha,
        beta,
        rho,
    )))
}

pub(crate) fn baf_beamform_from_powers(
    sd: f64,
    rd: f64,
    sr: f64,
    snr: f64,
    alpha: f64,
    beta: f64,
    rho: f64,
) -> f64 {
    let p = snr;
    let link = beta * sr * rd;
    // With a dead relay hop the beamforming coefficient is undefined; the
    // beamforming component then carries no power.
    let rho = if link == 0.0 { 0.0 } else { rho };
    let c1 = (sd * (1.0 - beta) * rho * rho / if link == 0.0 { 1.0 } else { link }).sqrt();
    let k_sq = p / (sr * beta * p + alpha);
    let k = k_sq.sqrt();
    let p1 = beta * p / alpha;
    let p2 = (1.0 - rho * rho) * (1.0 - beta) * p / alpha;
    let noise2 = rd * k_sq + 1.0;
    let cross = sr * rd * (c1 + k) * (c1 + k);
    // det(N + H Q H^*) / det(N)
    let det_ratio = (1.0 + sd * p1) * (1.0 + sd * p2 / noise2) + cross * p1 / noise2;
    alpha * det_ratio.ln()
}

#[inline]
pub(crate) fn cutset_fd_from_powers(sd: f64, rd: f64, sr: f64, snr: f64) -> f64 {
    (sd + rd.min(sr)) * snr
}

/// Linearized max-flow min-cut bound without transmitter CSI.
pub fn cutset_fd(draw: &ChannelDraw, snr: SnrScalar) -> Rate {
    Rate::from_raw(cutset_fd_from_powers(
        draw.sd_power(),
        draw.rd_power(),
        draw.sr_power(),
        snr.value(),
    ))
}

/// The two cuts of the full-CSI bound (in units of P) at a given `(beta, rho)`.
#[inline]
pub(crate) fn full_csi_cuts(sd: f64, rd: f64, sr: f64, beta: f64, rho: f64) -> (f64, f64) {
    let broadcast = sd * (beta + (1.0 - beta) * (1.0 - rho * rho)) + sr * beta;
    let mac = sd + rd + 2.0 * (sd * rd).sqrt() * rho * (1.0 - beta).max(0.0).sqrt();
    (broadcast, mac)
}

#[inline]
pub(crate) fn full_csi_objective(sd: f64, rd: f64, sr: f64, beta: f64, rho: f64) -> f64 {
    let (a, b) = full_csi_cuts(sd, rd, sr, beta, rho);
    a.min(b)
}

/// `max_rho min(cuts)` at fixed `beta`. The broadcast cut falls and the
/// multiple-access cut rises with `rho`, so the optimum sits at `rho = 0`,
/// at `rho = 1`, or where the two cuts cross (root of a quadratic).
fn best_rho(sd: f64, rd: f64, sr: f64, beta: f64) -> (f64, f64) {
    let (bc0, mac0) = full_csi_cuts(sd, rd, sr, beta, 0.0);
    if mac0 >= bc0 {
        return (0.0, bc0);
    }
    let (bc1, mac1) = full_csi_cuts(sd, rd, sr, beta, 1.0);
    if mac1 <= bc1 {
        return (1.0, mac1);
    }
    // sd(1-beta) rho^2 + 2 sqrt(sd rd (1-beta)) rho + (rd - sr beta) = 0
    let qa = sd * (1.0 - beta);
    let qb = 2.0 * (sd * rd * (1.0 - beta)).sqrt();
    let qc = rd - sr * beta;
    let rho = if qa > 0.0 {
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
        // stable form of (-qb + sqrt(disc)) / (2 qa)
        (-2.0 * qc / (qb + disc.sqrt())).clamp(0.0, 1.0)
    } else if qb > 0.0 {
        (-qc / qb).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (rho, full_csi_objective(sd, rd, sr, beta, rho))
}

/// Full-CSI cutset bound maximized over `(beta, rho)` for this realization.
/// Returns the bound (in units of P) and the maximizer.
pub(crate) fn full_csi_from_powers(sd: f64, rd: f64, sr: f64, resolution: f64) -> (f64, f64, f64) {
    let steps = (1.0 / resolution).ceil() as usize;
    let mut best = (f64::NEG_INFINITY, 1.0, 0.0);
    let mut best_i = steps;
    for i in 0..=steps {
        let beta = (i as f64 * resolution).min(1.0);
        let (rho, v) = best_rho(sd, rd, sr, beta);
        if v > best.0 {
            best = (v, beta, rho);
            best_i = i;
        }
    }
    // Golden-section refinement in beta around the best grid point.
    let lo = (best_i as f64 - 1.0).max(0.0) * resolution;
    let hi = ((best_i as f64 + 1.0) * resolution).min(1.0);
    let f = |b: f64| best_rho(sd, rd, sr, b).1;
    let b = golden_section_max(f, lo, hi, 1e-12);
    let (rho, v) = best_rho(sd, rd, sr, b);
    if v > best.0 {
        best = (v, b, rho);
    }
    best
}

pub(crate) fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

fn check_resolution(r: f64) -> Result<()> {
    if r > 0.0 && r <= 0.1 {
        Ok(())
    } else {
        Err(config_err(format!("grid resolution must lie in (0, 0.1], got {r}")))
    }
}

/// Cutset bound with transmitter CSI, maximized per realization over the
/// power split `beta` and beamforming correlation `rho`.
pub fn cutset_full_csi(draw: &ChannelDraw, snr: SnrScalar, grid_resolution: f64) -> Result<Rate> {
    check_resolution(grid_resolution)?;
    let (v, _, _) = full_csi_from_powers(
        draw.sd_power(),
        draw.rd_power(),
        draw.sr_power(),
        grid_resolution,
    );
    Ok(Rate::from_raw(v * snr.value()))
}

/// Maximizer `(beta, rho)` of [`cutset_full_csi`] for this realization.
pub fn cutset_full_csi_argmax(draw: &ChannelDraw, grid_resolution: f64) -> Result<FullCsiParams> {
    check_resolution(grid_resolution)?;
    let (_, beta, rho) = full_csi_from_powers(
        draw.sd_power(),
        draw.rd_power(),
        draw.sr_power(),
        grid_resolution,
    );
    Ok(FullCsiParams { beta, rho })
}

/// Full-CSI cutset at fixed `(beta, rho)`.
pub fn cutset_full_csi_fixed(draw: &ChannelDraw, snr: SnrScalar, params: FullCsiParams) -> Rate {
    let v = full_csi_objective(
        draw.sd_power(),
        draw.rd_power(),
        draw.sr_power(),
        params.beta,
        params.rho.abs(),
    );
    Rate::from_raw(v * snr.value())
}

#[inline]
pub(crate) fn power_split_from_powers(sd: f64, rd: f64, sr: f64, total: f64, beta: f64) -> f64 {
    (sd * beta + (sr * beta).min(rd * (1.0 - beta))) * total
}

/// Cutset bound under a sum-power constraint: the source gets a fraction
/// `beta` of the total `2P`, the relay the rest. `total_snr` is `2P`.
pub fn cutset_power_split(draw: &ChannelDraw, total_snr: SnrScalar, beta: f64) -> Result<Rate> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(config_err(format!("beta must lie in [0, 1], got {beta}")));
    }
    Ok(Rate::from_raw(power_split_from_powers(
        draw.sd_power(),
        draw.rd_power(),
        draw.sr_power(),
        total_snr.value(),
        beta,
    )))
}

/// Linearized cutset bound of the parallel k-relay network.
pub fn cutset_k_relay(draw: &KRelayDraw, snr: SnrScalar) -> Result<Rate> {
    if draw.relays.is_empty() {
        return Err(config_err("k-relay cutset needs at least one relay"));
    }
    let relayed: f64 = draw
        .relays
        .iter()
        .map(|(sr, rd)| sr.power().min(rd.power()))
        .sum();
    Ok(Rate::from_raw((draw.sd.power() + relayed) * snr.value()))
}
