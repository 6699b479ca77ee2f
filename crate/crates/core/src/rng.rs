//! Counter-based random numbers.
//!
//! Every Monte Carlo trial owns an independent stream addressed by
//! `(master_seed, stream_id, trial_index)`. The stream is Philox4x32-10
//! keyed by the master seed, with the stream id and trial index living in
//! the counter. Nothing is shared between trials, so a trial's variates do
//! not depend on which worker evaluates it or in what order.

use serde::{Deserialize, Serialize};

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// One Philox4x32 block with ten rounds.
#[inline]
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Address of one trial's random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u32,
    pub trial_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u32, trial_index: u64) -> Self {
        Self {
            master_seed,
            stream_id,
            trial_index,
        }
    }

    /// Same seed and stream, different trial.
    pub fn with_trial(self, trial_index: u64) -> Self {
        Self {
            trial_index,
            ..self
        }
    }

    pub fn with_stream(self, stream_id: u32) -> Self {
        Self { stream_id, ..self }
    }
}

/// Sequential reader over a single trial's stream.
///
/// Consecutive calls walk the block counter; each block yields two 64-bit
/// words. Around 2^32 blocks are available per trial.
#[derive(Debug, Clone)]
pub struct TrialRng {
    key: [u32; 2],
    counter: [u32; 4],
    buf: [u64; 2],
    used: usize,
}

impl TrialRng {
    pub fn new(seed: SeedSpec) -> Self {
        let key = [seed.master_seed as u32, (seed.master_seed >> 32) as u32];
        let counter = [
            0,
            seed.stream_id,
            seed.trial_index as u32,
            (seed.trial_index >> 32) as u32,
        ];
        Self {
            key,
            counter,
            buf: [0; 2],
            used: 2,
        }
    }

    #[inline]
    fn refill(&mut self) {
        let out = philox4x32_10(self.counter, self.key);
        self.counter[0] = self.counter[0].wrapping_add(1);
        self.buf = [
            u64::from(out[0]) | (u64::from(out[1]) << 32),
            u64::from(out[2]) | (u64::from(out[3]) << 32),
        ];
        self.used = 0;
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        if self.used == 2 {
            self.refill();
        }
        let v = self.buf[self.used];
        self.used += 1;
        v
    }

    /// Uniform on the open interval (0, 1), 53 bits of resolution.
    #[inline]
    pub fn open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Unit-mean exponential variate by inversion.
    #[inline]
    pub fn exp1(&mut self) -> f64 {
        -self.open01().ln()
    }

    /// Uniform integer in `0..n` (n > 0), by 128-bit multiply-shift.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    /// Circularly-symmetric complex Gaussian with total variance `var`,
    /// returned as `(re, im)`. Box-Muller in polar form: the squared modulus
    /// is `var` times a unit exponential, the phase is uniform.
    #[inline]
    pub fn complex_normal(&mut self, var: f64) -> (f64, f64) {
        let power = var * self.exp1();
        let phase = std::f64::consts::TAU * self.open01();
        let r = power.sqrt();
        let (s, c) = phase.sin_cos();
        (r * c, r * s)
    }
}
