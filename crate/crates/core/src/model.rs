//! Channel model: `r = x·e^{jθ} + n` with memoryless Gaussian phase noise
//! `θ ~ N(0, σ_p²)` and circular complex AWGN `n ~ CN(0, N0)`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A constellation symbol or a received sample.
pub type ComplexPoint = Complex64;

/// Principal-value angle in `(−π, π]`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Noise spectral density for a given Eb/N0, with `Es = P` and `Es/N0 = (Eb/N0)·log2 M`.
pub fn eb_n0_to_n0(eb_n0_db: f64, m: usize, p: f64) -> Result<f64> {
    check_m_p(m, p)?;
    if !eb_n0_db.is_finite() {
        return Err(invalid(format!("Eb/N0 must be finite, got {eb_n0_db}")));
    }
    Ok(p / ((m as f64).log2() * 10f64.powf(eb_n0_db / 10.0)))
}

/// Inverse of [`eb_n0_to_n0`].
pub fn n0_to_eb_n0(n0: f64, m: usize, p: f64) -> Result<f64> {
    check_m_p(m, p)?;
    if !(n0 > 0.0 && n0.is_finite()) {
        return Err(invalid(format!("N0 must be positive, got {n0}")));
    }
    Ok(10.0 * (p / ((m as f64).log2() * n0)).log10())
}

fn check_m_p(m: usize, p: f64) -> Result<()> {
    if m < 2 {
        return Err(invalid(format!("constellation size must be at least 2, got {m}")));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(invalid(format!("power budget must be positive, got {p}")));
    }
    Ok(())
}

/// Phase-noise variance and AWGN level of the channel.
///
/// `n0` is the total complex noise variance; each real dimension carries `n0 / 2`.
/// `eb_n0_db` is kept only as a provenance record of how `n0` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub sigma_p2: f64,
    pub n0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eb_n0_db: Option<f64>,
}

impl ChannelParams {
    pub fn new(sigma_p2: f64, n0: f64) -> Result<Self> {
        let params = ChannelParams {
            sigma_p2,
            n0,
            eb_n0_db: None,
        };
        params.validate()?;
        Ok(params)
    }

    /// Builds the parameters from Eb/N0 for a constellation of `m` points and power `p`.
    pub fn from_eb_n0(sigma_p2: f64, eb_n0_db: f64, m: usize, p: f64) -> Result<Self> {
        let n0 = eb_n0_to_n0(eb_n0_db, m, p)?;
        let mut params = Self::new(sigma_p2, n0)?;
        params.eb_n0_db = Some(eb_n0_db);
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_p2 >= 0.0 && self.sigma_p2.is_finite()) {
            return Err(invalid(format!(
                "phase-noise variance must be non-negative, got {}",
                self.sigma_p2
            )));
        }
        if !(self.n0 > 0.0 && self.n0.is_finite()) {
            return Err(invalid(format!("N0 must be positive, got {}", self.n0)));
        }
        Ok(())
    }

    /// Per-dimension AWGN variance `N0/2`.
    #[inline]
    pub fn half_n0(&self) -> f64 {
        0.5 * self.n0
    }

    pub fn sigma_p(&self) -> f64 {
        self.sigma_p2.sqrt()
    }
}

/// Seeded, reproducible random stream.
///
/// Parallel workers never share a stream: each derives its own from
/// `(master seed, worker index)` through [`RngStream::derive`].
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::derive(seed, 0)
    }

    /// Independent stream number `stream` under the master `seed`.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// One use of the channel. Successive calls are i.i.d.
///
/// The phase noise is drawn as an unwrapped real Gaussian.
pub fn sample_channel(x: ComplexPoint, params: &ChannelParams, rng: &mut RngStream) -> ComplexPoint {
    let theta = params.sigma_p() * rng.standard_normal();
    let s = params.half_n0().sqrt();
    let noise = Complex64::new(s * rng.standard_normal(), s * rng.standard_normal());
    x * Complex64::from_polar(1.0, theta) + noise
}
