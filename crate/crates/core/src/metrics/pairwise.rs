//! Pairwise GAP-D error statistics.
//!
//! For symbols `x^(i)` (sent) and `x^(j)`, the metric difference
//! `η_ij = L_i − L_j` is the deterministic offset `y_ij` plus a quadratic form in
//! the radial and angular noise. Under the polar Gaussian model behind GAP-D the
//! quadratic part has mean `1 − (a + b + c)` and variance
//! `2 + 4a + 2c² + 4bc − 4c = 2(1 − c)² + 4a + 4bc`, which is never negative.
//!
//! A pairwise error happens when `η_ij > 0`, i.e. when the quadratic part
//! exceeds `−y_ij`. Its Gaussian approximation is therefore
//! `Q((−y_ij − mean_eta) / sqrt(var_eta))`. The alternative argument
//! `(y_ij − mean_eta) / sqrt(var_eta)` is kept as
//! [`PairwiseStats::q_argument_literal`]; Monte Carlo under the same polar model
//! agrees with the first form and not the second for unequal-energy pairs.

use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::metrics::qfunc::q_function;
use crate::model::{wrap_angle, ChannelParams, ComplexPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseStats {
    /// `(|x^(i)| − |x^(j)|)² / (N0/2)`
    pub a: f64,
    /// `wrap(arg x^(i) − arg x^(j))² / (σ_p² + N0/(2|x^(j)|²))`
    pub b: f64,
    /// `(σ_p² + N0/(2|x^(i)|²)) / (σ_p² + N0/(2|x^(j)|²))`
    pub c: f64,
    /// `ln[(|x^(i)|²σ_p² + N0/2) / (|x^(j)|²σ_p² + N0/2)]`
    pub y: f64,
    /// Mean of the quadratic part of `η_ij`, `1 − (a + b + c)`.
    pub mean_eta: f64,
    /// Variance of `η_ij`.
    pub var_eta: f64,
}

impl PairwiseStats {
    /// Assembles the statistics from the four defining terms.
    pub fn from_terms(a: f64, b: f64, c: f64, y: f64) -> Self {
        PairwiseStats {
            a,
            b,
            c,
            y,
            mean_eta: 1.0 - (a + b + c),
            var_eta: 2.0 + 4.0 * a + 2.0 * c * c + 4.0 * b * c - 4.0 * c,
        }
    }

    /// Statistics for sent symbol `xi` against competitor `xj`. Both must be nonzero.
    pub fn between(xi: ComplexPoint, xj: ComplexPoint, params: &ChannelParams) -> Result<Self> {
        let (mi, mj) = (xi.norm(), xj.norm());
        if mi == 0.0 || mj == 0.0 {
            return Err(Error::InvalidParameter(
                "pairwise statistics are undefined for a point at the origin".into(),
            ));
        }
        Ok(Self::from_polar(mi, xi.arg(), mj, xj.arg(), params))
    }

    #[inline]
    pub(crate) fn from_polar(mi: f64, ai: f64, mj: f64, aj: f64, params: &ChannelParams) -> Self {
        let h = params.half_n0();
        let s2 = params.sigma_p2;
        let ang_i = s2 + h / (mi * mi);
        let ang_j = s2 + h / (mj * mj);
        let dm = mi - mj;
        let da = wrap_angle(ai - aj);
        Self::from_terms(
            dm * dm / h,
            da * da / ang_j,
            ang_i / ang_j,
            ((mi * mi * s2 + h) / (mj * mj * s2 + h)).ln(),
        )
    }

    /// Mean of `η_ij` itself, offset included.
    pub fn mean_difference(&self) -> f64 {
        self.mean_eta + self.y
    }

    /// Argument of `Q` in the pairwise error probability.
    pub fn q_argument(&self) -> f64 {
        (-self.y - self.mean_eta) / self.var_eta.sqrt()
    }

    /// `(y − mean_eta) / sqrt(var_eta)`, the sign convention in which the
    /// log-variance offset enters with the opposite sign.
    pub fn q_argument_literal(&self) -> f64 {
        (self.y - self.mean_eta) / self.var_eta.sqrt()
    }

    /// Zero variance only happens for coincident symbols.
    pub fn is_degenerate(&self) -> bool {
        !(self.var_eta > 0.0)
    }
}

/// Pairwise error probability with its degeneracy flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseErrorProb {
    pub probability: f64,
    /// Set when `var_eta ≤ 0` (coincident symbols); the probability is then 0.5.
    pub degenerate: bool,
}

/// `Pr(η_ij > 0 | x^(i))` in the high-SNR Gaussian approximation.
pub fn pairwise_error_prob(stats: &PairwiseStats) -> PairwiseErrorProb {
    if stats.is_degenerate() {
        return PairwiseErrorProb {
            probability: 0.5,
            degenerate: true,
        };
    }
    PairwiseErrorProb {
        probability: q_function(stats.q_argument()),
        degenerate: false,
    }
}

/// Same as [`pairwise_error_prob`] with the literal sign convention.
pub fn pairwise_error_prob_literal(stats: &PairwiseStats) -> PairwiseErrorProb {
    if stats.is_degenerate() {
        return PairwiseErrorProb {
            probability: 0.5,
            degenerate: true,
        };
    }
    PairwiseErrorProb {
        probability: q_function(stats.q_argument_literal()),
        degenerate: false,
    }
}

/// Statistics for the ordered pair `(i, j)` of a constellation.
pub fn pairwise_stats(c: &Constellation, i: usize, j: usize, params: &ChannelParams) -> Result<PairwiseStats> {
    let m = c.len();
    if i >= m || j >= m {
        return Err(Error::InvalidIndex(format!("pair ({i}, {j}) out of range for M = {m}")));
    }
    if i == j {
        return Err(Error::InvalidIndex(format!("pair ({i}, {j}) is not a distinct pair")));
    }
    let (xi, xj) = (c.points()[i], c.points()[j]);
    if xi.norm() == 0.0 {
        return Err(Error::OriginPoint { index: i });
    }
    if xj.norm() == 0.0 {
        return Err(Error::OriginPoint { index: j });
    }
    PairwiseStats::between(xi, xj, params)
}

/// Rejects constellations with an exact origin point, naming the offending index.
pub(crate) fn require_nonzero(c: &Constellation) -> Result<()> {
    match c.points().iter().position(|p| p.norm() == 0.0) {
        Some(index) => Err(Error::OriginPoint { index }),
        None => Ok(()),
    }
}
