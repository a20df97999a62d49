//! Union bound on the GAP-D symbol error probability and its high-SNR floor.

use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{invalid, Result};
use crate::metrics::pairwise::{pairwise_error_prob, require_nonzero, PairwiseStats};
use crate::metrics::qfunc::q_function;
use crate::model::{wrap_angle, ChannelParams};

/// Relative tolerance under which two magnitudes count as the same energy level.
pub const EQUAL_ENERGY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SepBound {
    /// Bound clipped to `[0, 1]`.
    pub value: f64,
    /// Unclipped double sum.
    pub raw: f64,
    /// Number of ordered pairs whose variance vanished (coincident symbols).
    pub degenerate_pairs: usize,
}

/// `(1/M) Σ_i Σ_{j≠i} Pr(η_ij > 0 | x^(i))`.
///
/// Summation order is fixed (row-major over `(i, j)`), so the value does not
/// depend on how a caller partitions work.
pub fn sep_union_bound(c: &Constellation, params: &ChannelParams) -> Result<SepBound> {
    params.validate()?;
    require_nonzero(c)?;
    let polar: Vec<(f64, f64)> = c.points().iter().map(|p| (p.norm(), p.arg())).collect();
    let mut raw = 0.0;
    let mut degenerate_pairs = 0;
    for (i, &(mi, ai)) in polar.iter().enumerate() {
        let mut row = 0.0;
        for (j, &(mj, aj)) in polar.iter().enumerate() {
            if i == j {
                continue;
            }
            let pe = pairwise_error_prob(&PairwiseStats::from_polar(mi, ai, mj, aj, params));
            degenerate_pairs += pe.degenerate as usize;
            row += pe.probability;
        }
        raw += row;
    }
    raw /= c.len() as f64;
    Ok(SepBound {
        value: raw.clamp(0.0, 1.0),
        raw,
        degenerate_pairs,
    })
}

/// How the floor's pairwise argument is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FloorForm {
    /// `Q(|Δarg| / (2σ_p))`: the phase noise must cover half the angular gap.
    #[default]
    HalfAngle,
    /// `Q(sqrt(|Δarg| / σ_p))`, kept for auditing; it does not reproduce the
    /// tabulated PSK/QAM floors.
    Literal,
}

/// Error floor: the `N0 → 0` union bound restricted to equal-energy pairs.
///
/// Points at the origin have no angle and are skipped. Returns 0 when no two
/// nonzero points share a magnitude, or when `σ_p² = 0`.
pub fn sep_floor(c: &Constellation, sigma_p2: f64) -> Result<f64> {
    sep_floor_with(c, sigma_p2, FloorForm::HalfAngle)
}

pub fn sep_floor_with(c: &Constellation, sigma_p2: f64, form: FloorForm) -> Result<f64> {
    if !(sigma_p2 >= 0.0 && sigma_p2.is_finite()) {
        return Err(invalid(format!(
            "phase-noise variance must be non-negative, got {sigma_p2}"
        )));
    }
    if sigma_p2 == 0.0 {
        return Ok(0.0);
    }
    let sigma = sigma_p2.sqrt();
    let polar: Vec<(f64, f64)> = c.points().iter().map(|p| (p.norm(), p.arg())).collect();
    let mut total = 0.0;
    for (i, &(mi, ai)) in polar.iter().enumerate() {
        if mi == 0.0 {
            continue;
        }
        for (j, &(mj, aj)) in polar.iter().enumerate() {
            if i == j || mj == 0.0 || (mi - mj).abs() > EQUAL_ENERGY_TOLERANCE * mi.max(mj) {
                continue;
            }
            let gap = wrap_angle(aj - ai).abs();
            total += match form {
                FloorForm::HalfAngle => q_function(gap / (2.0 * sigma)),
                FloorForm::Literal => q_function((gap / sigma).sqrt()),
            };
        }
    }
    Ok(total / c.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ComplexPoint;

    #[test]
    fn single_point_has_no_errors() {
        let c = Constellation::new(vec![ComplexPoint::new(1.0, 0.0)], 1.0).unwrap();
        let p = ChannelParams::new(0.01, 0.1).unwrap();
        assert_eq!(sep_union_bound(&c, &p).unwrap().value, 0.0);
        assert_eq!(sep_floor(&c, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn psk16_floor() {
        let c = Constellation::psk(16, 1.0).unwrap();
        let f = sep_floor(&c, 0.01).unwrap();
        assert!((f - 0.0498).abs() <= 0.05 * 0.0498, "{f}");
        let lit = sep_floor_with(&c, 0.01, FloorForm::Literal).unwrap();
        assert!((lit - 0.0498).abs() > 0.05 * 0.0498, "{lit}");
    }

    #[test]
    fn qam16_floor() {
        let c = Constellation::qam(16, 1.0).unwrap();
        let f = sep_floor(&c, 0.01).unwrap();
        assert!((3.5e-4 / 1.3..=3.5e-4 * 1.3).contains(&f), "{f}");
        // the literal form is an order of magnitude off
        let lit = sep_floor_with(&c, 0.01, FloorForm::Literal).unwrap();
        assert!(lit > 3.5e-4 * 5.0, "{lit}");
    }

    #[test]
    fn distinct_magnitudes_have_no_floor() {
        let pts = (0..16)
            .map(|k| ComplexPoint::from_polar(1.0 + 0.1 * k as f64, 0.4 * k as f64))
            .collect();
        let c = Constellation::normalized(pts, 1.0).unwrap();
        assert_eq!(sep_floor(&c, 0.01).unwrap(), 0.0);
        assert_eq!(sep_floor(&Constellation::psk(8, 1.0).unwrap(), 0.0).unwrap(), 0.0);
        assert!(sep_floor(&c, -1.0).is_err());
    }

    #[test]
    fn bound_rejects_origin() {
        let c = Constellation::new(vec![ComplexPoint::new(0.0, 0.0), ComplexPoint::new(1.0, 0.0)], 1.0).unwrap();
        assert!(sep_union_bound(&c, &ChannelParams::new(0.01, 0.1).unwrap()).is_err());
    }

    #[test]
    fn bound_non_increasing_in_snr_towards_floor() {
        let c = Constellation::qam(16, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..=30 {
            let p = ChannelParams::from_eb_n0(0.01, 2.0 * k as f64, 16, 1.0).unwrap();
            let v = sep_union_bound(&c, &p).unwrap().value;
            assert!(v <= prev * (1.0 + 1e-12), "{} dB: {v} > {prev}", 2 * k);
            prev = v;
        }
    }

    #[test]
    fn high_snr_bound_approaches_floor() {
        let c = Constellation::psk(16, 1.0).unwrap();
        let p = ChannelParams::from_eb_n0(0.01, 60.0, 16, 1.0).unwrap();
        let bound = sep_union_bound(&c, &p).unwrap().value;
        let floor = sep_floor(&c, 0.01).unwrap();
        assert!((bound - floor).abs() <= 0.1 * floor, "{bound} vs {floor}");
    }
}
