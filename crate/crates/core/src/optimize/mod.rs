//! Constellation design: multi-start local descent over the `2M` real
//! coordinates, and exhaustive search over APSK ring compositions.

mod apsk;
mod global;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::detectors::LikelihoodKind;
use crate::error::{Error, Result};
use crate::metrics::quadrature::{FULL_STEPS, REDUCED_STEPS};
use crate::metrics::{mi_dc_best, mi_dd, sep_union_bound, QuadratureGrid};
use crate::model::ChannelParams;

pub use apsk::{
    apsk_realize, enumerate_apsk, optimize_apsk, rank_apsk, write_leaderboard_csv, ApskConfig, ApskEntry, ApskSearch,
    MAX_APSK_SIZE,
};
pub use global::{optimize_global, SearchConfig};

/// Design criterion. All objectives are in minimization sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    /// Union bound on the GAP-D symbol error probability.
    #[serde(rename = "sep-a")]
    SepA,
    /// Mutual information of the GAP-D decision channel.
    #[serde(rename = "mi-a")]
    MiA,
    /// Mutual information of the continuous-output channel, the larger of the
    /// two likelihood characterizations.
    #[serde(rename = "mi-b")]
    MiB,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::SepA, Criterion::MiA, Criterion::MiB];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::SepA => "sep-a",
            Criterion::MiA => "mi-a",
            Criterion::MiB => "mi-b",
        }
    }

    /// SepA and MiA go through GAP-D, which is undefined at the origin.
    pub fn admits_origin(self) -> bool {
        self == Criterion::MiB
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown criterion `{s}` (expected sep-a, mi-a or mi-b)")))
    }
}

/// Quadrature resolution used by the MiB objective; the radius always
/// follows the constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSteps {
    pub n_r: usize,
    pub n_phi: usize,
}

impl GridSteps {
    pub const FULL: GridSteps = GridSteps {
        n_r: FULL_STEPS.0,
        n_phi: FULL_STEPS.1,
    };
    pub const REDUCED: GridSteps = GridSteps {
        n_r: REDUCED_STEPS.0,
        n_phi: REDUCED_STEPS.1,
    };

    pub fn grid_for(self, c: &Constellation, params: &ChannelParams) -> Result<QuadratureGrid> {
        QuadratureGrid::for_constellation(c, params, self.n_r, self.n_phi)
    }
}

impl Default for GridSteps {
    fn default() -> Self {
        GridSteps::FULL
    }
}

/// Objective value on the full grid.
pub fn objective(c: &Constellation, criterion: Criterion, params: &ChannelParams) -> Result<f64> {
    objective_with(c, criterion, params, GridSteps::FULL)
}

/// SepA: the clipped union bound. MiA: `−I_DD`. MiB: `−I_DC` of the better likelihood.
pub fn objective_with(
    c: &Constellation,
    criterion: Criterion,
    params: &ChannelParams,
    steps: GridSteps,
) -> Result<f64> {
    Ok(evaluate(c, criterion, params, steps)?.0)
}

/// Objective value and, for MiB, the likelihood that attained it.
fn evaluate(
    c: &Constellation,
    criterion: Criterion,
    params: &ChannelParams,
    steps: GridSteps,
) -> Result<(f64, Option<LikelihoodKind>)> {
    match criterion {
        Criterion::SepA => Ok((sep_union_bound(c, params)?.value, None)),
        Criterion::MiA => Ok((-mi_dd(c, params)?, None)),
        Criterion::MiB => {
            let est = mi_dc_best(c, params, &steps.grid_for(c, params)?)?;
            Ok((-est.bits, Some(est.kind)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Global,
    Apsk,
}

/// Outcome of a design run, with everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub method: Method,
    pub criterion: Criterion,
    pub constellation: Constellation,
    /// `objective_with(constellation, criterion, params, final_grid)`.
    pub value: f64,
    /// Likelihood behind a MiB value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likelihood: Option<LikelihoodKind>,
    pub params: ChannelParams,
    pub final_grid: GridSteps,
    /// Global search: one value per start. APSK: the leaderboard values.
    pub start_values: Vec<f64>,
    pub n_starts: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apsk: Option<ApskOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApskOutcome {
    pub config: ApskConfig,
    pub leaderboard: Vec<ApskEntry>,
    pub evaluated: usize,
    pub search: ApskSearch,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::TransitionMatrix;
    use crate::model::ComplexPoint;

    #[test]
    fn criterion_strings() {
        for c in Criterion::ALL {
            assert_eq!(c.as_str().parse::<Criterion>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{c}\""));
        }
        assert!("sep".parse::<Criterion>().is_err());
    }

    #[test]
    fn objective_examples() {
        let one = Constellation::new(vec![ComplexPoint::new(1.0, 0.0)], 1.0).unwrap();
        let p = ChannelParams::new(0.01, 0.1).unwrap();
        assert_eq!(objective(&one, Criterion::SepA, &p).unwrap(), 0.0);

        let q = Constellation::qam(16, 1.0).unwrap();
        let p = ChannelParams::from_eb_n0(0.01, 20.0, 16, 1.0).unwrap();
        let direct = sep_union_bound(&q, &p).unwrap().value;
        assert_eq!(objective(&q, Criterion::SepA, &p).unwrap().to_bits(), direct.to_bits());

        // distinct magnitudes, vanishing noise: identity transitions
        let pts = (0..16)
            .map(|k| ComplexPoint::from_polar(0.4 + 0.1 * k as f64, 0.7 * k as f64))
            .collect();
        let c = Constellation::normalized(pts, 1.0).unwrap();
        let quiet = ChannelParams::new(0.001, 1e-10).unwrap();
        assert!((objective(&c, Criterion::MiA, &quiet).unwrap() + 4.0).abs() < 1e-9);
        assert_eq!(TransitionMatrix::identity(16).mutual_information(), 4.0);
    }

    #[test]
    fn origin_admissibility() {
        let c = Constellation::normalized(
            vec![
                ComplexPoint::new(0.0, 0.0),
                ComplexPoint::new(1.0, 0.0),
                ComplexPoint::new(-1.0, 0.0),
            ],
            1.0,
        )
        .unwrap();
        let p = ChannelParams::new(0.01, 0.1).unwrap();
        assert!(objective(&c, Criterion::SepA, &p).is_err());
        assert!(objective(&c, Criterion::MiA, &p).is_err());
        let v = objective_with(&c, Criterion::MiB, &p, GridSteps::REDUCED).unwrap();
        assert!((-(3f64.log2())..0.0).contains(&v));
    }
}
