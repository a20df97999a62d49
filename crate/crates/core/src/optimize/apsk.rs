//! Exhaustive search over APSK ring compositions.

use std::cmp::Ordering;
use std::f64::consts::TAU;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, ApskOutcome, Criterion, GridSteps, Method, OptimizationResult};
use crate::constellation::Constellation;
use crate::detectors::LikelihoodKind;
use crate::error::{invalid, Error, Result};
use crate::model::{ChannelParams, ComplexPoint};

/// Largest `M` accepted by [`optimize_apsk`]: `2^(M−1)` compositions.
pub const MAX_APSK_SIZE: usize = 24;

/// Ring structure of an APSK constellation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApskConfig {
    pub ring_sizes: Vec<usize>,
    /// Spacing between consecutive radii.
    pub delta: f64,
    pub radii: Vec<f64>,
    pub phase_offsets: Vec<f64>,
    /// Set for the single point at the origin, `(1)`, which no scaling can bring to power `P`.
    pub degenerate: bool,
}

/// All compositions of `m` (ordered, positive parts), `2^(m−1)` of them.
///
/// Ordered by number of rings, then lexicographically.
pub fn enumerate_apsk(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return Vec::new();
    }
    // bit k of the mask set = a ring boundary after point k + 1
    let mut all: Vec<Vec<usize>> = (0u64..1 << (m - 1))
        .map(|mask| {
            let mut parts = Vec::with_capacity(mask.count_ones() as usize + 1);
            let mut run = 1;
            for k in 0..m - 1 {
                if mask >> k & 1 == 1 {
                    parts.push(run);
                    run = 1;
                } else {
                    run += 1;
                }
            }
            parts.push(run);
            parts
        })
        .collect();
    all.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    all
}

/// Places `n_l` points uniformly on ring `l` with zero phase offset.
///
/// Radii are `r_l = k_l·δ` with `k_l = l − 1` when the first ring is a
/// single point (at the origin) and `k_l = l` otherwise, and
/// `δ = sqrt(M·P / Σ n_l k_l²)` meets the power budget exactly.
pub fn apsk_realize(ring_sizes: &[usize], power: f64) -> Result<(ApskConfig, Constellation)> {
    if ring_sizes.is_empty() || ring_sizes.contains(&0) {
        return Err(invalid(format!("ring sizes must be positive, got {ring_sizes:?}")));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(invalid(format!("power budget must be positive, got {power}")));
    }
    let m: usize = ring_sizes.iter().sum();
    let shift = usize::from(ring_sizes[0] != 1);
    let index = |l: usize| (l + shift) as f64;
    let weight: f64 = ring_sizes
        .iter()
        .enumerate()
        .map(|(l, &n)| n as f64 * index(l).powi(2))
        .sum();
    let degenerate = weight == 0.0;
    let delta = if degenerate {
        0.0
    } else {
        (m as f64 * power / weight).sqrt()
    };
    let radii: Vec<f64> = (0..ring_sizes.len()).map(|l| index(l) * delta).collect();
    let points = ring_sizes
        .iter()
        .zip(&radii)
        .flat_map(|(&n, &r)| (0..n).map(move |j| ComplexPoint::from_polar(r, TAU * j as f64 / n as f64)))
        .collect();
    let config = ApskConfig {
        ring_sizes: ring_sizes.to_vec(),
        delta,
        radii,
        phase_offsets: vec![0.0; ring_sizes.len()],
        degenerate,
    };
    Ok((config, Constellation::new(points, power)?))
}

/// One ranked composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApskEntry {
    pub composition: Vec<usize>,
    pub delta: f64,
    /// Objective in minimization sense.
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likelihood: Option<LikelihoodKind>,
    /// Whether `objective` comes from the final grid.
    pub refined: bool,
}

impl ApskEntry {
    fn order(&self, other: &Self) -> Ordering {
        self.objective
            .total_cmp(&other.objective)
            .then_with(|| self.composition.cmp(&other.composition))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApskSearch {
    /// MiB grid used to screen every composition.
    pub screen_grid: GridSteps,
    /// MiB grid for the re-ranked top entries.
    pub final_grid: GridSteps,
    /// How many screened entries are re-evaluated on the final grid.
    pub refine_top: usize,
    pub leaderboard_size: usize,
}

impl Default for ApskSearch {
    fn default() -> Self {
        ApskSearch {
            screen_grid: GridSteps::REDUCED,
            final_grid: GridSteps::FULL,
            refine_top: 16,
            leaderboard_size: 10,
        }
    }
}

fn score(
    composition: &[usize],
    criterion: Criterion,
    params: &ChannelParams,
    steps: GridSteps,
) -> Result<Option<ApskEntry>> {
    let (cfg, c) = apsk_realize(composition, 1.0)?;
    if cfg.degenerate || (!criterion.admits_origin() && c.has_origin_point()) {
        return Ok(None);
    }
    let (objective, likelihood) = evaluate(&c, criterion, params, steps)?;
    Ok(Some(ApskEntry {
        composition: composition.to_vec(),
        delta: cfg.delta,
        objective,
        likelihood,
        refined: false,
    }))
}

/// Screens `compositions`, re-evaluates the best `refine_top` on the final
/// grid and returns them best first. Compositions the criterion cannot
/// evaluate (an origin ring under SepA or MiA) are skipped.
///
/// Ties go to the lexicographically smaller composition, so the result does
/// not depend on the order of `compositions`.
pub fn rank_apsk(
    criterion: Criterion,
    params: &ChannelParams,
    compositions: &[Vec<usize>],
    search: &ApskSearch,
) -> Result<Vec<ApskEntry>> {
    params.validate()?;
    let mut screened: Vec<ApskEntry> = compositions
        .par_iter()
        .map(|comp| score(comp, criterion, params, search.screen_grid))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    screened.sort_by(ApskEntry::order);
    screened.truncate(search.refine_top.max(1));
    let needs_refine = criterion == Criterion::MiB && search.final_grid != search.screen_grid;
    let mut ranked = if needs_refine {
        screened
            .par_iter()
            .map(|e| score(&e.composition, criterion, params, search.final_grid))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect()
    } else {
        screened
    };
    ranked.iter_mut().for_each(|e| e.refined = true);
    ranked.sort_by(ApskEntry::order);
    Ok(ranked)
}

/// Best APSK constellation of size `m` over all ring compositions.
pub fn optimize_apsk(
    criterion: Criterion,
    params: &ChannelParams,
    m: usize,
    search: &ApskSearch,
) -> Result<OptimizationResult> {
    if m == 0 || m > MAX_APSK_SIZE {
        return Err(invalid(format!(
            "APSK search supports 1 ≤ M ≤ {MAX_APSK_SIZE}, got {m}"
        )));
    }
    let all = enumerate_apsk(m);
    let mut ranked = rank_apsk(criterion, params, &all, search)?;
    let best = ranked
        .first()
        .cloned()
        .ok_or_else(|| Error::Optimization(format!("no admissible APSK composition for M = {m} under {criterion}")))?;
    let (config, constellation) = apsk_realize(&best.composition, 1.0)?;
    ranked.truncate(search.leaderboard_size);
    Ok(OptimizationResult {
        method: Method::Apsk,
        criterion,
        constellation,
        value: best.objective,
        likelihood: best.likelihood,
        params: *params,
        final_grid: search.final_grid,
        start_values: ranked.iter().map(|e| e.objective).collect(),
        n_starts: all.len(),
        converged: true,
        seed: None,
        search: None,
        apsk: Some(ApskOutcome {
            config,
            leaderboard: ranked,
            evaluated: all.len(),
            search: search.clone(),
        }),
    })
}

/// Leaderboard as CSV: `rank,composition,delta,objective`, compositions
/// written as `1-5-5-5`.
pub fn write_leaderboard_csv<W: Write>(entries: &[ApskEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "composition", "delta", "objective"])?;
    for (rank, e) in entries.iter().enumerate() {
        let comp = e
            .composition
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("-");
        w.write_record([
            (rank + 1).to_string(),
            comp,
            format!("{:e}", e.delta),
            format!("{:e}", e.objective),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::sep_union_bound;
    use approx::assert_relative_eq;

    #[test]
    fn small_enumerations() {
        assert_eq!(enumerate_apsk(3), vec![vec![3], vec![1, 2], vec![2, 1], vec![1, 1, 1]]);
        assert_eq!(enumerate_apsk(1), vec![vec![1]]);
        let all = enumerate_apsk(16);
        assert_eq!(all.len(), 32768);
        assert!(all
            .iter()
            .all(|c| c.iter().sum::<usize>() == 16 && c.iter().all(|&n| n >= 1)));
        let mut dedup = all.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), all.len());
    }

    #[test]
    fn single_ring_is_psk() {
        let (cfg, c) = apsk_realize(&[16], 1.0).unwrap();
        assert_relative_eq!(cfg.delta, 1.0, epsilon = 1e-15);
        let psk = Constellation::psk(16, 1.0).unwrap();
        for (a, b) in c.points().iter().zip(psk.points()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn closed_form_spacing() {
        let (cfg, c) = apsk_realize(&[1, 15], 1.0).unwrap();
        assert_relative_eq!(cfg.delta, (16.0f64 / 15.0).sqrt(), max_relative = 1e-15);
        assert_eq!(cfg.radii[0], 0.0);
        assert_relative_eq!(c.average_power(), 1.0, max_relative = 1e-12);

        // 16 / (5·1 + 5·4 + 5·9)
        let (cfg, c) = apsk_realize(&[1, 5, 5, 5], 1.0).unwrap();
        assert_relative_eq!(cfg.delta, 0.478_091_443_733_757_3, max_relative = 1e-12);
        assert_relative_eq!(c.average_power(), 1.0, max_relative = 1e-12);
        for w in cfg.radii.windows(2) {
            assert_relative_eq!(w[1] - w[0], cfg.delta, max_relative = 1e-12);
        }

        let (cfg, c) = apsk_realize(&[4, 4, 4, 4], 2.0).unwrap();
        assert_relative_eq!(cfg.radii[0], cfg.delta, max_relative = 1e-15);
        assert_relative_eq!(c.average_power(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_single_origin_point() {
        let (cfg, c) = apsk_realize(&[1], 1.0).unwrap();
        assert!(cfg.degenerate);
        assert_eq!(c.points()[0], ComplexPoint::new(0.0, 0.0));
        assert!(apsk_realize(&[], 1.0).is_err());
        assert!(apsk_realize(&[3, 0], 1.0).is_err());
    }

    #[test]
    fn two_point_search_is_exhaustive() {
        let p = ChannelParams::from_eb_n0(0.01, 10.0, 2, 1.0).unwrap();
        let r = optimize_apsk(Criterion::MiB, &p, 2, &ApskSearch::default()).unwrap();
        let brute: Vec<(f64, Vec<usize>)> = [vec![2], vec![1, 1]]
            .into_iter()
            .map(|comp| {
                let (_, c) = apsk_realize(&comp, 1.0).unwrap();
                (super::super::objective(&c, Criterion::MiB, &p).unwrap(), comp)
            })
            .collect();
        let best = brute.iter().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
        assert_eq!(r.value, best.0);
        assert_eq!(r.apsk.as_ref().unwrap().config.ring_sizes, best.1);
        assert_eq!(r.apsk.unwrap().leaderboard.len(), 2);
    }

    #[test]
    fn sep_search_skips_origin_rings_and_is_order_invariant() {
        let p = ChannelParams::from_eb_n0(0.01, 16.0, 8, 1.0).unwrap();
        let search = ApskSearch::default();
        let mut comps = enumerate_apsk(8);
        let ranked = rank_apsk(Criterion::SepA, &p, &comps, &search).unwrap();
        assert!(ranked.iter().all(|e| e.composition[0] != 1));
        comps.reverse();
        assert_eq!(ranked, rank_apsk(Criterion::SepA, &p, &comps, &search).unwrap());
        let (_, c) = apsk_realize(&ranked[0].composition, 1.0).unwrap();
        assert_eq!(ranked[0].objective, sep_union_bound(&c, &p).unwrap().value);
    }

    #[test]
    fn leaderboard_csv_columns() {
        let e = ApskEntry {
            composition: vec![1, 5, 5, 5],
            delta: 0.5,
            objective: -3.0,
            likelihood: None,
            refined: true,
        };
        let mut buf = Vec::new();
        write_leaderboard_csv(&[e], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "rank,composition,delta,objective");
        assert!(text.lines().nth(1).unwrap().starts_with("1,1-5-5-5,"));
    }
}
