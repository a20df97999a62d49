//! Multi-start projected gradient descent on the power sphere.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, Criterion, GridSteps, Method, OptimizationResult};
use crate::constellation::{Constellation, DEFAULT_POWER};
use crate::detectors::LikelihoodKind;
use crate::error::{invalid, Error, Result};
use crate::metrics::quadrature::MiCache;
use crate::metrics::{mi_dc, mi_dd, sep_union_bound, QuadratureGrid};
use crate::model::{ChannelParams, ComplexPoint, RngStream};

const ARMIJO: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 50;
const FD_RELATIVE_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub n_starts: usize,
    pub max_iterations: usize,
    /// Stop when a step moves the point by less than this, relative to its norm.
    pub step_tolerance: f64,
    /// Stop when a step improves the objective by less than this, relative to `|f|`.
    pub objective_tolerance: f64,
    pub seed: u64,
    /// MiB grid inside the descent.
    pub descent_grid: GridSteps,
    /// Grid for the reported values.
    pub final_grid: GridSteps,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            n_starts: 64,
            max_iterations: 2000,
            step_tolerance: 1e-8,
            objective_tolerance: 1e-10,
            seed: 0,
            descent_grid: GridSteps::REDUCED,
            final_grid: GridSteps::FULL,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 || self.max_iterations == 0 {
            return Err(invalid("n_starts and max_iterations must be positive"));
        }
        if !(self.step_tolerance > 0.0 && self.objective_tolerance > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        Ok(())
    }
}

/// Local objective of one descent, in minimization sense.
#[derive(Clone, Copy)]
enum Local {
    Sep,
    Dd,
    Dc(LikelihoodKind),
}

/// Objective frozen for one iteration: the MiB grid radius is fixed from the
/// iterate so that the line search compares values on a single grid.
struct Frozen<'a> {
    local: Local,
    params: &'a ChannelParams,
    power: f64,
    grid: Option<QuadratureGrid>,
}

impl<'a> Frozen<'a> {
    fn new(local: Local, params: &'a ChannelParams, power: f64, steps: GridSteps, x: &[ComplexPoint]) -> Result<Self> {
        let grid = match local {
            Local::Dc(_) => Some(steps.grid_for(&Constellation::new(x.to_vec(), power)?, params)?),
            _ => None,
        };
        Ok(Frozen {
            local,
            params,
            power,
            grid,
        })
    }

    /// Unclipped objective, `+∞` where it is undefined.
    fn value(&self, x: &[ComplexPoint]) -> f64 {
        let Ok(c) = Constellation::new(x.to_vec(), self.power) else {
            return f64::INFINITY;
        };
        let v = match (self.local, &self.grid) {
            (Local::Sep, _) => sep_union_bound(&c, self.params).map(|b| b.raw),
            (Local::Dd, _) => mi_dd(&c, self.params).map(|v| -v),
            (Local::Dc(kind), Some(g)) => mi_dc(&c, self.params, kind, g).map(|e| -e.raw),
            (Local::Dc(_), None) => unreachable!("grid is set for quadrature objectives"),
        };
        v.ok().filter(|v| v.is_finite()).unwrap_or(f64::INFINITY)
    }

    fn fd_step(&self, v: f64) -> f64 {
        FD_RELATIVE_STEP * v.abs().max(0.1 * self.power.sqrt())
    }

    /// Central-difference gradient, `∂f/∂Re + j·∂f/∂Im` per symbol.
    fn gradient(&self, x: &[ComplexPoint]) -> Result<Vec<ComplexPoint>> {
        if let (Local::Dc(kind), Some(g)) = (self.local, &self.grid) {
            let cache = MiCache::new(&Constellation::new(x.to_vec(), self.power)?, self.params, kind, g)?;
            return Ok(x
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    let (hr, hi) = (self.fd_step(p.re), self.fd_step(p.im));
                    let dre = cache.value_with(i, p + hr) - cache.value_with(i, p - hr);
                    let dim = cache.value_with(i, p + ComplexPoint::new(0.0, hi))
                        - cache.value_with(i, p - ComplexPoint::new(0.0, hi));
                    // the cache holds +MI; the objective is −MI
                    ComplexPoint::new(-dre / (2.0 * hr), -dim / (2.0 * hi))
                })
                .collect());
        }
        let mut y = x.to_vec();
        let mut g = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let p = x[i];
            let (hr, hi) = (self.fd_step(p.re), self.fd_step(p.im));
            y[i] = p + hr;
            let fp = self.value(&y);
            y[i] = p - hr;
            let fm = self.value(&y);
            let dre = (fp - fm) / (2.0 * hr);
            y[i] = p + ComplexPoint::new(0.0, hi);
            let fp = self.value(&y);
            y[i] = p - ComplexPoint::new(0.0, hi);
            let fm = self.value(&y);
            let dim = (fp - fm) / (2.0 * hi);
            y[i] = p;
            g.push(ComplexPoint::new(dre, dim));
        }
        Ok(g)
    }
}

fn dot(a: &[ComplexPoint], b: &[ComplexPoint]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u.re * v.re + u.im * v.im).sum()
}

/// Rescales onto `(1/M)·Σ|x|² = P`.
fn project(x: &mut [ComplexPoint], power: f64) {
    let avg = dot(x, x) / x.len() as f64;
    let s = (power / avg).sqrt();
    x.iter_mut().for_each(|p| *p *= s);
}

/// Uniform in the disk of radius `sqrt(2P)`, then projected.
fn random_start(m: usize, power: f64, rng: &mut RngStream) -> Vec<ComplexPoint> {
    let radius = (2.0 * power).sqrt();
    let mut x: Vec<ComplexPoint> = (0..m)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let t = std::f64::consts::TAU * rng.random::<f64>();
            ComplexPoint::from_polar(r, t)
        })
        .collect();
    project(&mut x, power);
    x
}

/// Projected gradient descent with a Barzilai–Borwein first trial step and
/// Armijo backtracking. Returns the final iterate and whether a stopping
/// tolerance (rather than the iteration cap) ended the run.
fn descend(
    local: Local,
    params: &ChannelParams,
    power: f64,
    search: &SearchConfig,
    mut x: Vec<ComplexPoint>,
) -> (Vec<ComplexPoint>, bool) {
    let mut prev: Option<(Vec<ComplexPoint>, Vec<ComplexPoint>)> = None;
    for _ in 0..search.max_iterations {
        let Ok(frozen) = Frozen::new(local, params, power, search.descent_grid, &x) else {
            return (x, false);
        };
        let f0 = frozen.value(&x);
        if !f0.is_finite() {
            return (x, false);
        }
        let Ok(g) = frozen.gradient(&x) else {
            return (x, false);
        };
        // tangential component only: the radial part is undone by the projection
        let radial = dot(&g, &x) / dot(&x, &x);
        let gt: Vec<ComplexPoint> = g.iter().zip(&x).map(|(g, p)| g - p * radial).collect();
        let gn2 = dot(&gt, &gt);
        if !(gn2 > 0.0 && gn2.is_finite()) {
            return (x, gn2 == 0.0);
        }
        let norm_x = dot(&x, &x).sqrt();
        let mut alpha = prev
            .as_ref()
            .and_then(|(px, pg)| {
                let s: Vec<ComplexPoint> = x.iter().zip(px).map(|(a, b)| a - b).collect();
                let y: Vec<ComplexPoint> = gt.iter().zip(pg).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                (sy > 0.0).then(|| dot(&s, &s) / sy)
            })
            .filter(|a| a.is_finite())
            .unwrap_or(0.1 * norm_x / gn2.sqrt());
        // never move further than the iterate's own norm in one step
        alpha = alpha.min(norm_x / gn2.sqrt());

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial: Vec<ComplexPoint> = x.iter().zip(&gt).map(|(p, d)| p - d * alpha).collect();
            project(&mut trial, power);
            let ft = frozen.value(&trial);
            if ft <= f0 - ARMIJO * alpha * gn2 {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= SHRINK;
        }
        let Some((next, ft)) = accepted else {
            return (x, true);
        };
        let moved: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        prev = Some((x, gt));
        x = next;
        if moved <= search.step_tolerance * norm_x || f0 - ft <= search.objective_tolerance * f0.abs() {
            return (x, true);
        }
    }
    (x, false)
}

struct StartOutcome {
    constellation: Constellation,
    value: f64,
    likelihood: Option<LikelihoodKind>,
    converged: bool,
}

fn run_start(
    criterion: Criterion,
    params: &ChannelParams,
    m: usize,
    power: f64,
    search: &SearchConfig,
    index: usize,
) -> Result<StartOutcome> {
    let mut rng = RngStream::derive(search.seed, index as u64);
    let x0 = random_start(m, power, &mut rng);
    let locals: &[Local] = match criterion {
        Criterion::SepA => &[Local::Sep],
        Criterion::MiA => &[Local::Dd],
        Criterion::MiB => &[Local::Dc(LikelihoodKind::Snr), Local::Dc(LikelihoodKind::Phn)],
    };
    let mut best: Option<StartOutcome> = None;
    let mut last_err = None;
    for &local in locals {
        let (x, converged) = descend(local, params, power, search, x0.clone());
        let c = Constellation::new(x, power)?.normalize_power()?;
        match evaluate(&c, criterion, params, search.final_grid) {
            Ok((value, likelihood)) => {
                if best.as_ref().is_none_or(|b| value < b.value) {
                    best = Some(StartOutcome {
                        constellation: c,
                        value,
                        likelihood,
                        converged,
                    });
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Optimization("no descent produced a value".into())))
}

/// Best of `n_starts` independent projected descents, at power budget 1.
///
/// Start `k` draws its initial constellation from stream `k` of the master
/// seed, so the first `n` starts of a larger run are exactly the starts of a
/// run with `n_starts = n`. Ties go to the lower start index.
pub fn optimize_global(
    criterion: Criterion,
    params: &ChannelParams,
    m: usize,
    search: &SearchConfig,
) -> Result<OptimizationResult> {
    let power = DEFAULT_POWER;
    if m < 2 {
        return Err(invalid(format!("global search needs M ≥ 2, got {m}")));
    }
    params.validate()?;
    search.validate()?;
    let outcomes: Vec<Result<StartOutcome>> = (0..search.n_starts)
        .into_par_iter()
        .map(|k| run_start(criterion, params, m, power, search, k))
        .collect();

    let mut start_values = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    let mut best: Option<StartOutcome> = None;
    for (k, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(o) => {
                start_values.push(o.value);
                if best.as_ref().is_none_or(|b| o.value < b.value) {
                    best = Some(o);
                }
            }
            Err(e) => {
                start_values.push(f64::NAN);
                failures.push(format!("start {k}: {e}"));
            }
        }
    }
    let best = best.ok_or_else(|| Error::Optimization(format!("every start failed: {}", failures.join("; "))))?;
    Ok(OptimizationResult {
        method: Method::Global,
        criterion,
        constellation: best.constellation,
        value: best.value,
        likelihood: best.likelihood,
        params: *params,
        final_grid: search.final_grid,
        start_values,
        n_starts: search.n_starts,
        converged: best.converged,
        seed: Some(search.seed),
        search: Some(search.clone()),
        apsk: None,
    })
}
