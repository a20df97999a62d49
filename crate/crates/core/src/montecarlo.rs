//! Seeded Monte Carlo estimators for the analytic metrics.
//!
//! Samples are generated in fixed blocks of [`BLOCK_SIZE`]; block `b` draws
//! from `RngStream::derive(seed, b)`. Blocks are tallied independently and
//! merged in block order, so a result depends only on `(inputs, n, seed)`:
//! not on the number of worker threads, and not on whether the run was
//! resumed from a checkpoint.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::detectors::{Detector, DetectorKind, LikelihoodKind, SymbolTerms};
use crate::error::{invalid, Error, Result};
use crate::metrics::quadrature::ln_planar_density;
use crate::metrics::TransitionMatrix;
use crate::model::{sample_channel, ChannelParams, ComplexPoint, RngStream};

/// Samples per independently seeded block.
pub const BLOCK_SIZE: u64 = 100_000;

/// Samples between two checkpoint writes.
pub const CHECKPOINT_INTERVAL: u64 = 10_000_000;

pub const MIN_SEP_SAMPLES: u64 = 10_000;
pub const MIN_MI_SAMPLES: u64 = 100_000;

/// Sample budget, master seed and optional resumable state file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_samples: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

impl SimConfig {
    pub fn new(n_samples: u64, seed: u64) -> Self {
        SimConfig {
            n_samples,
            seed,
            checkpoint: None,
        }
    }

    pub fn with_checkpoint(mut self, path: impl Into<PathBuf>) -> Self {
        self.checkpoint = Some(path.into());
        self
    }
}

/// Result of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
    /// Detector or likelihood name.
    pub kind: String,
    pub params: ChannelParams,
    /// Number of error events, for error-rate estimates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<u64>,
}

impl SimReport {
    /// Merges reports of disjoint runs of the same estimator.
    ///
    /// The estimate is the sample-weighted mean `Σ n_k·e_k / Σ n_k`. Error
    /// rates recompute the binomial standard error from the pooled count;
    /// sample means pool second moments, `s² = Σ n_k(n_k·se_k² + e_k²)/N − e²`,
    /// and report `sqrt(s²/N)`.
    pub fn merge(reports: &[SimReport]) -> Result<SimReport> {
        let first = reports.first().ok_or_else(|| invalid("nothing to merge"))?;
        if reports.iter().any(|r| r.kind != first.kind || r.params != first.params) {
            return Err(invalid("reports of different estimators cannot be merged"));
        }
        let n: u64 = reports.iter().map(|r| r.n_samples).sum();
        let nf = n as f64;
        let estimate = reports.iter().map(|r| r.n_samples as f64 * r.estimate).sum::<f64>() / nf;
        let (std_error, errors) = if reports.iter().all(|r| r.errors.is_some()) {
            let e: u64 = reports.iter().map(|r| r.errors.unwrap_or(0)).sum();
            (binomial_std_error(e, n), Some(e))
        } else {
            let second = reports
                .iter()
                .map(|r| {
                    let k = r.n_samples as f64;
                    k * (k * r.std_error * r.std_error + r.estimate * r.estimate)
                })
                .sum::<f64>()
                / nf;
            (((second - estimate * estimate).max(0.0) / nf).sqrt(), None)
        };
        Ok(SimReport {
            estimate,
            std_error,
            n_samples: n,
            seed: first.seed,
            kind: first.kind.clone(),
            params: first.params,
            errors,
        })
    }
}

/// `sqrt(p̂(1 − p̂)/n)`, or the rule-of-three bound `3/n` when no event occurred.
pub fn binomial_std_error(events: u64, n: u64) -> f64 {
    if events == 0 {
        return 3.0 / n as f64;
    }
    let p = events as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Per-block partial result.
trait Tally: Clone + Send + Sync + Serialize + DeserializeOwned {
    fn absorb(&mut self, other: &Self);
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Count {
    events: u64,
}

impl Tally for Count {
    fn absorb(&mut self, other: &Self) {
        self.events += other.events;
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Counts {
    cells: Vec<u64>,
}

impl Tally for Counts {
    fn absorb(&mut self, other: &Self) {
        self.cells.iter_mut().zip(&other.cells).for_each(|(a, b)| *a += b);
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Moments {
    sum: f64,
    sum_sq: f64,
}

impl Tally for Moments {
    fn absorb(&mut self, other: &Self) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.sum_sq += v * v;
    }

    /// Mean and standard error of the mean (population variance).
    fn mean_and_error(&self, n: u64) -> (f64, f64) {
        let nf = n as f64;
        let mean = self.sum / nf;
        let var = (self.sum_sq / nf - mean * mean).max(0.0);
        (mean, (var / nf).sqrt())
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointState<T> {
    fingerprint: String,
    blocks_done: u64,
    tally: T,
}

fn read_checkpoint<T: Tally>(path: &Path, fingerprint: &str) -> Result<Option<(u64, T)>> {
    if !path.exists() {
        return Ok(None);
    }
    let state: CheckpointState<T> = serde_json::from_str(&fs::read_to_string(path)?)?;
    if state.fingerprint != fingerprint {
        return Err(invalid(format!(
            "checkpoint {} belongs to a different run",
            path.display()
        )));
    }
    Ok(Some((state.blocks_done, state.tally)))
}

fn write_checkpoint<T: Tally>(path: &Path, fingerprint: &str, blocks_done: u64, tally: &T) -> Result<()> {
    let state = CheckpointState {
        fingerprint: fingerprint.to_owned(),
        blocks_done,
        tally: tally.clone(),
    };
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_string(&state)?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs `n` samples block by block and merges the block tallies in order.
fn run_blocks<T, F>(cfg: &SimConfig, fingerprint: &str, empty: T, block: F) -> Result<T>
where
    T: Tally,
    F: Fn(&mut RngStream, u64, &mut T) + Sync,
{
    let n_blocks = cfg.n_samples.div_ceil(BLOCK_SIZE);
    let block_len = |b: u64| BLOCK_SIZE.min(cfg.n_samples - b * BLOCK_SIZE);
    let per_checkpoint = CHECKPOINT_INTERVAL / BLOCK_SIZE;

    let (mut done, mut total) = match &cfg.checkpoint {
        Some(path) => read_checkpoint(path, fingerprint)?.unwrap_or((0, empty.clone())),
        None => (0, empty.clone()),
    };
    while done < n_blocks {
        let end = (done + per_checkpoint).min(n_blocks);
        let parts: Vec<T> = (done..end)
            .into_par_iter()
            .map(|b| {
                let mut rng = RngStream::derive(cfg.seed, b);
                let mut t = empty.clone();
                block(&mut rng, block_len(b), &mut t);
                t
            })
            .collect();
        for p in &parts {
            total.absorb(p);
        }
        done = end;
        if let Some(path) = &cfg.checkpoint {
            write_checkpoint(path, fingerprint, done, &total)?;
        }
    }
    Ok(total)
}

fn fingerprint(op: &str, c: &Constellation, params: &ChannelParams, kind: &str, cfg: &SimConfig) -> Result<String> {
    Ok(format!(
        "{op}|{}|{}|{kind}|{}|{}",
        c.content_hash(),
        serde_json::to_string(params)?,
        cfg.n_samples,
        cfg.seed
    ))
}

fn require_samples(n: u64, min: u64) -> Result<()> {
    if n < min {
        return Err(invalid(format!("at least {min} samples are required, got {n}")));
    }
    Ok(())
}

/// Symbol error rate of a detector with equiprobable symbols.
pub fn empirical_sep(
    c: &Constellation,
    params: &ChannelParams,
    kind: DetectorKind,
    cfg: &SimConfig,
) -> Result<SimReport> {
    require_samples(cfg.n_samples, MIN_SEP_SAMPLES)?;
    let det = Detector::new(c, params, kind)?;
    let pts = c.points();
    let m = pts.len();
    let fp = fingerprint("sep", c, params, kind.as_str(), cfg)?;
    let tally = run_blocks(cfg, &fp, Count::default(), |rng, len, t| {
        for _ in 0..len {
            let i = rng.random_range(0..m);
            let r = sample_channel(pts[i], params, rng);
            t.events += (det.decide(r) != i) as u64;
        }
    })?;
    Ok(SimReport {
        estimate: tally.events as f64 / cfg.n_samples as f64,
        std_error: binomial_std_error(tally.events, cfg.n_samples),
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        kind: kind.as_str().into(),
        params: *params,
        errors: Some(tally.events),
    })
}

/// Empirical transition matrix with its raw decision counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTransition {
    pub matrix: TransitionMatrix,
    /// `counts[i·M + j]`: decisions for `j` while `i` was sent.
    pub counts: Vec<u64>,
    pub n_samples: u64,
    pub seed: u64,
    pub kind: String,
    pub params: ChannelParams,
}

impl EmpiricalTransition {
    /// Binomial standard error of entry `(i, j)`; the rule of three applies
    /// when the entry was never or always observed.
    pub fn std_error(&self, i: usize, j: usize) -> f64 {
        let m = self.matrix.size();
        let row: u64 = self.counts[i * m..(i + 1) * m].iter().sum();
        let k = self.counts[i * m + j];
        binomial_std_error(k.min(row - k), row)
    }
}

/// Row-conditional decision frequencies.
///
/// Sample `k` sends symbol `k mod M`, so every row receives `n/M` draws
/// (up to one) and no row is left empty.
pub fn empirical_transition_matrix(
    c: &Constellation,
    params: &ChannelParams,
    kind: DetectorKind,
    cfg: &SimConfig,
) -> Result<EmpiricalTransition> {
    let m = c.len();
    require_samples(cfg.n_samples, 100 * (m * m) as u64)?;
    let det = Detector::new(c, params, kind)?;
    let pts = c.points();
    let fp = fingerprint("transition", c, params, kind.as_str(), cfg)?;
    let empty = Counts { cells: vec![0; m * m] };
    let tally = run_blocks(cfg, &fp, empty, |rng, len, t| {
        // global sample index modulo M
        let offset = (rng.stream() * BLOCK_SIZE) as usize;
        for k in 0..len as usize {
            let i = (offset + k) % m;
            let r = sample_channel(pts[i], params, rng);
            t.cells[i * m + det.decide(r)] += 1;
        }
    })?;
    let mut p = vec![0.0; m * m];
    for i in 0..m {
        let row = &tally.cells[i * m..(i + 1) * m];
        let total: u64 = row.iter().sum();
        for j in 0..m {
            p[i * m + j] = row[j] as f64 / total as f64;
        }
    }
    Ok(EmpiricalTransition {
        matrix: TransitionMatrix::from_rows(m, p)?,
        counts: tally.cells,
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        kind: kind.as_str().into(),
        params: *params,
    })
}

fn likelihood_terms(c: &Constellation, params: &ChannelParams, kind: LikelihoodKind) -> Result<Vec<SymbolTerms>> {
    params.validate()?;
    if kind == LikelihoodKind::Snr {
        if let Some(index) = c.origin_point() {
            return Err(Error::OriginPoint { index });
        }
    }
    Ok(c.points().iter().map(|&x| SymbolTerms::new(x, params)).collect())
}

/// `log2(f_i / Σ_k f_k)` at the polar sample `(ρ, φ)`.
#[inline]
fn log2_posterior(kind: LikelihoodKind, terms: &[SymbolTerms], i: usize, rho: f64, phi: f64, buf: &mut [f64]) -> f64 {
    for (b, t) in buf.iter_mut().zip(terms) {
        *b = ln_planar_density(kind, t, rho, phi);
    }
    let mx = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = buf.iter().map(|l| (l - mx).exp()).sum();
    (buf[i] - mx - s.ln()) / std::f64::consts::LN_2
}

/// Sample estimate of the quadrature functional [`crate::metrics::mi_dc`].
///
/// Received points are drawn from the chosen likelihood itself rather than
/// from the channel, so both estimators target the same integral.
/// Phn: `r = (|x| + u + jv)·e^{j arg x}` with `u ~ N(0, N0/2)`,
/// `v ~ N(0, σ_p²|x|² + N0/2)`. Snr: `|r| ~ N(|x|, N0/2)` and
/// `arg r − arg x ~ N(0, σ_p² + N0/(2|x|²))`, each draw weighted by `|r|/|x|`
/// (the planar Jacobian relative to the polar normalizer) and dropped when it
/// falls outside `|r| > 0`, `|arg r − arg x| ≤ π`.
pub fn empirical_mi_dc(
    c: &Constellation,
    params: &ChannelParams,
    kind: LikelihoodKind,
    cfg: &SimConfig,
) -> Result<SimReport> {
    require_samples(cfg.n_samples, MIN_MI_SAMPLES)?;
    let terms = likelihood_terms(c, params, kind)?;
    let m = terms.len();
    let log2m = (m as f64).log2();
    let h = params.half_n0();
    let fp = fingerprint("mi-dc", c, params, kind.as_str(), cfg)?;
    let tally = run_blocks(cfg, &fp, Moments::default(), |rng, len, t| {
        let mut buf = vec![0.0; m];
        for _ in 0..len {
            let i = rng.random_range(0..m);
            let x = &terms[i];
            let (z1, z2) = (rng.standard_normal(), rng.standard_normal());
            let value = match kind {
                LikelihoodKind::Phn => {
                    let aligned = ComplexPoint::new(x.magnitude + h.sqrt() * z1, (1.0 / x.inv_tangential).sqrt() * z2);
                    let r = aligned * x.derotate.conj();
                    log2m + log2_posterior(kind, &terms, i, r.norm(), r.arg(), &mut buf)
                }
                LikelihoodKind::Snr => {
                    let rho = x.magnitude + h.sqrt() * z1;
                    let residual = z2 / x.inv_angular.sqrt();
                    if rho > 0.0 && residual.abs() <= std::f64::consts::PI {
                        let w = rho / x.magnitude;
                        log2m + w * log2_posterior(kind, &terms, i, rho, x.angle + residual, &mut buf)
                    } else {
                        log2m
                    }
                }
            };
            t.push(value);
        }
    })?;
    let (estimate, std_error) = tally.mean_and_error(cfg.n_samples);
    Ok(SimReport {
        estimate,
        std_error,
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        kind: kind.as_str().into(),
        params: *params,
        errors: None,
    })
}

/// Rate achievable with a mismatched decoder that uses the approximate
/// likelihood on true channel outputs: `E[log2(M f(r|x) / Σ_k f(r|x_k))]`
/// with `r` from [`sample_channel`]. A lower bound on the true channel MI,
/// useful where the approximations degrade.
pub fn empirical_mismatched_rate(
    c: &Constellation,
    params: &ChannelParams,
    kind: LikelihoodKind,
    cfg: &SimConfig,
) -> Result<SimReport> {
    require_samples(cfg.n_samples, MIN_MI_SAMPLES)?;
    let terms = likelihood_terms(c, params, kind)?;
    let pts = c.points();
    let m = terms.len();
    let log2m = (m as f64).log2();
    let fp = fingerprint("mismatched-rate", c, params, kind.as_str(), cfg)?;
    let tally = run_blocks(cfg, &fp, Moments::default(), |rng, len, t| {
        let mut buf = vec![0.0; m];
        for _ in 0..len {
            let i = rng.random_range(0..m);
            let r = sample_channel(pts[i], params, rng);
            t.push(log2m + log2_posterior(kind, &terms, i, r.norm(), r.arg(), &mut buf));
        }
    })?;
    let (estimate, std_error) = tally.mean_and_error(cfg.n_samples);
    Ok(SimReport {
        estimate,
        std_error,
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        kind: format!("mismatched-{}", kind.as_str()),
        params: *params,
        errors: None,
    })
}
