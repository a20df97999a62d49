//! Mutual information of the discrete-input, continuous-output phase-noise
//! channel under either approximate likelihood, by composite trapezoidal
//! quadrature on a polar grid.
//!
//! Both likelihoods are integrated as planar densities, i.e. with the
//! Jacobian `ρ` of `dr = ρ dρ dφ`. For the high-SNR likelihood this is the
//! reading under which its normalizer yields unit mass: without `ρ` the mass
//! around a symbol of magnitude `|x|` is `1/|x|`.

use std::f64::consts::{LN_2, PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::detectors::{LikelihoodKind, SymbolTerms};
use crate::error::{invalid, Error, Result};
use crate::model::{wrap_angle, ChannelParams, ComplexPoint};

/// Floor applied to every density value before taking logarithms.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Smallest number of steps allowed along either grid axis.
pub const MIN_STEPS: usize = 16;

/// `(n_r, n_phi)` of the default grid.
pub const FULL_STEPS: (usize, usize) = (512, 1024);

/// `(n_r, n_phi)` of the grid used inside optimization loops.
pub const REDUCED_STEPS: (usize, usize) = (128, 256);

pub(crate) const LN_DENSITY_FLOOR: f64 = -690.775_527_898_213_7;

/// Polar integration grid over `ρ ∈ [0, r_max]`, `φ ∈ [−π, π)`.
///
/// Radial nodes are `ρ_j = j·r_max/n_r` for `j = 0..=n_r` with trapezoid
/// weights; angular nodes are `φ_k = −π + 2πk/n_phi` with equal weights
/// (the periodic trapezoid rule).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub r_max: f64,
    pub n_r: usize,
    pub n_phi: usize,
}

impl QuadratureGrid {
    /// Step counts must be even (the error estimate uses every other node) and at least [`MIN_STEPS`].
    pub fn new(r_max: f64, n_r: usize, n_phi: usize) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(invalid(format!("grid radius must be positive, got {r_max}")));
        }
        for (name, n) in [("n_r", n_r), ("n_phi", n_phi)] {
            if n < MIN_STEPS || n % 2 != 0 {
                return Err(invalid(format!(
                    "{name} must be even and at least {MIN_STEPS}, got {n}"
                )));
            }
        }
        Ok(QuadratureGrid { r_max, n_r, n_phi })
    }

    /// Smallest admissible radius: `max|x| + 8·sqrt(N0/2)`.
    pub fn minimum_r_max(c: &Constellation, params: &ChannelParams) -> f64 {
        max_magnitude(c) + 8.0 * params.half_n0().sqrt()
    }

    /// Radius reaching eight standard deviations past every symbol along both
    /// its radial and its tangential axis.
    ///
    /// The tangential spread `sqrt(σ_p²|x|² + N0/2)` exceeds the radial one
    /// under phase noise, so this is never below [`Self::minimum_r_max`].
    pub fn covering_r_max(c: &Constellation, params: &ChannelParams) -> f64 {
        let h = params.half_n0();
        let eight_sd = 8.0 * h.sqrt();
        c.points()
            .iter()
            .map(|x| {
                let m = x.norm();
                let radial = m + eight_sd;
                (radial * radial + 64.0 * (params.sigma_p2 * m * m + h)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn for_constellation(c: &Constellation, params: &ChannelParams, n_r: usize, n_phi: usize) -> Result<Self> {
        Self::new(Self::covering_r_max(c, params), n_r, n_phi)
    }

    /// 512 × 1024 grid covering `c`.
    pub fn default_for(c: &Constellation, params: &ChannelParams) -> Result<Self> {
        Self::for_constellation(c, params, FULL_STEPS.0, FULL_STEPS.1)
    }

    /// 128 × 256 grid covering `c`.
    pub fn reduced_for(c: &Constellation, params: &ChannelParams) -> Result<Self> {
        Self::for_constellation(c, params, REDUCED_STEPS.0, REDUCED_STEPS.1)
    }

    /// Same radius, both step counts doubled.
    pub fn refined(&self) -> Self {
        QuadratureGrid {
            n_r: 2 * self.n_r,
            n_phi: 2 * self.n_phi,
            ..*self
        }
    }

    pub fn validate_for(&self, c: &Constellation, params: &ChannelParams) -> Result<()> {
        Self::new(self.r_max, self.n_r, self.n_phi)?;
        let need = Self::minimum_r_max(c, params);
        if self.r_max < need {
            return Err(invalid(format!(
                "grid radius {} is below the required {need}",
                self.r_max
            )));
        }
        Ok(())
    }

    fn radial_step(&self) -> f64 {
        self.r_max / self.n_r as f64
    }

    fn angular_nodes(&self) -> Vec<f64> {
        (0..self.n_phi)
            .map(|k| -PI + TAU * k as f64 / self.n_phi as f64)
            .collect()
    }
}

fn max_magnitude(c: &Constellation) -> f64 {
    c.points().iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// A mutual-information value with its discretization error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    /// Bits, clipped to `[0, log2 M]`.
    pub bits: f64,
    /// Unclipped quadrature value.
    pub raw: f64,
    /// `|I − I_half|`, with `I_half` computed on every other node.
    pub error_estimate: f64,
    pub kind: LikelihoodKind,
    pub grid: QuadratureGrid,
}

/// Log of a likelihood as a planar density, Jacobian included, at polar node `(ρ, φ)`.
#[inline]
pub(crate) fn ln_planar_density(kind: LikelihoodKind, t: &SymbolTerms, rho: f64, phi: f64) -> f64 {
    let q = match kind {
        LikelihoodKind::Snr => t.snr_quadratic(rho, phi),
        LikelihoodKind::Phn => t.phn_quadratic(ComplexPoint::from_polar(rho, phi)),
    };
    (t.ln_norm - 0.5 * q + rho.ln()).max(LN_DENSITY_FLOOR)
}

/// Per-symbol, per-angle tables that turn each node's quadratic form into a
/// few multiply-adds.
struct AngularTables {
    m: usize,
    kind: LikelihoodKind,
    terms: Vec<SymbolTerms>,
    /// Snr: `wrap(φ_k − arg x_i)²/(σ_p² + N0/(2|x_i|²))`. Phn: `cos(φ_k − arg x_i)`.
    first: Vec<f64>,
    /// Phn only: `sin(φ_k − arg x_i)`.
    second: Vec<f64>,
}

impl AngularTables {
    fn new(terms: Vec<SymbolTerms>, kind: LikelihoodKind, angles: &[f64]) -> Self {
        let m = terms.len();
        let n = angles.len();
        let mut first = vec![0.0; n * m];
        let mut second = match kind {
            LikelihoodKind::Snr => Vec::new(),
            LikelihoodKind::Phn => vec![0.0; n * m],
        };
        for (k, &phi) in angles.iter().enumerate() {
            for (i, t) in terms.iter().enumerate() {
                let d = phi - t.angle;
                match kind {
                    LikelihoodKind::Snr => {
                        let w = wrap_angle(d);
                        first[k * m + i] = w * w * t.inv_angular;
                    }
                    LikelihoodKind::Phn => {
                        let (s, c) = d.sin_cos();
                        first[k * m + i] = c;
                        second[k * m + i] = s;
                    }
                }
            }
        }
        AngularTables {
            m,
            kind,
            terms,
            first,
            second,
        }
    }

    /// Fills `out` with the floored log densities of every symbol at node `(ρ, φ_k)`.
    #[inline]
    fn ln_densities(&self, rho: f64, ln_rho: f64, k: usize, out: &mut [f64]) {
        let base = k * self.m;
        for (i, t) in self.terms.iter().enumerate() {
            let q = match self.kind {
                LikelihoodKind::Snr => {
                    let dr = rho - t.magnitude;
                    dr * dr * t.inv_radial + self.first[base + i]
                }
                LikelihoodKind::Phn => {
                    let u = rho * self.first[base + i] - t.magnitude;
                    let v = rho * self.second[base + i];
                    u * u * t.inv_radial + v * v * t.inv_tangential
                }
            };
            out[i] = (t.ln_norm - 0.5 * q + ln_rho).max(LN_DENSITY_FLOOR);
        }
    }
}

/// `Σ_i f_i·ln(f_i / Σ_k f_k)` from log densities; `scratch` must have the same length.
#[inline]
fn node_term(ln_f: &[f64], scratch: &mut [f64]) -> f64 {
    let mx = ln_f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (e, &l) in scratch.iter_mut().zip(ln_f) {
        *e = (l - mx).exp();
        s += *e;
    }
    let ln_s = mx + s.ln();
    let mut acc = 0.0;
    for (&e, &l) in scratch.iter().zip(ln_f) {
        acc += e * (l - ln_s);
    }
    acc * mx.exp()
}

fn symbol_terms(c: &Constellation, params: &ChannelParams, kind: LikelihoodKind) -> Result<Vec<SymbolTerms>> {
    if kind == LikelihoodKind::Snr {
        if let Some(index) = c.points().iter().position(|x| x.norm() == 0.0) {
            return Err(Error::OriginPoint { index });
        }
    }
    Ok(c.points().iter().map(|&x| SymbolTerms::new(x, params)).collect())
}

/// `I = log2 M + (1/M) Σ_i ∫ f(r|x_i)·log2(f(r|x_i) / Σ_k f(r|x_k)) dr`.
///
/// The sum over radial rings is accumulated per ring and then added in ring
/// order, so the result does not depend on the thread count.
pub fn mi_dc(
    c: &Constellation,
    params: &ChannelParams,
    kind: LikelihoodKind,
    grid: &QuadratureGrid,
) -> Result<MiEstimate> {
    params.validate()?;
    grid.validate_for(c, params)?;
    let terms = symbol_terms(c, params, kind)?;
    let m = c.len();
    let angles = grid.angular_nodes();
    let tables = AngularTables::new(terms, kind, &angles);
    let h = grid.radial_step();

    let rings: Vec<(f64, f64)> = (1..=grid.n_r)
        .into_par_iter()
        .map_init(
            || (vec![0.0; m], vec![0.0; m]),
            |(buf, scratch), j| {
                let rho = j as f64 * h;
                let ln_rho = rho.ln();
                let mut full = 0.0;
                let mut half = 0.0;
                for k in 0..grid.n_phi {
                    tables.ln_densities(rho, ln_rho, k, buf);
                    let v = node_term(buf, scratch);
                    full += v;
                    if k % 2 == 0 {
                        half += v;
                    }
                }
                (full, if j % 2 == 0 { half } else { 0.0 })
            },
        )
        .collect();

    let end_weight = |j: usize, n: usize| if j == n { 0.5 } else { 1.0 };
    let mut full = 0.0;
    let mut half = 0.0;
    for (idx, &(f, hf)) in rings.iter().enumerate() {
        let j = idx + 1;
        full += end_weight(j, grid.n_r) * f;
        if j % 2 == 0 {
            half += end_weight(j, grid.n_r) * hf;
        }
    }
    let dphi = TAU / grid.n_phi as f64;
    full *= h * dphi;
    half *= 4.0 * h * dphi;

    let log2m = (m as f64).log2();
    let to_bits = |t: f64| log2m + t / (m as f64 * LN_2);
    let raw = to_bits(full);
    Ok(MiEstimate {
        bits: raw.clamp(0.0, log2m),
        raw,
        error_estimate: (raw - to_bits(half)).abs(),
        kind,
        grid: *grid,
    })
}

/// The larger of the two characterizations. The high-SNR likelihood is
/// skipped when the constellation has a point at the origin.
pub fn mi_dc_best(c: &Constellation, params: &ChannelParams, grid: &QuadratureGrid) -> Result<MiEstimate> {
    let phn = mi_dc(c, params, LikelihoodKind::Phn, grid)?;
    if c.points().iter().any(|x| x.norm() == 0.0) {
        return Ok(phn);
    }
    let snr = mi_dc(c, params, LikelihoodKind::Snr, grid)?;
    Ok(if snr.raw > phn.raw { snr } else { phn })
}

/// Quadrature state that re-evaluates the MI after moving one symbol in
/// `O(nodes)` instead of `O(M·nodes)`.
///
/// Per node it keeps every symbol's log density, `S = Σ f_i` and
/// `A = Σ f_i ln f_i`; the integrand is `A − S ln S`.
pub(crate) struct MiCache {
    kind: LikelihoodKind,
    params: ChannelParams,
    m: usize,
    /// `(ρ, φ, weight)` per node; the ρ = 0 ring carries no mass and is omitted.
    nodes: Vec<(f64, f64, f64)>,
    ln_f: Vec<f64>,
    s: Vec<f64>,
    a: Vec<f64>,
    base: f64,
}

impl MiCache {
    pub fn new(c: &Constellation, params: &ChannelParams, kind: LikelihoodKind, grid: &QuadratureGrid) -> Result<Self> {
        params.validate()?;
        grid.validate_for(c, params)?;
        let terms = symbol_terms(c, params, kind)?;
        let m = c.len();
        let h = grid.radial_step();
        let dphi = TAU / grid.n_phi as f64;
        let angles = grid.angular_nodes();
        let mut nodes = Vec::with_capacity(grid.n_r * grid.n_phi);
        for j in 1..=grid.n_r {
            let rho = j as f64 * h;
            let w = if j == grid.n_r { 0.5 } else { 1.0 } * h * dphi;
            nodes.extend(angles.iter().map(|&phi| (rho, phi, w)));
        }
        let mut ln_f = vec![0.0; nodes.len() * m];
        let mut s = vec![0.0; nodes.len()];
        let mut a = vec![0.0; nodes.len()];
        for (n, &(rho, phi, _)) in nodes.iter().enumerate() {
            let row = &mut ln_f[n * m..(n + 1) * m];
            for (i, t) in terms.iter().enumerate() {
                let l = ln_planar_density(kind, t, rho, phi);
                row[i] = l;
                let f = l.exp();
                s[n] += f;
                a[n] += f * l;
            }
        }
        let mut cache = MiCache {
            kind,
            params: *params,
            m,
            nodes,
            ln_f,
            s,
            a,
            base: 0.0,
        };
        cache.base = cache.total(|n| (cache.s[n], cache.a[n]));
        Ok(cache)
    }

    fn total(&self, node: impl Fn(usize) -> (f64, f64)) -> f64 {
        let mut acc = 0.0;
        for (n, &(_, _, w)) in self.nodes.iter().enumerate() {
            let (s, a) = node(n);
            acc += w * (a - s * s.ln());
        }
        let log2m = (self.m as f64).log2();
        log2m + acc / (self.m as f64 * LN_2)
    }

    /// Unclipped MI of the cached constellation.
    #[cfg(test)]
    pub fn value(&self) -> f64 {
        self.base
    }

    /// Unclipped MI with symbol `idx` replaced by `x`; the cache is unchanged.
    pub fn value_with(&self, idx: usize, x: ComplexPoint) -> f64 {
        let t = SymbolTerms::new(x, &self.params);
        let m = self.m;
        self.total(|n| {
            let (rho, phi, _) = self.nodes[n];
            let old = self.ln_f[n * m + idx];
            let new = ln_planar_density(self.kind, &t, rho, phi);
            let (fo, fn_) = (old.exp(), new.exp());
            let s = (self.s[n] - fo + fn_).max(f64::MIN_POSITIVE);
            (s, self.a[n] - fo * old + fn_ * new)
        })
    }
}
