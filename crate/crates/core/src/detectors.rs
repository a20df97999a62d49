//! Approximate-ML detection for the phase-noise channel.
//!
//! Two Gaussian approximations of the symbol likelihood are provided:
//!
//! * the high-SNR likelihood, Gaussian in `(|r|, arg r)` with radial variance
//!   `N0/2` and angular variance `σ_p² + N0/(2|x|²)`; its argmin rule is GAP-D;
//! * the low-phase-noise likelihood, obtained by linearizing `e^{jθ} ≈ 1 + jθ`,
//!   Gaussian in the symbol-aligned frame `u = Re{r e^{−j arg x}} − |x|`,
//!   `v = Im{r e^{−j arg x}}` with variances `N0/2` and `σ_p²|x|² + N0/2`; its
//!   argmin rule is LPN-D.
//!
//! Both densities share the normalizer `1 / (2π sqrt(N0/2 · (σ_p²|x|² + N0/2)))`,
//! which makes them densities over the complex plane (the high-SNR one up to the
//! `|r| ≈ |x|` Jacobian it is derived under). Angle residuals are wrapped to
//! `(−π, π]` before squaring.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::model::{wrap_angle, ChannelParams, ComplexPoint};

/// Decision rule used by [`detect`] and the Monte Carlo simulators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorKind {
    #[serde(rename = "gap-d")]
    GapD,
    #[serde(rename = "lpn-d")]
    LpnD,
    #[serde(rename = "euclidean")]
    Euclidean,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [DetectorKind::GapD, DetectorKind::LpnD, DetectorKind::Euclidean];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::GapD => "gap-d",
            DetectorKind::LpnD => "lpn-d",
            DetectorKind::Euclidean => "euclidean",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown detector `{s}` (expected gap-d, lpn-d or euclidean)")))
    }
}

/// Which approximate likelihood a mutual-information functional is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LikelihoodKind {
    /// High instantaneous SNR approximation (polar Gaussian).
    #[serde(rename = "snr-likelihood")]
    Snr,
    /// Low instantaneous phase noise approximation (linearized rotation).
    #[serde(rename = "phn-likelihood")]
    Phn,
}

impl LikelihoodKind {
    pub const ALL: [LikelihoodKind; 2] = [LikelihoodKind::Snr, LikelihoodKind::Phn];

    pub fn as_str(self) -> &'static str {
        match self {
            LikelihoodKind::Snr => "snr-likelihood",
            LikelihoodKind::Phn => "phn-likelihood",
        }
    }

    /// The detector whose metric is `−2 ln` of this likelihood up to a constant.
    pub fn detector(self) -> DetectorKind {
        match self {
            LikelihoodKind::Snr => DetectorKind::GapD,
            LikelihoodKind::Phn => DetectorKind::LpnD,
        }
    }
}

impl fmt::Display for LikelihoodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LikelihoodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "snr" | "snr-likelihood" => Ok(LikelihoodKind::Snr),
            "phn" | "phn-likelihood" => Ok(LikelihoodKind::Phn),
            _ => Err(Error::Parse(format!(
                "unknown likelihood `{s}` (expected snr-likelihood or phn-likelihood)"
            ))),
        }
    }
}

/// Per-symbol constants shared by the metrics, the likelihoods and the MI integrands.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SymbolTerms {
    pub magnitude: f64,
    pub angle: f64,
    /// `e^{−j arg x}`
    pub derotate: ComplexPoint,
    /// `1 / (N0/2)`
    pub inv_radial: f64,
    /// `1 / (σ_p² + N0/(2|x|²))`, zero at the origin.
    pub inv_angular: f64,
    /// `1 / (σ_p²|x|² + N0/2)`
    pub inv_tangential: f64,
    /// `ln(σ_p²|x|² + N0/2)`
    pub log_var: f64,
    /// `ln` of the shared density normalizer.
    pub ln_norm: f64,
}

impl SymbolTerms {
    pub fn new(x: ComplexPoint, params: &ChannelParams) -> Self {
        let magnitude = x.norm();
        let angle = x.arg();
        let half_n0 = params.half_n0();
        let tangential = params.sigma_p2 * magnitude * magnitude + half_n0;
        let inv_angular = if magnitude > 0.0 {
            1.0 / (params.sigma_p2 + half_n0 / (magnitude * magnitude))
        } else {
            0.0
        };
        let log_var = tangential.ln();
        SymbolTerms {
            magnitude,
            angle,
            derotate: ComplexPoint::from_polar(1.0, -angle),
            inv_radial: 1.0 / half_n0,
            inv_angular,
            inv_tangential: 1.0 / tangential,
            log_var,
            ln_norm: -(2.0 * PI).ln() - 0.5 * half_n0.ln() - 0.5 * log_var,
        }
    }

    /// Quadratic form of the high-SNR likelihood for a sample given in polar form.
    #[inline]
    pub fn snr_quadratic(&self, r_mag: f64, r_arg: f64) -> f64 {
        let dr = r_mag - self.magnitude;
        let da = wrap_angle(r_arg - self.angle);
        dr * dr * self.inv_radial + da * da * self.inv_angular
    }

    /// Quadratic form of the low-phase-noise likelihood.
    #[inline]
    pub fn phn_quadratic(&self, r: ComplexPoint) -> f64 {
        let aligned = r * self.derotate;
        let u = aligned.re - self.magnitude;
        let v = aligned.im;
        u * u * self.inv_radial + v * v * self.inv_tangential
    }
}

fn nonzero_terms(x: ComplexPoint, params: &ChannelParams, index: usize) -> Result<SymbolTerms> {
    if x.norm() == 0.0 {
        return Err(Error::OriginPoint { index });
    }
    Ok(SymbolTerms::new(x, params))
}

/// High-SNR likelihood `f_SNR(r | x)`.
pub fn likelihood_snr(r: ComplexPoint, x: ComplexPoint, params: &ChannelParams) -> Result<f64> {
    let t = nonzero_terms(x, params, 0)?;
    Ok((t.ln_norm - 0.5 * t.snr_quadratic(r.norm(), r.arg())).exp())
}

/// GAP-D metric `L(x)`; equals `−2 ln f_SNR(r|x) − 2 ln(2π) − ln(N0/2)`.
pub fn gap_d_metric(r: ComplexPoint, x: ComplexPoint, params: &ChannelParams) -> Result<f64> {
    let t = nonzero_terms(x, params, 0)?;
    Ok(t.snr_quadratic(r.norm(), r.arg()) + t.log_var)
}

/// Low-phase-noise likelihood `f_phn(r | x)`. Defined at the origin, where it is
/// a circular Gaussian of per-dimension variance `N0/2`.
pub fn likelihood_phn(r: ComplexPoint, x: ComplexPoint, params: &ChannelParams) -> f64 {
    let t = SymbolTerms::new(x, params);
    (t.ln_norm - 0.5 * t.phn_quadratic(r)).exp()
}

/// LPN-D metric; equals `−2 ln f_phn(r|x) − 2 ln(2π) − ln(N0/2)`.
pub fn lpn_d_metric(r: ComplexPoint, x: ComplexPoint, params: &ChannelParams) -> f64 {
    let t = SymbolTerms::new(x, params);
    t.phn_quadratic(r) + t.log_var
}

/// Squared Euclidean distance, the AWGN baseline.
#[inline]
pub fn euclidean_metric(r: ComplexPoint, x: ComplexPoint) -> f64 {
    (r - x).norm_sqr()
}

/// A detector bound to one constellation and one set of channel parameters.
#[derive(Debug, Clone)]
pub struct Detector {
    kind: DetectorKind,
    points: Vec<ComplexPoint>,
    terms: Vec<SymbolTerms>,
}

impl Detector {
    /// Fails for GAP-D when the constellation has a point at the origin, where
    /// the polar likelihood is singular.
    pub fn new(c: &Constellation, params: &ChannelParams, kind: DetectorKind) -> Result<Self> {
        params.validate()?;
        if kind == DetectorKind::GapD {
            if let Some(index) = c.points().iter().position(|p| p.norm() == 0.0) {
                return Err(Error::OriginPoint { index });
            }
        }
        Ok(Detector {
            kind,
            points: c.points().to_vec(),
            terms: c.points().iter().map(|&x| SymbolTerms::new(x, params)).collect(),
        })
    }

    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes the metric of every symbol for the sample `r` into `out`.
    pub fn metrics_into(&self, r: ComplexPoint, out: &mut [f64]) {
        match self.kind {
            DetectorKind::GapD => {
                let (mag, arg) = (r.norm(), r.arg());
                for (o, t) in out.iter_mut().zip(&self.terms) {
                    *o = t.snr_quadratic(mag, arg) + t.log_var;
                }
            }
            DetectorKind::LpnD => {
                for (o, t) in out.iter_mut().zip(&self.terms) {
                    *o = t.phn_quadratic(r) + t.log_var;
                }
            }
            DetectorKind::Euclidean => {
                for (o, &x) in out.iter_mut().zip(&self.points) {
                    *o = euclidean_metric(r, x);
                }
            }
        }
    }

    /// Index of the metric-minimizing symbol; ties go to the lowest index.
    pub fn decide(&self, r: ComplexPoint) -> usize {
        let mut best = 0;
        let mut best_metric = f64::INFINITY;
        let mut consider = |i: usize, m: f64| {
            if m < best_metric {
                best_metric = m;
                best = i;
            }
        };
        match self.kind {
            DetectorKind::GapD => {
                let (mag, arg) = (r.norm(), r.arg());
                for (i, t) in self.terms.iter().enumerate() {
                    consider(i, t.snr_quadratic(mag, arg) + t.log_var);
                }
            }
            DetectorKind::LpnD => {
                for (i, t) in self.terms.iter().enumerate() {
                    consider(i, t.phn_quadratic(r) + t.log_var);
                }
            }
            DetectorKind::Euclidean => {
                for (i, &x) in self.points.iter().enumerate() {
                    consider(i, euclidean_metric(r, x));
                }
            }
        }
        best
    }
}

/// One-shot decision. Builds a [`Detector`]; reuse one for repeated decisions.
pub fn detect(r: ComplexPoint, c: &Constellation, params: &ChannelParams, kind: DetectorKind) -> Result<usize> {
    Ok(Detector::new(c, params, kind)?.decide(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_channel, RngStream};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(s2: f64, n0: f64) -> ChannelParams {
        ChannelParams::new(s2, n0).unwrap()
    }

    #[test]
    fn snr_density_at_symbol() {
        let x = ComplexPoint::new(1.0, 0.0);
        // 1 / (2π sqrt(0.05 · 0.06))
        let d = likelihood_snr(x, x, &params(0.01, 0.1)).unwrap();
        assert_relative_eq!(d, 2.905_758_415_662_736, max_relative = 1e-12);
    }

    #[test]
    fn snr_density_even_in_angle() {
        let p = params(0.01, 0.1);
        let x = ComplexPoint::from_polar(0.8, 0.3);
        let plus = likelihood_snr(x * ComplexPoint::from_polar(1.0, 0.05), x, &p).unwrap();
        let minus = likelihood_snr(x * ComplexPoint::from_polar(1.0, -0.05), x, &p).unwrap();
        assert_relative_eq!(plus, minus, max_relative = 1e-12);
    }

    // Planar integral ∫∫ f ρ dρ dφ by an independent midpoint rule.
    fn planar_integral(f: impl Fn(ComplexPoint) -> f64, rmax: f64, jacobian: bool) -> f64 {
        let (nr, nphi) = (4000, 2000);
        let (hr, hphi) = (rmax / nr as f64, 2.0 * PI / nphi as f64);
        let mut s = 0.0;
        for i in 0..nr {
            let rho = (i as f64 + 0.5) * hr;
            let w = if jacobian { rho } else { 1.0 };
            for k in 0..nphi {
                let phi = -PI + (k as f64 + 0.5) * hphi;
                s += f(ComplexPoint::from_polar(rho, phi)) * w;
            }
        }
        s * hr * hphi
    }

    #[test]
    fn snr_density_normalizes_as_planar_density() {
        // |x|²/N0 ≥ 10
        let p = params(0.01, 0.02);
        for mag in [0.5, 1.0, 2.0] {
            let x = ComplexPoint::from_polar(mag, 0.4);
            let f = |r| likelihood_snr(r, x, &p).unwrap();
            let with = planar_integral(f, mag + 1.5, true);
            assert!((with - 1.0).abs() < 1e-3, "|x|={mag}: {with}");
            // without the Jacobian the mass is 1/|x|
            let without = planar_integral(f, mag + 1.5, false);
            assert!((without * mag - 1.0).abs() < 1e-3, "|x|={mag}: {without}");
        }
    }

    #[test]
    fn phn_density_normalizes() {
        let p = params(0.05, 0.1);
        let x = ComplexPoint::from_polar(1.2, -2.0);
        // Cartesian trapezoid over a ±3 box around x (>10 std devs)
        let n = 1200;
        let h = 6.0 / n as f64;
        let mut s = 0.0;
        for a in 0..=n {
            for b in 0..=n {
                let r = x + ComplexPoint::new(-3.0 + a as f64 * h, -3.0 + b as f64 * h);
                let w = if a == 0 || a == n { 0.5 } else { 1.0 } * if b == 0 || b == n { 0.5 } else { 1.0 };
                s += w * likelihood_phn(r, x, &p);
            }
        }
        assert!((s * h * h - 1.0).abs() < 1e-6, "{}", s * h * h);
    }

    #[test]
    fn phn_density_examples() {
        let p = params(0.1, 0.2);
        let x = ComplexPoint::new(1.0, 0.0);
        assert_relative_eq!(likelihood_phn(x, x, &p), 1.125_395_395_196_382_5, max_relative = 1e-12);
        // origin: circular Gaussian, per-dimension variance N0/2
        let o = ComplexPoint::new(0.0, 0.0);
        let r = ComplexPoint::new(0.3, -0.2);
        let circ = (-(r.norm_sqr()) / (2.0 * 0.1)).exp() / (2.0 * PI * 0.1);
        assert_relative_eq!(likelihood_phn(r, o, &p), circ, max_relative = 1e-12);
    }

    #[test]
    fn metric_examples() {
        let x = ComplexPoint::new(1.0, 0.0);
        assert_eq!(gap_d_metric(x, x, &params(0.0, 2.0)).unwrap(), 0.0);
        let g = gap_d_metric(ComplexPoint::new(1.1, 0.0), x, &params(0.01, 0.1)).unwrap();
        // 0.01/0.05 + ln 0.06
        assert_relative_eq!(g, 0.2 - 2.813_410_716_760_036_4, max_relative = 1e-12);
        let y = ComplexPoint::new(0.6, 0.8);
        assert_relative_eq!(
            lpn_d_metric(y, y, &params(0.1, 0.2)),
            -1.609_437_912_434_100_3,
            max_relative = 1e-12
        );
    }

    #[test]
    fn gap_d_rejects_origin() {
        let o = ComplexPoint::new(0.0, 0.0);
        assert!(matches!(
            gap_d_metric(o, o, &params(0.01, 0.1)),
            Err(Error::OriginPoint { .. })
        ));
        let c = Constellation::new(vec![o, ComplexPoint::new(1.0, 0.0)], 1.0).unwrap();
        assert!(matches!(
            detect(o, &c, &params(0.01, 0.1), DetectorKind::GapD),
            Err(Error::OriginPoint { index: 0 })
        ));
        assert_eq!(detect(o, &c, &params(0.01, 0.1), DetectorKind::LpnD).unwrap(), 0);
    }

    #[test]
    fn exact_symbol_is_detected() {
        let c = Constellation::qam(16, 1.0).unwrap();
        let p = params(0.01, 1e-4);
        for kind in DetectorKind::ALL {
            assert_eq!(detect(c.points()[3], &c, &p, kind).unwrap(), 3);
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let x = ComplexPoint::new(1.0, 0.0);
        let c = Constellation::new(vec![x, x, -x], 1.0).unwrap();
        for kind in DetectorKind::ALL {
            assert_eq!(detect(x, &c, &params(0.01, 0.1), kind).unwrap(), 0);
        }
    }

    #[test]
    fn kind_strings() {
        for k in DetectorKind::ALL {
            assert_eq!(k.as_str().parse::<DetectorKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
        assert_eq!("phn".parse::<LikelihoodKind>().unwrap(), LikelihoodKind::Phn);
        assert!("mlse".parse::<DetectorKind>().is_err());
    }

    // argmin of the metric = argmax of the likelihood, checked by brute force.
    #[test]
    fn monotone_transform_oracle() {
        let c = Constellation::qam(16, 1.0).unwrap();
        let p = ChannelParams::from_eb_n0(0.01, 10.0, 16, 1.0).unwrap();
        let mut rng = RngStream::new(3);
        let gap = Detector::new(&c, &p, DetectorKind::GapD).unwrap();
        let lpn = Detector::new(&c, &p, DetectorKind::LpnD).unwrap();
        let argmax = |f: &dyn Fn(ComplexPoint) -> f64| {
            let mut best = (0, f64::NEG_INFINITY);
            for (i, &x) in c.points().iter().enumerate() {
                let v = f(x);
                if v > best.1 {
                    best = (i, v);
                }
            }
            best.0
        };
        for n in 0..10_000 {
            let sent = c.points()[n % 16];
            let r = sample_channel(sent, &p, &mut rng);
            assert_eq!(gap.decide(r), argmax(&|x| likelihood_snr(r, x, &p).unwrap()));
            assert_eq!(lpn.decide(r), argmax(&|x| likelihood_phn(r, x, &p)));
        }
    }

    #[test]
    fn zero_phase_noise_lpn_is_euclidean() {
        let c = Constellation::qam(16, 1.0).unwrap();
        let p = ChannelParams::from_eb_n0(0.0, 4.0, 16, 1.0).unwrap();
        let lpn = Detector::new(&c, &p, DetectorKind::LpnD).unwrap();
        let euc = Detector::new(&c, &p, DetectorKind::Euclidean).unwrap();
        let mut rng = RngStream::new(8);
        for n in 0..20_000 {
            let r = sample_channel(c.points()[n % 16], &p, &mut rng);
            assert_eq!(lpn.decide(r), euc.decide(r));
            let x = c.points()[(n * 7) % 16];
            let expected = (r - x).norm_sqr() / p.half_n0() + p.half_n0().ln();
            assert_relative_eq!(lpn_d_metric(r, x, &p), expected, max_relative = 1e-10, epsilon = 1e-10);
        }
    }

    proptest! {
        // metric = −2 ln f − const with the same const for every symbol
        #[test]
        fn metric_likelihood_consistency(
            rr in -2.0f64..2.0, ri in -2.0f64..2.0,
            xs in proptest::collection::vec((0.05f64..2.0, -3.1f64..3.1), 2..6),
            s2 in 0.0f64..0.1, n0 in 0.01f64..1.0,
        ) {
            let p = params(s2, n0);
            let r = ComplexPoint::new(rr, ri);
            let want = 2.0 * (2.0 * PI).ln() + p.half_n0().ln();
            for &(m, a) in &xs {
                let x = ComplexPoint::from_polar(m, a);
                let snr = likelihood_snr(r, x, &p).unwrap();
                prop_assume!(snr > 1e-250);
                let c1 = -2.0 * snr.ln() - gap_d_metric(r, x, &p).unwrap();
                prop_assert!((c1 - want).abs() < 1e-9 * (1.0 + want.abs()));
                let phn = likelihood_phn(r, x, &p);
                prop_assume!(phn > 1e-250);
                let c2 = -2.0 * phn.ln() - lpn_d_metric(r, x, &p);
                prop_assert!((c2 - want).abs() < 1e-9 * (1.0 + want.abs()));
            }
        }

        #[test]
        fn detection_is_rotation_covariant(
            rr in -1.5f64..1.5, ri in -1.5f64..1.5, phi in -3.0f64..3.0,
        ) {
            let c = Constellation::qam(16, 1.0).unwrap();
            let p = params(0.01, 0.05);
            let r = ComplexPoint::new(rr, ri);
            let rot = ComplexPoint::from_polar(1.0, phi);
            let cr = c.rotated(phi);
            for kind in DetectorKind::ALL {
                let a = detect(r, &c, &p, kind).unwrap();
                let b = detect(r * rot, &cr, &p, kind).unwrap();
                if a != b {
                    // only acceptable on a numerical tie
                    let d = Detector::new(&c, &p, kind).unwrap();
                    let mut m = vec![0.0; 16];
                    d.metrics_into(r, &mut m);
                    prop_assert!((m[a] - m[b]).abs() < 1e-9 * (1.0 + m[a].abs()), "{kind}: {a} vs {b}");
                }
            }
        }
    }
}
