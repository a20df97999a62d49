//! Constellations, the average-power constraint and the on-disk formats.
//!
//! The JSON format is `{"m": 16, "power": 1.0, "points": [[re, im], ...]}`.
//! The CSV format has two columns `re,im`, one row per point, with an optional
//! header row. Readers accept both; writers default to JSON.

use std::f64::consts::TAU;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::model::ComplexPoint;

/// Canonical power budget.
pub const DEFAULT_POWER: f64 = 1.0;

/// Relative magnitude below which a point is considered to sit at the origin.
pub const ORIGIN_TOLERANCE: f64 = 1e-12;

/// An ordered set of `M` symbols with an average-power budget `P`.
///
/// Index `i` identifies the symbol `x^(i)` everywhere in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ConstellationFile", try_from = "ConstellationFile")]
pub struct Constellation {
    points: Vec<ComplexPoint>,
    power: f64,
}

impl Constellation {
    pub fn new(points: Vec<ComplexPoint>, power: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyConstellation);
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(invalid(format!("power budget must be positive, got {power}")));
        }
        if points.iter().any(|p| !(p.re.is_finite() && p.im.is_finite())) {
            return Err(invalid("constellation points must be finite"));
        }
        Ok(Constellation { points, power })
    }

    /// Builds and immediately scales to the power budget.
    pub fn normalized(points: Vec<ComplexPoint>, power: f64) -> Result<Self> {
        Self::new(points, power)?.normalize_power()
    }

    #[inline]
    pub fn points(&self) -> &[ComplexPoint] {
        &self.points
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// `(1/M) Σ |x^(i)|²`.
    pub fn average_power(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.len() as f64
    }

    /// Scales every point by one positive factor so the average power equals the budget.
    pub fn normalize_power(&self) -> Result<Self> {
        let avg = self.average_power();
        if avg <= 0.0 {
            return Err(Error::ZeroPower);
        }
        let scale = (self.power / avg).sqrt();
        Ok(Constellation {
            points: self.points.iter().map(|p| p * scale).collect(),
            power: self.power,
        })
    }

    /// True when the average power is within `rel_tol` of the budget.
    pub fn is_normalized(&self, rel_tol: f64) -> bool {
        (self.average_power() - self.power).abs() <= rel_tol * self.power
    }

    /// Global rotation by `phi` radians.
    pub fn rotated(&self, phi: f64) -> Self {
        let rot = ComplexPoint::from_polar(1.0, phi);
        Constellation {
            points: self.points.iter().map(|p| p * rot).collect(),
            power: self.power,
        }
    }

    /// Same points in a different order: `perm[k]` is the old index placed at `k`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(invalid("permutation length does not match constellation size"));
        }
        let mut seen = vec![false; perm.len()];
        for &k in perm {
            if k >= perm.len() || std::mem::replace(&mut seen[k], true) {
                return Err(invalid("not a permutation"));
            }
        }
        Ok(Constellation {
            points: perm.iter().map(|&k| self.points[k]).collect(),
            power: self.power,
        })
    }

    /// Index of the first point whose magnitude is (numerically) zero.
    pub fn origin_point(&self) -> Option<usize> {
        let tol = ORIGIN_TOLERANCE * self.power.sqrt();
        self.points.iter().position(|p| p.norm() <= tol)
    }

    pub fn has_origin_point(&self) -> bool {
        self.origin_point().is_some()
    }

    /// Short content hash used to tag metric reports.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.power.to_le_bytes());
        for p in &self.points {
            h.update(p.re.to_le_bytes());
            h.update(p.im.to_le_bytes());
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `M`-PSK at the power budget, points at angles `2πk/M`.
    pub fn psk(m: usize, power: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyConstellation);
        }
        let r = power.sqrt();
        let pts = (0..m)
            .map(|k| ComplexPoint::from_polar(r, TAU * k as f64 / m as f64))
            .collect();
        Self::new(pts, power)
    }

    /// Square `M`-QAM on the odd-integer grid, scaled to the power budget.
    pub fn qam(m: usize, power: f64) -> Result<Self> {
        let side = (m as f64).sqrt().round() as usize;
        if side < 2 || side * side != m {
            return Err(invalid(format!("square QAM needs M = k² with k ≥ 2, got {m}")));
        }
        let coord = |k: usize| (2 * k) as f64 - (side as f64 - 1.0);
        let pts = (0..side)
            .flat_map(|a| (0..side).map(move |b| ComplexPoint::new(coord(a), coord(b))))
            .collect();
        Self::normalized(pts, power)
    }

    /// Spiral constellation: radius grows linearly with the index while the
    /// angle advances by a constant step, `x_k = (r0 + k)·e^{j k Δφ}`.
    pub fn spiral(m: usize, params: SpiralParams, power: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyConstellation);
        }
        if !(params.inner_radius > 0.0) || !params.angle_step.is_finite() {
            return Err(invalid("spiral needs a positive inner radius and a finite angle step"));
        }
        let pts = (0..m)
            .map(|k| ComplexPoint::from_polar(params.inner_radius + k as f64, params.angle_step * k as f64))
            .collect();
        Self::normalized(pts, power)
    }

    /// Reads a JSON or CSV constellation file. Format is picked from the content.
    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn read<R: Read>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Self::parse(&text)
    }

    /// Parses either format. CSV input carries no power field and gets the canonical budget.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            let file: ConstellationFile = serde_json::from_str(text)?;
            file.try_into()
        } else {
            parse_csv(text)
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ConstellationFile::from(self))?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["re", "im"])?;
        for p in &self.points {
            w.write_record([format!("{:e}", p.re), format!("{:e}", p.im)])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes JSON unless the path ends in `.csv`.
    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let body = if is_csv { self.to_csv()? } else { self.to_json()? };
        fs::write(path, body)?;
        Ok(())
    }
}

/// Shape parameters of [`Constellation::spiral`].
///
/// The defaults (golden-angle step, inner radius 1) give `M` distinct
/// magnitudes and well-spread angles; they approximate a spiral QAM design
/// rather than reproduce a published parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpiralParams {
    pub angle_step: f64,
    pub inner_radius: f64,
}

impl Default for SpiralParams {
    fn default() -> Self {
        SpiralParams {
            angle_step: std::f64::consts::PI * (3.0 - 5f64.sqrt()),
            inner_radius: 1.0,
        }
    }
}

/// Serialized form of a constellation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstellationFile {
    pub m: usize,
    pub power: f64,
    pub points: Vec<[f64; 2]>,
}

impl From<&Constellation> for ConstellationFile {
    fn from(c: &Constellation) -> Self {
        ConstellationFile {
            m: c.len(),
            power: c.power,
            points: c.points.iter().map(|p| [p.re, p.im]).collect(),
        }
    }
}

impl From<Constellation> for ConstellationFile {
    fn from(c: Constellation) -> Self {
        (&c).into()
    }
}

impl TryFrom<ConstellationFile> for Constellation {
    type Error = Error;

    fn try_from(f: ConstellationFile) -> Result<Self> {
        if f.m != f.points.len() {
            return Err(Error::Parse(format!(
                "declared m = {} but {} points listed",
                f.m,
                f.points.len()
            )));
        }
        Constellation::new(
            f.points.into_iter().map(|[re, im]| ComplexPoint::new(re, im)).collect(),
            f.power,
        )
    }
}

fn parse_csv(text: &str) -> Result<Constellation> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Parse(format!(
                "row {}: expected 2 columns, got {}",
                row + 1,
                rec.len()
            )));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(re), Ok(im)) => points.push(ComplexPoint::new(re, im)),
            // a single leading header row is allowed
            _ if row == 0 => continue,
            _ => return Err(Error::Parse(format!("row {}: not a pair of numbers", row + 1))),
        }
    }
    Constellation::new(points, DEFAULT_POWER)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> Vec<ComplexPoint> {
        v.iter().map(|&(a, b)| ComplexPoint::new(a, b)).collect()
    }

    #[test]
    fn normalize_examples() {
        let c = Constellation::new(pts(&[(1.0, 0.0), (-1.0, 0.0)]), 1.0).unwrap();
        assert_eq!(c.normalize_power().unwrap(), c);

        let c = Constellation::new(pts(&[(2.0, 0.0), (-2.0, 0.0)]), 1.0).unwrap();
        let n = c.normalize_power().unwrap();
        assert_relative_eq!(n.points()[0].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(n.points()[1].re, -1.0, epsilon = 1e-15);
    }

    // mean square of the grid {±1,±3}² is 10
    #[test]
    fn qam16_is_grid_over_sqrt10() {
        let q = Constellation::qam(16, 1.0).unwrap();
        let s = 10f64.sqrt();
        for p in q.points() {
            for v in [p.re * s, p.im * s] {
                assert!([-3.0, -1.0, 1.0, 3.0].contains(&v.round()));
                assert_relative_eq!(v.round(), v, epsilon = 1e-12);
            }
        }
        assert_relative_eq!(q.average_power(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_constellation_is_rejected() {
        let c = Constellation::new(pts(&[(0.0, 0.0), (0.0, 0.0)]), 1.0).unwrap();
        assert!(matches!(c.normalize_power(), Err(Error::ZeroPower)));
        assert!(matches!(
            Constellation::new(vec![], 1.0),
            Err(Error::EmptyConstellation)
        ));
        assert!(Constellation::new(pts(&[(1.0, 0.0)]), 0.0).is_err());
    }

    #[test]
    fn psk_points_on_unit_circle() {
        let c = Constellation::psk(16, 1.0).unwrap();
        for (k, p) in c.points().iter().enumerate() {
            assert_relative_eq!(p.norm(), 1.0, epsilon = 1e-15);
            let expected = crate::model::wrap_angle(TAU * k as f64 / 16.0);
            assert_relative_eq!(crate::model::wrap_angle(p.arg() - expected), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn spiral_has_distinct_magnitudes() {
        let c = Constellation::spiral(16, SpiralParams::default(), 1.0).unwrap();
        let mut mags: Vec<f64> = c.points().iter().map(|p| p.norm()).collect();
        mags.sort_by(f64::total_cmp);
        assert!(mags.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-6)));
        assert!(c.is_normalized(1e-12));
    }

    #[test]
    fn json_and_csv_round_trip() {
        let c = Constellation::qam(16, 2.0).unwrap();
        let back = Constellation::parse(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        let csv = c.to_csv().unwrap();
        let back = Constellation::parse(&csv).unwrap();
        assert_eq!(back.points(), c.points());
        assert_eq!(back.power(), DEFAULT_POWER);
    }

    #[test]
    fn csv_without_header() {
        let c = Constellation::parse("1.0, 0.0\n-1.0,0\n0,1\n").unwrap();
        assert_eq!(c.len(), 3);
        assert!(Constellation::parse("re,im\n1,0\nfoo,bar\n").is_err());
    }

    #[test]
    fn json_m_mismatch() {
        let err = Constellation::parse(r#"{"m": 3, "power": 1.0, "points": [[1,0],[0,1]]}"#);
        assert!(matches!(err, Err(Error::Parse(_))));
    }

    #[test]
    fn origin_detection() {
        let c = Constellation::new(pts(&[(0.0, 0.0), (1.0, 0.0)]), 1.0).unwrap();
        assert_eq!(c.origin_point(), Some(0));
        assert!(!Constellation::qam(16, 1.0).unwrap().has_origin_point());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent_and_preserves_angles(
            raw in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..24),
            power in 0.1f64..10.0,
        ) {
            let c = Constellation::new(pts(&raw), power).unwrap();
            prop_assume!(c.average_power() > 1e-6);
            let n = c.normalize_power().unwrap();
            prop_assert!(n.is_normalized(1e-12));
            let nn = n.normalize_power().unwrap();
            for (a, b) in n.points().iter().zip(nn.points()) {
                prop_assert!((a - b).norm() <= 1e-12 * power.sqrt());
            }
            for (a, b) in c.points().iter().zip(n.points()) {
                if a.norm() > 1e-9 {
                    prop_assert!(crate::model::wrap_angle(a.arg() - b.arg()).abs() < 1e-12);
                }
            }
        }
    }
}
