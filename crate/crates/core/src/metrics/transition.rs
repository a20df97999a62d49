//! Symbol transition matrix of the channel "phase noise + AWGN + GAP-D" and
//! its mutual information.

use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{invalid, Result};
use crate::metrics::pairwise::{pairwise_error_prob, require_nonzero, PairwiseStats};
use crate::model::ChannelParams;

/// Floor applied to a diagonal entry that would otherwise be negative.
pub const DIAGONAL_FLOOR: f64 = 1e-12;

/// `p[i][j] = P(decide j | sent i)`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    m: usize,
    p: Vec<f64>,
    /// Rows whose diagonal had to be floored and renormalized.
    clamped: Vec<bool>,
}

impl TransitionMatrix {
    /// Builds from row-major probabilities. Rows must be non-negative and sum to 1 within 1e-9.
    pub fn from_rows(m: usize, p: Vec<f64>) -> Result<Self> {
        if m == 0 || p.len() != m * m {
            return Err(invalid(format!("expected {m}×{m} entries, got {}", p.len())));
        }
        for (i, row) in p.chunks(m).enumerate() {
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(invalid(format!("row {i} has an entry outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("row {i} sums to {s}")));
            }
        }
        Ok(TransitionMatrix {
            m,
            p,
            clamped: vec![false; m],
        })
    }

    pub fn identity(m: usize) -> Self {
        let mut p = vec![0.0; m * m];
        for i in 0..m {
            p[i * m + i] = 1.0;
        }
        TransitionMatrix {
            m,
            p,
            clamped: vec![false; m],
        }
    }

    pub fn uniform(m: usize) -> Self {
        TransitionMatrix {
            m,
            p: vec![1.0 / m as f64; m * m],
            clamped: vec![false; m],
        }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.p[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.p.chunks(self.m)
    }

    pub fn clamped_rows(&self) -> &[bool] {
        &self.clamped
    }

    pub fn any_clamped(&self) -> bool {
        self.clamped.iter().any(|&c| c)
    }

    /// Mutual information in bits for equiprobable inputs, clipped to `[0, log2 M]`.
    ///
    /// `I = log2 M + Σ_j Σ_i (1/M) p[i][j] log2(p[i][j] / Σ_k p[k][j])`, with `0·log 0 = 0`.
    pub fn mutual_information(&self) -> f64 {
        let m = self.m;
        let col: Vec<f64> = (0..m).map(|j| (0..m).map(|k| self.get(k, j)).sum()).collect();
        let mut acc = 0.0;
        for row in self.rows() {
            for (&pij, &cj) in row.iter().zip(&col) {
                if pij > 0.0 {
                    acc += pij * (pij / cj).log2();
                }
            }
        }
        let max = (m as f64).log2();
        (max + acc / m as f64).clamp(0.0, max)
    }

    /// Largest per-row total-variation distance to `other`.
    pub fn max_row_total_variation(&self, other: &TransitionMatrix) -> f64 {
        assert_eq!(self.m, other.m, "matrices of different size");
        self.rows()
            .zip(other.rows())
            .map(|(a, b)| 0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Analytic transition matrix: off-diagonals are the pairwise error
/// probabilities, each diagonal is one minus its row's off-diagonal mass.
///
/// At low SNR that remainder can go negative; the diagonal is then floored at
/// [`DIAGONAL_FLOOR`], the row renormalized and flagged.
pub fn transition_matrix(c: &Constellation, params: &ChannelParams) -> Result<TransitionMatrix> {
    params.validate()?;
    require_nonzero(c)?;
    let m = c.len();
    let polar: Vec<(f64, f64)> = c.points().iter().map(|p| (p.norm(), p.arg())).collect();
    let mut p = vec![0.0; m * m];
    let mut clamped = vec![false; m];
    for (i, &(mi, ai)) in polar.iter().enumerate() {
        let row = &mut p[i * m..(i + 1) * m];
        let mut off = 0.0;
        for (j, &(mj, aj)) in polar.iter().enumerate() {
            if i != j {
                let pe = pairwise_error_prob(&PairwiseStats::from_polar(mi, ai, mj, aj, params)).probability;
                row[j] = pe;
                off += pe;
            }
        }
        let diag = 1.0 - off;
        if diag < DIAGONAL_FLOOR {
            row[i] = DIAGONAL_FLOOR;
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= total);
            clamped[i] = true;
        } else {
            row[i] = diag;
        }
    }
    Ok(TransitionMatrix { m, p, clamped })
}

/// Mutual information of the discrete channel seen through GAP-D decisions.
pub fn mi_dd(c: &Constellation, params: &ChannelParams) -> Result<f64> {
    Ok(transition_matrix(c, params)?.mutual_information())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ComplexPoint;
    use approx::assert_relative_eq;

    #[test]
    fn identity_and_uniform_mi() {
        assert_relative_eq!(
            TransitionMatrix::identity(16).mutual_information(),
            4.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(TransitionMatrix::uniform(16).mutual_information(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn noiseless_distinct_magnitudes_give_identity() {
        let pts = (0..8)
            .map(|k| ComplexPoint::from_polar(0.5 + 0.2 * k as f64, 0.9 * k as f64))
            .collect();
        let c = Constellation::normalized(pts, 1.0).unwrap();
        let p = ChannelParams::new(0.01, 1e-10).unwrap();
        let t = transition_matrix(&c, &p).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((t.get(i, j) - want).abs() < 1e-9);
            }
        }
        assert_relative_eq!(mi_dd(&c, &p).unwrap(), 3.0, epsilon = 1e-9);
    }

    #[test]
    fn rows_sum_to_one_and_low_snr_clamps() {
        let c = Constellation::qam(16, 1.0).unwrap();
        for db in [-10.0, 0.0, 8.0, 16.0] {
            let p = ChannelParams::from_eb_n0(0.1, db, 16, 1.0).unwrap();
            let t = transition_matrix(&c, &p).unwrap();
            for row in t.rows() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            }
            if db == -10.0 {
                assert!(t.any_clamped());
            }
            let mi = t.mutual_information();
            assert!((0.0..=4.0).contains(&mi));
        }
    }

    #[test]
    fn from_rows_validates() {
        assert!(TransitionMatrix::from_rows(2, vec![0.5, 0.5, 0.2, 0.7]).is_err());
        assert!(TransitionMatrix::from_rows(2, vec![1.5, -0.5, 0.0, 1.0]).is_err());
        let t = TransitionMatrix::from_rows(2, vec![0.9, 0.1, 0.2, 0.8]).unwrap();
        assert_relative_eq!(
            t.max_row_total_variation(&TransitionMatrix::identity(2)),
            0.2,
            epsilon = 1e-15
        );
    }
}
