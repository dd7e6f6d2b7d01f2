//! Two-way fixed-effect absorption by alternating projections.
//!
//! Each column is demeaned by alternately subtracting DAO-group means and
//! quarter-group means until no cell moves by more than the tolerance.
//! For balanced panels this converges after one sweep; unbalanced panels
//! take more.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct DemeanOptions {
    /// Stop once the largest absolute per-cell change in a sweep falls below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for DemeanOptions {
    fn default() -> Self {
        DemeanOptions {
            tol: 1e-10,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DemeanReport {
    /// Sweeps used by the slowest column.
    pub sweeps: usize,
    pub last_change: f64,
}

/// Group structure of a panel, reusable across many columns.
#[derive(Debug, Clone)]
pub struct Demeaner {
    dao_index: Vec<usize>,
    quarter_index: Vec<usize>,
    dao_counts: Vec<usize>,
    quarter_counts: Vec<usize>,
}

impl Demeaner {
    pub fn new(
        dao_index: &[usize],
        quarter_index: &[usize],
        n_daos: usize,
        n_quarters: usize,
    ) -> Result<Self> {
        if dao_index.len() != quarter_index.len() {
            return Err(Error::InvalidArgument(
                "dao and quarter index vectors differ in length".into(),
            ));
        }
        let mut dao_counts = vec![0usize; n_daos];
        let mut quarter_counts = vec![0usize; n_quarters];
        for (&d, &q) in dao_index.iter().zip(quarter_index) {
            if d >= n_daos || q >= n_quarters {
                return Err(Error::InvalidArgument(format!(
                    "group index out of range: dao {d} (G={n_daos}), quarter {q} (T={n_quarters})"
                )));
            }
            dao_counts[d] += 1;
            quarter_counts[q] += 1;
        }
        if dao_counts.iter().any(|&c| c == 0) || quarter_counts.iter().any(|&c| c == 0) {
            return Err(Error::InvalidArgument(
                "group indices must be dense: every dao and quarter needs at least one row".into(),
            ));
        }
        Ok(Demeaner {
            dao_index: dao_index.to_vec(),
            quarter_index: quarter_index.to_vec(),
            dao_counts,
            quarter_counts,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.dao_index.len()
    }

    pub fn n_daos(&self) -> usize {
        self.dao_counts.len()
    }

    pub fn n_quarters(&self) -> usize {
        self.quarter_counts.len()
    }

    /// Demean one column in place.
    pub fn demean_column<F: Scalar>(&self, col: &mut [F], opts: &DemeanOptions) -> Result<DemeanReport> {
        if col.len() != self.n_rows() {
            return Err(Error::InvalidArgument(format!(
                "column length {} does not match panel rows {}",
                col.len(),
                self.n_rows()
            )));
        }
        // Spec tolerance is written for f64; floor it at a few ulps so an f32
        // column cannot spin on rounding noise forever.
        let tol = F::from_f64_lossy(opts.tol).max(F::epsilon() * F::from_f64_lossy(64.0));
        let mut dao_sums = vec![F::zero(); self.n_daos()];
        let mut quarter_sums = vec![F::zero(); self.n_quarters()];
        let mut last_change = F::infinity();

        for sweep in 1..=opts.max_sweeps {
            for s in dao_sums.iter_mut() {
                *s = F::zero();
            }
            for (i, &d) in self.dao_index.iter().enumerate() {
                dao_sums[d] = dao_sums[d] + col[i];
            }
            let dao_means: Vec<F> = dao_sums
                .iter()
                .zip(&self.dao_counts)
                .map(|(&s, &c)| s / F::from_count(c))
                .collect();
            for (i, &d) in self.dao_index.iter().enumerate() {
                col[i] = col[i] - dao_means[d];
            }

            for s in quarter_sums.iter_mut() {
                *s = F::zero();
            }
            for (i, &q) in self.quarter_index.iter().enumerate() {
                quarter_sums[q] = quarter_sums[q] + col[i];
            }
            let quarter_means: Vec<F> = quarter_sums
                .iter()
                .zip(&self.quarter_counts)
                .map(|(&s, &c)| s / F::from_count(c))
                .collect();
            let mut max_change = F::zero();
            for (i, &q) in self.quarter_index.iter().enumerate() {
                col[i] = col[i] - quarter_means[q];
                let cell_change = (dao_means[self.dao_index[i]] + quarter_means[q]).abs();
                max_change = max_change.max(cell_change);
            }

            last_change = max_change;
            if max_change < tol {
                return Ok(DemeanReport {
                    sweeps: sweep,
                    last_change: max_change.to_f64_lossy(),
                });
            }
        }
        Err(Error::DemeanNonConvergence {
            sweeps: opts.max_sweeps,
            last_change: last_change.to_f64_lossy(),
        })
    }

    /// Demean several columns; the report carries the slowest column's sweeps.
    pub fn demean_columns<F: Scalar>(
        &self,
        columns: &mut [Vec<F>],
        opts: &DemeanOptions,
    ) -> Result<DemeanReport> {
        let mut worst = DemeanReport {
            sweeps: 0,
            last_change: 0.0,
        };
        for col in columns.iter_mut() {
            let report = self.demean_column(col, opts)?;
            if report.sweeps > worst.sweeps {
                worst = report;
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn demean(col: &[f64], dao: &[usize], quarter: &[usize], g: usize, t: usize) -> Vec<f64> {
        let demeaner = Demeaner::new(dao, quarter, g, t).unwrap();
        let mut out = col.to_vec();
        demeaner
            .demean_column(&mut out, &DemeanOptions::default())
            .unwrap();
        out
    }

    #[test]
    fn constant_column_becomes_zero() {
        let out = demean(&[5.0; 6], &[0, 0, 1, 1, 2, 2], &[0, 1, 0, 1, 0, 1], 3, 2);
        for v in out {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn single_dao_reduces_to_quarter_demeaning() {
        // With G=1 the dao mean is the overall mean; the result equals
        // subtracting the overall mean and then quarter means.
        let col = [1.0, 2.0, 10.0, 20.0];
        let out = demean(&col, &[0, 0, 0, 0], &[0, 0, 1, 1], 1, 2);
        // quarter means after overall demeaning: q0 -> -6.75, q1 -> 6.75
        let expected = [-0.5, 0.5, -5.0, 5.0];
        for (o, e) in out.iter().zip(expected) {
            assert_relative_eq!(*o, e, epsilon = 1e-9);
        }
    }

    #[test]
    fn balanced_two_by_two_matches_hand_result() {
        // values [[1,2],[3,5]] by (dao, quarter)
        let out = demean(&[1.0, 2.0, 3.0, 5.0], &[0, 0, 1, 1], &[0, 1, 0, 1], 2, 2);
        let expected = [0.25, -0.25, -0.25, 0.25];
        for (o, e) in out.iter().zip(expected) {
            assert_relative_eq!(*o, e, epsilon = 1e-10);
        }
    }

    #[test]
    fn group_means_vanish_on_unbalanced_panel() {
        // 3 daos, 3 quarters, one hole.
        let dao = [0, 0, 0, 1, 1, 2, 2, 2];
        let quarter = [0, 1, 2, 0, 1, 0, 1, 2];
        let col = [3.0, -1.0, 4.0, 1.0, -5.0, 9.0, 2.0, 6.0];
        let out = demean(&col, &dao, &quarter, 3, 3);
        for g in 0..3 {
            let (mut sum, mut cnt) = (0.0, 0);
            for (i, &d) in dao.iter().enumerate() {
                if d == g {
                    sum += out[i];
                    cnt += 1;
                }
            }
            assert!((sum / cnt as f64).abs() < 1e-8);
        }
        for t in 0..3 {
            let (mut sum, mut cnt) = (0.0, 0);
            for (i, &q) in quarter.iter().enumerate() {
                if q == t {
                    sum += out[i];
                    cnt += 1;
                }
            }
            assert!((sum / cnt as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_sparse_group_indices() {
        // dao index 1 never appears
        assert!(Demeaner::new(&[0, 0, 2], &[0, 1, 2], 3, 3).is_err());
    }

    #[test]
    fn works_in_f32() {
        let demeaner = Demeaner::new(&[0, 0, 1, 1], &[0, 1, 0, 1], 2, 2).unwrap();
        let mut col = vec![1.0f32, 2.0, 3.0, 5.0];
        demeaner
            .demean_column(&mut col, &DemeanOptions::default())
            .unwrap();
        assert_relative_eq!(col[0], 0.25f32, epsilon = 1e-6);
    }
}
