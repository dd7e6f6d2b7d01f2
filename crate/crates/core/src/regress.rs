//! Within-transformed OLS and cluster-robust (sandwich) inference.

use crate::demean::{DemeanOptions, Demeaner};
use crate::error::{Error, Result};
use crate::linalg::{invert, mat_mul, symmetric_eigenvalues};
use crate::quarter::Quarter;
use crate::scalar::Scalar;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Relative singular-value cutoff for the rank check.
const RANK_TOL: f64 = 1e-10;

/// A regression-ready panel: one outcome, one running variable, dense
/// DAO (cluster) and quarter (period) indices.
#[derive(Debug, Clone)]
pub struct PanelDataset<F> {
    pub outcome: Vec<F>,
    pub running: Vec<F>,
    pub dao_index: Vec<usize>,
    pub quarter_index: Vec<usize>,
    pub dao_labels: Vec<String>,
    pub quarter_labels: Vec<Quarter>,
}

impl<F: Scalar> PanelDataset<F> {
    pub fn new(
        outcome: Vec<F>,
        running: Vec<F>,
        dao_index: Vec<usize>,
        quarter_index: Vec<usize>,
        dao_labels: Vec<String>,
        quarter_labels: Vec<Quarter>,
    ) -> Result<Self> {
        let n = outcome.len();
        if running.len() != n || dao_index.len() != n || quarter_index.len() != n {
            return Err(Error::InvalidArgument(
                "panel vectors must share one length".into(),
            ));
        }
        // Demeaner::new validates density of both index sets.
        Demeaner::new(&dao_index, &quarter_index, dao_labels.len(), quarter_labels.len())?;
        Ok(PanelDataset {
            outcome,
            running,
            dao_index,
            quarter_index,
            dao_labels,
            quarter_labels,
        })
    }

    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.dao_labels.len()
    }

    pub fn n_periods(&self) -> usize {
        self.quarter_labels.len()
    }

    /// Count of absorbed fixed-effect parameters (G + T - 1).
    pub fn absorbed_df(&self) -> usize {
        self.n_clusters() + self.n_periods() - 1
    }

    /// Kink estimation needs n >= G + T + 2 (two slopes on top of the FE).
    pub fn check_identification(&self, k_slopes: usize) -> Result<()> {
        let needed = self.n_clusters() + self.n_periods() + k_slopes;
        if self.n() < needed {
            return Err(Error::InsufficientData(format!(
                "{} observations cannot identify {} fixed effects plus {} slope(s); need at least {}",
                self.n(),
                self.absorbed_df(),
                k_slopes,
                needed
            )));
        }
        Ok(())
    }

    pub fn demeaner(&self) -> Demeaner {
        Demeaner::new(
            &self.dao_index,
            &self.quarter_index,
            self.n_clusters(),
            self.n_periods(),
        )
        .expect("validated at construction")
    }

    /// Two-way demean the outcome plus the given regressor columns.
    pub fn within_transform(
        &self,
        regressors: Vec<(String, Vec<F>)>,
        opts: &DemeanOptions,
    ) -> Result<DemeanedPanel<F>> {
        let demeaner = self.demeaner();
        let mut outcome = self.outcome.clone();
        demeaner.demean_column(&mut outcome, opts)?;
        let (labels, mut columns): (Vec<String>, Vec<Vec<F>>) = regressors.into_iter().unzip();
        demeaner.demean_columns(&mut columns, opts)?;
        Ok(DemeanedPanel {
            outcome,
            columns,
            labels,
            dao_index: self.dao_index.clone(),
            n_clusters: self.n_clusters(),
            n_periods: self.n_periods(),
        })
    }
}

/// Outcome and regressors after fixed-effect absorption.
#[derive(Debug, Clone)]
pub struct DemeanedPanel<F> {
    pub outcome: Vec<F>,
    /// Column-major regressors.
    pub columns: Vec<Vec<F>>,
    pub labels: Vec<String>,
    pub dao_index: Vec<usize>,
    pub n_clusters: usize,
    pub n_periods: usize,
}

impl<F: Scalar> DemeanedPanel<F> {
    pub fn n(&self) -> usize {
        self.outcome.len()
    }

    pub fn k(&self) -> usize {
        self.columns.len()
    }

    fn xtx(&self) -> Vec<F> {
        let k = self.k();
        let mut xtx = vec![F::zero(); k * k];
        for a in 0..k {
            for b in a..k {
                let dot = self.columns[a]
                    .iter()
                    .zip(&self.columns[b])
                    .map(|(&x, &y)| x * y)
                    .sum::<F>();
                xtx[a * k + b] = dot;
                xtx[b * k + a] = dot;
            }
        }
        xtx
    }
}

#[derive(Debug, Clone)]
pub struct RegressionFit<F> {
    pub coefficients: Vec<F>,
    pub residuals: Vec<F>,
    pub rss: F,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub n_periods: usize,
    /// Count of absorbed FE parameters (G + T - 1).
    pub absorbed_df: usize,
}

/// Least squares on a demeaned panel.
///
/// The design must have full column rank: smallest singular value above
/// `1e-10` times the largest, else the offending column is reported.
pub fn ols_fit<F: Scalar>(demeaned: &DemeanedPanel<F>) -> Result<RegressionFit<F>> {
    let n = demeaned.n();
    let k = demeaned.k();
    if n == 0 {
        return Err(Error::EmptyInput("regression on empty panel"));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("no regressor columns".into()));
    }

    let xtx = demeaned.xtx();
    check_rank(&xtx, k, &demeaned.labels)?;

    let mut xty = vec![F::zero(); k];
    for (j, col) in demeaned.columns.iter().enumerate() {
        xty[j] = col
            .iter()
            .zip(&demeaned.outcome)
            .map(|(&x, &y)| x * y)
            .sum::<F>();
    }
    let xtx_inv = invert(&xtx, k).ok_or_else(|| Error::RankDeficient {
        column: demeaned.labels.last().cloned().unwrap_or_default(),
    })?;
    let beta = mat_mul(&xtx_inv, &xty, k, k, 1);

    let mut residuals = demeaned.outcome.clone();
    for (j, col) in demeaned.columns.iter().enumerate() {
        let bj = beta[j];
        for (r, &x) in residuals.iter_mut().zip(col) {
            *r = *r - bj * x;
        }
    }
    let rss = residuals.iter().map(|&r| r * r).sum::<F>();

    Ok(RegressionFit {
        coefficients: beta,
        residuals,
        rss,
        n_obs: n,
        n_clusters: demeaned.n_clusters,
        n_periods: demeaned.n_periods,
        absorbed_df: demeaned.n_clusters + demeaned.n_periods - 1,
    })
}

fn check_rank<F: Scalar>(xtx: &[F], k: usize, labels: &[String]) -> Result<()> {
    let eigs = symmetric_eigenvalues(xtx, k);
    let sv_max = eigs.last().copied().unwrap_or(F::zero()).max(F::zero()).sqrt();
    let sv_min = eigs.first().copied().unwrap_or(F::zero()).max(F::zero()).sqrt();
    if sv_min > F::from_f64_lossy(RANK_TOL) * sv_max {
        return Ok(());
    }
    // Name the offender: a zero-norm column if there is one, otherwise the
    // last column (the hinge, in the kink design) as the added regressor.
    let threshold = F::from_f64_lossy(RANK_TOL) * sv_max;
    let mut column = labels.last().cloned().unwrap_or_default();
    for j in 0..k {
        if xtx[j * k + j].sqrt() <= threshold {
            column = labels[j].clone();
            break;
        }
    }
    Err(Error::RankDeficient { column })
}

#[derive(Debug, Clone)]
pub struct ClusteredInference<F> {
    pub se: Vec<F>,
    pub t_stat: Vec<F>,
    /// Two-sided p from the t distribution with G - 1 degrees of freedom.
    pub p_value: Vec<F>,
    pub df: usize,
}

/// Liang-Zeger sandwich with the small-sample factor
/// `c = [G/(G-1)] * [(n-1)/(n-K)]`, K counting slopes plus absorbed FE.
pub fn clustered_inference<F: Scalar>(
    fit: &RegressionFit<F>,
    demeaned: &DemeanedPanel<F>,
) -> Result<ClusteredInference<F>> {
    let n = fit.n_obs;
    let k = demeaned.k();
    let g = fit.n_clusters;
    if g < 2 {
        return Err(Error::TooFewClusters { found: g });
    }
    let big_k = k + fit.absorbed_df;
    if big_k >= n {
        return Err(Error::InsufficientData(format!(
            "small-sample correction needs n > K: n = {n}, K = {big_k}"
        )));
    }

    // Cluster scores s_g = X_g' u_g.
    let mut scores = vec![F::zero(); g * k];
    for i in 0..n {
        let cluster = demeaned.dao_index[i];
        let u = fit.residuals[i];
        for j in 0..k {
            scores[cluster * k + j] = scores[cluster * k + j] + demeaned.columns[j][i] * u;
        }
    }
    let mut meat = vec![F::zero(); k * k];
    for c in 0..g {
        for a in 0..k {
            for b in 0..k {
                meat[a * k + b] = meat[a * k + b] + scores[c * k + a] * scores[c * k + b];
            }
        }
    }

    let xtx = demeaned.xtx();
    let bread = invert(&xtx, k).ok_or_else(|| Error::RankDeficient {
        column: demeaned.labels.last().cloned().unwrap_or_default(),
    })?;
    let correction = F::from_count(g) / F::from_count(g - 1)
        * (F::from_count(n - 1) / F::from_count(n - big_k));
    let half = mat_mul(&bread, &meat, k, k, k);
    let vcov = mat_mul(&half, &bread, k, k, k);

    let df = g - 1;
    let t_dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::InvalidArgument(format!("t distribution: {e}")))?;
    let mut se = Vec::with_capacity(k);
    let mut t_stat = Vec::with_capacity(k);
    let mut p_value = Vec::with_capacity(k);
    for j in 0..k {
        let var = (vcov[j * k + j] * correction).max(F::zero());
        let se_j = var.sqrt();
        let beta_j = fit.coefficients[j];
        let (t_j, p_j) = if se_j > F::zero() {
            let t = beta_j / se_j;
            let p = 2.0 * (1.0 - t_dist.cdf(t.to_f64_lossy().abs()));
            (t, F::from_f64_lossy(p.clamp(0.0, 1.0)))
        } else {
            // Degenerate exact fit: report p = 0 instead of NaN.
            let t = if beta_j == F::zero() {
                F::zero()
            } else {
                F::infinity() * beta_j.signum()
            };
            (t, F::zero())
        };
        se.push(se_j);
        t_stat.push(t_j);
        p_value.push(p_j);
    }

    Ok(ClusteredInference {
        se,
        t_stat,
        p_value,
        df,
    })
}
