//! Kink (hinge) regression with a data-driven breakpoint.
//!
//! The model is outcome = FE + b1 * running + b2 * (running - c)+, with the
//! cutoff c chosen by RSS-minimizing grid search over the interior of the
//! running-variable distribution.

use crate::demean::DemeanOptions;
use crate::error::{Error, Result};
use crate::regress::{clustered_inference, ols_fit, ClusteredInference, DemeanedPanel, PanelDataset, RegressionFit};
use crate::scalar::Scalar;
use crate::stats::percentile;
use rayon::prelude::*;

/// Relative RSS difference below which two candidates tie (smaller cutoff wins).
const RSS_TIE_TOL: f64 = 1e-12;

/// The kink basis at cutoff `c`: `(x, max(x - c, 0))`.
pub fn kink_basis<F: Scalar>(x: F, c: F) -> (F, F) {
    (x, (x - c).max(F::zero()))
}

/// `count` equally spaced candidate cutoffs spanning the `p_lo`th to `p_hi`th
/// percentiles of the running variable, endpoints included.
pub fn candidate_grid<F: Scalar>(running: &[F], p_lo: f64, p_hi: f64, count: usize) -> Result<Vec<F>> {
    if count < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid needs at least 2 points, got {count}"
        )));
    }
    let lo = percentile(running, p_lo)?;
    let hi = percentile(running, p_hi)?;
    if !(lo < hi) {
        return Err(Error::DegenerateGrid);
    }
    let step = (hi - lo) / F::from_count(count - 1);
    let mut grid: Vec<F> = (0..count).map(|i| lo + step * F::from_count(i)).collect();
    grid[count - 1] = hi;
    Ok(grid)
}

/// Fixed-effects fit of the two-regressor kink design at a given cutoff.
pub fn fit_kink_at<F: Scalar>(
    dataset: &PanelDataset<F>,
    cutoff: F,
) -> Result<(RegressionFit<F>, ClusteredInference<F>)> {
    dataset.check_identification(2)?;
    let hinge: Vec<F> = dataset.running.iter().map(|&x| kink_basis(x, cutoff).1).collect();
    let demeaned = dataset.within_transform(
        vec![
            ("running".to_string(), dataset.running.clone()),
            ("hinge".to_string(), hinge),
        ],
        &DemeanOptions::default(),
    )?;
    let fit = ols_fit(&demeaned)?;
    let inference = clustered_inference(&fit, &demeaned)?;
    Ok((fit, inference))
}

/// Fixed-effects fit of the nested linear design (no hinge).
pub fn fit_linear<F: Scalar>(dataset: &PanelDataset<F>) -> Result<LinearFit<F>> {
    dataset.check_identification(1)?;
    let demeaned = dataset.within_transform(
        vec![("running".to_string(), dataset.running.clone())],
        &DemeanOptions::default(),
    )?;
    let fit = ols_fit(&demeaned)?;
    let inference = clustered_inference(&fit, &demeaned)?;
    Ok(LinearFit {
        beta: fit.coefficients[0],
        se: inference.se[0],
        p_value: inference.p_value[0],
        rss: fit.rss,
        n_obs: fit.n_obs,
        n_clusters: fit.n_clusters,
    })
}

#[derive(Debug, Clone)]
pub struct LinearFit<F> {
    pub beta: F,
    pub se: F,
    pub p_value: F,
    pub rss: F,
    pub n_obs: usize,
    pub n_clusters: usize,
}

/// A selected-breakpoint kink fit with its grid trace.
#[derive(Debug, Clone)]
pub struct KinkFit<F> {
    pub cutoff: F,
    pub beta1: F,
    pub beta2: F,
    pub se_beta1: F,
    pub se_beta2: F,
    pub p_beta1: F,
    /// Two-sided t-test p-value on the kink coefficient (G - 1 df).
    pub p_kink: F,
    pub slope_below: F,
    pub slope_above: F,
    pub rss: F,
    pub n_obs: usize,
    pub n_clusters: usize,
    /// `(candidate cutoff, rss)` for every identifiable candidate.
    pub grid: Vec<(F, F)>,
}

/// Fit every candidate cutoff on the same observation set and keep the RSS
/// minimizer; ties (within 1e-12 relative) go to the smallest cutoff.
pub fn select_breakpoint<F: Scalar>(dataset: &PanelDataset<F>, grid: &[F]) -> Result<KinkFit<F>> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("empty candidate grid"));
    }
    dataset.check_identification(2)?;

    let demeaner = dataset.demeaner();
    let opts = DemeanOptions::default();
    let mut outcome = dataset.outcome.clone();
    demeaner.demean_column(&mut outcome, &opts)?;
    let mut running = dataset.running.clone();
    demeaner.demean_column(&mut running, &opts)?;

    // Demeaning is a per-column linear projection, so the outcome and running
    // columns are shared across candidates and only the hinge is re-demeaned.
    let candidates: Vec<(F, Result<(RegressionFit<F>, ClusteredInference<F>)>)> = grid
        .par_iter()
        .map(|&c| {
            let result = (|| {
                let mut hinge: Vec<F> = dataset
                    .running
                    .iter()
                    .map(|&x| kink_basis(x, c).1)
                    .collect();
                demeaner.demean_column(&mut hinge, &opts)?;
                let demeaned = DemeanedPanel {
                    outcome: outcome.clone(),
                    columns: vec![running.clone(), hinge],
                    labels: vec!["running".to_string(), "hinge".to_string()],
                    dao_index: dataset.dao_index.clone(),
                    n_clusters: dataset.n_clusters(),
                    n_periods: dataset.n_periods(),
                };
                let fit = ols_fit(&demeaned)?;
                let inference = clustered_inference(&fit, &demeaned)?;
                Ok((fit, inference))
            })();
            (c, result)
        })
        .collect();

    let trace: Vec<(F, F)> = candidates
        .iter()
        .filter_map(|(c, r)| r.as_ref().ok().map(|(fit, _)| (*c, fit.rss)))
        .collect();

    // Deterministic winner: strictly smaller RSS wins; near-equal RSS keeps
    // the smaller cutoff, independent of grid or evaluation order.
    let mut best: Option<(F, &RegressionFit<F>, &ClusteredInference<F>)> = None;
    for (c, result) in &candidates {
        let Ok((fit, inference)) = result else { continue };
        match &best {
            None => best = Some((*c, fit, inference)),
            Some((best_c, best_fit, _)) => {
                let tie = (fit.rss - best_fit.rss).abs()
                    <= F::from_f64_lossy(RSS_TIE_TOL) * fit.rss.max(best_fit.rss);
                if (tie && *c < *best_c) || (!tie && fit.rss < best_fit.rss) {
                    best = Some((*c, fit, inference));
                }
            }
        }
    }
    let (cutoff, fit, inference) = best.ok_or(Error::NoIdentifiableCandidate)?;

    Ok(KinkFit {
        cutoff,
        beta1: fit.coefficients[0],
        beta2: fit.coefficients[1],
        se_beta1: inference.se[0],
        se_beta2: inference.se[1],
        p_beta1: inference.p_value[0],
        p_kink: inference.p_value[1],
        slope_below: fit.coefficients[0],
        slope_above: fit.coefficients[0] + fit.coefficients[1],
        rss: fit.rss,
        n_obs: fit.n_obs,
        n_clusters: fit.n_clusters,
        grid: trace,
    })
}

/// One point of a binned residual plot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinPoint<F> {
    /// Bin mean of the FE-residualized running variable, shifted so the
    /// cutoff maps to zero.
    pub center: F,
    /// Bin mean of the FE-residualized outcome.
    pub outcome: F,
    pub count: usize,
}

/// Quantile-binned means of FE-residualized outcome against FE-residualized
/// running variable, centered at the cutoff.
///
/// The running residuals are shifted by (grand mean of the raw running
/// variable minus the cutoff), so an observation sitting at the cutoff with
/// no FE deviation lands near zero.
pub fn binned_residuals<F: Scalar>(
    dataset: &PanelDataset<F>,
    cutoff: F,
    bins: usize,
) -> Result<Vec<BinPoint<F>>> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "binned residual plot needs at least 2 bins, got {bins}"
        )));
    }
    let n = dataset.n();
    if n < bins {
        return Err(Error::InsufficientData(format!(
            "{n} observations cannot fill {bins} bins"
        )));
    }

    let demeaner = dataset.demeaner();
    let opts = DemeanOptions::default();
    let mut outcome = dataset.outcome.clone();
    demeaner.demean_column(&mut outcome, &opts)?;
    let mut running = dataset.running.clone();
    demeaner.demean_column(&mut running, &opts)?;

    let grand_mean = dataset.running.iter().copied().sum::<F>() / F::from_count(n);
    let shift = grand_mean - cutoff;
    let centered: Vec<F> = running.iter().map(|&x| x + shift).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        centered[a]
            .partial_cmp(&centered[b])
            .expect("non-NaN running residuals")
            .then(a.cmp(&b))
    });

    let mut points = Vec::with_capacity(bins);
    for b in 0..bins {
        let start = b * n / bins;
        let end = (b + 1) * n / bins;
        let members = &order[start..end];
        let count = members.len();
        let cf = F::from_count(count);
        let center = members.iter().map(|&i| centered[i]).sum::<F>() / cf;
        let out = members.iter().map(|&i| outcome[i]).sum::<F>() / cf;
        points.push(BinPoint {
            center,
            outcome: out,
            count,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quarter::Quarter;
    use approx::assert_relative_eq;

    fn quarters(t: usize) -> Vec<Quarter> {
        let mut q = Quarter::new(2020, 2).unwrap();
        let mut out = Vec::with_capacity(t);
        for _ in 0..t {
            out.push(q);
            q = q.succ();
        }
        out
    }

    /// Balanced panel with outcome = fe + b1*x + b2*(x-c)+ and no noise.
    /// The running variable mixes dao and quarter non-additively so the FE
    /// projection does not absorb it.
    fn kinked_dataset(g: usize, t: usize, b1: f64, b2: f64, c: f64) -> PanelDataset<f64> {
        let mut outcome = Vec::new();
        let mut running = Vec::new();
        let mut dao_index = Vec::new();
        let mut quarter_index = Vec::new();
        for d in 0..g {
            for q in 0..t {
                let x = ((d * 31 + q * 17 + d * q * 7) % 29) as f64 / 28.0 * 4.0;
                let fe = d as f64 * 0.7 - q as f64 * 0.3;
                outcome.push(fe + b1 * x + b2 * (x - c).max(0.0));
                running.push(x);
                dao_index.push(d);
                quarter_index.push(q);
            }
        }
        PanelDataset::new(
            outcome,
            running,
            dao_index,
            quarter_index,
            (0..g).map(|d| format!("dao{d}")).collect(),
            quarters(t),
        )
        .unwrap()
    }

    #[test]
    fn kink_basis_cases() {
        assert_eq!(kink_basis(3.0, 2.0), (3.0, 1.0));
        assert_eq!(kink_basis(2.0, 2.0), (2.0, 0.0));
        assert_eq!(kink_basis(1.0, 2.0), (1.0, 0.0));
    }

    #[test]
    fn grid_on_uniform_support() {
        let running: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let grid = candidate_grid(&running, 10.0, 90.0, 3).unwrap();
        assert_eq!(grid, vec![1.0, 5.0, 9.0]);
    }

    #[test]
    fn grid_with_two_points_is_the_endpoints() {
        let running: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let grid = candidate_grid(&running, 10.0, 90.0, 2).unwrap();
        assert_eq!(grid, vec![1.0, 9.0]);
    }

    #[test]
    fn constant_running_degenerates() {
        assert!(matches!(
            candidate_grid(&[2.0; 30], 10.0, 90.0, 5),
            Err(Error::DegenerateGrid)
        ));
    }

    #[test]
    fn exact_kink_is_recovered_at_true_cutoff() {
        let ds = kinked_dataset(6, 5, 1.1, -0.5, 2.0);
        let (fit, inference) = fit_kink_at(&ds, 2.0).unwrap();
        assert_relative_eq!(fit.coefficients[0], 1.1, epsilon = 1e-8);
        assert_relative_eq!(fit.coefficients[1], -0.5, epsilon = 1e-8);
        assert!(fit.rss < 1e-12);
        assert_eq!(inference.se.len(), 2);
    }

    #[test]
    fn cutoff_above_support_is_rank_deficient() {
        let ds = kinked_dataset(6, 5, 1.0, 0.0, 2.0);
        match fit_kink_at(&ds, 100.0) {
            Err(Error::RankDeficient { column }) => assert_eq!(column, "hinge"),
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn select_breakpoint_finds_noiseless_kink() {
        let ds = kinked_dataset(10, 6, 1.1, -0.5, 2.0);
        let grid = candidate_grid(&ds.running, 10.0, 90.0, 101).unwrap();
        let kf = select_breakpoint(&ds, &grid).unwrap();
        let step = grid[1] - grid[0];
        assert!(
            (kf.cutoff - 2.0).abs() <= step + 1e-12,
            "cutoff {} not within one grid step of 2.0",
            kf.cutoff
        );
        assert_relative_eq!(kf.slope_below, kf.beta1);
        assert_relative_eq!(kf.slope_above, kf.beta1 + kf.beta2);
        assert!(kf.p_kink >= 0.0 && kf.p_kink <= 1.0);
        // min over the trace equals the reported rss
        let min_rss = kf.grid.iter().map(|&(_, r)| r).fold(f64::INFINITY, f64::min);
        assert_relative_eq!(kf.rss, min_rss);
    }

    #[test]
    fn select_breakpoint_ignores_grid_order() {
        let ds = kinked_dataset(8, 5, 0.8, 0.9, 1.5);
        let grid = candidate_grid(&ds.running, 10.0, 90.0, 41).unwrap();
        let mut reversed = grid.clone();
        reversed.reverse();
        let a = select_breakpoint(&ds, &grid).unwrap();
        let b = select_breakpoint(&ds, &reversed).unwrap();
        assert_eq!(a.cutoff, b.cutoff);
        assert_eq!(a.rss, b.rss);
    }

    #[test]
    fn kink_rss_never_exceeds_linear_rss() {
        let ds = kinked_dataset(7, 4, 1.0, -0.4, 2.2);
        let grid = candidate_grid(&ds.running, 10.0, 90.0, 21).unwrap();
        let kf = select_breakpoint(&ds, &grid).unwrap();
        let lin = fit_linear(&ds).unwrap();
        assert!(kf.rss <= lin.rss + 1e-12);
    }

    #[test]
    fn outcome_shift_changes_nothing_but_intercepts() {
        let ds = kinked_dataset(6, 5, 1.2, -0.6, 1.8);
        let mut shifted = ds.clone();
        for y in shifted.outcome.iter_mut() {
            *y += 17.5;
        }
        let grid = candidate_grid(&ds.running, 10.0, 90.0, 31).unwrap();
        let a = select_breakpoint(&ds, &grid).unwrap();
        let b = select_breakpoint(&shifted, &grid).unwrap();
        assert_eq!(a.cutoff, b.cutoff);
        assert_relative_eq!(a.beta1, b.beta1, epsilon = 1e-9);
        assert_relative_eq!(a.beta2, b.beta2, epsilon = 1e-9);
        assert_relative_eq!(a.se_beta1, b.se_beta1, epsilon = 1e-9);
    }

    #[test]
    fn binned_residuals_identity_relation() {
        // outcome = running, single dao and quarter pair structure so the FE
        // projection only removes the mean; center the cutoff at the mean.
        let n = 40;
        let running: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mean = running.iter().sum::<f64>() / n as f64;
        let ds = PanelDataset::new(
            running.clone(),
            running,
            vec![0; n],
            vec![0; n],
            vec!["dao0".into()],
            vec![Quarter::new(2020, 2).unwrap()],
        )
        .unwrap();
        let points = binned_residuals(&ds, mean, 20).unwrap();
        assert_eq!(points.len(), 20);
        for p in &points {
            assert_eq!(p.count, 2);
            assert_relative_eq!(p.outcome, p.center, epsilon = 1e-9);
        }
    }

    #[test]
    fn binned_residuals_recover_segment_slopes() {
        let ds = kinked_dataset(12, 10, 1.1, -0.5, 2.0);
        let points = binned_residuals(&ds, 2.0, 20).unwrap();
        let below: Vec<_> = points.iter().filter(|p| p.center < 0.0).collect();
        let above: Vec<_> = points.iter().filter(|p| p.center > 0.0).collect();
        let slope = |pts: &[&BinPoint<f64>]| {
            let nx = pts.len() as f64;
            let mx = pts.iter().map(|p| p.center).sum::<f64>() / nx;
            let my = pts.iter().map(|p| p.outcome).sum::<f64>() / nx;
            let num: f64 = pts.iter().map(|p| (p.center - mx) * (p.outcome - my)).sum();
            let den: f64 = pts.iter().map(|p| (p.center - mx).powi(2)).sum();
            num / den
        };
        assert!((slope(&below) - 1.1).abs() < 0.1, "below slope {}", slope(&below));
        assert!((slope(&above) - 0.6).abs() < 0.1, "above slope {}", slope(&above));
    }

    #[test]
    fn more_bins_than_rows_is_an_error() {
        let ds = kinked_dataset(3, 3, 1.0, 0.0, 1.0);
        assert!(binned_residuals(&ds, 1.0, 20).is_err());
    }
}
