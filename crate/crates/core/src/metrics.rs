//! Concentration indices, derived regressors, nested estimation samples,
//! and descriptive statistics.

use crate::error::{Error, Result};
use crate::ingest::DaoQuarterObservation;
use crate::quarter::Quarter;
use crate::scalar::Scalar;
use crate::stats::{mean, median, sample_sd};
use std::collections::BTreeSet;

/// Herfindahl-Hirschman index of a share vector summing to one.
pub fn hhi<F: Scalar>(shares: &[F]) -> Result<F> {
    check_share_vector(shares)?;
    Ok(shares.iter().map(|&s| s * s).sum())
}

/// Sum of the largest `k` shares (the vector must already be sorted
/// descending, as stored on the panel).
pub fn top_k_share<F: Scalar>(shares: &[F], k: usize) -> Result<F> {
    check_share_vector(shares)?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if shares.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument(
            "shares must be sorted descending".into(),
        ));
    }
    Ok(shares.iter().take(k).copied().sum())
}

fn check_share_vector<F: Scalar>(shares: &[F]) -> Result<()> {
    if shares.is_empty() {
        return Err(Error::EmptyInput("empty share vector"));
    }
    let total = shares.iter().copied().sum::<F>().to_f64_lossy();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "shares must sum to 1 (within 1e-9), got {total}"
        )));
    }
    Ok(())
}

/// Inverse of the `ln(1+P)` transform: the proposal count at a point on the
/// running-variable scale.
pub fn proposals_at(x: f64) -> f64 {
    x.exp() - 1.0
}

/// A panel cell with the derived regressors and outcomes attached.
/// Absent values encode genuine undefinedness (e.g. `ln(V)` with no voters).
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedObservation {
    pub dao_id: String,
    pub quarter: Quarter,
    pub proposals: u32,
    pub active_voters: u32,
    pub number_of_voters: Option<u32>,
    /// ln(1 + proposals); zero exactly when proposals is zero.
    pub x_lnp: f64,
    /// ln(active voters); absent when no one voted.
    pub y_lnv: Option<f64>,
    /// proposals per active voter.
    pub load_active: Option<f64>,
    /// ln(1 + proposals per active voter).
    pub ell_active: Option<f64>,
    /// proposals per recorded voter.
    pub load_nv: Option<f64>,
    /// ln(1 + proposals per recorded voter).
    pub ell_nv: Option<f64>,
    pub hhi: Option<f64>,
    pub top3: Option<f64>,
}

/// Compute every derived variable for one panel cell.
pub fn derive_variables(obs: &DaoQuarterObservation) -> DerivedObservation {
    let p = obs.proposals as f64;
    let x_lnp = p.ln_1p();
    let (y_lnv, load_active, ell_active) = if obs.active_voters >= 1 {
        let v = obs.active_voters as f64;
        let load = p / v;
        (Some(v.ln()), Some(load), Some(load.ln_1p()))
    } else {
        (None, None, None)
    };
    let (load_nv, ell_nv) = match obs.number_of_voters {
        Some(nv) if nv >= 1 => {
            let load = p / nv as f64;
            (Some(load), Some(load.ln_1p()))
        }
        _ => (None, None),
    };
    let (hhi_v, top3_v) = if obs.vote_shares.is_empty() {
        (None, None)
    } else {
        (
            Some(hhi(&obs.vote_shares).expect("panel shares sum to 1")),
            Some(top_k_share(&obs.vote_shares, 3).expect("panel shares sorted")),
        )
    };
    DerivedObservation {
        dao_id: obs.dao_id.clone(),
        quarter: obs.quarter,
        proposals: obs.proposals,
        active_voters: obs.active_voters,
        number_of_voters: obs.number_of_voters,
        x_lnp,
        y_lnv,
        load_active,
        ell_active,
        load_nv,
        ell_nv,
        hhi: hhi_v,
        top3: top3_v,
    }
}

/// The nested estimation samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    /// Every observation surviving ingestion.
    Full,
    /// Nonmissing ln(1+P) and ln(V).
    Capacity,
    /// Capacity plus nonmissing load, HHI, and Top-3.
    HarmonizedConcentration,
    /// Nonmissing alternative load (per recorded voter), HHI, and Top-3.
    AltLoad,
}

impl SampleKind {
    pub fn contains(self, obs: &DerivedObservation) -> bool {
        match self {
            SampleKind::Full => true,
            SampleKind::Capacity => obs.y_lnv.is_some(),
            SampleKind::HarmonizedConcentration => {
                obs.y_lnv.is_some()
                    && obs.ell_active.is_some()
                    && obs.hhi.is_some()
                    && obs.top3.is_some()
            }
            SampleKind::AltLoad => {
                obs.ell_nv.is_some() && obs.hhi.is_some() && obs.top3.is_some()
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SampleKind::Full => "full",
            SampleKind::Capacity => "capacity",
            SampleKind::HarmonizedConcentration => "harmonized",
            SampleKind::AltLoad => "altload",
        }
    }
}

/// Filter a derived panel down to one estimation sample, preserving order.
pub fn select_sample(panel: &[DerivedObservation], kind: SampleKind) -> Vec<DerivedObservation> {
    panel
        .iter()
        .filter(|obs| kind.contains(obs))
        .cloned()
        .collect()
}

/// One variable's row in the descriptive table.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableSummary {
    pub name: &'static str,
    /// Count of nonmissing values.
    pub n: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptiveTable {
    pub variables: Vec<VariableSummary>,
    pub dao_quarters: usize,
    pub n_daos: usize,
    pub n_quarters: usize,
    pub first_quarter: Quarter,
    pub last_quarter: Quarter,
}

pub const DESCRIBE_VARIABLES: [&str; 8] = [
    "proposals",
    "active_voters",
    "x_lnp",
    "y_lnv",
    "load_active",
    "ell_active",
    "hhi",
    "top3",
];

/// Per-variable N, mean, sample SD, and median over nonmissing values, plus
/// panel coverage counts.
pub fn describe_sample(panel: &[DerivedObservation]) -> Result<DescriptiveTable> {
    if panel.is_empty() {
        return Err(Error::EmptyInput("describe of empty panel"));
    }
    let extract = |name: &str| -> Vec<f64> {
        panel
            .iter()
            .filter_map(|o| match name {
                "proposals" => Some(o.proposals as f64),
                "active_voters" => Some(o.active_voters as f64),
                "x_lnp" => Some(o.x_lnp),
                "y_lnv" => o.y_lnv,
                "load_active" => o.load_active,
                "ell_active" => o.ell_active,
                "hhi" => o.hhi,
                "top3" => o.top3,
                _ => unreachable!(),
            })
            .collect()
    };
    let variables = DESCRIBE_VARIABLES
        .iter()
        .map(|&name| {
            let values = extract(name);
            VariableSummary {
                name,
                n: values.len(),
                mean: mean(&values).ok(),
                sd: sample_sd(&values),
                median: median(&values).ok(),
            }
        })
        .collect();

    let daos: BTreeSet<&str> = panel.iter().map(|o| o.dao_id.as_str()).collect();
    let quarters: BTreeSet<Quarter> = panel.iter().map(|o| o.quarter).collect();
    Ok(DescriptiveTable {
        variables,
        dao_quarters: panel.len(),
        n_daos: daos.len(),
        n_quarters: quarters.len(),
        first_quarter: *quarters.iter().next().expect("nonempty"),
        last_quarter: *quarters.iter().next_back().expect("nonempty"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn obs(p: u32, v: u32, shares: Vec<f64>) -> DaoQuarterObservation {
        DaoQuarterObservation {
            dao_id: "d1".into(),
            quarter: Quarter::new(2021, 1).unwrap(),
            proposals: p,
            active_voters: v,
            number_of_voters: None,
            vote_shares: shares,
        }
    }

    #[test]
    fn hhi_fixtures() {
        assert_relative_eq!(hhi(&[1.0]).unwrap(), 1.0);
        assert_relative_eq!(hhi(&[0.25; 4]).unwrap(), 0.25);
        assert_relative_eq!(hhi(&[0.5, 0.3, 0.2]).unwrap(), 0.38, epsilon = 1e-12);
        assert!(hhi::<f64>(&[]).is_err());
        assert!(hhi(&[0.5, 0.4]).is_err()); // sums to 0.9
    }

    #[test]
    fn top_k_fixtures() {
        assert_relative_eq!(top_k_share(&[1.0], 3).unwrap(), 1.0);
        assert_relative_eq!(top_k_share(&[0.4, 0.3, 0.2, 0.1], 3).unwrap(), 0.9, epsilon = 1e-12);
        assert_relative_eq!(top_k_share(&[0.25; 4], 4).unwrap(), 1.0);
        assert!(top_k_share(&[0.2, 0.8], 3).is_err()); // not descending
    }

    #[test]
    fn derive_zero_proposal_cell() {
        let d = derive_variables(&obs(0, 1, vec![1.0]));
        assert_eq!(d.x_lnp, 0.0);
        assert_eq!(d.y_lnv, Some(0.0));
        assert_eq!(d.load_active, Some(0.0));
        assert_eq!(d.ell_active, Some(0.0));
    }

    #[test]
    fn derive_log_scale() {
        let d = derive_variables(&obs(9, 3, vec![]));
        assert_relative_eq!(d.x_lnp, 10.0f64.ln(), epsilon = 1e-12);
        assert_eq!(d.hhi, None);
        assert_eq!(d.top3, None);
    }

    #[test]
    fn cutoff_converts_back_to_proposals() {
        assert!((proposals_at(2.3441) - 9.4).abs() < 0.05);
    }

    #[test]
    fn derive_no_voters_leaves_capacity_fields_absent() {
        let d = derive_variables(&obs(5, 0, vec![]));
        assert_eq!(d.y_lnv, None);
        assert_eq!(d.load_active, None);
        assert_eq!(d.ell_active, None);
    }

    fn derived(
        y: Option<f64>,
        ell: Option<f64>,
        hhi: Option<f64>,
        top3: Option<f64>,
    ) -> DerivedObservation {
        DerivedObservation {
            dao_id: "d".into(),
            quarter: Quarter::new(2021, 1).unwrap(),
            proposals: 1,
            active_voters: 1,
            number_of_voters: None,
            x_lnp: 0.5,
            y_lnv: y,
            load_active: ell.map(|e| e.exp() - 1.0),
            ell_active: ell,
            load_nv: None,
            ell_nv: None,
            hhi,
            top3,
        }
    }

    #[test]
    fn sample_selection_counts() {
        // 10 rows: 2 missing shares, 1 with no voters.
        let mut panel = Vec::new();
        for _ in 0..7 {
            panel.push(derived(Some(1.0), Some(0.2), Some(0.4), Some(0.9)));
        }
        for _ in 0..2 {
            panel.push(derived(Some(1.0), Some(0.2), None, None));
        }
        panel.push(derived(None, None, Some(0.4), Some(0.9)));
        assert_eq!(select_sample(&panel, SampleKind::Full).len(), 10);
        assert_eq!(select_sample(&panel, SampleKind::Capacity).len(), 9);
        assert_eq!(
            select_sample(&panel, SampleKind::HarmonizedConcentration).len(),
            7
        );
    }

    #[test]
    fn describe_single_observation() {
        let panel = vec![derived(Some(2.0), Some(0.1), Some(0.3), Some(0.8))];
        let table = describe_sample(&panel).unwrap();
        let y = table.variables.iter().find(|v| v.name == "y_lnv").unwrap();
        assert_eq!(y.n, 1);
        assert_eq!(y.mean, Some(2.0));
        assert_eq!(y.median, Some(2.0));
        assert_eq!(y.sd, None);
    }

    #[test]
    fn describe_two_proposal_counts() {
        let mut a = derived(Some(1.0), None, None, None);
        a.proposals = 1;
        let mut b = derived(Some(1.0), None, None, None);
        b.proposals = 3;
        let table = describe_sample(&[a, b]).unwrap();
        let p = table.variables.iter().find(|v| v.name == "proposals").unwrap();
        assert_eq!(p.mean, Some(2.0));
        assert_relative_eq!(p.sd.unwrap(), 2.0f64.sqrt(), epsilon = 1e-12);
        assert_eq!(p.median, Some(2.0));
        assert_eq!(table.dao_quarters, 2);
    }

    #[test]
    fn describe_empty_errors() {
        assert!(describe_sample(&[]).is_err());
    }
}
