//! The fixed registry of estimable specifications: which outcome runs on
//! which running variable over which sample.

use crate::error::{Error, Result};
use crate::kink::{candidate_grid, fit_linear, select_breakpoint, KinkFit, LinearFit};
use crate::metrics::{select_sample, DerivedObservation, SampleKind};
use crate::quarter::Quarter;
use crate::regress::PanelDataset;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpecName {
    /// ln(active voters) on ln(1+proposals).
    Capacity,
    /// HHI on ln(1+proposals/active voters).
    HhiLoad,
    /// Top-3 share on ln(1+proposals/active voters).
    Top3Load,
    /// HHI on ln(1+proposals).
    HhiScale,
    /// Top-3 share on ln(1+proposals).
    Top3Scale,
    /// HHI on ln(1+proposals/recorded voters).
    HhiNvLoad,
    /// Top-3 share on ln(1+proposals/recorded voters).
    Top3NvLoad,
}

impl SpecName {
    pub const ALL: [SpecName; 7] = [
        SpecName::Capacity,
        SpecName::HhiLoad,
        SpecName::Top3Load,
        SpecName::HhiScale,
        SpecName::Top3Scale,
        SpecName::HhiNvLoad,
        SpecName::Top3NvLoad,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SpecName::Capacity => "capacity",
            SpecName::HhiLoad => "hhi-load",
            SpecName::Top3Load => "top3-load",
            SpecName::HhiScale => "hhi-scale",
            SpecName::Top3Scale => "top3-scale",
            SpecName::HhiNvLoad => "hhi-nvload",
            SpecName::Top3NvLoad => "top3-nvload",
        }
    }

    pub fn registry() -> String {
        SpecName::ALL
            .iter()
            .map(|s| s.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn parse(name: &str) -> Result<Self> {
        SpecName::ALL
            .iter()
            .find(|s| s.as_str() == name)
            .copied()
            .ok_or_else(|| Error::UnknownSpec {
                name: name.to_string(),
                registry: SpecName::registry(),
            })
    }

    pub fn sample_kind(self) -> SampleKind {
        match self {
            SpecName::Capacity => SampleKind::Capacity,
            SpecName::HhiLoad | SpecName::Top3Load | SpecName::HhiScale | SpecName::Top3Scale => {
                SampleKind::HarmonizedConcentration
            }
            SpecName::HhiNvLoad | SpecName::Top3NvLoad => SampleKind::AltLoad,
        }
    }

    pub fn outcome_label(self) -> &'static str {
        match self {
            SpecName::Capacity => "ln(active voters)",
            SpecName::HhiLoad | SpecName::HhiScale | SpecName::HhiNvLoad => "HHI",
            SpecName::Top3Load | SpecName::Top3Scale | SpecName::Top3NvLoad => {
                "Top-3 control share"
            }
        }
    }

    pub fn running_label(self) -> &'static str {
        match self {
            SpecName::Capacity | SpecName::HhiScale | SpecName::Top3Scale => "ln(1+proposals)",
            SpecName::HhiLoad | SpecName::Top3Load => "ln(1+proposals/active voters)",
            SpecName::HhiNvLoad | SpecName::Top3NvLoad => "ln(1+proposals/number of voters)",
        }
    }

    pub fn outcome(self, obs: &DerivedObservation) -> Option<f64> {
        match self {
            SpecName::Capacity => obs.y_lnv,
            SpecName::HhiLoad | SpecName::HhiScale | SpecName::HhiNvLoad => obs.hhi,
            SpecName::Top3Load | SpecName::Top3Scale | SpecName::Top3NvLoad => obs.top3,
        }
    }

    pub fn running(self, obs: &DerivedObservation) -> Option<f64> {
        match self {
            SpecName::Capacity | SpecName::HhiScale | SpecName::Top3Scale => Some(obs.x_lnp),
            SpecName::HhiLoad | SpecName::Top3Load => obs.ell_active,
            SpecName::HhiNvLoad | SpecName::Top3NvLoad => obs.ell_nv,
        }
    }
}

impl fmt::Display for SpecName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Grid-search parameters: percentile window and resolution.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub p_lo: f64,
    pub p_hi: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            p_lo: 10.0,
            p_hi: 90.0,
            points: 101,
        }
    }
}

/// Build the regression dataset for one spec: filter to the spec's sample,
/// pull its outcome and running variable, and densely index DAOs and
/// quarters (both sorted for determinism).
pub fn build_dataset(panel: &[DerivedObservation], spec: SpecName) -> Result<PanelDataset<f64>> {
    let sample = select_sample(panel, spec.sample_kind());
    let mut outcome = Vec::new();
    let mut running = Vec::new();
    let mut keys: Vec<(&str, Quarter)> = Vec::new();
    for obs in &sample {
        let (Some(y), Some(x)) = (spec.outcome(obs), spec.running(obs)) else {
            // The sample kinds guarantee presence; belt and braces.
            continue;
        };
        outcome.push(y);
        running.push(x);
        keys.push((obs.dao_id.as_str(), obs.quarter));
    }
    if outcome.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no observations in the {} sample for spec `{spec}`",
            spec.sample_kind().as_str()
        )));
    }

    let dao_labels: Vec<String> = keys
        .iter()
        .map(|(d, _)| d.to_string())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let quarter_labels: Vec<Quarter> = keys
        .iter()
        .map(|(_, q)| *q)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let dao_lookup: BTreeMap<&str, usize> = dao_labels
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let quarter_lookup: BTreeMap<Quarter, usize> = quarter_labels
        .iter()
        .enumerate()
        .map(|(i, &q)| (q, i))
        .collect();
    let dao_index: Vec<usize> = keys.iter().map(|(d, _)| dao_lookup[d]).collect();
    let quarter_index: Vec<usize> = keys.iter().map(|(_, q)| quarter_lookup[q]).collect();

    PanelDataset::new(
        outcome,
        running,
        dao_index,
        quarter_index,
        dao_labels,
        quarter_labels,
    )
}

/// A linear/kink fit pair on one spec's sample, as the report tables pair them.
#[derive(Debug, Clone)]
pub struct FitBundle {
    pub spec: SpecName,
    pub linear: LinearFit<f64>,
    pub kink: KinkFit<f64>,
}

/// Run the full selection pipeline for one spec: build the dataset, the
/// candidate grid, the linear baseline, and the selected-breakpoint kink fit.
pub fn run_fit(panel: &[DerivedObservation], spec: SpecName, grid: GridSpec) -> Result<FitBundle> {
    let dataset = build_dataset(panel, spec)?;
    let candidates = candidate_grid(&dataset.running, grid.p_lo, grid.p_hi, grid.points)?;
    let linear = fit_linear(&dataset)?;
    let kink = select_breakpoint(&dataset, &candidates)?;
    Ok(FitBundle { spec, linear, kink })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(dao: &str, q: Quarter, v: Option<u32>) -> DerivedObservation {
        DerivedObservation {
            dao_id: dao.into(),
            quarter: q,
            proposals: 3,
            active_voters: v.unwrap_or(0),
            number_of_voters: None,
            x_lnp: 4.0f64.ln(),
            y_lnv: v.map(|n| (n as f64).ln()),
            load_active: v.map(|n| 3.0 / n as f64),
            ell_active: v.map(|n| (3.0 / n as f64).ln_1p()),
            load_nv: None,
            ell_nv: None,
            hhi: Some(0.4),
            top3: Some(0.9),
        }
    }

    #[test]
    fn registry_parses_and_rejects() {
        assert_eq!(SpecName::parse("capacity").unwrap(), SpecName::Capacity);
        assert_eq!(SpecName::parse("top3-nvload").unwrap(), SpecName::Top3NvLoad);
        match SpecName::parse("nonsense") {
            Err(Error::UnknownSpec { registry, .. }) => {
                assert!(registry.contains("hhi-load"));
                assert!(registry.contains("capacity"));
            }
            other => panic!("expected unknown-spec error, got {other:?}"),
        }
    }

    #[test]
    fn dataset_indices_are_dense_and_sorted() {
        let q1 = Quarter::new(2021, 1).unwrap();
        let q2 = Quarter::new(2021, 2).unwrap();
        let panel = vec![
            obs("zeta", q2, Some(10)),
            obs("alpha", q1, Some(5)),
            obs("zeta", q1, Some(7)),
            obs("alpha", q2, Some(9)),
        ];
        let ds = build_dataset(&panel, SpecName::Capacity).unwrap();
        assert_eq!(ds.dao_labels, vec!["alpha".to_string(), "zeta".to_string()]);
        assert_eq!(ds.quarter_labels, vec![q1, q2]);
        // first row is ("zeta", q2) -> dao 1, quarter 1
        assert_eq!(ds.dao_index[0], 1);
        assert_eq!(ds.quarter_index[0], 1);
        assert_eq!(ds.n(), 4);
    }

    #[test]
    fn missing_outcome_rows_are_excluded_by_sample() {
        let q1 = Quarter::new(2021, 1).unwrap();
        let panel = vec![obs("a", q1, Some(5)), obs("b", q1, None)];
        let ds = build_dataset(&panel, SpecName::Capacity).unwrap();
        assert_eq!(ds.n(), 1);
    }

    #[test]
    fn nvload_without_voters_table_is_empty() {
        let q1 = Quarter::new(2021, 1).unwrap();
        let panel = vec![obs("a", q1, Some(5))];
        assert!(matches!(
            build_dataset(&panel, SpecName::HhiNvLoad),
            Err(Error::InsufficientData(_))
        ));
    }
}
