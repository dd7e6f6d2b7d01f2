//! Synthetic DAO-governance panels with known kink parameters, used to
//! verify the whole estimation stack.

use crate::error::{Error, Result};
use crate::ingest::{ProposalRecord, VoteRecord};
use crate::metrics::DerivedObservation;
use crate::quarter::Quarter;
use crate::stats::percentile;
use chrono::{TimeZone, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeKind {
    /// Kinked outcome is ln(active voters); voter counts are back-filled so
    /// the panel can round-trip through record export and ingestion.
    Capacity,
    /// Kinked latent index is squashed into (0,1] and stored as HHI and
    /// Top-3, for bounded-outcome fits.
    Concentration,
}

impl OutcomeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::Capacity => "capacity",
            OutcomeKind::Concentration => "concentration",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpConfig {
    pub n_daos: usize,
    pub n_quarters: usize,
    pub true_cutoff: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub dao_fe_sd: f64,
    pub quarter_fe_sd: f64,
    pub noise_sd: f64,
    /// Lognormal location of the proposal-count distribution.
    pub proposal_mu: f64,
    /// Lognormal scale of the proposal-count distribution.
    pub proposal_sigma: f64,
    pub seed: u64,
    pub outcome_kind: OutcomeKind,
}

impl DgpConfig {
    /// A well-identified kink: slopes 1.1 / 0.6 around a cutoff at 2.0 with
    /// moderate noise on a 150 x 10 panel of heavily skewed proposal counts.
    pub fn strong_kink(seed: u64) -> Self {
        DgpConfig {
            n_daos: 150,
            n_quarters: 10,
            true_cutoff: 2.0,
            beta1: 1.1,
            beta2: -0.5,
            dao_fe_sd: 0.5,
            quarter_fe_sd: 0.2,
            noise_sd: 0.3,
            proposal_mu: 1.9,
            proposal_sigma: 1.0,
            seed,
            outcome_kind: OutcomeKind::Capacity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_daos < 2 {
            return Err(Error::Config("n_daos must be >= 2".into()));
        }
        if self.n_quarters < 2 {
            return Err(Error::Config("n_quarters must be >= 2".into()));
        }
        for (name, v) in [
            ("dao_fe_sd", self.dao_fe_sd),
            ("quarter_fe_sd", self.quarter_fe_sd),
            ("noise_sd", self.noise_sd),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.proposal_sigma.is_finite() && self.proposal_sigma > 0.0) {
            return Err(Error::Config(format!(
                "proposal_sigma must be > 0, got {}",
                self.proposal_sigma
            )));
        }
        if !self.true_cutoff.is_finite() || !self.beta1.is_finite() || !self.beta2.is_finite() {
            return Err(Error::Config("cutoff and slopes must be finite".into()));
        }
        Ok(())
    }

    /// Parse `key = value` lines; `#` starts a comment, blank lines ignored.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut config = DgpConfig::strong_kink(42);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                Error::Config(format!("line {}: {key} must be {what}, got `{value}`", lineno + 1))
            };
            match key {
                "n_daos" => config.n_daos = value.parse().map_err(|_| bad("a positive integer"))?,
                "n_quarters" => {
                    config.n_quarters = value.parse().map_err(|_| bad("a positive integer"))?
                }
                "true_cutoff" => {
                    config.true_cutoff = value.parse().map_err(|_| bad("a number"))?
                }
                "beta1" => config.beta1 = value.parse().map_err(|_| bad("a number"))?,
                "beta2" => config.beta2 = value.parse().map_err(|_| bad("a number"))?,
                "dao_fe_sd" => config.dao_fe_sd = value.parse().map_err(|_| bad("a number"))?,
                "quarter_fe_sd" => {
                    config.quarter_fe_sd = value.parse().map_err(|_| bad("a number"))?
                }
                "noise_sd" => config.noise_sd = value.parse().map_err(|_| bad("a number"))?,
                "proposal_mu" => {
                    config.proposal_mu = value.parse().map_err(|_| bad("a number"))?
                }
                "proposal_sigma" => {
                    config.proposal_sigma = value.parse().map_err(|_| bad("a number"))?
                }
                "seed" => config.seed = value.parse().map_err(|_| bad("an unsigned integer"))?,
                "outcome" | "outcome_kind" => {
                    config.outcome_kind = match value {
                        "capacity" => OutcomeKind::Capacity,
                        "concentration" => OutcomeKind::Concentration,
                        _ => return Err(bad("`capacity` or `concentration`")),
                    }
                }
                _ => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key `{key}`",
                        lineno + 1
                    )))
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn to_kv_text(&self) -> String {
        format!(
            "n_daos = {}\nn_quarters = {}\ntrue_cutoff = {}\nbeta1 = {}\nbeta2 = {}\n\
             dao_fe_sd = {}\nquarter_fe_sd = {}\nnoise_sd = {}\nproposal_mu = {}\n\
             proposal_sigma = {}\nseed = {}\noutcome = {}\n",
            self.n_daos,
            self.n_quarters,
            self.true_cutoff,
            self.beta1,
            self.beta2,
            self.dao_fe_sd,
            self.quarter_fe_sd,
            self.noise_sd,
            self.proposal_mu,
            self.proposal_sigma,
            self.seed,
            self.outcome_kind.as_str()
        )
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub panel: Vec<DerivedObservation>,
    pub truth: DgpConfig,
    /// Whether the true cutoff landed strictly inside the generated running
    /// variable's 10th-90th percentile window.
    pub cutoff_interior: bool,
}

fn quarter_sequence(n: usize) -> Vec<Quarter> {
    let mut q = Quarter::new(2020, 2).expect("valid start quarter");
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(q);
        q = q.succ();
    }
    out
}

/// Generate a synthetic panel.
///
/// Deterministic given the config: one ChaCha8 stream seeded by `seed`
/// drives, in order, DAO effects, quarter effects, proposal counts
/// (dao-major), outcome noise (dao-major), and (concentration kind only)
/// participation noise.
pub fn generate_panel(config: &DgpConfig) -> Result<SyntheticPanel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = |sd: f64| Normal::new(0.0, sd).expect("validated sd");
    let lognormal = LogNormal::new(config.proposal_mu, config.proposal_sigma)
        .map_err(|e| Error::Config(format!("proposal distribution: {e}")))?;

    let g = config.n_daos;
    let t = config.n_quarters;
    let dao_fe: Vec<f64> = (0..g).map(|_| normal(config.dao_fe_sd).sample(&mut rng)).collect();
    let quarter_fe: Vec<f64> = (0..t)
        .map(|_| normal(config.quarter_fe_sd).sample(&mut rng))
        .collect();

    let mut proposals: Vec<u32> = (0..g * t)
        .map(|_| lognormal.sample(&mut rng).round() as u32)
        .collect();
    // A dao whose quarters all drew zero proposals could not be represented
    // by event records (its votes would have nothing to reference), so give
    // it one proposal in its first quarter.
    for d in 0..g {
        if (0..t).all(|q| proposals[d * t + q] == 0) {
            proposals[d * t] = 1;
        }
    }

    let noise: Vec<f64> = (0..g * t).map(|_| normal(config.noise_sd).sample(&mut rng)).collect();

    let x: Vec<f64> = proposals.iter().map(|&p| (p as f64).ln_1p()).collect();
    let latent: Vec<f64> = (0..g * t)
        .map(|i| {
            let (d, q) = (i / t, i % t);
            dao_fe[d]
                + quarter_fe[q]
                + config.beta1 * x[i]
                + config.beta2 * (x[i] - config.true_cutoff).max(0.0)
                + noise[i]
        })
        .collect();

    let quarters = quarter_sequence(t);
    let mut panel = Vec::with_capacity(g * t);
    match config.outcome_kind {
        OutcomeKind::Capacity => {
            for i in 0..g * t {
                let (d, q) = (i / t, i % t);
                let p = proposals[i];
                // Voter counts back-fill the outcome for record export;
                // floored at one voter so every cell stays representable.
                let v = (latent[i].exp().round() as u32).max(1);
                panel.push(cell(d, quarters[q], p, v, x[i], Some(latent[i]), None, None));
            }
        }
        OutcomeKind::Concentration => {
            let participation_noise: Vec<f64> =
                (0..g * t).map(|_| normal(0.3).sample(&mut rng)).collect();
            let latent_mean = latent.iter().sum::<f64>() / latent.len() as f64;
            let latent_sd = {
                let ss = latent.iter().map(|u| (u - latent_mean).powi(2)).sum::<f64>();
                (ss / latent.len() as f64).sqrt().max(1e-12)
            };
            for i in 0..g * t {
                let (d, q) = (i / t, i % t);
                let p = proposals[i];
                let v = ((3.0 + 0.8 * x[i] + participation_noise[i]).exp().round() as u32).max(1);
                // Logistic squash of the z-scored latent keeps outcomes in
                // (0.1, 0.9); Top-3 is a monotone map of HHI that preserves
                // hhi <= top3.
                let z = 1.7 * (latent[i] - latent_mean) / latent_sd;
                let hhi = 0.1 + 0.8 / (1.0 + (-z).exp());
                let top3 = hhi.sqrt();
                panel.push(cell(
                    d,
                    quarters[q],
                    p,
                    v,
                    x[i],
                    Some((v as f64).ln()),
                    Some(hhi),
                    Some(top3),
                ));
            }
        }
    }

    let p10 = percentile(&x, 10.0)?;
    let p90 = percentile(&x, 90.0)?;
    let cutoff_interior = p10 < config.true_cutoff && config.true_cutoff < p90;

    Ok(SyntheticPanel {
        panel,
        truth: config.clone(),
        cutoff_interior,
    })
}

fn cell(
    dao: usize,
    quarter: Quarter,
    proposals: u32,
    voters: u32,
    x_lnp: f64,
    y_lnv: Option<f64>,
    hhi: Option<f64>,
    top3: Option<f64>,
) -> DerivedObservation {
    let p = proposals as f64;
    let v = voters as f64;
    let number_of_voters = 2 * voters;
    DerivedObservation {
        dao_id: format!("dao-{dao:04}"),
        quarter,
        proposals,
        active_voters: voters,
        number_of_voters: Some(number_of_voters),
        x_lnp,
        y_lnv,
        load_active: Some(p / v),
        ell_active: Some((p / v).ln_1p()),
        load_nv: Some(p / number_of_voters as f64),
        ell_nv: Some((p / number_of_voters as f64).ln_1p()),
        hhi,
        top3,
    }
}

/// Power skew for exported vote records: voter j gets weight (j+1)^-skew.
#[derive(Debug, Clone, Copy)]
pub struct ExportConfig {
    pub power_skew: f64,
}

impl Default for ExportConfig {
    fn default() -> Self {
        ExportConfig { power_skew: 1.0 }
    }
}

/// Synthesize proposal and vote records that re-ingest to exactly the
/// panel's (proposals, active_voters) in every cell.
///
/// Proposals land mid-quarter; every voter in a cell votes once. Cells with
/// votes but no proposals reference the dao's nearest proposal-bearing
/// quarter (which the generator guarantees exists).
pub fn export_records(
    synthetic: &SyntheticPanel,
    export: &ExportConfig,
) -> Result<(Vec<ProposalRecord>, Vec<VoteRecord>)> {
    if synthetic.truth.outcome_kind != OutcomeKind::Capacity {
        return Err(Error::InvalidArgument(
            "record export is defined for capacity-kind panels".into(),
        ));
    }
    let mid = |q: Quarter, secs: i64| {
        Utc.with_ymd_and_hms(q.year, q.start_month() + 1, 15, 0, 0, 0)
            .single()
            .expect("valid mid-quarter date")
            + chrono::Duration::seconds(secs)
    };

    let mut proposals = Vec::new();
    let mut votes = Vec::new();
    for obs in &synthetic.panel {
        for k in 0..obs.proposals {
            proposals.push(ProposalRecord {
                dao_id: obs.dao_id.clone(),
                proposal_id: format!("p-{}-{}-{}", obs.dao_id, obs.quarter, k),
                timestamp: mid(obs.quarter, k as i64),
            });
        }
    }
    for obs in &synthetic.panel {
        if obs.active_voters == 0 {
            continue;
        }
        let target = if obs.proposals > 0 {
            format!("p-{}-{}-0", obs.dao_id, obs.quarter)
        } else {
            // Nearest quarter of this dao with a proposal, earlier preferred.
            let mut candidates: Vec<&DerivedObservation> = synthetic
                .panel
                .iter()
                .filter(|o| o.dao_id == obs.dao_id && o.proposals > 0)
                .collect();
            candidates.sort_by_key(|o| {
                let dist = (o.quarter.year as i64 * 4 + o.quarter.quarter_index as i64)
                    - (obs.quarter.year as i64 * 4 + obs.quarter.quarter_index as i64);
                (dist.abs(), dist.signum())
            });
            let donor = candidates.first().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "dao `{}` has voters but no proposals in any quarter",
                    obs.dao_id
                ))
            })?;
            format!("p-{}-{}-0", donor.dao_id, donor.quarter)
        };
        for j in 0..obs.active_voters {
            votes.push(VoteRecord {
                dao_id: obs.dao_id.clone(),
                proposal_id: target.clone(),
                voter_id: format!("v-{}-{}", obs.dao_id, j),
                voting_power: 100.0 / ((j + 1) as f64).powf(export.power_skew),
                timestamp: mid(obs.quarter, 43_200 + j as i64),
            });
        }
    }
    Ok((proposals, votes))
}
