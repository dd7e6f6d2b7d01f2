//! Raw governance tables (proposals, votes, voter counts) and their
//! aggregation into the DAO-quarter panel.

use crate::error::{Error, Result, RowError};
use crate::quarter::{assign_quarter, Quarter};
use chrono::{DateTime, TimeZone, Utc};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProposalRecord {
    pub dao_id: String,
    pub proposal_id: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoteRecord {
    pub dao_id: String,
    pub proposal_id: String,
    pub voter_id: String,
    pub voting_power: f64,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoterCountRow {
    pub dao_id: String,
    pub quarter: Quarter,
    pub number_of_voters: u32,
}

/// One DAO-quarter panel cell before derived variables are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct DaoQuarterObservation {
    pub dao_id: String,
    pub quarter: Quarter,
    /// Distinct proposals brought that quarter.
    pub proposals: u32,
    /// Distinct voters casting at least one vote that quarter.
    pub active_voters: u32,
    /// Recorded voter base, when a voters table was supplied.
    pub number_of_voters: Option<u32>,
    /// Realized vote shares, descending, summing to 1 when nonempty.
    pub vote_shares: Vec<f64>,
}

pub const PROPOSALS_HEADER: [&str; 3] = ["dao_id", "proposal_id", "timestamp"];
pub const VOTES_HEADER: [&str; 5] = ["dao_id", "proposal_id", "voter_id", "voting_power", "timestamp"];
pub const VOTERS_HEADER: [&str; 3] = ["dao_id", "quarter", "number_of_voters"];

#[derive(Debug, Default)]
pub struct ParsedTables {
    pub proposals: Vec<ProposalRecord>,
    pub votes: Vec<VoteRecord>,
    pub voters: Option<Vec<VoterCountRow>>,
    /// Rows that failed to parse, in input order; parsing never silently drops.
    pub errors: Vec<RowError>,
}

fn timestamp_bounds() -> (DateTime<Utc>, DateTime<Utc>) {
    (
        Utc.with_ymd_and_hms(1970, 1, 1, 0, 0, 0).unwrap(),
        Utc.with_ymd_and_hms(2100, 1, 1, 0, 0, 0).unwrap(),
    )
}

fn parse_timestamp(raw: &str) -> std::result::Result<DateTime<Utc>, String> {
    let ts = DateTime::parse_from_rfc3339(raw)
        .map_err(|e| format!("not an RFC 3339 timestamp: {e}"))?
        .with_timezone(&Utc);
    let (lo, hi) = timestamp_bounds();
    if ts < lo || ts >= hi {
        return Err(format!("timestamp {raw} outside [1970-01-01, 2100-01-01)"));
    }
    Ok(ts)
}

fn open_reader(path: &Path, table: &str) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let _ = table;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn check_header(reader: &mut csv::Reader<std::fs::File>, table: &str, expected: &[&str]) -> Result<()> {
    let headers = reader.headers().map_err(|e| Error::Csv {
        table: table.into(),
        source: e,
    })?;
    let found: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
    if found != expected {
        return Err(Error::HeaderMismatch {
            table: table.into(),
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(())
}

fn row_error(table: &str, line: u64, field: Option<&str>, message: impl Into<String>) -> RowError {
    RowError {
        table: table.into(),
        line,
        field: field.map(str::to_string),
        message: message.into(),
    }
}

/// Parse the proposals table; duplicate (dao_id, proposal_id) pairs are
/// row errors, not records.
pub fn read_proposals_csv(path: &Path) -> Result<(Vec<ProposalRecord>, Vec<RowError>)> {
    let table = "proposals";
    let mut reader = open_reader(path, table)?;
    check_header(&mut reader, table, &PROPOSALS_HEADER)?;
    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for result in reader.records() {
        let record = result.map_err(|e| Error::Csv {
            table: table.into(),
            source: e,
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != PROPOSALS_HEADER.len() {
            errors.push(row_error(table, line, None, "wrong field count"));
            continue;
        }
        let dao_id = record[0].trim().to_string();
        let proposal_id = record[1].trim().to_string();
        if dao_id.is_empty() || proposal_id.is_empty() {
            errors.push(row_error(table, line, None, "empty identifier"));
            continue;
        }
        let timestamp = match parse_timestamp(record[2].trim()) {
            Ok(ts) => ts,
            Err(msg) => {
                errors.push(row_error(table, line, Some("timestamp"), msg));
                continue;
            }
        };
        if !seen.insert((dao_id.clone(), proposal_id.clone())) {
            errors.push(row_error(
                table,
                line,
                Some("proposal_id"),
                format!("duplicate proposal `{proposal_id}` for dao `{dao_id}`"),
            ));
            continue;
        }
        records.push(ProposalRecord {
            dao_id,
            proposal_id,
            timestamp,
        });
    }
    Ok((records, errors))
}

/// Parse the votes table. When `known_proposals` is given, a vote whose
/// (dao_id, proposal_id) is absent from it becomes a referential-integrity
/// row error naming both ids.
pub fn read_votes_csv(
    path: &Path,
    known_proposals: Option<&HashSet<(String, String)>>,
) -> Result<(Vec<VoteRecord>, Vec<RowError>)> {
    let table = "votes";
    let mut reader = open_reader(path, table)?;
    check_header(&mut reader, table, &VOTES_HEADER)?;
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| Error::Csv {
            table: table.into(),
            source: e,
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != VOTES_HEADER.len() {
            errors.push(row_error(table, line, None, "wrong field count"));
            continue;
        }
        let dao_id = record[0].trim().to_string();
        let proposal_id = record[1].trim().to_string();
        let voter_id = record[2].trim().to_string();
        if dao_id.is_empty() || proposal_id.is_empty() || voter_id.is_empty() {
            errors.push(row_error(table, line, None, "empty identifier"));
            continue;
        }
        let voting_power: f64 = match record[3].trim().parse() {
            Ok(p) => p,
            Err(_) => {
                errors.push(row_error(
                    table,
                    line,
                    Some("voting_power"),
                    format!("not a number: `{}`", &record[3]),
                ));
                continue;
            }
        };
        if !voting_power.is_finite() || voting_power < 0.0 {
            errors.push(row_error(
                table,
                line,
                Some("voting_power"),
                format!("voting_power must be a finite nonnegative number, got {voting_power}"),
            ));
            continue;
        }
        let timestamp = match parse_timestamp(record[4].trim()) {
            Ok(ts) => ts,
            Err(msg) => {
                errors.push(row_error(table, line, Some("timestamp"), msg));
                continue;
            }
        };
        if let Some(known) = known_proposals {
            if !known.contains(&(dao_id.clone(), proposal_id.clone())) {
                errors.push(row_error(
                    table,
                    line,
                    Some("proposal_id"),
                    format!(
                        "vote references unknown proposal: dao `{dao_id}`, proposal `{proposal_id}`"
                    ),
                ));
                continue;
            }
        }
        records.push(VoteRecord {
            dao_id,
            proposal_id,
            voter_id,
            voting_power,
            timestamp,
        });
    }
    Ok((records, errors))
}

/// Parse the optional voters (N) table.
pub fn read_voters_csv(path: &Path) -> Result<(Vec<VoterCountRow>, Vec<RowError>)> {
    let table = "voters";
    let mut reader = open_reader(path, table)?;
    check_header(&mut reader, table, &VOTERS_HEADER)?;
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| Error::Csv {
            table: table.into(),
            source: e,
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != VOTERS_HEADER.len() {
            errors.push(row_error(table, line, None, "wrong field count"));
            continue;
        }
        let dao_id = record[0].trim().to_string();
        let quarter = match record[1].trim().parse::<Quarter>() {
            Ok(q) => q,
            Err(e) => {
                errors.push(row_error(table, line, Some("quarter"), e.to_string()));
                continue;
            }
        };
        let number_of_voters: u32 = match record[2].trim().parse() {
            Ok(n) => n,
            Err(_) => {
                errors.push(row_error(
                    table,
                    line,
                    Some("number_of_voters"),
                    format!("not a nonnegative integer: `{}`", &record[2]),
                ));
                continue;
            }
        };
        records.push(VoterCountRow {
            dao_id,
            quarter,
            number_of_voters,
        });
    }
    Ok((records, errors))
}

/// Parse all input tables and cross-check vote references against the
/// proposal table. Every bad row becomes a [`RowError`]; nothing is dropped
/// silently.
pub fn parse_input_tables(
    proposals_path: &Path,
    votes_path: &Path,
    voters_path: Option<&Path>,
) -> Result<ParsedTables> {
    let (proposals, mut errors) = read_proposals_csv(proposals_path)?;
    let known: HashSet<(String, String)> = proposals
        .iter()
        .map(|p| (p.dao_id.clone(), p.proposal_id.clone()))
        .collect();
    let (votes, vote_errors) = read_votes_csv(votes_path, Some(&known))?;
    errors.extend(vote_errors);

    let voters = match voters_path {
        Some(path) => {
            let (rows, voter_errors) = read_voters_csv(path)?;
            errors.extend(voter_errors);
            Some(rows)
        }
        None => None,
    };

    Ok(ParsedTables {
        proposals,
        votes,
        voters,
        errors,
    })
}

/// Realized vote shares for one DAO-quarter's votes: deduplicate to the
/// latest vote per (voter, proposal), total per voter, normalize by the
/// grand total, sort descending. An all-zero quarter yields no shares.
///
/// Dedup ties on timestamp keep the vote appearing last in input order.
pub fn build_vote_shares(votes: &[VoteRecord]) -> Vec<f64> {
    build_vote_shares_refs(&votes.iter().collect::<Vec<_>>())
}

fn build_vote_shares_refs(votes: &[&VoteRecord]) -> Vec<f64> {
    if votes.is_empty() {
        return Vec::new();
    }
    debug_assert!(
        votes.iter().all(|v| v.dao_id == votes[0].dao_id
            && assign_quarter(v.timestamp) == assign_quarter(votes[0].timestamp)),
        "build_vote_shares expects one dao-quarter"
    );
    // Latest vote per (voter, proposal); >= keeps the later input row on ties.
    let mut winners: HashMap<(&str, &str), &VoteRecord> = HashMap::new();
    for &vote in votes {
        winners
            .entry((vote.voter_id.as_str(), vote.proposal_id.as_str()))
            .and_modify(|current| {
                if vote.timestamp >= current.timestamp {
                    *current = vote;
                }
            })
            .or_insert(vote);
    }
    // Accumulate per voter over a sorted key order so the result does not
    // depend on input permutation or hash order.
    let mut survivors: Vec<(&str, &str, f64)> = winners
        .into_iter()
        .map(|((voter, proposal), v)| (voter, proposal, v.voting_power))
        .collect();
    survivors.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut totals: BTreeMap<&str, f64> = BTreeMap::new();
    for (voter, _, power) in survivors {
        *totals.entry(voter).or_insert(0.0) += power;
    }
    let grand: f64 = totals.values().sum();
    if grand <= 0.0 {
        return Vec::new();
    }
    let mut shares: Vec<f64> = totals.values().map(|&t| t / grand).collect();
    shares.sort_by(|a, b| b.total_cmp(a));
    shares
}

/// Aggregate event records into the DAO-quarter panel, sorted by
/// (dao_id, quarter). A cell exists whenever the quarter saw at least one
/// proposal or one vote.
pub fn aggregate_panel(
    proposals: &[ProposalRecord],
    votes: &[VoteRecord],
    voters: Option<&[VoterCountRow]>,
) -> Result<Vec<DaoQuarterObservation>> {
    let mut voter_counts: BTreeMap<(String, Quarter), u32> = BTreeMap::new();
    if let Some(rows) = voters {
        for row in rows {
            let key = (row.dao_id.clone(), row.quarter);
            if voter_counts.insert(key, row.number_of_voters).is_some() {
                return Err(Error::DuplicateVotersRow {
                    dao_id: row.dao_id.clone(),
                    quarter: row.quarter.to_string(),
                });
            }
        }
    }

    let mut proposal_ids: BTreeMap<(String, Quarter), BTreeSet<&str>> = BTreeMap::new();
    for p in proposals {
        proposal_ids
            .entry((p.dao_id.clone(), assign_quarter(p.timestamp)))
            .or_default()
            .insert(p.proposal_id.as_str());
    }

    let mut cell_votes: BTreeMap<(String, Quarter), Vec<&VoteRecord>> = BTreeMap::new();
    for v in votes {
        cell_votes
            .entry((v.dao_id.clone(), assign_quarter(v.timestamp)))
            .or_default()
            .push(v);
    }

    let mut cells: BTreeSet<(String, Quarter)> = proposal_ids.keys().cloned().collect();
    cells.extend(cell_votes.keys().cloned());

    let mut panel = Vec::with_capacity(cells.len());
    for key in cells {
        let proposals_count = proposal_ids.get(&key).map_or(0, |s| s.len() as u32);
        let (active_voters, vote_shares) = match cell_votes.get(&key) {
            Some(cell) => {
                let voters: BTreeSet<&str> = cell.iter().map(|v| v.voter_id.as_str()).collect();
                (voters.len() as u32, build_vote_shares_refs(cell))
            }
            None => (0, Vec::new()),
        };
        let number_of_voters = voter_counts.get(&key).copied();
        panel.push(DaoQuarterObservation {
            dao_id: key.0,
            quarter: key.1,
            proposals: proposals_count,
            active_voters,
            number_of_voters,
            vote_shares,
        });
    }
    Ok(panel)
}
