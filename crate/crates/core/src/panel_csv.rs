//! The derived-panel CSV schema: the file the pipeline writes after
//! aggregation and the one every estimation command reads back.
//!
//! Header: `dao_id,quarter,proposals,active_voters,number_of_voters,hhi,top3,x_lnp,y_lnv,load_active,load_nv`.
//! Absent values are empty fields; the log-load columns are recomputed as
//! ln(1 + load) on read.

use crate::error::{Error, Result, RowError};
use crate::metrics::DerivedObservation;
use crate::quarter::Quarter;
use std::path::Path;

pub const PANEL_HEADER: [&str; 11] = [
    "dao_id",
    "quarter",
    "proposals",
    "active_voters",
    "number_of_voters",
    "hhi",
    "top3",
    "x_lnp",
    "y_lnv",
    "load_active",
    "load_nv",
];

fn opt_to_field<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Serialize a derived panel; float fields use the shortest round-tripping
/// representation, so write/read is lossless.
pub fn panel_to_csv(panel: &[DerivedObservation]) -> String {
    let mut out = String::new();
    out.push_str(&PANEL_HEADER.join(","));
    out.push('\n');
    for o in panel {
        let fields = [
            o.dao_id.clone(),
            o.quarter.to_string(),
            o.proposals.to_string(),
            o.active_voters.to_string(),
            opt_to_field(&o.number_of_voters),
            opt_to_field(&o.hhi),
            opt_to_field(&o.top3),
            o.x_lnp.to_string(),
            opt_to_field(&o.y_lnv),
            opt_to_field(&o.load_active),
            opt_to_field(&o.load_nv),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write_panel_csv(path: &Path, panel: &[DerivedObservation]) -> Result<()> {
    std::fs::write(path, panel_to_csv(panel)).map_err(|e| Error::io(path.display().to_string(), e))
}

fn parse_opt_f64(raw: &str, line: u64, field: &str, errors: &mut Vec<RowError>) -> Option<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Some(None);
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(Some(v)),
        _ => {
            errors.push(RowError {
                table: "panel".into(),
                line,
                field: Some(field.into()),
                message: format!("not a finite number: `{raw}`"),
            });
            None
        }
    }
}

/// Read a panel CSV back into derived observations.
pub fn read_panel_csv(path: &Path) -> Result<(Vec<DerivedObservation>, Vec<RowError>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(|e| Error::Csv {
        table: "panel".into(),
        source: e,
    })?;
    let found: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
    if found != PANEL_HEADER {
        return Err(Error::HeaderMismatch {
            table: "panel".into(),
            expected: PANEL_HEADER.join(","),
            found: found.join(","),
        });
    }

    let mut panel = Vec::new();
    let mut errors = Vec::new();
    'rows: for result in reader.records() {
        let record = result.map_err(|e| Error::Csv {
            table: "panel".into(),
            source: e,
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != PANEL_HEADER.len() {
            errors.push(RowError {
                table: "panel".into(),
                line,
                field: None,
                message: "wrong field count".into(),
            });
            continue;
        }
        let dao_id = record[0].trim().to_string();
        let quarter = match record[1].trim().parse::<Quarter>() {
            Ok(q) => q,
            Err(e) => {
                errors.push(RowError {
                    table: "panel".into(),
                    line,
                    field: Some("quarter".into()),
                    message: e.to_string(),
                });
                continue;
            }
        };
        let mut counts = [0u32; 2];
        for (slot, (idx, field)) in [(2usize, "proposals"), (3usize, "active_voters")]
            .into_iter()
            .enumerate()
        {
            match record[idx].trim().parse::<u32>() {
                Ok(v) => counts[slot] = v,
                Err(_) => {
                    errors.push(RowError {
                        table: "panel".into(),
                        line,
                        field: Some(field.into()),
                        message: format!("not a nonnegative integer: `{}`", &record[idx]),
                    });
                    continue 'rows;
                }
            }
        }
        let number_of_voters = {
            let raw = record[4].trim();
            if raw.is_empty() {
                None
            } else {
                match raw.parse::<u32>() {
                    Ok(v) => Some(v),
                    Err(_) => {
                        errors.push(RowError {
                            table: "panel".into(),
                            line,
                            field: Some("number_of_voters".into()),
                            message: format!("not a nonnegative integer: `{raw}`"),
                        });
                        continue;
                    }
                }
            }
        };
        let Some(hhi) = parse_opt_f64(&record[5], line, "hhi", &mut errors) else {
            continue;
        };
        let Some(top3) = parse_opt_f64(&record[6], line, "top3", &mut errors) else {
            continue;
        };
        let Some(x_lnp) = parse_opt_f64(&record[7], line, "x_lnp", &mut errors) else {
            continue;
        };
        let Some(x_lnp) = x_lnp else {
            errors.push(RowError {
                table: "panel".into(),
                line,
                field: Some("x_lnp".into()),
                message: "x_lnp may not be empty".into(),
            });
            continue;
        };
        let Some(y_lnv) = parse_opt_f64(&record[8], line, "y_lnv", &mut errors) else {
            continue;
        };
        let Some(load_active) = parse_opt_f64(&record[9], line, "load_active", &mut errors) else {
            continue;
        };
        let Some(load_nv) = parse_opt_f64(&record[10], line, "load_nv", &mut errors) else {
            continue;
        };
        panel.push(DerivedObservation {
            dao_id,
            quarter,
            proposals: counts[0],
            active_voters: counts[1],
            number_of_voters,
            x_lnp,
            y_lnv,
            load_active,
            ell_active: load_active.map(f64::ln_1p),
            load_nv,
            ell_nv: load_nv.map(f64::ln_1p),
            hhi,
            top3,
        });
    }
    Ok((panel, errors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample() -> DerivedObservation {
        DerivedObservation {
            dao_id: "dao-a".into(),
            quarter: Quarter::new(2021, 3).unwrap(),
            proposals: 7,
            active_voters: 120,
            number_of_voters: Some(500),
            x_lnp: 8.0f64.ln(),
            y_lnv: Some(120.0f64.ln()),
            load_active: Some(7.0 / 120.0),
            ell_active: Some((7.0 / 120.0f64).ln_1p()),
            load_nv: Some(7.0 / 500.0),
            ell_nv: Some((7.0 / 500.0f64).ln_1p()),
            hhi: Some(0.31),
            top3: Some(0.85),
        }
    }

    #[test]
    fn round_trips_losslessly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        let mut empty_cell = sample();
        empty_cell.dao_id = "dao-b".into();
        empty_cell.active_voters = 0;
        empty_cell.y_lnv = None;
        empty_cell.load_active = None;
        empty_cell.ell_active = None;
        empty_cell.hhi = None;
        empty_cell.top3 = None;
        empty_cell.number_of_voters = None;
        empty_cell.load_nv = None;
        empty_cell.ell_nv = None;
        let panel = vec![sample(), empty_cell];
        write_panel_csv(&path, &panel).unwrap();
        let (back, errors) = read_panel_csv(&path).unwrap();
        assert!(errors.is_empty());
        assert_eq!(back, panel);
    }

    #[test]
    fn rejects_wrong_header() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        std::fs::write(&path, "dao,quarter\nd1,2020q1\n").unwrap();
        assert!(matches!(
            read_panel_csv(&path),
            Err(Error::HeaderMismatch { .. })
        ));
    }

    #[test]
    fn reports_bad_rows_with_line_numbers() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("panel.csv");
        let mut text = PANEL_HEADER.join(",");
        text.push('\n');
        text.push_str("d1,2021q1,3,2,,0.5,0.9,1.386,0.693,1.5,\n");
        text.push_str("d1,not-a-quarter,3,2,,,,1.386,,,\n");
        std::fs::write(&path, text).unwrap();
        let (panel, errors) = read_panel_csv(&path).unwrap();
        assert_eq!(panel.len(), 1);
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].line, 3);
    }
}
