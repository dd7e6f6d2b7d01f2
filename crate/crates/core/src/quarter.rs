//! Calendar quarters, the panel's time index.

use crate::error::{Error, Result};
use chrono::{DateTime, Datelike, Utc};
use std::fmt;
use std::str::FromStr;

/// A calendar quarter, labeled `YYYYqQ` (e.g. `2020q2`).
///
/// Ordering is lexicographic on `(year, quarter_index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quarter {
    pub year: i32,
    pub quarter_index: u8,
}

impl Quarter {
    pub fn new(year: i32, quarter_index: u8) -> Result<Self> {
        if !(1..=4).contains(&quarter_index) {
            return Err(Error::InvalidArgument(format!(
                "quarter index must be 1..=4, got {quarter_index}"
            )));
        }
        Ok(Quarter {
            year,
            quarter_index,
        })
    }

    /// The next calendar quarter.
    pub fn succ(self) -> Self {
        if self.quarter_index == 4 {
            Quarter {
                year: self.year + 1,
                quarter_index: 1,
            }
        } else {
            Quarter {
                year: self.year,
                quarter_index: self.quarter_index + 1,
            }
        }
    }

    /// First month of the quarter (1, 4, 7, 10).
    pub fn start_month(self) -> u32 {
        (self.quarter_index as u32 - 1) * 3 + 1
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}q{}", self.year, self.quarter_index)
    }
}

impl FromStr for Quarter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::InvalidArgument(format!("expected quarter like `2020q2`, got `{s}`"));
        let (year, q) = s.split_once(['q', 'Q']).ok_or_else(err)?;
        let year: i32 = year.parse().map_err(|_| err())?;
        let q: u8 = q.parse().map_err(|_| err())?;
        Quarter::new(year, q)
    }
}

/// Calendar quarter containing the instant, in UTC.
pub fn assign_quarter(timestamp: DateTime<Utc>) -> Quarter {
    let month = timestamp.month();
    Quarter {
        year: timestamp.year(),
        quarter_index: ((month - 1) / 3 + 1) as u8,
    }
}
