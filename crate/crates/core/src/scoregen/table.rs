use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FEATURE_PROBS: [f64; 3] = [0.20, 0.45, 0.35];

/// Beta `(α, β)` per feature (rows) and slot (columns).
pub const DEFAULT_BETA_TABLE: [[(f64, f64); 10]; 3] = [
    [
        (0.2, 0.3),
        (20.0, 20.0),
        (0.2, 0.3),
        (20.0, 17.0),
        (17.0, 20.0),
        (20.0, 20.0),
        (0.2, 0.4),
        (19.0, 12.0),
        (0.2, 0.3),
        (0.15, 0.2),
    ],
    [
        (20.0, 20.0),
        (0.2, 0.4),
        (19.0, 12.0),
        (0.2, 0.3),
        (0.15, 0.2),
        (0.2, 0.3),
        (20.0, 20.0),
        (0.2, 0.3),
        (20.0, 17.0),
        (17.0, 20.0),
    ],
    [
        (1.0, 10.0),
        (1.0, 10.0),
        (5.0, 10.0),
        (5.0, 2.0),
        (3.1, 4.0),
        (19.0, 12.0),
        (0.2, 0.3),
        (0.15, 0.2),
        (0.2, 0.3),
        (20.0, 20.0),
    ],
];

/// Beta parameters indexed by feature and 0-based slot.
///
/// In config files the table is written row by row, one row per feature:
///
/// ```toml
/// beta = [
///   [[0.2, 0.3], [20, 20], ...],   # x = 0, slots 1..k
///   ...
/// ]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<[f64; 2]>>", into = "Vec<Vec<[f64; 2]>>")]
pub struct BetaParamTable {
    rows: Vec<Vec<(f64, f64)>>,
}

impl BetaParamTable {
    pub fn new(rows: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::Config("Beta table must be a non-empty rectangle".into()));
        }
        if let Some(&(a, b)) = rows
            .iter()
            .flatten()
            .find(|(a, b)| !(*a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()))
        {
            return Err(Error::Config(format!("Beta parameters must be positive, got ({a}, {b})")));
        }
        Ok(Self { rows })
    }

    pub fn get(&self, x: usize, r: usize) -> Result<(f64, f64)> {
        self.rows
            .get(x)
            .and_then(|row| row.get(r))
            .copied()
            .ok_or(Error::MissingTableEntry { x, r })
    }

    pub fn features(&self) -> usize {
        self.rows.len()
    }

    pub fn slots(&self) -> usize {
        self.rows[0].len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, (f64, f64))> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(x, row)| row.iter().enumerate().map(move |(r, &ab)| (x, r, ab)))
    }
}

impl Default for BetaParamTable {
    fn default() -> Self {
        Self {
            rows: DEFAULT_BETA_TABLE.iter().map(|row| row.to_vec()).collect(),
        }
    }
}

impl TryFrom<Vec<Vec<[f64; 2]>>> for BetaParamTable {
    type Error = Error;

    fn try_from(rows: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        Self::new(
            rows.into_iter()
                .map(|row| row.into_iter().map(|[a, b]| (a, b)).collect())
                .collect(),
        )
    }
}

impl From<BetaParamTable> for Vec<Vec<[f64; 2]>> {
    fn from(t: BetaParamTable) -> Self {
        t.rows
            .into_iter()
            .map(|row| row.into_iter().map(|(a, b)| [a, b]).collect())
            .collect()
    }
}
