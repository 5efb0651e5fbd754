use serde::{Deserialize, Serialize};

use super::ResidualInstance;
use crate::error::{Error, Result};

/// Dense row-major `n x k` matrix of scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInstance(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInstance(format!(
                "score {v} outside [0, 1]"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidInstance("ragged score matrix".into()));
        }
        Self::new(n, k, rows.into_iter().flatten().collect())
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    #[inline]
    pub fn get(&self, i: usize, r: usize) -> f64 {
        self.data[i * self.cols + r]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Resource identifiers with per-resource capacities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceSet {
    names: Vec<String>,
    capacities: Vec<u32>,
}

impl ResourceSet {
    pub fn new(names: Vec<String>, capacities: Vec<u32>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidInstance("at least one resource required".into()));
        }
        if names.len() != capacities.len() {
            return Err(Error::InvalidInstance(format!(
                "{} resource names but {} capacities",
                names.len(),
                capacities.len()
            )));
        }
        Ok(Self { names, capacities })
    }

    /// Resources named `r1..rk`.
    pub fn with_capacities(capacities: Vec<u32>) -> Result<Self> {
        let names = (1..=capacities.len()).map(|r| format!("r{r}")).collect();
        Self::new(names, capacities)
    }

    pub fn k(&self) -> usize {
        self.capacities.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn capacities(&self) -> &[u32] {
        &self.capacities
    }

    pub fn total_capacity(&self) -> usize {
        self.capacities.iter().map(|&c| c as usize).sum()
    }
}

/// Which score matrix a solver call optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scores {
    /// Classifier confidence `f_r(x_i)`, used by the algorithmic policy.
    Confidence,
    /// True success probability `p_ir`.
    SuccessProb,
}

/// A pool of individuals, resources with capacities, and their scores.
///
/// Serialized as
///
/// ```json
/// {
///   "n": 2,
///   "resources": ["mon-am", "mon-pm"],
///   "capacities": [1, 1],
///   "confidence": [[0.4, 0.5], [0.6, 0.1]],
///   "success_prob": [[0.9, 0.0], [0.3, 0.2]]
/// }
/// ```
///
/// `success_prob` may be omitted. Both matrices are `n x k` with entries in
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRepr", into = "InstanceRepr")]
pub struct MatchInstance {
    resources: ResourceSet,
    confidence: ScoreMatrix,
    success_prob: Option<ScoreMatrix>,
}

impl MatchInstance {
    pub fn new(
        resources: ResourceSet,
        confidence: ScoreMatrix,
        success_prob: Option<ScoreMatrix>,
    ) -> Result<Self> {
        let k = resources.k();
        if confidence.cols() != k {
            return Err(Error::DimensionMismatch {
                expected_rows: confidence.rows(),
                expected_cols: k,
                rows: confidence.rows(),
                cols: confidence.cols(),
            });
        }
        if let Some(p) = &success_prob {
            if p.rows() != confidence.rows() || p.cols() != k {
                return Err(Error::DimensionMismatch {
                    expected_rows: confidence.rows(),
                    expected_cols: k,
                    rows: p.rows(),
                    cols: p.cols(),
                });
            }
        }
        Ok(Self {
            resources,
            confidence,
            success_prob,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn n(&self) -> usize {
        self.confidence.rows()
    }

    pub fn k(&self) -> usize {
        self.resources.k()
    }

    pub fn resources(&self) -> &ResourceSet {
        &self.resources
    }

    pub fn confidence(&self) -> &ScoreMatrix {
        &self.confidence
    }

    pub fn success_prob(&self) -> Result<&ScoreMatrix> {
        self.success_prob.as_ref().ok_or(Error::MissingSuccessProb)
    }

    pub fn scores(&self, which: Scores) -> Result<&ScoreMatrix> {
        match which {
            Scores::Confidence => Ok(&self.confidence),
            Scores::SuccessProb => self.success_prob(),
        }
    }

    /// The sub-instance formed by the residual's individuals (in order) and
    /// its remaining capacities.
    pub fn restrict(&self, residual: &ResidualInstance) -> Result<MatchInstance> {
        if residual.remaining.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected_rows: residual.unmatched.len(),
                expected_cols: self.k(),
                rows: residual.unmatched.len(),
                cols: residual.remaining.len(),
            });
        }
        let pick = |m: &ScoreMatrix| -> Result<ScoreMatrix> {
            let mut data = Vec::with_capacity(residual.unmatched.len() * self.k());
            for &i in &residual.unmatched {
                if i >= self.n() {
                    return Err(Error::InvalidInstance(format!("individual {i} out of range")));
                }
                data.extend_from_slice(m.row(i));
            }
            ScoreMatrix::new(residual.unmatched.len(), self.k(), data)
        };
        MatchInstance::new(
            ResourceSet::new(self.resources.names.clone(), residual.remaining.clone())?,
            pick(&self.confidence)?,
            self.success_prob.as_ref().map(pick).transpose()?,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceRepr {
    n: usize,
    resources: Vec<String>,
    capacities: Vec<u32>,
    confidence: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    success_prob: Option<Vec<Vec<f64>>>,
}

impl TryFrom<InstanceRepr> for MatchInstance {
    type Error = Error;

    fn try_from(repr: InstanceRepr) -> Result<Self> {
        let k = repr.resources.len();
        let matrix = |rows: Vec<Vec<f64>>| -> Result<ScoreMatrix> {
            if rows.len() != repr.n || rows.iter().any(|r| r.len() != k) {
                return Err(Error::DimensionMismatch {
                    expected_rows: repr.n,
                    expected_cols: k,
                    rows: rows.len(),
                    cols: rows.first().map_or(0, Vec::len),
                });
            }
            ScoreMatrix::new(repr.n, k, rows.into_iter().flatten().collect())
        };
        let confidence = matrix(repr.confidence)?;
        let success_prob = repr.success_prob.map(matrix).transpose()?;
        MatchInstance::new(
            ResourceSet::new(repr.resources, repr.capacities)?,
            confidence,
            success_prob,
        )
    }
}

impl From<MatchInstance> for InstanceRepr {
    fn from(inst: MatchInstance) -> Self {
        InstanceRepr {
            n: inst.n(),
            confidence: inst.confidence.to_rows(),
            success_prob: inst.success_prob.as_ref().map(ScoreMatrix::to_rows),
            resources: inst.resources.names,
            capacities: inst.resources.capacities,
        }
    }
}
