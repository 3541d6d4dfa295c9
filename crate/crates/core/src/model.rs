//! Input types of the net-flow model: the performance table and the decision maker's preferences.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for weight normalization and score comparisons.
pub const TOLERANCE: f64 = 1e-9;

/// Default exponent applied to discordance degrees in the veto product.
pub const DEFAULT_EXPONENT: u32 = 3;

/// Performance table: `values[i][k]` is the value of alternative `i` on criterion `k`.
///
/// Every criterion is to be maximized. Criteria that should be minimized must be
/// negated before they get here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCriteria", into = "RawCriteria")]
pub struct CriteriaMatrix {
    alternative_ids: Vec<String>,
    criterion_labels: Vec<String>,
    values: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCriteria {
    alternative_ids: Vec<String>,
    criterion_labels: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<RawCriteria> for CriteriaMatrix {
    type Error = Error;

    fn try_from(raw: RawCriteria) -> Result<Self> {
        CriteriaMatrix::new(raw.alternative_ids, raw.criterion_labels, raw.values)
    }
}

impl From<CriteriaMatrix> for RawCriteria {
    fn from(c: CriteriaMatrix) -> Self {
        RawCriteria {
            alternative_ids: c.alternative_ids,
            criterion_labels: c.criterion_labels,
            values: c.values,
        }
    }
}

impl CriteriaMatrix {
    pub fn new(
        alternative_ids: Vec<String>,
        criterion_labels: Vec<String>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if alternative_ids.is_empty() {
            return Err(Error::InvalidCriteria(
                "at least one alternative is required".into(),
            ));
        }
        if criterion_labels.is_empty() {
            return Err(Error::InvalidCriteria(
                "at least one criterion is required".into(),
            ));
        }
        if values.len() != alternative_ids.len() {
            return Err(Error::LengthMismatch {
                what: "criteria rows",
                expected: alternative_ids.len(),
                found: values.len(),
            });
        }
        let n = criterion_labels.len();
        for (row, id) in values.iter().zip(&alternative_ids) {
            if row.len() != n {
                return Err(Error::InvalidCriteria(format!(
                    "row {id:?} has {} values, expected {n}",
                    row.len()
                )));
            }
            if let Some(k) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidCriteria(format!(
                    "row {id:?} has a non-finite value for {:?}",
                    criterion_labels[k]
                )));
            }
        }
        let mut seen = HashSet::new();
        for id in &alternative_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(CriteriaMatrix {
            alternative_ids,
            criterion_labels,
            values,
        })
    }

    /// Number of alternatives.
    pub fn m(&self) -> usize {
        self.alternative_ids.len()
    }

    /// Number of criteria.
    pub fn n(&self) -> usize {
        self.criterion_labels.len()
    }

    pub fn alternative_ids(&self) -> &[String] {
        &self.alternative_ids
    }

    pub fn criterion_labels(&self) -> &[String] {
        &self.criterion_labels
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[i][k]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.alternative_ids.iter().position(|a| a == id)
    }

    /// Reorders the alternatives: row `r` of the result is row `order[r]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.m())?;
        CriteriaMatrix::new(
            order.iter().map(|&i| self.alternative_ids[i].clone()).collect(),
            self.criterion_labels.clone(),
            order.iter().map(|&i| self.values[i].clone()).collect(),
        )
    }

    /// True when `other` ranks the same alternatives on the same number of criteria.
    pub fn same_shape(&self, other: &CriteriaMatrix) -> bool {
        self.alternative_ids == other.alternative_ids && self.n() == other.n()
    }
}

fn check_permutation(order: &[usize], m: usize) -> Result<()> {
    let mut seen = vec![false; m];
    if order.len() != m {
        return Err(Error::LengthMismatch {
            what: "permutation",
            expected: m,
            found: order.len(),
        });
    }
    for &i in order {
        if i >= m || std::mem::replace(&mut seen[i], true) {
            return Err(Error::NotAPermutation(format!("{order:?}")));
        }
    }
    Ok(())
}

/// Indifference, preference and veto thresholds of one criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdTriple {
    pub q: f64,
    pub p: f64,
    pub v: f64,
}

impl ThresholdTriple {
    pub fn new(q: f64, p: f64, v: f64) -> Result<Self> {
        let t = ThresholdTriple { q, p, v };
        t.validate(0)?;
        Ok(t)
    }

    /// Checks `0 <= q <= p <= v`; `index` names the criterion in the error.
    pub fn validate(&self, index: usize) -> Result<()> {
        let ThresholdTriple { q, p, v } = *self;
        let finite = q.is_finite() && p.is_finite() && v.is_finite();
        if !finite || q < 0.0 || q > p || p > v {
            return Err(Error::ThresholdOrder { index, q, p, v });
        }
        Ok(())
    }
}

/// Normalized criterion weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::LengthMismatch {
                what: "weights",
                expected: 1,
                found: 0,
            });
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::NegativeWeight { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > TOLERANCE {
            return Err(Error::WeightSum { sum });
        }
        Ok(WeightVector(weights))
    }

    pub fn uniform(n: usize) -> Self {
        WeightVector(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        WeightVector::new(raw).map_err(serde::de::Error::custom)
    }
}

/// Weights, per-criterion thresholds and the discordance exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct PreferenceModel {
    pub weights: WeightVector,
    pub thresholds: Vec<ThresholdTriple>,
    #[serde(rename = "exponent")]
    pub discordance_exponent: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    weights: WeightVector,
    thresholds: Vec<ThresholdTriple>,
    #[serde(default = "default_exponent")]
    exponent: u32,
}

fn default_exponent() -> u32 {
    DEFAULT_EXPONENT
}

impl TryFrom<RawModel> for PreferenceModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        PreferenceModel::new(raw.weights, raw.thresholds, raw.exponent)
    }
}

impl PreferenceModel {
    /// Builds a model, checking thresholds and exponent. Length against a criteria
    /// matrix is checked by [`validate_model`].
    pub fn new(weights: WeightVector, thresholds: Vec<ThresholdTriple>, exponent: u32) -> Result<Self> {
        if thresholds.len() != weights.len() {
            return Err(Error::LengthMismatch {
                what: "thresholds",
                expected: weights.len(),
                found: thresholds.len(),
            });
        }
        for (index, t) in thresholds.iter().enumerate() {
            t.validate(index)?;
        }
        if exponent == 0 {
            return Err(Error::ZeroExponent);
        }
        Ok(PreferenceModel {
            weights,
            thresholds,
            discordance_exponent: exponent,
        })
    }

    /// Same thresholds on every criterion, default exponent.
    pub fn with_uniform_thresholds(weights: &[f64], t: ThresholdTriple) -> Result<Self> {
        let weights = WeightVector::new(weights.to_vec())?;
        let n = weights.len();
        PreferenceModel::new(weights, vec![t; n], DEFAULT_EXPONENT)
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    /// Copy of this model with different weights and the same thresholds.
    pub fn with_weights(&self, weights: WeightVector) -> Result<Self> {
        PreferenceModel::new(weights, self.thresholds.clone(), self.discordance_exponent)
    }
}

/// Checks every model invariant, including that it covers exactly `n` criteria.
pub fn validate_model(model: PreferenceModel, n: usize) -> Result<PreferenceModel> {
    if model.weights.len() != n {
        return Err(Error::LengthMismatch {
            what: "weights",
            expected: n,
            found: model.weights.len(),
        });
    }
    if model.thresholds.len() != n {
        return Err(Error::LengthMismatch {
            what: "thresholds",
            expected: n,
            found: model.thresholds.len(),
        });
    }
    // Fields are public, so re-run the constructor checks.
    let weights = WeightVector::new(model.weights.0)?;
    PreferenceModel::new(weights, model.thresholds, model.discordance_exponent)
}
