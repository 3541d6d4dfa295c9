//! Static net-flow model: concordance, discordance with veto, outranking degrees,
//! superiority/inferiority flows and the resulting ranking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    validate_model, CriteriaMatrix, PreferenceModel, ThresholdTriple, WeightVector, TOLERANCE,
};

/// `C_k(i) - C_k(j)`.
pub fn pairwise_difference(criteria: &CriteriaMatrix, i: usize, j: usize, k: usize) -> Result<f64> {
    let m = criteria.m();
    let n = criteria.n();
    for (what, index, len) in [("alternative", i, m), ("alternative", j, m), ("criterion", k, n)] {
        if index >= len {
            return Err(Error::IndexOutOfRange { what, index, len });
        }
    }
    Ok(criteria.value(i, k) - criteria.value(j, k))
}

/// Degree to which a difference `delta` supports "i is at least as good as j".
///
/// Branches are tested in order so that `p == q` degrades to a step.
pub fn concordance(delta: f64, t: &ThresholdTriple, self_pair: bool) -> f64 {
    if self_pair {
        0.0
    } else if delta >= -t.q {
        1.0
    } else if delta <= -t.p {
        0.0
    } else {
        (delta + t.p) / (t.p - t.q)
    }
}

/// Degree to which a difference `delta` opposes "i is at least as good as j"; 1 at veto.
pub fn discordance(delta: f64, t: &ThresholdTriple) -> f64 {
    if delta <= -t.v {
        1.0
    } else if delta >= -t.p {
        0.0
    } else {
        (-delta - t.p) / (t.v - t.p)
    }
}

/// Product over all criteria of `1 - D_l(i, j)^e`.
fn veto_factor(a: &[f64], b: &[f64], thresholds: &[ThresholdTriple], exponent: u32) -> f64 {
    a.iter()
        .zip(b)
        .zip(thresholds)
        .map(|((x, y), t)| 1.0 - discordance(x - y, t).powi(exponent as i32))
        .product()
}

fn checked(criteria: &CriteriaMatrix, model: &PreferenceModel) -> Result<()> {
    validate_model(model.clone(), criteria.n()).map(|_| ())
}

/// Outranking degree `σ(i, j)`: weighted concordance damped by the veto product.
pub fn outranking_degree(
    criteria: &CriteriaMatrix,
    model: &PreferenceModel,
    i: usize,
    j: usize,
) -> Result<f64> {
    checked(criteria, model)?;
    let m = criteria.m();
    for index in [i, j] {
        if index >= m {
            return Err(Error::IndexOutOfRange {
                what: "alternative",
                index,
                len: m,
            });
        }
    }
    Ok(degree_unchecked(criteria, model, i, j))
}

fn degree_unchecked(criteria: &CriteriaMatrix, model: &PreferenceModel, i: usize, j: usize) -> f64 {
    if i == j {
        return 0.0;
    }
    let (a, b) = (&criteria.rows()[i], &criteria.rows()[j]);
    let weighted: f64 = a
        .iter()
        .zip(b)
        .zip(model.thresholds.iter().zip(model.weights.as_slice()))
        .map(|((x, y), (t, w))| w * concordance(x - y, t, false))
        .sum::<f64>()
        .min(1.0); // weights may sum to 1 + ulp
    weighted * veto_factor(a, b, &model.thresholds, model.discordance_exponent)
}

/// Square matrix of outranking degrees, `sigma[i][j] = σ(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutrankingMatrix {
    pub sigma: Vec<Vec<f64>>,
}

impl OutrankingMatrix {
    pub fn size(&self) -> usize {
        self.sigma.len()
    }
}

pub fn outranking_matrix(criteria: &CriteriaMatrix, model: &PreferenceModel) -> Result<OutrankingMatrix> {
    checked(criteria, model)?;
    let m = criteria.m();
    let sigma = (0..m)
        .map(|i| (0..m).map(|j| degree_unchecked(criteria, model, i, j)).collect())
        .collect();
    Ok(OutrankingMatrix { sigma })
}

/// Per-criterion flows `μ_k⁺(i)` and `μ_k⁻(i)`, stored row-per-alternative.
///
/// They depend on the thresholds and the exponent only, so any weight vector turns
/// them into scores with a dot product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionFlowMatrix {
    pub mu_plus: Vec<Vec<f64>>,
    pub mu_minus: Vec<Vec<f64>>,
}

impl CriterionFlowMatrix {
    pub fn m(&self) -> usize {
        self.mu_plus.len()
    }

    pub fn n(&self) -> usize {
        self.mu_plus.first().map_or(0, Vec::len)
    }

    /// `μ_k⁺(i) − μ_k⁻(i)`.
    pub fn net(&self, i: usize, k: usize) -> f64 {
        self.mu_plus[i][k] - self.mu_minus[i][k]
    }

    /// All net values, one row per alternative.
    pub fn net_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.m())
            .map(|i| (0..self.n()).map(|k| self.net(i, k)).collect())
            .collect()
    }

    /// Scores through the weight-linear form `Σ_k w_k (μ_k⁺(i) − μ_k⁻(i))`.
    pub fn scores(&self, weights: &WeightVector) -> Result<Vec<f64>> {
        if self.m() > 0 && weights.len() != self.n() {
            return Err(Error::LengthMismatch {
                what: "weights",
                expected: self.n(),
                found: weights.len(),
            });
        }
        Ok((0..self.m())
            .map(|i| {
                weights
                    .as_slice()
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * self.net(i, k))
                    .sum()
            })
            .collect())
    }
}

/// Per-criterion flows from thresholds alone.
pub fn criterion_flows_for_thresholds(
    criteria: &CriteriaMatrix,
    thresholds: &[ThresholdTriple],
    exponent: u32,
) -> Result<CriterionFlowMatrix> {
    let n = criteria.n();
    if thresholds.len() != n {
        return Err(Error::LengthMismatch {
            what: "thresholds",
            expected: n,
            found: thresholds.len(),
        });
    }
    if exponent == 0 {
        return Err(Error::ZeroExponent);
    }
    for t in thresholds {
        ThresholdTriple::new(t.q, t.p, t.v)?;
    }
    let m = criteria.m();
    let rows = criteria.rows();
    let mut mu_plus = vec![vec![0.0; n]; m];
    let mut mu_minus = vec![vec![0.0; n]; m];
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let veto = veto_factor(&rows[i], &rows[j], thresholds, exponent);
            for k in 0..n {
                let omega = concordance(rows[i][k] - rows[j][k], &thresholds[k], false) * veto;
                mu_plus[i][k] += omega;
                mu_minus[j][k] += omega;
            }
        }
    }
    Ok(CriterionFlowMatrix { mu_plus, mu_minus })
}

pub fn criterion_net_flows(
    criteria: &CriteriaMatrix,
    model: &PreferenceModel,
) -> Result<CriterionFlowMatrix> {
    checked(criteria, model)?;
    criterion_flows_for_thresholds(criteria, &model.thresholds, model.discordance_exponent)
}

/// Superiority flow, inferiority flow and net score per alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub phi_plus: Vec<f64>,
    pub phi_minus: Vec<f64>,
    pub scores: Vec<f64>,
}

pub fn flows(sigma: &OutrankingMatrix) -> FlowResult {
    let m = sigma.size();
    let phi_plus: Vec<f64> = sigma.sigma.iter().map(|row| row.iter().sum()).collect();
    let phi_minus: Vec<f64> = (0..m)
        .map(|j| sigma.sigma.iter().map(|row| row[j]).sum())
        .collect();
    let scores = phi_plus.iter().zip(&phi_minus).map(|(p, n)| p - n).collect();
    FlowResult {
        phi_plus,
        phi_minus,
        scores,
    }
}

/// Net-flow scores through the outranking matrix.
///
/// Debug builds also evaluate the per-criterion decomposition and assert that both
/// agree to 1e-10.
pub fn static_scores(criteria: &CriteriaMatrix, model: &PreferenceModel) -> Result<FlowResult> {
    let result = flows(&outranking_matrix(criteria, model)?);
    #[cfg(debug_assertions)]
    {
        let linear = criterion_net_flows(criteria, model)?.scores(&model.weights)?;
        for (a, b) in result.scores.iter().zip(&linear) {
            debug_assert!((a - b).abs() <= 1e-10, "score paths disagree: {a} vs {b}");
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAlternative {
    pub id: String,
    pub score: f64,
    pub rank: usize,
}

/// Alternatives ordered from best (rank 1) to worst.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ranking(pub Vec<RankedAlternative>);

impl Ranking {
    pub fn ids(&self) -> Vec<&str> {
        self.0.iter().map(|r| r.id.as_str()).collect()
    }

    pub fn entries(&self) -> &[RankedAlternative] {
        &self.0
    }

    pub fn first(&self) -> Option<&RankedAlternative> {
        self.0.first()
    }
}

/// Orders alternatives by descending score. Scores within [`TOLERANCE`] of each
/// other keep their input order.
pub fn rank(scores: &[f64], ids: &[String]) -> Result<Ranking> {
    if scores.len() != ids.len() {
        return Err(Error::LengthMismatch {
            what: "scores",
            expected: ids.len(),
            found: scores.len(),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Quantize so the comparison is a total order; the sort is stable.
    order.sort_by_key(|&i| std::cmp::Reverse((scores[i] / TOLERANCE).round() as i64));
    Ok(Ranking(
        order
            .into_iter()
            .enumerate()
            .map(|(r, i)| RankedAlternative {
                id: ids[i].clone(),
                score: scores[i],
                rank: r + 1,
            })
            .collect(),
    ))
}
