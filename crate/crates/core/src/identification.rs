//! Weight identification from decision-maker scores or rankings.
//!
//! With thresholds fixed, scores are linear in the weights through the per-criterion
//! flow matrix, so fitting weights is a least-squares problem on the probability simplex.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CriteriaMatrix, ThresholdTriple, WeightVector};
use crate::netflow::{criterion_flows_for_thresholds, rank, CriterionFlowMatrix, Ranking};

const MAX_GRADIENT_ITERATIONS: usize = 50_000;

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationProblem {
    flow_matrix: CriterionFlowMatrix,
    target_scores: Vec<f64>,
}

impl IdentificationProblem {
    pub fn new(flow_matrix: CriterionFlowMatrix, target_scores: Vec<f64>) -> Result<Self> {
        if flow_matrix.m() != target_scores.len() {
            return Err(Error::LengthMismatch {
                what: "target scores",
                expected: flow_matrix.m(),
                found: target_scores.len(),
            });
        }
        if flow_matrix.m() == 0 || flow_matrix.n() == 0 {
            return Err(Error::InvalidCriteria("empty flow matrix".into()));
        }
        if let Some(x) = target_scores.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidCriteria(format!("non-finite target score {x}")));
        }
        Ok(IdentificationProblem {
            flow_matrix,
            target_scores,
        })
    }

    pub fn flow_matrix(&self) -> &CriterionFlowMatrix {
        &self.flow_matrix
    }

    pub fn target_scores(&self) -> &[f64] {
        &self.target_scores
    }

    /// Sum of squared differences between the scores induced by `weights` and the targets.
    pub fn objective(&self, weights: &[f64]) -> f64 {
        (0..self.flow_matrix.m())
            .map(|i| {
                let s: f64 = weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * self.flow_matrix.net(i, k))
                    .sum();
                (s - self.target_scores[i]).powi(2)
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiedWeights {
    pub weights: WeightVector,
    /// Sum of squared errors at `weights`.
    pub residual: f64,
    /// The minimizer is not unique (rank-deficient flows on the simplex).
    pub degenerate: bool,
    pub method_note: String,
}

/// Equally spaced targets on `[-(m-1), m-1]`: the first id of `ranking` gets `m-1`,
/// the last gets `-(m-1)`. The result is indexed like `ids`.
pub fn equipartition_targets(ranking: &[String], ids: &[String]) -> Result<Vec<f64>> {
    let position = permutation_positions(ranking, ids)?;
    let m = ids.len() as f64;
    Ok(position.iter().map(|&r| (m - 1.0) - 2.0 * r as f64).collect())
}

/// For each id in `ids`, its position in `ranking`.
fn permutation_positions(ranking: &[String], ids: &[String]) -> Result<Vec<usize>> {
    if ranking.len() != ids.len() {
        return Err(Error::NotAPermutation(format!(
            "{} ids ranked, {} alternatives",
            ranking.len(),
            ids.len()
        )));
    }
    let mut pos: HashMap<&str, usize> = HashMap::new();
    for (r, id) in ranking.iter().enumerate() {
        if pos.insert(id.as_str(), r).is_some() {
            return Err(Error::NotAPermutation(format!("{id:?} ranked twice")));
        }
    }
    ids.iter()
        .map(|id| {
            pos.get(id.as_str())
                .copied()
                .ok_or_else(|| Error::NotAPermutation(format!("{id:?} missing from ranking")))
        })
        .collect()
}

fn net_matrix(problem: &IdentificationProblem) -> DMatrix<f64> {
    let f = &problem.flow_matrix;
    DMatrix::from_fn(f.m(), f.n(), |i, k| f.net(i, k))
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

fn sse(a: &DMatrix<f64>, b: &DVector<f64>, w: &DVector<f64>) -> f64 {
    (a * w - b).norm_squared()
}

/// Accelerated projected gradient (FISTA) from the simplex centre.
fn projected_gradient(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let sigma_max = a.singular_values().max();
    let mut w = DVector::from_element(n, 1.0 / n as f64);
    if sigma_max == 0.0 {
        return w;
    }
    let step = 1.0 / (2.0 * sigma_max * sigma_max);
    let ata = a.transpose() * a;
    let atb = a.transpose() * b;
    let mut y = w.clone();
    let mut t = 1.0f64;
    for _ in 0..MAX_GRADIENT_ITERATIONS {
        let grad = 2.0 * (&ata * &y - &atb);
        let mut next = &y - step * grad;
        project_simplex(next.as_mut_slice());
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let moved = (&next - &w).amax();
        y = &next + ((t - 1.0) / t_next) * (&next - &w);
        w = next;
        t = t_next;
        if moved < 1e-15 {
            break;
        }
    }
    w
}

/// Least squares restricted to the face of the simplex spanned by `support`.
///
/// The face is parametrized around its centroid so that directions the data cannot
/// resolve stay at the centroid (minimum-norm solution).
fn solve_on_face(a: &DMatrix<f64>, b: &DVector<f64>, support: &[usize]) -> DVector<f64> {
    let n = a.ncols();
    let s = support.len();
    let mut w = DVector::zeros(n);
    if s == 1 {
        w[support[0]] = 1.0;
        return w;
    }
    let u = 1.0 / s as f64;
    let last = support[s - 1];
    let mut base = DVector::zeros(a.nrows());
    for &j in support {
        base += a.column(j) * u;
    }
    let reduced = DMatrix::from_fn(a.nrows(), s - 1, |i, c| a[(i, support[c])] - a[(i, last)]);
    let rhs = b - base;
    let svd = reduced.svd(true, true);
    let eps = svd.singular_values.max() * 1e-11 + f64::MIN_POSITIVE;
    let x = svd.solve(&rhs, eps).expect("u and v were computed");
    let mut sum = 0.0;
    for (c, &j) in support[..s - 1].iter().enumerate() {
        w[j] = u + x[c];
        sum += x[c];
    }
    w[last] = u - sum;
    w
}

/// Primal active-set refinement started from an approximately optimal feasible point.
fn active_set_polish(a: &DMatrix<f64>, b: &DVector<f64>, start: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut support: Vec<usize> = (0..n).filter(|&j| start[j] > 1e-9).collect();
    if support.is_empty() {
        support.push(start.imax());
    }
    let mut current = DVector::zeros(n);
    for &j in &support {
        current[j] = start[j];
    }
    current /= current.sum();

    for _ in 0..10 * n + 10 {
        let candidate = solve_on_face(a, b, &support);
        let blocking = support
            .iter()
            .copied()
            .filter(|&j| candidate[j] < 0.0)
            .map(|j| (j, current[j] / (current[j] - candidate[j])))
            .min_by(|x, y| x.1.total_cmp(&y.1));
        if let Some((drop, step)) = blocking {
            // Walk toward the face optimum until a weight hits zero, then leave that face.
            current = &current + step.clamp(0.0, 1.0) * (&candidate - &current);
            current[drop] = 0.0;
            support.retain(|&j| j != drop);
            continue;
        }
        current = candidate;
        let grad = 2.0 * a.transpose() * (a * &current - b);
        let lambda = support.iter().map(|&j| grad[j]).sum::<f64>() / support.len() as f64;
        let tol = 1e-10 * grad.amax().max(1.0);
        let entering = (0..n)
            .filter(|j| !support.contains(j))
            .map(|j| (j, grad[j] - lambda))
            .filter(|&(_, gap)| gap < -tol)
            .min_by(|x, y| x.1.total_cmp(&y.1));
        match entering {
            Some((j, _)) => {
                support.push(j);
                support.sort_unstable();
            }
            None => break,
        }
    }
    current
}

/// True when the flows cannot separate some direction within the simplex.
fn is_degenerate(a: &DMatrix<f64>) -> bool {
    let n = a.ncols();
    if n == 1 {
        return false;
    }
    let reduced = DMatrix::from_fn(a.nrows(), n - 1, |i, c| a[(i, c)] - a[(i, n - 1)]);
    if reduced.nrows() < n - 1 {
        return true;
    }
    let sv = reduced.singular_values();
    let max = sv.max();
    max == 0.0 || sv.min() <= max * 1e-10
}

/// Weights on the simplex minimizing the squared error between induced and target scores.
pub fn fit_weights(problem: &IdentificationProblem) -> Result<IdentifiedWeights> {
    let a = net_matrix(problem);
    let b = DVector::from_column_slice(&problem.target_scores);
    let n = a.ncols();

    let rough = projected_gradient(&a, &b);
    let polished = active_set_polish(&a, &b, &rough);
    let rough_obj = sse(&a, &b, &rough);
    let mut w = if sse(&a, &b, &polished) <= rough_obj + 1e-12 * rough_obj.max(1.0) {
        polished
    } else {
        rough
    };
    for x in w.iter_mut() {
        *x = x.max(0.0);
    }
    w /= w.sum();

    let degenerate = is_degenerate(&a);
    let mut notes = vec!["simplex least squares: projected gradient with active-set refinement".to_string()];
    if a.nrows() < n {
        notes.push(format!("fewer alternatives ({}) than criteria ({n})", a.nrows()));
    }
    if degenerate {
        notes.push("flow matrix is rank-deficient on the simplex; minimizer is not unique".into());
    }
    let weights = WeightVector::new(w.iter().copied().collect())?;
    let residual = problem.objective(weights.as_slice());
    Ok(IdentifiedWeights {
        weights,
        residual,
        degenerate,
        method_note: notes.join("; "),
    })
}

/// Identified weights together with the ranking they induce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingFit {
    pub identified: IdentifiedWeights,
    pub induced: Ranking,
    /// The induced ranking matches the requested one exactly.
    pub ranking_reproduced: bool,
}

fn fit_and_compare(
    criteria: &CriteriaMatrix,
    thresholds: &[ThresholdTriple],
    exponent: u32,
    targets: Vec<f64>,
    wanted: &[String],
) -> Result<RankingFit> {
    let flows = criterion_flows_for_thresholds(criteria, thresholds, exponent)?;
    let problem = IdentificationProblem::new(flows, targets)?;
    let identified = fit_weights(&problem)?;
    let scores = problem.flow_matrix.scores(&identified.weights)?;
    let induced = rank(&scores, criteria.alternative_ids())?;
    let ranking_reproduced = induced.ids().iter().zip(wanted).all(|(a, b)| *a == b.as_str());
    Ok(RankingFit {
        identified,
        induced,
        ranking_reproduced,
    })
}

/// Fits weights to an ordering of all alternatives (best first) through equipartition targets.
pub fn fit_weights_from_ranking(
    criteria: &CriteriaMatrix,
    thresholds: &[ThresholdTriple],
    exponent: u32,
    ranking: &[String],
) -> Result<RankingFit> {
    let targets = equipartition_targets(ranking, criteria.alternative_ids())?;
    fit_and_compare(criteria, thresholds, exponent, targets, ranking)
}

/// Fits weights to one score per alternative (indexed like the criteria rows).
pub fn fit_weights_from_scores(
    criteria: &CriteriaMatrix,
    thresholds: &[ThresholdTriple],
    exponent: u32,
    scores: &[f64],
) -> Result<RankingFit> {
    let wanted: Vec<String> = rank(scores, criteria.alternative_ids())?
        .ids()
        .into_iter()
        .map(String::from)
        .collect();
    fit_and_compare(criteria, thresholds, exponent, scores.to_vec(), &wanted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::netflow::criterion_net_flows;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn equipartition_cases() {
        let e1 = ids(&["613", "2573", "292", "162", "3062"]);
        assert_eq!(
            equipartition_targets(&e1, &e1).unwrap(),
            vec![4.0, 2.0, 0.0, -2.0, -4.0]
        );
        let swapped = ids(&["2573", "613", "292", "162", "3062"]);
        assert_eq!(
            equipartition_targets(&swapped, &e1).unwrap(),
            vec![2.0, 4.0, 0.0, -2.0, -4.0]
        );
        assert_eq!(
            equipartition_targets(&ids(&["x", "y"]), &ids(&["x", "y"])).unwrap(),
            vec![1.0, -1.0]
        );
        assert_eq!(
            equipartition_targets(&ids(&["x"]), &ids(&["x"])).unwrap(),
            vec![0.0]
        );
        assert!(matches!(
            equipartition_targets(&ids(&["x", "x"]), &ids(&["x", "y"])),
            Err(Error::NotAPermutation(_))
        ));
        assert!(equipartition_targets(&ids(&["x", "z"]), &ids(&["x", "y"])).is_err());
        assert!(equipartition_targets(&ids(&["x"]), &ids(&["x", "y"])).is_err());
    }

    #[test]
    fn simplex_projection() {
        let mut v = [0.5, 0.5, 0.5];
        project_simplex(&mut v);
        for x in v {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let mut v = [2.0, 0.0, -1.0];
        project_simplex(&mut v);
        assert_eq!(v, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn recovers_traditional_weights() {
        let flows = criterion_net_flows(&fixtures::e1_criteria(), &fixtures::traditional_model()).unwrap();
        let targets = flows.scores(&fixtures::traditional_model().weights).unwrap();
        let fit = fit_weights(&IdentificationProblem::new(flows, targets).unwrap()).unwrap();
        for (w, e) in fit.weights.as_slice().iter().zip(fixtures::TRADITIONAL_WEIGHTS) {
            assert!((w - e).abs() < 1e-6, "{w} vs {e}");
        }
        assert!(fit.residual < 1e-20);
        assert!(!fit.degenerate);
    }

    #[test]
    fn identical_columns_are_degenerate() {
        let flows = CriterionFlowMatrix {
            mu_plus: vec![vec![2.0, 2.0], vec![1.0, 1.0], vec![0.0, 0.0]],
            mu_minus: vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]],
        };
        let problem = IdentificationProblem::new(flows, vec![1.0, 0.5, -1.5]).unwrap();
        let fit = fit_weights(&problem).unwrap();
        assert!(fit.degenerate);
        assert!((fit.residual - problem.objective(&[0.5, 0.5])).abs() < 1e-12);
        assert_eq!(fit.weights.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn single_alternative_gives_uniform_weights() {
        let c = CriteriaMatrix::new(ids(&["a"]), ids(&["x", "y", "z"]), vec![vec![0.1, 0.2, 0.3]]).unwrap();
        let fit = fit_weights_from_ranking(&c, &[fixtures::e1_thresholds(); 3], 3, &ids(&["a"])).unwrap();
        assert_eq!(fit.identified.residual, 0.0);
        for w in fit.identified.weights.as_slice() {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(fit.ranking_reproduced);
    }

    #[test]
    fn dimension_mismatch() {
        let flows = criterion_net_flows(&fixtures::e1_criteria(), &fixtures::traditional_model()).unwrap();
        assert!(matches!(
            IdentificationProblem::new(flows, vec![0.0; 3]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn ranking_fits_reproduce_input() {
        let e1 = fixtures::e1_criteria();
        let t = [fixtures::e1_thresholds(); 4];
        for order in [
            ["613", "2573", "292", "162", "3062"],
            ["2573", "613", "292", "162", "3062"],
        ] {
            let fit = fit_weights_from_ranking(&e1, &t, 3, &ids(&order)).unwrap();
            assert!(fit.ranking_reproduced, "{order:?} -> {:?}", fit.induced.ids());
        }
    }
}
