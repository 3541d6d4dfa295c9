//! Dynamic net-flow scores.
//!
//! Scores follow a first-order discrete filter toward the static net flows:
//! `s(t) = (1 - alpha) s(t-1) + alpha (φ⁺(t) - φ⁻(t))`, where the flows are evaluated
//! with whatever criteria and preferences are active at step `t`, so a change scheduled
//! at step `k` first moves `s(k)`. Preferences and criteria change on a
//! piecewise-constant schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_model, CriteriaMatrix, PreferenceModel, TOLERANCE};
use crate::netflow::{rank, static_scores, FlowResult, Ranking};

/// Per-step score change under which an iterative run is declared converged.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-8;

/// Smoothing factor of the score filter, optionally derived from a damping time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "FilterSpec")]
pub struct FilterConfig {
    alpha: f64,
    damping: Option<(f64, f64)>,
}

/// Unvalidated filter description: `alpha`, or `tau` and `dt`, or all three if consistent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl From<FilterConfig> for FilterSpec {
    fn from(f: FilterConfig) -> Self {
        FilterSpec {
            alpha: Some(f.alpha),
            tau: f.damping.map(|d| d.0),
            dt: f.damping.map(|d| d.1),
        }
    }
}

impl FilterConfig {
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        Ok(FilterConfig { alpha, damping: None })
    }

    /// `alpha = 1 / (1 + tau / dt)`.
    pub fn from_damping(tau: f64, dt: f64) -> Result<Self> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::NonpositiveDt(dt));
        }
        if tau < 0.0 || !tau.is_finite() {
            return Err(Error::InvalidFilter(format!(
                "damping time must be non-negative (got {tau})"
            )));
        }
        let alpha = 1.0 / (1.0 + tau / dt);
        Ok(FilterConfig {
            alpha,
            damping: Some((tau, dt)),
        })
    }

    pub fn resolve(spec: FilterSpec) -> Result<Self> {
        match spec {
            FilterSpec {
                alpha: Some(a),
                tau: None,
                dt: None,
            } => FilterConfig::from_alpha(a),
            FilterSpec {
                alpha,
                tau: Some(tau),
                dt: Some(dt),
            } => {
                let f = FilterConfig::from_damping(tau, dt)?;
                match alpha {
                    Some(a) if (a - f.alpha).abs() > 1e-12 => Err(Error::InvalidFilter(format!(
                        "alpha {a} disagrees with tau/dt, which give {}",
                        f.alpha
                    ))),
                    _ => Ok(f),
                }
            }
            _ => Err(Error::InvalidFilter(
                "give either alpha or both tau and dt".into(),
            )),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `(tau, dt)` when the filter was built from a damping time.
    pub fn damping(&self) -> Option<(f64, f64)> {
        self.damping
    }
}

/// One filter update. Written as `target - (1 - alpha)(target - s)` so that
/// `alpha = 1` yields `target` exactly and `target == s` is an exact fixed point.
pub fn filter_step(current: &[f64], target: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if current.len() != target.len() {
        return Err(Error::LengthMismatch {
            what: "target scores",
            expected: current.len(),
            found: target.len(),
        });
    }
    Ok(current
        .iter()
        .zip(target)
        .map(|(s, x)| x - (1.0 - alpha) * (x - s))
        .collect())
}

/// `target + (s0 - target)(1 - alpha)^t`: the filter output after `t` steps toward a fixed target.
pub fn closed_form_constant_schedule(s0: f64, target: f64, alpha: f64, t: usize) -> f64 {
    target + (s0 - target) * (1.0 - alpha).powi(t as i32)
}

/// A change of criteria and/or preferences taking effect from `step` onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub step: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PreferenceModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<CriteriaMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    criteria: CriteriaMatrix,
    initial_model: PreferenceModel,
    filter: FilterConfig,
    horizon: usize,
    schedule: Vec<ScheduleEntry>,
}

impl Scenario {
    pub fn new(
        criteria: CriteriaMatrix,
        initial_model: PreferenceModel,
        filter: FilterConfig,
        horizon: usize,
        schedule: Vec<ScheduleEntry>,
    ) -> Result<Self> {
        let initial_model = validate_model(initial_model, criteria.n())?;
        for (idx, entry) in schedule.iter().enumerate() {
            if idx > 0 && entry.step <= schedule[idx - 1].step {
                return Err(Error::InvalidSchedule(format!(
                    "entry {idx}: steps must be strictly increasing ({} after {})",
                    entry.step,
                    schedule[idx - 1].step
                )));
            }
            if entry.step > horizon {
                return Err(Error::StepOutOfRange {
                    step: entry.step,
                    horizon,
                });
            }
            check_entry(&criteria, entry, idx)?;
        }
        Ok(Scenario {
            criteria,
            initial_model,
            filter,
            horizon,
            schedule,
        })
    }

    pub fn criteria(&self) -> &CriteriaMatrix {
        &self.criteria
    }

    pub fn initial_model(&self) -> &PreferenceModel {
        &self.initial_model
    }

    pub fn filter(&self) -> FilterConfig {
        self.filter
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn schedule(&self) -> &[ScheduleEntry] {
        &self.schedule
    }

    pub fn alternative_ids(&self) -> &[String] {
        self.criteria.alternative_ids()
    }

    pub fn with_filter(mut self, filter: FilterConfig) -> Self {
        self.filter = filter;
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        if let Some(last) = self.schedule.last() {
            if last.step > horizon {
                return Err(Error::StepOutOfRange {
                    step: last.step,
                    horizon,
                });
            }
        }
        self.horizon = horizon;
        Ok(self)
    }

    /// Installs `model` from `step` onward, replacing the model of an existing entry at
    /// that step. Later entries still override it. Extends the horizon if needed.
    pub fn set_model_at(&mut self, step: usize, model: PreferenceModel) -> Result<()> {
        let model = validate_model(model, self.criteria.n())?;
        match self.schedule.binary_search_by_key(&step, |e| e.step) {
            Ok(idx) => self.schedule[idx].model = Some(model),
            Err(idx) => self.schedule.insert(
                idx,
                ScheduleEntry {
                    step,
                    model: Some(model),
                    criteria: None,
                },
            ),
        }
        self.horizon = self.horizon.max(step);
        Ok(())
    }

    /// Number of schedule entries in force at step `t`; changes exactly where parameters do.
    fn segment(&self, t: usize) -> usize {
        self.schedule.partition_point(|e| e.step <= t)
    }

    /// Criteria and model in force at step `t`, without a horizon check.
    fn parameters_at(&self, t: usize) -> (&CriteriaMatrix, &PreferenceModel) {
        let applied = &self.schedule[..self.segment(t)];
        let criteria = applied
            .iter()
            .rev()
            .find_map(|e| e.criteria.as_ref())
            .unwrap_or(&self.criteria);
        let model = applied
            .iter()
            .rev()
            .find_map(|e| e.model.as_ref())
            .unwrap_or(&self.initial_model);
        (criteria, model)
    }
}

fn check_entry(base: &CriteriaMatrix, entry: &ScheduleEntry, idx: usize) -> Result<()> {
    if entry.model.is_none() && entry.criteria.is_none() {
        return Err(Error::InvalidSchedule(format!(
            "entry {idx} overrides neither model nor criteria"
        )));
    }
    if let Some(c) = &entry.criteria {
        if !base.same_shape(c) {
            return Err(Error::InvalidSchedule(format!(
                "entry {idx}: criteria override must keep the same alternatives and criterion count"
            )));
        }
    }
    if let Some(model) = &entry.model {
        validate_model(model.clone(), base.n())?;
    }
    Ok(())
}

/// Criteria and model in force at step `t`: the initial ones overridden by every schedule
/// entry at or before `t`, later entries winning.
pub fn active_parameters(scenario: &Scenario, t: usize) -> Result<(&CriteriaMatrix, &PreferenceModel)> {
    if t > scenario.horizon {
        return Err(Error::StepOutOfRange {
            step: t,
            horizon: scenario.horizon,
        });
    }
    Ok(scenario.parameters_at(t))
}

/// Incremental evaluation of a scenario, one filter step at a time.
///
/// Not bound by the scenario horizon: once past the last schedule entry the final
/// parameters stay in force.
#[derive(Debug, Clone)]
pub struct Simulator {
    scenario: Scenario,
    step: usize,
    scores: Vec<f64>,
    target: Option<(usize, Vec<f64>)>,
}

impl Simulator {
    /// Starts at the static scores of the initial criteria and model, even if a schedule
    /// entry overrides them at step 0.
    pub fn new(scenario: Scenario) -> Result<Self> {
        let scores = static_scores(&scenario.criteria, &scenario.initial_model)?.scores;
        Ok(Simulator {
            scenario,
            step: 0,
            scores,
            target: None,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn ranking(&self) -> Ranking {
        rank(&self.scores, self.scenario.alternative_ids()).expect("scores match alternatives")
    }

    pub fn snapshot(&self) -> TrajectoryStep {
        TrajectoryStep {
            step: self.step,
            scores: self.scores.clone(),
            ranking: self.ranking(),
        }
    }

    pub fn set_filter(&mut self, filter: FilterConfig) {
        self.scenario.filter = filter;
    }

    /// Applies `model` from the current step on; history is not touched.
    pub fn set_model(&mut self, model: PreferenceModel) -> Result<usize> {
        self.scenario.set_model_at(self.step, model)?;
        self.target = None;
        Ok(self.step)
    }

    /// Net flows `φ⁺ − φ⁻` that the next [`advance`](Self::advance) moves toward: those
    /// under the parameters active at step `step() + 1`.
    pub fn target(&mut self) -> Result<&[f64]> {
        let next = self.step + 1;
        let segment = self.scenario.segment(next);
        let stale = !matches!(&self.target, Some((s, _)) if *s == segment);
        if stale {
            let (criteria, model) = self.scenario.parameters_at(next);
            let scores = static_scores(criteria, model)?.scores;
            self.target = Some((segment, scores));
        }
        Ok(&self.target.as_ref().expect("just filled").1)
    }

    pub fn advance(&mut self) -> Result<&[f64]> {
        let alpha = self.scenario.filter.alpha;
        let target = self.target()?.to_vec();
        self.scores = filter_step(&self.scores, &target, alpha)?;
        self.step += 1;
        Ok(&self.scores)
    }

    /// Advances until no score moves by more than [`CONVERGENCE_TOLERANCE`] in one step,
    /// giving up after `max_steps`. Returns the number of steps taken when converged.
    pub fn run_until_converged(&mut self, max_steps: usize) -> Result<Option<usize>> {
        for taken in 1..=max_steps {
            let before = self.scores.clone();
            self.advance()?;
            let change = before
                .iter()
                .zip(&self.scores)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if change < CONVERGENCE_TOLERANCE {
                return Ok(Some(taken));
            }
        }
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub step: usize,
    pub scores: Vec<f64>,
    pub ranking: Ranking,
}

/// Two alternatives swapping order between consecutive steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEvent {
    /// Ahead after the crossing.
    pub upper_id: String,
    pub lower_id: String,
    pub step_before: usize,
    pub step_after: usize,
    /// Linear interpolation of the zero of the score difference.
    pub crossing_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub alternative_ids: Vec<String>,
    pub steps: Vec<TrajectoryStep>,
    pub events: Vec<RankEvent>,
}

impl Trajectory {
    /// Scores of alternative `i` over time.
    pub fn series(&self, i: usize) -> Vec<f64> {
        self.steps.iter().map(|s| s.scores[i]).collect()
    }

    pub fn final_scores(&self) -> Option<&[f64]> {
        self.steps.last().map(|s| s.scores.as_slice())
    }
}

/// Runs the scenario from step 0 to its horizon.
pub fn simulate(scenario: &Scenario) -> Result<Trajectory> {
    let mut sim = Simulator::new(scenario.clone())?;
    let mut steps = Vec::with_capacity(scenario.horizon + 1);
    steps.push(sim.snapshot());
    for _ in 0..scenario.horizon {
        sim.advance()?;
        steps.push(sim.snapshot());
    }
    let ids = scenario.alternative_ids().to_vec();
    let events = rank_events(&ids, &steps);
    Ok(Trajectory {
        alternative_ids: ids,
        steps,
        events,
    })
}

fn sign(d: f64) -> i8 {
    if d > TOLERANCE {
        1
    } else if d < -TOLERANCE {
        -1
    } else {
        0
    }
}

/// Strict order swaps between consecutive steps of `steps`.
///
/// A tie (within [`crate::model::TOLERANCE`]) is not a swap by itself; the swap is
/// reported on the interval that leaves the tie, with the crossing at the tie step.
pub fn rank_events(ids: &[String], steps: &[TrajectoryStep]) -> Vec<RankEvent> {
    let m = ids.len();
    let mut events = Vec::new();
    let mut keyed = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            let mut last = 0i8;
            for w in steps.windows(2) {
                let d0 = w[0].scores[a] - w[0].scores[b];
                let d1 = w[1].scores[a] - w[1].scores[b];
                let (s0, s1) = (sign(d0), sign(d1));
                if s0 != 0 {
                    last = s0;
                }
                if s1 == 0 || last == 0 || s1 == last {
                    continue;
                }
                let frac = if s0 == 0 { 0.0 } else { d0 / (d0 - d1) };
                let (upper, lower) = if s1 > 0 { (a, b) } else { (b, a) };
                keyed.push((a, b));
                events.push(RankEvent {
                    upper_id: ids[upper].clone(),
                    lower_id: ids[lower].clone(),
                    step_before: w[0].step,
                    step_after: w[1].step,
                    crossing_time: w[0].step as f64 + frac * (w[1].step - w[0].step) as f64,
                });
            }
        }
    }
    let mut order: Vec<usize> = (0..events.len()).collect();
    order.sort_by(|&x, &y| {
        let (ex, ey) = (&events[x], &events[y]);
        ex.step_before
            .cmp(&ey.step_before)
            .then(ex.crossing_time.total_cmp(&ey.crossing_time))
            .then(keyed[x].cmp(&keyed[y]))
    });
    order.into_iter().map(|i| events[i].clone()).collect()
}

pub fn detect_rank_events(trajectory: &Trajectory) -> Vec<RankEvent> {
    rank_events(&trajectory.alternative_ids, &trajectory.steps)
}

/// Limit of the filter: static scores under the parameters active at the horizon.
pub fn steady_state(scenario: &Scenario) -> Result<FlowResult> {
    let (criteria, model) = scenario.parameters_at(scenario.horizon);
    static_scores(criteria, model)
}
