//! Net-flow multicriteria ranking with filtered score dynamics.
//!
//! * [`netflow`]: static outranking model, per-criterion flows and ranking.
//! * [`dynamics`]: first-order filtered scores under scheduled preference changes.
//! * [`identification`]: weight fitting from scores or rankings.
//! * [`dataset`]: CSV/JSON formats.

pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod fixtures;
pub mod identification;
pub mod model;
pub mod netflow;

pub use dynamics::{
    active_parameters, closed_form_constant_schedule, detect_rank_events, filter_step, simulate,
    steady_state, FilterConfig, FilterSpec, RankEvent, Scenario, ScheduleEntry, Simulator, Trajectory,
    TrajectoryStep,
};
pub use error::{Error, Result};
pub use identification::{
    equipartition_targets, fit_weights, fit_weights_from_ranking, fit_weights_from_scores,
    IdentificationProblem, IdentifiedWeights, RankingFit,
};
pub use model::{
    validate_model, CriteriaMatrix, PreferenceModel, ThresholdTriple, WeightVector, DEFAULT_EXPONENT,
    TOLERANCE,
};
pub use netflow::{
    concordance, criterion_net_flows, discordance, flows, outranking_degree, outranking_matrix,
    pairwise_difference, rank, static_scores, CriterionFlowMatrix, FlowResult, OutrankingMatrix,
    RankedAlternative, Ranking,
};
