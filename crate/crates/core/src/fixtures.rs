//! The five-cheese E1 sample and the two weightings used with it.

use crate::dataset::parse_criteria;
use crate::model::{CriteriaMatrix, PreferenceModel, ThresholdTriple};

/// E1 performance table as CSV.
pub const E1_CSV: &str = include_str!("../data/e1.csv");

/// Scenario switching from the traditional to the milder weighting at step 0.
pub const E1_SWITCH_JSON: &str = include_str!("../data/e1_switch.json");

/// Weights favouring odour and taste (traditional, strongly typed cheese).
pub const TRADITIONAL_WEIGHTS: [f64; 4] = [0.1, 0.4, 0.1, 0.4];

/// Weights favouring aspect and texture (milder cheese for a wider market).
pub const MILD_WEIGHTS: [f64; 4] = [0.4, 0.1, 0.4, 0.1];

pub fn e1_criteria() -> CriteriaMatrix {
    parse_criteria(E1_CSV, "e1.csv").expect("bundled E1 fixture parses")
}

/// q = 0, p = 0.1, v = 0.3 on every criterion.
pub fn e1_thresholds() -> ThresholdTriple {
    ThresholdTriple {
        q: 0.0,
        p: 0.1,
        v: 0.3,
    }
}

pub fn traditional_model() -> PreferenceModel {
    PreferenceModel::with_uniform_thresholds(&TRADITIONAL_WEIGHTS, e1_thresholds()).expect("valid")
}

pub fn mild_model() -> PreferenceModel {
    PreferenceModel::with_uniform_thresholds(&MILD_WEIGHTS, e1_thresholds()).expect("valid")
}
