//! Batch commands behind the `dynflow` binary.
//!
//! Every command writes its report to the given sink and returns a [`CliError`]
//! whose [`exit_code`](CliError::exit_code) is 1 for I/O trouble and 2 for invalid input.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use dynflow_core::dataset::{format_score, load_criteria, load_scenario, load_scores, write_trajectory};
use dynflow_core::{
    fit_weights_from_ranking, fit_weights_from_scores, rank, simulate, static_scores, validate_model,
    CriteriaMatrix, Error, FilterConfig, PreferenceModel, Ranking, ThresholdTriple, WeightVector,
    DEFAULT_EXPONENT,
};

#[derive(Debug, Parser)]
#[command(
    name = "dynflow",
    version,
    about = "Net-flow ranking with filtered score dynamics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank alternatives under a static preference model.
    Rank(RankArgs),
    /// Run a scenario and write its trajectory.
    Simulate(SimulateArgs),
    /// Fit criterion weights to scores or to a ranking.
    Identify(IdentifyArgs),
    /// Start the HTTP decision service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Criteria CSV (`id,<criterion>...`).
    #[arg(long)]
    pub data: PathBuf,
    /// Comma separated weights, one per criterion.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub weights: Vec<f64>,
    /// `q:p:v` per criterion, or one triple for all.
    #[arg(long, value_delimiter = ',', required = true)]
    pub thresholds: Vec<Triple>,
    #[arg(long, default_value_t = DEFAULT_EXPONENT)]
    pub exponent: u32,
    /// Also write the ranking as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario JSON.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Trajectory CSV; events go next to it as `<out>.events.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the scenario's filter coefficient.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub thresholds: Vec<Triple>,
    #[arg(long, default_value_t = DEFAULT_EXPONENT)]
    pub exponent: u32,
    /// Target scores CSV (`id,score`).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Target ranking, best first, e.g. `a>b>c`.
    #[arg(long)]
    pub ranking: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory with the UI assets; `/` serves its `index.html`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
}

/// A `q:p:v` threshold triple as typed on the command line.
#[derive(Debug, Clone, Copy)]
pub struct Triple(pub ThresholdTriple);

impl FromStr for Triple {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [q, p, v] = parts[..] else {
            return Err(format!("expected q:p:v, got {s:?}"));
        };
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| format!("{x:?} is not a number"))
        };
        Ok(Triple(ThresholdTriple {
            q: num(q)?,
            p: num(p)?,
            v: num(v)?,
        }))
    }
}

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Invalid(_) => 2,
        }
    }

    fn field(field: &str, e: Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Invalid(format!("{field}: {e}"))
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) | CliError::Invalid(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Invalid(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult = Result<(), CliError>;

fn thresholds_for(triples: &[Triple], n: usize) -> Result<Vec<ThresholdTriple>, CliError> {
    let list: Vec<ThresholdTriple> = match triples {
        [one] => vec![one.0; n],
        many => many.iter().map(|t| t.0).collect(),
    };
    for (k, t) in list.iter().enumerate() {
        t.validate(k).map_err(|e| CliError::field("--thresholds", e))?;
    }
    if list.len() != n {
        return Err(CliError::Invalid(format!(
            "--thresholds: expected 1 or {n} triples, got {}",
            list.len()
        )));
    }
    Ok(list)
}

fn load_data(path: &Path) -> Result<CriteriaMatrix, CliError> {
    load_criteria(path).map_err(|e| CliError::field("--data", e))
}

/// Writes `id  score  rank` lines for a ranking.
pub fn write_ranking_table(out: &mut dyn Write, ranking: &Ranking) -> std::io::Result<()> {
    let width = ranking
        .entries()
        .iter()
        .map(|r| r.id.len())
        .max()
        .unwrap_or(0)
        .max(2);
    writeln!(out, "{:<width$}  {:>12}  rank", "id", "score")?;
    for r in ranking.entries() {
        writeln!(out, "{:<width$}  {:>12}  {}", r.id, format_score(r.score), r.rank)?;
    }
    Ok(())
}

pub fn cmd_rank(args: &RankArgs, out: &mut dyn Write) -> CliResult {
    let criteria = load_data(&args.data)?;
    let weights = WeightVector::new(args.weights.clone()).map_err(|e| CliError::field("--weights", e))?;
    let thresholds = thresholds_for(&args.thresholds, criteria.n())?;
    let model = PreferenceModel::new(weights, thresholds, args.exponent)
        .map_err(|e| CliError::field("--exponent", e))?;
    let model = validate_model(model, criteria.n()).map_err(|e| CliError::field("--weights", e))?;
    let scores = static_scores(&criteria, &model)?.scores;
    let ranking = rank(&scores, criteria.alternative_ids())?;
    write_ranking_table(out, &ranking)?;
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&ranking).expect("rankings serialize");
        std::fs::write(path, json + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> CliResult {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(alpha) = args.alpha {
        let filter = FilterConfig::from_alpha(alpha).map_err(|e| CliError::field("--alpha", e))?;
        scenario = scenario.with_filter(filter);
    }
    let trajectory = simulate(&scenario)?;
    write_trajectory(&trajectory, &args.out)?;
    for e in &trajectory.events {
        writeln!(
            out,
            "CROSSING {} over {} at t≈{:.2}",
            e.upper_id, e.lower_id, e.crossing_time
        )?;
    }
    Ok(())
}

fn parse_ranking(text: &str) -> Vec<String> {
    text.split('>').map(|s| s.trim().to_string()).collect()
}

pub fn cmd_identify(args: &IdentifyArgs, out: &mut dyn Write) -> CliResult {
    let criteria = load_data(&args.data)?;
    let thresholds = thresholds_for(&args.thresholds, criteria.n())?;
    let fit = match (&args.scores, &args.ranking) {
        (Some(path), None) => {
            let scores =
                load_scores(path, criteria.alternative_ids()).map_err(|e| CliError::field("--scores", e))?;
            fit_weights_from_scores(&criteria, &thresholds, args.exponent, &scores)?
        }
        (None, Some(text)) => {
            fit_weights_from_ranking(&criteria, &thresholds, args.exponent, &parse_ranking(text))
                .map_err(|e| CliError::field("--ranking", e))?
        }
        _ => {
            return Err(CliError::Invalid(
                "give exactly one of --scores or --ranking".into(),
            ))
        }
    };
    let w = &fit.identified;
    let width = criteria
        .criterion_labels()
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(0);
    for (label, x) in criteria.criterion_labels().iter().zip(w.weights.as_slice()) {
        writeln!(out, "{label:<width$}  {x:.4}")?;
    }
    writeln!(out, "residual  {:.3e}", w.residual)?;
    if w.degenerate {
        writeln!(out, "note  {}", w.method_note)?;
    }
    let induced = fit.induced.ids().join(">");
    let verdict = if fit.ranking_reproduced { "yes" } else { "no" };
    writeln!(out, "ranking reproduced  {verdict} ({induced})")?;
    Ok(())
}
