//! File formats: criteria CSV, model and scenario JSON, trajectory CSV and event JSON.
//!
//! Numbers are plain base-10 text with a decimal point. Scores are written with 8
//! decimals.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::{FilterConfig, FilterSpec, RankEvent, Scenario, ScheduleEntry, Trajectory};
use crate::error::{Error, Result};
use crate::model::{CriteriaMatrix, PreferenceModel};

pub const TRAJECTORY_HEADER: &str = "step,alternative_id,score,rank";

/// Score text with 8 decimals; never prints `-0.00000000`.
pub fn format_score(x: f64) -> String {
    let s = format!("{x:.8}");
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    CriteriaCsv,
    ModelJson,
    ScenarioJson,
    TrajectoryCsv,
    EventsJson,
}

/// A file whose format was inferred from its extension and confirmed by its content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetFile {
    pub path: PathBuf,
    pub format: DatasetFormat,
}

impl DatasetFile {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read(path)?;
        let name = path.to_string_lossy();
        let format = if name.ends_with(".csv") {
            let header = text.lines().next().unwrap_or("").trim();
            if header.is_empty() {
                return Err(Error::EmptyFile(name.into_owned()));
            }
            if header == TRAJECTORY_HEADER {
                DatasetFormat::TrajectoryCsv
            } else {
                DatasetFormat::CriteriaCsv
            }
        } else if name.ends_with(".json") {
            let value: Value = serde_json::from_str(&text).map_err(|e| schema("", e))?;
            if name.ends_with(".events.json") && value.is_array() {
                DatasetFormat::EventsJson
            } else if value.get("initial_model").is_some() {
                DatasetFormat::ScenarioJson
            } else if value.get("weights").is_some() {
                DatasetFormat::ModelJson
            } else {
                return Err(Error::Schema {
                    path: String::new(),
                    message: "neither a scenario, a model nor an event list".into(),
                });
            }
        } else {
            return Err(Error::Schema {
                path: String::new(),
                message: format!("unknown extension for {name}"),
            });
        };
        Ok(DatasetFile {
            path: path.to_path_buf(),
            format,
        })
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn schema(path: impl Into<String>, e: impl std::fmt::Display) -> Error {
    Error::Schema {
        path: path.into(),
        message: e.to_string(),
    }
}

fn parse_error(source: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        message: message.into(),
    }
}

/// Data rows as `(line number, fields)`.
type Records = Vec<(usize, Vec<String>)>;

/// Header and rows of a headed CSV table.
fn csv_records(text: &str, source: &str) -> Result<(Vec<String>, Records)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(source, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(Error::EmptyFile(source.to_string()));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(source, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok((header, rows))
}

fn parse_number(field: &str, source: &str, line: usize, what: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| parse_error(source, line, format!("{what}: {field:?} is not a number")))
}

/// Parses `id,<label1>,...,<labelN>` followed by one row per alternative.
pub fn parse_criteria(text: &str, source: &str) -> Result<CriteriaMatrix> {
    let (header, rows) = csv_records(text, source)?;
    if header.len() < 2 {
        return Err(parse_error(
            source,
            1,
            "header needs an id column and at least one criterion",
        ));
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile(source.to_string()));
    }
    let labels = header[1..].to_vec();
    let mut ids = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (line, fields) in rows {
        if fields.len() != header.len() {
            return Err(parse_error(
                source,
                line,
                format!(
                    "row {:?} has {} fields, expected {}",
                    fields[0],
                    fields.len(),
                    header.len()
                ),
            ));
        }
        let row = fields[1..]
            .iter()
            .zip(&labels)
            .map(|(f, label)| parse_number(f, source, line, label))
            .collect::<Result<Vec<_>>>()?;
        ids.push(fields[0].clone());
        values.push(row);
    }
    CriteriaMatrix::new(ids, labels, values)
}

pub fn load_criteria(path: impl AsRef<Path>) -> Result<CriteriaMatrix> {
    let path = path.as_ref();
    parse_criteria(&read(path)?, &path.to_string_lossy())
}

pub fn criteria_to_csv(criteria: &CriteriaMatrix) -> String {
    let mut out = String::from("id");
    for label in criteria.criterion_labels() {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    for (id, row) in criteria.alternative_ids().iter().zip(criteria.rows()) {
        out.push_str(id);
        for x in row {
            // shortest representation that round-trips
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    out
}

pub fn write_criteria(criteria: &CriteriaMatrix, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &criteria_to_csv(criteria))
}

/// Parses `id,score` rows and returns the scores in the order of `ids`.
pub fn parse_scores(text: &str, source: &str, ids: &[String]) -> Result<Vec<f64>> {
    let (header, rows) = csv_records(text, source)?;
    if header.len() != 2 {
        return Err(parse_error(source, 1, "expected header `id,score`"));
    }
    let mut scores = vec![None; ids.len()];
    for (line, fields) in rows {
        if fields.len() != 2 {
            return Err(parse_error(
                source,
                line,
                format!("expected 2 fields, found {}", fields.len()),
            ));
        }
        let idx = ids
            .iter()
            .position(|id| *id == fields[0])
            .ok_or_else(|| parse_error(source, line, format!("unknown alternative {:?}", fields[0])))?;
        if scores[idx].is_some() {
            return Err(Error::DuplicateId(fields[0].clone()));
        }
        scores[idx] = Some(parse_number(&fields[1], source, line, "score")?);
    }
    scores
        .into_iter()
        .zip(ids)
        .map(|(s, id)| s.ok_or_else(|| parse_error(source, 0, format!("no score for {id:?}"))))
        .collect()
}

pub fn load_scores(path: impl AsRef<Path>, ids: &[String]) -> Result<Vec<f64>> {
    let path = path.as_ref();
    parse_scores(&read(path)?, &path.to_string_lossy(), ids)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PreferenceModel> {
    let path = path.as_ref();
    let text = read(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| schema(e.path().to_string(), e.inner()))
}

pub fn write_model(model: &PreferenceModel, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(model).expect("models serialize");
    write(path.as_ref(), &(text + "\n"))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    criteria: CriteriaMatrix,
    initial_model: PreferenceModel,
    filter: FilterSpec,
    horizon: usize,
    #[serde(default)]
    schedule: Vec<ScheduleEntry>,
}

/// Replaces a string criteria field by the inline form of the CSV file it names.
fn inline_criteria(slot: &mut Value, field_path: &str, base_dir: Option<&Path>) -> Result<()> {
    let Some(file) = slot.as_str() else {
        return Ok(());
    };
    let Some(dir) = base_dir else {
        return Err(schema(
            field_path,
            "file references are not allowed here; give criteria inline",
        ));
    };
    let criteria = load_criteria(dir.join(file))?;
    *slot = serde_json::to_value(&criteria).expect("criteria serialize");
    Ok(())
}

/// Builds a scenario from its JSON form. String-valued `criteria` fields name CSV
/// files relative to `base_dir`; without a base directory they are rejected.
pub fn scenario_from_value(mut value: Value, base_dir: Option<&Path>) -> Result<Scenario> {
    if let Some(slot) = value.get_mut("criteria") {
        inline_criteria(slot, "criteria", base_dir)?;
    }
    if let Some(entries) = value.get_mut("schedule").and_then(Value::as_array_mut) {
        for (i, entry) in entries.iter_mut().enumerate() {
            if let Some(slot) = entry.get_mut("criteria") {
                inline_criteria(slot, &format!("schedule[{i}].criteria"), base_dir)?;
            }
        }
    }
    let raw: RawScenario =
        serde_path_to_error::deserialize(value).map_err(|e| schema(e.path().to_string(), e.inner()))?;

    for (i, entry) in raw.schedule.iter().enumerate() {
        let path = format!("schedule[{i}].step");
        if i > 0 && entry.step <= raw.schedule[i - 1].step {
            return Err(schema(path, "schedule steps must be strictly increasing"));
        }
        if entry.step > raw.horizon {
            return Err(schema(
                path,
                format!("step {} is beyond the horizon {}", entry.step, raw.horizon),
            ));
        }
    }
    let filter = FilterConfig::resolve(raw.filter)?;
    Scenario::new(raw.criteria, raw.initial_model, filter, raw.horizon, raw.schedule)
}

pub fn parse_scenario(text: &str, base_dir: Option<&Path>) -> Result<Scenario> {
    let value: Value = serde_json::from_str(text).map_err(|e| schema("", e))?;
    scenario_from_value(value, base_dir)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or(Path::new("."));
    parse_scenario(&read(path)?, Some(dir))
}

/// Writes the scenario with criteria inline.
pub fn write_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(scenario).expect("scenarios serialize");
    write(path.as_ref(), &(text + "\n"))
}

/// `step,alternative_id,score,rank` rows sorted by step then rank.
pub fn trajectory_csv(trajectory: &Trajectory) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for step in &trajectory.steps {
        for entry in step.ranking.entries() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                step.step,
                entry.id,
                format_score(entry.score),
                entry.rank
            );
        }
    }
    out
}

pub fn events_json(events: &[RankEvent]) -> String {
    serde_json::to_string_pretty(events).expect("events serialize") + "\n"
}

/// Path of the event file written next to a trajectory file.
pub fn events_path(trajectory_path: &Path) -> PathBuf {
    let mut name = trajectory_path.as_os_str().to_owned();
    name.push(".events.json");
    PathBuf::from(name)
}

/// Writes the trajectory CSV and its events to `<path>.events.json`.
pub fn write_trajectory(trajectory: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write(path, &trajectory_csv(trajectory))?;
    write(&events_path(path), &events_json(&trajectory.events))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub alternative_id: String,
    pub score: f64,
    pub rank: usize,
}

pub fn parse_trajectory(text: &str, source: &str) -> Result<Vec<TrajectoryRow>> {
    let (header, rows) = csv_records(text, source)?;
    if header.join(",") != TRAJECTORY_HEADER {
        return Err(parse_error(
            source,
            1,
            format!("expected header `{TRAJECTORY_HEADER}`"),
        ));
    }
    rows.into_iter()
        .map(|(line, f)| {
            if f.len() != 4 {
                return Err(parse_error(
                    source,
                    line,
                    format!("expected 4 fields, found {}", f.len()),
                ));
            }
            let int = |s: &str, what: &str| {
                s.parse::<usize>()
                    .map_err(|_| parse_error(source, line, format!("{what}: {s:?} is not an integer")))
            };
            Ok(TrajectoryRow {
                step: int(&f[0], "step")?,
                alternative_id: f[1].clone(),
                score: parse_number(&f[2], source, line, "score")?,
                rank: int(&f[3], "rank")?,
            })
        })
        .collect()
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRow>> {
    let path = path.as_ref();
    parse_trajectory(&read(path)?, &path.to_string_lossy())
}

pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<RankEvent>> {
    let path = path.as_ref();
    let text = read(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| schema(e.path().to_string(), e.inner()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn e1_fixture_matches_source_table() {
        let e1 = fixtures::e1_criteria();
        assert_eq!(e1.alternative_ids(), ["613", "2573", "292", "162", "3062"]);
        assert_eq!(e1.criterion_labels(), ["C1", "C2", "C3", "C4"]);
        assert_eq!(e1.rows()[0], vec![0.62093, 0.70547, 0.734, 0.99189]);
        assert_eq!(e1.rows()[3], vec![0.77442, 0.82363, 0.734, 0.0]);
        assert_eq!(e1.rows()[4], vec![0.5814, 0.17637, 0.7, 0.67568]);
        // value fields round-trip byte for byte
        assert_eq!(criteria_to_csv(&e1), fixtures::E1_CSV);
    }

    #[test]
    fn criteria_errors() {
        let dup = "id,a,b\n613,0.1,0.2\n613,0.3,0.4\n";
        assert!(matches!(parse_criteria(dup, "dup.csv"), Err(Error::DuplicateId(id)) if id == "613"));

        let short = "id,C1,C2,C3,C4\n613,0.1,0.2,0.3,0.4\n2573,0.1,0.2,0.3\n";
        match parse_criteria(short, "short.csv") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("2573"), "{message}");
            }
            other => panic!("{other:?}"),
        }

        let comma = "id,C1\n613,\"0,5\"\n";
        assert!(matches!(
            parse_criteria(comma, "c.csv"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_criteria("", "e.csv"), Err(Error::EmptyFile(_))));
        assert!(matches!(
            parse_criteria("id,C1\n", "e.csv"),
            Err(Error::EmptyFile(_))
        ));
    }

    #[test]
    fn score_formatting() {
        assert_eq!(format_score(1.881072764), "1.88107276");
        assert_eq!(format_score(-1e-12), "0.00000000");
        assert_eq!(format_score(-0.5), "-0.50000000");
    }

    #[test]
    fn scores_file() {
        let ids: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            parse_scores("id,score\nb,2\na,-1\n", "s", &ids).unwrap(),
            vec![-1.0, 2.0]
        );
        assert!(parse_scores("id,score\nb,2\n", "s", &ids).is_err());
        assert!(parse_scores("id,score\nb,2\nb,3\n", "s", &ids).is_err());
        assert!(parse_scores("id,score\nc,2\n", "s", &ids).is_err());
    }

    #[test]
    fn bundled_scenario_parses() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
        let sc = load_scenario(dir.join("e1_switch.json")).unwrap();
        assert_eq!(sc.filter().alpha(), 0.3);
        assert_eq!(sc.horizon(), 40);
        assert_eq!(sc.criteria(), &fixtures::e1_criteria());
        assert_eq!(sc.initial_model(), &fixtures::traditional_model());
        assert_eq!(sc.schedule()[0].model.as_ref(), Some(&fixtures::mild_model()));
        // without a base directory the file reference is refused
        assert!(matches!(
            parse_scenario(fixtures::E1_SWITCH_JSON, None),
            Err(Error::Schema { path, .. }) if path == "criteria"
        ));
    }

    fn edited(f: impl FnOnce(&mut Value)) -> Result<Scenario> {
        let mut v: Value = serde_json::from_str(fixtures::E1_SWITCH_JSON).unwrap();
        v["criteria"] = serde_json::to_value(fixtures::e1_criteria()).unwrap();
        f(&mut v);
        scenario_from_value(v, None)
    }

    #[test]
    fn scenario_errors() {
        assert!(edited(|_| {}).is_ok());
        let unsorted = edited(|v| {
            let entry = v["schedule"][0].clone();
            let mut later = entry.clone();
            later["step"] = 5.into();
            v["schedule"] = Value::Array(vec![later, entry]);
        });
        assert!(matches!(unsorted, Err(Error::Schema { path, .. }) if path == "schedule[1].step"));

        let alpha = edited(|v| v["filter"] = serde_json::json!({"alpha": 1.5}));
        assert!(matches!(alpha, Err(Error::AlphaOutOfRange(a)) if a == 1.5));

        let tau = edited(|v| v["filter"] = serde_json::json!({"tau": 1.0, "dt": 1.0})).unwrap();
        assert_eq!(tau.filter().alpha(), 0.5);

        let weights = edited(|v| v["initial_model"]["weights"] = serde_json::json!([0.1, 0.4, 0.1, 0.3]));
        match weights {
            Err(Error::Schema { path, message }) => {
                assert_eq!(path, "initial_model.weights");
                assert!(message.contains("sum to 1"), "{message}");
            }
            other => panic!("{other:?}"),
        }

        let typo = edited(|v| v["horizon"] = serde_json::json!("forty"));
        assert!(matches!(typo, Err(Error::Schema { path, .. }) if path == "horizon"));

        let beyond = edited(|v| v["schedule"][0]["step"] = 41.into());
        assert!(matches!(beyond, Err(Error::Schema { .. })));
    }

    #[test]
    fn format_detection() {
        let dir = tempfile::tempdir().unwrap();
        let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
        assert_eq!(
            DatasetFile::open(data.join("e1.csv")).unwrap().format,
            DatasetFormat::CriteriaCsv
        );
        assert_eq!(
            DatasetFile::open(data.join("e1_switch.json")).unwrap().format,
            DatasetFormat::ScenarioJson
        );
        let model = dir.path().join("m.json");
        write_model(&fixtures::traditional_model(), &model).unwrap();
        assert_eq!(
            DatasetFile::open(&model).unwrap().format,
            DatasetFormat::ModelJson
        );
        assert_eq!(load_model(&model).unwrap(), fixtures::traditional_model());

        let traj = crate::dynamics::simulate(&load_scenario(data.join("e1_switch.json")).unwrap()).unwrap();
        let out = dir.path().join("t.csv");
        write_trajectory(&traj, &out).unwrap();
        assert_eq!(
            DatasetFile::open(&out).unwrap().format,
            DatasetFormat::TrajectoryCsv
        );
        assert_eq!(
            DatasetFile::open(events_path(&out)).unwrap().format,
            DatasetFormat::EventsJson
        );
        assert!(DatasetFile::open(dir.path().join("missing.csv"))
            .unwrap_err()
            .is_io());
    }
}
