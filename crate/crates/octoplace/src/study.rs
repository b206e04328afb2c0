//! Study files: annotations CSV, schedule JSON, judgment log and report.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use octoplace_core::evaluation::{
    at_least_as_natural, summarize, Comparison, EvalError, JudgmentBook, JudgmentRecord, Method,
    PairTask, Pixel, PlacementRecord,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    Line {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("judgment for unknown task {0}")]
    UnknownTask(String),
    #[error("judgment for {task_id} says {logged} but the schedule says {scheduled}")]
    ComparisonMismatch {
        task_id: String,
        logged: Comparison,
        scheduled: Comparison,
    },
}

impl StudyError {
    pub fn is_io(&self) -> bool {
        matches!(self, StudyError::Io { .. })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StudyError + '_ {
    move |source| StudyError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl ToString) -> StudyError {
    StudyError::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationRow {
    image_id: String,
    object: String,
    method: String,
    x: Option<u32>,
    y: Option<u32>,
    excluded: u8,
}

impl AnnotationRow {
    fn into_record(self) -> Result<PlacementRecord, String> {
        let method: Method = self.method.parse().map_err(|e: EvalError| e.to_string())?;
        let excluded = match self.excluded {
            0 => false,
            1 => true,
            other => return Err(format!("excluded must be 0 or 1, got {other}")),
        };
        let pixel = match (self.x, self.y) {
            (Some(x), Some(y)) => Some(Pixel { x, y }),
            (None, None) => None,
            _ => return Err("x and y must both be set or both blank".into()),
        };
        Ok(PlacementRecord {
            image_id: self.image_id,
            object: self.object,
            method,
            pixel,
            excluded,
        })
    }
}

/// Reads `image_id,object,method,x,y,excluded` rows. `x` and `y` may be
/// blank on excluded rows.
pub fn read_annotations(path: &Path) -> Result<Vec<PlacementRecord>, StudyError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<AnnotationRow>().enumerate() {
        let line = i + 2;
        let record = row
            .map_err(|e| e.to_string())
            .and_then(AnnotationRow::into_record)
            .map_err(|message| StudyError::Line {
                path: path.to_path_buf(),
                line,
                message,
            })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_annotations(path: &Path, records: &[PlacementRecord]) -> Result<(), StudyError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| format_err(path, e))?;
    for r in records {
        let row = AnnotationRow {
            image_id: r.image_id.clone(),
            object: r.object.clone(),
            method: r.method.to_string(),
            x: r.pixel.map(|p| p.x),
            y: r.pixel.map(|p| p.y),
            excluded: r.excluded as u8,
        };
        writer.serialize(row).map_err(|e| format_err(path, e))?;
    }
    writer.flush().map_err(io_err(path))
}

/// Checks every task and that ids are unique.
pub fn validate_schedule(tasks: &[PairTask]) -> Result<(), String> {
    let mut ids = BTreeSet::new();
    for t in tasks {
        t.validate().map_err(|e| format!("task {}: {e}", t.task_id))?;
        if !ids.insert(t.task_id.as_str()) {
            return Err(format!("duplicate task id {}", t.task_id));
        }
    }
    Ok(())
}

/// Reads a schedule (a JSON array of tasks) and validates it.
pub fn read_schedule(path: &Path) -> Result<Vec<PairTask>, StudyError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let tasks: Vec<PairTask> = serde_json::from_slice(&bytes).map_err(|e| format_err(path, e))?;
    validate_schedule(&tasks).map_err(|m| format_err(path, m))?;
    Ok(tasks)
}

pub fn write_schedule(path: &Path, tasks: &[PairTask]) -> Result<(), StudyError> {
    let text = serde_json::to_string_pretty(tasks).expect("tasks serialize");
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

/// Append-only JSON-lines judgment log.
#[derive(Debug)]
pub struct JudgmentLog {
    path: PathBuf,
    file: File,
}

impl JudgmentLog {
    /// Opens (creating if needed) the log for appending and returns the
    /// records already in it.
    ///
    /// A final line without a newline was never acknowledged, so it is cut
    /// off before new records are appended after it.
    pub fn open(path: &Path) -> Result<(Self, Vec<JudgmentRecord>), StudyError> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(io_err(path))?;
        let text = std::io::read_to_string(&mut file).map_err(io_err(path))?;
        let complete = text.rfind('\n').map_or(0, |i| i + 1);
        if complete < text.len() {
            file.set_len(complete as u64).map_err(io_err(path))?;
            file.sync_data().map_err(io_err(path))?;
        }
        let records = parse_log(path, &text[..complete])?;
        Ok((
            Self {
                path: path.to_path_buf(),
                file,
            },
            records,
        ))
    }

    /// Writes one record and syncs it to disk before returning.
    pub fn append(&mut self, record: &JudgmentRecord) -> Result<(), StudyError> {
        let mut line = serde_json::to_vec(record).expect("records serialize");
        line.push(b'\n');
        self.file.write_all(&line).map_err(io_err(&self.path))?;
        self.file.flush().map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

fn parse_log(path: &Path, text: &str) -> Result<Vec<JudgmentRecord>, StudyError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| StudyError::Line {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Reads every record of a log without opening it for writing.
pub fn read_log(path: &Path) -> Result<Vec<JudgmentRecord>, StudyError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_log(path, &text)
}

/// One row of the report. Proportions are absent when nothing was judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub comparison: Comparison,
    pub n: usize,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub win: Option<f64>,
    pub tie: Option<f64>,
    pub lose: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// One row per comparison.
    pub comparisons: Vec<ReportRow>,
    /// Wins plus ties of octopus against natural, if judged.
    pub at_least_as_natural: Option<f64>,
}

impl Report {
    /// Summarizes `records`, which must all belong to `schedule` and hold at
    /// most one verdict per (task, evaluator).
    pub fn build(records: &[JudgmentRecord], schedule: &[PairTask]) -> Result<Self, StudyError> {
        let by_id: BTreeMap<&str, &PairTask> =
            schedule.iter().map(|t| (t.task_id.as_str(), t)).collect();
        for r in records {
            let task = by_id
                .get(r.task_id.as_str())
                .ok_or_else(|| StudyError::UnknownTask(r.task_id.clone()))?;
            if task.comparison != r.comparison {
                return Err(StudyError::ComparisonMismatch {
                    task_id: r.task_id.clone(),
                    logged: r.comparison,
                    scheduled: task.comparison,
                });
            }
        }
        JudgmentBook::replay(records.iter().cloned())?;
        Ok(Self::from_records(records))
    }

    /// Summarizes records without checking them against a schedule.
    pub fn from_records(records: &[JudgmentRecord]) -> Self {
        let mut aggregate = None;
        let comparisons = Comparison::ALL
            .into_iter()
            .map(|comparison| match summarize(records, comparison) {
                Ok(s) => {
                    if comparison == Comparison::OctopusVsNatural {
                        aggregate = Some(at_least_as_natural(&s));
                    }
                    ReportRow {
                        comparison,
                        n: s.n,
                        wins: s.wins,
                        ties: s.ties,
                        losses: s.losses,
                        win: Some(s.win),
                        tie: Some(s.tie),
                        lose: Some(s.lose),
                    }
                }
                Err(_) => ReportRow {
                    comparison,
                    n: 0,
                    wins: 0,
                    ties: 0,
                    losses: 0,
                    win: None,
                    tie: None,
                    lose: None,
                },
            })
            .collect();
        Self {
            comparisons,
            at_least_as_natural: aggregate,
        }
    }

    pub fn row(&self, comparison: Comparison) -> &ReportRow {
        self.comparisons
            .iter()
            .find(|r| r.comparison == comparison)
            .expect("every comparison has a row")
    }

    /// `comparison,n,win,tie,lose`, proportions printed in shortest
    /// round-trip form and blank for unjudged comparisons.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["comparison", "n", "win", "tie", "lose"])
            .expect("in-memory write");
        let fmt = |v: Option<f64>| v.map(|v| format!("{v:?}")).unwrap_or_default();
        for r in &self.comparisons {
            writer
                .write_record([
                    r.comparison.to_string(),
                    r.n.to_string(),
                    fmt(r.win),
                    fmt(r.tie),
                    fmt(r.lose),
                ])
                .expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("ASCII report")
    }
}
