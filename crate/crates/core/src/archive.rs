//! Append-only run archive stored as line-delimited JSON.
//!
//! The first line is the header, every following line one candidate record in
//! creation order. Records are flushed one line at a time so an interrupted
//! run leaves a readable prefix behind.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::{BudgetLedger, BudgetUnit};
use crate::model::{better, CandidateRecord, ProblemSpec, ScoreError};

pub const ARCHIVE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("archive I/O: {0}")]
    Io(#[from] io::Error),
    #[error("archive integrity: line {line}: {reason}")]
    Integrity { line: usize, reason: String },
    #[error("archive schema version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("cannot prefix by {0}: timing was not recorded in this archive")]
    UnresolvableUnit(BudgetUnit),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// How timestamps and wall times are written.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    /// Real creation timestamps and measured wall times.
    #[default]
    Recorded,
    /// `created_at` is the Unix epoch plus `seq` seconds and wall times are zero,
    /// so archives of deterministic runs are byte-identical.
    Logical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveHeader {
    pub schema_version: u32,
    pub problem: ProblemSpec,
    pub engine: String,
    pub search_config: serde_json::Value,
    pub seed: u64,
    pub price_table_digest: String,
    #[serde(default)]
    pub timing: TimingMode,
}

impl ArchiveHeader {
    pub fn new(
        problem: ProblemSpec,
        engine: impl Into<String>,
        search_config: serde_json::Value,
        seed: u64,
        price_table_digest: impl Into<String>,
        timing: TimingMode,
    ) -> Self {
        Self {
            schema_version: ARCHIVE_SCHEMA_VERSION,
            problem,
            engine: engine.into(),
            search_config,
            seed,
            price_table_digest: price_table_digest.into(),
            timing,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header(ArchiveHeader),
    Record(Box<CandidateRecord>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArchive {
    pub header: ArchiveHeader,
    pub records: Vec<CandidateRecord>,
}

impl RunArchive {
    pub fn new(header: ArchiveHeader) -> Self {
        Self {
            header,
            records: Vec::new(),
        }
    }

    pub fn direction(&self) -> crate::model::Direction {
        self.header.problem.direction
    }

    /// Ids unique and `seq` strictly increasing.
    pub fn validate(&self) -> Result<(), ArchiveError> {
        let mut ids = HashSet::new();
        let mut last_seq = None;
        for (i, r) in self.records.iter().enumerate() {
            let line = i + 2;
            if !ids.insert(r.id.as_str()) {
                return Err(ArchiveError::Integrity {
                    line,
                    reason: format!("duplicate record id `{}`", r.id),
                });
            }
            if last_seq.is_some_and(|s| r.seq <= s) {
                return Err(ArchiveError::Integrity {
                    line,
                    reason: format!("record `{}` is out of creation order", r.id),
                });
            }
            if let Some(o) = &r.outcome {
                if !o.is_consistent() {
                    return Err(ArchiveError::Integrity {
                        line,
                        reason: format!("record `{}` has a score inconsistent with status {}", r.id, o.status),
                    });
                }
            }
            last_seq = Some(r.seq);
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        out.push_str(&header_line(&self.header));
        for r in &self.records {
            out.push_str(&record_line(r));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ArchiveError> {
        Self::read(text.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ArchiveError> {
        Self::read(BufReader::new(File::open(path)?))
    }

    fn read(reader: impl BufRead) -> Result<Self, ArchiveError> {
        let mut header = None;
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line).map_err(|e| ArchiveError::Integrity {
                line: line_no,
                reason: e.to_string(),
            })?;
            match (parsed, header.is_some()) {
                (Line::Header(h), false) => {
                    if h.schema_version != ARCHIVE_SCHEMA_VERSION {
                        return Err(ArchiveError::Version {
                            found: h.schema_version,
                            expected: ARCHIVE_SCHEMA_VERSION,
                        });
                    }
                    header = Some(h);
                }
                (Line::Record(r), true) => records.push(*r),
                (Line::Header(_), true) => {
                    return Err(ArchiveError::Integrity {
                        line: line_no,
                        reason: "second header".into(),
                    })
                }
                (Line::Record(_), false) => {
                    return Err(ArchiveError::Integrity {
                        line: line_no,
                        reason: "record before header".into(),
                    })
                }
            }
        }
        let header = header.ok_or(ArchiveError::Integrity {
            line: 1,
            reason: "missing header".into(),
        })?;
        let archive = Self { header, records };
        archive.validate()?;
        Ok(archive)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ArchiveError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    /// Budget a record consumes in `unit`.
    fn spend_of(&self, r: &CandidateRecord, unit: BudgetUnit) -> Result<f64, ArchiveError> {
        Ok(match unit {
            BudgetUnit::Dollars => r.dollar_cost,
            BudgetUnit::Evaluations => {
                if r.outcome.is_some() {
                    1.0
                } else {
                    0.0
                }
            }
            BudgetUnit::WallClockSeconds => {
                if self.header.timing == TimingMode::Logical {
                    return Err(ArchiveError::UnresolvableUnit(unit));
                }
                r.outcome.as_ref().map_or(0.0, |o| o.wall_time)
            }
        })
    }

    /// The chronological prefix of records whose cumulative spend stays within `cap`.
    pub fn budget_prefix(&self, unit: BudgetUnit, cap: f64) -> Result<&[CandidateRecord], ArchiveError> {
        let mut spent = 0.0;
        for (i, r) in self.records.iter().enumerate() {
            spent += self.spend_of(r, unit)?;
            if spent > cap {
                return Ok(&self.records[..i]);
            }
        }
        Ok(&self.records)
    }

    pub fn total_spend(&self, unit: BudgetUnit) -> Result<f64, ArchiveError> {
        self.records.iter().try_fold(0.0, |acc, r| Ok(acc + self.spend_of(r, unit)?))
    }

    /// Best successful record, optionally restricted to the chronological
    /// prefix that fits `budget_prefix`'s cap. Tolerance-equal scores count as
    /// ties and the earliest record wins.
    pub fn best_of(&self, budget_prefix: Option<&BudgetLedger>) -> Result<Option<&CandidateRecord>, ArchiveError> {
        let records = match budget_prefix {
            Some(l) => self.budget_prefix(l.unit, l.cap)?,
            None => &self.records[..],
        };
        best_record(records, self.direction())
    }
}

pub(crate) fn best_record(
    records: &[CandidateRecord],
    direction: crate::model::Direction,
) -> Result<Option<&CandidateRecord>, ArchiveError> {
    let mut best: Option<(&CandidateRecord, f64)> = None;
    for r in records {
        let Some(s) = r.score() else { continue };
        match best {
            Some((_, b)) if !better(s, b, direction)? => {}
            _ => best = Some((r, s)),
        }
    }
    Ok(best.map(|(r, _)| r))
}

fn header_line(h: &ArchiveHeader) -> String {
    let mut s = serde_json::to_string(&Line::Header(h.clone())).expect("header serializes");
    s.push('\n');
    s
}

fn record_line(r: &CandidateRecord) -> String {
    let mut s = serde_json::to_string(&Line::Record(Box::new(r.clone()))).expect("record serializes");
    s.push('\n');
    s
}

/// Single writer funnelling appends to the archive file. Each record is
/// written as one complete line followed by a flush.
#[derive(Debug)]
pub struct ArchiveWriter {
    file: Mutex<File>,
}

impl ArchiveWriter {
    pub fn create(path: impl AsRef<Path>, header: &ArchiveHeader) -> Result<Self, ArchiveError> {
        let mut file = File::create(path)?;
        file.write_all(header_line(header).as_bytes())?;
        file.flush()?;
        Ok(Self { file: Mutex::new(file) })
    }

    /// Reopens an existing archive for appending after validating it.
    pub fn resume(path: impl AsRef<Path>) -> Result<(Self, RunArchive), ArchiveError> {
        let archive = RunArchive::load(&path)?;
        let file = OpenOptions::new().append(true).open(path)?;
        Ok((Self { file: Mutex::new(file) }, archive))
    }

    pub fn append(&self, record: &CandidateRecord) -> Result<(), ArchiveError> {
        let line = record_line(record);
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        f.write_all(line.as_bytes())?;
        f.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Direction, EvaluationOutcome, EvaluationStatus, TokenUsage};
    use chrono::{DateTime, Utc};
    use std::collections::BTreeMap;

    fn problem(direction: Direction) -> ProblemSpec {
        ProblemSpec {
            name: "test".into(),
            direction,
            verifier_id: "circle_packing".into(),
            solution_schema_id: "circle_packing".into(),
            time_limit: 300.0,
            prompt_template_path: "circle_packing.md".into(),
            prelude_path: None,
            reference_bounds: BTreeMap::new(),
        }
    }

    fn record(seq: u64, score: Option<f64>, cost: f64) -> CandidateRecord {
        let outcome = match score {
            Some(s) => EvaluationOutcome::success(s, serde_json::json!({}), 1.0),
            None => EvaluationOutcome::failure(EvaluationStatus::RuntimeError, "boom", 1.0),
        };
        CandidateRecord {
            id: format!("c{seq}"),
            seq,
            trial_index: 0,
            generation_index: 0,
            parent_ids: vec![],
            source_text: "pass".into(),
            prompt_digest: "d".into(),
            usage: TokenUsage::default(),
            dollar_cost: cost,
            created_at: DateTime::<Utc>::from_timestamp(seq as i64, 0).unwrap(),
            outcome: Some(outcome),
        }
    }

    fn archive(direction: Direction, scores: &[Option<f64>], cost: f64) -> RunArchive {
        let header = ArchiveHeader::new(problem(direction), "iid", serde_json::json!({}), 7, "p", TimingMode::Recorded);
        let mut a = RunArchive::new(header);
        for (i, s) in scores.iter().enumerate() {
            a.records.push(record(i as u64, *s, cost));
        }
        a
    }

    #[test]
    fn ties_go_to_earliest() {
        let a = archive(Direction::Maximize, &[Some(2.1), Some(2.5), Some(2.5)], 1.0);
        assert_eq!(a.best_of(None).unwrap().unwrap().id, "c1");
        // tolerance-equal later record does not displace the earlier one
        let a = archive(Direction::Maximize, &[Some(2.5), Some(2.5 + 1e-6)], 1.0);
        assert_eq!(a.best_of(None).unwrap().unwrap().id, "c0");
    }

    #[test]
    fn all_failed_gives_none() {
        let a = archive(Direction::Maximize, &[None, None], 1.0);
        assert!(a.best_of(None).unwrap().is_none());
    }

    #[test]
    fn budget_prefix_limits_candidates() {
        let a = archive(Direction::Maximize, &[Some(1.0), Some(9.0), Some(3.0), Some(4.0), Some(5.0)], 1.0);
        let cap = BudgetLedger::cap_only(BudgetUnit::Dollars, 2.0).unwrap();
        assert_eq!(a.best_of(Some(&cap)).unwrap().unwrap().score(), Some(9.0));
        let cap = BudgetLedger::cap_only(BudgetUnit::Dollars, 1.0).unwrap();
        assert_eq!(a.best_of(Some(&cap)).unwrap().unwrap().score(), Some(1.0));
        let cap = BudgetLedger::cap_only(BudgetUnit::Evaluations, 1.5).unwrap();
        assert_eq!(a.best_of(Some(&cap)).unwrap().unwrap().score(), Some(1.0));
    }

    #[test]
    fn minimize_direction() {
        let a = archive(Direction::Minimize, &[Some(0.36), Some(0.3521), None], 1.0);
        assert_eq!(a.best_of(None).unwrap().unwrap().id, "c1");
    }

    #[test]
    fn logical_timing_cannot_prefix_by_seconds() {
        let mut a = archive(Direction::Maximize, &[Some(1.0)], 1.0);
        a.header.timing = TimingMode::Logical;
        let cap = BudgetLedger::cap_only(BudgetUnit::WallClockSeconds, 10.0).unwrap();
        assert!(matches!(a.best_of(Some(&cap)), Err(ArchiveError::UnresolvableUnit(_))));
    }

    #[test]
    fn corrupt_archives_are_rejected() {
        let a = archive(Direction::Maximize, &[Some(1.0), Some(2.0)], 1.0);
        let text = a.to_jsonl();
        let dup = text.replace("\"id\":\"c1\"", "\"id\":\"c0\"");
        assert!(matches!(RunArchive::parse(&dup), Err(ArchiveError::Integrity { .. })));
        let truncated = &text[..text.len() - 10];
        assert!(matches!(RunArchive::parse(truncated), Err(ArchiveError::Integrity { .. })));
        let headless: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
        assert!(matches!(RunArchive::parse(&headless), Err(ArchiveError::Integrity { .. })));
        let bumped = text.replace("\"schema_version\":1", "\"schema_version\":99");
        assert!(matches!(RunArchive::parse(&bumped), Err(ArchiveError::Version { .. })));
    }

    #[test]
    fn writer_appends_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let a = archive(Direction::Maximize, &[Some(1.0), None, Some(3.0)], 0.5);
        let w = ArchiveWriter::create(&path, &a.header).unwrap();
        for r in &a.records[..2] {
            w.append(r).unwrap();
        }
        drop(w);
        let (w, partial) = ArchiveWriter::resume(&path).unwrap();
        assert_eq!(partial.records.len(), 2);
        w.append(&a.records[2]).unwrap();
        let loaded = RunArchive::load(&path).unwrap();
        assert_eq!(loaded, a);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), a.to_jsonl());
    }

    proptest::proptest! {
        #[test]
        fn roundtrip_preserves_best_of_for_every_prefix(
            scores in proptest::collection::vec(proptest::option::weighted(0.7, -10.0f64..10.0), 0..20),
            costs in proptest::collection::vec(0.0f64..3.0, 20),
            minimize in proptest::bool::ANY,
        ) {
            let dir = if minimize { Direction::Minimize } else { Direction::Maximize };
            let mut a = archive(dir, &scores, 0.0);
            for (r, c) in a.records.iter_mut().zip(&costs) {
                r.dollar_cost = *c;
            }
            let b = RunArchive::parse(&a.to_jsonl()).unwrap();
            let total = a.total_spend(BudgetUnit::Dollars).unwrap();
            let whole = a.best_of(None).unwrap().map(|r| r.id.clone());
            if total > 0.0 {
                let cap = BudgetLedger::cap_only(BudgetUnit::Dollars, total).unwrap();
                proptest::prop_assert_eq!(whole.clone(), a.best_of(Some(&cap)).unwrap().map(|r| r.id.clone()));
            }
            for k in 1..=10 {
                let cap = BudgetLedger::cap_only(BudgetUnit::Dollars, k as f64 * 0.7).unwrap();
                proptest::prop_assert_eq!(
                    a.best_of(Some(&cap)).unwrap().map(|r| r.id.clone()),
                    b.best_of(Some(&cap)).unwrap().map(|r| r.id.clone())
                );
            }
        }
    }
}
